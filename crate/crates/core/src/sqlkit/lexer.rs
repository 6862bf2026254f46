use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TokKind {
    /// Bare word: keyword or identifier.
    Word,
    /// Identifier quoted with backticks or brackets.
    QuotedIdent,
    /// String literal in single or double quotes (Spider writes strings in double quotes).
    Str,
    Num,
    Op,
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tok {
    pub kind: TokKind,
    /// Source text of the token, quotes included.
    pub text: String,
    /// Unquoted content for strings and quoted identifiers; same as `text` otherwise.
    pub value: String,
    pub offset: usize,
}

impl Tok {
    pub fn is_word(&self, kw: &str) -> bool {
        self.kind == TokKind::Word && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokKind::Op && self.text == op
    }
}

pub fn lex(src: &str) -> Result<Vec<Tok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let push = |out: &mut Vec<Tok>, kind, start: usize, end: usize, value: String| {
        out.push(Tok {
            kind,
            text: src[start..end].to_string(),
            value,
            offset: start,
        });
    };
    while i < bytes.len() {
        let c = src[i..].chars().next().expect("in bounds");
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        match c {
            '\'' | '"' => {
                let quote = c;
                i += 1;
                let mut value = String::new();
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(Error::Syntax {
                            offset: start,
                            message: "unterminated string literal".into(),
                        });
                    };
                    i += ch.len_utf8();
                    if ch == quote {
                        if src[i..].starts_with(quote) {
                            value.push(quote);
                            i += 1;
                            continue;
                        }
                        break;
                    }
                    value.push(ch);
                }
                push(&mut out, TokKind::Str, start, i, value);
            }
            '`' | '[' => {
                let close = if c == '`' { '`' } else { ']' };
                let Some(len) = src[i + 1..].find(close) else {
                    return Err(Error::Syntax {
                        offset: start,
                        message: "unterminated quoted identifier".into(),
                    });
                };
                let value = src[i + 1..i + 1 + len].to_string();
                i += len + 2;
                push(&mut out, TokKind::QuotedIdent, start, i, value);
            }
            '(' | ')' | ',' | ';' => {
                i += 1;
                let kind = match c {
                    '(' => TokKind::LParen,
                    ')' => TokKind::RParen,
                    ',' => TokKind::Comma,
                    _ => TokKind::Semi,
                };
                push(&mut out, kind, start, i, c.to_string());
            }
            '.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i += 1;
                push(&mut out, TokKind::Dot, start, i, ".".into());
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = src[start..i].to_string();
                push(&mut out, TokKind::Num, start, i, text);
            }
            c if c.is_alphabetic() || c == '_' => {
                while let Some(ch) = src[i..].chars().next() {
                    if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                        i += ch.len_utf8();
                    } else {
                        break;
                    }
                }
                let text = src[start..i].to_string();
                push(&mut out, TokKind::Word, start, i, text);
            }
            _ => {
                let two = src.get(i..i + 2).unwrap_or("");
                let op = match two {
                    "<=" | ">=" | "!=" | "<>" | "||" | "==" => two,
                    _ => match c {
                        '=' | '<' | '>' | '+' | '-' | '*' | '/' | '%' => &src[i..i + 1],
                        _ => {
                            return Err(Error::Syntax {
                                offset: start,
                                message: format!("unexpected character `{c}`"),
                            })
                        }
                    },
                };
                i += op.len();
                push(&mut out, TokKind::Op, start, i, op.to_string());
            }
        }
    }
    Ok(out)
}

/// Joins source tokens with single spaces, except around `.` in qualified names.
pub fn join_tokens<'a>(toks: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    let mut prev_dot = false;
    for (i, t) in toks.into_iter().enumerate() {
        let is_dot = t == ".";
        if i > 0 && !is_dot && !prev_dot {
            out.push(' ');
        }
        out.push_str(t);
        prev_dot = is_dot;
    }
    out
}
