use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub index: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub tokens: Vec<Token>,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }
}

const SUFFIXES: [&str; 4] = ["ing", "es", "ed", "s"];
const MIN_STEM: usize = 3;

/// Rule-based suffix stripping. The first suffix whose removal leaves a stem of at
/// least three characters wins; numbers are left alone.
pub fn lemmatize(surface: &str) -> String {
    if surface.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return surface.to_string();
    }
    for suffix in SUFFIXES {
        if let Some(stem) = surface.strip_suffix(suffix) {
            if stem.chars().count() >= MIN_STEM {
                return stem.to_string();
            }
        }
    }
    surface.to_string()
}

/// Words of a schema name: `head_id` and `head id` both give `["head", "id"]`.
pub fn name_words(name: &str) -> Vec<String> {
    name.split(|c: char| c == '_' || c.is_whitespace())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercase word tokens split on whitespace and punctuation. A `.` between two
/// digits stays inside the number, so `1.5` is one token.
pub fn tokenize_question(text: &str) -> Result<TokenSeq> {
    if text.trim().is_empty() {
        return Err(Error::invalid("cannot tokenize an empty question"));
    }
    let chars: Vec<char> = text.chars().collect();
    let mut words = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let decimal_point = c == '.'
            && current.chars().last().is_some_and(|p| p.is_ascii_digit())
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_alphanumeric() || decimal_point {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            words.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        words.push(current);
    }
    if words.is_empty() {
        return Err(Error::invalid(format!("question {text:?} has no word tokens")));
    }
    let tokens = words
        .into_iter()
        .enumerate()
        .map(|(index, surface)| Token {
            lemma: lemmatize(&surface),
            surface,
            index,
        })
        .collect();
    Ok(TokenSeq { tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_question() {
        let seq = tokenize_question("Which regions speak Dutch or English?").unwrap();
        assert_eq!(seq.surfaces(), ["which", "regions", "speak", "dutch", "or", "english"]);
        assert_eq!(seq.tokens[1].lemma, "region");
        assert_eq!(seq.tokens[5].index, 5);
    }

    #[test]
    fn keeps_numbers_drops_punctuation() {
        let seq = tokenize_question("older than 56 ?").unwrap();
        assert_eq!(seq.surfaces(), ["older", "than", "56"]);
        let seq = tokenize_question("rated 4.5, or 3.").unwrap();
        assert_eq!(seq.surfaces(), ["rated", "4.5", "or", "3"]);
    }

    #[test]
    fn empty_is_error() {
        assert!(tokenize_question("").is_err());
        assert!(tokenize_question("  \t ").is_err());
        assert!(tokenize_question("?!").is_err());
    }

    #[test]
    fn schema_name_words() {
        assert_eq!(name_words("head_id"), ["head", "id"]);
        assert_eq!(name_words("head id"), ["head", "id"]);
        assert_eq!(name_words("Name"), ["name"]);
    }

    #[test]
    fn lemma_rules() {
        assert_eq!(lemmatize("speaking"), "speak");
        assert_eq!(lemmatize("classes"), "class");
        assert_eq!(lemmatize("started"), "start");
        assert_eq!(lemmatize("uses"), "use");
        assert_eq!(lemmatize("is"), "is");
        assert_eq!(lemmatize("bus"), "bus");
        assert_eq!(lemmatize("1500s"), "1500s");
    }

    proptest! {
        #[test]
        fn idempotent_on_lowercased_text(s in "[a-zA-Z0-9 ,.?']{1,40}") {
            if let Ok(first) = tokenize_question(&s) {
                let joined = first.surfaces().join(" ");
                let again = tokenize_question(&joined).unwrap();
                prop_assert_eq!(&first, &again);
                prop_assert_eq!(first, tokenize_question(&s).unwrap());
            }
        }
    }
}
