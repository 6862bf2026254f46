use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::LlmClient;
use crate::error::{Error, Result};

/// JSON-over-HTTP completion service: `POST {base}/complete` and
/// `POST {base}/loglikelihood`, with an optional bearer token.
pub struct HttpClient {
    base: String,
    token: Option<String>,
    agent: ureq::Agent,
    retries: usize,
}

#[derive(Serialize)]
struct CompleteRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_tokens: usize,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

#[derive(Serialize)]
struct LikelihoodRequest<'a> {
    prompt: &'a str,
    continuation: &'a str,
}

#[derive(Deserialize)]
struct LikelihoodResponse {
    logprobs: Vec<f64>,
}

impl HttpClient {
    pub fn new(base: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpClient {
            base: base.into().trim_end_matches('/').to_string(),
            token,
            agent,
            retries: 3,
        }
    }

    /// Retries transport failures with exponential backoff starting at 500 ms.
    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, path: &str, body: &Req) -> Result<Resp> {
        let url = format!("{}/{path}", self.base);
        let mut last = String::new();
        for attempt in 0..self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << (attempt - 1)));
            }
            let mut req = self.agent.post(&url);
            if let Some(t) = &self.token {
                req = req.header("Authorization", &format!("Bearer {t}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    return resp
                        .body_mut()
                        .read_json::<Resp>()
                        .map_err(|e| Error::Llm(format!("{url}: bad response body: {e}")))
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(Error::Llm(format!("{url}: {last}")))
    }
}

impl LlmClient for HttpClient {
    fn complete(&self, prompt: &str, temperature: f64, max_tokens: usize) -> Result<String> {
        let r: CompleteResponse = self.post(
            "complete",
            &CompleteRequest {
                prompt,
                temperature,
                max_tokens,
            },
        )?;
        Ok(r.text)
    }

    fn loglikelihood(&self, prompt: &str, continuation: &str) -> Result<Vec<f64>> {
        let r: LikelihoodResponse = self.post("loglikelihood", &LikelihoodRequest { prompt, continuation })?;
        Ok(r.logprobs)
    }
}
