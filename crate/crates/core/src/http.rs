//! Shared JSON-over-HTTP plumbing for the remote policy and remote scorer.

use std::time::Duration;

use serde::Serialize;

#[derive(Debug)]
pub(crate) enum HttpError {
    /// Connection problems or 5xx after exhausting retries.
    Transport { attempts: u32, message: String },
    /// 4xx responses and bodies that do not decode.
    Protocol(String),
}

pub(crate) fn default_agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout(Duration::from_secs(30))
        .build()
}

/// POSTs `body` as JSON, retrying transport failures and 5xx responses up to
/// `max_retries` extra attempts with a short fixed pause. Identical inputs
/// serialize to identical wire bytes.
pub(crate) fn post_json<T: Serialize>(
    agent: &ureq::Agent,
    url: &str,
    auth_token: Option<&str>,
    body: &T,
    max_retries: u32,
) -> Result<serde_json::Value, HttpError> {
    let payload = serde_json::to_string(body)
        .map_err(|e| HttpError::Protocol(format!("request serialization: {e}")))?;
    let attempts = max_retries + 1;
    let mut last_failure = String::new();
    for attempt in 1..=attempts {
        if attempt > 1 {
            std::thread::sleep(Duration::from_millis(100));
        }
        let mut request = agent.post(url).set("content-type", "application/json");
        if let Some(token) = auth_token {
            request = request.set("authorization", &format!("Bearer {token}"));
        }
        match request.send_string(&payload) {
            Ok(response) => {
                return response
                    .into_json()
                    .map_err(|e| HttpError::Protocol(format!("{url}: invalid JSON body: {e}")));
            }
            Err(ureq::Error::Status(code, _)) if (500..600).contains(&code) => {
                last_failure = format!("{url}: status {code}");
            }
            Err(ureq::Error::Status(code, _)) => {
                return Err(HttpError::Protocol(format!("{url}: status {code}")));
            }
            Err(ureq::Error::Transport(t)) => {
                last_failure = format!("{url}: {t}");
            }
        }
    }
    Err(HttpError::Transport {
        attempts,
        message: last_failure,
    })
}
