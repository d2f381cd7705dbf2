//! Policies: the interface the episode engine drives, four deterministic
//! scripted behaviors for tests and demos, and an HTTP client for a remote
//! generation service.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::http::{default_agent, post_json, HttpError};
use crate::text::{capitalized_spans, contains_normalized};

/// One generation request. `gold` carries the ground truth for scripted test
/// policies that need to recognize an answer; the remote client never
/// transmits it.
#[derive(Debug, Clone)]
pub struct PolicyRequest {
    pub context_text: String,
    pub temperature: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub gold: Vec<String>,
}

/// Raw policy output. When both logprob lists are present they are
/// per-token and equally long.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyResponse {
    pub text: String,
    pub logprobs: Option<Vec<f64>>,
    pub ref_logprobs: Option<Vec<f64>>,
}

impl PolicyResponse {
    pub fn text_only(text: impl Into<String>) -> PolicyResponse {
        PolicyResponse {
            text: text.into(),
            logprobs: None,
            ref_logprobs: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl From<HttpError> for PolicyError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => {
                PolicyError::Transport { attempts, message }
            }
            HttpError::Protocol(m) => PolicyError::Protocol(m),
        }
    }
}

/// Anything that can continue a trajectory given the rendered context.
pub trait Policy: Send + Sync {
    fn next_actions(&self, request: &PolicyRequest) -> Result<PolicyResponse, PolicyError>;
}

/// Built-in deterministic behaviors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedKind {
    /// Searches the question, judges by gold containment, answers on a hit.
    Oracle,
    /// Re-issues its first query forever and never judges.
    Stubborn,
    /// Like oracle, but after a No it reformulates around the newest entity
    /// seen in the observation.
    SelfCorrecting,
    /// Answers immediately without searching.
    AnswerOnly,
}

/// A [`Policy`] that replays one of the scripted behaviors. All four are
/// pure functions of the rendered context, so the seed only matters for
/// future randomized scripts.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    kind: ScriptedKind,
    #[allow(dead_code)]
    seed: u64,
}

pub fn make_scripted(kind: ScriptedKind, seed: u64) -> ScriptedPolicy {
    ScriptedPolicy { kind, seed }
}

impl Policy for ScriptedPolicy {
    fn next_actions(&self, request: &PolicyRequest) -> Result<PolicyResponse, PolicyError> {
        let ctx = Context::read(&request.context_text);
        let text = match self.kind {
            ScriptedKind::AnswerOnly => "<answer>unknown</answer>".to_string(),
            ScriptedKind::Stubborn => {
                if ctx.searches == 0 {
                    format!(
                        "<think>The first query settles it.</think>\n<search>{}</search>",
                        ctx.question
                    )
                } else {
                    format!("<search>{}</search>", ctx.question)
                }
            }
            ScriptedKind::Oracle => {
                if ctx.needs_judge() {
                    match found_gold(ctx.last_observation, &request.gold) {
                        Some(g) => format!("<judge>Yes</judge>\n<answer>{g}</answer>"),
                        None => format!(
                            "<judge>No</judge>\n<search>{}</search>",
                            ctx.question
                        ),
                    }
                } else {
                    format!(
                        "<think>Look the question up directly.</think>\n<search>{}</search>",
                        ctx.question
                    )
                }
            }
            ScriptedKind::SelfCorrecting => {
                if ctx.needs_judge() {
                    match found_gold(ctx.last_observation, &request.gold) {
                        Some(g) => format!("<judge>Yes</judge>\n<answer>{g}</answer>"),
                        None => format!(
                            "<judge>No</judge>\n<search>{}</search>",
                            ctx.reformulated_query()
                        ),
                    }
                } else if ctx.searches == 0 {
                    format!(
                        "<think>Start from the question itself.</think>\n<search>{}</search>",
                        ctx.question
                    )
                } else {
                    format!("<search>{}</search>", ctx.reformulated_query())
                }
            }
        };
        Ok(PolicyResponse::text_only(text))
    }
}

fn found_gold<'g>(observation: &str, gold: &'g [String]) -> Option<&'g str> {
    gold.iter()
        .find(|g| contains_normalized(observation, g))
        .map(String::as_str)
}

/// Everything a scripted policy needs, pulled out of the rendered prompt.
/// Tag counting starts after the question line so the tag examples in the
/// instruction header are not mistaken for trajectory steps.
struct Context<'a> {
    question: &'a str,
    body: &'a str,
    searches: usize,
    judges: usize,
    last_observation: &'a str,
}

impl<'a> Context<'a> {
    fn read(text: &'a str) -> Context<'a> {
        let (question, body) = match text.find("\nQuestion: ") {
            Some(pos) => {
                let after = &text[pos + "\nQuestion: ".len()..];
                match after.find('\n') {
                    Some(nl) => (&after[..nl], &after[nl + 1..]),
                    None => (after, ""),
                }
            }
            None => ("", text),
        };
        let last_observation = Self::last_observation(body).unwrap_or("");
        Context {
            question,
            body,
            searches: body.matches("<search>").count(),
            judges: body.matches("<judge>").count(),
            last_observation,
        }
    }

    fn last_observation(body: &str) -> Option<&str> {
        let open = body.rfind("<observation>")?;
        let rest = &body[open + "<observation>".len()..];
        let close = rest.find("</observation>")?;
        Some(&rest[..close])
    }

    fn needs_judge(&self) -> bool {
        self.searches > self.judges
    }

    /// Follow-up query after a useless result: the latest capitalized span
    /// from the observation that is not already part of the question, plus
    /// the last content word of the question. Repeating an already-issued
    /// query is avoided by appending a qualifier.
    fn reformulated_query(&self) -> String {
        let question_lower = self.question.to_lowercase();
        let pivot = capitalized_spans(self.last_observation)
            .into_iter()
            .filter(|s| !question_lower.contains(&s.to_lowercase()))
            .next_back();
        let tail = last_content_word(self.question);
        let mut query = match (pivot, tail) {
            (Some(p), Some(t)) => format!("{p} {t}"),
            (Some(p), None) => p,
            (None, _) => format!("{} details", self.question),
        };
        while self.body.contains(&format!("<search>{query}</search>")) {
            query.push_str(" details");
        }
        query
    }
}

const STOPWORDS: [&str; 20] = [
    "the", "a", "an", "of", "in", "on", "at", "is", "was", "are", "did", "does", "who", "what",
    "when", "where", "which", "how", "why", "to",
];

fn last_content_word(question: &str) -> Option<String> {
    question
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(&w.to_lowercase().as_str()))
        .next_back()
        .map(str::to_string)
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    temperature: f64,
    max_new_tokens: usize,
    return_logprobs: bool,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
    #[serde(default)]
    logprobs: Option<Vec<f64>>,
    #[serde(default)]
    ref_logprobs: Option<Vec<f64>>,
}

/// Client for a generation service exposing `POST {endpoint}/generate`.
pub struct RemotePolicy {
    endpoint: String,
    agent: ureq::Agent,
    auth_token: Option<String>,
    return_logprobs: bool,
    max_retries: u32,
}

impl RemotePolicy {
    pub fn new(endpoint: impl Into<String>) -> RemotePolicy {
        RemotePolicy {
            endpoint: endpoint.into(),
            agent: default_agent(),
            auth_token: None,
            return_logprobs: false,
            max_retries: 2,
        }
    }

    /// Bearer token attached to every request.
    pub fn with_auth_token(mut self, token: Option<String>) -> RemotePolicy {
        self.auth_token = token;
        self
    }

    pub fn with_return_logprobs(mut self, on: bool) -> RemotePolicy {
        self.return_logprobs = on;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> RemotePolicy {
        self.max_retries = retries;
        self
    }
}

impl Policy for RemotePolicy {
    fn next_actions(&self, request: &PolicyRequest) -> Result<PolicyResponse, PolicyError> {
        let url = format!("{}/generate", self.endpoint.trim_end_matches('/'));
        let body = GenerateRequest {
            prompt: &request.context_text,
            temperature: request.temperature,
            max_new_tokens: request.max_new_tokens,
            return_logprobs: self.return_logprobs,
        };
        let value = post_json(
            &self.agent,
            &url,
            self.auth_token.as_deref(),
            &body,
            self.max_retries,
        )?;
        let parsed: GenerateResponse = serde_json::from_value(value)
            .map_err(|e| PolicyError::Protocol(format!("{url}: unexpected shape: {e}")))?;
        if let (Some(lp), Some(rlp)) = (&parsed.logprobs, &parsed.ref_logprobs) {
            if lp.len() != rlp.len() {
                return Err(PolicyError::Protocol(format!(
                    "{url}: logprob lists differ in length ({} vs {})",
                    lp.len(),
                    rlp.len()
                )));
            }
        }
        Ok(PolicyResponse {
            text: parsed.text,
            logprobs: parsed.logprobs,
            ref_logprobs: parsed.ref_logprobs,
        })
    }
}
