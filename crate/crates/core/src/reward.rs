//! Dense rewards for judging accuracy plus a sparse reward for answering
//! correctly.
//!
//! Each judged observation is compared against an ideal judgment derived
//! from a relevance score thresholded at 0.7: agreeing pays, disagreeing
//! costs, and calling a useless observation useful costs extra, since an
//! unearned Yes pollutes every later prompt while an unearned No only
//! discards one result.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Trajectory, Verdict};
use crate::http::{default_agent, post_json, HttpError};
use crate::text::contains_normalized;
use crate::{Real, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Paid when the agent's judgment matches the ideal one.
    pub r_match: Scalar,
    /// Charged for judging a useful observation useless.
    pub r_mismatch: Scalar,
    /// Charged for judging a useless observation useful. At least
    /// `r_mismatch`.
    pub r_mismatch_false_positive: Scalar,
    pub step_weight: Scalar,
    pub outcome_weight: Scalar,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_match: 0.5,
            r_mismatch: 0.5,
            r_mismatch_false_positive: 1.0,
            step_weight: 1.0,
            outcome_weight: 1.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.r_match > 0.0 && self.r_mismatch > 0.0 && self.r_mismatch_false_positive > 0.0)
        {
            return Err(RewardError::InvalidConfig(
                "match and mismatch magnitudes must be positive".into(),
            ));
        }
        if self.r_mismatch_false_positive < self.r_mismatch {
            return Err(RewardError::InvalidConfig(
                "false-positive penalty must be at least the mismatch penalty".into(),
            ));
        }
        if !(self.step_weight >= 0.0 && self.outcome_weight >= 0.0) {
            return Err(RewardError::InvalidConfig(
                "weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("gold answers are empty")]
    EmptyGold,
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
    #[error("scorer transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("scorer protocol error: {0}")]
    Protocol(String),
}

impl From<HttpError> for RewardError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => {
                RewardError::Transport { attempts, message }
            }
            HttpError::Protocol(m) => RewardError::Protocol(m),
        }
    }
}

/// Grades how useful an observation is for answering, in [0, 1].
pub trait RelevanceScorer: Send + Sync {
    fn utility_score(
        &self,
        question: &str,
        observation: &str,
        gold: &[String],
    ) -> Result<Scalar, RewardError>;

    /// Scores at or above this count as useful.
    fn threshold(&self) -> Scalar {
        0.7
    }
}

/// The judgment a perfectly informed agent would give: useful exactly when
/// the relevance score reaches the threshold.
pub fn ideal_judgment<R: Real>(score: R, threshold: R) -> Verdict {
    if score >= threshold {
        Verdict::Yes
    } else {
        Verdict::No
    }
}

/// Reward for one judged observation.
pub fn judge_reward(agent: Verdict, ideal: Verdict, config: &RewardConfig) -> Scalar {
    match (agent, ideal) {
        (a, i) if a == i => config.r_match,
        (Verdict::Yes, Verdict::No) => -config.r_mismatch_false_positive,
        _ => -config.r_mismatch,
    }
}

/// Per-step judge rewards plus the exact-match outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// (step index, reward) for every judged observation, in step order.
    pub per_step: Vec<(usize, Scalar)>,
    /// 1.0 when the final answer exact-matches a gold string, else 0.0.
    pub outcome: Scalar,
    /// step_weight * sum(per_step) + outcome_weight * outcome.
    pub total: Scalar,
}

/// Scores every judged observation and the final answer. Unjudged
/// observations earn nothing; an empty observation scores 0 without
/// consulting the scorer, so a remote scorer never sees an empty passage.
pub fn score_trajectory(
    trajectory: &Trajectory,
    gold: &[String],
    scorer: &dyn RelevanceScorer,
    config: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    config.validate()?;
    if gold.is_empty() || gold.iter().all(|g| g.trim().is_empty()) {
        return Err(RewardError::EmptyGold);
    }
    let mut per_step = Vec::new();
    for (i, step) in trajectory.steps.iter().enumerate() {
        let (Some(obs), Some(agent)) = (&step.observation, step.judgment) else {
            continue;
        };
        let score = if obs.rendered.trim().is_empty() {
            0.0
        } else {
            let s = scorer.utility_score(&trajectory.question, &obs.rendered, gold)?;
            if !(0.0..=1.0).contains(&s) {
                return Err(RewardError::Protocol(format!(
                    "utility score {s} outside [0, 1]"
                )));
            }
            s
        };
        let ideal = ideal_judgment(score, scorer.threshold());
        per_step.push((i, judge_reward(agent, ideal, config)));
    }
    let outcome = match &trajectory.final_answer {
        Some(answer) if crate::eval::em(answer, gold) => 1.0,
        _ => 0.0,
    };
    let step_sum: Scalar = per_step.iter().map(|(_, r)| r).sum();
    Ok(RewardBreakdown {
        per_step,
        outcome,
        total: config.step_weight * step_sum + config.outcome_weight * outcome,
    })
}

/// Scores 1.0 when any gold string occurs in the observation after
/// normalization, else 0.0.
#[derive(Debug, Clone)]
pub struct LexicalScorer {
    pub threshold: Scalar,
}

impl Default for LexicalScorer {
    fn default() -> Self {
        LexicalScorer { threshold: 0.7 }
    }
}

impl RelevanceScorer for LexicalScorer {
    fn utility_score(
        &self,
        _question: &str,
        observation: &str,
        gold: &[String],
    ) -> Result<Scalar, RewardError> {
        let hit = gold.iter().any(|g| contains_normalized(observation, g));
        Ok(if hit { 1.0 } else { 0.0 })
    }

    fn threshold(&self) -> Scalar {
        self.threshold
    }
}

#[derive(Serialize)]
struct RerankRequest<'a> {
    query: &'a str,
    passages: Vec<&'a str>,
    gold: &'a [String],
}

#[derive(Deserialize)]
struct RerankResponse {
    scores: Vec<Scalar>,
}

/// Client for a reranking service exposing `POST {endpoint}/rerank`. Scoring
/// failures surface as errors after retries; they are never converted into a
/// silent 0.
pub struct RemoteScorer {
    endpoint: String,
    agent: ureq::Agent,
    auth_token: Option<String>,
    threshold: Scalar,
    max_retries: u32,
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>) -> RemoteScorer {
        RemoteScorer {
            endpoint: endpoint.into(),
            agent: default_agent(),
            auth_token: None,
            threshold: 0.7,
            max_retries: 2,
        }
    }

    pub fn with_auth_token(mut self, token: Option<String>) -> RemoteScorer {
        self.auth_token = token;
        self
    }

    pub fn with_threshold(mut self, threshold: Scalar) -> RemoteScorer {
        self.threshold = threshold;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> RemoteScorer {
        self.max_retries = retries;
        self
    }
}

impl RelevanceScorer for RemoteScorer {
    fn utility_score(
        &self,
        question: &str,
        observation: &str,
        gold: &[String],
    ) -> Result<Scalar, RewardError> {
        let url = format!("{}/rerank", self.endpoint.trim_end_matches('/'));
        let body = RerankRequest {
            query: question,
            passages: vec![observation],
            gold,
        };
        let value = post_json(
            &self.agent,
            &url,
            self.auth_token.as_deref(),
            &body,
            self.max_retries,
        )?;
        let parsed: RerankResponse = serde_json::from_value(value)
            .map_err(|e| RewardError::Protocol(format!("{url}: unexpected shape: {e}")))?;
        match parsed.scores.as_slice() {
            [score] if score.is_finite() => Ok(score.clamp(0.0, 1.0)),
            [score] => Err(RewardError::Protocol(format!(
                "{url}: non-finite score {score}"
            ))),
            other => Err(RewardError::Protocol(format!(
                "{url}: expected 1 score, got {}",
                other.len()
            ))),
        }
    }

    fn threshold(&self) -> Scalar {
        self.threshold
    }
}

/// One line of a reward file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardRecord {
    pub sample_id: String,
    pub replica: usize,
    pub per_step: Vec<(usize, Scalar)>,
    pub outcome: Scalar,
    pub total: Scalar,
}

impl RewardRecord {
    pub fn new(sample_id: &str, replica: usize, breakdown: &RewardBreakdown) -> RewardRecord {
        RewardRecord {
            sample_id: sample_id.to_string(),
            replica,
            per_step: breakdown.per_step.clone(),
            outcome: breakdown.outcome,
            total: breakdown.total,
        }
    }
}

pub fn write_rewards_jsonl(path: &Path, records: &[RewardRecord]) -> std::io::Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn load_rewards_jsonl(path: &Path) -> std::io::Result<Vec<RewardRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
