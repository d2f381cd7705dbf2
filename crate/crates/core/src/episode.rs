//! Episode engine: drives a policy against the index turn by turn, binds
//! judgments to observations, masks judged-useless observations out of later
//! prompts, and enforces the turn budget.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forge::BenchSample;
use crate::grammar::{
    parse_response, render_context, render_observation, validate_rules, Action, GrammarError,
    Observation, ObservedDoc, RuleViolation, Step, Trajectory,
};
use crate::index::Index;
use crate::policy::{Policy, PolicyError, PolicyRequest, PolicyResponse};

/// What to do when a policy response fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorPolicy {
    /// End the episode immediately.
    Terminate,
    /// Ask the policy once more with the same context, then end if the retry
    /// also fails. At most one retry per episode.
    RetryOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Maximum number of searches; the policy gets one extra call to answer.
    pub max_turns: usize,
    /// Documents per observation.
    pub top_k: usize,
    pub on_parse_error: ParseErrorPolicy,
    /// Rendered observations are cut to this many characters.
    pub observation_char_cap: usize,
    pub max_new_tokens: usize,
    pub temperature: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_turns: 4,
            top_k: 3,
            on_parse_error: ParseErrorPolicy::Terminate,
            observation_char_cap: 2000,
            max_new_tokens: 500,
            temperature: 1.0,
        }
    }
}

impl EpisodeConfig {
    /// Single-search preset for smoke tests and latency-bound runs.
    pub fn single_turn() -> Self {
        EpisodeConfig {
            max_turns: 1,
            ..EpisodeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), EpisodeError> {
        if self.max_turns == 0 {
            return Err(EpisodeError::InvalidConfig("max_turns must be >= 1".into()));
        }
        if self.top_k == 0 {
            return Err(EpisodeError::InvalidConfig("top_k must be >= 1".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(EpisodeError::InvalidConfig(
                "temperature must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    BudgetExhausted,
    ParseError,
}

/// Everything one episode produced. `contexts` holds the prompt rendered for
/// each policy call; `judged_in_call` records, per observation, the call
/// whose response judged it, which pins down exactly which later contexts
/// must mask it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trajectory: Trajectory,
    /// Final visibility per observation, in step order.
    pub context_masks: Vec<bool>,
    pub termination: Termination,
    pub turn_count: usize,
    pub contexts: Vec<String>,
    pub violations: Vec<RuleViolation>,
    pub judged_in_call: Vec<Option<usize>>,
    pub logprobs: Option<Vec<f64>>,
    pub ref_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("question is empty")]
    EmptyQuestion,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

/// Stable per-episode seed: one base seed fans out over (sample, replica)
/// without any global state. FNV-1a over the identifying bytes.
pub fn derive_seed(base: u64, sample_id: &str, replica: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    mix(&base.to_le_bytes());
    mix(sample_id.as_bytes());
    mix(&(replica as u64).to_le_bytes());
    h
}

fn call_seed(episode_seed: u64, call: usize, attempt: usize) -> u64 {
    derive_seed(episode_seed, "call", call * 2 + attempt)
}

/// Visibility of each observation under the judgments bound so far: visible
/// unless judged No.
fn live_mask(steps: &[Step]) -> Vec<bool> {
    steps
        .iter()
        .filter(|s| s.observation.is_some())
        .map(|s| s.judgment != Some(crate::grammar::Verdict::No))
        .collect()
}

fn absorb_logprobs(
    logprobs: &mut Option<Vec<f64>>,
    ref_logprobs: &mut Option<Vec<f64>>,
    response: &PolicyResponse,
) {
    match (&response.logprobs, &response.ref_logprobs) {
        (Some(lp), Some(rlp)) if lp.len() == rlp.len() => {
            if let Some(acc) = logprobs {
                acc.extend_from_slice(lp);
            }
            if let Some(acc) = ref_logprobs {
                acc.extend_from_slice(rlp);
            }
        }
        _ => {
            *logprobs = None;
            *ref_logprobs = None;
        }
    }
}

/// Runs one episode to termination.
///
/// The policy is called at most `max_turns + 1` times; each search consumes
/// one turn, and a search past the budget ends the episode as budget
/// exhausted. Judge actions bind to the most recent unjudged observation;
/// judges with nothing to bind are dropped and recorded as violations.
pub fn run_episode(
    question: &str,
    gold: &[String],
    policy: &dyn Policy,
    index: &Index,
    config: &EpisodeConfig,
    seed: u64,
) -> Result<EpisodeResult, EpisodeError> {
    config.validate()?;
    if question.trim().is_empty() {
        return Err(EpisodeError::EmptyQuestion);
    }
    let mut steps: Vec<Step> = Vec::new();
    let mut contexts: Vec<String> = Vec::new();
    let mut judged_in_call: Vec<Option<usize>> = Vec::new();
    let mut live_violations: Vec<RuleViolation> = Vec::new();
    let mut final_answer: Option<String> = None;
    let mut termination: Option<Termination> = None;
    let mut turns = 0usize;
    let mut retried = false;
    let mut logprobs = Some(Vec::new());
    let mut ref_logprobs = Some(Vec::new());
    let max_calls = config.max_turns + 1;

    'calls: while termination.is_none() && contexts.len() < max_calls {
        let call_idx = contexts.len();
        let context = render_context(question, &steps, &live_mask(&steps))?;
        contexts.push(context.clone());
        let request = PolicyRequest {
            context_text: context,
            temperature: config.temperature,
            max_new_tokens: config.max_new_tokens,
            seed: call_seed(seed, call_idx, 0),
            gold: gold.to_vec(),
        };
        let mut response = policy.next_actions(&request)?;
        let mut parsed = parse_response(&response.text);
        if parsed.is_err()
            && config.on_parse_error == ParseErrorPolicy::RetryOnce
            && !retried
        {
            retried = true;
            let retry = PolicyRequest {
                seed: call_seed(seed, call_idx, 1),
                ..request
            };
            response = policy.next_actions(&retry)?;
            parsed = parse_response(&response.text);
        }
        absorb_logprobs(&mut logprobs, &mut ref_logprobs, &response);
        let Ok(actions) = parsed else {
            termination = Some(Termination::ParseError);
            break;
        };
        for action in actions {
            match action {
                Action::Think(_) => steps.push(Step::bare(action)),
                Action::Search(query) => {
                    if turns == config.max_turns {
                        termination = Some(Termination::BudgetExhausted);
                        break 'calls;
                    }
                    if steps
                        .iter()
                        .any(|s| s.observation.is_some() && s.judgment.is_none())
                    {
                        live_violations.push(RuleViolation::SearchWithoutJudge {
                            step_index: steps.len(),
                        });
                    }
                    let docs: Vec<ObservedDoc> = index
                        .retrieve(&query, config.top_k)
                        .iter()
                        .filter_map(|hit| index.document(&hit.doc_id))
                        .map(|d| ObservedDoc {
                            doc_id: d.id.clone(),
                            title: d.title.clone(),
                            text: d.text.clone(),
                        })
                        .collect();
                    let rendered = render_observation(&docs, config.observation_char_cap);
                    steps.push(Step {
                        action: Action::Search(query),
                        observation: Some(Observation { docs, rendered }),
                        judgment: None,
                    });
                    judged_in_call.push(None);
                    turns += 1;
                }
                Action::Judge(verdict) => {
                    let target = steps
                        .iter()
                        .rposition(|s| s.observation.is_some() && s.judgment.is_none());
                    match target {
                        Some(si) => {
                            steps[si].judgment = Some(verdict);
                            let obs_idx = steps[..=si]
                                .iter()
                                .filter(|s| s.observation.is_some())
                                .count()
                                - 1;
                            judged_in_call[obs_idx] = Some(call_idx);
                        }
                        None => live_violations.push(RuleViolation::UnboundJudge {
                            step_index: steps.len(),
                        }),
                    }
                }
                Action::Answer(answer) => {
                    final_answer = Some(answer.clone());
                    steps.push(Step::bare(Action::Answer(answer)));
                    termination = Some(Termination::Answered);
                    break 'calls;
                }
            }
        }
    }

    let termination = termination.unwrap_or(Termination::BudgetExhausted);
    let trajectory = Trajectory {
        question: question.to_string(),
        steps,
        final_answer,
    };
    let mut violations = live_violations;
    for v in validate_rules(&trajectory) {
        // Timing-sensitive kinds were recorded as they happened; the final
        // structure can no longer distinguish them.
        if matches!(
            v,
            RuleViolation::MissingAnswer | RuleViolation::AnswerAfterNoJudge { .. }
        ) {
            violations.push(v);
        }
    }
    let context_masks = live_mask(&trajectory.steps);
    Ok(EpisodeResult {
        trajectory,
        context_masks,
        termination,
        turn_count: turns,
        contexts,
        violations,
        judged_in_call,
        logprobs: logprobs.filter(|v| !v.is_empty()),
        ref_logprobs: ref_logprobs.filter(|v| !v.is_empty()),
    })
}

/// Runs `group_size` episodes per sample in parallel across samples.
/// Output order matches input order; per-episode failures come back as
/// errors in place, never aborting the batch. Seeds derive from
/// `(base_seed, sample_id, replica)`, so results do not depend on thread
/// scheduling.
pub fn run_batch(
    samples: &[BenchSample],
    policy: &dyn Policy,
    index: &Index,
    config: &EpisodeConfig,
    group_size: usize,
    base_seed: u64,
) -> Vec<Vec<Result<EpisodeResult, EpisodeError>>> {
    assert!(group_size >= 1, "group_size must be >= 1");
    samples
        .par_iter()
        .map(|sample| {
            (0..group_size)
                .map(|replica| {
                    run_episode(
                        &sample.question,
                        &sample.gold,
                        policy,
                        index,
                        config,
                        derive_seed(base_seed, &sample.sample_id, replica),
                    )
                })
                .collect()
        })
        .collect()
}

/// One line of a trace file: a flattened episode, or the error that replaced
/// it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sample_id: String,
    pub replica: usize,
    pub question: String,
    pub steps: Vec<Step>,
    pub final_answer: Option<String>,
    pub termination: Option<Termination>,
    pub turn_count: usize,
    pub context_masks: Vec<bool>,
    pub violations: Vec<RuleViolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceRecord {
    pub fn from_outcome(
        sample_id: &str,
        replica: usize,
        question: &str,
        outcome: &Result<EpisodeResult, EpisodeError>,
    ) -> TraceRecord {
        match outcome {
            Ok(result) => TraceRecord {
                sample_id: sample_id.to_string(),
                replica,
                question: result.trajectory.question.clone(),
                steps: result.trajectory.steps.clone(),
                final_answer: result.trajectory.final_answer.clone(),
                termination: Some(result.termination),
                turn_count: result.turn_count,
                context_masks: result.context_masks.clone(),
                violations: result.violations.clone(),
                error: None,
            },
            Err(e) => TraceRecord {
                sample_id: sample_id.to_string(),
                replica,
                question: question.to_string(),
                steps: Vec::new(),
                final_answer: None,
                termination: None,
                turn_count: 0,
                context_masks: Vec::new(),
                violations: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    }
}

pub fn write_traces_jsonl(path: &Path, records: &[TraceRecord]) -> std::io::Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn load_traces_jsonl(path: &Path) -> std::io::Result<Vec<TraceRecord>> {
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
