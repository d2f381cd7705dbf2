//! Advantage estimation over episode rewards: group-relative normalization,
//! temporal-difference estimation with eligibility decay, and a low-variance
//! penalty for drifting from a reference model.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Real, Scalar};

#[derive(Debug, Error)]
pub enum AdvantageError {
    #[error("rewards length {rewards} needs values length {}, got {values}", rewards + 1)]
    ValueLength { rewards: usize, values: usize },
    #[error("logprob lists differ in length ({0} vs {1})")]
    LogprobLength(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Group-relative advantages: each total standardized against its own group,
/// a_i = (r_i - mean) / (population std + epsilon).
///
/// A group with no variance, including a single-element group, yields all
/// zeros. The mean of the output is 0 and, for epsilon = 0, its population
/// std is 1.
pub fn grpo_advantages<R: Real>(totals: &[R], epsilon: R) -> Vec<R> {
    if totals.is_empty() {
        return Vec::new();
    }
    if totals.iter().all(|&t| t == totals[0]) {
        return vec![R::zero(); totals.len()];
    }
    let n = R::from_usize(totals.len()).expect("group size representable");
    let mean = totals.iter().fold(R::zero(), |acc, &t| acc + t) / n;
    let var = totals
        .iter()
        .fold(R::zero(), |acc, &t| acc + (t - mean) * (t - mean))
        / n;
    let std = var.sqrt();
    totals.iter().map(|&t| (t - mean) / (std + epsilon)).collect()
}

/// Temporal-difference advantages with decay, computed backward:
/// A_t = delta_t + gamma * lambda * A_{t+1}, where
/// delta_t = r_t + gamma * V_{t+1} - V_t.
///
/// `values` carries one entry per step plus the terminal bootstrap, so it is
/// one longer than `rewards`. With lambda = 1 and zero values this reduces
/// to discounted reward-to-go; with lambda = 0 it reduces to the one-step
/// deltas.
pub fn gae_advantages<R: Real>(
    rewards: &[R],
    values: &[R],
    gamma: R,
    lambda: R,
) -> Result<Vec<R>, AdvantageError> {
    if values.len() != rewards.len() + 1 {
        return Err(AdvantageError::ValueLength {
            rewards: rewards.len(),
            values: values.len(),
        });
    }
    for (name, p) in [("gamma", gamma), ("lambda", lambda)] {
        if p < R::zero() || p > R::one() {
            return Err(AdvantageError::InvalidParam(format!(
                "{name} must be in [0, 1], got {p:?}"
            )));
        }
    }
    let mut advantages = vec![R::zero(); rewards.len()];
    let mut acc = R::zero();
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        acc = delta + gamma * lambda * acc;
        advantages[t] = acc;
    }
    Ok(advantages)
}

/// Per-token penalty for drifting from the reference policy, using the
/// low-variance estimator beta * (e^d - d - 1) with d = ref_logp - logp.
/// Each term is non-negative; identical streams cost exactly zero.
pub fn kl_penalty_low_var<R: Real>(
    logp: &[R],
    ref_logp: &[R],
    beta: R,
) -> Result<Vec<R>, AdvantageError> {
    if logp.len() != ref_logp.len() {
        return Err(AdvantageError::LogprobLength(logp.len(), ref_logp.len()));
    }
    if beta < R::zero() {
        return Err(AdvantageError::InvalidParam(format!(
            "beta must be >= 0, got {beta:?}"
        )));
    }
    Ok(logp
        .iter()
        .zip(ref_logp)
        .map(|(&lp, &rlp)| {
            let d = rlp - lp;
            // exp_m1 keeps small drifts accurate; the clamp absorbs the last
            // ulp of rounding so the penalty never dips below zero.
            (beta * (d.exp_m1() - d)).max(R::zero())
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Grpo,
    Gae,
}

/// Estimator constants captured alongside every exported advantage row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvantageConfig {
    pub gamma: Scalar,
    pub lambda: Scalar,
    pub beta: Scalar,
    pub epsilon: Scalar,
}

impl Default for AdvantageConfig {
    fn default() -> Self {
        AdvantageConfig {
            gamma: 0.99,
            lambda: 0.95,
            beta: 0.001,
            epsilon: 1e-8,
        }
    }
}

/// One line of an advantage file: group-relative rows carry one advantage
/// per replica, temporal-difference rows one advantage list per replica.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvantageSet {
    pub sample_id: String,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replica_advantages: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_advantages: Option<Vec<Vec<Scalar>>>,
    /// Per-replica, per-token penalties; absent when the policy reported no
    /// logprobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<Vec<Vec<Scalar>>>,
    pub config: AdvantageConfig,
}

pub fn write_advantages_jsonl(path: &Path, sets: &[AdvantageSet]) -> std::io::Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    for set in sets {
        serde_json::to_writer(&mut writer, set)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn load_advantages_jsonl(path: &Path) -> std::io::Result<Vec<AdvantageSet>> {
    let reader = BufReader::new(File::open(path)?);
    let mut sets = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        sets.push(serde_json::from_str(&line)?);
    }
    Ok(sets)
}
