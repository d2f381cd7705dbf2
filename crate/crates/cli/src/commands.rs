//! The three workflows behind the binary: run episodes and export training
//! artifacts, forge a contamination-controlled benchmark, and evaluate
//! traces or budget sweeps.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};

use requery_core::advantage::{
    gae_advantages, grpo_advantages, kl_penalty_low_var, write_advantages_jsonl, Algorithm,
    AdvantageSet,
};
use requery_core::corpus::{load_corpus_jsonl, save_corpus_jsonl};
use requery_core::episode::{load_traces_jsonl, run_batch, write_traces_jsonl, TraceRecord};
use requery_core::eval::{
    evaluate_traces, tally_judge_impact, turn_sweep, write_judge_impact_csv,
    write_turn_sweep_csv, EvalReport, JudgeImpactCounts, TurnSweepRow,
};
use requery_core::forge::{
    forge_benchmark, load_samples_jsonl, save_samples_jsonl, RemoteRewriter, Rewriter,
    SampleKind, TemplateRewriter,
};
use requery_core::index::Index;
use requery_core::policy::{make_scripted, Policy, RemotePolicy};
use requery_core::reward::{
    score_trajectory, write_rewards_jsonl, LexicalScorer, RelevanceScorer, RemoteScorer,
    RewardBreakdown, RewardRecord,
};
use requery_core::Scalar;

use crate::config::{
    dataset_label, require, EvalConfig, ForgeConfig, PolicyKind, PolicySection, RewriterKind,
    RunConfig, ScorerKind, ScorerSection,
};

/// Bearer token for remote services, read from the environment so it never
/// lands in config snapshots.
pub const AUTH_TOKEN_ENV: &str = "REQUERY_AUTH_TOKEN";

fn auth_token() -> Option<String> {
    std::env::var(AUTH_TOKEN_ENV).ok().filter(|t| !t.is_empty())
}

fn build_policy(section: &PolicySection) -> anyhow::Result<Box<dyn Policy>> {
    match section.kind {
        PolicyKind::Scripted => Ok(Box::new(make_scripted(section.scripted, 0))),
        PolicyKind::Remote => {
            let endpoint = section
                .endpoint
                .clone()
                .context("policy.endpoint is required when policy.kind = \"remote\"")?;
            Ok(Box::new(
                RemotePolicy::new(endpoint)
                    .with_auth_token(auth_token())
                    .with_return_logprobs(section.return_logprobs)
                    .with_max_retries(section.max_retries),
            ))
        }
    }
}

fn build_scorer(section: &ScorerSection) -> anyhow::Result<Box<dyn RelevanceScorer>> {
    match section.kind {
        ScorerKind::Lexical => Ok(Box::new(LexicalScorer {
            threshold: section.threshold,
        })),
        ScorerKind::Remote => {
            let endpoint = section
                .endpoint
                .clone()
                .context("scorer.endpoint is required when scorer.kind = \"remote\"")?;
            Ok(Box::new(
                RemoteScorer::new(endpoint)
                    .with_auth_token(auth_token())
                    .with_threshold(section.threshold)
                    .with_max_retries(section.max_retries),
            ))
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub episodes: usize,
    pub errored: usize,
    pub em: Scalar,
    pub advantage_rows: usize,
}

/// Runs every sample `group_size` times, then writes traces.jsonl,
/// rewards.jsonl, advantages.jsonl, eval.json, and a config.toml snapshot
/// into the output directory. Episodes that fail are recorded in the traces
/// with their error, skipped in the rewards, and disqualify their sample's
/// advantage row.
pub fn cmd_run(config: &RunConfig) -> anyhow::Result<RunSummary> {
    let corpus_path = require(&config.corpus, "corpus")?;
    let dataset_path = require(&config.dataset, "dataset")?;
    let out_dir = require(&config.out_dir, "out-dir")?;
    config.episode.validate()?;
    config.reward.validate()?;
    if config.group_size == 0 {
        bail!("group_size must be >= 1");
    }

    let corpus = load_corpus_jsonl(&corpus_path)?;
    let samples = load_samples_jsonl(&dataset_path)?;
    if samples.is_empty() {
        bail!("dataset {} holds no samples", dataset_path.display());
    }
    let index = Index::build(&corpus);
    let policy = build_policy(&config.policy)?;
    let scorer = build_scorer(&config.scorer)?;

    let groups = run_batch(
        &samples,
        policy.as_ref(),
        &index,
        &config.episode,
        config.group_size,
        config.base_seed,
    );

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let mut traces = Vec::with_capacity(samples.len() * config.group_size);
    let mut errored = 0usize;
    for (sample, group) in samples.iter().zip(&groups) {
        for (replica, outcome) in group.iter().enumerate() {
            errored += usize::from(outcome.is_err());
            traces.push(TraceRecord::from_outcome(
                &sample.sample_id,
                replica,
                &sample.question,
                outcome,
            ));
        }
    }
    write_traces_jsonl(&out_dir.join("traces.jsonl"), &traces)?;

    let mut reward_rows = Vec::new();
    let mut breakdowns: Vec<Vec<Option<RewardBreakdown>>> = Vec::with_capacity(samples.len());
    for (sample, group) in samples.iter().zip(&groups) {
        let mut per_replica = Vec::with_capacity(group.len());
        for (replica, outcome) in group.iter().enumerate() {
            match outcome {
                Ok(result) => {
                    let breakdown = score_trajectory(
                        &result.trajectory,
                        &sample.gold,
                        scorer.as_ref(),
                        &config.reward,
                    )?;
                    reward_rows.push(RewardRecord::new(&sample.sample_id, replica, &breakdown));
                    per_replica.push(Some(breakdown));
                }
                Err(_) => per_replica.push(None),
            }
        }
        breakdowns.push(per_replica);
    }
    write_rewards_jsonl(&out_dir.join("rewards.jsonl"), &reward_rows)?;

    let mut sets = Vec::new();
    for ((sample, group), per_replica) in samples.iter().zip(&groups).zip(&breakdowns) {
        let Some(bds) = per_replica
            .iter()
            .map(Option::as_ref)
            .collect::<Option<Vec<&RewardBreakdown>>>()
        else {
            continue;
        };
        let estimator = config.advantage.config;
        let mut set = AdvantageSet {
            sample_id: sample.sample_id.clone(),
            algorithm: config.advantage.algorithm,
            replica_advantages: None,
            step_advantages: None,
            kl: None,
            config: estimator,
        };
        match config.advantage.algorithm {
            Algorithm::Grpo => {
                let totals: Vec<Scalar> = bds.iter().map(|b| b.total).collect();
                set.replica_advantages = Some(grpo_advantages(&totals, estimator.epsilon));
            }
            Algorithm::Gae => {
                let mut rows = Vec::with_capacity(bds.len());
                for b in &bds {
                    // Weighted reward stream: one entry per judged step,
                    // with the outcome paid on a final terminal step. No
                    // critic, so values are zero throughout.
                    let mut rewards: Vec<Scalar> = b
                        .per_step
                        .iter()
                        .map(|(_, r)| r * config.reward.step_weight)
                        .collect();
                    rewards.push(b.outcome * config.reward.outcome_weight);
                    let values = vec![0.0; rewards.len() + 1];
                    rows.push(gae_advantages(
                        &rewards,
                        &values,
                        estimator.gamma,
                        estimator.lambda,
                    )?);
                }
                set.step_advantages = Some(rows);
            }
        }
        let log_pairs: Option<Vec<(&Vec<f64>, &Vec<f64>)>> = group
            .iter()
            .map(|outcome| {
                outcome
                    .as_ref()
                    .ok()
                    .and_then(|r| r.logprobs.as_ref().zip(r.ref_logprobs.as_ref()))
            })
            .collect();
        if let Some(pairs) = log_pairs {
            let mut rows = Vec::with_capacity(pairs.len());
            for (lp, rlp) in pairs {
                rows.push(kl_penalty_low_var(lp, rlp, estimator.beta)?);
            }
            set.kl = Some(rows);
        }
        sets.push(set);
    }
    write_advantages_jsonl(&out_dir.join("advantages.jsonl"), &sets)?;

    let label = dataset_label(&config.dataset_name, &dataset_path);
    let report = evaluate_traces(&label, &traces, &samples)?;
    fs::write(
        out_dir.join("eval.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    fs::write(out_dir.join("config.toml"), toml::to_string_pretty(config)?)?;

    Ok(RunSummary {
        out_dir,
        episodes: traces.len(),
        errored,
        em: report.em,
        advantage_rows: sets.len(),
    })
}

#[derive(Debug)]
pub struct ForgeSummary {
    pub out_dir: PathBuf,
    pub samples: usize,
    pub fictional: usize,
    pub injected_docs: usize,
    pub audit_clean: bool,
}

/// Rewrites a fraction of the seed samples into fictional ones, then writes
/// benchmark.jsonl, corpus.jsonl (base plus injected documents), audit.json,
/// and a forge.toml snapshot into the output directory.
pub fn cmd_forge(config: &ForgeConfig) -> anyhow::Result<ForgeSummary> {
    let seeds_path = require(&config.seeds, "seeds")?;
    let corpus_path = require(&config.corpus, "corpus")?;
    let out_dir = require(&config.out_dir, "out-dir")?;

    let seeds = load_samples_jsonl(&seeds_path)?;
    let base = load_corpus_jsonl(&corpus_path)?;
    let rewriter: Box<dyn Rewriter> = match config.rewriter.kind {
        RewriterKind::Template => Box::new(
            TemplateRewriter::new(&base).with_support_docs(config.rewriter.support_docs),
        ),
        RewriterKind::Remote => {
            let endpoint = config
                .rewriter
                .endpoint
                .clone()
                .context("rewriter.endpoint is required when rewriter.kind = \"remote\"")?;
            Box::new(
                RemoteRewriter::new(endpoint)
                    .with_auth_token(auth_token())
                    .with_max_retries(config.rewriter.max_retries),
            )
        }
    };

    let output = forge_benchmark(&seeds, &base, rewriter.as_ref(), config.fraction, config.seed)?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    save_samples_jsonl(&out_dir.join("benchmark.jsonl"), &output.samples)?;
    save_corpus_jsonl(&out_dir.join("corpus.jsonl"), &output.corpus)?;
    fs::write(
        out_dir.join("audit.json"),
        serde_json::to_string_pretty(&output.audit)? + "\n",
    )?;
    fs::write(out_dir.join("forge.toml"), toml::to_string_pretty(config)?)?;

    Ok(ForgeSummary {
        out_dir,
        samples: output.samples.len(),
        fictional: output
            .samples
            .iter()
            .filter(|s| s.kind == SampleKind::Fictional)
            .count(),
        injected_docs: output.corpus.len() - base.len(),
        audit_clean: output.audit.is_clean(),
    })
}

#[derive(Debug)]
pub enum EvalSummary {
    /// Scored an existing trace file; wrote eval.json and judge_impact.csv.
    Traces {
        out_dir: PathBuf,
        report: EvalReport,
        impact: JudgeImpactCounts,
    },
    /// Reran the samples across budgets; wrote turn_sweep.csv.
    Sweep {
        out_dir: PathBuf,
        rows: Vec<TurnSweepRow>,
    },
}

/// Trace mode when `budgets` is empty, sweep mode otherwise.
pub fn cmd_eval(config: &EvalConfig) -> anyhow::Result<EvalSummary> {
    let dataset_path = require(&config.dataset, "dataset")?;
    let out_dir = require(&config.out_dir, "out-dir")?;
    let samples = load_samples_jsonl(&dataset_path)?;
    let label = dataset_label(&config.dataset_name, &dataset_path);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    if config.budgets.is_empty() {
        let traces_path = require(&config.traces, "traces")?;
        let records = load_traces_jsonl(&traces_path)?;
        let report = evaluate_traces(&label, &records, &samples)?;
        let impact = tally_judge_impact(&records, &samples)?;
        fs::write(
            out_dir.join("eval.json"),
            serde_json::to_string_pretty(&report)? + "\n",
        )?;
        let mut csv = Vec::new();
        write_judge_impact_csv(&mut csv, &[(label, impact)])?;
        fs::write(out_dir.join("judge_impact.csv"), csv)?;
        Ok(EvalSummary::Traces {
            out_dir,
            report,
            impact,
        })
    } else {
        let corpus_path = require(&config.corpus, "corpus")?;
        let corpus = load_corpus_jsonl(&corpus_path)?;
        let index = Index::build(&corpus);
        let policy = build_policy(&config.policy)?;
        config.episode.validate()?;
        let rows = turn_sweep(
            &samples,
            policy.as_ref(),
            &index,
            &config.episode,
            &config.budgets,
            &label,
            config.base_seed,
        )?;
        let mut csv = Vec::new();
        write_turn_sweep_csv(&mut csv, &rows)?;
        fs::write(out_dir.join("turn_sweep.csv"), csv)?;
        Ok(EvalSummary::Sweep { out_dir, rows })
    }
}
