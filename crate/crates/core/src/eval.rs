//! Exact-match evaluation, a taxonomy of how judgments shaped episodes, and
//! a sweep of accuracy against the search budget.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{run_batch, EpisodeConfig, TraceRecord};
use crate::forge::BenchSample;
use crate::grammar::{Step, Verdict};
use crate::index::Index;
use crate::policy::Policy;
use crate::text::contains_normalized;
use crate::Scalar;

pub use crate::text::normalize_answer;

/// Exact match after normalization against any gold string.
pub fn em(prediction: &str, gold: &[String]) -> bool {
    let p = normalize_answer(prediction);
    gold.iter().any(|g| normalize_answer(g) == p)
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no trace records")]
    EmptyTraces,
    #[error("no samples")]
    EmptySamples,
    #[error("trace references unknown sample `{0}`")]
    UnknownSample(String),
    #[error("budgets must be non-empty and strictly ascending, starting at 1 or more")]
    InvalidBudgets,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub sample_id: String,
    pub replica: usize,
    pub em: bool,
    /// True when the episode errored out instead of finishing; counted as a
    /// miss.
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    /// Episodes evaluated, replicas counted individually.
    pub n: usize,
    /// Mean exact match over all episodes.
    pub em: Scalar,
    pub per_sample: Vec<SampleEval>,
}

/// Scores trace records against their samples' gold answers.
pub fn evaluate_traces(
    dataset: &str,
    records: &[TraceRecord],
    samples: &[BenchSample],
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyTraces);
    }
    let mut per_sample = Vec::with_capacity(records.len());
    let mut hits = 0usize;
    for record in records {
        let sample = samples
            .iter()
            .find(|s| s.sample_id == record.sample_id)
            .ok_or_else(|| EvalError::UnknownSample(record.sample_id.clone()))?;
        let errored = record.error.is_some();
        let matched = !errored
            && record
                .final_answer
                .as_deref()
                .is_some_and(|a| em(a, &sample.gold));
        hits += usize::from(matched);
        per_sample.push(SampleEval {
            sample_id: record.sample_id.clone(),
            replica: record.replica,
            em: matched,
            error: errored,
        });
    }
    Ok(EvalReport {
        dataset: dataset.to_string(),
        n: records.len(),
        em: hits as Scalar / records.len() as Scalar,
        per_sample,
    })
}

/// How one judgment played out against the episode outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeImpact {
    /// Accepted evidence and the episode ended correct, or rejected an
    /// observation that truly lacked the answer.
    Positive,
    /// Accepted an observation that contained the answer, yet the episode
    /// ended wrong.
    Negative,
    /// Everything else.
    Normal,
}

/// Classifies one judged step; `None` when the step carries no judgment.
/// The positive rule wins when rules overlap, and every judged step lands in
/// exactly one category.
pub fn classify_judge_impact(
    step: &Step,
    gold: &[String],
    episode_correct: bool,
) -> Option<JudgeImpact> {
    let verdict = step.judgment?;
    let observation = step
        .observation
        .as_ref()
        .map(|o| o.rendered.as_str())
        .unwrap_or("");
    let contains_gold = gold.iter().any(|g| contains_normalized(observation, g));
    Some(match verdict {
        Verdict::Yes if episode_correct => JudgeImpact::Positive,
        Verdict::No if !contains_gold => JudgeImpact::Positive,
        Verdict::Yes if contains_gold => JudgeImpact::Negative,
        _ => JudgeImpact::Normal,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeImpactCounts {
    pub positive: usize,
    pub negative: usize,
    pub normal: usize,
}

impl JudgeImpactCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.normal
    }

    fn add(&mut self, impact: JudgeImpact) {
        match impact {
            JudgeImpact::Positive => self.positive += 1,
            JudgeImpact::Negative => self.negative += 1,
            JudgeImpact::Normal => self.normal += 1,
        }
    }
}

/// Tallies every judged step across the given traces.
pub fn tally_judge_impact(
    records: &[TraceRecord],
    samples: &[BenchSample],
) -> Result<JudgeImpactCounts, EvalError> {
    let mut counts = JudgeImpactCounts::default();
    for record in records {
        let sample = samples
            .iter()
            .find(|s| s.sample_id == record.sample_id)
            .ok_or_else(|| EvalError::UnknownSample(record.sample_id.clone()))?;
        let correct = record
            .final_answer
            .as_deref()
            .is_some_and(|a| em(a, &sample.gold));
        for step in &record.steps {
            if let Some(impact) = classify_judge_impact(step, &sample.gold, correct) {
                counts.add(impact);
            }
        }
    }
    Ok(counts)
}

/// `dataset,positive,negative,normal` rows.
pub fn write_judge_impact_csv<W: Write>(
    mut writer: W,
    rows: &[(String, JudgeImpactCounts)],
) -> std::io::Result<()> {
    writeln!(writer, "dataset,positive,negative,normal")?;
    for (dataset, counts) in rows {
        writeln!(
            writer,
            "{dataset},{},{},{}",
            counts.positive, counts.negative, counts.normal
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnSweepRow {
    pub budget: usize,
    pub dataset: String,
    pub em: Scalar,
}

/// Reruns the same samples under increasing search budgets, one episode per
/// sample, and reports mean exact match per budget. Episodes that error
/// count as misses rather than aborting the sweep.
pub fn turn_sweep(
    samples: &[BenchSample],
    policy: &dyn Policy,
    index: &Index,
    base_config: &EpisodeConfig,
    budgets: &[usize],
    dataset: &str,
    base_seed: u64,
) -> Result<Vec<TurnSweepRow>, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySamples);
    }
    if budgets.is_empty()
        || budgets[0] == 0
        || budgets.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(EvalError::InvalidBudgets);
    }
    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let config = EpisodeConfig {
            max_turns: budget,
            ..base_config.clone()
        };
        let groups = run_batch(samples, policy, index, &config, 1, base_seed);
        let mut hits = 0usize;
        for (sample, group) in samples.iter().zip(&groups) {
            if let Ok(result) = &group[0] {
                let matched = result
                    .trajectory
                    .final_answer
                    .as_deref()
                    .is_some_and(|a| em(a, &sample.gold));
                hits += usize::from(matched);
            }
        }
        rows.push(TurnSweepRow {
            budget,
            dataset: dataset.to_string(),
            em: hits as Scalar / samples.len() as Scalar,
        });
    }
    Ok(rows)
}

/// `budget,dataset,em` rows, em to four decimal places.
pub fn write_turn_sweep_csv<W: Write>(
    mut writer: W,
    rows: &[TurnSweepRow],
) -> std::io::Result<()> {
    writeln!(writer, "budget,dataset,em")?;
    for row in rows {
        writeln!(writer, "{},{},{:.4}", row.budget, row.dataset, row.em)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{Action, Observation};

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_answer("The  Night-Watch!"), "nightwatch");
        assert_eq!(normalize_answer("An Answer, a theatre"), "answer theatre");
    }

    #[test]
    fn em_ignores_case_articles_punctuation_whitespace() {
        let gold = |s: &str| vec![s.to_string()];
        assert!(em("The Beatles", &gold("beatles")));
        assert!(em("1987.", &gold("1987")));
        assert!(em("  nineteen   eighty-seven ", &gold("Nineteen Eightyseven")));
        assert!(!em("1985", &gold("1987")));
        assert!(em("Bouchard", &["someone".into(), "bouchard!".into()]));
        assert!(!em("", &gold("1987")));
    }

    fn judged(verdict: Verdict, rendered: &str) -> Step {
        Step {
            action: Action::Search("q".into()),
            observation: Some(Observation {
                docs: vec![],
                rendered: rendered.into(),
            }),
            judgment: Some(verdict),
        }
    }

    #[test]
    fn taxonomy_covers_every_combination_once() {
        let gold = vec!["1987".to_string()];
        let with = "the year 1987 appears";
        let without = "no year here";
        let cases = [
            (Verdict::Yes, with, true, JudgeImpact::Positive),
            (Verdict::Yes, without, true, JudgeImpact::Positive),
            (Verdict::Yes, with, false, JudgeImpact::Negative),
            (Verdict::Yes, without, false, JudgeImpact::Normal),
            (Verdict::No, with, true, JudgeImpact::Normal),
            (Verdict::No, without, true, JudgeImpact::Positive),
            (Verdict::No, with, false, JudgeImpact::Normal),
            (Verdict::No, without, false, JudgeImpact::Positive),
        ];
        for (verdict, obs, correct, expected) in cases {
            let got = classify_judge_impact(&judged(verdict, obs), &gold, correct).unwrap();
            assert_eq!(got, expected, "verdict {verdict:?}, obs {obs:?}, correct {correct}");
        }
        let mut unjudged = judged(Verdict::Yes, with);
        unjudged.judgment = None;
        assert_eq!(classify_judge_impact(&unjudged, &gold, true), None);
    }

    #[test]
    fn csv_writers_emit_expected_headers() {
        let mut buf = Vec::new();
        write_judge_impact_csv(
            &mut buf,
            &[("dev".to_string(), JudgeImpactCounts {
                positive: 3,
                negative: 1,
                normal: 2,
            })],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "dataset,positive,negative,normal\ndev,3,1,2\n"
        );

        let mut buf = Vec::new();
        write_turn_sweep_csv(
            &mut buf,
            &[TurnSweepRow {
                budget: 2,
                dataset: "dev".into(),
                em: 0.25,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "budget,dataset,em\n2,dev,0.2500\n"
        );
    }

    #[test]
    fn evaluate_traces_counts_errors_as_misses() {
        let samples = vec![BenchSample {
            sample_id: "q1".into(),
            question: "Q?".into(),
            gold: vec!["1987".into()],
            kind: crate::forge::SampleKind::Original,
            entity_map: None,
            support_doc_ids: None,
        }];
        let ok = TraceRecord {
            sample_id: "q1".into(),
            replica: 0,
            question: "Q?".into(),
            steps: vec![],
            final_answer: Some("1987".into()),
            termination: None,
            turn_count: 0,
            context_masks: vec![],
            violations: vec![],
            error: None,
        };
        let mut failed = ok.clone();
        failed.replica = 1;
        failed.error = Some("transport".into());
        let report = evaluate_traces("dev", &[ok, failed], &samples).unwrap();
        assert_eq!(report.n, 2);
        assert_eq!(report.em, 0.5);
        assert!(report.per_sample[0].em && !report.per_sample[0].error);
        assert!(!report.per_sample[1].em && report.per_sample[1].error);

        assert!(matches!(
            evaluate_traces("dev", &[], &samples),
            Err(EvalError::EmptyTraces)
        ));
    }

    #[test]
    fn sweep_rejects_bad_budget_lists_and_empty_samples() {
        let corpus = crate::corpus::Corpus::new(vec![]).unwrap();
        let index = Index::build(&corpus);
        let policy = crate::policy::make_scripted(crate::policy::ScriptedKind::AnswerOnly, 0);
        let config = EpisodeConfig::default();
        let sample = BenchSample {
            sample_id: "q1".into(),
            question: "Q?".into(),
            gold: vec!["x".into()],
            kind: crate::forge::SampleKind::Original,
            entity_map: None,
            support_doc_ids: None,
        };
        let err = turn_sweep(&[], &policy, &index, &config, &[1, 2], "dev", 0).unwrap_err();
        assert!(matches!(err, EvalError::EmptySamples));
        for budgets in [&[][..], &[0][..], &[2, 2][..], &[3, 1][..]] {
            let err = turn_sweep(
                std::slice::from_ref(&sample),
                &policy,
                &index,
                &config,
                budgets,
                "dev",
                0,
            )
            .unwrap_err();
            assert!(matches!(err, EvalError::InvalidBudgets));
        }
    }
}
