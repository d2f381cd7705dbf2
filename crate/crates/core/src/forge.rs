//! Benchmark forge: rewrites real questions into fictional ones whose
//! answers exist only in documents the forge itself injects, so retrieval
//! competence can be separated from memorized knowledge.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{inject_documents, Corpus, CorpusError, Document, Origin};
use crate::episode::derive_seed;
use crate::http::{default_agent, post_json, HttpError};
use crate::index::tokenize;
use crate::text::{capitalized_spans, find_years, normalize_answer};

/// Whether a sample still asks about the real world or about a forged
/// fictional one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Original,
    Fictional,
}

/// One benchmark question. Fictional samples carry the entity substitutions
/// that created them and the documents that support them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSample {
    pub sample_id: String,
    pub question: String,
    pub gold: Vec<String>,
    pub kind: SampleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_map: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_doc_ids: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("fraction must be in [0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("no seed samples")]
    EmptySeeds,
    #[error("sample `{0}`: no entities found to substitute")]
    NoEntities(String),
    #[error("sample `{sample_id}`: no collision-free name after {attempts} attempts")]
    NameSynthesis { sample_id: String, attempts: u32 },
    #[error("sample `{0}`: entity map is missing or empty")]
    MissingEntityMap(String),
    #[error("sample `{0}`: no support documents")]
    NoDocuments(String),
    #[error("sample `{sample_id}`: gold `{gold}` not found verbatim in any support document")]
    GoldNotInDoc { sample_id: String, gold: String },
    #[error("sample `{0}`: support_doc_ids do not match the documents")]
    DocIdMismatch(String),
    #[error("sample `{0}`: kind must be fictional")]
    NotFictional(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("rewriter transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("rewriter protocol error: {0}")]
    Protocol(String),
    #[error("{path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<HttpError> for ForgeError {
    fn from(e: HttpError) -> Self {
        match e {
            HttpError::Transport { attempts, message } => {
                ForgeError::Transport { attempts, message }
            }
            HttpError::Protocol(m) => ForgeError::Protocol(m),
        }
    }
}

/// A rewritten sample plus the documents that make it answerable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fictionalized {
    pub sample: BenchSample,
    pub documents: Vec<Document>,
}

/// Turns a real sample into a fictional one. `rng_seed` must fully determine
/// the output.
pub trait Rewriter: Send + Sync {
    fn fictionalize(
        &self,
        seed_sample: &BenchSample,
        rng_seed: u64,
    ) -> Result<Fictionalized, ForgeError>;
}

/// Checks the structural contract every fictional sample must meet: marked
/// fictional, non-empty entity map, support documents listed and matching,
/// and every gold string present verbatim in at least one support document.
pub fn validate_fictional(f: &Fictionalized) -> Result<(), ForgeError> {
    let id = &f.sample.sample_id;
    if f.sample.kind != SampleKind::Fictional {
        return Err(ForgeError::NotFictional(id.clone()));
    }
    if f.sample.entity_map.as_ref().is_none_or(|m| m.is_empty()) {
        return Err(ForgeError::MissingEntityMap(id.clone()));
    }
    if f.documents.is_empty() {
        return Err(ForgeError::NoDocuments(id.clone()));
    }
    let doc_ids: Vec<&str> = f.documents.iter().map(|d| d.id.as_str()).collect();
    let listed: Vec<&str> = f
        .sample
        .support_doc_ids
        .as_ref()
        .map(|ids| ids.iter().map(String::as_str).collect())
        .unwrap_or_default();
    if doc_ids != listed {
        return Err(ForgeError::DocIdMismatch(id.clone()));
    }
    for gold in &f.sample.gold {
        if !f.documents.iter().any(|d| d.text.contains(gold.as_str())) {
            return Err(ForgeError::GoldNotInDoc {
                sample_id: id.clone(),
                gold: gold.clone(),
            });
        }
    }
    Ok(())
}

const NAME_SYLLABLES: [&str; 20] = [
    "bel", "dor", "fen", "gri", "hul", "jor", "kel", "lam", "mir", "nev", "osk", "pra", "quin",
    "rav", "sel", "tor", "ul", "ven", "wyn", "zar",
];

fn synth_word(rng: &mut ChaCha8Rng) -> String {
    let a = NAME_SYLLABLES[rng.gen_range(0..NAME_SYLLABLES.len())];
    let b = NAME_SYLLABLES[rng.gen_range(0..NAME_SYLLABLES.len())];
    let mut word = String::with_capacity(a.len() + b.len());
    word.push_str(a);
    word.push_str(b);
    let mut chars = word.chars();
    let first = chars.next().expect("syllables are non-empty");
    first.to_uppercase().collect::<String>() + chars.as_str()
}

const NAME_ATTEMPTS: u32 = 64;

/// Deterministic template-based rewriter. Entities are capitalized
/// multi-word spans and four-digit years found in the question and gold
/// strings; each gets a synthesized replacement that shares no token with
/// the base corpus, resampling on collision.
pub struct TemplateRewriter {
    base_tokens: HashSet<String>,
    support_docs_per_sample: usize,
}

impl TemplateRewriter {
    pub fn new(base: &Corpus) -> TemplateRewriter {
        let mut base_tokens = HashSet::new();
        for doc in base.documents() {
            base_tokens.extend(tokenize(&doc.title));
            base_tokens.extend(tokenize(&doc.text));
        }
        TemplateRewriter {
            base_tokens,
            support_docs_per_sample: 1,
        }
    }

    /// Documents injected per fictional sample, at least 1. The first
    /// carries the answer; the rest are satellite prose around the same
    /// entities.
    pub fn with_support_docs(mut self, n: usize) -> TemplateRewriter {
        self.support_docs_per_sample = n.max(1);
        self
    }

    fn name_collides(&self, name: &str, originals: &[String]) -> bool {
        tokenize(name).iter().any(|t| self.base_tokens.contains(t))
            || originals
                .iter()
                .any(|o| normalize_answer(o) == normalize_answer(name))
    }

    fn synth_span(
        &self,
        rng: &mut ChaCha8Rng,
        n_words: usize,
        originals: &[String],
        sample_id: &str,
    ) -> Result<String, ForgeError> {
        for _ in 0..NAME_ATTEMPTS {
            let name = (0..n_words)
                .map(|_| synth_word(rng))
                .collect::<Vec<_>>()
                .join(" ");
            if !self.name_collides(&name, originals) {
                return Ok(name);
            }
        }
        Err(ForgeError::NameSynthesis {
            sample_id: sample_id.to_string(),
            attempts: NAME_ATTEMPTS,
        })
    }

    fn synth_year(
        &self,
        rng: &mut ChaCha8Rng,
        original: &str,
        sample_id: &str,
    ) -> Result<String, ForgeError> {
        for _ in 0..NAME_ATTEMPTS {
            let year = rng.gen_range(1900..2030).to_string();
            if year != original && !self.base_tokens.contains(&year) {
                return Ok(year);
            }
        }
        Err(ForgeError::NameSynthesis {
            sample_id: sample_id.to_string(),
            attempts: NAME_ATTEMPTS,
        })
    }
}

fn apply_map(text: &str, map: &[(String, String)]) -> String {
    let mut out = text.to_string();
    for (from, to) in map {
        out = out.replace(from.as_str(), to.as_str());
    }
    out
}

impl Rewriter for TemplateRewriter {
    fn fictionalize(
        &self,
        seed_sample: &BenchSample,
        rng_seed: u64,
    ) -> Result<Fictionalized, ForgeError> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let id = &seed_sample.sample_id;

        let mut originals: Vec<String> = Vec::new();
        let scan = |text: &str, originals: &mut Vec<String>| {
            for span in capitalized_spans(text) {
                if !originals.contains(&span) {
                    originals.push(span);
                }
            }
            for year in find_years(text) {
                if !originals.contains(&year) {
                    originals.push(year);
                }
            }
        };
        scan(&seed_sample.question, &mut originals);
        for gold in &seed_sample.gold {
            scan(gold, &mut originals);
        }
        if originals.is_empty() {
            return Err(ForgeError::NoEntities(id.clone()));
        }
        // Longer spans substitute first so a short span never clobbers part
        // of a longer one it is contained in.
        originals.sort_by_key(|o| std::cmp::Reverse(o.len()));

        let mut entity_map: Vec<(String, String)> = Vec::new();
        for original in &originals {
            let replacement = if original.chars().all(|c| c.is_ascii_digit()) {
                self.synth_year(&mut rng, original, id)?
            } else {
                let words = original.split_whitespace().count();
                self.synth_span(&mut rng, words, &originals, id)?
            };
            entity_map.push((original.clone(), replacement));
        }

        let question = apply_map(&seed_sample.question, &entity_map);
        let gold: Vec<String> = seed_sample
            .gold
            .iter()
            .map(|g| apply_map(g, &entity_map))
            .collect();

        let lead_entity = entity_map
            .iter()
            .map(|(_, to)| to.clone())
            .find(|to| !to.chars().all(|c| c.is_ascii_digit()))
            .unwrap_or_else(|| format!("Entry {id}"));
        let primary_gold = gold.first().cloned().unwrap_or_default();

        let mut documents = Vec::with_capacity(self.support_docs_per_sample);
        documents.push(Document {
            id: format!("fic-{id}-0"),
            title: lead_entity.clone(),
            text: format!(
                "{lead_entity} belongs to a curated archive of invented reference entries. \
                 On the question \"{question}\" the archive records the answer {primary_gold}. \
                 No other entry in the archive disputes this."
            ),
            origin: Origin::Injected,
        });
        for extra in 1..self.support_docs_per_sample {
            let co_entity = entity_map
                .iter()
                .map(|(_, to)| to.as_str())
                .nth(extra % entity_map.len())
                .unwrap_or(lead_entity.as_str());
            documents.push(Document {
                id: format!("fic-{id}-{extra}"),
                title: format!("{lead_entity} notes {extra}"),
                text: format!(
                    "Supplementary notes place {co_entity} alongside {lead_entity} in the same \
                     invented archive, without repeating the recorded answer."
                ),
                origin: Origin::Injected,
            });
        }

        let fictionalized = Fictionalized {
            sample: BenchSample {
                sample_id: id.clone(),
                question,
                gold,
                kind: SampleKind::Fictional,
                entity_map: Some(entity_map),
                support_doc_ids: Some(documents.iter().map(|d| d.id.clone()).collect()),
            },
            documents,
        };
        validate_fictional(&fictionalized)?;
        Ok(fictionalized)
    }
}

#[derive(Serialize)]
struct RewriteRequest<'a> {
    sample_id: &'a str,
    question: &'a str,
    gold: &'a [String],
    seed: u64,
}

#[derive(Deserialize)]
struct RewriteResponse {
    question: String,
    gold: Vec<String>,
    entity_map: Vec<(String, String)>,
    documents: Vec<RewriteDoc>,
}

#[derive(Deserialize)]
struct RewriteDoc {
    id: String,
    title: String,
    text: String,
}

/// Client for a rewriting service exposing `POST {endpoint}/rewrite`. The
/// response is validated with [`validate_fictional`] before it is accepted.
pub struct RemoteRewriter {
    endpoint: String,
    agent: ureq::Agent,
    auth_token: Option<String>,
    max_retries: u32,
}

impl RemoteRewriter {
    pub fn new(endpoint: impl Into<String>) -> RemoteRewriter {
        RemoteRewriter {
            endpoint: endpoint.into(),
            agent: default_agent(),
            auth_token: None,
            max_retries: 2,
        }
    }

    pub fn with_auth_token(mut self, token: Option<String>) -> RemoteRewriter {
        self.auth_token = token;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> RemoteRewriter {
        self.max_retries = retries;
        self
    }
}

impl Rewriter for RemoteRewriter {
    fn fictionalize(
        &self,
        seed_sample: &BenchSample,
        rng_seed: u64,
    ) -> Result<Fictionalized, ForgeError> {
        let url = format!("{}/rewrite", self.endpoint.trim_end_matches('/'));
        let body = RewriteRequest {
            sample_id: &seed_sample.sample_id,
            question: &seed_sample.question,
            gold: &seed_sample.gold,
            seed: rng_seed,
        };
        let value = post_json(
            &self.agent,
            &url,
            self.auth_token.as_deref(),
            &body,
            self.max_retries,
        )?;
        let parsed: RewriteResponse = serde_json::from_value(value)
            .map_err(|e| ForgeError::Protocol(format!("{url}: unexpected shape: {e}")))?;
        let documents: Vec<Document> = parsed
            .documents
            .into_iter()
            .map(|d| Document {
                id: d.id,
                title: d.title,
                text: d.text,
                origin: Origin::Injected,
            })
            .collect();
        let fictionalized = Fictionalized {
            sample: BenchSample {
                sample_id: seed_sample.sample_id.clone(),
                question: parsed.question,
                gold: parsed.gold,
                kind: SampleKind::Fictional,
                entity_map: Some(parsed.entity_map),
                support_doc_ids: Some(documents.iter().map(|d| d.id.clone()).collect()),
            },
            documents,
        };
        validate_fictional(&fictionalized)?;
        Ok(fictionalized)
    }
}

/// Occurrences of one fictional entity in the base corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub entity: String,
    pub hits: usize,
    pub doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn total_hits(&self) -> usize {
        self.entries.iter().map(|e| e.hits).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total_hits() == 0
    }
}

/// Counts normalized occurrences of every fictional entity and gold string
/// in the base corpus. A clean report means the fictional material cannot be
/// answered from pre-existing text.
pub fn audit_leakage(base: &Corpus, fictional: &[BenchSample]) -> AuditReport {
    let mut entities: Vec<String> = Vec::new();
    for sample in fictional {
        if sample.kind != SampleKind::Fictional {
            continue;
        }
        if let Some(map) = &sample.entity_map {
            for (_, replacement) in map {
                if !entities.contains(replacement) {
                    entities.push(replacement.clone());
                }
            }
        }
        for gold in &sample.gold {
            if !entities.contains(gold) {
                entities.push(gold.clone());
            }
        }
    }
    let normalized_docs: Vec<(String, String)> = base
        .documents()
        .iter()
        .map(|d| (d.id.clone(), normalize_answer(&format!("{} {}", d.title, d.text))))
        .collect();
    let entries = entities
        .into_iter()
        .map(|entity| {
            let needle = normalize_answer(&entity);
            let mut hits = 0;
            let mut doc_ids = Vec::new();
            if !needle.is_empty() {
                for (id, haystack) in &normalized_docs {
                    let count = haystack.matches(needle.as_str()).count();
                    if count > 0 {
                        hits += count;
                        doc_ids.push(id.clone());
                    }
                }
            }
            AuditEntry {
                entity,
                hits,
                doc_ids,
            }
        })
        .collect();
    AuditReport { entries }
}

/// A forged benchmark: the sample list with the chosen fraction rewritten,
/// the base corpus with support documents injected, and the leakage audit.
#[derive(Debug)]
pub struct ForgeOutput {
    pub samples: Vec<BenchSample>,
    pub corpus: Corpus,
    pub audit: AuditReport,
}

/// Rewrites `floor(fraction * seeds.len())` uniformly chosen seed samples
/// into fictional ones, injects their support documents, and audits the
/// result. Everything derives from `seed`, so equal inputs forge equal
/// benchmarks.
pub fn forge_benchmark(
    seeds: &[BenchSample],
    base: &Corpus,
    rewriter: &dyn Rewriter,
    fraction: f64,
    seed: u64,
) -> Result<ForgeOutput, ForgeError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ForgeError::InvalidFraction(fraction));
    }
    if seeds.is_empty() {
        return Err(ForgeError::EmptySeeds);
    }
    let n_fictional = (fraction * seeds.len() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index_sample(&mut rng, seeds.len(), n_fictional).into_vec();
    chosen.sort_unstable();

    let mut samples: Vec<BenchSample> = seeds
        .iter()
        .map(|s| BenchSample {
            kind: SampleKind::Original,
            entity_map: None,
            support_doc_ids: None,
            ..s.clone()
        })
        .collect();
    let mut injected: Vec<Document> = Vec::new();
    for &i in &chosen {
        let fictionalized =
            rewriter.fictionalize(&seeds[i], derive_seed(seed, &seeds[i].sample_id, 0))?;
        validate_fictional(&fictionalized)?;
        samples[i] = fictionalized.sample;
        injected.extend(fictionalized.documents);
    }
    let corpus = inject_documents(base, &injected)?;
    let fictional_samples: Vec<BenchSample> = samples
        .iter()
        .filter(|s| s.kind == SampleKind::Fictional)
        .cloned()
        .collect();
    let audit = audit_leakage(base, &fictional_samples);
    Ok(ForgeOutput {
        samples,
        corpus,
        audit,
    })
}

/// Loads one JSON sample per line; blank lines are skipped.
pub fn load_samples_jsonl(path: &Path) -> Result<Vec<BenchSample>, ForgeError> {
    let file = File::open(path).map_err(|source| ForgeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ForgeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(
            serde_json::from_str(&line).map_err(|source| ForgeError::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                source,
            })?,
        );
    }
    Ok(samples)
}

pub fn save_samples_jsonl(path: &Path, samples: &[BenchSample]) -> Result<(), ForgeError> {
    let io_err = |source| ForgeError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for sample in samples {
        let line = serde_json::to_string(sample).expect("sample serializes");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_corpus() -> Corpus {
        let doc = |id: &str, title: &str, text: &str| Document {
            id: id.into(),
            title: title.into(),
            text: text.into(),
            origin: Origin::Base,
        };
        Corpus::new(vec![
            doc(
                "b1",
                "Harbor Town",
                "Harbor Town grew around fishing docks established in 1901.",
            ),
            doc(
                "b2",
                "Mural Painting",
                "A mural painted by Vera Caldwell decorates the town hall since 1954.",
            ),
        ])
        .unwrap()
    }

    fn seed_sample() -> BenchSample {
        BenchSample {
            sample_id: "s1".into(),
            question: "In which year did Vera Caldwell first visit Harbor Town?".into(),
            gold: vec!["1948".into()],
            kind: SampleKind::Original,
            entity_map: None,
            support_doc_ids: None,
        }
    }

    #[test]
    fn template_rewrite_replaces_all_detected_entities() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let f = rewriter.fictionalize(&seed_sample(), 7).unwrap();
        let map = f.sample.entity_map.as_ref().unwrap();
        let mapped: Vec<&str> = map.iter().map(|(from, _)| from.as_str()).collect();
        assert!(mapped.contains(&"Vera Caldwell"));
        assert!(mapped.contains(&"Harbor Town"));
        assert!(mapped.contains(&"1948"));
        assert!(!f.sample.question.contains("Vera Caldwell"));
        assert!(!f.sample.question.contains("Harbor Town"));
        assert_ne!(f.sample.gold[0], "1948");
        assert_eq!(f.sample.kind, SampleKind::Fictional);
        // The fictional gold is answerable from the injected document alone.
        assert!(f.documents[0].text.contains(&f.sample.gold[0]));
        assert_eq!(f.documents[0].origin, Origin::Injected);
    }

    #[test]
    fn template_rewrite_is_deterministic_in_the_seed() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let a = rewriter.fictionalize(&seed_sample(), 7).unwrap();
        let b = rewriter.fictionalize(&seed_sample(), 7).unwrap();
        let c = rewriter.fictionalize(&seed_sample(), 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.sample.question, c.sample.question);
    }

    #[test]
    fn synthesized_names_avoid_base_corpus_tokens() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        for seed in 0..25 {
            let f = rewriter.fictionalize(&seed_sample(), seed).unwrap();
            for (_, replacement) in f.sample.entity_map.as_ref().unwrap() {
                for token in tokenize(replacement) {
                    assert!(
                        !rewriter.base_tokens.contains(&token),
                        "token {token} of {replacement} exists in the base corpus"
                    );
                }
            }
        }
    }

    #[test]
    fn question_without_entities_is_rejected() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let sample = BenchSample {
            question: "what color is the sky?".into(),
            gold: vec!["blue".into()],
            ..seed_sample()
        };
        assert!(matches!(
            rewriter.fictionalize(&sample, 7),
            Err(ForgeError::NoEntities(_))
        ));
    }

    #[test]
    fn extra_support_docs_share_the_entities() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base).with_support_docs(3);
        let f = rewriter.fictionalize(&seed_sample(), 7).unwrap();
        assert_eq!(f.documents.len(), 3);
        assert_eq!(
            f.sample.support_doc_ids.as_ref().unwrap(),
            &f.documents.iter().map(|d| d.id.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn forge_replaces_the_requested_fraction() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let seeds: Vec<BenchSample> = (0..10)
            .map(|i| BenchSample {
                sample_id: format!("s{i}"),
                ..seed_sample()
            })
            .collect();
        let out = forge_benchmark(&seeds, &base, &rewriter, 0.3, 99).unwrap();
        assert_eq!(out.samples.len(), 10);
        let fictional = out
            .samples
            .iter()
            .filter(|s| s.kind == SampleKind::Fictional)
            .count();
        assert_eq!(fictional, 3);
        assert_eq!(out.corpus.len(), base.len() + 3);
        assert!(out.audit.is_clean());
        assert!(out
            .corpus
            .documents()
            .iter()
            .skip(base.len())
            .all(|d| d.origin == Origin::Injected));
    }

    #[test]
    fn forge_is_deterministic() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let seeds: Vec<BenchSample> = (0..10)
            .map(|i| BenchSample {
                sample_id: format!("s{i}"),
                ..seed_sample()
            })
            .collect();
        let a = forge_benchmark(&seeds, &base, &rewriter, 0.5, 41).unwrap();
        let b = forge_benchmark(&seeds, &base, &rewriter, 0.5, 41).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.corpus.documents(), b.corpus.documents());
        assert_eq!(a.audit, b.audit);
        let c = forge_benchmark(&seeds, &base, &rewriter, 0.5, 42).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn forge_rejects_bad_fraction_and_empty_seeds() {
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        assert!(matches!(
            forge_benchmark(&[seed_sample()], &base, &rewriter, 1.5, 1),
            Err(ForgeError::InvalidFraction(_))
        ));
        assert!(matches!(
            forge_benchmark(&[], &base, &rewriter, 0.5, 1),
            Err(ForgeError::EmptySeeds)
        ));
    }

    #[test]
    fn audit_detects_planted_leakage() {
        let base = base_corpus();
        let leaky = BenchSample {
            sample_id: "bad".into(),
            question: "Who painted the mural?".into(),
            gold: vec!["Vera Caldwell".into()],
            kind: SampleKind::Fictional,
            entity_map: Some(vec![("Someone Real".into(), "Vera Caldwell".into())]),
            support_doc_ids: Some(vec!["fic-bad-0".into()]),
        };
        let report = audit_leakage(&base, &[leaky]);
        assert!(!report.is_clean());
        let entry = report
            .entries
            .iter()
            .find(|e| e.entity == "Vera Caldwell")
            .unwrap();
        assert_eq!(entry.hits, 1);
        assert_eq!(entry.doc_ids, vec!["b2"]);
    }

    #[test]
    fn validate_rejects_gold_missing_from_docs() {
        let f = Fictionalized {
            sample: BenchSample {
                sample_id: "x".into(),
                question: "Q?".into(),
                gold: vec!["1999".into()],
                kind: SampleKind::Fictional,
                entity_map: Some(vec![("A B".into(), "C D".into())]),
                support_doc_ids: Some(vec!["fic-x-0".into()]),
            },
            documents: vec![Document {
                id: "fic-x-0".into(),
                title: "C D".into(),
                text: "No answer here.".into(),
                origin: Origin::Injected,
            }],
        };
        assert!(matches!(
            validate_fictional(&f),
            Err(ForgeError::GoldNotInDoc { .. })
        ));
    }

    #[test]
    fn samples_round_trip_through_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        let base = base_corpus();
        let rewriter = TemplateRewriter::new(&base);
        let out = forge_benchmark(&[seed_sample()], &base, &rewriter, 1.0, 3).unwrap();
        save_samples_jsonl(&path, &out.samples).unwrap();
        let loaded = load_samples_jsonl(&path).unwrap();
        assert_eq!(loaded, out.samples);
    }
}
