//! Document store: validated in-memory corpus plus JSONL persistence.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a document shipped with the base corpus or was added by the forge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Base,
    Injected,
}

/// One retrievable document. `text` is plain prose, no markup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub text: String,
    #[serde(default = "Origin::base")]
    pub origin: Origin,
}

impl Origin {
    fn base() -> Self {
        Origin::Base
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has empty text")]
    EmptyText(String),
    #[error("document with empty id")]
    EmptyId,
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

/// Immutable document collection with unique non-empty ids and non-empty
/// texts, in insertion order.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if doc.id.is_empty() {
                return Err(CorpusError::EmptyId);
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
        }
        drop(seen);
        Ok(Corpus { docs })
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.id == id)
    }
}

/// Returns a new corpus extending `base` with `extra`, each extra document
/// re-tagged as injected. Fails on id collisions or invalid documents.
pub fn inject_documents(base: &Corpus, extra: &[Document]) -> Result<Corpus, CorpusError> {
    let mut docs = base.docs.clone();
    docs.extend(extra.iter().map(|d| Document {
        origin: Origin::Injected,
        ..d.clone()
    }));
    Corpus::new(docs)
}

/// Loads one JSON document per line; blank lines are skipped.
pub fn load_corpus_jsonl(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut docs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source,
        })?;
        docs.push(doc);
    }
    Corpus::new(docs)
}

/// Writes one JSON document per line, in corpus order.
pub fn save_corpus_jsonl(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for doc in &corpus.docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}
