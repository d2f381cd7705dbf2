//! In-memory BM25 retrieval over a corpus.

use std::collections::HashMap;

use crate::corpus::{Corpus, Document};
use crate::{Real, Scalar};

/// Lowercase, split on non-alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: Scalar,
    pub b: Scalar,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// One term's contribution to one document's score.
///
/// idf(t) = ln((n_docs - df + 0.5) / (df + 0.5) + 1), multiplied by
/// tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl)).
pub fn bm25_term_score<R: Real>(tf: R, df: R, n_docs: R, dl: R, avgdl: R, k1: R, b: R) -> R {
    let one = R::one();
    let half = R::from_f64(0.5).expect("0.5 representable");
    let idf = ((n_docs - df + half) / (df + half) + one).ln();
    let tf_norm = tf * (k1 + one) / (tf + k1 * (one - b + b * dl / avgdl));
    idf * tf_norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub doc_id: String,
    pub score: Scalar,
    /// Position in the result list, 0 = best.
    pub rank: usize,
}

/// Inverted index over title + text tokens. Holds the documents it was built
/// from, so retrieval hits can be resolved back to full documents.
pub struct Index {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<(usize, usize)>>,
    doc_len: Vec<usize>,
    avgdl: Scalar,
    params: Bm25Params,
}

impl Index {
    pub fn build(corpus: &Corpus) -> Self {
        Self::with_params(corpus, Bm25Params::default())
    }

    pub fn with_params(corpus: &Corpus, params: Bm25Params) -> Self {
        let docs: Vec<Document> = corpus.documents().to_vec();
        let mut by_id = HashMap::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<(usize, usize)>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (di, doc) in docs.iter().enumerate() {
            by_id.insert(doc.id.clone(), di);
            let mut tokens = tokenize(&doc.title);
            tokens.extend(tokenize(&doc.text));
            doc_len.push(tokens.len());
            let mut tf: HashMap<String, usize> = HashMap::new();
            for token in tokens {
                *tf.entry(token).or_insert(0) += 1;
            }
            for (token, count) in tf {
                postings.entry(token).or_default().push((di, count));
            }
        }
        // Postings arrive in doc order per term only if we insert per doc in
        // order, which the loop above does; sort defensively anyway so the
        // accumulation below never depends on map quirks.
        for list in postings.values_mut() {
            list.sort_unstable_by_key(|&(di, _)| di);
        }
        let total: usize = doc_len.iter().sum();
        let avgdl = if docs.is_empty() {
            1.0
        } else {
            total as Scalar / docs.len() as Scalar
        };
        Index {
            docs,
            by_id,
            postings,
            doc_len,
            avgdl,
            params,
        }
    }

    /// Top `k` documents by BM25 score, ties broken by ascending id. Query
    /// tokens are scored as given, so a repeated token counts twice. Only
    /// documents matching at least one token are returned, so the result may
    /// be shorter than `k`; an empty or unmatched query yields an empty list.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<RetrievalResult> {
        let n = self.docs.len() as Scalar;
        let mut acc: HashMap<usize, Scalar> = HashMap::new();
        for term in tokenize(query) {
            let Some(postings) = self.postings.get(&term) else {
                continue;
            };
            let df = postings.len() as Scalar;
            for &(di, tf) in postings {
                let s = bm25_term_score(
                    tf as Scalar,
                    df,
                    n,
                    self.doc_len[di] as Scalar,
                    self.avgdl,
                    self.params.k1,
                    self.params.b,
                );
                *acc.entry(di).or_insert(0.0) += s;
            }
        }
        let mut hits: Vec<(usize, Scalar)> = acc.into_iter().collect();
        hits.sort_unstable_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0].id.cmp(&self.docs[b.0].id))
        });
        hits.truncate(k);
        hits.into_iter()
            .enumerate()
            .map(|(rank, (di, score))| RetrievalResult {
                doc_id: self.docs[di].id.clone(),
                score,
                rank,
            })
            .collect()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&di| &self.docs[di])
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Origin;

    fn fixture() -> Corpus {
        let doc = |id: &str, title: &str, text: &str| Document {
            id: id.into(),
            title: title.into(),
            text: text.into(),
            origin: Origin::Base,
        };
        Corpus::new(vec![
            doc(
                "d1",
                "Saddle Rash",
                "Saddle Rash is an animated comedy created by Loren Bouchard.",
            ),
            doc(
                "d2",
                "Loren Bouchard",
                "Loren Bouchard is an American animator born in Boston.",
            ),
            doc("d3", "Home Movies", "Home Movies is an animated series."),
        ])
        .unwrap()
    }

    #[test]
    fn tokenize_lowercases_and_splits() {
        // `is_alphanumeric` is Unicode-aware, so accented letters stay put.
        assert_eq!(
            tokenize("Loren Bouchard's 1987, début!"),
            vec!["loren", "bouchard", "s", "1987", "début"]
        );
        assert!(tokenize("  --- ").is_empty());
    }

    #[test]
    fn scores_match_hand_computed_values() {
        // Hand-worked on the three-document fixture: avgdl = 31/3, both query
        // terms have df = 2, d2 holds each twice (dl 11), d1 once each (dl 12).
        let index = Index::build(&fixture());
        let hits = index.retrieve("loren bouchard", 3);
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].doc_id, "d2");
        assert_eq!(hits[1].doc_id, "d1");
        assert!((hits[0].score - 1.2694751490914526).abs() < 1e-9);
        assert!((hits[1].score - 0.8818224900841588).abs() < 1e-9);
        assert_eq!(hits[0].rank, 0);
        assert_eq!(hits[1].rank, 1);
    }

    #[test]
    fn unmatched_docs_are_excluded() {
        let index = Index::build(&fixture());
        let hits = index.retrieve("loren bouchard", 10);
        assert!(hits.iter().all(|h| h.doc_id != "d3"));
    }

    #[test]
    fn empty_query_yields_empty_result() {
        let index = Index::build(&fixture());
        assert!(index.retrieve("", 3).is_empty());
        assert!(index.retrieve("?!", 3).is_empty());
        assert!(index.retrieve("zzzunknown", 3).is_empty());
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let doc = |id: &str| Document {
            id: id.into(),
            title: "Same Title".into(),
            text: "identical body text".into(),
            origin: Origin::Base,
        };
        let corpus = Corpus::new(vec![doc("n-2"), doc("n-1"), doc("n-3")]).unwrap();
        let index = Index::build(&corpus);
        let hits = index.retrieve("identical body", 3);
        let ids: Vec<&str> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, vec!["n-1", "n-2", "n-3"]);
    }

    #[test]
    fn retrieval_is_deterministic() {
        let index = Index::build(&fixture());
        let a = index.retrieve("animated series loren", 3);
        for _ in 0..50 {
            assert_eq!(index.retrieve("animated series loren", 3), a);
        }
    }

    #[test]
    fn document_lookup_resolves_hits() {
        let index = Index::build(&fixture());
        assert_eq!(index.document("d3").unwrap().title, "Home Movies");
        assert!(index.document("missing").is_none());
    }
}
