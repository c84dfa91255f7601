use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedRecord, Conversation, Utterance};
use crate::error::{Error, Result};
use crate::text::speaker_token;

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    pub entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, w)| dense[i] * w).sum()
    }

    fn from_map(map: BTreeMap<usize, f64>) -> Self {
        FeatureVector {
            entries: map.into_iter().filter(|(_, w)| *w != 0.0).collect(),
        }
    }
}

/// TF-IDF vocabulary plus a symmetric context window.
///
/// Documents are utterances; the speaker label is an extra token. With
/// `N` training utterances and document frequency `df`,
/// `idf = ln(N / df) + 1`. Each utterance block is L2-normalized raw-count
/// tf-idf. With `window > 0` the feature vector is the concatenation of the
/// utterance's own block, the mean block of the `window` preceding
/// utterances and the mean block of the `window` following ones (missing
/// neighbours are skipped; none at all gives zeros).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub tokens: Vec<String>,
    pub idf: Vec<f64>,
    pub window: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureSpace {
    pub fn new(tokens: Vec<String>, idf: Vec<f64>, window: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        FeatureSpace {
            tokens,
            idf,
            window,
            index,
        }
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn tfidf_dim(&self) -> usize {
        self.tokens.len()
    }

    pub fn dim(&self) -> usize {
        if self.window == 0 {
            self.tfidf_dim()
        } else {
            3 * self.tfidf_dim()
        }
    }

    fn doc_tokens(u: &Utterance) -> impl Iterator<Item = String> + '_ {
        std::iter::once(speaker_token(&u.speaker)).chain(u.tokens.iter().cloned())
    }

    pub fn tfidf(&self, u: &Utterance) -> FeatureVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in Self::doc_tokens(u) {
            if let Some(&i) = self.index.get(&t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        for (i, v) in counts.iter_mut() {
            *v *= self.idf[*i];
        }
        let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in counts.values_mut() {
                *v /= norm;
            }
        }
        FeatureVector::from_map(counts)
    }

    /// Feature vector of every utterance of `conv`.
    pub fn featurize(&self, conv: &Conversation) -> Vec<FeatureVector> {
        let blocks: Vec<FeatureVector> = conv.utterances.iter().map(|u| self.tfidf(u)).collect();
        if self.window == 0 {
            return blocks;
        }
        let d = self.tfidf_dim();
        let n = blocks.len();
        let pooled = |range: std::ops::Range<usize>, offset: usize| {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            let count = range.len();
            for j in range {
                for &(i, w) in &blocks[j].entries {
                    *acc.entry(offset + i).or_default() += w;
                }
            }
            if count > 0 {
                for v in acc.values_mut() {
                    *v /= count as f64;
                }
            }
            acc
        };
        (0..n)
            .map(|i| {
                let mut all: BTreeMap<usize, f64> = blocks[i].entries.iter().copied().collect();
                all.extend(pooled(i.saturating_sub(self.window)..i, d));
                all.extend(pooled((i + 1).min(n)..(i + 1 + self.window).min(n), 2 * d));
                FeatureVector::from_map(all)
            })
            .collect()
    }
}

/// Fits vocabulary and idf weights on the utterances of `train`.
pub fn fit_feature_space(train: &[AnnotatedRecord], window: usize) -> Result<FeatureSpace> {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut n_docs = 0usize;
    for r in train {
        for u in &r.conversation.utterances {
            n_docs += 1;
            let mut seen: Vec<String> = FeatureSpace::doc_tokens(u).collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
    }
    if n_docs == 0 {
        return Err(Error::validation("cannot fit a feature space on an empty corpus"));
    }
    let (tokens, idf): (Vec<String>, Vec<f64>) = df
        .into_iter()
        .map(|(t, d)| (t, (n_docs as f64 / d as f64).ln() + 1.0))
        .unzip();
    Ok(FeatureSpace::new(tokens, idf, window))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Note, Split};

    fn rec(texts: &[&str]) -> AnnotatedRecord {
        AnnotatedRecord {
            conversation: Conversation {
                id: "x".into(),
                utterances: texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Utterance::new(i, if i % 2 == 0 { "A" } else { "B" }, *t))
                    .collect(),
            },
            note: Note::default(),
            split: Split::Train,
        }
    }

    #[test]
    fn idf_on_two_disjoint_documents() {
        let space = fit_feature_space(&[rec(&["red fish", "blue cow"])], 0).unwrap();
        // speakers differ too, so every token has df = 1
        for &v in &space.idf {
            assert!((v - (2.0f64.ln() + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimensions_follow_window() {
        let r = rec(&["a b", "c", "d e f"]);
        let s0 = fit_feature_space(&[r.clone()], 0).unwrap();
        assert_eq!(s0.dim(), s0.tfidf_dim());
        let s2 = fit_feature_space(&[r], 2).unwrap();
        assert_eq!(s2.dim(), 3 * s2.tfidf_dim());
    }

    #[test]
    fn features_sorted_and_finite() {
        let r = rec(&["a b a", "c", "d e f", "a"]);
        let s = fit_feature_space(&[r.clone()], 2).unwrap();
        for fv in s.featurize(&r.conversation) {
            assert!(fv.entries.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(fv.entries.iter().all(|(_, w)| w.is_finite()));
        }
    }

    #[test]
    fn unknown_tokens_ignored() {
        let s = fit_feature_space(&[rec(&["a"])], 0).unwrap();
        let fv = s.tfidf(&Utterance::new(0, "Z", "zzz"));
        assert!(fv.entries.is_empty());
    }
}
