//! ROUGE-1/2/L and corpus-level aggregation.
//!
//! Tokens are compared exactly; no stemming or stopword removal unless a
//! stemmer is supplied. ROUGE-L is the plain longest common subsequence
//! over the full token sequences.

pub mod classification;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use serde::Serialize;

use crate::corpus::{AnnotatedRecord, Note, SectionScheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, hyp: usize, reference: usize) -> Self {
        let precision = if hyp == 0 { 0.0 } else { overlap as f64 / hyp as f64 };
        let recall = if reference == 0 { 0.0 } else { overlap as f64 / reference as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore { precision, recall, f1 }
    }

    fn scaled(self, k: f64) -> Self {
        RougeScore {
            precision: self.precision * k,
            recall: self.recall * k,
            f1: self.f1 * k,
        }
    }

    fn plus(self, o: Self) -> Self {
        RougeScore {
            precision: self.precision + o.precision,
            recall: self.recall + o.recall,
            f1: self.f1 + o.f1,
        }
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap.
pub fn rouge_n<S: AsRef<str>>(hyp: &[S], reference: &[S], n: usize) -> RougeScore {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let overlap = h.iter().map(|(g, &c)| c.min(*r.get(g).unwrap_or(&0))).sum();
    RougeScore::from_counts(overlap, h.values().sum(), r.values().sum())
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> RougeScore {
    RougeScore::from_counts(lcs_len(hyp, reference), hyp.len(), reference.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Rouge {
    pub r1: RougeScore,
    pub r2: RougeScore,
    pub rl: RougeScore,
}

impl Rouge {
    pub fn score<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        Rouge {
            r1: rouge_n(hyp, reference, 1),
            r2: rouge_n(hyp, reference, 2),
            rl: rouge_l(hyp, reference),
        }
    }

    fn plus(self, o: Self) -> Self {
        Rouge {
            r1: self.r1.plus(o.r1),
            r2: self.r2.plus(o.r2),
            rl: self.rl.plus(o.rl),
        }
    }

    fn scaled(self, k: f64) -> Self {
        Rouge {
            r1: self.r1.scaled(k),
            r2: self.r2.scaled(k),
            rl: self.rl.scaled(k),
        }
    }
}

pub type Stemmer = fn(&str) -> String;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    WholeNote,
    PerSection,
}

impl std::str::FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole-note" | "note" => Ok(Granularity::WholeNote),
            "per-section" | "section" => Ok(Granularity::PerSection),
            other => Err(Error::validation(format!("unknown granularity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionRouge {
    pub section: String,
    pub mean: Rouge,
    /// Records whose gold section is nonempty.
    pub n: usize,
    pub mean_gold_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RougeReport {
    pub records: usize,
    pub whole: Rouge,
    pub per_section: Vec<SectionRouge>,
}

fn stemmed(tokens: Vec<String>, stem: Option<Stemmer>) -> Vec<String> {
    match stem {
        Some(f) => tokens.iter().map(|t| f(t)).collect(),
        None => tokens,
    }
}

/// Mean ROUGE of generated notes against the gold notes with the same ids.
///
/// Whole-note scoring concatenates sections in scheme order. Per-section
/// means cover only records whose gold section is nonempty.
pub fn score_notes<'a>(
    generated: impl IntoIterator<Item = (&'a str, &'a Note)>,
    gold: &[AnnotatedRecord],
    scheme: &SectionScheme,
    stem: Option<Stemmer>,
) -> Result<RougeReport> {
    let generated: HashMap<&str, &Note> = generated.into_iter().collect();
    let gold_ids: HashSet<&str> = gold.iter().map(|r| r.id()).collect();
    let mut missing: Vec<&str> = gold_ids.iter().filter(|id| !generated.contains_key(*id)).copied().collect();
    let mut extra: Vec<&str> = generated.keys().filter(|id| !gold_ids.contains(*id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() {
        missing.sort_unstable();
        extra.sort_unstable();
        return Err(Error::validation(format!(
            "record id mismatch: missing from generated [{}]; not in gold [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    if gold.is_empty() {
        return Err(Error::validation("no records to score"));
    }
    let mut whole = Rouge::default();
    let mut sec_sum = vec![Rouge::default(); scheme.len()];
    let mut sec_n = vec![0usize; scheme.len()];
    let mut sec_len = vec![0usize; scheme.len()];
    for r in gold {
        let hyp = generated[r.id()];
        whole = whole.plus(Rouge::score(&stemmed(hyp.tokens(scheme), stem), &stemmed(r.note.tokens(scheme), stem)));
        for (s, id) in scheme.ids().enumerate() {
            let g = r.note.section_tokens(id);
            if g.is_empty() {
                continue;
            }
            sec_n[s] += 1;
            sec_len[s] += g.len();
            sec_sum[s] = sec_sum[s].plus(Rouge::score(&stemmed(hyp.section_tokens(id), stem), &stemmed(g, stem)));
        }
    }
    Ok(RougeReport {
        records: gold.len(),
        whole: whole.scaled(1.0 / gold.len() as f64),
        per_section: scheme
            .ids()
            .enumerate()
            .map(|(s, id)| SectionRouge {
                section: id.to_string(),
                mean: if sec_n[s] == 0 {
                    Rouge::default()
                } else {
                    sec_sum[s].scaled(1.0 / sec_n[s] as f64)
                },
                n: sec_n[s],
                mean_gold_length: if sec_n[s] == 0 { 0.0 } else { sec_len[s] as f64 / sec_n[s] as f64 },
            })
            .collect(),
    })
}

impl RougeReport {
    /// `variant \t precision \t recall \t f1`, values in percent.
    pub fn whole_tsv(&self) -> String {
        let mut out = String::from("variant\tprecision\trecall\tf1\n");
        for (name, s) in [("R-1", self.whole.r1), ("R-2", self.whole.r2), ("R-L", self.whole.rl)] {
            let _ = writeln!(out, "{name}\t{:.4}\t{:.4}\t{:.4}", 100.0 * s.precision, 100.0 * s.recall, 100.0 * s.f1);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// `section \t R-1 \t R-2 \t R-L \t N \t mean_gold_length`, F1 in percent.
    pub fn section_tsv(&self) -> String {
        let mut out = String::from("section\tR-1\tR-2\tR-L\tN\tmean_gold_length\n");
        for s in &self.per_section {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.2}",
                s.section,
                100.0 * s.mean.r1.f1,
                100.0 * s.mean.r2.f1,
                100.0 * s.mean.rl.f1,
                s.n,
                s.mean_gold_length
            );
        }
        out
    }
}

/// One row per method: `method \t R-1 \t R-2 \t R-L`, whole-note F1 in percent.
pub fn method_table<'a>(rows: impl IntoIterator<Item = (&'a str, &'a RougeReport)>) -> String {
    let mut out = String::from("method\tR-1\tR-2\tR-L\n");
    for (name, r) in rows {
        let _ = writeln!(out, "{name}\t{:.4}\t{:.4}\t{:.4}", 100.0 * r.whole.r1.f1, 100.0 * r.whole.r2.f1, 100.0 * r.whole.rl.f1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn identical_and_disjoint() {
        let a = tokenize("the cat sat on the mat");
        let s = Rouge::score(&a, &a);
        assert_eq!((s.r1.f1, s.r2.f1, s.rl.f1), (1.0, 1.0, 1.0));
        let z = Rouge::score(&tokenize("x y z"), &a);
        assert_eq!((z.r1.f1, z.r2.f1, z.rl.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_sides_are_zero() {
        let a = tokenize("a b");
        let e: Vec<String> = Vec::new();
        assert_eq!(rouge_n(&e, &a, 1), RougeScore::default());
        assert_eq!(rouge_n(&a, &e, 2), RougeScore::default());
        assert_eq!(rouge_l(&e, &a), RougeScore::default());
    }

    #[test]
    fn clipping() {
        // hyp "the the the" vs ref "the cat": overlap clipped to 1
        let s = rouge_n(&tokenize("the the the"), &tokenize("the cat"), 1);
        assert!((s.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
    }
}
