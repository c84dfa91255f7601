use std::collections::HashSet;
use std::fmt::Write as _;
use serde::Serialize;

use crate::corpus::{AnnotatedRecord, SectionScheme};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionCount {
    pub section: String,
    pub mean_sentences: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub records: usize,
    pub mean_utterances: f64,
    pub mean_words: f64,
    pub mean_sentences: f64,
    pub mean_evidence: f64,
    /// Fraction of multi-utterance evidence sets with no gaps.
    pub contiguity: f64,
    pub per_section: Vec<SectionCount>,
    /// Mean per-note fraction of novel 1-, 2- and 3-grams.
    pub novel_ngrams: [f64; 3],
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    tokens.windows(n)
}

fn mean(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn corpus_stats(records: &[AnnotatedRecord], scheme: &SectionScheme) -> Result<StatsReport> {
    if records.is_empty() {
        return Err(Error::validation("cannot compute statistics of an empty corpus"));
    }
    let n = records.len();
    let mut words = 0usize;
    let mut utterances = 0usize;
    let mut sentences = 0usize;
    let mut evidence_total = 0usize;
    let mut multi = 0usize;
    let mut contiguous = 0usize;
    let mut per_section = vec![0usize; scheme.len()];
    let mut novel_sum = [0.0; 3];
    let mut novel_count = [0usize; 3];

    for r in records {
        words += r.conversation.word_count();
        utterances += r.conversation.len();
        sentences += r.note.sentences.len();
        for s in &r.note.sentences {
            evidence_total += s.evidence.len();
            if s.evidence.len() > 1 {
                multi += 1;
                if s.evidence.windows(2).all(|w| w[1] == w[0] + 1) {
                    contiguous += 1;
                }
            }
            if let Some(p) = scheme.position(&s.section) {
                per_section[p] += 1;
            }
        }
        for n_order in 1..=3 {
            let source: HashSet<&[String]> = r
                .conversation
                .utterances
                .iter()
                .flat_map(|u| ngrams(&u.tokens, n_order))
                .collect();
            let mut total = 0usize;
            let mut novel = 0usize;
            for s in &r.note.sentences {
                for g in ngrams(&s.tokens, n_order) {
                    total += 1;
                    if !source.contains(g) {
                        novel += 1;
                    }
                }
            }
            if total > 0 {
                novel_sum[n_order - 1] += novel as f64 / total as f64;
                novel_count[n_order - 1] += 1;
            }
        }
    }

    Ok(StatsReport {
        records: n,
        mean_utterances: mean(utterances as f64, n),
        mean_words: mean(words as f64, n),
        mean_sentences: mean(sentences as f64, n),
        mean_evidence: mean(evidence_total as f64, sentences),
        contiguity: mean(contiguous as f64, multi),
        per_section: scheme
            .sections
            .iter()
            .zip(&per_section)
            .map(|(s, &c)| SectionCount {
                section: s.id.clone(),
                mean_sentences: mean(c as f64, n),
            })
            .collect(),
        novel_ngrams: [
            mean(novel_sum[0], novel_count[0]),
            mean(novel_sum[1], novel_count[1]),
            mean(novel_sum[2], novel_count[2]),
        ],
    })
}

impl StatsReport {
    /// Two-column `metric \t value` table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tvalue\n");
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k}\t{v}");
        };
        row("records", self.records.to_string());
        row("mean_utterances", format!("{:.4}", self.mean_utterances));
        row("mean_words", format!("{:.4}", self.mean_words));
        row("mean_sentences", format!("{:.4}", self.mean_sentences));
        row("mean_evidence_per_sentence", format!("{:.4}", self.mean_evidence));
        row("evidence_contiguity", format!("{:.4}", self.contiguity));
        for (i, f) in self.novel_ngrams.iter().enumerate() {
            row(&format!("novel_{}gram_fraction", i + 1), format!("{f:.4}"));
        }
        for s in &self.per_section {
            row(&format!("sentences[{}]", s.section), format!("{:.4}", s.mean_sentences));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Conversation, Note, NoteSentence, Split, Utterance};

    fn record(note: Vec<NoteSentence>) -> AnnotatedRecord {
        AnnotatedRecord {
            conversation: Conversation {
                id: "r".into(),
                utterances: vec![
                    Utterance::new(0, "DR", "i take aspirin"),
                    Utterance::new(1, "PT", "for my knee"),
                    Utterance::new(2, "DR", "ok"),
                    Utterance::new(3, "PT", "yes"),
                ],
            },
            note: Note { sentences: note },
            split: Split::Train,
        }
    }

    #[test]
    fn mean_evidence_arithmetic() {
        let scheme = SectionScheme::synthetic();
        let r = record(vec![
            NoteSentence::new("subjective", "aspirin", vec![0]),
            NoteSentence::new("plan", "knee", vec![1, 2, 3]),
        ]);
        let s = corpus_stats(&[r], &scheme).unwrap();
        assert_eq!(s.mean_evidence, 2.0);
        assert_eq!(s.mean_sentences, 2.0);
        assert_eq!(s.contiguity, 1.0);
        assert_eq!(s.per_section[0].mean_sentences, 1.0);
        assert_eq!(s.per_section[1].mean_sentences, 0.0);
    }

    #[test]
    fn copied_note_has_no_novel_unigrams() {
        let scheme = SectionScheme::synthetic();
        let r = record(vec![NoteSentence::new("subjective", "i take aspirin for my knee", vec![0, 1])]);
        let s = corpus_stats(&[r], &scheme).unwrap();
        assert_eq!(s.novel_ngrams[0], 0.0);
        // "aspirin for" never occurs inside a single utterance
        assert!(s.novel_ngrams[1] > 0.0);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(corpus_stats(&[], &SectionScheme::synthetic()).is_err());
    }
}
