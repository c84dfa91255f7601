//! Canonical conversation/note data model and its line-delimited JSON format.

mod ami;
mod scheme;
mod stats;
pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::EvidenceCluster;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub use ami::{ingest_ami, AmiExport};
pub use scheme::{Section, SectionScheme};
pub use stats::{corpus_stats, SectionCount, StatsReport};
pub use synth::{generate_synthetic, SynthConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub index: usize,
    pub speaker: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(index: usize, speaker: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Utterance {
            index,
            speaker: speaker.into(),
            text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

impl Conversation {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoteSentence {
    pub section: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Supporting utterance indices, sorted ascending and unique.
    pub evidence: Vec<usize>,
}

impl NoteSentence {
    pub fn new(section: impl Into<String>, text: impl Into<String>, mut evidence: Vec<usize>) -> Self {
        let text = text.into();
        evidence.sort_unstable();
        evidence.dedup();
        NoteSentence {
            section: section.into(),
            tokens: tokenize(&text),
            text,
            evidence,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Note {
    pub sentences: Vec<NoteSentence>,
}

impl Note {
    pub fn section<'a>(&'a self, section_id: &'a str) -> impl Iterator<Item = &'a NoteSentence> + 'a {
        self.sentences.iter().filter(move |s| s.section == section_id)
    }

    /// Tokens of one section, sentences concatenated in order.
    pub fn section_tokens(&self, section_id: &str) -> Vec<String> {
        self.section(section_id)
            .flat_map(|s| s.tokens.iter().cloned())
            .collect()
    }

    /// All sentence tokens in canonical section order, without headers.
    pub fn tokens(&self, scheme: &SectionScheme) -> Vec<String> {
        scheme
            .ids()
            .flat_map(|id| self.section_tokens(id))
            .collect()
    }

    /// Header-delimited linearization used for whole-note generation:
    /// every header in scheme order, each followed by its section's tokens.
    pub fn linearize(&self, scheme: &SectionScheme) -> Vec<String> {
        let mut out = Vec::new();
        for section in &scheme.sections {
            out.push(section.header.clone());
            out.extend(self.section_tokens(&section.id));
        }
        out
    }

    /// Stable-sorts sentences into scheme order, preserving authoring order
    /// within each section. Unknown sections sort last.
    pub fn sort_by_scheme(&mut self, scheme: &SectionScheme) {
        self.sentences
            .sort_by_key(|s| scheme.position(&s.section).unwrap_or(usize::MAX));
    }

    pub fn evidence_union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .sentences
            .iter()
            .flat_map(|s| s.evidence.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn section_evidence_union(&self, section_id: &str) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .section(section_id)
            .flat_map(|s| s.evidence.iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedRecord {
    pub conversation: Conversation,
    pub note: Note,
    pub split: Split,
}

impl AnnotatedRecord {
    pub fn id(&self) -> &str {
        &self.conversation.id
    }

    /// Checks every record invariant against `scheme`.
    pub fn validate(&self, scheme: &SectionScheme) -> Result<()> {
        let id = self.id();
        for (pos, u) in self.conversation.utterances.iter().enumerate() {
            if u.index != pos {
                return Err(Error::validation(format!(
                    "record `{id}`: utterance at position {pos} has index {}",
                    u.index
                )));
            }
        }
        let n = self.conversation.len();
        let mut last_rank = 0;
        for (k, s) in self.note.sentences.iter().enumerate() {
            let rank = scheme.position(&s.section).ok_or_else(|| {
                Error::validation(format!(
                    "record `{id}`: sentence {k} has unknown section `{}` for scheme `{}`",
                    s.section, scheme.name
                ))
            })?;
            if rank < last_rank {
                return Err(Error::validation(format!(
                    "record `{id}`: sentence {k} (section `{}`) is out of canonical section order",
                    s.section
                )));
            }
            last_rank = rank;
            if let Some(&bad) = s.evidence.iter().find(|&&e| e >= n) {
                return Err(Error::validation(format!(
                    "record `{id}`: sentence {k} cites evidence utterance {bad} but the conversation has {n} utterances"
                )));
            }
        }
        Ok(())
    }
}

/// One cluster per note sentence, grouped by section position in `scheme`.
/// Sentences without evidence contribute no cluster.
pub fn derive_gold_clusters(record: &AnnotatedRecord, scheme: &SectionScheme) -> Vec<Vec<EvidenceCluster>> {
    let mut out = vec![Vec::new(); scheme.len()];
    for s in &record.note.sentences {
        if s.evidence.is_empty() {
            continue;
        }
        if let Some(pos) = scheme.position(&s.section) {
            out[pos].push(EvidenceCluster::new(pos, s.evidence.clone()));
        }
    }
    out
}

// Wire format. Field order here is the on-disk order.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    id: String,
    split: Split,
    utterances: Vec<UtteranceWire>,
    note: Vec<SentenceWire>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UtteranceWire {
    index: usize,
    speaker: String,
    text: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SentenceWire {
    section: String,
    text: String,
    evidence: Vec<usize>,
}

impl From<&AnnotatedRecord> for RecordWire {
    fn from(r: &AnnotatedRecord) -> Self {
        RecordWire {
            id: r.conversation.id.clone(),
            split: r.split,
            utterances: r
                .conversation
                .utterances
                .iter()
                .map(|u| UtteranceWire {
                    index: u.index,
                    speaker: u.speaker.clone(),
                    text: u.text.clone(),
                })
                .collect(),
            note: r
                .note
                .sentences
                .iter()
                .map(|s| SentenceWire {
                    section: s.section.clone(),
                    text: s.text.clone(),
                    evidence: s.evidence.clone(),
                })
                .collect(),
        }
    }
}

impl From<RecordWire> for AnnotatedRecord {
    fn from(w: RecordWire) -> Self {
        AnnotatedRecord {
            conversation: Conversation {
                id: w.id,
                utterances: w
                    .utterances
                    .into_iter()
                    .map(|u| Utterance::new(u.index, u.speaker, u.text))
                    .collect(),
            },
            note: Note {
                sentences: w
                    .note
                    .into_iter()
                    .map(|s| NoteSentence::new(s.section, s.text, s.evidence))
                    .collect(),
            },
            split: w.split,
        }
    }
}

pub fn record_to_json(record: &AnnotatedRecord) -> String {
    serde_json::to_string(&RecordWire::from(record)).expect("record serialization cannot fail")
}

/// Reads and validates a canonical corpus file.
pub fn load_corpus(path: impl AsRef<Path>, scheme: &SectionScheme) -> Result<Vec<AnnotatedRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), &path.display().to_string(), scheme)
}

pub fn read_corpus(reader: impl BufRead, source: &str, scheme: &SectionScheme) -> Result<Vec<AnnotatedRecord>> {
    let mut records = Vec::new();
    let mut ids = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: RecordWire = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let record = AnnotatedRecord::from(wire);
        record.validate(scheme)?;
        if !ids.insert(record.id().to_string()) {
            return Err(Error::validation(format!(
                "duplicate record id `{}` at line {}",
                record.id(),
                lineno + 1
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_corpus(records: &[AnnotatedRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(records, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus(records: &[AnnotatedRecord], w: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", record_to_json(r))?;
    }
    Ok(())
}

pub fn split_records(records: &[AnnotatedRecord], split: Split) -> Vec<AnnotatedRecord> {
    records.iter().filter(|r| r.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_record() -> AnnotatedRecord {
        let utterances = ["how are you", "i have a headache", "for two days", "okay", "take ibuprofen"]
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance::new(i, if i % 2 == 0 { "DR" } else { "PT" }, *t))
            .collect();
        AnnotatedRecord {
            conversation: Conversation {
                id: "c1".into(),
                utterances,
            },
            note: Note {
                sentences: vec![
                    NoteSentence::new("subjective", "headache for two days .", vec![1, 2]),
                    NoteSentence::new("plan", "ibuprofen .", vec![4]),
                ],
            },
            split: Split::Train,
        }
    }

    #[test]
    fn round_trip_through_text() {
        let scheme = SectionScheme::synthetic();
        let records = vec![tiny_record()];
        let mut buf = Vec::new();
        write_corpus(&records, &mut buf).unwrap();
        let back = read_corpus(&buf[..], "mem", &scheme).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        let scheme = SectionScheme::synthetic();
        assert!(read_corpus(&b""[..], "mem", &scheme).unwrap().is_empty());
    }

    #[test]
    fn dangling_evidence_names_record() {
        let scheme = SectionScheme::synthetic();
        let mut r = tiny_record();
        r.note.sentences[0].evidence = vec![99];
        let line = record_to_json(&r);
        let err = read_corpus(line.as_bytes(), "mem", &scheme).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("c1"));
    }

    #[test]
    fn malformed_line_names_line_number() {
        let scheme = SectionScheme::synthetic();
        let text = format!("{}\n{{not json\n", record_to_json(&tiny_record()));
        match read_corpus(text.as_bytes(), "mem", &scheme).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_sections_rejected() {
        let scheme = SectionScheme::synthetic();
        let mut r = tiny_record();
        r.note.sentences.reverse();
        assert!(r.validate(&scheme).is_err());
        r.note.sort_by_scheme(&scheme);
        assert!(r.validate(&scheme).is_ok());
    }

    #[test]
    fn gold_clusters_one_per_sentence() {
        let scheme = SectionScheme::synthetic();
        let mut r = tiny_record();
        r.note.sentences.insert(1, NoteSentence::new("subjective", "tired .", vec![2, 3]));
        r.note.sentences.insert(1, NoteSentence::new("subjective", "fine .", vec![0]));
        let clusters = derive_gold_clusters(&r, &scheme);
        assert_eq!(clusters[0].len(), 3);
        // overlapping evidence between sentences yields overlapping clusters
        assert_eq!(clusters[0][0].indices, vec![1, 2]);
        assert_eq!(clusters[0][2].indices, vec![2, 3]);
        assert_eq!(clusters[3].len(), 1);
        assert!(clusters[1].is_empty());
    }

    #[test]
    fn linearization_includes_every_header() {
        let scheme = SectionScheme::synthetic();
        let lin = tiny_record().note.linearize(&scheme);
        assert_eq!(lin[0], "<subjective>");
        let headers: Vec<_> = lin.iter().filter(|t| t.starts_with('<')).cloned().collect();
        assert_eq!(headers, scheme.headers());
    }
}
