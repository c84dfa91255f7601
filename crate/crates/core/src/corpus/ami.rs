//! Adapter for a simplified three-file AMI export.
//!
//! * transcript: `meeting_id \t utterance_index \t speaker \t text`
//! * summary:    `meeting_id \t sentence_index \t section \t text`
//! * links:      `meeting_id \t sentence_index \t utterance_index`
//!
//! Utterance and sentence indices are the export's own identifiers; they
//! need not be contiguous. Summary sentences without any link are dropped.
//! A first line starting with `meeting_id` is treated as a column header.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::corpus::{AnnotatedRecord, Conversation, Note, NoteSentence, SectionScheme, Split, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct AmiExport {
    /// meeting -> (utterance id -> (speaker, text)), in export order of first appearance.
    transcripts: Vec<(String, BTreeMap<i64, (String, String)>)>,
    summaries: HashMap<String, BTreeMap<i64, (String, String)>>,
    links: HashMap<String, BTreeMap<i64, BTreeSet<i64>>>,
}

fn rows<'a>(raw: &'a str, source: &'a str, columns: usize) -> impl Iterator<Item = Result<(usize, Vec<&'a str>)>> + 'a {
    raw.lines()
        .enumerate()
        .filter(|(i, line)| {
            let t = line.trim();
            !(t.is_empty() || t.starts_with('#') || (*i == 0 && t.starts_with("meeting_id")))
        })
        .map(move |(i, line)| {
            let fields: Vec<&str> = line.splitn(columns, '\t').collect();
            if fields.len() != columns {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: i + 1,
                    message: format!("expected {columns} tab-separated fields"),
                });
            }
            Ok((i + 1, fields))
        })
}

fn parse_index(field: &str, source: &str, line: usize) -> Result<i64> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: source.to_string(),
        line,
        message: format!("`{field}` is not an integer index"),
    })
}

impl AmiExport {
    pub fn parse(transcript: &str, summary: &str, links: &str) -> Result<Self> {
        let mut export = AmiExport::default();
        let mut order: HashMap<String, usize> = HashMap::new();
        for row in rows(transcript, "transcript", 4) {
            let (line, f) = row?;
            let idx = parse_index(f[1], "transcript", line)?;
            let meeting = f[0].trim().to_string();
            let slot = *order.entry(meeting.clone()).or_insert_with(|| {
                export.transcripts.push((meeting.clone(), BTreeMap::new()));
                export.transcripts.len() - 1
            });
            if export.transcripts[slot]
                .1
                .insert(idx, (f[2].trim().to_string(), f[3].trim().to_string()))
                .is_some()
            {
                return Err(Error::Parse {
                    path: "transcript".into(),
                    line,
                    message: format!("duplicate utterance index {idx} in meeting `{meeting}`"),
                });
            }
        }
        for row in rows(summary, "summary", 4) {
            let (line, f) = row?;
            let idx = parse_index(f[1], "summary", line)?;
            export
                .summaries
                .entry(f[0].trim().to_string())
                .or_default()
                .insert(idx, (f[2].trim().to_string(), f[3].trim().to_string()));
        }
        for row in rows(links, "links", 3) {
            let (line, f) = row?;
            let sent = parse_index(f[1], "links", line)?;
            let utt = parse_index(f[2], "links", line)?;
            export
                .links
                .entry(f[0].trim().to_string())
                .or_default()
                .entry(sent)
                .or_default()
                .insert(utt);
        }
        Ok(export)
    }

    pub fn read(transcript: &Path, summary: &Path, links: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::parse(&read(transcript)?, &read(summary)?, &read(links)?)
    }

    /// Builds one record per meeting, in transcript order.
    pub fn into_records(self, scheme: &SectionScheme, split: Split) -> Result<Vec<AnnotatedRecord>> {
        let mut out = Vec::new();
        for (meeting, utts) in &self.transcripts {
            let position: HashMap<i64, usize> = utts.keys().enumerate().map(|(p, &id)| (id, p)).collect();
            let utterances = utts
                .values()
                .enumerate()
                .map(|(p, (speaker, text))| Utterance::new(p, speaker.clone(), text.clone()))
                .collect();
            let empty_links = BTreeMap::new();
            let links = self.links.get(meeting).unwrap_or(&empty_links);
            let summary = self.summaries.get(meeting).cloned().unwrap_or_default();
            for sent in links.keys() {
                if !summary.contains_key(sent) {
                    return Err(Error::validation(format!(
                        "meeting `{meeting}`: link refers to missing summary sentence {sent}"
                    )));
                }
            }
            let mut sentences = Vec::new();
            for (sent_id, (section, text)) in summary {
                if scheme.position(&section).is_none() {
                    return Err(Error::validation(format!(
                        "meeting `{meeting}`: unknown section label `{section}` on sentence {sent_id}"
                    )));
                }
                let Some(linked) = links.get(&sent_id) else {
                    continue;
                };
                let evidence = linked
                    .iter()
                    .map(|u| {
                        position.get(u).copied().ok_or_else(|| {
                            Error::validation(format!(
                                "meeting `{meeting}`: sentence {sent_id} links to missing utterance {u}"
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if evidence.is_empty() {
                    continue;
                }
                sentences.push(NoteSentence::new(section, text, evidence));
            }
            let mut note = Note { sentences };
            note.sort_by_scheme(scheme);
            let record = AnnotatedRecord {
                conversation: Conversation {
                    id: meeting.clone(),
                    utterances,
                },
                note,
                split,
            };
            record.validate(scheme)?;
            out.push(record);
        }
        Ok(out)
    }
}

/// Reads the three export files and returns one record per meeting.
pub fn ingest_ami(
    transcript: impl AsRef<Path>,
    summary: impl AsRef<Path>,
    links: impl AsRef<Path>,
    scheme: &SectionScheme,
    split: Split,
) -> Result<Vec<AnnotatedRecord>> {
    AmiExport::read(transcript.as_ref(), summary.as_ref(), links.as_ref())?.into_records(scheme, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRANSCRIPT: &str = "meeting_id\tutterance_index\tspeaker\ttext\n\
        m1\t10\tA\tlet us start\n\
        m1\t11\tB\tthe remote should be yellow\n\
        m1\t12\tC\tagreed\n";
    const SUMMARY: &str = "m1\t0\tabstract\tthe team met .\n\
        m1\t1\tdecisions\tthe remote will be yellow .\n\
        m1\t2\tproblems\tnothing was linked .\n";
    const LINKS: &str = "m1\t0\t10\nm1\t1\t11\nm1\t1\t12\n";

    #[test]
    fn drops_unlinked_sentences() {
        let scheme = SectionScheme::ami();
        let recs = AmiExport::parse(TRANSCRIPT, SUMMARY, LINKS)
            .unwrap()
            .into_records(&scheme, Split::Train)
            .unwrap();
        assert_eq!(recs.len(), 1);
        let note = &recs[0].note;
        assert_eq!(note.sentences.len(), 2);
        assert_eq!(note.sentences[1].evidence, vec![1, 2]);
    }

    #[test]
    fn missing_utterance_is_an_error() {
        let scheme = SectionScheme::ami();
        let links = "m1\t0\t99\n";
        let err = AmiExport::parse(TRANSCRIPT, SUMMARY, links)
            .unwrap()
            .into_records(&scheme, Split::Train)
            .unwrap_err();
        assert!(err.to_string().contains("missing utterance 99"));
    }

    #[test]
    fn unknown_section_is_an_error() {
        let scheme = SectionScheme::ami();
        let summary = "m1\t0\tgossip\tsomething .\n";
        assert!(AmiExport::parse(TRANSCRIPT, summary, "")
            .unwrap()
            .into_records(&scheme, Split::Train)
            .is_err());
    }

    #[test]
    fn short_row_is_parse_error() {
        assert!(matches!(
            AmiExport::parse("m1\t0\tA\n", "", ""),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
