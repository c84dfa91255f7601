use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::SectionScheme;
use crate::error::{Error, Result};
use crate::text::is_marker;

use super::TrainingPair;

pub const PAD: &str = "<pad>";
pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Token/id mapping. Ids 0..4 are padding, start, end and unknown, followed
/// by the section headers, the speaker tags and then ordinary tokens by
/// descending frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    n_headers: usize,
    n_reserved: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const START: usize = 1;
    pub const END: usize = 2;
    pub const UNK: usize = 3;

    fn from_parts(headers: Vec<String>, speakers: Vec<String>, words: Vec<String>) -> Self {
        let n_headers = headers.len();
        let mut tokens: Vec<String> = [PAD, START, END, UNK].iter().map(|s| s.to_string()).collect();
        tokens.extend(headers);
        tokens.extend(speakers);
        let n_reserved = tokens.len();
        tokens.extend(words);
        let mut v = Vocabulary { tokens, n_headers, n_reserved, index: HashMap::new() };
        v.reindex();
        v
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_reserved(&self) -> usize {
        self.n_reserved
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(Self::UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Header ids in scheme order.
    pub fn header_ids(&self) -> std::ops::Range<usize> {
        4..4 + self.n_headers
    }

    pub fn is_header(&self, id: usize) -> bool {
        self.header_ids().contains(&id)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Vocabulary over inputs and targets of `pairs`. Tokens seen fewer than
/// `min_count` times map to unknown; `usize::MAX` keeps only reserved tokens.
pub fn build_vocab(pairs: &[TrainingPair], scheme: &SectionScheme, min_count: usize) -> Result<Vocabulary> {
    if pairs.is_empty() {
        return Err(Error::validation("cannot build a vocabulary from zero training pairs"));
    }
    let headers = scheme.headers();
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut speakers = Vec::new();
    for p in pairs {
        for t in p.input.iter().chain(&p.target) {
            if is_marker(t) {
                if !headers.contains(t) && !speakers.contains(t) && ![PAD, START, END, UNK].contains(&t.as_str()) {
                    speakers.push(t.clone());
                }
            } else {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    speakers.sort();
    let mut words: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocabulary::from_parts(headers, speakers, words.into_iter().map(|(w, _)| w.to_string()).collect()))
}
