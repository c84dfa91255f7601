//! Recurrent encoder-decoder with attention, a copy/generate mixture,
//! optional section conditioning and coverage, plus a deterministic
//! fusion baseline.
//!
//! Checkpoints are JSON objects with fields `format`
//! (`notegen-abstractor/1`), `tag`, `config`, `sections`, `vocab`, `bounds` and
//! `params`; `params` is the flat parameter vector in the order embedding,
//! section embedding, forward encoder GRU, backward encoder GRU, decoder
//! initialisation, decoder GRU, attention, output layer, vocabulary
//! projection and copy gate. Each GRU stores input weights, recurrent
//! weights, input bias and recurrent bias with gates ordered reset, update,
//! candidate.

mod decode;
mod fusion;
mod net;
mod train;
mod vocab;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::KvConfig;
use crate::error::{Error, Result};

pub use decode::{beam_search, greedy_decode, LengthBounds};
pub use fusion::{fusion_baseline_generate, FILLER_STOPLIST};
pub use train::{gradient_check, train_abstractor, AbstractorHyperParams, LogRow, TrainingLog};
pub use vocab::{build_vocab, Vocabulary, END, PAD, START, UNK};

use net::{EncCache, Example, Layout};

pub const ABSTRACTOR_FORMAT: &str = "notegen-abstractor/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditioning {
    /// The section is ignored.
    None,
    /// The section's header token is prepended to the input.
    Header,
    /// A learned section embedding is concatenated to every encoder and
    /// decoder input.
    Embedding,
}

impl std::str::FromStr for Conditioning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Conditioning::None),
            "header" => Ok(Conditioning::Header),
            "embedding" => Ok(Conditioning::Embedding),
            other => Err(Error::validation(format!("unknown conditioning `{other}` (none, header, embedding)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed: usize,
    /// Encoder hidden size per direction.
    pub hidden: usize,
    pub decoder: usize,
    pub attention: usize,
    pub output: usize,
    pub copy: bool,
    pub conditioning: Conditioning,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed: 32,
            hidden: 32,
            decoder: 64,
            attention: 32,
            output: 64,
            copy: true,
            conditioning: Conditioning::Header,
        }
    }
}

impl ModelConfig {
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = ModelConfig::default();
        let cfg = ModelConfig {
            embed: kv.get("abstractor.embed", d.embed)?,
            hidden: kv.get("abstractor.hidden", d.hidden)?,
            decoder: kv.get("abstractor.decoder", d.decoder)?,
            attention: kv.get("abstractor.attention", d.attention)?,
            output: kv.get("abstractor.output", d.output)?,
            copy: kv.get("abstractor.copy", d.copy)?,
            conditioning: kv.get("abstractor.conditioning", d.conditioning)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embed", self.embed),
            ("hidden", self.hidden),
            ("decoder", self.decoder),
            ("attention", self.attention),
            ("output", self.output),
        ] {
            if v == 0 {
                return Err(Error::Config { key: format!("abstractor.{name}"), message: "must be positive".into() });
            }
        }
        Ok(())
    }

    /// Tiny dimensions for tests and gradient checks.
    pub fn tiny() -> Self {
        ModelConfig { embed: 4, hidden: 3, decoder: 5, attention: 4, output: 4, ..Default::default() }
    }
}

/// One abstraction unit: input tokens (speaker tags included), the section
/// being written if any, and the target tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: Vec<String>,
    pub section: Option<usize>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub format: String,
    /// Free-form label of what the model was trained for; empty when unset.
    #[serde(default)]
    pub tag: String,
    pub config: ModelConfig,
    /// Number of sections in the scheme the model was trained with.
    pub sections: usize,
    pub vocab: Vocabulary,
    pub bounds: LengthBounds,
    pub params: Vec<f64>,
}

/// Encoder output for one input sequence.
#[derive(Debug, Clone)]
pub struct Encoded {
    cache: EncCache,
    src_ext: Vec<usize>,
    oovs: Vec<String>,
    vocab_len: usize,
}

impl Encoded {
    /// One state per (possibly header-extended) input position.
    pub fn states(&self) -> &[Vec<f64>] {
        &self.cache.hs
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.cache.s0
    }

    /// Size of the vocabulary extended with source-only tokens.
    pub fn extended_len(&self) -> usize {
        self.vocab_len + self.oovs.len()
    }

    /// Extended id of every input position.
    pub fn source_ids(&self) -> &[usize] {
        &self.src_ext
    }

    pub fn token<'a>(&'a self, model: &'a Seq2SeqModel, id: usize) -> &'a str {
        if id < self.vocab_len {
            model.vocab.token(id)
        } else {
            &self.oovs[id - self.vocab_len]
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Distribution over the extended vocabulary.
    pub dist: Vec<f64>,
    pub state: Vec<f64>,
    pub attention: Vec<f64>,
    pub p_gen: f64,
}

impl Seq2SeqModel {
    pub(crate) fn layout(&self) -> Layout {
        Layout::new(&self.config, self.vocab.len(), self.sections)
    }

    pub fn header_id(&self, section: usize) -> usize {
        self.vocab.header_ids().start + section
    }

    fn check_section(&self, section: Option<usize>) -> Result<()> {
        match section {
            Some(s) if s >= self.sections => Err(Error::validation(format!("section {s} out of range ({} sections)", self.sections))),
            _ => Ok(()),
        }
    }

    /// Embedding ids, extended ids and source-only tokens of an input.
    fn source(&self, tokens: &[String], section: Option<usize>) -> Result<(Vec<usize>, Vec<usize>, Vec<String>)> {
        if tokens.is_empty() {
            return Err(Error::validation("abstractor input is empty"));
        }
        self.check_section(section)?;
        let mut src = Vec::with_capacity(tokens.len() + 1);
        let mut ext = Vec::with_capacity(tokens.len() + 1);
        let mut oovs: Vec<String> = Vec::new();
        if let (Conditioning::Header, Some(s)) = (self.config.conditioning, section) {
            src.push(self.header_id(s));
            ext.push(self.header_id(s));
        }
        for t in tokens {
            match self.vocab.get(t) {
                Some(id) => {
                    src.push(id);
                    ext.push(id);
                }
                None if self.config.copy => {
                    let k = oovs.iter().position(|o| o == t).unwrap_or_else(|| {
                        oovs.push(t.clone());
                        oovs.len() - 1
                    });
                    src.push(Vocabulary::UNK);
                    ext.push(self.vocab.len() + k);
                }
                None => {
                    src.push(Vocabulary::UNK);
                    ext.push(Vocabulary::UNK);
                }
            }
        }
        Ok((src, ext, oovs))
    }

    fn section_input(&self, section: Option<usize>) -> Option<usize> {
        match self.config.conditioning {
            Conditioning::None => None,
            _ => section,
        }
    }

    pub(crate) fn example(&self, pair: &TrainingPair) -> Result<Example> {
        let section = self.section_input(pair.section);
        let (src, src_ext, oovs) = self.source(&pair.input, section)?;
        let mut targets: Vec<usize> = pair
            .target
            .iter()
            .map(|t| match self.vocab.get(t) {
                Some(id) => id,
                None => oovs
                    .iter()
                    .position(|o| o == t)
                    .map_or(Vocabulary::UNK, |k| self.vocab.len() + k),
            })
            .collect();
        targets.push(Vocabulary::END);
        let mut dec_in = vec![Vocabulary::START];
        dec_in.extend(targets[..targets.len() - 1].iter().map(|&id| if id < self.vocab.len() { id } else { Vocabulary::UNK }));
        Ok(Example { src, src_ext, section, dec_in, targets })
    }

    /// Encodes `tokens`, prepending the section header when the model is
    /// header-conditioned and a section is given.
    pub fn encode_input(&self, tokens: &[String], section: Option<usize>) -> Result<Encoded> {
        let section = self.section_input(section);
        let (src, src_ext, oovs) = self.source(tokens, section)?;
        let cache = self.layout().encode(&self.params, &src, section);
        if cache.hs.iter().flatten().chain(&cache.s0).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite encoder state".into()));
        }
        Ok(Encoded { cache, src_ext, oovs, vocab_len: self.vocab.len() })
    }

    /// One decoder step from `state` after feeding `prev` (an extended id).
    pub fn decode_step(&self, enc: &Encoded, state: &[f64], prev: usize, coverage: &[f64]) -> Result<StepOutput> {
        self.decode_step_with(enc, state, prev, coverage, None)
    }

    /// `decode_step` with the copy gate pinned to `p_gen`.
    pub fn decode_step_forced(&self, enc: &Encoded, state: &[f64], prev: usize, coverage: &[f64], p_gen: f64) -> Result<StepOutput> {
        self.decode_step_with(enc, state, prev, coverage, Some(p_gen))
    }

    fn decode_step_with(&self, enc: &Encoded, state: &[f64], prev: usize, coverage: &[f64], pg: Option<f64>) -> Result<StepOutput> {
        let prev = if prev < self.vocab.len() { prev } else { Vocabulary::UNK };
        let st = self.layout().step(&self.params, &enc.cache, state, prev, coverage, pg);
        let dist = net::mixture(&st, &enc.src_ext, enc.extended_len());
        if dist.iter().chain(st.state()).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite decoder activation".into()));
        }
        Ok(StepOutput { dist, state: st.state().to_vec(), attention: st.a, p_gen: st.pg })
    }

    /// Mean teacher-forced next-token accuracy over `pairs`.
    pub fn next_token_accuracy(&self, pairs: &[TrainingPair]) -> Result<f64> {
        let layout = self.layout();
        let (mut correct, mut total) = (0, 0);
        for p in pairs {
            let s = layout.run_example(&self.params, &self.example(p)?, 0.0, None);
            correct += s.correct;
            total += s.steps;
        }
        Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Runtime(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let mut m: Seq2SeqModel = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if m.format != ABSTRACTOR_FORMAT {
            return Err(Error::validation(format!("{source}: unsupported abstractor format `{}`", m.format)));
        }
        m.vocab.reindex();
        m.config.validate()?;
        if m.params.len() != m.layout().total {
            return Err(Error::validation(format!("{source}: parameter count does not match the configured dimensions")));
        }
        if m.params.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("{source}: non-finite parameter")));
        }
        Ok(m)
    }

    /// Per-block parameter counts as a table.
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("block\tparameters\n");
        for (name, r) in self.layout().blocks() {
            let _ = writeln!(out, "{name}\t{}", r.len());
        }
        out
    }
}

#[cfg(test)]
mod tests;
