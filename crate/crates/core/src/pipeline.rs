//! The decompositions and baselines: selection, clustering and abstraction
//! composed into section-structured notes with per-sentence provenance.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abstractor::{beam_search, fusion_baseline_generate, Seq2SeqModel, TrainingPair, UNK};
use crate::asr_sim::conversation_seed;
use crate::cluster::proximity_cluster;
use crate::corpus::{derive_gold_clusters, AnnotatedRecord, Conversation, Note, NoteSentence, SectionScheme};
use crate::error::{Error, Result};
use crate::extract::{score_utterances, select_noteworthy, ExtractorMode, ExtractorModel, Thresholds};
use crate::text::{detokenize, speaker_token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Conv2Note,
    Ext2Note,
    Ext2Sec,
    Cluster2Sent,
    RandomNote,
    OracleExt,
    AllExt2Sec,
    Ext2SecNoCond,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Conv2Note,
        Method::Ext2Note,
        Method::Ext2Sec,
        Method::Cluster2Sent,
        Method::RandomNote,
        Method::OracleExt,
        Method::AllExt2Sec,
        Method::Ext2SecNoCond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Conv2Note => "conv2note",
            Method::Ext2Note => "ext2note",
            Method::Ext2Sec => "ext2sec",
            Method::Cluster2Sent => "cluster2sent",
            Method::RandomNote => "randomnote",
            Method::OracleExt => "oracleext",
            Method::AllExt2Sec => "allext2sec",
            Method::Ext2SecNoCond => "ext2secnocond",
        }
    }

    /// Extractor mode needed for predicted selections, if any.
    pub fn extractor_mode(self) -> Option<ExtractorMode> {
        match self {
            Method::Ext2Note | Method::AllExt2Sec => Some(ExtractorMode::Binary),
            Method::Ext2Sec | Method::Ext2SecNoCond | Method::Cluster2Sent => Some(ExtractorMode::Multilabel),
            _ => None,
        }
    }

    pub fn needs_abstractor(self) -> bool {
        !matches!(self, Method::RandomNote | Method::OracleExt)
    }

    /// Whole-note methods decode every header in one sequence.
    pub fn note_level(self) -> bool {
        matches!(self, Method::Conv2Note | Method::Ext2Note)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub oracle_utterances: bool,
    /// Gold evidence clusters; only for cluster2sent, and implies gold utterances.
    pub oracle_clusters: bool,
    pub tau: usize,
    pub beam_size: usize,
    pub seed: u64,
    /// Inputs keep at most this many utterances.
    pub utterance_cap: usize,
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        PipelineConfig {
            method,
            oracle_utterances: false,
            oracle_clusters: false,
            tau: 1,
            beam_size: 4,
            seed: 0,
            utterance_cap: 400,
        }
    }

    pub fn oracle(method: Method) -> Self {
        PipelineConfig { oracle_utterances: true, ..Self::new(method) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.oracle_clusters && self.method != Method::Cluster2Sent {
            return Err(Error::validation(format!("oracle clusters apply only to cluster2sent, not {}", self.method)));
        }
        if self.utterance_cap == 0 {
            return Err(Error::validation("utterance cap must be positive"));
        }
        Ok(())
    }

    fn oracle_selection(&self) -> bool {
        self.oracle_utterances || self.oracle_clusters
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Abstractor<'a> {
    Neural(&'a Seq2SeqModel),
    /// The deterministic fusion baseline; section and sentence units only.
    Fusion,
}

/// Frozen models a pipeline may draw on.
#[derive(Debug, Clone, Copy, Default)]
pub struct Resources<'a> {
    pub extractor: Option<&'a ExtractorModel>,
    pub thresholds: Option<&'a Thresholds>,
    pub abstractor: Option<Abstractor<'a>>,
    /// Notes sampled by randomnote.
    pub train: &'a [AnnotatedRecord],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSentence {
    pub section: String,
    pub text: String,
    /// Utterance indices whose content conditioned the sentence.
    pub provenance: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedNote {
    pub id: String,
    pub method: Method,
    pub note: Vec<GeneratedSentence>,
}

impl GeneratedNote {
    pub fn to_note(&self) -> Note {
        Note {
            sentences: self
                .note
                .iter()
                .map(|s| NoteSentence::new(s.section.clone(), s.text.clone(), Vec::new()))
                .collect(),
        }
    }

    /// Canonical section order and provenance within the conversation.
    pub fn validate(&self, scheme: &SectionScheme, conversation_len: usize) -> Result<()> {
        let mut last = 0;
        for s in &self.note {
            let pos = scheme
                .position(&s.section)
                .ok_or_else(|| Error::validation(format!("{}: unknown section `{}`", self.id, s.section)))?;
            if pos < last {
                return Err(Error::validation(format!("{}: sections out of canonical order", self.id)));
            }
            last = pos;
            if let Some(&bad) = s.provenance.iter().find(|&&i| i >= conversation_len) {
                return Err(Error::validation(format!("{}: provenance index {bad} out of range", self.id)));
            }
        }
        Ok(())
    }
}

/// Speaker tag followed by the utterance tokens, for each index in order.
pub fn utterance_tokens(conv: &Conversation, indices: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for &i in indices {
        let u = &conv.utterances[i];
        out.push(speaker_token(&u.speaker));
        out.extend(u.tokens.iter().cloned());
    }
    out
}

fn capped(mut indices: Vec<usize>, cap: usize) -> Vec<usize> {
    indices.truncate(cap);
    indices
}

/// Abstractor training pairs for `method` built from gold annotations.
/// Units with empty input are skipped.
pub fn training_pairs(method: Method, records: &[AnnotatedRecord], scheme: &SectionScheme, utterance_cap: usize) -> Result<Vec<TrainingPair>> {
    let mut pairs = Vec::new();
    for r in records {
        let conv = &r.conversation;
        let mut push = |indices: Vec<usize>, section: Option<usize>, target: Vec<String>| {
            let indices = capped(indices, utterance_cap);
            if !indices.is_empty() {
                pairs.push(TrainingPair { input: utterance_tokens(conv, &indices), section, target });
            }
        };
        match method {
            Method::Conv2Note => push((0..conv.len()).collect(), None, r.note.linearize(scheme)),
            Method::Ext2Note => push(r.note.evidence_union(), None, r.note.linearize(scheme)),
            Method::Ext2Sec | Method::Ext2SecNoCond => {
                for (pos, id) in scheme.ids().enumerate() {
                    let target = r.note.section_tokens(id);
                    if !target.is_empty() {
                        let section = (method == Method::Ext2Sec).then_some(pos);
                        push(r.note.section_evidence_union(id), section, target);
                    }
                }
            }
            Method::AllExt2Sec => {
                let union = r.note.evidence_union();
                for (pos, id) in scheme.ids().enumerate() {
                    let target = r.note.section_tokens(id);
                    if !target.is_empty() {
                        push(union.clone(), Some(pos), target);
                    }
                }
            }
            Method::Cluster2Sent => {
                for s in &r.note.sentences {
                    if let Some(pos) = scheme.position(&s.section) {
                        push(s.evidence.clone(), Some(pos), s.tokens.clone());
                    }
                }
            }
            Method::RandomNote | Method::OracleExt => {
                return Err(Error::validation(format!("{method} has no abstractor to train")));
            }
        }
    }
    Ok(pairs)
}

/// Splits after every `.` token; empty pieces are dropped.
pub fn split_sentences(tokens: &[String]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for t in tokens {
        cur.push(t.clone());
        if t == "." {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Section bodies of a header-delimited sequence, by scheme position.
/// Adjacent headers leave a section empty; tokens before the first header
/// go to the first section.
pub fn parse_linearized(tokens: &[String], scheme: &SectionScheme) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new(); scheme.len()];
    let mut cur = 0;
    for t in tokens {
        match scheme.position_of_header(t) {
            Some(p) => cur = p,
            None => out[cur].push(t.clone()),
        }
    }
    out
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    res: &'a Resources<'a>,
    scheme: &'a SectionScheme,
    record: &'a AnnotatedRecord,
    out: Vec<GeneratedSentence>,
}

impl Run<'_> {
    fn model(&self) -> Result<Abstractor<'_>> {
        self.res
            .abstractor
            .ok_or_else(|| Error::validation(format!("{} needs an abstractor", self.cfg.method)))
    }

    /// Predicted or gold selections: one list per section, or a single list
    /// for binary methods.
    fn selections(&self) -> Result<Vec<Vec<usize>>> {
        let note = &self.record.note;
        let binary = self.cfg.method.extractor_mode() == Some(ExtractorMode::Binary);
        let sel = if self.cfg.oracle_selection() {
            if binary {
                vec![note.evidence_union()]
            } else {
                self.scheme.ids().map(|id| note.section_evidence_union(id)).collect()
            }
        } else {
            let ext = self
                .res
                .extractor
                .ok_or_else(|| Error::validation(format!("{} without oracle utterances needs an extractor", self.cfg.method)))?;
            let want = self.cfg.method.extractor_mode();
            if Some(ext.mode) != want {
                return Err(Error::validation(format!("{} needs a {:?} extractor, got {:?}", self.cfg.method, want, ext.mode)));
            }
            let thresholds = self
                .res
                .thresholds
                .ok_or_else(|| Error::validation("predicted selection needs thresholds"))?;
            if thresholds.values.len() != ext.labels.len() {
                return Err(Error::validation("threshold count does not match extractor labels"));
            }
            select_noteworthy(&score_utterances(ext, &self.record.conversation), thresholds)
        };
        Ok(sel.into_iter().map(|s| capped(s, self.cfg.utterance_cap)).collect())
    }

    fn decode(&self, indices: &[usize], section: Option<usize>, note_level: bool) -> Result<Vec<String>> {
        let conv = &self.record.conversation;
        match self.model()? {
            Abstractor::Neural(m) => {
                let headers = note_level.then(|| self.scheme.headers());
                let out = beam_search(m, &utterance_tokens(conv, indices), section, self.cfg.beam_size, m.bounds, headers.as_deref())?;
                Ok(out.into_iter().filter(|t| t != UNK).collect())
            }
            Abstractor::Fusion if !note_level => {
                let lines: Vec<String> = indices
                    .iter()
                    .map(|&i| format!("{}: {}", conv.utterances[i].speaker, conv.utterances[i].text))
                    .collect();
                fusion_baseline_generate(&lines)
            }
            Abstractor::Fusion => Err(Error::validation(format!("the fusion baseline cannot produce whole notes ({})", self.cfg.method))),
        }
    }

    fn emit(&mut self, section: usize, tokens: &[String], provenance: &[usize]) {
        if tokens.is_empty() {
            return;
        }
        self.out.push(GeneratedSentence {
            section: self.scheme.sections[section].id.clone(),
            text: detokenize(tokens),
            provenance: provenance.to_vec(),
        });
    }

    fn emit_sentences(&mut self, section: usize, tokens: &[String], provenance: &[usize]) {
        for s in split_sentences(tokens) {
            self.emit(section, &s, provenance);
        }
    }

    fn note_level(&mut self, indices: Vec<usize>) -> Result<()> {
        if indices.is_empty() {
            return Ok(());
        }
        let tokens = self.decode(&indices, None, true)?;
        for (pos, body) in parse_linearized(&tokens, self.scheme).into_iter().enumerate() {
            self.emit_sentences(pos, &body, &indices);
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let conv = &self.record.conversation;
        match self.cfg.method {
            Method::Conv2Note => self.note_level(capped((0..conv.len()).collect(), self.cfg.utterance_cap))?,
            Method::Ext2Note => {
                let sel = self.selections()?.swap_remove(0);
                self.note_level(sel)?;
            }
            Method::Ext2Sec | Method::Ext2SecNoCond => {
                let cond = self.cfg.method == Method::Ext2Sec;
                for (pos, sel) in self.selections()?.into_iter().enumerate() {
                    if !sel.is_empty() {
                        let tokens = self.decode(&sel, cond.then_some(pos), false)?;
                        self.emit_sentences(pos, &tokens, &sel);
                    }
                }
            }
            Method::AllExt2Sec => {
                let sel = self.selections()?.swap_remove(0);
                if !sel.is_empty() {
                    for pos in 0..self.scheme.len() {
                        let tokens = self.decode(&sel, Some(pos), false)?;
                        self.emit_sentences(pos, &tokens, &sel);
                    }
                }
            }
            Method::Cluster2Sent => {
                let clusters: Vec<Vec<Vec<usize>>> = if self.cfg.oracle_clusters {
                    derive_gold_clusters(self.record, self.scheme)
                        .into_iter()
                        .map(|cs| cs.into_iter().map(|c| c.indices).collect())
                        .collect()
                } else {
                    self.selections()?.iter().map(|sel| proximity_cluster(sel, self.cfg.tau)).collect()
                };
                for (pos, mut cs) in clusters.into_iter().enumerate() {
                    cs.sort_by_key(|c| c.first().copied());
                    for c in cs {
                        let tokens = self.decode(&c, Some(pos), false)?;
                        self.emit(pos, &tokens, &c);
                    }
                }
            }
            Method::RandomNote => {
                let train = self.res.train;
                if train.is_empty() {
                    return Err(Error::validation("randomnote needs a nonempty training set"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(conversation_seed(self.cfg.seed, self.record.id()));
                let pick = &train[rng.gen_range(0..train.len())];
                let mut note = pick.note.clone();
                note.sort_by_scheme(self.scheme);
                for s in note.sentences {
                    if let Some(pos) = self.scheme.position(&s.section) {
                        self.emit(pos, &s.tokens, &[]);
                    }
                }
            }
            Method::OracleExt => {
                for (pos, id) in self.scheme.ids().enumerate() {
                    let ev = self.record.note.section_evidence_union(id);
                    let tokens: Vec<String> = ev.iter().flat_map(|&i| conv.utterances[i].tokens.iter().cloned()).collect();
                    self.emit(pos, &tokens, &ev);
                }
            }
        }
        Ok(())
    }
}

/// Runs the configured method on one record.
pub fn generate_note(cfg: &PipelineConfig, res: &Resources<'_>, scheme: &SectionScheme, record: &AnnotatedRecord) -> Result<GeneratedNote> {
    cfg.validate()?;
    if cfg.method.needs_abstractor() && res.abstractor.is_none() {
        return Err(Error::validation(format!("{} needs an abstractor", cfg.method)));
    }
    let mut run = Run { cfg, res, scheme, record, out: Vec::new() };
    run.run().map_err(|e| match e {
        Error::Validation(m) => Error::Validation(format!("{}: {m}", record.id())),
        other => other,
    })?;
    Ok(GeneratedNote { id: record.id().to_string(), method: cfg.method, note: run.out })
}

/// Runs `generate_note` over `records` on up to `jobs` threads. Output is
/// sorted by record id.
pub fn generate_notes(
    cfg: &PipelineConfig,
    res: &Resources<'_>,
    scheme: &SectionScheme,
    records: &[AnnotatedRecord],
    jobs: usize,
) -> Result<Vec<GeneratedNote>> {
    cfg.validate()?;
    let jobs = jobs.clamp(1, records.len().max(1));
    let mut notes = if jobs == 1 {
        records.iter().map(|r| generate_note(cfg, res, scheme, r)).collect::<Result<Vec<_>>>()?
    } else {
        let chunk = records.len().div_ceil(jobs);
        let parts: Vec<Result<Vec<GeneratedNote>>> = std::thread::scope(|s| {
            let handles: Vec<_> = records
                .chunks(chunk)
                .map(|part| s.spawn(move || part.iter().map(|r| generate_note(cfg, res, scheme, r)).collect::<Result<Vec<_>>>()))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Runtime("generation worker panicked".into()))))
                .collect()
        });
        let mut all = Vec::with_capacity(records.len());
        for p in parts {
            all.extend(p?);
        }
        all
    };
    notes.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(notes)
}

pub fn write_generated(notes: &[GeneratedNote], w: &mut impl Write) -> std::io::Result<()> {
    for n in notes {
        let line = serde_json::to_string(n).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_generated(notes: &[GeneratedNote], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_generated(notes, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_generated(reader: impl BufRead, source: &str) -> Result<Vec<GeneratedNote>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let note: GeneratedNote = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(note);
    }
    Ok(out)
}

pub fn load_generated(path: &Path) -> Result<Vec<GeneratedNote>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_generated(std::io::BufReader::new(f), &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstractor::{train_abstractor, AbstractorHyperParams, ModelConfig};
    use crate::corpus::synth::{generate_synthetic, SynthConfig};
    use crate::corpus::Split;
    use crate::metrics::score_notes;

    fn corpus(n: usize) -> Vec<AnnotatedRecord> {
        generate_synthetic(&SynthConfig { n_records: n, ..Default::default() }, 5).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("conv2sent".parse::<Method>().is_err());
    }

    #[test]
    fn oracle_clusters_only_for_cluster2sent() {
        let cfg = PipelineConfig { oracle_clusters: true, ..PipelineConfig::new(Method::Ext2Sec) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parser_accepts_adjacent_headers() {
        let scheme = SectionScheme::synthetic();
        let toks: Vec<String> = "<subjective> a . <objective> <assessment> b . c . <plan>"
            .split(' ')
            .map(String::from)
            .collect();
        let secs = parse_linearized(&toks, &scheme);
        assert_eq!(secs[0], ["a", "."]);
        assert!(secs[1].is_empty() && secs[3].is_empty());
        assert_eq!(split_sentences(&secs[2]).len(), 2);
    }

    #[test]
    fn oracleext_copies_evidence() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(10);
        let cfg = PipelineConfig::new(Method::OracleExt);
        for r in &recs {
            let g = generate_note(&cfg, &Resources::default(), &scheme, r).unwrap();
            g.validate(&scheme, r.conversation.len()).unwrap();
            let conv: Vec<&String> = r.conversation.utterances.iter().flat_map(|u| &u.tokens).collect();
            for s in &g.note {
                for t in s.text.split(' ') {
                    assert!(conv.iter().any(|c| *c == t));
                }
            }
        }
        let mut empty = recs[0].clone();
        empty.note.sentences.clear();
        assert!(generate_note(&cfg, &Resources::default(), &scheme, &empty).unwrap().note.is_empty());
    }

    #[test]
    fn randomnote_is_seeded() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(20);
        let cfg = PipelineConfig { seed: 3, ..PipelineConfig::new(Method::RandomNote) };
        let res = Resources { train: &recs[..10], ..Default::default() };
        let a = generate_notes(&cfg, &res, &scheme, &recs[10..], 1).unwrap();
        let b = generate_notes(&cfg, &res, &scheme, &recs[10..], 3).unwrap();
        assert_eq!(a, b);
        let one = Resources { train: &recs[..1], ..Default::default() };
        for r in &recs[10..] {
            let g = generate_note(&cfg, &one, &scheme, r).unwrap();
            assert_eq!(g.to_note().tokens(&scheme), recs[0].note.tokens(&scheme));
        }
    }

    #[test]
    fn oracle_clusters_give_one_sentence_per_gold_sentence() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(8);
        let cfg = PipelineConfig { oracle_clusters: true, ..PipelineConfig::oracle(Method::Cluster2Sent) };
        let res = Resources { abstractor: Some(Abstractor::Fusion), ..Default::default() };
        for r in &recs {
            let g = generate_note(&cfg, &res, &scheme, r).unwrap();
            g.validate(&scheme, r.conversation.len()).unwrap();
            for id in scheme.ids() {
                assert_eq!(g.note.iter().filter(|s| s.section == id).count(), r.note.section(id).count());
            }
        }
    }

    #[test]
    fn predicted_cluster2sent_has_provenance() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(60);
        let train = crate::corpus::split_records(&recs, Split::Train);
        let space = crate::extract::fit_feature_space(&train, 1).unwrap();
        let (ext, _) = crate::extract::train_extractor(
            &train,
            &space,
            &scheme,
            ExtractorMode::Multilabel,
            &Default::default(),
            1,
        )
        .unwrap();
        let th = Thresholds::uniform(4, 0.5);
        let cfg = PipelineConfig::new(Method::Cluster2Sent);
        let res = Resources { extractor: Some(&ext), thresholds: Some(&th), abstractor: Some(Abstractor::Fusion), train: &[] };
        let notes = generate_notes(&cfg, &res, &scheme, &recs, 2).unwrap();
        assert!(notes.iter().any(|n| !n.note.is_empty()));
        for (n, r) in notes.iter().zip(&recs) {
            n.validate(&scheme, r.conversation.len()).unwrap();
            assert!(n.note.iter().all(|s| !s.provenance.is_empty()));
        }
        let wrong = PipelineConfig::new(Method::Ext2Note);
        assert!(generate_note(&wrong, &Resources { abstractor: Some(Abstractor::Fusion), ..res }, &scheme, &recs[0]).is_err());
    }

    #[test]
    fn memorized_record_regenerates_its_note() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(1);
        let pairs = training_pairs(Method::Conv2Note, &recs, &scheme, 400).unwrap();
        let cfg = ModelConfig { embed: 16, hidden: 16, decoder: 32, attention: 16, output: 32, ..Default::default() };
        let hp = AbstractorHyperParams { epochs: 150, batch_size: 1, learning_rate: 0.01, patience: 400, ..Default::default() };
        let (model, _) = train_abstractor(&cfg, &scheme, &pairs, &pairs, &hp, 1).unwrap();
        let res = Resources { abstractor: Some(Abstractor::Neural(&model)), ..Default::default() };
        let g = generate_note(&PipelineConfig::new(Method::Conv2Note), &res, &scheme, &recs[0]).unwrap();
        assert_eq!(g.to_note().tokens(&scheme), recs[0].note.tokens(&scheme));
        let rep = score_notes([(g.id.as_str(), &g.to_note())], &recs, &scheme, None).unwrap();
        assert!((rep.whole.r1.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pairs_per_method() {
        let scheme = SectionScheme::synthetic();
        let recs = corpus(5);
        let n_sent: usize = recs.iter().map(|r| r.note.sentences.len()).sum();
        assert_eq!(training_pairs(Method::Cluster2Sent, &recs, &scheme, 400).unwrap().len(), n_sent);
        assert_eq!(training_pairs(Method::Conv2Note, &recs, &scheme, 400).unwrap().len(), 5);
        let sec = training_pairs(Method::Ext2Sec, &recs, &scheme, 400).unwrap();
        let nocond = training_pairs(Method::Ext2SecNoCond, &recs, &scheme, 400).unwrap();
        assert_eq!(sec.len(), nocond.len());
        assert!(nocond.iter().all(|p| p.section.is_none()));
        let all = training_pairs(Method::AllExt2Sec, &recs, &scheme, 400).unwrap();
        assert!(all.iter().zip(&sec).all(|(a, s)| a.input.len() >= s.input.len()));
        assert!(training_pairs(Method::OracleExt, &recs, &scheme, 400).is_err());
        let capped = training_pairs(Method::Conv2Note, &recs, &scheme, 2).unwrap();
        assert!(capped.iter().all(|p| p.input.iter().filter(|t| t.starts_with('<')).count() == 2));
    }
}
