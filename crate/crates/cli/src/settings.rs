use std::path::Path;

use notegen::abstractor::{AbstractorHyperParams, ModelConfig};
use notegen::cluster::CalibrationMode;
use notegen::config::KvConfig;
use notegen::corpus::{SectionScheme, SynthConfig};
use notegen::extract::{ExtractorHyperParams, ExtractorMode};
use notegen::Result;

/// Every configurable value, read from one flat key-value file.
///
/// All keys are consumed up front so a typo anywhere in the file is
/// rejected no matter which subcommand runs.
#[derive(Debug, Clone)]
pub struct Settings {
    pub kv: KvConfig,
    pub scheme: String,
    pub synth: SynthConfig,
    pub extractor: ExtractorHyperParams,
    pub window: usize,
    pub extractor_mode: ExtractorMode,
    pub model: ModelConfig,
    pub abstractor: AbstractorHyperParams,
    pub tau: usize,
    pub beam_size: usize,
    pub utterance_cap: usize,
    pub calibrate_mode: CalibrationMode,
    pub taus: Vec<usize>,
    pub corrupt_rate: f64,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let kv = match path {
            Some(p) => KvConfig::load(p)?,
            None => KvConfig::default(),
        };
        Self::from_kv(kv)
    }

    pub fn from_kv(kv: KvConfig) -> Result<Self> {
        let mut probe = kv.clone();
        let s = Settings {
            scheme: probe.get("corpus.scheme", "synthetic".to_string())?,
            synth: SynthConfig::from_kv(&mut probe)?,
            extractor: ExtractorHyperParams::from_kv(&mut probe)?,
            window: probe.get("extractor.window", 2usize)?,
            extractor_mode: probe.get("extractor.mode", ExtractorMode::Multilabel)?,
            model: ModelConfig::from_kv(&mut probe)?,
            abstractor: AbstractorHyperParams::from_kv(&mut probe)?,
            tau: probe.get("pipeline.tau", 1usize)?,
            beam_size: probe.get("pipeline.beam_size", 4usize)?,
            utterance_cap: probe.get("pipeline.utterance_cap", 400usize)?,
            calibrate_mode: probe.get("calibrate.mode", CalibrationMode::ClusterMatched)?,
            taus: probe.get_list("calibrate.taus", (0..=5).collect())?,
            corrupt_rate: probe.get("corrupt.rate", 0.1f64)?,
            kv: kv.clone(),
        };
        probe.finish()?;
        Ok(s)
    }

    pub fn scheme(&self, name: Option<&str>) -> Result<SectionScheme> {
        SectionScheme::resolve(name.unwrap_or(&self.scheme))
    }
}
