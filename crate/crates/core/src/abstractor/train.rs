use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::KvConfig;
use crate::corpus::SectionScheme;
use crate::error::{Error, Result};

use super::net::Layout;
use super::{build_vocab, LengthBounds, ModelConfig, Seq2SeqModel, TrainingPair, ABSTRACTOR_FORMAT};

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractorHyperParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub clip_norm: f64,
    pub min_count: usize,
    /// Second phase: extra epochs trained with the coverage penalty.
    pub coverage_epochs: usize,
    pub coverage_weight: f64,
}

impl Default for AbstractorHyperParams {
    fn default() -> Self {
        AbstractorHyperParams {
            learning_rate: 0.005,
            batch_size: 16,
            epochs: 20,
            patience: 3,
            clip_norm: 5.0,
            min_count: 1,
            coverage_epochs: 0,
            coverage_weight: 1.0,
        }
    }
}

impl AbstractorHyperParams {
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let hp = AbstractorHyperParams {
            learning_rate: kv.get("abstractor.learning_rate", d.learning_rate)?,
            batch_size: kv.get("abstractor.batch_size", d.batch_size)?,
            epochs: kv.get("abstractor.epochs", d.epochs)?,
            patience: kv.get("abstractor.patience", d.patience)?,
            clip_norm: kv.get("abstractor.clip_norm", d.clip_norm)?,
            min_count: kv.get("abstractor.min_count", d.min_count)?,
            coverage_epochs: kv.get("abstractor.coverage_epochs", d.coverage_epochs)?,
            coverage_weight: kv.get("abstractor.coverage_weight", d.coverage_weight)?,
        };
        if !(hp.learning_rate > 0.0) {
            return Err(Error::Config { key: "abstractor.learning_rate".into(), message: "must be positive".into() });
        }
        if hp.batch_size == 0 {
            return Err(Error::Config { key: "abstractor.batch_size".into(), message: "must be positive".into() });
        }
        if !(hp.coverage_weight >= 0.0) {
            return Err(Error::Config { key: "abstractor.coverage_weight".into(), message: "must be nonnegative".into() });
        }
        Ok(hp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    /// Mean per-token negative log-likelihood over the epoch.
    pub loss: f64,
    /// Validation next-token accuracy, NaN without a validation set.
    pub val_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tloss\tval_acc\n");
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}", r.step, r.loss, r.val_acc);
        }
        out
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn new_model(config: &ModelConfig, scheme: &SectionScheme, pairs: &[TrainingPair], min_count: usize, rng: &mut impl Rng) -> Result<Seq2SeqModel> {
    config.validate()?;
    let vocab = build_vocab(pairs, scheme, min_count)?;
    let layout = Layout::new(config, vocab.len(), scheme.len());
    Ok(Seq2SeqModel {
        format: ABSTRACTOR_FORMAT.to_string(),
        tag: String::new(),
        config: config.clone(),
        sections: scheme.len(),
        vocab,
        bounds: LengthBounds::from_targets(pairs.iter().map(|p| p.target.len()))?,
        params: layout.init(rng),
    })
}

/// Teacher-forced training with Adam and early stopping on validation
/// next-token accuracy. When `coverage_epochs > 0` a second phase continues
/// from the best first-phase parameters with the coverage penalty added.
pub fn train_abstractor(
    config: &ModelConfig,
    scheme: &SectionScheme,
    train: &[TrainingPair],
    valid: &[TrainingPair],
    hp: &AbstractorHyperParams,
    seed: u64,
) -> Result<(Seq2SeqModel, TrainingLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = new_model(config, scheme, train, hp.min_count, &mut rng)?;
    let layout = model.layout();
    let examples = train.iter().map(|p| model.example(p)).collect::<Result<Vec<_>>>()?;
    let valid_examples = valid.iter().map(|p| model.example(p)).collect::<Result<Vec<_>>>()?;
    let mut adam = Adam { m: vec![0.0; layout.total], v: vec![0.0; layout.total], t: 0 };
    let mut grad = vec![0.0; layout.total];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = TrainingLog::default();
    let mut step = 0usize;

    for (epochs, cov_weight) in [(hp.epochs, 0.0), (hp.coverage_epochs, hp.coverage_weight)] {
        let mut best: Option<((f64, f64), Vec<f64>)> = None;
        let mut stale = 0;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            let (mut nll, mut tokens) = (0.0, 0usize);
            for chunk in order.chunks(hp.batch_size) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut batch_tokens = 0;
                for &i in chunk {
                    let s = layout.run_example(&model.params, &examples[i], cov_weight, Some(&mut grad));
                    nll += s.nll;
                    tokens += s.steps;
                    batch_tokens += s.steps;
                }
                step += 1;
                if !nll.is_finite() {
                    return Err(Error::Numeric(format!("abstractor loss is not finite at step {step}")));
                }
                let scale = 1.0 / batch_tokens.max(1) as f64;
                let mut norm = 0.0;
                for g in grad.iter_mut() {
                    *g *= scale;
                    norm += *g * *g;
                }
                let norm = norm.sqrt();
                if !norm.is_finite() {
                    return Err(Error::Numeric(format!("abstractor gradient is not finite at step {step}")));
                }
                if norm > hp.clip_norm {
                    let k = hp.clip_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
                adam.step(&mut model.params, &grad, hp.learning_rate);
            }
            let (val_acc, val_nll) = if valid_examples.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                let (mut c, mut n, mut nll) = (0, 0, 0.0);
                for ex in &valid_examples {
                    let s = layout.run_example(&model.params, ex, 0.0, None);
                    c += s.correct;
                    n += s.steps;
                    nll += s.nll;
                }
                (c as f64 / n.max(1) as f64, nll / n.max(1) as f64)
            };
            log.rows.push(LogRow { step, loss: nll / tokens.max(1) as f64, val_acc });
            if val_acc.is_nan() {
                continue;
            }
            // Accuracy decides; validation loss breaks ties.
            if best.as_ref().is_none_or(|(b, _)| (val_acc, -val_nll) > *b) {
                best = Some(((val_acc, -val_nll), model.params.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= hp.patience {
                    break;
                }
            }
        }
        if let Some((_, params)) = best {
            model.params = params;
        }
    }
    Ok((model, log))
}

/// Largest relative error between analytic and central-difference gradients
/// of the summed loss (likelihood plus coverage penalty) over a sample of
/// parameters drawn from every block. When both gradients are below 1e-5
/// the absolute difference is used instead, since rounding in the
/// difference quotient dominates at that scale.
pub fn gradient_check(config: &ModelConfig, scheme: &SectionScheme, pairs: &[TrainingPair], epsilon: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = new_model(config, scheme, pairs, 1, &mut rng)?;
    let layout = model.layout();
    let examples = pairs.iter().map(|p| model.example(p)).collect::<Result<Vec<_>>>()?;
    const COVERAGE: f64 = 0.5;
    let loss = |params: &[f64]| -> f64 {
        examples
            .iter()
            .map(|ex| {
                let s = layout.run_example(params, ex, COVERAGE, None);
                s.nll + COVERAGE * s.coverage
            })
            .sum()
    };
    let mut grad = vec![0.0; layout.total];
    for ex in &examples {
        layout.run_example(&model.params, ex, COVERAGE, Some(&mut grad));
    }
    let mut params = model.params.clone();
    let mut worst: f64 = 0.0;
    for (_, range) in layout.blocks() {
        if range.is_empty() {
            continue;
        }
        for _ in 0..12 {
            let i = rng.gen_range(range.clone());
            let orig = params[i];
            params[i] = orig + epsilon;
            let up = loss(&params);
            params[i] = orig - epsilon;
            let down = loss(&params);
            params[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let analytic = grad[i];
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale < 1e-5 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
