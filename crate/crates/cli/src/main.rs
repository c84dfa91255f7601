mod manifest;
mod settings;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use notegen::abstractor::{train_abstractor, Conditioning, Seq2SeqModel};
use notegen::asr_sim::{corrupt_corpus, Lexicon};
use notegen::cluster::{alignment_objective, calibrate_binary, calibrate_thresholds, tune_tau, CalibrationMode};
use notegen::corpus::{
    corpus_stats, generate_synthetic, ingest_ami, load_corpus, save_corpus, split_records, AnnotatedRecord, Note,
    SectionScheme, Split,
};
use notegen::extract::{
    evaluate_extractor, fit_feature_space, score_utterances, train_extractor, ExtractorMode, ExtractorModel, Thresholds,
};
use notegen::metrics::{method_table, score_notes, Granularity};
use notegen::pipeline::{
    generate_notes, load_generated, training_pairs, write_generated, Abstractor, Method, PipelineConfig, Resources,
};
use notegen::{Error, ErrorCategory};

use manifest::{atomic_write, sibling, Recorder};
use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "notegen", version, about = "Section-structured note generation from conversations")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Primary output path; side files are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Section scheme name (synthetic, ami, soap15) or scheme file.
    #[arg(long, global = true)]
    scheme: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Convert a three-file meeting export into the canonical corpus format.
    IngestAmi {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        links: PathBuf,
        #[arg(long, default_value = "train")]
        split: Split,
    },
    /// Print corpus statistics.
    Stats { corpus: PathBuf },
    TrainExtractor {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        mode: Option<ExtractorMode>,
        #[arg(long)]
        window: Option<usize>,
    },
    TrainAbstractor {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        conditioning: Option<Conditioning>,
        #[arg(long)]
        no_copy: bool,
    },
    /// Tune per-section extractor thresholds.
    Calibrate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        extractor: PathBuf,
        #[arg(long, default_value = "validation")]
        split: Split,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        mode: Option<CalibrationMode>,
    },
    /// Pick the clustering distance by cluster alignment on held-out records.
    TuneTau {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        extractor: PathBuf,
        #[arg(long, default_value = "validation")]
        split: Split,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<usize>>,
        #[arg(long)]
        mode: Option<CalibrationMode>,
    },
    Generate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long)]
        extractor: Option<PathBuf>,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, conflicts_with = "fusion")]
        abstractor: Option<PathBuf>,
        /// Use the deterministic fusion baseline instead of a trained abstractor.
        #[arg(long)]
        fusion: bool,
        #[arg(long)]
        oracle_utterances: bool,
        #[arg(long)]
        oracle_clusters: bool,
        #[arg(long)]
        tau: Option<usize>,
        #[arg(long)]
        beam: Option<usize>,
    },
    /// ROUGE of generated notes against gold notes.
    Score {
        #[arg(long)]
        generated: Vec<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value = "whole-note")]
        granularity: Granularity,
    },
    /// Replace sampled words with phonetic neighbours.
    Corrupt {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        rate: Option<f64>,
        /// Word list, one per line; defaults to the corpus training split.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::IngestAmi { .. } => "ingest-ami",
            Command::Stats { .. } => "stats",
            Command::TrainExtractor { .. } => "train-extractor",
            Command::TrainAbstractor { .. } => "train-abstractor",
            Command::Calibrate { .. } => "calibrate",
            Command::TuneTau { .. } => "tune-tau",
            Command::Generate { .. } => "generate",
            Command::Score { .. } => "score",
            Command::Corrupt { .. } => "corrupt",
        }
    }
}

/// An error tagged with the module it came from.
#[derive(Debug)]
struct Failure {
    module: &'static str,
    error: Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.error)
    }
}

trait Context<T> {
    fn ctx(self, module: &'static str) -> Result<T, Failure>;
}

impl<T> Context<T> for notegen::Result<T> {
    fn ctx(self, module: &'static str) -> Result<T, Failure> {
        self.map_err(|error| Failure { module, error })
    }
}

type Outcome = Result<(), Failure>;

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Parse => 2,
        ErrorCategory::Validation => 3,
        ErrorCategory::Runtime => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("notegen {}: {f}", cli.command.name());
            ExitCode::from(exit_code(&f.error))
        }
    }
}

fn require_out(cli: &Cli) -> Result<&Path, Failure> {
    cli.out
        .as_deref()
        .ok_or_else(|| Failure { module: "cli", error: Error::validation("--out is required") })
}

fn load_records(path: &Path, scheme: &SectionScheme, rec: &mut Recorder) -> Result<Vec<AnnotatedRecord>, Failure> {
    rec.input(path).ctx("cli")?;
    load_corpus(path, scheme).ctx("corpus")
}

fn nonempty(records: Vec<AnnotatedRecord>, split: Split) -> Result<Vec<AnnotatedRecord>, Failure> {
    if records.is_empty() {
        return Err(Failure { module: "corpus", error: Error::validation(format!("{split} split is empty")) });
    }
    Ok(records)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    atomic_write(path, text.as_bytes()).ctx("cli")
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn run(cli: &Cli) -> Outcome {
    let settings = Settings::load(cli.config.as_deref()).ctx("config")?;
    let mut rec = Recorder::new(cli.command.name(), cli.seed);
    if let Some(c) = &cli.config {
        rec.input(c).ctx("cli")?;
    }
    let kv = &settings.kv;
    match &cli.command {
        Command::Synth { n } => {
            let out = require_out(cli)?;
            let mut cfg = settings.synth.clone();
            if let Some(n) = n {
                cfg.n_records = *n;
            }
            cfg.validate().ctx("corpus")?;
            let records = generate_synthetic(&cfg, cli.seed).ctx("corpus")?;
            rec.finish(kv, out, &[out]).ctx("cli")?;
            save_corpus(&records, out).ctx("corpus")
        }
        Command::IngestAmi { transcript, summary, links, split } => {
            let out = require_out(cli)?;
            let scheme = SectionScheme::resolve(cli.scheme.as_deref().unwrap_or("ami")).ctx("corpus")?;
            for p in [transcript, summary, links] {
                rec.input(p).ctx("cli")?;
            }
            let records = ingest_ami(transcript, summary, links, &scheme, *split).ctx("corpus")?;
            rec.finish(kv, out, &[out]).ctx("cli")?;
            save_corpus(&records, out).ctx("corpus")
        }
        Command::Stats { corpus } => {
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let report = corpus_stats(&records, &scheme).ctx("corpus")?;
            let tsv = report.to_tsv();
            print!("{tsv}");
            if let Some(out) = &cli.out {
                let json = sibling(out, ".json");
                rec.finish(kv, out, &[out, &json]).ctx("cli")?;
                write_text(out, &tsv)?;
                write_text(&json, &to_json(&report))?;
            }
            Ok(())
        }
        Command::TrainExtractor { corpus, mode, window } => {
            let out = require_out(cli)?;
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let train = nonempty(split_records(&records, Split::Train), Split::Train)?;
            let valid = nonempty(split_records(&records, Split::Validation), Split::Validation)?;
            let mode = mode.unwrap_or(settings.extractor_mode);
            let window = window.unwrap_or(settings.window);
            let space = fit_feature_space(&train, window).ctx("extract")?;
            let (model, _) = train_extractor(&train, &space, &scheme, mode, &settings.extractor, cli.seed).ctx("extract")?;
            let report = evaluate_extractor(&model, &valid, &scheme);
            let (summary, labels, json) = (sibling(out, ".report.tsv"), sibling(out, ".labels.tsv"), sibling(out, ".report.json"));
            rec.finish(kv, out, &[out, &summary, &labels, &json]).ctx("cli")?;
            model.save(out).ctx("extract")?;
            write_text(&summary, &report.summary_tsv())?;
            write_text(&labels, &report.per_label_tsv())?;
            write_text(&json, &to_json(&report))?;
            print!("{}", report.summary_tsv());
            Ok(())
        }
        Command::TrainAbstractor { corpus, method, conditioning, no_copy } => {
            let out = require_out(cli)?;
            if !method.needs_abstractor() {
                return Err(Failure {
                    module: "pipeline",
                    error: Error::validation(format!("{method} does not use an abstractor")),
                });
            }
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let train = nonempty(split_records(&records, Split::Train), Split::Train)?;
            let valid = nonempty(split_records(&records, Split::Validation), Split::Validation)?;
            let mut cfg = settings.model.clone();
            cfg.conditioning = match (conditioning, method) {
                (Some(c), _) => *c,
                (None, Method::Ext2SecNoCond) => Conditioning::None,
                (None, _) => cfg.conditioning,
            };
            if *no_copy {
                cfg.copy = false;
            }
            check_conditioning(*method, cfg.conditioning).ctx("pipeline")?;
            let cap = settings.utterance_cap;
            let tp = training_pairs(*method, &train, &scheme, cap).ctx("pipeline")?;
            let vp = training_pairs(*method, &valid, &scheme, cap).ctx("pipeline")?;
            let (mut model, log) = train_abstractor(&cfg, &scheme, &tp, &vp, &settings.abstractor, cli.seed).ctx("abstractor")?;
            model.tag = method.name().to_string();
            let log_path = sibling(out, ".log.tsv");
            rec.finish(kv, out, &[out, &log_path]).ctx("cli")?;
            model.save(out).ctx("abstractor")?;
            write_text(&log_path, &log.to_tsv())
        }
        Command::Calibrate { corpus, extractor, split, tau, mode } => {
            let out = require_out(cli)?;
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let held = nonempty(split_records(&records, *split), *split)?;
            rec.input(extractor).ctx("cli")?;
            let model = ExtractorModel::load(extractor).ctx("extract")?;
            let scores: Vec<_> = held.iter().map(|r| score_utterances(&model, &r.conversation)).collect();
            let cal = match model.mode {
                ExtractorMode::Binary => calibrate_binary(&scores, &held, &scheme),
                ExtractorMode::Multilabel => calibrate_thresholds(
                    &scores,
                    &held,
                    &scheme,
                    tau.unwrap_or(settings.tau),
                    mode.unwrap_or(settings.calibrate_mode),
                ),
            }
            .ctx("cluster")?;
            let tsv = sibling(out, ".tsv");
            rec.finish(kv, out, &[out, &tsv]).ctx("cli")?;
            write_text(out, &to_json(&cal.thresholds))?;
            write_text(&tsv, &cal.to_tsv())?;
            print!("{}", cal.to_tsv());
            Ok(())
        }
        Command::TuneTau { corpus, extractor, split, taus, mode } => {
            let out = require_out(cli)?;
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let held = nonempty(split_records(&records, *split), *split)?;
            rec.input(extractor).ctx("cli")?;
            let model = ExtractorModel::load(extractor).ctx("extract")?;
            if model.mode != ExtractorMode::Multilabel {
                return Err(Failure {
                    module: "cluster",
                    error: Error::validation("tau tuning needs a multilabel extractor"),
                });
            }
            let scores: Vec<_> = held.iter().map(|r| score_utterances(&model, &r.conversation)).collect();
            let mode = mode.unwrap_or(settings.calibrate_mode);
            let candidates = taus.clone().unwrap_or_else(|| settings.taus.clone());
            let sel = tune_tau(&candidates, |t| alignment_objective(&scores, &held, &scheme, t, mode)).ctx("cluster")?;
            let json = sibling(out, ".json");
            rec.finish(kv, out, &[out, &json]).ctx("cli")?;
            write_text(out, &sel.to_tsv())?;
            write_text(&json, &to_json(&sel))?;
            print!("{}", sel.to_tsv());
            Ok(())
        }
        Command::Generate {
            corpus,
            method,
            split,
            extractor,
            thresholds,
            abstractor,
            fusion,
            oracle_utterances,
            oracle_clusters,
            tau,
            beam,
        } => {
            let out = require_out(cli)?;
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let target = nonempty(split_records(&records, *split), *split)?;
            let train = split_records(&records, Split::Train);
            let cfg = PipelineConfig {
                method: *method,
                oracle_utterances: *oracle_utterances,
                oracle_clusters: *oracle_clusters,
                tau: tau.unwrap_or(settings.tau),
                beam_size: beam.unwrap_or(settings.beam_size),
                seed: cli.seed,
                utterance_cap: settings.utterance_cap,
            };
            cfg.validate().ctx("pipeline")?;
            let ext = match extractor {
                Some(p) => {
                    rec.input(p).ctx("cli")?;
                    Some(ExtractorModel::load(p).ctx("extract")?)
                }
                None => None,
            };
            let thr: Option<Thresholds> = match thresholds {
                Some(p) => {
                    rec.input(p).ctx("cli")?;
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e)).ctx("cli")?;
                    Some(serde_json::from_str(&text).map_err(|e| Error::Parse {
                        path: p.display().to_string(),
                        line: e.line(),
                        message: e.to_string(),
                    })
                    .ctx("extract")?)
                }
                None => None,
            };
            let model = match abstractor {
                Some(p) => {
                    rec.input(p).ctx("cli")?;
                    let m = Seq2SeqModel::load(p).ctx("abstractor")?;
                    check_checkpoint(*method, &m).ctx("pipeline")?;
                    Some(m)
                }
                None => None,
            };
            let abs = match (&model, fusion) {
                (Some(m), _) => Some(Abstractor::Neural(m)),
                (None, true) => Some(Abstractor::Fusion),
                (None, false) => None,
            };
            let res = Resources { extractor: ext.as_ref(), thresholds: thr.as_ref(), abstractor: abs, train: &train };
            let notes = generate_notes(&cfg, &res, &scheme, &target, cli.jobs).ctx("pipeline")?;
            let mut buf = Vec::new();
            write_generated(&notes, &mut buf).map_err(|e| Error::io(out, e)).ctx("pipeline")?;
            rec.finish(kv, out, &[out]).ctx("cli")?;
            atomic_write(out, &buf).ctx("cli")
        }
        Command::Score { generated, gold, split, granularity } => {
            if generated.is_empty() {
                return Err(Failure { module: "cli", error: Error::validation("at least one --generated file is required") });
            }
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(gold, &scheme, &mut rec)?;
            let gold = nonempty(split_records(&records, *split), *split)?;
            let mut rows = Vec::new();
            for path in generated {
                rec.input(path).ctx("cli")?;
                let notes = load_generated(path).ctx("pipeline")?;
                let name = notes.first().map_or_else(|| path.display().to_string(), |n| n.method.to_string());
                let built: Vec<Note> = notes.iter().map(|n| n.to_note()).collect();
                let report = score_notes(notes.iter().map(|n| n.id.as_str()).zip(built.iter()), &gold, &scheme, None)
                    .map_err(|e| match e {
                        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
                        other => other,
                    })
                    .ctx("metrics")?;
                rows.push((name, report));
            }
            let table = match granularity {
                Granularity::WholeNote => method_table(rows.iter().map(|(n, r)| (n.as_str(), r))),
                Granularity::PerSection => rows
                    .iter()
                    .map(|(n, r)| {
                        if rows.len() == 1 {
                            r.section_tsv()
                        } else {
                            format!("# {n}\n{}", r.section_tsv())
                        }
                    })
                    .collect(),
            };
            print!("{table}");
            if let Some(out) = &cli.out {
                let json = sibling(out, ".json");
                rec.finish(kv, out, &[out, &json]).ctx("cli")?;
                write_text(out, &table)?;
                let all: std::collections::BTreeMap<&str, _> = rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
                write_text(&json, &to_json(&all))?;
            }
            Ok(())
        }
        Command::Corrupt { corpus, rate, lexicon } => {
            let out = require_out(cli)?;
            let scheme = settings.scheme(cli.scheme.as_deref()).ctx("corpus")?;
            let records = load_records(corpus, &scheme, &mut rec)?;
            let lex = match lexicon {
                Some(p) => {
                    rec.input(p).ctx("cli")?;
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e)).ctx("cli")?;
                    Lexicon::new(text.lines().map(str::trim).filter(|l| !l.is_empty()))
                }
                None => Lexicon::from_records(&split_records(&records, Split::Train)),
            };
            let rate = rate.unwrap_or(settings.corrupt_rate);
            let (corrupted, report) = corrupt_corpus(&records, rate, &lex, cli.seed).ctx("asr_sim")?;
            let report_path = sibling(out, ".report.tsv");
            rec.finish(kv, out, &[out, &report_path]).ctx("cli")?;
            save_corpus(&corrupted, out).ctx("corpus")?;
            write_text(&report_path, &report.to_tsv())?;
            print!("{}", report.to_tsv());
            Ok(())
        }
    }
}

fn check_conditioning(method: Method, conditioning: Conditioning) -> notegen::Result<()> {
    let sectional = matches!(method, Method::Ext2Sec | Method::Cluster2Sent | Method::AllExt2Sec);
    if method == Method::Ext2SecNoCond && conditioning != Conditioning::None {
        return Err(Error::validation("ext2secnocond requires conditioning `none`"));
    }
    if sectional && conditioning == Conditioning::None {
        return Err(Error::validation(format!("{method} requires section conditioning")));
    }
    Ok(())
}

fn check_checkpoint(method: Method, model: &Seq2SeqModel) -> notegen::Result<()> {
    if !model.tag.is_empty() && model.tag != method.name() {
        return Err(Error::validation(format!(
            "abstractor checkpoint was trained for {}, not {method}",
            model.tag
        )));
    }
    check_conditioning(method, model.config.conditioning)
}
