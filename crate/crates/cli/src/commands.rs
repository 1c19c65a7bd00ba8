use std::fs::File;
use std::io::{BufWriter, Read as _, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use athena_core::charrnn::{train_rnn_with_report, TrainConfig};
use athena_core::ecsim::{self, Corrector, KSpectrumCorrector, ToolAdapter, MAX_K};
use athena_core::injector::{self, InjectionKind, InjectionSpec, Regime};
use athena_core::metrics::{self, SweepInputs};
use athena_core::ngram::{self, NgramModel};
use athena_core::segmenter::{segment_corpus, validate_config_word_len};
use athena_core::seqio::{sample_reads, write_fastq_path};
use athena_core::tuner::{self, LmSpec, SearchSpace};
use athena_core::{LanguageModel, ReadSet, RnnLm32, RnnLm64};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{file_section, persist, resolve};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn required<'a, T>(value: &'a Option<T>, name: &str) -> anyhow::Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| usage(format!("missing required setting --{name}")))
}

fn load_reads(path: &Path) -> anyhow::Result<ReadSet> {
    ReadSet::from_path(path).with_context(|| format!("reading {}", path.display()))
}

/// `<out>.config.toml` beside an output file.
fn sidecar(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{name}.config.toml"))
}

fn print_json<T: Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmKind {
    Ngram,
    Charrnn,
}

#[derive(Args, Debug, Serialize)]
pub struct RnnArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    unroll_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Seed for weight initialization, data split and shuffling.
    #[arg(long)]
    #[serde(rename = "seed")]
    rnn_seed: Option<u64>,
}

fn rnn_defaults() -> TrainConfig {
    TrainConfig {
        parallel: true,
        ..TrainConfig::default()
    }
}

#[derive(Args, Debug, Serialize)]
pub struct CorrectorArgs {
    /// Solid k-mer threshold of the built-in corrector.
    #[arg(long)]
    solid: Option<u32>,
    /// Edit budget per read of the built-in corrector.
    #[arg(long)]
    max_edits: Option<usize>,
    /// External tool command template with {input}, {output} and the tuned
    /// placeholder; replaces the built-in corrector.
    #[arg(long)]
    adapter: Option<String>,
    /// Name of the tuned placeholder in the adapter template.
    #[arg(long)]
    param_name: Option<String>,
    /// Adapter timeout in seconds.
    #[arg(long = "adapter-timeout")]
    timeout_secs: Option<u64>,
    /// Where adapter logs go.
    #[arg(long)]
    workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectorSettings {
    solid: u32,
    max_edits: usize,
    adapter: Option<String>,
    param_name: String,
    timeout_secs: u64,
    workdir: Option<PathBuf>,
}

impl Default for CorrectorSettings {
    fn default() -> Self {
        CorrectorSettings {
            solid: ecsim::DEFAULT_SOLID,
            max_edits: ecsim::DEFAULT_MAX_EDITS,
            adapter: None,
            param_name: "k".into(),
            timeout_secs: 3600,
            workdir: None,
        }
    }
}

impl CorrectorSettings {
    fn build(&self, reference: Option<ReadSet>, default_workdir: &Path) -> anyhow::Result<Box<dyn Corrector>> {
        Ok(match &self.adapter {
            Some(template) => {
                let adapter = ToolAdapter {
                    command_template: template.clone(),
                    workdir: self.workdir.clone().unwrap_or_else(|| default_workdir.to_path_buf()),
                    timeout_secs: self.timeout_secs,
                    param_name: self.param_name.clone(),
                };
                adapter.validate()?;
                Box::new(adapter)
            }
            None => {
                let mut c = KSpectrumCorrector::new(self.solid, self.max_edits);
                if let Some(r) = reference {
                    c = c.with_reference(r);
                }
                Box::new(c)
            }
        })
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    genome_len: Option<usize>,
    /// Number of reads.
    #[arg(long = "n-reads")]
    n_reads: Option<usize>,
    #[arg(long)]
    read_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output FASTQ (".gz" compresses).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional FASTA with the genome.
    #[arg(long)]
    genome_out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SimulateSettings {
    genome_len: usize,
    n_reads: usize,
    read_len: usize,
    seed: u64,
    out: Option<PathBuf>,
    genome_out: Option<PathBuf>,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            genome_len: 50_000,
            n_reads: 20_000,
            read_len: 50,
            seed: 0,
            out: None,
            genome_out: None,
        }
    }
}

pub fn simulate(args: &SimulateArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: SimulateSettings = resolve(&SimulateSettings::default(), file_section(file, "simulate")?, args)?;
    let out = required(&s.out, "out")?;
    let genome = injector::generate_genome(s.genome_len, s.seed)?;
    let reads = injector::sample_clean_reads(&genome, s.n_reads, s.read_len, s.seed)?;
    write_fastq_path(&reads, out)?;
    if let Some(g) = &s.genome_out {
        let set = ReadSet::new(vec![genome.clone()], "genome");
        athena_core::seqio::write_fasta(&set, BufWriter::new(File::create(g)?), 80)?;
    }
    persist(&s, "simulate", &sidecar(out))?;
    print_json(&serde_json::json!({
        "reads": reads.len(),
        "read_len": s.read_len,
        "genome_len": s.genome_len,
        "coverage": reads.total_bases() as f64 / s.genome_len as f64,
    }))
}

// ------------------------------------------------------------------- train

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    reads: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    lm: Option<LmKind>,
    /// Word length of the n-gram model.
    #[arg(long)]
    word_len: Option<usize>,
    /// History length of the n-gram model.
    #[arg(long)]
    history: Option<usize>,
    #[command(flatten)]
    rnn: RnnArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct TrainSettings {
    reads: Option<PathBuf>,
    out: Option<PathBuf>,
    lm: LmKind,
    word_len: usize,
    history: usize,
    rnn: TrainConfig,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            reads: None,
            out: None,
            lm: LmKind::Ngram,
            word_len: athena_core::segmenter::DEFAULT_WORD_LEN,
            history: ngram::DEFAULT_HISTORY,
            rnn: rnn_defaults(),
        }
    }
}

pub fn train(args: &TrainArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: TrainSettings = resolve(&TrainSettings::default(), file_section(file, "train")?, args)?;
    let reads = load_reads(required(&s.reads, "reads")?)?;
    let out = required(&s.out, "out")?;
    let stats = match s.lm {
        LmKind::Ngram => {
            validate_config_word_len(s.word_len)?;
            let model = ngram::train_on_reads(&reads, s.word_len, s.history)?;
            let mut segs = segment_corpus(&reads, s.word_len)?;
            let skipped: usize = segs.by_ref().map(|w| w.skipped()).sum();
            model.save(BufWriter::new(File::create(out)?))?;
            serde_json::json!({
                "lm": "ngram",
                "reads": reads.len(),
                "words": model.total_words(),
                "skipped_words": skipped,
                "short_reads": segs.short_reads(),
                "vocab": model.vocab_size(),
                "table_sizes": model.counts().table_sizes(),
            })
        }
        LmKind::Charrnn => {
            let (model, report) = train_rnn_with_report::<f64>(&reads, &s.rnn)?;
            model.save(BufWriter::new(File::create(out)?))?;
            serde_json::json!({
                "lm": "charrnn",
                "reads": reads.len(),
                "characters": reads.total_bases(),
                "vocab": 4,
                "params": model.params().len(),
                "report": report,
            })
        }
    };
    persist(&s, "train", &sidecar(out))?;
    print_json(&stats)
}

// -------------------------------------------------------------- perplexity

#[derive(Args, Debug, Serialize)]
pub struct PerplexityArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    reads: Option<PathBuf>,
    /// Score a uniform sample of this many reads (default: all).
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Expected word length; a model trained with another one is an error.
    #[arg(long)]
    word_len: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct PerplexitySettings {
    model: Option<PathBuf>,
    reads: Option<PathBuf>,
    sample_n: Option<usize>,
    seed: u64,
    word_len: Option<usize>,
}

/// Loads either model format, dispatching on the magic bytes.
pub fn load_model(path: &Path) -> anyhow::Result<Box<dyn LanguageModel>> {
    let mut bytes = Vec::new();
    File::open(path)
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => anyhow::Error::new(athena_core::Error::NotFound(path.to_path_buf())),
            _ => e.into(),
        })?
        .read_to_end(&mut bytes)?;
    let ctx = || format!("loading model {}", path.display());
    match bytes.get(..4) {
        Some(b"ATHN") => Ok(Box::new(NgramModel::load(&bytes[..]).with_context(ctx)?)),
        Some(b"ATHR") if bytes.get(6) == Some(&4) => Ok(Box::new(RnnLm32::load(&bytes[..]).with_context(ctx)?)),
        Some(b"ATHR") => Ok(Box::new(RnnLm64::load(&bytes[..]).with_context(ctx)?)),
        _ => Err(athena_core::Error::ModelFormat(format!(
            "{} is not a model file",
            path.display()
        )))
        .with_context(ctx),
    }
}

fn ngram_word_len(path: &Path) -> anyhow::Result<Option<usize>> {
    let mut head = [0u8; 7];
    let mut f = File::open(path)?;
    if f.read_exact(&mut head).is_err() || &head[..4] != b"ATHN" {
        return Ok(None);
    }
    Ok(Some(head[6] as usize))
}

pub fn perplexity(args: &PerplexityArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: PerplexitySettings = resolve(&PerplexitySettings::default(), file_section(file, "perplexity")?, args)?;
    let model_path = required(&s.model, "model")?;
    let model = load_model(model_path)?;
    let reads = load_reads(required(&s.reads, "reads")?)?;
    if let (Some(want), Some(have)) = (s.word_len, ngram_word_len(model_path)?) {
        if want != have {
            anyhow::bail!(athena_core::Error::Argument(format!(
                "model word length {have} does not match requested word length {want}"
            )));
        }
    }
    let reads = match s.sample_n {
        Some(n) => sample_reads(&reads, n, s.seed),
        None => reads,
    };
    let report = model.score(&reads)?;
    log::info!(
        "{} perplexity {:.6} over {} tokens",
        model.kind(),
        report.avg_perplexity,
        report.scored
    );
    print_json(&report)
}

// ------------------------------------------------------------------ inject

#[derive(Args, Debug, Serialize)]
pub struct InjectArgs {
    #[arg(long)]
    reads: Option<PathBuf>,
    /// deletion, insertion, substitution or mixture.
    #[arg(long)]
    kind: Option<String>,
    /// low (1-5 errors per read) or high (6-10).
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// TSV ledger of every change.
    #[arg(long)]
    ledger: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct InjectSettings {
    reads: Option<PathBuf>,
    kind: String,
    regime: String,
    seed: u64,
    out: Option<PathBuf>,
    ledger: Option<PathBuf>,
}

impl Default for InjectSettings {
    fn default() -> Self {
        InjectSettings {
            reads: None,
            kind: "substitution".into(),
            regime: "low".into(),
            seed: 0,
            out: None,
            ledger: None,
        }
    }
}

pub fn inject(args: &InjectArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: InjectSettings = resolve(&InjectSettings::default(), file_section(file, "inject")?, args)?;
    let kind: InjectionKind = s.kind.parse().map_err(|e| usage(format!("{e}")))?;
    let regime: Regime = s.regime.parse().map_err(|e| usage(format!("{e}")))?;
    let reads = load_reads(required(&s.reads, "reads")?)?;
    let out = required(&s.out, "out")?;
    let ledger_path = required(&s.ledger, "ledger")?;
    let (corrupt, ledger) = injector::inject_readset(
        &reads,
        &InjectionSpec {
            kind,
            regime,
            seed: s.seed,
        },
    );
    write_fastq_path(&corrupt, out)?;
    ledger.write_tsv(BufWriter::new(File::create(ledger_path)?))?;
    persist(&s, "inject", &sidecar(out))?;
    let per_kind: std::collections::BTreeMap<&str, usize> = injector::ErrorKind::ALL
        .iter()
        .map(|k| (k.as_str(), ledger.kinds.iter().filter(|x| *x == k).count()))
        .collect();
    print_json(&serde_json::json!({
        "reads": corrupt.len(),
        "changes": ledger.entries.len(),
        "drawn_errors": ledger.drawn_counts.iter().sum::<usize>(),
        "reads_per_kind": per_kind,
    }))
}

// ----------------------------------------------------------------- correct

#[derive(Args, Debug, Serialize)]
pub struct CorrectArgs {
    #[arg(long)]
    reads: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parameter value (k for the built-in corrector).
    #[arg(long, visible_alias = "k")]
    value: Option<i64>,
    /// Count k-mers on this read set instead of the input.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    corrector: CorrectorArgs,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct CorrectSettings {
    reads: Option<PathBuf>,
    out: Option<PathBuf>,
    value: Option<i64>,
    reference: Option<PathBuf>,
    corrector: CorrectorSettings,
}

pub fn correct(args: &CorrectArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: CorrectSettings = resolve(&CorrectSettings::default(), file_section(file, "correct")?, args)?;
    let reads = load_reads(required(&s.reads, "reads")?)?;
    let out = required(&s.out, "out")?;
    let value = *required(&s.value, "value")?;
    let reference = s.reference.as_deref().map(load_reads).transpose()?;
    let corrector = s.corrector.build(reference, &parent_dir(out))?;
    let fixed = corrector.correct(&reads, value)?;
    write_fastq_path(&fixed, out)?;
    persist(&s, "correct", &sidecar(out))?;
    let changed = reads
        .iter()
        .zip(fixed.iter())
        .filter(|(a, b)| a.seq() != b.seq())
        .count();
    print_json(&serde_json::json!({ "reads": fixed.len(), "changed_reads": changed, "value": value }))
}

// -------------------------------------------------------------------- tune

#[derive(Args, Debug, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    reads: Option<PathBuf>,
    /// Directory for corrected.fastq, search.json and config.toml.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    lm: Option<LmKind>,
    #[arg(long)]
    word_len: Option<usize>,
    #[arg(long)]
    history: Option<usize>,
    /// Lower end of the search range (default 1).
    #[arg(long)]
    lower: Option<i64>,
    /// Upper end of the search range (default: the read length, capped at
    /// the built-in corrector's largest k).
    #[arg(long)]
    upper: Option<i64>,
    /// Neighbor distance.
    #[arg(long)]
    step: Option<i64>,
    /// Start values, one climb each (default: the range midpoint).
    #[arg(long = "initial", value_delimiter = ',')]
    initials: Option<Vec<i64>>,
    #[arg(long)]
    iter_max: Option<usize>,
    /// Reads corrected per evaluation.
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also save the trained model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[command(flatten)]
    rnn: RnnArgs,
    #[command(flatten)]
    corrector: CorrectorArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct TuneSettings {
    reads: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    lm: LmKind,
    word_len: usize,
    history: usize,
    lower: Option<i64>,
    upper: Option<i64>,
    step: i64,
    initials: Vec<i64>,
    iter_max: usize,
    sample_n: usize,
    seed: u64,
    model_out: Option<PathBuf>,
    rnn: TrainConfig,
    corrector: CorrectorSettings,
}

impl Default for TuneSettings {
    fn default() -> Self {
        TuneSettings {
            reads: None,
            out_dir: None,
            lm: LmKind::Ngram,
            word_len: athena_core::segmenter::DEFAULT_WORD_LEN,
            history: ngram::DEFAULT_HISTORY,
            lower: None,
            upper: None,
            step: tuner::DEFAULT_STEP,
            initials: Vec::new(),
            iter_max: tuner::DEFAULT_ITER_MAX,
            sample_n: 10_000,
            seed: 0,
            model_out: None,
            rnn: rnn_defaults(),
            corrector: CorrectorSettings::default(),
        }
    }
}

fn train_lm(
    lm: LmKind,
    word_len: usize,
    history: usize,
    rnn: &TrainConfig,
    reads: &ReadSet,
    save: Option<&Path>,
) -> anyhow::Result<Box<dyn LanguageModel>> {
    Ok(match lm {
        LmKind::Ngram => {
            validate_config_word_len(word_len)?;
            let m = ngram::train_on_reads(reads, word_len, history)?;
            if let Some(p) = save {
                m.save(BufWriter::new(File::create(p)?))?;
            }
            Box::new(m)
        }
        LmKind::Charrnn => {
            let spec = LmSpec::Charrnn(rnn.clone());
            if save.is_none() {
                return Ok(spec.train(reads)?);
            }
            let m: RnnLm64 = athena_core::charrnn::train_rnn(reads, rnn)?;
            if let Some(p) = save {
                m.save(BufWriter::new(File::create(p)?))?;
            }
            Box::new(m)
        }
    })
}

pub fn tune(args: &TuneArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let mut s: TuneSettings = resolve(&TuneSettings::default(), file_section(file, "tune")?, args)?;
    let dataset = load_reads(required(&s.reads, "reads")?)?;
    let out_dir = required(&s.out_dir, "out-dir")?.clone();
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    if dataset.is_empty() {
        return Err(athena_core::Error::Argument("dataset is empty".into()).into());
    }

    let min_len = dataset.iter().map(|r| r.len()).min().unwrap_or(0) as i64;
    let upper_default = if s.corrector.adapter.is_some() {
        min_len
    } else {
        min_len.min(MAX_K as i64)
    };
    let lower = *s.lower.get_or_insert(1);
    let upper = *s.upper.get_or_insert(upper_default);
    let mut space = SearchSpace::new(lower, upper, s.step)?.with_iter_max(s.iter_max);
    if !s.initials.is_empty() {
        space = space.with_initials(s.initials.clone())?;
    }
    s.initials = space.initials.clone();
    persist(&s, "tune", &out_dir.join("config.toml"))?;

    log::info!("training {:?} model on {} reads", s.lm, dataset.len());
    let lm = train_lm(s.lm, s.word_len, s.history, &s.rnn, &dataset, s.model_out.as_deref())?;
    let corrector = s.corrector.build(Some(dataset.clone()), &out_dir)?;
    let outcome = tuner::tune_with_model(&dataset, lm.as_ref(), corrector.as_ref(), &space, s.sample_n, s.seed)?;

    write_fastq_path(&outcome.corrected, &out_dir.join("corrected.fastq"))?;
    let mut json = BufWriter::new(File::create(out_dir.join("search.json"))?);
    serde_json::to_writer_pretty(&mut json, &outcome.report)?;
    writeln!(json)?;
    json.flush()?;

    let r = &outcome.report;
    eprintln!(
        "best {} = {} (perplexity {:.6}) after {} corrections of {} sampled reads",
        s.corrector.param_name, r.best_value, r.best_perplexity, r.corrections, r.sample_size
    );
    println!("{}", r.best_value);
    Ok(())
}

// ------------------------------------------------------------------- sweep

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    reads: Option<PathBuf>,
    /// Ground-truth reads; adds the gain column.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Trained n-gram model (default: train one on --reads).
    #[arg(long)]
    ngram_model: Option<PathBuf>,
    /// Trained RNN model.
    #[arg(long)]
    rnn_model: Option<PathBuf>,
    #[arg(long)]
    word_len: Option<usize>,
    #[arg(long)]
    history: Option<usize>,
    /// Values to evaluate, e.g. 9,11,13.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<i64>>,
    /// Range form of --values.
    #[arg(long)]
    lower: Option<i64>,
    #[arg(long)]
    upper: Option<i64>,
    #[arg(long)]
    step: Option<i64>,
    /// Also write the TSV here.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Write the full report as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    corrector: CorrectorArgs,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SweepSettings {
    reads: Option<PathBuf>,
    truth: Option<PathBuf>,
    ngram_model: Option<PathBuf>,
    rnn_model: Option<PathBuf>,
    word_len: usize,
    history: usize,
    values: Vec<i64>,
    lower: Option<i64>,
    upper: Option<i64>,
    step: i64,
    tsv: Option<PathBuf>,
    json: Option<PathBuf>,
    corrector: CorrectorSettings,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            reads: None,
            truth: None,
            ngram_model: None,
            rnn_model: None,
            word_len: athena_core::segmenter::DEFAULT_WORD_LEN,
            history: ngram::DEFAULT_HISTORY,
            values: Vec::new(),
            lower: None,
            upper: None,
            step: tuner::DEFAULT_STEP,
            tsv: None,
            json: None,
            corrector: CorrectorSettings::default(),
        }
    }
}

pub fn sweep(args: &SweepArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let mut s: SweepSettings = resolve(&SweepSettings::default(), file_section(file, "sweep")?, args)?;
    if s.values.is_empty() {
        match (s.lower, s.upper) {
            (Some(lo), Some(hi)) if s.step >= 1 && lo <= hi => s.values = (lo..=hi).step_by(s.step as usize).collect(),
            _ => return Err(usage("give --values or a valid --lower/--upper/--step range")),
        }
    }
    let dataset = load_reads(required(&s.reads, "reads")?)?;
    let truth = s.truth.as_deref().map(load_reads).transpose()?;
    let mut ngram_lm = s.ngram_model.as_deref().map(load_model).transpose()?;
    let rnn_lm = s.rnn_model.as_deref().map(load_model).transpose()?;
    if ngram_lm.is_none() && rnn_lm.is_none() {
        validate_config_word_len(s.word_len)?;
        ngram_lm = Some(Box::new(ngram::train_on_reads(&dataset, s.word_len, s.history)?));
    }
    let workdir = s
        .tsv
        .as_deref()
        .or(s.json.as_deref())
        .map(parent_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    let corrector = s.corrector.build(None, &workdir)?;
    let inputs = SweepInputs {
        ngram: ngram_lm.as_deref(),
        rnn: rnn_lm.as_deref(),
        truth: truth.as_ref(),
        quality: None,
    };
    let report = metrics::sweep(&dataset, inputs, corrector.as_ref(), &s.values)?;

    report.write_tsv(std::io::stdout().lock())?;
    if let Some(p) = &s.tsv {
        report.write_tsv(BufWriter::new(File::create(p)?))?;
        persist(&s, "sweep", &sidecar(p))?;
    }
    if let Some(p) = &s.json {
        let mut f = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut f, &report)?;
        writeln!(f)?;
        f.flush()?;
        if s.tsv.is_none() {
            persist(&s, "sweep", &sidecar(p))?;
        }
    }
    for c in &report.correlations {
        eprintln!("pearson({}, {}) = {:.4}", c.perplexity, c.quality, c.r);
    }
    Ok(())
}

// -------------------------------------------------------------------- eval

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Reads before correction.
    #[arg(long)]
    original: Option<PathBuf>,
    #[arg(long)]
    corrected: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct EvalSettings {
    original: Option<PathBuf>,
    corrected: Option<PathBuf>,
    truth: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs, file: Option<&Path>) -> anyhow::Result<()> {
    let s: EvalSettings = resolve(&EvalSettings::default(), file_section(file, "eval")?, args)?;
    let original = load_reads(required(&s.original, "original")?)?;
    let corrected = load_reads(required(&s.corrected, "corrected")?)?;
    let truth = load_reads(required(&s.truth, "truth")?)?;
    let counts = ecsim::gain_counts(&original, &corrected, &truth)?;
    print_json(&serde_json::json!({
        "true_positives": counts.true_positives,
        "false_positives": counts.false_positives,
        "errors": counts.errors,
        "gain": counts.gain()?,
    }))
}
