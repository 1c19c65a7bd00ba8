//! Error correction backends and ground-truth evaluation.
//!
//! [`kspectrum_correct`] is a substitution-only k-spectrum corrector: a
//! k-mer is *solid* when its dataset count is at least `M`, and each insolid
//! k-mer is repaired by the single-base substitution that produces the most
//! frequent solid k-mer. [`ToolAdapter`] runs any external corrector through
//! a command template with temp-file I/O.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read as IoRead};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmenter::base_code;
use crate::seqio::{self, Read, ReadSet};

/// Longest k that packs into a `u64`.
pub const MAX_K: usize = 32;
pub const DEFAULT_MAX_EDITS: usize = 2;
pub const DEFAULT_SOLID: u32 = 3;

/// Coverage-scaled solid threshold, `max(2, floor(coverage / 10))`. The
/// fixed default is [`DEFAULT_SOLID`].
pub fn heuristic_solid_threshold(coverage: f64) -> u32 {
    ((coverage / 10.0).floor() as u32).max(2)
}

fn pack(window: &[u8]) -> Option<u64> {
    window
        .iter()
        .try_fold(0u64, |acc, &b| base_code(b).map(|c| (acc << 2) | u64::from(c)))
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > MAX_K {
        return Err(Error::Argument(format!("k must be in 1..={MAX_K}, got {k}")));
    }
    Ok(())
}

/// Counts of every overlapping k-mer over `{A,C,G,T}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmerSpectrum {
    k: usize,
    counts: HashMap<u64, u32>,
    /// Reads shorter than k.
    short_reads: usize,
}

impl KmerSpectrum {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn short_reads(&self) -> usize {
        self.short_reads
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, kmer: &[u8]) -> u32 {
        if kmer.len() != self.k {
            return 0;
        }
        pack(kmer).map_or(0, |c| self.count_code(c))
    }

    #[inline]
    fn count_code(&self, code: u64) -> u32 {
        self.counts.get(&code).copied().unwrap_or(0)
    }

    /// `(k-mer, count)` pairs sorted by k-mer.
    pub fn to_sorted_vec(&self) -> Vec<(String, u32)> {
        let mut v: Vec<(u64, u32)> = self.counts.iter().map(|(&c, &n)| (c, n)).collect();
        v.sort_unstable();
        v.into_iter()
            .map(|(code, n)| {
                let s = (0..self.k)
                    .rev()
                    .map(|i| b"ACGT"[((code >> (2 * i)) & 3) as usize] as char)
                    .collect();
                (s, n)
            })
            .collect()
    }

    fn add_read(&mut self, seq: &[u8]) {
        if seq.len() < self.k {
            self.short_reads += 1;
            return;
        }
        for window in seq.windows(self.k) {
            if let Some(code) = pack(window) {
                *self.counts.entry(code).or_insert(0) += 1;
            }
        }
    }

    fn merge(mut self, other: KmerSpectrum) -> KmerSpectrum {
        for (code, n) in other.counts {
            *self.counts.entry(code).or_insert(0) += n;
        }
        self.short_reads += other.short_reads;
        self
    }
}

/// Counts every overlapping k-mer (stride 1) of every read; windows with
/// `N` are not counted. Partial tables are built in parallel and merged.
pub fn kmer_spectrum(reads: &ReadSet, k: usize) -> Result<KmerSpectrum> {
    check_k(k)?;
    let empty = || KmerSpectrum {
        k,
        counts: HashMap::new(),
        short_reads: 0,
    };
    Ok(reads
        .reads()
        .par_chunks(2048)
        .map(|chunk| {
            let mut s = empty();
            chunk.iter().for_each(|r| s.add_read(r.seq()));
            s
        })
        .reduce(empty, KmerSpectrum::merge))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSpectrumConfig {
    pub k: usize,
    /// k-mers with count `>= solid` are solid.
    pub solid: u32,
    pub max_edits: usize,
}

impl KSpectrumConfig {
    pub fn new(k: usize, solid: u32) -> Self {
        KSpectrumConfig {
            k,
            solid,
            max_edits: DEFAULT_MAX_EDITS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_k(self.k)?;
        if self.solid == 0 {
            return Err(Error::Argument("solid threshold must be at least 1".into()));
        }
        Ok(())
    }
}

fn correct_read(seq: &[u8], spectrum: &KmerSpectrum, cfg: &KSpectrumConfig) -> Option<Vec<u8>> {
    let k = cfg.k;
    if seq.len() < k || cfg.max_edits == 0 {
        return None;
    }
    let mut out: Option<Vec<u8>> = None;
    let mut edits = 0;
    let mut j = 0;
    while j + k <= seq.len() && edits < cfg.max_edits {
        let cur = out.as_deref().unwrap_or(seq);
        let Some(code) = pack(&cur[j..j + k]) else {
            j += 1;
            continue;
        };
        if spectrum.count_code(code) >= cfg.solid {
            j += 1;
            continue;
        }
        // best = (count, candidate code, position, base)
        let mut best: Option<(u32, u64, usize, u8)> = None;
        for p in 0..k {
            let shift = 2 * (k - 1 - p);
            let old = (code >> shift) & 3;
            for b in 0..4u64 {
                if b == old {
                    continue;
                }
                let cand = (code & !(3 << shift)) | (b << shift);
                let n = spectrum.count_code(cand);
                if n < cfg.solid {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bn, bc, _, _)) => n > bn || (n == bn && cand < bc),
                };
                if better {
                    best = Some((n, cand, p, b"ACGT"[b as usize]));
                }
            }
        }
        match best {
            Some((_, _, p, base)) => {
                out.get_or_insert_with(|| seq.to_vec())[j + p] = base;
                edits += 1;
            }
            None => j += 1,
        }
    }
    out
}

/// Corrects `reads` against a precomputed spectrum.
pub fn kspectrum_correct_with(reads: &ReadSet, spectrum: &KmerSpectrum, cfg: &KSpectrumConfig) -> Result<ReadSet> {
    cfg.validate()?;
    if spectrum.k() != cfg.k {
        return Err(Error::Argument(format!(
            "spectrum k {} does not match configured k {}",
            spectrum.k(),
            cfg.k
        )));
    }
    let out = reads
        .reads()
        .par_iter()
        .map(|r| match correct_read(r.seq(), spectrum, cfg) {
            Some(seq) => r.with_seq(seq),
            None => r.clone(),
        })
        .collect();
    Ok(ReadSet::new(out, format!("{} (corrected k={})", reads.source(), cfg.k)))
}

/// Scans each read left to right; every insolid k-mer is replaced by the
/// single-base substitution yielding the most frequent solid k-mer (ties go
/// to the lexicographically smallest k-mer), until `max_edits` edits were
/// made in that read. Lengths never change.
pub fn kspectrum_correct(reads: &ReadSet, cfg: &KSpectrumConfig) -> Result<ReadSet> {
    cfg.validate()?;
    let spectrum = kmer_spectrum(reads, cfg.k)?;
    kspectrum_correct_with(reads, &spectrum, cfg)
}

/// A correction procedure parameterized by one integer (k, genome length, ...).
pub trait Corrector: Send + Sync {
    fn correct(&self, reads: &ReadSet, value: i64) -> Result<ReadSet>;
}

impl<F> Corrector for F
where
    F: Fn(&ReadSet, i64) -> Result<ReadSet> + Send + Sync,
{
    fn correct(&self, reads: &ReadSet, value: i64) -> Result<ReadSet> {
        self(reads, value)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCorrector;

impl Corrector for IdentityCorrector {
    fn correct(&self, reads: &ReadSet, _value: i64) -> Result<ReadSet> {
        Ok(reads.clone())
    }
}

/// The built-in corrector with the tuned value as k.
///
/// With a `reference`, the spectrum is counted on that read set (the whole
/// dataset) and applied to whatever reads are passed in, so a small sample
/// is corrected with dataset-wide k-mer counts.
#[derive(Debug, Clone)]
pub struct KSpectrumCorrector {
    pub solid: u32,
    pub max_edits: usize,
    pub reference: Option<ReadSet>,
}

impl KSpectrumCorrector {
    pub fn new(solid: u32, max_edits: usize) -> Self {
        KSpectrumCorrector {
            solid,
            max_edits,
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: ReadSet) -> Self {
        self.reference = Some(reference);
        self
    }

    fn config(&self, value: i64) -> Result<KSpectrumConfig> {
        let k = usize::try_from(value).map_err(|_| Error::Argument(format!("invalid k {value}")))?;
        let cfg = KSpectrumConfig {
            k,
            solid: self.solid,
            max_edits: self.max_edits,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Corrector for KSpectrumCorrector {
    fn correct(&self, reads: &ReadSet, value: i64) -> Result<ReadSet> {
        let cfg = self.config(value)?;
        let spectrum = kmer_spectrum(self.reference.as_ref().unwrap_or(reads), cfg.k)?;
        kspectrum_correct_with(reads, &spectrum, &cfg)
    }
}

/// Command-template wrapper around an external EC tool.
///
/// The template is run with `sh -c` after replacing `{input}` and
/// `{output}` with quoted temp-file paths and `{<param_name>}` with the
/// tuned value. Captured stdout/stderr go to
/// `<workdir>/<param_name>_<value>.{stdout,stderr}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolAdapter {
    pub command_template: String,
    pub workdir: PathBuf,
    pub timeout_secs: u64,
    pub param_name: String,
}

pub const TMPDIR_ENV: &str = "ATHENA_TMPDIR";

fn placeholders(template: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        match tail.find('}') {
            Some(close) => {
                let name = &tail[..close];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    out.push(name);
                }
                rest = &tail[close + 1..];
            }
            None => break,
        }
    }
    out
}

fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

impl ToolAdapter {
    pub fn new(command_template: impl Into<String>, param_name: impl Into<String>) -> Self {
        ToolAdapter {
            command_template: command_template.into(),
            workdir: std::env::temp_dir(),
            timeout_secs: 3600,
            param_name: param_name.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let names = placeholders(&self.command_template);
        for required in ["input", "output"] {
            if !names.contains(&required) {
                return Err(Error::Argument(format!("command template lacks {{{required}}}")));
            }
        }
        let tunable: Vec<&&str> = names.iter().filter(|n| !matches!(**n, "input" | "output")).collect();
        let distinct: std::collections::BTreeSet<&&str> = tunable.iter().copied().collect();
        if distinct.len() != 1 || *distinct.iter().next().expect("one") != &self.param_name.as_str() {
            return Err(Error::Argument(format!(
                "command template must contain exactly one tunable placeholder {{{}}}",
                self.param_name
            )));
        }
        Ok(())
    }

    fn temp_root(&self) -> PathBuf {
        std::env::var_os(TMPDIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.workdir.clone())
    }

    /// Writes `input` to a temp file, runs the tool and parses its output.
    pub fn run(&self, value: i64, input: &ReadSet) -> Result<ReadSet> {
        self.validate()?;
        std::fs::create_dir_all(&self.workdir)?;
        let root = self.temp_root();
        std::fs::create_dir_all(&root)?;
        let tmp = tempfile::Builder::new().prefix("athena-adapter-").tempdir_in(&root)?;
        let in_path = tmp.path().join("input.fastq");
        let out_path = tmp.path().join("output.fastq");
        seqio::write_fastq(input, BufWriter::new(File::create(&in_path)?))?;

        let command = self
            .command_template
            .replace("{input}", &shell_quote(&in_path))
            .replace("{output}", &shell_quote(&out_path))
            .replace(&format!("{{{}}}", self.param_name), &value.to_string());
        let stem = format!("{}_{}", self.param_name, value);
        let stdout_path = self.workdir.join(format!("{stem}.stdout"));
        let stderr_path = self.workdir.join(format!("{stem}.stderr"));
        log::debug!("running adapter: {command}");
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&command)
            .current_dir(&self.workdir)
            .stdin(Stdio::null())
            .stdout(File::create(&stdout_path)?)
            .stderr(File::create(&stderr_path)?)
            .spawn()?;

        let deadline = Instant::now() + Duration::from_secs(self.timeout_secs);
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(self.failure(
                    format!("timed out after {} s", self.timeout_secs),
                    None,
                    &stderr_path,
                    tmp.keep(),
                ));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        if !status.success() {
            return Err(self.failure(
                format!(
                    "command exited with status {}",
                    status.code().map_or("signal".to_string(), |c| c.to_string())
                ),
                status.code(),
                &stderr_path,
                tmp.keep(),
            ));
        }
        let parsed = if out_path.exists() {
            ReadSet::from_path(&out_path)
        } else {
            Err(Error::NotFound(out_path.clone()))
        };
        match parsed {
            Ok(reads) => Ok(ReadSet::new(
                reads.into_reads(),
                format!("{} (adapter {stem})", input.source()),
            )),
            Err(e) => Err(self.failure(format!("unusable output file: {e}"), Some(0), &stderr_path, tmp.keep())),
        }
    }

    fn failure(&self, message: String, exit_code: Option<i32>, stderr_path: &Path, kept: PathBuf) -> Error {
        let mut stderr = String::new();
        if let Ok(mut f) = File::open(stderr_path) {
            let _ = f.read_to_string(&mut stderr);
        }
        log::debug!("adapter temporaries kept in {}", kept.display());
        Error::Adapter {
            message,
            exit_code,
            stderr,
            stderr_path: Some(stderr_path.to_path_buf()),
        }
    }
}

pub fn run_external(adapter: &ToolAdapter, value: i64, input: &ReadSet) -> Result<ReadSet> {
    adapter.run(value, input)
}

impl Corrector for ToolAdapter {
    fn correct(&self, reads: &ReadSet, value: i64) -> Result<ReadSet> {
        self.run(value, reads)
    }
}

/// Per-base comparison of a correction against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GainCounts {
    /// Erroneous bases corrected to the truth.
    pub true_positives: u64,
    /// Correct bases changed away from the truth.
    pub false_positives: u64,
    /// Erroneous bases in the original reads.
    pub errors: u64,
}

impl GainCounts {
    /// `(TP - FP) / E`.
    pub fn gain(&self) -> Result<f64> {
        if self.errors == 0 {
            return Err(Error::UndefinedGain);
        }
        Ok((self.true_positives as f64 - self.false_positives as f64) / self.errors as f64)
    }
}

pub fn gain_counts(original: &ReadSet, corrected: &ReadSet, truth: &ReadSet) -> Result<GainCounts> {
    if original.len() != corrected.len() || original.len() != truth.len() {
        return Err(Error::Alignment(format!(
            "read counts differ: original {}, corrected {}, truth {}",
            original.len(),
            corrected.len(),
            truth.len()
        )));
    }
    let mut counts = GainCounts {
        true_positives: 0,
        false_positives: 0,
        errors: 0,
    };
    for ((o, c), t) in original.iter().zip(corrected).zip(truth) {
        if o.id() != c.id() || o.id() != t.id() {
            return Err(Error::Alignment(format!(
                "ids differ: {} / {} / {}",
                o.id(),
                c.id(),
                t.id()
            )));
        }
        if o.len() != c.len() || o.len() != t.len() {
            return Err(Error::Alignment(format!("lengths differ for read {}", o.id())));
        }
        for ((&ob, &cb), &tb) in o.seq().iter().zip(c.seq()).zip(t.seq()) {
            if ob != tb {
                counts.errors += 1;
                if cb == tb {
                    counts.true_positives += 1;
                }
            } else if cb != tb {
                counts.false_positives += 1;
            }
        }
    }
    Ok(counts)
}

/// EC gain `(TP - FP) / E` against ground truth; reads are matched by
/// position and must carry the same ids and lengths.
pub fn ec_gain(original: &ReadSet, corrected: &ReadSet, truth: &ReadSet) -> Result<f64> {
    gain_counts(original, corrected, truth)?.gain()
}

/// Convenience for tests and tools: builds a read set from `(id, seq)` pairs.
pub fn reads_from_pairs(pairs: &[(&str, &str)]) -> Result<ReadSet> {
    let reads = pairs
        .iter()
        .map(|(id, s)| Read::new(*id, s.as_bytes(), None))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReadSet::new(reads, "literal"))
}
