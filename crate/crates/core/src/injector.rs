//! Synthetic genomes, clean read sampling and error injection.
//!
//! `U(0, x)` below is the uniform integer distribution on `{0, ..., x}`.
//! Per-read draws come from the stream `(seed, read index)`, so results are
//! identical regardless of how reads are spread over threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::seqio::{Read, ReadSet};

const BASES: &[u8; 4] = b"ACGT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Deletion,
    Insertion,
    Substitution,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 3] = [ErrorKind::Deletion, ErrorKind::Insertion, ErrorKind::Substitution];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Deletion => "deletion",
            ErrorKind::Insertion => "insertion",
            ErrorKind::Substitution => "substitution",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deletion" => Ok(ErrorKind::Deletion),
            "insertion" => Ok(ErrorKind::Insertion),
            "substitution" => Ok(ErrorKind::Substitution),
            _ => Err(Error::Argument(format!("unknown error kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionKind {
    Single(ErrorKind),
    /// One of the three kinds, equiprobably, per read.
    Mixture,
}

impl FromStr for InjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(InjectionKind::Mixture),
            other => other.parse().map(InjectionKind::Single),
        }
    }
}

/// Per-read error count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Uniform on `{1, ..., 5}`.
    Low,
    /// Uniform on `{6, ..., 10}`.
    High,
}

impl Regime {
    pub fn bounds(self) -> (usize, usize) {
        match self {
            Regime::Low => (1, 5),
            Regime::High => (6, 10),
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Regime::Low),
            "high" => Ok(Regime::High),
            _ => Err(Error::Argument(format!("unknown regime {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub kind: InjectionKind,
    pub regime: Regime,
    pub seed: u64,
}

/// One base-level change, in the coordinates of the sequence at the moment
/// it was applied. Deletions observe `-`; insertions originate from `-`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub read_id: String,
    pub position: usize,
    pub kind: ErrorKind,
    pub original: u8,
    pub observed: u8,
}

/// Every change made by [`inject_readset`], in application order per read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorLedger {
    pub entries: Vec<LedgerEntry>,
    /// Drawn error count per read (before identity substitutions are dropped).
    pub drawn_counts: Vec<usize>,
    /// Kind applied to each read.
    pub kinds: Vec<ErrorKind>,
}

impl ErrorLedger {
    /// TSV with header `read_id position kind original observed`.
    pub fn write_tsv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "read_id\tposition\tkind\toriginal\tobserved")?;
        for e in &self.entries {
            writeln!(
                sink,
                "{}\t{}\t{}\t{}\t{}",
                e.read_id, e.position, e.kind, e.original as char, e.observed as char
            )?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Undoes every change, restoring the reads that were injected.
    pub fn revert(&self, corrupted: &ReadSet) -> Result<ReadSet> {
        let mut by_read: std::collections::HashMap<&str, Vec<&LedgerEntry>> = Default::default();
        for e in &self.entries {
            by_read.entry(e.read_id.as_str()).or_default().push(e);
        }
        let mut out = Vec::with_capacity(corrupted.len());
        for read in corrupted {
            let mut seq = read.seq().to_vec();
            if let Some(changes) = by_read.get(read.id()) {
                for e in changes.iter().rev() {
                    let bad = || Error::Argument(format!("ledger entry does not apply to read {}", e.read_id));
                    match e.kind {
                        ErrorKind::Substitution => {
                            let slot = seq.get_mut(e.position).ok_or_else(bad)?;
                            if *slot != e.observed {
                                return Err(bad());
                            }
                            *slot = e.original;
                        }
                        ErrorKind::Insertion => {
                            if seq.get(e.position) != Some(&e.observed) {
                                return Err(bad());
                            }
                            seq.remove(e.position);
                        }
                        ErrorKind::Deletion => {
                            if e.position > seq.len() {
                                return Err(bad());
                            }
                            seq.insert(e.position, e.original);
                        }
                    }
                }
            }
            out.push(read.with_seq(seq));
        }
        Ok(ReadSet::new(out, format!("{} (reverted)", corrupted.source())))
    }
}

#[inline]
fn random_base(rng: &mut Rng) -> u8 {
    BASES[rng.gen_range(0..4)]
}

/// i.i.d. uniform genome of `length` bases.
pub fn generate_genome(length: usize, seed: u64) -> Result<Read> {
    if length == 0 {
        return Err(Error::Argument("genome length must be at least 1".into()));
    }
    let mut rng = rng::stream(rng::derive(seed, rng::tag::GENOME), 0);
    let seq: Vec<u8> = (0..length).map(|_| random_base(&mut rng)).collect();
    Ok(Read::from_parts_unchecked(format!("genome_{seed}"), seq, None))
}

/// `n` forward-strand reads of length `read_len` with start positions
/// uniform on `{0, ..., |genome| - read_len}`. Ids are `read_{i}`.
pub fn sample_clean_reads(genome: &Read, n: usize, read_len: usize, seed: u64) -> Result<ReadSet> {
    if read_len == 0 || read_len > genome.len() {
        return Err(Error::Argument(format!(
            "read length {read_len} must be in 1..={}",
            genome.len()
        )));
    }
    let mut rng = rng::stream(rng::derive(seed, rng::tag::READS), 0);
    let max_start = genome.len() - read_len;
    let reads = (0..n)
        .map(|i| {
            let start = rng.gen_range(0..=max_start);
            let seq = genome.seq()[start..start + read_len].to_vec();
            Read::from_parts_unchecked(format!("read_{i}"), seq, None)
        })
        .collect();
    Ok(ReadSet::new(reads, "generated"))
}

/// Change record without a read id, in application-time coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Change {
    pub position: usize,
    pub kind: ErrorKind,
    pub original: u8,
    pub observed: u8,
}

/// Removes `d` consecutive bases starting at an index drawn from `U(0, l - d)`.
pub fn inject_deletion(seq: &[u8], d: usize, rng: &mut Rng) -> Result<(Vec<u8>, Vec<Change>)> {
    let l = seq.len();
    if d > l {
        return Err(Error::Argument(format!("deletion length {d} exceeds read length {l}")));
    }
    let i = rng.gen_range(0..=l - d);
    let mut out = Vec::with_capacity(l - d);
    out.extend_from_slice(&seq[..i]);
    out.extend_from_slice(&seq[i + d..]);
    // every base is removed at index i of the shrinking sequence
    let changes = seq[i..i + d]
        .iter()
        .map(|&b| Change {
            position: i,
            kind: ErrorKind::Deletion,
            original: b,
            observed: b'-',
        })
        .collect();
    Ok((out, changes))
}

/// Inserts `ins` uniform random bases at an index drawn from `U(0, l - ins)`.
pub fn inject_insertion(seq: &[u8], ins: usize, rng: &mut Rng) -> Result<(Vec<u8>, Vec<Change>)> {
    let l = seq.len();
    if ins > l {
        return Err(Error::Argument(format!(
            "insertion length {ins} exceeds read length {l}"
        )));
    }
    let i = rng.gen_range(0..=l - ins);
    let inserted: Vec<u8> = (0..ins).map(|_| random_base(rng)).collect();
    let mut out = Vec::with_capacity(l + ins);
    out.extend_from_slice(&seq[..i]);
    out.extend_from_slice(&inserted);
    out.extend_from_slice(&seq[i..]);
    let changes = inserted
        .iter()
        .enumerate()
        .map(|(j, &b)| Change {
            position: i + j,
            kind: ErrorKind::Insertion,
            original: b'-',
            observed: b,
        })
        .collect();
    Ok((out, changes))
}

/// Draws `count` positions from `U(0, l - 1)` with replacement and replaces
/// each with a uniform base, which equals the original one time in four.
/// Only effective changes are recorded.
pub fn inject_substitution(seq: &[u8], count: usize, rng: &mut Rng) -> (Vec<u8>, Vec<Change>) {
    let mut out = seq.to_vec();
    let mut changes = Vec::new();
    if out.is_empty() {
        return (out, changes);
    }
    for _ in 0..count {
        let pos = rng.gen_range(0..out.len());
        let base = random_base(rng);
        if base != out[pos] {
            changes.push(Change {
                position: pos,
                kind: ErrorKind::Substitution,
                original: out[pos],
                observed: base,
            });
            out[pos] = base;
        }
    }
    (out, changes)
}

/// Corrupts every read according to `spec`. Deletion and insertion use the
/// drawn count as the segment length, capped so the read stays non-empty
/// (deletion) or within the index domain (insertion).
pub fn inject_readset(reads: &ReadSet, spec: &InjectionSpec) -> (ReadSet, ErrorLedger) {
    let seed = rng::derive(spec.seed, rng::tag::INJECT);
    let (lo, hi) = spec.regime.bounds();
    let results: Vec<(Read, Vec<Change>, usize, ErrorKind)> = reads
        .reads()
        .par_iter()
        .enumerate()
        .map(|(idx, read)| {
            let mut rng = rng::stream(seed, idx as u64);
            let count = rng.gen_range(lo..=hi);
            let kind = match spec.kind {
                InjectionKind::Single(k) => k,
                InjectionKind::Mixture => ErrorKind::ALL[rng.gen_range(0..3)],
            };
            let l = read.len();
            let (seq, changes) = match kind {
                ErrorKind::Deletion => inject_deletion(read.seq(), count.min(l - 1), &mut rng).expect("length capped"),
                ErrorKind::Insertion => inject_insertion(read.seq(), count.min(l), &mut rng).expect("length capped"),
                ErrorKind::Substitution => inject_substitution(read.seq(), count, &mut rng),
            };
            (read.with_seq(seq), changes, count, kind)
        })
        .collect();
    let mut ledger = ErrorLedger::default();
    let mut out = Vec::with_capacity(results.len());
    for (read, changes, count, kind) in results {
        ledger.entries.extend(changes.into_iter().map(|c| LedgerEntry {
            read_id: read.id().to_string(),
            position: c.position,
            kind: c.kind,
            original: c.original,
            observed: c.observed,
        }));
        ledger.drawn_counts.push(count);
        ledger.kinds.push(kind);
        out.push(read);
    }
    (ReadSet::new(out, format!("{} (injected)", reads.source())), ledger)
}
