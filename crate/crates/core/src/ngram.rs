//! Word n-gram language model with interpolated Witten-Bell smoothing.
//!
//! Each read is one sentence, padded on the left with `h` start markers.
//! There is no end marker and start markers are never predicted. When a
//! word slot was excluded by the segmenter the history resets to start
//! markers.
//!
//! For a history `g` with `c(g)` total continuations and `T(g)` distinct
//! continuations,
//!
//! ```text
//! P(w | g) = (c(g, w) + T(g) * P(w | g')) / (c(g) + T(g))
//! ```
//!
//! where `g'` drops the oldest word of `g`. Histories never seen in training
//! fall through to `g'`. The unigram level interpolates with a uniform
//! distribution over the vocabulary plus one unknown-word class; the class
//! mass is spread evenly over the words of the closed alphabet that were
//! never observed. Every returned probability is at least `p_floor`.

use std::collections::HashMap;
use std::io::{Read as IoRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, PerplexityReport};
use crate::num::pairwise_sum;
use crate::segmenter::{segment_corpus, Word, WordSequence, MAX_WORD_LEN};
use crate::seqio::ReadSet;

pub const MAX_HISTORY: usize = 5;
pub const DEFAULT_HISTORY: usize = 3;
pub const DEFAULT_P_FLOOR: f64 = 1e-7;

const MAGIC: &[u8; 4] = b"ATHN";
const FORMAT_VERSION: u16 = 1;

const START: u32 = u32::MAX;
const PAD: u32 = u32::MAX - 1;

type Key = [u32; MAX_HISTORY + 1];

/// A history element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Start,
    Word(Word),
}

impl Token {
    fn raw(self) -> u32 {
        match self {
            Token::Start => START,
            Token::Word(w) => w.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingMethod {
    WittenBell,
}

impl SmoothingMethod {
    fn tag(self) -> u8 {
        match self {
            SmoothingMethod::WittenBell => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(SmoothingMethod::WittenBell),
            t => Err(Error::ModelFormat(format!("unknown smoothing tag {t}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothing {
    pub method: SmoothingMethod,
    pub p_floor: f64,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing {
            method: SmoothingMethod::WittenBell,
            p_floor: DEFAULT_P_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ContextStat {
    total: u64,
    distinct: u64,
}

fn key(history: &[u32], word: u32) -> Key {
    let mut k = [PAD; MAX_HISTORY + 1];
    k[..history.len()].copy_from_slice(history);
    k[history.len()] = word;
    k
}

fn ctx_key(history: &[u32]) -> Key {
    let mut k = [PAD; MAX_HISTORY + 1];
    k[..history.len()].copy_from_slice(history);
    k
}

/// Raw n-gram counts for orders `0..=h`. Counts are additive, so partial
/// tables built on disjoint corpus chunks merge into the table of the union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramCounts {
    word_len: usize,
    history_len: usize,
    tables: Vec<HashMap<Key, u64>>,
}

impl NgramCounts {
    pub fn new(word_len: usize, history_len: usize) -> Result<Self> {
        if history_len > MAX_HISTORY {
            return Err(Error::Argument(format!(
                "history length must be in 0..={MAX_HISTORY}, got {history_len}"
            )));
        }
        if word_len == 0 || word_len > MAX_WORD_LEN {
            return Err(Error::Argument(format!("bad word length {word_len}")));
        }
        Ok(NgramCounts {
            word_len,
            history_len,
            tables: vec![HashMap::new(); history_len + 1],
        })
    }

    pub fn add_sequence(&mut self, seq: &WordSequence) -> Result<()> {
        if seq.word_len() != self.word_len {
            return Err(Error::Argument(format!(
                "word length {} does not match model word length {}",
                seq.word_len(),
                self.word_len
            )));
        }
        let h = self.history_len;
        let mut history = vec![START; h];
        for slot in seq.slots() {
            match slot {
                None => history.iter_mut().for_each(|t| *t = START),
                Some(w) => {
                    for order in 0..=h {
                        let ctx = &history[h - order..];
                        *self.tables[order].entry(key(ctx, w.0)).or_insert(0) += 1;
                    }
                    if h > 0 {
                        history.rotate_left(1);
                        history[h - 1] = w.0;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn merge(mut self, other: NgramCounts) -> Result<Self> {
        if self.word_len != other.word_len || self.history_len != other.history_len {
            return Err(Error::Argument("merging incompatible count tables".into()));
        }
        for (mine, theirs) in self.tables.iter_mut().zip(other.tables) {
            for (k, c) in theirs {
                *mine.entry(k).or_insert(0) += c;
            }
        }
        Ok(self)
    }

    /// Count of `history → word`; `history.len()` selects the order.
    pub fn count(&self, history: &[Token], word: Word) -> u64 {
        if history.len() > self.history_len {
            return 0;
        }
        let raw: Vec<u32> = history.iter().map(|t| t.raw()).collect();
        self.tables[history.len()].get(&key(&raw, word.0)).copied().unwrap_or(0)
    }

    /// Number of distinct entries at each order.
    pub fn table_sizes(&self) -> Vec<usize> {
        self.tables.iter().map(HashMap::len).collect()
    }

    pub fn total_words(&self) -> u64 {
        self.tables[0].values().sum()
    }

    /// All `(history, word, count)` entries of one order, in key order.
    pub fn entries(&self, order: usize) -> Vec<(Vec<Token>, Word, u64)> {
        let mut out: Vec<_> = self.tables[order]
            .iter()
            .map(|(k, &c)| {
                let history: Vec<Token> = k[..order]
                    .iter()
                    .map(|&t| if t == START { Token::Start } else { Token::Word(Word(t)) })
                    .collect();
                (history, Word(k[order]), c)
            })
            .collect();
        out.sort_by(|a, b| {
            let ka: Vec<u32> = a.0.iter().map(|t| t.raw()).collect();
            let kb: Vec<u32> = b.0.iter().map(|t| t.raw()).collect();
            (ka, a.1).cmp(&(kb, b.1))
        });
        out
    }
}

/// A trained, immutable n-gram model.
#[derive(Debug, Clone)]
pub struct NgramModel {
    counts: NgramCounts,
    smoothing: Smoothing,
    contexts: Vec<HashMap<Key, ContextStat>>,
    total_words: u64,
    vocab_size: u64,
    unseen_words: u64,
}

/// Trains on a stream of word sequences.
pub fn train<I>(corpus: I, history_len: usize) -> Result<NgramModel>
where
    I: IntoIterator<Item = WordSequence>,
{
    let mut counts: Option<NgramCounts> = None;
    for seq in corpus {
        let c = match counts.as_mut() {
            Some(c) => c,
            None => counts.insert(NgramCounts::new(seq.word_len(), history_len)?),
        };
        c.add_sequence(&seq)?;
    }
    let counts = counts.ok_or_else(|| Error::Training("empty corpus".into()))?;
    NgramModel::from_counts(counts, Smoothing::default())
}

/// Trains on segmented reads, counting chunks in parallel and merging.
pub fn train_parallel(corpus: &[WordSequence], history_len: usize) -> Result<NgramModel> {
    let word_len = corpus
        .first()
        .ok_or_else(|| Error::Training("empty corpus".into()))?
        .word_len();
    let counts = corpus
        .par_chunks(4096)
        .map(|chunk| {
            let mut c = NgramCounts::new(word_len, history_len)?;
            for seq in chunk {
                c.add_sequence(seq)?;
            }
            Ok(c)
        })
        .try_reduce(
            || NgramCounts::new(word_len, history_len).expect("validated above"),
            NgramCounts::merge,
        )?;
    NgramModel::from_counts(counts, Smoothing::default())
}

/// Segments `reads` with `word_len` and trains an order-`history_len` model.
pub fn train_on_reads(reads: &ReadSet, word_len: usize, history_len: usize) -> Result<NgramModel> {
    let corpus: Vec<WordSequence> = segment_corpus(reads, word_len)?.collect();
    train_parallel(&corpus, history_len)
}

impl NgramModel {
    pub fn from_counts(counts: NgramCounts, smoothing: Smoothing) -> Result<Self> {
        let total_words = counts.total_words();
        if total_words == 0 {
            return Err(Error::Training("corpus contains no words".into()));
        }
        if !(smoothing.p_floor > 0.0 && smoothing.p_floor < 1.0) {
            return Err(Error::Argument(format!("p_floor {} not in (0,1)", smoothing.p_floor)));
        }
        let mut contexts = vec![HashMap::new(); counts.history_len + 1];
        for (order, table) in counts.tables.iter().enumerate().skip(1) {
            let ctx: &mut HashMap<Key, ContextStat> = &mut contexts[order];
            for (k, &c) in table {
                let stat = ctx.entry(ctx_key(&k[..order])).or_default();
                stat.total += c;
                stat.distinct += 1;
            }
        }
        let vocab_size = counts.tables[0].len() as u64;
        let alphabet = 1u64 << (2 * counts.word_len);
        Ok(NgramModel {
            smoothing,
            contexts,
            total_words,
            vocab_size,
            unseen_words: alphabet - vocab_size,
            counts,
        })
    }

    pub fn word_len(&self) -> usize {
        self.counts.word_len
    }

    pub fn history_len(&self) -> usize {
        self.counts.history_len
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn counts(&self) -> &NgramCounts {
        &self.counts
    }

    pub fn total_words(&self) -> u64 {
        self.total_words
    }

    pub fn vocab_size(&self) -> u64 {
        self.vocab_size
    }

    /// Vocabulary in code order.
    pub fn vocab(&self) -> Vec<Word> {
        let mut v: Vec<Word> = self.counts.tables[0].keys().map(|k| Word(k[0])).collect();
        v.sort_unstable();
        v
    }

    pub fn in_vocab(&self, word: Word) -> bool {
        self.counts.tables[0].contains_key(&key(&[], word.0))
    }

    /// Interpolated probability before the unknown-word split and the floor.
    /// With `word = None` this is the mass of the unknown-word class.
    fn interpolated(&self, word: Option<u32>, history: &[u32]) -> f64 {
        let has_unk = self.unseen_words > 0;
        let base = 1.0 / (self.vocab_size + u64::from(has_unk)) as f64;
        let n = self.total_words as f64;
        let t = self.vocab_size as f64;
        let c0 = word.map_or(0, |w| self.counts.tables[0].get(&key(&[], w)).copied().unwrap_or(0));
        let mut p = (c0 as f64 + t * base) / (n + t);
        let usable = history.len().min(self.counts.history_len);
        for order in 1..=usable {
            let ctx = &history[history.len() - order..];
            let Some(stat) = self.contexts[order].get(&ctx_key(ctx)) else {
                continue;
            };
            let c = word.map_or(0, |w| self.counts.tables[order].get(&key(ctx, w)).copied().unwrap_or(0));
            p = (c as f64 + stat.distinct as f64 * p) / (stat.total + stat.distinct) as f64;
        }
        p
    }

    fn prob_raw(&self, word: u32, history: &[u32]) -> f64 {
        let p = if self.counts.tables[0].contains_key(&key(&[], word)) {
            self.interpolated(Some(word), history)
        } else {
            self.interpolated(None, history) / self.unseen_words.max(1) as f64
        };
        p.max(self.smoothing.p_floor)
    }

    /// `P(word | history)`, history oldest first. Histories longer than the
    /// model order use their most recent `h` tokens.
    pub fn prob(&self, word: Word, history: &[Token]) -> f64 {
        let raw: Vec<u32> = history.iter().map(|t| t.raw()).collect();
        self.prob_raw(word.0, &raw)
    }

    /// Total mass of the unknown-word class after `history`.
    pub fn unk_mass(&self, history: &[Token]) -> f64 {
        if self.unseen_words == 0 {
            return 0.0;
        }
        let raw: Vec<u32> = history.iter().map(|t| t.raw()).collect();
        self.interpolated(None, &raw)
    }

    /// `(sum of -log2 p, scored words, skipped words)` for one sentence.
    pub fn score_sequence(&self, seq: &WordSequence) -> Result<(f64, u64, u64)> {
        if seq.word_len() != self.word_len() {
            return Err(Error::Argument(format!(
                "corpus word length {} does not match model word length {}",
                seq.word_len(),
                self.word_len()
            )));
        }
        let h = self.history_len();
        let mut history = vec![START; h];
        let (mut sum, mut scored, mut skipped) = (0.0, 0u64, 0u64);
        for slot in seq.slots() {
            match slot {
                None => {
                    skipped += 1;
                    history.iter_mut().for_each(|t| *t = START);
                }
                Some(w) => {
                    sum -= self.prob_raw(w.0, &history).log2();
                    scored += 1;
                    if h > 0 {
                        history.rotate_left(1);
                        history[h - 1] = w.0;
                    }
                }
            }
        }
        Ok((sum, scored, skipped))
    }

    /// Average perplexity `exp(-(1/m) Σ ln P(w_i | history_i))` over all
    /// scored words. Per-sentence sums are reduced pairwise in corpus order,
    /// so the result does not depend on the thread count.
    pub fn perplexity(&self, corpus: &[WordSequence]) -> Result<PerplexityReport> {
        self.perplexity_with_short(corpus, 0)
    }

    fn perplexity_with_short(&self, corpus: &[WordSequence], short_reads: u64) -> Result<PerplexityReport> {
        let parts = corpus
            .par_iter()
            .map(|s| self.score_sequence(s))
            .collect::<Result<Vec<_>>>()?;
        let sums: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let scored = parts.iter().map(|p| p.1).sum();
        let skipped = parts.iter().map(|p| p.2).sum();
        PerplexityReport::from_bits(pairwise_sum(&sums), scored, skipped, short_reads)
    }

    /// Segments `reads` with the model's word length and scores them.
    pub fn perplexity_of_reads(&self, reads: &ReadSet) -> Result<PerplexityReport> {
        let mut segs = segment_corpus(reads, self.word_len())?;
        let corpus: Vec<WordSequence> = segs.by_ref().collect();
        let short = segs.short_reads() as u64;
        self.perplexity_with_short(&corpus, short)
    }

    /// Serializes to the `ATHN` binary format (little endian):
    ///
    /// ```text
    /// magic "ATHN" | version u16 | word_len u8 | history_len u8
    /// smoothing tag u8 | p_floor f64 | total_words u64
    /// for order in 0..=h: n u64, then n × (order+1 tokens u32, count u64)
    /// crc32 u32 over all preceding bytes
    /// ```
    ///
    /// Entries are sorted by key so equal models produce identical bytes.
    /// The start marker is token `0xFFFF_FFFF`.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(self.word_len() as u8);
        buf.push(self.history_len() as u8);
        buf.push(self.smoothing.method.tag());
        buf.extend_from_slice(&self.smoothing.p_floor.to_le_bytes());
        buf.extend_from_slice(&self.total_words.to_le_bytes());
        for (order, table) in self.counts.tables.iter().enumerate() {
            let mut entries: Vec<(&Key, &u64)> = table.iter().collect();
            entries.sort_unstable_by_key(|(k, _)| **k);
            buf.extend_from_slice(&(entries.len() as u64).to_le_bytes());
            for (k, c) in entries {
                for tok in &k[..=order] {
                    buf.extend_from_slice(&tok.to_le_bytes());
                }
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        sink.write_all(&buf)?;
        sink.flush()?;
        Ok(())
    }

    pub fn load<R: IoRead>(mut source: R) -> Result<Self> {
        let mut buf = Vec::new();
        source.read_to_end(&mut buf)?;
        if buf.len() < MAGIC.len() + 4 || &buf[..4] != MAGIC {
            return Err(Error::ModelFormat("not an n-gram model file (bad magic)".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::ModelFormat(
                "checksum mismatch (truncated or corrupt file)".into(),
            ));
        }
        let mut cur = Cursor { buf: body, pos: 4 };
        let version = u16::from_le_bytes(cur.take::<2>()?);
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let word_len = cur.take::<1>()?[0] as usize;
        let history_len = cur.take::<1>()?[0] as usize;
        let method = SmoothingMethod::from_tag(cur.take::<1>()?[0])?;
        let p_floor = f64::from_le_bytes(cur.take::<8>()?);
        let total_words = u64::from_le_bytes(cur.take::<8>()?);
        let mut counts = NgramCounts::new(word_len, history_len).map_err(|e| Error::ModelFormat(e.to_string()))?;
        for order in 0..=history_len {
            let n = u64::from_le_bytes(cur.take::<8>()?);
            let table = &mut counts.tables[order];
            table.reserve(n as usize);
            for _ in 0..n {
                let mut k = [PAD; MAX_HISTORY + 1];
                for slot in k.iter_mut().take(order + 1) {
                    *slot = u32::from_le_bytes(cur.take::<4>()?);
                }
                table.insert(k, u64::from_le_bytes(cur.take::<8>()?));
            }
        }
        if cur.pos != body.len() {
            return Err(Error::ModelFormat("trailing bytes after count tables".into()));
        }
        let model = NgramModel::from_counts(counts, Smoothing { method, p_floor })?;
        if model.total_words != total_words {
            return Err(Error::ModelFormat("word total disagrees with unigram table".into()));
        }
        Ok(model)
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice of N bytes"))
    }
}

impl LanguageModel for NgramModel {
    fn score(&self, reads: &ReadSet) -> Result<PerplexityReport> {
        self.perplexity_of_reads(reads)
    }

    fn kind(&self) -> &'static str {
        "ngram"
    }
}
