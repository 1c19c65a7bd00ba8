//! Non-overlapping word segmentation of reads.
//!
//! A read of length `l` yields `floor(l / L_s)` words starting at offset 0;
//! the trailing remainder is dropped. Words containing `N` are not emitted
//! but keep their slot, so the n-gram model can reset its history there.

use std::fmt;

use crate::error::{Error, Result};
use crate::seqio::{Read, ReadSet};

/// Longest word that packs into a [`Word`].
pub const MAX_WORD_LEN: usize = 12;
pub const DEFAULT_WORD_LEN: usize = 7;

/// 2-bit packed nucleotide word (`A=0, C=1, G=2, T=3`, first base most
/// significant). Numeric order equals lexicographic order for equal lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub u32);

#[inline]
pub(crate) fn base_code(b: u8) -> Option<u32> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

impl Word {
    /// Packs an `{A,C,G,T}` word; `None` if any other symbol is present.
    pub fn encode(bases: &[u8]) -> Option<Word> {
        debug_assert!(bases.len() <= MAX_WORD_LEN);
        let mut code = 0u32;
        for &b in bases {
            code = (code << 2) | base_code(b)?;
        }
        Some(Word(code))
    }

    pub fn decode(self, len: usize) -> String {
        (0..len)
            .rev()
            .map(|i| b"ACGT"[((self.0 >> (2 * i)) & 3) as usize] as char)
            .collect()
    }
}

/// Words of one read, in read order. `None` slots are words that contained
/// a non-ACGT symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSequence {
    read_id: String,
    word_len: usize,
    slots: Vec<Option<Word>>,
}

impl WordSequence {
    pub fn new(read_id: impl Into<String>, word_len: usize, slots: Vec<Option<Word>>) -> Self {
        WordSequence {
            read_id: read_id.into(),
            word_len,
            slots,
        }
    }

    /// Builds a sequence from textual words (test and tooling convenience).
    pub fn from_strs(read_id: &str, words: &[&str]) -> Result<Self> {
        let word_len = words.first().map_or(0, |w| w.len());
        let mut slots = Vec::with_capacity(words.len());
        for w in words {
            if w.len() != word_len || word_len == 0 || word_len > MAX_WORD_LEN {
                return Err(Error::Argument(format!("bad word {w:?}")));
            }
            slots.push(Word::encode(w.as_bytes()));
        }
        Ok(WordSequence::new(read_id, word_len, slots))
    }

    pub fn read_id(&self) -> &str {
        &self.read_id
    }

    pub fn word_len(&self) -> usize {
        self.word_len
    }

    pub fn slots(&self) -> &[Option<Word>] {
        &self.slots
    }

    /// The emitted words, skipping excluded slots.
    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        self.slots.iter().flatten().copied()
    }

    pub fn word_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// Words excluded because they contained a non-ACGT symbol.
    pub fn skipped(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }
}

impl fmt::Display for WordSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let words: Vec<String> = self
            .slots
            .iter()
            .map(|s| match s {
                Some(w) => w.decode(self.word_len),
                None => "<skip>".into(),
            })
            .collect();
        write!(f, "{}: {}", self.read_id, words.join(" "))
    }
}

fn check_word_len(word_len: usize) -> Result<()> {
    if word_len == 0 || word_len > MAX_WORD_LEN {
        return Err(Error::Argument(format!(
            "word length must be in 1..={MAX_WORD_LEN}, got {word_len}"
        )));
    }
    Ok(())
}

pub fn segment_read(read: &Read, word_len: usize) -> Result<WordSequence> {
    check_word_len(word_len)?;
    if word_len > read.len() {
        return Err(Error::Argument(format!(
            "word length {word_len} exceeds read length {} ({})",
            read.len(),
            read.id()
        )));
    }
    let slots = read.seq().chunks_exact(word_len).map(Word::encode).collect();
    Ok(WordSequence::new(read.id(), word_len, slots))
}

/// Lazily segments every read of a set. Reads shorter than the word length
/// are skipped and counted in [`CorpusSegments::short_reads`].
pub struct CorpusSegments<'a> {
    reads: std::slice::Iter<'a, Read>,
    word_len: usize,
    short_reads: usize,
}

impl CorpusSegments<'_> {
    pub fn short_reads(&self) -> usize {
        self.short_reads
    }
}

impl Iterator for CorpusSegments<'_> {
    type Item = WordSequence;

    fn next(&mut self) -> Option<WordSequence> {
        for read in self.reads.by_ref() {
            match segment_read(read, self.word_len) {
                Ok(ws) => return Some(ws),
                Err(_) => self.short_reads += 1,
            }
        }
        None
    }
}

pub fn segment_corpus(reads: &ReadSet, word_len: usize) -> Result<CorpusSegments<'_>> {
    check_word_len(word_len)?;
    Ok(CorpusSegments {
        reads: reads.reads().iter(),
        word_len,
        short_reads: 0,
    })
}

/// Validates a user-facing word length (4..=12); warns below 5 where word
/// frequencies become too flat to discriminate.
pub fn validate_config_word_len(word_len: usize) -> Result<()> {
    if !(4..=MAX_WORD_LEN).contains(&word_len) {
        return Err(Error::Argument(format!(
            "word length must be in 4..={MAX_WORD_LEN}, got {word_len}"
        )));
    }
    if word_len < 5 {
        log::warn!("word length {word_len} < 5: word frequencies are nearly uniform");
    }
    Ok(())
}
