//! FASTQ/FASTA input and output.
//!
//! Readers are streaming iterators over [`Read`] records; [`ReadSet`] is the
//! materialized, immutable form used by the rest of the pipeline. Files whose
//! name ends in `.gz` are transparently decompressed.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// A single sequencing read. Sequences are upper-case over `{A,C,G,T,N}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Read {
    id: String,
    seq: Vec<u8>,
    qual: Option<Vec<u8>>,
}

fn normalize_base(b: u8) -> Option<u8> {
    match b {
        b'A' | b'a' => Some(b'A'),
        b'C' | b'c' => Some(b'C'),
        b'G' | b'g' => Some(b'G'),
        b'T' | b't' => Some(b'T'),
        b'N' | b'n' => Some(b'N'),
        _ => None,
    }
}

impl Read {
    /// Builds a read, upper-casing the sequence and validating the alphabet
    /// and quality length.
    pub fn new(id: impl Into<String>, seq: &[u8], qual: Option<Vec<u8>>) -> Result<Self> {
        let id = id.into();
        if seq.is_empty() {
            return Err(Error::Argument(format!("read {id}: empty sequence")));
        }
        let mut norm = Vec::with_capacity(seq.len());
        for (i, &b) in seq.iter().enumerate() {
            match normalize_base(b) {
                Some(n) => norm.push(n),
                None => {
                    return Err(Error::Argument(format!(
                        "read {id}: invalid base {:?} at position {i}",
                        b as char
                    )))
                }
            }
        }
        if let Some(q) = &qual {
            if q.len() != norm.len() {
                return Err(Error::Argument(format!(
                    "read {id}: quality length {} != sequence length {}",
                    q.len(),
                    norm.len()
                )));
            }
        }
        Ok(Read { id, seq: norm, qual })
    }

    /// Builds a read from bytes already known to be valid upper-case bases.
    /// Used on hot paths (correction, injection) that preserve the alphabet.
    pub(crate) fn from_parts_unchecked(id: String, seq: Vec<u8>, qual: Option<Vec<u8>>) -> Self {
        debug_assert!(seq.iter().all(|b| b"ACGTN".contains(b)));
        debug_assert!(qual.as_ref().is_none_or(|q| q.len() == seq.len()));
        Read { id, seq, qual }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seq(&self) -> &[u8] {
        &self.seq
    }

    pub fn qual(&self) -> Option<&[u8]> {
        self.qual.as_deref()
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    /// Same id, new sequence. Quality is kept when the length is unchanged
    /// and dropped otherwise.
    pub fn with_seq(&self, seq: Vec<u8>) -> Read {
        let qual = match &self.qual {
            Some(q) if q.len() == seq.len() => Some(q.clone()),
            _ => None,
        };
        Read::from_parts_unchecked(self.id.clone(), seq, qual)
    }
}

/// Ordered, immutable collection of reads.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReadSet {
    reads: Vec<Read>,
    source: String,
}

impl ReadSet {
    pub fn new(reads: Vec<Read>, source: impl Into<String>) -> Self {
        ReadSet {
            reads,
            source: source.into(),
        }
    }

    pub fn reads(&self) -> &[Read] {
        &self.reads
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Read> {
        self.reads.iter()
    }

    pub fn into_reads(self) -> Vec<Read> {
        self.reads
    }

    /// Total number of bases.
    pub fn total_bases(&self) -> usize {
        self.reads.iter().map(Read::len).sum()
    }

    /// Reads a FASTQ or FASTA file (format sniffed from the first record).
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = open(path)?;
        let label = path.display().to_string();
        let first = {
            let buf = reader.fill_buf()?;
            buf.iter().copied().find(|b| !b.is_ascii_whitespace())
        };
        match first {
            None => Ok(ReadSet::new(Vec::new(), label)),
            Some(b'>') => Ok(ReadSet::new(FastaReader::new(reader).collect::<Result<_>>()?, label)),
            Some(_) => Ok(ReadSet::new(FastqReader::new(reader).collect::<Result<_>>()?, label)),
        }
    }
}

impl<'a> IntoIterator for &'a ReadSet {
    type Item = &'a Read;
    type IntoIter = std::slice::Iter<'a, Read>;

    fn into_iter(self) -> Self::IntoIter {
        self.reads.iter()
    }
}

/// Opens `path` for buffered reading, decompressing when the name ends in `.gz`.
pub fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn read_line<R: BufRead>(reader: &mut R, buf: &mut Vec<u8>) -> std::io::Result<bool> {
    buf.clear();
    if reader.read_until(b'\n', buf)? == 0 {
        return Ok(false);
    }
    while matches!(buf.last(), Some(b'\n' | b'\r')) {
        buf.pop();
    }
    Ok(true)
}

fn header_id(header: &[u8]) -> String {
    let text = String::from_utf8_lossy(header);
    text.split_whitespace().next().unwrap_or("").to_string()
}

/// Streaming FASTQ parser (4-line records).
pub struct FastqReader<R> {
    inner: R,
    line: usize,
    record: usize,
    buf: Vec<u8>,
    done: bool,
}

impl<R: BufRead> FastqReader<R> {
    pub fn new(inner: R) -> Self {
        FastqReader {
            inner,
            line: 0,
            record: 0,
            buf: Vec::new(),
            done: false,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            record: self.record,
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<Option<Vec<u8>>> {
        let mut buf = std::mem::take(&mut self.buf);
        let got = read_line(&mut self.inner, &mut buf)?;
        if got {
            self.line += 1;
            let out = buf.clone();
            self.buf = buf;
            Ok(Some(out))
        } else {
            self.buf = buf;
            Ok(None)
        }
    }

    fn next_record(&mut self) -> Result<Option<Read>> {
        // skip blank lines between records
        let header = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some(l) if l.is_empty() => continue,
                Some(l) => break l,
            }
        };
        self.record += 1;
        if header.first() != Some(&b'@') {
            return Err(self.err("expected '@' header"));
        }
        let id = header_id(&header[1..]);
        let seq = self
            .next_line()?
            .ok_or_else(|| self.err("truncated record: missing sequence"))?;
        let sep = self
            .next_line()?
            .ok_or_else(|| self.err("truncated record: missing '+' separator"))?;
        if sep.first() != Some(&b'+') {
            return Err(self.err("expected '+' separator"));
        }
        let qual = self
            .next_line()?
            .ok_or_else(|| self.err("truncated record: missing quality"))?;
        if qual.len() != seq.len() {
            return Err(self.err(format!(
                "quality length mismatch at record {} ({} vs {})",
                self.record,
                qual.len(),
                seq.len()
            )));
        }
        Read::new(id, &seq, Some(qual))
            .map(Some)
            .map_err(|e| self.err(e.to_string()))
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<Read>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Streaming FASTA parser; wrapped sequence lines are joined.
pub struct FastaReader<R> {
    inner: R,
    line: usize,
    record: usize,
    pending: Option<Vec<u8>>,
    buf: Vec<u8>,
    done: bool,
}

impl<R: BufRead> FastaReader<R> {
    pub fn new(inner: R) -> Self {
        FastaReader {
            inner,
            line: 0,
            record: 0,
            pending: None,
            buf: Vec::new(),
            done: false,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            record: self.record,
            line,
            message: message.into(),
        }
    }

    fn next_record(&mut self) -> Result<Option<Read>> {
        let header = match self.pending.take() {
            Some(h) => h,
            None => loop {
                if !read_line(&mut self.inner, &mut self.buf)? {
                    return Ok(None);
                }
                self.line += 1;
                if self.buf.is_empty() {
                    continue;
                }
                if self.buf[0] != b'>' {
                    self.record += 1;
                    return Err(self.err(self.line, "sequence data before '>' header"));
                }
                break self.buf.clone();
            },
        };
        self.record += 1;
        let header_line = self.line;
        let id = header_id(&header[1..]);
        let mut seq = Vec::new();
        loop {
            if !read_line(&mut self.inner, &mut self.buf)? {
                break;
            }
            self.line += 1;
            if self.buf.first() == Some(&b'>') {
                self.pending = Some(self.buf.clone());
                break;
            }
            seq.extend(self.buf.iter().filter(|b| !b.is_ascii_whitespace()));
        }
        Read::new(id, &seq, None)
            .map(Some)
            .map_err(|e| self.err(header_line, e.to_string()))
    }
}

impl<R: BufRead> Iterator for FastaReader<R> {
    type Item = Result<Read>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn parse_fastq<R: BufRead>(input: R) -> Result<ReadSet> {
    let reads = FastqReader::new(input).collect::<Result<Vec<_>>>()?;
    Ok(ReadSet::new(reads, "stream"))
}

pub fn parse_fasta<R: BufRead>(input: R) -> Result<ReadSet> {
    let reads = FastaReader::new(input).collect::<Result<Vec<_>>>()?;
    Ok(ReadSet::new(reads, "stream"))
}

/// Writes reads as 4-line FASTQ. Reads without quality get a constant `I` string.
pub fn write_fastq<W: Write>(reads: &ReadSet, mut sink: W) -> Result<()> {
    for read in reads {
        sink.write_all(b"@")?;
        sink.write_all(read.id.as_bytes())?;
        sink.write_all(b"\n")?;
        sink.write_all(&read.seq)?;
        sink.write_all(b"\n+\n")?;
        match &read.qual {
            Some(q) => sink.write_all(q)?,
            None => sink.write_all(&vec![b'I'; read.seq.len()])?,
        }
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

/// Writes reads as FASTA, wrapping sequence lines at `width` (0 = no wrap).
pub fn write_fasta<W: Write>(reads: &ReadSet, mut sink: W, width: usize) -> Result<()> {
    for read in reads {
        writeln!(sink, ">{}", read.id)?;
        if width == 0 {
            sink.write_all(&read.seq)?;
            sink.write_all(b"\n")?;
        } else {
            for chunk in read.seq.chunks(width) {
                sink.write_all(chunk)?;
                sink.write_all(b"\n")?;
            }
        }
    }
    sink.flush()?;
    Ok(())
}

/// Writes FASTQ to `path`, gzip-compressed when the name ends in `.gz`.
pub fn write_fastq_path(reads: &ReadSet, path: &Path) -> Result<()> {
    let file = std::io::BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|ext| ext == "gz") {
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        write_fastq(reads, &mut enc)?;
        enc.finish()?.flush()?;
        Ok(())
    } else {
        write_fastq(reads, file)
    }
}

/// Uniform sample of `min(n, |reads|)` reads without replacement, in ingest
/// order. Deterministic for a given seed.
pub fn sample_reads(reads: &ReadSet, n: usize, seed: u64) -> ReadSet {
    if n >= reads.len() {
        return reads.clone();
    }
    let mut rng = rng::stream(rng::derive(seed, rng::tag::SAMPLE), 0);
    let mut picked = index::sample(&mut rng, reads.len(), n).into_vec();
    picked.sort_unstable();
    let out = picked.into_iter().map(|i| reads.reads[i].clone()).collect();
    ReadSet::new(out, format!("{} (sample n={n} seed={seed})", reads.source))
}
