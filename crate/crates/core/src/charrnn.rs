//! Character-level recurrent language model over `{A,C,G,T}`.
//!
//! Each layer follows `s_t = tanh(U x_t + W s_{t-1} + b)`; layer 0 reads the
//! one-hot character and layer `i > 0` reads the state of layer `i - 1`. The
//! top state is projected by `V` to four logits and a softmax gives the
//! distribution of the next character. `N` characters feed a zero input
//! vector and are never scored as targets.
//!
//! Training is plain minibatch SGD on the mean cross-entropy with truncated
//! backpropagation through time (state is carried across unroll windows of
//! the same read) and global gradient-norm clipping.

use std::io::{Read as IoRead, Write};

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, PerplexityReport};
use crate::num::{pairwise_sum, Scalar};
use crate::rng;
use crate::seqio::{sample_reads, ReadSet};

pub const VOCAB: usize = 4;
const MAGIC: &[u8; 4] = b"ATHR";
const FORMAT_VERSION: u16 = 1;
/// Reads per gradient partial sum; fixed so the reduction tree is the same
/// for any thread count.
const GRAD_GROUP: usize = 16;

#[inline]
fn symbol(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

fn encode(seq: &[u8]) -> Vec<Option<usize>> {
    seq.iter().map(|&b| symbol(b)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub layers: usize,
    pub hidden: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub unroll_len: usize,
    pub epochs: usize,
    /// Train / validation / test fractions of the reads.
    pub split: [f64; 3],
    pub clip_norm: f64,
    pub seed: u64,
    /// Accumulate minibatch gradients on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 2,
            hidden: 32,
            minibatch: 200,
            learning_rate: 2e-3,
            unroll_len: 50,
            epochs: 10,
            split: [0.90, 0.05, 0.05],
            clip_norm: 5.0,
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("minibatch", self.minibatch),
            ("unroll_len", self.unroll_len),
            ("epochs", self.epochs),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Argument(format!("{name} must be positive")));
        }
        let sum: f64 = self.split.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.split.iter().any(|&f| f < 0.0) || self.split[0] <= 0.0 {
            return Err(Error::Argument(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.split
            )));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0
        {
            return Err(Error::Argument("learning rate and clip norm must be positive".into()));
        }
        Ok(())
    }
}

/// Weights of a stacked tanh RNN, stored in one flat buffer:
/// per layer `U` (hidden × input), `W` (hidden × hidden), `b` (hidden),
/// then `V` (4 × hidden) and `c` (4). Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnLm<T> {
    layers: usize,
    hidden: usize,
    params: Vec<T>,
}

#[derive(Debug, Clone, Copy)]
struct LayerSlices {
    u: usize,
    w: usize,
    b: usize,
    input: usize,
}

/// Activations of one unrolled window.
struct Trace<T> {
    /// `states[t][l]`: state of layer `l` after step `t`.
    states: Vec<Vec<Vec<T>>>,
    probs: Vec<[T; VOCAB]>,
}

impl<T: Scalar> RnnLm<T> {
    pub fn zeros(layers: usize, hidden: usize) -> Result<Self> {
        if layers == 0 || hidden == 0 {
            return Err(Error::Argument("layers and hidden must be positive".into()));
        }
        Ok(RnnLm {
            layers,
            hidden,
            params: vec![T::zero(); Self::param_count(layers, hidden)],
        })
    }

    /// Uniform initialization in `[-r, r]`, `r = sqrt(1 / fan_in)`; biases zero.
    pub fn random(layers: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(layers, hidden)?;
        let mut rng = rng::stream(rng::derive(seed, rng::tag::RNN_INIT), 0);
        let mut fill = |params: &mut [T], fan_in: usize| {
            let r = (1.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-r, r);
            for p in params {
                *p = T::of(dist.sample(&mut rng));
            }
        };
        for l in 0..layers {
            let s = m.layer(l);
            let (u_len, w_len) = (hidden * s.input, hidden * hidden);
            fill(&mut m.params[s.u..s.u + u_len], s.input);
            fill(&mut m.params[s.w..s.w + w_len], hidden);
        }
        let v = m.v_offset();
        fill(&mut m.params[v..v + VOCAB * hidden], hidden);
        Ok(m)
    }

    pub fn param_count(layers: usize, hidden: usize) -> usize {
        let first = hidden * VOCAB + hidden * hidden + hidden;
        let rest = (layers - 1) * (2 * hidden * hidden + hidden);
        first + rest + VOCAB * hidden + VOCAB
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layer(&self, l: usize) -> LayerSlices {
        let h = self.hidden;
        let input = if l == 0 { VOCAB } else { h };
        let u = if l == 0 {
            0
        } else {
            (h * VOCAB + h * h + h) + (l - 1) * (2 * h * h + h)
        };
        LayerSlices {
            u,
            w: u + h * input,
            b: u + h * input + h * h,
            input,
        }
    }

    fn v_offset(&self) -> usize {
        let last = self.layer(self.layers - 1);
        last.b + self.hidden
    }

    fn zero_state(&self) -> Vec<Vec<T>> {
        vec![vec![T::zero(); self.hidden]; self.layers]
    }

    /// One recurrence step for every layer; returns the new states.
    fn step(&self, x: Option<usize>, prev: &[Vec<T>]) -> Vec<Vec<T>> {
        let h = self.hidden;
        let p = &self.params;
        let mut out: Vec<Vec<T>> = Vec::with_capacity(self.layers);
        for l in 0..self.layers {
            let s = self.layer(l);
            let mut next = vec![T::zero(); h];
            for (i, slot) in next.iter_mut().enumerate() {
                let mut acc = p[s.b + i];
                if l == 0 {
                    if let Some(c) = x {
                        acc += p[s.u + i * VOCAB + c];
                    }
                } else {
                    let below = &out[l - 1];
                    let row = &p[s.u + i * h..s.u + (i + 1) * h];
                    acc += row.iter().zip(below).fold(T::zero(), |a, (&wv, &xv)| a + wv * xv);
                }
                let row = &p[s.w + i * h..s.w + (i + 1) * h];
                acc += row.iter().zip(&prev[l]).fold(T::zero(), |a, (&wv, &sv)| a + wv * sv);
                *slot = acc.tanh();
            }
            out.push(next);
        }
        out
    }

    fn output(&self, top: &[T]) -> [T; VOCAB] {
        let h = self.hidden;
        let v = self.v_offset();
        let c = v + VOCAB * h;
        let mut logits = [T::zero(); VOCAB];
        for (k, logit) in logits.iter_mut().enumerate() {
            let row = &self.params[v + k * h..v + (k + 1) * h];
            *logit = self.params[c + k] + row.iter().zip(top).fold(T::zero(), |a, (&wv, &sv)| a + wv * sv);
        }
        softmax(logits)
    }

    fn run(&self, inputs: &[Option<usize>], init: &[Vec<T>]) -> Trace<T> {
        let mut states = Vec::with_capacity(inputs.len());
        let mut probs = Vec::with_capacity(inputs.len());
        let mut prev = init.to_vec();
        for &x in inputs {
            let next = self.step(x, &prev);
            probs.push(self.output(&next[self.layers - 1]));
            states.push(next.clone());
            prev = next;
        }
        Trace { states, probs }
    }

    /// Next-character distributions: entry `t` predicts the character at
    /// `t + 1`. The initial state is zero.
    pub fn forward(&self, seq: &[u8]) -> Result<Vec<[T; VOCAB]>> {
        let mut inputs = Vec::with_capacity(seq.len());
        for (i, &b) in seq.iter().enumerate() {
            inputs.push(Some(symbol(b).ok_or_else(|| {
                Error::Argument(format!("character {:?} at {i} is not in {{A,C,G,T}}", b as char))
            })?));
        }
        Ok(self.run(&inputs, &self.zero_state()).probs)
    }

    /// Loss and gradient for one window. `targets[t]` is the symbol following
    /// `inputs[t]`. Gradients are added into `grad`; returns
    /// `(sum of -ln p, scored targets, final states)`.
    fn window_grad(
        &self,
        inputs: &[Option<usize>],
        targets: &[Option<usize>],
        init: &[Vec<T>],
        grad: &mut [T],
    ) -> (T, usize, Vec<Vec<T>>) {
        let h = self.hidden;
        let trace = self.run(inputs, init);
        let v = self.v_offset();
        let c = v + VOCAB * h;
        let p = &self.params;
        let mut loss = T::zero();
        let mut scored = 0;
        let mut carry = vec![vec![T::zero(); h]; self.layers];
        for t in (0..inputs.len()).rev() {
            let top = &trace.states[t][self.layers - 1];
            let mut dh_top = carry[self.layers - 1].clone();
            if let Some(y) = targets[t] {
                loss -= trace.probs[t][y].ln();
                scored += 1;
                let mut dy = trace.probs[t];
                dy[y] -= T::one();
                for k in 0..VOCAB {
                    grad[c + k] += dy[k];
                    for j in 0..h {
                        grad[v + k * h + j] += dy[k] * top[j];
                        dh_top[j] += p[v + k * h + j] * dy[k];
                    }
                }
            }
            let mut down: Vec<T> = Vec::new();
            for l in (0..self.layers).rev() {
                let s = self.layer(l);
                let state = &trace.states[t][l];
                let prev_state: &[T] = if t == 0 { &init[l] } else { &trace.states[t - 1][l] };
                let dh: Vec<T> = if l == self.layers - 1 {
                    std::mem::take(&mut dh_top)
                } else {
                    down.iter().zip(&carry[l]).map(|(&a, &b)| a + b).collect()
                };
                let da: Vec<T> = dh.iter().zip(state).map(|(&d, &sv)| d * (T::one() - sv * sv)).collect();
                let mut new_carry = vec![T::zero(); h];
                let mut new_down = if l > 0 { vec![T::zero(); h] } else { Vec::new() };
                for i in 0..h {
                    let a = da[i];
                    if a == T::zero() {
                        continue;
                    }
                    grad[s.b + i] += a;
                    if l == 0 {
                        if let Some(x) = inputs[t] {
                            grad[s.u + i * VOCAB + x] += a;
                        }
                    } else {
                        let below = &trace.states[t][l - 1];
                        for j in 0..h {
                            grad[s.u + i * h + j] += a * below[j];
                            new_down[j] += p[s.u + i * h + j] * a;
                        }
                    }
                    for j in 0..h {
                        grad[s.w + i * h + j] += a * prev_state[j];
                        new_carry[j] += p[s.w + i * h + j] * a;
                    }
                }
                carry[l] = new_carry;
                down = new_down;
            }
        }
        let last = trace.states.last().cloned().unwrap_or_else(|| init.to_vec());
        (loss, scored, last)
    }

    /// Loss and gradient over one whole read with truncated BPTT windows.
    fn read_grad(&self, seq: &[Option<usize>], unroll: usize, grad: &mut [T]) -> (T, usize) {
        if seq.len() < 2 {
            return (T::zero(), 0);
        }
        let mut state = self.zero_state();
        let (mut loss, mut scored) = (T::zero(), 0);
        let mut start = 0;
        while start + 1 < seq.len() {
            let end = (start + unroll).min(seq.len() - 1);
            let (l, n, next) = self.window_grad(&seq[start..end], &seq[start + 1..end + 1], &state, grad);
            loss += l;
            scored += n;
            state = next;
            start = end;
        }
        (loss, scored)
    }

    /// `(sum of -log2 p, scored, skipped)` for one read, zero initial state.
    fn score_encoded(&self, seq: &[Option<usize>]) -> (T, u64, u64) {
        if seq.len() < 2 {
            return (T::zero(), 0, 0);
        }
        let trace = self.run(&seq[..seq.len() - 1], &self.zero_state());
        let (mut sum, mut scored, mut skipped) = (T::zero(), 0, 0);
        for (t, target) in seq[1..].iter().enumerate() {
            match target {
                Some(y) => {
                    sum -= trace.probs[t][*y].log2();
                    scored += 1;
                }
                None => skipped += 1,
            }
        }
        (sum, scored, skipped)
    }

    /// Sum of cross-entropy over a sequence of `{A,C,G,T}` characters.
    pub fn sequence_loss(&self, seq: &[u8]) -> Result<T> {
        self.forward(seq)?;
        Ok(self.score_encoded(&encode(seq)).0 * T::of(std::f64::consts::LN_2))
    }

    /// Analytic gradient of [`Self::sequence_loss`] (single BPTT window).
    pub fn sequence_gradient(&self, seq: &[u8]) -> Result<Vec<T>> {
        self.forward(seq)?;
        let enc = encode(seq);
        let mut grad = vec![T::zero(); self.params.len()];
        if enc.len() >= 2 {
            self.window_grad(&enc[..enc.len() - 1], &enc[1..], &self.zero_state(), &mut grad);
        }
        Ok(grad)
    }

    /// Perplexity over every read (no sampling).
    pub fn perplexity_all(&self, reads: &ReadSet) -> Result<PerplexityReport> {
        let parts: Vec<(T, u64, u64)> = reads
            .reads()
            .par_iter()
            .map(|r| self.score_encoded(&encode(r.seq())))
            .collect();
        let sums: Vec<f64> = parts.iter().map(|p| p.0.as_f64()).collect();
        let scored = parts.iter().map(|p| p.1).sum();
        let skipped = parts.iter().map(|p| p.2).sum();
        let short = parts.iter().filter(|p| p.1 == 0 && p.2 == 0).count() as u64;
        PerplexityReport::from_bits(pairwise_sum(&sums), scored, skipped, short)
    }

    /// Serializes to the `ATHR` format (little endian):
    ///
    /// ```text
    /// magic "ATHR" | version u16 | scalar bytes u8 (4 or 8)
    /// layers u32 | hidden u32 | vocab u32 | n_params u64
    /// payload: per layer U, W, b; then V, c (row-major)
    /// crc32 u32 over all preceding bytes
    /// ```
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let width = std::mem::size_of::<T>();
        let mut buf = Vec::with_capacity(32 + self.params.len() * width);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(width as u8);
        buf.extend_from_slice(&(self.layers as u32).to_le_bytes());
        buf.extend_from_slice(&(self.hidden as u32).to_le_bytes());
        buf.extend_from_slice(&(VOCAB as u32).to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for &p in &self.params {
            if width == 4 {
                buf.extend_from_slice(&(p.as_f64() as f32).to_le_bytes());
            } else {
                buf.extend_from_slice(&p.as_f64().to_le_bytes());
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
        if buf.len() < 8 || &buf[..4] != MAGIC {
            return Err(Error::ModelFormat("not an RNN model file (bad magic)".into()));
        }
        let (body, tail) = buf.split_at(buf.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(Error::ModelFormat(
                "checksum mismatch (truncated or corrupt file)".into(),
            ));
        }
        let header = 4 + 2 + 1 + 4 + 4 + 4 + 8;
        if body.len() < header {
            return Err(Error::ModelFormat("truncated header".into()));
        }
        let version = u16::from_le_bytes([body[4], body[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!("unsupported format version {version}")));
        }
        let width = body[6] as usize;
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (layers, hidden, vocab) = (u32_at(7), u32_at(11), u32_at(15));
        let n = u64::from_le_bytes(body[19..27].try_into().expect("8 bytes")) as usize;
        if vocab != VOCAB || layers == 0 || hidden == 0 || n != Self::param_count(layers, hidden) {
            return Err(Error::ModelFormat("inconsistent architecture header".into()));
        }
        if width != std::mem::size_of::<T>() {
            return Err(Error::ModelFormat(format!(
                "file stores {width}-byte scalars, expected {}",
                std::mem::size_of::<T>()
            )));
        }
        let payload = &body[header..];
        if payload.len() != n * width {
            return Err(Error::ModelFormat("payload size mismatch".into()));
        }
        let params = payload
            .chunks_exact(width)
            .map(|c| match width {
                4 => T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64),
                _ => T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))),
            })
            .collect();
        Ok(RnnLm { layers, hidden, params })
    }
}

fn softmax<T: Scalar>(logits: [T; VOCAB]) -> [T; VOCAB] {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out = logits.map(|z| (z - max).exp());
    let sum = out.iter().copied().fold(T::zero(), |a, b| a + b);
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Per-epoch losses recorded during training (mean cross-entropy in nats).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
    pub test: Option<PerplexityReport>,
    pub train_reads: usize,
    pub validation_reads: usize,
    pub test_reads: usize,
}

pub fn train_rnn<T: Scalar>(corpus: &ReadSet, config: &TrainConfig) -> Result<RnnLm<T>> {
    train_rnn_with_report(corpus, config).map(|(m, _)| m)
}

/// Trains and returns the parameters with the lowest validation loss
/// (training loss when the validation split is empty), plus the loss trace
/// and the test-split perplexity of the returned model.
pub fn train_rnn_with_report<T: Scalar>(corpus: &ReadSet, config: &TrainConfig) -> Result<(RnnLm<T>, TrainReport)> {
    config.validate()?;
    let encoded: Vec<Vec<Option<usize>>> = corpus.iter().map(|r| encode(r.seq())).collect();
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    order.shuffle(&mut rng::stream(rng::derive(config.seed, rng::tag::RNN_SPLIT), 0));
    let n = order.len();
    let n_train = (n as f64 * config.split[0]).floor() as usize;
    let n_val = ((n as f64 * config.split[1]).floor() as usize).min(n - n_train);
    let (train_idx, rest) = order.split_at(n_train);
    let (val_idx, test_idx) = rest.split_at(n_val);
    if train_idx.len() < config.minibatch {
        return Err(Error::Training(format!(
            "{} training reads cannot fill a minibatch of {}",
            train_idx.len(),
            config.minibatch
        )));
    }

    let mut model = RnnLm::<T>::random(config.layers, config.hidden, config.seed)?;
    let lr = T::of(config.learning_rate);
    let clip = T::of(config.clip_norm);
    let mut report = TrainReport {
        train_reads: train_idx.len(),
        validation_reads: val_idx.len(),
        test_reads: test_idx.len(),
        ..Default::default()
    };
    let mut best: Option<(f64, RnnLm<T>)> = None;
    let mut train_order = train_idx.to_vec();
    for epoch in 0..config.epochs {
        train_order.shuffle(&mut rng::stream(
            rng::derive(config.seed, rng::tag::RNN_SHUFFLE),
            epoch as u64,
        ));
        let (mut epoch_loss, mut epoch_scored) = (0.0f64, 0usize);
        for batch in train_order.chunks(config.minibatch) {
            let group_grad = |group: &[usize]| {
                let mut g = vec![T::zero(); model.params.len()];
                let (mut loss, mut scored) = (T::zero(), 0usize);
                for &i in group {
                    let (l, s) = model.read_grad(&encoded[i], config.unroll_len, &mut g);
                    loss += l;
                    scored += s;
                }
                (g, loss, scored)
            };
            let groups: Vec<(Vec<T>, T, usize)> = if config.parallel {
                batch.par_chunks(GRAD_GROUP).map(group_grad).collect()
            } else {
                batch.chunks(GRAD_GROUP).map(group_grad).collect()
            };
            let mut grad = vec![T::zero(); model.params.len()];
            let (mut loss, mut scored) = (T::zero(), 0usize);
            for (g, l, s) in groups {
                grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
                loss += l;
                scored += s;
            }
            if scored == 0 {
                continue;
            }
            epoch_loss += loss.as_f64();
            epoch_scored += scored;
            let scale = T::one() / T::of(scored as f64);
            grad.iter_mut().for_each(|g| *g *= scale);
            let norm = grad.iter().fold(T::zero(), |a, &g| a + g * g).sqrt();
            let factor = if norm > clip { clip / norm } else { T::one() };
            for (p, &g) in model.params.iter_mut().zip(&grad) {
                *p -= lr * factor * g;
            }
        }
        if epoch_scored == 0 {
            return Err(Error::Training("training split has no scoreable characters".into()));
        }
        let train_loss = epoch_loss / epoch_scored as f64;
        report.train_loss.push(train_loss);
        let val_loss = match mean_loss(&model, &encoded, val_idx) {
            Some(v) => v,
            None => mean_loss(&model, &encoded, train_idx).unwrap_or(train_loss),
        };
        report.validation_loss.push(val_loss);
        log::debug!("epoch {epoch}: train {train_loss:.5} validation {val_loss:.5}");
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.clone()));
            report.best_epoch = epoch;
        }
    }
    let (_, model) = best.expect("at least one epoch");
    if !test_idx.is_empty() {
        let test = ReadSet::new(
            test_idx.iter().map(|&i| corpus.reads()[i].clone()).collect(),
            "test split",
        );
        report.test = model.perplexity_all(&test).ok();
    }
    Ok((model, report))
}

fn mean_loss<T: Scalar>(model: &RnnLm<T>, encoded: &[Vec<Option<usize>>], idx: &[usize]) -> Option<f64> {
    let parts: Vec<(T, u64, u64)> = idx.par_iter().map(|&i| model.score_encoded(&encoded[i])).collect();
    let sums: Vec<f64> = parts.iter().map(|p| p.0.as_f64()).collect();
    let scored: u64 = parts.iter().map(|p| p.1).sum();
    (scored > 0).then(|| pairwise_sum(&sums) * std::f64::consts::LN_2 / scored as f64)
}

/// Samples `sample_n` reads uniformly without replacement and reports
/// `exp(mean cross-entropy)` over their scoreable characters.
pub fn perplexity_rnn<T: Scalar>(
    model: &RnnLm<T>,
    reads: &ReadSet,
    sample_n: usize,
    seed: u64,
) -> Result<PerplexityReport> {
    if sample_n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    model.perplexity_all(&sample_reads(reads, sample_n, seed))
}

/// Largest relative discrepancy between the analytic gradient of the
/// summed cross-entropy and central finite differences, over every
/// parameter. The relative error of one entry is
/// `|a - n| / max(|a| + |n|, 1e-6)`; the floor keeps entries whose true
/// gradient is ~0 from dividing round-off by round-off.
pub fn gradient_check(model: &RnnLm<f64>, seq: &[u8], epsilon: f64) -> Result<f64> {
    if seq.len() < 2 || seq.len() > 20 {
        return Err(Error::Argument("gradient check needs 2..=20 characters".into()));
    }
    if !(1e-6..=1e-4).contains(&epsilon) {
        return Err(Error::Argument(format!("epsilon {epsilon} outside [1e-6, 1e-4]")));
    }
    let analytic = model.sequence_gradient(seq)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let up = probe.sequence_loss(seq)?;
        probe.params[i] = orig - epsilon;
        let down = probe.sequence_loss(seq)?;
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

impl<T: Scalar> LanguageModel for RnnLm<T> {
    fn score(&self, reads: &ReadSet) -> Result<PerplexityReport> {
        self.perplexity_all(reads)
    }

    fn kind(&self) -> &'static str {
        "charrnn"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::Read;

    #[test]
    fn shapes_chain() {
        let m = RnnLm::<f64>::zeros(2, 5).unwrap();
        let l0 = m.layer(0);
        let l1 = m.layer(1);
        assert_eq!(l0.w - l0.u, 5 * 4);
        assert_eq!(l1.w - l1.u, 5 * 5);
        assert_eq!(l1.b - l1.w, 5 * 5);
        assert_eq!(m.v_offset() + 4 * 5 + 4, m.params().len());
        assert_eq!(RnnLm::<f64>::param_count(1, 3), 3 * 4 + 9 + 3 + 12 + 4);
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = RnnLm::<f64>::zeros(2, 8).unwrap();
        for p in m.forward(b"ACGTTGCA").unwrap() {
            assert_eq!(p, [0.25; 4]);
        }
    }

    #[test]
    fn forward_rejects_foreign_characters() {
        let m = RnnLm::<f64>::zeros(1, 2).unwrap();
        assert!(m.forward(b"ACNT").is_err());
    }

    #[test]
    fn softmax_normalizes() {
        let m = RnnLm::<f64>::random(2, 6, 3).unwrap();
        for p in m.forward(b"ACGTACGGT").unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
        let m32 = RnnLm::<f32>::random(1, 6, 3).unwrap();
        for p in m32.forward(b"ACGT").unwrap() {
            assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let m = RnnLm::<f64>::random(2, 3, 11).unwrap();
        let mut bytes = Vec::new();
        m.save(&mut bytes).unwrap();
        assert_eq!(RnnLm::<f64>::load(bytes.as_slice()).unwrap(), m);
        assert!(RnnLm::<f32>::load(bytes.as_slice()).is_err());
        assert!(RnnLm::<f64>::load(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn config_validation_and_small_corpus() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.split = [0.5, 0.2, 0.2];
        assert!(c.validate().is_err());
        let reads = ReadSet::new(vec![Read::new("a", b"ACGTACGT", None).unwrap()], "t");
        let err = train_rnn::<f64>(&reads, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn gradient_check_preconditions() {
        let m = RnnLm::<f64>::random(1, 2, 0).unwrap();
        assert!(gradient_check(&m, b"A", 1e-5).is_err());
        assert!(gradient_check(&m, b"ACGT", 1e-2).is_err());
    }
}
