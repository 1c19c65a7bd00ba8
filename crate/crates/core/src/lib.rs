//! Reference-free tuning of sequencing-read error-correction parameters.
//!
//! A language model (word n-gram or character RNN) is trained on the
//! uncorrected reads. Each candidate parameter value is scored by correcting
//! a fixed sample of reads and measuring the perplexity of the result under
//! that model; a hill climb then walks to the perplexity minimum.
//!
//! Module map:
//!
//! * [`seqio`]: FASTQ/FASTA reading, writing and sampling.
//! * [`segmenter`]: non-overlapping word segmentation for the n-gram model.
//! * [`ngram`]: Witten-Bell interpolated n-gram model and perplexity.
//! * [`charrnn`]: character-level tanh RNN trained with truncated BPTT.
//! * [`injector`]: synthetic genomes, clean read sampling, error injection.
//! * [`ecsim`]: k-spectrum corrector, external tool adapter, EC gain.
//! * [`tuner`]: memoized hill climbing with restarts.
//! * [`metrics`]: Pearson correlation and parameter sweep reports.

pub mod charrnn;
pub mod ecsim;
pub mod error;
pub mod injector;
pub mod lm;
pub mod metrics;
pub mod ngram;
pub mod num;
pub mod rng;
pub mod segmenter;
pub mod seqio;
pub mod tuner;

pub use error::{Error, Result};
pub use lm::LanguageModel;
pub use num::Scalar;
pub use seqio::{Read, ReadSet};

/// Double-precision RNN language model; the default for training and scoring.
pub type RnnLm64 = charrnn::RnnLm<f64>;
/// Single-precision RNN language model.
pub type RnnLm32 = charrnn::RnnLm<f32>;
/// Hill-climb outcome over double-precision perplexities.
pub type SearchResult64 = tuner::SearchResult<f64>;
/// Sweep report over double-precision values.
pub type SweepReport64 = metrics::SweepReport<f64>;
