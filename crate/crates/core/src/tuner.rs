//! Perplexity-guided hill climbing over one integer parameter.
//!
//! From a start value the climb evaluates the current point and its two
//! neighbors at distance `step`. It stops when the current point is strictly
//! better than both; otherwise it moves to the better neighbor (ties go to
//! the smaller value) until the iteration budget runs out. Neighbors outside
//! `[lower, upper]` are never evaluated and count as `+inf`. All values are
//! memoized, so a climb evaluates at most `floor((upper - lower) / step) + 1`
//! distinct points.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::charrnn::{train_rnn, TrainConfig};
use crate::ecsim::Corrector;
use crate::error::{Error, Result};
use crate::lm::LanguageModel;
use crate::ngram;
use crate::num::Scalar;
use crate::seqio::{sample_reads, ReadSet};

pub const DEFAULT_STEP: i64 = 2;
pub const DEFAULT_ITER_MAX: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lower: i64,
    pub upper: i64,
    pub step: i64,
    pub initials: Vec<i64>,
    pub iter_max: usize,
}

impl SearchSpace {
    /// Range `[lower, upper]` with one start at the midpoint.
    pub fn new(lower: i64, upper: i64, step: i64) -> Result<Self> {
        let space = SearchSpace {
            lower,
            upper,
            step,
            initials: vec![lower + (upper - lower) / 2],
            iter_max: DEFAULT_ITER_MAX,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn with_initials(mut self, initials: Vec<i64>) -> Result<Self> {
        self.initials = initials;
        self.validate()?;
        Ok(self)
    }

    pub fn with_iter_max(mut self, iter_max: usize) -> Self {
        self.iter_max = iter_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower > self.upper {
            return Err(Error::Argument(format!("empty range [{}, {}]", self.lower, self.upper)));
        }
        if self.step < 1 {
            return Err(Error::Argument(format!("step must be >= 1, got {}", self.step)));
        }
        if self.initials.is_empty() {
            return Err(Error::Argument("at least one initial value is required".into()));
        }
        if let Some(v) = self.initials.iter().find(|v| !self.contains(**v)) {
            return Err(Error::Argument(format!(
                "initial value {v} outside [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.lower..=self.upper).contains(&v)
    }

    /// Upper bound on distinct evaluations of one climb.
    pub fn max_evaluations(&self) -> usize {
        ((self.upper - self.lower) / self.step) as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LocalMinimum,
    IterationBudget,
    /// Local minimum at a point whose other neighbor lies outside the range.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T> {
    pub value: i64,
    pub perplexity: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult<T> {
    pub start: i64,
    pub best_value: i64,
    pub best_perplexity: T,
    /// Distinct evaluated points in first-evaluation order.
    pub trace: Vec<TracePoint<T>>,
    /// Centers visited, in order.
    pub path: Vec<i64>,
    pub evaluations: usize,
    pub termination: Termination,
}

fn key<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        T::infinity()
    } else {
        x
    }
}

/// Hill climb of `objective` from `start`. The objective is called at most
/// once per value.
pub fn hill_climb<T, F>(mut objective: F, start: i64, space: &SearchSpace, iter_max: usize) -> Result<SearchResult<T>>
where
    T: Scalar,
    F: FnMut(i64) -> Result<T>,
{
    space.validate()?;
    if !space.contains(start) {
        return Err(Error::Argument(format!(
            "start {start} outside [{}, {}]",
            space.lower, space.upper
        )));
    }
    let mut seen: BTreeMap<i64, T> = BTreeMap::new();
    let mut trace: Vec<TracePoint<T>> = Vec::new();
    let mut eval = |v: i64| -> Result<T> {
        if let Some(&f) = seen.get(&v) {
            return Ok(f);
        }
        let f = objective(v)?;
        seen.insert(v, f);
        trace.push(TracePoint {
            value: v,
            perplexity: f,
        });
        Ok(f)
    };

    let mut path = Vec::new();
    let mut current = start;
    let mut budget = iter_max;
    let termination = loop {
        path.push(current);
        let here = key(eval(current)?);
        let (left, right) = (current - space.step, current + space.step);
        let f_left = if space.contains(left) {
            key(eval(left)?)
        } else {
            T::infinity()
        };
        let f_right = if space.contains(right) {
            key(eval(right)?)
        } else {
            T::infinity()
        };
        if here < f_left && here < f_right {
            let clamped = !space.contains(left) || !space.contains(right);
            break if clamped {
                Termination::Boundary
            } else {
                Termination::LocalMinimum
            };
        }
        if budget == 0 {
            break Termination::IterationBudget;
        }
        budget -= 1;
        current = if f_left <= f_right { left } else { right };
    };

    let best = trace
        .iter()
        .min_by(|a, b| {
            key(a.perplexity)
                .partial_cmp(&key(b.perplexity))
                .expect("no NaN after key")
                .then(a.value.cmp(&b.value))
        })
        .copied()
        .expect("start was evaluated");
    Ok(SearchResult {
        start,
        best_value: best.value,
        best_perplexity: best.perplexity,
        evaluations: trace.len(),
        trace,
        path,
        termination,
    })
}

/// Memoized `f(value) = perplexity(LM, corrector(sample, value))`.
pub struct PointEvaluator<'a> {
    lm: &'a dyn LanguageModel,
    corrector: &'a dyn Corrector,
    sample: &'a ReadSet,
    memo: Mutex<BTreeMap<i64, f64>>,
    corrections: AtomicUsize,
}

impl<'a> PointEvaluator<'a> {
    pub fn new(lm: &'a dyn LanguageModel, corrector: &'a dyn Corrector, sample: &'a ReadSet) -> Self {
        PointEvaluator {
            lm,
            corrector,
            sample,
            memo: Mutex::new(BTreeMap::new()),
            corrections: AtomicUsize::new(0),
        }
    }

    pub fn evaluate(&self, value: i64) -> Result<f64> {
        if let Some(&f) = self.memo.lock().expect("memo lock").get(&value) {
            return Ok(f);
        }
        if self.sample.is_empty() {
            return Err(Error::Argument("cannot evaluate on an empty sample".into()));
        }
        self.corrections.fetch_add(1, Ordering::Relaxed);
        let corrected = self
            .corrector
            .correct(self.sample, value)
            .map_err(|e| Error::Corrector {
                value,
                source: Box::new(e),
            })?;
        let f = self.lm.score(&corrected)?.avg_perplexity;
        self.memo.lock().expect("memo lock").insert(value, f);
        Ok(f)
    }

    /// Number of corrector invocations so far (memo misses).
    pub fn corrections(&self) -> usize {
        self.corrections.load(Ordering::Relaxed)
    }
}

pub fn evaluate_point(lm: &dyn LanguageModel, corrector: &dyn Corrector, sample: &ReadSet, value: i64) -> Result<f64> {
    PointEvaluator::new(lm, corrector, sample).evaluate(value)
}

pub fn find_optimal_k(
    sample: &ReadSet,
    lm: &dyn LanguageModel,
    corrector: &dyn Corrector,
    k_init: i64,
    space: &SearchSpace,
    iter_max: usize,
) -> Result<SearchResult<f64>> {
    let evaluator = PointEvaluator::new(lm, corrector, sample);
    hill_climb(|v| evaluator.evaluate(v), k_init, space, iter_max)
}

/// Which language model [`tune`] trains on the full dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmSpec {
    Ngram { word_len: usize, history_len: usize },
    Charrnn(TrainConfig),
}

impl Default for LmSpec {
    fn default() -> Self {
        LmSpec::Ngram {
            word_len: crate::segmenter::DEFAULT_WORD_LEN,
            history_len: ngram::DEFAULT_HISTORY,
        }
    }
}

impl LmSpec {
    pub fn train(&self, dataset: &ReadSet) -> Result<Box<dyn LanguageModel>> {
        Ok(match self {
            LmSpec::Ngram { word_len, history_len } => {
                Box::new(ngram::train_on_reads(dataset, *word_len, *history_len)?)
            }
            LmSpec::Charrnn(cfg) => Box::new(train_rnn::<f64>(dataset, cfg)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub best_value: i64,
    pub best_perplexity: f64,
    pub lm_kind: String,
    pub sample_size: usize,
    pub lower: i64,
    pub upper: i64,
    pub step: i64,
    pub iter_max: usize,
    /// Corrector invocations on the sample across all restarts.
    pub corrections: usize,
    pub restarts: Vec<SearchResult<f64>>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub report: TuneReport,
    /// The full dataset corrected at the best value.
    pub corrected: ReadSet,
}

/// Climbs from every initial value against an already trained model and
/// corrects the full dataset at the best value found.
pub fn tune_with_model(
    dataset: &ReadSet,
    lm: &dyn LanguageModel,
    corrector: &dyn Corrector,
    space: &SearchSpace,
    sample_n: usize,
    seed: u64,
) -> Result<TuneOutcome> {
    space.validate()?;
    if dataset.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    let sample = sample_reads(dataset, sample_n, seed);
    let evaluator = PointEvaluator::new(lm, corrector, &sample);
    let restarts = space
        .initials
        .iter()
        .map(|&start| hill_climb(|v| evaluator.evaluate(v), start, space, space.iter_max))
        .collect::<Result<Vec<_>>>()?;
    let best = restarts
        .iter()
        .min_by(|a, b| {
            key(a.best_perplexity)
                .partial_cmp(&key(b.best_perplexity))
                .expect("no NaN after key")
                .then(a.best_value.cmp(&b.best_value))
        })
        .expect("at least one restart");
    let (best_value, best_perplexity) = (best.best_value, best.best_perplexity);
    let corrected = corrector.correct(dataset, best_value).map_err(|e| Error::Corrector {
        value: best_value,
        source: Box::new(e),
    })?;
    Ok(TuneOutcome {
        report: TuneReport {
            best_value,
            best_perplexity,
            lm_kind: lm.kind().to_string(),
            sample_size: sample.len(),
            lower: space.lower,
            upper: space.upper,
            step: space.step,
            iter_max: space.iter_max,
            corrections: evaluator.corrections(),
            restarts,
        },
        corrected,
    })
}

/// Trains the chosen model on the whole dataset, then [`tune_with_model`].
pub fn tune(
    dataset: &ReadSet,
    lm_spec: &LmSpec,
    corrector: &dyn Corrector,
    space: &SearchSpace,
    sample_n: usize,
    seed: u64,
) -> Result<TuneOutcome> {
    let lm = lm_spec.train(dataset)?;
    tune_with_model(dataset, lm.as_ref(), corrector, space, sample_n, seed)
}
