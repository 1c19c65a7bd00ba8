//! Pearson correlation and parameter sweep reports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecsim::{ec_gain, Corrector};
use crate::error::{Error, Result};
use crate::lm::LanguageModel;
use crate::num::Scalar;
use crate::seqio::ReadSet;

/// Pearson product-moment correlation. Fewer than three points, unequal
/// lengths or a constant series is an error rather than NaN.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() {
        return Err(Error::Statistics(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::Statistics(format!("need at least 3 points, got {}", xs.len())));
    }
    let n = T::of(xs.len() as f64);
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::Statistics("zero variance".into()));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub value: i64,
    pub perplexity_ngram: Option<T>,
    pub perplexity_rnn: Option<T>,
    pub gain: Option<T>,
    pub quality: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation<T> {
    pub perplexity: String,
    pub quality: String,
    pub r: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport<T> {
    pub rows: Vec<SweepRow<T>>,
    pub correlations: Vec<Correlation<T>>,
}

/// Fixed TSV column order.
pub const TSV_COLUMNS: [&str; 5] = ["value", "perplexity_ngram", "perplexity_rnn", "gain", "quality"];

type Column<T> = (&'static str, fn(&SweepRow<T>) -> Option<T>);

fn perplexity_columns<T: Scalar>() -> [Column<T>; 2] {
    [
        ("perplexity_ngram", |r| r.perplexity_ngram),
        ("perplexity_rnn", |r| r.perplexity_rnn),
    ]
}

fn quality_columns<T: Scalar>() -> [Column<T>; 2] {
    [("gain", |r| r.gain), ("quality", |r| r.quality)]
}

impl<T: Scalar> SweepReport<T> {
    /// Sorts rows by value and correlates every perplexity column with every
    /// quality column that is present on all rows.
    pub fn from_rows(mut rows: Vec<SweepRow<T>>) -> Result<Self> {
        rows.sort_by_key(|r| r.value);
        let full = |get: fn(&SweepRow<T>) -> Option<T>| -> Option<Vec<T>> { rows.iter().map(get).collect() };
        let mut correlations = Vec::new();
        for (pname, pget) in perplexity_columns::<T>() {
            let Some(ps) = full(pget) else { continue };
            for (qname, qget) in quality_columns::<T>() {
                let Some(qs) = full(qget) else { continue };
                let r =
                    pearson(&ps, &qs).map_err(|e| Error::Statistics(format!("correlation {pname} ~ {qname}: {e}")))?;
                correlations.push(Correlation {
                    perplexity: pname.into(),
                    quality: qname.into(),
                    r,
                });
            }
        }
        Ok(SweepReport { rows, correlations })
    }

    pub fn correlation(&self, perplexity: &str, quality: &str) -> Option<T> {
        self.correlations
            .iter()
            .find(|c| c.perplexity == perplexity && c.quality == quality)
            .map(|c| c.r)
    }

    /// Writes the rows as TSV in [`TSV_COLUMNS`] order; absent cells are `NA`.
    pub fn write_tsv<W: Write>(&self, sink: W) -> Result<()> {
        write_rows_tsv(&self.rows, sink)
    }
}

pub fn write_rows_tsv<T: Scalar, W: Write>(rows: &[SweepRow<T>], mut sink: W) -> Result<()> {
    writeln!(sink, "{}", TSV_COLUMNS.join("\t"))?;
    let cell = |v: Option<T>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
    for r in rows {
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}",
            r.value,
            cell(r.perplexity_ngram),
            cell(r.perplexity_rnn),
            cell(r.gain),
            cell(r.quality)
        )?;
    }
    sink.flush()?;
    Ok(())
}

/// External quality measure of a corrected read set (e.g. an alignment rate
/// computed by another tool).
pub type QualityFn<'a> = &'a (dyn Fn(&ReadSet, i64) -> Result<f64> + Sync);

#[derive(Default, Clone, Copy)]
pub struct SweepInputs<'a> {
    pub ngram: Option<&'a dyn LanguageModel>,
    pub rnn: Option<&'a dyn LanguageModel>,
    /// Ground truth for EC gain.
    pub truth: Option<&'a ReadSet>,
    pub quality: Option<QualityFn<'a>>,
}

/// Corrects `dataset` at each value and records perplexities plus gain
/// and/or external quality. Values are de-duplicated and evaluated in
/// parallel; rows come back sorted by value.
pub fn sweep_rows(
    dataset: &ReadSet,
    inputs: SweepInputs<'_>,
    corrector: &dyn Corrector,
    values: &[i64],
) -> Result<Vec<SweepRow<f64>>> {
    if values.is_empty() {
        return Err(Error::Argument("no sweep values".into()));
    }
    if inputs.ngram.is_none() && inputs.rnn.is_none() {
        return Err(Error::Argument("sweep needs at least one language model".into()));
    }
    let mut values = values.to_vec();
    values.sort_unstable();
    values.dedup();
    values
        .par_iter()
        .map(|&value| {
            let corrected = corrector.correct(dataset, value).map_err(|e| Error::Corrector {
                value,
                source: Box::new(e),
            })?;
            let score = |lm: Option<&dyn LanguageModel>| -> Result<Option<f64>> {
                lm.map(|m| m.score(&corrected).map(|r| r.avg_perplexity)).transpose()
            };
            Ok(SweepRow {
                value,
                perplexity_ngram: score(inputs.ngram)?,
                perplexity_rnn: score(inputs.rnn)?,
                gain: inputs.truth.map(|t| ec_gain(dataset, &corrected, t)).transpose()?,
                quality: inputs.quality.map(|q| q(&corrected, value)).transpose()?,
            })
        })
        .collect()
}

pub fn sweep(
    dataset: &ReadSet,
    inputs: SweepInputs<'_>,
    corrector: &dyn Corrector,
    values: &[i64],
) -> Result<SweepReport<f64>> {
    SweepReport::from_rows(sweep_rows(dataset, inputs, corrector, values)?)
}
