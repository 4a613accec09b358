//! Cross-validation, learning curves, metrics, bands and normality tests.

use std::path::Path;

use rand::seq::{index::sample, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::pipeline::{FittedPipeline, PipelineSpec};
use crate::seed;
use crate::tabular::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold id of each sample.
    pub assignments: Vec<usize>,
    pub seed: u64,
}

/// Shuffle indices, then deal them round-robin into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 2..={n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("metric on zero samples".into()));
    }
    Ok(())
}

pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok(y.iter()
        .zip(yhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64)
}

pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate(
            "R² undefined for a constant target".into(),
        ));
    }
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fraction: f64,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub mse: f64,
    /// `None` when the test fold has a constant target.
    pub r2: Option<f64>,
}

fn subsample_train(train: &[usize], fraction: f64, k: usize, stream: u64) -> Result<Vec<usize>> {
    if fraction >= 1.0 {
        return Ok(train.to_vec());
    }
    let m = (fraction * train.len() as f64).round() as usize;
    if m < k.max(2) {
        return Err(Error::InvalidParameter(format!(
            "fraction {fraction} leaves {m} training rows, fewer than k = {k}"
        )));
    }
    let mut picked: Vec<usize> = sample(&mut seed::rng(stream), train.len(), m)
        .into_iter()
        .map(|i| train[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

fn run_fold(
    spec: &PipelineSpec,
    ds: &Dataset,
    plan: &FoldPlan,
    fold: usize,
    fraction: f64,
    stream: u64,
) -> Result<FoldMetrics> {
    let train = subsample_train(&plan.train_indices(fold), fraction, plan.k, stream)?;
    if train.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "fold {fold} has fewer than 2 training rows"
        )));
    }
    let test = plan.test_indices(fold);
    let fitted = FittedPipeline::fit(spec, &ds.select_rows(&train), ds)?;
    let test_ds = ds.select_rows(&test);
    let pred = fitted.predict(&test_ds)?;
    let y = fitted.target(&test_ds)?;
    let r2 = match r2(&y, &pred) {
        Ok(v) => Some(v),
        Err(Error::Degenerate(_)) => {
            log::warn!("fold {fold}: constant test target, R² omitted");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(FoldMetrics {
        fraction,
        fold,
        n_train: train.len(),
        n_test: test.len(),
        mse: mse(&y, &pred)?,
        r2,
    })
}

/// Per-fold metrics for a given plan and training fraction. Folds run
/// concurrently; the result is ordered by fold id.
pub fn cross_validate_with_plan(
    spec: &PipelineSpec,
    ds: &Dataset,
    plan: &FoldPlan,
    fraction: f64,
    stream_seed: u64,
) -> Result<Vec<FoldMetrics>> {
    if plan.assignments.len() != ds.row_count() {
        return Err(Error::DimensionMismatch {
            expected: ds.row_count(),
            found: plan.assignments.len(),
        });
    }
    (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            run_fold(
                spec,
                ds,
                plan,
                fold,
                fraction,
                seed::derive(stream_seed, &[fold as u64]),
            )
        })
        .collect()
}

pub fn cross_validate(
    spec: &PipelineSpec,
    ds: &Dataset,
    k: usize,
    seed: u64,
) -> Result<Vec<FoldMetrics>> {
    let plan = kfold_split(ds.row_count(), k, seed::derive(seed, &[0]))?;
    cross_validate_with_plan(spec, ds, &plan, 1.0, seed::derive(seed, &[1]))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BandMode {
    /// mean ± one sample standard deviation
    #[default]
    OneSigma,
    /// Student-t interval for the mean at the given two-sided confidence.
    TInterval { confidence: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: f64,
    pub std: f64,
    pub low: f64,
    pub high: f64,
}

pub fn confidence_band(values: &[f64]) -> Result<Band> {
    confidence_band_with(values, BandMode::OneSigma)
}

pub fn confidence_band_with(values: &[f64], mode: BandMode) -> Result<Band> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a band needs at least 2 values".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("band input".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
    let half = match mode {
        BandMode::OneSigma => std,
        BandMode::TInterval { confidence } => {
            if !(confidence > 0.0 && confidence < 1.0) {
                return Err(Error::InvalidParameter(
                    "confidence must lie in (0, 1)".into(),
                ));
            }
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .inverse_cdf(0.5 + confidence / 2.0);
            t * std / (n as f64).sqrt()
        }
    };
    Ok(Band {
        mean,
        std,
        low: mean - half,
        high: mean + half,
    })
}

/// KS distance between the sample and a normal with the sample's mean and
/// standard deviation (n-1 denominator).
pub fn ks_statistic(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidParameter(
            "KS test needs at least 3 values".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KS input".into()));
    }
    let band = confidence_band(values)?;
    if band.std == 0.0 {
        return Err(Error::Degenerate("zero-variance sample".into()));
    }
    let normal =
        Normal::new(band.mean, band.std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max))
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (1..=20)
                .map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp())
                .sum::<f64>();
        1.0 - cdf
    } else {
        2.0 * (1..=100)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// Normality p-value: the asymptotic Kolmogorov distribution evaluated at
/// `(√n + 0.12 + 0.11/√n)·D`, with parameters estimated from the sample.
/// Estimating the parameters makes this p-value conservative (too large).
pub fn ks_normality(values: &[f64]) -> Result<f64> {
    let d = ks_statistic(values)?;
    let sn = (values.len() as f64).sqrt();
    Ok(kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub fraction: f64,
    pub metric: String,
    pub band: Band,
    /// `None` when the fold values have zero variance or too few folds.
    pub ks_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldMetrics>,
    pub aggregates: Vec<Aggregate>,
}

fn aggregate(fraction: f64, metric: &str, values: &[f64], mode: BandMode) -> Result<Aggregate> {
    let ks_p = match ks_normality(values) {
        Ok(p) => Some(p),
        Err(Error::Degenerate(_) | Error::InvalidParameter(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Aggregate {
        fraction,
        metric: metric.to_string(),
        band: confidence_band_with(values, mode)?,
        ks_p,
    })
}

pub fn summarize(folds: Vec<FoldMetrics>, fractions: &[f64], mode: BandMode) -> Result<CvReport> {
    let mut aggregates = Vec::new();
    for &f in fractions {
        let at: Vec<&FoldMetrics> = folds.iter().filter(|m| m.fraction == f).collect();
        let mses: Vec<f64> = at.iter().map(|m| m.mse).collect();
        aggregates.push(aggregate(f, "mse", &mses, mode)?);
        let r2s: Vec<f64> = at.iter().filter_map(|m| m.r2).collect();
        if r2s.len() >= 2 {
            aggregates.push(aggregate(f, "r2", &r2s, mode)?);
        }
    }
    Ok(CvReport { folds, aggregates })
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::InvalidParameter("no fractions given".into()));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::InvalidParameter(
            "fractions must lie in (0, 1]".into(),
        ));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "fractions must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Cross-validate at each training fraction over one shared fold plan.
pub fn learning_curve(
    spec: &PipelineSpec,
    ds: &Dataset,
    k: usize,
    fractions: &[f64],
    seed: u64,
) -> Result<CvReport> {
    learning_curve_with(spec, ds, k, fractions, seed, BandMode::OneSigma)
}

pub fn learning_curve_with(
    spec: &PipelineSpec,
    ds: &Dataset,
    k: usize,
    fractions: &[f64],
    seed: u64,
    mode: BandMode,
) -> Result<CvReport> {
    check_fractions(fractions)?;
    let plan = kfold_split(ds.row_count(), k, seed::derive(seed, &[0]))?;
    let mut folds = Vec::new();
    for (i, &f) in fractions.iter().enumerate() {
        // fraction 1.0 uses the same streams as `cross_validate`
        let stream = if f >= 1.0 {
            seed::derive(seed, &[1])
        } else {
            seed::derive(seed, &[2, i as u64])
        };
        folds.extend(cross_validate_with_plan(spec, ds, &plan, f, stream)?);
    }
    summarize(folds, fractions, mode)
}

impl CvReport {
    pub fn aggregate(&self, fraction: f64, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.fraction == fraction && a.metric == metric)
    }

    /// `fraction,fold,metric,value`
    pub fn write_folds<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fraction", "fold", "metric", "value"])?;
        for m in &self.folds {
            let (fr, fo) = (m.fraction.to_string(), m.fold.to_string());
            w.write_record([fr.as_str(), fo.as_str(), "mse", &m.mse.to_string()])?;
            if let Some(r) = m.r2 {
                w.write_record([fr.as_str(), fo.as_str(), "r2", &r.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// `fraction,metric,mean,std,low,high,ks_p`
    pub fn write_aggregates<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fraction", "metric", "mean", "std", "low", "high", "ks_p"])?;
        for a in &self.aggregates {
            w.write_record([
                a.fraction.to_string(),
                a.metric.clone(),
                a.band.mean.to_string(),
                a.band.std.to_string(),
                a.band.low.to_string(),
                a.band.high.to_string(),
                a.ks_p.map(|p| p.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn export(&self, folds: impl AsRef<Path>, aggregates: impl AsRef<Path>) -> Result<()> {
        let (p, q) = (folds.as_ref(), aggregates.as_ref());
        self.write_folds(std::fs::File::create(p).map_err(|e| Error::io(p, e))?)?;
        self.write_aggregates(std::fs::File::create(q).map_err(|e| Error::io(q, e))?)
    }
}
