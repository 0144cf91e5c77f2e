//! Monte-Carlo experiment drivers: detection statistics for synthetic models,
//! captured-energy sweeps, image rate-distortion curves, coefficient-overlap
//! studies, and rendered aggregate sensing maps.
//!
//! Every driver is deterministic for a fixed master seed: per-trial seeds come
//! from [`trial_seed`], trials run in parallel but results are collected in
//! trial order, and aggregate statistics are folded sequentially.

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::io::GrayImage;
use crate::models::{generate, ModelError, ModelSpec, SignificantSet};
use crate::sensing::{
    k_ahs_sense, k_for_budget, measurement_count, pad_coefficients, pad_dimension, range_sum_oracle,
    reconstruct, MeasurementOracle, SensingConfig, SensingError,
};
use crate::transforms::{permuted, Transform, TransformPair};

/// Number of coefficient ranks tracked by detection reports.
pub const DETECTION_RANKS: usize = 16;

/// Errors from experiment drivers.
#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("image must be square with a power-of-two side, got {width}x{height}")]
    BadImageShape { width: usize, height: usize },
    #[error("transform dimension {transform} does not match signal size {signal}")]
    ShapeMismatch { transform: usize, signal: usize },
    #[error("dimension {0} is not a perfect square")]
    NotSquare(usize),
    #[error("{0} grid must not be empty")]
    EmptyGrid(&'static str),
    #[error("trial count must be at least 1")]
    NoTrials,
}

/// Derives the seed of one trial from the master seed.
///
/// This is the splitmix64 output function applied to
/// `master_seed + (trial + 1) * 0x9E3779B97F4A7C15`, i.e. trial `i` receives
/// the `(i + 1)`-th output of the splitmix64 stream seeded with `master_seed`.
/// Distinct trials therefore get decorrelated seeds while the whole experiment
/// stays reproducible from the single master seed.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut z = master_seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean and sample standard deviation (n - 1 denominator).
///
/// A single observation has standard deviation 0 by convention.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-rank detection probabilities for one synthetic model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    /// Model template; its `seed` field records the master seed.
    pub spec: ModelSpec,
    /// Sensing sparsity parameter used for every trial.
    pub k_sense: usize,
    pub trials: u64,
    /// `probabilities[r]` is the detection rate of the rank-`r+1` coefficient,
    /// for ranks `1..=min(16, N)`. A rank is detected when its coefficient
    /// position appears among the nonzero entries of the estimate.
    pub probabilities: Vec<f64>,
}

impl DetectionReport {
    /// CSV with header `rank,probability`, ranks 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,probability\n");
        for (i, p) in self.probabilities.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, p));
        }
        out
    }
}

/// Runs `trials` independent sensing passes over signals drawn from `spec`
/// and reports how often each of the top-ranked coefficients is recovered.
///
/// Trial `t` draws its signal with seed `trial_seed(master_seed, t)`; the
/// `seed` field of `spec` is ignored for the draws and only echoed in the
/// report. Ranks are ordered by decreasing magnitude with position as the
/// tie break, so for a model with `k < 16` nonzeros the trailing ranks are
/// zero coefficients and never detected.
pub fn detection_experiment(
    spec: &ModelSpec,
    k_sense: usize,
    trials: u64,
    master_seed: u64,
) -> Result<DetectionReport, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    spec.validate()?;
    let cfg = SensingConfig::new(spec.n, k_sense)?;
    let ranks = DETECTION_RANKS.min(spec.n);

    let hits: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<bool>, ExperimentError> {
            let mut s = *spec;
            s.seed = trial_seed(master_seed, t);
            let coeffs = generate(&s)?;
            let oracle = range_sum_oracle(pad_coefficients(&coeffs, cfg.n_padded()))?;
            let (estimate, _) = k_ahs_sense(&oracle, &cfg)?;
            let found: HashSet<usize> = estimate.entries().iter().map(|&(i, _)| i).collect();
            let sig = SignificantSet::from_coefficients(&coeffs, ranks)?;
            Ok(sig.indices().iter().map(|i| found.contains(i)).collect())
        })
        .collect::<Result<_, _>>()?;

    let mut counts = vec![0u64; ranks];
    for trial_hits in &hits {
        for (c, &hit) in counts.iter_mut().zip(trial_hits) {
            *c += u64::from(hit);
        }
    }
    let probabilities = counts.iter().map(|&c| c as f64 / trials as f64).collect();

    Ok(DetectionReport {
        spec: ModelSpec { seed: master_seed, ..*spec },
        k_sense,
        trials,
        probabilities,
    })
}

/// One cell of a captured-energy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub alpha: f64,
    pub k_sense: usize,
    /// Mean over trials of `||estimate||^2 / ||signal||^2`.
    pub energy: f64,
}

/// Captured-energy grid over power-law decay exponents and sensing sparsities.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub n: usize,
    pub trials: u64,
    pub master_seed: u64,
    /// Row-major over the `(alpha, k_sense)` grid, alpha outermost.
    pub rows: Vec<EnergyRow>,
}

impl EnergyReport {
    /// CSV with header `alpha,K,energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,K,energy\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}\n", row.alpha, row.k_sense, row.energy));
        }
        out
    }
}

/// Measures the mean fraction of signal energy captured by the estimate for
/// power-law signals, over the `(alpha, k_sense)` grid.
///
/// At fixed `alpha` the same `trials` signals are reused for every `k_sense`
/// (trial `t` of alpha index `a` uses seed
/// `trial_seed(master_seed, a * trials + t)`), so columns of the grid are
/// paired and energy comparisons across `k_sense` see identical signals.
pub fn energy_experiment(
    alpha_grid: &[f64],
    k_grid: &[usize],
    n: usize,
    trials: u64,
    master_seed: u64,
) -> Result<EnergyReport, ExperimentError> {
    if alpha_grid.is_empty() {
        return Err(ExperimentError::EmptyGrid("alpha"));
    }
    if k_grid.is_empty() {
        return Err(ExperimentError::EmptyGrid("K"));
    }
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }

    let mut rows = Vec::with_capacity(alpha_grid.len() * k_grid.len());
    for (a_idx, &alpha) in alpha_grid.iter().enumerate() {
        ModelSpec::powerlaw(n, alpha, 0).validate()?;
        for &k_sense in k_grid {
            let cfg = SensingConfig::new(n, k_sense)?;
            let ratios: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| -> Result<f64, ExperimentError> {
                    let seed = trial_seed(master_seed, a_idx as u64 * trials + t);
                    let spec = ModelSpec::powerlaw(n, alpha, seed);
                    let coeffs = generate(&spec)?;
                    let oracle = range_sum_oracle(pad_coefficients(&coeffs, cfg.n_padded()))?;
                    let (estimate, _) = k_ahs_sense(&oracle, &cfg)?;
                    let captured: f64 =
                        estimate.entries().iter().map(|&(_, v)| v * v).sum();
                    let total: f64 = coeffs.iter().map(|v| v * v).sum();
                    Ok(captured / total)
                })
                .collect::<Result<_, _>>()?;
            let (energy, _) = mean_std(&ratios);
            rows.push(EnergyRow { alpha, k_sense, energy });
        }
    }

    Ok(EnergyReport { n, trials, master_seed, rows })
}

/// Peak signal-to-noise ratio in dB between an original signal and a
/// reconstruction, both on the 8-bit intensity scale.
///
/// The reconstruction is clipped to `[0, 255]` before the comparison, matching
/// how it would be rendered. A zero-error reconstruction yields
/// `f64::INFINITY`.
pub fn psnr(original: &[f64], reconstruction: &[f64]) -> f64 {
    assert_eq!(
        original.len(),
        reconstruction.len(),
        "psnr requires equal lengths, got {} and {}",
        original.len(),
        reconstruction.len()
    );
    let n = original.len() as f64;
    let mse: f64 = original
        .iter()
        .zip(reconstruction)
        .map(|(&o, &r)| {
            let d = o - r.clamp(0.0, 255.0);
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (255.0 * 255.0 / mse).log10()
}

/// One point of a rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDistortionPoint {
    /// Requested measurement budget as a fraction of the pixel count.
    pub ratio: f64,
    /// Largest sparsity parameter whose measurement count fits the budget.
    pub k_sense: usize,
    /// Actual number of measurements taken at that sparsity.
    pub m: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
}

/// Rate-distortion curve of an image under one transform pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RateDistortionReport {
    pub trials: u64,
    pub master_seed: u64,
    pub points: Vec<RateDistortionPoint>,
}

impl RateDistortionReport {
    /// CSV with header `ratio,K,M,psnr_mean,psnr_std`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ratio,K,M,psnr_mean,psnr_std\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.ratio, p.k_sense, p.m, p.psnr_mean, p.psnr_std
            ));
        }
        out
    }
}

fn square_side(image: &GrayImage) -> Result<usize, ExperimentError> {
    let side = image.side().ok_or(ExperimentError::BadImageShape {
        width: image.width(),
        height: image.height(),
    })?;
    let n = side * side;
    if pad_dimension(n) != n {
        return Err(ExperimentError::BadImageShape {
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(side)
}

fn check_pair_matches(pair: &TransformPair, n: usize) -> Result<(), ExperimentError> {
    if pair.dimension() != n {
        return Err(ExperimentError::ShapeMismatch { transform: pair.dimension(), signal: n });
    }
    Ok(())
}

/// Senses an image at each measurement ratio and reports reconstruction PSNR.
///
/// For every ratio the budget is `round(ratio * N)` measurements and the
/// sparsity parameter is the largest one fitting that budget. Each trial
/// re-randomizes the coefficient order of `pair` with a permutation seed
/// shared across ratios (trial `t` uses `trial_seed(master_seed, t)`), so
/// curve points are paired and differences along the curve are not noise in
/// the permutation draw.
pub fn image_experiment(
    image: &GrayImage,
    pair: &TransformPair,
    ratios: &[f64],
    trials: u64,
    master_seed: u64,
) -> Result<RateDistortionReport, ExperimentError> {
    if ratios.is_empty() {
        return Err(ExperimentError::EmptyGrid("ratio"));
    }
    if trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let side = square_side(image)?;
    let n = side * side;
    check_pair_matches(pair, n)?;
    let x = image.to_f64();

    let mut points = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        let m_target = (ratio * n as f64).round() as usize;
        let k_sense = k_for_budget(n, m_target)?;
        let m = measurement_count(n, k_sense)?;
        let cfg = SensingConfig::new(n, k_sense)?;
        let psnrs: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<f64, ExperimentError> {
                let wrapped = permuted(pair.clone(), trial_seed(master_seed, t));
                let coeffs = wrapped.analyze(&x);
                let oracle = range_sum_oracle(coeffs)?;
                let (estimate, _) = k_ahs_sense(&oracle, &cfg)?;
                debug_assert_eq!(oracle.query_count() as usize, m);
                let recon = reconstruct(&estimate, &wrapped)?;
                Ok(psnr(&x, &recon))
            })
            .collect::<Result<_, _>>()?;
        let (psnr_mean, psnr_std) = mean_std(&psnrs);
        points.push(RateDistortionPoint { ratio, k_sense, m, psnr_mean, psnr_std });
    }

    Ok(RateDistortionReport { trials, master_seed, points })
}

/// Overlap between the estimate's strongest coefficients and the true ones.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub k_sense: usize,
    pub runs: u64,
    /// Per-run count of true top-K positions among the estimate's top K.
    pub overlaps: Vec<usize>,
    pub mean_overlap: f64,
    pub std_overlap: f64,
    /// Sorted magnitudes of the true top-K coefficients from run 0.
    pub optimal_curve: Vec<f64>,
    /// Sorted magnitudes of the estimate's top-K entries from run 0,
    /// zero-padded when the estimate has fewer than K nonzero entries.
    pub estimate_curve: Vec<f64>,
}

impl OverlapReport {
    /// CSV of the run-0 magnitude curves, header `rank,optimal,estimate`.
    pub fn curves_to_csv(&self) -> String {
        let mut out = String::from("rank,optimal,estimate\n");
        for (i, (o, e)) in self.optimal_curve.iter().zip(&self.estimate_curve).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, o, e));
        }
        out
    }
}

/// Magnitude order: descending absolute value, position as the tie break.
fn top_by_magnitude(entries: &[(usize, f64)], k: usize) -> Vec<(usize, f64)> {
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| {
        b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0))
    });
    sorted.truncate(k);
    sorted
}

/// Compares the estimate's K strongest coefficients against the image's true
/// top K over repeated runs with fresh coefficient permutations.
///
/// Run `i` permutes `pair` with seed `trial_seed(master_seed, i)`. The report
/// carries per-run overlap counts plus the run-0 magnitude curves, whose
/// pointwise ordering (estimate below optimal at every rank) is the expected
/// signature of a correct descent.
pub fn captured_coefficients(
    image: &GrayImage,
    pair: &TransformPair,
    k_sense: usize,
    runs: u64,
    master_seed: u64,
) -> Result<OverlapReport, ExperimentError> {
    if runs == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let side = square_side(image)?;
    let n = side * side;
    check_pair_matches(pair, n)?;
    let cfg = SensingConfig::new(n, k_sense)?;
    let x = image.to_f64();

    let per_run: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..runs)
        .into_par_iter()
        .map(|i| -> Result<(usize, Vec<f64>, Vec<f64>), ExperimentError> {
            let wrapped = permuted(pair.clone(), trial_seed(master_seed, i));
            let coeffs = wrapped.analyze(&x);
            let oracle = range_sum_oracle(coeffs.clone())?;
            let (estimate, _) = k_ahs_sense(&oracle, &cfg)?;

            let sig = SignificantSet::from_coefficients(&coeffs, k_sense)?;
            let optimal: HashSet<usize> = sig.indices().iter().copied().collect();
            let top = top_by_magnitude(estimate.entries(), k_sense);
            let overlap = top.iter().filter(|(i, _)| optimal.contains(i)).count();

            let optimal_curve: Vec<f64> = sig.values().iter().map(|v| v.abs()).collect();
            let mut estimate_curve: Vec<f64> = top.iter().map(|&(_, v)| v.abs()).collect();
            estimate_curve.resize(k_sense, 0.0);
            Ok((overlap, optimal_curve, estimate_curve))
        })
        .collect::<Result<_, _>>()?;

    let overlaps: Vec<usize> = per_run.iter().map(|r| r.0).collect();
    let as_f64: Vec<f64> = overlaps.iter().map(|&c| c as f64).collect();
    let (mean_overlap, std_overlap) = mean_std(&as_f64);

    Ok(OverlapReport {
        k_sense,
        runs,
        mean_overlap,
        std_overlap,
        optimal_curve: per_run[0].1.clone(),
        estimate_curve: per_run[0].2.clone(),
        overlaps,
    })
}

/// Aggregate spatial footprint of the measurements taken at one tree level.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMap {
    pub level: usize,
    pub side: usize,
    /// Row-major, max-normalized to `[0, 1]` (all-zero if nothing was sensed).
    pub values: Vec<f64>,
}

impl SensingMap {
    /// Renders the map as an 8-bit image (value 1 maps to 255).
    pub fn to_image(&self) -> GrayImage {
        let scaled: Vec<f64> = self.values.iter().map(|v| v * 255.0).collect();
        GrayImage::from_f64_clipped(self.side, self.side, &scaled)
            .expect("map dimensions match its value buffer")
    }
}

/// Runs one sensing pass on an image and renders, per tree level, the summed
/// absolute sensing vectors of the measurements taken there.
///
/// Levels below the top use the K winning nodes selected at that level; level
/// 0 uses every observed leaf, i.e. the positions actually read out. Maps are
/// returned top level first, matching the descent, and each is max-normalized
/// so renderings are comparable across levels.
pub fn sensing_maps(
    image: &GrayImage,
    pair: &TransformPair,
    k_sense: usize,
    seed: u64,
) -> Result<Vec<SensingMap>, ExperimentError> {
    let side = square_side(image)?;
    let n = side * side;
    check_pair_matches(pair, n)?;
    let cfg = SensingConfig::new(n, k_sense)?;
    let wrapped = permuted(pair.clone(), seed);
    let x = image.to_f64();

    let coeffs = wrapped.analyze(&x);
    let oracle = range_sum_oracle(coeffs)?;
    let (_, log) = k_ahs_sense(&oracle, &cfg)?;

    let mut maps = Vec::with_capacity(log.levels().len());
    for level_log in log.levels() {
        let nodes: Vec<_> = if level_log.level() == 0 {
            level_log.records().iter().map(|&(node, _)| node).collect()
        } else {
            level_log.winners().to_vec()
        };
        let mut acc = vec![0.0; n];
        for node in nodes {
            let mut indicator = vec![0.0; n];
            for i in node.coefficient_range() {
                if i < n {
                    indicator[i] = 1.0;
                }
            }
            let phi = wrapped.analysis_adjoint(&indicator);
            for (a, p) in acc.iter_mut().zip(&phi) {
                *a += p.abs();
            }
        }
        let max = acc.iter().fold(0.0f64, |m, &v| m.max(v));
        if max > 0.0 {
            for v in &mut acc {
                *v /= max;
            }
        }
        maps.push(SensingMap { level: level_log.level(), side, values: acc });
    }
    Ok(maps)
}
