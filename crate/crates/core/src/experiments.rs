//! Monte Carlo experiments: null calibration, power curves, scaling fits of
//! the detection boundary and the longest-head-run law.
//!
//! Trial `i` of an experiment with seed `s` always uses stream `i` of `s`
//! (see [`trial_rng`]). Results are aggregated as counts, so they do not
//! depend on how rayon schedules the trials.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counter::{significant_strips, PointCloud};
use crate::error::{invalid, Error, Result};
use crate::holder::{ArcLength, CurveSpec};
use crate::runs::{detect_with, longest_significant_path, ScanMode, SignificanceGraph};
use crate::strip::all_scales;
use crate::synth::{sample_mixture_from, sample_null_from, trial_rng};
use crate::thresholds::{binomial_tail, derive_thresholds, ThresholdConfig, ThresholdSet};

/// Levels reported by [`calibrate_null`].
pub const CALIBRATION_LEVELS: [f64; 2] = [0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CalibrationReport {
    pub n: usize,
    pub nstar: u32,
    pub trials: usize,
    /// `Lmax` value to number of trials.
    pub histogram: BTreeMap<usize, usize>,
    /// `(level, L)` with `L` the smallest length such that the empirical
    /// `P{Lmax > L}` is at most `level`.
    pub quantiles: Vec<(f64, usize)>,
}

impl CalibrationReport {
    fn from_lmax(n: usize, nstar: u32, lmax: &[usize]) -> Self {
        let mut histogram = BTreeMap::new();
        for &l in lmax {
            *histogram.entry(l).or_insert(0) += 1;
        }
        let mut report = Self {
            n,
            nstar,
            trials: lmax.len(),
            histogram,
            quantiles: Vec::new(),
        };
        report.quantiles = CALIBRATION_LEVELS.iter().map(|&lv| (lv, report.cutoff(lv))).collect();
        report
    }

    /// Empirical `P{Lmax > l}`.
    pub fn exceedance(&self, l: usize) -> f64 {
        let above: usize = self.histogram.range(l + 1..).map(|(_, c)| c).sum();
        above as f64 / self.trials as f64
    }

    /// Smallest `L` with empirical `P{Lmax > L} <= level`.
    pub fn cutoff(&self, level: f64) -> usize {
        let mut l = 0;
        while self.exceedance(l) > level {
            l += 1;
        }
        l
    }
}

fn null_lmax(n: usize, slope_bound: f64, nstar: u32, seed: u64, trial: u64) -> Result<usize> {
    let cloud: PointCloud<f64> = sample_null_from(n, &mut trial_rng(seed, trial));
    let ts = ThresholdSet::fixed(nstar, n as f64, 0.5);
    Ok(detect_with(&cloud, slope_bound, &ts, ScanMode::ExactMax)?.lmax)
}

/// Null distribution of `Lmax` over `trials` uniform clouds.
pub fn calibrate_null(n: usize, slope_bound: f64, nstar: u32, trials: usize, seed_base: u64) -> Result<CalibrationReport> {
    if trials == 0 {
        return Err(invalid("trials", trials, "must be at least 1"));
    }
    let lmax = (0..trials as u64)
        .into_par_iter()
        .map(|t| null_lmax(n, slope_bound, nstar, seed_base, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationReport::from_lmax(n, nstar, &lmax))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PowerPoint {
    pub n: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub rejections: usize,
    pub power: f64,
}

/// Rejections among `trials` mixture clouds. Trial `t` uses stream `t` at
/// every `epsilon`, so neighbouring weights share their random numbers.
pub fn count_rejections(
    n: usize,
    slope_bound: f64,
    arc: &ArcLength<CurveSpec>,
    epsilon: f64,
    ts: &ThresholdSet,
    trials: usize,
    seed_base: u64,
) -> Result<usize> {
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let sample = sample_mixture_from::<_, f64>(arc, n, epsilon, &mut trial_rng(seed_base, t));
            Ok(detect_with(&sample.cloud, slope_bound, ts, ScanMode::Decision)?.reject as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum())
}

pub fn power_curve(
    n: usize,
    slope_bound: f64,
    curve: &CurveSpec,
    epsilons: &[f64],
    ts: &ThresholdSet,
    trials: usize,
    seed_base: u64,
) -> Result<Vec<PowerPoint>> {
    curve.validate()?;
    if trials == 0 {
        return Err(invalid("trials", trials, "must be at least 1"));
    }
    let arc = ArcLength::new(*curve);
    epsilons
        .iter()
        .map(|&epsilon| {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(invalid("epsilon", epsilon, "must lie in [0, 1]"));
            }
            let rejections = count_rejections(n, slope_bound, &arc, epsilon, ts, trials, seed_base)?;
            Ok(PowerPoint {
                n,
                epsilon,
                trials,
                rejections,
                power: rejections as f64 / trials as f64,
            })
        })
        .collect()
}

/// 95% Wilson score interval for `k` successes in `m` trials.
pub fn wilson_interval(k: usize, m: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let (k, m) = (k as f64, m as f64);
    let p = k / m;
    let denom = 1.0 + z * z / m;
    let center = (p + z * z / (2.0 * m)) / denom;
    let half = z * (p * (1.0 - p) / m + z * z / (4.0 * m * m)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// How detection thresholds are chosen for each sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ThresholdPolicy {
    /// Closed-form `N*` and `L*` from `p0`.
    Asymptotic { p0: f64 },
    /// The same thresholds at every `n`.
    Fixed { nstar: u32, lstar: f64 },
    /// Fixed `N*`; `L*` is the null cutoff at `level` from `trials` simulations.
    Calibrated { nstar: u32, level: f64, trials: usize },
}

impl ThresholdPolicy {
    pub fn thresholds(&self, n: usize, slope_bound: f64, seed_base: u64) -> Result<ThresholdSet> {
        use crate::thresholds::{Provenance, DEFAULT_P0};
        Ok(match *self {
            ThresholdPolicy::Asymptotic { p0 } => derive_thresholds(&ThresholdConfig::new(p0, n, slope_bound)?),
            ThresholdPolicy::Fixed { nstar, lstar } => ThresholdSet::fixed(nstar, lstar, DEFAULT_P0),
            ThresholdPolicy::Calibrated { nstar, level, trials } => {
                let report = calibrate_null(n, slope_bound, nstar, trials, seed_base)?;
                let mut ts = ThresholdSet::fixed(nstar, report.cutoff(level) as f64, DEFAULT_P0);
                ts.source = Provenance::Simulated;
                ts
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingOptions {
    pub slope_bound: f64,
    pub trials: usize,
    pub seed_base: u64,
    pub policy: ThresholdPolicy,
    /// Probed interval of curve weights.
    pub eps_lo: f64,
    pub eps_hi: f64,
    /// Bisection stops once `ln(hi / lo)` falls below this.
    pub log_width: f64,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            slope_bound: 2.0,
            trials: 200,
            seed_base: 0,
            policy: ThresholdPolicy::Asymptotic { p0: crate::thresholds::DEFAULT_P0 },
            eps_lo: 1e-3,
            eps_hi: 0.5,
            log_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Probe {
    pub epsilon: f64,
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingPoint {
    pub n: usize,
    pub nstar: u32,
    pub lstar: f64,
    /// Estimated weight at which power crosses 1/2.
    pub eps_half: f64,
    pub probes: Vec<Probe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingFit {
    pub curve: CurveSpec,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residuals of `ln eps_half` against the fitted line.
    pub residuals: Vec<f64>,
}

/// Weight at which the rejection rate crosses 1/2, by bisection in `ln eps`.
pub fn half_power_point(n: usize, curve: &CurveSpec, ts: &ThresholdSet, opts: &ScalingOptions) -> Result<ScalingPoint> {
    let arc = ArcLength::new(*curve);
    let mut probes = Vec::new();
    let mut probe = |eps: f64| -> Result<usize> {
        let k = count_rejections(n, opts.slope_bound, &arc, eps, ts, opts.trials, opts.seed_base)?;
        probes.push(Probe { epsilon: eps, rejections: k });
        Ok(k)
    };
    let (mut lo, mut hi) = (opts.eps_lo, opts.eps_hi);
    let half = opts.trials as f64 / 2.0;
    let (k_lo, k_hi) = (probe(lo)?, probe(hi)?);
    if k_lo as f64 >= half || (k_hi as f64) < half {
        return Err(Error::InsufficientPowerRange {
            n,
            lo,
            hi,
            lo_power: k_lo as f64 / opts.trials as f64,
            hi_power: k_hi as f64 / opts.trials as f64,
        });
    }
    while (hi / lo).ln() >= opts.log_width {
        let mid = (lo * hi).sqrt();
        let k = probe(mid)?;
        let (wl, wu) = wilson_interval(k, opts.trials);
        let above = if wl > 0.5 {
            true
        } else if wu < 0.5 {
            false
        } else {
            k as f64 >= half
        };
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ScalingPoint {
        n,
        nstar: ts.nstar,
        lstar: ts.lstar,
        eps_half: (lo * hi).sqrt(),
        probes,
    })
}

/// Ordinary least squares `y = a + b x`, returning `(b, a, r^2, residuals)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, Vec<f64>) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - intercept - slope * a).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r2, residuals)
}

/// Slope of `ln eps_half` against `ln n` for a curve of the given smoothness.
pub fn scaling_fit(alpha: f64, beta: f64, ns: &[usize], opts: &ScalingOptions) -> Result<ScalingFit> {
    scaling_fit_for(&CurveSpec::for_smoothness(alpha, beta)?, ns, opts)
}

pub fn scaling_fit_for(curve: &CurveSpec, ns: &[usize], opts: &ScalingOptions) -> Result<ScalingFit> {
    if ns.len() < 3 {
        return Err(invalid("ns", ns.len(), "need at least three sample sizes"));
    }
    if !(opts.eps_lo > 0.0 && opts.eps_lo < opts.eps_hi && opts.eps_hi <= 1.0) {
        return Err(invalid("eps_lo", opts.eps_lo, "need 0 < eps_lo < eps_hi <= 1"));
    }
    let points = ns
        .iter()
        .map(|&n| {
            let ts = opts.policy.thresholds(n, opts.slope_bound, opts.seed_base ^ 0x5eed)?;
            half_power_point(n, curve, &ts, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.eps_half.ln()).collect();
    let (slope, intercept, r_squared, residuals) = least_squares(&x, &y);
    Ok(ScalingFit {
        curve: *curve,
        points,
        slope,
        intercept,
        r_squared,
        residuals,
    })
}

/// Longest run of successes in `m` Bernoulli(`p`) draws.
pub fn longest_head_run(m: usize, p: f64, seed: u64) -> Result<usize> {
    if m == 0 {
        return Err(invalid("m", m, "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", p, "must lie in [0, 1]"));
    }
    let mut rng = trial_rng(seed, 0);
    let (mut best, mut cur) = (0, 0);
    for _ in 0..m {
        if rng.gen::<f64>() < p {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    Ok(best)
}

/// One scale and run length of the union-bound comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UnionBoundRow {
    pub j: u32,
    pub length: usize,
    /// Fraction of null trials with a significant path of `length` strips.
    pub observed: f64,
    /// `M_j * p_hat^length`, `M_j` the number of strips at scale `j`.
    pub bound: f64,
}

/// Compares observed null path frequencies with the union bound over paths.
pub fn union_bound_check(
    n: usize,
    slope_bound: f64,
    nstar: u32,
    lengths: &[usize],
    trials: usize,
    seed_base: u64,
) -> Result<Vec<UnionBoundRow>> {
    let scales = all_scales(n, slope_bound)?;
    let per_trial = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let cloud: PointCloud<f64> = sample_null_from(n, &mut trial_rng(seed_base, t));
            scales
                .iter()
                .map(|p| {
                    let sig = SignificanceGraph::new(p.j, significant_strips(&cloud, p, nstar));
                    longest_significant_path(&sig, p).0
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>();
    let p_hat = 81.0 * binomial_tail(n as u64, 2.0 / n as f64, nstar as u64);
    let mut rows = Vec::new();
    for (i, p) in scales.iter().enumerate() {
        for &length in lengths {
            let hits = per_trial.iter().filter(|l| l[i] >= length).count();
            rows.push(UnionBoundRow {
                j: p.j,
                length,
                observed: hits as f64 / trials as f64,
                bound: p.strip_count() as f64 * p_hat.powi(length as i32),
            });
        }
    }
    Ok(rows)
}
