//! Statistics that turn Monte Carlo batches into verdicts.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::rng;
use crate::scaling::{covariance_kernel, Regime, RegimeReport, SequenceTable};
use crate::walk::{InnovationSpec, WalkTrajectory};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// `sum x^2 / n`, the variance estimate of a centered law.
pub fn second_moment(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of_mean(x: &[f64]) -> Self {
        Estimate { value: mean(x), se: (variance(x) / x.len() as f64).sqrt() }
    }

    /// `|value - target| / se`.
    pub fn z(&self, target: f64) -> f64 {
        if self.se == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target).abs() / self.se
        }
    }
}

/// Quantile of sorted data with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let i = h.floor() as usize;
    let f = h - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + f * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthFlag {
    Linear,
    Superlinear,
    Sublinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub flag: GrowthFlag,
}

/// Least-squares slope of `log var` on `log n` with a 95% t-interval.
pub fn growth_exponent(points: &[(f64, f64)]) -> Result<GrowthFit> {
    if points.len() < 4 {
        return Err(Error::Degenerate("growth fit needs at least 4 grid points".into()));
    }
    if points.iter().any(|&(n, v)| !(n > 0.0 && v > 0.0 && n.is_finite() && v.is_finite())) {
        return Err(Error::Degenerate("grid points and variances must be positive".into()));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::Degenerate("growth fit grid must span at least two decades".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let xb = mean(&xs);
    let yb = mean(&ys);
    let sxx: f64 = xs.iter().map(|x| (x - xb).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xb) * (y - yb)).sum();
    let slope = sxy / sxx;
    let intercept = yb - slope * xb;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = (rss / (m - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, m - 2.0).map_err(|e| Error::Degenerate(e.to_string()))?.inverse_cdf(0.975);
    let (ci_low, ci_high) = (slope - t * slope_se, slope + t * slope_se);
    let flag = if ci_low > 1.0 + 1e-9 {
        GrowthFlag::Superlinear
    } else if ci_high < 1.0 - 1e-9 {
        GrowthFlag::Sublinear
    } else {
        GrowthFlag::Linear
    };
    Ok(GrowthFit { slope, intercept, slope_se, ci_low, ci_high, flag })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form, fast for small arguments.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=20 {
            let k = (2 * j - 1) as f64;
            s += (c * k * k).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
///
/// The p-value is the asymptotic Kolmogorov tail evaluated at
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D` (Stephens' finite-sample adjustment).
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Degenerate("NaN sample".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    Ok(KsResult { n: s.len(), statistic: d, p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d) })
}

fn normal(variance: f64) -> Result<Normal> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Degenerate(format!("target variance must be positive and finite, got {variance}")));
    }
    Normal::new(0.0, variance.sqrt()).map_err(|e| Error::Degenerate(e.to_string()))
}

/// Minimum sample size for [`gaussianity_test`].
pub const MIN_GAUSSIAN_SAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianityResult {
    pub ks: KsResult,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `sum x^2 / n`.
    pub second_moment: f64,
    pub target_variance: f64,
}

/// KS against `N(0, target_variance)` plus shape statistics.
pub fn gaussianity_test(samples: &[f64], target_variance: f64) -> Result<GaussianityResult> {
    let dist = normal(target_variance)?;
    if samples.len() < MIN_GAUSSIAN_SAMPLES {
        return Err(Error::InvalidInput(format!("need at least {MIN_GAUSSIAN_SAMPLES} samples, got {}", samples.len())));
    }
    let ks = ks_test(samples, |x| dist.cdf(x))?;
    let (skewness, kurt) = shape(samples);
    if !kurt.is_finite() {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    Ok(GaussianityResult { ks, skewness, excess_kurtosis: kurt - 3.0, second_moment: second_moment(samples), target_variance })
}

/// Sample skewness and (non-excess) kurtosis from central moments.
pub fn shape(x: &[f64]) -> (f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of counts against cell probabilities.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult> {
    if observed.len() != probs.len() || observed.len() < 2 {
        return Err(Error::InvalidInput("need at least two cells with matching probabilities".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::Empty);
    }
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * total as f64;
        if e.is_nan() || e <= 0.0 {
            return Err(Error::Degenerate("cell with zero expected count".into()));
        }
        stat += (o as f64 - e).powi(2) / e;
    }
    let df = observed.len() - 1;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    Ok(ChiSquareResult { statistic: stat, df, p_value: 1.0 - chi.cdf(stat) })
}

/// Empirical covariance of the rescaled walk at a pair of times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub s: f64,
    pub t: f64,
    pub index_s: u64,
    pub index_t: u64,
    pub estimate: Estimate,
    pub target: f64,
}

/// `E[(S_{ns}/scale)(S_{nt}/scale)]` against the limiting kernel.
pub fn covariance_check(
    trajs: &[WalkTrajectory],
    pairs: &[(f64, f64)],
    n: u64,
    scale: f64,
    p: f64,
    gamma: f64,
) -> Result<Vec<CovarianceEstimate>> {
    if trajs.len() < 2 {
        return Err(Error::InvalidInput("need at least two trajectories".into()));
    }
    pairs
        .iter()
        .map(|&(s, t)| {
            let is = (n as f64 * s).floor() as u64;
            let it = (n as f64 * t).floor() as u64;
            let mut prods = Vec::with_capacity(trajs.len());
            for tr in trajs {
                let a = tr.s_at(is).ok_or_else(|| Error::InvalidInput(format!("missing checkpoint {is}")))?;
                let b = tr.s_at(it).ok_or_else(|| Error::InvalidInput(format!("missing checkpoint {it}")))?;
                prods.push((a / scale) * (b / scale));
            }
            Ok(CovarianceEstimate {
                s,
                t,
                index_s: is,
                index_t: it,
                estimate: Estimate::of_mean(&prods),
                target: covariance_kernel(s, t, p, gamma)?,
            })
        })
        .collect()
}

/// Pathwise oscillation of `a_n mu_n S_n` in a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationSummary {
    pub window: (u64, u64),
    pub paths: usize,
    pub median: f64,
    pub q90: f64,
}

/// Per path, `max_{n in window} |a_n mu_n S_n - a_{n2} mu_{n2} S_{n2}|` over the recorded checkpoints.
pub fn oscillations(trajs: &[WalkTrajectory], seq: &SequenceTable, window: (u64, u64)) -> Result<Vec<f64>> {
    let (n1, n2) = window;
    if n1 >= n2 || n2 as usize > seq.n_max {
        return Err(Error::InvalidInput(format!("bad window [{n1}, {n2}] for a table of length {}", seq.n_max)));
    }
    trajs
        .iter()
        .map(|tr| {
            let end = tr.s_at(n2).ok_or_else(|| Error::InvalidInput(format!("missing checkpoint {n2}")))? * seq.a_mu(n2 as usize);
            let mut inside = 0;
            let mut osc = 0.0f64;
            for (i, &n) in tr.checkpoints.iter().enumerate() {
                if n >= n1 && n <= n2 {
                    inside += 1;
                    osc = osc.max((tr.s[i] * seq.a_mu(n as usize) - end).abs());
                }
            }
            if inside < 3 {
                return Err(Error::InvalidInput(format!("too few checkpoints in [{n1}, {n2}]")));
            }
            Ok(osc)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsConvergence {
    pub base: OscillationSummary,
    pub doubled: OscillationSummary,
    /// `1 - q90(doubled) / q90(base)`.
    pub shrink: f64,
    pub passed: bool,
}

/// Required relative shrink of the 90th percentile.
pub const AS_SHRINK: f64 = 0.4;

/// Oscillation diagnostic for almost-sure convergence of `a_n mu_n S_n`: passes when
/// the 90th percentile of the pathwise oscillation in `doubled` is at most 60% of that in `base`.
pub fn as_convergence_check(
    trajs: &[WalkTrajectory],
    regime: &RegimeReport,
    seq: &SequenceTable,
    base: (u64, u64),
    doubled: (u64, u64),
) -> Result<AsConvergence> {
    if !matches!(regime.regime, Regime::Supercritical | Regime::CriticalBoundedV) {
        return Err(Error::WrongRegime(format!("{:?} has no almost-sure limit of a_n mu_n S_n", regime.regime)));
    }
    let summarize = |w| -> Result<OscillationSummary> {
        let mut o = oscillations(trajs, seq, w)?;
        o.sort_by(f64::total_cmp);
        Ok(OscillationSummary { window: w, paths: o.len(), median: quantile_sorted(&o, 0.5), q90: quantile_sorted(&o, 0.9) })
    };
    let b = summarize(base)?;
    let d = summarize(doubled)?;
    let shrink = if b.q90 > 0.0 { 1.0 - d.q90 / b.q90 } else { 0.0 };
    let passed = d.q90 <= (1.0 - AS_SHRINK) * b.q90;
    Ok(AsConvergence { base: b, doubled: d, shrink, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SllnResult {
    pub n0_small: u64,
    pub n0_large: u64,
    pub median_small: f64,
    pub median_large: f64,
    /// `median_large / median_small`.
    pub ratio: f64,
    /// Bootstrap standard error of `ratio`.
    pub ratio_se: f64,
    pub passed: bool,
}

/// Per path, `max_{n >= n0} |S_n / n|` over the recorded checkpoints.
pub fn sup_tail(tr: &WalkTrajectory, n0: u64) -> f64 {
    tr.checkpoints
        .iter()
        .zip(&tr.s)
        .filter(|(&n, _)| n >= n0)
        .map(|(&n, &s)| (s / n as f64).abs())
        .fold(0.0, f64::max)
}

/// Bootstrap resamples used for the SLLN ratio.
pub const BOOTSTRAP_RESAMPLES: usize = 400;

/// Median of `sup_{n >= n0} |S_n / n|` at `n0` and `4 n0`. Passes when the ratio of
/// medians is at most `1/2 + 3 se`, with `se` from a paired bootstrap seeded by `seed`.
pub fn slln_check(trajs: &[WalkTrajectory], p: f64, n0: u64, seed: u64) -> Result<SllnResult> {
    if p >= 1.0 {
        return Err(Error::InvalidInput("the law of large numbers to zero requires p < 1".into()));
    }
    if trajs.len() < 10 {
        return Err(Error::InvalidInput("need at least ten trajectories".into()));
    }
    let n0_large = 4 * n0;
    let small: Vec<f64> = trajs.iter().map(|t| sup_tail(t, n0)).collect();
    let large: Vec<f64> = trajs.iter().map(|t| sup_tail(t, n0_large)).collect();
    if trajs.iter().any(|t| t.checkpoints.last().is_none_or(|&l| l < n0_large)) {
        return Err(Error::InvalidInput(format!("checkpoints must reach {n0_large}")));
    }
    let median_small = quantile(&small, 0.5);
    let median_large = quantile(&large, 0.5);
    let ratio = median_large / median_small;
    let ratio_se = bootstrap_se(small.len(), seed, |idx| {
        let a: Vec<f64> = idx.iter().map(|&i| small[i]).collect();
        let b: Vec<f64> = idx.iter().map(|&i| large[i]).collect();
        quantile(&b, 0.5) / quantile(&a, 0.5)
    });
    Ok(SllnResult {
        n0_small: n0,
        n0_large,
        median_small,
        median_large,
        ratio,
        ratio_se,
        passed: ratio <= 0.5 + 3.0 * ratio_se,
    })
}

/// Standard deviation of `stat` over paired bootstrap resamples of `0..n`.
pub fn bootstrap_se(n: usize, seed: u64, stat: impl Fn(&[usize]) -> f64) -> f64 {
    let mut g = rng::stream(seed);
    let mut idx = vec![0usize; n];
    let vals: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for v in idx.iter_mut() {
                *v = ((rng::uniform(&mut g) * n as f64) as usize).min(n - 1);
            }
            stat(&idx)
        })
        .collect();
    variance(&vals).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KurtosisEstimate {
    pub n: usize,
    pub kurtosis: f64,
    /// Jackknife standard error.
    pub se: f64,
}

/// Sample kurtosis `m4 / m2^2` with a leave-one-out jackknife standard error.
pub fn sample_kurtosis(x: &[f64]) -> Result<KurtosisEstimate> {
    if x.len() < 4 {
        return Err(Error::InvalidInput("need at least four samples".into()));
    }
    let c = mean(x);
    let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
    for v in x {
        let d = v - c;
        let d2 = d * d;
        s1 += d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let kurt = |s1: f64, s2: f64, s3: f64, s4: f64, n: f64| {
        let m = s1 / n;
        let m2 = s2 / n - m * m;
        let m4 = s4 / n - 4.0 * m * s3 / n + 6.0 * m * m * s2 / n - 3.0 * m.powi(4);
        m4 / (m2 * m2)
    };
    let n = x.len() as f64;
    let full = kurt(s1, s2, s3, s4, n);
    if !full.is_finite() {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let loo: Vec<f64> = x
        .iter()
        .map(|v| {
            let d = v - c;
            let d2 = d * d;
            kurt(s1 - d, s2 - d2, s3 - d2 * d, s4 - d2 * d2, n - 1.0)
        })
        .collect();
    let lm = mean(&loo);
    let se = ((n - 1.0) / n * loo.iter().map(|k| (k - lm).powi(2)).sum::<f64>()).sqrt();
    Ok(KurtosisEstimate { n: x.len(), kurtosis: full, se })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KurtosisCheck {
    pub estimate: KurtosisEstimate,
    /// `(3 - kurtosis) / se`.
    pub below_three_z: f64,
    pub oracle: Option<f64>,
    /// `|kurtosis - oracle| / se`.
    pub oracle_z: Option<f64>,
}

/// Kurtosis of samples of `M_n` (or `a_n mu_n S_n`) from Rademacher walks with an almost-sure limit.
pub fn kurtosis_check(
    samples: &[f64],
    innovation: &InnovationSpec,
    regime: &RegimeReport,
    oracle: Option<f64>,
) -> Result<KurtosisCheck> {
    if !innovation.is_sign_valued() {
        return Err(Error::InvalidInput("kurtosis comparison requires Rademacher innovations".into()));
    }
    if !matches!(regime.regime, Regime::Supercritical | Regime::CriticalBoundedV) {
        return Err(Error::WrongRegime(format!("{:?} has no almost-sure limit", regime.regime)));
    }
    let estimate = sample_kurtosis(samples)?;
    Ok(KurtosisCheck {
        estimate,
        below_three_z: (3.0 - estimate.kurtosis) / estimate.se,
        oracle,
        oracle_z: oracle.map(|o| (estimate.kurtosis - o).abs() / estimate.se),
    })
}

/// Outcome of an experiment or of one of its checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One compared quantity inside a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub estimate: f64,
    pub standard_error: Option<f64>,
    pub target: Option<f64>,
    /// Human-readable acceptance rule.
    pub tolerance: String,
    /// Where the target comes from.
    pub provenance: String,
    pub p_value: Option<f64>,
    pub verdict: Verdict,
    /// Informational checks do not enter the overall verdict.
    pub informational: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, estimate: f64, passed: bool) -> Self {
        Check {
            name: name.into(),
            estimate,
            standard_error: None,
            target: None,
            tolerance: String::new(),
            provenance: String::new(),
            p_value: None,
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            informational: false,
        }
    }

    pub fn se(mut self, se: f64) -> Self {
        self.standard_error = Some(se);
        self
    }

    pub fn target(mut self, t: f64) -> Self {
        self.target = Some(t);
        self
    }

    pub fn tolerance(mut self, t: impl Into<String>) -> Self {
        self.tolerance = t.into();
        self
    }

    pub fn provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    pub fn p_value(mut self, p: f64) -> Self {
        self.p_value = Some(p);
        self
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

/// One row of the plot-ready CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series: String,
    pub n: f64,
    pub estimate: f64,
    pub target: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub kind: String,
    /// Everything needed to re-run the experiment.
    pub parameters: serde_json::Value,
    pub n_grid: Vec<u64>,
    pub replicas: usize,
    pub master_seed: Option<u64>,
    pub rng: String,
    pub tool_version: String,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub wall_time_s: f64,
    pub notes: Vec<String>,
    pub plot: Vec<PlotRow>,
}

impl ExperimentReport {
    pub fn new(kind: impl Into<String>, parameters: serde_json::Value) -> Self {
        ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            kind: kind.into(),
            parameters,
            n_grid: Vec::new(),
            replicas: 0,
            master_seed: None,
            rng: rng::RNG_ID.to_string(),
            tool_version: crate::TOOL_VERSION.to_string(),
            checks: Vec::new(),
            verdict: Verdict::Inconclusive,
            wall_time_s: 0.0,
            notes: Vec::new(),
            plot: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.verdict = self.compute_verdict();
    }

    /// Pass when every non-informational check passes, fail when any fails.
    pub fn compute_verdict(&self) -> Verdict {
        let required: Vec<&Check> = self.checks.iter().filter(|c| !c.informational).collect();
        if required.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if required.is_empty() || required.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} [{:?}] ({:.2}s)", self.kind, self.verdict, self.wall_time_s);
        if self.replicas > 0 {
            let _ = writeln!(s, "   replicas {}  seed {:?}  rng {}", self.replicas, self.master_seed, self.rng);
        }
        for c in &self.checks {
            let mut line = format!("   {:<5} {}: {}", verdict_word(c.verdict, c.informational), c.name, num(c.estimate));
            if let Some(se) = c.standard_error {
                let _ = write!(line, " (se {se:.3e})");
            }
            if let Some(t) = c.target {
                let _ = write!(line, " target {}", num(t));
            }
            if let Some(p) = c.p_value {
                let _ = write!(line, " p={p:.4}");
            }
            if !c.tolerance.is_empty() {
                let _ = write!(line, " [{}]", c.tolerance);
            }
            let _ = writeln!(s, "{line}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "   note: {n}");
        }
        s
    }

    /// CSV with header `series,n,estimate,target,lo,hi`.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["series", "n", "estimate", "target", "lo", "hi"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.plot {
            w.write_record([r.series.clone(), r.n.to_string(), r.estimate.to_string(), opt(r.target), opt(r.lo), opt(r.hi)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-3..1e7).contains(&x.abs()) {
        format!("{x:.6}")
    } else {
        format!("{x:.6e}")
    }
}

fn verdict_word(v: Verdict, info: bool) -> &'static str {
    match (v, info) {
        (_, true) => "info",
        (Verdict::Pass, _) => "pass",
        (Verdict::Fail, _) => "FAIL",
        (Verdict::Inconclusive, _) => "?",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn growth_linear_and_superlinear() {
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6].iter().map(|&n| (n, 2.0 * n)).collect();
        let f = growth_exponent(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert_eq!(f.flag, GrowthFlag::Linear);
        let pts: Vec<(f64, f64)> = [1e3f64, 1e4, 1e5, 1e6].iter().map(|&n| (n, n * n.ln())).collect();
        let f = growth_exponent(&pts).unwrap();
        // Independent value: slope of ln(n ln n) on ln n over the four grid points.
        assert!((f.slope - 1.1).abs() < 1e-6, "{}", f.slope);
        assert_eq!(f.flag, GrowthFlag::Superlinear);
        assert!(growth_exponent(&pts[..3]).is_err());
        let narrow: Vec<(f64, f64)> = [10.0, 20.0, 30.0, 40.0].iter().map(|&n| (n, n)).collect();
        assert!(growth_exponent(&narrow).is_err());
    }

    #[test]
    fn ks_single_sample() {
        for u in [0.1, 0.5, 0.83] {
            let r = ks_test(&[u], |x| x).unwrap();
            assert!((r.statistic - f64::max(u, 1.0 - u)).abs() < 1e-15);
        }
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Reference values of the Kolmogorov distribution.
        assert!((kolmogorov_sf(1.0) - 0.26999967).abs() < 1e-6);
        assert!((kolmogorov_sf(1.36) - 0.04939).abs() < 1e-4);
        assert!((kolmogorov_sf(0.5) - 0.96394524).abs() < 1e-6);
        // Both series agree at the switch point.
        let a = kolmogorov_sf(1.18 - 1e-12);
        let b = kolmogorov_sf(1.18);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn gaussian_self_test() {
        let mut g = rng::stream(5);
        let xs: Vec<f64> = (0..20_000).map(|_| 2.0f64.sqrt() * g.sample::<f64, _>(StandardNormal)).collect();
        let r = gaussianity_test(&xs, 2.0).unwrap();
        assert!(r.ks.p_value > 0.001);
        assert!(r.excess_kurtosis.abs() < 0.2);
        let k = sample_kurtosis(&xs).unwrap();
        assert!((k.kurtosis - 3.0).abs() < 4.0 * k.se);
        assert!(gaussianity_test(&xs[..10], 2.0).is_err());
        assert!(gaussianity_test(&xs, 0.0).is_err());
        assert!(gaussianity_test(&xs, f64::NAN).is_err());
    }

    #[test]
    fn two_point_kurtosis() {
        let xs: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let k = sample_kurtosis(&xs).unwrap();
        assert!((k.kurtosis - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let mut g = rng::stream(8);
        let xs: Vec<f64> = (0..60).map(|_| g.sample::<f64, _>(StandardNormal).powi(3)).collect();
        let fast = sample_kurtosis(&xs).unwrap();
        let n = xs.len() as f64;
        let loo: Vec<f64> = (0..xs.len())
            .map(|i| {
                let v: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &x)| x).collect();
                shape(&v).1
            })
            .collect();
        let lm = mean(&loo);
        let se = ((n - 1.0) / n * loo.iter().map(|k| (k - lm).powi(2)).sum::<f64>()).sqrt();
        assert!((fast.se / se - 1.0).abs() < 1e-8);
        assert!((fast.kurtosis - shape(&xs).1).abs() < 1e-10);
    }

    #[test]
    fn chi_square_basic() {
        let r = chi_square_test(&[100, 100, 100], &[1.0 / 3.0; 3]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = chi_square_test(&[200, 100], &[0.5, 0.5]).unwrap();
        assert!(r.p_value < 1e-8);
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_eq!(quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
    }

    #[test]
    fn report_verdicts() {
        let mut r = ExperimentReport::new("demo", serde_json::json!({}));
        assert_eq!(r.verdict, Verdict::Inconclusive);
        r.push(Check::new("a", 1.0, true));
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Check::new("b", 1.0, false).informational());
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Check::new("c", 1.0, false));
        assert_eq!(r.verdict, Verdict::Fail);
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.render_text().contains("FAIL"));
    }
}
