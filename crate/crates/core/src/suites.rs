//! Named verification suites. Each suite runs end to end at a fixed, documented
//! parameter set and returns an [`ExperimentReport`].

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::memory::{MemorySpec, ZetaSpec};
use crate::moments::{self, FiniteLaw, MomentCursor, DEFAULT_NODE_CAP};
use crate::rng;
use crate::scaling::{
    self, build_sequences, classify_regime, critical_p, hat_p, CriticalExample, Regime, SequenceCursor, TimescaleMode,
};
use crate::stats::{self, Check, Estimate, ExperimentReport, PlotRow, Verdict};
use crate::walk::{self, geometric_grid, InnovationSpec, SamplerMode, WalkConfig};

/// Problem size of a suite run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Reduced sizes for smoke runs; verdicts are indicative only.
    Quick,
    /// The documented acceptance sizes.
    #[default]
    Full,
}

/// Statistical thresholds shared by the Monte Carlo comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Standard errors allowed for moment and kernel comparisons.
    pub z: f64,
    /// Minimum p-value for KS and chi-square tests.
    pub min_p: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { z: 4.0, min_p: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub scale: Scale,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub thresholds: Thresholds,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { scale: Scale::Full, seed: 20240917, threads: 0, thresholds: Thresholds::default() }
    }
}

impl SuiteOptions {
    fn pick<T>(&self, quick: T, full: T) -> T {
        match self.scale {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }

    fn sub_seed(&self, stream: u64) -> u64 {
        rng::replica_seed(self.seed, stream.wrapping_add(1 << 40))
    }
}

/// A registered suite.
pub struct SuiteInfo {
    pub name: &'static str,
    /// Acceptance criterion the suite decides.
    pub criterion: u8,
    /// Runtime budget at full scale, in seconds.
    pub budget_s: f64,
    pub summary: &'static str,
    run: fn(&SuiteOptions) -> Result<ExperimentReport>,
}

pub const SUITES: &[SuiteInfo] = &[
    SuiteInfo {
        name: "oracle-equivalence",
        criterion: 1,
        budget_s: 60.0,
        summary: "enumeration vs moment recursions for n <= 8",
        run: oracle_equivalence,
    },
    SuiteInfo {
        name: "subcritical-variance",
        criterion: 2,
        budget_s: 300.0,
        summary: "E S_n^2 / n for gamma=0, p=0.25, exact and Monte Carlo",
        run: subcritical_variance,
    },
    SuiteInfo {
        name: "subcritical-clt",
        criterion: 3,
        budget_s: 900.0,
        summary: "KS of S_n/sqrt(n) and the kernel at (0.5, 1) for gamma=0, p=0.25",
        run: subcritical_clt,
    },
    SuiteInfo {
        name: "covariance",
        criterion: 3,
        budget_s: 900.0,
        summary: "kernel grid in the diffusive regime and continuity across p_hat",
        run: covariance,
    },
    SuiteInfo {
        name: "phat-branch",
        criterion: 4,
        budget_s: 120.0,
        summary: "E S_n^2 / n at gamma=1, p=p_hat",
        run: phat_branch,
    },
    SuiteInfo {
        name: "critical-scaling",
        criterion: 5,
        budget_s: 1800.0,
        summary: "sigma_n^2 / (n log n), E S_n^2 / sigma_n^2 and KS at gamma=0, p=0.5",
        run: critical_scaling,
    },
    SuiteInfo {
        name: "novel-critical",
        criterion: 6,
        budget_s: 600.0,
        summary: "deterministic critical scales for log-modulated and slowly growing memory",
        run: novel_critical,
    },
    SuiteInfo {
        name: "supercritical-as",
        criterion: 7,
        budget_s: 900.0,
        summary: "flatness of (a_n mu_n)^2 E S_n^2 and the oscillation diagnostic at gamma=0, p=0.9",
        run: supercritical_as,
    },
    SuiteInfo {
        name: "kurtosis",
        criterion: 8,
        budget_s: 1200.0,
        summary: "kurtosis of M_n below 3, recursion and Monte Carlo",
        run: kurtosis,
    },
    SuiteInfo {
        name: "marginal-law",
        criterion: 9,
        budget_s: 120.0,
        summary: "X_n keeps the innovation law",
        run: marginal_law,
    },
    SuiteInfo {
        name: "slln",
        criterion: 10,
        budget_s: 600.0,
        summary: "decay of sup |S_n / n| tails",
        run: slln,
    },
    SuiteInfo {
        name: "karamata",
        criterion: 11,
        budget_s: 120.0,
        summary: "deterministic rates of nu_n, a_n and eta_n",
        run: karamata,
    },
    SuiteInfo {
        name: "performance",
        criterion: 12,
        budget_s: 300.0,
        summary: "one 10^8-step walk with the tree sampler",
        run: performance,
    },
];

pub fn find_suite(name: &str) -> Option<&'static SuiteInfo> {
    SUITES.iter().find(|s| s.name == name)
}

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.name).collect()
}

/// Run a suite by name.
pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<ExperimentReport> {
    let info = find_suite(name)
        .ok_or_else(|| Error::InvalidInput(format!("unknown suite {name:?}; known: {}", suite_names().join(", "))))?;
    run_info(info, opts)
}

pub fn run_info(info: &SuiteInfo, opts: &SuiteOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = (info.run)(opts)?;
    let secs = start.elapsed().as_secs_f64();
    report.wall_time_s = secs;
    let check = Check::new("runtime_s", secs, secs <= info.budget_s)
        .target(info.budget_s)
        .tolerance(format!("<= {} s", info.budget_s))
        .provenance("runtime budget");
    report.push(if opts.scale == Scale::Full { check } else { check.informational() });
    if let serde_json::Value::Object(m) = &mut report.parameters {
        m.insert("suite".into(), json!(info.name));
        m.insert("scale".into(), json!(opts.scale));
        m.insert("seed".into(), json!(opts.seed));
        m.insert("thresholds".into(), json!(opts.thresholds));
    }
    if report.master_seed.is_none() && report.replicas > 0 {
        report.master_seed = Some(opts.seed);
    }
    Ok(report)
}

fn rel_err(x: f64, target: f64) -> f64 {
    (x / target - 1.0).abs()
}

fn pct(tol: f64) -> String {
    format!("|rel err| <= {}%", tol * 100.0)
}

fn column(trajs: &[walk::WalkTrajectory], n: u64) -> Result<Vec<f64>> {
    trajs
        .iter()
        .map(|t| t.s_at(n).ok_or_else(|| Error::InvalidInput(format!("missing checkpoint {n}"))))
        .collect()
}

fn z_check(name: &str, est: Estimate, target: f64, z: f64, provenance: &str) -> Check {
    let dev = est.z(target).abs();
    Check::new(name, est.value, dev <= z)
        .se(est.se)
        .target(target)
        .tolerance(format!("within {z} SE"))
        .provenance(provenance)
}

fn ks_check(name: &str, ks: &stats::KsResult, min_p: f64, provenance: &str) -> Check {
    Check::new(name, ks.statistic, ks.p_value > min_p)
        .p_value(ks.p_value)
        .tolerance(format!("KS p > {min_p}"))
        .provenance(provenance)
}

fn rademacher() -> InnovationSpec {
    InnovationSpec::Rademacher
}

fn oracle_equivalence(_opts: &SuiteOptions) -> Result<ExperimentReport> {
    const N: usize = 8;
    let gammas = [0.0, 0.5, 1.0];
    let mut report = ExperimentReport::new(
        "oracle-equivalence",
        json!({ "gammas": gammas, "p": ["0", "0.3", "p_hat", "p_c", "0.9"], "n_max": N, "innovation": "rademacher",
                "families": ["power_law", "continued_product"] }),
    );
    report.n_grid = (1..=N as u64).collect();
    let law = FiniteLaw::rademacher();
    let (mut ds, mut dm, mut dy4, mut dsy, mut dk, mut dtree) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut cases = 0;
    for &g in &gammas {
        for spec in [MemorySpec::power_law(g), MemorySpec::continued_product(g)] {
            for p in [0.0, 0.3, hat_p(g), critical_p(g), 0.9] {
                let e = moments::enumerate_exact(&spec, p, N, &law, DEFAULT_NODE_CAP)?;
                let r = moments::rademacher_fourth_moments(&spec, p, N)?;
                let f = r.fourth.as_ref().expect("fourth-moment columns");
                for k in 0..N {
                    ds = ds.max((e.e_s_sq[k] - r.e_s_sq[k]).abs());
                    dm = dm.max((e.e_m_sq[k] - r.e_m_sq[k]).abs());
                    dy4 = dy4.max((e.e_y_4[k] - f.e_y_4[k]).abs());
                    dsy = dsy.max((e.e_sy[k] - r.e_sy[k]).abs());
                    if k > 0 {
                        dk = dk.max((e.kurtosis_m[k] - f.kurtosis_m[k]).abs());
                    }
                }
                let t = moments::enumerate_tree(&spec, p, 6, &law, DEFAULT_NODE_CAP)?;
                for k in 0..6 {
                    dtree = dtree.max((t.e_s_sq[k] - e.e_s_sq[k]).abs()).max((t.e_y_4[k] - e.e_y_4[k]).abs());
                }
                cases += 1;
            }
        }
    }
    let abs = |name: &str, d: f64| {
        Check::new(name, d, d <= 1e-10)
            .target(0.0)
            .tolerance("max abs diff <= 1e-10")
            .provenance("exhaustive enumeration")
    };
    report.push(abs("max |E S_n^2 enum - recursion|", ds));
    report.push(abs("max |E M_n^2 enum - recursion|", dm));
    report.push(abs("max |E Y_n^4 enum - recursion|", dy4));
    report.push(abs("max |E S_n Y_n enum - recursion|", dsy).informational());
    report.push(abs("max |kurtosis_M enum - recursion| (n >= 2)", dk).informational());
    report.push(abs("max |merged - unmerged enumeration| (n <= 6)", dtree).informational());
    report.notes.push(format!("{cases} (family, gamma, p) cases, n = 1..{N}"));
    Ok(report)
}

fn subcritical_variance(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let (gamma, p) = (0.0, 0.25);
    let n_exact = 1_000_000u64;
    let n_mc = opts.pick(10_000u64, 100_000);
    let reps = opts.pick(1_000usize, 10_000);
    let spec = MemorySpec::power_law(gamma);
    let mut report = ExperimentReport::new(
        "subcritical-variance",
        json!({ "spec": spec, "p": p, "n_exact": n_exact, "n_mc": n_mc, "innovation": "rademacher" }),
    );
    report.n_grid = vec![n_mc, n_exact];
    report.replicas = reps;
    let target = scaling::subcritical_limit_variance(p, gamma)?;
    let mut cur = MomentCursor::second(&spec, p, 1.0)?;
    let at_mc = cur.advance_to(n_mc)?.e_s_sq;
    let at_exact = cur.advance_to(n_exact)?.e_s_sq / n_exact as f64;
    report.push(
        Check::new("exact E S_n^2 / n at n=1e6", at_exact, (1.98..=2.02).contains(&at_exact))
            .target(target)
            .tolerance("in [1.98, 2.02]")
            .provenance("moment recursion vs limit variance"),
    );
    let cfg = WalkConfig::new(spec, p, rademacher(), n_mc, opts.seed);
    let sq = walk::map_batch(&cfg, reps, opts.seed, opts.threads, |t| Ok(t.s_final().powi(2)))?;
    let est = Estimate::of_mean(&sq);
    report.push(z_check("Monte Carlo mean S_n^2", est, at_mc, opts.thresholds.z, "moment recursion"));
    Ok(report)
}

/// Diffusive batch shared by the CLT and kernel suites.
#[allow(clippy::too_many_arguments)]
fn diffusive_batch(
    opts: &SuiteOptions,
    gamma: f64,
    p: f64,
    n: u64,
    reps: usize,
    pairs: &[(f64, f64)],
    extra: &[u64],
    seed: u64,
) -> Result<Vec<walk::WalkTrajectory>> {
    let mut cps: Vec<u64> = pairs
        .iter()
        .flat_map(|&(s, t)| [(n as f64 * s).floor() as u64, (n as f64 * t).floor() as u64])
        .chain(extra.iter().copied())
        .chain([n])
        .filter(|&k| k >= 1)
        .collect();
    cps.sort_unstable();
    cps.dedup();
    let cfg = WalkConfig::new(MemorySpec::power_law(gamma), p, rademacher(), n, seed).with_checkpoints(cps);
    walk::simulate_batch(&cfg, reps, seed, opts.threads)
}

fn subcritical_clt(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let (gamma, p) = (0.0, 0.25);
    let n = opts.pick(10_000u64, 100_000);
    let reps = opts.pick(2_000usize, 20_000);
    let spec = MemorySpec::power_law(gamma);
    let growth_grid: Vec<u64> = [1e-2, 3e-2, 1e-1, 3e-1].iter().map(|f| (n as f64 * f) as u64).collect();
    let mut report = ExperimentReport::new(
        "subcritical-clt",
        json!({ "spec": spec, "p": p, "n": n, "pairs": [[0.5, 1.0]], "innovation": "rademacher" }),
    );
    report.replicas = reps;
    let trajs = diffusive_batch(opts, gamma, p, n, reps, &[(0.5, 1.0)], &growth_grid, opts.seed)?;
    let sqrt_n = (n as f64).sqrt();
    let target = scaling::subcritical_limit_variance(p, gamma)?;
    let x: Vec<f64> = column(&trajs, n)?.iter().map(|s| s / sqrt_n).collect();
    let g = stats::gaussianity_test(&x, target)?;
    report.push(ks_check("KS S_n/sqrt(n) vs N(0, 2)", &g.ks, opts.thresholds.min_p, "limit variance"));
    report.push(Check::new("skewness", g.skewness, true).target(0.0).informational());
    report.push(Check::new("excess kurtosis", g.excess_kurtosis, true).target(0.0).informational());
    let cov = stats::covariance_check(&trajs, &[(0.5, 1.0), (1.0, 1.0)], n, sqrt_n, p, gamma)?;
    report.push(z_check("kernel (0.5, 1)", cov[0].estimate, cov[0].target, opts.thresholds.z, "covariance kernel"));
    let consistent = (cov[1].estimate.value - g.second_moment).abs() <= 1e-12 * g.second_moment.max(1.0);
    report.push(
        Check::new("kernel (1, 1) equals the Gaussianity second moment", cov[1].estimate.value, consistent)
            .target(g.second_moment)
            .tolerance("abs diff <= 1e-12")
            .informational(),
    );
    let mut pts = Vec::new();
    for &k in growth_grid.iter().chain([n].iter()) {
        let col = column(&trajs, k)?;
        let v = stats::second_moment(&col);
        pts.push((k as f64, v));
        report.plot.push(PlotRow { series: "E S_n^2".into(), n: k as f64, estimate: v, target: None, lo: None, hi: None });
    }
    report.n_grid = pts.iter().map(|&(k, _)| k as u64).collect();
    let fit = stats::growth_exponent(&pts)?;
    report.push(
        Check::new("variance growth exponent", fit.slope, (0.95..=1.05).contains(&fit.slope))
            .se(fit.slope_se)
            .target(1.0)
            .tolerance("in [0.95, 1.05]")
            .informational(),
    );
    report.notes.push("two tests share one batch; the KS and kernel verdicts are not multiplicity corrected".into());
    Ok(report)
}

/// Default time pairs for kernel checks.
pub const KERNEL_PAIRS: [(f64, f64); 3] = [(0.25, 1.0), (0.5, 1.0), (1.0, 1.0)];

fn covariance(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let n = opts.pick(10_000u64, 100_000);
    let reps = opts.pick(2_000usize, 20_000);
    let mut report = ExperimentReport::new(
        "covariance",
        json!({ "configs": [[0.0, 0.25], [0.0, 0.0]], "n": n, "pairs": KERNEL_PAIRS, "innovation": "rademacher" }),
    );
    report.replicas = reps;
    report.n_grid = vec![n];
    let sqrt_n = (n as f64).sqrt();
    for (i, &(gamma, p)) in [(0.0, 0.25), (0.0, 0.0)].iter().enumerate() {
        let seed = opts.sub_seed(i as u64);
        let trajs = diffusive_batch(opts, gamma, p, n, reps, &KERNEL_PAIRS, &[], seed)?;
        for c in stats::covariance_check(&trajs, &KERNEL_PAIRS, n, sqrt_n, p, gamma)? {
            let name = format!("gamma={gamma} p={p} kernel ({}, {})", c.s, c.t);
            report.push(z_check(&name, c.estimate, c.target, opts.thresholds.z, "covariance kernel"));
        }
    }
    // The kernel has a removable singularity at p_hat. Its slope in p grows
    // quickly with gamma (about 114 at gamma = 2, s = t = 1), so the 1e-4 bound
    // over a 1e-6 step only holds for moderate gamma.
    for (gammas, informational) in [(&[0.5, 1.0][..], false), (&[2.0][..], true)] {
        let worst = kernel_jump(gammas, 1e-6)?;
        let label = format!("kernel continuity across p_hat, gamma in {gammas:?}");
        let mut check = Check::new(&label, worst, worst <= 1e-4)
            .target(0.0)
            .tolerance("max abs jump over p_hat +- 1e-6 <= 1e-4")
            .provenance("closed-form kernel");
        if informational {
            check = check.informational();
        }
        report.push(check);
    }
    report.notes.push(format!("{} kernel comparisons at {} SE each", 2 * KERNEL_PAIRS.len(), opts.thresholds.z));
    Ok(report)
}

fn kernel_jump(gammas: &[f64], eps: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &gamma in gammas {
        let ph = hat_p(gamma);
        for &(s, t) in &KERNEL_PAIRS {
            let mid = scaling::covariance_kernel(s, t, ph, gamma)?;
            for e in [-eps, eps] {
                worst = worst.max((scaling::covariance_kernel(s, t, ph + e, gamma)? - mid).abs());
            }
        }
    }
    Ok(worst)
}

fn phat_branch(_opts: &SuiteOptions) -> Result<ExperimentReport> {
    let gamma = 1.0;
    let p = hat_p(gamma);
    let n = 1_000_000u64;
    let spec = MemorySpec::power_law(gamma);
    let mut report = ExperimentReport::new("phat-branch", json!({ "spec": spec, "p": p, "n": n }));
    report.n_grid = vec![n];
    let target = 2.0 * gamma * gamma + 2.0 * gamma + 1.0;
    let v = MomentCursor::second(&spec, p, 1.0)?.advance_to(n)?.e_s_sq / n as f64;
    report.push(
        Check::new("exact E S_n^2 / n at n=1e6", v, rel_err(v, target) <= 0.03)
            .target(target)
            .tolerance(pct(0.03))
            .provenance("2 gamma^2 + 2 gamma + 1"),
    );
    let closed = scaling::subcritical_limit_variance(p, gamma)?;
    report.push(
        Check::new("limit variance formula at p_hat", closed, (closed - target).abs() <= 1e-12)
            .target(target)
            .informational(),
    );
    Ok(report)
}

fn critical_scaling(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let gamma = 0.0;
    let p = critical_p(gamma);
    let spec = MemorySpec::power_law(gamma);
    let (n1, n2) = (1_000_000u64, 10_000_000u64);
    let n_mc = opts.pick(100_000u64, 1_000_000);
    let reps = opts.pick(2_000usize, 10_000);
    let mut report = ExperimentReport::new(
        "critical-scaling",
        json!({ "spec": spec, "p": p, "n_deterministic": [n1, n2], "n_mc": n_mc, "innovation": "rademacher" }),
    );
    report.replicas = reps;
    report.n_grid = vec![n_mc, n1, n2];
    let nlogn = |n: u64| n as f64 * (n as f64).ln();
    let mut cur = MomentCursor::second(&spec, p, 1.0)?;
    let mc_row = cur.advance_to(n_mc)?;
    let r1row = cur.advance_to(n1)?;
    let r2row = cur.advance_to(n2)?;
    let r1 = r1row.seq.sigma_sq() / nlogn(n1);
    let r2 = r2row.seq.sigma_sq() / nlogn(n2);
    let drift = (r2 / r1 - 1.0).abs();
    report.push(
        Check::new("sigma_n^2/(n log n) drift 1e6 -> 1e7", drift, drift <= 0.02)
            .target(0.0)
            .tolerance("<= 2%")
            .provenance("deterministic sequences"),
    );
    // Fit r = C + D / log n through both points to read off the limit.
    let (l1, l2) = ((n1 as f64).ln(), (n2 as f64).ln());
    let d = (r1 - r2) / (1.0 / l1 - 1.0 / l2);
    let limit = r2 - d / l2;
    report.push(
        Check::new("extrapolated limit of sigma_n^2/(n log n)", limit, rel_err(limit, 1.0) <= 0.02)
            .target(1.0)
            .tolerance(pct(0.02))
            .provenance("(gamma+1)/(alpha+gamma+1)"),
    );
    report.notes.push(format!("sigma_n^2/(n log n): {r1:.6} at 1e6, {r2:.6} at 1e7"));
    let ratio = r2row.e_s_sq / r2row.seq.sigma_sq();
    let target = (2.0 * gamma + 1.0f64).powi(2);
    report.push(
        Check::new("exact E S_n^2 / sigma_n^2 at n=1e7", ratio, rel_err(ratio, target) <= 0.10)
            .target(target)
            .tolerance(pct(0.10))
            .provenance("(2 gamma + 1)^2"),
    );
    let sigma = mc_row.seq.sigma_sq().sqrt();
    let cfg = WalkConfig::new(spec, p, rademacher(), n_mc, opts.seed);
    let x = walk::map_batch(&cfg, reps, opts.seed, opts.threads, |t| Ok(t.s_final() / sigma))?;
    let g = stats::gaussianity_test(&x, target)?;
    report.push(ks_check("KS S_n/sigma_n vs N(0, 1)", &g.ks, opts.thresholds.min_p, "(2 gamma + 1)^2"));
    report.push(
        Check::new("Monte Carlo E (S_n/sigma_n)^2", g.second_moment, true)
            .target(mc_row.e_s_sq / mc_row.seq.sigma_sq())
            .informational(),
    );
    Ok(report)
}

fn novel_critical(_opts: &SuiteOptions) -> Result<ExperimentReport> {
    let slow = MemorySpec::slow_growth(0.5, 0.5);
    let zeta = MemorySpec::log_modulated(0.0, -1.0, ZetaSpec::Zero);
    let grid = [100_000u64, 1_000_000, 10_000_000];
    let mut report = ExperimentReport::new("novel-critical", json!({ "specs": [slow, zeta], "n": grid }));
    report.n_grid = grid.to_vec();

    let (g, a) = (0.5, 0.5);
    let mut cur = SequenceCursor::new(&slow, critical_p(g))?;
    let target = (g + 1.0) / (1.0 - a);
    for &n in &grid {
        let s2 = cur.advance_to(n)?.sigma_sq();
        let nf = n as f64;
        let r = s2 / (nf * nf.ln().powf(0.5));
        report.plot.push(PlotRow {
            series: "slow_growth sigma^2/(n (log n)^0.5)".into(),
            n: nf,
            estimate: r,
            target: Some(target),
            lo: None,
            hi: None,
        });
        if n == grid[2] {
            report.push(
                Check::new("slow growth sigma_n^2/(n (log n)^0.5) at n=1e7", r, rel_err(r, target) <= 0.15)
                    .target(target)
                    .tolerance(pct(0.15))
                    .provenance("(gamma+1)/(1-alpha)"),
            );
        }
    }

    let mut cur = SequenceCursor::new(&zeta, critical_p(0.0))?;
    let mut ratios = Vec::new();
    for &n in &grid {
        let s2 = cur.advance_to(n)?.sigma_sq();
        let nf = n as f64;
        let r = s2 / (nf * nf.ln() * nf.ln().ln());
        ratios.push(r);
        report.plot.push(PlotRow {
            series: "zeta_zero sigma^2/(n log n log log n)".into(),
            n: nf,
            estimate: r,
            target: None,
            lo: None,
            hi: None,
        });
    }
    let (d1, d2) = (ratios[1] - ratios[0], ratios[2] - ratios[1]);
    report.push(
        Check::new("zeta zero drift shrinks over 1e5, 1e6, 1e7", d2.abs(), d2.abs() < d1.abs())
            .tolerance("|r(1e7) - r(1e6)| < |r(1e6) - r(1e5)|")
            .provenance("trend only"),
    );
    report.push(
        Check::new("zeta zero ratios monotone decreasing", ratios[2], d1 < 0.0 && d2 < 0.0).informational(),
    );
    report.notes.push(format!("zeta zero ratios {:.6} {:.6} {:.6}", ratios[0], ratios[1], ratios[2]));
    report.notes.push("Monte Carlo at these scales converges too slowly and is not part of this suite".into());
    Ok(report)
}

fn supercritical_as(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let (gamma, p) = (0.0, 0.9);
    let spec = MemorySpec::power_law(gamma);
    let (lo, hi) = (100_000u64, 10_000_000u64);
    let paths = opts.pick(200usize, 1_000);
    let (w1, w2) = (100_000u64, 400_000u64);
    let mut report = ExperimentReport::new(
        "supercritical-as",
        json!({ "spec": spec, "p": p, "flat_range": [lo, hi], "windows": [[w1, w2 / 2], [w1, w2]], "innovation": "rademacher" }),
    );
    report.replicas = paths;

    let mut cur = MomentCursor::second(&spec, p, 1.0)?;
    let mut vals = Vec::new();
    for n in geometric_grid(hi, 20).into_iter().filter(|&n| n >= lo) {
        let r = cur.advance_to(n)?;
        let v = r.seq.a_mu().powi(2) * r.e_s_sq;
        vals.push(v);
        report.plot.push(PlotRow { series: "(a_n mu_n)^2 E S_n^2".into(), n: n as f64, estimate: v, target: None, lo: None, hi: None });
    }
    let (mn, mx) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let drift = mx / mn - 1.0;
    report.push(
        Check::new("(a_n mu_n)^2 E S_n^2 drift over [1e5, 1e7]", drift, drift <= 0.01)
            .target(0.0)
            .tolerance("max/min - 1 <= 1%")
            .provenance("moment recursion"),
    );

    let step = 500u64;
    let cps: Vec<u64> = (w1 / step..=w2 / step).map(|k| k * step).collect();
    report.n_grid = vec![w1, w2 / 2, w2];
    let cfg = WalkConfig::new(spec.clone(), p, rademacher(), w2, opts.seed).with_checkpoints(cps);
    let trajs = walk::simulate_batch(&cfg, paths, opts.seed, opts.threads)?;
    let seq = build_sequences(&spec, p, w2 as usize)?;
    let regime = classify_regime(&spec, p)?;
    let asc = stats::as_convergence_check(&trajs, &regime, &seq, (w1, w2 / 2), (w1, w2))?;
    report.push(
        Check::new("oscillation q90 shrink, [1e5, 4e5] vs [1e5, 2e5]", asc.shrink, asc.passed)
            .target(stats::AS_SHRINK)
            .tolerance(">= 40% shrink")
            .provenance("oscillation diagnostic"),
    );
    let dyadic = stats::as_convergence_check(&trajs, &regime, &seq, (w1, w2 / 2), (w2 / 2, w2))?;
    report.push(
        Check::new("oscillation q90 shrink, [2e5, 4e5] vs [1e5, 2e5]", dyadic.shrink, dyadic.passed)
            .target(stats::AS_SHRINK)
            .tolerance(">= 40% shrink")
            .informational(),
    );
    report.notes.push(format!(
        "q90 oscillation: [1e5,2e5] {:.4e}, [1e5,4e5] {:.4e}, [2e5,4e5] {:.4e}",
        asc.base.q90, asc.doubled.q90, dyadic.doubled.q90
    ));
    report.notes.push(
        "almost-sure convergence is operationalized by the shrink of pathwise oscillations over checkpoints every 500 steps".into(),
    );
    Ok(report)
}

fn kurtosis(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let (gamma, p) = (0.0, 0.9);
    let spec = MemorySpec::power_law(gamma);
    let n_mc = opts.pick(10_000u64, 100_000);
    let reps = opts.pick(10_000usize, 100_000);
    let n_exact = 1_000_000u64;
    let mut report = ExperimentReport::new(
        "kurtosis",
        json!({ "spec": spec, "p": p, "n_exact": n_exact, "n_mc": n_mc, "innovation": "rademacher" }),
    );
    report.replicas = reps;
    report.n_grid = vec![n_mc, n_exact];
    let mut cur = MomentCursor::rademacher(&spec, p)?;
    let row_mc = cur.advance_to(n_mc)?;
    let oracle = row_mc.fourth.expect("fourth moments").kurtosis_m;
    let k_exact = cur.advance_to(n_exact)?.fourth.expect("fourth moments").kurtosis_m;
    report.push(
        Check::new("recursion kurtosis_M at n=1e6", k_exact, k_exact < 3.0)
            .target(3.0)
            .tolerance(format!("< 3, margin {:.6}", 3.0 - k_exact))
            .provenance("fourth-moment recursion"),
    );
    // With constant memory Y_n = S_n, so M_n = a_n S_n.
    assert!(spec.is_constant());
    let a_n = row_mc.seq.a();
    let cfg = WalkConfig::new(spec.clone(), p, rademacher(), n_mc, opts.seed);
    let m = walk::map_batch(&cfg, reps, opts.seed, opts.threads, |t| Ok(a_n * t.s_final()))?;
    let regime = classify_regime(&spec, p)?;
    let kc = stats::kurtosis_check(&m, &cfg.innovation, &regime, Some(oracle))?;
    let k = kc.estimate;
    report.push(
        Check::new("sample kurtosis of M_n below 3", k.kurtosis, kc.below_three_z >= 3.0)
            .se(k.se)
            .target(3.0)
            .tolerance(">= 3 SE below 3")
            .provenance("jackknife SE"),
    );
    report.push(
        Check::new("sample kurtosis of M_n vs recursion", k.kurtosis, kc.oracle_z.is_some_and(|z| z <= 3.0))
            .se(k.se)
            .target(oracle)
            .tolerance("within 3 SE")
            .provenance("fourth-moment recursion"),
    );
    Ok(report)
}

fn marginal_law(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let (gamma, p, n) = (1.0, 0.6, 50u64);
    let reps = opts.pick(20_000usize, 100_000);
    let spec = MemorySpec::power_law(gamma);
    let mut report = ExperimentReport::new(
        "marginal-law",
        json!({ "spec": spec, "p": p, "n": n, "enumeration_n": 8, "innovation": "rademacher" }),
    );
    report.replicas = reps;
    report.n_grid = vec![8, n];
    let e = moments::enumerate_exact(&spec, p, 8, &FiniteLaw::rademacher(), DEFAULT_NODE_CAP)?;
    let dev = e.prob_x_positive.iter().map(|q| (q - 0.5).abs()).fold(0.0, f64::max);
    report.push(
        Check::new("max |P(X_k = 1) - 1/2|, k <= 8", dev, dev <= 1e-12)
            .target(0.0)
            .tolerance("<= 1e-12")
            .provenance("exhaustive enumeration"),
    );
    let cfg = WalkConfig::new(spec.clone(), p, rademacher(), n, opts.seed);
    let x = walk::marginal_law_sample(&cfg, n, reps, opts.seed, opts.threads)?;
    let plus = x.iter().filter(|&&v| v > 0.0).count() as u64;
    let chi = stats::chi_square_test(&[plus, x.len() as u64 - plus], &[0.5, 0.5])?;
    report.push(
        Check::new("chi-square of X_50 vs Rademacher", chi.statistic, chi.p_value > opts.thresholds.min_p)
            .p_value(chi.p_value)
            .tolerance(format!("p > {}", opts.thresholds.min_p))
            .provenance("innovation law"),
    );
    let ncfg = WalkConfig { innovation: InnovationSpec::StandardNormal, ..cfg };
    let y = walk::marginal_law_sample(&ncfg, n, reps, opts.sub_seed(1), opts.threads)?;
    let ks = stats::ks_test(&y, normal_cdf)?;
    report.push(ks_check("KS of X_50 vs N(0, 1), Gaussian innovations", &ks, opts.thresholds.min_p, "innovation law").informational());
    Ok(report)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

fn slln(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let n = opts.pick(100_000u64, 1_000_000);
    let n0 = opts.pick(1_000u64, 10_000);
    let paths = opts.pick(200usize, 1_000);
    let ps = [0.0, 0.5, 0.9];
    let gammas = [0.0, 1.0];
    let mut report = ExperimentReport::new(
        "slln",
        json!({ "p": ps, "gammas": gammas, "n": n, "n0": [n0, 4 * n0], "checkpoints_per_decade": 200, "innovation": "rademacher" }),
    );
    report.replicas = paths;
    report.n_grid = vec![n0, 4 * n0, n];
    let cps: Vec<u64> = geometric_grid(n, 200).into_iter().filter(|&k| k >= n0).collect();
    let mut i = 0u64;
    for &gamma in &gammas {
        for &p in &ps {
            let seed = opts.sub_seed(i);
            i += 1;
            let cfg = WalkConfig::new(MemorySpec::power_law(gamma), p, rademacher(), n, seed).with_checkpoints(cps.clone());
            let trajs = walk::simulate_batch(&cfg, paths, seed, opts.threads)?;
            let r = stats::slln_check(&trajs, p, n0, seed)?;
            let regime = classify_regime(&cfg.spec, p)?.regime;
            report.push(
                Check::new(format!("gamma={gamma} p={p} ({regime:?}) median ratio"), r.ratio, r.passed)
                    .se(r.ratio_se)
                    .target(0.5)
                    .tolerance("<= 0.5 + 3 SE")
                    .provenance("halving of sup-tail medians"),
            );
        }
    }
    report.notes.push(format!("sup over n >= n0 is taken over {} geometric checkpoints up to n = {n}", cps.len()));
    Ok(report)
}

fn karamata(_opts: &SuiteOptions) -> Result<ExperimentReport> {
    let n = 1_000_000u64;
    let mut report = ExperimentReport::new("karamata", json!({ "n": n }));
    report.n_grid = vec![n, 2 * n];
    let gammas = [-0.5, 0.0, 0.5, 1.0];
    let families: Vec<MemorySpec> = gammas
        .iter()
        .flat_map(|&g| [MemorySpec::power_law(g), MemorySpec::continued_product(g)])
        .collect();
    for spec in &families {
        let g = spec.gamma();
        let row = SequenceCursor::new(spec, 0.0)?.advance_to(n)?;
        let r = (g + 1.0) * row.nu / (n as f64 * row.mu);
        report.push(
            Check::new(format!("{} gamma={g}: (gamma+1) nu_n/(n mu_n)", spec.family_name()), r, rel_err(r, 1.0) <= 0.02)
                .target(1.0)
                .tolerance(pct(0.02))
                .provenance("Karamata"),
        );
    }
    for spec in [
        MemorySpec::log_modulated(0.0, -1.0, ZetaSpec::Zero),
        MemorySpec::log_modulated(1.0, 0.5, ZetaSpec::Zero),
        MemorySpec::slow_growth(0.5, 0.5),
    ] {
        let g = spec.gamma();
        let tol = if matches!(spec, MemorySpec::SlowGrowth { .. }) { 0.10 } else { 0.02 };
        let row = SequenceCursor::new(&spec, 0.0)?.advance_to(n)?;
        let r = (g + 1.0) * row.nu / (n as f64 * row.mu);
        report.push(
            Check::new(format!("{} gamma={g}: (gamma+1) nu_n/(n mu_n)", spec.family_name()), r, rel_err(r, 1.0) <= tol)
                .target(1.0)
                .tolerance(pct(tol))
                .informational(),
        );
    }
    for gamma in [0.0, 1.0] {
        let spec = MemorySpec::power_law(gamma);
        for p in [0.25, 0.5, 0.9] {
            let mut cur = SequenceCursor::new(&spec, p)?;
            let la = cur.advance_to(n)?.log_a;
            let la2 = cur.advance_to(2 * n)?.log_a;
            let idx = (la2 - la) / std::f64::consts::LN_2;
            let target = -p * (gamma + 1.0);
            report.push(
                Check::new(format!("power_law gamma={gamma} p={p}: RV index of a_n"), idx, (idx - target).abs() <= 0.02)
                    .target(target)
                    .tolerance("abs diff <= 0.02")
                    .provenance("-p (gamma+1)"),
            );
        }
    }
    let (gamma, p) = (1.0, 0.7);
    let spec = MemorySpec::power_law(gamma);
    let row = SequenceCursor::new(&spec, p)?.advance_to(n)?;
    let v = 1.0 - p * row.a_mu() * row.eta;
    let target = gamma / (gamma - p * (gamma + 1.0));
    report.push(
        Check::new("gamma=1 p=0.7: 1 - p a_n mu_n eta_n", v, rel_err(v, target) <= 0.02)
            .target(target)
            .tolerance(pct(0.02))
            .provenance("gamma/(gamma - p(gamma+1))"),
    );
    for (gamma, p) in [(0.0, 0.25), (1.0, 0.5), (1.0, 0.6)] {
        let spec = MemorySpec::power_law(gamma);
        let row = SequenceCursor::new(&spec, p)?.advance_to(n)?;
        let v = row.sigma_sq() * (2.0 * gamma + 1.0 - 2.0 * p * (gamma + 1.0)) / n as f64;
        report.push(
            Check::new(format!("gamma={gamma} p={p}: sigma_n^2 (2 gamma + 1 - 2p(gamma+1)) / n"), v, rel_err(v, 1.0) <= 0.03)
                .target(1.0)
                .tolerance(pct(0.03))
                .informational(),
        );
    }
    Ok(report)
}

fn performance(opts: &SuiteOptions) -> Result<ExperimentReport> {
    let n = opts.pick(10_000_000u64, 100_000_000);
    let spec = MemorySpec::power_law(0.0);
    let cfg = WalkConfig::new(spec, 0.5, rademacher(), n, opts.seed).with_sampler(SamplerMode::Fenwick);
    let mut report = ExperimentReport::new("performance", json!({ "config": cfg }));
    report.n_grid = vec![n];
    report.replicas = 1;
    let (own, shared) = cfg.memory_estimate();
    let start = Instant::now();
    let t = walk::simulate(&cfg)?;
    let secs = start.elapsed().as_secs_f64();
    report.push(
        Check::new("wall time of one walk (s)", secs, secs <= 300.0)
            .target(300.0)
            .tolerance("<= 300 s")
            .provenance("performance contract"),
    );
    let ns = secs * 1e9 / n as f64;
    report.push(Check::new("ns per step", ns, true).informational());
    let bytes = (own + shared) as f64 / n as f64;
    report.push(Check::new("bytes per step", bytes, bytes <= 16.0).tolerance("<= 16").informational());
    report.notes.push(format!("final S_n = {}", t.s_final()));
    Ok(report)
}

/// Exploratory correlation report for a critical example under a time scale.
/// Simulation runs at `p = p_c`; the report never carries an acceptance verdict.
#[allow(clippy::too_many_arguments)]
pub fn timescale_report(
    spec: &MemorySpec,
    mode: TimescaleMode,
    n: u64,
    ts: &[f64],
    replicas: usize,
    seed: u64,
    threads: usize,
    max_steps: u64,
) -> Result<ExperimentReport> {
    let example = CriticalExample::from_spec(spec)?;
    if ts.len() < 2 {
        return Err(Error::InvalidInput("need at least two time points".into()));
    }
    let p = critical_p(spec.gamma());
    let points: Vec<scaling::TimescalePoint> =
        ts.iter().map(|&t| scaling::exploratory_timescale(spec, mode, t, n)).collect::<Result<_>>()?;
    let mut idx: Vec<u64> = points.iter().map(|q| q.index).collect();
    idx.sort_unstable();
    idx.dedup();
    let top = *idx.last().expect("nonempty");
    if top > max_steps {
        return Err(Error::ResourceLimit(format!("time scale reaches index {top}, above the step cap {max_steps}")));
    }
    let mut report = ExperimentReport::new(
        "timescale",
        json!({ "spec": spec, "p": p, "mode": mode, "n": n, "t": ts, "points": points, "innovation": "rademacher" }),
    );
    report.replicas = replicas;
    report.master_seed = Some(seed);
    report.n_grid = idx.clone();
    report.notes.push("slow convergence; no acceptance".into());
    report.notes.push(format!("prediction: {}", example.prediction_text(mode)));
    let regime = classify_regime(spec, p)?;
    if regime.regime != Regime::CriticalUnboundedV {
        report.notes.push(format!("regime at p_c is {:?}", regime.regime));
    }
    let cfg = WalkConfig::new(spec.clone(), p, rademacher(), top, seed).with_checkpoints(idx);
    let trajs = walk::simulate_batch(&cfg, replicas, seed, threads)?;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let (a, b) = (&points[i], &points[j]);
            let x = column(&trajs, a.index)?;
            let y = column(&trajs, b.index)?;
            let c = correlation(&x, &y);
            let mut check = Check::new(format!("corr(S at t={}, S at t={})", a.t, b.t), c, true).informational();
            if let Some(pred) = example.predicted_correlation(mode, a.t, b.t) {
                check = check.target(pred);
            }
            report.push(check);
        }
    }
    for q in &points {
        if let Some(scale) = q.scale {
            let x = column(&trajs, q.index)?;
            let v = stats::second_moment(&x) / (scale * scale);
            report.push(Check::new(format!("E (S/scale)^2 at t={}", q.t), v, true).informational());
        }
    }
    report.verdict = Verdict::Inconclusive;
    Ok(report)
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (stats::mean(x), stats::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_covers_every_criterion() {
        for c in 1..=12u8 {
            assert!(SUITES.iter().any(|s| s.criterion == c), "criterion {c}");
        }
        assert!(run_suite("nope", &SuiteOptions::default()).is_err());
    }

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((correlation(&x, &y) - 1.0).abs() < 1e-12);
    }
}
