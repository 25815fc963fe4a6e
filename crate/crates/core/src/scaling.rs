//! Deterministic companion sequences of a memory sequence and the regime map.
//!
//! For recollection probability `p` the engine tracks
//! `nu_n = sum_{k<=n} mu_k`, `a_n = prod_{i<n} (1 + p mu_{i+1}/nu_i)^{-1}` (in log
//! space), `v_n^2 = sum_{k<=n} a_k^2 mu_k^2`, `sigma_n^2 = v_n^2 / (a_n mu_n)^2` and
//! either `eta_n = sum_{l<n} 1/(a_l nu_l)` or its tail counterpart
//! `eta_bar_n = sum_{l>=n} 1/(a_l nu_l)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{MemorySpec, ZetaSpec};

/// Absolute tolerance used when deciding that a parameter sits exactly on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// `p_c = (gamma + 1/2) / (gamma + 1)`.
pub fn critical_p(gamma: f64) -> f64 {
    (gamma + 0.5) / (gamma + 1.0)
}

/// `p_hat = gamma / (gamma + 1)`.
pub fn hat_p(gamma: f64) -> f64 {
    gamma / (gamma + 1.0)
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("recollection probability must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// One index of the companion sequences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceRow {
    pub n: u64,
    pub mu: f64,
    pub log_mu: f64,
    pub nu: f64,
    pub log_a: f64,
    pub log_v_sq: f64,
    /// `eta_n = sum_{l=1}^{n-1} 1/(a_l nu_l)`.
    pub eta: f64,
}

impl SequenceRow {
    pub fn a(&self) -> f64 {
        self.log_a.exp()
    }

    pub fn v_sq(&self) -> f64 {
        self.log_v_sq.exp()
    }

    pub fn sigma_sq(&self) -> f64 {
        (self.log_v_sq - 2.0 * (self.log_a + self.log_mu)).exp()
    }

    /// `a_n mu_n`.
    pub fn a_mu(&self) -> f64 {
        (self.log_a + self.log_mu).exp()
    }

    /// `1 / (a_n nu_n)`.
    pub fn inv_a_nu(&self) -> f64 {
        (-self.log_a - self.nu.ln()).exp()
    }
}

/// Streams the companion sequences one index at a time in O(1) memory.
#[derive(Clone, Debug)]
pub struct SequenceCursor<'a> {
    spec: &'a MemorySpec,
    p: f64,
    row: Option<SequenceRow>,
    v_scale: f64,
    v_sum: f64,
}

impl<'a> SequenceCursor<'a> {
    pub fn new(spec: &'a MemorySpec, p: f64) -> Result<Self> {
        spec.validate()?;
        check_p(p)?;
        Ok(SequenceCursor { spec, p, row: None, v_scale: 0.0, v_sum: 0.0 })
    }

    pub fn current(&self) -> Option<&SequenceRow> {
        self.row.as_ref()
    }

    /// Advance to the next index and return its row.
    pub fn advance(&mut self) -> Result<SequenceRow> {
        let n = self.row.map_or(1, |r| r.n + 1);
        self.spec.check_index(n)?;
        let log_mu = self.spec.log_mu_unchecked(n);
        let mu = self.spec.mu_unchecked(n);
        let row = match self.row {
            None => SequenceRow { n, mu, log_mu, nu: mu, log_a: 0.0, log_v_sq: 0.0, eta: 0.0 },
            Some(prev) => {
                let log_a = prev.log_a - (self.p * mu / prev.nu).ln_1p();
                let nu = prev.nu + mu;
                let eta = prev.eta + prev.inv_a_nu();
                SequenceRow { n, mu, log_mu, nu, log_a, log_v_sq: 0.0, eta }
            }
        };
        if !(row.nu.is_finite() && mu.is_finite() && mu > 0.0) {
            return Err(Error::Overflow(format!("nu_{n} leaves the double range")));
        }
        let log_term = 2.0 * (row.log_a + row.log_mu);
        if self.row.is_none() {
            self.v_scale = log_term;
            self.v_sum = 1.0;
        } else if log_term > self.v_scale {
            self.v_sum = self.v_sum * (self.v_scale - log_term).exp() + 1.0;
            self.v_scale = log_term;
        } else {
            self.v_sum += (log_term - self.v_scale).exp();
        }
        let row = SequenceRow { log_v_sq: self.v_scale + self.v_sum.ln(), ..row };
        self.row = Some(row);
        Ok(row)
    }

    /// Advance until index `n` and return that row.
    pub fn advance_to(&mut self, n: u64) -> Result<SequenceRow> {
        if n == 0 {
            return Err(Error::InvalidInput("indices start at 1".into()));
        }
        if let Some(r) = self.row {
            if r.n > n {
                return Err(Error::InvalidInput(format!("cursor already past {n}")));
            }
            if r.n == n {
                return Ok(r);
            }
        }
        loop {
            let r = self.advance()?;
            if r.n == n {
                return Ok(r);
            }
        }
    }
}

/// Which eta sequence a table stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaKind {
    /// `eta_n`, used when `sum 1/(a_n nu_n)` diverges (`p >= p_hat`).
    Forward,
    /// `eta_bar_n`, the tail sum, used when it converges (`p < p_hat`).
    Tail,
}

/// Truncation of the tail sum `eta_bar`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailTruncation {
    /// Last index summed explicitly.
    pub horizon: u64,
    /// Estimate of `sum_{l > horizon} 1/(a_l nu_l)` added to every entry,
    /// `horizon * t_horizon / (gamma - p (gamma + 1))` by regular variation of the terms.
    pub tail_estimate: f64,
}

/// Whether the eta kind for `(gamma, p)` is the tail sum.
pub fn eta_kind(gamma: f64, p: f64) -> EtaKind {
    if p * (gamma + 1.0) - gamma < -BOUNDARY_TOL {
        EtaKind::Tail
    } else {
        EtaKind::Forward
    }
}

/// Companion sequences for indices `1..=n_max`.
#[derive(Clone, Debug)]
pub struct SequenceTable {
    pub spec: MemorySpec,
    pub p: f64,
    pub n_max: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub log_a: Vec<f64>,
    pub v_sq: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_kind: EtaKind,
    pub tail: Option<TailTruncation>,
    pub regime: RegimeReport,
}

/// Build the companion sequences up to `n_max`.
pub fn build_sequences(spec: &MemorySpec, p: f64, n_max: usize) -> Result<SequenceTable> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    if let Some(len) = spec.table_len() {
        if n_max > len {
            return Err(Error::IndexOutOfRange { index: n_max as u64, len });
        }
    }
    let regime = classify_regime(spec, p)?;
    let mut cursor = SequenceCursor::new(spec, p)?;
    let mut t = SequenceTable {
        spec: spec.clone(),
        p,
        n_max,
        mu: Vec::with_capacity(n_max),
        nu: Vec::with_capacity(n_max),
        log_a: Vec::with_capacity(n_max),
        v_sq: Vec::with_capacity(n_max),
        sigma_sq: Vec::with_capacity(n_max),
        eta: Vec::with_capacity(n_max),
        eta_kind: eta_kind(spec.gamma(), p),
        tail: None,
        regime,
    };
    let mut log_mu = Vec::new();
    for _ in 0..n_max {
        let r = cursor.advance()?;
        t.mu.push(r.mu);
        t.nu.push(r.nu);
        t.log_a.push(r.log_a);
        t.v_sq.push(r.v_sq());
        t.sigma_sq.push(r.sigma_sq());
        t.eta.push(r.eta);
        if t.eta_kind == EtaKind::Tail {
            log_mu.push(r.log_mu);
        }
    }
    if t.eta_kind == EtaKind::Tail {
        let gamma = spec.gamma();
        let decay = gamma - p * (gamma + 1.0);
        let last = n_max - 1;
        let term = |i: usize| (-t.log_a[i] - t.nu[i].ln()).exp();
        let tail_estimate = n_max as f64 * term(last) / decay;
        let mut acc = tail_estimate;
        for i in (0..n_max).rev() {
            acc += term(i);
            t.eta[i] = acc;
        }
        t.tail = Some(TailTruncation { horizon: n_max as u64, tail_estimate });
    }
    Ok(t)
}

impl SequenceTable {
    pub fn len(&self) -> usize {
        self.n_max
    }

    pub fn is_empty(&self) -> bool {
        self.n_max == 0
    }

    /// `a_n` for 1-based `n`.
    pub fn a(&self, n: usize) -> f64 {
        self.log_a[n - 1].exp()
    }

    /// `a_n mu_n` for 1-based `n`.
    pub fn a_mu(&self, n: usize) -> f64 {
        self.log_a[n - 1].exp() * self.mu[n - 1]
    }

    /// Export with header `n,mu,nu,log_a,v_sq,sigma_sq,eta` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mu", "nu", "log_a", "v_sq", "sigma_sq", "eta"])?;
        for i in 0..self.n_max {
            w.write_record([
                (i + 1).to_string(),
                sci17(self.mu[i]),
                sci17(self.nu[i]),
                sci17(self.log_a[i]),
                sci17(self.v_sq[i]),
                sci17(self.sigma_sq[i]),
                sci17(self.eta[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn sci17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    CriticalUnboundedV,
    CriticalBoundedV,
    Supercritical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VBounded {
    True,
    False,
    HeuristicTrue,
    HeuristicFalse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitKind {
    /// Centered Gaussian process under `sqrt(n)` scaling.
    GaussianProcess,
    /// Gaussian multiple of `sqrt(t)` under `sigma_n` scaling.
    GaussianSqrtLine,
    /// Random (generally non-Gaussian) multiple of `sqrt(t)`.
    RandomSqrtLine,
    /// Random multiple of `t^{p(gamma+1)-gamma}`.
    RandomPowerLine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleKind {
    SqrtN,
    SigmaN,
    InverseAMu,
}

/// Predicted normalization of `S_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedScale {
    pub kind: ScaleKind,
    /// Closed-form expression for the scale itself, `"numeric"` when none is known.
    pub expression: String,
    /// Asymptotic form of `sigma_n^2` when the scale is `sigma_n`.
    pub sigma_sq_asymptotic: Option<String>,
    /// `sigma_n^2 ~ constant * sigma_sq_asymptotic` when the constant is explicit.
    pub constant: Option<f64>,
    /// Variance of the Gaussian limit of `S_n / expression` when explicit.
    pub limit_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub family: String,
    pub gamma: f64,
    pub p: f64,
    pub p_c: f64,
    pub p_hat: f64,
    pub regime: Regime,
    pub v_bounded: VBounded,
    pub predicted_scale: PredictedScale,
    pub limit_kind: LimitKind,
    /// False when the Gaussian-limit predictions fall outside `gamma > -1/2`.
    pub gaussian_limit_covered: bool,
    pub notes: Vec<String>,
}

/// Closed-form shape of `sigma_n^2` at criticality with unbounded `v_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaSqForm {
    /// `n log n`.
    NLogN,
    /// `n log n (log log n)^rho`.
    NLogNLogLogPow(f64),
    /// `n log n log log n log log log n`.
    NLogNLogLogLogLogLog,
    /// `n (log n)^alpha`.
    NLogPow(f64),
    Numeric,
}

impl SigmaSqForm {
    pub fn eval(&self, n: f64) -> Option<f64> {
        let l = n.ln();
        match self {
            SigmaSqForm::NLogN => Some(n * l),
            SigmaSqForm::NLogNLogLogPow(rho) => Some(n * l * l.ln().powf(*rho)),
            SigmaSqForm::NLogNLogLogLogLogLog => Some(n * l * l.ln() * l.ln().ln()),
            SigmaSqForm::NLogPow(alpha) => Some(n * l.powf(*alpha)),
            SigmaSqForm::Numeric => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            SigmaSqForm::NLogN => "n log n".into(),
            SigmaSqForm::NLogNLogLogPow(rho) if *rho == 1.0 => "n log n log log n".into(),
            SigmaSqForm::NLogNLogLogPow(rho) => format!("n log n (log log n)^{}", fmt_num(*rho)),
            SigmaSqForm::NLogNLogLogLogLogLog => "n log n log log n log log log n".into(),
            SigmaSqForm::NLogPow(alpha) => format!("n (log n)^{}", fmt_num(*alpha)),
            SigmaSqForm::Numeric => "numeric".into(),
        }
    }
}

/// Compact rendering of a parameter inside an expression.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{:.6}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_TOL * b.abs().max(1.0)
}

/// Critical-regime analysis of a cataloged family: boundedness of `v_n` at
/// `p_c` and, when unbounded, the closed form of `sigma_n^2` with its constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalShape {
    Unbounded { form: SigmaSqForm, constant: Option<f64> },
    Bounded,
    Heuristic { bounded: bool },
}

fn critical_shape(spec: &MemorySpec) -> Result<CriticalShape> {
    let g1 = spec.gamma() + 1.0;
    Ok(match spec {
        MemorySpec::PowerLaw { .. } | MemorySpec::ContinuedProduct { .. } => {
            CriticalShape::Unbounded { form: SigmaSqForm::NLogN, constant: Some(1.0) }
        }
        MemorySpec::LogModulated { alpha, zeta, .. } => {
            let s = alpha + g1;
            if near(s, 0.0) {
                match zeta {
                    ZetaSpec::Zero => CriticalShape::Unbounded {
                        form: SigmaSqForm::NLogNLogLogPow(1.0),
                        constant: Some(1.0),
                    },
                    ZetaSpec::Power { kappa, rho } => {
                        if *kappa > 0.0 {
                            CriticalShape::Unbounded {
                                form: SigmaSqForm::NLogNLogLogPow(*rho),
                                constant: Some(g1 / (kappa * (1.0 - rho))),
                            }
                        } else {
                            CriticalShape::Bounded
                        }
                    }
                    ZetaSpec::LogLog { kappa } => {
                        let k = kappa + g1;
                        if near(k, 0.0) {
                            CriticalShape::Unbounded { form: SigmaSqForm::NLogNLogLogLogLogLog, constant: Some(1.0) }
                        } else if k > 0.0 {
                            CriticalShape::Unbounded { form: SigmaSqForm::NLogNLogLogPow(1.0), constant: Some(g1 / k) }
                        } else {
                            CriticalShape::Bounded
                        }
                    }
                }
            } else if s > 0.0 {
                CriticalShape::Unbounded { form: SigmaSqForm::NLogN, constant: Some(g1 / s) }
            } else {
                CriticalShape::Bounded
            }
        }
        MemorySpec::SlowGrowth { delta, .. } => {
            let a = delta.alpha();
            CriticalShape::Unbounded { form: SigmaSqForm::NLogPow(a), constant: Some(g1 / (1.0 - a)) }
        }
        MemorySpec::CustomTable { values, .. } => CriticalShape::Heuristic { bounded: custom_v_bounded(spec, values.len())? },
    })
}

/// Heuristic boundedness of `v_n^2` at `p_c`: `v^2_{2n} / v^2_n < 1 + 1e-3` over the last three doublings.
fn custom_v_bounded(spec: &MemorySpec, len: usize) -> Result<bool> {
    let p = critical_p(spec.gamma()).clamp(0.0, 1.0);
    if len < 16 {
        return Ok(false);
    }
    let mut cursor = SequenceCursor::new(spec, p)?;
    let mut v = Vec::with_capacity(4);
    let checkpoints = [len / 8, len / 4, len / 2, len];
    for &c in &checkpoints {
        v.push(cursor.advance_to(c as u64)?.v_sq());
    }
    Ok(v.windows(2).all(|w| w[1] / w[0] < 1.0 + 1e-3))
}

/// Expression for `1/(a_n mu_n)` under bounded `v_n`, as `n^theta` times a slowly varying factor.
fn inverse_a_mu_expression(spec: &MemorySpec, p: f64) -> String {
    let gamma = spec.gamma();
    let g1 = gamma + 1.0;
    let theta = p * g1 - gamma;
    let power = if near(theta, 0.5) { "sqrt(n".to_string() } else { format!("n^{}", fmt_num(theta)) };
    let critical = near(theta, 0.5);
    // The slowly varying factor of 1/(a_n mu_n) is l_n^{p-1}; at p_c this is l_n^{-1/(2(gamma+1))}.
    let mut factors: Vec<String> = Vec::new();
    match spec {
        MemorySpec::PowerLaw { .. } | MemorySpec::ContinuedProduct { .. } => {}
        MemorySpec::LogModulated { alpha, zeta, .. } => {
            let e = if critical { -1.0 / g1 } else { p - 1.0 };
            if *alpha != 0.0 {
                factors.push(format!("(log n)^{}", fmt_num(e * alpha)));
            }
            match zeta {
                ZetaSpec::Zero => {}
                ZetaSpec::Power { kappa, rho } => {
                    factors.push(format!("exp({} (log log n)^{})", fmt_num(e * kappa), fmt_num(1.0 - rho)))
                }
                ZetaSpec::LogLog { kappa } => factors.push(format!("(log log n)^{}", fmt_num(e * kappa))),
            }
        }
        MemorySpec::SlowGrowth { delta, .. } => {
            let e = if critical { -1.0 / g1 } else { p - 1.0 };
            factors.push(format!("exp({} (log n)^{})", fmt_num(e), fmt_num(1.0 - delta.alpha())));
        }
        MemorySpec::CustomTable { .. } => factors.push("l_n^(p-1)".into()),
    }
    if critical {
        // Squared scale is n * l_n^{-1/(gamma+1)}.
        let mut s = power;
        for f in factors {
            s.push(' ');
            s.push_str(&f);
        }
        s.push(')');
        s
    } else {
        let mut s = power;
        for f in factors {
            s.push(' ');
            s.push_str(&f);
        }
        s
    }
}

/// Regime classification and predicted scaling for `(spec, p)`.
pub fn classify_regime(spec: &MemorySpec, p: f64) -> Result<RegimeReport> {
    spec.validate()?;
    check_p(p)?;
    let gamma = spec.gamma();
    let p_c = critical_p(gamma);
    let p_hat = hat_p(gamma);
    let covered = gamma > -0.5;
    let mut notes = Vec::new();
    let (regime, v_bounded, predicted_scale, limit_kind);
    if near(p, p_c) {
        let shape = critical_shape(spec)?;
        let (bounded, heuristic) = match shape {
            CriticalShape::Unbounded { .. } => (false, false),
            CriticalShape::Bounded => (true, false),
            CriticalShape::Heuristic { bounded } => (bounded, true),
        };
        v_bounded = match (bounded, heuristic) {
            (true, false) => VBounded::True,
            (false, false) => VBounded::False,
            (true, true) => VBounded::HeuristicTrue,
            (false, true) => VBounded::HeuristicFalse,
        };
        if heuristic {
            notes.push("boundedness of v_n decided from the finite table (v^2 growth over three doublings)".into());
        }
        if bounded {
            regime = Regime::CriticalBoundedV;
            limit_kind = LimitKind::RandomSqrtLine;
            predicted_scale = PredictedScale {
                kind: ScaleKind::InverseAMu,
                expression: inverse_a_mu_expression(spec, p),
                sigma_sq_asymptotic: None,
                constant: None,
                limit_variance: None,
            };
        } else {
            regime = Regime::CriticalUnboundedV;
            limit_kind = LimitKind::GaussianSqrtLine;
            let (form, constant) = match shape {
                CriticalShape::Unbounded { form, constant } => (form, constant),
                _ => (SigmaSqForm::Numeric, None),
            };
            let expression = match form {
                SigmaSqForm::Numeric => "sigma_n".to_string(),
                f => format!("sqrt({})", f.describe()),
            };
            predicted_scale = PredictedScale {
                kind: ScaleKind::SigmaN,
                expression,
                sigma_sq_asymptotic: Some(form.describe()),
                constant,
                limit_variance: constant.map(|c| (2.0 * gamma + 1.0).powi(2) * c),
            };
        }
    } else if p < p_c {
        regime = Regime::Subcritical;
        v_bounded = VBounded::False;
        limit_kind = LimitKind::GaussianProcess;
        predicted_scale = PredictedScale {
            kind: ScaleKind::SqrtN,
            expression: "sqrt(n)".into(),
            sigma_sq_asymptotic: Some("n".into()),
            constant: if covered { Some(1.0 / (2.0 * gamma + 1.0 - 2.0 * p * (gamma + 1.0))) } else { None },
            limit_variance: if covered { Some(subcritical_limit_variance(p, gamma)?) } else { None },
        };
    } else {
        regime = Regime::Supercritical;
        v_bounded = VBounded::True;
        limit_kind = LimitKind::RandomPowerLine;
        predicted_scale = PredictedScale {
            kind: ScaleKind::InverseAMu,
            expression: inverse_a_mu_expression(spec, p),
            sigma_sq_asymptotic: None,
            constant: None,
            limit_variance: None,
        };
    }
    if !covered && matches!(regime, Regime::Subcritical | Regime::CriticalUnboundedV) {
        notes.push("Gaussian-limit prediction not covered for gamma <= -1/2".into());
    }
    Ok(RegimeReport {
        family: spec.family_name().to_string(),
        gamma,
        p,
        p_c,
        p_hat,
        regime,
        v_bounded,
        predicted_scale,
        limit_kind,
        gaussian_limit_covered: covered,
        notes,
    })
}

fn check_diffusive_domain(p: f64, gamma: f64) -> Result<()> {
    if !gamma.is_finite() || gamma <= -0.5 {
        return Err(Error::InvalidInput(format!("requires gamma > -1/2, got {gamma}")));
    }
    if !(p >= 0.0 && p < critical_p(gamma)) || near(p, critical_p(gamma)) {
        return Err(Error::InvalidInput(format!("requires 0 <= p < p_c = {}, got {p}", critical_p(gamma))));
    }
    Ok(())
}

/// Limiting variance of `S_n / sqrt(n)` in the subcritical regime.
pub fn subcritical_limit_variance(p: f64, gamma: f64) -> Result<f64> {
    check_diffusive_domain(p, gamma)?;
    if near(p, hat_p(gamma)) {
        return Ok(2.0 * gamma * gamma + 2.0 * gamma + 1.0);
    }
    Ok((2.0 * gamma + 1.0 - p) / ((1.0 - p) * (2.0 * (1.0 - p) * (gamma + 1.0) - 1.0)))
}

/// Covariance kernel of the diffusive limit process; symmetric in `(s, t)`.
pub fn covariance_kernel(s: f64, t: f64, p: f64, gamma: f64) -> Result<f64> {
    check_diffusive_domain(p, gamma)?;
    if !(s >= 0.0 && t >= 0.0) || !s.is_finite() || !t.is_finite() {
        return Err(Error::InvalidInput(format!("times must be nonnegative and finite, got ({s}, {t})")));
    }
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    if s == 0.0 {
        return Ok(0.0);
    }
    let g1 = gamma + 1.0;
    let decay = gamma - p * g1;
    if decay.abs() <= BOUNDARY_TOL {
        return Ok(s * (gamma * gamma + g1 * g1 - gamma * g1 * (s / t).ln()));
    }
    let c = p * ((2.0 - p) * g1 - 1.0) / (2.0 * (1.0 - p) * g1 - 1.0);
    Ok(s / ((1.0 - p) * decay) * (gamma - c * (s / t).powf(decay)))
}

/// Numeric and closed-form critical scale at index `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalScale {
    pub n: u64,
    pub p_c: f64,
    pub regime: Regime,
    /// `"sigma_n"` or `"1/(a_n mu_n)"`.
    pub descriptor: String,
    /// Closed form of the squared scale (`sigma_n^2` form) or of the scale itself when bounded.
    pub closed_form: String,
    pub constant: Option<f64>,
    /// `sigma_n` from the sequences, or `1/(a_n mu_n)` in the bounded case.
    pub numeric_scale: f64,
    pub numeric_sigma_sq: f64,
    /// `numeric squared scale / closed form`; tends to `constant` (or to `1/C_mu` when bounded).
    pub ratio_to_closed_form: Option<f64>,
    /// Stabilized `n a_n^2 mu_n^2 / l_n^{1/(gamma+1)}`.
    pub c_mu_estimate: f64,
}

/// Critical scale of a cataloged family at `p = p_c`.
pub fn critical_scale(spec: &MemorySpec, n: u64) -> Result<CriticalScale> {
    let gamma = spec.gamma();
    let p_c = critical_p(gamma);
    if !(0.0..=1.0).contains(&p_c) {
        return Err(Error::InvalidInput(format!("p_c = {p_c} lies outside [0, 1] for gamma = {gamma}")));
    }
    let report = classify_regime(spec, p_c)?;
    let mut cursor = SequenceCursor::new(spec, p_c)?;
    let row = cursor.advance_to(n)?;
    let nf = n as f64;
    let log_ell = spec.log_slowly_varying(n);
    let c_mu_estimate = (nf.ln() + 2.0 * (row.log_a + row.log_mu) - log_ell / (gamma + 1.0)).exp();
    let sigma_sq = row.sigma_sq();
    Ok(match report.regime {
        Regime::CriticalBoundedV => {
            let inv = 1.0 / row.a_mu();
            // Squared closed form n l_n^{-1/(gamma+1)}.
            let form_sq = (nf.ln() - log_ell / (gamma + 1.0)).exp();
            CriticalScale {
                n,
                p_c,
                regime: report.regime,
                descriptor: "1/(a_n mu_n)".into(),
                closed_form: report.predicted_scale.expression.clone(),
                constant: None,
                numeric_scale: inv,
                numeric_sigma_sq: sigma_sq,
                ratio_to_closed_form: Some(inv * inv / form_sq),
                c_mu_estimate,
            }
        }
        _ => {
            let form = match critical_shape(spec)? {
                CriticalShape::Unbounded { form, .. } => form,
                _ => SigmaSqForm::Numeric,
            };
            CriticalScale {
                n,
                p_c,
                regime: report.regime,
                descriptor: "sigma_n".into(),
                closed_form: form.describe(),
                constant: report.predicted_scale.constant,
                numeric_scale: sigma_sq.sqrt(),
                numeric_sigma_sq: sigma_sq,
                ratio_to_closed_form: form.eval(nf).map(|f| sigma_sq / f),
                c_mu_estimate,
            }
        }
    })
}

/// Time-change used by the exploratory timescale experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimescaleMode {
    Exponential,
    BrownianTuned,
}

/// Critical families with explicit nonlinear time-scale results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "kebab-case")]
pub enum CriticalExample {
    /// `sigma_n^2 ~ c n log n` (`alpha + gamma + 1 > 0`).
    NLogN { gamma: f64, alpha: f64 },
    ZetaZero { gamma: f64 },
    ZetaPowerZero { gamma: f64, kappa: f64, rho: f64 },
    LogLogZero { gamma: f64, kappa: f64 },
    LogLogLogZero { gamma: f64 },
    LighterThanNLogN { gamma: f64, alpha: f64 },
}

impl CriticalExample {
    pub fn from_spec(spec: &MemorySpec) -> Result<Self> {
        spec.validate()?;
        let gamma = spec.gamma();
        if gamma <= -0.5 {
            return Err(Error::Unsupported("time-scale examples require gamma > -1/2".into()));
        }
        let g1 = gamma + 1.0;
        let unsupported = || Error::Unsupported(format!("{} has no cataloged time-scale example", spec.family_name()));
        match spec {
            MemorySpec::PowerLaw { .. } | MemorySpec::ContinuedProduct { .. } => Ok(CriticalExample::NLogN { gamma, alpha: 0.0 }),
            MemorySpec::LogModulated { alpha, zeta, .. } => {
                let s = alpha + g1;
                if near(s, 0.0) {
                    match zeta {
                        ZetaSpec::Zero => Ok(CriticalExample::ZetaZero { gamma }),
                        ZetaSpec::Power { kappa, rho } if *kappa > 0.0 => {
                            Ok(CriticalExample::ZetaPowerZero { gamma, kappa: *kappa, rho: *rho })
                        }
                        ZetaSpec::LogLog { kappa } if near(kappa + g1, 0.0) => Ok(CriticalExample::LogLogLogZero { gamma }),
                        ZetaSpec::LogLog { kappa } if kappa + g1 > 0.0 => Ok(CriticalExample::LogLogZero { gamma, kappa: *kappa }),
                        _ => Err(unsupported()),
                    }
                } else if s > 0.0 {
                    Ok(CriticalExample::NLogN { gamma, alpha: *alpha })
                } else {
                    Err(unsupported())
                }
            }
            MemorySpec::SlowGrowth { delta, .. } => Ok(CriticalExample::LighterThanNLogN { gamma, alpha: delta.alpha() }),
            MemorySpec::CustomTable { .. } => Err(unsupported()),
        }
    }

    /// Predicted correlation of the rescaled walk at times `s <= t`; `None` when no nondegenerate limit exists.
    pub fn predicted_correlation(&self, mode: TimescaleMode, s: f64, t: f64) -> Option<f64> {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        match (mode, self) {
            (TimescaleMode::BrownianTuned, _) => Some((s / t).sqrt()),
            (TimescaleMode::Exponential, CriticalExample::NLogN { gamma, alpha }) => {
                let theta = (alpha + gamma + 1.0) / (gamma + 1.0);
                Some((s / t).powf(theta / 2.0))
            }
            (TimescaleMode::Exponential, CriticalExample::LighterThanNLogN { .. }) => None,
            (TimescaleMode::Exponential, _) => Some(1.0),
        }
    }

    pub fn prediction_text(&self, mode: TimescaleMode) -> String {
        match (mode, self) {
            (TimescaleMode::BrownianTuned, _) => "Brownian limit: corr(s,t) = sqrt(s/t)".into(),
            (TimescaleMode::Exponential, CriticalExample::NLogN { .. }) => {
                "time-changed Brownian limit: corr(s,t) = (s/t)^((alpha+gamma+1)/(2(gamma+1)))".into()
            }
            (TimescaleMode::Exponential, CriticalExample::LighterThanNLogN { .. }) => {
                "no nondegenerate limit under the exponential time scale".into()
            }
            (TimescaleMode::Exponential, _) => "common random multiple sqrt(t) Z: corr -> 1".into(),
        }
    }
}

/// One point of an exploratory time scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimescalePoint {
    pub t: f64,
    pub index: u64,
    /// Space scale; `None` when the time scale admits no nondegenerate limit.
    pub scale: Option<f64>,
}

fn floor_index(x: f64) -> Result<u64> {
    if !x.is_finite() || x >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("time-scale index {x} exceeds the integer range")));
    }
    if x < 1.0 {
        return Err(Error::InvalidInput(format!("time-scale index {x} is below 1")));
    }
    // Guard against exp(log n) landing just below an integer.
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x {
        Ok(r as u64)
    } else {
        Ok(x.floor() as u64)
    }
}

/// Index and space scale of the exploratory time scale at time `t` for base index `n`.
pub fn exploratory_timescale(spec: &MemorySpec, mode: TimescaleMode, t: f64, n: u64) -> Result<TimescalePoint> {
    let example = CriticalExample::from_spec(spec)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    if n < 16 {
        return Err(Error::InvalidInput("base index must be at least 16 so that log log log n > 0".into()));
    }
    let nf = n as f64;
    let l = nf.ln();
    let ll = l.ln();
    let lll = ll.ln();
    let point = |x: f64, scale_sq: Option<f64>| -> Result<TimescalePoint> {
        Ok(TimescalePoint { t, index: floor_index(x)?, scale: scale_sq.map(f64::sqrt) })
    };
    match mode {
        TimescaleMode::Exponential => {
            let x = nf.powf(t);
            let scale_sq = match example {
                CriticalExample::NLogN { gamma, alpha } => Some(t.powf(-alpha / (gamma + 1.0)) * x * l),
                CriticalExample::ZetaZero { .. } => Some(x * l * ll),
                CriticalExample::ZetaPowerZero { rho, .. } => Some(x * l * ll.powf(rho)),
                CriticalExample::LogLogZero { .. } => Some(x * l * ll),
                CriticalExample::LogLogLogZero { .. } => Some(x * l * ll * lll),
                CriticalExample::LighterThanNLogN { .. } => None,
            };
            point(x, scale_sq)
        }
        TimescaleMode::BrownianTuned => match example {
            CriticalExample::NLogN { gamma, alpha } => {
                let s = alpha + gamma + 1.0;
                let x = (t.powf((gamma + 1.0) / s) * l).exp();
                point(x, Some(t.powf(-alpha / s) * x * l))
            }
            CriticalExample::ZetaZero { .. } => {
                let lt = l.powf(t);
                let x = lt.exp();
                point(x, Some(x * lt * ll))
            }
            CriticalExample::ZetaPowerZero { gamma, kappa, rho } => {
                let base = (gamma + 1.0) / kappa * t.ln() + ll.powf(1.0 - rho);
                if base <= 0.0 {
                    return Err(Error::InvalidInput(format!("t = {t} is too small for this time scale at n = {n}")));
                }
                let x = base.powf(1.0 / (1.0 - rho)).exp().exp();
                point(x, Some(x * x.ln() * ll.powf(rho) / t))
            }
            CriticalExample::LogLogZero { gamma, kappa } => {
                let s = kappa + gamma + 1.0;
                let x = (t.powf((gamma + 1.0) / s) * ll).exp().exp();
                point(x, Some(t.powf(-kappa / s) * x * x.ln() * ll))
            }
            CriticalExample::LogLogLogZero { .. } => {
                let x = ll.powf(t).exp().exp();
                point(x, Some(x * x.ln() * (t * lll).exp() * lll))
            }
            CriticalExample::LighterThanNLogN { gamma, alpha } => {
                let base = (gamma + 1.0) * t.ln() + l.powf(1.0 - alpha);
                if base <= 0.0 {
                    return Err(Error::InvalidInput(format!("t = {t} is too small for this time scale at n = {n}")));
                }
                let x = base.powf(1.0 / (1.0 - alpha)).exp();
                point(x, Some(x * l.powf(alpha) / t))
            }
        },
    }
}
