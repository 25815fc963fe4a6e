//! Memory sequences `mu_n`: the weights that decide which past step a
//! recollecting walk repeats.
//!
//! Every built-in family is regularly varying with index `gamma > -1`.
//! Log-modulated and slow-growth families are evaluated in log space.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Declarative description of a memory sequence.
///
/// JSON form: `{"family": "...", "gamma": ..., <family parameters>}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MemorySpec {
    /// `mu_n = n^gamma`.
    PowerLaw { gamma: f64 },
    /// `mu_n = prod_{i=1}^{n-1} (1 + gamma / i)`.
    ContinuedProduct { gamma: f64 },
    /// `mu_n = n^gamma f(log n)` with `f(x) = x^alpha exp(int_0^{log x} zeta)`.
    LogModulated { gamma: f64, alpha: f64, zeta: ZetaSpec },
    /// `mu_n = n^gamma exp(int_0^{log n} delta)`.
    SlowGrowth { gamma: f64, delta: DeltaSpec },
    /// Explicit finite table with a declared index.
    CustomTable { gamma: f64, values: Vec<f64> },
}

/// The integrand `zeta` in the slowly varying factor of [`MemorySpec::LogModulated`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ZetaSpec {
    Zero,
    /// `zeta(x) = kappa (1 - rho) x^{-rho}`.
    Power { kappa: f64, rho: f64 },
    /// `zeta(x) = kappa min(1/x, 1)`.
    LogLog { kappa: f64 },
}

/// The integrand `delta` in the slowly varying factor of [`MemorySpec::SlowGrowth`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DeltaSpec {
    /// `delta(x) = (1 - alpha) x^{-alpha}`, so `mu(x) = x^gamma exp((log x)^{1-alpha})`.
    PowerLogGap { alpha: f64 },
}

const DIRECT_PRODUCT_LIMIT: u64 = 64;

impl MemorySpec {
    pub fn power_law(gamma: f64) -> Self {
        MemorySpec::PowerLaw { gamma }
    }

    pub fn continued_product(gamma: f64) -> Self {
        MemorySpec::ContinuedProduct { gamma }
    }

    pub fn log_modulated(gamma: f64, alpha: f64, zeta: ZetaSpec) -> Self {
        MemorySpec::LogModulated { gamma, alpha, zeta }
    }

    pub fn slow_growth(gamma: f64, alpha: f64) -> Self {
        MemorySpec::SlowGrowth { gamma, delta: DeltaSpec::PowerLogGap { alpha } }
    }

    pub fn custom_table(gamma: f64, values: Vec<f64>) -> Result<Self> {
        let spec = MemorySpec::CustomTable { gamma, values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: MemorySpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("memory spec serializes")
    }

    /// Regular-variation index. For custom tables the declared value is authoritative.
    pub fn gamma(&self) -> f64 {
        match self {
            MemorySpec::PowerLaw { gamma }
            | MemorySpec::ContinuedProduct { gamma }
            | MemorySpec::LogModulated { gamma, .. }
            | MemorySpec::SlowGrowth { gamma, .. }
            | MemorySpec::CustomTable { gamma, .. } => *gamma,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            MemorySpec::PowerLaw { .. } => "power_law",
            MemorySpec::ContinuedProduct { .. } => "continued_product",
            MemorySpec::LogModulated { .. } => "log_modulated",
            MemorySpec::SlowGrowth { .. } => "slow_growth",
            MemorySpec::CustomTable { .. } => "custom_table",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let gamma = self.gamma();
        if !gamma.is_finite() || gamma <= -1.0 {
            return Err(Error::InvalidSpec(format!("gamma must be finite and > -1, got {gamma}")));
        }
        match self {
            MemorySpec::PowerLaw { .. } | MemorySpec::ContinuedProduct { .. } => Ok(()),
            MemorySpec::LogModulated { alpha, zeta, .. } => {
                if !alpha.is_finite() {
                    return Err(Error::InvalidSpec(format!("alpha must be finite, got {alpha}")));
                }
                zeta.validate()
            }
            MemorySpec::SlowGrowth { delta, .. } => delta.validate(),
            MemorySpec::CustomTable { values, .. } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpec("custom table is empty".into()));
                }
                if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                    return Err(Error::InvalidSpec(format!(
                        "custom table entry {} is not a positive finite number: {v}",
                        i + 1
                    )));
                }
                Ok(())
            }
        }
    }

    /// Number of available terms, `None` for unbounded families.
    pub fn table_len(&self) -> Option<usize> {
        match self {
            MemorySpec::CustomTable { values, .. } => Some(values.len()),
            _ => None,
        }
    }

    /// True when every `mu_n` equals 1, which lets samplers draw uniformly.
    pub fn is_constant(&self) -> bool {
        match self {
            MemorySpec::PowerLaw { gamma } | MemorySpec::ContinuedProduct { gamma } => *gamma == 0.0,
            MemorySpec::LogModulated { gamma, alpha, zeta } => {
                *gamma == 0.0 && *alpha == 0.0 && *zeta == ZetaSpec::Zero
            }
            MemorySpec::SlowGrowth { .. } => false,
            MemorySpec::CustomTable { values, .. } => values.iter().all(|v| *v == 1.0),
        }
    }

    /// Checked evaluation of `mu_n`.
    pub fn mu(&self, n: u64) -> Result<f64> {
        self.validate()?;
        self.check_index(n)?;
        let v = self.mu_unchecked(n);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Overflow(format!("mu_{n} is not representable ({v})")));
        }
        Ok(v)
    }

    /// Checked evaluation of `log mu_n`.
    pub fn log_mu(&self, n: u64) -> Result<f64> {
        self.validate()?;
        self.check_index(n)?;
        Ok(self.log_mu_unchecked(n))
    }

    pub(crate) fn check_index(&self, n: u64) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidInput("memory index starts at 1".into()));
        }
        if let Some(len) = self.table_len() {
            if n as usize > len {
                return Err(Error::IndexOutOfRange { index: n, len });
            }
        }
        Ok(())
    }

    /// `mu_n` without validation. The spec must be valid and `n` in range.
    pub fn mu_unchecked(&self, n: u64) -> f64 {
        match self {
            MemorySpec::PowerLaw { gamma } if *gamma == 0.0 => 1.0,
            MemorySpec::PowerLaw { gamma } => (n as f64).powf(*gamma),
            MemorySpec::CustomTable { values, .. } => values[(n - 1) as usize],
            _ => self.log_mu_unchecked(n).exp(),
        }
    }

    /// `log mu_n` without validation.
    pub fn log_mu_unchecked(&self, n: u64) -> f64 {
        let x = n as f64;
        match self {
            MemorySpec::PowerLaw { gamma } => gamma * x.ln(),
            MemorySpec::ContinuedProduct { gamma } => log_continued_product(*gamma, n),
            MemorySpec::LogModulated { gamma, alpha, zeta } => {
                // log n is clamped to 1 for n = 1, 2 so that log log n >= 0.
                let y = x.ln().max(1.0).ln();
                gamma * x.ln() + alpha * y + zeta.integral(y)
            }
            MemorySpec::SlowGrowth { gamma, delta } => gamma * x.ln() + delta.integral(x.ln()),
            MemorySpec::CustomTable { values, .. } => values[(n - 1) as usize].ln(),
        }
    }

    /// `log l_n = log mu_n - gamma log n`, the slowly varying part.
    pub fn log_slowly_varying(&self, n: u64) -> f64 {
        self.log_mu_unchecked(n) - self.gamma() * (n as f64).ln()
    }
}

impl ZetaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ZetaSpec::Zero => Ok(()),
            ZetaSpec::Power { kappa, rho } => {
                if !kappa.is_finite() || *kappa == 0.0 {
                    return Err(Error::InvalidSpec(format!("zeta kappa must be finite and nonzero, got {kappa}")));
                }
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::InvalidSpec(format!("zeta rho must lie in (0, 1), got {rho}")));
                }
                Ok(())
            }
            ZetaSpec::LogLog { kappa } => {
                if !kappa.is_finite() || *kappa == 0.0 {
                    return Err(Error::InvalidSpec(format!("zeta kappa must be finite and nonzero, got {kappa}")));
                }
                Ok(())
            }
        }
    }

    /// `int_0^y zeta(s) ds` for `y >= 0`.
    pub fn integral(&self, y: f64) -> f64 {
        match self {
            ZetaSpec::Zero => 0.0,
            ZetaSpec::Power { kappa, rho } => kappa * y.powf(1.0 - rho),
            ZetaSpec::LogLog { kappa } => kappa * (y.min(1.0) + y.max(1.0).ln()),
        }
    }
}

impl DeltaSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DeltaSpec::PowerLogGap { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::InvalidSpec(format!("delta alpha must lie in (0, 1), got {alpha}")));
                }
                Ok(())
            }
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            DeltaSpec::PowerLogGap { alpha } => *alpha,
        }
    }

    /// `int_0^x delta(s) ds` for `x >= 0`.
    pub fn integral(&self, x: f64) -> f64 {
        match self {
            DeltaSpec::PowerLogGap { alpha } => x.powf(1.0 - alpha),
        }
    }
}

/// `log prod_{i=1}^{n-1} (1 + gamma/i) = log Gamma(n + gamma) - log Gamma(n) - log Gamma(1 + gamma)`.
fn log_continued_product(gamma: f64, n: u64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    if n <= DIRECT_PRODUCT_LIMIT {
        return (1..n).map(|i| (gamma / i as f64).ln_1p()).sum();
    }
    log_gamma_ratio(n as f64, gamma) - ln_gamma(1.0 + gamma)
}

/// `log Gamma(x + g) - log Gamma(x)` for large `x`, arranged to avoid cancellation.
fn log_gamma_ratio(x: f64, g: f64) -> f64 {
    fn tail(z: f64) -> f64 {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
    }
    (x - 0.5) * (g / x).ln_1p() + g * (x + g).ln() - g + (tail(x + g) - tail(x))
}

/// Least-squares estimate of the index from `log mu` over doublings of the table.
/// Diagnostic only: regular variation cannot be decided from finitely many terms.
pub fn estimate_rv_index(values: &[f64]) -> Option<f64> {
    let len = values.len();
    if len < 8 {
        return None;
    }
    let mut slopes = Vec::new();
    let mut n = len / 8;
    while 2 * n <= len {
        let ratio = values[2 * n - 1] / values[n - 1];
        slopes.push(ratio.ln() / std::f64::consts::LN_2);
        n *= 2;
    }
    if slopes.is_empty() {
        return None;
    }
    Some(slopes.iter().sum::<f64>() / slopes.len() as f64)
}

/// Checked `mu_n` for a spec.
pub fn mu(spec: &MemorySpec, n: u64) -> Result<f64> {
    spec.mu(n)
}

/// Regular-variation index of a spec.
pub fn rv_index(spec: &MemorySpec) -> f64 {
    spec.gamma()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn power_law_constant() {
        assert_eq!(mu(&MemorySpec::power_law(0.0), 17).unwrap(), 1.0);
    }

    #[test]
    fn continued_product_small() {
        let spec = MemorySpec::continued_product(1.0);
        assert!(close(mu(&spec, 3).unwrap(), 3.0, 1e-15));
        assert!(close(mu(&spec, 100).unwrap(), 100.0, 1e-13));
        assert!(close(mu(&spec, 1_000_000).unwrap(), 1e6, 1e-12));
    }

    #[test]
    fn continued_product_matches_gamma_function_across_switch() {
        // For gamma = 0.5, mu_n = Gamma(n + 1/2) / (Gamma(n) Gamma(3/2)).
        let spec = MemorySpec::continued_product(0.5);
        for n in [60u64, 64, 65, 66, 200] {
            let direct: f64 = (1..n).map(|i| (0.5 / i as f64).ln_1p()).sum();
            assert!(close(spec.log_mu_unchecked(n), direct, 1e-13), "n={n}");
        }
    }

    #[test]
    fn log_modulated_log_eight() {
        let spec = MemorySpec::log_modulated(0.0, 1.0, ZetaSpec::Zero);
        assert!(close(mu(&spec, 8).unwrap(), 8f64.ln(), 1e-14));
    }

    #[test]
    fn log_modulated_clamps_small_indices() {
        let spec = MemorySpec::log_modulated(0.0, -1.0, ZetaSpec::Zero);
        assert_eq!(mu(&spec, 1).unwrap(), 1.0);
        assert_eq!(mu(&spec, 2).unwrap(), 1.0);
        assert!(close(mu(&spec, 3).unwrap(), 1.0 / 3f64.ln(), 1e-14));
    }

    #[test]
    fn zeta_integrals() {
        assert_eq!(ZetaSpec::Zero.integral(3.0), 0.0);
        let p = ZetaSpec::Power { kappa: 2.0, rho: 0.75 };
        assert!(close(p.integral(16.0), 2.0 * 2.0, 1e-15));
        let l = ZetaSpec::LogLog { kappa: 1.5 };
        assert!(close(l.integral(0.5), 0.75, 1e-15));
        assert!(close(l.integral(std::f64::consts::E), 3.0, 1e-15));
    }

    #[test]
    fn rv_index_is_declared_gamma() {
        assert_eq!(rv_index(&MemorySpec::power_law(-0.25)), -0.25);
        assert_eq!(rv_index(&MemorySpec::continued_product(1.0)), 1.0);
        let t = MemorySpec::custom_table(0.5, vec![1.0, 2.0]).unwrap();
        assert_eq!(rv_index(&t), 0.5);
    }

    #[test]
    fn custom_table_errors() {
        assert!(MemorySpec::custom_table(0.0, vec![1.0, 0.0]).is_err());
        assert!(MemorySpec::custom_table(0.0, vec![1.0, -2.0]).is_err());
        assert!(MemorySpec::custom_table(0.0, vec![]).is_err());
        let t = MemorySpec::custom_table(0.0, vec![1.0, 2.0]).unwrap();
        assert!(matches!(t.mu(3), Err(Error::IndexOutOfRange { index: 3, len: 2 })));
        assert_eq!(t.mu(2).unwrap(), 2.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(MemorySpec::power_law(-1.0).validate().is_err());
        assert!(MemorySpec::log_modulated(0.0, 0.0, ZetaSpec::Power { kappa: 1.0, rho: 1.0 }).validate().is_err());
        assert!(MemorySpec::log_modulated(0.0, 0.0, ZetaSpec::Power { kappa: 0.0, rho: 0.5 }).validate().is_err());
        assert!(MemorySpec::log_modulated(0.0, 0.0, ZetaSpec::LogLog { kappa: 0.0 }).validate().is_err());
        assert!(MemorySpec::slow_growth(0.0, 1.0).validate().is_err());
        assert!(MemorySpec::slow_growth(0.0, 0.0).validate().is_err());
        assert!(MemorySpec::power_law(0.5).mu(0).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = MemorySpec::log_modulated(0.0, -1.0, ZetaSpec::Power { kappa: 0.5, rho: 0.25 });
        let v: serde_json::Value = serde_json::from_str(&spec.to_json()).unwrap();
        assert_eq!(v["family"], "log_modulated");
        assert_eq!(v["gamma"], 0.0);
        assert_eq!(v["zeta"]["variant"], "power");
        let back = MemorySpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn estimate_index_of_power_table() {
        let values: Vec<f64> = (1..=1024).map(|n| (n as f64).powf(0.7)).collect();
        assert!(close(estimate_rv_index(&values).unwrap(), 0.7, 1e-12));
    }
}
