//! Simulation of the walk.
//!
//! `X_1 = xi_1`. For `n >= 1` a recollection flag with probability `p` decides
//! whether `X_{n+1}` repeats `X_beta` with `P(beta = k) = mu_k / nu_n`, or takes a
//! fresh innovation. Per step the generator is consumed in a fixed order: one
//! uniform for the flag (only when `0 < p < 1`), then either one uniform for the
//! recalled index or the draws of one innovation.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::memory::MemorySpec;
use crate::rng::{self, WalkRng};
use crate::sampler::{DynamicWeightedIndex, StaticPrefixIndex};
use crate::scaling::{build_sequences, EtaKind};

/// Law of the innovations `xi_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationSpec {
    /// `+1` or `-1` with probability 1/2 each.
    Rademacher,
    StandardNormal,
    /// Inverse CDF given by quantiles at equally spaced probabilities `0, 1/m, ..., 1`,
    /// linearly interpolated. Draws are divided by `sqrt(declared_variance)` so that
    /// the simulated innovations have unit variance.
    CustomIid { quantiles: Vec<f64>, declared_mean: f64, declared_variance: f64 },
    /// Symmetric Pareto-type law `sign * (U^{-1/tail_index} - 1)`; infinite variance
    /// for `tail_index <= 2`. Exploratory only.
    SymmetricPareto { tail_index: f64 },
}

impl InnovationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InnovationSpec::Rademacher | InnovationSpec::StandardNormal => Ok(()),
            InnovationSpec::CustomIid { quantiles, declared_mean, declared_variance } => {
                if quantiles.len() < 2 {
                    return Err(Error::InvalidInput("quantile table needs at least two entries".into()));
                }
                if quantiles.iter().any(|q| !q.is_finite()) || quantiles.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidInput("quantiles must be finite and nondecreasing".into()));
                }
                if *declared_mean != 0.0 {
                    return Err(Error::InvalidInput(format!("innovations must have mean 0, declared {declared_mean}")));
                }
                if !(*declared_variance > 0.0 && declared_variance.is_finite()) {
                    return Err(Error::InvalidInput(format!("declared variance must be positive, got {declared_variance}")));
                }
                let scale = quantiles.iter().fold(0.0f64, |m, q| m.max(q.abs()));
                let mean = table_mean(quantiles);
                if mean.abs() > 1e-9 * scale.max(1.0) {
                    return Err(Error::InvalidInput(format!("quantile table has mean {mean}, expected 0")));
                }
                Ok(())
            }
            InnovationSpec::SymmetricPareto { tail_index } => {
                if !(*tail_index > 1.0 && tail_index.is_finite()) {
                    return Err(Error::InvalidInput(format!("tail index must exceed 1 for a finite mean, got {tail_index}")));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnovationSpec::Rademacher => "rademacher",
            InnovationSpec::StandardNormal => "standard_normal",
            InnovationSpec::CustomIid { .. } => "custom_iid",
            InnovationSpec::SymmetricPareto { .. } => "symmetric_pareto",
        }
    }

    pub fn finite_variance(&self) -> bool {
        match self {
            InnovationSpec::SymmetricPareto { tail_index } => *tail_index > 2.0,
            _ => true,
        }
    }

    /// Variance of the simulated innovations (after any rescaling).
    pub fn variance(&self) -> f64 {
        match self {
            InnovationSpec::SymmetricPareto { tail_index: a } if *a > 2.0 => 2.0 / ((a - 1.0) * (a - 2.0)),
            InnovationSpec::SymmetricPareto { .. } => f64::INFINITY,
            _ => 1.0,
        }
    }

    pub fn is_sign_valued(&self) -> bool {
        matches!(self, InnovationSpec::Rademacher)
    }

    /// Remarks that belong in any report using this law.
    pub fn notes(&self) -> Vec<String> {
        match self {
            InnovationSpec::CustomIid { declared_variance, .. } if *declared_variance != 1.0 => {
                vec![format!("custom innovations rescaled by 1/sqrt({declared_variance}) to unit variance")]
            }
            InnovationSpec::SymmetricPareto { .. } if !self.finite_variance() => {
                vec!["infinite-variance innovations: exploratory run, variance-based statistics disabled".into()]
            }
            _ => Vec::new(),
        }
    }

    #[inline]
    fn draw(&self, rng: &mut WalkRng) -> f64 {
        match self {
            InnovationSpec::Rademacher => sign_from(rng.next_u64()),
            InnovationSpec::StandardNormal => rng.sample(StandardNormal),
            InnovationSpec::CustomIid { quantiles, declared_variance, .. } => {
                interpolate(quantiles, rng::uniform(rng)) / declared_variance.sqrt()
            }
            InnovationSpec::SymmetricPareto { tail_index } => {
                let s = sign_from(rng.next_u64());
                let u = 1.0 - rng::uniform(rng);
                s * (u.powf(-1.0 / tail_index) - 1.0)
            }
        }
    }
}

#[inline]
fn sign_from(bits: u64) -> f64 {
    if bits >> 63 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn interpolate(q: &[f64], u: f64) -> f64 {
    let m = (q.len() - 1) as f64;
    let x = u * m;
    let i = (x.floor() as usize).min(q.len() - 2);
    let f = x - i as f64;
    q[i] + f * (q[i + 1] - q[i])
}

fn table_mean(q: &[f64]) -> f64 {
    let m = (q.len() - 1) as f64;
    q.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / m
}

/// How the recalled index is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    /// `Uniform` for constant memory, `Prefix` otherwise.
    #[default]
    Auto,
    /// Per-walk binary indexed tree filled one weight per step.
    Fenwick,
    /// Binary search in a cumulative array shared by all replicas.
    Prefix,
    /// Closed-form inverse CDF for constant memory.
    Uniform,
}

/// Default cap on the memory a single batch may allocate.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub spec: MemorySpec,
    pub p: f64,
    pub innovation: InnovationSpec,
    pub n_steps: u64,
    /// Strictly increasing indices in `1..=n_steps`.
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub record_martingales: bool,
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerMode,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,
}

impl WalkConfig {
    /// Config recording `S` at `n_steps` only.
    pub fn new(spec: MemorySpec, p: f64, innovation: InnovationSpec, n_steps: u64, seed: u64) -> Self {
        WalkConfig {
            spec,
            p,
            innovation,
            n_steps,
            checkpoints: vec![n_steps],
            record_martingales: false,
            seed,
            sampler: SamplerMode::Auto,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_martingales(mut self, on: bool) -> Self {
        self.record_martingales = on;
        self
    }

    pub fn with_sampler(mut self, sampler: SamplerMode) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.innovation.validate()?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidInput(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidInput("n_steps must be at least 1".into()));
        }
        if usize::try_from(self.n_steps).is_err() {
            return Err(Error::ResourceLimit(format!("{} steps exceed the address space", self.n_steps)));
        }
        if let Some(len) = self.spec.table_len() {
            if self.n_steps > len as u64 {
                return Err(Error::IndexOutOfRange { index: self.n_steps, len });
            }
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidInput("at least one checkpoint is required".into()));
        }
        if self.checkpoints[0] == 0 || *self.checkpoints.last().unwrap() > self.n_steps {
            return Err(Error::InvalidInput(format!("checkpoints must lie in [1, {}]", self.n_steps)));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("checkpoints must be strictly increasing".into()));
        }
        if self.sampler == SamplerMode::Uniform && !self.spec.is_constant() {
            return Err(Error::InvalidInput("the uniform sampler requires constant memory".into()));
        }
        Ok(())
    }

    pub fn resolved_sampler(&self) -> SamplerMode {
        match self.sampler {
            SamplerMode::Auto if self.spec.is_constant() => SamplerMode::Uniform,
            SamplerMode::Auto => SamplerMode::Prefix,
            s => s,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bytes held by one walk plus the structures shared by a batch.
    pub fn memory_estimate(&self) -> (u64, u64) {
        let n = self.n_steps;
        let steps = if self.innovation.is_sign_valued() { n.div_ceil(64) * 8 } else { n * 8 };
        let (own, mut shared) = match self.resolved_sampler() {
            SamplerMode::Fenwick => (steps + 8 * (n + 1), 0),
            SamplerMode::Prefix => (steps, 8 * n),
            _ => (steps, 0),
        };
        if self.record_martingales {
            // Build-time sequence table plus the compact per-step table.
            shared += 13 * 8 * n;
        }
        (own, shared)
    }

    fn check_memory(&self, concurrent: u64) -> Result<()> {
        let (own, shared) = self.memory_estimate();
        let total = own.saturating_mul(concurrent).saturating_add(shared);
        if total > self.memory_cap_bytes {
            return Err(Error::ResourceLimit(format!(
                "walk needs about {total} bytes, above the cap of {} bytes",
                self.memory_cap_bytes
            )));
        }
        Ok(())
    }
}

/// Parse a checkpoint grid: `end`, `all`, `geometric:k` (k points per decade plus `n`),
/// `linear:k` (k evenly spaced points ending at `n`) or `list:a,b,...`.
pub fn parse_checkpoints(text: &str, n: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let bad = || Error::InvalidInput(format!("unrecognized checkpoint grid '{text}'"));
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    let mut out: Vec<u64> = match kind {
        "end" => vec![n],
        "all" => {
            if n > 10_000_000 {
                return Err(Error::ResourceLimit("'all' checkpoints limited to 10^7 steps".into()));
            }
            (1..=n).collect()
        }
        "geometric" => {
            let k: u32 = arg.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            geometric_grid(n, k)
        }
        "linear" => {
            let k: u64 = arg.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            (1..=k).map(|i| ((i as f64 * n as f64 / k as f64).round() as u64).max(1)).collect()
        }
        "list" => arg
            .split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    out.sort_unstable();
    out.dedup();
    if out.first() == Some(&0) || out.last().is_some_and(|&x| x > n) {
        return Err(Error::InvalidInput(format!("checkpoints must lie in [1, {n}]")));
    }
    Ok(out)
}

/// `round(10^{j/k})` for `j = 0, 1, ...` up to `n`, with `n` appended.
pub fn geometric_grid(n: u64, per_decade: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let x = 10f64.powf(j as f64 / per_decade as f64).round() as u64;
        if x > n {
            break;
        }
        if out.last() != Some(&x) {
            out.push(x);
        }
        j += 1;
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// Companion martingales at the checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleRecord {
    /// `M_n = a_n Y_n`.
    pub m: Vec<f64>,
    /// `Y_n = sum_{k<=n} X_k mu_k`.
    pub y: Vec<f64>,
    /// `L_n = sum_{k<=n} (X_k - E(X_k | F_{k-1}))`.
    pub l: Vec<f64>,
    /// `N_n` under the forward weights `1 - p a_l mu_l eta_l`, or its tail counterpart
    /// `sum (1 + p a_l mu_l eta_bar_l) Delta L_l` when `eta_kind` is `Tail`.
    pub n: Vec<f64>,
    pub eta_kind: EtaKind,
    /// Largest scaled residual of `S_n = L_n + p sum_{k<n} Y_k / nu_k`.
    pub max_residual_l: f64,
    /// Largest scaled residual of `S_n = N_n + p eta_n M_n` (or `N_n - p eta_bar_n M_n`).
    pub max_residual_n: f64,
}

/// Identity residuals are reported relative to `max(1, sum of absolute terms)`.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkTrajectory {
    pub checkpoints: Vec<u64>,
    pub s: Vec<f64>,
    pub martingales: Option<MartingaleRecord>,
    /// `X_{n_steps}`.
    pub final_step: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl WalkTrajectory {
    /// Value of `S` at checkpoint `n`.
    pub fn s_at(&self, n: u64) -> Option<f64> {
        self.checkpoints.binary_search(&n).ok().map(|i| self.s[i])
    }

    /// `S` at the last checkpoint.
    pub fn s_final(&self) -> f64 {
        *self.s.last().expect("at least one checkpoint")
    }
}

struct MartTable {
    mu: Vec<f64>,
    nu: Vec<f64>,
    a: Vec<f64>,
    eta: Vec<f64>,
    /// `1 - p a_n mu_n eta_n` or `1 + p a_n mu_n eta_bar_n`.
    weight: Vec<f64>,
    kind: EtaKind,
}

enum SamplerPlan {
    Uniform,
    Prefix(StaticPrefixIndex),
    Fenwick,
}

/// Shared, immutable preparation for every replica of a config.
pub struct WalkPlan {
    config: WalkConfig,
    hash: String,
    sampler: SamplerPlan,
    mart: Option<Arc<MartTable>>,
}

impl WalkPlan {
    pub fn new(config: &WalkConfig) -> Result<Self> {
        Self::with_concurrency(config, 1)
    }

    fn with_concurrency(config: &WalkConfig, concurrent: u64) -> Result<Self> {
        config.validate()?;
        config.check_memory(concurrent)?;
        let n = config.n_steps as usize;
        let sampler = match config.resolved_sampler() {
            SamplerMode::Uniform => SamplerPlan::Uniform,
            SamplerMode::Fenwick => SamplerPlan::Fenwick,
            _ => {
                let mut cum = Vec::with_capacity(n);
                let mut acc = 0.0;
                for k in 1..=n as u64 {
                    acc += config.spec.mu_unchecked(k);
                    cum.push(acc);
                }
                if !acc.is_finite() {
                    return Err(Error::Overflow("cumulative memory weight leaves the double range".into()));
                }
                SamplerPlan::Prefix(StaticPrefixIndex::with_growth(cum.into(), config.spec.gamma() + 1.0))
            }
        };
        let mart = if config.record_martingales {
            let t = build_sequences(&config.spec, config.p, n)?;
            let sign = if t.eta_kind == EtaKind::Tail { 1.0 } else { -1.0 };
            let a: Vec<f64> = t.log_a.iter().map(|l| l.exp()).collect();
            let weight = (0..n).map(|i| 1.0 + sign * config.p * a[i] * t.mu[i] * t.eta[i]).collect();
            Some(Arc::new(MartTable { mu: t.mu, nu: t.nu, a, eta: t.eta, weight, kind: t.eta_kind }))
        } else {
            None
        };
        Ok(WalkPlan { config: config.clone(), hash: config.hash(), sampler, mart })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    /// Run one walk on the stream with the given seed.
    pub fn run(&self, seed: u64) -> Result<WalkTrajectory> {
        let mut rng = rng::stream(seed);
        let n = self.config.n_steps as usize;
        let out = match (&self.sampler, self.config.innovation.is_sign_valued()) {
            (SamplerPlan::Uniform, true) if self.mart.is_none() => self.drive_sign_uniform(&mut rng),
            (SamplerPlan::Uniform, true) => self.drive(&mut rng, SignSteps::new(n), UniformIdx),
            (SamplerPlan::Uniform, false) => self.drive(&mut rng, RealSteps::new(n), UniformIdx),
            (SamplerPlan::Prefix(ix), true) => self.drive(&mut rng, SignSteps::new(n), PrefixIdx(ix)),
            (SamplerPlan::Prefix(ix), false) => self.drive(&mut rng, RealSteps::new(n), PrefixIdx(ix)),
            (SamplerPlan::Fenwick, true) => {
                self.drive(&mut rng, SignSteps::new(n), FenwickIdx::new(&self.config.spec, n))
            }
            (SamplerPlan::Fenwick, false) => {
                self.drive(&mut rng, RealSteps::new(n), FenwickIdx::new(&self.config.spec, n))
            }
        };
        Ok(WalkTrajectory { seed, config_hash: self.hash.clone(), ..out })
    }

    /// Specialization of [`Self::drive`] for sign steps and constant memory. Both the
    /// recalled index and a fresh sign come from the same single draw, so the stream is
    /// consumed exactly as in the general loop and the output is identical.
    fn drive_sign_uniform(&self, rng: &mut WalkRng) -> WalkTrajectory {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let cfg = &self.config;
        let p = cfg.p;
        let n_steps = cfg.n_steps as usize;
        let cps = &cfg.checkpoints;
        let mut s_out = Vec::with_capacity(cps.len());
        let mut bits = vec![0u64; n_steps.div_ceil(64)];
        let mut bit = rng.next_u64() >> 63;
        bits[0] = bit;
        let mut s = 2 * bit as i64 - 1;
        let mut next_cp = 0usize;
        if cps[0] == 1 {
            s_out.push(s as f64);
            next_cp = 1;
        }
        let always = p >= 1.0;
        let never = p <= 0.0;
        for n in 1..n_steps {
            let recollect = always || (!never && rng::uniform(rng) < p);
            let r = rng.next_u64();
            let k = (((r >> 11) as f64 * SCALE * n as f64) as usize).min(n - 1);
            let old = (bits[k >> 6] >> (k & 63)) & 1;
            bit = if recollect { old } else { r >> 63 };
            bits[n >> 6] |= bit << (n & 63);
            s += 2 * bit as i64 - 1;
            if next_cp < cps.len() && cps[next_cp] == (n + 1) as u64 {
                s_out.push(s as f64);
                next_cp += 1;
            }
        }
        WalkTrajectory {
            checkpoints: cps.clone(),
            s: s_out,
            martingales: None,
            final_step: 2.0 * bit as f64 - 1.0,
            seed: 0,
            config_hash: String::new(),
        }
    }

    fn drive<S: StepStore, I: IndexDraw>(&self, rng: &mut WalkRng, mut steps: S, mut index: I) -> WalkTrajectory {
        let cfg = &self.config;
        let p = cfg.p;
        let n_steps = cfg.n_steps as usize;
        let cps = &cfg.checkpoints;
        let mut s_out = Vec::with_capacity(cps.len());
        let mut next_cp = 0usize;
        let mut mart = self.mart.as_deref().map(|t| MartState::new(t, cps.len()));

        let mut x = cfg.innovation.draw(rng);
        steps.push(x);
        index.push(1);
        let mut s = x;
        if let Some(m) = mart.as_mut() {
            m.step(1, x, p);
        }
        if cps[0] == 1 {
            s_out.push(s);
            if let Some(m) = mart.as_mut() {
                m.record(1, s, p);
            }
            next_cp = 1;
        }
        let always = p >= 1.0;
        let never = p <= 0.0;
        for n in 1..n_steps {
            let recollect = always || (!never && rng::uniform(rng) < p);
            x = if recollect {
                let k = index.sample(n, rng::uniform(rng));
                steps.get(k - 1)
            } else {
                cfg.innovation.draw(rng)
            };
            steps.push(x);
            index.push(n + 1);
            s += x;
            if let Some(m) = mart.as_mut() {
                m.step(n + 1, x, p);
            }
            if next_cp < cps.len() && cps[next_cp] == (n + 1) as u64 {
                s_out.push(s);
                if let Some(m) = mart.as_mut() {
                    m.record(n + 1, s, p);
                }
                next_cp += 1;
            }
        }
        WalkTrajectory {
            checkpoints: cps.clone(),
            s: s_out,
            martingales: mart.map(MartState::finish),
            final_step: x,
            seed: 0,
            config_hash: String::new(),
        }
    }
}

struct MartState<'a> {
    t: &'a MartTable,
    y: f64,
    l: f64,
    nm: f64,
    comp: f64,
    rec: MartingaleRecord,
}

impl<'a> MartState<'a> {
    fn new(t: &'a MartTable, cap: usize) -> Self {
        MartState {
            t,
            y: 0.0,
            l: 0.0,
            nm: 0.0,
            comp: 0.0,
            rec: MartingaleRecord {
                m: Vec::with_capacity(cap),
                y: Vec::with_capacity(cap),
                l: Vec::with_capacity(cap),
                n: Vec::with_capacity(cap),
                eta_kind: t.kind,
                max_residual_l: 0.0,
                max_residual_n: 0.0,
            },
        }
    }

    #[inline]
    fn step(&mut self, n: usize, x: f64, p: f64) {
        let i = n - 1;
        let dl = if n == 1 {
            x
        } else {
            let r = self.y / self.t.nu[i - 1];
            self.comp += r;
            x - p * r
        };
        self.l += dl;
        self.nm += self.t.weight[i] * dl;
        self.y += self.t.mu[i] * x;
    }

    fn record(&mut self, n: usize, s: f64, p: f64) {
        let i = n - 1;
        let m = self.t.a[i] * self.y;
        let lhs_l = self.l + p * self.comp;
        let res_l = (s - lhs_l).abs() / (self.l.abs() + p * self.comp.abs()).max(1.0);
        let eta_term = p * self.t.eta[i] * m;
        let lhs_n = match self.t.kind {
            EtaKind::Forward => self.nm + eta_term,
            EtaKind::Tail => self.nm - eta_term,
        };
        let res_n = (s - lhs_n).abs() / (self.nm.abs() + eta_term.abs()).max(1.0);
        self.rec.max_residual_l = self.rec.max_residual_l.max(res_l);
        self.rec.max_residual_n = self.rec.max_residual_n.max(res_n);
        self.rec.m.push(m);
        self.rec.y.push(self.y);
        self.rec.l.push(self.l);
        self.rec.n.push(self.nm);
    }

    fn finish(self) -> MartingaleRecord {
        self.rec
    }
}

trait StepStore {
    fn push(&mut self, x: f64);
    fn get(&self, i: usize) -> f64;
}

struct SignSteps {
    bits: Vec<u64>,
    len: usize,
}

impl SignSteps {
    fn new(n: usize) -> Self {
        SignSteps { bits: vec![0; n.div_ceil(64)], len: 0 }
    }
}

impl StepStore for SignSteps {
    #[inline]
    fn push(&mut self, x: f64) {
        self.bits[self.len >> 6] |= ((x > 0.0) as u64) << (self.len & 63);
        self.len += 1;
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        (2 * ((self.bits[i >> 6] >> (i & 63)) & 1)) as f64 - 1.0
    }
}

struct RealSteps(Vec<f64>);

impl RealSteps {
    fn new(n: usize) -> Self {
        RealSteps(Vec::with_capacity(n))
    }
}

impl StepStore for RealSteps {
    #[inline]
    fn push(&mut self, x: f64) {
        self.0.push(x);
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

trait IndexDraw {
    /// Register the weight of index `k` (1-based).
    fn push(&mut self, k: usize);
    /// Draw from `1..=n` with the same right-continuous inverse-CDF convention as the sampler.
    fn sample(&self, n: usize, u: f64) -> usize;
}

struct UniformIdx;

impl IndexDraw for UniformIdx {
    #[inline]
    fn push(&mut self, _k: usize) {}

    #[inline]
    fn sample(&self, n: usize, u: f64) -> usize {
        ((u * n as f64) as usize + 1).min(n)
    }
}

struct PrefixIdx<'a>(&'a StaticPrefixIndex);

impl IndexDraw for PrefixIdx<'_> {
    #[inline]
    fn push(&mut self, _k: usize) {}

    #[inline]
    fn sample(&self, n: usize, u: f64) -> usize {
        self.0.sample(n, u)
    }
}

struct FenwickIdx<'a> {
    spec: &'a MemorySpec,
    tree: DynamicWeightedIndex,
}

impl<'a> FenwickIdx<'a> {
    fn new(spec: &'a MemorySpec, n: usize) -> Self {
        FenwickIdx { spec, tree: DynamicWeightedIndex::with_reserved(n) }
    }
}

impl IndexDraw for FenwickIdx<'_> {
    #[inline]
    fn push(&mut self, k: usize) {
        self.tree.push_unchecked(self.spec.mu_unchecked(k as u64));
    }

    #[inline]
    fn sample(&self, _n: usize, u: f64) -> usize {
        self.tree.sample_unchecked(u)
    }
}

/// Simulate one walk on the stream seeded by `config.seed`.
pub fn simulate(config: &WalkConfig) -> Result<WalkTrajectory> {
    WalkPlan::new(config)?.run(config.seed)
}

/// Simulate `replicas` walks; replica `r` uses the stream `replica_seed(master_seed, r)`.
/// Output is ordered by replica and independent of `threads` (0 means all available cores).
pub fn simulate_batch(config: &WalkConfig, replicas: usize, master_seed: u64, threads: usize) -> Result<Vec<WalkTrajectory>> {
    map_batch(config, replicas, master_seed, threads, Ok)
}

/// Like [`simulate_batch`] but reduces each trajectory with `f` before collecting.
pub fn map_batch<T, F>(config: &WalkConfig, replicas: usize, master_seed: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(WalkTrajectory) -> Result<T> + Sync,
{
    if replicas == 0 {
        return Err(Error::InvalidInput("replicas must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads().min(replicas) as u64;
    let plan = WalkPlan::with_concurrency(config, workers)?;
    pool.install(|| {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| plan.run(rng::replica_seed(master_seed, r)).and_then(&f))
            .collect()
    })
}

/// `X_n` across replicas.
pub fn marginal_law_sample(config: &WalkConfig, n: u64, replicas: usize, master_seed: u64, threads: usize) -> Result<Vec<f64>> {
    if n == 0 || n > config.n_steps {
        return Err(Error::InvalidInput(format!("n must lie in [1, {}], got {n}", config.n_steps)));
    }
    let cfg = WalkConfig { n_steps: n, checkpoints: vec![n], record_martingales: false, ..config.clone() };
    map_batch(&cfg, replicas, master_seed, threads, |t| Ok(t.final_step))
}

/// CSV with header `replica,n,S[,M,L,N]`.
pub fn write_trajectories_csv<W: Write>(trajs: &[WalkTrajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_m = trajs.first().is_some_and(|t| t.martingales.is_some());
    if with_m {
        w.write_record(["replica", "n", "S", "M", "L", "N"])?;
    } else {
        w.write_record(["replica", "n", "S"])?;
    }
    for (r, t) in trajs.iter().enumerate() {
        for (i, &n) in t.checkpoints.iter().enumerate() {
            let mut rec = vec![r.to_string(), n.to_string(), t.s[i].to_string()];
            if let (true, Some(m)) = (with_m, &t.martingales) {
                rec.extend([m.m[i].to_string(), m.l[i].to_string(), m.n[i].to_string()]);
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Magic bytes of the binary trajectory dump.
pub const BINARY_MAGIC: &[u8; 4] = b"RVWK";

/// Fixed-width little-endian columnar dump.
///
/// Layout: magic `RVWK`, `u32` version (1), `u32` replica count `R`, `u32` checkpoint
/// count `C`, `u8` martingale flag, `C` x `u64` checkpoint indices, then the columns
/// `S` (and `M`, `L`, `N` when flagged), each `R * C` x `f64` in replica-major order.
pub fn write_trajectories_binary<W: Write>(trajs: &[WalkTrajectory], mut out: W) -> Result<()> {
    let first = trajs.first().ok_or(Error::Empty)?;
    let with_m = first.martingales.is_some();
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&1u32.to_le_bytes())?;
    out.write_all(&(trajs.len() as u32).to_le_bytes())?;
    out.write_all(&(first.checkpoints.len() as u32).to_le_bytes())?;
    out.write_all(&[with_m as u8])?;
    for &c in &first.checkpoints {
        out.write_all(&c.to_le_bytes())?;
    }
    let mut column = |get: &dyn Fn(&WalkTrajectory) -> &[f64]| -> Result<()> {
        for t in trajs {
            for v in get(t) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    };
    column(&|t| &t.s)?;
    if with_m {
        column(&|t| &t.martingales.as_ref().unwrap().m)?;
        column(&|t| &t.martingales.as_ref().unwrap().l)?;
        column(&|t| &t.martingales.as_ref().unwrap().n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(spec: MemorySpec, p: f64, n: u64) -> WalkConfig {
        WalkConfig::new(spec, p, InnovationSpec::Rademacher, n, 1)
    }

    #[test]
    fn p_one_repeats_first_step() {
        for spec in [MemorySpec::power_law(0.0), MemorySpec::power_law(1.3)] {
            let c = cfg(spec, 1.0, 500).with_checkpoints(vec![1, 10, 500]);
            let t = simulate(&c).unwrap();
            assert_eq!(t.s[1], 10.0 * t.s[0]);
            assert_eq!(t.s[2], 500.0 * t.s[0]);
        }
    }

    #[test]
    fn p_zero_is_iid() {
        let c = cfg(MemorySpec::power_law(0.5), 0.0, 1000);
        let t = simulate(&c).unwrap();
        let mut rng = rng::stream(1);
        let direct: f64 = (0..1000).map(|_| sign_from(rng.next_u64())).sum();
        assert_eq!(t.s[0], direct);
    }

    #[test]
    fn samplers_agree_on_integer_weights() {
        for spec in [MemorySpec::power_law(0.0), MemorySpec::continued_product(1.0)] {
            let base = cfg(spec.clone(), 0.7, 3000).with_checkpoints(parse_checkpoints("geometric:5", 3000).unwrap());
            let f = simulate(&base.clone().with_sampler(SamplerMode::Fenwick)).unwrap();
            let p = simulate(&base.clone().with_sampler(SamplerMode::Prefix)).unwrap();
            assert_eq!(f.s, p.s);
            if spec.is_constant() {
                let u = simulate(&base.with_sampler(SamplerMode::Uniform)).unwrap();
                assert_eq!(f.s, u.s);
            }
        }
    }

    #[test]
    fn identities_hold_pathwise() {
        for (g, p) in [(0.0, 0.25), (1.0, 0.2), (1.0, 0.9), (0.5, 0.5)] {
            for inn in [InnovationSpec::Rademacher, InnovationSpec::StandardNormal] {
                let c = WalkConfig::new(MemorySpec::power_law(g), p, inn, 5000, 9)
                    .with_checkpoints(parse_checkpoints("geometric:10", 5000).unwrap())
                    .with_martingales(true);
                let t = simulate(&c).unwrap();
                let m = t.martingales.unwrap();
                assert!(m.max_residual_l < IDENTITY_TOL, "g={g} p={p} {}", m.max_residual_l);
                assert!(m.max_residual_n < IDENTITY_TOL, "g={g} p={p} {}", m.max_residual_n);
            }
        }
    }

    #[test]
    fn batch_is_deterministic_across_threads() {
        let c = cfg(MemorySpec::power_law(1.0), 0.6, 2000).with_checkpoints(vec![100, 2000]);
        let a = simulate_batch(&c, 16, 42, 1).unwrap();
        let b = simulate_batch(&c, 16, 42, 3).unwrap();
        assert_eq!(a, b);
        let single = WalkPlan::new(&c).unwrap().run(rng::replica_seed(42, 0)).unwrap();
        assert_eq!(a[0], single);
    }

    #[test]
    fn sign_fast_path_matches_general_loop() {
        for p in [0.0, 0.3, 1.0] {
            let c = cfg(MemorySpec::power_law(0.0), p, 4000).with_checkpoints(parse_checkpoints("linear:40", 4000).unwrap());
            let plan = WalkPlan::new(&c).unwrap();
            let fast = plan.drive_sign_uniform(&mut rng::stream(11));
            let slow = plan.drive(&mut rng::stream(11), SignSteps::new(4000), UniformIdx);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn checkpoint_grammar() {
        assert_eq!(parse_checkpoints("end", 7).unwrap(), vec![7]);
        assert_eq!(parse_checkpoints("linear:4", 100).unwrap(), vec![25, 50, 75, 100]);
        assert_eq!(parse_checkpoints("geometric:1", 500).unwrap(), vec![1, 10, 100, 500]);
        assert_eq!(parse_checkpoints("list:5,3", 10).unwrap(), vec![3, 5]);
        assert!(parse_checkpoints("list:11", 10).is_err());
        assert!(parse_checkpoints("spiral:3", 10).is_err());
    }

    #[test]
    fn config_errors() {
        let c = cfg(MemorySpec::power_law(0.0), 1.5, 10);
        assert!(c.validate().unwrap_err().is_invalid_input());
        let c = cfg(MemorySpec::power_law(0.0), 0.5, 10).with_checkpoints(vec![3, 3]);
        assert!(c.validate().is_err());
        let mut c = cfg(MemorySpec::power_law(0.0), 0.5, 1_000_000);
        c.memory_cap_bytes = 1000;
        assert!(simulate(&c).unwrap_err().is_resource_limit());
        let bad = InnovationSpec::CustomIid { quantiles: vec![0.0, 1.0], declared_mean: 0.0, declared_variance: 1.0 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn custom_quantiles_are_rescaled() {
        let inn = InnovationSpec::CustomIid { quantiles: vec![-2.0, 0.0, 2.0], declared_mean: 0.0, declared_variance: 4.0 / 3.0 };
        inn.validate().unwrap();
        assert_eq!(inn.notes().len(), 1);
        let mut rng = rng::stream(3);
        let m: f64 = (0..200_000).map(|_| inn.draw(&mut rng).powi(2)).sum::<f64>() / 200_000.0;
        assert!((m - 1.0).abs() < 0.02);
    }

    #[test]
    fn marginal_first_step_is_innovation() {
        let c = cfg(MemorySpec::power_law(1.0), 0.6, 50);
        let xs = marginal_law_sample(&c, 1, 200, 5, 1).unwrap();
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
    }

    #[test]
    fn binary_dump_layout() {
        let c = cfg(MemorySpec::power_law(0.0), 0.5, 100).with_checkpoints(vec![50, 100]);
        let trajs = simulate_batch(&c, 3, 1, 1).unwrap();
        let mut buf = Vec::new();
        write_trajectories_binary(&trajs, &mut buf).unwrap();
        assert_eq!(&buf[..4], BINARY_MAGIC);
        assert_eq!(buf.len(), 4 + 12 + 1 + 16 + 3 * 2 * 8);
        let off = 4 + 12 + 1 + 16;
        let first = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        assert_eq!(first, trajs[0].s[0]);
    }
}
