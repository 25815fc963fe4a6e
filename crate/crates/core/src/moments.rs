//! Exact second and fourth moments by recursion, and an enumeration oracle.
//!
//! The recursions are driven by `q_n = p mu_n / nu_{n-1}`:
//!
//! ```text
//! E S_n^2     = E S_{n-1}^2 + (2p/nu_{n-1}) E(S_{n-1} Y_{n-1}) + s2
//! E(S_n Y_n)  = (1 + q_n) E(S_{n-1} Y_{n-1}) + (p/nu_{n-1}) E Y_{n-1}^2 + mu_n s2
//! E Y_n^2     = (1 + 2 q_n) E Y_{n-1}^2 + mu_n^2 s2
//! E M_n^2     = E M_{n-1}^2 - (p a_n mu_n / (a_{n-1} nu_{n-1}))^2 E M_{n-1}^2 + a_n^2 mu_n^2 s2
//! ```
//!
//! where `s2` is the innovation variance. With Rademacher steps the fourth
//! moment of `Y_n` and `b_n = 3 (E Y_n^2)^2 - E Y_n^4` follow their own recursions.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::memory::MemorySpec;
use crate::scaling::{sci17, SequenceCursor, SequenceRow};

use twofloat::TwoFloat;

/// Multipliers `x / p` of the generalized products `a_n(x)` tracked in Rademacher mode.
pub const PRODUCT_MULTIPLIERS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourthRow {
    pub e_y_4: f64,
    pub b_n: f64,
    pub kurtosis_m: f64,
    /// `log a_n(x)` for `x = p, 2p, 3p, 4p`.
    pub log_a_x: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentRow {
    pub n: u64,
    pub e_s_sq: f64,
    pub e_sy: f64,
    pub e_y_sq: f64,
    pub e_m_sq: f64,
    pub fourth: Option<FourthRow>,
    pub seq: SequenceRow,
}

/// Streams the moment recursions one index at a time.
#[derive(Clone, Debug)]
pub struct MomentCursor<'a> {
    seq: SequenceCursor<'a>,
    p: f64,
    variance: f64,
    fourth: bool,
    row: Option<MomentRow>,
    state: DdState,
}

/// Running moments in double-double; rounding to doubles happens only on output.
#[derive(Clone, Copy, Debug)]
struct DdState {
    s_sq: Dd,
    sy: Dd,
    y_sq: Dd,
    y_4: Dd,
    b: Dd,
    /// `nu_n` summed exactly from the doubles `mu_k`.
    nu: Dd,
}

impl<'a> MomentCursor<'a> {
    /// Second moments only, for innovations of variance `variance`.
    pub fn second(spec: &'a MemorySpec, p: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidInput(format!("innovation variance must be positive and finite, got {variance}")));
        }
        let state = DdState { s_sq: DD_ZERO, sy: DD_ZERO, y_sq: DD_ZERO, y_4: DD_ZERO, b: DD_ZERO, nu: DD_ZERO };
        Ok(MomentCursor { seq: SequenceCursor::new(spec, p)?, p, variance, fourth: false, row: None, state })
    }

    /// Second and fourth moments for Rademacher innovations.
    pub fn rademacher(spec: &'a MemorySpec, p: f64) -> Result<Self> {
        Ok(MomentCursor { fourth: true, ..Self::second(spec, p, 1.0)? })
    }

    pub fn current(&self) -> Option<&MomentRow> {
        self.row.as_ref()
    }

    pub fn advance(&mut self) -> Result<MomentRow> {
        let seq = self.seq.advance()?;
        let s2 = self.variance;
        let mu = seq.mu;
        let m2 = Dd::new_mul(mu, mu);
        let st = match self.row {
            None => DdState {
                s_sq: Dd::from(s2),
                sy: Dd::new_mul(mu, s2),
                y_sq: m2 * s2,
                y_4: m2 * m2,
                b: m2 * m2 * 2.0,
                nu: Dd::from(mu),
            },
            Some(_) => {
                let d = self.state;
                let pn = dd_div(Dd::from(self.p), d.nu);
                let q = pn * mu;
                let (q2, q4) = (q * 2.0, q * 4.0);
                let ys = d.y_sq;
                DdState {
                    s_sq: d.s_sq + pn * 2.0 * d.sy + s2,
                    sy: d.sy + q * d.sy + pn * ys + Dd::new_mul(mu, s2),
                    y_sq: ys + q2 * ys + m2 * s2,
                    y_4: d.y_4 + q4 * d.y_4 + m2 * ys * 6.0 + q4 * m2 * ys + m2 * m2,
                    b: d.b + q4 * d.b + q * q * ys * ys * 12.0 + q * m2 * ys * 8.0 + m2 * m2 * 2.0,
                    nu: d.nu + mu,
                }
            }
        };
        let (e_s_sq, e_sy, e_y_sq) = (round(st.s_sq), round(st.sy), round(st.y_sq));
        let row = match self.row {
            None => MomentRow {
                n: 1,
                e_s_sq,
                e_sy,
                e_y_sq,
                e_m_sq: e_y_sq,
                fourth: self.fourth.then(|| FourthRow {
                    e_y_4: round(st.y_4),
                    b_n: round(st.b),
                    kurtosis_m: 1.0,
                    log_a_x: [0.0; 4],
                }),
                seq,
            },
            Some(prev) => {
                let p = self.p;
                let nu = prev.seq.nu;
                let q = p * mu / nu;
                let ratio = (seq.log_a + seq.log_mu - prev.seq.log_a - nu.ln()).exp();
                let corr = (p * ratio).powi(2);
                let e_m_sq = prev.e_m_sq - corr * prev.e_m_sq + (2.0 * (seq.log_a + seq.log_mu)).exp() * s2;
                let fourth = prev.fourth.map(|f| {
                    let mut log_a_x = f.log_a_x;
                    for (l, k) in log_a_x.iter_mut().zip(PRODUCT_MULTIPLIERS) {
                        *l -= (k * q).ln_1p();
                    }
                    FourthRow {
                        e_y_4: round(st.y_4),
                        b_n: round(st.b),
                        kurtosis_m: round(Dd::from(3.0) - dd_div(st.b, st.y_sq * st.y_sq)),
                        log_a_x,
                    }
                });
                MomentRow { n: seq.n, e_s_sq, e_sy, e_y_sq, e_m_sq, fourth, seq }
            }
        };
        self.state = st;
        if !(row.e_s_sq.is_finite() && row.e_y_sq.is_finite()) {
            return Err(Error::Overflow(format!("moments at n = {} leave the double range", row.n)));
        }
        self.row = Some(row);
        Ok(row)
    }

    pub fn advance_to(&mut self, n: u64) -> Result<MomentRow> {
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

/// Fourth-moment columns of a [`MomentTable`].
#[derive(Clone, Debug, PartialEq)]
pub struct FourthColumns {
    pub e_y_4: Vec<f64>,
    pub b_n: Vec<f64>,
    pub kurtosis_m: Vec<f64>,
    /// `log a_n(x)` for `x = p, 2p, 3p, 4p`.
    pub log_a_x: [Vec<f64>; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    pub spec: MemorySpec,
    pub p: f64,
    pub innovation_variance: f64,
    pub n_max: usize,
    pub e_s_sq: Vec<f64>,
    pub e_m_sq: Vec<f64>,
    pub e_sy: Vec<f64>,
    pub e_y_sq: Vec<f64>,
    pub fourth: Option<FourthColumns>,
}

fn collect(mut cursor: MomentCursor<'_>, spec: &MemorySpec, p: f64, n_max: usize) -> Result<MomentTable> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let mut t = MomentTable {
        spec: spec.clone(),
        p,
        innovation_variance: cursor.variance,
        n_max,
        e_s_sq: Vec::with_capacity(n_max),
        e_m_sq: Vec::with_capacity(n_max),
        e_sy: Vec::with_capacity(n_max),
        e_y_sq: Vec::with_capacity(n_max),
        fourth: cursor.fourth.then(|| FourthColumns {
            e_y_4: Vec::with_capacity(n_max),
            b_n: Vec::with_capacity(n_max),
            kurtosis_m: Vec::with_capacity(n_max),
            log_a_x: Default::default(),
        }),
    };
    for _ in 0..n_max {
        let r = cursor.advance()?;
        t.e_s_sq.push(r.e_s_sq);
        t.e_m_sq.push(r.e_m_sq);
        t.e_sy.push(r.e_sy);
        t.e_y_sq.push(r.e_y_sq);
        if let (Some(cols), Some(f)) = (t.fourth.as_mut(), r.fourth) {
            cols.e_y_4.push(f.e_y_4);
            cols.b_n.push(f.b_n);
            cols.kurtosis_m.push(f.kurtosis_m);
            for (c, v) in cols.log_a_x.iter_mut().zip(f.log_a_x) {
                c.push(v);
            }
        }
    }
    Ok(t)
}

/// Second-moment columns up to `n_max`.
pub fn second_moments(spec: &MemorySpec, p: f64, n_max: usize, innovation_variance: f64) -> Result<MomentTable> {
    collect(MomentCursor::second(spec, p, innovation_variance)?, spec, p, n_max)
}

/// Second- and fourth-moment columns for Rademacher innovations.
pub fn rademacher_fourth_moments(spec: &MemorySpec, p: f64, n_max: usize) -> Result<MomentTable> {
    collect(MomentCursor::rademacher(spec, p)?, spec, p, n_max)
}

impl MomentTable {
    /// Export with header `n,E_S_sq,E_M_sq,E_SY[,E_Y_sq,E_Y_4,b_n,kurtosis_M]`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["n", "E_S_sq", "E_M_sq", "E_SY"];
        if self.fourth.is_some() {
            header.extend(["E_Y_sq", "E_Y_4", "b_n", "kurtosis_M"]);
        }
        w.write_record(&header)?;
        for i in 0..self.n_max {
            let mut rec = vec![(i + 1).to_string(), sci17(self.e_s_sq[i]), sci17(self.e_m_sq[i]), sci17(self.e_sy[i])];
            if let Some(f) = &self.fourth {
                rec.extend([sci17(self.e_y_sq[i]), sci17(f.e_y_4[i]), sci17(f.b_n[i]), sci17(f.kurtosis_m[i])]);
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `E S_n^2` from the expanded double-sum form, driven by the `E M_n^2` recursion only.
///
/// Independent of the coupled `(E S^2, E SY)` recursion; O(n) with prefix sums. Returns `E S_k^2` for `k = 1..=n`.
pub fn e_s_sq_expanded(spec: &MemorySpec, p: f64, n: usize, innovation_variance: f64) -> Result<Vec<f64>> {
    let t = second_moments(spec, p, n, innovation_variance)?;
    let s2 = innovation_variance;
    let mut seq = SequenceCursor::new(spec, p)?;
    let rows: Vec<SequenceRow> = (0..n).map(|_| seq.advance()).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n);
    // inner_k = sum_{j<=k} a_j mu_j s2 + p sum_{j<k} a_{j+1} E M_j^2 / (a_j^2 nu_j)
    let mut first = 0.0;
    let mut second = 0.0;
    let mut outer = 0.0;
    for k in 1..=n {
        out.push(k as f64 * s2 + 2.0 * p * outer);
        let r = &rows[k - 1];
        first += r.a_mu() * s2;
        if k >= 2 {
            let j = k - 1;
            let rj = &rows[j - 1];
            second += (r.log_a - 2.0 * rj.log_a).exp() * t.e_m_sq[j - 1] / rj.nu;
        }
        outer += r.inv_a_nu() * (first + p * second);
    }
    Ok(out)
}

/// Finite-support innovation law used by the enumeration oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl FiniteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() || values.len() > 255 {
            return Err(Error::InvalidInput("finite law needs 1..=255 values with matching probabilities".into()));
        }
        if probs.iter().any(|&w| !(w > 0.0 && w.is_finite())) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("probabilities must be positive and sum to 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("support values must be finite".into()));
        }
        Ok(FiniteLaw { values, probs })
    }

    pub fn rademacher() -> Self {
        FiniteLaw { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] }
    }

    pub fn variance(&self) -> f64 {
        let m: f64 = self.values.iter().zip(&self.probs).map(|(v, w)| v * w).sum();
        self.values.iter().zip(&self.probs).map(|(v, w)| w * (v - m).powi(2)).sum()
    }
}

/// Exact joint moments of `(S_k, Y_k, M_k)` for `k = 1..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedMoments {
    pub n: usize,
    pub e_s: Vec<f64>,
    pub e_s_sq: Vec<f64>,
    pub e_sy: Vec<f64>,
    pub e_y_sq: Vec<f64>,
    pub e_y_4: Vec<f64>,
    pub e_m_sq: Vec<f64>,
    pub kurtosis_m: Vec<f64>,
    /// `P(X_k > 0)`.
    pub prob_x_positive: Vec<f64>,
    /// Largest number of distinct step histories held at once.
    pub peak_states: usize,
}

/// Default cap on distinct step histories.
pub const DEFAULT_NODE_CAP: usize = 1 << 22;

type Dd = TwoFloat;

const DD_ZERO: Dd = TwoFloat::from_f64(0.0);

/// Nearest double to `hi + lo`.
fn round(x: Dd) -> f64 {
    x.hi() + x.lo()
}

/// Long division from exact products; the library quotient skips the fused
/// residual and loses about one bit in 2^-55.
fn dd_div(a: Dd, b: Dd) -> Dd {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    Dd::new_add(q1, q2) + q3
}

/// Expectations accumulated in double-double so that the oracle is accurate
/// to the last bit of the reported doubles.
struct Acc {
    e_s: Dd,
    e_s_sq: Dd,
    e_sy: Dd,
    e_y_sq: Dd,
    e_y_4: Dd,
    pos: Dd,
}

impl Acc {
    fn new() -> Self {
        Acc { e_s: DD_ZERO, e_s_sq: DD_ZERO, e_sy: DD_ZERO, e_y_sq: DD_ZERO, e_y_4: DD_ZERO, pos: DD_ZERO }
    }

    fn add(&mut self, w: Dd, s: Dd, y: Dd, last: f64) {
        let y2 = y * y;
        self.e_s += w * s;
        self.e_s_sq += w * s * s;
        self.e_sy += w * s * y;
        self.e_y_sq += w * y2;
        self.e_y_4 += w * y2 * y2;
        if last > 0.0 {
            self.pos += w;
        }
    }
}

fn push_level(out: &mut EnumeratedMoments, acc: Acc, log_a: f64) {
    let e_y_sq = round(acc.e_y_sq);
    let e_y_4 = round(acc.e_y_4);
    out.e_s.push(round(acc.e_s));
    out.e_s_sq.push(round(acc.e_s_sq));
    out.e_sy.push(round(acc.e_sy));
    out.e_y_sq.push(e_y_sq);
    out.e_y_4.push(e_y_4);
    out.e_m_sq.push((2.0 * log_a).exp() * e_y_sq);
    out.kurtosis_m.push(round(dd_div(acc.e_y_4, acc.e_y_sq * acc.e_y_sq)));
    out.prob_x_positive.push(round(acc.pos));
}

fn empty_result(n: usize) -> EnumeratedMoments {
    EnumeratedMoments {
        n,
        e_s: Vec::new(),
        e_s_sq: Vec::new(),
        e_sy: Vec::new(),
        e_y_sq: Vec::new(),
        e_y_4: Vec::new(),
        e_m_sq: Vec::new(),
        kurtosis_m: Vec::new(),
        prob_x_positive: Vec::new(),
        peak_states: 0,
    }
}

fn prepare(spec: &MemorySpec, p: f64, n: usize) -> Result<Vec<SequenceRow>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut seq = SequenceCursor::new(spec, p)?;
    (0..n).map(|_| seq.advance()).collect()
}

/// Exact enumeration over all step histories.
///
/// Histories that share the same step vector are merged, since the future of the
/// walk depends on the past only through it. The number of live histories is at
/// most `support^k`; exceeding `node_cap` is an error.
pub fn enumerate_exact(spec: &MemorySpec, p: f64, n: usize, law: &FiniteLaw, node_cap: usize) -> Result<EnumeratedMoments> {
    let rows = prepare(spec, p, n)?;
    let s = law.values.len();
    let worst = (s as f64).powi(n as i32);
    if worst > node_cap as f64 {
        return Err(Error::TreeTooLarge(node_cap));
    }
    let mut out = empty_result(n);
    let mut level: BTreeMap<Vec<u8>, Dd> = law.probs.iter().enumerate().map(|(i, &w)| (vec![i as u8], Dd::from(w))).collect();
    for k in 1..=n {
        out.peak_states = out.peak_states.max(level.len());
        let mut acc = Acc::new();
        for (hist, &w) in &level {
            let mut sum = DD_ZERO;
            let mut y = DD_ZERO;
            for (j, &i) in hist.iter().enumerate() {
                let x = Dd::from(law.values[i as usize]);
                sum += x;
                y += x * rows[j].mu;
            }
            acc.add(w, sum, y, law.values[*hist.last().unwrap() as usize]);
        }
        push_level(&mut out, acc, rows[k - 1].log_a);
        if k == n {
            break;
        }
        let nu = rows[..k].iter().fold(DD_ZERO, |acc, r| acc + r.mu);
        let mut next: BTreeMap<Vec<u8>, Dd> = BTreeMap::new();
        for (hist, w) in level {
            for j in 0..k {
                let pr = dd_div(w * p * rows[j].mu, nu);
                if pr.hi() > 0.0 {
                    let mut h = hist.clone();
                    h.push(hist[j]);
                    *next.entry(h).or_insert(DD_ZERO) += pr;
                }
            }
            for (i, &wi) in law.probs.iter().enumerate() {
                let pr = w * Dd::new_sub(1.0, p) * wi;
                if pr.hi() > 0.0 {
                    let mut h = hist.clone();
                    h.push(i as u8);
                    *next.entry(h).or_insert(DD_ZERO) += pr;
                }
            }
        }
        level = next;
    }
    Ok(out)
}

/// Unmerged expansion of the outcome tree: every innovation value, recollection
/// flag and recalled index is a separate branch. Only for very small `n`.
pub fn enumerate_tree(spec: &MemorySpec, p: f64, n: usize, law: &FiniteLaw, node_cap: usize) -> Result<EnumeratedMoments> {
    let rows = prepare(spec, p, n)?;
    let mut leaves = 1.0f64;
    for k in 1..n {
        leaves *= (law.values.len() + k) as f64;
    }
    if leaves * law.values.len() as f64 > node_cap as f64 {
        return Err(Error::TreeTooLarge(node_cap));
    }
    let mut out = empty_result(n);
    let mut accs: Vec<Acc> = (0..n).map(|_| Acc::new()).collect();
    let mut steps = Vec::with_capacity(n);

    #[allow(clippy::too_many_arguments)]
    fn walk(rows: &[SequenceRow], p: f64, law: &FiniteLaw, n: usize, steps: &mut Vec<f64>, w: Dd, s: Dd, y: Dd, accs: &mut [Acc]) {
        let k = steps.len();
        accs[k - 1].add(w, s, y, steps[k - 1]);
        if k == n {
            return;
        }
        let nu = rows[..k].iter().fold(DD_ZERO, |acc, r| acc + r.mu);
        let mu_next = rows[k].mu;
        for j in 0..k {
            let x = steps[j];
            steps.push(x);
            walk(rows, p, law, n, steps, dd_div(w * p * rows[j].mu, nu), s + x, y + Dd::new_mul(x, mu_next), accs);
            steps.pop();
        }
        for (&x, &wi) in law.values.iter().zip(&law.probs) {
            steps.push(x);
            walk(rows, p, law, n, steps, w * Dd::new_sub(1.0, p) * wi, s + x, y + Dd::new_mul(x, mu_next), accs);
            steps.pop();
        }
    }

    for (&x, &wi) in law.values.iter().zip(&law.probs) {
        steps.push(x);
        walk(&rows, p, law, n, &mut steps, Dd::from(wi), Dd::from(x), Dd::new_mul(x, rows[0].mu), &mut accs);
        steps.pop();
    }
    for (k, acc) in accs.into_iter().enumerate() {
        push_level(&mut out, acc, rows[k].log_a);
    }
    out.peak_states = leaves as usize * law.values.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        let spec = MemorySpec::power_law(0.0);
        let t = second_moments(&spec, 0.5, 3, 1.0).unwrap();
        assert_eq!(t.e_s_sq[0], 1.0);
        assert!((t.e_s_sq[1] - 3.0).abs() < 1e-15);
        assert!((t.e_m_sq[1] - 4.0 / 3.0).abs() < 1e-15);
        for p in [0.0, 0.2, 0.7, 1.0] {
            let t = second_moments(&spec, p, 2, 1.0).unwrap();
            assert!((t.e_s_sq[1] - (2.0 + 2.0 * p)).abs() < 1e-15);
        }
    }

    #[test]
    fn p_zero_collapses() {
        let spec = MemorySpec::power_law(0.7);
        let t = second_moments(&spec, 0.0, 200, 1.0).unwrap();
        let s = crate::scaling::build_sequences(&spec, 0.0, 200).unwrap();
        for i in 0..200 {
            assert!((t.e_s_sq[i] - (i + 1) as f64).abs() < 1e-9);
            assert!((t.e_m_sq[i] / s.v_sq[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_fourth_row() {
        let spec = MemorySpec::continued_product(1.0);
        let t = rademacher_fourth_moments(&spec, 0.4, 1).unwrap();
        let f = t.fourth.unwrap();
        assert_eq!(f.kurtosis_m[0], 1.0);
        assert_eq!(f.b_n[0], 2.0);
    }

    #[test]
    fn m_sq_matches_a_sq_y_sq() {
        let spec = MemorySpec::power_law(1.0);
        let t = second_moments(&spec, 0.9, 5000, 1.0).unwrap();
        let s = crate::scaling::build_sequences(&spec, 0.9, 5000).unwrap();
        for i in 0..5000 {
            let alt = (2.0 * s.log_a[i]).exp() * t.e_y_sq[i];
            assert!((t.e_m_sq[i] / alt - 1.0).abs() < 1e-9, "n={}", i + 1);
        }
    }

    #[test]
    fn expanded_form_agrees() {
        for (g, p) in [(0.0, 0.25), (0.0, 0.5), (1.0, 0.9), (0.5, 0.3)] {
            let spec = MemorySpec::power_law(g);
            let t = second_moments(&spec, p, 2000, 1.0).unwrap();
            let e = e_s_sq_expanded(&spec, p, 2000, 1.0).unwrap();
            for (i, (a, b)) in t.e_s_sq.iter().zip(&e).enumerate() {
                assert!((a / b - 1.0).abs() < 1e-10, "g={g} p={p} n={}", i + 1);
            }
        }
    }

    #[test]
    fn enumeration_small_cases() {
        let law = FiniteLaw::rademacher();
        let e = enumerate_exact(&MemorySpec::power_law(0.0), 0.5, 2, &law, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(e.e_s_sq[0], 1.0);
        assert!((e.e_s_sq[1] - 3.0).abs() < 1e-15);
        assert!((e.e_m_sq[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn merged_and_tree_enumerations_agree() {
        let law = FiniteLaw::new(vec![-2.0, 0.5, 1.0], vec![0.2, 0.4, 0.4]).unwrap();
        let spec = MemorySpec::continued_product(1.0);
        let a = enumerate_exact(&spec, 0.6, 5, &law, DEFAULT_NODE_CAP).unwrap();
        let b = enumerate_tree(&spec, 0.6, 5, &law, DEFAULT_NODE_CAP).unwrap();
        for k in 0..5 {
            assert!((a.e_s_sq[k] - b.e_s_sq[k]).abs() < 1e-12);
            assert!((a.e_y_4[k] - b.e_y_4[k]).abs() < 1e-9);
            assert!((a.prob_x_positive[k] - b.prob_x_positive[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_matches_recursions() {
        let law = FiniteLaw::rademacher();
        for g in [0.0, 0.5, 1.0] {
            let spec = MemorySpec::power_law(g);
            for p in [0.0, 0.3, g / (g + 1.0), (g + 0.5) / (g + 1.0), 0.9] {
                let e = enumerate_exact(&spec, p, 8, &law, DEFAULT_NODE_CAP).unwrap();
                let t = rademacher_fourth_moments(&spec, p, 8).unwrap();
                let f = t.fourth.as_ref().unwrap();
                for k in 0..8 {
                    assert!((e.e_s_sq[k] - t.e_s_sq[k]).abs() < 1e-10);
                    assert!((e.e_m_sq[k] - t.e_m_sq[k]).abs() < 1e-10);
                    assert!((e.e_y_4[k] - f.e_y_4[k]).abs() <= 1e-10 * f.e_y_4[k].max(1.0));
                    assert!((e.prob_x_positive[k] - 0.5).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tree_cap() {
        let law = FiniteLaw::rademacher();
        assert!(matches!(
            enumerate_exact(&MemorySpec::power_law(0.0), 0.5, 12, &law, 1000),
            Err(Error::TreeTooLarge(1000))
        ));
    }

    #[test]
    fn law_validation() {
        assert!(FiniteLaw::new(vec![1.0], vec![0.5]).is_err());
        assert!(FiniteLaw::new(vec![1.0, 2.0], vec![0.5]).is_err());
        assert_eq!(FiniteLaw::rademacher().variance(), 1.0);
    }
}
