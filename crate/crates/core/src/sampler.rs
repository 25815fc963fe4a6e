//! Incremental weighted sampling of the recollected index.
//!
//! [`DynamicWeightedIndex`] is a binary indexed tree over weights that arrive
//! one per step. [`StaticPrefixIndex`] samples from a prefix of a precomputed
//! cumulative array and is what the simulator uses when the whole memory
//! sequence is known in advance.

use std::sync::Arc;

use crate::error::{Error, Result};

#[inline]
fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}

/// Append-only binary indexed tree of positive weights.
#[derive(Clone, Debug)]
pub struct DynamicWeightedIndex {
    // tree[0] is unused so that node i covers (i - lowbit(i), i].
    tree: Vec<f64>,
    capacity: usize,
    total: f64,
}

impl DynamicWeightedIndex {
    pub fn new(capacity: usize) -> Self {
        let mut tree = Vec::with_capacity(capacity.min(1 << 20) + 1);
        tree.push(0.0);
        DynamicWeightedIndex { tree, capacity, total: 0.0 }
    }

    /// Reserve storage for the full capacity up front.
    pub fn with_reserved(capacity: usize) -> Self {
        let mut tree = Vec::with_capacity(capacity + 1);
        tree.push(0.0);
        DynamicWeightedIndex { tree, capacity, total: 0.0 }
    }

    pub fn count(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// `prefix(count)`, the sampling denominator.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Append a weight, returning the new count.
    pub fn push(&mut self, w: f64) -> Result<usize> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonPositiveWeight(w));
        }
        let count = self.count();
        if count >= self.capacity {
            return Err(Error::CapacityExceeded(self.capacity));
        }
        self.push_unchecked(w);
        Ok(count + 1)
    }

    /// Append without the weight and capacity checks.
    #[inline]
    pub fn push_unchecked(&mut self, w: f64) {
        let i = self.tree.len();
        let low = lowbit(i);
        let mut node = w;
        let mut step = 1;
        while step < low {
            node += self.tree[i - step];
            step <<= 1;
        }
        self.tree.push(node);
        self.total = self.prefix(i);
    }

    /// Sum of the first `k` weights.
    pub fn prefix(&self, k: usize) -> f64 {
        let mut i = k.min(self.count());
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= lowbit(i);
        }
        s
    }

    /// The unique `k` in `1..=count` with `prefix(k-1) <= u * total < prefix(k)`.
    pub fn sample(&self, u: f64) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::Empty);
        }
        Ok(self.sample_unchecked(u))
    }

    #[inline]
    pub fn sample_unchecked(&self, u: f64) -> usize {
        let count = self.count();
        let target = u * self.total;
        let mut pos = 0usize;
        let mut acc = 0.0;
        let mut bit = if count == 0 { 0 } else { 1usize << (usize::BITS - 1 - count.leading_zeros()) };
        while bit > 0 {
            let next = pos + bit;
            if next <= count {
                let candidate = acc + self.tree[next];
                if candidate <= target {
                    pos = next;
                    acc = candidate;
                }
            }
            bit >>= 1;
        }
        (pos + 1).min(count)
    }
}

/// Samples `k` in `1..=n` with probability `w_k / cum[n]` from a shared
/// cumulative array `cum[k-1] = w_1 + ... + w_k`.
///
/// When the cumulative weights grow roughly like `k^g`, the search starts from
/// the guess `n u^{1/g}` and gallops outwards, which touches a handful of entries
/// instead of a full binary search. The returned index does not depend on the guess.
#[derive(Clone, Debug)]
pub struct StaticPrefixIndex {
    cum: Arc<[f64]>,
    inv_growth: Option<f64>,
}

impl StaticPrefixIndex {
    pub fn new(cum: Arc<[f64]>) -> Self {
        StaticPrefixIndex { cum, inv_growth: None }
    }

    /// Use the guess `n u^{1/growth}` as the search start.
    pub fn with_growth(cum: Arc<[f64]>, growth: f64) -> Self {
        let inv_growth = (growth > 0.0 && growth.is_finite()).then(|| 1.0 / growth);
        StaticPrefixIndex { cum, inv_growth }
    }

    pub fn len(&self) -> usize {
        self.cum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cum.is_empty()
    }

    /// Same inverse-CDF convention as [`DynamicWeightedIndex::sample`], restricted to the first `n` weights.
    #[inline]
    pub fn sample(&self, n: usize, u: f64) -> usize {
        let head = &self.cum[..n];
        let target = u * head[n - 1];
        let below = match self.inv_growth {
            None => head.partition_point(|&c| c <= target),
            Some(e) => {
                let guess = if e == 1.0 { u } else { u.powf(e) };
                gallop(head, target, ((guess * n as f64) as usize).min(n - 1))
            }
        };
        (below + 1).min(n)
    }
}

/// First index `i` with `head[i] > target` (or `head.len()`), searching outwards from `start`.
#[inline]
fn gallop(head: &[f64], target: f64, start: usize) -> usize {
    let n = head.len();
    let (lo, hi);
    if head[start] <= target {
        let mut l = start + 1;
        let mut step = 1;
        loop {
            let probe = l + step - 1;
            if probe >= n {
                hi = n;
                break;
            }
            if head[probe] > target {
                hi = probe;
                break;
            }
            l = probe + 1;
            step <<= 1;
        }
        lo = l;
    } else {
        let mut h = start;
        let mut step = 1;
        loop {
            if h == 0 {
                lo = 0;
                break;
            }
            let probe = h.saturating_sub(step);
            if head[probe] <= target {
                lo = probe + 1;
                break;
            }
            h = probe;
            step <<= 1;
        }
        hi = h;
    }
    lo + head[lo..hi].partition_point(|&c| c <= target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_scan(weights: &[f64], u: f64) -> usize {
        let total: f64 = weights.iter().sum();
        let target = u * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return i + 1;
            }
        }
        weights.len()
    }

    #[test]
    fn push_examples() {
        let mut s = DynamicWeightedIndex::new(10);
        assert_eq!(s.push(1.0).unwrap(), 1);
        assert_eq!(s.total(), 1.0);
        let mut s = DynamicWeightedIndex::new(10);
        s.push(2.0).unwrap();
        s.push(3.0).unwrap();
        assert_eq!(s.total(), 5.0);
        assert_eq!(s.prefix(1), 2.0);
    }

    #[test]
    fn continued_product_total() {
        let mut s = DynamicWeightedIndex::new(100);
        for k in 1..=100 {
            s.push(k as f64).unwrap();
        }
        assert_eq!(s.total(), 5050.0);
    }

    #[test]
    fn sample_examples() {
        let mut s = DynamicWeightedIndex::new(3);
        for _ in 0..3 {
            s.push(1.0).unwrap();
        }
        assert_eq!(s.sample(0.5).unwrap(), 2);
        let mut s = DynamicWeightedIndex::new(2);
        s.push(2.0).unwrap();
        s.push(3.0).unwrap();
        assert_eq!(s.sample(0.39).unwrap(), 1);
        assert_eq!(s.sample(0.40).unwrap(), 2);
        assert_eq!(s.sample(0.0).unwrap(), 1);
        assert_eq!(s.sample(0.999_999).unwrap(), 2);
    }

    #[test]
    fn errors() {
        let mut s = DynamicWeightedIndex::new(1);
        assert!(matches!(s.sample(0.1), Err(Error::Empty)));
        assert!(matches!(s.push(0.0), Err(Error::NonPositiveWeight(_))));
        assert!(matches!(s.push(-1.0), Err(Error::NonPositiveWeight(_))));
        assert!(matches!(s.push(f64::NAN), Err(Error::NonPositiveWeight(_))));
        s.push(1.0).unwrap();
        assert!(matches!(s.push(1.0), Err(Error::CapacityExceeded(1))));
    }

    #[test]
    fn static_prefix_matches_dynamic_on_integer_weights() {
        let weights: Vec<f64> = (1..=13).map(|k| ((k * 7) % 5 + 1) as f64).collect();
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cum.push(acc);
        }
        let cum: Arc<[f64]> = cum.into();
        let stat = StaticPrefixIndex::new(cum.clone());
        let hinted = StaticPrefixIndex::with_growth(cum, 1.7);
        for n in 1..=weights.len() {
            let mut dynamic = DynamicWeightedIndex::new(n);
            for w in &weights[..n] {
                dynamic.push(*w).unwrap();
            }
            for i in 0..1000 {
                let u = i as f64 / 1000.0;
                let expected = linear_scan(&weights[..n], u);
                assert_eq!(dynamic.sample(u).unwrap(), expected);
                assert_eq!(stat.sample(n, u), expected);
                assert_eq!(hinted.sample(n, u), expected);
            }
        }
    }
}
