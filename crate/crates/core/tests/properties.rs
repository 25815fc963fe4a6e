use std::sync::Arc;

use proptest::prelude::*;
use rvwalk::moments::{enumerate_exact, enumerate_tree, rademacher_fourth_moments, FiniteLaw, DEFAULT_NODE_CAP};
use rvwalk::sampler::StaticPrefixIndex;
use rvwalk::scaling::{build_sequences, covariance_kernel, hat_p};
use rvwalk::walk::{simulate, simulate_batch, SamplerMode};
use rvwalk::{DynamicWeightedIndex, InnovationSpec, MemorySpec, WalkConfig};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    // Integer weights keep every prefix sum exact, so a linear scan is an exact oracle.
    #[test]
    fn fenwick_matches_linear_scan(weights in prop::collection::vec(1u32..1000, 1..300), us in prop::collection::vec(0.0f64..1.0, 1..40)) {
        let mut idx = DynamicWeightedIndex::new(weights.len());
        let mut cum = Vec::new();
        let mut acc = 0.0;
        for &w in &weights {
            idx.push(w as f64).unwrap();
            acc += w as f64;
            cum.push(acc);
            let count = cum.len();
            prop_assert_eq!(idx.total(), acc);
            for &u in &us {
                let target = u * acc;
                let expect = cum.iter().position(|&c| c > target).map_or(count, |i| i + 1);
                prop_assert_eq!(idx.sample(u).unwrap(), expect);
            }
        }
    }

    #[test]
    fn gallop_matches_binary_search(gamma in -0.9f64..3.0, n in 1usize..2000, us in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let spec = MemorySpec::power_law(gamma);
        let mut acc = 0.0;
        let cum: Arc<[f64]> = (1..=n as u64).map(|k| { acc += spec.mu(k).unwrap(); acc }).collect();
        let plain = StaticPrefixIndex::new(cum.clone());
        let guided = StaticPrefixIndex::with_growth(cum.clone(), gamma + 1.0);
        for m in [1, n / 2 + 1, n] {
            for &u in &us {
                prop_assert_eq!(plain.sample(m, u), guided.sample(m, u));
            }
        }
    }

    #[test]
    fn sequences_satisfy_their_recursions(gamma in -0.4f64..2.0, p in 0.0f64..1.0, n in 2usize..400) {
        let spec = MemorySpec::power_law(gamma);
        let t = build_sequences(&spec, p, n).unwrap();
        let mut nu = 0.0;
        for i in 0..n {
            nu += t.mu[i];
            prop_assert!(close(t.nu[i], nu, 1e-13));
            let a = t.log_a[i].exp();
            prop_assert!(close(t.sigma_sq[i], t.v_sq[i] / (a * a * t.mu[i] * t.mu[i]), 1e-10));
            if i > 0 {
                prop_assert!(t.log_a[i] <= t.log_a[i - 1]);
                prop_assert!(t.v_sq[i] >= t.v_sq[i - 1]);
                let ratio = (t.log_a[i] - t.log_a[i - 1]).exp();
                prop_assert!(close(ratio, t.nu[i - 1] / (t.nu[i - 1] + p * t.mu[i]), 1e-12));
            }
        }
    }

    #[test]
    fn continued_product_recursion(gamma in -0.9f64..3.0, n in 1u64..100_000) {
        let spec = MemorySpec::continued_product(gamma);
        let (a, b) = (spec.mu(n).unwrap(), spec.mu(n + 1).unwrap());
        prop_assert!(close(b, a * (1.0 + gamma / n as f64), 1e-12));
    }

    #[test]
    fn spec_json_round_trips(gamma in -0.9f64..3.0, alpha in -2.0f64..2.0) {
        for spec in [
            MemorySpec::power_law(gamma),
            MemorySpec::continued_product(gamma),
            MemorySpec::slow_growth(gamma, alpha.abs().min(0.99)),
        ] {
            prop_assert_eq!(MemorySpec::from_json(&spec.to_json()).unwrap(), spec);
        }
    }

    #[test]
    fn kernel_is_symmetric_and_homogeneous(gamma in 0.0f64..2.0, frac in 0.0f64..1.0, s in 0.01f64..2.0, t in 0.01f64..2.0, c in 0.1f64..10.0) {
        // Diffusive regime is p < (gamma + 1/2) / (gamma + 1).
        let p = frac * (gamma + 0.5) / (gamma + 1.0) * 0.999;
        let k = covariance_kernel(s, t, p, gamma).unwrap();
        prop_assert!(close(k, covariance_kernel(t, s, p, gamma).unwrap(), 1e-12));
        prop_assert!(close(covariance_kernel(c * s, c * t, p, gamma).unwrap(), c * k, 1e-9));
        let d = covariance_kernel(s, s, p, gamma).unwrap();
        prop_assert!(d > 0.0);
        prop_assert!(k * k <= d * covariance_kernel(t, t, p, gamma).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn kernel_is_continuous_at_p_hat(gamma in 0.1f64..2.0, s in 0.05f64..1.0) {
        let ph = hat_p(gamma);
        let mid = covariance_kernel(s, 1.0, ph, gamma).unwrap();
        for eps in [-1e-7, 1e-7] {
            let side = covariance_kernel(s, 1.0, ph + eps, gamma).unwrap();
            prop_assert!((side - mid).abs() <= 1e-4, "jump {} at eps {}", side - mid, eps);
        }
    }

    #[test]
    fn recursion_matches_enumeration(gamma in 0.0f64..1.5, p in 0.0f64..=1.0, n in 1usize..7) {
        let spec = MemorySpec::power_law(gamma);
        let rec = rademacher_fourth_moments(&spec, p, n).unwrap();
        let en = enumerate_exact(&spec, p, n, &FiniteLaw::rademacher(), DEFAULT_NODE_CAP).unwrap();
        for k in 0..n {
            prop_assert!((rec.e_s_sq[k] - en.e_s_sq[k]).abs() <= 1e-10);
            prop_assert!((rec.e_m_sq[k] - en.e_m_sq[k]).abs() <= 1e-10);
            let y4 = rec.fourth.as_ref().unwrap().e_y_4[k];
            prop_assert!((y4 - en.e_y_4[k]).abs() <= 1e-10 * en.e_y_4[k].max(1.0));
        }
    }

    #[test]
    fn enumerations_agree(gamma in 0.0f64..1.5, p in 0.0f64..=1.0, n in 1usize..6) {
        let spec = MemorySpec::power_law(gamma);
        let law = FiniteLaw::new(vec![-1.0, 0.5, 2.0], vec![0.3, 0.5, 0.2]).unwrap();
        let a = enumerate_exact(&spec, p, n, &law, DEFAULT_NODE_CAP).unwrap();
        let b = enumerate_tree(&spec, p, n, &law, DEFAULT_NODE_CAP).unwrap();
        for k in 0..n {
            prop_assert!(close(a.e_s_sq[k], b.e_s_sq[k], 1e-12));
            prop_assert!(close(a.e_y_4[k], b.e_y_4[k], 1e-12));
            prop_assert!(close(a.prob_x_positive[k], b.prob_x_positive[k], 1e-12));
        }
    }

    // Recollection only copies past steps, so each X_k keeps the innovation law.
    #[test]
    fn marginal_law_is_preserved(gamma in 0.0f64..1.5, p in 0.0f64..=1.0, n in 1usize..8) {
        let spec = MemorySpec::power_law(gamma);
        let en = enumerate_exact(&spec, p, n, &FiniteLaw::rademacher(), DEFAULT_NODE_CAP).unwrap();
        for k in 0..n {
            prop_assert!((en.prob_x_positive[k] - 0.5).abs() <= 1e-12);
            prop_assert!(en.e_s[k].abs() <= 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), p in 0.0f64..=1.0, gamma in -0.5f64..2.0) {
        let cfg = WalkConfig::new(MemorySpec::power_law(gamma), p, InnovationSpec::Rademacher, 500, seed)
            .with_checkpoints(vec![1, 10, 100, 500]);
        let a = simulate(&cfg).unwrap();
        prop_assert_eq!(&a, &simulate(&cfg).unwrap());
        for w in a.s.windows(2) {
            prop_assert!(w[0].fract() == 0.0 && w[1].fract() == 0.0);
        }
        prop_assert!(a.s_final().abs() <= 500.0);
    }
}

// With integer weights every sampler sees the same exact prefix sums.
#[test]
fn sampler_modes_agree_on_exact_weights() {
    for (gamma, modes) in [
        (0.0, &[SamplerMode::Uniform, SamplerMode::Prefix, SamplerMode::Fenwick][..]),
        (1.0, &[SamplerMode::Prefix, SamplerMode::Fenwick][..]),
    ] {
        let base = WalkConfig::new(MemorySpec::power_law(gamma), 0.7, InnovationSpec::Rademacher, 5_000, 9)
            .with_checkpoints((1..=50).map(|i| i * 100).collect());
        let runs: Vec<_> = modes.iter().map(|&m| simulate(&base.clone().with_sampler(m)).unwrap().s).collect();
        for r in &runs[1..] {
            assert_eq!(r, &runs[0], "gamma {gamma}");
        }
    }
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let cfg = WalkConfig::new(MemorySpec::power_law(0.5), 0.6, InnovationSpec::StandardNormal, 2_000, 0);
    let one = simulate_batch(&cfg, 16, 77, 1).unwrap();
    let four = simulate_batch(&cfg, 16, 77, 4).unwrap();
    assert_eq!(one, four);
    assert!(one.windows(2).all(|w| w[0].s != w[1].s));
}

#[test]
fn martingale_identities_hold_along_paths() {
    for (gamma, p) in [(0.0, 0.25), (1.0, 0.5), (0.0, 0.9), (0.5, 0.2)] {
        let cfg = WalkConfig::new(MemorySpec::power_law(gamma), p, InnovationSpec::Rademacher, 20_000, 3)
            .with_checkpoints(vec![10, 1_000, 20_000])
            .with_martingales(true);
        let m = simulate(&cfg).unwrap().martingales.unwrap();
        assert!(m.max_residual_l <= rvwalk::walk::IDENTITY_TOL, "L residual {} at {gamma}, {p}", m.max_residual_l);
        assert!(m.max_residual_n <= rvwalk::walk::IDENTITY_TOL, "N residual {} at {gamma}, {p}", m.max_residual_n);
    }
}

// E(X_{k+1} | F_k) = p Y_k / nu_k, checked through the exact joint moments.
#[test]
fn conditional_mean_of_next_step() {
    let spec = MemorySpec::power_law(1.0);
    let p = 0.6;
    let n = 6;
    let law = FiniteLaw::rademacher();
    let en = enumerate_exact(&spec, p, n, &law, DEFAULT_NODE_CAP).unwrap();
    for k in 1..n {
        let nu: f64 = (1..=k as u64).map(|i| spec.mu(i).unwrap()).sum();
        let mu_next = spec.mu(k as u64 + 1).unwrap();
        // E(S_{k+1} Y_{k+1}) = E(S_k Y_k) + E(X_{k+1} Y_k) + mu_{k+1} E(S_k X_{k+1}) + mu_{k+1},
        // and E(X_{k+1} Y_k) = p E(Y_k^2) / nu_k, E(S_k X_{k+1}) = p E(S_k Y_k) / nu_k.
        let lhs = en.e_sy[k];
        let rhs = en.e_sy[k - 1] + p * en.e_y_sq[k - 1] / nu + mu_next * p * en.e_sy[k - 1] / nu + mu_next;
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "k {k}: {lhs} vs {rhs}");
    }
}
