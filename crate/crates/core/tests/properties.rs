use hetfb_core::analytic::{feedback_set_pmf, selection_coefficients, xi_for, xi_numerators, ScheduledCqiLaw};
use hetfb_core::channel::{Cluster, ImpairmentParams, SystemConfig};
use hetfb_core::feedback::best_m_select;
use hetfb_core::goodput::{i2, i4, IntegralArgs};
use hetfb_core::specfun::{exp_integral_e1, gauss_2f1, marcum_q1, scaled_exp_integral_e1};
use proptest::prelude::*;

/// Systems with up to three clusters of distinct subband sizes.
fn system() -> impl Strategy<Value = SystemConfig> {
    (
        2u32..=4,
        1usize..=3,
        prop::collection::vec(0usize..=4, 3),
        1usize..=4,
        0.1f64..100.0,
    )
        .prop_filter_map("needs a user and a valid best-M value", |(log_n, g, users, m, snr)| {
            let n = 1usize << log_n;
            let clusters: Vec<Cluster> = (0..g).map(|i| Cluster::new(1 << i, users[i])).collect();
            SystemConfig::new(n * (1 << (g - 1)), clusters, m, snr).ok()
        })
}

fn impairments() -> impl Strategy<Value = ImpairmentParams> {
    (0.0f64..0.3, 0.5f64..1.0).prop_filter_map("valid impairment pair", |(s, a)| ImpairmentParams::new(s, a).ok())
}

/// Allowed deviation of a float sum from its exact value: 1e-9, or the
/// rounding carried by coefficients of large magnitude.
fn sum_tolerance(values: &[f64]) -> f64 {
    let magnitude: f64 = values.iter().map(|v| v.abs()).sum();
    1e-9f64.max(16.0 * f64::EPSILON * magnitude)
}

proptest! {
    #[test]
    fn marcum_q_is_a_probability(a in 0.0f64..60.0, b in 0.0f64..60.0) {
        let q = marcum_q1(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&q), "Q1({a}, {b}) = {q}");
    }

    #[test]
    fn marcum_q_monotone(a in 0.0f64..30.0, b in 0.0f64..30.0, da in 0.0f64..3.0, db in 0.0f64..3.0) {
        let base = marcum_q1(a, b).unwrap();
        prop_assert!(marcum_q1(a, b + db).unwrap() <= base + 1e-12);
        prop_assert!(marcum_q1(a + da, b).unwrap() >= base - 1e-12);
    }

    #[test]
    fn e1_bracketed(x in 1e-6f64..50.0) {
        let e = exp_integral_e1(x).unwrap();
        let lo = (-x).exp() / (x + 1.0);
        let hi = (-x).exp() / x;
        prop_assert!(lo < e && e < hi, "E1({x}) = {e} outside ({lo}, {hi})");
    }

    #[test]
    fn scaled_e1_bracketed(x in 1e-3f64..1e6) {
        let s = scaled_exp_integral_e1(x).unwrap();
        prop_assert!(1.0 / (x + 1.0) < s && s < 1.0 / x);
    }

    #[test]
    fn hypergeometric_reduces_when_c_equals_b(a in 0.1f64..3.0, b in 0.5f64..3.0, z in 0.0f64..0.9) {
        let v = gauss_2f1(a, b, b, z).unwrap();
        prop_assert!((v * (1.0 - z).powf(a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn best_m_selection_is_maximal(values in prop::collection::vec(0.0f64..10.0, 1..40), pick in 0.0f64..1.0) {
        let m = 1 + ((values.len() - 1) as f64 * pick) as usize;
        let sel = best_m_select(&values, m).unwrap();
        prop_assert_eq!(sel.len(), m);
        let mut idx: Vec<usize> = sel.iter().map(|e| e.0).collect();
        idx.sort_unstable();
        idx.dedup();
        prop_assert_eq!(idx.len(), m);
        let floor = sel.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        for (i, v) in values.iter().enumerate() {
            if !idx.contains(&i) {
                prop_assert!(*v <= floor);
            }
        }
        for &(i, v) in &sel {
            prop_assert_eq!(values[i], v);
        }
    }

    #[test]
    fn xi_sums_to_one(n in 1usize..=64, pick in 0.0f64..1.0) {
        let quota = 1 + ((n - 1) as f64 * pick) as usize;
        let xi = xi_for(n, quota);
        let total: f64 = xi.iter().sum();
        prop_assert!((total - 1.0).abs() <= sum_tolerance(&xi), "n = {n}, quota = {quota}: {total}");
        if let Some(num) = xi_numerators(n, quota) {
            prop_assert_eq!(num.iter().sum::<i128>(), quota as i128);
        }
    }

    #[test]
    fn theta_sums_to_one(sys in system(), seed in any::<u64>()) {
        let tau: Vec<usize> = sys
            .clusters()
            .iter()
            .enumerate()
            .map(|(g, c)| ((seed >> (8 * g)) as usize) % (c.users + 1))
            .collect();
        prop_assume!(tau.iter().any(|&t| t > 0));
        let table = selection_coefficients(&sys, &tau).unwrap();
        let total: f64 = table.theta.iter().sum();
        prop_assert!((total - 1.0).abs() <= sum_tolerance(&table.theta), "sum {total}");
        for xi in &table.xi {
            prop_assert!((xi.iter().sum::<f64>() - 1.0).abs() <= sum_tolerance(xi));
        }
    }

    #[test]
    fn feedback_set_probabilities_sum_to_one(sys in system()) {
        let dist = feedback_set_pmf(&sys);
        let mut total = 0.0;
        for (_, p) in dist.iter() {
            prop_assert!((0.0..=1.0).contains(&p));
            total += p;
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scheduled_cqi_cdf_is_a_cdf(sys in system()) {
        let law = ScheduledCqiLaw::new(&sys, 1.0);
        let mut prev = law.cdf(0.0);
        prop_assert!((prev - (1.0 - law.scheduled_probability())).abs() < 1e-12);
        for i in 1..=200 {
            let f = law.cdf(i as f64 * 0.1);
            prop_assert!(f >= prev - 1e-15);
            prev = f;
        }
        prop_assert!((law.cdf(200.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn success_integrals_are_probabilities(a in 0.0f64..20.0, b in 1usize..=40, imp in impairments()) {
        let p2 = i2(a, b, &imp).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p2), "i2 = {p2}");
        let beta1 = (a / 20.0).min(1.0);
        let p4 = i4(beta1, b, &imp).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p4), "i4 = {p4}");
    }

    #[test]
    fn hypergeometric_argument_below_one(a in 0.0f64..1e4, imp in impairments(), l in 0usize..200) {
        let args = IntegralArgs::new(a, &imp).unwrap();
        let z = args.hypergeometric_arg(l);
        prop_assert!((0.0..1.0).contains(&z));
    }
}

#[test]
fn hypergeometric_reduction_on_grid() {
    for &(a, b) in &[(0.5, 1.0), (1.0, 1.5), (1.5, 2.0)] {
        for i in 0..10 {
            let z = i as f64 / 10.0;
            let v = gauss_2f1(a, b, b, z).unwrap();
            assert!((v * (1.0 - z).powf(a) - 1.0).abs() < 1e-9, "({a}, {b}; {b}; {z})");
        }
    }
}

#[test]
fn marcum_monotone_on_grid() {
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    for &a in &grid {
        for w in grid.windows(2) {
            assert!(marcum_q1(a, w[1]).unwrap() <= marcum_q1(a, w[0]).unwrap() + 1e-12);
            assert!(marcum_q1(w[1], a).unwrap() >= marcum_q1(w[0], a).unwrap() - 1e-12);
        }
    }
}
