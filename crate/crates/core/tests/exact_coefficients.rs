//! Selection coefficients against exact rational polynomial expansion.

use hetfb_core::analytic::{feedback_set_pmf, selection_coefficients, xi_for};
use hetfb_core::channel::{Cluster, SystemConfig};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

type Poly = Vec<BigRational>;

fn binomial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// CDF of one of the `quota` best of `n` i.i.d. values picked uniformly, as
/// a polynomial in u = F(x): the j-th best is ≤ x when fewer than j values
/// exceed x.
fn reported_cdf(n: usize, quota: usize) -> Poly {
    let mut poly = vec![BigRational::zero(); n + 1];
    for j in 1..=quota {
        for i in 0..j {
            // C(n,i)(1 − u)^i u^(n − i)
            for r in 0..=i {
                let sign = if r % 2 == 0 { BigInt::one() } else { -BigInt::one() };
                let c = binomial(n, i) * binomial(i, r) * sign;
                poly[n - i + r] += BigRational::from_integer(c);
            }
        }
    }
    let q = BigRational::from_integer(BigInt::from(quota));
    poly.into_iter().map(|c| c / &q).collect()
}

fn power(p: &Poly, e: usize) -> Poly {
    (0..e).fold(vec![BigRational::one()], |acc, _| mul(&acc, p))
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("finite rational")
}

/// Compares Θ with the exact expansion of Π_g F_g(u)^τ_g; returns the
/// largest deviation relative to max(1, Σ|Θ|).
fn theta_deviation(sys: &SystemConfig, tau: &[usize]) -> f64 {
    let table = selection_coefficients(sys, tau).unwrap();
    let mut exact = vec![BigRational::one()];
    for (g, &t) in tau.iter().enumerate() {
        exact = mul(&exact, &power(&reported_cdf(sys.subbands(g), sys.quota(g)), t));
    }
    let top = table.top_exponent;
    assert_eq!(exact.len(), top + 1);
    let scale = table.theta.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let mut worst = 0.0f64;
    for (k, c) in exact.iter().enumerate() {
        let m = top - k;
        let ours = table.theta.get(m).copied().unwrap_or(0.0);
        worst = worst.max((ours - to_f64(c)).abs() / scale);
    }
    let exact_sum: BigRational = exact.iter().cloned().sum();
    assert!(exact_sum.is_one());
    worst
}

fn systems(max_quota: usize) -> Vec<SystemConfig> {
    let size_sets: [&[usize]; 7] = [&[1], &[2], &[4], &[1, 2], &[1, 4], &[2, 4], &[1, 2, 4]];
    let mut out = Vec::new();
    for &n in &[4usize, 8, 16] {
        for sizes in size_sets {
            let largest = *sizes.last().unwrap();
            if largest > n {
                continue;
            }
            for m in 1..=n / largest {
                let clusters: Vec<Cluster> = sizes.iter().map(|&e| Cluster::new(e, 3)).collect();
                let sys = SystemConfig::new(n, clusters, m, 1.0).unwrap();
                if (0..sys.num_clusters()).all(|g| sys.quota(g) <= max_quota) {
                    out.push(sys);
                }
            }
        }
    }
    out
}

fn feedback_sets(g: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..g {
        out = out
            .into_iter()
            .flat_map(|t| (0..=max).map(move |v| [t.clone(), vec![v]].concat()))
            .collect();
    }
    out.retain(|t| t.iter().any(|&v| v > 0));
    out
}

#[test]
fn coefficients_match_exact_expansion_on_small_instances() {
    let all = systems(3);
    assert!(all.len() > 10);
    for sys in &all {
        for tau in feedback_sets(sys.num_clusters(), 3) {
            let dev = theta_deviation(sys, &tau);
            assert!(dev < 1e-12, "{sys:?} tau {tau:?}: deviation {dev}");
        }
    }
}

#[test]
fn coefficients_match_exact_expansion_for_three_clusters() {
    // Three distinct subband sizes force per-cluster quotas of at least 4.
    let all: Vec<SystemConfig> = systems(8).into_iter().filter(|s| s.num_clusters() == 3).collect();
    assert!(!all.is_empty());
    for sys in &all {
        for tau in feedback_sets(3, 2) {
            let dev = theta_deviation(sys, &tau);
            assert!(dev < 1e-12, "{sys:?} tau {tau:?}: deviation {dev}");
        }
    }
}

#[test]
fn xi_matches_exact_reported_cdf() {
    for n in 1..=16 {
        for quota in 1..=n {
            let exact = reported_cdf(n, quota);
            let xi = xi_for(n, quota);
            for (m, v) in xi.iter().enumerate() {
                let e = to_f64(&exact[n - m]);
                assert!((v - e).abs() <= 1e-12 * e.abs().max(1.0), "n {n} quota {quota} m {m}");
            }
            assert!(exact[..n + 1 - quota].iter().all(Zero::is_zero));
        }
    }
}

#[test]
fn probabilities_sum_to_one() {
    for sys in systems(3) {
        let total: f64 = feedback_set_pmf(&sys).iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for g in 0..sys.num_clusters() {
            let s: f64 = xi_for(sys.subbands(g), sys.quota(g)).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
