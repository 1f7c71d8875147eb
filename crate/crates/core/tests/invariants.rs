mod common;

use std::f64::consts::PI;

use anderson_core::anderson::{build_anderson, AndersonConfig, Boundary};
use anderson_core::dense::{dense_eigvals, to_dense};
use anderson_core::matching::symmetric_matching;
use anderson_core::mlildl::{factorize, FactorParams};
use anderson_core::mmio::{format_matrix_market, parse_matrix_market};
use anderson_core::sparse::{DiagScaling, Permutation, SparseSymMatrix};
use common::*;
use proptest::prelude::*;

fn arb_matrix() -> impl Strategy<Value = SparseSymMatrix> {
    (2usize..40, 0.05f64..0.6, any::<u64>()).prop_map(|(n, density, seed)| random_sym(n, density, seed))
}

fn arb_permutation(n: usize, seed: u64) -> Permutation {
    let mut s = anderson_core::rng::Stream::new(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for k in (1..n).rev() {
        order.swap(k, s.index(k + 1));
    }
    Permutation::from_order(order).unwrap()
}

fn sorted_spectrum(a: &SparseSymMatrix) -> Vec<f64> {
    let mut v = dense_eigvals(&to_dense(a).unwrap());
    v.sort_by(f64::total_cmp);
    v
}

fn inertia(v: &[f64], tol: f64) -> (usize, usize, usize) {
    let neg = v.iter().filter(|x| **x < -tol).count();
    let pos = v.iter().filter(|x| **x > tol).count();
    (neg, v.len() - neg - pos, pos)
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sym_matvec_matches_dense(a in arb_matrix(), seed in any::<u64>()) {
        let mut s = anderson_core::rng::Stream::new(seed);
        let x: Vec<f64> = (0..a.n()).map(|_| s.uniform(-1.0, 1.0)).collect();
        let y = a.sym_matvec(&x).unwrap();
        let d = to_dense(&a).unwrap().matvec(&x);
        prop_assert!(max_abs_diff(&y, &d) <= 1e-12 * (1.0 + a.norm1()));
    }

    #[test]
    fn permutation_preserves_spectrum(a in arb_matrix(), seed in any::<u64>()) {
        let p = arb_permutation(a.n(), seed);
        let b = a.permute_sym(&p).unwrap();
        for (i, j, v) in a.lower_entries() {
            prop_assert_eq!(b.get(p.forward()[i], p.forward()[j]), v);
        }
        let (sa, sb) = (sorted_spectrum(&a), sorted_spectrum(&b));
        prop_assert!(max_abs_diff(&sa, &sb) <= 1e-10 * (1.0 + a.norm1()));
    }

    #[test]
    fn permutation_round_trip(n in 1usize..60, seed in any::<u64>(), seed2 in any::<u64>()) {
        let p = arb_permutation(n, seed);
        let q = arb_permutation(n, seed2);
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        prop_assert_eq!(p.apply_inverse_vec(&p.apply_vec(&x)), x.clone());
        prop_assert_eq!(p.then(&q).apply_vec(&x), q.apply_vec(&p.apply_vec(&x)));
        prop_assert!(p.then(&p.inverse()).is_identity());
    }

    #[test]
    fn scaling_preserves_inertia(a in arb_matrix(), seed in any::<u64>()) {
        let mut s = anderson_core::rng::Stream::new(seed);
        let d: Vec<f64> = (0..a.n()).map(|_| s.uniform(0.2, 3.0)).collect();
        let b = a.scale_sym(&DiagScaling::new(d.clone()).unwrap()).unwrap();
        for (i, j, v) in a.lower_entries() {
            prop_assert!((b.get(i, j) - d[i] * v * d[j]).abs() <= 1e-15 * v.abs().max(1.0));
        }
        let (sa, sb) = (sorted_spectrum(&a), sorted_spectrum(&b));
        prop_assert_eq!(inertia(&sa, 1e-9), inertia(&sb, 1e-9));
    }

    #[test]
    fn matrix_market_round_trip(a in arb_matrix()) {
        let text = format_matrix_market(&a);
        let b = parse_matrix_market(&text).unwrap();
        prop_assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn gershgorin_contains_spectrum(a in arb_matrix()) {
        let rows = a.full_rows();
        let discs: Vec<(f64, f64)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (a.diag(i), r.iter().filter(|e| e.0 != i).map(|e| e.1.abs()).sum::<f64>()))
            .collect();
        for lambda in sorted_spectrum(&a) {
            prop_assert!(discs.iter().any(|&(c, r)| (lambda - c).abs() <= r + 1e-9 * (1.0 + a.norm1())));
        }
    }

    #[test]
    fn matching_scales_to_unit_modulus(a in arb_matrix()) {
        let m = symmetric_matching(&a).unwrap();
        let s = a.scale_sym(&m.scaling).unwrap();
        prop_assert!(s.lower_entries().all(|(_, _, v)| v.abs() <= 1.0 + 1e-8));
        for (j, &i) in m.assignment.sigma.forward().iter().enumerate() {
            prop_assert!((s.get(i, j).abs() - 1.0).abs() <= 1e-8);
        }
        let mut covered: Vec<usize> = m.blocks.iter().flat_map(|b| b.members()).collect();
        covered.sort_unstable();
        prop_assert_eq!(covered, (0..a.n()).collect::<Vec<_>>());
    }

    #[test]
    fn preconditioner_is_linear_and_symmetric(n in 10usize..120, seed in any::<u64>()) {
        let a = random_indefinite(n, seed);
        let params = FactorParams { small_block_cutoff: 8, ..FactorParams::default() };
        let Ok(f) = factorize(&a, &params) else { return Ok(()) };
        let mut s = anderson_core::rng::Stream::new(seed ^ 1);
        let x: Vec<f64> = (0..n).map(|_| s.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| s.uniform(-1.0, 1.0)).collect();
        let (alpha, beta) = (s.uniform(-2.0, 2.0), s.uniform(-2.0, 2.0));
        let mx = f.apply(&x).unwrap();
        let my = f.apply(&y).unwrap();
        let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| alpha * p + beta * q).collect();
        let mc = f.apply(&comb).unwrap();
        let expect: Vec<f64> = mx.iter().zip(&my).map(|(p, q)| alpha * p + beta * q).collect();
        let scale = 1.0 + mx.iter().chain(&my).fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(max_abs_diff(&mc, &expect) <= 1e-10 * scale);
        prop_assert!((dot(&y, &mx) - dot(&x, &my)).abs() <= 1e-10 * scale * n as f64);
    }
}

/// Eigenvalues `2 (cos 2πa/m + cos 2πb/m + cos 2πc/m)` of the clean periodic lattice.
fn circulant_spectrum(m: usize) -> Vec<f64> {
    let c: Vec<f64> = (0..m).map(|a| 2.0 * (2.0 * PI * a as f64 / m as f64).cos()).collect();
    let mut v = Vec::with_capacity(m * m * m);
    for x in &c {
        for y in &c {
            for z in &c {
                v.push(x + y + z);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn clean_periodic_lattice_spectrum() {
    for m in [3, 4, 5] {
        let a = build_anderson(&AndersonConfig::periodic(m, 0.0, 1)).unwrap();
        assert!(max_abs_diff(&sorted_spectrum(&a), &circulant_spectrum(m)) < 1e-10);
    }
    let s = sorted_spectrum(&build_anderson(&AndersonConfig::periodic(3, 0.0, 1)).unwrap());
    let count = |t: f64| s.iter().filter(|v| (*v - t).abs() < 1e-9).count();
    assert_eq!((count(6.0), count(3.0), count(0.0), count(-3.0)), (1, 6, 12, 8));
}

#[test]
fn clean_hard_wall_lattice_spectrum() {
    // open chain of length m: 2 cos(πa/(m+1)), a = 1..m
    let m = 4;
    let cfg = AndersonConfig { boundary: Boundary::HardWall, ..AndersonConfig::periodic(m, 0.0, 1) };
    let c: Vec<f64> = (1..=m).map(|a| 2.0 * (PI * a as f64 / (m + 1) as f64).cos()).collect();
    let mut expect = Vec::new();
    for x in &c {
        for y in &c {
            for z in &c {
                expect.push(x + y + z);
            }
        }
    }
    expect.sort_by(f64::total_cmp);
    assert!(max_abs_diff(&sorted_spectrum(&build_anderson(&cfg).unwrap()), &expect) < 1e-10);
}

#[test]
fn anderson_spectrum_within_disorder_bounds() {
    for seed in 1..=3 {
        let a = build_anderson(&AndersonConfig::periodic(5, 16.5, seed)).unwrap();
        let s = sorted_spectrum(&a);
        assert!(s[0] >= -8.25 - 6.0 && s[s.len() - 1] <= 8.25 + 6.0);
    }
}
