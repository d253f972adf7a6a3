//! Weight profiles against brute-force sums and closed-form inverses.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wait_core::numerics::log_add_exp;
use wait_core::profile::{ProfileTable, MAX_TABLE_LEVELS};
use wait_core::schedules::LevelSchedule;
use wait_core::WaitError;

const X_MAX: f64 = 1650.0;
const ENUM_LEVELS: u64 = 2_000_000;

type Inverse<'a> = (&'a LevelSchedule, Box<dyn Fn(f64) -> (f64, f64)>);

fn table() -> Vec<LevelSchedule> {
    LevelSchedule::table_schedules()
}

/// `ln sum_{b_k <= x} w_k` for ascending `xs`, by one sweep over the levels.
fn brute_force(s: &LevelSchedule, xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut k = s.k_start();
    let mut acc = f64::NEG_INFINITY;
    for &x in xs {
        while s.b(k).unwrap() <= x {
            acc = log_add_exp(acc, s.log_weight(k).unwrap());
            k += 1;
        }
        out.push(acc);
    }
    out
}

#[test]
fn matches_brute_force_where_levels_are_enumerable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in table() {
        let x_hi = s.b(s.k_start() + ENUM_LEVELS - 1).unwrap().min(X_MAX);
        let mut xs: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..x_hi)).collect();
        xs.sort_by(f64::total_cmp);
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        for (x, want) in xs.iter().zip(brute_force(&s, &xs)) {
            let got = p.log_w(*x).unwrap();
            if want == f64::NEG_INFINITY {
                assert_eq!(got, want, "{} x={x}", s.key());
            } else {
                assert!((got - want).abs() <= 1e-9, "{} x={x}: {got} vs {want}", s.key());
            }
        }
    }
}

/// Power law: `b_k <= x` iff `k <= (c e^x)^(1/(1+eps))`.
#[test]
fn power_counts_match_closed_form_inverse() {
    for eps in [0.5, 0.1] {
        let s = LevelSchedule::power(eps).unwrap();
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        let log_n = |x: f64| (x + s.norm_constant().ln()) / (1.0 + eps);
        for x in [5.0, 20.0, 40.0, 60.0, 200.0, 900.0, X_MAX] {
            let u = log_n(x);
            let lw = p.log_w(x).unwrap();
            if u < 36.0 {
                let n = p.counting_n(x).unwrap() as f64;
                let want = u.exp().floor();
                // e^u carries the rounding of u, ~1e-13 relative at u ~ 35.
                assert!((n - want).abs() <= 1.0 + 1e-12 * want, "eps={eps} x={x}");
                assert!((lw - n.ln()).abs() <= 1e-12 * n.ln().max(1.0), "eps={eps} x={x}");
            } else {
                assert!((lw - u).abs() <= 1e-9 * u, "eps={eps} x={x}");
            }
        }
    }
}

/// Log-type schedules: `ln N(x)` is the root `u` of `b(e^u) = x`, found here
/// by Newton iteration on the closed form of `b`.
#[test]
fn log_type_counts_match_newton_inverse() {
    let logcorr = LevelSchedule::log_corrected(2.0, 10).unwrap();
    let itlog = LevelSchedule::iterated_log(16).unwrap();
    let lc = logcorr.norm_constant().ln();
    let ic = itlog.norm_constant().ln();
    let cases: [Inverse; 2] = [
        (&logcorr, Box::new(move |u: f64| (u + 2.0 * u.ln() - lc, 1.0 + 2.0 / u))),
        (
            &itlog,
            Box::new(move |u: f64| {
                let lu = u.ln();
                (u + lu + 2.0 * lu.ln() - ic, 1.0 + 1.0 / u + 2.0 / (u * lu))
            }),
        ),
    ];
    for (s, b_and_slope) in cases {
        let p = ProfileTable::build(s, X_MAX).unwrap();
        for x in [100.0, 400.0, 1000.0, X_MAX] {
            let mut u = x;
            for _ in 0..50 {
                let (b, db) = b_and_slope(u);
                u -= (b - x) / db;
            }
            assert!((p.log_w(x).unwrap() - u).abs() <= 1e-9 * u, "{} x={x}", s.key());
        }
    }
}

#[test]
fn envelope_on_700_points() {
    for s in table() {
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        for i in 0..700 {
            let x = 2.0 + (X_MAX - 2.0) * i as f64 / 699.0;
            assert!(p.envelope_slack(x).unwrap() <= 0.0, "{} x={x}", s.key());
        }
    }
}

#[test]
fn inversion_consistency_of_exponents() {
    let cases = [("power:0.5", 1.5), ("power:0.1", 1.1), ("logcorr:2:10", 1.0), ("itlog:16", 1.0)];
    for (key, c) in cases {
        let s: LevelSchedule = key.parse().unwrap();
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        assert!((p.exponent(X_MAX).unwrap() * c - 1.0).abs() <= 0.03, "{key}");
    }
    let d = ProfileTable::build(&LevelSchedule::dyadic(), X_MAX).unwrap();
    assert!(d.exponent(X_MAX).unwrap() <= 0.01);
}

#[test]
fn exponents_at_1650_near_rho() {
    for s in table() {
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        assert!((p.exponent(X_MAX).unwrap() - s.target_rho()).abs() <= 0.02, "{}", s.key());
    }
}

#[test]
fn table_sizes_and_examples() {
    let d = LevelSchedule::dyadic();
    assert_eq!(ProfileTable::build(&d, 5.0).unwrap().len(), 7);
    let w = LevelSchedule::weighted_dyadic();
    assert_eq!(ProfileTable::build(&w, X_MAX).unwrap().len(), 2380);
    for s in table() {
        let p = ProfileTable::build(&s, s.b(s.k_start()).unwrap()).unwrap();
        assert_eq!(p.len(), 1, "{}", s.key());
    }
    let p = ProfileTable::build(&LevelSchedule::power(0.5).unwrap(), 100.0).unwrap();
    assert!(p.len() <= MAX_TABLE_LEVELS);

    let pd = ProfileTable::build(&d, 10.0).unwrap();
    assert_relative_eq!(pd.log_w(2.1).unwrap(), 3f64.ln());
    assert_eq!(pd.counting_n(5.0).unwrap(), 7);
    assert_eq!(pd.counting_n(0.5).unwrap(), 0);
    assert_eq!(pd.log_w(0.5).unwrap(), f64::NEG_INFINITY);
    assert_eq!(pd.envelope_slack(0.5).unwrap(), f64::NEG_INFINITY);
    assert!(pd.envelope_slack(2f64.ln()).unwrap() < 0.0);
    assert!(matches!(pd.exponent(0.5), Err(WaitError::UndefinedExponent { .. })));
    assert!(matches!(pd.log_w(10.5), Err(WaitError::OutOfRange { .. })));

    let pw = ProfileTable::build(&w, 10.0).unwrap();
    let expected = 6.0 / (PI * PI) * (2.0 + 1.0 + 8.0 / 9.0);
    assert_relative_eq!(pw.log_w(2.1).unwrap().exp(), expected, max_relative = 1e-14);
    assert!(matches!(pw.counting_n(2.1), Err(WaitError::WrongScheduleKind(_))));

    let pp = LevelSchedule::power(0.5).unwrap();
    let t = ProfileTable::build(&pp, 20.0).unwrap();
    assert_eq!(t.counting_n(pp.b(10).unwrap()).unwrap(), 10);
}

#[test]
fn prefix_table_invariants() {
    for s in table() {
        let p = ProfileTable::build(&s, 40.0).unwrap();
        let prefix = p.log_prefix();
        assert!(prefix.windows(2).all(|w| w[1] >= w[0]), "{}", s.key());
        for (j, w) in prefix.windows(2).enumerate().take(5000) {
            let k = s.k_start() + j as u64 + 1;
            // w_k = W_k - W_{k-1}, compared in log space.
            let log_diff = w[1] + (-(w[0] - w[1]).exp()).ln_1p();
            let log_w = s.log_weight(k).unwrap();
            assert!((log_diff - log_w).abs() <= 1e-9 * log_w.abs().max(1.0) + 1e-9, "{} k={k}", s.key());
        }
        for (j, &b) in p.b_values().iter().enumerate() {
            assert!(prefix[j] <= b + 1e-12, "{} envelope at level {j}", s.key());
        }
    }
}

#[test]
fn monotone_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in table() {
        let p = ProfileTable::build(&s, X_MAX).unwrap();
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.random_range(0.0..X_MAX), rng.random_range(0.0..X_MAX));
            let (lo, hi) = (a.min(b), a.max(b));
            assert!(p.log_w(lo).unwrap() <= p.log_w(hi).unwrap(), "{} {lo} {hi}", s.key());
        }
    }
}

proptest! {
    #[test]
    fn monotone_in_x(idx in 0usize..7, a in 0.0..X_MAX, b in 0.0..X_MAX) {
        let s = &table()[idx];
        let p = ProfileTable::build(s, X_MAX).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(p.log_w(lo).unwrap() <= p.log_w(hi).unwrap());
        prop_assert!(p.envelope_slack(hi).unwrap() <= 0.0);
    }

    #[test]
    fn counting_function_brackets_levels(idx in 0usize..4, x in 1.0..60.0f64) {
        let s = &table()[idx];
        let p = ProfileTable::build(s, 60.0).unwrap();
        let n = match p.counting_n(x) {
            Ok(n) => n,
            Err(WaitError::CountNotRepresentable { .. }) => {
                prop_assert!(p.log_w(x).unwrap() > 52.0 * 2f64.ln());
                return Ok(());
            }
            Err(e) => panic!("{e}"),
        };
        if n > 0 {
            prop_assert!(s.b(s.k_start() + n - 1).unwrap() <= x);
        }
        prop_assert!(s.b(s.k_start() + n).unwrap() > x);
    }
}
