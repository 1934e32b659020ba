mod common;

use common::{rng, word, xor};
use omac::achieve::{
    achieve, constant_composition_filter, empirical_rate, expurgate, inner_bound, kl_projection, majority_type,
    sample_timeshared_code, sanov_exponent, sanov_monte_carlo, InnerCase, TimeSharingPlan,
};
use omac::channel::CodePair;
use omac::confusability::{confusable_dist, verify_zero_error};
use omac::prob::{joint_type, nu_poly, Alphabet, Dist, Kind};
use omac::Error;
use proptest::prelude::*;
use rand::Rng;

fn bern(name: &str, q: f64) -> Dist {
    Dist::single(name, Alphabet::binary(), vec![1.0 - q, q]).unwrap()
}

fn d_bin(a: f64, b: f64) -> f64 {
    let t = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).log2() };
    t(a, b) + t(1.0 - a, 1.0 - b)
}

/// For the XOR channel the marg1 set is `{Q : Q(x1_1 != x1_2) <= 2p}`.
/// Its KL minimum reduces to couplings `[[1-q-t, t], [t, q-t]]` of
/// `Bern(q)` with itself, `t <= p`; scanned on a grid of step `1/steps`.
fn xor_marg1_oracle(p: f64, q: f64, steps: usize) -> f64 {
    let r = [[(1.0 - q) * (1.0 - q), (1.0 - q) * q], [q * (1.0 - q), q * q]];
    let hi = q.min(1.0 - q).min(p);
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        let t = hi * i as f64 / steps as f64;
        let c = [[1.0 - q - t, t], [t, q - t]];
        let mut kl = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                if c[a][b] > 0.0 {
                    kl += c[a][b] * (c[a][b] / r[a][b]).log2();
                }
            }
        }
        best = best.min(kl);
    }
    best
}

#[test]
fn marg1_exponent_matches_grid_oracle() {
    let spec = xor(0.15);
    let u = bern("x1", 0.5);
    let v = bern("x2", 0.5);
    let fw = sanov_exponent(&spec, &u, &v, Kind::Marg1).unwrap();
    let oracle = xor_marg1_oracle(0.15, 0.5, 512);
    assert!((fw - oracle).abs() < 1e-3, "fw {fw} oracle {oracle}");
    assert!((fw - d_bin(0.3, 0.5)).abs() < 1e-3);
    assert!((d_bin(0.3, 0.5) - 0.1187).abs() < 1e-4);
}

#[test]
fn frank_wolfe_not_below_oracle_on_binary_instances() {
    for p in [0.05, 0.1, 0.15, 0.2] {
        for q in [0.3, 0.5, 0.7] {
            let spec = xor(p);
            let r = kl_projection(&spec, &bern("x1", q), &bern("x2", 0.4), Kind::Marg1).unwrap();
            let fw = r.value.unwrap();
            let oracle = xor_marg1_oracle(p, q, 4096);
            assert!(fw >= oracle - 1e-3, "p {p} q {q}: fw {fw} oracle {oracle}");
            assert!(fw <= oracle + 1e-3, "p {p} q {q}: fw {fw} oracle {oracle}");
            assert!(r.gap <= 1e-4);
            let opt = r.optimizer.unwrap();
            assert!(confusable_dist(&spec, &opt, Kind::Marg1).unwrap().feasible);
        }
    }
}

#[test]
fn exponent_nonincreasing_in_p() {
    let mut prev = f64::INFINITY;
    for i in 1..=12 {
        let p = 0.025 * i as f64;
        let v = sanov_exponent(&xor(p), &bern("x1", 0.5), &bern("x2", 0.5), Kind::Marg1).unwrap();
        assert!(v <= prev + 1e-4, "p {p}: {v} > {prev}");
        prev = v;
    }
    assert_eq!(prev, 0.0);
}

#[test]
fn xor_inner_bound_collapses_at_uniform_inputs() {
    let spec = xor(0.15);
    let r = inner_bound(&spec, &bern("x1", 0.5), &bern("x2", 0.5)).unwrap();
    assert_eq!(r.case, InnerCase::Both);
    let (d, dh) = (r.d.unwrap(), r.d_hat.unwrap());
    // odd-parity mass of four uniform bits is 1/2; the set caps it at 2p
    assert!((d - d_bin(0.3, 0.5)).abs() < 1e-3, "{d}");
    assert!((dh - d_bin(0.3, 0.5)).abs() < 1e-3, "{dh}");
    assert_eq!(r.d_ge_d_hat, Some(true));
    assert!(r.contains(0.0, 0.0));
    assert!(!r.contains(0.01, 0.01));
    for (o, kind) in r.optimizers.iter().zip([Kind::Joint, Kind::Marg1, Kind::Marg2]) {
        assert_eq!(o.kind, kind);
        assert!(confusable_dist(&spec, o.optimizer.as_ref().unwrap(), kind).unwrap().feasible);
    }
}

#[test]
fn inner_bound_rejects_confusable_product() {
    let spec = xor(0.3);
    let err = inner_bound(&spec, &bern("x1", 0.5), &bern("x2", 0.5)).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    assert_eq!(sanov_exponent(&spec, &bern("x1", 0.5), &bern("x2", 0.5), Kind::Marg1).unwrap(), 0.0);
}

#[test]
fn inner_bound_d_dominates_d_hat() {
    for p in [0.05, 0.1, 0.15, 0.2] {
        for (q1, q2) in [(0.5, 0.5), (0.4, 0.6), (0.3, 0.5)] {
            let r = inner_bound(&xor(p), &bern("x1", q1), &bern("x2", q2)).unwrap();
            assert_eq!(r.d_ge_d_hat, Some(true), "p {p} q ({q1},{q2}): {:?} {:?}", r.d, r.d_hat);
        }
    }
}

#[test]
fn sanov_slope_tracks_exponent() {
    // the polynomial prefactor cancels in the slope between two blocklengths
    let spec = xor(0.2);
    let (u, v) = (bern("x1", 0.5), bern("x2", 0.5));
    let e = sanov_exponent(&spec, &u, &v, Kind::Marg1).unwrap();
    let a = sanov_monte_carlo(&spec, &u, &v, Kind::Marg1, 100, 20_000, 3).unwrap();
    let b = sanov_monte_carlo(&spec, &u, &v, Kind::Marg1, 200, 100_000, 4).unwrap();
    assert!(b.frequency >= 1e-4);
    let slope = (a.frequency.log2() - b.frequency.log2()) / 100.0;
    assert!((slope - e).abs() <= 0.25 * e, "slope {slope} exponent {e}");
}

#[test]
fn sampling_is_deterministic() {
    let plan = TimeSharingPlan::new(
        vec![0.5, 0.5],
        vec![(bern("x1", 0.2), bern("x2", 0.5)), (bern("x1", 0.7), bern("x2", 0.1))],
    )
    .unwrap();
    let a = sample_timeshared_code(&plan, 40, 7, 5, 11).unwrap();
    let b = sample_timeshared_code(&plan, 40, 7, 5, 11).unwrap();
    let c = sample_timeshared_code(&plan, 40, 7, 5, 12).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_ne!(a, c);
    // a larger request extends, never reshuffles, the earlier codewords
    let d = sample_timeshared_code(&plan, 40, 9, 5, 11).unwrap();
    assert_eq!(&d.book1[..7], &a.book1[..]);
}

#[test]
fn forced_composition() {
    let plan = TimeSharingPlan::new(
        vec![0.5, 0.5],
        vec![(bern("x1", 0.0), bern("x2", 0.5)), (bern("x1", 1.0), bern("x2", 0.5))],
    )
    .unwrap();
    let code = sample_timeshared_code(&plan, 12, 20, 3, 0).unwrap();
    for w in &code.book1 {
        assert_eq!(w.iter().sum::<usize>(), 6);
    }
    let f = constant_composition_filter(&code.book1, &bern("x", 0.5), 0.0).unwrap();
    assert_eq!(f.kept.len(), 20);
}

#[test]
fn plan_rejects_empty_chunk() {
    let plan = TimeSharingPlan::new(vec![0.99, 0.01], vec![(bern("x1", 0.1), bern("x2", 0.1)); 2]).unwrap();
    assert!(plan.chunk_sizes(10).is_err());
    assert_eq!(plan.chunk_sizes(100).unwrap(), vec![99, 1]);
}

#[test]
fn joint_type_concentrates_on_mixture() {
    let plan = TimeSharingPlan::new(
        vec![0.3, 0.7],
        vec![(bern("x1", 0.2), bern("x2", 0.6)), (bern("x1", 0.5), bern("x2", 0.1))],
    )
    .unwrap();
    let target: Vec<f64> = {
        let mut t = vec![0.0; 16];
        for (w, (a, b)) in plan.weights.iter().zip(&plan.factors) {
            for (i, ti) in t.iter_mut().enumerate() {
                let (x0, x1, x2, x3) = (i >> 3 & 1, i >> 2 & 1, i >> 1 & 1, i & 1);
                *ti += w * a.probs()[x0] * a.probs()[x1] * b.probs()[x2] * b.probs()[x3];
            }
        }
        t
    };
    let b = Alphabet::binary();
    let mut failures = 0;
    for seed in 0..100 {
        let c = sample_timeshared_code(&plan, 2000, 2, 2, seed).unwrap();
        let words: Vec<&[usize]> = vec![&c.book1[0], &c.book1[1], &c.book2[0], &c.book2[1]];
        let t = joint_type(&words, &[&b, &b, &b, &b], Kind::Joint.axis_names()).unwrap().to_dist();
        let d = t.probs().iter().zip(&target).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if d > 0.05 {
            failures += 1;
        }
    }
    assert!(failures < 1, "{failures} of 100");
}

#[test]
fn filter_keeps_equal_type_book() {
    let book: Vec<Vec<usize>> = ["0011", "0101", "1100", "1010"].iter().map(|s| word(s)).collect();
    let f = constant_composition_filter(&book, &bern("x", 0.5), 0.0).unwrap();
    assert_eq!(f.book, book);
    assert_eq!(f.fraction, 1.0);
    let g = constant_composition_filter(&book, &bern("x", 0.25), 0.0).unwrap();
    assert!(g.kept.is_empty());
    let h = constant_composition_filter(&book, &bern("x", 0.25), 0.25).unwrap();
    assert_eq!(h.kept.len(), 4);
}

#[test]
fn filter_fraction_tracks_type_class_probability() {
    let (n, m) = (100usize, 400usize);
    let plan = TimeSharingPlan::product(bern("x1", 0.5), bern("x2", 0.5)).unwrap();
    let mut total = 0.0;
    for seed in 0..50 {
        let c = sample_timeshared_code(&plan, n, m, 1, seed).unwrap();
        total += constant_composition_filter(&c.book1, &bern("x", 0.5), 0.0).unwrap().fraction;
    }
    let frac = total / 50.0;
    // Stirling: P(type class) ~ sqrt(2 pi n) / nu
    let nu = nu_poly(&bern("x", 0.5), n as u64).unwrap();
    let predicted = (2.0 * std::f64::consts::PI * n as f64).sqrt() / nu;
    assert!(frac > predicted / 2.0 && frac < predicted * 2.0, "{frac} vs {predicted}");
}

#[test]
fn expurgation_fixed_point() {
    let spec = xor(0.15);
    let code = CodePair::new(vec![word("00000000"), word("11111111")], vec![word("00000000")]).unwrap();
    let r = expurgate(&spec, &code).unwrap();
    assert_eq!(r.code, code);
    assert!(r.removed1.is_empty() && r.removed2.is_empty());
}

#[test]
fn expurgation_single_marg1_pair() {
    // weight budget floor(0.15 * 8) = 1 per state sequence, so two
    // disagreements can be absorbed and six cannot
    let spec = xor(0.15);
    let code = CodePair::new(
        vec![word("00000000"), word("11000000"), word("11111111")],
        vec![word("00000000")],
    )
    .unwrap();
    assert!(!verify_zero_error(&spec, &code).unwrap().zero_error);
    let r = expurgate(&spec, &code).unwrap();
    assert_eq!(r.removed1, vec![1]);
    assert!(r.removed2.is_empty());
    assert_eq!(r.kept1, vec![0, 2]);
    assert!(verify_zero_error(&spec, &r.code).unwrap().zero_error);
}

#[test]
fn expurgation_joint_violation_hits_both_books() {
    // marginally far apart, but x1 + x2 sums collide
    let spec = xor(0.15);
    let code = CodePair::new(
        vec![word("00000000"), word("11110000")],
        vec![word("00001111"), word("11111111")],
    )
    .unwrap();
    let v = verify_zero_error(&spec, &code).unwrap().violation.unwrap();
    assert_eq!(v.kind, Kind::Joint);
    let r = expurgate(&spec, &code).unwrap();
    assert_eq!((r.removed1.len(), r.removed2.len()), (1, 1));
    assert!(verify_zero_error(&spec, &r.code).unwrap().zero_error);
}

#[test]
fn rates() {
    let b = Alphabet::binary();
    let single = CodePair::new(vec![word("0101")], vec![word("1100")]).unwrap();
    assert_eq!(empirical_rate(&single, &b, &b), (0.0, 0.0));
    let all: Vec<Vec<usize>> = (0..16).map(|i| (0..4).map(|j| (i >> j) & 1).collect()).collect();
    let full = CodePair::new(all.clone(), all).unwrap();
    let (r1, r2) = empirical_rate(&full, &b, &b);
    assert!((r1 - 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
}

#[test]
fn end_to_end_xor() {
    let spec = xor(0.15);
    let plan = TimeSharingPlan::product(bern("x1", 0.5), bern("x2", 0.5)).unwrap();
    for seed in 0..3 {
        let run = achieve(&spec, &plan, 64, 0.02, 0.02, seed).unwrap();
        assert_eq!(run.target, (3, 3));
        assert!(run.zero_error);
        let c = &run.expurgated.code;
        assert!(verify_zero_error(&spec, c).unwrap().zero_error);
        for w in c.book1.iter().chain(&c.book2) {
            assert_eq!(w.iter().sum::<usize>(), 32);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expurgation_always_zero_error(seed in any::<u64>(), p in 0.0f64..0.5, m1 in 1usize..5, m2 in 1usize..5) {
        let mut r = rng(seed);
        let spec = xor(p);
        let mut draw = |m: usize| {
            let mut b: Vec<Vec<usize>> = Vec::new();
            while b.len() < m {
                let w: Vec<usize> = (0..6).map(|_| r.random_range(0..2)).collect();
                if !b.contains(&w) {
                    b.push(w);
                }
            }
            b
        };
        let code = CodePair::new(draw(m1), draw(m2)).unwrap();
        let out = expurgate(&spec, &code).unwrap();
        prop_assert!(verify_zero_error(&spec, &out.code).unwrap().zero_error);
        prop_assert_eq!(out.code.m1() + out.removed1.len(), m1);
        prop_assert_eq!(out.code.m2() + out.removed2.len(), m2);
    }

    #[test]
    fn majority_type_meets_pigeonhole(seed in any::<u64>(), n in 1usize..30, m in 1usize..80, k in 2usize..4) {
        let mut r = rng(seed);
        let book: Vec<Vec<usize>> = (0..m).map(|_| (0..n).map(|_| r.random_range(0..k)).collect()).collect();
        let t = majority_type(&book, k).unwrap();
        prop_assert!(t.members.len() as f64 >= t.bound - 1e-12);
    }

    #[test]
    fn chunk_sizes_partition(w in proptest::collection::vec(0.01f64..1.0, 1..6), extra in 0usize..200) {
        let s: f64 = w.iter().sum();
        let weights: Vec<f64> = w.iter().map(|x| x / s).collect();
        let n = weights.len() * 100 + extra;
        let plan = TimeSharingPlan::new(weights.clone(), vec![(bern("x1", 0.5), bern("x2", 0.5)); weights.len()]);
        // renormalized floats may miss 1 by an ulp or two
        if let Ok(plan) = plan {
            let sizes = plan.chunk_sizes(n).unwrap();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            for (sz, wt) in sizes.iter().zip(&weights) {
                prop_assert!((*sz as f64 - wt * n as f64).abs() < 1.0);
            }
        }
    }
}
