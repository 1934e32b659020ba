mod common;

use common::{rng, word, xor};
use omac::channel::CodePair;
use omac::confusability::verify_zero_error;
use omac::converse::{
    brute_force_search, double_count, double_count_audited, extract_equicoupled_pair, extract_equicoupled_single,
    komlos_adversarial_search, komlos_bound, komlos_check, plotkin_xor_bound, quartic, quartic_max_check, size_bound,
    ExtractMode, SearchOutcome,
};
use omac::good::{cogood_certificate, is_cogood};
use omac::prob::{Alphabet, Axis, Dist, Kind, Tensor};
use omac::Error;
use proptest::prelude::*;
use rand::Rng;

fn b() -> Alphabet {
    Alphabet::binary()
}

fn joint_axes() -> Vec<Axis> {
    ["x1_1", "x1_2", "x2_1", "x2_2"].iter().map(|n| Axis::new(*n, b())).collect()
}

fn iid_book(r: &mut impl Rng, m: usize, n: usize, q: f64) -> Vec<Vec<usize>> {
    (0..m).map(|_| (0..n).map(|_| usize::from(r.random::<f64>() < q)).collect()).collect()
}

#[test]
fn plotkin_exact_values() {
    let a = plotkin_xor_bound(0.3).unwrap();
    assert_eq!(a.exact, "6");
    assert_eq!(a.eps, "1/20");
    assert_eq!(a.bound, 6.0);
    assert_eq!(plotkin_xor_bound(0.5).unwrap().exact, "2");
    assert_eq!(plotkin_xor_bound(0.35).unwrap().exact, "7/2");
    assert!(matches!(plotkin_xor_bound(0.1), Err(Error::InvalidArgument(_))));
}

#[test]
fn quartic_matches_parity_closed_form() {
    // four independent bits with means a, b, a, b have odd parity with
    // probability (1 - (1-2a)^2 (1-2b)^2) / 2
    for i in 0..=20 {
        for j in 0..=20 {
            let (a, c) = (i as f64 / 20.0, j as f64 / 20.0);
            let closed = 0.5 * (1.0 - (1.0 - 2.0 * a).powi(2) * (1.0 - 2.0 * c).powi(2));
            assert!((quartic(a, c) - closed).abs() < 1e-12);
            assert!((quartic(a, c) - quartic(1.0 - a, 1.0 - c)).abs() < 1e-12);
        }
    }
    for (a, c) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        assert_eq!(quartic(a, c), 0.0);
    }
}

#[test]
fn quartic_maximum() {
    let r = quartic_max_check(1e-3).unwrap();
    assert!((r.max - 0.5).abs() < 1e-9);
    assert!(r.distance_to_maximizers(0.25, 0.5) < 1e-3);
    assert!((quartic(r.argmax.0, r.argmax.1) - 0.5).abs() < 1e-9);
    // the maximizers form the cross a = 1/2 or b = 1/2
    for &(a, c) in &r.maximizers {
        assert!((a - 0.5).abs() < 1e-9 || (c - 0.5).abs() < 1e-9);
    }
    assert_eq!(r.maximizers.len(), 2 * 1001 - 1);
}

#[test]
fn brute_force_xor_examples() {
    let none = brute_force_search(&xor(0.3), 4, 3, 3, 10_000_000).unwrap();
    assert_eq!(none.outcome, SearchOutcome::ExhaustivelyNone);
    let found = brute_force_search(&xor(0.0), 2, 2, 1, 1000).unwrap();
    let SearchOutcome::Found { code } = found.outcome else { panic!("expected a code") };
    assert!(verify_zero_error(&xor(0.0), &code).unwrap().zero_error);
    assert_eq!((code.m1(), code.m2()), (2, 1));
    let one = brute_force_search(&xor(0.3), 4, 1, 1, 10).unwrap();
    assert!(matches!(one.outcome, SearchOutcome::Found { .. }));
    assert_eq!(one.nodes, 1);
}

#[test]
fn brute_force_none_is_monotone() {
    let spec = xor(0.3);
    for (m1, m2) in [(3, 3), (3, 4), (4, 3), (2, 4)] {
        let r = brute_force_search(&spec, 4, m1, m2, 10_000_000).unwrap();
        assert_eq!(r.outcome, SearchOutcome::ExhaustivelyNone, "({m1},{m2})");
    }
    // M1 M2 = 6 is not ruled out by the bound at this blocklength
    let r = brute_force_search(&spec, 4, 2, 2, 10_000_000).unwrap();
    assert!(!matches!(r.outcome, SearchOutcome::Inconclusive));
}

#[test]
fn brute_force_budget_is_flagged() {
    let r = brute_force_search(&xor(0.3), 4, 3, 3, 5).unwrap();
    assert_eq!(r.outcome, SearchOutcome::Inconclusive);
}

/// Plain enumeration of every code pair, without canonicalization or pruning.
fn naive_exists(spec: &omac::channel::ChannelSpec, n: usize, m1: usize, m2: usize) -> bool {
    let words: Vec<Vec<usize>> = (0..1usize << n).map(|i| (0..n).map(|j| (i >> (n - 1 - j)) & 1).collect()).collect();
    let sets = |m: usize| -> Vec<Vec<usize>> {
        (0u32..1 << (1 << n)).filter(|s| s.count_ones() as usize == m).map(|s| (0..1 << n).filter(|i| s >> i & 1 == 1).collect()).collect()
    };
    for s1 in sets(m1) {
        for s2 in sets(m2) {
            let c = CodePair::new(s1.iter().map(|&i| words[i].clone()).collect(), s2.iter().map(|&i| words[i].clone()).collect())
                .unwrap();
            if verify_zero_error(spec, &c).unwrap().zero_error {
                return true;
            }
        }
    }
    false
}

#[test]
fn brute_force_agrees_with_naive_enumeration() {
    for p in [0.0, 0.2, 0.34, 0.5] {
        let spec = xor(p);
        for (m1, m2) in [(1, 2), (2, 1), (2, 2), (3, 1), (2, 3)] {
            let fast = brute_force_search(&spec, 3, m1, m2, u64::MAX).unwrap();
            let found = matches!(fast.outcome, SearchOutcome::Found { .. });
            assert_eq!(found, naive_exists(&spec, 3, m1, m2), "p {p} ({m1},{m2})");
        }
    }
}

#[test]
fn extraction_trivial_two_by_two() {
    let c = CodePair::new(vec![word("0011"), word("0101")], vec![word("1111"), word("0000")]).unwrap();
    for mode in [ExtractMode::Exact, ExtractMode::Greedy] {
        let r = extract_equicoupled_pair(&c, &b(), &b(), 0.1, mode).unwrap();
        assert_eq!((r.book1.clone(), r.book2.clone()), (vec![0, 1], vec![0, 1]));
        assert!(r.eta_achieved <= 0.1);
    }
    assert!(extract_equicoupled_pair(&c, &b(), &b(), 0.0, ExtractMode::Greedy).is_err());
    let s = extract_equicoupled_single(&c.book1, &c.book2[0], &b(), &b(), Kind::Marg1, 0.1, ExtractMode::Exact).unwrap();
    assert_eq!(s.book1, vec![0, 1]);
}

#[test]
fn extraction_iid_code_is_nearly_full() {
    // uniform inputs put every cell of the product on a lattice point of the
    // net (m = 32 for both etas below), so concentrated types share a color
    let mut r = rng(5);
    let c = CodePair::from_draws(iid_book(&mut r, 8, 8000, 0.5), iid_book(&mut r, 8, 8000, 0.5)).unwrap();
    for mode in [ExtractMode::Exact, ExtractMode::Greedy] {
        let e = extract_equicoupled_pair(&c, &b(), &b(), 0.03, mode).unwrap();
        assert!(e.book1.len() >= 7 && e.book2.len() >= 7, "{mode:?}: {:?} {:?}", e.book1, e.book2);
        assert!(e.eta_achieved <= 0.03);
        let s = extract_equicoupled_single(&c.book1, &c.book2[0], &b(), &b(), Kind::Marg1, 0.0275, mode).unwrap();
        assert!(s.book1.len() >= 7, "{mode:?}: {:?}", s.book1);
        let s2 = extract_equicoupled_single(&c.book2, &c.book1[0], &b(), &b(), Kind::Marg2, 0.0275, mode).unwrap();
        assert!(s2.book1.len() >= 7, "{mode:?}: {:?}", s2.book1);
    }
}

#[test]
fn extraction_planted_clusters() {
    // book 1: half near all-zeros, half near all-ones
    let mut r = rng(9);
    let n = 200;
    let mut book1 = Vec::new();
    for c in 0..2 {
        for _ in 0..4 {
            book1.push((0..n).map(|_| usize::from(r.random::<f64>() < if c == 0 { 0.05 } else { 0.95 })).collect());
        }
    }
    let book2 = iid_book(&mut r, 4, n, 0.5);
    let code = CodePair::from_draws(book1.clone(), book2).unwrap();
    let e = extract_equicoupled_pair(&code, &b(), &b(), 0.1, ExtractMode::Exact).unwrap();
    let cluster = |i: usize| i / 4;
    assert!(e.book1.iter().all(|&i| cluster(i) == cluster(e.book1[0])), "{:?}", e.book1);
    assert!(e.book1.len() >= 3);
    let s = extract_equicoupled_single(&book1, &code.book2[0], &b(), &b(), Kind::Marg1, 0.1, ExtractMode::Exact).unwrap();
    assert!(s.book1.iter().all(|&i| cluster(i) == cluster(s.book1[0])), "{:?}", s.book1);
}

#[test]
fn komlos_on_exchangeable_vectors() {
    let mut r = rng(2);
    let v = iid_book(&mut r, 20, 400, 0.4);
    let refd = Dist::new(
        vec![Axis::new("w1", b()), Axis::new("w2", b())],
        vec![0.36, 0.24, 0.24, 0.16],
    )
    .unwrap();
    let rep = komlos_check(&v, &refd, 0.1).unwrap();
    assert!(rep.holds);
    assert!(rep.asymmetry < 1e-12 && rep.bound > 1.0);
    assert!(komlos_check(&v[..1], &refd, 0.1).is_err());
    // a reference far from the pairwise types fails the precondition
    let far = Dist::new(vec![Axis::new("w1", b()), Axis::new("w2", b())], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
    assert!(matches!(komlos_check(&v, &far, 0.1), Err(Error::Precondition(_))));
}

#[test]
fn komlos_adversarial_finds_no_counterexample() {
    for (m, n) in [(2, 16), (5, 20), (10, 24), (20, 24), (50, 32)] {
        let s = komlos_adversarial_search(m, n, 4, 150, 17).unwrap();
        assert!(s.best_margin < 0.0, "m {m}: margin {}", s.best_margin);
    }
}

#[test]
fn double_count_identity_and_sign() {
    let sign = Tensor::new(
        joint_axes(),
        (0..16).map(|i| if (i >> 3 & 1) == (i >> 2 & 1) { 1.0 / 16.0 } else { -1.0 / 16.0 }).collect(),
    )
    .unwrap();
    let anti = Dist::new(joint_axes(), (0..16).map(|i| if (i >> 3 & 1) != (i >> 2 & 1) { 1.0 / 8.0 } else { 0.0 }).collect()).unwrap();
    let cert = cogood_certificate(&anti, Kind::Joint, 0.05).unwrap().expect("certificate");
    let mut r = rng(4);
    for q in [sign, cert.q] {
        let audit = is_cogood(&q, Kind::Joint, 0.02).unwrap();
        assert!(audit.cogood);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (m1, m2, n) = (r.random_range(1..7), r.random_range(1..7), r.random_range(1..12));
            let c = CodePair::from_draws(iid_book(&mut r, m1, n, 0.5), iid_book(&mut r, m2, n, 0.3)).unwrap();
            let d = double_count_audited(&c, &q, &audit, &anti, 0.01, 0.0).unwrap();
            worst = worst.max(d.deviation);
            assert!(d.lower_bound_holds, "{}", d.direct);
            assert!(d.direct >= -1e-9);
        }
        assert!(worst < 1e-10, "{worst}");
    }
}

#[test]
fn double_count_rejects_non_cogood() {
    let neg = Tensor::new(joint_axes(), vec![-1.0 / 16.0; 16]).unwrap();
    let c = CodePair::new(vec![word("01")], vec![word("10")]).unwrap();
    let u = Dist::uniform(joint_axes()).unwrap();
    assert!(matches!(double_count(&c, &neg, &u, 0.01, 0.0), Err(Error::Precondition(_))));
}

#[test]
fn size_bound_formula() {
    assert!((size_bound(1.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-12);
    assert!(size_bound(0.0).is_none());
    // the bound is the positive root of -delta M^2 + 2M + 1
    for d in [0.1, 0.5, 2.0] {
        let m = size_bound(d).unwrap();
        assert!((-d * m * m + 2.0 * m + 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn komlos_holds_at_centroid(seed in any::<u64>(), m in 2usize..12, n in 1usize..30) {
        let mut r = rng(seed);
        let v: Vec<Vec<usize>> = (0..m).map(|_| (0..n).map(|_| r.random_range(0..2)).collect()).collect();
        let mut avg = [0.0; 4];
        let mut count = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..n {
                    avg[v[i][k] * 2 + v[j][k]] += 1.0 / n as f64;
                }
                count += 1.0;
            }
        }
        let avg: Vec<f64> = avg.iter().map(|x| x / count).collect();
        let mut eta: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let mut t = [0.0; 4];
                for k in 0..n {
                    t[v[i][k] * 2 + v[j][k]] += 1.0 / n as f64;
                }
                eta = eta.max(t.iter().zip(&avg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
        }
        let refd = Dist::from_weights(vec![Axis::new("w1", b()), Axis::new("w2", b())], avg).unwrap();
        let rep = komlos_check(&v, &refd, eta + 1e-12).unwrap();
        prop_assert!(rep.holds);
        prop_assert!(rep.bound >= komlos_bound(m, 0.0));
    }

    #[test]
    fn extraction_postcondition(seed in any::<u64>(), m1 in 2usize..7, m2 in 2usize..7, n in 4usize..40, eta in 0.05f64..0.5) {
        let mut r = rng(seed);
        let c = CodePair::from_draws(iid_book(&mut r, m1, n, 0.5), iid_book(&mut r, m2, n, 0.5)).unwrap();
        for mode in [ExtractMode::Exact, ExtractMode::Greedy] {
            let e = extract_equicoupled_pair(&c, &b(), &b(), eta, mode).unwrap();
            prop_assert!(e.eta_achieved <= eta + 1e-12);
            prop_assert!(e.book1.len() >= 2 && e.book2.len() >= 2);
        }
        let exact = extract_equicoupled_pair(&c, &b(), &b(), eta, ExtractMode::Exact).unwrap();
        let greedy = extract_equicoupled_pair(&c, &b(), &b(), eta, ExtractMode::Greedy).unwrap();
        prop_assert!(exact.book1.len().min(exact.book2.len()) >= greedy.book1.len().min(greedy.book2.len()));
    }
}
