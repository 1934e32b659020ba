mod common;

use common::*;
use omac::channel::{ChannelSpec, ConstraintSet};
use omac::classifier::*;
use omac::prob::{Alphabet, Dist};

fn half() -> (Dist, Dist) {
    let b = Alphabet::binary();
    (Dist::single("x1", b.clone(), vec![0.5, 0.5]).unwrap(), Dist::single("x2", b, vec![0.5, 0.5]).unwrap())
}

#[test]
fn xor_cases() {
    let (p1, p2) = half();
    let v = classify_shape(&xor(0.2), &p1, &p2, 0.05, 16, 0).unwrap();
    assert_eq!(v.case, 1);
    assert!(!v.boundary_uncertain);
    // uniform coupling: odd-parity mass 1/2 against the allowed 2p = 0.4
    for m in v.g.search.margins.iter() {
        assert!((m - 0.2).abs() < 1e-6, "{m}");
    }
    assert!(replay(&xor(0.2), &v).unwrap());

    let v = classify_shape(&xor(0.3), &p1, &p2, 0.05, 16, 0).unwrap();
    assert_eq!(v.case, 5);
    assert!(!v.boundary_uncertain);
    assert!((v.g1.margin + 0.2).abs() < 1e-5, "{}", v.g1.margin);
    assert!(replay(&xor(0.3), &v).unwrap());
}

#[test]
fn identity_channel_is_case_three() {
    let (p1, p2) = half();
    let spec = identity_channel();
    let v = classify_shape(&spec, &p1, &p2, 0.05, 16, 0).unwrap();
    assert_eq!(v.case, 3);
    assert!(v.g1.verdict && !v.g2.verdict && !v.g.verdict);
    assert!((v.g1.margin - 1.0).abs() < 1e-6);
    assert!(replay(&spec, &v).unwrap());
}

#[test]
fn tampered_verdict_fails_replay() {
    let (p1, p2) = half();
    let mut v = classify_shape(&xor(0.2), &p1, &p2, 0.05, 8, 0).unwrap();
    v.g1.margin += 1e-9;
    assert!(!replay(&xor(0.2), &v).unwrap());
}

#[test]
fn unconstrained_jammer_is_case_five() {
    let b = Alphabet::binary();
    let spec = ChannelSpec::from_fn(b.clone(), b.clone(), b.clone(), b.clone(), |a, c, s| a ^ c ^ s, ConstraintSet::full(), ConstraintSet::full(), ConstraintSet::full())
        .unwrap();
    let (p1, p2) = half();
    assert_eq!(classify_shape(&spec, &p1, &p2, 0.05, 8, 0).unwrap().case, 5);
    assert_eq!(classify_shape(&xor(1.0), &p1, &p2, 0.05, 8, 0).unwrap().case, 5);
}

#[test]
fn monotone_in_jammer_strength() {
    let (p1, p2) = half();
    let mut last = 0;
    for i in 0..=10 {
        let p = 0.05 * i as f64;
        let v = classify_shape(&xor(p), &p1, &p2, 0.05, 8, 0).unwrap();
        assert!(v.case >= last, "p = {p}: case {} after {last}", v.case);
        last = v.case;
    }
}

#[test]
fn scan_over_inputs() {
    let s = classify_over_inputs(&xor(0.2), 0.25, 0.05, 8, 0).unwrap();
    assert_eq!(s.best_cases, vec![1]);
    assert!(s.best.iter().any(|&i| s.table[i].p1.probs() == [0.5, 0.5] && s.table[i].p2.probs() == [0.5, 0.5]));

    let s = classify_over_inputs(&xor(0.3), 0.25, 0.05, 8, 0).unwrap();
    assert_eq!(s.best_cases, vec![5]);
    assert!(s.table.iter().all(|v| v.case == 5));
}

#[test]
fn table_one_implication_on_random_channels() {
    let mut r = rng(17);
    for _ in 0..10 {
        let spec = random_channel(&mut r);
        let p1 = Dist::new(vec![spec.x1_axis("x1")], random_simplex(&mut r, spec.x1.size())).unwrap();
        let p2 = Dist::new(vec![spec.x2_axis("x2")], random_simplex(&mut r, spec.x2.size())).unwrap();
        let v = classify_shape(&spec, &p1, &p2, 0.1, 6, 1).unwrap();
        if v.g.verdict {
            assert!(v.g1.verdict && v.g2.verdict);
        }
        assert!(replay(&spec, &v).unwrap());
    }
}
