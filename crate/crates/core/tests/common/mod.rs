#![allow(dead_code)]

use omac::channel::{builtin_xor_mac, ChannelSpec, ConstraintSet, LinearConstraint, Sense};
use omac::confusability::kind_axes;
use omac::prob::{Alphabet, Dist, Kind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn word(s: &str) -> Vec<usize> {
    Alphabet::binary().parse_word(s).unwrap()
}

pub fn xor(p: f64) -> ChannelSpec {
    builtin_xor_mac(p).unwrap()
}

pub fn weight_constraint(p: f64) -> ConstraintSet {
    ConstraintSet { rows: vec![LinearConstraint::new(vec![0.0, 1.0], Sense::Le, p).unwrap()] }
}

/// Five binary channels with `|S| = |Y| = 2` and a weight-form state constraint.
pub fn binary_family() -> Vec<(&'static str, ChannelSpec)> {
    let b = Alphabet::binary();
    let mk = |f: fn(usize, usize, usize) -> usize, p: f64| {
        ChannelSpec::from_fn(b.clone(), b.clone(), b.clone(), b.clone(), f, ConstraintSet::full(), ConstraintSet::full(), weight_constraint(p)).unwrap()
    };
    vec![
        ("xor", mk(|a, c, s| a ^ c ^ s, 0.3)),
        ("and-xor", mk(|a, c, s| (a & c) ^ s, 0.25)),
        ("or", mk(|a, c, s| a | c | s, 0.4)),
        ("gated", mk(|a, c, s| a ^ (c & s), 0.2)),
        ("majority", mk(|a, c, s| ((a + c + s) >= 2) as usize, 0.35)),
    ]
}

/// `y = x1`: user 2 and the jammer have no influence on the output.
pub fn identity_channel() -> ChannelSpec {
    let b = Alphabet::binary();
    ChannelSpec::from_fn(b.clone(), b.clone(), b.clone(), b.clone(), |a, _, _| a, ConstraintSet::full(), ConstraintSet::full(), ConstraintSet::full()).unwrap()
}

/// Random channel on small alphabets with a random weight constraint on one state symbol.
pub fn random_channel(r: &mut ChaCha8Rng) -> ChannelSpec {
    let k1 = r.random_range(2..=3);
    let k2 = r.random_range(2..=3);
    let ks = r.random_range(2..=3);
    let ky = r.random_range(2..=3);
    let table: Vec<usize> = (0..k1 * k2 * ks).map(|_| r.random_range(0..ky)).collect();
    let p = r.random_range(0.05..0.6);
    let mut coeffs = vec![0.0; ks];
    coeffs[ks - 1] = 1.0;
    let lambda = ConstraintSet { rows: vec![LinearConstraint::new(coeffs, Sense::Le, p).unwrap()] };
    ChannelSpec::from_fn(
        Alphabet::indexed(k1),
        Alphabet::indexed(k2),
        Alphabet::indexed(ks),
        Alphabet::indexed(ky),
        move |a, b, c| table[(a * k2 + b) * ks + c],
        ConstraintSet::full(),
        ConstraintSet::full(),
        lambda,
    )
    .unwrap()
}

pub fn random_simplex(r: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| -(r.random::<f64>().max(1e-300)).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Stationary law of a row-stochastic matrix by power iteration.
fn stationary(t: &[Vec<f64>]) -> Vec<f64> {
    let k = t.len();
    let mut pi = vec![1.0 / k as f64; k];
    for _ in 0..5000 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                next[j] += pi[i] * t[i][j];
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

/// A random self-coupling: the pair of consecutive states of a stationary
/// Markov chain on the tuple space of one use, laid out per `kind`.
pub fn random_coupling(spec: &ChannelSpec, kind: Kind, r: &mut ChaCha8Rng) -> Dist {
    let (k1, k2) = (spec.x1.size(), spec.x2.size());
    let axes = kind_axes(spec, kind);
    match kind {
        Kind::Joint => {
            let k = k1 * k2;
            let t: Vec<Vec<f64>> = (0..k).map(|_| random_simplex(r, k)).collect();
            let pi = stationary(&t);
            let mut v = vec![0.0; k * k];
            for u in 0..k {
                for w in 0..k {
                    let (a1, b1) = (u / k2, u % k2);
                    let (a2, b2) = (w / k2, w % k2);
                    v[((a1 * k1 + a2) * k2 + b1) * k2 + b2] += pi[u] * t[u][w];
                }
            }
            Dist::from_weights(axes, v).unwrap()
        }
        Kind::Marg1 => {
            let t: Vec<Vec<f64>> = (0..k1).map(|_| random_simplex(r, k1)).collect();
            let pi = stationary(&t);
            let p2 = random_simplex(r, k2);
            let mut v = vec![0.0; k1 * k1 * k2];
            for a in 0..k1 {
                for c in 0..k1 {
                    for b in 0..k2 {
                        v[(a * k1 + c) * k2 + b] = pi[a] * t[a][c] * p2[b];
                    }
                }
            }
            Dist::from_weights(axes, v).unwrap()
        }
        Kind::Marg2 => {
            let t: Vec<Vec<f64>> = (0..k2).map(|_| random_simplex(r, k2)).collect();
            let pi = stationary(&t);
            let p1 = random_simplex(r, k1);
            let mut v = vec![0.0; k1 * k2 * k2];
            for a in 0..k1 {
                for b in 0..k2 {
                    for c in 0..k2 {
                        v[(a * k2 + b) * k2 + c] = p1[a] * pi[b] * t[b][c];
                    }
                }
            }
            Dist::from_weights(axes, v).unwrap()
        }
    }
}

/// Diagonal coupling `P(x1, x1, x2, x2) = P1(x1) P2(x2)` (and marginal analogues).
pub fn diagonal_coupling(spec: &ChannelSpec, kind: Kind, p1: &[f64], p2: &[f64]) -> Dist {
    let (k1, k2) = (spec.x1.size(), spec.x2.size());
    let axes = kind_axes(spec, kind);
    let len: usize = axes.iter().map(|a| a.size()).product();
    let mut v = vec![0.0; len];
    for a in 0..k1 {
        for b in 0..k2 {
            let idx = match kind {
                Kind::Joint => ((a * k1 + a) * k2 + b) * k2 + b,
                Kind::Marg1 => (a * k1 + a) * k2 + b,
                Kind::Marg2 => (a * k2 + b) * k2 + b,
            };
            v[idx] += p1[a] * p2[b];
        }
    }
    Dist::from_weights(axes, v).unwrap()
}

/// Product self-coupling `P1⊗P1⊗P2⊗P2` (and marginal analogues).
pub fn product_coupling(spec: &ChannelSpec, kind: Kind, p1: &[f64], p2: &[f64]) -> Dist {
    let axes = kind_axes(spec, kind);
    let facs: Vec<&[f64]> = match kind {
        Kind::Joint => vec![p1, p1, p2, p2],
        Kind::Marg1 => vec![p1, p1, p2],
        Kind::Marg2 => vec![p1, p2, p2],
    };
    let shape: Vec<usize> = axes.iter().map(|a| a.size()).collect();
    let mut v = vec![0.0; shape.iter().product()];
    omac::prob::for_each_index(&shape, |flat, idx| {
        v[flat] = idx.iter().zip(&facs).map(|(&i, f)| f[i]).product();
    });
    Dist::from_weights(axes, v).unwrap()
}
