//! Good distributions (mixtures of product self-couplings) and co-good tensors.
//!
//! Membership in the good cone is approximated by an LP over product atoms
//! built from an η-net of the input simplices. For the marginal kinds the
//! single-copy factor enters linearly, so only its vertices are needed and
//! the approximation error comes from the doubled factor alone.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::confusability::{axis_marginals, confusable_dist, distance_to_set, kind_axes, Side, MARGINAL_TOL};
use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp, LpOutcome, Var};
use crate::prob::{
    check_structure, compositions, for_each_index, kind_asymmetry, net_points, Alphabet, Axis, Dist, Kind, Metric,
    Tensor,
};

/// Residual below which a target counts as a member of the good cone.
pub const GOODNESS_TOL: f64 = 1e-7;
/// Default net resolution.
pub const DEFAULT_ETA: f64 = 0.05;
/// Default grid step for co-goodness audits.
pub const DEFAULT_GRID_STEP: f64 = 0.02;
/// A certificate must push the inner product below `-COGOOD_EPS`.
pub const COGOOD_EPS: f64 = 1e-4;
/// Audited minima above `-COGOOD_TOL` count as nonnegative.
pub const COGOOD_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodDecomposition {
    pub kind: Kind,
    pub weights: Vec<f64>,
    /// `(P1_i, P2_i)` on axes `x1` and `x2`.
    pub factors: Vec<(Dist, Dist)>,
    /// ℓ¹ distance between the target and the reconstructed mixture.
    pub residual: f64,
    /// Worst-case ℓ¹ error from restricting factors to the net.
    pub net_slack: f64,
    /// `max(0, residual - net_slack)`: certified lower bound on the distance to the cone.
    pub lower_bound: f64,
    pub member: bool,
    pub eta: f64,
}

impl GoodDecomposition {
    /// Rebuilds the mixture tensor.
    pub fn mixture(&self) -> Result<Tensor> {
        let (a1, a2) = (&self.factors[0].0.axes()[0].symbols, &self.factors[0].1.axes()[0].symbols);
        let mut acc = vec![0.0; product_len(self.kind, a1.size(), a2.size())];
        for (w, (u, v)) in self.weights.iter().zip(&self.factors) {
            for (a, x) in acc.iter_mut().zip(product_values(self.kind, u.probs(), v.probs())) {
                *a += w * x;
            }
        }
        Tensor::new(kind_axes_of(self.kind, a1, a2), acc)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CogoodCertificate {
    pub kind: Kind,
    /// Symmetric tensor of ℓ¹ norm one.
    pub q: Tensor,
    /// `<target, q>`.
    pub inner: f64,
    /// Minimum of `<product, q>` found by the audit.
    pub grid_margin: f64,
    pub grid_step: f64,
    /// Co-goodness is audited numerically on a grid with local polishing,
    /// not proved.
    pub audit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CogoodAudit {
    pub cogood: bool,
    /// Smallest `<product, q>` found.
    pub margin: f64,
    pub argmin: (Vec<f64>, Vec<f64>),
}

pub(crate) fn kind_axes_of(kind: Kind, a1: &Alphabet, a2: &Alphabet) -> Vec<Axis> {
    let al: Vec<&Alphabet> = match kind {
        Kind::Joint => vec![a1, a1, a2, a2],
        Kind::Marg1 => vec![a1, a1, a2],
        Kind::Marg2 => vec![a1, a2, a2],
    };
    kind.axis_names().iter().zip(al).map(|(n, a)| Axis::new(*n, a.clone())).collect()
}

fn product_len(kind: Kind, k1: usize, k2: usize) -> usize {
    match kind {
        Kind::Joint => k1 * k1 * k2 * k2,
        Kind::Marg1 => k1 * k1 * k2,
        Kind::Marg2 => k1 * k2 * k2,
    }
}

/// Entries of `u⊗u⊗v⊗v` (joint), `u⊗u⊗v` (marg1) or `u⊗v⊗v` (marg2).
pub fn product_values(kind: Kind, u: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(product_len(kind, u.len(), v.len()));
    match kind {
        Kind::Joint => {
            for &a in u {
                for &b in u {
                    for &c in v {
                        for &d in v {
                            out.push(a * b * c * d);
                        }
                    }
                }
            }
        }
        Kind::Marg1 => {
            for &a in u {
                for &b in u {
                    for &c in v {
                        out.push(a * b * c);
                    }
                }
            }
        }
        Kind::Marg2 => {
            for &a in u {
                for &c in v {
                    for &d in v {
                        out.push(a * c * d);
                    }
                }
            }
        }
    }
    out
}

/// Product self-coupling of the given kind as a distribution.
pub fn product_dist(kind: Kind, a1: &Alphabet, a2: &Alphabet, u: &[f64], v: &[f64]) -> Result<Dist> {
    Dist::from_weights(kind_axes_of(kind, a1, a2), product_values(kind, u, v))
}

/// Input marginals `(P1, P2)` of a self-coupling, checking the equalities
/// required of its copies.
pub fn coupling_marginals(t: &Dist, kind: Kind) -> Result<(Vec<f64>, Vec<f64>)> {
    check_structure(t, kind)?;
    let m = axis_marginals(t);
    let close = |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= MARGINAL_TOL);
    match kind {
        Kind::Joint if close(&m[0], &m[1]) && close(&m[2], &m[3]) => Ok((m[0].clone(), m[2].clone())),
        Kind::Marg1 if close(&m[0], &m[1]) => Ok((m[0].clone(), m[2].clone())),
        Kind::Marg2 if close(&m[1], &m[2]) => Ok((m[0].clone(), m[1].clone())),
        _ => Err(Error::MarginalMismatch(format!("target is not a {} self-coupling", kind.as_str()))),
    }
}

fn vertices(k: usize) -> Vec<Vec<f64>> {
    (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Factor pairs used as LP atoms: net × net for joint, net × vertices for the
/// marginal kinds, plus any `extra` pairs.
fn atoms(kind: Kind, k1: usize, k2: usize, eta: f64, extra: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (n1, n2) = match kind {
        Kind::Joint => (net_points(k1, eta)?, net_points(k2, eta)?),
        Kind::Marg1 => (net_points(k1, eta)?, vertices(k2)),
        Kind::Marg2 => (vertices(k1), net_points(k2, eta)?),
    };
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = extra.to_vec();
    for u in &n1 {
        for v in &n2 {
            out.push((u.clone(), v.clone()));
        }
    }
    Ok(out)
}

/// ℓ¹ change of a product atom when every factor moves by at most `eta` in d∞.
pub fn net_slack(kind: Kind, k1: usize, k2: usize, eta: f64) -> f64 {
    let (d1, d2) = (k1 as f64 * eta, k2 as f64 * eta);
    match kind {
        Kind::Joint => 2.0 * d1 + 2.0 * d2,
        Kind::Marg1 => 2.0 * d1,
        Kind::Marg2 => 2.0 * d2,
    }
}

/// Best ℓ¹ approximation of `target` by a mixture of product atoms.
pub fn good_membership(target: &Dist, kind: Kind, eta: f64, k_cap: usize) -> Result<GoodDecomposition> {
    if k_cap == 0 {
        return Err(Error::InvalidArgument("k_cap must be positive".into()));
    }
    let (a1, a2) = check_structure(target, kind)?;
    let (p1, p2) = coupling_marginals(target, kind)?;
    let (k1, k2) = (a1.size(), a2.size());
    let atoms = atoms(kind, k1, k2, eta, &[(p1, p2)])?;
    let tensors: Vec<Vec<f64>> = atoms.iter().map(|(u, v)| product_values(kind, u, v)).collect();

    let mut lp = Lp::minimize();
    let lam: Vec<Var> = atoms.iter().map(|_| lp.nonneg(0.0)).collect();
    let all: Vec<(Var, f64)> = lam.iter().map(|&v| (v, 1.0)).collect();
    lp.constraint(&all, Cmp::Eq, 1.0);
    for (c, &pc) in target.probs().iter().enumerate() {
        let mut row: Vec<(Var, f64)> = lam.iter().zip(&tensors).map(|(&v, t)| (v, t[c])).collect();
        row.push((lp.nonneg(1.0), 1.0));
        row.push((lp.nonneg(1.0), -1.0));
        lp.constraint(&row, Cmp::Eq, pc);
    }
    let sol = lp.solve_optimal()?;

    let mut used: Vec<(f64, usize)> =
        lam.iter().enumerate().map(|(i, &v)| (sol.value(v), i)).filter(|(w, _)| *w > 1e-12).collect();
    used.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    used.truncate(k_cap);
    let total: f64 = used.iter().map(|(w, _)| w).sum();
    let weights: Vec<f64> = used.iter().map(|(w, _)| w / total).collect();
    let mut mix = vec![0.0; target.len()];
    for (w, &(_, i)) in weights.iter().zip(&used) {
        for (m, x) in mix.iter_mut().zip(&tensors[i]) {
            *m += w * x;
        }
    }
    let residual: f64 = mix.iter().zip(target.probs()).map(|(a, b)| (a - b).abs()).sum();
    let factors = used
        .iter()
        .map(|&(_, i)| {
            Ok((
                Dist::from_weights(vec![Axis::new("x1", a1.clone())], atoms[i].0.clone())?,
                Dist::from_weights(vec![Axis::new("x2", a2.clone())], atoms[i].1.clone())?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let slack = net_slack(kind, k1, k2, eta);
    Ok(GoodDecomposition {
        kind,
        weights,
        factors,
        residual,
        net_slack: slack,
        lower_bound: (residual - slack).max(0.0),
        member: residual <= GOODNESS_TOL,
        eta,
    })
}

/// Contracts `q` against `u⊗u` (joint) or `u⊗u` / `u` (marginal kinds) and
/// returns the remaining form in `v`: a `k2×k2` matrix for joint and marg2,
/// a vector (stored as the diagonal) for marg1.
fn form_in_v(kind: Kind, q: &[f64], u: &[f64], k2: usize) -> Vec<f64> {
    let k1 = u.len();
    match kind {
        Kind::Joint => {
            let mut m = vec![0.0; k2 * k2];
            for a in 0..k1 {
                for b in 0..k1 {
                    let w = u[a] * u[b];
                    if w == 0.0 {
                        continue;
                    }
                    let base = (a * k1 + b) * k2 * k2;
                    for (mi, qi) in m.iter_mut().zip(&q[base..base + k2 * k2]) {
                        *mi += w * qi;
                    }
                }
            }
            m
        }
        Kind::Marg1 => {
            let mut m = vec![0.0; k2];
            for a in 0..k1 {
                for b in 0..k1 {
                    let w = u[a] * u[b];
                    let base = (a * k1 + b) * k2;
                    for (mi, qi) in m.iter_mut().zip(&q[base..base + k2]) {
                        *mi += w * qi;
                    }
                }
            }
            m
        }
        Kind::Marg2 => {
            let mut m = vec![0.0; k2 * k2];
            for a in 0..k1 {
                let base = a * k2 * k2;
                for (mi, qi) in m.iter_mut().zip(&q[base..base + k2 * k2]) {
                    *mi += u[a] * qi;
                }
            }
            m
        }
    }
}

fn eval_form(kind: Kind, m: &[f64], v: &[f64]) -> f64 {
    match kind {
        Kind::Marg1 => m.iter().zip(v).map(|(a, b)| a * b).sum(),
        _ => {
            let k = v.len();
            let mut s = 0.0;
            for i in 0..k {
                for j in 0..k {
                    s += m[i * k + j] * v[i] * v[j];
                }
            }
            s
        }
    }
}

fn eval_product(kind: Kind, q: &[f64], u: &[f64], v: &[f64]) -> f64 {
    eval_form(kind, &form_in_v(kind, q, u, v.len()), v)
}

/// Exact minimum of `f(x + t (e_i - e_j))` over the feasible `t`, where `f`
/// is at most quadratic along the segment; returns the improved point.
fn line_min(x: &mut [f64], i: usize, j: usize, f: &dyn Fn(&[f64]) -> f64) -> bool {
    let (lo, hi) = (-x[i], x[j]);
    if hi - lo <= 0.0 {
        return false;
    }
    let at = |t: f64, x: &[f64]| {
        let mut y = x.to_vec();
        y[i] += t;
        y[j] -= t;
        y[i] = y[i].max(0.0);
        y[j] = y[j].max(0.0);
        f(&y)
    };
    // fit the quadratic through three points
    let (t0, t1, t2) = (lo, 0.5 * (lo + hi), hi);
    let (f0, f1, f2) = (at(t0, x), at(t1, x), at(t2, x));
    let h = 0.5 * (hi - lo);
    let a = (f0 - 2.0 * f1 + f2) / (2.0 * h * h);
    let b = (f2 - f0) / (2.0 * h);
    let mut cands = vec![(f0, t0), (f2, t2), (f1, t1)];
    if a > 0.0 {
        let t = (t1 - b / (2.0 * a)).clamp(lo, hi);
        cands.push((at(t, x), t));
    }
    let cur = f(x);
    let (fb, tb) = cands.into_iter().fold((f64::INFINITY, 0.0), |acc, c| if c.0 < acc.0 { c } else { acc });
    if fb < cur - 1e-15 {
        x[i] = (x[i] + tb).max(0.0);
        x[j] = (x[j] - tb).max(0.0);
        true
    } else {
        false
    }
}

/// Pairwise coordinate descent on both factors from `(u, v)`.
fn polish(kind: Kind, q: &[f64], u: &mut Vec<f64>, v: &mut Vec<f64>) -> f64 {
    for _ in 0..200 {
        let mut moved = false;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    let vv = v.clone();
                    moved |= line_min(u, i, j, &|x: &[f64]| eval_product(kind, q, x, &vv));
                }
            }
        }
        for i in 0..v.len() {
            for j in 0..v.len() {
                if i != j {
                    let uu = u.clone();
                    moved |= line_min(v, i, j, &|x: &[f64]| eval_product(kind, q, &uu, x));
                }
            }
        }
        if !moved {
            break;
        }
    }
    eval_product(kind, q, u, v)
}

fn grid(k: usize, step: f64) -> Vec<Vec<f64>> {
    let m = (1.0 / step).round().max(1.0) as u64;
    compositions(m, k).into_iter().map(|c| c.into_iter().map(|x| x as f64 / m as f64).collect()).collect()
}

/// Audits `<product, q> >= 0` over a grid of factor pairs, then polishes
/// from the worst grid point.
pub fn is_cogood(q: &Tensor, kind: Kind, grid_step: f64) -> Result<CogoodAudit> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid_step must lie in (0,1], got {grid_step}")));
    }
    let (a1, a2) = check_structure(q, kind)?;
    if kind_asymmetry(q, kind)? > 1e-9 {
        return Err(Error::Precondition("q is not symmetric".into()));
    }
    let norm = q.l1_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!("q must have unit ℓ¹ norm, got {norm}")));
    }
    Ok(audit(q.values(), kind, a1.size(), a2.size(), grid_step))
}

fn audit(q: &[f64], kind: Kind, k1: usize, k2: usize, step: f64) -> CogoodAudit {
    const MAX_STARTS: usize = 2048;
    let us = grid(k1, step);
    let vs = if kind == Kind::Marg1 { vertices(k2) } else { grid(k2, step) };
    let mut rows: Vec<(f64, usize, usize)> = us
        .par_iter()
        .enumerate()
        .map(|(iu, u)| {
            let m = form_in_v(kind, q, u, k2);
            let mut best = (f64::INFINITY, iu, 0usize);
            for (iv, v) in vs.iter().enumerate() {
                let f = eval_form(kind, &m, v);
                if f < best.0 {
                    best = (f, iu, iv);
                }
            }
            best
        })
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let (g, gu, gv) = rows[0];
    // grid minima are often ties at zero, so polish from every low row and
    // from a spread of second factors
    let mut seconds: Vec<Vec<f64>> = vertices(k2);
    if kind != Kind::Marg1 {
        seconds.push(vec![1.0 / k2 as f64; k2]);
    }
    let (us, vs) = (&us, &vs);
    let seconds = &seconds;
    let starts: Vec<(Vec<f64>, Vec<f64>)> = rows
        .iter()
        .take(MAX_STARTS)
        .flat_map(|&(_, iu, iv)| {
            std::iter::once((us[iu].clone(), vs[iv].clone()))
                .chain(seconds.iter().map(move |v| (us[iu].clone(), v.clone())))
        })
        .collect();
    let polished = starts
        .into_par_iter()
        .map(|(mut u, mut v)| {
            let f = polish(kind, q, &mut u, &mut v);
            (f, u, v)
        })
        .reduce(
            || (f64::INFINITY, Vec::new(), Vec::new()),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && (&b.1, &b.2) < (&a.1, &a.2)) { b } else { a },
        );
    let best = if polished.0 < g { polished } else { (g, us[gu].clone(), vs[gv].clone()) };
    let (margin, u, v) = best;
    CogoodAudit { cogood: margin >= -COGOOD_TOL, margin, argmin: (u, v) }
}

/// Orbits of tensor cells under the swap group of `kind`.
fn orbits(shape: &[usize], kind: Kind) -> Vec<Vec<usize>> {
    let mut seen = BTreeMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    let strides: Vec<usize> = {
        let mut s = vec![1; shape.len()];
        for d in (0..shape.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * shape[d + 1];
        }
        s
    };
    for_each_index(shape, |flat, idx| {
        if seen.contains_key(&flat) {
            return;
        }
        let mut orbit = vec![flat];
        let mut frontier = vec![idx.to_vec()];
        while let Some(cur) = frontier.pop() {
            for perm in kind.swaps() {
                let img: Vec<usize> = perm.iter().map(|&p| cur[p]).collect();
                let f: usize = img.iter().zip(&strides).map(|(a, b)| a * b).sum();
                if !orbit.contains(&f) {
                    orbit.push(f);
                    frontier.push(img);
                }
            }
        }
        orbit.sort_unstable();
        for &f in &orbit {
            seen.insert(f, out.len());
        }
        out.push(orbit);
    });
    out
}

/// Searches for a symmetric tensor that is nonnegative on every product
/// pair but negative on `target`, witnessing that `target` is not good.
pub fn cogood_certificate(target: &Dist, kind: Kind, eta: f64) -> Result<Option<CogoodCertificate>> {
    cogood_certificate_with(target, kind, eta, DEFAULT_GRID_STEP)
}

pub fn cogood_certificate_with(target: &Dist, kind: Kind, eta: f64, grid_step: f64) -> Result<Option<CogoodCertificate>> {
    let (a1, a2) = check_structure(target, kind)?;
    let (p1, p2) = coupling_marginals(target, kind)?;
    let (k1, k2) = (a1.size(), a2.size());
    let shape = target.shape();
    let orb = orbits(&shape, kind);
    let mut cuts: Vec<(Vec<f64>, Vec<f64>)> = atoms(kind, k1, k2, eta, &[(p1, p2)])?;

    let mut q = vec![0.0; target.len()];
    for _round in 0..30 {
        let mut lp = Lp::minimize();
        let mut vars: Vec<(Var, Var)> = Vec::with_capacity(orb.len());
        let mut norm: Vec<(Var, f64)> = Vec::new();
        for o in &orb {
            let t: f64 = o.iter().map(|&c| target.probs()[c]).sum();
            let pos = lp.nonneg(t);
            let neg = lp.nonneg(-t);
            norm.push((pos, o.len() as f64));
            norm.push((neg, o.len() as f64));
            vars.push((pos, neg));
        }
        lp.constraint(&norm, Cmp::Le, 1.0);
        for (u, v) in &cuts {
            let vals = product_values(kind, u, v);
            let mut row = Vec::with_capacity(2 * orb.len());
            for (o, &(pos, neg)) in orb.iter().zip(&vars) {
                let s: f64 = o.iter().map(|&c| vals[c]).sum();
                row.push((pos, s));
                row.push((neg, -s));
            }
            lp.constraint(&row, Cmp::Ge, 0.0);
        }
        let sol = match lp.solve()? {
            LpOutcome::Optimal(s) => s,
            _ => return Err(Error::Lp("certificate LP failed".into())),
        };
        if sol.objective >= -COGOOD_EPS {
            return Ok(None);
        }
        for (o, &(pos, neg)) in orb.iter().zip(&vars) {
            let val = sol.value(pos) - sol.value(neg);
            for &c in o {
                q[c] = val;
            }
        }
        let a = audit(&q, kind, k1, k2, grid_step);
        if a.cogood {
            break;
        }
        cuts.push(a.argmin.clone());
    }
    // lift by a multiple of the all-ones tensor, which pairs to 1 with every product
    let a = audit(&q, kind, k1, k2, grid_step);
    if a.margin < 0.0 {
        let c = -a.margin + COGOOD_TOL;
        q.iter_mut().for_each(|x| *x += c);
    }
    let norm: f64 = q.iter().map(|x| x.abs()).sum();
    if norm == 0.0 {
        return Ok(None);
    }
    q.iter_mut().for_each(|x| *x /= norm);
    let a = audit(&q, kind, k1, k2, grid_step);
    let inner: f64 = q.iter().zip(target.probs()).map(|(a, b)| a * b).sum();
    if inner >= -COGOOD_EPS || a.margin < -COGOOD_TOL {
        return Ok(None);
    }
    Ok(Some(CogoodCertificate {
        kind,
        q: Tensor::new(target.axes().to_vec(), q)?,
        inner,
        grid_margin: a.margin,
        grid_step,
        audit: "grid audit with local polishing; numerical, not a proof".into(),
    }))
}

/// Outcome of a search for a good mixture with given marginals lying outside
/// one or more confusability sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSearch {
    /// Kinds checked against confusability, in order.
    pub kinds: Vec<Kind>,
    pub found: bool,
    /// The found witness, or the least-confusable candidate.
    pub witness: Option<Dist>,
    /// Per kind: distance to the confusability set when positive, minus the
    /// certified depth inside it otherwise.
    pub margins: Vec<f64>,
    /// `min(margins)` for a witness; `-(depth)` of the shallowest candidate otherwise.
    pub margin: f64,
    pub candidates: usize,
    pub eta: f64,
}

fn project(p: &Dist, kind: Kind) -> Result<Dist> {
    if p.rank() == kind.axis_names().len() {
        return Ok(p.clone());
    }
    match kind {
        Kind::Joint => Ok(p.clone()),
        Kind::Marg1 => p.marginalize(&["x1_1", "x1_2", "x2_1"])?.renamed(Kind::Marg1.axis_names()),
        Kind::Marg2 => p.marginalize(&["x1_1", "x2_1", "x2_2"])?.renamed(Kind::Marg2.axis_names()),
    }
}

#[derive(Clone, Debug)]
struct Scored {
    dist: Dist,
    outside: bool,
    margins: Vec<f64>,
    score: f64,
}

fn score(spec: &ChannelSpec, p: &Dist, kinds: &[Kind]) -> Result<Scored> {
    let mut margins = Vec::with_capacity(kinds.len());
    let mut outside = true;
    for &k in kinds {
        let q = project(p, k)?;
        if confusable_dist(spec, &q, k)?.feasible {
            outside = false;
            margins.push(-distance_to_set(spec, &q, k, Metric::L1, Side::ToNonconfusable)?);
        } else {
            margins.push(distance_to_set(spec, &q, k, Metric::L1, Side::ToConfusable)?);
        }
    }
    // outside: the smallest gap; inside: the largest depth still to cross
    let score = if outside {
        margins.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        margins.iter().copied().filter(|m| *m <= 0.0).fold(0.0, f64::min)
    };
    Ok(Scored { dist: p.clone(), outside, margins, score })
}

/// Scores a single candidate as a one-element search; used to replay stored witnesses.
pub fn rescore(spec: &ChannelSpec, p: &Dist, kinds: &[Kind], eta: f64) -> Result<GoodSearch> {
    let s = score(spec, p, kinds)?;
    Ok(GoodSearch {
        kinds: kinds.to_vec(),
        found: s.outside,
        witness: Some(s.dist),
        margins: s.margins,
        margin: s.score,
        candidates: 1,
        eta,
    })
}

/// Random vertex of the polytope of atom weights with the given marginals.
fn random_vertex(
    atoms: &[(Vec<f64>, Vec<f64>)],
    p1: &[f64],
    p2: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let mut lp = Lp::minimize();
    let lam: Vec<Var> = atoms.iter().map(|_| lp.nonneg(rng.random::<f64>())).collect();
    for (a, &pa) in p1.iter().enumerate() {
        let row: Vec<(Var, f64)> = lam.iter().zip(atoms).map(|(&v, (u, _))| (v, u[a])).collect();
        lp.constraint(&row, Cmp::Eq, pa);
    }
    // the last x2 row is implied by the others together with the x1 rows
    for (b, &pb) in p2.iter().enumerate().take(p2.len().saturating_sub(1)) {
        let row: Vec<(Var, f64)> = lam.iter().zip(atoms).map(|(&v, (_, w))| (v, w[b])).collect();
        lp.constraint(&row, Cmp::Eq, pb);
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal(s) => Some(lam.iter().map(|&v| s.value(v).max(0.0)).collect()),
        _ => None,
    })
}

fn mixture_dist(
    kind: Kind,
    spec: &ChannelSpec,
    atoms: &[(Vec<f64>, Vec<f64>)],
    weights: &[f64],
) -> Result<Dist> {
    let mut acc = vec![0.0; product_len(kind, spec.x1.size(), spec.x2.size())];
    for (w, (u, v)) in weights.iter().zip(atoms) {
        if *w > 0.0 {
            for (a, x) in acc.iter_mut().zip(product_values(kind, u, v)) {
                *a += w * x;
            }
        }
    }
    Dist::from_weights(kind_axes(spec, kind), acc)
}

/// Searches good mixtures of `atom_kind` with marginals `(P1, P2)` for one
/// lying outside the confusability set of every kind in `kinds`.
fn search_good(
    spec: &ChannelSpec,
    p1: &Dist,
    p2: &Dist,
    atom_kind: Kind,
    kinds: &[Kind],
    eta: f64,
    budget: usize,
    seed: u64,
) -> Result<GoodSearch> {
    if p1.len() != spec.x1.size() || p2.len() != spec.x2.size() {
        return Err(Error::Shape("input distributions do not match the channel alphabets".into()));
    }
    if !spec.inputs_feasible(p1, p2) {
        return Err(Error::Precondition("input pair violates the input constraints".into()));
    }
    let (u0, v0) = (p1.probs().to_vec(), p2.probs().to_vec());
    let atoms = atoms(atom_kind, spec.x1.size(), spec.x2.size(), eta, &[(u0.clone(), v0.clone())])?;

    let mut weights: Vec<Vec<f64>> = vec![{
        let mut w = vec![0.0; atoms.len()];
        w[0] = 1.0;
        w
    }];
    let restarts = budget.saturating_sub(1);
    let drawn: Vec<Option<Vec<f64>>> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            random_vertex(&atoms, &u0, &v0, &mut r)
        })
        .collect::<Result<_>>()?;
    weights.extend(drawn.into_iter().flatten());

    let eval = |ws: &[Vec<f64>]| -> Result<Vec<Scored>> {
        ws.par_iter().map(|w| score(spec, &mixture_dist(atom_kind, spec, &atoms, w)?, kinds)).collect()
    };
    let mut scored = eval(&weights)?;
    let best_of = |s: &[Scored]| -> usize {
        let mut b = 0;
        for (i, c) in s.iter().enumerate() {
            if (c.outside, c.score) > (s[b].outside, s[b].score) {
                b = i;
            }
        }
        b
    };
    // local moves: blend the current best with every other candidate
    let b = best_of(&scored);
    let blends: Vec<Vec<f64>> = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != b)
        .flat_map(|(_, w)| {
            [0.25, 0.5].map(|t| weights[b].iter().zip(w).map(|(x, y)| (1.0 - t) * x + t * y).collect::<Vec<f64>>())
        })
        .take(budget)
        .collect();
    let extra = eval(&blends)?;
    let total = scored.len() + extra.len();
    scored.extend(extra);
    let best = scored.swap_remove(best_of(&scored));
    Ok(GoodSearch {
        kinds: kinds.to_vec(),
        found: best.outside,
        witness: Some(best.dist),
        margins: best.margins,
        margin: best.score,
        candidates: total,
        eta,
    })
}

/// Searches the simultaneously good set: a jointly good mixture with
/// marginals `(P1, P2)` outside the joint confusability set whose two
/// projections lie outside the marginal confusability sets.
pub fn search_simultaneously_good(
    spec: &ChannelSpec,
    p1: &Dist,
    p2: &Dist,
    eta: f64,
    budget: usize,
    seed: u64,
) -> Result<GoodSearch> {
    search_good(spec, p1, p2, Kind::Joint, &Kind::ALL, eta, budget, seed)
}

/// Searches `G_kind \ K_kind` for a marginal kind.
pub fn search_marginal_good(
    spec: &ChannelSpec,
    p1: &Dist,
    p2: &Dist,
    kind: Kind,
    eta: f64,
    budget: usize,
    seed: u64,
) -> Result<GoodSearch> {
    if kind == Kind::Joint {
        return Err(Error::InvalidArgument("use search_simultaneously_good for the joint kind".into()));
    }
    search_good(spec, p1, p2, kind, &[kind], eta, budget, seed)
}
