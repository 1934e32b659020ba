//! Confusability sets and zero-error verification.
//!
//! Because the channel is deterministic, the two conditional-independence
//! requirements in the definition of a confusable coupling collapse into a
//! support restriction: the jamming pair `(s1, s2)` may only take values for
//! which both codeword tuples produce the same output. Membership in `K` is
//! then a transportation-style LP over the couplings `Q(x, s1, s2)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, CodePair};
use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp, LpOutcome, Var};
use crate::prob::{check_structure, for_each_index, joint_type, Alphabet, Axis, Dist, Kind, Metric};

pub use crate::prob::Kind as ConfusabilityKind;

/// LP optimum below which a membership query counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Tolerance on marginal equality for self-couplings.
pub const MARGINAL_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusabilityCertificate {
    pub kind: Kind,
    pub feasible: bool,
    /// Optimal total violation of the relaxed LP; zero up to round-off iff feasible.
    pub slack: f64,
    /// Coupling over the x-axes, `s1`, `s2` and the common output `y`.
    pub witness: Option<Dist>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    ToConfusable,
    ToNonconfusable,
}

/// The two input pairs an x-tuple feeds into the channel.
#[inline]
pub fn input_pairs(kind: Kind, x: &[usize]) -> ((usize, usize), (usize, usize)) {
    match kind {
        Kind::Joint => ((x[0], x[2]), (x[1], x[3])),
        Kind::Marg1 => ((x[0], x[2]), (x[1], x[2])),
        Kind::Marg2 => ((x[0], x[1]), (x[0], x[2])),
    }
}

pub fn kind_axes(spec: &ChannelSpec, kind: Kind) -> Vec<Axis> {
    let names = kind.axis_names();
    let alph: [&Alphabet; 4] = match kind {
        Kind::Joint => [&spec.x1, &spec.x1, &spec.x2, &spec.x2],
        Kind::Marg1 => [&spec.x1, &spec.x1, &spec.x2, &spec.x2],
        Kind::Marg2 => [&spec.x1, &spec.x2, &spec.x2, &spec.x2],
    };
    names.iter().zip(alph).map(|(n, a)| Axis::new(*n, a.clone())).collect()
}

fn kind_shape(spec: &ChannelSpec, kind: Kind) -> Vec<usize> {
    kind_axes(spec, kind).iter().map(Axis::size).collect()
}

/// Compatible jamming pairs for every x-tuple (flat index over the kind's space).
pub fn compatible_pairs(spec: &ChannelSpec, kind: Kind) -> Vec<Vec<(usize, usize)>> {
    let shape = kind_shape(spec, kind);
    let ns = spec.s.size();
    let mut out = vec![Vec::new(); shape.iter().product()];
    for_each_index(&shape, |flat, x| {
        let ((a, b), (c, d)) = input_pairs(kind, x);
        for s1 in 0..ns {
            for s2 in 0..ns {
                if spec.w(a, b, s1) == spec.w(c, d, s2) {
                    out[flat].push((s1, s2));
                }
            }
        }
    });
    out
}

/// Per-axis marginals of a coupling, by axis position.
pub(crate) fn axis_marginals(p: &Dist) -> Vec<Vec<f64>> {
    let shape = p.shape();
    let mut m: Vec<Vec<f64>> = shape.iter().map(|&k| vec![0.0; k]).collect();
    for_each_index(&shape, |flat, idx| {
        for (d, &i) in idx.iter().enumerate() {
            m[d][i] += p.probs()[flat];
        }
    });
    m
}

/// Checks that `p` is a self-coupling of the given kind for this channel and
/// returns its input marginals `(P1, P2)`.
pub fn self_coupling_marginals(spec: &ChannelSpec, p: &Dist, kind: Kind) -> Result<(Dist, Dist)> {
    let (a1, a2) = check_structure(p, kind)?;
    if a1 != spec.x1 || a2 != spec.x2 {
        return Err(Error::Shape("coupling alphabets differ from the channel's".into()));
    }
    let m = axis_marginals(p);
    let close = |u: &[f64], v: &[f64]| u.iter().zip(v).all(|(a, b)| (a - b).abs() <= MARGINAL_TOL);
    let (p1, p2) = match kind {
        Kind::Joint => {
            if !close(&m[0], &m[1]) || !close(&m[2], &m[3]) {
                return Err(Error::MarginalMismatch("copies of an input have different marginals".into()));
            }
            (m[0].clone(), m[2].clone())
        }
        Kind::Marg1 => {
            if !close(&m[0], &m[1]) {
                return Err(Error::MarginalMismatch("x1 copies have different marginals".into()));
            }
            (m[0].clone(), m[2].clone())
        }
        Kind::Marg2 => {
            if !close(&m[1], &m[2]) {
                return Err(Error::MarginalMismatch("x2 copies have different marginals".into()));
            }
            (m[0].clone(), m[1].clone())
        }
    };
    Ok((
        Dist::from_weights(vec![spec.x1_axis("x1")], p1)?,
        Dist::from_weights(vec![spec.x2_axis("x2")], p2)?,
    ))
}

/// Adds `sum_x w(x) * sum_pairs Q * c(s_side) <= b + extra` for every state
/// constraint row and both sides. `extra` lets callers attach a slack variable.
fn add_state_rows(
    lp: &mut Lp,
    spec: &ChannelSpec,
    cells: &[(usize, usize, usize, Var)],
    weight: impl Fn(usize) -> f64,
    slack: Option<Var>,
) {
    for (c, b) in spec.lambda.le_rows() {
        for side in 0..2 {
            let mut terms: Vec<(Var, f64)> = cells
                .iter()
                .map(|&(x, s1, s2, v)| (v, weight(x) * c[if side == 0 { s1 } else { s2 }]))
                .collect();
            if let Some(t) = slack {
                terms.push((t, -1.0));
            }
            lp.constraint(&terms, Cmp::Le, b);
        }
    }
}

/// Decides whether `p` lies in the confusability set of the given kind.
pub fn confusable_dist(spec: &ChannelSpec, p: &Dist, kind: Kind) -> Result<ConfusabilityCertificate> {
    self_coupling_marginals(spec, p, kind)?;
    lifted_membership(spec, p, kind)
}

/// Membership LP without the equal-marginal requirement, as needed for
/// empirical types of independently drawn words.
pub(crate) fn lifted_membership(spec: &ChannelSpec, p: &Dist, kind: Kind) -> Result<ConfusabilityCertificate> {
    let compat = compatible_pairs(spec, kind);
    let mut lp = Lp::minimize();
    let t = lp.nonneg(1.0);
    let mut cells = Vec::new();
    for x in p.support() {
        let u = lp.nonneg(1.0);
        let mut row = vec![(u, 1.0)];
        for &(s1, s2) in &compat[x] {
            let v = lp.nonneg(0.0);
            cells.push((x, s1, s2, v));
            row.push((v, 1.0));
        }
        lp.constraint(&row, Cmp::Eq, p.probs()[x]);
    }
    add_state_rows(&mut lp, spec, &cells, |_| 1.0, Some(t));
    let sol = lp.solve_optimal()?;
    let slack = sol.objective.max(0.0);
    let feasible = slack <= FEASIBILITY_TOL;
    let witness = if feasible {
        let mut axes = p.axes().to_vec();
        axes.push(Axis::new("s1", spec.s.clone()));
        axes.push(Axis::new("s2", spec.s.clone()));
        axes.push(Axis::new("y", spec.y.clone()));
        let shape: Vec<usize> = axes.iter().map(Axis::size).collect();
        let (ns, ny) = (spec.s.size(), spec.y.size());
        let mut vals = vec![0.0; shape.iter().product()];
        let xshape = p.shape();
        let mut xs = vec![Vec::new(); p.len()];
        for_each_index(&xshape, |flat, idx| xs[flat] = idx.to_vec());
        for &(x, s1, s2, v) in &cells {
            let ((a, b), _) = input_pairs(kind, &xs[x]);
            let y = spec.w(a, b, s1);
            vals[((x * ns + s1) * ns + s2) * ny + y] += sol.value(v).max(0.0);
        }
        Some(Dist::from_weights(axes, vals)?)
    } else {
        None
    };
    Ok(ConfusabilityCertificate { kind, feasible, slack, witness })
}

/// Distance from `p` to the confusability set (`ToConfusable`, exact LP) or a
/// certified lower bound on the radius of the ball around `p`, within the
/// self-couplings of the same marginals, that stays inside it (`ToNonconfusable`).
pub fn distance_to_set(spec: &ChannelSpec, p: &Dist, kind: Kind, metric: Metric, side: Side) -> Result<f64> {
    match side {
        Side::ToConfusable => distance_to_confusable(spec, p, kind, metric),
        Side::ToNonconfusable => {
            let r = inner_radius_l1(spec, p, kind)?;
            Ok(match metric {
                Metric::L1 => r.radius,
                Metric::Linf => r.radius / r.universe as f64,
            })
        }
    }
}

/// x-tuples whose coordinates all lie in the supports of the input marginals.
fn marginal_universe(spec: &ChannelSpec, p: &Dist, kind: Kind) -> Result<Vec<usize>> {
    let (p1, p2) = self_coupling_marginals(spec, p, kind)?;
    let shape = p.shape();
    let mut out = Vec::new();
    for_each_index(&shape, |flat, idx| {
        let ok = match kind {
            Kind::Joint => p1.probs()[idx[0]] > 0.0 && p1.probs()[idx[1]] > 0.0 && p2.probs()[idx[2]] > 0.0 && p2.probs()[idx[3]] > 0.0,
            Kind::Marg1 => p1.probs()[idx[0]] > 0.0 && p1.probs()[idx[1]] > 0.0 && p2.probs()[idx[2]] > 0.0,
            Kind::Marg2 => p1.probs()[idx[0]] > 0.0 && p2.probs()[idx[1]] > 0.0 && p2.probs()[idx[2]] > 0.0,
        };
        if ok {
            out.push(flat);
        }
    });
    Ok(out)
}

fn distance_to_confusable(spec: &ChannelSpec, p: &Dist, kind: Kind, metric: Metric) -> Result<f64> {
    if confusable_dist(spec, p, kind)?.feasible {
        return Ok(0.0);
    }
    let universe = marginal_universe(spec, p, kind)?;
    let compat = compatible_pairs(spec, kind);
    let shape = p.shape();
    let mut xs = vec![Vec::new(); p.len()];
    for_each_index(&shape, |flat, idx| xs[flat] = idx.to_vec());
    let marg = axis_marginals(p);

    let mut lp = Lp::minimize();
    let t = if metric == Metric::Linf { Some(lp.nonneg(1.0)) } else { None };
    let mut cells = Vec::new();
    let mut q_terms: Vec<Vec<(Var, f64)>> = vec![Vec::new(); p.len()];
    for &x in &universe {
        for &(s1, s2) in &compat[x] {
            let v = lp.nonneg(0.0);
            cells.push((x, s1, s2, v));
            q_terms[x].push((v, 1.0));
        }
    }
    // marginals of q equal those of p on every axis
    for (d, m) in marg.iter().enumerate() {
        for (i, &target) in m.iter().enumerate() {
            // one row per axis after the first is implied by the total mass
            if d > 0 && i + 1 == m.len() {
                continue;
            }
            let terms: Vec<(Var, f64)> =
                universe.iter().filter(|&&x| xs[x][d] == i).flat_map(|&x| q_terms[x].iter().copied()).collect();
            lp.constraint(&terms, Cmp::Eq, target);
        }
    }
    add_state_rows(&mut lp, spec, &cells, |_| 1.0, None);
    // |q(x) - p(x)| terms
    for &x in &universe {
        let px = p.probs()[x];
        match t {
            Some(t) => {
                let mut up = q_terms[x].clone();
                up.push((t, -1.0));
                lp.constraint(&up, Cmp::Le, px);
                let mut down = q_terms[x].clone();
                down.push((t, 1.0));
                lp.constraint(&down, Cmp::Ge, px);
            }
            None => {
                let ep = lp.nonneg(1.0);
                let em = lp.nonneg(1.0);
                let mut row = q_terms[x].clone();
                row.push((ep, -1.0));
                row.push((em, 1.0));
                lp.constraint(&row, Cmp::Eq, px);
            }
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal(s) => Ok(s.objective.max(0.0)),
        LpOutcome::Infeasible => Ok(f64::INFINITY),
        LpOutcome::Unbounded => Err(Error::Lp("distance LP unbounded".into())),
    }
}

#[derive(Clone, Copy, Debug)]
struct InnerRadius {
    radius: f64,
    universe: usize,
}

/// Whether every `p'` with `|p' - p|_1 <= delta` supported on the universe is
/// confusable, certified through one kernel `Q(s1,s2|x)` shared by all of them.
fn robust_feasible(
    spec: &ChannelSpec,
    p: &Dist,
    universe: &[usize],
    compat: &[Vec<(usize, usize)>],
    delta: f64,
) -> Result<bool> {
    let mut lp = Lp::minimize();
    let mut cells = Vec::new();
    for &x in universe {
        let mut row = Vec::new();
        for &(s1, s2) in &compat[x] {
            let v = lp.nonneg(0.0);
            cells.push((x, s1, s2, v));
            row.push((v, 1.0));
        }
        lp.constraint(&row, Cmp::Eq, 1.0);
    }
    for (c, b) in spec.lambda.le_rows() {
        for side in 0..2 {
            let cmin = c.iter().copied().fold(f64::INFINITY, f64::min);
            let cmax = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = lp.var(0.0, cmin, cmax);
            let hi = lp.var(0.0, cmin, cmax);
            let mut mean: Vec<(Var, f64)> = Vec::new();
            for &x in universe {
                let g: Vec<(Var, f64)> = cells
                    .iter()
                    .filter(|c| c.0 == x)
                    .map(|&(_, s1, s2, v)| (v, c[if side == 0 { s1 } else { s2 }]))
                    .collect();
                let mut up = g.clone();
                up.push((hi, -1.0));
                lp.constraint(&up, Cmp::Le, 0.0);
                let mut down = g.clone();
                down.push((lo, -1.0));
                lp.constraint(&down, Cmp::Ge, 0.0);
                let px = p.probs()[x];
                mean.extend(g.iter().map(|&(v, a)| (v, a * px)));
            }
            mean.push((hi, delta / 2.0));
            mean.push((lo, -delta / 2.0));
            lp.constraint(&mean, Cmp::Le, b);
        }
    }
    // a solver breakdown at the feasibility boundary counts as infeasible,
    // which can only shrink the certified radius
    match lp.solve() {
        Ok(LpOutcome::Optimal(_)) => Ok(true),
        Ok(_) | Err(Error::Lp(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

fn inner_radius_l1(spec: &ChannelSpec, p: &Dist, kind: Kind) -> Result<InnerRadius> {
    let universe = marginal_universe(spec, p, kind)?;
    let compat = compatible_pairs(spec, kind);
    let n = universe.len();
    if universe.iter().any(|&x| compat[x].is_empty()) {
        return Ok(InnerRadius { radius: 0.0, universe: n });
    }
    if spec.lambda.is_full() {
        return Ok(InnerRadius { radius: 2.0, universe: n });
    }
    if !robust_feasible(spec, p, &universe, &compat, 0.0)? {
        return Ok(InnerRadius { radius: 0.0, universe: n });
    }
    if robust_feasible(spec, p, &universe, &compat, 2.0)? {
        return Ok(InnerRadius { radius: 2.0, universe: n });
    }
    let (mut lo, mut hi) = (0.0, 2.0);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if robust_feasible(spec, p, &universe, &compat, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(InnerRadius { radius: lo, universe: n })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperationalVerdict {
    pub confusable: bool,
    pub s1: Option<Vec<usize>>,
    pub s2: Option<Vec<usize>>,
    /// Symbol counts of `s1` and `s2` when confusable.
    pub s1_counts: Option<Vec<u64>>,
    pub s2_counts: Option<Vec<u64>>,
}

impl OperationalVerdict {
    fn no() -> Self {
        OperationalVerdict { confusable: false, s1: None, s2: None, s1_counts: None, s2_counts: None }
    }
}

/// Exact check of whether admissible jamming sequences make the codeword
/// tuple collide. `tuple` is `(x1_1, x1_2, x2_1, x2_2)` for joint,
/// `(x1_1, x1_2, x2)` for marg1 and `(x1, x2_1, x2_2)` for marg2.
///
/// Dynamic programming over coordinates on the pair of state-count vectors;
/// admissibility is checked exactly on the final counts.
pub fn operational_confusable(spec: &ChannelSpec, tuple: &[&[usize]], kind: Kind) -> Result<OperationalVerdict> {
    let want = if kind == Kind::Joint { 4 } else { 3 };
    if tuple.len() != want {
        return Err(Error::Length(format!("{} tuple needs {want} words", kind.as_str())));
    }
    let n = tuple[0].len();
    if n == 0 || tuple.iter().any(|w| w.len() != n) {
        return Err(Error::Length("words of different lengths".into()));
    }
    let shape = kind_shape(spec, kind);
    for (w, &k) in tuple.iter().zip(&shape) {
        if w.iter().any(|&x| x >= k) {
            return Err(Error::UnknownSymbol("index outside alphabet".into()));
        }
    }
    let compat = compatible_pairs(spec, kind);
    let pattern: Vec<usize> = (0..n)
        .map(|j| {
            let mut f = 0;
            for (d, w) in tuple.iter().enumerate() {
                f = f * shape[d] + w[j];
            }
            f
        })
        .collect();
    if pattern.iter().any(|&x| compat[x].is_empty()) {
        return Ok(OperationalVerdict::no());
    }
    dp_confusable(spec, &pattern, &compat)
}

fn dp_confusable(spec: &ChannelSpec, pattern: &[usize], compat: &[Vec<(usize, usize)>]) -> Result<OperationalVerdict> {
    let n = pattern.len();
    let ns = spec.s.size();
    let free = ns - 1;
    let radix = (n + 1) as u128;
    if ((n + 1) as f64).powi(2 * free as i32) > 1e36 {
        return Err(Error::InvalidArgument("blocklength too large for exact confusability".into()));
    }
    let pw: Vec<u128> = (0..2 * free).map(|k| radix.pow(k as u32)).collect();
    let inc = |s1: usize, s2: usize| -> u128 {
        let mut v = 0;
        if s1 < free {
            v += pw[s1];
        }
        if s2 < free {
            v += pw[free + s2];
        }
        v
    };
    let mut layers: Vec<Vec<u128>> = Vec::with_capacity(n + 1);
    layers.push(vec![0]);
    for &x in pattern {
        let prev = layers.last().unwrap();
        let mut next = Vec::with_capacity(prev.len() * compat[x].len());
        for &st in prev {
            for &(s1, s2) in &compat[x] {
                next.push(st + inc(s1, s2));
            }
        }
        next.sort_unstable();
        next.dedup();
        layers.push(next);
    }
    let decode = |st: u128| -> (Vec<u64>, Vec<u64>) {
        let mut c1 = vec![0u64; ns];
        let mut c2 = vec![0u64; ns];
        for k in 0..free {
            c1[k] = ((st / pw[k]) % radix) as u64;
            c2[k] = ((st / pw[free + k]) % radix) as u64;
        }
        c1[free] = n as u64 - c1[..free].iter().sum::<u64>();
        c2[free] = n as u64 - c2[..free].iter().sum::<u64>();
        (c1, c2)
    };
    let n64 = n as u64;
    let fin = layers[n].iter().copied().find(|&st| {
        let (c1, c2) = decode(st);
        spec.lambda.contains_counts(&c1, n64) && spec.lambda.contains_counts(&c2, n64)
    });
    let Some(mut st) = fin else {
        return Ok(OperationalVerdict::no());
    };
    let (c1, c2) = decode(st);
    let mut s1 = vec![0; n];
    let mut s2 = vec![0; n];
    for j in (0..n).rev() {
        let x = pattern[j];
        let (a, b) = compat[x]
            .iter()
            .copied()
            .find(|&(a, b)| {
                let d = inc(a, b);
                d <= st && layers[j].binary_search(&(st - d)).is_ok()
            })
            .expect("backtracking follows a reachable path");
        s1[j] = a;
        s2[j] = b;
        st -= inc(a, b);
    }
    Ok(OperationalVerdict { confusable: true, s1: Some(s1), s2: Some(s2), s1_counts: Some(c1), s2_counts: Some(c2) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: Kind,
    /// Book-1 indices in tuple order (two for joint/marg1, one for marg2).
    pub book1: Vec<usize>,
    /// Book-2 indices in tuple order (two for joint/marg2, one for marg1).
    pub book2: Vec<usize>,
    pub s1: Vec<usize>,
    pub s2: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroErrorReport {
    pub zero_error: bool,
    pub tuples_checked: usize,
    pub violation: Option<Violation>,
}

/// Tuples of a code pair to be checked, in the canonical order: all marg1
/// tuples, then marg2, then joint; lexicographic within each kind.
pub fn tuple_order(m1: usize, m2: usize) -> Vec<(Kind, Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for i1 in 0..m1 {
        for i2 in i1 + 1..m1 {
            for j in 0..m2 {
                out.push((Kind::Marg1, vec![i1, i2], vec![j]));
            }
        }
    }
    for i in 0..m1 {
        for j1 in 0..m2 {
            for j2 in j1 + 1..m2 {
                out.push((Kind::Marg2, vec![i], vec![j1, j2]));
            }
        }
    }
    for i1 in 0..m1 {
        for i2 in i1 + 1..m1 {
            for j1 in 0..m2 {
                for j2 in 0..m2 {
                    if j1 != j2 {
                        out.push((Kind::Joint, vec![i1, i2], vec![j1, j2]));
                    }
                }
            }
        }
    }
    out
}

fn words<'a>(code: &'a CodePair, kind: Kind, b1: &[usize], b2: &[usize]) -> Vec<&'a [usize]> {
    match kind {
        Kind::Joint => vec![&code.book1[b1[0]], &code.book1[b1[1]], &code.book2[b2[0]], &code.book2[b2[1]]],
        Kind::Marg1 => vec![&code.book1[b1[0]], &code.book1[b1[1]], &code.book2[b2[0]]],
        Kind::Marg2 => vec![&code.book1[b1[0]], &code.book2[b2[0]], &code.book2[b2[1]]],
    }
}

/// Blocklength from which the exact-type LP is used to skip the dynamic program.
const PREFILTER_FROM: usize = 12;

/// Operational confusability of a codeword tuple, with an LP pre-check on
/// its exact joint type for long blocks (a confusable tuple always has a
/// confusable type).
pub fn tuple_confusable(spec: &ChannelSpec, w: &[&[usize]], kind: Kind) -> Result<OperationalVerdict> {
    if w[0].len() >= PREFILTER_FROM {
        let alph: Vec<&Alphabet> = match kind {
            Kind::Joint => vec![&spec.x1, &spec.x1, &spec.x2, &spec.x2],
            Kind::Marg1 => vec![&spec.x1, &spec.x1, &spec.x2],
            Kind::Marg2 => vec![&spec.x1, &spec.x2, &spec.x2],
        };
        let t = joint_type(w, &alph, kind.axis_names())?.to_dist();
        if let Ok(cert) = confusable_dist(spec, &t, kind) {
            if !cert.feasible && cert.slack > 1e-7 {
                return Ok(OperationalVerdict::no());
            }
        }
    }
    operational_confusable(spec, w, kind)
}

/// Whether the code pair has zero error against every admissible jammer;
/// returns the first confusable tuple in [`tuple_order`] otherwise.
pub fn verify_zero_error(spec: &ChannelSpec, code: &CodePair) -> Result<ZeroErrorReport> {
    for w in code.book1.iter() {
        if w.iter().any(|&x| x >= spec.x1.size()) {
            return Err(Error::UnknownSymbol("book 1 symbol outside X1".into()));
        }
    }
    for w in code.book2.iter() {
        if w.iter().any(|&x| x >= spec.x2.size()) {
            return Err(Error::UnknownSymbol("book 2 symbol outside X2".into()));
        }
    }
    let order = tuple_order(code.m1(), code.m2());
    let found = order
        .par_iter()
        .map(|(kind, b1, b2)| -> Result<Option<Violation>> {
            let w = words(code, *kind, b1, b2);
            let v = tuple_confusable(spec, &w, *kind)?;
            Ok(v.confusable.then(|| Violation {
                kind: *kind,
                book1: b1.clone(),
                book2: b2.clone(),
                s1: v.s1.unwrap(),
                s2: v.s2.unwrap(),
            }))
        })
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        });
    match found {
        Some(Err(e)) => Err(e),
        Some(Ok(v)) => Ok(ZeroErrorReport { zero_error: false, tuples_checked: order.len(), violation: v }),
        None => Ok(ZeroErrorReport { zero_error: true, tuples_checked: order.len(), violation: None }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::builtin_xor_mac;

    fn w(s: &str) -> Vec<usize> {
        Alphabet::binary().parse_word(s).unwrap()
    }

    fn uniform(spec: &ChannelSpec, kind: Kind) -> Dist {
        Dist::uniform(kind_axes(spec, kind)[..if kind == Kind::Joint { 4 } else { 3 }].to_vec()).unwrap()
    }

    #[test]
    fn uniform_coupling_thresholds() {
        let hi = builtin_xor_mac(0.3).unwrap();
        let lo = builtin_xor_mac(0.2).unwrap();
        let u = uniform(&hi, Kind::Joint);
        let c = confusable_dist(&hi, &u, Kind::Joint).unwrap();
        assert!(c.feasible);
        let wit = c.witness.unwrap();
        assert_eq!(wit.rank(), 7);
        let c = confusable_dist(&lo, &u, Kind::Joint).unwrap();
        assert!(!c.feasible);
        assert!(c.slack > 1e-3);
    }

    #[test]
    fn marginal_mismatch_rejected() {
        let spec = builtin_xor_mac(0.3).unwrap();
        let axes = kind_axes(&spec, Kind::Marg1)[..3].to_vec();
        let p = Dist::point(axes, &[0, 1, 0]).unwrap();
        assert!(matches!(confusable_dist(&spec, &p, Kind::Marg1), Err(Error::MarginalMismatch(_))));
    }

    #[test]
    fn distance_zero_inside() {
        let spec = builtin_xor_mac(0.3).unwrap();
        let u = uniform(&spec, Kind::Joint);
        assert_eq!(distance_to_set(&spec, &u, Kind::Joint, Metric::L1, Side::ToConfusable).unwrap(), 0.0);
    }

    #[test]
    fn worked_marg1_example() {
        let hi = builtin_xor_mac(0.25).unwrap();
        let (a, b, c) = (w("0000"), w("1100"), w("0000"));
        let v = operational_confusable(&hi, &[&a, &b, &c], Kind::Marg1).unwrap();
        assert!(v.confusable);
        let (s1, s2) = (v.s1.unwrap(), v.s2.unwrap());
        assert!(hi.admissible_state(&s1) && hi.admissible_state(&s2));
        let lo = builtin_xor_mac(0.2).unwrap();
        assert!(!operational_confusable(&lo, &[&a, &b, &c], Kind::Marg1).unwrap().confusable);
    }

    #[test]
    fn self_confusable() {
        let spec = builtin_xor_mac(0.1).unwrap();
        let (a, b) = (w("0110"), w("1010"));
        let v = operational_confusable(&spec, &[&a, &a, &b, &b], Kind::Joint).unwrap();
        assert!(v.confusable);
        assert_eq!(v.s1, v.s2);
    }

    #[test]
    fn zero_error_examples() {
        let spec = builtin_xor_mac(0.0).unwrap();
        let single = CodePair::new(vec![w("0101")], vec![w("0011")]).unwrap();
        assert!(verify_zero_error(&spec, &single).unwrap().zero_error);
        let bad = CodePair::new(vec![w("0000"), w("1111")], vec![w("0000"), w("1111")]).unwrap();
        let r = verify_zero_error(&spec, &bad).unwrap();
        assert!(!r.zero_error);
        assert_eq!(r.violation.unwrap().kind, Kind::Joint);
        let good = CodePair::new(vec![w("0000"), w("1111")], vec![w("0000")]).unwrap();
        assert!(verify_zero_error(&spec, &good).unwrap().zero_error);
    }

    #[test]
    fn length_mismatch() {
        let spec = builtin_xor_mac(0.1).unwrap();
        let (a, b) = (w("01"), w("011"));
        assert!(operational_confusable(&spec, &[&a, &b, &a], Kind::Marg1).is_err());
    }
}
