//! Random coding with coded time-sharing, constant-composition filtering,
//! expurgation, and KL exponents over the confusability sets.

use std::collections::HashMap;
use std::ops::Range;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSpec, CodePair};
use crate::confusability::{compatible_pairs, confusable_dist, kind_axes, lifted_membership, verify_zero_error};
use crate::error::{Error, Result};
use crate::good::product_values;
use crate::lp::{Cmp, Lp, LpOutcome, Var};
use crate::prob::{for_each_index, joint_type, nu_poly, Alphabet, Axis, Dist, Kind};

/// Frank–Wolfe stops once the duality gap is below this many bits.
pub const FW_GAP: f64 = 1e-4;
pub const FW_MAX_ITERS: usize = 5000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSharingPlan {
    pub weights: Vec<f64>,
    /// `(P1_l, P2_l)` per chunk.
    pub factors: Vec<(Dist, Dist)>,
}

impl TimeSharingPlan {
    pub fn new(weights: Vec<f64>, factors: Vec<(Dist, Dist)>) -> Result<Self> {
        if weights.is_empty() || weights.len() != factors.len() {
            return Err(Error::InvalidArgument("need one factor pair per weight".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("weights must be a probability vector".into()));
        }
        let (k1, k2) = (factors[0].0.len(), factors[0].1.len());
        if factors.iter().any(|(a, b)| a.rank() != 1 || b.rank() != 1 || a.len() != k1 || b.len() != k2) {
            return Err(Error::Shape("factor pairs must be single-axis with common alphabets".into()));
        }
        Ok(TimeSharingPlan { weights, factors })
    }

    /// Plain product sampling.
    pub fn product(p1: Dist, p2: Dist) -> Result<Self> {
        TimeSharingPlan::new(vec![1.0], vec![(p1, p2)])
    }

    /// Chunk sizes `round(λ_l n)` with largest-remainder correction.
    pub fn chunk_sizes(&self, n: usize) -> Result<Vec<usize>> {
        if n < self.weights.len() {
            return Err(Error::InvalidArgument(format!("n = {n} is smaller than the number of chunks")));
        }
        let scaled: Vec<f64> = self.weights.iter().map(|w| w * n as f64).collect();
        let mut sizes: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
        let short = n - sizes.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&i, &j| {
            let (ri, rj) = (scaled[i] - scaled[i].floor(), scaled[j] - scaled[j].floor());
            rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
        });
        for &i in order.iter().take(short) {
            sizes[i] += 1;
        }
        if sizes.iter().zip(&self.weights).any(|(&s, &w)| w > 0.0 && s == 0) {
            return Err(Error::InvalidArgument("a chunk with positive weight rounds to zero length".into()));
        }
        Ok(sizes)
    }

    pub fn chunks(&self, n: usize) -> Result<Vec<Range<usize>>> {
        let mut start = 0;
        Ok(self
            .chunk_sizes(n)?
            .into_iter()
            .map(|s| {
                let r = start..start + s;
                start += s;
                r
            })
            .collect())
    }

    /// Overall input distributions `sum λ_l P_i,l`.
    pub fn mixture_inputs(&self) -> Result<(Dist, Dist)> {
        let a: Vec<Dist> = self.factors.iter().map(|f| f.0.clone()).collect();
        let b: Vec<Dist> = self.factors.iter().map(|f| f.1.clone()).collect();
        Ok((Dist::mixture(&self.weights, &a)?, Dist::mixture(&self.weights, &b)?))
    }
}

fn sampler(p: &Dist) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(p.probs().to_vec()).map_err(|e| Error::NotDistribution(e.to_string()))
}

/// Draws `m1` and `m2` codewords; codeword `i` of book `b` uses its own
/// ChaCha stream, so the result does not depend on scheduling.
pub fn sample_timeshared_code(plan: &TimeSharingPlan, n: usize, m1: usize, m2: usize, seed: u64) -> Result<CodePair> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidArgument("codebook sizes must be positive".into()));
    }
    let chunks = plan.chunks(n)?;
    let s1: Vec<WeightedIndex<f64>> = plan.factors.iter().map(|f| sampler(&f.0)).collect::<Result<_>>()?;
    let s2: Vec<WeightedIndex<f64>> = plan.factors.iter().map(|f| sampler(&f.1)).collect::<Result<_>>()?;
    let draw = |book: u64, i: usize, samplers: &[WeightedIndex<f64>]| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((book << 48) | i as u64);
        let mut w = vec![0; n];
        for (c, s) in chunks.iter().zip(samplers) {
            for x in &mut w[c.clone()] {
                *x = s.sample(&mut rng);
            }
        }
        w
    };
    let book1: Vec<Vec<usize>> = (0..m1).into_par_iter().map(|i| draw(1, i, &s1)).collect();
    let book2: Vec<Vec<usize>> = (0..m2).into_par_iter().map(|i| draw(2, i, &s2)).collect();
    CodePair::from_draws(book1, book2)
}

fn composition(word: &[usize], k: usize) -> Vec<u64> {
    let mut c = vec![0u64; k];
    for &x in word {
        c[x] += 1;
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: Vec<usize>,
    pub book: Vec<Vec<usize>>,
    pub fraction: f64,
}

/// Keeps codewords whose type is within `slack` of `p` in d∞.
pub fn constant_composition_filter(book: &[Vec<usize>], p: &Dist, slack: f64) -> Result<FilterReport> {
    let k = p.len();
    let mut kept = Vec::new();
    for (i, w) in book.iter().enumerate() {
        if w.iter().any(|&x| x >= k) {
            return Err(Error::UnknownSymbol("codeword symbol outside the alphabet".into()));
        }
        let n = w.len() as f64;
        let c = composition(w, k);
        let d = c.iter().zip(p.probs()).map(|(&a, &b)| (a as f64 / n - b).abs()).fold(0.0, f64::max);
        // exact type classes are compared on counts to avoid round-off
        let exact = slack == 0.0 && c.iter().zip(p.probs()).all(|(&a, &b)| (a as f64 - b * n).abs() < 1e-9);
        if exact || (slack > 0.0 && d <= slack) {
            kept.push(i);
        }
    }
    let book_out: Vec<Vec<usize>> = kept.iter().map(|&i| book[i].clone()).collect();
    let fraction = if book.is_empty() { 0.0 } else { kept.len() as f64 / book.len() as f64 };
    Ok(FilterReport { kept, book: book_out, fraction })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityType {
    pub counts: Vec<u64>,
    pub members: Vec<usize>,
    /// `|book| / (n + |X| - 1)^(|X| - 1)`.
    pub bound: f64,
}

/// The most populated type class of a book (ties broken by smallest counts
/// vector), with the pigeonhole lower bound on its size.
pub fn majority_type(book: &[Vec<usize>], k: usize) -> Result<MajorityType> {
    let n = book.first().map_or(0, Vec::len);
    let mut classes: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
    for (i, w) in book.iter().enumerate() {
        if w.len() != n || w.iter().any(|&x| x >= k) {
            return Err(Error::Length("codewords differ in length or alphabet".into()));
        }
        classes.entry(composition(w, k)).or_default().push(i);
    }
    let (counts, members) = classes
        .into_iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .ok_or_else(|| Error::InvalidArgument("empty book".into()))?;
    let bound = book.len() as f64 / ((n + k - 1) as f64).powi(k as i32 - 1);
    Ok(MajorityType { counts, members, bound })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpurgationReport {
    pub code: CodePair,
    /// Original indices removed from each book, in removal order.
    pub removed1: Vec<usize>,
    pub removed2: Vec<usize>,
    /// Original indices surviving in each book.
    pub kept1: Vec<usize>,
    pub kept2: Vec<usize>,
}

/// Greedy expurgation: repeatedly takes the first violation in the fixed
/// tuple order and removes the later codeword of the offending pair (one
/// from each book for joint violations).
pub fn expurgate(spec: &ChannelSpec, code: &CodePair) -> Result<ExpurgationReport> {
    let mut kept1: Vec<usize> = (0..code.m1()).collect();
    let mut kept2: Vec<usize> = (0..code.m2()).collect();
    let (mut removed1, mut removed2) = (Vec::new(), Vec::new());
    loop {
        let cur = CodePair::from_draws(
            kept1.iter().map(|&i| code.book1[i].clone()).collect(),
            kept2.iter().map(|&j| code.book2[j].clone()).collect(),
        )?;
        let r = verify_zero_error(spec, &cur)?;
        let Some(v) = r.violation else {
            return Ok(ExpurgationReport { code: cur, removed1, removed2, kept1, kept2 });
        };
        match v.kind {
            Kind::Joint => {
                removed1.push(kept1.remove(v.book1[1]));
                let j = v.book2[0].max(v.book2[1]);
                removed2.push(kept2.remove(j));
            }
            Kind::Marg1 => removed1.push(kept1.remove(v.book1[1])),
            Kind::Marg2 => removed2.push(kept2.remove(v.book2[1])),
        }
    }
}

/// `(log M1 / (n log|X1|), log M2 / (n log|X2|))`.
pub fn empirical_rate(code: &CodePair, x1: &Alphabet, x2: &Alphabet) -> (f64, f64) {
    code.rates(x1, x2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlProjection {
    pub kind: Kind,
    /// Minimum of `KL(· ‖ reference)` in bits over the confusability set;
    /// `None` when the set misses the reference's support.
    pub value: Option<f64>,
    pub optimizer: Option<Dist>,
    /// Final Frank–Wolfe duality gap (bits).
    pub gap: f64,
    pub iterations: usize,
}

/// Lifted polytope `{Q(x, s1, s2)}` whose x-marginal ranges over the
/// confusability set of `kind` restricted to the support of `reference`.
struct Lifted<'a> {
    spec: &'a ChannelSpec,
    universe: Vec<usize>,
    compat: Vec<Vec<(usize, usize)>>,
    xs: Vec<Vec<usize>>,
    marg: Vec<Vec<f64>>,
    len: usize,
}

impl Lifted<'_> {
    /// Minimizes `<g, p>` over the polytope and returns the minimizing `p`.
    fn lmo(&self, g: &[f64]) -> Result<Option<Vec<f64>>> {
        let mut lp = Lp::minimize();
        let mut cells: Vec<(usize, usize, usize, Var)> = Vec::new();
        for &x in &self.universe {
            for &(s1, s2) in &self.compat[x] {
                cells.push((x, s1, s2, lp.nonneg(g[x])));
            }
        }
        for (d, m) in self.marg.iter().enumerate() {
            for (i, &t) in m.iter().enumerate() {
                if d > 0 && i + 1 == m.len() {
                    continue;
                }
                let row: Vec<(Var, f64)> =
                    cells.iter().filter(|c| self.xs[c.0][d] == i).map(|c| (c.3, 1.0)).collect();
                lp.constraint(&row, Cmp::Eq, t);
            }
        }
        for (c, b) in self.spec.lambda.le_rows() {
            for side in 0..2 {
                let row: Vec<(Var, f64)> =
                    cells.iter().map(|&(_, s1, s2, v)| (v, c[if side == 0 { s1 } else { s2 }])).collect();
                lp.constraint(&row, Cmp::Le, b);
            }
        }
        match lp.solve()? {
            LpOutcome::Optimal(s) => {
                let mut p = vec![0.0; self.len];
                for &(x, _, _, v) in &cells {
                    p[x] += s.value(v).max(0.0);
                }
                let t: f64 = p.iter().sum();
                Ok(Some(p.into_iter().map(|v| v / t).collect()))
            }
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Lp("bounded LP reported unbounded".into())),
        }
    }
}

fn kl_bits(p: &[f64], r: &[f64]) -> f64 {
    p.iter().zip(r).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).log2()).sum::<f64>().max(0.0)
}

fn kl_grad(p: &[f64], r: &[f64], universe: &[usize]) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    for &x in universe {
        g[x] = (p[x].max(1e-300) / r[x]).log2() + std::f64::consts::LOG2_E;
    }
    g
}

/// Exact line search of `KL(p + γ d ‖ r)` on `[0, hi]` by bisection on the
/// (monotone) derivative.
fn line_search(p: &[f64], d: &[f64], r: &[f64], hi: f64) -> f64 {
    let deriv = |gam: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..p.len() {
            if d[i] != 0.0 {
                let v = (p[i] + gam * d[i]).max(1e-300);
                s += d[i] * ((v / r[i]).log2() + std::f64::consts::LOG2_E);
            }
        }
        s
    };
    if deriv(hi) <= 0.0 {
        return hi;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + up);
        if deriv(mid) <= 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    lo
}

/// `min KL(Q ‖ reference)` over the confusability set of `kind` within the
/// self-couplings of `(P1, P2)`, by pairwise Frank–Wolfe with the lifted LP
/// as linear-minimization oracle.
pub fn kl_projection(spec: &ChannelSpec, p1: &Dist, p2: &Dist, kind: Kind) -> Result<KlProjection> {
    if p1.len() != spec.x1.size() || p2.len() != spec.x2.size() {
        return Err(Error::Shape("input distributions do not match the channel alphabets".into()));
    }
    let r = product_values(kind, p1.probs(), p2.probs());
    let axes: Vec<Axis> = kind_axes(spec, kind);
    let reference = Dist::from_weights(axes.clone(), r.clone())?;
    if confusable_dist(spec, &reference, kind)?.feasible {
        return Ok(KlProjection { kind, value: Some(0.0), optimizer: Some(reference), gap: 0.0, iterations: 0 });
    }
    let shape: Vec<usize> = axes.iter().map(Axis::size).collect();
    let mut xs = vec![Vec::new(); r.len()];
    for_each_index(&shape, |f, i| xs[f] = i.to_vec());
    let universe: Vec<usize> = (0..r.len()).filter(|&x| r[x] > 0.0).collect();
    let marg = {
        let mut m: Vec<Vec<f64>> = shape.iter().map(|&k| vec![0.0; k]).collect();
        for (x, idx) in xs.iter().enumerate() {
            for (d, &i) in idx.iter().enumerate() {
                m[d][i] += r[x];
            }
        }
        m
    };
    let lifted = Lifted { spec, universe, compat: compatible_pairs(spec, kind), xs, marg, len: r.len() };

    // start from the vertex closest to the reference in cross-entropy
    let start: Vec<f64> = r.iter().map(|&v| if v > 0.0 { -v.log2() } else { 0.0 }).collect();
    let Some(v0) = lifted.lmo(&start)? else {
        return Ok(KlProjection { kind, value: None, optimizer: None, gap: 0.0, iterations: 0 });
    };
    let mut verts: Vec<Vec<f64>> = vec![v0.clone()];
    let mut wts: Vec<f64> = vec![1.0];
    let mut p = v0;
    let mut gap = f64::INFINITY;
    let mut it = 0;
    while it < FW_MAX_ITERS {
        it += 1;
        let g = kl_grad(&p, &r, &lifted.universe);
        let s = lifted.lmo(&g)?.ok_or_else(|| Error::Lp("oracle became infeasible".into()))?;
        let dot = |v: &[f64]| v.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        gap = dot(&p) - dot(&s);
        if gap <= FW_GAP {
            break;
        }
        let si = match verts.iter().position(|v| v.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-12)) {
            Some(i) => i,
            None => {
                verts.push(s);
                wts.push(0.0);
                verts.len() - 1
            }
        };
        // away vertex: the active vertex with the largest gradient product
        let ai = (0..verts.len())
            .filter(|&i| wts[i] > 0.0)
            .max_by(|&i, &j| dot(&verts[i]).partial_cmp(&dot(&verts[j])).unwrap().then(j.cmp(&i)))
            .expect("active set is nonempty");
        if ai == si {
            break;
        }
        let d: Vec<f64> = verts[si].iter().zip(&verts[ai]).map(|(a, b)| a - b).collect();
        let gam = line_search(&p, &d, &r, wts[ai]);
        if gam <= 0.0 {
            break;
        }
        wts[si] += gam;
        wts[ai] -= gam;
        if wts[ai] < 1e-15 {
            wts[ai] = 0.0;
        }
        for (pi, di) in p.iter_mut().zip(&d) {
            *pi = (*pi + gam * di).max(0.0);
        }
    }
    let value = kl_bits(&p, &r);
    Ok(KlProjection { kind, value: Some(value), optimizer: Some(Dist::from_weights(axes, p)?), gap, iterations: it })
}

/// The KL exponent of a confusability set, in bits.
pub fn sanov_exponent(spec: &ChannelSpec, p1: &Dist, p2: &Dist, kind: Kind) -> Result<f64> {
    if !spec.inputs_feasible(p1, p2) {
        return Err(Error::Precondition("input pair violates the input constraints".into()));
    }
    Ok(kl_projection(spec, p1, p2, kind)?.value.unwrap_or(f64::INFINITY))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SanovEstimate {
    pub n: usize,
    pub trials: u64,
    pub hits: u64,
    pub frequency: f64,
    /// `-log2(frequency) / n`.
    pub rate: f64,
}

/// Monte Carlo frequency with which the joint type of i.i.d. words lands in
/// the confusability set of `kind` at blocklength `n`.
pub fn sanov_monte_carlo(
    spec: &ChannelSpec,
    p1: &Dist,
    p2: &Dist,
    kind: Kind,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<SanovEstimate> {
    let s1 = sampler(p1)?;
    let s2 = sampler(p2)?;
    let users: &[usize] = match kind {
        Kind::Joint => &[1, 1, 2, 2],
        Kind::Marg1 => &[1, 1, 2],
        Kind::Marg2 => &[1, 2, 2],
    };
    let alph: Vec<&Alphabet> = users.iter().map(|&u| if u == 1 { &spec.x1 } else { &spec.x2 }).collect();
    const SHARDS: u64 = 64;
    let counts: Vec<HashMap<Vec<u64>, u64>> = (0..SHARDS)
        .into_par_iter()
        .map(|sh| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sh);
            let mut local: HashMap<Vec<u64>, u64> = HashMap::new();
            let m = trials / SHARDS + u64::from(sh < trials % SHARDS);
            let mut words: Vec<Vec<usize>> = vec![vec![0; n]; alph.len()];
            for _ in 0..m {
                for (d, w) in words.iter_mut().enumerate() {
                    let s = if users[d] == 1 { &s1 } else { &s2 };
                    for x in w.iter_mut() {
                        *x = s.sample(&mut rng);
                    }
                }
                let refs: Vec<&[usize]> = words.iter().map(Vec::as_slice).collect();
                let t = joint_type(&refs, &alph, kind.axis_names()).expect("well-formed words");
                *local.entry(t.counts).or_default() += 1;
            }
            local
        })
        .collect();
    let mut all: HashMap<Vec<u64>, u64> = HashMap::new();
    for c in counts {
        for (k, v) in c {
            *all.entry(k).or_default() += v;
        }
    }
    let axes = kind_axes(spec, kind);
    let mut hits = 0;
    for (counts, m) in &all {
        let vals: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let t = Dist::new(axes.clone(), vals)?;
        if lifted_membership(spec, &t, kind)?.feasible {
            hits += m;
        }
    }
    let frequency = hits as f64 / trials as f64;
    Ok(SanovEstimate { n, trials, hits, frequency, rate: -frequency.log2() / n as f64 })
}

/// Which part of the product-distribution inner bound applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerCase {
    /// Both users positive.
    Both,
    /// Only user 1.
    User1,
    /// Only user 2.
    User2,
}

/// `a1 R1 + a2 R2 <= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInequality {
    pub a1: f64,
    pub a2: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerBoundReport {
    pub case: InnerCase,
    /// Joint exponent; computed only in the two-user case.
    pub d: Option<f64>,
    /// Marginal exponents for the first and second user.
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d_hat: Option<f64>,
    pub region: Vec<RateInequality>,
    pub optimizers: Vec<KlProjection>,
    /// Whether `d >= d_hat`, which makes the two-user region nonempty beyond the origin.
    pub d_ge_d_hat: Option<bool>,
}

impl InnerBoundReport {
    pub fn contains(&self, r1: f64, r2: f64) -> bool {
        r1 >= 0.0 && r2 >= 0.0 && self.region.iter().all(|q| q.a1 * r1 + q.a2 * r2 <= q.rhs + 1e-12)
    }
}

/// Product-distribution inner bound for the input pair `(P1, P2)`.
pub fn inner_bound(spec: &ChannelSpec, p1: &Dist, p2: &Dist) -> Result<InnerBoundReport> {
    if !spec.inputs_feasible(p1, p2) {
        return Err(Error::Precondition("input pair violates the input constraints".into()));
    }
    let prod = |kind: Kind| -> Result<bool> {
        let r = Dist::from_weights(kind_axes(spec, kind), product_values(kind, p1.probs(), p2.probs()))?;
        Ok(confusable_dist(spec, &r, kind)?.feasible)
    };
    let (in12, in1, in2) = (prod(Kind::Joint)?, prod(Kind::Marg1)?, prod(Kind::Marg2)?);
    if in12 {
        return Err(Error::Precondition("product distribution lies in the joint confusability set".into()));
    }
    let ineq = |a1: f64, a2: f64, rhs: f64| RateInequality { a1, a2, rhs };
    match (in1, in2) {
        (false, false) => {
            let j = kl_projection(spec, p1, p2, Kind::Joint)?;
            let m1 = kl_projection(spec, p1, p2, Kind::Marg1)?;
            let m2 = kl_projection(spec, p1, p2, Kind::Marg2)?;
            let inf = |v: Option<f64>| v.unwrap_or(f64::INFINITY);
            let d = inf(j.value);
            let dh = inf(m1.value).min(inf(m2.value));
            let fin = |v: f64| if v.is_finite() { Some(v) } else { None };
            Ok(InnerBoundReport {
                case: InnerCase::Both,
                d: j.value,
                d1: m1.value,
                d2: m2.value,
                d_hat: fin(dh),
                region: vec![ineq(1.0, 0.0, d - dh), ineq(0.0, 1.0, d - dh), ineq(1.0, 1.0, dh)],
                optimizers: vec![j, m1, m2],
                d_ge_d_hat: Some(d >= dh - FW_GAP),
            })
        }
        (false, true) => {
            let m1 = kl_projection(spec, p1, p2, Kind::Marg1)?;
            let v = m1.value.unwrap_or(f64::INFINITY);
            Ok(InnerBoundReport {
                case: InnerCase::User1,
                d: None,
                d1: m1.value,
                d2: Some(0.0),
                d_hat: None,
                region: vec![ineq(1.0, 0.0, v), ineq(0.0, 1.0, 0.0)],
                optimizers: vec![m1],
                d_ge_d_hat: None,
            })
        }
        (true, false) => {
            let m2 = kl_projection(spec, p1, p2, Kind::Marg2)?;
            let v = m2.value.unwrap_or(f64::INFINITY);
            Ok(InnerBoundReport {
                case: InnerCase::User2,
                d: None,
                d1: Some(0.0),
                d2: m2.value,
                d_hat: None,
                region: vec![ineq(1.0, 0.0, 0.0), ineq(0.0, 1.0, v)],
                optimizers: vec![m2],
                d_ge_d_hat: None,
            })
        }
        (true, true) => Err(Error::Precondition("both marginal products are confusable; no positive rate".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AchieveRun {
    pub seed: u64,
    pub n: usize,
    /// Target sizes `ceil(2^(n R))`.
    pub target: (usize, usize),
    pub drawn: (usize, usize),
    pub filtered: (usize, usize),
    pub expurgated: ExpurgationReport,
    pub zero_error: bool,
    pub rates: (f64, f64),
}

/// Sampling, exact constant-composition filtering, truncation to the target
/// sizes, and expurgation. Each book is oversampled by `ceil(ν(P, n))`, the
/// inverse type-class probability used in the expected-survivor count.
pub fn achieve(spec: &ChannelSpec, plan: &TimeSharingPlan, n: usize, r1: f64, r2: f64, seed: u64) -> Result<AchieveRun> {
    if !(r1 >= 0.0 && r2 >= 0.0) {
        return Err(Error::InvalidArgument("rates must be nonnegative".into()));
    }
    let target = |r: f64, k: usize| -> usize { (2f64.powf(n as f64 * r * (k as f64).log2()) - 1e-9).ceil().max(1.0) as usize };
    let (t1, t2) = (target(r1, spec.x1.size()), target(r2, spec.x2.size()));
    let (q1, q2) = plan.mixture_inputs()?;
    let over = |q: &Dist| -> Result<usize> {
        let support: Vec<f64> = q.probs().iter().copied().filter(|&v| v > 0.0).collect();
        let restricted = Dist::new(vec![Axis::new("x", Alphabet::indexed(support.len()))], support)?;
        Ok(nu_poly(&restricted, n as u64)?.ceil() as usize)
    };
    let (d1, d2) = (t1 * over(&q1)?, t2 * over(&q2)?);
    let raw = sample_timeshared_code(plan, n, d1, d2, seed)?;
    // exact composition of each book: the largest-remainder rounding of the mixture
    let exact = |q: &Dist| -> Result<Dist> {
        let c = crate::prob::round_to_lattice(q.probs(), n as u64);
        Dist::new(q.axes().to_vec(), c.iter().map(|&v| v as f64 / n as f64).collect())
    };
    let f1 = constant_composition_filter(&raw.book1, &exact(&q1)?, 0.0)?;
    let f2 = constant_composition_filter(&raw.book2, &exact(&q2)?, 0.0)?;
    let dedup = |b: Vec<Vec<usize>>, t: usize| -> Vec<Vec<usize>> {
        let mut seen = std::collections::HashSet::new();
        b.into_iter().filter(|w| seen.insert(w.clone())).take(t).collect()
    };
    let (b1, b2) = (dedup(f1.book.clone(), t1), dedup(f2.book.clone(), t2));
    if b1.is_empty() || b2.is_empty() {
        return Err(Error::Precondition("no codeword of the target composition was drawn".into()));
    }
    let code = CodePair::new(b1, b2)?;
    let ex = expurgate(spec, &code)?;
    let zero_error = verify_zero_error(spec, &ex.code)?.zero_error;
    let rates = ex.code.rates(&spec.x1, &spec.x2);
    Ok(AchieveRun {
        seed,
        n,
        target: (t1, t2),
        drawn: (d1, d2),
        filtered: (f1.book.len(), f2.book.len()),
        expurgated: ex,
        zero_error,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::builtin_xor_mac;

    fn bern(name: &str, q: f64) -> Dist {
        Dist::single(name, Alphabet::binary(), vec![1.0 - q, q]).unwrap()
    }

    #[test]
    fn chunks_sum_to_n() {
        let plan = TimeSharingPlan::new(
            vec![0.3, 0.3, 0.4],
            vec![(bern("x1", 0.1), bern("x2", 0.1)), (bern("x1", 0.5), bern("x2", 0.5)), (bern("x1", 0.9), bern("x2", 0.9))],
        )
        .unwrap();
        for n in 3..50 {
            assert_eq!(plan.chunk_sizes(n).unwrap().iter().sum::<usize>(), n);
        }
        assert!(plan.chunk_sizes(2).is_err());
    }

    #[test]
    fn rate_formula() {
        let b = Alphabet::binary();
        let w = |m: usize| (0..m).map(|i| (0..8).map(|j| (i >> j) & 1).collect()).collect::<Vec<Vec<usize>>>();
        let c = CodePair::new(w(4), w(1)).unwrap();
        let (r1, r2) = empirical_rate(&c, &b, &b);
        assert!((r1 - 0.25).abs() < 1e-12 && r2 == 0.0);
    }

    #[test]
    fn inside_gives_zero_exponent() {
        let spec = builtin_xor_mac(0.3).unwrap();
        let v = sanov_exponent(&spec, &bern("x1", 0.5), &bern("x2", 0.5), Kind::Marg1).unwrap();
        assert_eq!(v, 0.0);
    }
}
