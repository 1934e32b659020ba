//! Desk-scale converse machinery: equicoupled subcode extraction, the
//! Komlós asymmetry bound, double counting against co-good tensors, and the
//! binary XOR MAC bound with an exhaustive search oracle.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{exact, ChannelSpec, CodePair, Q};
use crate::confusability::verify_zero_error;
use crate::error::{Error, Result};
use crate::good::{is_cogood, CogoodAudit, DEFAULT_GRID_STEP};
use crate::prob::{net_denominator, round_to_lattice, symmetrize, Alphabet, Axis, Dist, Kind, Tensor};

/// Largest book size for exact bi-clique search.
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractMode {
    Exact,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquicoupledReport {
    /// Retained indices into book 1 (or the single book).
    pub book1: Vec<usize>,
    /// Retained indices into book 2; empty for single-book extraction.
    pub book2: Vec<usize>,
    /// Net point shared by every retained joint type.
    pub center: Dist,
    pub eta: f64,
    /// Largest d∞ from a retained joint type to `center`.
    pub eta_achieved: f64,
    pub method: ExtractMode,
    /// Distinct colors among all hyperedges of the input.
    pub colors: usize,
}

fn flat_counts(words: &[&[usize]], shape: &[usize]) -> Vec<u64> {
    let mut c = vec![0u64; shape.iter().product()];
    for j in 0..words[0].len() {
        let mut f = 0;
        for (w, &k) in words.iter().zip(shape) {
            f = f * k + w[j];
        }
        c[f] += 1;
    }
    c
}

fn check_words(book: &[Vec<usize>], k: usize, n: usize) -> Result<()> {
    for w in book {
        if w.len() != n {
            return Err(Error::Length("codewords of different lengths".into()));
        }
        if w.iter().any(|&x| x >= k) {
            return Err(Error::UnknownSymbol("codeword symbol outside the alphabet".into()));
        }
    }
    Ok(())
}

/// Colors of a family of joint types: the lattice point each rounds to.
struct Coloring {
    m: u64,
    palette: Vec<Vec<u64>>,
    ids: BTreeMap<Vec<u64>, u32>,
}

impl Coloring {
    fn new(k: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        Ok(Coloring { m: net_denominator(k, eta.min(1.0))?, palette: Vec::new(), ids: BTreeMap::new() })
    }

    fn color(&mut self, counts: &[u64], n: usize) -> u32 {
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        let key = round_to_lattice(&p, self.m);
        let next = self.palette.len() as u32;
        *self.ids.entry(key.clone()).or_insert_with(|| {
            self.palette.push(key);
            next
        })
    }

    fn center(&self, c: u32) -> Vec<f64> {
        self.palette[c as usize].iter().map(|&v| v as f64 / self.m as f64).collect()
    }
}

fn pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect()
}

fn max_dev(counts: &[u64], n: usize, center: &[f64]) -> f64 {
    counts.iter().zip(center).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).fold(0.0, f64::max)
}

/// Largest clique (size ≥ 2) of a graph on ≤ 64 vertices given as adjacency
/// bitmasks, restricted to `cand`; ties resolve to the lexicographically
/// smallest vertex set.
fn max_clique(adj: &[u64], cand: u64) -> u64 {
    fn grow(adj: &[u64], cur: u64, cand: u64, best: &mut u64) {
        if cand == 0 {
            if cur.count_ones() > best.count_ones() {
                *best = cur;
            }
            return;
        }
        if cur.count_ones() + cand.count_ones() <= best.count_ones() {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        grow(adj, cur | 1 << v, cand & adj[v], best);
        grow(adj, cur, cand & !(1 << v), best);
    }
    let mut best = 0;
    grow(adj, 0, cand, &mut best);
    if best.count_ones() >= 2 {
        best
    } else {
        0
    }
}

fn bits(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Extracts sub-books on which every cross joint type
/// `τ(x1_i1, x1_i2, x2_j1, x2_j2)`, `i1 < i2`, `j1 < j2`, rounds to one net
/// point.
pub fn extract_equicoupled_pair(
    code: &CodePair,
    x1: &Alphabet,
    x2: &Alphabet,
    eta: f64,
    mode: ExtractMode,
) -> Result<EquicoupledReport> {
    let (m1, m2, n) = (code.m1(), code.m2(), code.n);
    if m1 < 2 || m2 < 2 {
        return Err(Error::InvalidArgument("both books need at least two codewords".into()));
    }
    check_words(&code.book1, x1.size(), n)?;
    check_words(&code.book2, x2.size(), n)?;
    if mode == ExtractMode::Exact && m1.max(m2) > EXACT_LIMIT {
        return Err(Error::InvalidArgument(format!("exact extraction is limited to {EXACT_LIMIT} codewords per book")));
    }
    let shape = [x1.size(), x1.size(), x2.size(), x2.size()];
    let mut coloring = Coloring::new(shape.iter().product(), eta)?;
    let (pa, pb) = (pairs(m1), pairs(m2));
    let mut counts = Vec::with_capacity(pa.len() * pb.len());
    let mut color = vec![vec![0u32; pb.len()]; pa.len()];
    for (a, &(i1, i2)) in pa.iter().enumerate() {
        for (b, &(j1, j2)) in pb.iter().enumerate() {
            let w: [&[usize]; 4] = [&code.book1[i1], &code.book1[i2], &code.book2[j1], &code.book2[j2]];
            let c = flat_counts(&w, &shape);
            color[a][b] = coloring.color(&c, n);
            counts.push(c);
        }
    }
    let (s1, s2, c) = match mode {
        ExtractMode::Exact => exact_biclique(m1, m2, &pa, &pb, &color),
        ExtractMode::Greedy => greedy_biclique(m1, m2, &pa, &pb, &color),
    };
    let center = coloring.center(c);
    let mut dev: f64 = 0.0;
    for (a, &(i1, i2)) in pa.iter().enumerate() {
        for (b, &(j1, j2)) in pb.iter().enumerate() {
            if s1.contains(&i1) && s1.contains(&i2) && s2.contains(&j1) && s2.contains(&j2) {
                dev = dev.max(max_dev(&counts[a * pb.len() + b], n, &center));
            }
        }
    }
    if dev > eta + 1e-12 {
        return Err(Error::Inconsistent(format!("extracted subpair deviates by {dev} > eta = {eta}")));
    }
    let axes = vec![
        Axis::new("x1_1", x1.clone()),
        Axis::new("x1_2", x1.clone()),
        Axis::new("x2_1", x2.clone()),
        Axis::new("x2_2", x2.clone()),
    ];
    Ok(EquicoupledReport {
        book1: s1,
        book2: s2,
        center: Dist::new(axes, center)?,
        eta,
        eta_achieved: dev,
        method: mode,
        colors: coloring.palette.len(),
    })
}

fn exact_biclique(
    m1: usize,
    m2: usize,
    pa: &[(usize, usize)],
    pb: &[(usize, usize)],
    color: &[Vec<u32>],
) -> (Vec<usize>, Vec<usize>, u32) {
    let ncol = color.iter().flatten().copied().max().unwrap_or(0) as usize + 1;
    // for each color and book-2 pair, the book-1 pairs carrying that color
    let mut carry = vec![vec![0u128; pb.len()]; ncol];
    for (a, row) in color.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            carry[c as usize][b] |= 1 << a;
        }
    }
    let pair_index = |i: usize, j: usize| pa.iter().position(|&p| p == (i, j)).unwrap();
    let mut best: Option<(usize, usize, u64, u64, u32)> = None;
    for amask in 1u64..(1 << m1) {
        if amask.count_ones() < 2 {
            continue;
        }
        let av = bits(amask);
        let mut pmask = 0u128;
        for (x, &i) in av.iter().enumerate() {
            for &j in &av[x + 1..] {
                pmask |= 1 << pair_index(i, j);
            }
        }
        let first = pair_index(av[0], av[1]);
        let mut cols: Vec<u32> = color[first].clone();
        cols.sort_unstable();
        cols.dedup();
        for c in cols {
            let mut adj = vec![0u64; m2];
            for (b, &(j1, j2)) in pb.iter().enumerate() {
                if pmask & !carry[c as usize][b] == 0 {
                    adj[j1] |= 1 << j2;
                    adj[j2] |= 1 << j1;
                }
            }
            let bmask = max_clique(&adj, (1 << m2) - 1);
            if bmask == 0 {
                continue;
            }
            let (sa, sb) = (amask.count_ones() as usize, bmask.count_ones() as usize);
            let key = (sa.min(sb), sa + sb);
            if best.is_none_or(|b| key > (b.0, b.1)) {
                best = Some((key.0, key.1, amask, bmask, c));
            }
        }
    }
    let (_, _, a, b, c) = best.expect("any 2x2 sub-pair is monochromatic");
    (bits(a), bits(b), c)
}

fn greedy_biclique(
    m1: usize,
    m2: usize,
    pa: &[(usize, usize)],
    pb: &[(usize, usize)],
    color: &[Vec<u32>],
) -> (Vec<usize>, Vec<usize>, u32) {
    let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in color.iter().flatten() {
        *freq.entry(c).or_default() += 1;
    }
    let target = freq.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&c, _)| c).unwrap();
    let mut alive1 = vec![true; m1];
    let mut alive2 = vec![true; m2];
    loop {
        let mut bad1 = vec![0usize; m1];
        let mut bad2 = vec![0usize; m2];
        let mut any = false;
        let mut last = None;
        for (a, &(i1, i2)) in pa.iter().enumerate() {
            if !(alive1[i1] && alive1[i2]) {
                continue;
            }
            for (b, &(j1, j2)) in pb.iter().enumerate() {
                if !(alive2[j1] && alive2[j2]) {
                    continue;
                }
                last = Some(color[a][b]);
                if color[a][b] != target {
                    any = true;
                    bad1[i1] += 1;
                    bad1[i2] += 1;
                    bad2[j1] += 1;
                    bad2[j2] += 1;
                }
            }
        }
        let n1 = alive1.iter().filter(|&&x| x).count();
        let n2 = alive2.iter().filter(|&&x| x).count();
        let keep = |alive: &[bool]| (0..alive.len()).filter(|&i| alive[i]).collect::<Vec<_>>();
        if !any {
            return (keep(&alive1), keep(&alive2), target);
        }
        if n1 == 2 && n2 == 2 {
            return (keep(&alive1), keep(&alive2), last.expect("one hyperedge remains"));
        }
        let worst = |bad: &[usize], alive: &[bool], n: usize| {
            if n <= 2 {
                return None;
            }
            (0..bad.len()).filter(|&i| alive[i]).max_by(|&i, &j| bad[i].cmp(&bad[j]).then(j.cmp(&i))).map(|i| (bad[i], i))
        };
        match (worst(&bad1, &alive1, n1), worst(&bad2, &alive2, n2)) {
            (Some((b1, i)), Some((b2, _))) if b1 >= b2 => alive1[i] = false,
            (_, Some((_, j))) => alive2[j] = false,
            (Some((_, i)), None) => alive1[i] = false,
            (None, None) => unreachable!("sizes above two on some side"),
        }
    }
}

/// Extracts a sub-book on which every joint type with the fixed word of the
/// other user rounds to one net point. `kind` selects the layout:
/// `Marg1` for a book of user 1 against a user-2 word, `Marg2` for the reverse.
pub fn extract_equicoupled_single(
    book: &[Vec<usize>],
    other: &[usize],
    x1: &Alphabet,
    x2: &Alphabet,
    kind: Kind,
    eta: f64,
    mode: ExtractMode,
) -> Result<EquicoupledReport> {
    let m = book.len();
    if m < 2 {
        return Err(Error::InvalidArgument("the book needs at least two codewords".into()));
    }
    let n = other.len();
    let (kb, ko) = match kind {
        Kind::Marg1 => (x1.size(), x2.size()),
        Kind::Marg2 => (x2.size(), x1.size()),
        Kind::Joint => return Err(Error::InvalidArgument("single-book extraction needs a marginal kind".into())),
    };
    check_words(book, kb, n)?;
    check_words(&[other.to_vec()], ko, n)?;
    if mode == ExtractMode::Exact && m > EXACT_LIMIT {
        return Err(Error::InvalidArgument(format!("exact extraction is limited to {EXACT_LIMIT} codewords")));
    }
    let shape = match kind {
        Kind::Marg1 => [kb, kb, ko],
        _ => [ko, kb, kb],
    };
    let mut coloring = Coloring::new(shape.iter().product(), eta)?;
    let pa = pairs(m);
    let mut counts = Vec::with_capacity(pa.len());
    let mut col = Vec::with_capacity(pa.len());
    for &(i1, i2) in &pa {
        let w: [&[usize]; 3] = match kind {
            Kind::Marg1 => [&book[i1], &book[i2], other],
            _ => [other, &book[i1], &book[i2]],
        };
        let c = flat_counts(&w, &shape);
        col.push(coloring.color(&c, n));
        counts.push(c);
    }
    let (keep, c) = match mode {
        ExtractMode::Exact => {
            let mut best: Option<(u64, u32)> = None;
            let mut seen: Vec<u32> = col.clone();
            seen.sort_unstable();
            seen.dedup();
            for c in seen {
                let mut adj = vec![0u64; m];
                for (e, &(i, j)) in pa.iter().enumerate() {
                    if col[e] == c {
                        adj[i] |= 1 << j;
                        adj[j] |= 1 << i;
                    }
                }
                let s = max_clique(&adj, (1 << m) - 1);
                if s != 0 && best.is_none_or(|b| s.count_ones() > b.0.count_ones()) {
                    best = Some((s, c));
                }
            }
            let (s, c) = best.expect("every edge is a monochromatic pair");
            (bits(s), c)
        }
        ExtractMode::Greedy => {
            let mut freq: BTreeMap<u32, usize> = BTreeMap::new();
            for &c in &col {
                *freq.entry(c).or_default() += 1;
            }
            let mut target = freq.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&c, _)| c).unwrap();
            let mut alive = vec![true; m];
            loop {
                let mut bad = vec![0usize; m];
                let mut last = None;
                for (e, &(i, j)) in pa.iter().enumerate() {
                    if alive[i] && alive[j] {
                        last = Some(col[e]);
                        if col[e] != target {
                            bad[i] += 1;
                            bad[j] += 1;
                        }
                    }
                }
                let live = alive.iter().filter(|&&x| x).count();
                if bad.iter().all(|&b| b == 0) {
                    break;
                }
                if live == 2 {
                    target = last.expect("one edge remains");
                    break;
                }
                let i = (0..m).filter(|&i| alive[i]).max_by(|&i, &j| bad[i].cmp(&bad[j]).then(j.cmp(&i))).unwrap();
                alive[i] = false;
            }
            ((0..m).filter(|&i| alive[i]).collect(), target)
        }
    };
    let center = coloring.center(c);
    let mut dev: f64 = 0.0;
    for (e, &(i, j)) in pa.iter().enumerate() {
        if keep.contains(&i) && keep.contains(&j) {
            dev = dev.max(max_dev(&counts[e], n, &center));
        }
    }
    if dev > eta + 1e-12 {
        return Err(Error::Inconsistent(format!("extracted subcode deviates by {dev} > eta = {eta}")));
    }
    let axes = match kind {
        Kind::Marg1 => vec![Axis::new("x1_1", x1.clone()), Axis::new("x1_2", x1.clone()), Axis::new("x2", x2.clone())],
        _ => vec![Axis::new("x1", x1.clone()), Axis::new("x2_1", x2.clone()), Axis::new("x2_2", x2.clone())],
    };
    Ok(EquicoupledReport {
        book1: keep,
        book2: Vec::new(),
        center: Dist::new(axes, center)?,
        eta,
        eta_achieved: dev,
        method: mode,
        colors: coloring.palette.len(),
    })
}

/// `6/sqrt(M) + 4 sqrt(eta) + 2 eta`.
pub fn komlos_bound(m: usize, eta: f64) -> f64 {
    6.0 / (m as f64).sqrt() + 4.0 * eta.sqrt() + 2.0 * eta
}

/// `max |P(a, b) - P(b, a)|` of a square pair distribution.
pub fn pair_asymmetry(p: &[f64], k: usize) -> f64 {
    let mut a: f64 = 0.0;
    for x in 0..k {
        for y in 0..k {
            a = a.max((p[x * k + y] - p[y * k + x]).abs());
        }
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KomlosReport {
    pub m: usize,
    pub eta: f64,
    /// Largest d∞ between a pairwise type and the reference.
    pub max_deviation: f64,
    pub asymmetry: f64,
    pub bound: f64,
    pub holds: bool,
}

fn pairwise_types(vectors: &[Vec<usize>], k: usize) -> Vec<((usize, usize), Vec<f64>)> {
    let n = vectors[0].len();
    pairs(vectors.len())
        .into_iter()
        .map(|(i, j)| {
            let c = flat_counts(&[&vectors[i], &vectors[j]], &[k, k]);
            ((i, j), c.into_iter().map(|v| v as f64 / n as f64).collect())
        })
        .collect()
}

/// Checks the asymmetry bound for `M` sequences whose ordered pairwise joint
/// types all lie within `eta` (d∞) of `reference`.
pub fn komlos_check(vectors: &[Vec<usize>], reference: &Dist, eta: f64) -> Result<KomlosReport> {
    let m = vectors.len();
    if m < 2 {
        return Err(Error::InvalidArgument("need at least two sequences".into()));
    }
    if reference.rank() != 2 || reference.axes()[0].symbols != reference.axes()[1].symbols {
        return Err(Error::Shape("reference must be a distribution on W x W".into()));
    }
    let k = reference.axes()[0].size();
    let n = vectors[0].len();
    if n == 0 {
        return Err(Error::Length("empty sequences".into()));
    }
    check_words(vectors, k, n)?;
    let mut dev: f64 = 0.0;
    for ((i, j), t) in pairwise_types(vectors, k) {
        let d = t.iter().zip(reference.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if d > eta + 1e-12 {
            return Err(Error::Precondition(format!("pair ({i}, {j}) is {d} from the reference, above eta = {eta}")));
        }
        dev = dev.max(d);
    }
    let asymmetry = pair_asymmetry(reference.probs(), k);
    let bound = komlos_bound(m, eta);
    Ok(KomlosReport { m, eta, max_deviation: dev, asymmetry, bound, holds: asymmetry <= bound + 1e-12 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KomlosSearch {
    pub m: usize,
    pub n: usize,
    /// Largest `asymm - bound` seen; a counterexample would be positive.
    pub best_margin: f64,
    pub best_vectors: Vec<Vec<usize>>,
    pub evaluated: usize,
}

/// Reference = average pairwise type, eta = the tightest precondition.
fn komlos_margin(vectors: &[Vec<usize>], k: usize) -> f64 {
    let types = pairwise_types(vectors, k);
    let mut avg = vec![0.0; k * k];
    for (_, t) in &types {
        for (a, b) in avg.iter_mut().zip(t) {
            *a += b / types.len() as f64;
        }
    }
    let eta = types
        .iter()
        .map(|(_, t)| t.iter().zip(&avg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    pair_asymmetry(&avg, k) - komlos_bound(vectors.len(), eta)
}

/// Hill-climbs over binary sequence families, each scored with the
/// centroid reference and the smallest admissible eta, looking for a
/// violation of the Komlós bound.
pub fn komlos_adversarial_search(m: usize, n: usize, restarts: usize, steps: usize, seed: u64) -> Result<KomlosSearch> {
    if m < 2 || n == 0 {
        return Err(Error::InvalidArgument("need m >= 2 and n >= 1".into()));
    }
    let runs: Vec<(f64, Vec<Vec<usize>>, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            // nested threshold sequences are the most ordered start
            let mut v: Vec<Vec<usize>> = if r == 0 {
                (0..m).map(|i| (0..n).map(|j| usize::from(j * m < i * n)).collect()).collect()
            } else {
                (0..m).map(|_| (0..n).map(|_| rng.random_range(0..2)).collect()).collect()
            };
            let mut cur = komlos_margin(&v, 2);
            let mut evals = 1;
            for _ in 0..steps {
                let (i, j) = (rng.random_range(0..m), rng.random_range(0..n));
                v[i][j] ^= 1;
                let s = komlos_margin(&v, 2);
                evals += 1;
                if s >= cur {
                    cur = s;
                } else {
                    v[i][j] ^= 1;
                }
            }
            (cur, v, evals)
        })
        .collect();
    let evaluated = runs.iter().map(|r| r.2).sum();
    let (best_margin, best_vectors, _) =
        runs.into_iter().reduce(|a, b| if b.0 > a.0 { b } else { a }).expect("at least one restart");
    Ok(KomlosSearch { m, n, best_margin, best_vectors, evaluated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleCountReport {
    pub m1: usize,
    pub m2: usize,
    /// Sum over all ordered `(i1, i2, j1, j2)` of `<τ, q>`.
    pub direct: f64,
    /// Same sum through the column distributions.
    pub column: f64,
    pub deviation: f64,
    pub lower_bound_holds: bool,
    /// Smallest `<product, q>` seen by the co-good audit.
    pub cogood_margin: f64,
    pub eta: f64,
    pub alpha: f64,
    /// `|X1|^2 |X2|^2 eta`.
    pub eta_prime: f64,
    /// `(3/4) |X1|^2 |X2|^2 alpha`.
    pub alpha_prime: f64,
    /// `-<symmetrized reference, q>`.
    pub eps_prime: f64,
    /// `eps' - eta' - alpha'`.
    pub delta: f64,
    pub upper_bound: f64,
    /// `(1 + sqrt(1 + delta)) / delta` when `delta > 0`.
    pub size_bound: Option<f64>,
}

/// `(1 + sqrt(1 + delta)) / delta`, the largest `M` with `-delta M^2 + 2M + 1 >= 0`.
pub fn size_bound(delta: f64) -> Option<f64> {
    (delta > 0.0).then(|| (1.0 + (1.0 + delta).sqrt()) / delta)
}

/// Evaluates the double-count sum both ways and the slack bookkeeping of the
/// converse. `q` is audited as co-good first.
pub fn double_count(code: &CodePair, q: &Tensor, reference: &Dist, eta: f64, alpha: f64) -> Result<DoubleCountReport> {
    let audit = is_cogood(q, Kind::Joint, DEFAULT_GRID_STEP)?;
    double_count_audited(code, q, &audit, reference, eta, alpha)
}

/// As [`double_count`] with a precomputed audit of `q`.
pub fn double_count_audited(
    code: &CodePair,
    q: &Tensor,
    audit: &CogoodAudit,
    reference: &Dist,
    eta: f64,
    alpha: f64,
) -> Result<DoubleCountReport> {
    if !audit.cogood {
        return Err(Error::Precondition(format!("q is not co-good (audit margin {})", audit.margin)));
    }
    if q.rank() != 4 || q.axes() != reference.axes() {
        return Err(Error::Shape("q and reference must share the joint axes".into()));
    }
    let shape = q.shape();
    let (k1, k2) = (shape[0], shape[2]);
    let (m1, m2, n) = (code.m1(), code.m2(), code.n);
    check_words(&code.book1, k1, n)?;
    check_words(&code.book2, k2, n)?;
    let qv = q.values();
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * k1 + b) * k2 + c) * k2 + d;

    let direct: f64 = (0..m1)
        .into_par_iter()
        .map(|i1| {
            let mut s = 0.0;
            for i2 in 0..m1 {
                for j1 in 0..m2 {
                    for j2 in 0..m2 {
                        let (a, b, c, d) = (&code.book1[i1], &code.book1[i2], &code.book2[j1], &code.book2[j2]);
                        let t: f64 = (0..n).map(|k| qv[idx(a[k], b[k], c[k], d[k])]).sum();
                        s += t / n as f64;
                    }
                }
            }
            s
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();

    let mut column = 0.0;
    for k in 0..n {
        let mut p1 = vec![0.0; k1];
        let mut p2 = vec![0.0; k2];
        for w in &code.book1 {
            p1[w[k]] += 1.0 / m1 as f64;
        }
        for w in &code.book2 {
            p2[w[k]] += 1.0 / m2 as f64;
        }
        let mut inner = 0.0;
        for a in 0..k1 {
            for b in 0..k1 {
                for c in 0..k2 {
                    for d in 0..k2 {
                        inner += p1[a] * p1[b] * p2[c] * p2[d] * qv[idx(a, b, c, d)];
                    }
                }
            }
        }
        column += inner;
    }
    column *= (m1 * m1 * m2 * m2) as f64 / n as f64;

    let scale = (k1 * k1 * k2 * k2) as f64;
    let eta_prime = scale * eta;
    let alpha_prime = 0.75 * scale * alpha;
    let sym = symmetrize(reference, Kind::Joint)?;
    let eps_prime = -sym.tensor().inner(q)?;
    let delta = eps_prime - eta_prime - alpha_prime;
    let (f1, f2) = (m1 as f64, m2 as f64);
    let upper = f1 * (f1 - 1.0) * f2 * (f2 - 1.0) * (eta_prime + alpha_prime - eps_prime)
        + f1 * f1 * f2
        + f1 * f2 * f2
        + f1 * f2;
    let tol = 1e-9 * (m1 * m1 * m2 * m2) as f64;
    Ok(DoubleCountReport {
        m1,
        m2,
        direct,
        column,
        deviation: (direct - column).abs(),
        lower_bound_holds: direct >= -tol,
        cogood_margin: audit.margin,
        eta,
        alpha,
        eta_prime,
        alpha_prime,
        eps_prime,
        delta,
        upper_bound: upper,
        size_bound: size_bound(delta),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotkinBound {
    pub p: f64,
    /// `p - 1/4` as an exact fraction.
    pub eps: String,
    /// `1/(4 eps) + 1` as an exact fraction.
    pub exact: String,
    pub bound: f64,
}

fn fmt_q(q: &Q) -> String {
    if *q.denom() == 1 {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Upper bound on `M1 M2` for zero-error codes on the binary XOR MAC with
/// jammer weight fraction `p > 1/4`.
pub fn plotkin_xor_bound(p: f64) -> Result<PlotkinBound> {
    let pq = exact(p).map_err(|_| Error::InvalidArgument(format!("p = {p} is not representable")))?;
    let eps = pq - Q::new(1, 4);
    if eps <= Q::from_integer(0) || pq > Q::from_integer(1) {
        return Err(Error::InvalidArgument(format!("p must lie in (1/4, 1], got {p}")));
    }
    let b = Q::from_integer(1) / (Q::from_integer(4) * eps) + Q::from_integer(1);
    Ok(PlotkinBound { p, eps: fmt_q(&eps), exact: fmt_q(&b), bound: *b.numer() as f64 / *b.denom() as f64 })
}

/// Per-column density term of the XOR double count: the probability that
/// four independent bits with means `a, b, a, b` have odd parity.
pub fn quartic(a: f64, b: f64) -> f64 {
    let (na, nb) = (1.0 - a, 1.0 - b);
    na * nb * na * b
        + na * nb * a * nb
        + na * b * na * nb
        + a * nb * na * nb
        + a * b * a * nb
        + a * b * na * b
        + a * nb * a * b
        + na * b * a * b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticReport {
    pub grid_step: f64,
    pub max: f64,
    /// First maximizer in grid order after polishing.
    pub argmax: (f64, f64),
    /// Every grid point within `tie_tol` of the maximum.
    pub maximizers: Vec<(f64, f64)>,
    pub tie_tol: f64,
}

impl QuarticReport {
    /// Distance from `(a, b)` to the nearest reported maximizer.
    pub fn distance_to_maximizers(&self, a: f64, b: f64) -> f64 {
        self.maximizers.iter().map(|&(x, y)| (x - a).abs().max((y - b).abs())).fold(f64::INFINITY, f64::min)
    }
}

fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(x1) >= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

/// Grid maximization of [`quartic`] over the unit square with coordinate
/// polishing around the best grid point.
pub fn quartic_max_check(grid_step: f64) -> Result<QuarticReport> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid_step must lie in (0,1], got {grid_step}")));
    }
    let m = (1.0 / grid_step).round() as usize;
    let at = |i: usize| i as f64 / m as f64;
    let vals: Vec<Vec<f64>> = (0..=m).into_par_iter().map(|i| (0..=m).map(|j| quartic(at(i), at(j))).collect()).collect();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (i, row) in vals.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let (mut a, mut b) = (at(best.1), at(best.2));
    let h = grid_step;
    for _ in 0..4 {
        let a2 = golden(|x| quartic(x, b), (a - h).max(0.0), (a + h).min(1.0));
        if quartic(a2, b) > quartic(a, b) {
            a = a2;
        }
        let b2 = golden(|y| quartic(a, y), (b - h).max(0.0), (b + h).min(1.0));
        if quartic(a, b2) > quartic(a, b) {
            b = b2;
        }
    }
    let max = quartic(a, b).max(best.0);
    let tie_tol = 1e-12;
    let maximizers = (0..=m)
        .flat_map(|i| (0..=m).map(move |j| (i, j)))
        .filter(|&(i, j)| vals[i][j] >= max - tie_tol)
        .map(|(i, j)| (at(i), at(j)))
        .collect();
    Ok(QuarticReport { grid_step, max, argmax: (a, b), maximizers, tie_tol })
}

pub const CANONICALIZATION: &str = "coordinate-permutation-min-book1/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found { code: CodePair },
    ExhaustivelyNone,
    /// The node budget ran out before the enumeration finished.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchCertificate {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub outcome: SearchOutcome,
    /// Zero-error checks performed.
    pub nodes: u64,
    pub budget: u64,
    pub canonicalization: String,
    /// Canonical first books, one shard each.
    pub shards: usize,
}

fn word_of(mut idx: usize, k: usize, n: usize) -> Vec<usize> {
    let mut w = vec![0; n];
    for x in w.iter_mut().rev() {
        *x = idx % k;
        idx /= k;
    }
    w
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Strictly increasing index subsets of size `m` from `0..total`.
fn subsets(total: usize, m: usize, mut f: impl FnMut(&[usize])) {
    fn go(start: usize, total: usize, m: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == m {
            f(cur);
            return;
        }
        for i in start..total {
            if total - i < m - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, total, m, cur, f);
            cur.pop();
        }
    }
    go(0, total, m, &mut Vec::new(), &mut f);
}

/// Exhaustive search for a zero-error code pair of the given sizes at
/// blocklength `n`. Book 1 ranges over sets that are lexicographically
/// minimal under coordinate permutations; book 2 is grown word by word and
/// pruned as soon as the partial pair has a confusable tuple.
pub fn brute_force_search(spec: &ChannelSpec, n: usize, m1: usize, m2: usize, budget: u64) -> Result<SearchCertificate> {
    if n == 0 || m1 == 0 || m2 == 0 {
        return Err(Error::InvalidArgument("n, M1 and M2 must be positive".into()));
    }
    let (k1, k2) = (spec.x1.size(), spec.x2.size());
    let (t1, t2) = (k1.checked_pow(n as u32), k2.checked_pow(n as u32));
    let (Some(t1), Some(t2)) = (t1, t2) else {
        return Err(Error::InvalidArgument("alphabet power overflows".into()));
    };
    if t1 > 1 << 20 || t2 > 1 << 20 || n > 8 {
        return Err(Error::InvalidArgument("blocklength too large for exhaustive search".into()));
    }
    if m1 > t1 || m2 > t2 {
        return Ok(SearchCertificate {
            n,
            m1,
            m2,
            outcome: SearchOutcome::ExhaustivelyNone,
            nodes: 0,
            budget,
            canonicalization: CANONICALIZATION.into(),
            shards: 0,
        });
    }
    let words1: Vec<Vec<usize>> = (0..t1).map(|i| word_of(i, k1, n)).collect();
    let words2: Vec<Vec<usize>> = (0..t2).map(|i| word_of(i, k2, n)).collect();
    let index1 = |w: &[usize]| w.iter().fold(0, |a, &x| a * k1 + x);
    let perms = permutations(n);
    let mut firsts: Vec<Vec<usize>> = Vec::new();
    subsets(t1, m1, |s| {
        let canonical = perms.iter().all(|p| {
            let mut img: Vec<usize> = s.iter().map(|&i| index1(&p.iter().map(|&c| words1[i][c]).collect::<Vec<_>>())).collect();
            img.sort_unstable();
            img.as_slice() >= s
        });
        if canonical {
            firsts.push(s.to_vec());
        }
    });
    let nodes = AtomicU64::new(0);
    let exhausted = std::sync::atomic::AtomicBool::new(false);
    let found = firsts.par_iter().find_map_first(|b1| -> Option<Result<CodePair>> {
        let book1: Vec<Vec<usize>> = b1.iter().map(|&i| words1[i].clone()).collect();
        let mut stack: Vec<usize> = Vec::new();
        let mut next = 0usize;
        loop {
            if exhausted.load(Ordering::Relaxed) {
                return None;
            }
            if stack.len() == m2 {
                let c = CodePair::new(book1.clone(), stack.iter().map(|&j| words2[j].clone()).collect());
                return Some(c);
            }
            if next + (m2 - stack.len()) > t2 {
                // backtrack
                match stack.pop() {
                    Some(j) => next = j + 1,
                    None => return None,
                }
                continue;
            }
            stack.push(next);
            if nodes.fetch_add(1, Ordering::Relaxed) >= budget {
                exhausted.store(true, Ordering::Relaxed);
                return None;
            }
            let partial = CodePair::from_draws(book1.clone(), stack.iter().map(|&j| words2[j].clone()).collect());
            let ok = match partial.and_then(|c| verify_zero_error(spec, &c)) {
                Ok(r) => r.zero_error,
                Err(e) => return Some(Err(e)),
            };
            if ok {
                next = stack.last().unwrap() + 1;
            } else {
                let j = stack.pop().unwrap();
                next = j + 1;
            }
        }
    });
    let outcome = match found {
        Some(c) => SearchOutcome::Found { code: c? },
        None if exhausted.load(Ordering::Relaxed) => SearchOutcome::Inconclusive,
        None => SearchOutcome::ExhaustivelyNone,
    };
    Ok(SearchCertificate {
        n,
        m1,
        m2,
        outcome,
        nodes: nodes.load(Ordering::Relaxed).min(budget),
        budget,
        canonicalization: CANONICALIZATION.into(),
        shards: firsts.len(),
    })
}
