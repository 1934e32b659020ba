//! Finite-alphabet probability algebra.
//!
//! Distributions are dense arrays over a labeled product of alphabets, stored
//! row-major (last axis fastest). [`Tensor`] is the signed variant used for
//! co-good candidates.
//!
//! **Tensor marginals sum absolute values.** [`Tensor::marginalize_abs`] is not
//! the linear marginal: it returns `sum |T|` over the dropped axes, which is the
//! convention used for the generalized self-coupling sets. For a nonnegative
//! tensor the two coincide.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::Alphabet("empty alphabet".into()));
        }
        let mut seen = HashSet::new();
        for s in &symbols {
            if s.is_empty() {
                return Err(Error::Alphabet("empty symbol label".into()));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::Alphabet(format!("duplicate symbol `{s}`")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// `{0, 1, ..., k-1}` rendered as decimal labels.
    pub fn indexed(k: usize) -> Self {
        assert!(k >= 1, "alphabet size must be positive");
        Alphabet { symbols: (0..k).map(|i| i.to_string()).collect() }
    }

    pub fn binary() -> Self {
        Self::indexed(2)
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, s: &str) -> Option<usize> {
        self.symbols.iter().position(|x| x == s)
    }

    fn single_char(&self) -> bool {
        self.symbols.iter().all(|s| s.chars().count() == 1)
    }

    /// Parses a word. Single-character alphabets read one symbol per character
    /// (whitespace ignored); otherwise symbols are whitespace-separated.
    pub fn parse_word(&self, text: &str) -> Result<Vec<usize>> {
        let lookup = |tok: &str| self.index_of(tok).ok_or_else(|| Error::UnknownSymbol(tok.to_string()));
        if self.single_char() {
            text.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| lookup(c.encode_utf8(&mut [0u8; 4])))
                .collect()
        } else {
            text.split_whitespace().map(lookup).collect()
        }
    }

    pub fn format_word(&self, word: &[usize]) -> String {
        let sep = if self.single_char() { "" } else { " " };
        word.iter().map(|&i| self.symbols[i].as_str()).collect::<Vec<_>>().join(sep)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub symbols: Alphabet,
}

impl Axis {
    pub fn new(name: impl Into<String>, symbols: Alphabet) -> Self {
        Axis { name: name.into(), symbols }
    }

    pub fn size(&self) -> usize {
        self.symbols.size()
    }
}

/// Iterates all multi-indices of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    for flat in 0..total {
        f(flat, &idx);
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

/// Dense signed array over a labeled product space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        let mut names = HashSet::new();
        for a in &axes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Shape(format!("duplicate axis name `{}`", a.name)));
            }
        }
        if axes.is_empty() {
            return Err(Error::Shape("no axes".into()));
        }
        let len: usize = axes.iter().map(Axis::size).product();
        if values.len() != len {
            return Err(Error::Shape(format!("expected {len} values, got {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite entry".into()));
        }
        Ok(Tensor { axes, values })
    }

    pub fn zeros(axes: Vec<Axis>) -> Result<Self> {
        let len: usize = axes.iter().map(Axis::size).product();
        Tensor::new(axes, vec![0.0; len])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::size).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.axes.len()
    }

    pub fn axis_position(&self, name: &str) -> Result<usize> {
        self.axes.iter().position(|a| a.name == name).ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let shape = self.shape();
        let mut flat = 0;
        for (d, &i) in idx.iter().enumerate() {
            flat = flat * shape[d] + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        same_axes(self, other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor { axes: self.axes.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Tensor> {
        Tensor::new(self.axes.clone(), values)
    }

    pub fn renamed(&self, names: &[&str]) -> Result<Tensor> {
        if names.len() != self.axes.len() {
            return Err(Error::Shape("rename needs one name per axis".into()));
        }
        let axes = self.axes.iter().zip(names).map(|(a, n)| Axis::new(*n, a.symbols.clone())).collect();
        Tensor::new(axes, self.values.clone())
    }

    /// Returns the tensor with axes reordered: output axis `d` is input axis `order[d]`.
    pub fn transposed(&self, order: &[usize]) -> Result<Tensor> {
        let r = self.rank();
        let mut seen = vec![false; r];
        if order.len() != r || order.iter().any(|&o| o >= r || std::mem::replace(&mut seen[o], true)) {
            return Err(Error::Shape("invalid axis order".into()));
        }
        let axes: Vec<Axis> = order.iter().map(|&o| self.axes[o].clone()).collect();
        let in_strides = strides_of(&self.shape());
        let out_shape: Vec<usize> = axes.iter().map(Axis::size).collect();
        let mut values = vec![0.0; self.values.len()];
        for_each_index(&out_shape, |flat, idx| {
            let src: usize = idx.iter().zip(order).map(|(&i, &o)| i * in_strides[o]).sum();
            values[flat] = self.values[src];
        });
        Tensor::new(axes, values)
    }

    /// Values after relabeling positions: `out[idx] = self[idx permuted by perm]`,
    /// i.e. `out[i_0..i_r] = self[i_perm(0)..i_perm(r)]`. Axis labels are kept,
    /// so this is only meaningful when the permuted axes share an alphabet.
    pub(crate) fn swapped_values(&self, perm: &[usize]) -> Vec<f64> {
        let shape = self.shape();
        let strides = strides_of(&shape);
        let mut out = vec![0.0; self.values.len()];
        for_each_index(&shape, |flat, idx| {
            let src: usize = perm.iter().enumerate().map(|(d, &p)| idx[p] * strides[d]).sum();
            out[flat] = self.values[src];
        });
        out
    }

    fn keep_positions(&self, keep: &[&str]) -> Result<Vec<usize>> {
        if keep.is_empty() {
            return Err(Error::Shape("keep_axes must be nonempty".into()));
        }
        let mut pos = Vec::with_capacity(keep.len());
        for k in keep {
            pos.push(self.axis_position(k)?);
        }
        pos.sort_unstable();
        pos.dedup();
        Ok(pos)
    }

    fn reduce(&self, keep: &[&str], f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let pos = self.keep_positions(keep)?;
        let axes: Vec<Axis> = pos.iter().map(|&p| self.axes[p].clone()).collect();
        let out_shape: Vec<usize> = axes.iter().map(Axis::size).collect();
        let out_strides = strides_of(&out_shape);
        let mut values = vec![0.0; out_shape.iter().product()];
        for_each_index(&self.shape(), |flat, idx| {
            let o: usize = pos.iter().zip(&out_strides).map(|(&p, &s)| idx[p] * s).sum();
            values[o] += f(self.values[flat]);
        });
        Tensor::new(axes, values)
    }

    /// Marginal of `|T|` onto the kept axes (kept in their original order).
    pub fn marginalize_abs(&self, keep: &[&str]) -> Result<Tensor> {
        self.reduce(keep, f64::abs)
    }

    /// Outer product; axis names must be disjoint.
    pub fn tensor_product(&self, other: &Tensor) -> Result<Tensor> {
        for a in &other.axes {
            if self.axes.iter().any(|b| b.name == a.name) {
                return Err(Error::Shape(format!("axis name collision `{}`", a.name)));
            }
        }
        let mut axes = self.axes.clone();
        axes.extend(other.axes.iter().cloned());
        let mut values = Vec::with_capacity(self.values.len() * other.values.len());
        for &a in &self.values {
            for &b in &other.values {
                values.push(a * b);
            }
        }
        Tensor::new(axes, values)
    }
}

fn same_axes(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.axes != b.axes {
        return Err(Error::Shape("operands have different axes".into()));
    }
    Ok(())
}

/// A probability distribution: a nonnegative [`Tensor`] summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Tensor", into = "Tensor")]
pub struct Dist(Tensor);

impl TryFrom<Tensor> for Dist {
    type Error = Error;
    fn try_from(t: Tensor) -> Result<Self> {
        Dist::from_tensor(t)
    }
}

impl From<Dist> for Tensor {
    fn from(d: Dist) -> Tensor {
        d.0
    }
}

impl Deref for Dist {
    type Target = Tensor;
    fn deref(&self) -> &Tensor {
        &self.0
    }
}

impl Dist {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        Dist::from_tensor(Tensor::new(axes, values)?)
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if let Some(v) = t.values.iter().find(|v| **v < 0.0) {
            return Err(Error::NotDistribution(format!("negative entry {v}")));
        }
        let s: f64 = t.values.iter().sum();
        if (s - 1.0).abs() > NORM_TOL {
            return Err(Error::NotDistribution(format!("entries sum to {s}")));
        }
        Ok(Dist(t))
    }

    /// Builds a distribution from solver output: clamps round-off negatives
    /// (down to `-1e-9`) to zero and renormalizes.
    pub fn from_weights(axes: Vec<Axis>, mut values: Vec<f64>) -> Result<Self> {
        for v in values.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-9 {
                    return Err(Error::NotDistribution(format!("negative entry {v}")));
                }
                *v = 0.0;
            }
        }
        let s: f64 = values.iter().sum();
        if !(s > 0.0) || (s - 1.0).abs() > 1e-6 {
            return Err(Error::NotDistribution(format!("entries sum to {s}")));
        }
        for v in values.iter_mut() {
            *v /= s;
        }
        Dist::new(axes, values)
    }

    /// Single-axis distribution.
    pub fn single(name: &str, symbols: Alphabet, probs: Vec<f64>) -> Result<Self> {
        Dist::new(vec![Axis::new(name, symbols)], probs)
    }

    pub fn uniform(axes: Vec<Axis>) -> Result<Self> {
        let len: usize = axes.iter().map(Axis::size).product();
        Dist::new(axes, vec![1.0 / len as f64; len])
    }

    pub fn point(axes: Vec<Axis>, idx: &[usize]) -> Result<Self> {
        let mut t = Tensor::zeros(axes)?;
        let f = t.flat_index(idx);
        t.values[f] = 1.0;
        Dist::from_tensor(t)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    pub fn probs(&self) -> &[f64] {
        &self.0.values
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.0.values[i] > 0.0).collect()
    }

    pub fn marginalize(&self, keep: &[&str]) -> Result<Dist> {
        Ok(Dist(self.0.reduce(keep, |v| v)?))
    }

    pub fn tensor_product(&self, other: &Dist) -> Result<Dist> {
        Ok(Dist(self.0.tensor_product(&other.0)?))
    }

    pub fn renamed(&self, names: &[&str]) -> Result<Dist> {
        Ok(Dist(self.0.renamed(names)?))
    }

    pub fn transposed(&self, order: &[usize]) -> Result<Dist> {
        Ok(Dist(self.0.transposed(order)?))
    }

    /// Mixture `sum w_i d_i`; all components must share axes.
    pub fn mixture(weights: &[f64], comps: &[Dist]) -> Result<Dist> {
        let first = comps.first().ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        if weights.len() != comps.len() {
            return Err(Error::Length("weights vs components".into()));
        }
        let mut values = vec![0.0; first.len()];
        for (w, c) in weights.iter().zip(comps) {
            same_axes(first, c)?;
            for (v, x) in values.iter_mut().zip(c.probs()) {
                *v += w * x;
            }
        }
        Dist::from_weights(first.axes.clone(), values)
    }
}

/// Exact joint type: integer counts over a product space plus the length.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointType {
    pub axes: Vec<Axis>,
    pub counts: Vec<u64>,
    pub n: u64,
}

impl JointType {
    pub fn to_dist(&self) -> Dist {
        let n = self.n as f64;
        let values = self.counts.iter().map(|&c| c as f64 / n).collect();
        Dist::new(self.axes.clone(), values).expect("type counts sum to n")
    }
}

/// Joint type of index-encoded words with explicit axis names.
pub fn joint_type(words: &[&[usize]], alphabets: &[&Alphabet], names: &[&str]) -> Result<JointType> {
    if words.is_empty() || words.len() != alphabets.len() || names.len() != words.len() {
        return Err(Error::Length("need one alphabet and name per word".into()));
    }
    let n = words[0].len();
    if n == 0 {
        return Err(Error::Length("empty words".into()));
    }
    if words.iter().any(|w| w.len() != n) {
        return Err(Error::Length("words have different lengths".into()));
    }
    let axes: Vec<Axis> = names.iter().zip(alphabets).map(|(nm, a)| Axis::new(*nm, (*a).clone())).collect();
    let shape: Vec<usize> = alphabets.iter().map(|a| a.size()).collect();
    let mut counts = vec![0u64; shape.iter().product()];
    for j in 0..n {
        let mut flat = 0;
        for (d, w) in words.iter().enumerate() {
            let s = w[j];
            if s >= shape[d] {
                return Err(Error::UnknownSymbol(format!("index {s} on axis {d}")));
            }
            flat = flat * shape[d] + s;
        }
        counts[flat] += 1;
    }
    Ok(JointType { axes, counts, n: n as u64 })
}

fn default_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("v{i}")).collect()
}

/// Empirical joint distribution of equal-length words; axes are named `v0, v1, ...`.
pub fn type_of(words: &[&[usize]], alphabets: &[&Alphabet]) -> Result<Dist> {
    let names = default_names(words.len());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(joint_type(words, alphabets, &refs)?.to_dist())
}

/// As [`type_of`] for words given as symbol strings.
pub fn type_of_symbols(words: &[&str], alphabets: &[&Alphabet]) -> Result<Dist> {
    if words.len() != alphabets.len() {
        return Err(Error::Length("need one alphabet per word".into()));
    }
    let parsed: Vec<Vec<usize>> = words.iter().zip(alphabets).map(|(w, a)| a.parse_word(w)).collect::<Result<_>>()?;
    let refs: Vec<&[usize]> = parsed.iter().map(Vec::as_slice).collect();
    type_of(&refs, alphabets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    Linf,
}

pub fn distance(a: &Tensor, b: &Tensor, metric: Metric) -> Result<f64> {
    same_axes(a, b)?;
    let diffs = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs());
    Ok(match metric {
        Metric::L1 => diffs.sum(),
        Metric::Linf => diffs.fold(0.0, f64::max),
    })
}

/// Lattice denominator used by [`build_net`] for covering radius `eta`.
pub fn net_denominator(k: usize, eta: f64) -> Result<u64> {
    if !(eta > 0.0) || eta > 1.0 {
        return Err(Error::InvalidArgument(format!("eta must lie in (0,1], got {eta}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("alphabet size must be positive".into()));
    }
    if k == 1 {
        return Ok(1);
    }
    let r = (1.0 - 1.0 / k as f64) / eta;
    Ok((r - 1e-12).ceil().max(1.0) as u64)
}

/// Largest-remainder rounding of `p` onto the lattice `{c / m}`; every
/// coordinate moves by at most `(1 - 1/k) / m`.
pub fn round_to_lattice(p: &[f64], m: u64) -> Vec<u64> {
    let scaled: Vec<f64> = p.iter().map(|x| x.max(0.0) * m as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = scaled[i] - scaled[i].floor();
        let rj = scaled[j] - scaled[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    if assigned <= m {
        for &i in order.iter().take((m - assigned) as usize) {
            counts[i] += 1;
        }
    } else {
        // only reachable through round-off when p sums slightly above one
        let mut extra = assigned - m;
        for &i in order.iter().rev() {
            if extra == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                extra -= 1;
            }
        }
    }
    counts
}

/// All compositions of `m` into `k` nonnegative parts, lexicographically.
pub fn compositions(m: u64, k: usize) -> Vec<Vec<u64>> {
    fn rec(rem: u64, k: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=rem {
            cur.push(c);
            rec(rem - c, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Raw net points (probability vectors) for the `k`-simplex at radius `eta`.
pub fn net_points(k: usize, eta: f64) -> Result<Vec<Vec<f64>>> {
    let m = net_denominator(k, eta)?;
    let pts: Vec<Vec<f64>> =
        compositions(m, k).into_iter().map(|c| c.into_iter().map(|x| x as f64 / m as f64).collect()).collect();
    let bound = ((k as f64) / (2.0 * eta)).ceil().powi(k as i32);
    if pts.len() as f64 > bound {
        return Err(Error::InvalidArgument(format!("net of size {} exceeds {bound}", pts.len())));
    }
    Ok(pts)
}

/// An `eta`-net of the probability simplex on `k` symbols in d∞.
pub fn build_net(k: usize, eta: f64) -> Result<Vec<Dist>> {
    let axes = vec![Axis::new("x", Alphabet::indexed(k.max(1)))];
    net_points(k, eta)?.into_iter().map(|p| Dist::new(axes.clone(), p)).collect()
}

/// Coupling structure of a self-coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    /// axes (x1_1, x1_2, x2_1, x2_2)
    Joint,
    /// axes (x1_1, x1_2, x2)
    Marg1,
    /// axes (x1, x2_1, x2_2)
    Marg2,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::Joint, Kind::Marg1, Kind::Marg2];

    /// Default axis names for this coupling.
    pub fn axis_names(self) -> &'static [&'static str] {
        match self {
            Kind::Joint => &["x1_1", "x1_2", "x2_1", "x2_2"],
            Kind::Marg1 => &["x1_1", "x1_2", "x2"],
            Kind::Marg2 => &["x1", "x2_1", "x2_2"],
        }
    }

    /// The nontrivial position swaps defining symmetry for this kind.
    pub fn swaps(self) -> &'static [&'static [usize]] {
        match self {
            Kind::Joint => &[&[1, 0, 3, 2], &[1, 0, 2, 3], &[0, 1, 3, 2]],
            Kind::Marg1 => &[&[1, 0, 2]],
            Kind::Marg2 => &[&[0, 2, 1]],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Joint => "joint",
            Kind::Marg1 => "marg1",
            Kind::Marg2 => "marg2",
        }
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Kind::Joint),
            "marg1" => Ok(Kind::Marg1),
            "marg2" => Ok(Kind::Marg2),
            _ => Err(Error::InvalidArgument(format!("unknown kind `{s}`"))),
        }
    }
}

/// Checks that `t` has the axis structure of `kind` and returns the pair of
/// alphabets (X1, X2).
pub fn check_structure(t: &Tensor, kind: Kind) -> Result<(Alphabet, Alphabet)> {
    let ax = t.axes();
    let bad = || Error::Shape(format!("expected {} axis structure", kind.as_str()));
    match kind {
        Kind::Joint => {
            if ax.len() != 4 || ax[0].symbols != ax[1].symbols || ax[2].symbols != ax[3].symbols {
                return Err(bad());
            }
            Ok((ax[0].symbols.clone(), ax[2].symbols.clone()))
        }
        Kind::Marg1 => {
            if ax.len() != 3 || ax[0].symbols != ax[1].symbols {
                return Err(bad());
            }
            Ok((ax[0].symbols.clone(), ax[2].symbols.clone()))
        }
        Kind::Marg2 => {
            if ax.len() != 3 || ax[1].symbols != ax[2].symbols {
                return Err(bad());
            }
            Ok((ax[0].symbols.clone(), ax[1].symbols.clone()))
        }
    }
}

/// Projects onto the symmetric subspace by averaging over the swap group.
pub fn symmetrize(p: &Dist, kind: Kind) -> Result<Dist> {
    check_structure(p, kind)?;
    let mut acc = p.probs().to_vec();
    for perm in kind.swaps() {
        for (a, v) in acc.iter_mut().zip(p.swapped_values(perm)) {
            *a += v;
        }
    }
    let g = (kind.swaps().len() + 1) as f64;
    Dist::new(p.axes().to_vec(), acc.into_iter().map(|v| v / g).collect())
}

/// Same projection for a signed tensor.
pub fn symmetrize_tensor(t: &Tensor, kind: Kind) -> Result<Tensor> {
    check_structure(t, kind)?;
    let mut acc = t.values().to_vec();
    for perm in kind.swaps() {
        for (a, v) in acc.iter_mut().zip(t.swapped_values(perm)) {
            *a += v;
        }
    }
    let g = (kind.swaps().len() + 1) as f64;
    t.with_values(acc.into_iter().map(|v| v / g).collect())
}

/// `max |T - T∘perm|` entrywise.
pub fn swap_asymmetry(t: &Tensor, perm: &[usize]) -> f64 {
    t.values().iter().zip(t.swapped_values(perm)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    pub a12: f64,
    pub a1: f64,
    pub a2: f64,
    pub max: f64,
}

/// Asymmetry components of a 4-axis self-coupling.
pub fn asymmetry(p: &Dist) -> Result<AsymmetryReport> {
    check_structure(p, Kind::Joint)?;
    let a12 = swap_asymmetry(p, &[1, 0, 3, 2]);
    let a1 = swap_asymmetry(p, &[1, 0, 2, 3]);
    let a2 = swap_asymmetry(p, &[0, 1, 3, 2]);
    Ok(AsymmetryReport { a12, a1, a2, max: a12.max(a1).max(a2) })
}

/// Largest swap asymmetry for any kind (the `max` component for joint).
pub fn kind_asymmetry(t: &Tensor, kind: Kind) -> Result<f64> {
    check_structure(t, kind)?;
    Ok(kind.swaps().iter().map(|p| swap_asymmetry(t, p)).fold(0.0, f64::max))
}

/// KL divergence in bits; `+inf` when `p` is not absolutely continuous
/// with respect to `q`.
pub fn kl(p: &Dist, q: &Dist) -> Result<f64> {
    same_axes(p, q)?;
    let mut d = 0.0;
    for (&a, &b) in p.probs().iter().zip(q.probs()) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += a * (a / b).log2();
        }
    }
    Ok(d.max(0.0))
}

/// `sqrt((2 pi n)^|X| * prod P(x))`.
pub fn nu_poly(p: &Dist, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if p.probs().iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument("zero atom; restrict the alphabet to the support first".into()));
    }
    let k = p.len() as f64;
    let log = k * (2.0 * PI * n as f64).ln() + p.probs().iter().map(|v| v.ln()).sum::<f64>();
    Ok((0.5 * log).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bin(name: &str) -> Axis {
        Axis::new(name, Alphabet::binary())
    }

    #[test]
    fn alphabet_rejects_duplicates() {
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn word_parsing() {
        let b = Alphabet::binary();
        assert_eq!(b.parse_word("0110").unwrap(), vec![0, 1, 1, 0]);
        assert!(b.parse_word("012").is_err());
        let m = Alphabet::new(["lo", "hi"]).unwrap();
        assert_eq!(m.parse_word("hi lo hi").unwrap(), vec![1, 0, 1]);
        assert_eq!(m.format_word(&[1, 0]), "hi lo");
    }

    #[test]
    fn balanced_string_type() {
        let b = Alphabet::binary();
        let t = type_of_symbols(&["0101"], &[&b]).unwrap();
        assert_eq!(t.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn pair_type_direct_count() {
        let b = Alphabet::binary();
        let t = type_of_symbols(&["00", "01"], &[&b, &b]).unwrap();
        assert_eq!(t.probs(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn type_errors() {
        let b = Alphabet::binary();
        assert!(matches!(type_of_symbols(&["00", "011"], &[&b, &b]), Err(Error::Length(_))));
        assert!(matches!(type_of_symbols(&["0a"], &[&b]), Err(Error::UnknownSymbol(_))));
    }

    #[test]
    fn transposition() {
        let p = Dist::new(vec![bin("a"), bin("b")], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = p.transposed(&[1, 0]).unwrap();
        assert_eq!(t.axes()[0].name, "b");
        assert_eq!(t.probs(), &[0.1, 0.3, 0.2, 0.4]);
    }

    #[test]
    fn product_marginal_roundtrip() {
        let a = Dist::single("a", Alphabet::binary(), vec![0.3, 0.7]).unwrap();
        let b = Dist::single("b", Alphabet::indexed(3), vec![0.2, 0.5, 0.3]).unwrap();
        let ab = a.tensor_product(&b).unwrap();
        let back = ab.marginalize(&["a"]).unwrap();
        assert!(distance(&back, &a, Metric::L1).unwrap() < 1e-15);
        assert!(a.tensor_product(&a).is_err());
    }

    #[test]
    fn point_masses_multiply() {
        let a = Dist::point(vec![bin("a")], &[1]).unwrap();
        let b = Dist::point(vec![bin("b")], &[0]).unwrap();
        let ab = a.tensor_product(&b).unwrap();
        assert_eq!(ab.probs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_marginal() {
        let u = Dist::uniform(vec![bin("a"), bin("b")]).unwrap();
        assert_eq!(u.marginalize(&["a"]).unwrap().probs(), &[0.5, 0.5]);
        assert!(matches!(u.marginalize(&["zz"]), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn abs_marginal_of_signed_tensor() {
        let t = Tensor::new(vec![bin("a"), bin("b")], vec![0.25, -0.25, -0.25, 0.25]).unwrap();
        assert_eq!(t.marginalize_abs(&["a"]).unwrap().values(), &[0.5, 0.5]);
    }

    #[test]
    fn disjoint_points_distance() {
        let a = Dist::point(vec![bin("a")], &[0]).unwrap();
        let b = Dist::point(vec![bin("a")], &[1]).unwrap();
        assert_eq!(distance(&a, &b, Metric::L1).unwrap(), 2.0);
        assert_eq!(distance(&a, &b, Metric::Linf).unwrap(), 1.0);
        assert_eq!(distance(&a, &a, Metric::L1).unwrap(), 0.0);
    }

    #[test]
    fn net_small_cases() {
        let n = build_net(2, 0.5).unwrap();
        assert!(n.len() <= 4);
        let n1 = build_net(1, 0.3).unwrap();
        assert_eq!(n1.len(), 1);
        assert_eq!(n1[0].probs(), &[1.0]);
        assert!(build_net(3, 0.1).unwrap().len() <= 3375);
        assert!(build_net(2, 0.0).is_err());
        assert!(build_net(2, -1.0).is_err());
    }

    #[test]
    fn lattice_rounding_radius() {
        let p = [0.34, 0.33, 0.33];
        let c = round_to_lattice(&p, 2);
        assert_eq!(c.iter().sum::<u64>(), 2);
        for (x, ci) in p.iter().zip(&c) {
            assert!((x - *ci as f64 / 2.0).abs() <= (1.0 - 1.0 / 3.0) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn symmetrize_point_mass() {
        let ax = vec![bin("a1"), bin("a2"), bin("b1"), bin("b2")];
        let p = Dist::point(ax, &[0, 1, 0, 1]).unwrap();
        let s = symmetrize(&p, Kind::Joint).unwrap();
        for idx in [[0, 1, 0, 1], [1, 0, 1, 0], [1, 0, 0, 1], [0, 1, 1, 0]] {
            assert_eq!(s.get(&idx), 0.25);
        }
    }

    #[test]
    fn asymmetry_of_swapped_point() {
        let ax = vec![bin("a1"), bin("a2"), bin("b1"), bin("b2")];
        let p = Dist::point(ax, &[0, 1, 1, 1]).unwrap();
        let r = asymmetry(&p).unwrap();
        assert_eq!(r.a1, 1.0);
        assert_eq!(r.a2, 0.0);
        assert_eq!(r.max, 1.0);
    }

    #[test]
    fn structure_is_checked() {
        let p = Dist::uniform(vec![bin("a"), bin("b")]).unwrap();
        assert!(symmetrize(&p, Kind::Joint).is_err());
        assert!(asymmetry(&p).is_err());
    }

    #[test]
    fn binary_divergences() {
        let b = Alphabet::binary();
        let p = Dist::single("x", b.clone(), vec![0.3, 0.7]).unwrap();
        let h = Dist::single("x", b.clone(), vec![0.5, 0.5]).unwrap();
        let d = Dist::single("x", b, vec![1.0, 0.0]).unwrap();
        let expect = 1.0 + 0.3 * 0.3f64.log2() + 0.7 * 0.7f64.log2();
        assert!((kl(&p, &h).unwrap() - expect).abs() < 1e-12);
        assert!((kl(&p, &h).unwrap() - 0.1187).abs() < 1e-4);
        assert!((kl(&d, &h).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(kl(&h, &h).unwrap(), 0.0);
        assert!(kl(&h, &d).unwrap().is_infinite());
    }

    #[test]
    fn nu_closed_form() {
        let h = Dist::single("x", Alphabet::binary(), vec![0.5, 0.5]).unwrap();
        assert!((nu_poly(&h, 10).unwrap() - 10.0 * PI).abs() < 1e-9);
        let r = nu_poly(&h, 40).unwrap() / nu_poly(&h, 20).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let d = Dist::single("x", Alphabet::binary(), vec![1.0, 0.0]).unwrap();
        assert!(nu_poly(&d, 10).is_err());
    }

    #[test]
    fn json_shape() {
        let p = Dist::single("x", Alphabet::binary(), vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"axes":[{"name":"x","symbols":["0","1"]}],"values":[0.25,0.75]}"#);
        let back: Dist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"axes":[{"name":"x","symbols":["0","1"]}],"values":[0.25,0.5]}"#;
        assert!(serde_json::from_str::<Dist>(bad).is_err());
    }
}
