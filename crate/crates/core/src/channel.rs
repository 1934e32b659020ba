//! Channel specifications, linear constraint sets and code pairs.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{Cmp, Lp, LpOutcome};
use crate::prob::{Alphabet, Axis, Dist, JointType};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn parse(s: &str) -> Option<Sense> {
        match s {
            "<=" | "≤" => Some(Sense::Le),
            "=" | "==" => Some(Sense::Eq),
            ">=" | "≥" => Some(Sense::Ge),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

pub(crate) type Q = Ratio<i128>;

pub(crate) fn exact(x: f64) -> Result<Q> {
    let r = Ratio::<i64>::approximate_float(x)
        .ok_or_else(|| Error::Channel(format!("coefficient {x} is not representable")))?;
    Ok(Q::new(*r.numer() as i128, *r.denom() as i128))
}

/// One half-space (or hyperplane) `sum_a coeffs[a] P(a) <sense> rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
    exact_coeffs: Vec<Q>,
    exact_rhs: Q,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Result<Self> {
        if coeffs.iter().chain(std::iter::once(&rhs)).any(|v| !v.is_finite()) {
            return Err(Error::Channel("non-finite constraint data".into()));
        }
        let exact_coeffs = coeffs.iter().map(|&c| exact(c)).collect::<Result<_>>()?;
        let exact_rhs = exact(rhs)?;
        Ok(LinearConstraint { coeffs, sense, rhs, exact_coeffs, exact_rhs })
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.coeffs.iter().zip(p).map(|(a, b)| a * b).sum()
    }

    fn holds(&self, lhs: f64, tol: f64) -> bool {
        match self.sense {
            Sense::Le => lhs <= self.rhs + tol,
            Sense::Ge => lhs >= self.rhs - tol,
            Sense::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }

    fn holds_counts(&self, counts: &[u64], n: u64) -> bool {
        let mut lhs = Q::from_integer(0);
        for (a, &c) in self.exact_coeffs.iter().zip(counts) {
            if c > 0 {
                lhs += *a * Q::from_integer(c as i128);
            }
        }
        let rhs = self.exact_rhs * Q::from_integer(n as i128);
        match self.sense {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }
}

/// A polyhedral subset of the simplex over one alphabet. Empty list = whole simplex.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ConstraintSet {
    pub rows: Vec<LinearConstraint>,
}

impl ConstraintSet {
    pub fn full() -> Self {
        ConstraintSet { rows: Vec::new() }
    }

    pub fn is_full(&self) -> bool {
        self.rows.is_empty()
    }

    /// Membership of a probability vector, within `tol` per row.
    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|r| r.holds(r.eval(p), tol))
    }

    /// Exact membership of the type `counts / n`.
    pub fn contains_counts(&self, counts: &[u64], n: u64) -> bool {
        self.rows.iter().all(|r| r.holds_counts(counts, n))
    }

    pub fn contains_type(&self, t: &JointType) -> bool {
        self.contains_counts(&t.counts, t.n)
    }

    /// All rows as `a·p <= b`.
    pub fn le_rows(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::new();
        for r in &self.rows {
            let neg: Vec<f64> = r.coeffs.iter().map(|c| -c).collect();
            match r.sense {
                Sense::Le => out.push((r.coeffs.clone(), r.rhs)),
                Sense::Ge => out.push((neg, -r.rhs)),
                Sense::Eq => {
                    out.push((r.coeffs.clone(), r.rhs));
                    out.push((neg, -r.rhs));
                }
            }
        }
        out
    }

    /// Whether the set meets the simplex on `k` symbols.
    pub fn is_nonempty(&self, k: usize) -> Result<bool> {
        if self.rows.is_empty() {
            return Ok(true);
        }
        let mut lp = Lp::minimize();
        let v: Vec<_> = (0..k).map(|_| lp.nonneg(0.0)).collect();
        lp.constraint(&v.iter().map(|&x| (x, 1.0)).collect::<Vec<_>>(), Cmp::Eq, 1.0);
        for r in &self.rows {
            let cmp = match r.sense {
                Sense::Le => Cmp::Le,
                Sense::Eq => Cmp::Eq,
                Sense::Ge => Cmp::Ge,
            };
            let terms: Vec<_> = v.iter().zip(&r.coeffs).map(|(&x, &c)| (x, c)).collect();
            lp.constraint(&terms, cmp, r.rhs);
        }
        Ok(matches!(lp.solve()?, LpOutcome::Optimal(_)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub coeffs: BTreeMap<String, f64>,
    pub sense: String,
    pub rhs: f64,
}

/// Raw channel document, before validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDoc {
    #[serde(rename = "X1")]
    pub x1: Vec<String>,
    #[serde(rename = "X2")]
    pub x2: Vec<String>,
    #[serde(rename = "S")]
    pub s: Vec<String>,
    #[serde(rename = "Y")]
    pub y: Vec<String>,
    #[serde(rename = "W")]
    pub w: BTreeMap<String, String>,
    #[serde(default)]
    pub lambda1: Vec<ConstraintDoc>,
    #[serde(default)]
    pub lambda2: Vec<ConstraintDoc>,
    #[serde(default)]
    pub lambda: Vec<ConstraintDoc>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_alphabet(name: &str, symbols: &[String], out: &mut Vec<String>) {
    if symbols.is_empty() {
        out.push(format!("{name}: empty alphabet"));
    }
    let mut seen = std::collections::HashSet::new();
    for s in symbols {
        if s.is_empty() {
            out.push(format!("{name}: empty symbol label"));
        } else if s.contains(',') {
            out.push(format!("{name}: symbol `{s}` contains a comma"));
        }
        if !seen.insert(s) {
            out.push(format!("{name}: duplicate symbol `{s}`"));
        }
    }
}

fn build_constraints(label: &str, docs: &[ConstraintDoc], alphabet: &[String]) -> std::result::Result<ConstraintSet, String> {
    let mut rows = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        let sense = Sense::parse(&d.sense).ok_or_else(|| format!("{label}[{i}]: unknown sense `{}`", d.sense))?;
        let mut coeffs = vec![0.0; alphabet.len()];
        for (sym, c) in &d.coeffs {
            let k = alphabet
                .iter()
                .position(|s| s == sym)
                .ok_or_else(|| format!("{label}[{i}]: symbol `{sym}` not in alphabet"))?;
            coeffs[k] = *c;
        }
        let row = LinearConstraint::new(coeffs, sense, d.rhs).map_err(|e| format!("{label}[{i}]: {e}"))?;
        rows.push(row);
    }
    Ok(ConstraintSet { rows })
}

/// Lists every violation of the channel assumptions: finite nonempty
/// alphabets without duplicates, a total deterministic table into `Y`, and
/// nonempty constraint sets. An empty report means the document is admissible.
pub fn validate_channel(doc: &ChannelDoc) -> ValidationReport {
    let mut v = Vec::new();
    check_alphabet("X1", &doc.x1, &mut v);
    check_alphabet("X2", &doc.x2, &mut v);
    check_alphabet("S", &doc.s, &mut v);
    check_alphabet("Y", &doc.y, &mut v);
    if !v.is_empty() {
        return ValidationReport { violations: v };
    }
    let mut seen = vec![false; doc.x1.len() * doc.x2.len() * doc.s.len()];
    for (key, out) in &doc.w {
        let parts: Vec<&str> = key.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            v.push(format!("W key `{key}` is not of the form x1,x2,s"));
            continue;
        }
        let a = doc.x1.iter().position(|s| s == parts[0]);
        let b = doc.x2.iter().position(|s| s == parts[1]);
        let c = doc.s.iter().position(|s| s == parts[2]);
        match (a, b, c) {
            (Some(a), Some(b), Some(c)) => seen[(a * doc.x2.len() + b) * doc.s.len() + c] = true,
            _ => v.push(format!("W key `{key}`: symbol not in alphabet")),
        }
        if !doc.y.contains(out) {
            v.push(format!("W value `{out}` for `{key}`: symbol not in Y"));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let c = missing % doc.s.len();
        let b = (missing / doc.s.len()) % doc.x2.len();
        let a = missing / (doc.s.len() * doc.x2.len());
        v.push(format!("W not total: missing `{},{},{}`", doc.x1[a], doc.x2[b], doc.s[c]));
    }
    for (label, docs, alph, what) in [
        ("lambda1", &doc.lambda1, &doc.x1, "input constraint 1"),
        ("lambda2", &doc.lambda2, &doc.x2, "input constraint 2"),
        ("lambda", &doc.lambda, &doc.s, "state constraint"),
    ] {
        match build_constraints(label, docs, alph) {
            Err(e) => v.push(e),
            Ok(set) => match set.is_nonempty(alph.len()) {
                Ok(true) => {}
                Ok(false) => v.push(format!("infeasible {what}: empty feasible set")),
                Err(e) => v.push(format!("{label}: {e}")),
            },
        }
    }
    ValidationReport { violations: v }
}

/// A validated deterministic omniscient adversarial MAC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct ChannelSpec {
    pub x1: Alphabet,
    pub x2: Alphabet,
    pub s: Alphabet,
    pub y: Alphabet,
    w: Vec<usize>,
    pub lambda1: ConstraintSet,
    pub lambda2: ConstraintSet,
    pub lambda: ConstraintSet,
}

impl TryFrom<ChannelDoc> for ChannelSpec {
    type Error = Error;
    fn try_from(doc: ChannelDoc) -> Result<Self> {
        ChannelSpec::from_doc(&doc)
    }
}

impl From<ChannelSpec> for ChannelDoc {
    fn from(spec: ChannelSpec) -> Self {
        spec.to_doc()
    }
}

fn constraint_docs(set: &ConstraintSet, alphabet: &Alphabet) -> Vec<ConstraintDoc> {
    set.rows
        .iter()
        .map(|r| ConstraintDoc {
            coeffs: r
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, c)| (alphabet.symbol(i).to_string(), *c))
                .collect(),
            sense: r.sense.as_str().to_string(),
            rhs: r.rhs,
        })
        .collect()
}

impl ChannelSpec {
    pub fn from_doc(doc: &ChannelDoc) -> Result<Self> {
        let report = validate_channel(doc);
        if !report.is_admissible() {
            return Err(Error::Channel(report.violations.join("; ")));
        }
        let x1 = Alphabet::new(doc.x1.clone())?;
        let x2 = Alphabet::new(doc.x2.clone())?;
        let s = Alphabet::new(doc.s.clone())?;
        let y = Alphabet::new(doc.y.clone())?;
        let mut w = vec![0; x1.size() * x2.size() * s.size()];
        for (key, out) in &doc.w {
            let parts: Vec<&str> = key.split(',').map(str::trim).collect();
            let a = x1.index_of(parts[0]).unwrap();
            let b = x2.index_of(parts[1]).unwrap();
            let c = s.index_of(parts[2]).unwrap();
            w[(a * x2.size() + b) * s.size() + c] = y.index_of(out).unwrap();
        }
        let lambda1 = build_constraints("lambda1", &doc.lambda1, &doc.x1).map_err(Error::Channel)?;
        let lambda2 = build_constraints("lambda2", &doc.lambda2, &doc.x2).map_err(Error::Channel)?;
        let lambda = build_constraints("lambda", &doc.lambda, &doc.s).map_err(Error::Channel)?;
        Ok(ChannelSpec { x1, x2, s, y, w, lambda1, lambda2, lambda })
    }

    /// Builds a spec from a closure table.
    pub fn from_fn(
        x1: Alphabet,
        x2: Alphabet,
        s: Alphabet,
        y: Alphabet,
        f: impl Fn(usize, usize, usize) -> usize,
        lambda1: ConstraintSet,
        lambda2: ConstraintSet,
        lambda: ConstraintSet,
    ) -> Result<Self> {
        let mut w = Vec::with_capacity(x1.size() * x2.size() * s.size());
        for a in 0..x1.size() {
            for b in 0..x2.size() {
                for c in 0..s.size() {
                    w.push(f(a, b, c));
                }
            }
        }
        let spec = ChannelSpec { x1, x2, s, y, w, lambda1, lambda2, lambda };
        let report = validate_channel(&spec.to_doc());
        if !report.is_admissible() {
            return Err(Error::Channel(report.violations.join("; ")));
        }
        Ok(spec)
    }

    pub fn to_doc(&self) -> ChannelDoc {
        let mut w = BTreeMap::new();
        for a in 0..self.x1.size() {
            for b in 0..self.x2.size() {
                for c in 0..self.s.size() {
                    let key = format!("{},{},{}", self.x1.symbol(a), self.x2.symbol(b), self.s.symbol(c));
                    w.insert(key, self.y.symbol(self.w(a, b, c)).to_string());
                }
            }
        }
        ChannelDoc {
            x1: self.x1.symbols().to_vec(),
            x2: self.x2.symbols().to_vec(),
            s: self.s.symbols().to_vec(),
            y: self.y.symbols().to_vec(),
            w,
            lambda1: constraint_docs(&self.lambda1, &self.x1),
            lambda2: constraint_docs(&self.lambda2, &self.x2),
            lambda: constraint_docs(&self.lambda, &self.s),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("channel serializes")
    }

    #[inline]
    pub fn w(&self, x1: usize, x2: usize, s: usize) -> usize {
        self.w[(x1 * self.x2.size() + x2) * self.s.size() + s]
    }

    /// Whether a state sequence has an admissible type (exact arithmetic).
    pub fn admissible_state(&self, s: &[usize]) -> bool {
        let mut counts = vec![0u64; self.s.size()];
        for &c in s {
            counts[c] += 1;
        }
        self.lambda.contains_counts(&counts, s.len() as u64)
    }

    /// Whether an input distribution pair lies in the input constraint sets.
    pub fn inputs_feasible(&self, p1: &Dist, p2: &Dist) -> bool {
        p1.len() == self.x1.size()
            && p2.len() == self.x2.size()
            && self.lambda1.contains(p1.probs(), 1e-9)
            && self.lambda2.contains(p2.probs(), 1e-9)
    }

    pub fn x1_axis(&self, name: &str) -> Axis {
        Axis::new(name, self.x1.clone())
    }

    pub fn x2_axis(&self, name: &str) -> Axis {
        Axis::new(name, self.x2.clone())
    }
}

/// Parses and validates a channel document.
pub fn parse_channel(text: &[u8]) -> Result<ChannelSpec> {
    let doc: ChannelDoc = serde_json::from_slice(text)?;
    ChannelSpec::from_doc(&doc)
}

/// Componentwise channel output.
pub fn apply_channel(spec: &ChannelSpec, x1: &[usize], x2: &[usize], s: &[usize]) -> Result<Vec<usize>> {
    if x1.len() != x2.len() || x1.len() != s.len() {
        return Err(Error::Length(format!("inputs of lengths {}, {}, {}", x1.len(), x2.len(), s.len())));
    }
    let ok = x1.iter().all(|&a| a < spec.x1.size())
        && x2.iter().all(|&b| b < spec.x2.size())
        && s.iter().all(|&c| c < spec.s.size());
    if !ok {
        return Err(Error::UnknownSymbol("index outside alphabet".into()));
    }
    Ok((0..x1.len()).map(|j| spec.w(x1[j], x2[j], s[j])).collect())
}

/// Binary adder channel `y = x1 xor x2 xor s` with noise weight at most `p`.
pub fn builtin_xor_mac(p: f64) -> Result<ChannelSpec> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0,1], got {p}")));
    }
    let b = Alphabet::binary();
    let lambda = ConstraintSet { rows: vec![LinearConstraint::new(vec![0.0, 1.0], Sense::Le, p)?] };
    ChannelSpec::from_fn(
        b.clone(),
        b.clone(),
        b.clone(),
        b,
        |a, c, s| a ^ c ^ s,
        ConstraintSet::full(),
        ConstraintSet::full(),
        lambda,
    )
}

/// Two codebooks of a common blocklength, codewords index-encoded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodePair {
    pub n: usize,
    pub book1: Vec<Vec<usize>>,
    pub book2: Vec<Vec<usize>>,
}

fn has_repeats(book: &[Vec<usize>]) -> bool {
    let mut sorted: Vec<&Vec<usize>> = book.iter().collect();
    sorted.sort();
    sorted.windows(2).any(|w| w[0] == w[1])
}

impl CodePair {
    /// Validated code pair: equal lengths, nonempty books, distinct codewords.
    pub fn new(book1: Vec<Vec<usize>>, book2: Vec<Vec<usize>>) -> Result<Self> {
        let c = CodePair::from_draws(book1, book2)?;
        if has_repeats(&c.book1) || has_repeats(&c.book2) {
            return Err(Error::InvalidArgument("repeated codeword within a book".into()));
        }
        Ok(c)
    }

    /// As [`CodePair::new`] but tolerates repeated codewords, as produced by
    /// random sampling before expurgation.
    pub fn from_draws(book1: Vec<Vec<usize>>, book2: Vec<Vec<usize>>) -> Result<Self> {
        if book1.is_empty() || book2.is_empty() {
            return Err(Error::InvalidArgument("empty codebook".into()));
        }
        let n = book1[0].len();
        if n == 0 {
            return Err(Error::InvalidArgument("zero blocklength".into()));
        }
        if book1.iter().chain(&book2).any(|w| w.len() != n) {
            return Err(Error::Length("codewords of different lengths".into()));
        }
        Ok(CodePair { n, book1, book2 })
    }

    pub fn m1(&self) -> usize {
        self.book1.len()
    }

    pub fn m2(&self) -> usize {
        self.book2.len()
    }

    pub fn has_repeats(&self) -> bool {
        has_repeats(&self.book1) || has_repeats(&self.book2)
    }

    /// `(log M1 / (n log|X1|), log M2 / (n log|X2|))`.
    pub fn rates(&self, x1: &Alphabet, x2: &Alphabet) -> (f64, f64) {
        let r = |m: usize, k: usize| {
            if k <= 1 {
                0.0
            } else {
                (m as f64).ln() / (self.n as f64 * (k as f64).ln())
            }
        };
        (r(self.m1(), x1.size()), r(self.m2(), x2.size()))
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookHeader {
    n: usize,
    alphabet: Vec<String>,
    #[serde(rename = "type")]
    composition: Option<BTreeMap<String, u64>>,
}

/// Renders a codebook: a JSON header line followed by one codeword per line.
/// The header's `type` field holds the common composition when every
/// codeword has the same one.
pub fn write_codebook(book: &[Vec<usize>], alphabet: &Alphabet) -> String {
    let n = book.first().map_or(0, Vec::len);
    let count = |w: &Vec<usize>| {
        let mut c = vec![0u64; alphabet.size()];
        for &x in w {
            c[x] += 1;
        }
        c
    };
    let composition = book.first().map(count).filter(|c0| book.iter().all(|w| &count(w) == c0)).map(|c0| {
        c0.into_iter().enumerate().map(|(i, c)| (alphabet.symbol(i).to_string(), c)).collect()
    });
    let header = CodebookHeader { n, alphabet: alphabet.symbols().to_vec(), composition };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for w in book {
        out.push_str(&alphabet.format_word(w));
        out.push('\n');
    }
    out
}

/// Parses a codebook written by [`write_codebook`].
pub fn read_codebook(text: &str) -> Result<(Alphabet, Vec<Vec<usize>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::InvalidArgument("empty codebook file".into()))?;
    let header: CodebookHeader = serde_json::from_str(head)?;
    let alphabet = Alphabet::new(header.alphabet)?;
    let mut book = Vec::new();
    for l in lines {
        let w = alphabet.parse_word(l)?;
        if w.len() != header.n {
            return Err(Error::Length(format!("codeword `{l}` has length {}, header says {}", w.len(), header.n)));
        }
        book.push(w);
    }
    if book.is_empty() {
        return Err(Error::InvalidArgument("codebook has no codewords".into()));
    }
    Ok((alphabet, book))
}
