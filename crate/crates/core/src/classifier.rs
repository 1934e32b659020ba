//! Five-case shape classification of the capacity region.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::good::{rescore, search_marginal_good, search_simultaneously_good, GoodSearch};
use crate::prob::{compositions, Dist, Kind};

pub const DEFAULT_BUDGET: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub verdict: bool,
    /// Positive: distance from the witness to the nearest confusability set.
    /// Negative: certified depth of the least-confusable candidate.
    pub margin: f64,
    pub boundary_uncertain: bool,
    pub search: GoodSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeVerdict {
    pub case: u8,
    /// Some predicate is within `2 eta` of flipping; the case is reported
    /// at resolution only.
    pub boundary_uncertain: bool,
    /// Simultaneously good set nonempty.
    pub g: Predicate,
    /// `G1 \ K1` nonempty.
    pub g1: Predicate,
    /// `G2 \ K2` nonempty.
    pub g2: Predicate,
    pub eta: f64,
    pub budget: usize,
    pub seed: u64,
    pub p1: Dist,
    pub p2: Dist,
}

impl ShapeVerdict {
    pub fn label(&self) -> String {
        if self.boundary_uncertain {
            format!("boundary-uncertain (Case {} at eta = {})", self.case, self.eta)
        } else {
            format!("Case {}", self.case)
        }
    }
}

/// Case number from the three predicates.
pub fn case_of(g: bool, g1: bool, g2: bool) -> Result<u8> {
    if g && !(g1 && g2) {
        return Err(Error::Inconsistent(
            "simultaneously good set nonempty but a marginal predicate is false; resolution too coarse".into(),
        ));
    }
    Ok(match (g, g1, g2) {
        (true, _, _) => 1,
        (false, true, true) => 2,
        (false, true, false) => 3,
        (false, false, true) => 4,
        (false, false, false) => 5,
    })
}

fn predicate(search: GoodSearch, eta: f64) -> Predicate {
    Predicate { verdict: search.found, margin: search.margin, boundary_uncertain: search.margin.abs() < 2.0 * eta, search }
}

/// Projects a joint witness to a marginal kind.
fn marginal_of(p: &Dist, kind: Kind) -> Result<Dist> {
    let keep: &[&str] = match kind {
        Kind::Marg1 => &["x1_1", "x1_2", "x2_1"],
        Kind::Marg2 => &["x1_1", "x2_1", "x2_2"],
        Kind::Joint => return Ok(p.clone()),
    };
    p.marginalize(keep)?.renamed(kind.axis_names())
}

pub fn classify_shape(spec: &ChannelSpec, p1: &Dist, p2: &Dist, eta: f64, budget: usize, seed: u64) -> Result<ShapeVerdict> {
    let g = search_simultaneously_good(spec, p1, p2, eta, budget, seed)?;
    let mut m1 = search_marginal_good(spec, p1, p2, Kind::Marg1, eta, budget, seed)?;
    let mut m2 = search_marginal_good(spec, p1, p2, Kind::Marg2, eta, budget, seed)?;
    // a simultaneous witness projects onto marginal witnesses
    if g.found {
        let w = g.witness.as_ref().expect("found search carries a witness");
        for (m, kind) in [(&mut m1, Kind::Marg1), (&mut m2, Kind::Marg2)] {
            let proj = rescore(spec, &marginal_of(w, kind)?, &[kind], eta)?;
            if proj.found && (!m.found || proj.margin > m.margin) {
                *m = GoodSearch { candidates: m.candidates + 1, ..proj };
            }
        }
    }
    let case = case_of(g.found, m1.found, m2.found)?;
    let (g, g1, g2) = (predicate(g, eta), predicate(m1, eta), predicate(m2, eta));
    Ok(ShapeVerdict {
        case,
        boundary_uncertain: g.boundary_uncertain || g1.boundary_uncertain || g2.boundary_uncertain,
        g,
        g1,
        g2,
        eta,
        budget,
        seed,
        p1: p1.clone(),
        p2: p2.clone(),
    })
}

/// Re-runs the confusability checks on the stored witnesses and confirms
/// that every predicate and margin is reproduced exactly.
pub fn replay(spec: &ChannelSpec, v: &ShapeVerdict) -> Result<bool> {
    for p in [&v.g, &v.g1, &v.g2] {
        let Some(w) = &p.search.witness else {
            return Ok(false);
        };
        let r = rescore(spec, w, &p.search.kinds, v.eta)?;
        if r.found != p.verdict || r.margins != p.search.margins || r.margin != p.margin {
            return Ok(false);
        }
    }
    Ok(case_of(v.g.verdict, v.g1.verdict, v.g2.verdict)? == v.case)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScan {
    /// Best case found; 3 and 4 are incomparable and both are listed on a tie.
    pub best_cases: Vec<u8>,
    /// Indices into `table` attaining a best case.
    pub best: Vec<usize>,
    pub table: Vec<ShapeVerdict>,
}

fn rank(case: u8) -> u8 {
    match case {
        1 => 0,
        2 => 1,
        3 | 4 => 2,
        _ => 3,
    }
}

fn simplex_grid(k: usize, step: f64) -> Vec<Vec<f64>> {
    let m = (1.0 / step).round().max(1.0) as u64;
    compositions(m, k).into_iter().map(|c| c.into_iter().map(|x| x as f64 / m as f64).collect()).collect()
}

/// Classifies every feasible input pair on a grid.
pub fn classify_over_inputs(spec: &ChannelSpec, grid_step: f64, eta: f64, budget: usize, seed: u64) -> Result<InputScan> {
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::InvalidArgument(format!("grid_step must lie in (0,1], got {grid_step}")));
    }
    let mut pairs = Vec::new();
    for u in simplex_grid(spec.x1.size(), grid_step) {
        for v in simplex_grid(spec.x2.size(), grid_step) {
            let p1 = Dist::new(vec![spec.x1_axis("x1")], u.clone())?;
            let p2 = Dist::new(vec![spec.x2_axis("x2")], v)?;
            if spec.inputs_feasible(&p1, &p2) {
                pairs.push((p1, p2));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Precondition("no feasible input pair on the grid".into()));
    }
    let table: Vec<ShapeVerdict> =
        pairs.par_iter().map(|(p1, p2)| classify_shape(spec, p1, p2, eta, budget, seed)).collect::<Result<_>>()?;
    let top = table.iter().map(|v| rank(v.case)).min().expect("nonempty table");
    let best: Vec<usize> = (0..table.len()).filter(|&i| rank(table[i].case) == top).collect();
    let mut best_cases: Vec<u8> = best.iter().map(|&i| table[i].case).collect();
    best_cases.sort_unstable();
    best_cases.dedup();
    Ok(InputScan { best_cases, best, table })
}
