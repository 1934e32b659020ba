//! Thin wrapper over the simplex solver.
//!
//! Every oracle in the crate is phrased as a small dense LP. This module keeps
//! the solver behind one interface so the rest of the code never touches the
//! backend types.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
}

impl LpSolution {
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }
}

/// A minimization (or maximization) problem under construction.
pub struct Lp {
    direction: OptimizationDirection,
    vars: Vec<(f64, f64, f64)>,
    rows: Vec<(Vec<(usize, f64)>, Cmp, f64)>,
}

impl Lp {
    pub fn minimize() -> Self {
        Lp { direction: OptimizationDirection::Minimize, vars: Vec::new(), rows: Vec::new() }
    }

    pub fn maximize() -> Self {
        Lp { direction: OptimizationDirection::Maximize, vars: Vec::new(), rows: Vec::new() }
    }

    /// Adds a variable with objective coefficient `obj` and bounds `[lo, hi]`.
    /// Infinite bounds are allowed.
    pub fn var(&mut self, obj: f64, lo: f64, hi: f64) -> Var {
        self.vars.push((obj, lo, hi));
        Var(self.vars.len() - 1)
    }

    pub fn nonneg(&mut self, obj: f64) -> Var {
        self.var(obj, 0.0, f64::INFINITY)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn constraint(&mut self, terms: &[(Var, f64)], cmp: Cmp, rhs: f64) {
        let expr: Vec<(usize, f64)> = terms.iter().filter(|(_, c)| *c != 0.0).map(|(v, c)| (v.0, *c)).collect();
        self.rows.push((expr, cmp, rhs));
    }

    fn build(&self, split_equalities: bool) -> (Problem, Vec<Variable>) {
        let mut problem = Problem::new(self.direction);
        let vars: Vec<Variable> = self.vars.iter().map(|&(obj, lo, hi)| problem.add_var(obj, (lo, hi))).collect();
        let add = |problem: &mut Problem, expr: &[(usize, f64)], op: ComparisonOp, rhs: f64| {
            if expr.is_empty() {
                // microlp rejects empty rows; encode the constant row on a fixed dummy
                let z = problem.add_var(0.0, (0.0, 0.0));
                problem.add_constraint([(z, 1.0)], op, rhs);
            } else {
                problem.add_constraint(expr.iter().map(|&(v, c)| (vars[v], c)), op, rhs);
            }
        };
        for (expr, cmp, rhs) in &self.rows {
            match cmp {
                Cmp::Le => add(&mut problem, expr, ComparisonOp::Le, *rhs),
                Cmp::Ge => add(&mut problem, expr, ComparisonOp::Ge, *rhs),
                Cmp::Eq if split_equalities => {
                    add(&mut problem, expr, ComparisonOp::Le, *rhs);
                    add(&mut problem, expr, ComparisonOp::Ge, *rhs);
                }
                Cmp::Eq => add(&mut problem, expr, ComparisonOp::Eq, *rhs),
            }
        }
        (problem, vars)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        match self.solve_with(false) {
            // redundant equality rows can leave the backend with a singular basis
            Err(Error::Lp(_)) => self.solve_with(true),
            other => other,
        }
    }

    fn solve_with(&self, split_equalities: bool) -> Result<LpOutcome> {
        let (problem, vars) = self.build(split_equalities);
        match problem.solve() {
            Ok(outcome) => match outcome.into_solution() {
                Ok(sol) => {
                    let values = vars.iter().map(|v| sol.var_value_raw(*v)).collect();
                    Ok(LpOutcome::Optimal(LpSolution { objective: sol.objective(), values }))
                }
                Err(_) => Err(Error::Lp("solve interrupted".into())),
            },
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }

    /// Solves and insists on an optimum.
    pub fn solve_optimal(&self) -> Result<LpSolution> {
        match self.solve()? {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(Error::Lp("unexpectedly infeasible".into())),
            LpOutcome::Unbounded => Err(Error::Lp("unexpectedly unbounded".into())),
        }
    }
}
