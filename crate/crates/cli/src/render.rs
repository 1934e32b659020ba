use std::fmt::Write;

use omac::achieve::{InnerBoundReport, InnerCase};
use omac::classifier::{InputScan, Predicate, ShapeVerdict};
use omac::confusability::ZeroErrorReport;
use omac::converse::{SearchCertificate, SearchOutcome};

fn mark(p: &Predicate) -> String {
    let s = if p.verdict { "nonempty" } else { "empty" };
    let flag = if p.boundary_uncertain { " ?" } else { "" };
    format!("{s:>8} ({:+.4}){flag}", p.margin)
}

pub fn shape(v: &ShapeVerdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22} {:<22} {:<22} case", "G12 \\ K12", "G1 \\ K1", "G2 \\ K2");
    let _ = writeln!(s, "{:<22} {:<22} {:<22} {}", mark(&v.g), mark(&v.g1), mark(&v.g2), v.case);
    let _ = writeln!(s, "{} (eta = {}, budget = {}, seed = {})", v.label(), v.eta, v.budget, v.seed);
    s
}

pub fn scan(s: &InputScan) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<28} {:<28} case", "P1", "P2");
    for v in &s.table {
        let _ = writeln!(out, "{:<28} {:<28} {}", format!("{:.3?}", v.p1.probs()), format!("{:.3?}", v.p2.probs()), v.label());
    }
    let _ = writeln!(out, "best case(s): {:?}", s.best_cases);
    out
}

pub fn verify(r: &ZeroErrorReport) -> String {
    match &r.violation {
        None => format!("zero error: all {} tuples are distinguishable\n", r.tuples_checked),
        Some(v) => format!(
            "confusable {} tuple: book 1 {:?}, book 2 {:?}\njammer sequences s1 = {:?}, s2 = {:?}\n",
            v.kind.as_str(),
            v.book1,
            v.book2,
            v.s1,
            v.s2
        ),
    }
}

fn bits(v: Option<f64>) -> String {
    v.map_or("inf".into(), |x| format!("{x:.6}"))
}

pub fn inner(r: &InnerBoundReport) -> String {
    let mut s = String::new();
    let case = match r.case {
        InnerCase::Both => "both users",
        InnerCase::User1 => "user 1 only",
        InnerCase::User2 => "user 2 only",
    };
    let _ = writeln!(s, "regime: {case}");
    let _ = writeln!(s, "D = {}  D1 = {}  D2 = {}  D_hat = {}  (bits)", bits(r.d), bits(r.d1), bits(r.d2), bits(r.d_hat));
    for q in &r.region {
        let _ = writeln!(s, "  {} R1 + {} R2 <= {:.6}", q.a1, q.a2, q.rhs);
    }
    s
}

pub fn search(c: &SearchCertificate) -> String {
    let what = match &c.outcome {
        SearchOutcome::Found { code } => format!("found a zero-error pair: {:?} / {:?}", code.book1, code.book2),
        SearchOutcome::ExhaustivelyNone => "no zero-error pair exists".into(),
        SearchOutcome::Inconclusive => format!("budget of {} checks exhausted", c.budget),
    };
    format!("n = {}, (M1, M2) = ({}, {}): {what} [{} checks, {}]\n", c.n, c.m1, c.m2, c.nodes, c.canonicalization)
}
