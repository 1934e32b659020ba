//! `omac`: zero-error MAC analysis from the command line.
//!
//! Every subcommand prints one JSON document on stdout (or a text summary
//! with `--pretty`) and exits with 0 on a positive verdict, 1 on a negative
//! one, 2 on usage or input errors and 3 when the answer is inconclusive.

mod input;
mod render;

use std::fs;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use omac::achieve::{self, TimeSharingPlan, FW_GAP};
use omac::channel::{write_codebook, CodePair};
use omac::classifier::{classify_over_inputs, classify_shape, DEFAULT_BUDGET};
use omac::confusability::{confusable_dist, distance_to_set, verify_zero_error, Side, FEASIBILITY_TOL};
use omac::converse::{brute_force_search, extract_equicoupled_pair, plotkin_xor_bound, ExtractMode, SearchOutcome};
use omac::good::{DEFAULT_ETA, GOODNESS_TOL};
use omac::prob::{Kind, Metric};
use serde::Serialize;
use serde_json::{json, Value};

use input::Inputs;

#[derive(Parser)]
#[command(name = "omac", version, about = "Zero-error codes for MACs with an omniscient jammer")]
struct Cli {
    /// Human-readable summary instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the JSON result here and the run manifest next to it.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Joint,
    Marg1,
    Marg2,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Joint => Kind::Joint,
            KindArg::Marg1 => Kind::Marg1,
            KindArg::Marg2 => Kind::Marg2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Greedy,
}

#[derive(Subcommand)]
enum Cmd {
    /// Five-case shape of the capacity region.
    Classify {
        /// Channel file, or `xor:P` for the built-in XOR MAC.
        #[arg(long)]
        channel: String,
        /// Input distribution of user 1: `u`, `q0,q1,...`, or a JSON file.
        #[arg(long, requires = "p2", conflicts_with = "scan")]
        p1: Option<String>,
        #[arg(long, requires = "p1")]
        p2: Option<String>,
        /// Classify every feasible input pair on a grid of this step.
        #[arg(long)]
        scan: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Membership of a coupling in a confusability set.
    Confusable {
        #[arg(long)]
        channel: String,
        /// Coupling as a JSON distribution.
        #[arg(long)]
        coupling: String,
        #[arg(long, value_enum)]
        kind: KindArg,
    },
    /// Exact zero-error check of a code pair.
    Verify {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        code1: String,
        #[arg(long)]
        code2: String,
    },
    /// Random coding with constant-composition filtering and expurgation.
    Achieve {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rate1: f64,
        #[arg(long)]
        rate2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the resulting codebooks.
        #[arg(long)]
        codes_dir: Option<String>,
    },
    /// Product-distribution inner bound.
    InnerBound {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        p1: String,
        #[arg(long)]
        p2: String,
    },
    /// Bound on M1 M2 for the binary XOR MAC, optionally checked by search.
    Plotkin {
        #[arg(long)]
        p: f64,
        /// Exhaustive search at blocklength N for sizes M1, M2.
        #[arg(long, num_args = 3, value_names = ["N", "M1", "M2"])]
        search: Option<Vec<usize>>,
        #[arg(long, default_value_t = 100_000_000)]
        budget: u64,
    },
    /// Equicoupled sub-pair extraction.
    Extract {
        #[arg(long)]
        code1: String,
        #[arg(long)]
        code2: String,
        #[arg(long)]
        eta: f64,
        #[arg(long, value_enum, default_value = "greedy")]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Verdict {
    Positive,
    Negative,
    Inconclusive,
}

impl Verdict {
    fn code(self) -> u8 {
        match self {
            Verdict::Positive => 0,
            Verdict::Negative => 1,
            Verdict::Inconclusive => 3,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Verdict::Positive => "positive",
            Verdict::Negative => "negative",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

struct Outcome {
    command: &'static str,
    verdict: Verdict,
    result: Value,
    tolerances: Value,
    seed: Option<u64>,
    text: String,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn run(cmd: Cmd, inputs: &mut Inputs) -> Result<Outcome> {
    match cmd {
        Cmd::Classify { channel, p1, p2, scan, eta, budget, seed } => {
            let spec = inputs.channel(&channel)?;
            let tol = json!({ "eta": eta, "boundary_band": 2.0 * eta, "goodness_tol": GOODNESS_TOL, "feasibility_tol": FEASIBILITY_TOL });
            if let Some(step) = scan {
                let s = classify_over_inputs(&spec, step, eta, budget, seed)?;
                let verdict = if s.best_cases.contains(&5) { Verdict::Negative } else { Verdict::Positive };
                let text = render::scan(&s);
                return Ok(Outcome { command: "classify", verdict, result: to_value(&s)?, tolerances: tol, seed: Some(seed), text });
            }
            let (Some(p1), Some(p2)) = (p1, p2) else {
                anyhow::bail!(omac::Error::InvalidArgument("give --p1 and --p2, or --scan".into()));
            };
            let d1 = inputs.input_dist(&p1, "x1", &spec.x1)?;
            let d2 = inputs.input_dist(&p2, "x2", &spec.x2)?;
            let v = classify_shape(&spec, &d1, &d2, eta, budget, seed)?;
            let verdict = if v.boundary_uncertain {
                Verdict::Inconclusive
            } else if v.case == 5 {
                Verdict::Negative
            } else {
                Verdict::Positive
            };
            let text = render::shape(&v);
            Ok(Outcome { command: "classify", verdict, result: to_value(&v)?, tolerances: tol, seed: Some(seed), text })
        }
        Cmd::Confusable { channel, coupling, kind } => {
            let spec = inputs.channel(&channel)?;
            let p = inputs.dist_file(&coupling)?;
            let kind = Kind::from(kind);
            let cert = confusable_dist(&spec, &p, kind)?;
            let dist = distance_to_set(&spec, &p, kind, Metric::L1, Side::ToConfusable)?;
            let verdict = if cert.feasible { Verdict::Positive } else { Verdict::Negative };
            let text = format!(
                "{} confusability: {}\nLP slack {:.3e} (tolerance {:.0e}), l1 distance to the set {:.6}\n",
                kind.as_str(),
                if cert.feasible { "confusable" } else { "not confusable" },
                cert.slack,
                FEASIBILITY_TOL,
                dist
            );
            let result = json!({ "certificate": cert, "l1_distance": dist });
            Ok(Outcome { command: "confusable", verdict, result, tolerances: json!({ "feasibility_tol": FEASIBILITY_TOL }), seed: None, text })
        }
        Cmd::Verify { channel, code1, code2 } => {
            let spec = inputs.channel(&channel)?;
            let (_, b1) = inputs.codebook(&code1)?;
            let (_, b2) = inputs.codebook(&code2)?;
            let code = CodePair::from_draws(b1, b2)?;
            let r = verify_zero_error(&spec, &code)?;
            let verdict = if r.zero_error { Verdict::Positive } else { Verdict::Negative };
            let text = render::verify(&r);
            Ok(Outcome { command: "verify", verdict, result: to_value(&r)?, tolerances: json!({ "exact": true }), seed: None, text })
        }
        Cmd::Achieve { channel, p1, p2, n, rate1, rate2, seed, codes_dir } => {
            let spec = inputs.channel(&channel)?;
            let d1 = inputs.input_dist(&p1, "x1", &spec.x1)?;
            let d2 = inputs.input_dist(&p2, "x2", &spec.x2)?;
            let plan = TimeSharingPlan::product(d1, d2)?;
            let run = achieve::achieve(&spec, &plan, n, rate1, rate2, seed)?;
            let c = &run.expurgated.code;
            let want = |t: usize| t.min(2);
            let ok = run.zero_error && c.m1() >= want(run.target.0) && c.m2() >= want(run.target.1);
            if let Some(dir) = codes_dir {
                fs::create_dir_all(&dir).with_context(|| format!("creating {dir}"))?;
                fs::write(format!("{dir}/code1.txt"), write_codebook(&c.book1, &spec.x1))?;
                fs::write(format!("{dir}/code2.txt"), write_codebook(&c.book2, &spec.x2))?;
            }
            let text = format!(
                "n = {n}, target sizes {:?}, drawn {:?}, exact-type survivors {:?}\nafter expurgation: M1 = {}, M2 = {}, rates ({:.4}, {:.4}), zero error: {}\n",
                run.target,
                run.drawn,
                run.filtered,
                c.m1(),
                c.m2(),
                run.rates.0,
                run.rates.1,
                run.zero_error
            );
            let verdict = if ok { Verdict::Positive } else { Verdict::Negative };
            Ok(Outcome { command: "achieve", verdict, result: to_value(&run)?, tolerances: json!({ "exact": true }), seed: Some(seed), text })
        }
        Cmd::InnerBound { channel, p1, p2 } => {
            let spec = inputs.channel(&channel)?;
            let d1 = inputs.input_dist(&p1, "x1", &spec.x1)?;
            let d2 = inputs.input_dist(&p2, "x2", &spec.x2)?;
            let tol = json!({ "duality_gap_bits": FW_GAP, "feasibility_tol": FEASIBILITY_TOL });
            match achieve::inner_bound(&spec, &d1, &d2) {
                Ok(r) => {
                    let text = render::inner(&r);
                    Ok(Outcome { command: "inner-bound", verdict: Verdict::Positive, result: to_value(&r)?, tolerances: tol, seed: None, text })
                }
                Err(omac::Error::Precondition(why)) => Ok(Outcome {
                    command: "inner-bound",
                    verdict: Verdict::Negative,
                    result: json!({ "applicable": false, "reason": why }),
                    tolerances: tol,
                    seed: None,
                    text: format!("inner bound not applicable: {why}\n"),
                }),
                Err(e) => Err(e.into()),
            }
        }
        Cmd::Plotkin { p, search, budget } => {
            let spec_bound = plotkin_xor_bound(p)?;
            let mut text = format!("M1 * M2 <= {} (eps = {})\n", spec_bound.exact, spec_bound.eps);
            let mut verdict = Verdict::Positive;
            let mut result = json!({ "bound": spec_bound });
            if let Some(s) = search {
                let (n, m1, m2) = (s[0], s[1], s[2]);
                let spec = omac::channel::builtin_xor_mac(p)?;
                let cert = brute_force_search(&spec, n, m1, m2, budget)?;
                verdict = match &cert.outcome {
                    SearchOutcome::Found { .. } => Verdict::Positive,
                    SearchOutcome::ExhaustivelyNone => Verdict::Negative,
                    SearchOutcome::Inconclusive => Verdict::Inconclusive,
                };
                text += &render::search(&cert);
                result["search"] = to_value(&cert)?;
            }
            Ok(Outcome { command: "plotkin", verdict, result, tolerances: json!({ "exact": true }), seed: None, text })
        }
        Cmd::Extract { code1, code2, eta, mode } => {
            let (a1, b1) = inputs.codebook(&code1)?;
            let (a2, b2) = inputs.codebook(&code2)?;
            let code = CodePair::from_draws(b1, b2)?;
            let mode = match mode {
                ModeArg::Exact => ExtractMode::Exact,
                ModeArg::Greedy => ExtractMode::Greedy,
            };
            let r = extract_equicoupled_pair(&code, &a1, &a2, eta, mode)?;
            let text = format!(
                "kept {} of {} (book 1) and {} of {} (book 2); max d_inf to the center {:.4} <= eta = {eta}; {} colors\n",
                r.book1.len(),
                code.m1(),
                r.book2.len(),
                code.m2(),
                r.eta_achieved,
                r.colors
            );
            Ok(Outcome { command: "extract", verdict: Verdict::Positive, result: to_value(&r)?, tolerances: json!({ "eta": eta }), seed: None, text })
        }
    }
}

fn error_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<omac::Error>() {
        Some(omac::Error::Precondition(_)) => 1,
        Some(omac::Error::Inconsistent(_)) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let mut inputs = Inputs::default();
    let outcome = run(cli.cmd, &mut inputs);
    let manifest_path = cli.out.as_ref().map(|o| format!("{o}.manifest.json"));
    let manifest = |command: &str, seed: Option<u64>| {
        json!({
            "command": command,
            "arguments": args,
            "seed": seed,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "inputs": inputs.digests.iter().map(|(p, d)| json!({ "path": p, "sha256": d })).collect::<Vec<_>>(),
            "timing": { "started_unix": started, "wall_time_s": clock.elapsed().as_secs_f64() },
        })
    };
    let (doc, code, text, command, seed) = match outcome {
        Ok(o) => {
            let doc = json!({
                "command": o.command,
                "verdict": o.verdict.as_str(),
                "exit_code": o.verdict.code(),
                "tolerances": o.tolerances,
                "result": o.result,
                "manifest": manifest_path,
            });
            (doc, o.verdict.code(), o.text, o.command, o.seed)
        }
        Err(e) => {
            let code = error_code(&e);
            let msg = format!("{e:#}");
            let doc = json!({ "verdict": "error", "exit_code": code, "error": msg, "manifest": manifest_path });
            (doc, code, format!("error: {msg}\n"), "error", None)
        }
    };
    let rendered = serde_json::to_string_pretty(&doc).expect("JSON value serializes");
    let m = serde_json::to_string_pretty(&manifest(command, seed)).expect("JSON value serializes");
    match (&cli.out, &manifest_path) {
        (Some(out), Some(mp)) => {
            if let Err(e) = fs::write(out, format!("{rendered}\n")).and_then(|_| fs::write(mp, format!("{m}\n"))) {
                eprintln!("error: writing {out}: {e}");
                return ExitCode::from(2);
            }
        }
        _ => eprintln!("{}", serde_json::to_string(&manifest(command, seed)).expect("JSON value serializes")),
    }
    if cli.pretty {
        print!("{text}");
    } else {
        println!("{rendered}");
    }
    ExitCode::from(code)
}
