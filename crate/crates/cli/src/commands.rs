use std::fs;
use std::path::Path;

use pgf_core::equiv::{self, EquivError, EquivResult};
use pgf_core::gf::{self, EFps, GfError, State};
use pgf_core::lang::{parse_program, ProgramAst, StmtKind};
use pgf_core::oracle::{self, OracleError, RunConfig};
use pgf_core::query::{self, QueryError};
use pgf_core::semantics::{fmt_state, transform, LoopStrategy, SemError, DEFAULT_UNROLL};
use pgf_core::synth::{self, SynthError, SynthOutcome};
use serde_json::{json, Value};

use crate::report::{series, series_json, series_text, value_json, value_text};
use crate::{InferArgs, StrategyArgs};

pub const USAGE: u8 = 1;
pub const UNSUPPORTED: u8 = 2;
pub const REJECTED: u8 = 3;
pub const UNDEFINED: u8 = 4;
pub const UNSOLVED: u8 = 5;
pub const DISAGREEMENT: u8 = 6;

pub const UNDEFINED_MESSAGE: &str = "conditioned semantics undefined (observation violated almost surely)";

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

pub struct Output {
    pub json: bool,
    pub order: usize,
}

impl Output {
    fn emit(&self, doc: Value, text: &[String]) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&doc).expect("values serialize"));
        } else {
            for line in text {
                println!("{line}");
            }
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load(path: &Path) -> Result<ProgramAst, Failure> {
    let src =
        fs::read_to_string(path).map_err(|e| Failure::new(USAGE, format!("cannot read {}: {e}", path.display())))?;
    parse_program(&src).map_err(|e| Failure::new(USAGE, format!("{}:{e}", path.display())))
}

fn sem_failure(path: &Path, e: SemError) -> Failure {
    match e {
        SemError::InvariantRejected { .. } => Failure::new(REJECTED, format!("{}:{e}", path.display())),
        SemError::Conditioning(GfError::UndefinedNormalization) => Failure::new(UNDEFINED, UNDEFINED_MESSAGE),
        SemError::Equiv(inner) => equiv_failure(path, *inner),
        SemError::Conditioning(_) => Failure::new(UNSUPPORTED, format!("{}: {e}", path.display())),
        _ => Failure::new(UNSUPPORTED, format!("{}:{e}", path.display())),
    }
}

fn equiv_failure(path: &Path, e: EquivError) -> Failure {
    match e {
        EquivError::Sem(inner) => sem_failure(path, inner),
        other => Failure::new(UNSUPPORTED, format!("{}: {other}", path.display())),
    }
}

fn strategy(args: &StrategyArgs) -> Result<LoopStrategy, Failure> {
    if args.invariants.is_empty() {
        return Ok(LoopStrategy::Unroll { max_iters: args.unroll.unwrap_or(DEFAULT_UNROLL), detect_fixpoint: true });
    }
    let programs = args.invariants.iter().map(|p| load(p)).collect::<Result<_, _>>()?;
    Ok(LoopStrategy::Invariant { programs, uast_asserted: args.assert_uast })
}

fn prior(src: &str, p: &ProgramAst, order: usize) -> Result<EFps, Failure> {
    let f = EFps::parse(src, &p.vars).map_err(|e| Failure::new(USAGE, format!("prior: {e}")))?;
    let negative = |e: &pgf_core::symexpr::SymExpr| e.to_f64().is_some_and(|v| v < 0.0);
    let terms = series(&f.dist, &p.vars, order).map_err(|e| Failure::new(USAGE, format!("prior: {e}")))?;
    if negative(&f.violation) || terms.iter().any(|t| negative(&t.coeff)) {
        return Err(Failure::new(USAGE, format!("prior '{src}' has a negative coefficient")));
    }
    Ok(f)
}

pub fn infer(args: &InferArgs, out: &Output, answers_only: bool) -> Outcome {
    let p = load(&args.program)?;
    let input = prior(&args.prior, &p, out.order)?;
    let strat = strategy(&args.strategy)?;
    let queries = args
        .queries
        .iter()
        .map(|q| query::parse_query(q).map_err(|e| Failure::new(USAGE, format!("query: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;

    let r = transform(&p, &input, &strat).map_err(|e| sem_failure(&args.program, e))?;
    let mut caveats = r.notes.clone();
    if !r.converged && r.efps.dist.is_zero() {
        caveats.push("no run terminated within the unrolling budget; conditioning may be undefined".to_string());
    }
    let shown = if args.unconditioned {
        r.efps.clone()
    } else {
        match gf::normalize(&r.efps) {
            Ok(n) => {
                if n.parametric {
                    caveats.push("normalization depends on parameters".to_string());
                }
                n.efps
            }
            Err(GfError::UndefinedNormalization) => return Err(Failure::new(UNDEFINED, UNDEFINED_MESSAGE)),
            Err(e) => return Err(Failure::new(UNSUPPORTED, format!("{}: {e}", args.program.display()))),
        }
    };

    let mut answers = Vec::new();
    for q in &queries {
        let a = query::answer(&shown, q, &p.vars).map_err(|e| match e {
            QueryError::UnknownVariable(_) | QueryError::ZeroThreshold => Failure::new(USAGE, format!("{q}: {e}")),
            _ => Failure::new(UNSUPPORTED, format!("{q}: {e}")),
        })?;
        answers.push((q.to_string(), a));
    }
    let answer_lines: Vec<String> = answers
        .iter()
        .map(|(q, a)| match a {
            query::Answer::Value(v) if q.ends_with("<=") => format!("{q} {}", value_text(v)),
            query::Answer::Value(v) => format!("{q} = {}", value_text(v)),
            query::Answer::Dist(d) => format!("{q} = {d}"),
        })
        .collect();
    let answers_json: Vec<Value> = answers
        .iter()
        .map(|(q, a)| match a {
            query::Answer::Value(v) => json!({ "query": q, "value": value_json(v) }),
            query::Answer::Dist(d) => json!({ "query": q, "distribution": d.to_json() }),
        })
        .collect();

    if answers_only {
        out.emit(
            json!({ "command": "query", "status": "ok", "exit_code": 0, "conditioned": !args.unconditioned, "answers": answers_json }),
            &answer_lines,
        );
        return Ok(0);
    }

    let terms = series(&shown.dist, &p.vars, out.order);
    let mut text = vec![format!("{}: {}", if args.unconditioned { "result" } else { "posterior" }, shown)];
    match &terms {
        Ok(t) => text.push(format!("series: {}", series_text(t, out.order))),
        Err(e) => caveats.push(format!("no series expansion: {e}")),
    }
    text.push(format!("observation violated with probability {}", value_text(&r.efps.violation)));
    text.push(format!("residual mass: {}", value_text(&r.residual_mass)));
    text.push(format!("exact: {}", if r.converged { "yes" } else { "no" }));
    text.extend(caveats.iter().map(|c| format!("caveat: {c}")));
    text.extend(answer_lines);

    out.emit(
        json!({
            "command": "infer",
            "status": "ok",
            "exit_code": 0,
            "conditioned": !args.unconditioned,
            "result": shown.to_json(),
            "series": terms.as_ref().map(|t| series_json(t)).unwrap_or(Value::Null),
            "violation_probability": value_json(&r.efps.violation),
            "residual_mass": value_json(&r.residual_mass),
            "converged": r.converged,
            "caveats": caveats,
            "answers": answers_json,
        }),
        &text,
    );
    Ok(0)
}

fn verdict(result: &EquivResult, command: &str) -> (u8, Value, Vec<String>) {
    match result {
        EquivResult::Equal => {
            (0, json!({ "command": command, "status": "equal", "exit_code": 0 }), vec!["equal".to_string()])
        }
        EquivResult::NotEqual { counterexample, lhs, rhs } => (
            REJECTED,
            json!({
                "command": command,
                "status": "not_equal",
                "exit_code": REJECTED,
                "counterexample": counterexample,
                "lhs": lhs.to_json(),
                "rhs": rhs.to_json(),
            }),
            vec![
                "not equal".to_string(),
                format!("counterexample: {}", fmt_state(counterexample)),
                format!("left output:  {lhs}"),
                format!("right output: {rhs}"),
            ],
        ),
        EquivResult::Inconclusive { reason } => (
            UNSUPPORTED,
            json!({ "command": command, "status": "inconclusive", "exit_code": UNSUPPORTED, "reason": reason }),
            vec![format!("inconclusive: {reason}")],
        ),
    }
}

pub fn check_equiv(left: &Path, right: &Path, out: &Output) -> Outcome {
    let (p, q) = (load(left)?, load(right)?);
    let r = equiv::check_equiv(&p, &q).map_err(|e| equiv_failure(left, e))?;
    let (code, doc, text) = verdict(&r, "check-equiv");
    out.emit(doc, &text);
    Ok(code)
}

fn loop_parts(path: &Path, p: &ProgramAst) -> Result<(gf::Guard, Vec<pgf_core::lang::Stmt>), Failure> {
    match equiv::first_loop(p).map(|s| &s.kind) {
        Some(StmtKind::While { guard, body }) => Ok((guard.clone(), body.clone())),
        _ => Err(Failure::new(USAGE, format!("{}: program has no loop", path.display()))),
    }
}

pub fn check_invariant(program: &Path, invariant: &Path, out: &Output) -> Outcome {
    let p = load(program)?;
    let inv = load(invariant)?;
    let (guard, body) = loop_parts(program, &p)?;
    let r = equiv::check_invariant(&guard, &body, &inv).map_err(|e| equiv_failure(invariant, e))?;
    let (code, doc, mut text) = verdict(&r, "check-invariant");
    if code == 0 {
        text[0] = "invariant verified".to_string();
    } else if code == REJECTED {
        text[0] = "invariant rejected".to_string();
    }
    out.emit(doc, &text);
    Ok(code)
}

pub fn synthesize(program: &Path, template: &Path, smtlib: bool, out: &Output) -> Outcome {
    let p = load(program)?;
    let t = load(template)?;
    let (guard, body) = loop_parts(program, &p)?;
    let rep = synth::synthesize(&guard, &body, &t).map_err(|e| match e {
        SynthError::Equiv(inner) => equiv_failure(template, inner),
        other => Failure::new(UNSUPPORTED, format!("{}: {other}", template.display())),
    })?;
    let mut text = vec![format!("constraints ({}):", rep.system.equations.len())];
    text.extend(rep.system.render().into_iter().map(|e| format!("  {e}")));
    if smtlib {
        text.push(rep.system.to_smtlib());
    }
    let render = |s: &std::collections::BTreeMap<String, pgf_core::symexpr::SymExpr>| -> Vec<String> {
        s.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    };
    for r in &rep.rejected {
        text.push(format!("rejected candidate: {}", render(r).join(", ")));
    }
    let (code, status, solutions) = match &rep.outcome {
        SynthOutcome::Solved { solutions } => {
            for (i, s) in solutions.iter().enumerate() {
                if solutions.len() > 1 {
                    text.push(format!("solution {}:", i + 1));
                }
                text.extend(render(s));
            }
            let sols: Vec<Value> = solutions
                .iter()
                .map(|s| Value::Object(s.iter().map(|(k, v)| (k.clone(), json!(v.to_string()))).collect()))
                .collect();
            (0, "solved", sols)
        }
        SynthOutcome::NoSolution => {
            text.push("no parameter values make the template an invariant".to_string());
            (UNSOLVED, "no_solution", Vec::new())
        }
        SynthOutcome::Unsolved { residual } => {
            text.push("could not solve the remaining constraints:".to_string());
            text.extend(residual.render().into_iter().map(|e| format!("  {e}")));
            (UNSOLVED, "unsolved", Vec::new())
        }
    };
    out.emit(
        json!({
            "command": "synthesize",
            "status": status,
            "exit_code": code,
            "constraints": rep.system.render(),
            "solutions": solutions,
            "rejected": rep.rejected.iter().map(render).collect::<Vec<_>>(),
        }),
        &text,
    );
    Ok(code)
}

pub fn mc_check(
    program: &Path,
    start: &State,
    strat: &StrategyArgs,
    cfg: &RunConfig,
    top: usize,
    out: &Output,
) -> Outcome {
    let p = load(program)?;
    let r = transform(&p, &EFps::dirac(start), &strategy(strat)?).map_err(|e| sem_failure(program, e))?;
    let exact = match gf::normalize(&r.efps) {
        Ok(n) => n.efps,
        Err(GfError::UndefinedNormalization) => return Err(Failure::new(UNDEFINED, UNDEFINED_MESSAGE)),
        Err(e) => return Err(Failure::new(UNSUPPORTED, format!("{}: {e}", program.display()))),
    };
    let emp = oracle::estimate_posterior(&p, start, cfg).map_err(|e| match e {
        OracleError::DegenerateConditioning => Failure::new(UNDEFINED, UNDEFINED_MESSAGE),
        OracleError::NoSamples => Failure::new(USAGE, e.to_string()),
        other => Failure::new(UNSUPPORTED, format!("{}:{other}", program.display())),
    })?;
    let rep = oracle::compare(&exact, &emp, top).map_err(|e| Failure::new(UNSUPPORTED, e.to_string()))?;
    let code = if rep.pass { 0 } else { DISAGREEMENT };
    let mut text = vec![
        format!(
            "{} samples: {} terminated, {} violated an observation, {} hit the step limit",
            emp.samples, emp.terminated, emp.violated, emp.timeouts
        ),
        format!("{:<24} {:>12} {:>12}  99.9% interval", "state", "exact", "empirical"),
    ];
    for s in &rep.states {
        let flag = if s.exact < s.ci_low || s.exact > s.ci_high { "  OUTSIDE" } else { "" };
        text.push(format!(
            "{:<24} {:>12.6} {:>12.6}  [{:.6}, {:.6}]{flag}",
            fmt_state(&s.state),
            s.exact,
            s.empirical,
            s.ci_low,
            s.ci_high
        ));
    }
    text.push(format!("max abs deviation: {:.3e}", rep.max_abs_dev));
    text.push(if rep.pass { "agreement: pass".to_string() } else { "agreement: FAIL".to_string() });
    let mut doc = rep.to_json();
    doc["command"] = json!("mc-check");
    doc["status"] = json!(if rep.pass { "pass" } else { "fail" });
    doc["exit_code"] = json!(code);
    doc["samples"] = json!(emp.samples);
    doc["violated"] = json!(emp.violated);
    doc["timeouts"] = json!(emp.timeouts);
    out.emit(doc, &text);
    Ok(code)
}
