//! Random programs, inputs and expressions shared by the property and
//! acceptance suites, plus the property bodies themselves.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pgf_core::equiv::{build_second_order, check_equiv, EquivResult};
use pgf_core::gf::{self, mass, EFps, Guard, State};
use pgf_core::lang::{parse_guard, parse_program, ProgramAst, Stmt, StmtKind};
use pgf_core::semantics::{transform, unroll_loop, LoopStrategy};
use pgf_core::symexpr::{Indeterminate, SymExpr};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const VARS: [&str; 2] = ["x", "y"];

fn var() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&VARS[..])
}

fn prob() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&["1/2", "1/3", "2/5", "3/4"][..])
}

pub fn guard_src() -> BoxedStrategy<String> {
    let atom = prop_oneof![
        (var(), prop::sample::select(&["<", "<=", "=", "!=", ">", ">="][..]), 0u32..4)
            .prop_map(|(v, op, k)| format!("{v} {op} {k}")),
        (var(), 0u32..2).prop_map(|(v, r)| format!("{v} % 2 = {r}")),
        Just("true".to_string()),
        Just("false".to_string()),
    ];
    atom.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) && ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) || ({b})")),
            inner.prop_map(|a| format!("!({a})")),
        ]
    })
    .boxed()
}

fn simple_stmt() -> BoxedStrategy<String> {
    prop_oneof![
        Just("skip;".to_string()),
        (var(), 0u32..3).prop_map(|(v, n)| format!("{v} := {n};")),
        (var(), 1u32..3).prop_map(|(v, n)| format!("{v} := {v} + {n};")),
        (var(), 1u32..3).prop_map(|(v, n)| format!("{v} := {v} - {n};")),
        Just("x := x + y;".to_string()),
        Just("y := x;".to_string()),
        (var(), prob()).prop_map(|(v, p)| format!("{v} := bernoulli({p});")),
        (var(), prob()).prop_map(|(v, p)| format!("{v} := geometric({p});")),
        (var(), 0u32..2, 1u32..3).prop_map(|(v, a, w)| format!("{v} := uniform({a}, {});", a + w)),
        prob().prop_map(|p| format!("x += iid(bernoulli({p}), y);")),
        guard_src().prop_map(|g| format!("observe({g});")),
    ]
    .boxed()
}

/// Loop-free programs over `x` and `y` inside the closed-form fragment.
pub fn loop_free_src() -> BoxedStrategy<String> {
    let leaf = prop::collection::vec(simple_stmt(), 1..3).prop_map(|v| v.join(" "));
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(simple_stmt(), 1..3).prop_map(|v| v.join(" ")),
            (inner.clone(), prob(), inner.clone()).prop_map(|(a, p, b)| format!("{{{a}}} [{p}] {{{b}}}")),
            (guard_src(), inner.clone(), inner.clone()).prop_map(|(g, a, b)| format!("if ({g}) {{{a}}} else {{{b}}}")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("{a} {b}")),
        ]
    })
    .boxed()
}

pub fn loop_free() -> BoxedStrategy<ProgramAst> {
    loop_free_src().prop_map(|s| with_all_vars(parse_program(&s).expect("generated program parses"))).boxed()
}

pub fn with_all_vars(mut p: ProgramAst) -> ProgramAst {
    for v in VARS {
        if !p.vars.iter().any(|w| w == v) {
            p.vars.push(v.to_string());
        }
    }
    p
}

/// A finite-support input with rational weights, total mass at most 1,
/// possibly with a violation part.
pub fn finite_input() -> BoxedStrategy<EFps> {
    (prop::collection::vec((0u32..4, 0u32..4, 1i64..6), 1..4), 0i64..4, 0i64..3)
        .prop_map(|(terms, slack, viol)| {
            let total: i64 = terms.iter().map(|t| t.2).sum::<i64>() + slack + viol;
            let mut src: Vec<String> = terms.iter().map(|(a, b, w)| format!("{w}/{total}*x^{a}*y^{b}")).collect();
            if viol > 0 {
                src.push(format!("{viol}/{total}*!"));
            }
            EFps::parse(&src.join(" + "), &VARS).unwrap()
        })
        .boxed()
}

/// Inputs that may have infinite support in `x`.
pub fn any_input() -> BoxedStrategy<EFps> {
    prop_oneof![
        finite_input(),
        (1i64..4, 0u32..3).prop_map(|(k, e)| EFps::parse(&format!("y^{e}/({} - {k}*x)*1", k + 1), &VARS).unwrap()),
        Just(EFps::parse("2/3*y/(1 - x/3)", &VARS).unwrap()),
    ]
    .boxed()
}

pub fn dirac(x: u64, y: u64) -> State {
    [("x".to_string(), x), ("y".to_string(), y)].into()
}

fn strat() -> LoopStrategy {
    LoopStrategy::default()
}

fn run(p: &ProgramAst, g: &EFps) -> EFps {
    transform(p, g, &strat()).expect("closed-form program").efps
}

macro_rules! check {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(TestCaseError::fail(format!($($fmt)*)));
        }
    };
}

pub fn prop_linearity(p: &ProgramAst, f: &EFps, g: &EFps, alpha: (i64, i64)) -> Result<(), TestCaseError> {
    let a = SymExpr::ratio(alpha.0, alpha.1);
    let mixed = f.mul_scalar(&a).add(g);
    let lhs = run(p, &mixed);
    let rhs = run(p, f).mul_scalar(&a).add(&run(p, g));
    check!(lhs.eq_canonical(&rhs), "linearity fails for\n{p}\nlhs {lhs}\nrhs {rhs}");
    Ok(())
}

pub fn prop_error_pass_through(p: &ProgramAst, f: &EFps) -> Result<(), TestCaseError> {
    let full = run(p, f);
    let clean = run(p, &EFps::from_dist(f.dist.clone()));
    let expect = EFps::new(clean.dist, clean.violation.add(&f.violation));
    check!(full.eq_canonical(&expect), "violation does not pass through for\n{p}");
    Ok(())
}

pub fn prop_mass_conservation(p: &ProgramAst, f: &EFps) -> Result<(), TestCaseError> {
    let out = run(p, f);
    let before = mass(f).unwrap().add(&f.violation);
    let after = mass(&out).unwrap().add(&out.violation);
    check!(before.eq_canonical(&after), "mass {before} became {after} for\n{p}");
    Ok(())
}

pub fn prop_filter_decomposition(f: &EFps, g: &Guard) -> Result<(), TestCaseError> {
    let yes = gf::filter_dist(&f.dist, g).unwrap();
    let no = gf::filter_dist(&f.dist, &Guard::not(g.clone())).unwrap();
    check!(yes.add(&no).eq_canonical(&f.dist), "filter by {g} does not partition {f}");
    for s in [dirac(0, 0), dirac(1, 0), dirac(2, 1), dirac(3, 2)] {
        let c = gf::coefficient_of(&yes, &s).unwrap();
        let full = gf::coefficient_of(&f.dist, &s).unwrap();
        let expect = if g.eval_state(&s) { full } else { SymExpr::zero() };
        check!(c.eq_canonical(&expect), "filter by {g} wrong at {s:?}");
    }
    Ok(())
}

fn while_parts(p: &ProgramAst) -> (Guard, Vec<Stmt>) {
    match &p.body[0].kind {
        StmtKind::While { guard, body } => (guard.clone(), body.clone()),
        _ => unreachable!("loop program"),
    }
}

/// Loops that shrink `x` with some probability; bodies are random.
pub fn loop_src() -> BoxedStrategy<String> {
    (loop_free_src(), prob(), 0u32..3)
        .prop_map(|(body, p, k)| format!("while (x > {k}) {{ {{x := x - 1;}} [{p}] {{{body}}} }}"))
        .boxed()
}

pub fn prop_unroll_monotone(src: &str, f: &EFps, k: usize) -> Result<(), TestCaseError> {
    let p = with_all_vars(parse_program(src).unwrap());
    let (g, body) = while_parts(&p);
    let a = unroll_loop(&g, &body, f, k).unwrap().efps;
    let b = unroll_loop(&g, &body, f, k + 1).unwrap().efps;
    check!(gf::series_leq(&a, &b, 6).unwrap(), "unrolling {k} -> {} decreased for {src}", k + 1);
    Ok(())
}

pub fn prop_unfolding(src: &str, f: &EFps, k: usize) -> Result<(), TestCaseError> {
    let p = with_all_vars(parse_program(src).unwrap());
    let (g, body) = while_parts(&p);
    let lhs = unroll_loop(&g, &body, f, k + 1).unwrap().efps;
    let yes = gf::filter_dist(&f.dist, &g).unwrap();
    let no = f.dist.sub(&yes);
    let once = run(&ProgramAst { vars: p.vars.clone(), body: body.clone() }, &EFps::from_dist(yes));
    let rest = unroll_loop(&g, &body, &once, k).unwrap().efps;
    let rhs = EFps::new(rest.dist.add(&no), rest.violation.add(&f.violation));
    check!(lhs.eq_canonical(&rhs), "one unfolding differs for {src} at k = {k}");
    Ok(())
}

pub fn prop_homogeneity(p: &ProgramAst, f: &EFps, t: (u32, u32)) -> Result<(), TestCaseError> {
    let u = SymExpr::var(&Indeterminate::meta("x"))
        .pow(t.0 as i64)
        .unwrap()
        .mul(&SymExpr::var(&Indeterminate::meta("y")).pow(t.1 as i64).unwrap());
    let lhs = run(p, &f.mul_scalar(&u));
    let rhs = run(p, f).mul_scalar(&u);
    check!(lhs.eq_canonical(&rhs), "meta monomial does not factor out for\n{p}");
    Ok(())
}

/// A random rational function in `x` and `y` with denominators nonzero at the
/// origin, described as text.
pub fn rational_src() -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        (1i64..5).prop_map(|n| n.to_string()),
        var().prop_map(|v| v.to_string()),
        (1i64..4, var(), 2i64..5).prop_map(|(a, v, b)| format!("{a}/({b} - {v})")),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner, 1i64..3, var()).prop_map(|(a, k, v)| format!("({a})/(1 + {k}*{v})")),
        ]
    })
    .boxed()
}

fn series_table(e: &SymExpr, order: usize) -> Option<BTreeMap<(usize, usize), SymExpr>> {
    let x = Indeterminate::program("x");
    let y = Indeterminate::program("y");
    let mut out = BTreeMap::new();
    for (i, cx) in e.taylor_coeffs(&x, order).ok()?.into_iter().enumerate() {
        for (j, c) in cx.taylor_coeffs(&y, order).ok()?.into_iter().enumerate() {
            if !c.is_zero() {
                out.insert((i, j), c);
            }
        }
    }
    Some(out)
}

fn same_series(a: &BTreeMap<(usize, usize), SymExpr>, b: &BTreeMap<(usize, usize), SymExpr>) -> bool {
    a.len() == b.len() && a.iter().all(|(k, c)| b.get(k).is_some_and(|d| d.eq_canonical(c)))
}

/// `rewrite` 0 and 1 compare `a` with an algebraically equal rewrite; 2
/// compares `a` with the unrelated `b`. In every case `eq_canonical` must agree
/// with coefficient-wise comparison of the Taylor series.
pub fn prop_eq_canonical_vs_series(a: &str, b: &str, rewrite: u8) -> Result<(), TestCaseError> {
    const ORDER: usize = 10;
    let ea = pgf_core::lang::parse_symexpr(a, &VARS).unwrap();
    let eb = pgf_core::lang::parse_symexpr(b, &VARS).unwrap();
    let Some(ta) = series_table(&ea, ORDER) else { return Ok(()) };
    let other = match rewrite % 3 {
        0 => match ea.mul(&eb).add(&ea).divide(&eb.add(&SymExpr::one())) {
            Ok(e) => e,
            Err(_) => return Ok(()),
        },
        1 => ea.add(&eb).sub(&eb),
        _ => eb.clone(),
    };
    let Some(tb) = series_table(&other, ORDER) else { return Ok(()) };
    let canon = ea.eq_canonical(&other);
    let series = same_series(&ta, &tb);
    check!(canon == series, "eq_canonical says {canon} for {ea} vs {other}, series comparison says {series}");
    if rewrite % 3 != 2 {
        check!(canon, "rewrite of {ea} not recognized as equal: {other}");
    }
    Ok(())
}

pub fn prop_witness_confirmed(p: &ProgramAst, q: &ProgramAst) -> Result<(), TestCaseError> {
    match check_equiv(p, q).unwrap() {
        EquivResult::Equal => {
            for s in [dirac(0, 0), dirac(1, 2), dirac(3, 1), dirac(2, 2)] {
                let a = run(p, &EFps::dirac(&s));
                let b = run(q, &EFps::dirac(&s));
                check!(a.eq_canonical(&b), "Equal but programs differ on {s:?}\n{p}\n{q}");
            }
        }
        EquivResult::NotEqual { counterexample, .. } => {
            let a = run(p, &EFps::dirac(&counterexample));
            let b = run(q, &EFps::dirac(&counterexample));
            check!(!a.eq_canonical(&b), "witness {counterexample:?} does not separate\n{p}\n{q}");
        }
        EquivResult::Inconclusive { reason } => return Err(TestCaseError::fail(reason)),
    }
    Ok(())
}

/// The second-order input used by several checks, exposed for sanity tests.
pub fn second_order_xy() -> SymExpr {
    build_second_order(&VARS)
}

pub fn guard(src: &str) -> Guard {
    parse_guard(src).unwrap()
}
