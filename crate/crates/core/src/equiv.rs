//! Exact equivalence of loop-free programs and invariant checking.
//!
//! Two programs are equal on every input exactly when they agree on the
//! second-order generating function `prod 1/(1 - x*@x)`, in which each
//! coefficient of the `@`-indeterminates is the point mass on one input state.

use crate::gf::Guard;
use crate::gf::{program_var, EFps, State};
use crate::lang::{ProgramAst, Stmt, StmtKind};
use crate::semantics::{transform, LoopStrategy, SemError};
use crate::symexpr::{ExpPoly, Indeterminate, Kind, Monomial, Poly, SymError, SymExpr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquivError {
    #[error("{0} contains a loop; equivalence is decided for loop-free programs only")]
    NotLoopFree(&'static str),
    #[error("the difference is identically zero")]
    ZeroDifference,
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquivResult {
    Equal,
    /// `counterexample` is an input on which the two programs produce the
    /// output distributions `lhs` and `rhs`.
    NotEqual {
        counterexample: State,
        lhs: EFps,
        rhs: EFps,
    },
    Inconclusive {
        reason: String,
    },
}

impl EquivResult {
    pub fn is_equal(&self) -> bool {
        matches!(self, EquivResult::Equal)
    }
}

/// `prod_v 1/(1 - v * @v)` over the given program variables.
pub fn build_second_order<S: AsRef<str>>(vars: &[S]) -> SymExpr {
    let factors = vars.iter().map(|v| {
        let x = Poly::var(&program_var(v.as_ref()));
        let u = Poly::var(&Indeterminate::meta(v.as_ref()));
        (ExpPoly::from_poly(Poly::one().sub(&x.mul(&u))), 1)
    });
    SymExpr::from_parts(ExpPoly::one(), factors).expect("second-order generating function is well formed")
}

fn union_vars(a: &ProgramAst, b: &ProgramAst) -> Vec<String> {
    let mut vars = a.vars.clone();
    for v in &b.vars {
        if !vars.contains(v) {
            vars.push(v.clone());
        }
    }
    vars
}

#[cfg(feature = "parallel")]
fn both<A: Send, B: Send>(a: impl FnOnce() -> A + Send, b: impl FnOnce() -> B + Send) -> (A, B) {
    rayon::join(a, b)
}

#[cfg(not(feature = "parallel"))]
fn both<A, B>(a: impl FnOnce() -> A, b: impl FnOnce() -> B) -> (A, B) {
    (a(), b())
}

/// Second-order transforms of two loop-free programs over their joint variables.
pub fn second_order_pair(p: &ProgramAst, q: &ProgramAst) -> Result<(Vec<String>, EFps, EFps), EquivError> {
    if p.has_loops() {
        return Err(EquivError::NotLoopFree("left program"));
    }
    if q.has_loops() {
        return Err(EquivError::NotLoopFree("right program"));
    }
    let vars = union_vars(p, q);
    let g = EFps::from_dist(build_second_order(&vars));
    let strat = LoopStrategy::default();
    let (a, b) = both(|| transform(p, &g, &strat), || transform(q, &g, &strat));
    Ok((vars, a?.efps, b?.efps))
}

/// Decides whether two loop-free programs produce the same output (including
/// violation mass) on every input state.
pub fn check_equiv(p: &ProgramAst, q: &ProgramAst) -> Result<EquivResult, EquivError> {
    let (vars, a, b) = second_order_pair(p, q)?;
    let diff = a.combined().sub(&b.combined());
    if diff.is_zero() {
        return Ok(EquivResult::Equal);
    }
    let mut state = extract_counterexample(&diff)?;
    for v in &vars {
        state.entry(v.clone()).or_insert(0);
    }
    let input = EFps::dirac(&state);
    let strat = LoopStrategy::default();
    let lhs = transform(p, &input, &strat)?.efps;
    let rhs = transform(q, &input, &strat)?.efps;
    if lhs.eq_canonical(&rhs) {
        return Ok(EquivResult::Inconclusive {
            reason: format!("programs differ, but not on the candidate input {}", crate::semantics::fmt_state(&state)),
        });
    }
    Ok(EquivResult::NotEqual { counterexample: state, lhs, rhs })
}

/// Decodes the input state of least total size (graded-lex least among ties)
/// whose `@`-monomial occurs in the numerator of `diff`. Every `@`-variable
/// mentioned in `diff` gets an entry.
pub fn extract_counterexample(diff: &SymExpr) -> Result<State, EquivError> {
    if diff.is_zero() {
        return Err(EquivError::ZeroDifference);
    }
    let mut best: Option<Monomial> = None;
    for (_, coeff) in diff.numerator().groups() {
        for (m, _) in coeff.terms() {
            let meta = Monomial::from_pairs(m.iter().filter(|(v, _)| v.kind() == Kind::Meta).cloned().collect());
            if best.as_ref().is_none_or(|b| meta < *b) {
                best = Some(meta);
            }
        }
    }
    let best = best.unwrap_or_else(Monomial::one);
    Ok(diff
        .vars()
        .into_iter()
        .filter(|v| v.kind() == Kind::Meta)
        .map(|v| (v.name().to_string(), best.exp_of(&v) as u64))
        .collect())
}

/// `if (guard) { body; inv } else { skip }`: one unfolding of the loop
/// followed by the candidate invariant.
pub fn unfold_once(guard: &Guard, body: &[Stmt], inv: &ProgramAst) -> ProgramAst {
    let mut then = body.to_vec();
    then.extend(inv.body.iter().cloned());
    let mut p = ProgramAst::new(vec![Stmt::new(StmtKind::If { guard: guard.clone(), then, els: Vec::new() })]);
    for v in &inv.vars {
        if !p.vars.contains(v) {
            p.vars.push(v.clone());
        }
    }
    p
}

/// Checks that `inv` is a fixed point of the unfolding operator of
/// `while (guard) { body }`.
pub fn check_invariant(guard: &Guard, body: &[Stmt], inv: &ProgramAst) -> Result<EquivResult, EquivError> {
    check_equiv(inv, &unfold_once(guard, body, inv))
}

/// Like [`check_invariant`] for a `while` statement.
pub fn check_invariant_stmt(stmt: &Stmt, inv: &ProgramAst) -> Option<Result<EquivResult, EquivError>> {
    match &stmt.kind {
        StmtKind::While { guard, body } => Some(check_invariant(guard, body, inv)),
        _ => None,
    }
}

/// The first `while` statement of a program, in pre-order.
pub fn first_loop(p: &ProgramAst) -> Option<&Stmt> {
    let mut found = None;
    crate::lang::visit(&p.body, &mut |s| {
        if found.is_none() && matches!(s.kind, StmtKind::While { .. }) {
            found = Some(s);
        }
    });
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn prog(s: &str) -> ProgramAst {
        parse_program(s).unwrap()
    }

    #[test]
    fn commuting_choices_are_equal() {
        let a = prog("{x := 1;} [1/2] {x := 0;} y := 3;");
        let b = prog("y := 3; {x := 0;} [1/2] {x := 1;}");
        assert_eq!(check_equiv(&a, &b).unwrap(), EquivResult::Equal);
    }

    #[test]
    fn inequality_reports_smallest_input() {
        let a = prog("if (x > 0) { x := x - 1; }");
        let b = prog("x := x - 1;");
        assert_eq!(check_equiv(&a, &b).unwrap(), EquivResult::Equal);
        let c = prog("if (x > 1) { x := x - 1; }");
        match check_equiv(&a, &c).unwrap() {
            EquivResult::NotEqual { counterexample, .. } => {
                assert_eq!(counterexample, [("x".to_string(), 1)].into())
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn counterexample_decoding() {
        let x = program_var("x");
        let u = Indeterminate::meta("x");
        let diff = SymExpr::var(&x)
            .pow(2)
            .unwrap()
            .mul(&SymExpr::var(&u).pow(3).unwrap())
            .scale(&crate::symexpr::rat(1, 6))
            .sub(&SymExpr::var(&u).pow(4).unwrap());
        assert_eq!(extract_counterexample(&diff).unwrap(), [("x".to_string(), 3)].into());
        assert_eq!(extract_counterexample(&SymExpr::zero()), Err(EquivError::ZeroDifference));
    }

    #[test]
    fn loops_are_rejected() {
        let a = prog("while (x > 0) { x := x - 1; }");
        assert!(matches!(check_equiv(&a, &a), Err(EquivError::NotLoopFree(_))));
    }

    #[test]
    fn geometric_invariant() {
        let p = prog("while (c = 1) { {c := 0;} [1/2] {x := x + 1;} }");
        let StmtKind::While { guard, body } = &p.body[0].kind else { unreachable!() };
        let inv = prog("if (c = 1) { x += iid(geometric(1/2), c); c := 0; }");
        assert!(check_invariant(guard, body, &inv).unwrap().is_equal());
        let bad = prog("if (c = 1) { x := geometric(1/2); c := 0; }");
        assert!(!check_invariant(guard, body, &bad).unwrap().is_equal());
    }
}
