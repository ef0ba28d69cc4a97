//! Generating-function transformer semantics of programs.

use std::collections::{BTreeMap, HashMap};

use crate::equiv::{self, EquivError, EquivResult};
use crate::gf::{self, mass_of, normalize, program_var, EFps, GfError, Guard, State};
use crate::lang::{ArithExpr, Coef, Dist, DistKind, Loc, ProgramAst, Stmt, StmtKind};
use crate::symexpr::{Indeterminate, Poly, Rat, SymError, SymExpr};

pub const DEFAULT_UNROLL: usize = 64;

/// How `while` loops are handled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LoopStrategy {
    /// Iterate the loop-unfolding operator at most `max_iters` times.
    Unroll { max_iters: usize, detect_fixpoint: bool },
    /// Replace the `i`-th loop (pre-order) by `programs[i]` after checking that it
    /// is an invariant. Loops without an entry are unrolled with the default budget.
    Invariant { programs: Vec<ProgramAst>, uast_asserted: bool },
}

impl Default for LoopStrategy {
    fn default() -> Self {
        LoopStrategy::Unroll { max_iters: DEFAULT_UNROLL, detect_fixpoint: true }
    }
}

impl LoopStrategy {
    pub fn unroll(max_iters: usize) -> Self {
        LoopStrategy::Unroll { max_iters, detect_fixpoint: true }
    }

    pub fn invariant(p: ProgramAst) -> Self {
        LoopStrategy::Invariant { programs: vec![p], uast_asserted: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformResult {
    pub efps: EFps,
    /// Probability mass dropped by truncated or divergent loops.
    pub residual_mass: SymExpr,
    /// True when the result is exact: every loop either terminated within the
    /// budget, was replaced by a verified invariant, or reached a fixpoint. In the
    /// last case `residual_mass` is the probability of non-termination.
    pub converged: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemError {
    #[error("{loc}: unsupported assignment '{what}': {why}")]
    UnsupportedAssignment { loc: Loc, what: String, why: String },
    #[error("{loc}: {source}")]
    Guard { loc: Loc, source: GfError },
    #[error("{loc}: invariant rejected{}", fmt_cex(.counterexample))]
    InvariantRejected { loc: Loc, counterexample: Option<State> },
    #[error("{loc}: {source}")]
    Sym { loc: Loc, source: SymError },
    #[error("{loc}: '{var}' cannot count its own samples")]
    SelfCountingIid { loc: Loc, var: String },
    #[error(transparent)]
    Equiv(Box<EquivError>),
    #[error(transparent)]
    Conditioning(GfError),
}

fn fmt_cex(c: &Option<State>) -> String {
    match c {
        Some(s) => format!(" (counterexample to induction: {})", fmt_state(s)),
        None => String::new(),
    }
}

pub fn fmt_state(s: &State) -> String {
    let parts: Vec<String> = s.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

/// Runs `p` on the input generating function.
pub fn transform(p: &ProgramAst, g: &EFps, strat: &LoopStrategy) -> Result<TransformResult, SemError> {
    let mut eng = Engine::new(p, strat);
    let efps = eng.block(&p.body, g.clone())?;
    Ok(TransformResult { efps, residual_mass: eng.residual, converged: eng.converged, notes: eng.notes })
}

/// Runs `p` and normalizes away the observation violations. The returned
/// `efps` has zero violation part.
pub fn conditioned(p: &ProgramAst, g: &EFps, strat: &LoopStrategy) -> Result<TransformResult, SemError> {
    let mut r = transform(p, g, strat)?;
    let n = normalize(&r.efps).map_err(SemError::Conditioning)?;
    if n.parametric {
        r.notes.push("normalizing constant depends on parameters; valid where it is nonzero".into());
    }
    r.efps = n.efps;
    Ok(r)
}

/// Result of unrolling one loop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unrolled {
    pub efps: EFps,
    pub residual_mass: SymExpr,
    pub converged: bool,
    pub iterations: usize,
}

/// Executes at most `k` iterations of `while (guard) { body }` from `g`.
/// Inner loops are unrolled with the same budget.
pub fn unroll_loop(guard: &Guard, body: &[Stmt], g: &EFps, k: usize) -> Result<Unrolled, SemError> {
    let strat = LoopStrategy::unroll(k);
    let p = ProgramAst::new(body.to_vec());
    let mut eng = Engine::new(&p, &strat);
    eng.unroll(guard, &p.body, g.clone(), k, true, Loc::default())
}

/// Replaces a loop by an invariant after checking it, and runs the invariant on `g`.
pub fn apply_invariant(
    guard: &Guard,
    body: &[Stmt],
    inv: &ProgramAst,
    g: &EFps,
    uast_asserted: bool,
) -> Result<TransformResult, SemError> {
    let lp = ProgramAst::new(vec![Stmt::new(StmtKind::While { guard: guard.clone(), body: body.to_vec() })]);
    let strat = LoopStrategy::Invariant { programs: vec![inv.clone()], uast_asserted };
    transform(&lp, g, &strat)
}

struct Engine<'a> {
    strat: &'a LoopStrategy,
    loop_ids: HashMap<*const Stmt, usize>,
    verified: HashMap<usize, ()>,
    residual: SymExpr,
    converged: bool,
    notes: Vec<String>,
}

impl<'a> Engine<'a> {
    fn new(p: &ProgramAst, strat: &'a LoopStrategy) -> Self {
        let mut loop_ids = HashMap::new();
        crate::lang::visit(&p.body, &mut |s| {
            if matches!(s.kind, StmtKind::While { .. }) {
                let n = loop_ids.len();
                loop_ids.insert(s as *const Stmt, n);
            }
        });
        Engine {
            strat,
            loop_ids,
            verified: HashMap::new(),
            residual: SymExpr::zero(),
            converged: true,
            notes: Vec::new(),
        }
    }

    fn block(&mut self, body: &[Stmt], mut g: EFps) -> Result<EFps, SemError> {
        for s in body {
            if g.dist.is_zero() {
                break;
            }
            g = self.stmt(s, g)?;
        }
        Ok(g)
    }

    fn stmt(&mut self, s: &Stmt, g: EFps) -> Result<EFps, SemError> {
        let loc = s.loc;
        let sym = |e: SymError| SemError::Sym { loc, source: e };
        let guard_err = |e: GfError| SemError::Guard { loc, source: e };
        match &s.kind {
            StmtKind::Skip => Ok(g),
            StmtKind::Assign { var, expr } => {
                let dist = assign(&g.dist, var, expr).map_err(|e| match e {
                    AssignError::Sym(e) => sym(e),
                    AssignError::Unsupported(why) => {
                        SemError::UnsupportedAssignment { loc, what: format!("{var} := {expr}"), why }
                    }
                })?;
                Ok(EFps::new(dist, g.violation))
            }
            StmtKind::Sample { var, dist } => {
                let x = program_var(var);
                let pgf = dist_pgf(dist, &x).map_err(sym)?;
                let cleared = g.dist.substitute(&x, &SymExpr::one()).map_err(sym)?;
                Ok(EFps::new(cleared.mul(&pgf), g.violation))
            }
            StmtKind::Iid { var, dist, count } => {
                if var == count {
                    return Err(SemError::SelfCountingIid { loc, var: var.clone() });
                }
                let x = program_var(var);
                let c = program_var(count);
                let pgf = dist_pgf(dist, &x).map_err(sym)?;
                let by = SymExpr::var(&c).mul(&pgf);
                Ok(EFps::new(g.dist.substitute(&c, &by).map_err(sym)?, g.violation))
            }
            StmtKind::PChoice { left, prob, right } => {
                let p = coef_expr(prob).map_err(sym)?;
                let q = SymExpr::one().sub(&p);
                let lin = EFps::from_dist(g.dist.mul(&p));
                let rin = EFps::from_dist(g.dist.mul(&q));
                let l = self.block(left, lin)?;
                let r = self.block(right, rin)?;
                Ok(with_violation(l.add(&r), &g.violation))
            }
            StmtKind::If { guard, then, els } => {
                let yes = gf::filter_dist(&g.dist, guard).map_err(guard_err)?;
                let no = g.dist.sub(&yes);
                let a = self.block(then, EFps::from_dist(yes))?;
                let b = self.block(els, EFps::from_dist(no))?;
                Ok(with_violation(a.add(&b), &g.violation))
            }
            StmtKind::Observe(guard) => {
                let yes = gf::filter_dist(&g.dist, guard).map_err(guard_err)?;
                let lost = mass_of(&g.dist.sub(&yes)).map_err(sym)?;
                Ok(EFps::new(yes, g.violation.add(&lost)))
            }
            StmtKind::While { guard, body } => self.while_loop(s, guard, body, g),
        }
    }

    fn while_loop(&mut self, s: &Stmt, guard: &Guard, body: &[Stmt], g: EFps) -> Result<EFps, SemError> {
        let id = self.loop_ids.get(&(s as *const Stmt)).copied();
        let (k, detect) = match self.strat {
            LoopStrategy::Unroll { max_iters, detect_fixpoint } => (*max_iters, *detect_fixpoint),
            LoopStrategy::Invariant { programs, uast_asserted } => {
                if let Some(inv) = id.and_then(|i| programs.get(i)) {
                    let id = id.unwrap();
                    if let std::collections::hash_map::Entry::Vacant(e) = self.verified.entry(id) {
                        match equiv::check_invariant(guard, body, inv).map_err(|e| SemError::Equiv(Box::new(e)))? {
                            EquivResult::Equal => {}
                            EquivResult::NotEqual { counterexample, .. } => {
                                return Err(SemError::InvariantRejected {
                                    loc: s.loc,
                                    counterexample: Some(counterexample),
                                })
                            }
                            EquivResult::Inconclusive { .. } => {
                                return Err(SemError::InvariantRejected { loc: s.loc, counterexample: None })
                            }
                        }
                        e.insert(());
                        if !uast_asserted {
                            self.notes.push(format!(
                                "{}: loop replaced by a verified invariant; exact if the loop terminates almost surely, an over-approximation otherwise",
                                s.loc
                            ));
                        }
                    }
                    let inv_strat = LoopStrategy::default();
                    let mut inner = Engine::new(inv, &inv_strat);
                    let out = inner.block(&inv.body, g)?;
                    self.absorb(inner);
                    return Ok(out);
                }
                (DEFAULT_UNROLL, true)
            }
        };
        let u = self.unroll(guard, body, g, k, detect, s.loc)?;
        if !u.residual_mass.is_zero() {
            self.residual = self.residual.add(&u.residual_mass);
        }
        if !u.converged {
            self.converged = false;
            self.notes.push(format!(
                "{}: loop truncated after {} iterations; the result is a lower bound",
                s.loc, u.iterations
            ));
        } else if !u.residual_mass.is_zero() {
            self.notes.push(format!("{}: loop reaches a fixpoint; the residual mass diverges", s.loc));
        }
        Ok(u.efps)
    }

    fn absorb(&mut self, other: Engine<'_>) {
        self.residual = self.residual.add(&other.residual);
        self.converged &= other.converged;
        self.notes.extend(other.notes);
    }

    fn unroll(
        &mut self,
        guard: &Guard,
        body: &[Stmt],
        g: EFps,
        k: usize,
        detect: bool,
        loc: Loc,
    ) -> Result<Unrolled, SemError> {
        let sym = |e: SymError| SemError::Sym { loc, source: e };
        let guard_err = |e: GfError| SemError::Guard { loc, source: e };
        let mut alive = gf::filter_dist(&g.dist, guard).map_err(guard_err)?;
        let mut out = EFps::new(g.dist.sub(&alive), g.violation.clone());
        for i in 0..k {
            if alive.is_zero() {
                return Ok(Unrolled { efps: out, residual_mass: SymExpr::zero(), converged: true, iterations: i });
            }
            let next = self.block(body, EFps::from_dist(alive.clone()))?;
            let next_alive = gf::filter_dist(&next.dist, guard).map_err(guard_err)?;
            let exit = next.dist.sub(&next_alive);
            if detect && exit.is_zero() && next.violation.is_zero() && next_alive.eq_canonical(&alive) {
                let residual = mass_of(&alive).map_err(sym)?;
                return Ok(Unrolled { efps: out, residual_mass: residual, converged: true, iterations: i + 1 });
            }
            out = EFps::new(out.dist.add(&exit), out.violation.add(&next.violation));
            alive = next_alive;
        }
        let converged = alive.is_zero();
        let residual = mass_of(&alive).map_err(sym)?;
        Ok(Unrolled { efps: out, residual_mass: residual, converged, iterations: k })
    }
}

fn with_violation(f: EFps, v: &SymExpr) -> EFps {
    EFps::new(f.dist, f.violation.add(v))
}

/// Probabilities and distribution arguments: names denote parameters.
pub fn coef_expr(c: &Coef) -> Result<SymExpr, SymError> {
    c.to_symexpr(&|n| Indeterminate::param(n))
}

/// Generating function of a distribution literal in the indeterminate `x`.
pub fn dist_pgf(d: &Dist, x: &Indeterminate) -> Result<SymExpr, SymError> {
    let xv = SymExpr::var(x);
    let one = SymExpr::one();
    let base = match &d.kind {
        DistKind::Bernoulli(p) => {
            let p = coef_expr(p)?;
            one.sub(&p).add(&p.mul(&xv))
        }
        DistKind::Geometric(p) => {
            let p = coef_expr(p)?;
            p.divide(&one.sub(&one.sub(&p).mul(&xv)))?
        }
        DistKind::Poisson(l) => {
            let l = coef_expr(l)?;
            let arg = l.mul(&xv.sub(&one));
            SymExpr::exp_of(&arg)?
        }
        DistKind::Uniform(a, b) => {
            let mut s = Poly::zero();
            let w = Rat::new(1.into(), ((b - a + 1) as i64).into());
            for i in *a..=*b {
                s = s.add(&Poly::var(x).pow(i as u32).scale(&w));
            }
            SymExpr::from_poly(s)
        }
        DistKind::Binomial(n, p) => {
            let p = coef_expr(p)?;
            one.sub(&p).add(&p.mul(&xv)).pow(*n as i64)?
        }
        DistKind::Dirac(n) => xv.pow(*n as i64)?,
    };
    if d.offset == 0 {
        Ok(base)
    } else {
        Ok(base.mul(&xv.pow(d.offset as i64)?))
    }
}

enum AssignError {
    Sym(SymError),
    Unsupported(String),
}

impl From<SymError> for AssignError {
    fn from(e: SymError) -> Self {
        AssignError::Sym(e)
    }
}

/// `constant + sum coeff_v * v` with natural coefficients.
fn linear_form(e: &ArithExpr) -> Option<(BTreeMap<String, u64>, u64)> {
    match e {
        ArithExpr::Num(n) => Some((BTreeMap::new(), *n)),
        ArithExpr::Var(v) => Some(([(v.clone(), 1)].into(), 0)),
        ArithExpr::Add(a, b) => {
            let (mut ca, ka) = linear_form(a)?;
            let (cb, kb) = linear_form(b)?;
            for (v, c) in cb {
                *ca.entry(v).or_insert(0) += c;
            }
            Some((ca, ka.checked_add(kb)?))
        }
        ArithExpr::Mul(a, b) => {
            let (n, other) = match (a.as_ref(), b.as_ref()) {
                (ArithExpr::Num(n), o) | (o, ArithExpr::Num(n)) => (*n, o),
                _ => return None,
            };
            let (c, k) = linear_form(other)?;
            Some((c.into_iter().map(|(v, c)| (v, c * n)).filter(|(_, c)| *c > 0).collect(), k.checked_mul(n)?))
        }
        ArithExpr::Sub(..) => None,
    }
}

fn assign(d: &SymExpr, var: &str, expr: &ArithExpr) -> Result<SymExpr, AssignError> {
    let (lin, monus) = match expr {
        ArithExpr::Sub(a, b) => match (linear_form(a), b.as_ref()) {
            (Some(l), ArithExpr::Num(n)) => (Some(l), *n),
            _ => (None, 0),
        },
        e => (linear_form(e), 0),
    };
    let Some((coeffs, constant)) = lin else {
        return assign_statewise(d, var, expr);
    };
    let x = program_var(var);
    let xv = SymExpr::var(&x);
    let self_coeff = coeffs.get(var).copied().unwrap_or(0);
    let mut out = match self_coeff {
        0 => d.substitute(&x, &SymExpr::one())?,
        1 => d.clone(),
        c => d.substitute(&x, &xv.pow(c as i64)?)?,
    };
    for (v, c) in &coeffs {
        if v == var || *c == 0 {
            continue;
        }
        let y = program_var(v);
        let by = SymExpr::var(&y).mul(&xv.pow(*c as i64)?);
        out = out.substitute(&y, &by)?;
    }
    if constant > 0 {
        out = out.mul(&xv.pow(constant as i64)?);
    }
    for _ in 0..monus {
        out = decrement(&out, &x)?;
    }
    Ok(out)
}

/// `x := x - 1` with truncation at zero.
fn decrement(d: &SymExpr, x: &Indeterminate) -> Result<SymExpr, SymError> {
    if d.is_polynomial_in(x) {
        let num = d.numerator().map_coeffs(|p| {
            p.map_monomials(|m| {
                let (e, rest) = m.split(x);
                Some(rest.mul(&crate::symexpr::Monomial::var(x, e.saturating_sub(1))))
            })
        });
        return SymExpr::from_parts(num, d.den_factors().map(|(f, e)| (f.clone(), e)));
    }
    let at_zero = d.substitute(x, &SymExpr::zero())?;
    let shifted = d.sub(&at_zero).divide(&SymExpr::var(x))?;
    Ok(shifted.add(&at_zero))
}

/// Arbitrary arithmetic, evaluated state by state. Needs finite support in
/// every variable involved.
fn assign_statewise(d: &SymExpr, var: &str, expr: &ArithExpr) -> Result<SymExpr, AssignError> {
    let mut names = vec![var.to_string()];
    expr.vars(&mut names);
    let iv: Vec<(String, Indeterminate)> = names.iter().map(|n| (n.clone(), program_var(n))).collect();
    if let Some((n, _)) = iv.iter().find(|(_, i)| !d.is_polynomial_in(i)) {
        return Err(AssignError::Unsupported(format!(
            "not a closed-form update and '{n}' does not have finite support"
        )));
    }
    let x = program_var(var);
    let num = d.numerator().map_coeffs(|p| {
        p.map_monomials(|m| {
            let value =
                expr.eval(&|name| iv.iter().find(|(n, _)| n == name).map(|(_, i)| m.exp_of(i) as u64).unwrap_or(0));
            let rest = m.without(&x);
            Some(rest.mul(&crate::symexpr::Monomial::var(&x, value as u32)))
        })
    });
    Ok(SymExpr::from_parts(num, d.den_factors().map(|(f, e)| (f.clone(), e)))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn efps(src: &str, vars: &[&str]) -> EFps {
        EFps::parse(src, vars).unwrap()
    }

    fn run(src: &str, input: &EFps) -> TransformResult {
        transform(&parse_program(src).unwrap(), input, &LoopStrategy::default()).unwrap()
    }

    #[test]
    fn even_die() {
        let r = run("x := uniform(1, 6); observe(x % 2 = 0);", &EFps::from_dist(SymExpr::one()));
        assert!(r.efps.eq_canonical(&efps("(x^2 + x^4 + x^6)/6 + 1/2*!", &["x"])));
        assert!(r.converged && r.residual_mass.is_zero());
    }

    #[test]
    fn diverging_branch_goes_to_residual() {
        let r = run("{x := 1;} [1/2] {diverge;}", &EFps::from_dist(SymExpr::one()));
        assert!(r.efps.eq_canonical(&efps("x/2", &["x"])));
        assert_eq!(r.residual_mass, SymExpr::ratio(1, 2));
        assert!(r.converged);
        let c = conditioned(
            &parse_program("{x := 1;} [1/2] {diverge;}").unwrap(),
            &EFps::from_dist(SymExpr::one()),
            &LoopStrategy::default(),
        )
        .unwrap();
        assert!(c.efps.eq_canonical(&efps("x/2", &["x"])));
    }

    #[test]
    fn observe_false_branch_renormalizes() {
        let p = parse_program("{x := 1;} [1/2] {observe(false);}").unwrap();
        let c = conditioned(&p, &EFps::from_dist(SymExpr::one()), &LoopStrategy::default()).unwrap();
        assert!(c.efps.eq_canonical(&efps("x", &["x"])));
    }

    #[test]
    fn partial_unrolling_keeps_residual() {
        let p = parse_program("while (h = 1) { {t := t + 1;} [1/2] {h := 0;} }").unwrap();
        let StmtKind::While { guard, body } = &p.body[0].kind else { unreachable!() };
        let u = unroll_loop(guard, body, &efps("h", &["h", "t"]), 4).unwrap();
        assert!(u.efps.eq_canonical(&efps("1/2 + t/4 + t^2/8 + t^3/16", &["h", "t"])));
        assert_eq!(u.residual_mass, SymExpr::ratio(1, 16));
        assert!(!u.converged);
    }

    #[test]
    fn trivial_loops() {
        let g = efps("1/(2 - x)", &["x"]);
        let r = run("while (true) { skip; }", &g);
        assert!(r.efps.is_zero());
        assert!(r.converged);
        assert_eq!(r.residual_mass, SymExpr::one());
        let r = run("while (false) { x := 0; }", &g);
        assert!(r.efps.eq_canonical(&g) && r.converged && r.residual_mass.is_zero());
    }

    #[test]
    fn monus_on_infinite_support() {
        let r = run("x := x - 1;", &efps("1/(2 - x)", &["x"]));
        assert!(r.efps.eq_canonical(&efps("3/4 + x/(4*(2 - x))", &["x"])));
    }

    #[test]
    fn observe_inside_loop_with_invariant() {
        let p = parse_program("while (h = 1) { {t := t + 1;} [1/2] {h := 0;} observe(h = 1); }").unwrap();
        let inv = parse_program("if (h = 1) { observe(false); }").unwrap();
        let strat = LoopStrategy::Invariant { programs: vec![inv], uast_asserted: false };
        let r = transform(&p, &efps("h", &["h", "t"]), &strat).unwrap();
        assert!(r.efps.eq_canonical(&efps("!", &["h", "t"])));
        assert_eq!(r.notes.len(), 1);
        assert!(matches!(
            conditioned(&p, &efps("h", &["h", "t"]), &strat),
            Err(SemError::Conditioning(GfError::UndefinedNormalization))
        ));
    }

    #[test]
    fn wrong_invariant_is_rejected_with_state() {
        let p = parse_program("while (y = 1) { {y := 0;} [1/2] {y := 1;} x := x + 1; observe(x < 3); }").unwrap();
        let inv = parse_program("if (y = 1) { x += iid(geometric(1/3), y); y := 0; observe(x < 3); }").unwrap();
        let strat = LoopStrategy::Invariant { programs: vec![inv], uast_asserted: true };
        match transform(&p, &efps("y", &["y", "x"]), &strat) {
            Err(SemError::InvariantRejected { counterexample: Some(s), .. }) => assert_eq!(s["y"], 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonlinear_assignment() {
        let r = run("x := uniform(1, 2); y := 3; x := x * y;", &EFps::from_dist(SymExpr::one()));
        assert!(r.efps.eq_canonical(&efps("(x^3 + x^6)/2*y^3", &["x", "y"])));
        let p = parse_program("x := geometric(1/2); y := x * x;").unwrap();
        assert!(matches!(
            transform(&p, &EFps::from_dist(SymExpr::one()), &LoopStrategy::default()),
            Err(SemError::UnsupportedAssignment { .. })
        ));
    }

    #[test]
    fn violation_passes_through() {
        let r = run("x := x + y; {y := 2;} [1/3] {skip;}", &efps("x*y + 1/4*!", &["x", "y"]));
        assert!(r.efps.eq_canonical(&efps("x^2*y/3*y + 2/3*x^2*y + 1/4*!", &["x", "y"])));
    }
}
