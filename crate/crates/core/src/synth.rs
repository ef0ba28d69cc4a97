//! Parameter synthesis for invariant templates.
//!
//! The template is a loop-free program whose distribution parameters are
//! unknowns. It is an invariant exactly when its second-order transform agrees
//! with that of one loop unfolding followed by the template. Clearing
//! denominators turns this into one polynomial equation per output monomial.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::equiv::{self, check_invariant, EquivError, EquivResult};
use crate::gf::Guard;
use crate::lang::{parse_coef, ProgramAst, Stmt};
use crate::symexpr::{Indeterminate, Kind, Monomial, Poly, Rat, SymError, SymExpr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("closed form contains exponentials; only rational constraint systems are supported")]
    NonRationalClosedForm,
    #[error(transparent)]
    Equiv(#[from] EquivError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// One polynomial equation `poly = 0` over parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub poly: Poly,
    /// Monomial over program, `@` and violation indeterminates whose coefficient
    /// produced this equation.
    pub source: Monomial,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConstraintSystem {
    pub equations: Vec<Equation>,
    /// Parameters that may be chosen. Other parameters are treated as symbolic
    /// constants.
    pub unknowns: BTreeSet<String>,
}

impl ConstraintSystem {
    pub fn from_polys(polys: Vec<Poly>, unknowns: &[&str]) -> Self {
        ConstraintSystem {
            equations: polys.into_iter().map(|poly| Equation { poly, source: Monomial::one() }).collect(),
            unknowns: unknowns.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Each equation rendered as `poly = 0`.
    pub fn render(&self) -> Vec<String> {
        self.equations.iter().map(|e| format!("{} = 0", e.poly)).collect()
    }

    /// SMT-LIB style rendering, one assertion per equation.
    pub fn to_smtlib(&self) -> String {
        let mut names = BTreeSet::new();
        for e in &self.equations {
            names.extend(e.poly.vars().into_iter().map(|v| v.name().to_string()));
        }
        let mut out = String::new();
        for n in &names {
            out.push_str(&format!("(declare-const {n} Real)\n"));
        }
        for e in &self.equations {
            out.push_str(&format!("(assert (= {} 0))\n", smt_poly(&e.poly)));
        }
        out
    }
}

fn smt_rat(r: &Rat) -> String {
    let body =
        if r.is_integer() { format!("{}", r.numer().abs()) } else { format!("(/ {} {})", r.numer().abs(), r.denom()) };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn smt_poly(p: &Poly) -> String {
    let terms: Vec<String> = p
        .terms()
        .map(|(m, c)| {
            let mut factors = vec![smt_rat(c)];
            for (v, e) in m.iter() {
                for _ in 0..*e {
                    factors.push(v.name().to_string());
                }
            }
            if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                format!("(* {})", factors.join(" "))
            }
        })
        .collect();
    match terms.len() {
        0 => "0".into(),
        1 => terms[0].clone(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SynthOutcome {
    /// Every listed assignment discharges all equations. Values may mention
    /// parameters that are not unknowns.
    Solved {
        solutions: Vec<BTreeMap<String, SymExpr>>,
    },
    NoSolution,
    Unsolved {
        residual: ConstraintSystem,
    },
}

/// Builds the constraint system for `template` to be an invariant of
/// `while (guard) { body }`.
pub fn extract_constraints(
    guard: &Guard,
    body: &[Stmt],
    template: &ProgramAst,
) -> Result<ConstraintSystem, SynthError> {
    let unfolded = equiv::unfold_once(guard, body, template);
    let (_, a, b) = equiv::second_order_pair(template, &unfolded)?;
    let diff = a.combined().sub(&b.combined());
    if diff.has_exp() {
        return Err(SynthError::NonRationalClosedForm);
    }
    let num = diff.numerator().as_poly().ok_or(SynthError::NonRationalClosedForm)?;
    let mut grouped: BTreeMap<Monomial, Poly> = BTreeMap::new();
    for (m, c) in num.terms() {
        let (params, rest): (Vec<_>, Vec<_>) = m.iter().cloned().partition(|(v, _)| v.kind() == Kind::Parameter);
        grouped
            .entry(Monomial::from_pairs(rest))
            .or_insert_with(Poly::zero)
            .add_term(Monomial::from_pairs(params), c.clone());
    }
    let loop_params = ProgramAst::new(body.to_vec()).parameters();
    let unknowns = template.parameters().difference(&loop_params).cloned().collect();
    let mut equations: Vec<Equation> = Vec::new();
    for (source, poly) in grouped.into_iter().filter(|(_, p)| !p.is_zero()) {
        let poly = poly.primitive().1;
        if !equations.iter().any(|e| e.poly == poly) {
            equations.push(Equation { poly, source });
        }
    }
    Ok(ConstraintSystem { equations, unknowns })
}

enum Branch {
    Solutions(Vec<BTreeMap<String, SymExpr>>),
    Contradiction,
    Stuck(Vec<Poly>),
}

/// Solves the system by eliminating unknowns that occur linearly and by
/// rational-root search on univariate equations, branching over roots.
pub fn solve(sys: &ConstraintSystem) -> SynthOutcome {
    let eqs = sys.equations.iter().map(|e| e.poly.clone()).collect();
    match search(eqs, &sys.unknowns, BTreeMap::new()) {
        Branch::Solutions(mut s) => {
            s.dedup();
            SynthOutcome::Solved { solutions: s }
        }
        Branch::Contradiction => SynthOutcome::NoSolution,
        Branch::Stuck(polys) => SynthOutcome::Unsolved {
            residual: ConstraintSystem {
                equations: polys.into_iter().map(|poly| Equation { poly, source: Monomial::one() }).collect(),
                unknowns: sys.unknowns.clone(),
            },
        },
    }
}

fn tidy(eqs: Vec<Poly>) -> Vec<Poly> {
    let mut out: Vec<Poly> = Vec::new();
    for e in eqs {
        if e.is_zero() {
            continue;
        }
        let p = e.primitive().1;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

fn substitute_eq(e: &Poly, v: &Indeterminate, by: &SymExpr) -> Poly {
    let s = SymExpr::from_poly(e.clone()).substitute(v, by).expect("parameter substitution is total");
    s.numerator().as_poly().expect("parameter substitution stays rational")
}

fn search(eqs: Vec<Poly>, unknowns: &BTreeSet<String>, assign: BTreeMap<String, SymExpr>) -> Branch {
    let eqs = tidy(eqs);
    if eqs.iter().any(|e| e.is_constant()) {
        return Branch::Contradiction;
    }
    if eqs.is_empty() {
        return Branch::Solutions(vec![assign]);
    }
    let is_unknown = |v: &Indeterminate| unknowns.contains(v.name());

    // Prefer a linear occurrence with a constant coefficient; it is valid
    // without side conditions.
    let mut linear: Option<(usize, Indeterminate, bool)> = None;
    for (i, e) in eqs.iter().enumerate() {
        for v in e.vars().into_iter().filter(|v| is_unknown(v)) {
            if e.degree_in(&v) == 1 {
                let a = &e.as_univariate(&v)[1];
                let constant = a.is_constant();
                if linear.as_ref().is_none_or(|(_, _, c)| constant && !c) {
                    linear = Some((i, v.clone(), constant));
                }
            }
        }
    }
    if let Some((i, v, _)) = linear {
        let parts = eqs[i].as_univariate(&v);
        let value = SymExpr::from_poly(parts[0].neg()).divide(&SymExpr::from_poly(parts[1].clone()));
        let Ok(value) = value else { return Branch::Stuck(eqs) };
        return eliminate(&eqs, unknowns, assign, &v, &value);
    }

    for e in &eqs {
        let vars = e.vars();
        if vars.len() == 1 {
            let v = vars.into_iter().next().unwrap();
            if !is_unknown(&v) {
                continue;
            }
            let roots = rational_roots(&e.as_univariate(&v));
            if roots.is_empty() {
                return Branch::Stuck(eqs);
            }
            let mut sols = Vec::new();
            let mut stuck = None;
            for r in roots {
                match eliminate(&eqs, unknowns, assign.clone(), &v, &SymExpr::constant(r)) {
                    Branch::Solutions(s) => sols.extend(s),
                    Branch::Contradiction => {}
                    Branch::Stuck(s) => stuck = stuck.or(Some(s)),
                }
            }
            return if !sols.is_empty() {
                Branch::Solutions(sols)
            } else if let Some(s) = stuck {
                Branch::Stuck(s)
            } else {
                Branch::Contradiction
            };
        }
    }
    Branch::Stuck(eqs)
}

fn eliminate(
    eqs: &[Poly],
    unknowns: &BTreeSet<String>,
    mut assign: BTreeMap<String, SymExpr>,
    v: &Indeterminate,
    value: &SymExpr,
) -> Branch {
    let rest: Vec<Poly> = eqs.iter().map(|e| substitute_eq(e, v, value)).collect();
    for val in assign.values_mut() {
        *val = val.substitute(v, value).expect("parameter substitution is total");
    }
    assign.insert(v.name().to_string(), value.clone());
    search(rest, unknowns, assign)
}

const ROOT_SEARCH_LIMIT: u64 = 1_000_000;

fn divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let n = n.abs().to_u64()?;
    if n > ROOT_SEARCH_LIMIT * ROOT_SEARCH_LIMIT {
        return None;
    }
    let mut out = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(BigInt::from(d));
            if d * d != n {
                out.push(BigInt::from(n / d));
            }
        }
        d += 1;
        if d > ROOT_SEARCH_LIMIT {
            return None;
        }
    }
    Some(out)
}

fn eval_univariate(coeffs: &[Rat], x: &Rat) -> Rat {
    coeffs.iter().rev().fold(Rat::zero(), |acc, c| acc * x + c)
}

/// Rational roots of a univariate polynomial with constant coefficients
/// (`coeffs[i]` multiplies `x^i`), in increasing order.
pub fn rational_roots(coeffs: &[Poly]) -> Vec<Rat> {
    let Some(mut c): Option<Vec<Rat>> =
        coeffs.iter().map(|p| if p.is_zero() { Some(Rat::zero()) } else { p.constant_value() }).collect()
    else {
        return Vec::new();
    };
    while c.last().is_some_and(|x| x.is_zero()) {
        c.pop();
    }
    let mut roots = Vec::new();
    let lead_zeros = c.iter().take_while(|x| x.is_zero()).count();
    if lead_zeros > 0 && lead_zeros < c.len() {
        roots.push(Rat::zero());
        c.drain(..lead_zeros);
    }
    if c.len() < 2 {
        return roots;
    }
    let lcm = c.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    let ints: Vec<BigInt> = c.iter().map(|r| (r * Rat::from_integer(lcm.clone())).to_integer()).collect();
    let (Some(ps), Some(qs)) = (divisors(&ints[0]), divisors(ints.last().unwrap())) else {
        return roots;
    };
    let mut found = BTreeSet::new();
    for p in &ps {
        for q in &qs {
            for s in [1, -1] {
                let cand = Rat::new(p * s, q.clone());
                if eval_univariate(&c, &cand).is_zero() {
                    found.insert(cand);
                }
            }
        }
    }
    roots.extend(found);
    roots.sort();
    roots
}

/// Substitutes an assignment into the template's parameters.
pub fn instantiate(template: &ProgramAst, assignment: &BTreeMap<String, SymExpr>) -> ProgramAst {
    let mut p = template.clone();
    for (name, value) in assignment {
        let coef = parse_coef(&value.to_string()).expect("rendered expressions parse back");
        p = p.substitute_param(name, &coef);
    }
    p
}

/// Result of [`synthesize`]: the constraint system, the solver outcome with
/// every solution re-verified, and solutions that failed re-verification.
#[derive(Clone, Debug)]
pub struct SynthReport {
    pub system: ConstraintSystem,
    pub outcome: SynthOutcome,
    pub rejected: Vec<BTreeMap<String, SymExpr>>,
}

/// Extracts, solves and re-checks every candidate with [`check_invariant`].
pub fn synthesize(guard: &Guard, body: &[Stmt], template: &ProgramAst) -> Result<SynthReport, SynthError> {
    let system = extract_constraints(guard, body, template)?;
    let outcome = solve(&system);
    let mut rejected = Vec::new();
    let outcome = match outcome {
        SynthOutcome::Solved { solutions } => {
            let mut ok = Vec::new();
            for s in solutions {
                let inst = instantiate(template, &s);
                if check_invariant(guard, body, &inst)? == EquivResult::Equal {
                    ok.push(s);
                } else {
                    rejected.push(s);
                }
            }
            if ok.is_empty() {
                SynthOutcome::Unsolved { residual: system.clone() }
            } else {
                SynthOutcome::Solved { solutions: ok }
            }
        }
        other => other,
    };
    Ok(SynthReport { system, outcome, rejected })
}
