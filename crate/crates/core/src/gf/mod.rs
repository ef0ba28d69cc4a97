//! Generating functions of program states with an observation-violation part.

mod guard;

use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub use guard::{CmpOp, Guard, State};

use crate::lang::{parse_symexpr, ExprError};
use crate::symexpr::{Indeterminate, Kind, Monomial, Poly, Rat, SymError, SymExpr};

/// Largest support bound explored when a guard compares two variables.
pub const VAR_COMPARE_DEGREE_CAP: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GfError {
    #[error("unsupported guard '{0}': {1}")]
    UnsupportedGuard(String, String),
    #[error("conditioning is undefined: the observation is violated with probability one")]
    UndefinedNormalization,
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// A generating function over program states together with the accumulated
/// probability of observation violations.
///
/// The violation part never mentions program indeterminates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct EFps {
    pub dist: SymExpr,
    pub violation: SymExpr,
}

/// Result of conditioning on the absence of violations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub efps: EFps,
    /// True when the violation probability depends on parameters, so the
    /// quotient is only meaningful where it stays below one.
    pub parametric: bool,
}

pub fn program_var(name: &str) -> Indeterminate {
    Indeterminate::program(name)
}

impl EFps {
    pub fn new(dist: SymExpr, violation: SymExpr) -> Self {
        EFps { dist, violation }
    }

    pub fn from_dist(dist: SymExpr) -> Self {
        EFps { dist, violation: SymExpr::zero() }
    }

    /// Point mass on a single state.
    pub fn dirac(state: &State) -> Self {
        let m = Monomial::from_pairs(state.iter().map(|(v, e)| (program_var(v), *e as u32)).collect());
        EFps::from_dist(SymExpr::from_poly(Poly::term(m, Rat::from_integer(1.into()))))
    }

    pub fn zero() -> Self {
        EFps::default()
    }

    pub fn is_zero(&self) -> bool {
        self.dist.is_zero() && self.violation.is_zero()
    }

    pub fn add(&self, other: &EFps) -> EFps {
        EFps { dist: self.dist.add(&other.dist), violation: self.violation.add(&other.violation) }
    }

    pub fn sub(&self, other: &EFps) -> EFps {
        EFps { dist: self.dist.sub(&other.dist), violation: self.violation.sub(&other.violation) }
    }

    pub fn mul_scalar(&self, c: &SymExpr) -> EFps {
        EFps { dist: self.dist.mul(c), violation: self.violation.mul(c) }
    }

    /// Sum of the distribution part and `violation * !`.
    pub fn combined(&self) -> SymExpr {
        self.dist.add(&self.violation.mul(&SymExpr::var(&Indeterminate::violation())))
    }

    pub fn eq_canonical(&self, other: &EFps) -> bool {
        self.dist.eq_canonical(&other.dist) && self.violation.eq_canonical(&other.violation)
    }

    pub fn program_vars(&self) -> Vec<Indeterminate> {
        self.dist.vars().into_iter().filter(|v| v.kind() == Kind::Program).collect()
    }

    /// Parses the textual form `dist + violation*!`; `!` must occur linearly.
    pub fn parse<S: AsRef<str>>(src: &str, program_vars: &[S]) -> Result<EFps, ExprError> {
        let e = parse_symexpr(src, program_vars)?;
        EFps::split(&e).map_err(ExprError::Sym)
    }

    /// Splits an expression that is linear in `!` into its two parts.
    pub fn split(e: &SymExpr) -> Result<EFps, SymError> {
        let bolt = Indeterminate::violation();
        let dist = e.substitute(&bolt, &SymExpr::zero())?;
        let violation = e.derivative(&bolt).substitute(&bolt, &SymExpr::zero())?;
        let rebuilt = dist.add(&violation.mul(&SymExpr::var(&bolt)));
        if !rebuilt.eq_canonical(e) {
            return Err(SymError::DivisorUnsupported);
        }
        Ok(EFps { dist, violation })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(EFpsJson { dist: self.dist.to_string(), violation: self.violation.to_string() })
            .expect("string fields always serialize")
    }

    pub fn from_json<S: AsRef<str>>(v: &serde_json::Value, program_vars: &[S]) -> Result<EFps, ExprError> {
        let j: EFpsJson = serde_json::from_value(v.clone())
            .map_err(|e| ExprError::Parse(crate::lang::ParseError { line: 0, col: 0, message: e.to_string() }))?;
        Ok(EFps { dist: parse_symexpr(&j.dist, program_vars)?, violation: parse_symexpr(&j.violation, program_vars)? })
    }
}

#[derive(Serialize, Deserialize)]
struct EFpsJson {
    dist: String,
    violation: String,
}

impl fmt::Display for EFps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violation.is_zero() {
            write!(f, "{}", self.dist)
        } else if self.dist.is_zero() {
            write!(f, "({})*!", self.violation)
        } else {
            write!(f, "{} + ({})*!", self.dist, self.violation)
        }
    }
}

/// Total probability of the distribution part: every program indeterminate set to one.
pub fn mass(f: &EFps) -> Result<SymExpr, SymError> {
    mass_of(&f.dist)
}

pub fn mass_of(d: &SymExpr) -> Result<SymExpr, SymError> {
    let mut m = d.clone();
    for v in d.vars() {
        if v.kind() == Kind::Program {
            m = m.substitute(&v, &SymExpr::one())?;
        }
    }
    Ok(m)
}

/// Restricts the distribution part to the states satisfying `g`. The result
/// carries no violation mass.
pub fn filter(f: &EFps, g: &Guard) -> Result<EFps, GfError> {
    Ok(EFps::from_dist(filter_dist(&f.dist, g)?))
}

pub fn filter_dist(d: &SymExpr, g: &Guard) -> Result<SymExpr, GfError> {
    if d.is_zero() {
        return Ok(SymExpr::zero());
    }
    let vars = g.vars();
    if vars.iter().all(|v| d.is_polynomial_in(&program_var(v))) {
        return Ok(filter_statewise(d, g, &vars));
    }
    match g {
        Guard::True => Ok(d.clone()),
        Guard::False => Ok(SymExpr::zero()),
        Guard::Cmp { var, op, value } => filter_cmp(d, var, *op, *value),
        Guard::Mod { var, modulus, residue } => {
            if residue >= modulus {
                return Ok(SymExpr::zero());
            }
            if *modulus != 2 {
                return Err(GfError::UnsupportedGuard(
                    g.to_string(),
                    "only parity is supported for infinite support".into(),
                ));
            }
            let v = program_var(var);
            let mirrored = d.substitute(&v, &SymExpr::var(&v).neg())?;
            let half = Rat::new(1.into(), 2.into());
            Ok(if *residue == 0 { d.add(&mirrored) } else { d.sub(&mirrored) }.scale(&half))
        }
        Guard::CmpVar { lhs, op, rhs } => filter_var_var(d, g, lhs, *op, rhs),
        Guard::And(a, b) => filter_dist(&filter_dist(d, a)?, b),
        Guard::Or(a, b) => {
            let first = filter_dist(d, a)?;
            let rest = d.sub(&first);
            Ok(first.add(&filter_dist(&rest, b)?))
        }
        Guard::Not(a) => Ok(d.sub(&filter_dist(d, a)?)),
    }
}

/// Keeps the monomials whose exponents satisfy the guard. Valid whenever the
/// expression is a polynomial in every variable the guard reads.
fn filter_statewise(d: &SymExpr, g: &Guard, vars: &[String]) -> SymExpr {
    let iv: Vec<(String, Indeterminate)> = vars.iter().map(|v| (v.clone(), program_var(v))).collect();
    let num = d.numerator().map_coeffs(|p| {
        p.filter_terms(|m| {
            g.eval(&|name| iv.iter().find(|(n, _)| n == name).map(|(_, i)| m.exp_of(i) as u64).unwrap_or(0))
        })
    });
    SymExpr::from_parts(num, d.den_factors().map(|(f, e)| (f.clone(), e))).expect("denominator factors are non-zero")
}

fn filter_cmp(d: &SymExpr, var: &str, op: CmpOp, value: u64) -> Result<SymExpr, GfError> {
    let v = program_var(var);
    let below = |n: u64| -> Result<SymExpr, GfError> { Ok(truncate(d, &v, n)?) };
    Ok(match op {
        CmpOp::Lt => below(value)?,
        CmpOp::Le => below(value + 1)?,
        CmpOp::Ge => d.sub(&below(value)?),
        CmpOp::Gt => d.sub(&below(value + 1)?),
        CmpOp::Eq => exact_term(d, &v, value)?,
        CmpOp::Ne => d.sub(&exact_term(d, &v, value)?),
    })
}

/// `sum_{i < n} coeff_i(v) * v^i`
fn truncate(d: &SymExpr, v: &Indeterminate, n: u64) -> Result<SymExpr, SymError> {
    if n == 0 {
        return Ok(SymExpr::zero());
    }
    let cs = d.taylor_coeffs(v, n as usize - 1)?;
    let mut out = SymExpr::zero();
    for (i, c) in cs.into_iter().enumerate() {
        out = out.add(&c.mul(&SymExpr::var(v).pow(i as i64)?));
    }
    Ok(out)
}

fn exact_term(d: &SymExpr, v: &Indeterminate, n: u64) -> Result<SymExpr, SymError> {
    Ok(d.taylor_coeff(v, n as u32)?.mul(&SymExpr::var(v).pow(n as i64)?))
}

/// Marginal of `var` when it has finite support: the largest value it takes.
fn finite_support_bound(d: &SymExpr, var: &str) -> Option<u32> {
    let v = program_var(var);
    if d.is_polynomial_in(&v) {
        return Some(d.numerator().degree_in(&v));
    }
    let mut m = d.clone();
    for w in d.vars() {
        if w.kind() == Kind::Program && w != v {
            m = m.substitute(&w, &SymExpr::one()).ok()?;
        }
    }
    m.is_polynomial_in(&v).then(|| m.numerator().degree_in(&v))
}

fn filter_var_var(d: &SymExpr, g: &Guard, lhs: &str, op: CmpOp, rhs: &str) -> Result<SymExpr, GfError> {
    let (fixed, other, op) = match (finite_support_bound(d, rhs), finite_support_bound(d, lhs)) {
        (Some(b), _) if b <= VAR_COMPARE_DEGREE_CAP => ((rhs, b), lhs, op),
        (_, Some(b)) if b <= VAR_COMPARE_DEGREE_CAP => ((lhs, b), rhs, op.flip()),
        _ => return Err(GfError::UnsupportedGuard(g.to_string(), "neither variable has finite support".into())),
    };
    let (name, bound) = fixed;
    let fv = program_var(name);
    let slices = d.taylor_coeffs(&fv, bound as usize)?;
    let mut out = SymExpr::zero();
    for (j, slice) in slices.into_iter().enumerate() {
        if slice.is_zero() {
            continue;
        }
        let kept = filter_dist(&slice, &Guard::cmp(other, op, j as u64))?;
        out = out.add(&kept.mul(&SymExpr::var(&fv).pow(j as i64)?));
    }
    Ok(out)
}

/// Conditions on the absence of violations: `dist / (1 - violation)`.
pub fn normalize(f: &EFps) -> Result<Normalized, GfError> {
    if f.violation.is_zero() {
        return Ok(Normalized { efps: EFps::from_dist(f.dist.clone()), parametric: false });
    }
    let keep = SymExpr::one().sub(&f.violation);
    if keep.is_zero() {
        return Err(GfError::UndefinedNormalization);
    }
    let parametric = f.violation.vars().iter().any(|v| v.kind() == Kind::Parameter);
    let dist = f.dist.divide(&keep)?;
    Ok(Normalized { efps: EFps::from_dist(dist), parametric })
}

/// Probability of one state. Variables absent from `s` are taken to be zero.
pub fn coefficient(f: &EFps, s: &State) -> Result<SymExpr, SymError> {
    coefficient_of(&f.dist, s)
}

pub fn coefficient_of(d: &SymExpr, s: &State) -> Result<SymExpr, SymError> {
    let mut names: Vec<String> = s.keys().cloned().collect();
    for v in d.vars() {
        if v.kind() == Kind::Program && !names.iter().any(|n| n == v.name()) {
            names.push(v.name().to_string());
        }
    }
    let mut e = d.clone();
    for n in names {
        let k = s.get(&n).copied().unwrap_or(0);
        e = e.taylor_coeff(&program_var(&n), k.to_u32().ok_or(SymError::SingularAtZero)?)?;
    }
    Ok(e)
}

/// Coefficient-wise comparison `a <= b` over every state of total size at most
/// `order`, and over the violation part. Both inputs must be parameter-free.
pub fn series_leq(a: &EFps, b: &EFps, order: u32) -> Result<bool, SymError> {
    let mut vars: Vec<Indeterminate> = a.program_vars();
    for v in b.program_vars() {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let diff = b.dist.sub(&a.dist);
    let coeffs = diff.series_expand(&vars, order)?;
    for c in coeffs.values() {
        if c.sign() == Some(std::cmp::Ordering::Less) {
            return Ok(false);
        }
    }
    let dv = b.violation.sub(&a.violation);
    Ok(dv.sign() != Some(std::cmp::Ordering::Less))
}

#[cfg(test)]
mod tests;
