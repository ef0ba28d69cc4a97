//! Exact symbolic expressions: rationals, polynomials, exp-polynomials and
//! rational functions over them.

mod exppoly;
mod expr;
mod indet;
mod monomial;
mod poly;

pub use exppoly::ExpPoly;
pub use expr::SymExpr;
pub use indet::{Indeterminate, Kind};
pub use monomial::Monomial;
pub use poly::Poly;

use num_traits::ToPrimitive;

/// Exact rational number with arbitrary precision.
pub type Rat = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SymError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("divisor form is not supported")]
    DivisorUnsupported,
    #[error("substitution leaves a denominator that is not invertible as a power series")]
    IllDefinedProjection,
    #[error("exponent argument would stop being a polynomial")]
    NonPolynomialExpArg,
    #[error("expression has a pole at the expansion point")]
    SingularAtZero,
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(n.into(), d.into())
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}
