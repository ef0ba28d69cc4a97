//! Moments, event probabilities, tail bounds and marginals of a result.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

use crate::gf::{self, program_var, EFps, GfError, Guard, State};
use crate::symexpr::{Kind, Rat, SymError, SymExpr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Gf(#[from] GfError),
    #[error("tail bound threshold must be positive")]
    ZeroThreshold,
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentKind {
    Raw,
    Factorial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Expectation(String),
    Moment(String, u32, MomentKind),
    Variance(String),
    Probability(Guard),
    TailBound(String, u64),
    Marginal(Vec<String>),
    Coefficient(State),
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Query::Expectation(v) => write!(f, "E[{v}]"),
            Query::Moment(v, k, MomentKind::Raw) => write!(f, "E[{v}^{k}]"),
            Query::Moment(v, k, MomentKind::Factorial) => write!(f, "E[{v}_{k}]"),
            Query::Variance(v) => write!(f, "Var[{v}]"),
            Query::Probability(g) => write!(f, "Pr[{g}]"),
            Query::TailBound(v, n) => write!(f, "Pr[{v} > {n}] <="),
            Query::Marginal(vs) => write!(f, "marginal({})", vs.join(", ")),
            Query::Coefficient(s) => write!(f, "Pr[{}]", crate::semantics::fmt_state(s)),
        }
    }
}

/// Parses `E[x]`, `E[x^k]`, `E[x_k]` (factorial), `Var[x]`, `Pr[guard]`,
/// `tail[x, n]` and `marginal[x, y]`.
pub fn parse_query(src: &str) -> Result<Query, String> {
    let s = src.trim();
    let open = s.find('[').ok_or_else(|| format!("expected '[' in query '{s}'"))?;
    if !s.ends_with(']') {
        return Err(format!("expected ']' at the end of query '{s}'"));
    }
    let head = s[..open].trim();
    let arg = s[open + 1..s.len() - 1].trim();
    let ident = |t: &str| -> Result<String, String> {
        let t = t.trim();
        if !t.is_empty()
            && t.chars().all(|c| c.is_alphanumeric() || c == '_')
            && !t.starts_with(|c: char| c.is_ascii_digit())
        {
            Ok(t.to_string())
        } else {
            Err(format!("expected a variable name, found '{t}'"))
        }
    };
    let number =
        |t: &str| t.trim().parse::<u64>().map_err(|_| format!("expected a natural number, found '{}'", t.trim()));
    match head {
        "E" => {
            if let Some((v, k)) = arg.split_once('^') {
                Ok(Query::Moment(ident(v)?, number(k)? as u32, MomentKind::Raw))
            } else if let Some((v, k)) = arg.rsplit_once('_').filter(|(_, k)| k.trim().parse::<u32>().is_ok()) {
                Ok(Query::Moment(ident(v)?, number(k)? as u32, MomentKind::Factorial))
            } else {
                Ok(Query::Expectation(ident(arg)?))
            }
        }
        "Var" => Ok(Query::Variance(ident(arg)?)),
        "Pr" => crate::lang::parse_guard(arg).map(Query::Probability).map_err(|e| e.to_string()),
        "tail" => {
            let (v, n) = arg.split_once(',').ok_or("expected 'tail[var, n]'")?;
            Ok(Query::TailBound(ident(v)?, number(n)?))
        }
        "marginal" => Ok(Query::Marginal(arg.split(',').map(ident).collect::<Result<_, _>>()?)),
        _ => Err(format!("unknown query '{head}'")),
    }
}

/// Sets every program variable except `keep` to 1.
pub fn marginal_dist(d: &SymExpr, keep: &[&str]) -> Result<SymExpr, SymError> {
    let mut out = d.clone();
    for v in d.vars() {
        if v.kind() == Kind::Program && !keep.contains(&v.name()) {
            out = out.substitute(&v, &SymExpr::one())?;
        }
    }
    Ok(out)
}

/// Marginal distribution over `vars`; the violation part is kept.
pub fn marginal(f: &EFps, vars: &[&str]) -> Result<EFps, QueryError> {
    Ok(EFps::new(marginal_dist(&f.dist, vars)?, f.violation.clone()))
}

/// `d^k/dv^k` of the distribution at all-ones.
pub fn factorial_moment(f: &EFps, v: &str, k: u32) -> Result<SymExpr, QueryError> {
    let x = program_var(v);
    let m = marginal_dist(&f.dist, &[v])?;
    Ok(m.nth_derivative(&x, k).substitute(&x, &SymExpr::one())?)
}

pub fn expectation(f: &EFps, v: &str) -> Result<SymExpr, QueryError> {
    factorial_moment(f, v, 1)
}

/// Stirling numbers of the second kind `S(k, j)` for `j = 0..=k`.
fn stirling2(k: u32) -> Vec<Rat> {
    let k = k as usize;
    let mut row = vec![Rat::zero(); k + 1];
    row[0] = Rat::from_integer(1.into());
    for n in 1..=k {
        let mut next = vec![Rat::zero(); k + 1];
        for j in 1..=n {
            next[j] = Rat::from_integer((j as i64).into()) * &row[j] + &row[j - 1];
        }
        row = next;
    }
    row
}

pub fn moment(f: &EFps, v: &str, k: u32, kind: MomentKind) -> Result<SymExpr, QueryError> {
    match kind {
        MomentKind::Factorial => factorial_moment(f, v, k),
        MomentKind::Raw => {
            let x = program_var(v);
            let m = marginal_dist(&f.dist, &[v])?;
            let s = stirling2(k);
            let mut total = SymExpr::zero();
            let mut deriv = m;
            for (j, c) in s.iter().enumerate() {
                if j > 0 {
                    deriv = deriv.derivative(&x);
                }
                if !c.is_zero() {
                    total = total.add(&deriv.substitute(&x, &SymExpr::one())?.scale(c));
                }
            }
            Ok(total)
        }
    }
}

pub fn variance(f: &EFps, v: &str) -> Result<SymExpr, QueryError> {
    let m1 = moment(f, v, 1, MomentKind::Raw)?;
    let m2 = moment(f, v, 2, MomentKind::Raw)?;
    Ok(m2.sub(&m1.mul(&m1)))
}

pub fn probability(f: &EFps, g: &Guard) -> Result<SymExpr, QueryError> {
    let d = gf::filter_dist(&f.dist, g)?;
    Ok(gf::mass_of(&d)?)
}

/// Markov bound `E[v] / n`. It bounds `Pr(v >= n)` and therefore `Pr(v > n)`.
pub fn tail_bound(f: &EFps, v: &str, n: u64) -> Result<SymExpr, QueryError> {
    if n == 0 {
        return Err(QueryError::ZeroThreshold);
    }
    Ok(expectation(f, v)?.scale(&Rat::new(1.into(), n.into())))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Value(SymExpr),
    Dist(EFps),
}

impl std::fmt::Display for Answer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Answer::Value(v) => write!(f, "{v}"),
            Answer::Dist(d) => write!(f, "{d}"),
        }
    }
}

impl Answer {
    pub fn to_f64(&self) -> Option<f64> {
        match self {
            Answer::Value(v) => v.to_f64(),
            Answer::Dist(_) => None,
        }
    }
}

/// Evaluates a query. Variables are checked against `known` when it is non-empty.
pub fn answer(f: &EFps, q: &Query, known: &[String]) -> Result<Answer, QueryError> {
    let mut used = BTreeSet::new();
    match q {
        Query::Expectation(v) | Query::Moment(v, _, _) | Query::Variance(v) | Query::TailBound(v, _) => {
            used.insert(v.clone());
        }
        Query::Probability(g) => used.extend(g.vars()),
        Query::Marginal(vs) => used.extend(vs.iter().cloned()),
        Query::Coefficient(s) => used.extend(s.keys().cloned()),
    }
    if !known.is_empty() {
        if let Some(v) = used.iter().find(|v| !known.contains(v)) {
            return Err(QueryError::UnknownVariable(v.clone()));
        }
    }
    Ok(match q {
        Query::Expectation(v) => Answer::Value(expectation(f, v)?),
        Query::Moment(v, k, kind) => Answer::Value(moment(f, v, *k, *kind)?),
        Query::Variance(v) => Answer::Value(variance(f, v)?),
        Query::Probability(g) => Answer::Value(probability(f, g)?),
        Query::TailBound(v, n) => Answer::Value(tail_bound(f, v, *n)?),
        Query::Marginal(vs) => {
            let keep: Vec<&str> = vs.iter().map(String::as_str).collect();
            Answer::Dist(marginal(f, &keep)?)
        }
        Query::Coefficient(s) => Answer::Value(gf::coefficient(f, s)?),
    })
}

/// Convenience check that a value is a nonnegative rational.
pub fn is_nonnegative_rational(e: &SymExpr) -> bool {
    e.constant_value().is_some_and(|c| !c.is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::rat;

    fn f(src: &str) -> EFps {
        EFps::parse(src, &["t", "x"]).unwrap()
    }

    #[test]
    fn odd_geometric_queries() {
        let post = f("3*t/(4 - t^2)");
        assert_eq!(expectation(&post, "t").unwrap(), SymExpr::ratio(5, 3));
        assert_eq!(tail_bound(&post, "t", 100).unwrap(), SymExpr::ratio(1, 60));
        let second = factorial_moment(&post, "t", 2).unwrap();
        assert_eq!(second, SymExpr::ratio(26, 9));
        // sum of n(n-1) * Pr(t = n) with Pr(t = 2k+1) = 3/4^(k+1)
        let series: f64 = (0..60)
            .map(|k| {
                let n = (2 * k + 1) as f64;
                n * (n - 1.0) * 3.0 / 4f64.powi(k + 1)
            })
            .sum();
        assert!((second.to_f64().unwrap() - series).abs() < 1e-9);
        assert_eq!(tail_bound(&post, "t", 0), Err(QueryError::ZeroThreshold));
    }

    #[test]
    fn geometric_variance_and_dirac_moments() {
        let g = f("1/(2 - x)");
        assert_eq!(expectation(&g, "x").unwrap(), SymExpr::one());
        assert_eq!(variance(&g, "x").unwrap(), SymExpr::int(2));
        assert_eq!(tail_bound(&g, "x", 10).unwrap(), SymExpr::ratio(1, 10));
        let d = f("x^7");
        assert_eq!(moment(&d, "x", 2, MomentKind::Raw).unwrap(), SymExpr::int(49));
        assert_eq!(moment(&d, "x", 3, MomentKind::Raw).unwrap(), SymExpr::int(343));
        assert_eq!(expectation(&f("x^3"), "x").unwrap(), SymExpr::int(3));
        assert_eq!(tail_bound(&f("1"), "x", 5).unwrap(), SymExpr::zero());
    }

    #[test]
    fn probabilities_split_mass() {
        let die = f("(x + x^2 + x^3 + x^4 + x^5 + x^6)/6");
        let even = crate::lang::parse_guard("x % 2 = 0").unwrap();
        assert_eq!(probability(&die, &even).unwrap(), SymExpr::ratio(1, 2));
        assert_eq!(probability(&die, &Guard::True).unwrap(), SymExpr::one());
        let g = f("t/(2 - x)");
        let lt = crate::lang::parse_guard("x < 2").unwrap();
        let a = probability(&g, &lt).unwrap();
        let b = probability(&g, &Guard::not(lt)).unwrap();
        assert_eq!(a.add(&b), SymExpr::one());
        assert_eq!(a.constant_value(), Some(rat(3, 4)));
    }

    #[test]
    fn query_syntax() {
        assert_eq!(parse_query("E[t]").unwrap(), Query::Expectation("t".into()));
        assert_eq!(parse_query("E[t^3]").unwrap(), Query::Moment("t".into(), 3, MomentKind::Raw));
        assert_eq!(parse_query("E[t_2]").unwrap(), Query::Moment("t".into(), 2, MomentKind::Factorial));
        assert_eq!(parse_query("tail[t, 100]").unwrap(), Query::TailBound("t".into(), 100));
        assert!(matches!(parse_query("Pr[w = 0]").unwrap(), Query::Probability(_)));
        assert!(parse_query("Foo[t]").is_err());
        let post = f("3*t/(4 - t^2)");
        assert!(matches!(
            answer(&post, &parse_query("E[y]").unwrap(), &["t".into()]),
            Err(QueryError::UnknownVariable(_))
        ));
    }
}
