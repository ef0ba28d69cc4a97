use std::collections::BTreeMap;

use pgf_core::gf::program_var;
use pgf_core::symexpr::{SymError, SymExpr};
use serde_json::{json, Value};

/// One coefficient of a joint series expansion, keyed by the exponents of the
/// program variables that occur in it.
pub struct Term {
    pub exponents: BTreeMap<String, u32>,
    pub coeff: SymExpr,
}

/// Nonzero coefficients of `e` around the origin with total degree at most
/// `order`, in graded order.
pub fn series(e: &SymExpr, vars: &[String], order: usize) -> Result<Vec<Term>, SymError> {
    let mut out = Vec::new();
    expand(e, vars, order, &mut BTreeMap::new(), &mut out)?;
    out.sort_by_key(|t| (t.exponents.values().sum::<u32>(), t.exponents.values().copied().collect::<Vec<_>>()));
    Ok(out)
}

fn expand(
    e: &SymExpr,
    vars: &[String],
    budget: usize,
    prefix: &mut BTreeMap<String, u32>,
    out: &mut Vec<Term>,
) -> Result<(), SymError> {
    let Some((first, rest)) = vars.split_first() else {
        if !e.is_zero() {
            out.push(Term { exponents: prefix.clone(), coeff: e.clone() });
        }
        return Ok(());
    };
    for (i, c) in e.taylor_coeffs(&program_var(first), budget)?.into_iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        if i > 0 {
            prefix.insert(first.clone(), i as u32);
        }
        expand(&c, rest, budget - i, prefix, out)?;
        prefix.remove(first);
    }
    Ok(())
}

pub fn monomial_text(exponents: &BTreeMap<String, u32>) -> String {
    let parts: Vec<String> =
        exponents.iter().map(|(v, &k)| if k == 1 { v.clone() } else { format!("{v}^{k}") }).collect();
    parts.join("*")
}

pub fn series_text(terms: &[Term], order: usize) -> String {
    let mut parts: Vec<String> = terms
        .iter()
        .map(|t| {
            let m = monomial_text(&t.exponents);
            let c = t.coeff.to_string();
            let c = if c.contains(' ') { format!("({c})") } else { c };
            match (m.is_empty(), c.as_str()) {
                (true, _) => c,
                (false, "1") => m,
                _ => format!("{c}*{m}"),
            }
        })
        .collect();
    parts.push(format!("O(degree {})", order + 1));
    parts.join(" + ")
}

pub fn series_json(terms: &[Term]) -> Value {
    Value::Array(
        terms
            .iter()
            .map(
                |t| json!({ "exponents": t.exponents, "coefficient": t.coeff.to_string(), "approx": t.coeff.to_f64() }),
            )
            .collect(),
    )
}

/// Exact value with a decimal approximation unless it is an integer.
pub fn value_text(e: &SymExpr) -> String {
    let s = e.to_string();
    match e.to_f64() {
        Some(f) if s.parse::<i64>().is_err() => format!("{s} (~{f:.6})"),
        _ => s,
    }
}

pub fn value_json(e: &SymExpr) -> Value {
    json!({ "exact": e.to_string(), "approx": e.to_f64() })
}
