use super::*;
use crate::lang::{parse_guard, parse_symexpr};
use crate::symexpr::rat;

fn d(src: &str) -> SymExpr {
    parse_symexpr(src, &["x", "y", "t", "w", "c"]).unwrap()
}

fn g(src: &str) -> Guard {
    parse_guard(src).unwrap()
}

#[test]
fn truncation_of_rational_function() {
    let f = EFps::from_dist(d("1/(2 - x)"));
    let r = filter(&f, &g("x < 3")).unwrap();
    assert!(r.dist.eq_canonical(&d("1/2 + 1/4*x + 1/8*x^2")));
    let rest = filter(&f, &g("x >= 3")).unwrap();
    assert!(rest.dist.add(&r.dist).eq_canonical(&f.dist));
}

#[test]
fn parity_filter() {
    let f = EFps::from_dist(d("1/(2 - t)"));
    let odd = filter(&f, &g("t % 2 = 1")).unwrap();
    assert!(odd.dist.eq_canonical(&d("t/(4 - t^2)")));
    assert_eq!(mass(&odd).unwrap().constant_value().unwrap(), rat(1, 3));
}

#[test]
fn even_die_observation() {
    let die = d("(x + x^2 + x^3 + x^4 + x^5 + x^6)/6");
    let kept = filter_dist(&die, &g("x % 2 = 0")).unwrap();
    assert!(kept.eq_canonical(&d("(x^2 + x^4 + x^6)/6")));
}

#[test]
fn var_var_guard_with_finite_marginal() {
    let f = d("(x + y)/(2*(2 - x))");
    let eq = filter_dist(&f, &g("x = y")).unwrap();
    // states with x = y: (0,0) has mass 0; (1,1) is absent; only y=1 with x=1 contributes
    let direct = coefficient_of(&f, &[("x".into(), 1), ("y".into(), 1)].into()).unwrap();
    let got = coefficient_of(&eq, &[("x".into(), 1), ("y".into(), 1)].into()).unwrap();
    assert!(direct.eq_canonical(&got));
    let off = coefficient_of(&eq, &[("x".into(), 2), ("y".into(), 1)].into()).unwrap();
    assert!(off.is_zero());
}

#[test]
fn normalization_and_undefined() {
    let f = EFps::new(d("x/2"), SymExpr::ratio(1, 2));
    let n = normalize(&f).unwrap();
    assert!(n.efps.dist.eq_canonical(&d("x")));
    let all = EFps::new(SymExpr::zero(), SymExpr::one());
    assert_eq!(normalize(&all), Err(GfError::UndefinedNormalization));
}

#[test]
fn text_round_trip() {
    let f = EFps::parse("(x^2 + x^4 + x^6)/6 + 1/2*!", &["x"]).unwrap();
    assert!(f.violation.eq_canonical(&SymExpr::ratio(1, 2)));
    let back = EFps::parse(&f.to_string(), &["x"]).unwrap();
    assert!(back.eq_canonical(&f));
    let j = f.to_json();
    assert!(EFps::from_json(&j, &["x"]).unwrap().eq_canonical(&f));
}

#[test]
fn series_order() {
    let a = EFps::from_dist(d("1/2 + 1/4*x"));
    let b = EFps::from_dist(d("1/(2 - x)"));
    assert!(series_leq(&a, &b, 6).unwrap());
    assert!(!series_leq(&b, &a, 6).unwrap());
}
