use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use super::exppoly::ExpPoly;
use super::indet::Indeterminate;
use super::poly::Poly;
use super::{Rat, SymError};

/// An exact closed-form expression: an exp-polynomial numerator over a
/// product of normalized denominator factors.
///
/// Every denominator factor is in the normal form produced by
/// [`ExpPoly::factor_normal_form`] and is never constant. The zero expression has
/// an empty numerator and no factors. Structural equality implies semantic
/// equality but not conversely; use [`SymExpr::eq_canonical`] for the latter.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SymExpr {
    num: ExpPoly,
    den: BTreeMap<ExpPoly, u32>,
}

impl SymExpr {
    pub fn zero() -> Self {
        SymExpr::default()
    }

    pub fn one() -> Self {
        SymExpr::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        SymExpr { num: ExpPoly::constant(c), den: BTreeMap::new() }
    }

    pub fn int(n: i64) -> Self {
        SymExpr::from_poly(Poly::int(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        SymExpr::constant(Rat::new(n.into(), d.into()))
    }

    pub fn var(v: &Indeterminate) -> Self {
        SymExpr::from_poly(Poly::var(v))
    }

    pub fn from_poly(p: Poly) -> Self {
        SymExpr { num: ExpPoly::from_poly(p), den: BTreeMap::new() }
    }

    pub fn from_exppoly(e: ExpPoly) -> Self {
        SymExpr { num: e, den: BTreeMap::new() }
    }

    /// `exp(arg)` for a polynomial argument.
    pub fn exp(arg: &Poly) -> Self {
        SymExpr::from_exppoly(ExpPoly::group(arg.clone(), Poly::one()))
    }

    pub fn exp_of(arg: &SymExpr) -> Result<Self, SymError> {
        match arg.as_poly() {
            Some(p) => Ok(SymExpr::exp(&p)),
            None => Err(SymError::NonPolynomialExpArg),
        }
    }

    /// Builds `num / prod(f^e)` and brings it into normal form.
    pub fn from_parts<I>(num: ExpPoly, factors: I) -> Result<Self, SymError>
    where
        I: IntoIterator<Item = (ExpPoly, u32)>,
    {
        let mut e = SymExpr { num, den: BTreeMap::new() };
        for (f, mult) in factors {
            e.push_factor(f, mult)?;
        }
        e.cancel();
        Ok(e)
    }

    fn push_factor(&mut self, f: ExpPoly, mult: u32) -> Result<(), SymError> {
        if mult == 0 {
            return Ok(());
        }
        if f.is_zero() {
            return Err(SymError::DivisionByZero);
        }
        let (scale, shift, content, prim) = f.factor_normal_form();
        let m = mult as i64;
        let inv = pow_rat(&scale.recip(), m);
        self.num = self.num.scale(&inv).shift_exp(&shift.scale(&Rat::from_integer((-m).into())));
        for (v, e) in content.iter() {
            *self.den.entry(ExpPoly::from_poly(Poly::var(v))).or_insert(0) += e * mult;
        }
        if !prim.is_one() {
            *self.den.entry(prim).or_insert(0) += mult;
        }
        Ok(())
    }

    /// Removes every denominator factor that divides the numerator.
    fn cancel(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        let keys: Vec<ExpPoly> = self.den.keys().cloned().collect();
        for f in keys {
            let mut mult = self.den[&f];
            while mult > 0 {
                match self.num.exact_div(&f) {
                    Some(q) => {
                        self.num = q;
                        mult -= 1;
                    }
                    None => break,
                }
            }
            if mult == 0 {
                self.den.remove(&f);
            } else {
                self.den.insert(f, mult);
            }
        }
    }

    pub fn numerator(&self) -> &ExpPoly {
        &self.num
    }

    pub fn den_factors(&self) -> impl Iterator<Item = (&ExpPoly, u32)> {
        self.den.iter().map(|(f, e)| (f, *e))
    }

    pub fn denominator(&self) -> ExpPoly {
        let mut d = ExpPoly::one();
        for (f, e) in &self.den {
            d = d.mul(&f.pow(*e));
        }
        d
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn has_exp(&self) -> bool {
        self.num.has_exp() || self.den.keys().any(|f| f.has_exp())
    }

    /// The polynomial this is, when it has no denominator and no exponential.
    pub fn as_poly(&self) -> Option<Poly> {
        if self.den.is_empty() {
            self.num.as_poly()
        } else {
            None
        }
    }

    pub fn constant_value(&self) -> Option<Rat> {
        self.as_poly().and_then(|p| p.constant_value())
    }

    pub fn vars(&self) -> BTreeSet<Indeterminate> {
        let mut out = self.num.vars();
        for f in self.den.keys() {
            out.extend(f.vars());
        }
        out
    }

    pub fn mentions(&self, v: &Indeterminate) -> bool {
        self.num.mentions(v) || self.den.keys().any(|f| f.mentions(v))
    }

    /// True when the expression is a polynomial in `v` (possibly with
    /// non-polynomial dependence on everything else).
    pub fn is_polynomial_in(&self, v: &Indeterminate) -> bool {
        !self.num.mentions_in_exp(v) && !self.den.keys().any(|f| f.mentions(v))
    }

    pub fn add(&self, other: &SymExpr) -> SymExpr {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        if self.den == other.den {
            let mut e = SymExpr { num: self.num.add(&other.num), den: self.den.clone() };
            e.cancel();
            return e;
        }
        let mut lcm = self.den.clone();
        for (f, e) in &other.den {
            let slot = lcm.entry(f.clone()).or_insert(0);
            *slot = (*slot).max(*e);
        }
        let a = self.num.mul(&cofactor(&lcm, &self.den));
        let b = other.num.mul(&cofactor(&lcm, &other.den));
        let mut e = SymExpr { num: a.add(&b), den: lcm };
        e.cancel();
        e
    }

    pub fn neg(&self) -> SymExpr {
        SymExpr { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &SymExpr) -> SymExpr {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Rat) -> SymExpr {
        if c.is_zero() {
            return SymExpr::zero();
        }
        SymExpr { num: self.num.scale(c), den: self.den.clone() }
    }

    pub fn mul(&self, other: &SymExpr) -> SymExpr {
        if self.is_zero() || other.is_zero() {
            return SymExpr::zero();
        }
        let mut den = self.den.clone();
        for (f, e) in &other.den {
            *den.entry(f.clone()).or_insert(0) += e;
        }
        let mut e = SymExpr { num: self.num.mul(&other.num), den };
        if !self.den.is_empty() || !other.den.is_empty() {
            e.cancel();
        }
        e
    }

    pub fn recip(&self) -> Result<SymExpr, SymError> {
        if self.is_zero() {
            return Err(SymError::DivisionByZero);
        }
        SymExpr::from_parts(self.denominator(), [(self.num.clone(), 1)])
    }

    /// `self / d`. Any non-zero divisor is accepted, including ones with
    /// exponential terms.
    pub fn divide(&self, d: &SymExpr) -> Result<SymExpr, SymError> {
        Ok(self.mul(&d.recip()?))
    }

    pub fn pow(&self, n: i64) -> Result<SymExpr, SymError> {
        if n < 0 {
            return self.recip()?.pow(-n);
        }
        let n = n as u32;
        Ok(SymExpr { num: self.num.pow(n), den: self.den.iter().map(|(f, e)| (f.clone(), e * n)).collect() })
    }

    pub fn eq_canonical(&self, other: &SymExpr) -> bool {
        self == other || self.sub(other).is_zero()
    }

    /// Returns `self` in normal form. Values are kept in normal form by every
    /// operation, so this only re-runs cancellation.
    pub fn canonicalize(&self) -> SymExpr {
        let mut e = self.clone();
        e.cancel();
        e
    }

    /// Replaces the indeterminate `v` by `r`.
    pub fn substitute(&self, v: &Indeterminate, r: &SymExpr) -> Result<SymExpr, SymError> {
        if !self.mentions(v) {
            return Ok(self.clone());
        }
        let in_exp = self.num.mentions_in_exp(v) || self.den.keys().any(|f| f.mentions_in_exp(v));
        let out = if let Some(p) = r.as_poly() {
            self.substitute_poly(v, &p)?
        } else if in_exp {
            return Err(SymError::NonPolynomialExpArg);
        } else {
            self.substitute_rational(v, r)?
        };
        if v.is_series() && !out.invertible_at_origin() {
            return Err(SymError::IllDefinedProjection);
        }
        Ok(out)
    }

    fn substitute_poly(&self, v: &Indeterminate, r: &Poly) -> Result<SymExpr, SymError> {
        let mut num = self.num.clone();
        let mut factors: Vec<(ExpPoly, u32)> = Vec::with_capacity(self.den.len());
        if let Some(c) = r.constant_value() {
            // Strip (v - c) from factors that vanish at v = c, and from the numerator.
            let lin = ExpPoly::from_poly(Poly::var(v).sub(&Poly::constant(c.clone())));
            let mut pending = 0u32;
            for (f, e) in &self.den {
                let mut f = f.clone();
                while !f.mentions_in_exp(v) && f.substitute_poly(v, r).is_zero() {
                    match f.exact_div(&lin) {
                        Some(q) => {
                            f = q;
                            pending += e;
                        }
                        None => return Err(SymError::IllDefinedProjection),
                    }
                }
                factors.push((f, *e));
            }
            for _ in 0..pending {
                num = num.exact_div(&lin).ok_or(SymError::IllDefinedProjection)?;
            }
        } else {
            factors.extend(self.den.iter().map(|(f, e)| (f.clone(), *e)));
        }
        let num = num.substitute_poly(v, r);
        let mut subst = Vec::with_capacity(factors.len());
        for (f, e) in factors {
            let g = f.substitute_poly(v, r);
            if g.is_zero() {
                return Err(SymError::IllDefinedProjection);
            }
            subst.push((g, e));
        }
        SymExpr::from_parts(num, subst)
    }

    fn substitute_rational(&self, v: &Indeterminate, r: &SymExpr) -> Result<SymExpr, SymError> {
        let rn = &r.num;
        let rd = r.denominator();
        let homogenize = |p: &ExpPoly| -> (ExpPoly, u32) {
            let coeffs = p.as_univariate(v);
            let d = (coeffs.len() - 1) as u32;
            let mut acc = ExpPoly::zero();
            let mut rn_pow = ExpPoly::one();
            for (j, c) in coeffs.iter().enumerate() {
                if !c.is_zero() {
                    acc = acc.add(&c.mul(&rn_pow).mul(&rd.pow(d - j as u32)));
                }
                if j + 1 < coeffs.len() {
                    rn_pow = rn_pow.mul(rn);
                }
            }
            (acc, d)
        };
        let (num, dn) = homogenize(&self.num);
        let mut balance: i64 = -(dn as i64);
        let mut factors = Vec::with_capacity(self.den.len());
        for (f, e) in &self.den {
            let (g, d) = homogenize(f);
            if g.is_zero() {
                return Err(SymError::IllDefinedProjection);
            }
            balance += (d * e) as i64;
            factors.push((g, *e));
        }
        let base = SymExpr::from_parts(num, factors)?;
        let rd_expr = SymExpr { num: ExpPoly::one(), den: r.den.clone() };
        Ok(base.mul(&rd_expr.pow(-balance)?))
    }

    /// Whether every denominator factor is non-zero when all series
    /// indeterminates are set to zero, i.e. the value is a formal power series.
    pub fn invertible_at_origin(&self) -> bool {
        self.den.keys().all(|f| !at_origin(f).is_zero())
    }

    pub fn derivative(&self, v: &Indeterminate) -> SymExpr {
        let dnum = self.num.derivative(v);
        let involved: Vec<(&ExpPoly, u32)> =
            self.den.iter().filter(|(f, _)| f.mentions(v)).map(|(f, e)| (f, *e)).collect();
        if involved.is_empty() {
            let mut e = SymExpr { num: dnum, den: self.den.clone() };
            e.cancel();
            return e;
        }
        let prod_all = involved.iter().fold(ExpPoly::one(), |acc, (f, _)| acc.mul(f));
        let mut num = dnum.mul(&prod_all);
        for (i, (f, e)) in involved.iter().enumerate() {
            let mut others = ExpPoly::one();
            for (j, (g, _)) in involved.iter().enumerate() {
                if i != j {
                    others = others.mul(g);
                }
            }
            let term = self.num.mul(&f.derivative(v)).mul(&others).scale(&Rat::from_integer((*e).into()));
            num = num.sub(&term);
        }
        let mut den = self.den.clone();
        for (f, _) in &involved {
            *den.get_mut(*f).unwrap() += 1;
        }
        let mut e = SymExpr { num, den };
        e.cancel();
        e
    }

    pub fn nth_derivative(&self, v: &Indeterminate, n: u32) -> SymExpr {
        let mut e = self.clone();
        for _ in 0..n {
            e = e.derivative(v);
        }
        e
    }

    /// Taylor coefficients of `self` in `v` around zero, orders `0..=order`.
    /// Each coefficient no longer mentions `v`.
    pub fn taylor_coeffs(&self, v: &Indeterminate, order: usize) -> Result<Vec<SymExpr>, SymError> {
        if self.is_polynomial_in(v) {
            let uni = self.num.as_univariate(v);
            let mut out = Vec::with_capacity(order + 1);
            for k in 0..=order {
                let c = uni.get(k).cloned().unwrap_or_else(ExpPoly::zero);
                let mut e = SymExpr { num: c, den: self.den.clone() };
                e.cancel();
                out.push(e);
            }
            return Ok(out);
        }
        let mut dv = ExpPoly::one();
        let mut rest: Vec<(ExpPoly, u32)> = Vec::new();
        let mut at_zero: Vec<(ExpPoly, u32)> = Vec::new();
        for (f, e) in &self.den {
            if f.mentions(v) {
                dv = dv.mul(&f.pow(*e));
                let f0 = f.substitute_poly(v, &Poly::zero());
                if f0.is_zero() {
                    return Err(SymError::SingularAtZero);
                }
                at_zero.push((f0, *e));
            } else {
                rest.push((f.clone(), *e));
            }
        }
        let n = self.num.series_in(v, order);
        let d = dv.series_in(v, order);
        let d0 = d[0].clone();
        if d0.is_zero() {
            return Err(SymError::SingularAtZero);
        }
        // coefficient k equals a[k] / d0^(k+1)
        let mut a: Vec<ExpPoly> = Vec::with_capacity(order + 1);
        let mut d0_pows: Vec<ExpPoly> = vec![ExpPoly::one()];
        let mut out = Vec::with_capacity(order + 1);
        for k in 0..=order {
            if d0_pows.len() <= k {
                let next = d0_pows[k - 1].mul(&d0);
                d0_pows.push(next);
            }
            let mut ak = n[k].mul(&d0_pows[k]);
            for j in 1..=k {
                if d[j].is_zero() || a[k - j].is_zero() {
                    continue;
                }
                ak = ak.sub(&d[j].mul(&a[k - j]).mul(&d0_pows[j - 1]));
            }
            let mut factors = rest.clone();
            factors.extend(at_zero.iter().map(|(f, e)| (f.clone(), e * (k as u32 + 1))));
            out.push(SymExpr::from_parts(ak.clone(), factors)?);
            a.push(ak);
        }
        Ok(out)
    }

    pub fn taylor_coeff(&self, v: &Indeterminate, n: u32) -> Result<SymExpr, SymError> {
        Ok(self.taylor_coeffs(v, n as usize)?.pop().unwrap())
    }

    /// Multivariate Taylor coefficients of total degree at most `order` in `vars`.
    pub fn series_expand(&self, vars: &[Indeterminate], order: u32) -> Result<BTreeMap<Vec<u32>, SymExpr>, SymError> {
        let mut out = BTreeMap::new();
        expand_rec(self, vars, order, &mut Vec::new(), &mut out)?;
        Ok(out)
    }

    /// Numerical value when every indeterminate can be looked up.
    pub fn eval_f64(&self, lookup: &dyn Fn(&Indeterminate) -> Option<f64>) -> Option<f64> {
        let mut v = self.num.to_f64(lookup)?;
        for (f, e) in &self.den {
            v /= f.to_f64(lookup)?.powi(*e as i32);
        }
        Some(v)
    }

    /// Numerical value of a closed expression (no indeterminates).
    pub fn to_f64(&self) -> Option<f64> {
        self.eval_f64(&|_| None)
    }

    /// Sign of a closed expression; exact when no exponential is present.
    pub fn sign(&self) -> Option<std::cmp::Ordering> {
        if self.is_zero() {
            return Some(std::cmp::Ordering::Equal);
        }
        if let Some(c) = self.constant_value() {
            return Some(if c.is_positive() { std::cmp::Ordering::Greater } else { std::cmp::Ordering::Less });
        }
        let x = self.to_f64()?;
        x.partial_cmp(&0.0)
    }
}

fn at_origin(f: &ExpPoly) -> ExpPoly {
    let mut g = f.clone();
    for v in f.vars() {
        if v.is_series() {
            g = g.substitute_poly(&v, &Poly::zero());
        }
    }
    g
}

fn cofactor(lcm: &BTreeMap<ExpPoly, u32>, den: &BTreeMap<ExpPoly, u32>) -> ExpPoly {
    let mut out = ExpPoly::one();
    for (f, e) in lcm {
        let have = den.get(f).copied().unwrap_or(0);
        if *e > have {
            out = out.mul(&f.pow(e - have));
        }
    }
    out
}

fn pow_rat(r: &Rat, n: i64) -> Rat {
    if n >= 0 {
        num_traits::pow(r.clone(), n as usize)
    } else {
        num_traits::pow(r.recip(), (-n) as usize)
    }
}

fn expand_rec(
    e: &SymExpr,
    vars: &[Indeterminate],
    budget: u32,
    prefix: &mut Vec<u32>,
    out: &mut BTreeMap<Vec<u32>, SymExpr>,
) -> Result<(), SymError> {
    let Some((v, rest)) = vars.split_first() else {
        if !e.is_zero() {
            out.insert(prefix.clone(), e.clone());
        }
        return Ok(());
    };
    let coeffs = e.taylor_coeffs(v, budget as usize)?;
    for (k, c) in coeffs.into_iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        prefix.push(k as u32);
        expand_rec(&c, rest, budget - k as u32, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}

impl From<Rat> for SymExpr {
    fn from(c: Rat) -> Self {
        SymExpr::constant(c)
    }
}

impl From<Poly> for SymExpr {
    fn from(p: Poly) -> Self {
        SymExpr::from_poly(p)
    }
}

impl From<&Indeterminate> for SymExpr {
    fn from(v: &Indeterminate) -> Self {
        SymExpr::var(v)
    }
}

fn needs_parens(e: &ExpPoly) -> bool {
    e.num_terms() > 1
        || e.has_exp()
        || e.constant_value().is_some_and(|c| !c.is_integer() || c.is_negative())
        || e.groups().next().is_some_and(|(_, p)| p.terms().next().is_some_and(|(m, c)| !m.is_one() && !c.is_one()))
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{}", self.num);
        }
        if needs_parens(&self.num) {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        write!(f, "/")?;
        let single = self.den.len() == 1 && *self.den.values().next().unwrap() == 1;
        if !single {
            write!(f, "(")?;
        }
        for (i, (fac, e)) in self.den.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if needs_parens(fac) {
                write!(f, "({fac})")?;
            } else {
                write!(f, "{fac}")?;
            }
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        if !single {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
