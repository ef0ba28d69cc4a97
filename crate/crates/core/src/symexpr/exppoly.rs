use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::indet::Indeterminate;
use super::monomial::Monomial;
use super::poly::Poly;
use super::Rat;

/// A finite sum `sum_g c_g * exp(g)` with polynomial coefficients `c_g` and
/// pairwise distinct polynomial exponents `g`.
///
/// The purely polynomial part lives under the zero exponent.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ExpPoly {
    groups: BTreeMap<Poly, Poly>,
}

const DIVISION_STEP_LIMIT: usize = 20_000;

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly { groups: BTreeMap::new() }
    }

    pub fn one() -> Self {
        ExpPoly::from_poly(Poly::one())
    }

    pub fn constant(c: Rat) -> Self {
        ExpPoly::from_poly(Poly::constant(c))
    }

    pub fn from_poly(p: Poly) -> Self {
        ExpPoly::group(Poly::zero(), p)
    }

    /// `coeff * exp(arg)`.
    pub fn group(arg: Poly, coeff: Poly) -> Self {
        let mut groups = BTreeMap::new();
        if !coeff.is_zero() {
            groups.insert(arg, coeff);
        }
        ExpPoly { groups }
    }

    pub fn is_zero(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> impl Iterator<Item = (&Poly, &Poly)> {
        self.groups.iter()
    }

    pub fn into_groups(self) -> impl Iterator<Item = (Poly, Poly)> {
        self.groups.into_iter()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_terms(&self) -> usize {
        self.groups.values().map(Poly::len).sum()
    }

    pub fn add_group(&mut self, arg: Poly, coeff: Poly) {
        if coeff.is_zero() {
            return;
        }
        match self.groups.entry(arg) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&coeff);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    fn add_term(&mut self, arg: &Poly, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        if let Some(p) = self.groups.get_mut(arg) {
            p.add_term(m, c);
            if p.is_zero() {
                self.groups.remove(arg);
            }
        } else {
            self.groups.insert(arg.clone(), Poly::term(m, c));
        }
    }

    pub fn has_exp(&self) -> bool {
        self.groups.keys().any(|g| !g.is_zero())
    }

    /// The polynomial this is, if no exponential group is present.
    pub fn as_poly(&self) -> Option<Poly> {
        match self.groups.len() {
            0 => Some(Poly::zero()),
            1 => {
                let (g, p) = self.groups.iter().next().unwrap();
                g.is_zero().then(|| p.clone())
            }
            _ => None,
        }
    }

    pub fn constant_value(&self) -> Option<Rat> {
        self.as_poly().and_then(|p| p.constant_value())
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn vars(&self) -> BTreeSet<Indeterminate> {
        let mut out = BTreeSet::new();
        for (g, p) in &self.groups {
            out.extend(g.vars());
            out.extend(p.vars());
        }
        out
    }

    pub fn mentions(&self, v: &Indeterminate) -> bool {
        self.groups.iter().any(|(g, p)| g.mentions(v) || p.mentions(v))
    }

    pub fn mentions_in_exp(&self, v: &Indeterminate) -> bool {
        self.groups.keys().any(|g| g.mentions(v))
    }

    pub fn degree_in(&self, v: &Indeterminate) -> u32 {
        self.groups.values().map(|p| p.degree_in(v)).max().unwrap_or(0)
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for (g, p) in &other.groups {
            out.add_group(g.clone(), p.clone());
        }
        out
    }

    pub fn sub(&self, other: &ExpPoly) -> ExpPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> ExpPoly {
        ExpPoly { groups: self.groups.iter().map(|(g, p)| (g.clone(), p.neg())).collect() }
    }

    pub fn scale(&self, c: &Rat) -> ExpPoly {
        if c.is_zero() {
            return ExpPoly::zero();
        }
        ExpPoly { groups: self.groups.iter().map(|(g, p)| (g.clone(), p.scale(c))).collect() }
    }

    pub fn mul_poly(&self, q: &Poly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (g, p) in &self.groups {
            out.add_group(g.clone(), p.mul(q));
        }
        out
    }

    /// Multiplies by `exp(shift)`.
    pub fn shift_exp(&self, shift: &Poly) -> ExpPoly {
        if shift.is_zero() {
            return self.clone();
        }
        let mut out = ExpPoly::zero();
        for (g, p) in &self.groups {
            out.add_group(g.add(shift), p.clone());
        }
        out
    }

    pub fn mul(&self, other: &ExpPoly) -> ExpPoly {
        if let Some(p) = other.as_poly() {
            return self.mul_poly(&p);
        }
        if let Some(p) = self.as_poly() {
            return other.mul_poly(&p);
        }
        let mut out = ExpPoly::zero();
        for (g1, p1) in &self.groups {
            for (g2, p2) in &other.groups {
                out.add_group(g1.add(g2), p1.mul(p2));
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> ExpPoly {
        let mut result = ExpPoly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn derivative(&self, v: &Indeterminate) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (g, p) in &self.groups {
            let dg = g.derivative(v);
            out.add_group(g.clone(), p.derivative(v).add(&p.mul(&dg)));
        }
        out
    }

    /// Replaces `v` by a polynomial, both in coefficients and in exponents.
    pub fn substitute_poly(&self, v: &Indeterminate, r: &Poly) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (g, p) in &self.groups {
            out.add_group(g.substitute(v, r), p.substitute(v, r));
        }
        out
    }

    pub fn map_coeffs<F: FnMut(&Poly) -> Poly>(&self, mut f: F) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for (g, p) in &self.groups {
            out.add_group(g.clone(), f(p));
        }
        out
    }

    /// Coefficients in `v`; requires `v` to be absent from every exponent.
    pub fn as_univariate(&self, v: &Indeterminate) -> Vec<ExpPoly> {
        let mut out = vec![ExpPoly::zero(); self.degree_in(v) as usize + 1];
        for (g, p) in &self.groups {
            for (i, c) in p.as_univariate(v).into_iter().enumerate() {
                out[i].add_group(g.clone(), c);
            }
        }
        out
    }

    /// Taylor coefficients in `v` up to and including `order`.
    pub fn series_in(&self, v: &Indeterminate, order: usize) -> Vec<ExpPoly> {
        let mut out = vec![ExpPoly::zero(); order + 1];
        for (g, p) in &self.groups {
            let pc = p.as_univariate(v);
            let gc = g.as_univariate(v);
            let g0 = gc[0].clone();
            // s = exp(g - g0) as a series in v
            let mut s: Vec<Poly> = Vec::with_capacity(order + 1);
            s.push(Poly::one());
            for k in 1..=order {
                let mut acc = Poly::zero();
                for j in 1..=k.min(gc.len() - 1) {
                    if gc[j].is_zero() {
                        continue;
                    }
                    acc = acc.add(&gc[j].mul(&s[k - j]).scale(&Rat::from_integer(BigInt::from(j))));
                }
                s.push(acc.scale(&Rat::new(BigInt::one(), BigInt::from(k))));
            }
            for (k, slot) in out.iter_mut().enumerate() {
                let mut acc = Poly::zero();
                for (i, pi) in pc.iter().enumerate().take(k + 1) {
                    if !pi.is_zero() && !s[k - i].is_zero() {
                        acc = acc.add(&pi.mul(&s[k - i]));
                    }
                }
                slot.add_group(g0.clone(), acc);
            }
        }
        out
    }

    fn leading(&self) -> Option<(&Poly, &Monomial, &Rat)> {
        let (g, p) = self.groups.iter().next_back()?;
        let (m, c) = p.leading()?;
        Some((g, m, c))
    }

    pub fn min_exp(&self) -> Option<&Poly> {
        self.groups.keys().next()
    }

    /// Exact quotient, or `None` when `d` does not divide `self` (or the search
    /// gives up).
    pub fn exact_div(&self, d: &ExpPoly) -> Option<ExpPoly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(ExpPoly::zero());
        }
        if let (Some(a), Some(b)) = (self.as_poly(), d.as_poly()) {
            return a.exact_div(&b).map(ExpPoly::from_poly);
        }
        if d.num_groups() == 1 {
            let (dg, dp) = d.groups.iter().next().unwrap();
            let mut out = ExpPoly::zero();
            for (g, p) in &self.groups {
                out.add_group(g.sub(dg), p.exact_div(dp)?);
            }
            return Some(out);
        }
        let lower = self.min_exp()?.sub(d.min_exp()?);
        let (lg, lm, lc) = d.leading().map(|(g, m, c)| (g.clone(), m.clone(), c.clone()))?;
        let mut r = self.clone();
        let mut q = ExpPoly::zero();
        let mut steps = 0;
        while let Some((rg, rm, rc)) = r.leading().map(|(g, m, c)| (g.clone(), m.clone(), c.clone())) {
            steps += 1;
            if steps > DIVISION_STEP_LIMIT {
                return None;
            }
            let tm = rm.div(&lm)?;
            let tg = rg.sub(&lg);
            if tg < lower {
                return None;
            }
            let tc = rc / &lc;
            for (dg, dp) in &d.groups {
                let arg = dg.add(&tg);
                for (dm, dc) in dp.terms() {
                    r.add_term(&arg, dm.mul(&tm), -(dc * &tc));
                }
            }
            q.add_term(&tg, tm, tc);
        }
        Some(q)
    }

    /// Splits `self = scale * exp(shift) * monomial * prim`, where `prim` has
    /// coprime integer coefficients, least exponent zero, no monomial content,
    /// and a positive trailing coefficient.
    pub fn factor_normal_form(&self) -> (Rat, Poly, Monomial, ExpPoly) {
        if self.is_zero() {
            return (Rat::one(), Poly::zero(), Monomial::one(), ExpPoly::zero());
        }
        let shift = self.min_exp().unwrap().clone();
        let mut content: Option<Monomial> = None;
        for p in self.groups.values() {
            let c = p.monomial_content();
            content = Some(match content {
                None => c,
                Some(acc) => acc.gcd(&c),
            });
        }
        let content = content.unwrap_or_default();
        let mut den_lcm = BigInt::one();
        let mut num_gcd = BigInt::zero();
        for p in self.groups.values() {
            for (_, c) in p.terms() {
                den_lcm = den_lcm.lcm(c.denom());
            }
        }
        for p in self.groups.values() {
            for (_, c) in p.terms() {
                num_gcd = num_gcd.gcd(&((c.numer() * &den_lcm) / c.denom()));
            }
        }
        let mut scale = Rat::new(num_gcd, den_lcm);
        let trailing = self.groups.values().next().unwrap().trailing().unwrap().1;
        if trailing.is_negative() {
            scale = -scale;
        }
        let inv = scale.recip();
        let mut prim = ExpPoly::zero();
        for (g, p) in &self.groups {
            let q = p.map_monomials(|m| m.div(&content)).scale(&inv);
            prim.add_group(g.sub(&shift), q);
        }
        (scale, shift, content, prim)
    }

    pub fn to_f64(&self, lookup: &dyn Fn(&Indeterminate) -> Option<f64>) -> Option<f64> {
        let mut total = 0.0;
        for (g, p) in &self.groups {
            total += eval_poly_f64(p, lookup)? * eval_poly_f64(g, lookup)?.exp();
        }
        Some(total)
    }
}

pub(crate) fn eval_poly_f64(p: &Poly, lookup: &dyn Fn(&Indeterminate) -> Option<f64>) -> Option<f64> {
    let mut total = 0.0;
    for (m, c) in p.terms() {
        let mut t = super::rat_to_f64(c);
        for (v, e) in m.iter() {
            t *= lookup(v)?.powi(*e as i32);
        }
        total += t;
    }
    Some(total)
}

impl From<Poly> for ExpPoly {
    fn from(p: Poly) -> Self {
        ExpPoly::from_poly(p)
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.groups.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (g, p) in &self.groups {
            if g.is_zero() {
                if first {
                    write!(f, "{p}")?;
                } else {
                    write!(f, " + {}", paren_sum(p))?;
                }
            } else {
                if !first {
                    write!(f, " + ")?;
                }
                if p.is_one() {
                    write!(f, "exp({g})")?;
                } else {
                    write!(f, "{}*exp({g})", paren_sum(p))?;
                }
            }
            first = false;
        }
        Ok(())
    }
}

fn paren_sum(p: &Poly) -> String {
    if p.len() > 1 || p.terms().next().is_some_and(|(_, c)| c.is_negative()) {
        format!("({p})")
    } else {
        format!("{p}")
    }
}

impl fmt::Debug for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
