use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::indet::Indeterminate;
use super::monomial::Monomial;
use super::Rat;

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rat>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Poly::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Self {
        Poly::constant(Rat::from_integer(BigInt::from(n)))
    }

    pub fn var(v: &Indeterminate) -> Self {
        Poly::term(Monomial::var(v, 1), Rat::one())
    }

    pub fn term(m: Monomial, c: Rat) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rat)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Rat)> {
        self.terms.into_iter()
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, Rat)>>(it: I) -> Self {
        let mut p = Poly::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn constant_value(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn coeff(&self, m: &Monomial) -> Rat {
        self.terms.get(m).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next_back()
    }

    pub fn trailing(&self) -> Option<(&Monomial, &Rat)> {
        self.terms.iter().next()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<Indeterminate> {
        self.terms.keys().flat_map(|m| m.vars().cloned().collect::<Vec<_>>()).collect()
    }

    pub fn mentions(&self, v: &Indeterminate) -> bool {
        self.terms.keys().any(|m| m.exp_of(v) > 0)
    }

    pub fn degree_in(&self, v: &Indeterminate) -> u32 {
        self.terms.keys().map(|m| m.exp_of(v)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect() }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        Poly { terms: self.terms.iter().map(|(n, c)| (n.mul(m), c.clone())).collect() }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        let mut out = Poly::zero();
        for (m1, c1) in &small.terms {
            for (m2, c2) in &big.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut result = Poly::one();
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

    /// Coefficients of `self` viewed as a polynomial in `v`: entry `i` multiplies `v^i`.
    pub fn as_univariate(&self, v: &Indeterminate) -> Vec<Poly> {
        let mut out: Vec<Poly> = vec![Poly::zero(); self.degree_in(v) as usize + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split(v);
            out[e as usize].add_term(rest, c.clone());
        }
        out
    }

    pub fn derivative(&self, v: &Indeterminate) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split(v);
            if e > 0 {
                let m2 = rest.mul(&Monomial::var(v, e - 1));
                out.add_term(m2, c * Rat::from_integer(BigInt::from(e)));
            }
        }
        out
    }

    pub fn substitute(&self, v: &Indeterminate, r: &Poly) -> Poly {
        if !self.mentions(v) {
            return self.clone();
        }
        let coeffs = self.as_univariate(v);
        let mut acc = Poly::zero();
        for c in coeffs.iter().rev() {
            acc = acc.mul(r).add(c);
        }
        acc
    }

    pub fn eval_at(&self, v: &Indeterminate, value: &Rat) -> Poly {
        self.substitute(v, &Poly::constant(value.clone()))
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let (lm, lc) = d.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut r = self.clone();
        let mut q = Poly::zero();
        while let Some((rm, rc)) = r.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let tm = rm.div(&lm)?;
            let tc = rc / &lc;
            for (dm, dc) in &d.terms {
                r.add_term(dm.mul(&tm), -(dc * &tc));
            }
            q.add_term(tm, tc);
        }
        Some(q)
    }

    /// Greatest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        it.fold(first.clone(), |acc, m| acc.gcd(m))
    }

    /// Splits `self = scale * prim` where `prim` has coprime integer coefficients
    /// and a positive trailing coefficient.
    pub fn primitive(&self) -> (Rat, Poly) {
        if self.is_zero() {
            return (Rat::one(), Poly::zero());
        }
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut num_gcd = BigInt::zero();
        for c in self.terms.values() {
            let n = (c.numer() * &den_lcm) / c.denom();
            num_gcd = num_gcd.gcd(&n);
        }
        let mut scale = Rat::new(num_gcd, den_lcm);
        if self.trailing().unwrap().1.is_negative() {
            scale = -scale;
        }
        (scale.clone(), self.scale(&scale.recip()))
    }

    pub fn to_f64_const(&self) -> Option<f64> {
        self.constant_value().map(|c| super::rat_to_f64(&c))
    }

    /// Maps each monomial through `f`, dropping those for which it returns `None`.
    pub fn map_monomials<F: FnMut(&Monomial) -> Option<Monomial>>(&self, mut f: F) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if let Some(m2) = f(m) {
                out.add_term(m2, c.clone());
            }
        }
        out
    }

    pub fn filter_terms<F: FnMut(&Monomial) -> bool>(&self, mut keep: F) -> Poly {
        Poly { terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect() }
    }
}

/// Ordering compatible with addition: `a < b` exactly when the leading
/// coefficient of `b - a` is positive.
impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        let mut a = self.terms.iter().rev().peekable();
        let mut b = other.terms.iter().rev().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some((_, c)), None) => return sign(c),
                (None, Some((_, c))) => return sign(c).reverse(),
                (Some((ma, ca)), Some((mb, cb))) => match ma.cmp(mb) {
                    Ordering::Greater => return sign(ca),
                    Ordering::Less => return sign(cb).reverse(),
                    Ordering::Equal => {
                        let o = ca.cmp(cb);
                        if o != Ordering::Equal {
                            return o;
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }
}

fn sign(c: &Rat) -> Ordering {
    if c.is_positive() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Rat> for Poly {
    fn from(c: Rat) -> Self {
        Poly::constant(c)
    }
}

pub(crate) fn fmt_coeff_term(f: &mut fmt::Formatter<'_>, first: bool, c: &Rat, m: &Monomial) -> fmt::Result {
    let neg = c.is_negative();
    let a = c.abs();
    if first {
        if neg {
            write!(f, "-")?;
        }
    } else if neg {
        write!(f, " - ")?;
    } else {
        write!(f, " + ")?;
    }
    if m.is_one() {
        write!(f, "{a}")
    } else if a.is_one() {
        write!(f, "{m}")
    } else {
        write!(f, "{a}*{m}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            fmt_coeff_term(f, i == 0, c, m)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
