//! Sparse multivariate polynomials with integer coefficients and fractions of
//! them. Variables are dense indices; names live with the caller.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::ops::{Add, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::{Integer, One, Signed, ToPrimitive, Zero};

use crate::ratio::Rational;

/// Sorted `(variable, exponent)` pairs with positive exponents.
pub type Monomial = Vec<(u32, u32)>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigInt>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn mono_degree(m: &Monomial) -> u32 {
    m.iter().map(|(_, e)| e).sum()
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigInt) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn one() -> Poly {
        Poly::constant(BigInt::one())
    }

    pub fn var(v: u32) -> Poly {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(v, 1)], BigInt::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    /// `Some(c)` when the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<BigInt> {
        match self.terms.len() {
            0 => Some(BigInt::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(mono_degree).max().unwrap_or(0)
    }

    pub fn variables(&self) -> Vec<u32> {
        let mut vs: Vec<u32> = self.terms.keys().flat_map(|m| m.iter().map(|(v, _)| *v)).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    fn add_term(&mut self, m: Monomial, c: BigInt) {
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

    pub fn scale(&self, c: &BigInt) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    /// Divides every coefficient by `c`, which must divide them all.
    fn div_scalar(&self, c: &BigInt) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k / c)).collect(),
        }
    }

    /// Gcd of the coefficients (nonnegative; zero for the zero polynomial).
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            g = g.gcd(c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    /// Largest monomial dividing every term.
    fn monomial_gcd(&self) -> Monomial {
        let mut iter = self.terms.keys();
        let Some(first) = iter.next() else {
            return Vec::new();
        };
        let mut g = first.clone();
        for m in iter {
            g.retain_mut(|(v, e)| match m.iter().find(|(w, _)| w == v) {
                Some((_, f)) => {
                    *e = (*e).min(*f);
                    true
                }
                None => false,
            });
            if g.is_empty() {
                break;
            }
        }
        g
    }

    fn div_monomial(&self, d: &Monomial) -> Poly {
        if d.is_empty() {
            return self.clone();
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let q: Monomial = m
                    .iter()
                    .filter_map(|&(v, e)| {
                        let sub = d.iter().find(|(w, _)| *w == v).map_or(0, |(_, f)| *f);
                        (e > sub).then_some((v, e - sub))
                    })
                    .collect();
                (q, c.clone())
            })
            .collect();
        Poly { terms }
    }

    fn leading_sign_negative(&self) -> bool {
        self.terms.values().next_back().is_some_and(|c| c.is_negative())
    }

    /// Exact value at a rational point; `point[v]` is the value of variable `v`.
    pub fn eval(&self, point: &[Rational]) -> Rational {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut term = Rational::from_integer(c.clone());
            for &(v, e) in m {
                term *= num::pow(point[v as usize].clone(), e as usize);
            }
            total += term;
        }
        total
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.to_f64().unwrap_or(f64::NAN);
                for &(v, e) in m {
                    t *= point[v as usize].powi(e as i32);
                }
                t
            })
            .sum()
    }

    /// Substitutes `var := value`.
    pub fn substitute(&self, var: u32, value: &Poly) -> Poly {
        let mut out = Poly::zero();
        let mut powers: Vec<Poly> = vec![Poly::one()];
        for (m, c) in &self.terms {
            let mut rest = Vec::with_capacity(m.len());
            let mut exp = 0u32;
            for &(v, e) in m {
                if v == var {
                    exp = e;
                } else {
                    rest.push((v, e));
                }
            }
            while powers.len() <= exp as usize {
                let next = &powers[powers.len() - 1] * value;
                powers.push(next);
            }
            let mut base = Poly::zero();
            base.add_term(rest, c.clone());
            out = &out + &(&base * &powers[exp as usize]);
        }
        out
    }

    /// Canonical text: terms by descending degree, then by variable order,
    /// with explicit integer coefficients.
    pub fn to_text(&self, names: &[String]) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut terms: Vec<(&Monomial, &BigInt)> = self.terms.iter().collect();
        terms.sort_by(|a, b| mono_degree(b.0).cmp(&mono_degree(a.0)).then(a.0.cmp(b.0)));
        let mut out = String::new();
        for (i, (m, c)) in terms.iter().enumerate() {
            let negative = c.is_negative();
            if i == 0 {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            let _ = write!(out, "{}", c.abs());
            for &(v, e) in m.iter() {
                let name = names.get(v as usize).map_or_else(|| format!("v{v}"), Clone::clone);
                if e == 1 {
                    let _ = write!(out, "*{name}");
                } else {
                    let _ = write!(out, "*{name}^{e}");
                }
            }
        }
        out
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let (mut out, other) = if self.terms.len() >= rhs.terms.len() {
            (self.clone(), rhs)
        } else {
            (rhs.clone(), self)
        };
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c);
        }
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c);
        }
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

/// `num / den` with `den` not identically zero, kept in a light normal form:
/// coefficient content and common monomial factors are cancelled, constant
/// denominators are positive, and proportional pairs collapse to a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RfError {
    #[error("denominator vanishes at the given point")]
    DivideByZero,
    #[error("denominator is identically zero")]
    ZeroDenominator,
}

impl RationalFunction {
    pub fn new(num: Poly, den: Poly) -> Result<Self, RfError> {
        if den.is_zero() {
            return Err(RfError::ZeroDenominator);
        }
        Ok(RationalFunction { num, den }.normalized())
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalFunction { num: p, den: Poly::one() }
    }

    pub fn constant(r: &Rational) -> Self {
        RationalFunction {
            num: Poly::constant(r.numer().clone()),
            den: Poly::constant(r.denom().clone()),
        }
        .normalized()
    }

    pub fn zero() -> Self {
        Self::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        Self::from_poly(Poly::one())
    }

    pub fn var(v: u32) -> Self {
        Self::from_poly(Poly::var(v))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<Rational> {
        let n = self.num.as_constant()?;
        let d = self.den.as_constant()?;
        Some(Rational::new(n, d))
    }

    pub fn is_constant(&self) -> bool {
        self.as_constant().is_some()
    }

    pub fn degree(&self) -> u32 {
        self.num.degree().max(self.den.degree())
    }

    pub fn variables(&self) -> Vec<u32> {
        let mut v = self.num.variables();
        v.extend(self.den.variables());
        v.sort_unstable();
        v.dedup();
        v
    }

    fn normalized(mut self) -> Self {
        if self.num.is_zero() {
            self.den = Poly::one();
            return self;
        }
        let g = self.num.content().gcd(&self.den.content());
        let mut sign = BigInt::one();
        if self.den.leading_sign_negative() {
            sign = -sign;
        }
        let g = g * sign;
        if !g.is_one() {
            self.num = self.num.div_scalar(&g);
            self.den = self.den.div_scalar(&g);
        }
        let mn = self.num.monomial_gcd();
        let md = self.den.monomial_gcd();
        let common: Monomial = mn
            .iter()
            .filter_map(|&(v, e)| md.iter().find(|(w, _)| *w == v).map(|(_, f)| (v, e.min(*f))))
            .collect();
        if !common.is_empty() {
            self.num = self.num.div_monomial(&common);
            self.den = self.den.div_monomial(&common);
        }
        if self.den.as_constant().is_none() && self.num.terms.len() == self.den.terms.len() {
            // num = c * den collapses to the constant c
            if let Some(c) = proportional(&self.num, &self.den) {
                return RationalFunction::constant(&c);
            }
        }
        self
    }

    pub fn eval(&self, point: &[Rational]) -> Result<Rational, RfError> {
        let d = self.den.eval(point);
        if d.is_zero() {
            return Err(RfError::DivideByZero);
        }
        Ok(self.num.eval(point) / d)
    }

    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.num.eval_f64(point) / self.den.eval_f64(point)
    }

    pub fn recip(&self) -> Result<Self, RfError> {
        RationalFunction::new(self.den.clone(), self.num.clone())
    }

    pub fn one_minus(&self) -> Self {
        RationalFunction {
            num: &self.den - &self.num,
            den: self.den.clone(),
        }
        .normalized()
    }

    pub fn div(&self, rhs: &Self) -> Result<Self, RfError> {
        Ok(self * &rhs.recip()?)
    }

    pub fn substitute(&self, var: u32, value: &RationalFunction) -> Result<Self, RfError> {
        // homogenize: p(x) with x = a/b becomes p~(a, b) / b^deg
        let sub = |p: &Poly| -> RationalFunction {
            let mut acc = RationalFunction::zero();
            for (m, c) in &p.terms {
                let mut rest = Vec::new();
                let mut exp = 0u32;
                for &(v, e) in m {
                    if v == var {
                        exp = e;
                    } else {
                        rest.push((v, e));
                    }
                }
                let mut base = Poly::zero();
                base.add_term(rest, c.clone());
                let mut term = RationalFunction::from_poly(base);
                for _ in 0..exp {
                    term = &term * value;
                }
                acc = &acc + &term;
            }
            acc
        };
        sub(&self.num).div(&sub(&self.den))
    }

    pub fn to_text(&self, names: &[String]) -> String {
        let num = self.num.to_text(names);
        match self.den.as_constant() {
            Some(d) if d.is_one() => num,
            _ => format!("({num}) / ({})", self.den.to_text(names)),
        }
    }
}

fn proportional(a: &Poly, b: &Poly) -> Option<Rational> {
    let mut ratio: Option<Rational> = None;
    for ((ma, ca), (mb, cb)) in a.terms.iter().zip(b.terms.iter()) {
        if ma != mb {
            return None;
        }
        let r = Rational::new(ca.clone(), cb.clone());
        match &ratio {
            None => ratio = Some(r),
            Some(q) if *q == r => {}
            Some(_) => return None,
        }
    }
    ratio
}

fn lcm_constants(a: &BigInt, b: &BigInt) -> BigInt {
    a.lcm(b)
}

impl Add for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            return RationalFunction {
                num: &self.num + &rhs.num,
                den: self.den.clone(),
            }
            .normalized();
        }
        if let (Some(a), Some(b)) = (self.den.as_constant(), rhs.den.as_constant()) {
            let l = lcm_constants(&a, &b);
            let num = &self.num.scale(&(&l / &a)) + &rhs.num.scale(&(&l / &b));
            return RationalFunction {
                num,
                den: Poly::constant(l),
            }
            .normalized();
        }
        RationalFunction {
            num: &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            den: &self.den * &rhs.den,
        }
        .normalized()
    }
}

impl Sub for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Mul for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() || rhs.is_zero() {
            return RationalFunction::zero();
        }
        // cancel equal cross factors before multiplying out
        if self.num == rhs.den {
            return RationalFunction {
                num: rhs.num.clone(),
                den: self.den.clone(),
            }
            .normalized();
        }
        if self.den == rhs.num {
            return RationalFunction {
                num: self.num.clone(),
                den: rhs.den.clone(),
            }
            .normalized();
        }
        RationalFunction {
            num: &self.num * &rhs.num,
            den: &self.den * &rhs.den,
        }
        .normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn x() -> RationalFunction {
        RationalFunction::var(0)
    }

    fn y() -> RationalFunction {
        RationalFunction::var(1)
    }

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn geometric_loop_cancels_to_one() {
        // x / (1 - (1 - x))
        let f = x().div(&x().one_minus().one_minus()).unwrap();
        assert_eq!(f, RationalFunction::one());
    }

    #[test]
    fn two_step_chain() {
        let f = &x() + &(&x().one_minus() * &y());
        assert_eq!(f.to_text(&names()), "-1*x*y + 1*x + 1*y");
        let v = f.eval(&[frac(3, 10), frac(1, 2)]).unwrap();
        assert_eq!(v, frac(65, 100));
        assert!((f.eval_f64(&[0.3, 0.5]) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn constants_stay_exact() {
        let a = RationalFunction::constant(&frac(4748, 7035));
        let b = RationalFunction::constant(&frac(2139, 7035));
        let c = RationalFunction::constant(&frac(148, 7035));
        let s = &(&a + &b) + &c;
        assert_eq!(s, RationalFunction::one());
        let h = &a * &RationalFunction::constant(&frac(1, 2));
        assert_eq!(h.as_constant(), Some(frac(4748, 14070)));
    }

    #[test]
    fn content_and_monomial_factors_cancel() {
        let num = &Poly::var(0) * &Poly::var(1).scale(&BigInt::from(6));
        let den = &(&Poly::var(0) * &Poly::var(0)).scale(&BigInt::from(4)) + &Poly::var(0).scale(&BigInt::from(2));
        let f = RationalFunction::new(num, den).unwrap();
        assert_eq!(f.to_text(&names()), "(3*y) / (2*x + 1)");
    }

    #[test]
    fn vanishing_denominator() {
        let f = x().recip().unwrap();
        assert_eq!(f.eval(&[frac(0, 1)]), Err(RfError::DivideByZero));
        assert_eq!(RationalFunction::zero().recip(), Err(RfError::ZeroDenominator));
    }

    #[test]
    fn substitution_matches_evaluation() {
        let f = (&(&x() * &x()) + &y()).div(&(&RationalFunction::one() + &x())).unwrap();
        let g = f.substitute(0, &y().one_minus()).unwrap();
        let at = [frac(1, 7), frac(2, 9)];
        let direct = f.eval(&[frac(7, 9), frac(2, 9)]).unwrap();
        assert_eq!(g.eval(&at).unwrap(), direct);
    }
}
