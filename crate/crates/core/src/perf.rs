//! Perfect Laurent polynomials over `F_p` in `tbar`, exponents in `Z[1/p]`.
//!
//! An element is a finite sum `sum a_q tbar^q`. With `cap = Some(c)` it is
//! only known modulo `tbar^c`; products propagate caps through the lowest
//! exponents of the factors, so truncated arithmetic stays honest.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::GammaElement;
use crate::padic::{vp_int, Modulus};

pub type Exp = Ratio<i64>;

/// Deepest `p`-power denominator an exponent may carry.
pub const MAX_LEVEL: u32 = 16;
/// Largest exponent magnitude.
pub const MAX_EXP: i64 = 1 << 20;
/// Largest number of terms in one element.
pub const MAX_TERMS: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerfLaurent {
    pub p: u64,
    pub terms: BTreeMap<Exp, u64>,
    pub cap: Option<Exp>,
}

fn den_level(p: u64, q: &Exp) -> u32 {
    vp_int(p, *q.denom() as u64)
}

fn check_exp(p: u64, q: &Exp) -> Result<()> {
    if q.abs() > Exp::from_integer(MAX_EXP) {
        return Err(Error::Window(format!("exponent {q} beyond {MAX_EXP}")));
    }
    if den_level(p, q) > MAX_LEVEL {
        return Err(Error::Window(format!("exponent {q} needs level above {MAX_LEVEL}")));
    }
    Ok(())
}

fn below(cap: &Option<Exp>, q: &Exp) -> bool {
    cap.as_ref().is_none_or(|c| q < c)
}

fn min_cap(a: Option<Exp>, b: Option<Exp>) -> Option<Exp> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn inv_mod_p(p: u64, a: u64) -> u64 {
    let mut r = 1u64;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

impl PerfLaurent {
    pub fn zero(p: u64) -> Self {
        PerfLaurent { p, terms: BTreeMap::new(), cap: None }
    }

    pub fn one(p: u64) -> Self {
        Self::monomial(p, Exp::zero(), 1)
    }

    pub fn monomial(p: u64, q: Exp, c: i64) -> Self {
        let mut x = Self::zero(p);
        let c = c.rem_euclid(p as i64) as u64;
        if c != 0 {
            x.terms.insert(q, c);
        }
        x
    }

    /// `tbar^(num / p^den_pow)`.
    pub fn tbar_pow(p: u64, num: i64, den_pow: u32) -> Self {
        Self::monomial(p, Exp::new(num, (p as i64).pow(den_pow)), 1)
    }

    /// Known modulo `tbar^cap` only.
    pub fn zero_mod(p: u64, cap: Exp) -> Self {
        PerfLaurent { p, terms: BTreeMap::new(), cap: Some(cap) }
    }

    pub fn from_terms(p: u64, terms: impl IntoIterator<Item = (Exp, i64)>, cap: Option<Exp>) -> Result<Self> {
        let mut x = PerfLaurent { p, terms: BTreeMap::new(), cap };
        for (q, c) in terms {
            check_exp(p, &q)?;
            x.add_term(q, c.rem_euclid(p as i64) as u64);
        }
        Ok(x)
    }

    fn add_term(&mut self, q: Exp, c: u64) {
        if c == 0 || !below(&self.cap, &q) {
            return;
        }
        let p = self.p;
        let e = self.terms.entry(q).or_insert(0);
        *e = (*e + c) % p;
        if *e == 0 {
            self.terms.remove(&q);
        }
    }

    /// Largest denominator exponent among terms and cap.
    pub fn level(&self) -> u32 {
        let t = self.terms.keys().map(|q| den_level(self.p, q)).max().unwrap_or(0);
        t.max(self.cap.as_ref().map_or(0, |c| den_level(self.p, c)))
    }

    pub fn is_exact(&self) -> bool {
        self.cap.is_none()
    }

    /// Zero as far as the representation knows.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest exponent present.
    pub fn order(&self) -> Option<Exp> {
        self.terms.keys().next().copied()
    }

    /// Lowest exponent, or the cap for an element that is zero at precision.
    fn order_or_cap(&self) -> Option<Exp> {
        self.order().or(self.cap)
    }

    pub fn coeff(&self, q: &Exp) -> u64 {
        self.terms.get(q).copied().unwrap_or(0)
    }

    pub fn truncate(&self, cap: Exp) -> Self {
        let cap = min_cap(self.cap, Some(cap));
        let terms = self.terms.iter().filter(|(q, _)| below(&cap, q)).map(|(q, c)| (*q, *c)).collect();
        PerfLaurent { p: self.p, terms, cap }
    }

    fn same_p(&self, o: &Self) -> Result<()> {
        if self.p != o.p {
            return Err(Error::Mismatch(format!("primes {} and {}", self.p, o.p)));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.same_p(o)?;
        let cap = min_cap(self.cap, o.cap);
        let mut r = self.truncate_opt(cap);
        r.cap = cap;
        for (q, c) in &o.terms {
            r.add_term(*q, *c);
        }
        Ok(r)
    }

    fn truncate_opt(&self, cap: Option<Exp>) -> Self {
        match cap {
            Some(c) => self.truncate(c),
            None => self.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        let p = self.p;
        let terms = self.terms.iter().map(|(q, c)| (*q, (p - c) % p)).collect();
        PerfLaurent { p, terms, cap: self.cap }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn scale(&self, a: i64) -> Self {
        let p = self.p;
        let a = a.rem_euclid(p as i64) as u64;
        if a == 0 {
            return PerfLaurent { p, terms: BTreeMap::new(), cap: self.cap };
        }
        let terms = self.terms.iter().map(|(q, c)| (*q, c * a % p)).collect();
        PerfLaurent { p, terms, cap: self.cap }
    }

    /// Multiply by `tbar^q`.
    pub fn shift(&self, q: Exp) -> Self {
        let terms = self.terms.iter().map(|(e, c)| (e + q, *c)).collect();
        PerfLaurent { p: self.p, terms, cap: self.cap.map(|c| c + q) }
    }

    fn product_cap(&self, o: &Self) -> Option<Exp> {
        let a = match (self.cap, o.order_or_cap()) {
            (Some(c), Some(v)) => Some(c + v),
            (Some(_), None) => None,
            (None, _) => None,
        };
        let b = match (o.cap, self.order_or_cap()) {
            (Some(c), Some(v)) => Some(c + v),
            _ => None,
        };
        match (self.cap, o.cap) {
            (None, None) => None,
            _ => min_cap(a, b).or(Some(Exp::from_integer(MAX_EXP))),
        }
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.same_p(o)?;
        let cap = self.product_cap(o);
        let mut r = PerfLaurent { p: self.p, terms: BTreeMap::new(), cap };
        if self.terms.len() * o.terms.len() > MAX_TERMS * 16 {
            return Err(Error::Window("component product too large".into()));
        }
        for (qa, ca) in &self.terms {
            for (qb, cb) in &o.terms {
                let q = qa + qb;
                if below(&cap, &q) {
                    r.add_term(q, ca * cb % self.p);
                }
            }
        }
        if r.terms.len() > MAX_TERMS {
            return Err(Error::Window("too many terms".into()));
        }
        if let Some(q) = r.terms.keys().next_back() {
            check_exp(self.p, q)?;
        }
        Ok(r)
    }

    /// `x^p`, exact since coefficients lie in `F_p`.
    pub fn frobenius(&self) -> Result<Self> {
        let p = Exp::from_integer(self.p as i64);
        let terms: BTreeMap<Exp, u64> = self.terms.iter().map(|(q, c)| (q * p, *c)).collect();
        if let Some(q) = terms.keys().next_back().into_iter().chain(terms.keys().next()).max_by_key(|q| q.abs()) {
            check_exp(self.p, q)?;
        }
        Ok(PerfLaurent { p: self.p, terms, cap: self.cap.map(|c| c * p) })
    }

    /// The unique `p`-th root, one level deeper.
    pub fn root(&self) -> Result<Self> {
        let p = Exp::from_integer(self.p as i64);
        let mut terms = BTreeMap::new();
        for (q, c) in &self.terms {
            let r = q / p;
            check_exp(self.p, &r)?;
            terms.insert(r, *c);
        }
        Ok(PerfLaurent { p: self.p, terms, cap: self.cap.map(|c| c / p) })
    }

    /// `x^(p^k)` for `k` of either sign.
    pub fn frobenius_pow(&self, k: i64) -> Result<Self> {
        let mut x = self.clone();
        for _ in 0..k.unsigned_abs() {
            x = if k > 0 { x.frobenius()? } else { x.root()? };
        }
        Ok(x)
    }

    /// `x^e` through base-`p` digits, each Frobenius twist being free.
    pub fn pow(&self, mut e: u64) -> Result<Self> {
        let mut acc = Self::one(self.p);
        let mut base = self.clone();
        while e > 0 {
            let d = e % self.p;
            for _ in 0..d {
                acc = acc.mul(&base)?;
            }
            e /= self.p;
            if e > 0 {
                base = base.frobenius()?;
            }
        }
        Ok(acc)
    }

    /// Inverse of a nonzero element. A single exact monomial inverts exactly;
    /// otherwise the geometric series is cut at `cap` (absolute exponent).
    pub fn inverse(&self, cap: Option<Exp>) -> Result<Self> {
        let (v, c) = match self.terms.iter().next() {
            Some((q, c)) => (*q, *c),
            None => return Err(Error::Precondition("inverse of zero".into())),
        };
        let cinv = inv_mod_p(self.p, c) as i64;
        let lead = Self::monomial(self.p, -v, cinv);
        if self.terms.len() == 1 && self.cap.is_none() {
            return Ok(lead);
        }
        // self = c tbar^v (1 + u) with u of positive order, known below relative cap
        let rel_self = self.cap.map(|k| k - v);
        let rel_req = cap.map(|k| k + v);
        let rel = min_cap(rel_self, rel_req)
            .ok_or_else(|| Error::Precondition("inverse of a polynomial needs a cap".into()))?;
        let mut u = self.mul(&lead)?;
        u.cap = Some(rel);
        u = u.truncate(rel);
        u.add_term(Exp::zero(), self.p - 1);
        let mu = u.neg();
        let mut term = Self::one(self.p).truncate(rel);
        let mut sum = term.clone();
        let mut guard = 0usize;
        while !term.is_zero() {
            term = term.mul(&mu)?.truncate(rel);
            sum = sum.add(&term)?;
            guard += 1;
            if guard > MAX_TERMS {
                return Err(Error::Window("inverse series does not terminate".into()));
            }
        }
        sum.cap = Some(rel);
        sum.mul(&lead)
    }

    /// Equal modulo the coarser of the two caps.
    pub fn eq_at_precision(&self, o: &Self) -> bool {
        self.sub(o).map(|d| d.is_zero()).unwrap_or(false)
    }

    /// `gamma_c`: `1 + tbar -> (1 + tbar)^c`, applied to every `p`-power root,
    /// computed modulo `tbar^cap`.
    pub fn gamma_flat(&self, c: &GammaElement, cap: Exp) -> Result<Self> {
        let cap = min_cap(self.cap, Some(cap)).unwrap();
        let ord = match self.order() {
            Some(v) if v < cap => v,
            _ => return Ok(Self::zero_mod(self.p, cap)),
        };
        let rel = cap - ord;
        // digits of c up to the largest relevant power of p
        let span = (rel * Exp::from_integer((self.p as i64).pow(self.level()))).ceil().to_integer() + 2;
        let mut k = 1u32;
        let mut pk = self.p as i64;
        while pk < span {
            pk *= self.p as i64;
            k += 1;
        }
        let md = Modulus::new(self.p, k)?;
        let mut cv = c.value(&md);
        let mut c_digits = Vec::with_capacity(k as usize);
        for _ in 0..k {
            c_digits.push(cv % self.p);
            cv /= self.p;
        }
        let mut images: BTreeMap<Exp, Self> = BTreeMap::new();
        let mut out = Self::zero_mod(self.p, cap);
        for (q, c) in &self.terms {
            if *q >= cap {
                continue;
            }
            let unit = Exp::new(1, *q.denom());
            let g = match images.get(&unit) {
                Some(g) => g.clone(),
                None => {
                    // (1 + s)^c - 1 modulo s^rel, s = tbar^unit
                    let s_cap = unit + rel;
                    let mut acc = Self::one(self.p).truncate(s_cap);
                    let mut sp = Self::monomial(self.p, unit, 1);
                    for &d in &c_digits {
                        if sp.order().is_some_and(|o| o >= s_cap) {
                            break;
                        }
                        let f = Self::one(self.p).add(&sp)?.truncate(s_cap);
                        for _ in 0..d {
                            acc = acc.mul(&f)?.truncate(s_cap);
                        }
                        sp = sp.frobenius()?;
                    }
                    let g = acc.sub(&Self::one(self.p))?;
                    images.insert(unit, g.clone());
                    g
                }
            };
            let a = (q / unit).to_integer();
            let img = if a >= 0 {
                g.truncate(cap).pow(a as u64)?
            } else {
                let gi = g.inverse(Some(cap - q - unit))?;
                gi.pow(a.unsigned_abs())?
            };
            out = out.add(&img.scale(*c as i64).truncate(cap))?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> PerfJson {
        let split = |q: &Exp| -> (i64, u32) { (*q.numer(), den_level(self.p, q)) };
        PerfJson {
            p: self.p,
            level: self.level(),
            terms: self
                .terms
                .iter()
                .map(|(q, c)| {
                    let (n, d) = split(q);
                    (n, d, *c)
                })
                .collect(),
            cap: self.cap.as_ref().map(split),
        }
    }

    pub fn from_json(j: &PerfJson) -> Result<Self> {
        let pp = j.p as i64;
        let mk = |n: i64, d: u32| Exp::new(n, pp.pow(d));
        let cap = j.cap.map(|(n, d)| mk(n, d));
        Self::from_terms(j.p, j.terms.iter().map(|&(n, d, c)| (mk(n, d), c as i64)), cap)
    }
}

/// `v(tbar) = p/(p-1)`.
pub fn tbar_valuation(p: u64) -> Exp {
    Exp::new(p as i64, p as i64 - 1)
}

/// Tilt valuation: lowest exponent times `v(tbar)`.
pub fn tilt_valuation(x: &PerfLaurent) -> Result<Exp> {
    let v = x.order().ok_or_else(|| Error::Precondition("valuation of zero".into()))?;
    Ok(v * tbar_valuation(x.p))
}

/// JSON form: `terms` are `[num, den_pow, coeff]` for `coeff * tbar^(num/p^den_pow)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerfJson {
    pub p: u64,
    pub level: u32,
    pub terms: Vec<(i64, u32, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<(i64, u32)>,
}

/// Shape of random samples.
#[derive(Clone, Copy, Debug)]
pub struct SampleShape {
    pub max_level: u32,
    pub max_num: i64,
    pub min_num: i64,
    pub max_terms: usize,
}

impl Default for SampleShape {
    fn default() -> Self {
        SampleShape { max_level: 1, max_num: 6, min_num: 0, max_terms: 3 }
    }
}

pub fn sample_perf<R: Rng>(rng: &mut R, p: u64, shape: SampleShape) -> PerfLaurent {
    let n = rng.gen_range(0..=shape.max_terms);
    let mut x = PerfLaurent::zero(p);
    for _ in 0..n {
        let lev = rng.gen_range(0..=shape.max_level);
        let num = rng.gen_range(shape.min_num..=shape.max_num);
        let c = rng.gen_range(1..p) as i64;
        x.add_term(Exp::new(num, (p as i64).pow(lev)), c as u64);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: i64, d: i64) -> Exp {
        Exp::new(n, d)
    }

    #[test]
    fn root_then_frobenius() {
        let x = PerfLaurent::from_terms(3, [(e(1, 1), 1), (e(2, 3), 2)], None).unwrap();
        assert_eq!(x.root().unwrap().frobenius().unwrap(), x);
        assert_eq!(x.root().unwrap().level(), 2);
    }

    #[test]
    fn frobenius_is_additive() {
        let x = PerfLaurent::from_terms(5, [(e(1, 1), 1), (e(0, 1), 3)], None).unwrap();
        let y = PerfLaurent::from_terms(5, [(e(1, 1), 4), (e(1, 5), 1)], None).unwrap();
        let lhs = x.add(&y).unwrap().frobenius().unwrap();
        let rhs = x.frobenius().unwrap().add(&y.frobenius().unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        let xp = x.pow(5).unwrap();
        assert_eq!(xp, x.frobenius().unwrap());
    }

    #[test]
    fn valuations() {
        assert_eq!(tilt_valuation(&PerfLaurent::one(3)).unwrap(), Exp::zero());
        assert_eq!(tilt_valuation(&PerfLaurent::tbar_pow(3, 1, 0)).unwrap(), e(3, 2));
        assert_eq!(tilt_valuation(&PerfLaurent::tbar_pow(3, 1, 1)).unwrap(), e(1, 2));
        assert!(tilt_valuation(&PerfLaurent::zero(3)).is_err());
    }

    #[test]
    fn inverse_series() {
        let x = PerfLaurent::from_terms(3, [(e(1, 1), 1), (e(2, 1), 1)], None).unwrap();
        let y = x.inverse(Some(e(8, 1))).unwrap();
        let one = x.mul(&y).unwrap();
        assert!(one.eq_at_precision(&PerfLaurent::one(3)));
        assert!(one.cap.unwrap() >= e(8, 1) + e(1, 1));
    }

    #[test]
    fn gamma_on_tbar() {
        // c = 4 at p = 3: (1 + t)^4 - 1 = t + t^3 + t^4 mod 3
        let t = PerfLaurent::tbar_pow(3, 1, 0);
        let g = t.gamma_flat(&GammaElement::generator(3), e(10, 1)).unwrap();
        let want = PerfLaurent::from_terms(3, [(e(1, 1), 1), (e(3, 1), 1), (e(4, 1), 1)], None).unwrap();
        assert!(g.eq_at_precision(&want));
    }

    #[test]
    fn json_round_trip() {
        let x = PerfLaurent::from_terms(3, [(e(-1, 3), 2), (e(5, 9), 1)], Some(e(4, 1))).unwrap();
        assert_eq!(PerfLaurent::from_json(&x.to_json()).unwrap(), x);
    }
}
