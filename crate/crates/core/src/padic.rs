//! Scalars: residues mod `p^N` with a power-of-`p` denominator.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Largest modulus we allow, so that products fit in `u128` comfortably.
pub const MAX_MODULUS: u64 = 1 << 62;

/// The ring `Z/p^n`. Cheap to copy; every series and matrix carries one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modulus {
    pub p: u64,
    pub n: u32,
    pub m: u64,
}

impl Modulus {
    pub fn new(p: u64, n: u32) -> Result<Self> {
        if !is_odd_prime(p) {
            return Err(Error::Precondition(format!("p = {p} is not an odd prime")));
        }
        if n == 0 {
            return Err(Error::Precondition("precision must be positive".into()));
        }
        let mut m: u64 = 1;
        for _ in 0..n {
            m = m
                .checked_mul(p)
                .filter(|&v| v <= MAX_MODULUS)
                .ok_or_else(|| Error::Precondition(format!("{p}^{n} exceeds the supported modulus")))?;
        }
        Ok(Modulus { p, n, m })
    }

    /// Same prime, different precision.
    pub fn with_prec(&self, n: u32) -> Result<Self> {
        Modulus::new(self.p, n)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.m {
            s - self.m
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.m - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.m - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.m as u128) as u64
    }

    pub fn from_i64(&self, a: i64) -> u64 {
        a.rem_euclid(self.m as i64) as u64
    }

    pub fn from_i128(&self, a: i128) -> u64 {
        a.rem_euclid(self.m as i128) as u64
    }

    /// Symmetric representative in `(-m/2, m/2]`.
    pub fn signed(&self, a: u64) -> i64 {
        if a > self.m / 2 {
            a as i64 - self.m as i64
        } else {
            a as i64
        }
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1 % self.m;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    /// `p^k mod m` (zero once `k >= n`).
    pub fn ppow(&self, k: u32) -> u64 {
        if k >= self.n {
            0
        } else {
            self.p.pow(k)
        }
    }

    /// Valuation of a residue; `n` for zero.
    pub fn val(&self, a: u64) -> u32 {
        if a == 0 {
            return self.n;
        }
        let mut v = 0;
        let mut x = a;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn is_unit(&self, a: u64) -> bool {
        !a.is_multiple_of(self.p)
    }

    /// Inverse of a unit.
    pub fn inv(&self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        let (mut r0, mut r1) = (self.m as i128, a as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        Some(self.from_i128(t0))
    }

    /// Teichmuller representative of `a mod p`.
    pub fn teich(&self, a: u64) -> u64 {
        let mut x = a % self.p;
        if x == 0 {
            return 0;
        }
        for _ in 0..self.n {
            x = self.pow(x, self.p);
        }
        x
    }

    /// Reduce a residue to a coarser modulus of the same prime.
    pub fn reduce_to(&self, a: u64, coarser: &Modulus) -> u64 {
        a % coarser.m
    }
}

pub fn is_odd_prime(p: u64) -> bool {
    if p < 3 || p.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// `v_p(k)` for a positive integer.
pub fn vp_int(p: u64, mut k: u64) -> u32 {
    if k == 0 {
        return u32::MAX;
    }
    let mut v = 0;
    while k.is_multiple_of(p) {
        k /= p;
        v += 1;
    }
    v
}

/// Valuation with an explicit infinity marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Valuation {
    Finite(i64),
    /// Indistinguishable from zero at the available precision.
    Infinity,
}

impl Valuation {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinity)
    }

    pub fn finite(&self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(*v),
            Valuation::Infinity => None,
        }
    }
}

/// `mantissa * p^(-denom_exp)`, known modulo `p^abs_prec`.
///
/// `abs_prec` is an absolute precision and may be negative only in degenerate
/// cases that construction rejects; fresh values have `abs_prec = N - e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PAdic {
    pub p: u64,
    pub prec: u32,
    pub mantissa: u64,
    pub denom_exp: u32,
    pub abs_prec: i64,
}

impl PAdic {
    fn modulus(&self) -> Modulus {
        Modulus { p: self.p, n: self.prec, m: self.p.pow(self.prec) }
    }

    /// Build from a residue mod `p^N` and a denominator exponent.
    pub fn from_parts(md: &Modulus, mantissa: u64, denom_exp: u32) -> Result<Self> {
        if denom_exp >= md.n {
            return Err(Error::Precision(format!(
                "denominator exponent {denom_exp} leaves no precision at N = {}",
                md.n
            )));
        }
        Ok(PAdic {
            p: md.p,
            prec: md.n,
            mantissa: mantissa % md.m,
            denom_exp,
            abs_prec: md.n as i64 - denom_exp as i64,
        }
        .normalized())
    }

    pub fn from_int(md: &Modulus, a: i64) -> Self {
        PAdic { p: md.p, prec: md.n, mantissa: md.from_i64(a), denom_exp: 0, abs_prec: md.n as i64 }
    }

    pub fn zero(md: &Modulus) -> Self {
        Self::from_int(md, 0)
    }

    pub fn one(md: &Modulus) -> Self {
        Self::from_int(md, 1)
    }

    /// Effective relative-to-integers precision `N - e`.
    pub fn effective_precision(&self) -> i64 {
        self.abs_prec
    }

    /// Drop powers of `p` shared by mantissa and denominator.
    fn normalized(mut self) -> Self {
        let md = self.modulus();
        let keep = (self.abs_prec + self.denom_exp as i64).clamp(0, md.n as i64) as u32;
        let mask = md.p.pow(keep);
        self.mantissa %= mask.max(1);
        while self.denom_exp > 0 && self.mantissa.is_multiple_of(self.p) {
            self.mantissa /= self.p;
            self.denom_exp -= 1;
        }
        if self.abs_prec + (self.denom_exp as i64) <= 0 {
            self.mantissa = 0;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_infinite()
    }

    pub fn valuation(&self) -> Valuation {
        let md = self.modulus();
        let keep = (self.abs_prec + self.denom_exp as i64).clamp(0, md.n as i64) as u32;
        let r = self.mantissa % md.p.pow(keep).max(1);
        if r == 0 || keep == 0 {
            Valuation::Infinity
        } else {
            Valuation::Finite(md.val(r) as i64 - self.denom_exp as i64)
        }
    }

    fn check(&self, o: &PAdic) -> Result<()> {
        if self.p != o.p || self.prec != o.prec {
            return Err(Error::Mismatch(format!(
                "scalars over p={},N={} and p={},N={}",
                self.p, self.prec, o.p, o.prec
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &PAdic) -> Result<PAdic> {
        self.check(o)?;
        let md = self.modulus();
        let e = self.denom_exp.max(o.denom_exp);
        let a = md.mul(self.mantissa, md.ppow(e - self.denom_exp));
        let b = md.mul(o.mantissa, md.ppow(e - o.denom_exp));
        Ok(PAdic {
            p: self.p,
            prec: self.prec,
            mantissa: md.add(a, b),
            denom_exp: e,
            abs_prec: self.abs_prec.min(o.abs_prec),
        }
        .normalized())
    }

    pub fn neg(&self) -> PAdic {
        let md = self.modulus();
        PAdic { mantissa: md.neg(self.mantissa), ..*self }.normalized()
    }

    pub fn sub(&self, o: &PAdic) -> Result<PAdic> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &PAdic) -> Result<PAdic> {
        self.check(o)?;
        let md = self.modulus();
        let e = self.denom_exp + o.denom_exp;
        let va = self.valuation().finite();
        let vb = o.valuation().finite();
        let abs_prec = match (va, vb) {
            (Some(a), Some(b)) => (self.abs_prec + b).min(o.abs_prec + a),
            (Some(a), None) => o.abs_prec + a,
            (None, Some(b)) => self.abs_prec + b,
            (None, None) => self.abs_prec.min(o.abs_prec),
        };
        let mut mant = md.mul(self.mantissa, o.mantissa);
        let mut e = e;
        while e >= md.n && mant.is_multiple_of(md.p) && mant != 0 {
            mant /= md.p;
            e -= 1;
        }
        if e >= md.n {
            if mant == 0 {
                return Ok(PAdic::zero(&md));
            }
            return Err(Error::Precision(format!("product needs denominator p^{e} at N = {}", md.n)));
        }
        Ok(PAdic { p: self.p, prec: self.prec, mantissa: mant, denom_exp: e, abs_prec }.normalized())
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self) -> Result<PAdic> {
        let md = self.modulus();
        let v = self
            .valuation()
            .finite()
            .ok_or_else(|| Error::Precondition("inverse of an element indistinguishable from 0".into()))?;
        let vm = v + self.denom_exp as i64;
        let unit = self.mantissa / md.p.pow(vm as u32);
        let ui = md.inv(unit).expect("unit part");
        let rel = self.abs_prec - v;
        if v > 0 {
            let e = v as u32;
            if e >= md.n {
                return Err(Error::Precision(format!("inverse needs denominator p^{e}")));
            }
            Ok(PAdic { p: self.p, prec: self.prec, mantissa: ui, denom_exp: e, abs_prec: rel - v }.normalized())
        } else {
            let mant = md.mul(ui, md.ppow((-v) as u32));
            Ok(PAdic { p: self.p, prec: self.prec, mantissa: mant, denom_exp: 0, abs_prec: rel - v }.normalized())
        }
    }

    /// Integral residue mod `p^N` when `denom_exp = 0`.
    pub fn as_integral(&self) -> Option<u64> {
        (self.denom_exp == 0).then_some(self.mantissa)
    }

    /// Equality at the joint precision of both operands.
    pub fn eq_at_precision(&self, o: &PAdic) -> bool {
        self.sub(o).map(|d| d.is_zero()).unwrap_or(false)
    }
}

impl fmt::Display for PAdic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom_exp == 0 {
            write!(f, "{} (mod {}^{})", self.mantissa, self.p, self.abs_prec)
        } else {
            write!(f, "{}/{}^{} (mod {}^{})", self.mantissa, self.p, self.denom_exp, self.p, self.abs_prec)
        }
    }
}

/// `num/den` in `Z/p^N` with the `p`-part of the denominator moved into `denom_exp`.
pub fn padic_from_rational(num: i64, den: i64, p: u64, n: u32) -> Result<PAdic> {
    let md = Modulus::new(p, n)?;
    if den == 0 {
        return Err(Error::Precondition("zero denominator".into()));
    }
    if num == 0 {
        return Ok(PAdic::zero(&md));
    }
    let vn = vp_int(p, num.unsigned_abs());
    let vd = vp_int(p, den.unsigned_abs());
    let shift = vn.min(vd);
    let e = vd - shift;
    if e >= n {
        return Err(Error::Precision(format!("denominator exponent {e} >= N = {n}")));
    }
    let pn = (p as i128).pow(shift);
    let nu = num as i128 / pn;
    let du = den as i128 / (p as i128).pow(vd);
    let mut top = md.from_i128(nu);
    top = md.mul(top, md.ppow(vd - shift - e));
    let inv = md.inv(md.from_i128(du)).expect("unit denominator part");
    PAdic::from_parts(&md, md.mul(top, inv), e)
}

pub fn valuation(x: &PAdic) -> Valuation {
    x.valuation()
}

/// The `(p-1)`-st root of unity congruent to `a`.
pub fn teichmuller_lift(a: u64, p: u64, n: u32) -> Result<PAdic> {
    let md = Modulus::new(p, n)?;
    if a.is_multiple_of(p) {
        return Err(Error::Precondition("Teichmuller lift of 0 mod p".into()));
    }
    Ok(PAdic::from_int(&md, md.teich(a) as i64))
}

/// `C(c, n)` for a `p`-adic integer `c`.
///
/// The result is computed from the integer representative of `c` and
/// carries absolute precision `N - v_p(n!)`; the shortfall is returned.
pub fn binomial_padic(c: &PAdic, k: u64) -> Result<(PAdic, u32)> {
    let md = Modulus { p: c.p, n: c.prec, m: c.p.pow(c.prec) };
    if c.denom_exp != 0 {
        return Err(Error::Precondition("binomial of a non-integral element".into()));
    }
    let shortfall: u32 = (1..=k).map(|i| vp_int(md.p, i)).sum();
    if shortfall as i64 >= c.abs_prec {
        return Err(Error::Precision(format!("dividing by {k}! exhausts precision")));
    }
    // Work with `guard` extra digits so the division by `k!` is exact.
    let work_n = md.n + shortfall;
    let wm = Modulus::new(md.p, work_n).map_err(|_| Error::Precision("guard digits exceed the word size".into()))?;
    let c0 = c.mantissa as i128;
    let mut unit = 1u64 % wm.m;
    let mut v: i64 = 0;
    for i in 0..k {
        let t = c0 - i as i128;
        if t == 0 {
            return Ok((PAdic::zero(&md), shortfall));
        }
        let vt = vp_int(md.p, t.unsigned_abs() as u64);
        v += vt as i64;
        let u = t / (md.p as i128).pow(vt);
        unit = wm.mul(unit, wm.from_i128(u));
        let d = i + 1;
        let vd = vp_int(md.p, d);
        v -= vd as i64;
        let du = d / md.p.pow(vd);
        unit = wm.mul(unit, wm.inv(du % wm.m).expect("unit"));
    }
    let mant = if v >= md.n as i64 { 0 } else { md.mul(unit % md.m, md.ppow(v as u32)) };
    let mut r = PAdic::from_parts(&md, mant, 0)?;
    r.abs_prec = c.abs_prec - shortfall as i64;
    Ok((r.normalized(), shortfall))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_examples() {
        let a = padic_from_rational(1, 1, 3, 5).unwrap();
        assert_eq!((a.mantissa, a.denom_exp), (1, 0));
        let b = padic_from_rational(1, 3, 3, 5).unwrap();
        assert_eq!((b.mantissa, b.denom_exp), (1, 1));
        let c = padic_from_rational(2, 8, 5, 4).unwrap();
        assert_eq!((c.mantissa, c.denom_exp), (469, 0));
        assert!(padic_from_rational(1, 0, 3, 5).is_err());
        assert!(padic_from_rational(1, 243, 3, 5).is_err());
    }

    #[test]
    fn valuations() {
        let md = Modulus::new(3, 6).unwrap();
        assert_eq!(PAdic::from_int(&md, 3).valuation(), Valuation::Finite(1));
        assert_eq!(padic_from_rational(1, 3, 3, 6).unwrap().valuation(), Valuation::Finite(-1));
        assert_eq!(PAdic::from_int(&md, 729).valuation(), Valuation::Infinity);
    }

    #[test]
    fn teichmuller_examples() {
        assert_eq!(teichmuller_lift(1, 3, 6).unwrap().mantissa, 1);
        assert_eq!(teichmuller_lift(2, 3, 6).unwrap().mantissa, 729 - 1);
        assert_eq!(teichmuller_lift(2, 5, 4).unwrap().mantissa, 182);
        assert!(teichmuller_lift(3, 3, 6).is_err());
    }

    #[test]
    fn binomial_examples() {
        let md = Modulus::new(3, 8).unwrap();
        let c = PAdic::from_int(&md, 4);
        assert_eq!(binomial_padic(&c, 0).unwrap().0.mantissa, 1);
        assert_eq!(binomial_padic(&c, 1).unwrap().0.mantissa, 4);
        assert_eq!(binomial_padic(&c, 2).unwrap().0.mantissa, 6);
        let neg = PAdic::from_int(&md, -1);
        // C(-1, k) = (-1)^k
        assert!(binomial_padic(&neg, 3).unwrap().0.eq_at_precision(&PAdic::from_int(&md, -1)));
    }

    #[test]
    fn inverse_roundtrip() {
        let md = Modulus::new(5, 10).unwrap();
        let x = padic_from_rational(7, 25, 5, 10).unwrap();
        let y = x.inv().unwrap();
        assert!(x.mul(&y).unwrap().eq_at_precision(&PAdic::one(&md)));
    }
}
