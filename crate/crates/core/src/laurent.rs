//! Truncated Laurent series in `pi` over `Z/p^N[1/p]`, with `phi`, `gamma_c`,
//! `psi`, `t = log(1 + pi)`, residues and the residue pairing.
//!
//! A series stores residues `c_k` for `lo <= k <= hi` and one common
//! denominator exponent `e`; it represents `p^(-e) * sum c_k pi^k`, known modulo
//! `p^(N-e)`. With `tail` set, it is only known modulo `pi^(hi+1)`; otherwise it
//! is an exact Laurent polynomial.
//!
//! Negative powers follow the ring of the etale model: `phi(pi)^(-1)` is the
//! expansion at the boundary `pi^(-p) (1 + p w)^(-1)` with `w` a polynomial in
//! `pi^(-1)`, which terminates modulo `p^N`. `gamma_c(pi)/pi` is a unit of
//! `Z_p[[pi]]`, so `gamma_c` uses the expansion around 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::{vp_int, Modulus, PAdic};

/// Largest exponent magnitude any series may reach.
pub const MAX_EXPONENT: i64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedLaurent {
    pub md: Modulus,
    pub lo: i64,
    pub hi: i64,
    pub e: u32,
    pub c: Vec<u64>,
    pub tail: bool,
}

/// Multiply two dense Laurent polynomials, keeping exponents in `[floor, cap]`.
pub(crate) fn conv(md: &Modulus, a_lo: i64, a: &[u64], b_lo: i64, b: &[u64], floor: i64, cap: i64) -> (i64, Vec<u64>) {
    if a.is_empty() || b.is_empty() {
        return (floor.max(a_lo + b_lo), Vec::new());
    }
    let lo = (a_lo + b_lo).max(floor);
    let hi = (a_lo + b_lo + a.len() as i64 + b.len() as i64 - 2).min(cap);
    if hi < lo {
        return (lo, Vec::new());
    }
    let mut acc = vec![0u128; (hi - lo + 1) as usize];
    let m = md.m as u128;
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        let ei = a_lo + i as i64;
        // range of j with lo <= ei + b_lo + j <= hi
        let j0 = (lo - ei - b_lo).max(0);
        let j1 = (hi - ei - b_lo).min(b.len() as i64 - 1);
        if j1 < j0 {
            continue;
        }
        for j in j0..=j1 {
            let y = b[j as usize];
            if y == 0 {
                continue;
            }
            let k = (ei + b_lo + j - lo) as usize;
            acc[k] = (acc[k] + x as u128 * y as u128) % m;
        }
    }
    (lo, acc.into_iter().map(|v| v as u64).collect())
}

impl TruncatedLaurent {
    pub fn zero(md: &Modulus) -> Self {
        TruncatedLaurent { md: *md, lo: 0, hi: -1, e: 0, c: Vec::new(), tail: false }
    }

    /// Zero known up to `pi^hi`.
    pub fn zero_to(md: &Modulus, hi: i64) -> Self {
        TruncatedLaurent { md: *md, lo: hi + 1, hi, e: 0, c: Vec::new(), tail: true }
    }

    pub fn monomial(md: &Modulus, k: i64) -> Self {
        Self::from_coeffs(md, k, &[1])
    }

    pub fn constant(md: &Modulus, a: i64) -> Self {
        Self::from_coeffs(md, 0, &[a])
    }

    pub fn scalar(x: &PAdic) -> Result<Self> {
        let md = Modulus::new(x.p, x.prec)?;
        Ok(TruncatedLaurent { md, lo: 0, hi: 0, e: x.denom_exp, c: vec![x.mantissa], tail: false }.trimmed())
    }

    /// Exact Laurent polynomial with integer coefficients starting at `lo`.
    pub fn from_coeffs(md: &Modulus, lo: i64, coeffs: &[i64]) -> Self {
        let c: Vec<u64> = coeffs.iter().map(|&a| md.from_i64(a)).collect();
        TruncatedLaurent { md: *md, lo, hi: lo + c.len() as i64 - 1, e: 0, c, tail: false }.trimmed()
    }

    pub fn from_raw(md: &Modulus, lo: i64, c: Vec<u64>, e: u32, tail: bool, hi: i64) -> Self {
        let mut c = c;
        let want = (hi - lo + 1).max(0) as usize;
        c.resize(want, 0);
        TruncatedLaurent { md: *md, lo, hi, e, c, tail }.trimmed()
    }

    /// `1 + pi`.
    pub fn one_plus_pi(md: &Modulus) -> Self {
        Self::from_coeffs(md, 0, &[1, 1])
    }

    pub fn is_exact(&self) -> bool {
        !self.tail
    }

    /// Raw residue at exponent `k` (0 outside the stored range).
    pub fn get(&self, k: i64) -> u64 {
        if k < self.lo || k > self.hi {
            0
        } else {
            self.c[(k - self.lo) as usize]
        }
    }

    pub fn coeff(&self, k: i64) -> PAdic {
        PAdic::from_parts(&self.md, self.get(k), self.e).expect("e < N")
    }

    /// Raw coefficients are meaningful modulo `p^N`, i.e. values modulo `p^(N-e)`.
    fn prec_mask(&self) -> u64 {
        self.md.m
    }

    pub fn is_zero(&self) -> bool {
        let mask = self.prec_mask();
        self.c.iter().all(|&x| x % mask == 0)
    }

    /// Lowest exponent with a coefficient nonzero at precision.
    pub fn order(&self) -> Option<i64> {
        let mask = self.prec_mask();
        self.c.iter().position(|&x| x % mask != 0).map(|i| self.lo + i as i64)
    }

    /// Reduce coefficients to the carried precision and drop zero coefficients
    /// at the ends. The denominator exponent is never lowered: doing so would
    /// claim digits that were never computed.
    fn trimmed(mut self) -> Self {
        let mask = self.prec_mask();
        for x in self.c.iter_mut() {
            *x %= mask;
        }
        if !self.tail {
            while let Some(&0) = self.c.last() {
                self.c.pop();
                self.hi -= 1;
            }
            let lead = self.c.iter().take_while(|&&x| x == 0).count();
            if lead == self.c.len() {
                return TruncatedLaurent::zero(&self.md);
            }
            self.c.drain(..lead);
            self.lo += lead as i64;
        } else {
            let lead = self.c.iter().take_while(|&&x| x == 0).count();
            self.c.drain(..lead);
            self.lo += lead as i64;
        }
        self
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.md != o.md {
            return Err(Error::Mismatch(format!(
                "series over p={},N={} and p={},N={}",
                self.md.p, self.md.n, o.md.p, o.md.n
            )));
        }
        Ok(())
    }

    /// Coefficients rescaled to denominator exponent `e >= self.e`.
    fn lifted(&self, e: u32) -> Vec<u64> {
        let f = self.md.ppow(e - self.e);
        self.c.iter().map(|&x| self.md.mul(x, f)).collect()
    }

    /// Top of the reliable window of a combination of `self` and `o`.
    fn joint_hi(&self, o: &Self) -> (i64, bool) {
        match (self.tail, o.tail) {
            (false, false) => (self.hi.max(o.hi), false),
            (true, false) => (self.hi, true),
            (false, true) => (o.hi, true),
            (true, true) => (self.hi.min(o.hi), true),
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let e = self.e.max(o.e);
        let (hi, tail) = self.joint_hi(o);
        let lo = self.lo.min(o.lo);
        if hi < lo {
            return Ok(if tail { Self::zero_to(&self.md, hi) } else { Self::zero(&self.md) });
        }
        let mut c = vec![0u64; (hi - lo + 1) as usize];
        for (src, s) in [(self, self.lifted(e)), (o, o.lifted(e))] {
            for (i, x) in s.into_iter().enumerate() {
                let k = src.lo + i as i64;
                if k <= hi {
                    let idx = (k - lo) as usize;
                    c[idx] = self.md.add(c[idx], x);
                }
            }
        }
        Ok(TruncatedLaurent { md: self.md, lo, hi, e, c, tail }.trimmed())
    }

    pub fn neg(&self) -> Self {
        let mut r = self.clone();
        for x in r.c.iter_mut() {
            *x = self.md.neg(*x);
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    /// Multiply by an integer residue.
    pub fn scale_int(&self, a: u64) -> Self {
        let mut r = self.clone();
        for x in r.c.iter_mut() {
            *x = self.md.mul(*x, a);
        }
        r.trimmed()
    }

    pub fn scale(&self, a: &PAdic) -> Result<Self> {
        let s = Self::scalar(a)?;
        self.mul(&s)
    }

    /// Multiply by `pi^k`.
    pub fn shift(&self, k: i64) -> Self {
        let mut r = self.clone();
        r.lo += k;
        r.hi += k;
        r
    }

    /// Discard exponents above `cap`.
    pub fn truncate(&self, cap: i64) -> Self {
        if cap >= MAX_EXPONENT {
            return self.clone();
        }
        if cap >= self.hi {
            if self.tail {
                return self.clone();
            }
            let mut r = self.clone();
            if r.c.is_empty() {
                r.lo = r.lo.min(cap + 1).min(0);
                r.hi = r.lo - 1;
            }
            r.c.resize((cap - r.lo + 1) as usize, 0);
            r.hi = cap;
            r.tail = true;
            return r;
        }
        let mut r = self.clone();
        let keep = (cap - r.lo + 1).max(0) as usize;
        r.c.truncate(keep);
        r.hi = cap;
        r.tail = true;
        if r.lo > cap {
            r.lo = cap + 1;
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.mul_capped(o, i64::MAX)
    }

    /// Product truncated at `cap`.
    pub fn mul_capped(&self, o: &Self, cap: i64) -> Result<Self> {
        self.check(o)?;
        let e = self.e + o.e;
        if e >= self.md.n {
            return Err(Error::Precision(format!("product denominator p^{e} at N = {}", self.md.n)));
        }
        let mut hi = i64::MAX;
        let mut tail = false;
        if self.tail {
            hi = hi.min(self.hi + o.lo);
            tail = true;
        }
        if o.tail {
            hi = hi.min(o.hi + self.lo);
            tail = true;
        }
        if !tail {
            hi = self.hi + o.hi;
        }
        if cap < hi {
            hi = cap;
            tail = true;
        }
        if self.c.is_empty() || o.c.is_empty() {
            return Ok(if tail { Self::zero_to(&self.md, hi) } else { Self::zero(&self.md) });
        }
        let (lo, c) = conv(&self.md, self.lo, &self.c, o.lo, &o.c, i64::MIN, hi);
        Ok(TruncatedLaurent::from_raw(&self.md, lo, c, e, tail, hi.max(lo - 1)))
    }

    pub fn pow(&self, k: u32, cap: i64) -> Result<Self> {
        let mut r = Self::constant(&self.md, 1);
        for _ in 0..k {
            r = r.mul_capped(self, cap)?;
        }
        Ok(r)
    }

    /// Minimal valuation of `self - o` on the common window, or `None` if equal
    /// at precision.
    pub fn defect(&self, o: &Self) -> Result<Option<i64>> {
        let d = self.sub(o)?;
        let mask = d.prec_mask();
        let mut best: Option<i64> = None;
        for &x in &d.c {
            let r = x % mask;
            if r != 0 {
                let v = d.md.val(r) as i64 - d.e as i64;
                best = Some(best.map_or(v, |b: i64| b.min(v)));
            }
        }
        Ok(best)
    }

    pub fn eq_at_precision(&self, o: &Self) -> bool {
        matches!(self.defect(o), Ok(None))
    }

    /// Exponent/PAdic pairs of the nonzero coefficients.
    pub fn terms(&self) -> Vec<(i64, PAdic)> {
        (self.lo..=self.hi)
            .filter(|&k| !self.get(k).is_multiple_of(self.prec_mask()))
            .map(|k| (k, self.coeff(k)))
            .collect()
    }

    /// Reduce to a coarser precision of the same prime.
    pub fn reduce(&self, md: &Modulus) -> Result<Self> {
        if md.p != self.md.p || md.n > self.md.n {
            return Err(Error::Mismatch("reduction must keep p and lower N".into()));
        }
        if self.e >= md.n {
            return Err(Error::Precision("denominator exceeds the coarser precision".into()));
        }
        let c = self.c.iter().map(|&x| x % md.m).collect();
        Ok(TruncatedLaurent { md: *md, lo: self.lo, hi: self.hi, e: self.e, c, tail: self.tail }.trimmed())
    }
}

/// Map of `Z_p^x` elements used for `gamma_c`: `c = omega(a) (1+p)^s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaElement {
    pub p: u64,
    pub a: u64,
    pub s: i64,
}

impl GammaElement {
    pub fn new(p: u64, a: u64, s: i64) -> Result<Self> {
        if a.is_multiple_of(p) {
            return Err(Error::Precondition("Teichmuller part must be a unit".into()));
        }
        Ok(GammaElement { p, a: a % p, s })
    }

    /// The generator `gamma_0` with `chi(gamma_0) = 1 + p`.
    pub fn generator(p: u64) -> Self {
        GammaElement { p, a: 1, s: 1 }
    }

    pub fn identity(p: u64) -> Self {
        GammaElement { p, a: 1, s: 0 }
    }

    pub fn compose(&self, o: &Self) -> Self {
        GammaElement { p: self.p, a: (self.a * o.a) % self.p, s: self.s + o.s }
    }

    /// `c mod p^n`.
    pub fn value(&self, md: &Modulus) -> u64 {
        let w = md.teich(self.a);
        let base = md.add(1, md.p % md.m);
        let q = if self.s >= 0 {
            md.pow(base, self.s as u64)
        } else {
            md.inv(md.pow(base, self.s.unsigned_abs())).expect("unit")
        };
        md.mul(w, q)
    }
}

/// `(1 + pi)^c - 1` modulo `pi^(cap + 1)`, exact mod `p^N`.
pub fn gamma_of_pi(md: &Modulus, c: &GammaElement, cap: i64) -> Result<TruncatedLaurent> {
    // (1+pi)^(p^k) = 1 mod p^(k - log_p(cap)) below degree cap, so a representative
    // of c modulo p^(N + log_p(cap) + 1) determines the truncation.
    let mut extra = 1u32;
    let mut q = 1i64;
    while q <= cap.max(1) {
        q *= md.p as i64;
        extra += 1;
    }
    let wide = md
        .with_prec(md.n + extra)
        .map_err(|_| Error::Precision(format!("gamma needs {}+{} digits, beyond the word size", md.n, extra)))?;
    let mut k = c.value(&wide);
    let mut acc: Vec<u64> = vec![1];
    let mut base: Vec<u64> = vec![1, 1];
    while k > 0 {
        if k & 1 == 1 {
            acc = conv(md, 0, &acc, 0, &base, 0, cap).1;
        }
        base = conv(md, 0, &base, 0, &base, 0, cap).1;
        k >>= 1;
    }
    acc.resize((cap + 1) as usize, 0);
    acc[0] = md.sub(acc[0], 1);
    Ok(TruncatedLaurent::from_raw(md, 0, acc, 0, true, cap))
}

/// Around-0 inverse of a power series with unit constant term, mod `pi^(cap+1)`.
pub(crate) fn unit_inverse(md: &Modulus, u: &[u64], cap: i64) -> Result<Vec<u64>> {
    let u0 = *u.first().unwrap_or(&0);
    let inv0 = md.inv(u0).ok_or_else(|| Error::Precondition("constant term is not a unit".into()))?;
    let n = (cap + 1) as usize;
    let mut g = vec![0u64; n];
    g[0] = inv0;
    for k in 1..n {
        let mut s: u128 = 0;
        for j in 1..=k.min(u.len() - 1) {
            s += u[j] as u128 * g[k - j] as u128 % md.m as u128;
        }
        let s = (s % md.m as u128) as u64;
        g[k] = md.mul(md.neg(s), inv0);
    }
    Ok(g)
}

/// `phi(pi) = (1 + pi)^p - 1`.
pub fn phi_of_pi(md: &Modulus) -> TruncatedLaurent {
    let p = md.p as usize;
    let mut c = vec![0i64; p + 1];
    let mut b: i64 = 1;
    for (j, slot) in c.iter_mut().enumerate().skip(1) {
        b = b * (p as i64 - j as i64 + 1) / j as i64;
        *slot = b;
    }
    TruncatedLaurent::from_coeffs(md, 0, &c)
}

/// `phi(pi)^(-1)` expanded at the boundary; an exact Laurent polynomial
/// with exponents in `[-p - (p-1)(N-1), -p]`.
pub fn phi_of_pi_inverse(md: &Modulus) -> TruncatedLaurent {
    let p = md.p as i64;
    let floor = -(p - 1) * (md.n as i64 - 1);
    // p w = sum_{j=1}^{p-1} C(p, j) pi^(j - p)
    let phi = phi_of_pi(md);
    let pw_lo = 1 - p;
    let pw: Vec<u64> = (1..p).map(|j| phi.get(j)).collect();
    let neg_pw: Vec<u64> = pw.iter().map(|&x| md.neg(x)).collect();
    let mut total = vec![0u64; (-floor + 1) as usize];
    let mut term_lo = 0i64;
    let mut term: Vec<u64> = vec![1];
    for _ in 0..md.n {
        for (i, &x) in term.iter().enumerate() {
            let k = term_lo + i as i64;
            if k >= floor {
                let idx = (k - floor) as usize;
                total[idx] = md.add(total[idx], x);
            }
        }
        let (l, t) = conv(md, term_lo, &term, pw_lo, &neg_pw, floor, 0);
        term_lo = l;
        term = t;
        if term.iter().all(|&x| x == 0) {
            break;
        }
    }
    TruncatedLaurent::from_raw(md, floor - p, total, 0, false, -p)
}

/// Images of monomials `pi^k` under a ring endomorphism `pi -> s`, cached for
/// `k` in a fixed range. All images are truncated at `cap`.
#[derive(Clone, Debug)]
pub struct MonomialImages {
    pub md: Modulus,
    pub kmin: i64,
    pub kmax: i64,
    pub cap: i64,
    images: Vec<TruncatedLaurent>,
}

impl MonomialImages {
    pub fn image(&self, k: i64) -> &TruncatedLaurent {
        assert!(k >= self.kmin && k <= self.kmax, "monomial {k} outside cached range");
        &self.images[(k - self.kmin) as usize]
    }

    /// Apply to a series whose exponents lie in the cached range.
    pub fn apply(&self, f: &TruncatedLaurent) -> Result<TruncatedLaurent> {
        if f.c.is_empty() {
            return Ok(if f.tail { TruncatedLaurent::zero_to(&f.md, f.hi.min(self.cap)) } else { f.clone() });
        }
        if f.lo < self.kmin || (f.hi > self.kmax && f.hi >= f.lo) {
            return Err(Error::Window(format!(
                "series exponents [{}, {}] outside operator range [{}, {}]",
                f.lo, f.hi, self.kmin, self.kmax
            )));
        }
        let mut hi = self.cap;
        let mut tail = self.cap < i64::MAX;
        if f.tail {
            hi = hi.min(f.hi);
            tail = true;
        }
        let lo = self.min_lo(f);
        if !tail {
            hi = self.max_hi(f);
        }
        if hi < lo {
            return Ok(TruncatedLaurent::zero_to(&self.md, hi));
        }
        let mut acc = vec![0u128; (hi - lo + 1).max(0) as usize];
        let m = self.md.m as u128;
        for (i, &a) in f.c.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let img = self.image(f.lo + i as i64);
            for (j, &b) in img.c.iter().enumerate() {
                let k = img.lo + j as i64;
                if k > hi || b == 0 {
                    continue;
                }
                let idx = (k - lo) as usize;
                acc[idx] = (acc[idx] + a as u128 * b as u128) % m;
            }
        }
        let c = acc.into_iter().map(|x| x as u64).collect();
        Ok(TruncatedLaurent::from_raw(&self.md, lo, c, f.e, tail, hi))
    }

    fn min_lo(&self, f: &TruncatedLaurent) -> i64 {
        (f.lo..=f.hi).filter(|&k| f.get(k) != 0).map(|k| self.image(k).lo).min().unwrap_or(0)
    }

    fn max_hi(&self, f: &TruncatedLaurent) -> i64 {
        (f.lo..=f.hi).filter(|&k| f.get(k) != 0).map(|k| self.image(k).hi).max().unwrap_or(0)
    }
}

/// `phi` on monomials `pi^k`, `kmin <= k <= kmax`, truncated at `cap`
/// (`i64::MAX` keeps images exact).
pub fn phi_images(md: &Modulus, kmin: i64, kmax: i64, cap: i64) -> Result<MonomialImages> {
    let p = md.p as i64;
    if kmax.saturating_mul(p) > MAX_EXPONENT && cap == i64::MAX {
        return Err(Error::Window(format!("phi of pi^{kmax} exceeds the exponent cap")));
    }
    if kmin < -MAX_EXPONENT / p {
        return Err(Error::Window(format!("phi of pi^{kmin} exceeds the exponent cap")));
    }
    let mut images = Vec::with_capacity((kmax - kmin + 1).max(0) as usize);
    let phi = phi_of_pi(md);
    let phinv = phi_of_pi_inverse(md);
    let mut neg: Vec<TruncatedLaurent> = vec![TruncatedLaurent::constant(md, 1)];
    for _ in 0..(-kmin).max(0) {
        let next = neg.last().unwrap().mul_capped(&phinv, cap)?;
        neg.push(next);
    }
    let mut pos: Vec<TruncatedLaurent> = vec![TruncatedLaurent::constant(md, 1)];
    for _ in 0..kmax.max(0) {
        let next = pos.last().unwrap().mul_capped(&phi, cap)?;
        pos.push(next);
    }
    for k in kmin..=kmax {
        let img = if k >= 0 { pos[k as usize].clone() } else { neg[(-k) as usize].clone() };
        images.push(img.truncate(cap));
    }
    Ok(MonomialImages { md: *md, kmin, kmax, cap, images })
}

/// `gamma_c` on monomials `pi^k`, `kmin <= k <= kmax`, truncated at `cap`.
pub fn gamma_images(md: &Modulus, c: &GammaElement, kmin: i64, kmax: i64, cap: i64) -> Result<MonomialImages> {
    let depth = (-kmin).max(0);
    let s = gamma_of_pi(md, c, cap + depth + 1)?;
    // s = pi * u with u(0) = c, a unit
    let u: Vec<u64> = (1..=cap + depth + 1).map(|k| s.get(k)).collect();
    let v = unit_inverse(md, &u, cap + depth)?;
    let vser = TruncatedLaurent::from_raw(md, 0, v, 0, true, cap + depth);
    let mut images = Vec::with_capacity((kmax - kmin + 1).max(0) as usize);
    let mut neg: Vec<TruncatedLaurent> = vec![TruncatedLaurent::constant(md, 1)];
    for _ in 0..depth {
        let next = neg.last().unwrap().mul_capped(&vser, cap + depth)?;
        neg.push(next);
    }
    let mut pos: Vec<TruncatedLaurent> = vec![TruncatedLaurent::constant(md, 1)];
    for _ in 0..kmax.max(0) {
        let next = pos.last().unwrap().mul_capped(&s, cap)?;
        pos.push(next);
    }
    for k in kmin..=kmax {
        let img = if k >= 0 {
            pos[k as usize].truncate(cap)
        } else {
            let j = (-k) as usize;
            neg[j].truncate(cap + j as i64).shift(k)
        };
        let mut img = img;
        img.tail = true;
        images.push(img);
    }
    Ok(MonomialImages { md: *md, kmin, kmax, cap, images })
}

/// Substitute `pi -> (1+pi)^p - 1`.
pub fn frobenius_series(f: &TruncatedLaurent) -> Result<TruncatedLaurent> {
    if f.c.is_empty() {
        return Ok(f.clone());
    }
    let cap = if f.tail { f.hi } else { i64::MAX };
    phi_images(&f.md, f.lo.min(0), f.hi.max(0), cap)?.apply(f)
}

/// Substitute `pi -> (1+pi)^c - 1`, truncated at `cap` (and at `f.hi` for tails).
pub fn gamma_series(f: &TruncatedLaurent, c: &GammaElement, cap: i64) -> Result<TruncatedLaurent> {
    let cap = if f.tail { cap.min(f.hi) } else { cap };
    if f.c.is_empty() {
        return Ok(TruncatedLaurent::zero_to(&f.md, cap));
    }
    let ft = if f.tail || f.hi > cap { f.truncate(cap) } else { f.clone() };
    gamma_images(&f.md, c, ft.lo.min(0), ft.hi.max(0), cap)?.apply(&ft)
}

/// `t = log(1 + pi)` on exponents `[1, hi]`.
pub fn log_one_plus_pi(md: &Modulus, hi: i64) -> Result<TruncatedLaurent> {
    if hi < 1 {
        return Err(Error::Precondition("window must contain exponent 1".into()));
    }
    let e = (1..=hi).map(|n| vp_int(md.p, n as u64)).max().unwrap_or(0);
    if e >= md.n {
        return Err(Error::Precision(format!("log needs denominator p^{e} at N = {}", md.n)));
    }
    let mut c = Vec::with_capacity(hi as usize);
    for n in 1..=hi {
        let v = vp_int(md.p, n as u64);
        let unit = n as u64 / md.p.pow(v);
        let inv = md.inv(unit % md.m).expect("unit");
        let mut x = md.mul(inv, md.ppow(e - v));
        if n % 2 == 0 {
            x = md.neg(x);
        }
        c.push(x);
    }
    Ok(TruncatedLaurent::from_raw(md, 1, c, e, true, hi))
}

/// Binomial transform between the `pi`-basis and the `u = 1 + pi` basis.
fn pi_to_u(md: &Modulus, g: &[u64]) -> Vec<u64> {
    // g(pi) = sum g_j (u - 1)^j
    let d = g.len();
    let mut out = vec![0u64; d];
    let mut row = vec![1u64]; // coefficients of (u-1)^j
    for (j, &gj) in g.iter().enumerate() {
        if j > 0 {
            let mut next = vec![0u64; j + 1];
            for (i, &x) in row.iter().enumerate() {
                next[i + 1] = md.add(next[i + 1], x);
                next[i] = md.sub(next[i], x);
            }
            row = next;
        }
        if gj != 0 {
            for (i, &x) in row.iter().enumerate() {
                out[i] = md.add(out[i], md.mul(gj, x));
            }
        }
    }
    out
}

fn u_to_pi(md: &Modulus, h: &[u64]) -> Vec<u64> {
    let d = h.len();
    let mut out = vec![0u64; d];
    let mut row = vec![1u64]; // coefficients of (1+pi)^i
    for (i, &hi) in h.iter().enumerate() {
        if i > 0 {
            let mut next = vec![0u64; i + 1];
            for (k, &x) in row.iter().enumerate() {
                next[k] = md.add(next[k], x);
                next[k + 1] = md.add(next[k + 1], x);
            }
            row = next;
        }
        if hi != 0 {
            for (k, &x) in row.iter().enumerate() {
                out[k] = md.add(out[k], md.mul(hi, x));
            }
        }
    }
    out
}

/// `psi` of an exact Laurent polynomial.
///
/// Poles are cleared by `phi(pi)^m`; the polynomial is rewritten in
/// `u = 1 + pi`, the exponents divisible by `p` are kept and divided by `p`,
/// and the result is multiplied by `pi^(-m)`.
pub fn psi_series(f: &TruncatedLaurent) -> Result<TruncatedLaurent> {
    if f.tail {
        return Err(Error::Precondition("psi needs an exact Laurent polynomial".into()));
    }
    if f.c.is_empty() {
        return Ok(f.clone());
    }
    let md = f.md;
    let m = (-f.lo).max(0);
    if f.hi > MAX_EXPONENT || m > MAX_EXPONENT / md.p as i64 {
        return Err(Error::Window("psi input exceeds the exponent cap".into()));
    }
    // (phi(pi)/pi)^m * (pi^m f)
    let q = phi_of_pi(&md).shift(-1);
    let mut g = f.shift(m);
    for _ in 0..m {
        g = g.mul(&q)?;
    }
    let mut coeffs = vec![0u64; (g.hi + 1).max(0) as usize];
    for k in g.lo.max(0)..=g.hi {
        coeffs[k as usize] = g.get(k);
    }
    let u = pi_to_u(&md, &coeffs);
    let p = md.p as usize;
    let h: Vec<u64> = u.iter().step_by(p).copied().collect();
    let back = u_to_pi(&md, &h);
    let r = TruncatedLaurent::from_raw(&md, 0, back.clone(), g.e, false, back.len() as i64 - 1);
    Ok(r.shift(-m))
}

/// `Tr(f) = p * phi(psi(f))`.
pub fn trace_phi(f: &TruncatedLaurent) -> Result<TruncatedLaurent> {
    Ok(frobenius_series(&psi_series(f)?)?.scale_int(f.md.p))
}

/// Coefficient of `pi^(-1)`.
pub fn residue(f: &TruncatedLaurent) -> Result<PAdic> {
    if f.tail && f.hi < -1 {
        return Err(Error::Window("exponent -1 is outside the window".into()));
    }
    Ok(f.coeff(-1))
}

/// `res(f g (1+pi)^(-1))`.
pub fn iwasawa_pairing(f: &TruncatedLaurent, g: &TruncatedLaurent) -> Result<PAdic> {
    let fg = f.mul(g)?;
    if fg.c.is_empty() && !fg.tail {
        return Ok(PAdic::zero(&f.md));
    }
    let need = -1 - fg.lo;
    if fg.tail && fg.hi < -1 {
        return Err(Error::Window("product window does not reach exponent -1".into()));
    }
    if need < 0 {
        return Ok(PAdic::zero(&f.md));
    }
    let geo: Vec<i64> = (0..=need).map(|n| if n % 2 == 0 { 1 } else { -1 }).collect();
    let inv = TruncatedLaurent::from_coeffs(&f.md, 0, &geo).truncate(need);
    let mut inv = inv;
    inv.tail = true;
    inv.hi = need;
    inv.c.resize((need + 1) as usize, 0);
    let prod = fg.mul_capped(&inv, -1)?;
    Ok(prod.coeff(-1))
}

/// Inverse of `pi^m u` expanded around 0, where `u(0)` may carry a power of `p`
/// (absorbed into the denominator). The result has the same window length as
/// the input.
pub fn series_invert(f: &TruncatedLaurent) -> Result<TruncatedLaurent> {
    let m = f.order().ok_or_else(|| Error::Precondition("no leading term resolvable at precision".into()))?;
    let md = f.md;
    let len = f.hi - m;
    let lead = f.coeff(m);
    let lead_inv = lead.inv()?;
    // g_k = -(1/u_0) sum_{j>=1} u_j g_{k-j}
    let mut g: Vec<PAdic> = vec![lead_inv];
    for k in 1..=len {
        let mut s = PAdic::zero(&md);
        for j in 1..=k {
            let uj = f.coeff(m + j);
            if uj.is_zero() {
                continue;
            }
            s = s.add(&uj.mul(&g[(k - j) as usize])?)?;
        }
        g.push(s.mul(&lead_inv)?.neg());
    }
    let e = g.iter().map(|x| x.denom_exp).max().unwrap_or(0);
    let c: Vec<u64> = g.iter().map(|x| md.mul(x.mantissa, md.ppow(e - x.denom_exp))).collect();
    Ok(TruncatedLaurent::from_raw(&md, -m, c, e, true, -m + len))
}

/// JSON form: `{p, N, lo, hi, coeffs: [[exp, mantissa, denom_exp], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaurentJson {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    pub lo: i64,
    pub hi: i64,
    pub coeffs: Vec<(i64, u64, u32)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tail: bool,
}

impl From<&TruncatedLaurent> for LaurentJson {
    fn from(f: &TruncatedLaurent) -> Self {
        let coeffs = f.terms().into_iter().map(|(k, x)| (k, x.mantissa, x.denom_exp)).collect();
        LaurentJson { p: f.md.p, n: f.md.n, lo: f.lo, hi: f.hi, coeffs, tail: f.tail }
    }
}

impl TryFrom<&LaurentJson> for TruncatedLaurent {
    type Error = Error;
    fn try_from(j: &LaurentJson) -> Result<Self> {
        let md = Modulus::new(j.p, j.n)?;
        let e = j.coeffs.iter().map(|t| t.2).max().unwrap_or(0);
        if e >= md.n {
            return Err(Error::Precision("denominator exponent >= N".into()));
        }
        if j.hi < j.lo - 1 {
            return Err(Error::Window("hi < lo - 1".into()));
        }
        let mut c = vec![0u64; (j.hi - j.lo + 1).max(0) as usize];
        for &(k, mant, de) in &j.coeffs {
            if k < j.lo || k > j.hi {
                return Err(Error::Window(format!("exponent {k} outside [{}, {}]", j.lo, j.hi)));
            }
            c[(k - j.lo) as usize] = md.mul(mant % md.m, md.ppow(e - de));
        }
        Ok(TruncatedLaurent::from_raw(&md, j.lo, c, e, j.tail, j.hi))
    }
}

impl Serialize for TruncatedLaurent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LaurentJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncatedLaurent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = LaurentJson::deserialize(d)?;
        TruncatedLaurent::try_from(&j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn md(p: u64, n: u32) -> Modulus {
        Modulus::new(p, n).unwrap()
    }

    #[test]
    fn products() {
        let m = md(3, 8);
        let pi = TruncatedLaurent::monomial(&m, 1);
        assert_eq!(pi.mul(&pi).unwrap(), TruncatedLaurent::monomial(&m, 2));
        let geo = TruncatedLaurent::from_coeffs(&m, 0, &[1, -1, 1, -1, 1, -1]).truncate(5);
        let one = TruncatedLaurent::one_plus_pi(&m).mul(&geo).unwrap();
        assert!(one.eq_at_precision(&TruncatedLaurent::constant(&m, 1).truncate(5)));
        assert!(pi.mul(&TruncatedLaurent::zero(&m)).unwrap().is_zero());
    }

    #[test]
    fn phi_of_pi_p3() {
        let m = md(3, 8);
        let f = frobenius_series(&TruncatedLaurent::monomial(&m, 1)).unwrap();
        assert_eq!(f, TruncatedLaurent::from_coeffs(&m, 1, &[3, 3, 1]));
    }

    #[test]
    fn boundary_inverse_is_inverse() {
        for p in [3, 5] {
            let m = md(p, 10);
            let inv = phi_of_pi_inverse(&m);
            let prod = inv.mul(&phi_of_pi(&m)).unwrap();
            assert_eq!(prod, TruncatedLaurent::constant(&m, 1));
        }
    }

    #[test]
    fn psi_special_values() {
        let m = md(3, 10);
        let pi = TruncatedLaurent::monomial(&m, 1);
        assert_eq!(psi_series(&pi).unwrap(), TruncatedLaurent::constant(&m, -1));
        let pinv = TruncatedLaurent::monomial(&m, -1);
        assert_eq!(psi_series(&pinv).unwrap(), pinv);
        let u = TruncatedLaurent::one_plus_pi(&m);
        assert!(psi_series(&u).unwrap().is_zero());
        assert!(psi_series(&u.mul(&u).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn psi_left_inverse() {
        let m = md(5, 8);
        let f = TruncatedLaurent::from_coeffs(&m, -3, &[2, 0, 7, 1, -4, 9]);
        assert_eq!(psi_series(&frobenius_series(&f).unwrap()).unwrap(), f);
    }

    #[test]
    fn log_eigen() {
        let m = md(3, 12);
        let t = log_one_plus_pi(&m, 30).unwrap();
        let pt = t.scale_int(3);
        assert!(frobenius_series(&t).unwrap().eq_at_precision(&pt));
        let c = GammaElement::new(3, 2, 5).unwrap();
        let ct = t.scale_int(c.value(&m));
        assert!(gamma_series(&t, &c, 30).unwrap().eq_at_precision(&ct));
    }

    #[test]
    fn invert_examples() {
        let m = md(3, 12);
        let g = series_invert(&TruncatedLaurent::one_plus_pi(&m).truncate(6)).unwrap();
        assert_eq!(g.get(3), m.from_i64(-1));
        let phi = phi_of_pi(&m);
        let inv = series_invert(&phi).unwrap();
        assert_eq!(inv.lo, -1);
        assert!(inv.coeff(-1).eq_at_precision(&crate::padic::padic_from_rational(1, 3, 3, 12).unwrap()));
        assert!(inv.coeff(0).eq_at_precision(&crate::padic::padic_from_rational(-1, 3, 3, 12).unwrap()));
    }
}
