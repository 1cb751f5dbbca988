//! `Z/p^n [x] / Phi_{p^M}(x)`: the ring of integers of `Q_p(zeta_{p^M})`
//! modulo `p^n`, and the map `theta` from Witt vectors over the tilt.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::padic::Modulus;
use crate::perf::{Exp, PerfLaurent};
use crate::witt::WittVector;

/// Largest ring degree `(p-1) p^(M-1)` we build.
pub const MAX_CYCLO_DEGREE: usize = 1 << 19;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycloLevel {
    pub md: Modulus,
    /// `M`: the generator `x` is a primitive `p^M`-th root of unity.
    pub level: u32,
    /// Coefficients of `1, x, ..., x^(deg-1)`.
    pub coeffs: Vec<u64>,
}

fn degree(p: u64, level: u32) -> Result<usize> {
    if level == 0 {
        return Err(Error::Precondition("cyclotomic level must be at least 1".into()));
    }
    let mut q: usize = 1;
    for _ in 1..level {
        q = q
            .checked_mul(p as usize)
            .filter(|&v| v <= MAX_CYCLO_DEGREE)
            .ok_or_else(|| Error::Window(format!("level {level} exceeds the cyclotomic reserve")))?;
    }
    let d = q * (p as usize - 1);
    if d > MAX_CYCLO_DEGREE {
        return Err(Error::Window(format!("level {level} exceeds the cyclotomic reserve")));
    }
    Ok(d)
}

impl CycloLevel {
    pub fn zero(md: &Modulus, level: u32) -> Result<Self> {
        Ok(CycloLevel { md: *md, level, coeffs: vec![0; degree(md.p, level)?] })
    }

    pub fn constant(md: &Modulus, level: u32, a: i64) -> Result<Self> {
        let mut z = Self::zero(md, level)?;
        z.coeffs[0] = md.from_i64(a);
        Ok(z)
    }

    pub fn one(md: &Modulus, level: u32) -> Result<Self> {
        Self::constant(md, level, 1)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// `p^(M-1)`.
    fn step(&self) -> usize {
        self.degree() / (self.md.p as usize - 1)
    }

    /// Add `c x^e` for any `e >= 0`, using `x^(p^M) = 1` and `Phi(x) = 0`.
    fn add_monomial(&mut self, e: u64, c: u64) {
        let q = self.step() as u64;
        let e = e % (q * self.md.p);
        let d = self.degree() as u64;
        if e < d {
            let i = e as usize;
            self.coeffs[i] = self.md.add(self.coeffs[i], c);
        } else {
            let r = e - d;
            for i in 0..self.md.p - 1 {
                let k = (i * q + r) as usize;
                self.coeffs[k] = self.md.sub(self.coeffs[k], c);
            }
        }
    }

    /// `x^e`.
    pub fn gen_pow(md: &Modulus, level: u32, e: u64) -> Result<Self> {
        let mut z = Self::zero(md, level)?;
        z.add_monomial(e, 1);
        Ok(z)
    }

    /// `zeta_{p^k} = x^(p^(M-k))` for `k <= M`.
    pub fn zeta(md: &Modulus, level: u32, k: u32) -> Result<Self> {
        if k > level {
            return Err(Error::Precondition(format!("no p^{k}-th root of unity at level {level}")));
        }
        Self::gen_pow(md, level, md.p.pow(level - k))
    }

    fn same(&self, o: &Self) -> Result<()> {
        if self.md != o.md || self.level != o.level {
            return Err(Error::Mismatch("cyclotomic elements of different rings".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.same(o)?;
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| self.md.add(*a, *b)).collect();
        Ok(CycloLevel { md: self.md, level: self.level, coeffs })
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|a| self.md.neg(*a)).collect();
        CycloLevel { md: self.md, level: self.level, coeffs }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn scale(&self, a: u64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| self.md.mul(*c, a % self.md.m)).collect();
        CycloLevel { md: self.md, level: self.level, coeffs }
    }

    /// Schoolbook product; zero coefficients of either side are skipped.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.same(o)?;
        let d = self.degree();
        let m = self.md.m as u128;
        let (a, b) = if self.nnz() <= o.nnz() { (self, o) } else { (o, self) };
        let bnz: Vec<(usize, u128)> =
            b.coeffs.iter().enumerate().filter(|(_, c)| **c != 0).map(|(j, c)| (j, *c as u128)).collect();
        let mut acc = vec![0u128; 2 * d];
        for (i, ca) in a.coeffs.iter().enumerate() {
            if *ca == 0 {
                continue;
            }
            let ca = *ca as u128;
            for &(j, cb) in &bnz {
                acc[i + j] = (acc[i + j] + ca * cb) % m;
            }
        }
        let mut r = Self::zero(&self.md, self.level)?;
        r.coeffs.copy_from_slice(&acc[..d].iter().map(|v| *v as u64).collect::<Vec<_>>());
        for (e, v) in acc.iter().enumerate().skip(d) {
            if *v != 0 {
                r.add_monomial(e as u64, *v as u64);
            }
        }
        Ok(r)
    }

    fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != 0).count()
    }

    pub fn pow(&self, mut e: u64) -> Result<Self> {
        let mut acc = Self::one(&self.md, self.level)?;
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0)
    }

    /// Largest `k <= n` with the element in `p^k`.
    pub fn p_valuation(&self) -> u32 {
        self.coeffs.iter().map(|c| self.md.val(*c)).min().unwrap_or(self.md.n)
    }

    /// The same element at a deeper level, through `x -> x^(p^(M'-M))`.
    pub fn lift_to(&self, level: u32) -> Result<Self> {
        if level < self.level {
            return Err(Error::Precondition("can only move up the tower".into()));
        }
        let mut r = Self::zero(&self.md, level)?;
        let k = self.md.p.pow(level - self.level) as usize;
        for (i, c) in self.coeffs.iter().enumerate() {
            r.coeffs[i * k] = *c;
        }
        Ok(r)
    }

    /// Reduce coefficients to a coarser precision.
    pub fn reduce(&self, md: &Modulus) -> Result<Self> {
        if md.p != self.md.p || md.n > self.md.n {
            return Err(Error::Precondition("can only reduce to a coarser modulus".into()));
        }
        let coeffs = self.coeffs.iter().map(|c| c % md.m).collect();
        Ok(CycloLevel { md: *md, level: self.level, coeffs })
    }

    /// Valuation normalised by `v(p) = 1`, read off the expansion in the
    /// uniformiser `x - 1`. `None` when the element is zero at precision.
    pub fn valuation(&self) -> Option<Exp> {
        let d = self.degree();
        // Taylor shift x = y + 1
        let mut g = self.coeffs.clone();
        for i in 0..d {
            for j in (i..d - 1).rev() {
                g[j] = self.md.add(g[j], g[j + 1]);
            }
        }
        g.iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| Exp::from_integer(self.md.val(*c) as i64) + Exp::new(i as i64, d as i64))
            .min()
    }

    pub fn to_json(&self) -> CycloJson {
        CycloJson { p: self.md.p, prec: self.md.n, level: self.level, coeffs: self.coeffs.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycloJson {
    pub p: u64,
    pub prec: u32,
    pub level: u32,
    pub coeffs: Vec<u64>,
}

/// `binom(a, k)` for `k = 0..=a` modulo `p^n`, tracking the `p`-part.
fn binomial_row(md: &Modulus, a: u64) -> Vec<u64> {
    let p = md.p;
    let mut row = Vec::with_capacity(a as usize + 1);
    let mut unit = 1u64;
    let mut val = 0u32;
    row.push(1 % md.m);
    for k in 1..=a {
        let split = |mut x: u64| {
            let mut v = 0;
            while x.is_multiple_of(p) {
                x /= p;
                v += 1;
            }
            (x % md.m, v)
        };
        let (nu, nv) = split(a - k + 1);
        let (du, dv) = split(k);
        unit = md.mul(md.mul(unit, nu), md.inv(du).expect("unit"));
        val = val + nv - dv;
        row.push(md.mul(unit, md.ppow(val)));
    }
    row
}

/// Untilt lift of a perfect element with nonnegative exponents:
/// `tbar^(a/p^j) -> (zeta_{p^(m+j)} - 1)^a` at ring level `level`.
fn lift(y: &PerfLaurent, md: &Modulus, m: u32, level: u32) -> Result<CycloLevel> {
    let mut out = CycloLevel::zero(md, level)?;
    for (q, c) in &y.terms {
        let j = crate::padic::vp_int(md.p, *q.denom() as u64);
        let a = *q.numer();
        if a < 0 {
            return Err(Error::Precondition("theta needs integral perfect elements".into()));
        }
        if m + j > level {
            return Err(Error::Window("insufficient level reserve for the untilt".into()));
        }
        let step = md.p.pow(level - m - j);
        let c = *c % md.m;
        let row = binomial_row(md, a as u64);
        let a = a as u64;
        for (k, b) in row.iter().enumerate() {
            if *b == 0 {
                continue;
            }
            let t = md.mul(*b, c);
            let t = if (a - k as u64) % 2 == 1 { md.neg(t) } else { t };
            out.add_monomial(k as u64 * step, t);
        }
    }
    Ok(out)
}

/// A value of `theta` with the precision it is known to.
#[derive(Clone, Debug)]
pub struct Theta {
    pub value: CycloLevel,
    /// Known modulo `p^precision`.
    pub precision: u32,
    /// Base level `m`: `theta([epsilon]) = zeta_{p^m}`.
    pub m: u32,
    /// Root depth used by the untilt.
    pub guard: u32,
}

impl Theta {
    /// `self - o` in a common ring at the coarser precision.
    pub fn residual(&self, o: &Theta) -> Result<CycloLevel> {
        let prec = self.precision.min(o.precision);
        let level = self.value.level.max(o.value.level);
        let md = self.value.md.with_prec(prec)?;
        let a = self.value.lift_to(level)?.reduce(&md)?;
        let b = o.value.lift_to(level)?.reduce(&md)?;
        a.sub(&b)
    }
}

fn check_theta_input(x: &PerfLaurent) -> Result<()> {
    if !x.is_exact() {
        return Err(Error::Precondition("theta needs exact components".into()));
    }
    if x.order().is_some_and(|q| q < Exp::zero()) {
        return Err(Error::Precondition("theta needs integral perfect elements".into()));
    }
    Ok(())
}

/// `theta(sum p^n [x_n^(p^-n)]) = sum p^n (x_n^(p^-n))^sharp` on the level-`m`
/// untilt, with `y^sharp = lift(y^(p^-s))^(p^s)`. The result is known modulo
/// `p^min(len, s+1)`; `guard` is `s` and defaults to `len - 1`.
pub fn theta_map(w: &WittVector, m: u32, guard: Option<u32>) -> Result<Theta> {
    if w.denom_exp != 0 {
        return Err(Error::Precondition("theta on W[1/p] is not modelled".into()));
    }
    let len = w.length() as u32;
    let s = guard.unwrap_or(len.saturating_sub(1));
    let prec = len.min(s + 1);
    for x in &w.components {
        check_theta_input(x)?;
    }
    let jmax = w.components.iter().take(prec as usize).map(|x| x.level()).max().unwrap_or(0);
    let level = (m + s + jmax).max(1);
    let md = Modulus::new(w.p, prec)?;
    let mut acc = CycloLevel::zero(&md, level)?;
    for (n, x) in w.components.iter().take(prec as usize).enumerate() {
        if x.is_zero() {
            continue;
        }
        let root = x.frobenius_pow(-(s as i64))?;
        let mut y = lift(&root, &md, m, level)?;
        for _ in 0..(s - n as u32) {
            y = y.pow(w.p)?;
        }
        acc = acc.add(&y.scale(md.ppow(n as u32)))?;
    }
    Ok(Theta { value: acc, precision: prec, m, guard: s })
}

/// `theta([y])` to any precision `prec`, with guard `prec - 1`.
pub fn theta_teichmuller(y: &PerfLaurent, m: u32, prec: u32) -> Result<Theta> {
    check_theta_input(y)?;
    let s = prec - 1;
    let level = (m + s + y.level()).max(1);
    let md = Modulus::new(y.p, prec)?;
    let mut v = lift(&y.frobenius_pow(-(s as i64))?, &md, m, level)?;
    for _ in 0..s {
        v = v.pow(y.p)?;
    }
    Ok(Theta { value: v, precision: prec, m, guard: s })
}

/// `epsilon^e = (1 + tbar)^e` for `e = a / p^k`, via base-`p` digits of `a`.
pub fn epsilon_pow(p: u64, a: u64, k: u32) -> Result<PerfLaurent> {
    let eps = PerfLaurent::from_terms(p, [(Exp::zero(), 1), (Exp::from_integer(1), 1)], None)?;
    eps.pow(a)?.frobenius_pow(-(k as i64))
}

/// Kernel witness at level `m`: the `p` Teichmuller terms `[epsilon^(i p^(m-1))]`,
/// `i < p`, whose untilts are the `p`-th roots of unity. For `m = 0` the
/// exponents are `i / p`.
pub fn xi_terms(p: u64, m: u32) -> Result<Vec<PerfLaurent>> {
    (0..p).map(|i| if m == 0 { epsilon_pow(p, i, 1) } else { epsilon_pow(p, i * p.pow(m - 1), 0) }).collect()
}

/// The kernel witness as a Witt vector of length `len`.
pub fn xi_witness(p: u64, m: u32, len: usize) -> Result<WittVector> {
    let mut acc = WittVector::zero(p, len);
    for y in xi_terms(p, m)? {
        acc = acc.add(&WittVector::teichmuller(&y, len))?;
    }
    Ok(acc)
}
