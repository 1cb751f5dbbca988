//! `p`-typical Witt vectors of length at most 4 over perfect Laurent elements.
//!
//! Components are Witt coordinates: `(x_0, x_1, ...)` stands for
//! `sum p^n [x_n^(p^-n)]`. Sum and product use the universal polynomials,
//! built once per `(p, length)` by the ghost recursion over `Z/p^length`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{GammaElement, TruncatedLaurent};
use crate::padic::Modulus;
use crate::perf::{sample_perf, tilt_valuation, Exp, PerfJson, PerfLaurent, SampleShape};

pub const MAX_WITT_LENGTH: usize = 4;

type Mono = Vec<u32>;

/// Integer polynomial in `2L` variables modulo `m`.
#[derive(Clone, Debug)]
struct IntPoly {
    m: u64,
    terms: HashMap<Mono, u64>,
}

impl IntPoly {
    fn zero(m: u64) -> Self {
        IntPoly { m, terms: HashMap::new() }
    }

    fn var_pow(m: u64, nvars: usize, v: usize, e: u32, c: u64) -> Self {
        let mut mono = vec![0; nvars];
        mono[v] = e;
        let mut r = Self::zero(m);
        r.add_term(mono, c);
        r
    }

    fn add_term(&mut self, mono: Mono, c: u64) {
        let m = self.m;
        let c = c % m;
        if c == 0 {
            return;
        }
        let e = self.terms.entry(mono.clone()).or_insert(0);
        *e = (*e + c) % m;
        if *e == 0 {
            self.terms.remove(&mono);
        }
    }

    fn add_scaled(&mut self, o: &IntPoly, c: u64) {
        for (mono, v) in &o.terms {
            let x = (*v as u128 * c as u128 % self.m as u128) as u64;
            self.add_term(mono.clone(), x);
        }
    }

    fn mul(&self, o: &IntPoly) -> IntPoly {
        let m = self.m as u128;
        let mut acc: HashMap<Mono, u64> = HashMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let mono: Mono = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                let x = (*ca as u128 * *cb as u128 % m) as u64;
                let e = acc.entry(mono).or_insert(0);
                *e = ((*e as u128 + x as u128) % m) as u64;
            }
        }
        acc.retain(|_, v| *v != 0);
        IntPoly { m: self.m, terms: acc }
    }

    fn pow(&self, e: u64) -> IntPoly {
        let mut r = IntPoly { m: self.m, terms: HashMap::from([(vec![0; self.nvars()], 1 % self.m)]) };
        for _ in 0..e {
            r = r.mul(self);
        }
        r
    }

    fn nvars(&self) -> usize {
        self.terms.keys().next().map_or(0, |k| k.len())
    }

    fn reduce(&self, m: u64) -> IntPoly {
        let mut r = IntPoly::zero(m);
        for (mono, c) in &self.terms {
            r.add_term(mono.clone(), *c);
        }
        r
    }

    /// Divide by `d` (every coefficient must be divisible), reducing mod `m`.
    fn exact_div(&self, d: u64, m: u64) -> IntPoly {
        let mut r = IntPoly::zero(m);
        for (mono, c) in &self.terms {
            assert!(c % d == 0, "ghost recursion left a non-integral coefficient");
            r.add_term(mono.clone(), c / d);
        }
        r
    }

    fn sorted(&self) -> Vec<(u64, Mono)> {
        let mut v: Vec<(u64, Mono)> = self.terms.iter().map(|(m, c)| (*c, m.clone())).collect();
        v.sort_by(|a, b| a.1.cmp(&b.1));
        v
    }
}

/// Universal sum and product polynomials mod `p`; variables `X_0..X_{L-1}, Y_0..Y_{L-1}`.
#[derive(Debug)]
pub struct WittTables {
    pub p: u64,
    pub length: usize,
    pub sum: Vec<Vec<(u64, Vec<u32>)>>,
    pub prod: Vec<Vec<(u64, Vec<u32>)>>,
}

impl WittTables {
    fn build(p: u64, len: usize) -> Self {
        let nv = 2 * len;
        let top = p.pow(len as u32);
        let ghost_part =
            |n: usize, i: usize, v: usize| IntPoly::var_pow(top, nv, v, p.pow((n - i) as u32) as u32, p.pow(i as u32));
        let recurse = |ghost: &dyn Fn(usize) -> IntPoly| -> Vec<Vec<(u64, Vec<u32>)>> {
            let mut polys: Vec<IntPoly> = Vec::new();
            // powers[i][k] = S_i^(p^k) mod p^len
            let mut powers: Vec<Vec<IntPoly>> = Vec::new();
            for n in 0..len {
                let modn = p.pow(n as u32 + 1);
                let mut g = ghost(n).reduce(modn);
                for (i, pw) in powers.iter_mut().enumerate() {
                    while pw.len() <= n - i {
                        let last = pw.last().unwrap().pow(p);
                        pw.push(last);
                    }
                    g.add_scaled(&pw[n - i].reduce(modn), modn - p.pow(i as u32) % modn);
                }
                let s = g.exact_div(p.pow(n as u32), p);
                powers.push(vec![s.reduce(top)]);
                polys.push(s);
            }
            polys.iter().map(|s| s.sorted()).collect()
        };
        let sum = recurse(&|n| {
            let mut g = IntPoly::zero(top);
            for i in 0..=n {
                g.add_scaled(&ghost_part(n, i, i), 1);
                g.add_scaled(&ghost_part(n, i, len + i), 1);
            }
            g
        });
        let prod = recurse(&|n| {
            let mut a = IntPoly::zero(top);
            let mut b = IntPoly::zero(top);
            for i in 0..=n {
                a.add_scaled(&ghost_part(n, i, i), 1);
                b.add_scaled(&ghost_part(n, i, len + i), 1);
            }
            a.mul(&b)
        });
        WittTables { p, length: len, sum, prod }
    }
}

type TableCache = HashMap<(u64, usize), Arc<WittTables>>;

/// Shared tables for `(p, length)`, computed on first use.
pub fn witt_tables(p: u64, len: usize) -> Result<Arc<WittTables>> {
    if len == 0 || len > MAX_WITT_LENGTH {
        return Err(Error::OutOfScope(format!("Witt length {len} outside 1..={MAX_WITT_LENGTH}")));
    }
    static CACHE: OnceLock<Mutex<TableCache>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&(p, len)) {
        return Ok(t.clone());
    }
    let t = Arc::new(WittTables::build(p, len));
    cache.lock().unwrap().entry((p, len)).or_insert(t.clone());
    Ok(t)
}

fn eval(poly: &[(u64, Vec<u32>)], vars: &[PerfLaurent], p: u64) -> Result<PerfLaurent> {
    let mut cache: HashMap<(usize, u32), PerfLaurent> = HashMap::new();
    let mut out = PerfLaurent::zero(p);
    'mono: for (c, mono) in poly {
        let mut term = PerfLaurent::one(p).scale(*c as i64);
        for (v, &e) in mono.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if vars[v].is_zero() && vars[v].is_exact() {
                continue 'mono;
            }
            let f = match cache.get(&(v, e)) {
                Some(f) => f,
                None => {
                    let f = vars[v].pow(e as u64)?;
                    cache.entry((v, e)).or_insert(f)
                }
            };
            term = term.mul(f)?;
        }
        out = out.add(&term)?;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WittVector {
    pub p: u64,
    /// The value is `p^(-denom_exp)` times the vector.
    pub denom_exp: u32,
    pub components: Vec<PerfLaurent>,
}

impl WittVector {
    pub fn zero(p: u64, len: usize) -> Self {
        WittVector { p, denom_exp: 0, components: vec![PerfLaurent::zero(p); len] }
    }

    pub fn one(p: u64, len: usize) -> Self {
        Self::teichmuller(&PerfLaurent::one(p), len)
    }

    pub fn length(&self) -> usize {
        self.components.len()
    }

    /// `[x] = (x, 0, ..., 0)`.
    pub fn teichmuller(x: &PerfLaurent, len: usize) -> Self {
        let mut v = Self::zero(x.p, len);
        if len > 0 {
            v.components[0] = x.clone();
        }
        v
    }

    /// The image of `a in Z/p^len` in `W(F_p)`.
    pub fn from_residue(p: u64, len: usize, a: u64) -> Result<Self> {
        let md = Modulus::new(p, len as u32)?;
        let mut a = a % md.m;
        let mut v = Self::zero(p, len);
        for n in 0..len {
            let d = a % p;
            v.components[n] = PerfLaurent::monomial(p, Exp::zero(), d as i64);
            let t = md.teich(d);
            a = md.sub(a, t) / p;
        }
        Ok(v)
    }

    pub fn from_int(p: u64, len: usize, a: i64) -> Result<Self> {
        let md = Modulus::new(p, len as u32)?;
        Self::from_residue(p, len, md.from_i64(a))
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.p != o.p || self.length() != o.length() {
            return Err(Error::Mismatch("Witt vectors of different shape".into()));
        }
        Ok(())
    }

    /// `V`: shift right, dropping the last component.
    pub fn verschiebung(&self) -> Self {
        let mut c = Vec::with_capacity(self.length());
        if self.length() > 0 {
            c.push(PerfLaurent::zero(self.p));
            c.extend(self.components[..self.length() - 1].iter().cloned());
        }
        WittVector { p: self.p, denom_exp: self.denom_exp, components: c }
    }

    /// `F`: componentwise `p`-th power.
    pub fn frobenius(&self) -> Result<Self> {
        let components = self.components.iter().map(|x| x.frobenius()).collect::<Result<_>>()?;
        Ok(WittVector { p: self.p, denom_exp: self.denom_exp, components })
    }

    /// Multiplication by `p^k` as `(V F)^k`.
    pub fn p_power_times(&self, k: u32) -> Result<Self> {
        let mut x = self.clone();
        for _ in 0..k {
            x = x.frobenius()?.verschiebung();
        }
        Ok(x)
    }

    /// Rewrite with a larger denominator exponent.
    pub fn with_denom(&self, e: u32) -> Result<Self> {
        if e < self.denom_exp {
            return Err(Error::Precondition("denominator can only grow".into()));
        }
        let mut x = self.p_power_times(e - self.denom_exp)?;
        x.denom_exp = e;
        Ok(x)
    }

    fn aligned(&self, o: &Self) -> Result<(Self, Self)> {
        self.check(o)?;
        let e = self.denom_exp.max(o.denom_exp);
        Ok((self.with_denom(e)?, o.with_denom(e)?))
    }

    fn apply(&self, o: &Self, table: &[Vec<(u64, Vec<u32>)>]) -> Result<Vec<PerfLaurent>> {
        let mut vars = self.components.clone();
        vars.extend(o.components.iter().cloned());
        table.iter().map(|poly| eval(poly, &vars, self.p)).collect()
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        let (a, b) = self.aligned(o)?;
        let t = witt_tables(self.p, self.length())?;
        Ok(WittVector { p: self.p, denom_exp: a.denom_exp, components: a.apply(&b, &t.sum)? })
    }

    /// For odd `p`, `-x` negates every coordinate.
    pub fn neg(&self) -> Self {
        WittVector {
            p: self.p,
            denom_exp: self.denom_exp,
            components: self.components.iter().map(|x| x.neg()).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        let t = witt_tables(self.p, self.length())?;
        Ok(WittVector { p: self.p, denom_exp: self.denom_exp + o.denom_exp, components: self.apply(o, &t.prod)? })
    }

    pub fn pow(&self, mut k: u64) -> Result<Self> {
        let mut acc = Self::one(self.p, self.length());
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Inverse when `x_0` is a unit of the tilt; the coordinate recursion
    /// `y_n = -P_n(x, y_0..y_{n-1}, 0) / x_0^(p^n)` holds modulo `p`.
    pub fn inverse(&self, cap: Option<Exp>) -> Result<Self> {
        if self.denom_exp != 0 {
            return Err(Error::OutOfScope("inverse of a vector with a p-denominator".into()));
        }
        let len = self.length();
        let t = witt_tables(self.p, len)?;
        let y0 = self.components[0].inverse(cap)?;
        let mut y = Self::zero(self.p, len);
        y.components[0] = y0.clone();
        for n in 1..len {
            let mut vars = self.components.clone();
            vars.extend(y.components.iter().cloned());
            let v = eval(&t.prod[n], &vars, self.p)?;
            y.components[n] = v.neg().mul(&y0.frobenius_pow(n as i64)?)?;
        }
        Ok(y)
    }

    /// Equal after aligning denominators, modulo each coordinate's cap.
    pub fn eq_at_precision(&self, o: &Self) -> bool {
        match self.aligned(o) {
            Ok((a, b)) => a.components.iter().zip(&b.components).all(|(x, y)| x.eq_at_precision(y)),
            Err(_) => false,
        }
    }

    pub fn truncate_components(&self, caps: &[Exp]) -> Self {
        let components = self.components.iter().zip(caps).map(|(x, c)| x.truncate(*c)).collect();
        WittVector { p: self.p, denom_exp: self.denom_exp, components }
    }

    /// `gamma_c` of the tilt applied coordinatewise, modulo `tbar^caps[n]`.
    pub fn gamma_flat(&self, c: &GammaElement, caps: &[Exp]) -> Result<Self> {
        let components =
            self.components.iter().zip(caps).map(|(x, cap)| x.gamma_flat(c, *cap)).collect::<Result<_>>()?;
        Ok(WittVector { p: self.p, denom_exp: self.denom_exp, components })
    }

    pub fn to_json(&self) -> WittJson {
        WittJson {
            p: self.p,
            length: self.length(),
            denom_exp: self.denom_exp,
            components: self.components.iter().map(|x| x.to_json()).collect(),
        }
    }

    pub fn from_json(j: &WittJson) -> Result<Self> {
        let components: Vec<PerfLaurent> = j.components.iter().map(PerfLaurent::from_json).collect::<Result<_>>()?;
        if components.len() != j.length {
            return Err(Error::Precondition("length does not match the components".into()));
        }
        Ok(WittVector { p: j.p, denom_exp: j.denom_exp, components })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WittJson {
    pub p: u64,
    pub length: usize,
    pub denom_exp: u32,
    pub components: Vec<PerfJson>,
}

/// A random vector whose coordinates are drawn with `shape`.
pub fn sample_witt<R: Rng>(rng: &mut R, p: u64, len: usize, shape: SampleShape) -> WittVector {
    WittVector { p, denom_exp: 0, components: (0..len).map(|_| sample_perf(rng, p, shape)).collect() }
}

/// `count` vectors from a ChaCha8 stream seeded with `seed`.
pub fn seeded_witt_samples(p: u64, len: usize, seed: u64, count: usize) -> Vec<WittVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_witt(&mut rng, p, len, SampleShape::default())).collect()
}

pub fn witt_add(x: &WittVector, y: &WittVector) -> Result<WittVector> {
    x.add(y)
}

pub fn witt_mul(x: &WittVector, y: &WittVector) -> Result<WittVector> {
    x.mul(y)
}

pub fn teichmuller(x: &PerfLaurent, len: usize) -> WittVector {
    WittVector::teichmuller(x, len)
}

pub fn verschiebung(x: &WittVector) -> WittVector {
    x.verschiebung()
}

pub fn witt_frobenius(x: &WittVector) -> Result<WittVector> {
    x.frobenius()
}

/// `-log_p |x|_r`: the minimum over `n` of `n - e + r v(x_n) / p^n`, since
/// the Teichmuller coefficient of `p^n` is `x_n^(p^-n)`. `None` for zero.
pub fn gauss_valuation(x: &WittVector, r: Exp) -> Option<Exp> {
    let mut best: Option<Exp> = None;
    let mut pn = Exp::one();
    for (n, c) in x.components.iter().enumerate() {
        if let Ok(v) = tilt_valuation(c) {
            let val = Exp::from_integer(n as i64 - x.denom_exp as i64) + r * v / pn;
            best = Some(best.map_or(val, |b: Exp| b.min(val)));
        }
        pn *= Exp::from_integer(x.p as i64);
    }
    best
}

/// `|x|_r = max_n p^(-n) |xbar_n|^r`.
pub fn witt_gauss_norm(x: &WittVector, r: Exp) -> f64 {
    match gauss_valuation(x, r) {
        Some(v) => (x.p as f64).powf(-(*v.numer() as f64) / (*v.denom() as f64)),
        None => 0.0,
    }
}

/// `[1 + tbar] - 1`, the image of `pi`.
pub fn pi_image(p: u64, len: usize) -> Result<WittVector> {
    let eps = PerfLaurent::from_terms(p, [(Exp::zero(), 1), (Exp::one(), 1)], None)?;
    WittVector::teichmuller(&eps, len).sub(&WittVector::one(p, len))
}

/// Coordinate caps for an error in `pi^k W`: `max(k - n, 0) p^n`.
/// Coordinate caps for `x + pi^k W` when `x_j` has order at least
/// `-pole p^j`. Addition carries mix the tail into every coordinate.
pub fn pi_power_caps(p: u64, len: usize, k: i64, pole: Exp) -> Vec<Exp> {
    (0..len)
        .map(|n| {
            let w = Exp::from_integer((p as i64).pow(n as u32) - 1);
            Exp::from_integer(k - n as i64) - w * pole
        })
        .collect()
}

/// Smallest `pole >= 0` with `ord(x_j) >= -pole p^j` for every coordinate.
pub fn pole_rate(w: &WittVector) -> Exp {
    let mut r = Exp::from_integer(0);
    for (j, x) in w.components.iter().enumerate() {
        if let Some(o) = x.order() {
            r = r.max(-o / Exp::from_integer((w.p as i64).pow(j as u32)));
        }
    }
    r
}

/// Evaluate `f` at `pi = [epsilon] - 1` in `W_len`. Coefficients are cut to
/// `p^len`; a truncated `f` yields coordinates capped by [`pi_power_caps`]
/// (the capped coordinates record it).
pub fn embed_pi(f: &TruncatedLaurent, len: usize) -> Result<WittVector> {
    let p = f.md.p;
    if len as u32 > f.md.n {
        return Err(Error::Precision("Witt length exceeds the series precision".into()));
    }
    if f.e as usize >= len {
        return Err(Error::Precision("denominator swallows the Witt length".into()));
    }
    let wmd = Modulus::new(p, len as u32)?;
    let pi = pi_image(p, len)?;
    let mut acc = WittVector::zero(p, len);
    let mut pos = WittVector::one(p, len);
    let mut k = 0i64;
    let terms: Vec<(i64, u64)> = (f.lo..=f.hi).map(|j| (j, f.get(j) % wmd.m)).filter(|&(_, c)| c != 0).collect();
    // nonnegative powers
    for &(j, c) in terms.iter().filter(|(j, _)| *j >= 0) {
        while k < j {
            pos = pos.mul(&pi)?;
            k += 1;
        }
        acc = acc.add(&WittVector::from_residue(p, len, c)?.mul(&pos)?)?;
    }
    if terms.iter().any(|(j, _)| *j < 0) {
        let inv = pi.inverse(None)?;
        let mut neg = WittVector::one(p, len);
        let mut k = 0i64;
        for &(j, c) in terms.iter().filter(|(j, _)| *j < 0).rev() {
            while k < -j {
                neg = neg.mul(&inv)?;
                k += 1;
            }
            acc = acc.add(&WittVector::from_residue(p, len, c)?.mul(&neg)?)?;
        }
    }
    acc.denom_exp = f.e;
    if f.tail {
        acc = acc.truncate_components(&pi_power_caps(p, len, f.hi + 1, pole_rate(&acc)));
    }
    Ok(acc)
}

/// The truncated `phi`-eigen element `sum_{|n| <= T} p^(-n) [xbar^(p^n)]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiEigen {
    pub terms: usize,
    /// Coordinates of the truncation as a vector of length `2T+1` over `p^-T`.
    pub witt: WittJson,
    /// `r` of the norm `|.|_r` used for the defect.
    pub r: (i64, i64),
    /// `-log_p |phi(x) - p x|_r`.
    pub defect_valuation: (i64, i64),
    pub defect_norm: f64,
    /// Declared rate `c`: the bound is `p^(-T c)`.
    pub c: (i64, i64),
    pub bound: f64,
    pub within_bound: bool,
    /// `phi(x)` and `p x` agree on coordinates `1..2T`.
    pub telescopes: bool,
}

fn pair(q: Exp) -> (i64, i64) {
    (*q.numer(), *q.denom())
}

pub fn phi_eigen_element(xbar: &PerfLaurent, t: usize, r: Exp) -> Result<PhiEigen> {
    let v = tilt_valuation(xbar).map_err(|_| Error::Precondition("xbar must be nonzero".into()))?;
    if v <= Exp::zero() {
        return Err(Error::Precondition("xbar must lie in the maximal ideal".into()));
    }
    if t == 0 {
        return Err(Error::Precondition("need at least one term on each side".into()));
    }
    let p = xbar.p;
    let ti = t as i64;
    // every coordinate of p^T x equals xbar^(p^T)
    let top = xbar.frobenius_pow(ti)?;
    let x = WittVector { p, denom_exp: t as u32, components: vec![top; 2 * t + 1] };
    let fx = x.frobenius()?;
    let px = x.frobenius()?.verschiebung();
    let telescopes = (1..2 * t + 1).all(|k| fx.components[k] == px.components[k]) && !fx.components[0].is_zero();
    // phi(x) - p x = p^(-T) [xbar^(p^(T+1))] - p^(T+1) [xbar^(p^-T)]
    let pp = Exp::from_integer(p as i64);
    let mut pt = Exp::one();
    for _ in 0..t {
        pt *= pp;
    }
    let v1 = Exp::from_integer(-ti) + r * v * pt * pp;
    let v2 = Exp::from_integer(ti + 1) + r * v / pt;
    let dv = v1.min(v2);
    let c = Exp::one();
    let norm = |q: Exp| (p as f64).powf(-(*q.numer() as f64) / (*q.denom() as f64));
    let bound_v = c * Exp::from_integer(ti);
    Ok(PhiEigen {
        terms: t,
        witt: x.to_json(),
        r: pair(r),
        defect_valuation: pair(dv),
        defect_norm: norm(dv),
        c: pair(c),
        bound: norm(bound_v),
        within_bound: dv > bound_v,
        telescopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::tbar_valuation;

    #[test]
    fn one_plus_one_in_w2_f3() {
        let one = WittVector::one(3, 2);
        let two = one.add(&one).unwrap();
        assert_eq!(two.components[0], PerfLaurent::monomial(3, Exp::zero(), 2));
        assert_eq!(two.components[1], PerfLaurent::monomial(3, Exp::zero(), 1));
    }

    #[test]
    fn first_sum_polynomial() {
        // S_1 = X_1 + Y_1 - sum_{0<i<p} binom(p,i)/p X_0^i Y_0^(p-i)
        let t = witt_tables(3, 2).unwrap();
        let mut s1 = t.sum[1].clone();
        s1.sort();
        let mut want = vec![(1, vec![0, 1, 0, 0]), (1, vec![0, 0, 0, 1]), (2, vec![1, 0, 2, 0]), (2, vec![2, 0, 1, 0])];
        want.sort();
        assert_eq!(s1, want);
    }

    #[test]
    fn residues_round_trip() {
        for a in 0..27 {
            let x = WittVector::from_residue(3, 3, a).unwrap();
            let y = WittVector::from_residue(3, 3, 5).unwrap();
            let s = WittVector::from_residue(3, 3, (a + 5) % 27).unwrap();
            let m = WittVector::from_residue(3, 3, a * 5 % 27).unwrap();
            assert_eq!(x.add(&y).unwrap(), s);
            assert_eq!(x.mul(&y).unwrap(), m);
        }
    }

    #[test]
    fn p_is_v_of_one() {
        let p = WittVector::from_int(5, 3, 5).unwrap();
        assert_eq!(p, WittVector::one(5, 3).verschiebung());
    }

    #[test]
    fn inverse_of_pi() {
        let pi = pi_image(3, 3).unwrap();
        let inv = pi.inverse(None).unwrap();
        assert_eq!(pi.mul(&inv).unwrap(), WittVector::one(3, 3));
    }

    #[test]
    fn norm_examples() {
        let t = PerfLaurent::tbar_pow(3, 1, 0);
        let x = WittVector::teichmuller(&t, 3).add(&WittVector::from_int(3, 3, 3).unwrap()).unwrap();
        for r in [Exp::new(1, 3), Exp::one(), Exp::from_integer(2)] {
            let want = (r * tbar_valuation(3)).min(Exp::one());
            assert_eq!(gauss_valuation(&x, r), Some(want));
        }
        assert_eq!(gauss_valuation(&WittVector::from_int(3, 3, 3).unwrap(), Exp::one()), Some(Exp::one()));
    }

    #[test]
    fn phi_eigen_rejects_units() {
        assert!(phi_eigen_element(&PerfLaurent::zero(3), 3, Exp::one()).is_err());
        assert!(phi_eigen_element(&PerfLaurent::one(3), 3, Exp::one()).is_err());
        let e = phi_eigen_element(&PerfLaurent::tbar_pow(3, 1, 0), 3, Exp::one()).unwrap();
        assert!(e.within_bound && e.telescopes);
    }
}
