//! Rank-`d` (phi, Gamma)-modules given by matrices over truncated Laurent series.
//!
//! For a basis `e`, `phi(e) = e * Phi`, `gamma_0(e) = e * Gam` and the
//! generator of the torsion subgroup acts by `e * Delta`. Coordinates `x` of
//! `sum e_i x_i` transform as `phi(x) = Phi * phi(x_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{frobenius_series, gamma_series, series_invert, GammaElement, TruncatedLaurent};
use crate::padic::{Modulus, PAdic};

/// Smallest primitive root mod `p`; its Teichmuller lift generates the torsion.
pub fn primitive_root(p: u64) -> u64 {
    let phi = p - 1;
    let mut factors = Vec::new();
    let mut n = phi;
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            factors.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    let md = Modulus { p, n: 1, m: p };
    (2..p).find(|&g| factors.iter().all(|&q| md.pow(g, phi / q) != 1)).unwrap_or(1)
}

/// The torsion generator as an element of `Gamma`.
pub fn delta_generator(p: u64) -> GammaElement {
    GammaElement { p, a: primitive_root(p), s: 0 }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiGammaModule {
    pub md: Modulus,
    pub rank: usize,
    pub phi: Vec<TruncatedLaurent>,
    pub gam: Vec<TruncatedLaurent>,
    pub delta: Vec<TruncatedLaurent>,
}

/// Square matrices of series, row-major.
pub type SeriesMatrix = Vec<TruncatedLaurent>;

pub fn mat_mul(a: &[TruncatedLaurent], b: &[TruncatedLaurent], d: usize, cap: i64) -> Result<SeriesMatrix> {
    let md = a[0].md;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut s = TruncatedLaurent::zero(&md);
            for k in 0..d {
                s = s.add(&a[i * d + k].mul_capped(&b[k * d + j], cap)?)?;
            }
            out.push(clip(s, cap));
        }
    }
    Ok(out)
}

/// Truncate only when the series reaches past `cap`.
fn clip(x: TruncatedLaurent, cap: i64) -> TruncatedLaurent {
    if !x.tail && x.hi <= cap {
        x
    } else {
        x.truncate(cap)
    }
}

fn identity(md: &Modulus, d: usize) -> SeriesMatrix {
    (0..d * d).map(|k| TruncatedLaurent::constant(md, (k / d == k % d) as i64)).collect()
}

fn scalar_matrix(x: &PAdic) -> Result<SeriesMatrix> {
    Ok(vec![TruncatedLaurent::scalar(x)?])
}

/// Kronecker product.
fn kron(a: &[TruncatedLaurent], da: usize, b: &[TruncatedLaurent], db: usize, cap: i64) -> Result<SeriesMatrix> {
    let d = da * db;
    let md = a[0].md;
    let mut out = vec![TruncatedLaurent::zero(&md); d * d];
    for i1 in 0..da {
        for j1 in 0..da {
            for i2 in 0..db {
                for j2 in 0..db {
                    let v = a[i1 * da + j1].mul_capped(&b[i2 * db + j2], cap)?;
                    out[(i1 * db + i2) * d + (j1 * db + j2)] = v;
                }
            }
        }
    }
    Ok(out)
}

fn transpose(a: &[TruncatedLaurent], d: usize) -> SeriesMatrix {
    (0..d * d).map(|k| a[(k % d) * d + k / d].clone()).collect()
}

/// Determinant by cofactor expansion (ranks are small at desk scale).
pub fn det(a: &[TruncatedLaurent], d: usize, cap: i64) -> Result<TruncatedLaurent> {
    if d == 1 {
        return Ok(a[0].clone());
    }
    let md = a[0].md;
    let mut s = TruncatedLaurent::zero(&md);
    for j in 0..d {
        let minor = minor_of(a, d, 0, j);
        let term = a[j].mul_capped(&det(&minor, d - 1, cap)?, cap)?;
        s = if j % 2 == 0 { s.add(&term)? } else { s.sub(&term)? };
    }
    Ok(clip(s, cap))
}

fn minor_of(a: &[TruncatedLaurent], d: usize, r: usize, c: usize) -> SeriesMatrix {
    let mut out = Vec::with_capacity((d - 1) * (d - 1));
    for i in 0..d {
        for j in 0..d {
            if i != r && j != c {
                out.push(a[i * d + j].clone());
            }
        }
    }
    out
}

/// Inverse through the adjugate; the determinant is inverted around 0.
pub fn mat_inverse(a: &[TruncatedLaurent], d: usize, cap: i64) -> Result<SeriesMatrix> {
    let dt = det(a, d, cap)?;
    if dt.order().is_none() {
        return Err(Error::Precondition("matrix is not invertible at precision".into()));
    }
    let dinv = exact_monomial_inverse(&dt)?
        .map_or_else(|| series_invert(&if dt.tail { dt.clone() } else { dt.truncate(cap.max(dt.hi)) }), Ok)?;
    if d == 1 {
        return Ok(vec![clip(dinv, cap)]);
    }
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            // (adj A)_{ij} = (-1)^{i+j} det(minor_{ji})
            let m = det(&minor_of(a, d, j, i), d - 1, cap)?;
            let m = if (i + j) % 2 == 1 { m.neg() } else { m };
            out.push(m.mul_capped(&dinv, cap)?);
        }
    }
    Ok(out)
}

/// `(a pi^m)^{-1} = a^{-1} pi^{-m}` stays exact.
fn exact_monomial_inverse(x: &TruncatedLaurent) -> Result<Option<TruncatedLaurent>> {
    let t = x.terms();
    if x.tail || t.len() != 1 {
        return Ok(None);
    }
    let (k, a) = t[0];
    Ok(Some(TruncatedLaurent::scalar(&a.inv()?)?.shift(-k)))
}

/// Apply `phi` entrywise.
pub fn mat_frobenius(a: &[TruncatedLaurent]) -> Result<SeriesMatrix> {
    a.iter().map(frobenius_series).collect()
}

/// Apply `gamma_c` entrywise.
pub fn mat_gamma(a: &[TruncatedLaurent], c: &GammaElement, cap: i64) -> Result<SeriesMatrix> {
    a.iter().map(|x| gamma_series(x, c, cap)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommutationReport {
    /// Minimal valuation of a nonzero defect entry; `None` when the defect vanishes.
    pub defect_valuation: Option<i64>,
    pub window_top: i64,
    pub passes: bool,
}

impl PhiGammaModule {
    pub fn p(&self) -> u64 {
        self.md.p
    }

    pub fn new(
        md: &Modulus,
        rank: usize,
        phi: SeriesMatrix,
        gam: SeriesMatrix,
        delta: Option<SeriesMatrix>,
    ) -> Result<Self> {
        if phi.len() != rank * rank || gam.len() != rank * rank {
            return Err(Error::Precondition("matrix sizes must equal rank^2".into()));
        }
        let delta = delta.unwrap_or_else(|| identity(md, rank));
        if delta.len() != rank * rank {
            return Err(Error::Precondition("Delta must be rank x rank".into()));
        }
        for x in phi.iter().chain(&gam).chain(&delta) {
            if x.md != *md {
                return Err(Error::Mismatch("entries over a different ring".into()));
            }
        }
        Ok(PhiGammaModule { md: *md, rank, phi, gam, delta })
    }

    pub fn zero(md: &Modulus) -> Self {
        PhiGammaModule { md: *md, rank: 0, phi: vec![], gam: vec![], delta: vec![] }
    }

    /// All matrix entries are constants.
    pub fn is_constant(&self) -> bool {
        self.phi.iter().chain(&self.gam).chain(&self.delta).all(|x| x.c.is_empty() || (x.lo >= 0 && x.hi <= 0))
    }

    pub fn direct_sum(&self, o: &Self) -> Result<Self> {
        if self.md != o.md {
            return Err(Error::Mismatch("direct sum of modules over different rings".into()));
        }
        let d = self.rank + o.rank;
        let blk = |a: &[TruncatedLaurent], b: &[TruncatedLaurent]| {
            let mut out = vec![TruncatedLaurent::zero(&self.md); d * d];
            for i in 0..self.rank {
                for j in 0..self.rank {
                    out[i * d + j] = a[i * self.rank + j].clone();
                }
            }
            for i in 0..o.rank {
                for j in 0..o.rank {
                    out[(self.rank + i) * d + self.rank + j] = b[i * o.rank + j].clone();
                }
            }
            out
        };
        Ok(PhiGammaModule {
            md: self.md,
            rank: d,
            phi: blk(&self.phi, &o.phi),
            gam: blk(&self.gam, &o.gam),
            delta: blk(&self.delta, &o.delta),
        })
    }
}

/// Rank-1 module with `phi(e) = lam e` and `gamma_0(e) = chi(gamma_0)^n e`.
pub fn module_from_character(lam: &PAdic, n: i64) -> Result<PhiGammaModule> {
    if lam.is_zero() {
        return Err(Error::Precondition("lambda is indistinguishable from 0".into()));
    }
    let md = Modulus::new(lam.p, lam.prec)?;
    let g = GammaElement::generator(md.p);
    let dg = delta_generator(md.p);
    let chi = |c: &GammaElement| -> u64 {
        let v = c.value(&md);
        if n >= 0 {
            md.pow(v, n as u64)
        } else {
            md.inv(md.pow(v, n.unsigned_abs())).expect("unit")
        }
    };
    PhiGammaModule::new(
        &md,
        1,
        scalar_matrix(lam)?,
        vec![TruncatedLaurent::constant(&md, chi(&g) as i64)],
        Some(vec![TruncatedLaurent::constant(&md, chi(&dg) as i64)]),
    )
}

/// `R(n)`.
pub fn twist_module(md: &Modulus, n: i64) -> PhiGammaModule {
    module_from_character(&PAdic::one(md), n).expect("1 is nonzero")
}

/// `Phi * phi(Gam) - Gam * gamma_0(Phi)` on exponents up to `cap`.
pub fn check_commutation(m: &PhiGammaModule, cap: i64) -> Result<CommutationReport> {
    if m.rank == 0 {
        return Ok(CommutationReport { defect_valuation: None, window_top: cap, passes: true });
    }
    let d = m.rank;
    let g = GammaElement::generator(m.md.p);
    let lhs = mat_mul(&m.phi, &mat_frobenius(&m.gam)?, d, cap)?;
    let rhs = mat_mul(&m.gam, &mat_gamma(&m.phi, &g, cap)?, d, cap)?;
    let mut worst: Option<i64> = None;
    for (a, b) in lhs.iter().zip(&rhs) {
        if let Some(v) = clip(a.clone(), cap).defect(&clip(b.clone(), cap))? {
            worst = Some(worst.map_or(v, |w| w.min(v)));
        }
    }
    // Delta must commute with both actions (its gamma-part is semilinear too).
    let dg = delta_generator(m.md.p);
    let l2 = mat_mul(&m.phi, &mat_frobenius(&m.delta)?, d, cap)?;
    let r2 = mat_mul(&m.delta, &mat_gamma(&m.phi, &dg, cap)?, d, cap)?;
    let l3 = mat_mul(&m.gam, &mat_gamma(&m.delta, &g, cap)?, d, cap)?;
    let r3 = mat_mul(&m.delta, &mat_gamma(&m.gam, &dg, cap)?, d, cap)?;
    for (a, b) in l2.iter().zip(&r2).chain(l3.iter().zip(&r3)) {
        if let Some(v) = clip(a.clone(), cap).defect(&clip(b.clone(), cap))? {
            worst = Some(worst.map_or(v, |w| w.min(v)));
        }
    }
    Ok(CommutationReport { defect_valuation: worst, window_top: cap, passes: worst.is_none() })
}

pub fn tensor(a: &PhiGammaModule, b: &PhiGammaModule, cap: i64) -> Result<PhiGammaModule> {
    if a.md != b.md {
        return Err(Error::Mismatch("tensor of modules over different rings".into()));
    }
    Ok(PhiGammaModule {
        md: a.md,
        rank: a.rank * b.rank,
        phi: kron(&a.phi, a.rank, &b.phi, b.rank, cap)?,
        gam: kron(&a.gam, a.rank, &b.gam, b.rank, cap)?,
        delta: kron(&a.delta, a.rank, &b.delta, b.rank, cap)?,
    })
}

pub fn dual(a: &PhiGammaModule, cap: i64) -> Result<PhiGammaModule> {
    let d = a.rank;
    let inv_t = |x: &[TruncatedLaurent]| -> Result<SeriesMatrix> { Ok(transpose(&mat_inverse(x, d, cap)?, d)) };
    Ok(PhiGammaModule { md: a.md, rank: d, phi: inv_t(&a.phi)?, gam: inv_t(&a.gam)?, delta: inv_t(&a.delta)? })
}

/// `M^vee(1)`.
pub fn cartier_dual(a: &PhiGammaModule, cap: i64) -> Result<PhiGammaModule> {
    tensor(&dual(a, cap)?, &twist_module(&a.md, 1), cap)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slope {
    pub num: i64,
    pub den: u64,
}

impl Slope {
    pub fn new(num: i64, den: u64) -> Self {
        let g = gcd(num.unsigned_abs(), den).max(1);
        Slope { num: num / g as i64, den: den / g }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Valuation `a` of a series of the form `p^a * u` with `u` a unit of `Z_p[[pi]]`.
fn unit_shape_valuation(x: &TruncatedLaurent) -> Result<i64> {
    let terms = x.terms();
    let c0 = terms
        .iter()
        .find(|(k, _)| *k == 0)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::OutOfScope("degree undefined at desk scope: no constant term".into()))?;
    let a = c0.valuation().finite().expect("nonzero constant term");
    for (k, v) in &terms {
        if *k < 0 {
            return Err(Error::OutOfScope("degree undefined at desk scope: polar terms".into()));
        }
        if v.valuation().finite().is_some_and(|w| w < a) {
            return Err(Error::OutOfScope("degree undefined at desk scope: unit part not integral".into()));
        }
    }
    Ok(a)
}

pub fn degree_slope(m: &PhiGammaModule, cap: i64) -> Result<(i64, Slope)> {
    if m.rank == 0 {
        return Ok((0, Slope::new(0, 1)));
    }
    let a = unit_shape_valuation(&det(&m.phi, m.rank, cap)?)?;
    Ok((a, Slope::new(a, m.rank as u64)))
}

fn is_diagonal(m: &PhiGammaModule) -> bool {
    (0..m.rank * m.rank).all(|k| k / m.rank == k % m.rank || m.phi[k].is_zero())
}

pub fn is_etale(m: &PhiGammaModule, cap: i64) -> Result<bool> {
    if m.rank <= 1 {
        return Ok(degree_slope(m, cap)?.0 == 0);
    }
    if !is_diagonal(m) {
        return Err(Error::OutOfScope("etale test out of desk scope for non-split modules".into()));
    }
    for i in 0..m.rank {
        if unit_shape_valuation(&m.phi[i * m.rank + i])? != 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HNPolygon {
    /// `(slope, multiplicity)` in strictly decreasing slope order.
    pub segments: Vec<(Slope, usize)>,
}

impl HNPolygon {
    pub fn rank(&self) -> usize {
        self.segments.iter().map(|s| s.1).sum()
    }

    /// Total height `sum slope * multiplicity`.
    pub fn height(&self) -> Slope {
        let mut num: i64 = 0;
        let mut den: u64 = 1;
        for (s, k) in &self.segments {
            let l = den / gcd(den, s.den) * s.den;
            num = num * (l / den) as i64 + s.num * (l / s.den) as i64 * *k as i64;
            den = l;
        }
        Slope::new(num, den)
    }
}

pub fn hn_polygon_split(m: &PhiGammaModule) -> Result<HNPolygon> {
    if !is_diagonal(m) {
        return Err(Error::Precondition("HN polygon needs a diagonal Phi".into()));
    }
    let mut vals: Vec<i64> =
        (0..m.rank).map(|i| unit_shape_valuation(&m.phi[i * m.rank + i])).collect::<Result<_>>()?;
    vals.sort_unstable_by(|a, b| b.cmp(a));
    let mut segments: Vec<(Slope, usize)> = Vec::new();
    for v in vals {
        match segments.last_mut() {
            Some((s, k)) if s.num == v && s.den == 1 => *k += 1,
            _ => segments.push((Slope::new(v, 1), 1)),
        }
    }
    Ok(HNPolygon { segments })
}

/// JSON form `{rank, phi, gam, delta}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuleJson {
    pub rank: usize,
    pub phi: Vec<TruncatedLaurent>,
    pub gam: Vec<TruncatedLaurent>,
    pub delta: Vec<TruncatedLaurent>,
}

impl Serialize for PhiGammaModule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModuleJson { rank: self.rank, phi: self.phi.clone(), gam: self.gam.clone(), delta: self.delta.clone() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhiGammaModule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = ModuleJson::deserialize(d)?;
        let md = j
            .phi
            .first()
            .map(|x| x.md)
            .ok_or_else(|| serde::de::Error::custom("empty module: use rank 0 with explicit p"))?;
        PhiGammaModule::new(&md, j.rank, j.phi, j.gam, Some(j.delta)).map_err(serde::de::Error::custom)
    }
}
