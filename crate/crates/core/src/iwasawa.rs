//! `M^{psi=1}`, `M^{psi=0}` and their exact sequence, `psi`-coinvariants, the
//! Iwasawa class map, truncated cyclotomic deformations and rank-1 `D_crys`.
//!
//! Eigenspaces of `psi` are computed on exact Laurent polynomials: `psi`
//! shrinks positive degrees and keeps pole orders, so a window `[-K, L]` with
//! `L >= 0` is stable and no truncation enters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herr::psi::{psi_herr_complex, psi_operator};
use crate::herr::{
    at_precision, gamma_on_window, max_pole, phi_complex, phi_floor, semilinear, window_plan, HerrParams, Window,
    WINDOW_TOP,
};
use crate::laurent::{phi_images, psi_series, GammaElement, TruncatedLaurent};
use crate::module::{
    check_commutation, delta_generator, mat_frobenius, mat_gamma, mat_inverse, mat_mul, PhiGammaModule, SeriesMatrix,
};
use crate::padic::{Modulus, PAdic};
use crate::par::Exec;
use crate::snf::{image_in_cokernel, kernel_generators, smith_normal_form_with, solve, Matrix};

/// A spanning set of a computed `psi`-eigenspace, in flattened window coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsiBasis {
    pub window: Window,
    pub vectors: Vec<Vec<u64>>,
    /// Orders `p^a`, `0 < a < N - G`, of torsion generators kept out of `vectors`.
    pub torsion: Vec<u32>,
    pub stabilized: bool,
}

impl PsiBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn series(&self, md: &Modulus, i: usize) -> Vec<TruncatedLaurent> {
        exact_series(md, &self.window, &self.vectors[i])
    }
}

fn exact_series(md: &Modulus, w: &Window, x: &[u64]) -> Vec<TruncatedLaurent> {
    (0..w.rank)
        .map(|i| {
            let c = x[i * w.width()..(i + 1) * w.width()].to_vec();
            TruncatedLaurent::from_raw(md, w.lo, c, 0, false, w.hi)
        })
        .collect()
}

fn flatten_exact(w: &Window, v: &[TruncatedLaurent]) -> Result<Vec<u64>> {
    for f in v {
        if f.tail {
            return Err(Error::Precondition("expected exact Laurent polynomials".into()));
        }
        if !f.c.is_empty() && (f.lo < w.lo || f.hi > w.hi) && !f.is_zero() {
            let o = f.order().unwrap_or(f.lo);
            if o < w.lo || f.terms().iter().any(|(k, _)| *k > w.hi) {
                return Err(Error::Window(format!("series leaves the window [{}, {}]", w.lo, w.hi)));
            }
        }
    }
    w.flatten(v)
}

/// `psi_M = psi(Phi^{-1} .)` on exact polynomials of a stable window.
pub fn psi_exact(m: &PhiGammaModule, w: Window) -> Result<Matrix> {
    let md = m.md;
    let d = m.rank;
    if w.hi < 0 {
        return Err(Error::Window("psi-stable windows need a nonnegative top".into()));
    }
    let pinv = mat_inverse(&m.phi, d, w.hi)?;
    if pinv.iter().any(|x| x.tail || x.e != 0) || max_pole(&pinv) > 0 {
        return Err(Error::OutOfScope("exact psi needs an integral polynomial Phi^{-1}".into()));
    }
    let mut mat = Matrix::zeros(&md, w.dim(), w.dim());
    for i in 0..d {
        for j in w.lo..=w.hi {
            for r in 0..d {
                let prod = pinv[r * d + i].shift(j);
                if prod.is_zero() {
                    continue;
                }
                let img = psi_series(&prod)?;
                for (e, x) in img.terms() {
                    let x = x.as_integral().ok_or_else(|| Error::Precondition("non-integral psi image".into()))?;
                    if x == 0 {
                        continue;
                    }
                    if !w.contains(e) {
                        return Err(Error::Window(format!("psi(pi^{j}) reaches pi^{e} outside the window")));
                    }
                    let row = w.index(r, e);
                    mat.set(row, w.index(i, j), md.add(mat.get(row, w.index(i, j)), x));
                }
            }
        }
    }
    Ok(mat)
}

/// `Phi phi(.)` on exact polynomials from `dom` into `cod`.
pub fn phi_exact(m: &PhiGammaModule, dom: Window, cod: Window) -> Result<Matrix> {
    Ok(semilinear(&m.md, &m.phi, &phi_images(&m.md, dom.lo, dom.hi, i64::MAX)?, dom, cod)?.mat)
}

fn fixed_window(m: &PhiGammaModule, k: i64) -> Window {
    Window::new(m.rank, -k, WINDOW_TOP)
}

fn kernel_window(m: &PhiGammaModule, k: i64) -> Window {
    Window::new(m.rank, -(phi_floor(m.md.p, m.md.n, k) + max_pole(&m.phi)), m.md.p as i64 * WINDOW_TOP)
}

fn eigen_basis(a: &Matrix, w: Window, n: u32, guard: u32) -> PsiBasis {
    let s = smith_normal_form_with(a, true, Exec::Sequential);
    let cut = n - guard;
    let mut vectors = Vec::new();
    let mut torsion = Vec::new();
    let gens = kernel_generators(a.cols, &s, n, guard);
    let mut gi = 0;
    for j in 0..a.cols {
        let piv = s.pivots.get(j).copied().unwrap_or(n);
        if piv == 0 {
            continue;
        }
        if piv >= cut {
            vectors.push(gens[gi].clone());
        } else {
            torsion.push(piv);
        }
        gi += 1;
    }
    torsion.sort_unstable();
    PsiBasis { window: w, vectors, torsion, stabilized: false }
}

fn eigen_at(m: &PhiGammaModule, params: &HerrParams, fixed: bool) -> Result<PsiBasis> {
    let m = at_precision(m, params.n)?;
    let k = window_plan(params.p, params.n, params.d)?.k;
    let w = if fixed { fixed_window(&m, k) } else { kernel_window(&m, k) };
    let mut a = psi_exact(&m, w)?;
    if fixed {
        a = a.sub(&Matrix::identity(&m.md, w.dim()));
    }
    Ok(eigen_basis(&a, w, params.n, params.guard))
}

fn eigen_space(m: &PhiGammaModule, params: &HerrParams, fixed: bool, exec: Exec) -> Result<PsiBasis> {
    check_module(m, params)?;
    let fine = params.refined();
    let (a, b) = exec.join(|| eigen_at(m, params, fixed), || eigen_at(m, &fine, fixed));
    let (mut a, b) = (a?, b?);
    a.stabilized = if fixed { a.dim() == b.dim() && a.torsion == b.torsion } else { true };
    Ok(a)
}

fn check_module(m: &PhiGammaModule, params: &HerrParams) -> Result<()> {
    if m.md.p != params.p {
        return Err(Error::Mismatch(format!("module over p = {} with params p = {}", m.md.p, params.p)));
    }
    let c = check_commutation(m, WINDOW_TOP + 4)?;
    if !c.passes {
        return Err(Error::Precondition("module fails the commutation check".into()));
    }
    Ok(())
}

/// `M^{psi=1}` on `[-K, L]`, stabilized across one refinement.
pub fn psi_fixed_points(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<PsiBasis> {
    eigen_space(m, params, true, exec)
}

/// `M^{psi=0}` on `[-K', pL]`, the window reached by `(phi - 1)` from `M^{psi=1}`.
pub fn psi_kernel(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<PsiBasis> {
    eigen_space(m, params, false, exec)
}

/// Apparent dimension of `ker(phi - 1)` on the Frobenius window, ignoring `Gamma`.
pub fn phi_invariants_dim(m: &PhiGammaModule, params: &HerrParams) -> Result<usize> {
    let m = at_precision(m, params.n)?;
    if m.rank == 0 {
        return Ok(0);
    }
    let k = window_plan(params.p, params.n, params.d)?.k;
    let c = phi_complex(&m, k, Exec::Sequential)?;
    let rows = c.top.dim();
    let phi1 =
        Matrix::from_cols(&m.md, rows, &(0..c.dom.dim()).map(|j| c.d0.col(j)[..rows].to_vec()).collect::<Vec<_>>());
    let s = smith_normal_form_with(&phi1, false, Exec::Sequential);
    Ok(phi1.cols - s.apparent_rank(params.n, params.guard))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactSequenceReport {
    pub params: HerrParams,
    pub psi_fixed_dim: usize,
    pub psi_zero_dim: usize,
    pub phi_fixed_dim: usize,
    /// Apparent dimension of `ker(phi - 1)` restricted to `M^{psi=1}`.
    pub kernel_on_psi_fixed: usize,
    /// Valuation of `psi((phi - 1)v)` over the basis; `None` when it vanishes.
    pub psi_residual: Option<u32>,
    /// Every `(phi - 1)v` lies in the span of the computed `M^{psi=0}`.
    pub lands_in_psi_zero: bool,
    pub stabilized: bool,
    pub exact: bool,
}

/// `0 -> M^{phi=1} -> M^{psi=1} -> M^{psi=0}` at precision.
pub fn exact_sequence_check(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<ExactSequenceReport> {
    let fixed = psi_fixed_points(m, params, exec)?;
    let zero = psi_kernel(m, params, exec)?;
    if !fixed.stabilized {
        return Err(Error::NotConverged("M^{psi=1} did not stabilize".into()));
    }
    let phi_fixed_dim = phi_invariants_dim(m, params)?;
    let mm = at_precision(m, params.n)?;
    let md = mm.md;
    let (n, g) = (params.n, params.guard);
    if mm.rank == 0 {
        return Ok(ExactSequenceReport {
            params: *params,
            psi_fixed_dim: 0,
            psi_zero_dim: 0,
            phi_fixed_dim,
            kernel_on_psi_fixed: 0,
            psi_residual: None,
            lands_in_psi_zero: true,
            stabilized: true,
            exact: phi_fixed_dim == 0,
        });
    }
    let phi = phi_exact(&mm, fixed.window, zero.window)?;
    let incl = crate::herr::inclusion(&md, fixed.window, zero.window).mat;
    let f = phi.sub(&incl);
    let images: Vec<Vec<u64>> = fixed.vectors.iter().map(|v| f.mul_vec(v)).collect();
    let psi = psi_exact(&mm, zero.window)?;
    let psi_residual = images.iter().flat_map(|x| psi.mul_vec(x)).filter(|&x| x != 0).map(|x| md.val(x)).min();
    let span = Matrix::from_cols(&md, zero.window.dim(), &zero.vectors);
    let lands_in_psi_zero = images.iter().all(|x| x.iter().all(|&a| a == 0) || solve(&span, x).is_some());
    let kernel_on_psi_fixed = if images.is_empty() {
        0
    } else {
        let a = Matrix::from_cols(&md, zero.window.dim(), &images);
        let s = smith_normal_form_with(&a, false, Exec::Sequential);
        a.cols - s.apparent_rank(n, g)
    };
    let cut = n - g;
    let exact = kernel_on_psi_fixed == phi_fixed_dim && psi_residual.is_none_or(|v| v >= cut) && lands_in_psi_zero;
    Ok(ExactSequenceReport {
        params: *params,
        psi_fixed_dim: fixed.dim(),
        psi_zero_dim: zero.dim(),
        phi_fixed_dim,
        kernel_on_psi_fixed,
        psi_residual,
        lands_in_psi_zero,
        stabilized: fixed.stabilized,
        exact,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coinvariants {
    pub dim: usize,
    pub divisors: Vec<u32>,
    pub stabilized: bool,
    pub levels: Vec<(HerrParams, usize)>,
}

fn coinvariants_at(m: &PhiGammaModule, params: &HerrParams) -> Result<(usize, Vec<u32>)> {
    let m = at_precision(m, params.n)?;
    if m.rank == 0 {
        return Ok((0, Vec::new()));
    }
    let k = window_plan(params.p, params.n, params.d)?.k;
    let (dom, cod, psi) = psi_operator(&m, k)?;
    let a = psi.sub(&crate::herr::inclusion(&m.md, dom, cod).mat);
    let s = smith_normal_form_with(&a, false, Exec::Sequential);
    let summary = s.summary(params.n, params.guard);
    Ok((a.rows - s.apparent_rank(params.n, params.guard), summary.torsion))
}

/// `M / (psi - 1)` in the `psi` windows, with one refinement.
pub fn psi_coinvariants(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<Coinvariants> {
    check_module(m, params)?;
    let fine = params.refined();
    let (a, b) = exec.join(|| coinvariants_at(m, params), || coinvariants_at(m, &fine));
    let (a, b) = (a?, b?);
    Ok(Coinvariants { dim: b.0, divisors: b.1.clone(), stabilized: a == b, levels: vec![(*params, a.0), (fine, b.0)] })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GammaSolve {
    pub v: Vec<TruncatedLaurent>,
    /// Valuation of `(gamma_0 - 1)v - w` modulo the window top.
    pub residual: Option<u32>,
    /// Valuation of `psi(v)`.
    pub psi_residual: Option<u32>,
    pub window: Window,
}

fn vector_val(md: &Modulus, x: &[u64]) -> Option<u32> {
    x.iter().filter(|&&a| a != 0).map(|&a| md.val(a)).min()
}

/// Solve `(gamma_0 - 1)v = w` inside `M^{psi=0}`, modulo `pi^(top+1)` where
/// `top + 1 = K'` for the plan depth `K`, with poles down to the refining depth `D`.
pub fn solve_gamma_minus_one(m: &PhiGammaModule, w: &[TruncatedLaurent], params: &HerrParams) -> Result<GammaSolve> {
    let m = at_precision(m, params.n)?;
    let md = m.md;
    if w.len() != m.rank {
        return Err(Error::Precondition("w must have one entry per basis vector".into()));
    }
    let pole = w.iter().filter_map(|x| x.order()).map(|o| (-o).max(0)).max().unwrap_or(0).max(1);
    let deg = w.iter().filter(|x| !x.c.is_empty()).map(|x| x.hi).max().unwrap_or(0).max(0);
    let exact = Window::new(m.rank, -pole, deg.max(WINDOW_TOP));
    let psi_w = psi_exact(&m, exact)?;
    let wx = flatten_exact(&exact, w)?;
    if let Some(v) = vector_val(&md, &psi_w.mul_vec(&wx)) {
        if v < params.n - params.guard {
            return Err(Error::Precondition("w is not in M^{psi=0}".into()));
        }
    }
    let plan = window_plan(params.p, params.n, params.d)?;
    let k = plan.k.max(deg + 1);
    let top = phi_floor(md.p, md.n, k) - 1;
    // (gamma_0 - 1)^{-1} needs poles well below those of w
    let win = Window::new(m.rank, -pole.max(plan.k2), top);
    if wx.iter().all(|&x| x == 0) {
        let v = win.unflatten(&md, &vec![0; win.dim()]);
        return Ok(GammaSolve { v, residual: None, psi_residual: None, window: win });
    }
    let g = GammaElement::generator(md.p);
    let gm = gamma_on_window(&m, &m.gam, &g, win)?.mat.sub(&Matrix::identity(&md, win.dim()));
    let cod = Window::new(m.rank, win.lo, k - 1);
    let psi = crate::herr::psi::psi_between(&m, win, cod)?;
    let a = gm.vcat(&psi);
    let mut b = crate::herr::inclusion(&md, exact, win).mat.mul_vec(&wx);
    b.extend(vec![0u64; cod.dim()]);
    let v = solve(&a, &b)
        .ok_or_else(|| Error::NotConverged("gamma_0 - 1 is not invertible on M^{psi=0} at precision".into()))?;
    let av = a.mul_vec(&v);
    let diff: Vec<u64> = av.iter().zip(&b).map(|(&x, &y)| md.sub(x, y)).collect();
    let residual = vector_val(&md, &diff[..win.dim()]);
    let psi_residual = vector_val(&md, &diff[win.dim()..]);
    Ok(GammaSolve { v: win.unflatten(&md, &v), residual, psi_residual, window: win })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IwasawaClass {
    pub a: Vec<TruncatedLaurent>,
    pub b: Vec<TruncatedLaurent>,
    /// Valuation of `(gamma_0 - 1)a - (phi - 1)b`; `None` when it vanishes.
    pub cocycle_defect: Option<u32>,
    /// Orders of the class in the windowed `H^1`; empty for the zero class.
    pub class_orders: Vec<u32>,
    pub nonzero: bool,
}

/// `v -> (a, b) = ((gamma_0 - 1)^{-1}(phi - 1)v, v)`.
pub fn h1_iwasawa_class(m: &PhiGammaModule, v: &[TruncatedLaurent], params: &HerrParams) -> Result<IwasawaClass> {
    let mm = at_precision(m, params.n)?;
    let md = mm.md;
    let plan = window_plan(params.p, params.n, params.d)?;
    let w = fixed_window(&mm, plan.k);
    let vx = flatten_exact(&w, v)?;
    let psi = psi_exact(&mm, w)?;
    let dv: Vec<u64> = psi.mul_vec(&vx).iter().zip(&vx).map(|(&a, &b)| md.sub(a, b)).collect();
    if vector_val(&md, &dv).is_some_and(|x| x < params.n - params.guard) {
        return Err(Error::Precondition("v is not in M^{psi=1}".into()));
    }
    let kw = kernel_window(&mm, plan.k);
    let f = phi_exact(&mm, w, kw)?.sub(&crate::herr::inclusion(&md, w, kw).mat);
    let fx = f.mul_vec(&vx);
    let wser = exact_series(&md, &kw, &fx);
    let sol = solve_gamma_minus_one(&mm, &wser, params)?;
    let a = sol.v;
    let cocycle_defect = sol.residual;
    // read (a, b) in the Frobenius window complex
    let c = phi_complex(&mm, plan.k, Exec::Sequential)?;
    let ax = c.top.flatten(&a.iter().map(|x| x.truncate(WINDOW_TOP)).collect::<Vec<_>>())?;
    let mut z = ax;
    z.extend(c.dom.flatten(v)?);
    let zp = c.e1.mul_vec(&z);
    let bmat = c.d0.mul(&c.e0, Exec::Sequential);
    let s = smith_normal_form_with(&bmat, true, Exec::Sequential);
    let class_orders = image_in_cokernel(&s, &Matrix::from_cols(&md, zp.len(), &[zp]), Exec::Sequential);
    let nonzero = !class_orders.is_empty();
    Ok(IwasawaClass { a, b: v.to_vec(), cocycle_defect, class_orders, nonzero })
}

/// A module over scalars mod `T^k`, with `Gam = Gam_base (1 + T)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeformationModule {
    pub base: PhiGammaModule,
    pub level: usize,
    /// Coefficient matrices of `T^0, ..., T^(k-1)`.
    pub phi: Vec<SeriesMatrix>,
    pub gam: Vec<SeriesMatrix>,
}

pub fn deformation_build(m: &PhiGammaModule, k: usize) -> Result<DeformationModule> {
    if k == 0 {
        return Err(Error::Precondition("deformation level must be at least 1".into()));
    }
    let zero = vec![TruncatedLaurent::zero(&m.md); m.rank * m.rank];
    let mut phi = vec![zero.clone(); k];
    phi[0] = m.phi.clone();
    let mut gam = vec![zero; k];
    gam[0] = m.gam.clone();
    if k > 1 {
        gam[1] = m.gam.clone();
    }
    Ok(DeformationModule { base: m.clone(), level: k, phi, gam })
}

/// The weight-space coordinate `chi(gamma_0)^n - 1 = (1+p)^n - 1`.
pub fn weight_point(md: &Modulus, n: i64) -> u64 {
    let v = GammaElement::generator(md.p).value(md);
    let c = if n >= 0 { md.pow(v, n as u64) } else { md.inv(md.pow(v, n.unsigned_abs())).expect("unit") };
    md.sub(c, 1)
}

fn jet_eval(md: &Modulus, jets: &[SeriesMatrix], t: u64) -> Result<SeriesMatrix> {
    let mut out = jets[0].clone();
    let mut tp = 1u64;
    for j in jets.iter().skip(1) {
        tp = md.mul(tp, t);
        for (o, x) in out.iter_mut().zip(j) {
            *o = o.add(&x.scale_int(tp))?;
        }
    }
    Ok(out)
}

/// Evaluate at the character `gamma -> chi(gamma)^n`; the torsion part of the
/// character twists `Delta`.
pub fn deformation_specialize(dm: &DeformationModule, n: i64) -> Result<PhiGammaModule> {
    let md = dm.base.md;
    let t = weight_point(&md, n);
    if md.val(t) == 0 {
        return Err(Error::Precondition("weight-space point outside the open disc".into()));
    }
    let dv = delta_generator(md.p).value(&md);
    let w = if n >= 0 { md.pow(dv, n as u64) } else { md.inv(md.pow(dv, n.unsigned_abs())).expect("unit") };
    let delta = dm.base.delta.iter().map(|x| x.scale_int(w)).collect();
    PhiGammaModule::new(&md, dm.base.rank, jet_eval(&md, &dm.phi, t)?, jet_eval(&md, &dm.gam, t)?, Some(delta))
}

/// Forget the scalars mod `T^k` down to `Z/p^N`: rank `d k`, basis `e_i T^a`.
pub fn deformation_flatten(dm: &DeformationModule) -> Result<PhiGammaModule> {
    let md = dm.base.md;
    let d = dm.base.rank;
    let k = dm.level;
    let n = d * k;
    let spread = |jets: &[SeriesMatrix]| -> SeriesMatrix {
        let mut out = vec![TruncatedLaurent::zero(&md); n * n];
        for a in 0..k {
            for (j, mat) in jets.iter().enumerate() {
                if a + j >= k {
                    break;
                }
                for r in 0..d {
                    for c in 0..d {
                        out[((a + j) * d + r) * n + a * d + c] = mat[r * d + c].clone();
                    }
                }
            }
        }
        out
    };
    let mut delta = vec![TruncatedLaurent::zero(&md); n * n];
    for a in 0..k {
        for r in 0..d {
            for c in 0..d {
                delta[(a * d + r) * n + a * d + c] = dm.base.delta[r * d + c].clone();
            }
        }
    }
    PhiGammaModule::new(&md, n, spread(&dm.phi), spread(&dm.gam), Some(delta))
}

/// Valuation of `sum_{a+b=j} Phi_a phi(Gam_b) - Gam_b gamma_0(Phi_a)` for each
/// `T`-degree `j`; `None` where the defect vanishes.
pub fn deformation_commutation(dm: &DeformationModule, cap: i64) -> Result<Vec<Option<i64>>> {
    let md = dm.base.md;
    let d = dm.base.rank;
    if d == 0 {
        return Ok(vec![None; dm.level]);
    }
    let g = GammaElement::generator(md.p);
    let mut out = Vec::with_capacity(dm.level);
    for j in 0..dm.level {
        let mut lhs = vec![TruncatedLaurent::zero(&md); d * d];
        let mut rhs = lhs.clone();
        for a in 0..=j {
            let b = j - a;
            let l = mat_mul(&dm.phi[a], &mat_frobenius(&dm.gam[b])?, d, cap)?;
            let r = mat_mul(&dm.gam[b], &mat_gamma(&dm.phi[a], &g, cap)?, d, cap)?;
            for i in 0..d * d {
                lhs[i] = lhs[i].add(&l[i])?;
                rhs[i] = rhs[i].add(&r[i])?;
            }
        }
        let mut worst: Option<i64> = None;
        for (x, y) in lhs.iter().zip(&rhs) {
            if let Some(v) = x.truncate(cap).defect(&y.truncate(cap))? {
                worst = Some(worst.map_or(v, |w: i64| w.min(v)));
            }
        }
        out.push(worst);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeformationLevel {
    pub level: usize,
    pub invariants: usize,
    /// Image of the next level's invariants under reduction mod `T^level`,
    /// counting generators of order at least `p^(N-G)`.
    pub invariants_from_next: usize,
    pub coinvariants: usize,
    /// The reduction `T -> 0` maps the coinvariants onto those of the base.
    pub coinvariants_onto_base: bool,
    pub commutation: Vec<Option<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeformationReport {
    pub params: HerrParams,
    pub levels: Vec<DeformationLevel>,
    /// `psi`-cohomology of the flattened deformation at the top level.
    pub psi_dims: [usize; 3],
    pub psi_converged: bool,
    pub psi_fixed_dim: usize,
}

fn gamma_minus_one(m: &PhiGammaModule, k: i64) -> Result<(Window, Matrix)> {
    let w = Window::new(m.rank, -k, WINDOW_TOP);
    let g = GammaElement::generator(m.md.p);
    let a = gamma_on_window(m, &m.gam, &g, w)?.mat.sub(&Matrix::identity(&m.md, w.dim()));
    Ok((w, a))
}

/// `gamma_0`-invariants and coinvariants of the deformation for levels `1..=k`.
pub fn deformation_gamma_identities(
    m: &PhiGammaModule,
    k: usize,
    params: &HerrParams,
    exec: Exec,
) -> Result<DeformationReport> {
    if k < 2 {
        return Err(Error::Precondition("deformation identities need level k >= 2".into()));
    }
    let mm = at_precision(m, params.n)?;
    let md = mm.md;
    let (n, g) = (params.n, params.guard);
    let depth = window_plan(params.p, params.n, params.d)?.k;
    let (_, base_a) = gamma_minus_one(&mm, depth)?;
    let base_s = smith_normal_form_with(&base_a, true, Exec::Sequential);
    let base_orders: Vec<u32> = {
        let mut t: Vec<u32> = base_s.divisors.iter().filter(|&&a| a > 0).map(|&a| a.min(n)).collect();
        t.extend(std::iter::repeat_n(n, base_a.rows.saturating_sub(base_s.divisors.len())));
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    };
    let levels: Vec<Result<DeformationLevel>> = exec.map(k, |i| {
        let lv = i + 1;
        let dm = deformation_build(&mm, lv)?;
        let flat = deformation_flatten(&dm)?;
        let (w, a) = gamma_minus_one(&flat, depth)?;
        let s = smith_normal_form_with(&a, false, Exec::Sequential);
        let rank = s.apparent_rank(n, g);
        // invariants of the next level, reduced mod T^lv
        let next = deformation_flatten(&deformation_build(&mm, lv + 1)?)?;
        let (_, an) = gamma_minus_one(&next, depth)?;
        let sn = smith_normal_form_with(&an, true, Exec::Sequential);
        let gens = kernel_generators(an.cols, &sn, n, g);
        let per = w.dim();
        let reduced: Vec<Vec<u64>> = gens.iter().map(|v| v[..per].to_vec()).collect();
        let invariants_from_next = if reduced.is_empty() {
            0
        } else {
            let r = Matrix::from_cols(&md, per, &reduced);
            let s = smith_normal_form_with(&r, false, Exec::Sequential);
            s.divisors.iter().filter(|&&d| d <= g).count()
        };
        // reduction T -> 0 on coinvariants: rows of T^0 block
        let base_dim = base_a.rows;
        let proj_cols: Vec<Vec<u64>> = (0..base_dim)
            .map(|j| {
                let mut e = vec![0u64; base_dim];
                e[j] = 1;
                e
            })
            .collect();
        let image = image_in_cokernel(&base_s, &Matrix::from_cols(&md, base_dim, &proj_cols), Exec::Sequential);
        let onto = image == base_orders;
        Ok(DeformationLevel {
            level: lv,
            invariants: a.cols - rank,
            invariants_from_next,
            coinvariants: a.rows - rank,
            coinvariants_onto_base: onto,
            commutation: deformation_commutation(&dm, WINDOW_TOP + 4)?,
        })
    });
    let levels = levels.into_iter().collect::<Result<Vec<_>>>()?;
    let flat = deformation_flatten(&deformation_build(m, k)?)?;
    let psi = psi_herr_complex(&flat, params, exec)?;
    let fixed = psi_fixed_points(m, params, exec)?;
    Ok(DeformationReport {
        params: *params,
        levels,
        psi_dims: psi.dims,
        psi_converged: psi.all_converged(),
        psi_fixed_dim: fixed.dim(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dcrys {
    pub weight: i64,
    pub phi_eigenvalue: PAdic,
}

/// `D_crys` of a rank-1 character module: the exponent `j` with
/// `gamma(t^j e) = t^j e`, weight `-j`, and the eigenvalue `lam p^j` of `t^j e`.
pub fn dcrys_rank1(m: &PhiGammaModule, search: i64) -> Result<Dcrys> {
    if m.rank != 1 || !m.is_constant() {
        return Err(Error::Precondition("dcrys_rank1 needs a rank-1 character module".into()));
    }
    let md = m.md;
    let lam = m.phi[0].coeff(0);
    let gam = m.gam[0].coeff(0).as_integral().ok_or_else(|| Error::Precondition("non-integral Gam".into()))?;
    let del = m.delta[0].coeff(0).as_integral().ok_or_else(|| Error::Precondition("non-integral Delta".into()))?;
    let chi = GammaElement::generator(md.p).value(&md);
    let dchi = delta_generator(md.p).value(&md);
    let pw =
        |x: u64, j: i64| if j >= 0 { md.pow(x, j as u64) } else { md.inv(md.pow(x, j.unsigned_abs())).expect("unit") };
    for j in (0..=search).flat_map(|a| if a == 0 { vec![0] } else { vec![a, -a] }) {
        if md.mul(gam, pw(chi, j)) == 1 % md.m && md.mul(del, pw(dchi, j)) == 1 % md.m {
            let pj = if j >= 0 {
                PAdic::from_int(&md, md.p.pow(j as u32) as i64)
            } else {
                PAdic::from_parts(&md, 1, (-j) as u32)?
            };
            return Ok(Dcrys { weight: -j, phi_eigenvalue: lam.mul(&pj)? });
        }
    }
    Err(Error::NotConverged(format!("no Gamma-invariant t^j e with |j| <= {search}")))
}
