//! Herr cohomology on finite windows.
//!
//! Coordinates: a window `[lo, hi]` of `pi`-exponents per basis vector, taken
//! modulo `pi^(hi+1)`. The Frobenius complex uses a domain window `[-K, L]`
//! and a codomain `[-K', L]` with `K' = pK + (p-1)(N-1)`, the lowest exponent
//! reached by `phi` on `pi^-K` modulo `p^N`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{gamma_images, phi_images, GammaElement, MonomialImages, TruncatedLaurent};
use crate::module::{check_commutation, delta_generator, PhiGammaModule};
use crate::padic::Modulus;
use crate::par::Exec;
use crate::snf::{smith_normal_form_with, Matrix, Snf};

pub mod compare;
pub mod psi;

/// Top of every window; `pi^(L+1) A^+` is acyclic for both differentials.
pub const WINDOW_TOP: i64 = 1;

/// Flattened coordinates: `rank` copies of the exponents `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub rank: usize,
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(rank: usize, lo: i64, hi: i64) -> Self {
        Window { rank, lo, hi }
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn dim(&self) -> usize {
        self.rank * self.width()
    }

    #[inline]
    pub fn index(&self, i: usize, k: i64) -> usize {
        i * self.width() + (k - self.lo) as usize
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.lo && k <= self.hi
    }

    /// Flatten a vector of series.
    pub fn flatten(&self, v: &[TruncatedLaurent]) -> Result<Vec<u64>> {
        let mut out = vec![0u64; self.dim()];
        for (i, f) in v.iter().enumerate() {
            if f.e != 0 {
                return Err(Error::Precondition("windowed coordinates must be integral".into()));
            }
            for k in f.lo..=f.hi.min(self.hi) {
                let x = f.get(k);
                if x == 0 {
                    continue;
                }
                if k < self.lo {
                    return Err(Error::Window(format!("exponent {k} below window floor {}", self.lo)));
                }
                out[self.index(i, k)] = x;
            }
        }
        Ok(out)
    }

    /// Rebuild series from flattened coordinates.
    pub fn unflatten(&self, md: &Modulus, x: &[u64]) -> Vec<TruncatedLaurent> {
        (0..self.rank)
            .map(|i| {
                let c = x[i * self.width()..(i + 1) * self.width()].to_vec();
                TruncatedLaurent::from_raw(md, self.lo, c, 0, true, self.hi)
            })
            .collect()
    }
}

/// A `Z/p^N`-linear map between windows.
#[derive(Clone, Debug)]
pub struct WindowedMap {
    pub dom: Window,
    pub cod: Window,
    pub mat: Matrix,
}

impl WindowedMap {
    pub fn apply(&self, x: &[u64]) -> Vec<u64> {
        self.mat.mul_vec(x)
    }

    pub fn compose(&self, o: &WindowedMap, exec: Exec) -> Result<WindowedMap> {
        if o.cod != self.dom {
            return Err(Error::Window("composition of maps on unchained windows".into()));
        }
        Ok(WindowedMap { dom: o.dom, cod: self.cod, mat: self.mat.mul(&o.mat, exec) })
    }
}

/// `x -> C * sigma(x)` where `sigma` acts on monomials through `images`.
pub fn semilinear(
    md: &Modulus,
    coef: &[TruncatedLaurent],
    images: &MonomialImages,
    dom: Window,
    cod: Window,
) -> Result<WindowedMap> {
    let d = dom.rank;
    let mut mat = Matrix::zeros(md, cod.dim(), dom.dim());
    for i in 0..d {
        for k in dom.lo..=dom.hi {
            let img = images.image(k);
            let col = dom.index(i, k);
            for j in 0..d {
                let c = &coef[j * d + i];
                if c.is_zero() {
                    continue;
                }
                let prod = c.mul_capped(img, cod.hi)?;
                if prod.e != 0 {
                    return Err(Error::Precondition("module matrices must be integral for the engine".into()));
                }
                for kk in prod.lo..=prod.hi.min(cod.hi) {
                    let x = prod.get(kk);
                    if x == 0 {
                        continue;
                    }
                    if kk < cod.lo {
                        return Err(Error::Window(format!(
                            "image of pi^{k} reaches pi^{kk}, below the codomain floor {}",
                            cod.lo
                        )));
                    }
                    mat.set(cod.index(j, kk), col, x);
                }
            }
        }
    }
    Ok(WindowedMap { dom, cod, mat })
}

/// Coordinate inclusion of a smaller window into a larger one.
pub fn inclusion(md: &Modulus, dom: Window, cod: Window) -> WindowedMap {
    let mut mat = Matrix::zeros(md, cod.dim(), dom.dim());
    for i in 0..dom.rank {
        for k in dom.lo.max(cod.lo)..=dom.hi.min(cod.hi) {
            mat.set(cod.index(i, k), dom.index(i, k), 1);
        }
    }
    WindowedMap { dom, cod, mat }
}

/// The lowest exponent `phi` can reach from `pi^-k` modulo `p^N`.
pub fn phi_floor(p: u64, n: u32, k: i64) -> i64 {
    p as i64 * k + (p as i64 - 1) * (n as i64 - 1)
}

pub fn max_pole(v: &[TruncatedLaurent]) -> i64 {
    v.iter().filter_map(|x| x.order()).map(|o| (-o).max(0)).max().unwrap_or(0)
}

/// `x -> Phi * phi(x)` from `[-k, L]` into `[-k', L]`.
pub fn phi_operator(m: &PhiGammaModule, k: i64) -> Result<WindowedMap> {
    let kp = phi_floor(m.md.p, m.md.n, k) + max_pole(&m.phi);
    let dom = Window::new(m.rank, -k, WINDOW_TOP);
    let cod = Window::new(m.rank, -kp, WINDOW_TOP);
    let images = phi_images(&m.md, -k, WINDOW_TOP, WINDOW_TOP)?;
    semilinear(&m.md, &m.phi, &images, dom, cod)
}

/// `x -> Gam * gamma_0(x)` on `[-k, L]`.
pub fn gamma_operator(m: &PhiGammaModule, k: i64) -> Result<WindowedMap> {
    gamma_on_window(m, &m.gam, &GammaElement::generator(m.md.p), Window::new(m.rank, -k, WINDOW_TOP))
}

/// `x -> C * gamma_c(x)` on a window; `Gamma` preserves `pi^j A^+` for every `j`.
pub fn gamma_on_window(
    m: &PhiGammaModule,
    coef: &[TruncatedLaurent],
    c: &GammaElement,
    w: Window,
) -> Result<WindowedMap> {
    if max_pole(coef) > 0 {
        return Err(Error::OutOfScope("Gamma matrices with poles are out of desk scope".into()));
    }
    let images = gamma_images(&m.md, c, w.lo, w.hi, w.hi)?;
    semilinear(&m.md, coef, &images, w, w)
}

/// `e_Delta = (p-1)^{-1} sum_j (Delta delta)^j` on a window.
pub fn projector_on_window(m: &PhiGammaModule, w: Window) -> Result<Matrix> {
    let d = gamma_on_window(m, &m.delta, &delta_generator(m.md.p), w)?.mat;
    let n = d.rows;
    let mut acc = Matrix::identity(&m.md, n);
    let mut pw = Matrix::identity(&m.md, n);
    for _ in 1..m.md.p - 1 {
        pw = pw.mul(&d, Exec::Sequential);
        acc = acc.add(&pw);
    }
    let inv = m.md.inv(m.md.p - 1).expect("p - 1 is a unit");
    Ok(acc.scale(inv))
}

/// `e_Delta` on `[-k, L]`.
pub fn delta_projector_matrix(m: &PhiGammaModule, k: i64) -> Result<Matrix> {
    projector_on_window(m, Window::new(m.rank, -k, WINDOW_TOP))
}

/// Apply the torsion projector to a vector of series (flattened over `[-k, L]`).
pub fn delta_projector(m: &PhiGammaModule, k: i64, f: &[TruncatedLaurent]) -> Result<Vec<TruncatedLaurent>> {
    let w = Window::new(m.rank, -k, WINDOW_TOP);
    let e = delta_projector_matrix(m, k)?;
    Ok(w.unflatten(&m.md, &e.mul_vec(&w.flatten(f)?)))
}

pub(crate) fn minus_inclusion(op: &WindowedMap) -> Matrix {
    op.mat.sub(&inclusion(&op.mat.md, op.dom, op.cod).mat)
}

/// The three-term complex `C0 -> C1 -> C2` with its torsion projectors.
#[derive(Clone, Debug)]
pub struct FiniteComplex {
    pub d0: Matrix,
    pub d1: Matrix,
    pub e0: Matrix,
    pub e1: Matrix,
    pub e2: Matrix,
    /// Window of `C0`.
    pub dom: Window,
    /// Window of `C2`.
    pub top: Window,
}

/// Frobenius complex on `[-k, L]`: `d0 = (phi-1, gamma-1)`, `d1(x, y) = (gamma-1)x - (phi-1)y`.
pub fn phi_complex(m: &PhiGammaModule, k: i64, exec: Exec) -> Result<FiniteComplex> {
    let phi = phi_operator(m, k)?;
    let kp = -phi.cod.lo;
    let (gk, gkp) = exec.join(|| gamma_operator(m, k), || gamma_operator(m, kp));
    let (gk, gkp) = (gk?, gkp?);
    let (ek, ekp) = exec.join(|| delta_projector_matrix(m, k), || delta_projector_matrix(m, kp));
    let (ek, ekp) = (ek?, ekp?);
    let phi1 = minus_inclusion(&phi);
    let g1 = minus_inclusion(&gk);
    let g1p = minus_inclusion(&gkp);
    let d0 = phi1.vcat(&g1);
    let d1 = g1p.hcat(&phi1.neg());
    Ok(FiniteComplex { d0, d1, e0: ek.clone(), e1: ekp.block_diag(&ek), e2: ekp, dom: phi.dom, top: phi.cod })
}

/// SNF data of one complex.
#[derive(Clone, Debug)]
pub struct ComplexRanks {
    pub s0: Snf,
    pub s1: Snf,
    pub rk_e: [usize; 3],
}

fn unit_rank(s: &Snf) -> usize {
    s.divisors.iter().filter(|&&a| a == 0).count()
}

impl FiniteComplex {
    pub fn projected_d0(&self, exec: Exec) -> Matrix {
        self.d0.mul(&self.e0, exec)
    }

    pub fn projected_d1(&self, exec: Exec) -> Matrix {
        self.d1.mul(&self.e1, exec)
    }

    pub fn ranks(&self, exec: Exec) -> ComplexRanks {
        let jobs: Vec<Matrix> =
            vec![self.projected_d0(exec), self.projected_d1(exec), self.e0.clone(), self.e1.clone(), self.e2.clone()];
        let mut snfs = exec.map(jobs.len(), |i| smith_normal_form_with(&jobs[i], false, Exec::Sequential));
        let e: Vec<usize> = snfs.drain(2..).map(|s| unit_rank(&s)).collect();
        let s1 = snfs.pop().unwrap();
        let s0 = snfs.pop().unwrap();
        ComplexRanks { s0, s1, rk_e: [e[0], e[1], e[2]] }
    }

    /// Valuation of `d1 * d0`; `None` when it vanishes.
    pub fn square_defect(&self, exec: Exec) -> Option<u32> {
        let z = self.d1.mul(&self.d0, exec);
        (!z.is_zero()).then(|| z.min_val())
    }

    /// Valuation of `E^2 - E` over the three projectors.
    pub fn projector_defect(&self, exec: Exec) -> Option<u32> {
        [&self.e0, &self.e1, &self.e2]
            .iter()
            .filter_map(|e| {
                let z = e.mul(e, exec).sub(e);
                (!z.is_zero()).then(|| z.min_val())
            })
            .min()
    }
}

/// Orders of the image of `H(small) -> H(big)` along the window inclusions.
fn refined_orders(small: &FiniteComplex, big: &FiniteComplex, guard: u32, exec: Exec) -> Result<[Vec<u32>; 3]> {
    if small.top.hi != big.top.hi || small.top.lo < big.top.lo || small.top.rank != big.top.rank {
        return Err(Error::Window("refinement windows are not nested".into()));
    }
    let md = small.d0.md;
    let f0 = inclusion(&md, small.dom, big.dom).mat;
    let f2 = inclusion(&md, small.top, big.top).mat;
    let f1 = f2.block_diag(&f0);
    Ok(psi::stable_image(
        [&small.d0, &small.d1],
        [&small.e0, &small.e1, &small.e2],
        [&big.d0, &big.d1],
        [&big.e0, &big.e1, &big.e2],
        [&f0, &f1, &f2],
        guard,
        exec,
    ))
}

/// Window parameters of one refinement level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Polar depth of the small complex.
    pub k: i64,
    /// Polar depth of the refining complex.
    pub k2: i64,
    pub top: i64,
}

/// Split a window size `D` (the polar depth of the refining domain) into
/// the two depths. The refining complex must see past the `phi` boundary
/// spread `(p-1)(N-1)/p` of the small one, otherwise the level is reported
/// as not converged.
pub fn window_plan(p: u64, n: u32, d: i64) -> Result<WindowPlan> {
    let k2 = d;
    let k = (d / 6).max(1);
    let spread = ((p as i64 - 1) * (n as i64 - 1) + p as i64 - 1) / p as i64;
    if k2 < k + spread {
        return Err(Error::NotConverged(format!(
            "window D = {d} is too small for p = {p}, N = {n}: need D >= {}",
            k + spread
        )));
    }
    Ok(WindowPlan { k, k2, top: WINDOW_TOP })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HerrParams {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "D")]
    pub d: i64,
    pub guard: u32,
}

impl HerrParams {
    pub fn new(p: u64, n: u32, d: i64, guard: u32) -> Result<Self> {
        if guard == 0 || guard >= n {
            return Err(Error::Precondition(format!("need N > G >= 1, got N = {n}, G = {guard}")));
        }
        if d < p as i64 {
            return Err(Error::Precondition(format!("need D >= p, got D = {d}")));
        }
        Ok(HerrParams { p, n, d, guard })
    }

    /// One refinement step: `(D, N) -> (D + 30, N + G)`.
    pub fn refined(&self) -> Self {
        HerrParams { d: self.d + REFINE_STEP, n: self.n + self.guard, ..*self }
    }
}

pub const REFINE_STEP: i64 = 30;

/// Dimensions and divisors at a single `(D, N)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelReport {
    pub params: HerrParams,
    pub plan: Option<WindowPlan>,
    pub dims: Option<[usize; 3]>,
    /// Torsion exponents `0 < a < N - G` of `H^1` (cokernel of `d0`) and of
    /// the refined `H^2`.
    pub divisors: [Vec<u32>; 3],
    pub defect_norms: BTreeMap<String, Option<u32>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub params: HerrParams,
    pub dims: [usize; 3],
    pub divisors: [Vec<u32>; 3],
    pub converged: [bool; 3],
    pub defect_norms: BTreeMap<String, Option<u32>>,
    pub levels: Vec<LevelReport>,
}

impl CohomologyReport {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Reduce a module to precision `n <= N`. Raising precision is refused: the
/// data only determine the module modulo its own `p^N`.
pub fn at_precision(m: &PhiGammaModule, n: u32) -> Result<PhiGammaModule> {
    if n == m.md.n {
        return Ok(m.clone());
    }
    if n > m.md.n {
        return Err(Error::Precision(format!(
            "module known modulo p^{} but the level needs p^{n}; build it at the refined precision",
            m.md.n
        )));
    }
    let md = Modulus::new(m.md.p, n)?;
    let cut = |v: &[TruncatedLaurent]| -> Result<Vec<TruncatedLaurent>> { v.iter().map(|x| x.reduce(&md)).collect() };
    PhiGammaModule::new(&md, m.rank, cut(&m.phi)?, cut(&m.gam)?, Some(cut(&m.delta)?))
}

/// One level of the Frobenius engine.
pub fn phi_level(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<LevelReport> {
    let m = at_precision(m, params.n)?;
    let plan = match window_plan(params.p, params.n, params.d) {
        Ok(plan) => plan,
        Err(Error::NotConverged(_)) => return Ok(empty_level(params)),
        Err(e) => return Err(e),
    };
    let (small, big) = exec.join(|| phi_complex(&m, plan.k, exec), || phi_complex(&m, plan.k2, exec));
    let (small, big) = (small?, big?);
    level_from_complexes(&small, &big, params, plan, exec)
}

pub(crate) fn empty_level(params: &HerrParams) -> LevelReport {
    LevelReport { params: *params, plan: None, dims: None, divisors: Default::default(), defect_norms: BTreeMap::new() }
}

pub(crate) fn level_from_complexes(
    small: &FiniteComplex,
    big: &FiniteComplex,
    params: &HerrParams,
    plan: WindowPlan,
    exec: Exec,
) -> Result<LevelReport> {
    let (n, g) = (params.n, params.guard);
    let orders = refined_orders(small, big, g, exec)?;
    let mut defect_norms = BTreeMap::new();
    defect_norms.insert("d1_d0".to_string(), small.square_defect(exec));
    defect_norms.insert("projector".to_string(), small.projector_defect(exec));
    let (dims, divisors) = split_orders(orders, n - g);
    Ok(LevelReport { params: *params, plan: Some(plan), dims: Some(dims), divisors, defect_norms })
}

/// Split cyclic orders `p^t` into free rank (`t >= cut`) and torsion.
pub(crate) fn split_orders(orders: [Vec<u32>; 3], cut: u32) -> ([usize; 3], [Vec<u32>; 3]) {
    let dims = [0, 1, 2].map(|i| orders[i].iter().filter(|&&t| t >= cut).count());
    (dims, orders.map(|o| o.into_iter().filter(|&t| t < cut).collect()))
}

fn combine(levels: Vec<LevelReport>, commutation: Option<i64>) -> CohomologyReport {
    let last = levels.last().expect("at least one level");
    let prev = &levels[levels.len() - 2];
    let dims = last.dims.unwrap_or([0; 3]);
    let mut converged = [false; 3];
    if let (Some(a), Some(b)) = (prev.dims, last.dims) {
        for i in 0..3 {
            converged[i] = a[i] == b[i] && prev.divisors[i] == last.divisors[i];
        }
    }
    let mut defect_norms = last.defect_norms.clone();
    defect_norms.insert("commutation".to_string(), commutation.map(|v| v.max(0) as u32));
    CohomologyReport { params: last.params, dims, divisors: last.divisors.clone(), converged, defect_norms, levels }
}

pub(crate) fn run_protocol<F>(m: &PhiGammaModule, params: &HerrParams, exec: Exec, level: F) -> Result<CohomologyReport>
where
    F: Fn(&PhiGammaModule, &HerrParams, Exec) -> Result<LevelReport> + Sync,
{
    if m.md.p != params.p {
        return Err(Error::Mismatch(format!("module over p = {} with params p = {}", m.md.p, params.p)));
    }
    let comm = check_commutation(m, WINDOW_TOP + 4)?;
    if !comm.passes {
        return Err(Error::Precondition(format!(
            "module fails the commutation check (defect valuation {:?})",
            comm.defect_valuation
        )));
    }
    if m.rank == 0 {
        let lv = LevelReport {
            params: *params,
            plan: None,
            dims: Some([0; 3]),
            divisors: Default::default(),
            defect_norms: BTreeMap::new(),
        };
        return Ok(combine(vec![lv.clone(), lv], None));
    }
    let fine = params.refined();
    let (a, b) = exec.join(|| level(m, params, exec), || level(m, &fine, exec));
    Ok(combine(vec![a?, b?], comm.defect_valuation))
}

/// Herr cohomology of the Frobenius complex with the refinement protocol.
pub fn herr_complex(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<CohomologyReport> {
    run_protocol(m, params, exec, phi_level)
}

/// `h0 - h1 + h2`.
pub fn euler_characteristic(r: &CohomologyReport) -> Result<i64> {
    if !r.all_converged() {
        return Err(Error::NotConverged("Euler characteristic of a non-converged report".into()));
    }
    Ok(r.dims[0] as i64 - r.dims[1] as i64 + r.dims[2] as i64)
}

/// Kernel rank of `p^s phi - 1` on the windowed scalar ring `[-k, L]`.
pub fn scalar_phi_kernel(md: &Modulus, k: i64, s: u32, guard: u32) -> Result<(usize, Vec<u32>)> {
    let triv = crate::module::twist_module(md, 0);
    let phi = phi_operator(&triv, k)?;
    let a = phi.mat.scale(md.ppow(s)).sub(&inclusion(md, phi.dom, phi.cod).mat);
    let snf = smith_normal_form_with(&a, false, Exec::Sequential);
    let rank = snf.apparent_rank(md.n, guard);
    Ok((a.cols - rank, snf.summary(md.n, guard).torsion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::module::twist_module;

    #[test]
    fn projector_examples() {
        let md = Modulus::new(3, 8).unwrap();
        let triv = twist_module(&md, 0);
        let e = delta_projector_matrix(&triv, 2).unwrap();
        assert_eq!(e.mul(&e, Exec::Sequential), e);
        // Delta = -1 on rank 1 at p = 3 kills every coordinate once combined with delta
        let mut m = twist_module(&md, 0);
        m.delta = vec![TruncatedLaurent::constant(&md, -1)];
        let f = vec![TruncatedLaurent::constant(&md, 1)];
        let out = delta_projector(&m, 2, &f).unwrap();
        assert!(out[0].is_zero());
    }

    #[test]
    fn complex_squares_to_zero() {
        let md = Modulus::new(3, 8).unwrap();
        for n in -1..=1 {
            let c = phi_complex(&twist_module(&md, n), 2, Exec::Sequential).unwrap();
            assert_eq!(c.square_defect(Exec::Sequential), None);
            assert_eq!(c.projector_defect(Exec::Sequential), None);
        }
    }
}
