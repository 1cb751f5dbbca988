//! The `psi` complex on finite windows.
//!
//! The residue pairing makes `psi` adjoint to `phi`, so `psi` carries
//! `pi^K' A^+` into `pi^K A^+` modulo `p^N` with the same `K' = pK + (p-1)(N-1)`
//! as the Frobenius side. A window is `pi^-P A^+ / pi^K A^+`, exponents
//! `[-P, K-1]`, and `psi - 1` runs from depth `K'` down to depth `K`. The
//! models form an inverse system in `K`; cohomology is the stable image
//! `H(K2) -> H(K)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::laurent::{psi_series, GammaElement, TruncatedLaurent};
use crate::module::{mat_inverse, PhiGammaModule};
use crate::par::Exec;
use crate::snf::{image_in_cokernel, kernel_generators, smith_normal_form_with, Matrix};

use super::{
    at_precision, empty_level, gamma_on_window, inclusion, max_pole, phi_floor, projector_on_window, run_protocol,
    split_orders, window_plan, CohomologyReport, HerrParams, LevelReport, Window, WindowPlan, WINDOW_TOP,
};

/// Pole order kept by every `psi` window; deeper poles are acyclic.
pub const PSI_FLOOR: i64 = WINDOW_TOP + 1;

/// Exponents `[-P, k-1]`.
pub fn psi_window(rank: usize, k: i64) -> Window {
    Window::new(rank, -PSI_FLOOR, k - 1)
}

/// `psi_M(y) = psi(Phi^{-1} y)` from depth `K'` to depth `k`.
pub fn psi_operator(m: &PhiGammaModule, k: i64) -> Result<(Window, Window, Matrix)> {
    let dom = psi_window(m.rank, phi_floor(m.md.p, m.md.n, k));
    let cod = psi_window(m.rank, k);
    Ok((dom, cod, psi_between(m, dom, cod)?))
}

/// `psi_M` between windows with a common floor; the domain must reach the
/// depth `K'` of the codomain depth `K = cod.hi + 1`.
pub fn psi_between(m: &PhiGammaModule, dom: Window, cod: Window) -> Result<Matrix> {
    let md = m.md;
    let d = m.rank;
    if dom.lo != cod.lo || dom.hi + 1 < phi_floor(md.p, md.n, cod.hi + 1) {
        return Err(Error::Window("psi needs the domain depth K' of its codomain".into()));
    }
    let pinv = mat_inverse(&m.phi, d, dom.hi)?;
    if max_pole(&pinv) > 0 {
        return Err(Error::OutOfScope("Phi^{-1} with poles is out of desk scope".into()));
    }
    let images: Vec<TruncatedLaurent> = (dom.lo..=dom.hi)
        .map(|j| Ok(psi_series(&TruncatedLaurent::monomial(&md, j))?.truncate(cod.hi)))
        .collect::<Result<_>>()?;
    let mut mat = Matrix::zeros(&md, cod.dim(), dom.dim());
    for i in 0..d {
        for j in dom.lo..=dom.hi {
            let col = dom.index(i, j);
            for r in 0..d {
                let c = &pinv[r * d + i];
                if c.is_zero() {
                    continue;
                }
                if c.e != 0 {
                    return Err(Error::Precondition("Phi^{-1} must be integral for the engine".into()));
                }
                for a in c.lo.max(0)..=c.hi.min(dom.hi - j) {
                    let ca = c.get(a);
                    if ca == 0 {
                        continue;
                    }
                    let img = &images[(a + j - dom.lo) as usize];
                    for e in img.lo..=img.hi.min(cod.hi) {
                        let x = img.get(e);
                        if x == 0 {
                            continue;
                        }
                        let row = cod.index(r, e);
                        let cur = mat.get(row, col);
                        mat.set(row, col, md.add(cur, md.mul(ca, x)));
                    }
                }
            }
        }
    }
    Ok(mat)
}

/// The `psi` complex at depth `k`: `C0 = Y(K')`, `C1 = Y(k) + Y(K')`, `C2 = Y(k)`,
/// `d0 = (psi - 1, gamma - 1)`, `d1(x, y) = (gamma - 1)x - (psi - 1)y`.
#[derive(Clone, Debug)]
pub struct PsiComplex {
    pub k: i64,
    pub lo: Window,
    pub hi: Window,
    pub d0: Matrix,
    pub d1: Matrix,
    pub e: [Matrix; 3],
    /// `psi - pr` from `Y(K')` to `Y(k)`.
    pub psi_minus: Matrix,
}

pub fn psi_complex(m: &PhiGammaModule, k: i64, exec: Exec) -> Result<PsiComplex> {
    let md = m.md;
    let (dom, cod, psi) = psi_operator(m, k)?;
    let g = GammaElement::generator(md.p);
    let mats = exec.map(4, |i| -> Result<Matrix> {
        match i {
            0 => Ok(gamma_on_window(m, &m.gam, &g, cod)?.mat),
            1 => Ok(gamma_on_window(m, &m.gam, &g, dom)?.mat),
            2 => projector_on_window(m, cod),
            _ => projector_on_window(m, dom),
        }
    });
    let mut it = mats.into_iter();
    let (g_lo, g_hi, e_lo, e_hi) = (it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?, it.next().unwrap()?);
    let psi_minus = psi.sub(&inclusion(&md, dom, cod).mat);
    let g_lo = g_lo.sub(&Matrix::identity(&md, g_lo.rows));
    let g_hi = g_hi.sub(&Matrix::identity(&md, g_hi.rows));
    let d0 = psi_minus.vcat(&g_hi);
    let d1 = g_lo.hcat(&psi_minus.neg());
    Ok(PsiComplex { k, lo: cod, hi: dom, d0, d1, e: [e_hi.clone(), e_lo.block_diag(&e_hi), e_lo], psi_minus })
}

impl PsiComplex {
    /// Projections onto a shallower complex, degree by degree.
    pub fn projections_to(&self, o: &PsiComplex) -> [Matrix; 3] {
        let md = self.d0.md;
        let hi = inclusion(&md, self.hi, o.hi).mat;
        let lo = inclusion(&md, self.lo, o.lo).mat;
        [hi.clone(), lo.block_diag(&hi), lo]
    }

    pub fn square_defect(&self, exec: Exec) -> Option<u32> {
        let z = self.d1.mul(&self.d0, exec);
        (!z.is_zero()).then(|| z.min_val())
    }
}

/// Orders `p^t` of the image of `H^i(src) -> H^i(dst)` along `maps`.
pub fn stable_image(
    src: [&Matrix; 2],
    src_e: [&Matrix; 3],
    dst: [&Matrix; 2],
    dst_e: [&Matrix; 3],
    maps: [&Matrix; 3],
    guard: u32,
    exec: Exec,
) -> [Vec<u32>; 3] {
    let md = src[0].md;
    let n = md.n;
    let degree = |i: usize| -> Vec<u32> {
        let proj = src_e[i];
        let gens: Vec<Vec<u64>> = if i == 2 {
            (0..proj.cols).map(|j| proj.col(j)).collect()
        } else {
            let a = src[i].mul(proj, exec);
            let s = smith_normal_form_with(&a, true, Exec::Sequential);
            kernel_generators(a.cols, &s, n, guard).into_iter().map(|v| proj.mul_vec(&v)).collect()
        };
        if gens.is_empty() {
            return Vec::new();
        }
        let w = dst_e[i].mul(&maps[i].mul(&Matrix::from_cols(&md, proj.rows, &gens), exec), exec);
        let b = if i == 0 { Matrix::zeros(&md, maps[i].rows, 0) } else { dst[i - 1].mul(dst_e[i - 1], exec) };
        let sb = smith_normal_form_with(&b, true, Exec::Sequential);
        image_in_cokernel(&sb, &w, exec)
    };
    let v = exec.map(3, degree);
    let mut it = v.into_iter();
    [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
}

/// Image orders of `H(k2) -> H(k)` for `k2 > k`.
pub fn psi_image(m: &PhiGammaModule, k: i64, k2: i64, guard: u32, exec: Exec) -> Result<[Vec<u32>; 3]> {
    let (small, big) = exec.join(|| psi_complex(m, k, exec), || psi_complex(m, k2, exec));
    let (small, big) = (small?, big?);
    let maps = big.projections_to(&small);
    Ok(stable_image(
        [&big.d0, &big.d1],
        [&big.e[0], &big.e[1], &big.e[2]],
        [&small.d0, &small.d1],
        [&small.e[0], &small.e[1], &small.e[2]],
        [&maps[0], &maps[1], &maps[2]],
        guard,
        exec,
    ))
}

/// One level of the `psi` engine, on the same window plan as the Frobenius side.
pub fn psi_level(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<LevelReport> {
    let m = at_precision(m, params.n)?;
    let plan: WindowPlan = match window_plan(params.p, params.n, params.d) {
        Ok(plan) => plan,
        Err(Error::NotConverged(_)) => return Ok(empty_level(params)),
        Err(e) => return Err(e),
    };
    let orders = psi_image(&m, plan.k, plan.k2, params.guard, exec)?;
    let (dims, divisors) = split_orders(orders, params.n - params.guard);
    let small = psi_complex(&m, plan.k, exec)?;
    let mut defect_norms = BTreeMap::new();
    defect_norms.insert("d1_d0".to_string(), small.square_defect(exec));
    Ok(LevelReport { params: *params, plan: Some(plan), dims: Some(dims), divisors, defect_norms })
}

/// Herr cohomology of the `psi` complex with the refinement protocol.
pub fn psi_herr_complex(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<CohomologyReport> {
    run_protocol(m, params, exec, psi_level)
}
