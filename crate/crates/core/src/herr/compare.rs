//! The chain map `(id, -psi)` from the Frobenius complex to the `psi` complex.
//!
//! Windowed Frobenius cocycles are known modulo `pi^(L+1)`. They are lifted to
//! genuine cocycles by solving `(phi - 1)c = r` on `pi^(L+1) A^+`, where the
//! system is triangular with unit diagonal. After `f0 = id`, `f1(x, y) = (-psi x, y)`,
//! `f2 = -psi`, poles deeper than the `psi` floor are removed by a coboundary
//! solved in `pi^-K A^+ / pi^-P A^+`, on which `psi - 1` is invertible. The
//! images are then read in the `psi` model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laurent::{phi_images, GammaElement};
use crate::module::PhiGammaModule;
use crate::par::Exec;
use crate::snf::{image_in_cokernel, kernel_generators, smith_normal_form_with, solve, Matrix};

use super::psi::{psi_between, psi_complex, PsiComplex, PSI_FLOOR};
use super::{
    at_precision, gamma_on_window, herr_complex, phi_complex, psi::psi_herr_complex, semilinear, window_plan,
    CohomologyReport, FiniteComplex, HerrParams, Window, WINDOW_TOP,
};

/// Sign of the `psi` component of `f1`; `Plus` is the negative control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainSign {
    Minus,
    Plus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeComparison {
    pub phi_dim: usize,
    pub psi_dim: usize,
    /// Orders `p^t` of the image of the Frobenius classes in the `psi` model.
    pub image_orders: Vec<u32>,
    pub image_rank: usize,
    /// Valuation of `d_psi` on the mapped cocycles; `None` when exactly zero.
    pub cocycle_defect: Option<u32>,
    /// Valuation of the pole residue left after the transfer coboundary.
    pub transfer_residual: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: HerrParams,
    pub sign: ChainSign,
    pub degrees: Vec<DegreeComparison>,
    pub passes: bool,
}

/// Windows and operators shared by the three transfers.
struct Transfer<'a> {
    m: &'a PhiGammaModule,
    /// Top exponent of the genuine lifts, one below the `psi` depth `k'`.
    top: i64,
    /// `psi` depth `k`.
    k: i64,
    /// Deepest pole reached by the Frobenius complex.
    pole: i64,
    /// `(phi - 1)` on `[L+1, top]`.
    phi_pos: Matrix,
    /// `psi` from `[-pole, top]` to `[-pole, k-1]`.
    psi: Matrix,
    /// `(psi - 1)` on the deep polar part `[-pole, -P-1]`.
    psi_deep: Matrix,
    /// `gamma - 1` on `[-pole, top]`.
    gamma: Matrix,
    /// `phi` from `[-k_phi, top]` to `[-pole, top]`.
    phi: Matrix,
    k_phi: i64,
}

/// Restrict or extend coordinates from window `from` to window `sub`.
fn sub_window(from: &Window, sub: &Window, v: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; sub.dim()];
    for i in 0..sub.rank {
        for e in sub.lo..=sub.hi {
            if from.contains(e) {
                out[sub.index(i, e)] = v[from.index(i, e)];
            }
        }
    }
    out
}

fn embed(from: &Window, to: &Window, v: &[u64]) -> Vec<u64> {
    sub_window(from, to, v)
}

fn min_val(md: &crate::padic::Modulus, v: &[u64]) -> Option<u32> {
    v.iter().filter(|&&x| x != 0).map(|&x| md.val(x)).min()
}

impl<'a> Transfer<'a> {
    fn new(m: &'a PhiGammaModule, k_phi: i64, pole: i64, k: i64, kp: i64) -> Result<Self> {
        let md = m.md;
        let r = m.rank;
        let top = kp - 1;
        let full = Window::new(r, -pole, top);
        let pos = Window::new(r, WINDOW_TOP + 1, top);
        let src = Window::new(r, -k_phi, top);
        let phi = semilinear(&md, &m.phi, &phi_images(&md, src.lo, src.hi, top)?, src, full)?.mat;
        let phi_pos = {
            let a = semilinear(&md, &m.phi, &phi_images(&md, pos.lo, pos.hi, top)?, pos, pos)?.mat;
            a.sub(&Matrix::identity(&md, pos.dim()))
        };
        let cod = Window::new(r, -pole, k - 1);
        let psi = psi_between(m, full, cod)?;
        let deep = Window::new(r, -pole, -PSI_FLOOR - 1);
        let psi_deep = {
            let mut a = Matrix::zeros(&md, deep.dim(), deep.dim());
            for i in 0..r {
                for j in 0..r {
                    for c in deep.lo..=deep.hi {
                        for e in deep.lo..=deep.hi {
                            a.set(deep.index(j, e), deep.index(i, c), psi.get(cod.index(j, e), full.index(i, c)));
                        }
                    }
                }
            }
            a.sub(&Matrix::identity(&md, deep.dim()))
        };
        let g = GammaElement::generator(md.p);
        let gamma = gamma_on_window(m, &m.gam, &g, full)?.mat.sub(&Matrix::identity(&md, full.dim()));
        Ok(Transfer { m, top, k, pole, phi_pos, psi, psi_deep, gamma, phi, k_phi })
    }

    fn full(&self) -> Window {
        Window::new(self.m.rank, -self.pole, self.top)
    }

    fn cod(&self) -> Window {
        Window::new(self.m.rank, -self.pole, self.k - 1)
    }

    fn deep(&self) -> Window {
        Window::new(self.m.rank, -self.pole, -PSI_FLOOR - 1)
    }

    fn pos(&self) -> Window {
        Window::new(self.m.rank, WINDOW_TOP + 1, self.top)
    }

    /// `c` on `[L+1, top]` with `(phi - 1)c = r` there.
    fn lift(&self, r_full: &[u64]) -> Result<Vec<u64>> {
        let rhs = sub_window(&self.full(), &self.pos(), r_full);
        solve(&self.phi_pos, &rhs)
            .ok_or_else(|| Error::NotConverged("phi - 1 is not invertible on pi^(L+1) A^+".into()))
    }

    /// `w` on the deep polar part with `(psi - 1)w = v` there.
    fn unpole(&self, v_cod: &[u64]) -> Result<Vec<u64>> {
        let rhs = sub_window(&self.cod(), &self.deep(), v_cod);
        solve(&self.psi_deep, &rhs).ok_or_else(|| Error::NotConverged("psi - 1 is not invertible on deep poles".into()))
    }

    fn phi_minus_one(&self, x: &[u64], from: &Window) -> Vec<u64> {
        let src = Window::new(self.m.rank, -self.k_phi, self.top);
        let xs = embed(from, &src, x);
        let mut out = self.phi.mul_vec(&xs);
        let xf = embed(from, &self.full(), x);
        let md = self.m.md;
        for (o, a) in out.iter_mut().zip(xf) {
            *o = md.sub(*o, a);
        }
        out
    }

    fn psi_minus_one(&self, w_deep: &[u64]) -> Vec<u64> {
        let wf = embed(&self.deep(), &self.full(), w_deep);
        let mut out = self.psi.mul_vec(&wf);
        let wc = embed(&self.deep(), &self.cod(), w_deep);
        let md = self.m.md;
        for (o, a) in out.iter_mut().zip(wc) {
            *o = md.sub(*o, a);
        }
        out
    }

    fn residual(&self, v: &[u64], w: &Window) -> Option<u32> {
        let deep = Window::new(self.m.rank, w.lo, -PSI_FLOOR - 1);
        min_val(&self.m.md, &sub_window(w, &deep, v))
    }
}

/// Compare the Frobenius and `psi` engines on `m` through the chain map.
pub fn compare_phi_psi(m: &PhiGammaModule, params: &HerrParams, exec: Exec) -> Result<ComparisonReport> {
    let (phi, psi) = exec.join(|| herr_complex(m, params, exec), || psi_herr_complex(m, params, exec));
    let (phi, psi) = (phi?, psi?);
    compare_reports(m, params, &phi, &psi, ChainSign::Minus, exec)
}

/// The chain map check given both converged reports, with a chosen sign.
pub fn compare_reports(
    m: &PhiGammaModule,
    params: &HerrParams,
    phi: &CohomologyReport,
    psi: &CohomologyReport,
    sign: ChainSign,
    exec: Exec,
) -> Result<ComparisonReport> {
    if !phi.all_converged() || !psi.all_converged() {
        return Err(Error::NotConverged("comparison needs converged reports".into()));
    }
    let m = at_precision(m, params.n)?;
    if m.rank == 0 {
        let degrees = (0..3)
            .map(|_| DegreeComparison {
                phi_dim: 0,
                psi_dim: 0,
                image_orders: Vec::new(),
                image_rank: 0,
                cocycle_defect: None,
                transfer_residual: None,
            })
            .collect();
        return Ok(ComparisonReport { params: *params, sign, degrees, passes: true });
    }
    let plan = window_plan(params.p, params.n, params.d)?;
    let (fc, pc) = exec.join(|| phi_complex(&m, plan.k, exec), || psi_complex(&m, plan.k, exec));
    let (fc, pc) = (fc?, pc?);
    let orders = map_classes(&m, &fc, &pc, params.guard, sign, exec)?;
    let cut = params.n - params.guard;
    let mut degrees = Vec::new();
    let mut passes = true;
    for (i, (image_orders, defect, residual)) in orders.into_iter().enumerate() {
        let image_rank = image_orders.iter().filter(|&&t| t >= cut).count();
        let torsion: Vec<u32> = image_orders.iter().copied().filter(|&t| t < cut).collect();
        let ok = image_rank == phi.dims[i]
            && image_rank == psi.dims[i]
            && torsion == psi.divisors[i]
            && phi.divisors[i] == psi.divisors[i]
            && defect.is_none_or(|v| v >= cut)
            && residual.is_none_or(|v| v >= cut);
        passes &= ok;
        degrees.push(DegreeComparison {
            phi_dim: phi.dims[i],
            psi_dim: psi.dims[i],
            image_orders,
            image_rank,
            cocycle_defect: defect,
            transfer_residual: residual,
        });
    }
    Ok(ComparisonReport { params: *params, sign, degrees, passes })
}

type Mapped = (Vec<u32>, Option<u32>, Option<u32>);

fn map_classes(
    m: &PhiGammaModule,
    fc: &FiniteComplex,
    pc: &PsiComplex,
    guard: u32,
    sign: ChainSign,
    exec: Exec,
) -> Result<[Mapped; 3]> {
    let md = m.md;
    let k_phi = -fc.dom.lo;
    let pole = -fc.top.lo;
    let t = Transfer::new(m, k_phi, pole, pc.k, pc.hi.hi + 1)?;
    let xk = fc.dom;
    let xkp = fc.top;
    let y_lo = pc.lo;
    let y_hi = pc.hi;
    let full = t.full();
    let cod = t.cod();

    let kernel = |a: &Matrix, e: &Matrix| -> Vec<Vec<u64>> {
        let ae = a.mul(e, exec);
        let s = smith_normal_form_with(&ae, true, Exec::Sequential);
        kernel_generators(ae.cols, &s, md.n, guard).into_iter().map(|v| e.mul_vec(&v)).collect()
    };

    // degree 0: x + c with (phi - 1)(x + c) = 0
    let g0 = kernel(&fc.d0, &fc.e0);
    let mut v0 = Vec::new();
    let mut res0 = None;
    for x in &g0 {
        let rr = t.phi_minus_one(x, &xk);
        let neg: Vec<u64> = rr.iter().map(|&a| md.neg(a)).collect();
        let c = t.lift(&neg)?;
        let mut lifted = embed(&xk, &full, x);
        let cf = embed(&t.pos(), &full, &c);
        for (a, b) in lifted.iter_mut().zip(cf) {
            *a = md.add(*a, b);
        }
        res0 = min_opt(res0, t.residual(&lifted, &full));
        v0.push(embed(&full, &y_hi, &lifted));
    }

    // degree 1: (x, y) with x in X(k'), y in X(k)
    let g1 = kernel(&fc.d1, &fc.e1);
    let mut v1 = Vec::new();
    let mut res1 = None;
    for z in &g1 {
        let (x, y) = z.split_at(xkp.dim());
        let x_full = embed(&xkp, &full, x);
        let gx = t.gamma.mul_vec(&x_full);
        let py = t.phi_minus_one(y, &xk);
        let rr: Vec<u64> = gx.iter().zip(&py).map(|(&a, &b)| md.sub(a, b)).collect();
        let c = t.lift(&rr)?;
        let mut y_full = embed(&xk, &full, y);
        for (a, b) in y_full.iter_mut().zip(embed(&t.pos(), &full, &c)) {
            *a = md.add(*a, b);
        }
        let px = t.psi.mul_vec(&x_full);
        let u: Vec<u64> = match sign {
            ChainSign::Minus => px.iter().map(|&a| md.neg(a)).collect(),
            ChainSign::Plus => px,
        };
        let w = t.unpole(&u)?;
        let pw = t.psi_minus_one(&w);
        let xa: Vec<u64> = u.iter().zip(&pw).map(|(&a, &b)| md.sub(a, b)).collect();
        let gw = t.gamma.mul_vec(&embed(&t.deep(), &full, &w));
        let yb: Vec<u64> = y_full.iter().zip(&gw).map(|(&a, &b)| md.sub(a, b)).collect();
        res1 = min_opt(res1, min_opt(t.residual(&xa, &cod), t.residual(&yb, &full)));
        let mut v = embed(&cod, &y_lo, &xa);
        v.extend(embed(&full, &y_hi, &yb));
        v1.push(v);
    }

    // degree 2: -psi(z), then remove deep poles with d1(0, b)
    let mut v2 = Vec::new();
    let mut res2 = None;
    for j in 0..fc.e2.cols {
        let z = fc.e2.col(j);
        let pz = t.psi.mul_vec(&embed(&xkp, &full, &z));
        let u: Vec<u64> = pz.iter().map(|&a| md.neg(a)).collect();
        let neg: Vec<u64> = u.iter().map(|&a| md.neg(a)).collect();
        let b = t.unpole(&neg)?;
        let pb = t.psi_minus_one(&b);
        let out: Vec<u64> = u.iter().zip(&pb).map(|(&a, &c)| md.add(a, c)).collect();
        res2 = min_opt(res2, t.residual(&out, &cod));
        v2.push(embed(&cod, &y_lo, &out));
    }

    let image = |i: usize, vs: Vec<Vec<u64>>| -> (Vec<u32>, Option<u32>) {
        let rows = pc.e[i].rows;
        if vs.is_empty() {
            return (Vec::new(), None);
        }
        let w = pc.e[i].mul(&Matrix::from_cols(&md, rows, &vs), exec);
        let defect = match i {
            0 => pc.d0.mul(&w, exec),
            1 => pc.d1.mul(&w, exec),
            _ => Matrix::zeros(&md, 0, w.cols),
        };
        let defect = (!defect.is_zero()).then(|| defect.min_val());
        let b = match i {
            0 => Matrix::zeros(&md, rows, 0),
            1 => pc.d0.mul(&pc.e[0], exec),
            _ => pc.d1.mul(&pc.e[1], exec),
        };
        let sb = smith_normal_form_with(&b, true, Exec::Sequential);
        (image_in_cokernel(&sb, &w, exec), defect)
    };
    let (o0, d0) = image(0, v0);
    let (o1, d1) = image(1, v1);
    let (o2, d2) = image(2, v2);
    Ok([(o0, d0, res0), (o1, d1, res1), (o2, d2, res2)])
}

fn min_opt(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
