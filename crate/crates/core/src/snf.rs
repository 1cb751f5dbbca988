//! Dense matrices over `Z/p^N` and their Smith normal form.
//!
//! Every nonzero element of `Z/p^N` is `p^v` times a unit, so pivoting on an
//! entry of minimal valuation always clears its row and column.

use serde::{Deserialize, Serialize};

use crate::padic::Modulus;
use crate::par::Exec;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub md: Modulus,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(md: &Modulus, rows: usize, cols: usize) -> Self {
        Matrix { md: *md, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(md: &Modulus, n: usize) -> Self {
        let mut m = Self::zeros(md, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1 % md.m;
        }
        m
    }

    pub fn from_rows(md: &Modulus, rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(md, r, c);
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m.data[i * c + j] = md.from_i64(x);
            }
        }
        m
    }

    /// Build from column vectors.
    pub fn from_cols(md: &Modulus, rows: usize, cols: &[Vec<u64>]) -> Self {
        let mut m = Self::zeros(md, rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                m.data[i * cols.len() + j] = x;
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: u64) {
        self.data[i * self.cols + j] = x;
    }

    pub fn col(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul(&self, o: &Matrix, exec: Exec) -> Matrix {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let md = self.md;
        let n = o.cols;
        let mut out = Matrix::zeros(&md, self.rows, n);
        let row_job = |i: usize, dst: &mut [u64]| {
            let mut acc = vec![0u128; n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0 {
                    continue;
                }
                let orow = &o.data[k * n..(k + 1) * n];
                for (slot, &b) in acc.iter_mut().zip(orow) {
                    if b != 0 {
                        *slot = (*slot + a as u128 * b as u128) % md.m as u128;
                    }
                }
            }
            for (d, a) in dst.iter_mut().zip(acc) {
                *d = a as u64;
            }
        };
        exec.for_each_chunk(&mut out.data, n.max(1), row_job);
        out
    }

    pub fn mul_vec(&self, v: &[u64]) -> Vec<u64> {
        (0..self.rows)
            .map(|i| {
                let mut s = 0u128;
                for (j, &x) in v.iter().enumerate() {
                    s = (s + self.get(i, j) as u128 * x as u128) % self.md.m as u128;
                }
                s as u64
            })
            .collect()
    }

    pub fn add(&self, o: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(&a, &b)| self.md.add(a, b)).collect();
        Matrix { data, ..*self }
    }

    pub fn sub(&self, o: &Matrix) -> Matrix {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Matrix {
        let data = self.data.iter().map(|&a| self.md.neg(a)).collect();
        Matrix { data, ..*self }
    }

    pub fn scale(&self, a: u64) -> Matrix {
        let data = self.data.iter().map(|&x| self.md.mul(x, a)).collect();
        Matrix { data, ..*self }
    }

    /// `[self | o]`.
    pub fn hcat(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.rows, o.rows);
        let cols = self.cols + o.cols;
        let mut m = Matrix::zeros(&self.md, self.rows, cols);
        for i in 0..self.rows {
            m.data[i * cols..i * cols + self.cols].copy_from_slice(&self.data[i * self.cols..(i + 1) * self.cols]);
            m.data[i * cols + self.cols..(i + 1) * cols].copy_from_slice(&o.data[i * o.cols..(i + 1) * o.cols]);
        }
        m
    }

    /// `[self ; o]`.
    pub fn vcat(&self, o: &Matrix) -> Matrix {
        assert_eq!(self.cols, o.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&o.data);
        Matrix { md: self.md, rows: self.rows + o.rows, cols: self.cols, data }
    }

    /// Block-diagonal sum.
    pub fn block_diag(&self, o: &Matrix) -> Matrix {
        let mut m = Matrix::zeros(&self.md, self.rows + o.rows, self.cols + o.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j));
            }
        }
        for i in 0..o.rows {
            for j in 0..o.cols {
                m.set(self.rows + i, self.cols + j, o.get(i, j));
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    /// Minimal valuation of the entries (`N` for the zero matrix).
    pub fn min_val(&self) -> u32 {
        self.data.iter().map(|&x| self.md.val(x)).min().unwrap_or(self.md.n)
    }
}

/// Smith form data: valuations `a_i` of the diagonal `p^{a_i}` in
/// nondecreasing order (`N` marks an exact zero), plus optional transforms with
/// `U * A * V = diag`.
#[derive(Clone, Debug)]
pub struct Snf {
    pub divisors: Vec<u32>,
    /// Valuation of the diagonal entry in row `t` of `U A V` (unsorted).
    pub pivots: Vec<u32>,
    pub u: Option<Matrix>,
    pub v: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorSummary {
    /// Number of divisors below the zero-at-precision threshold.
    pub rank: usize,
    /// Valuations `0 < a < N - guard` (torsion).
    pub torsion: Vec<u32>,
}

impl Snf {
    /// Divisors `p^a` with `a < N - guard` count toward the apparent rank.
    pub fn apparent_rank(&self, n: u32, guard: u32) -> usize {
        self.divisors.iter().filter(|&&a| a < n.saturating_sub(guard)).count()
    }

    pub fn summary(&self, n: u32, guard: u32) -> DivisorSummary {
        let thr = n.saturating_sub(guard);
        DivisorSummary {
            rank: self.apparent_rank(n, guard),
            torsion: self.divisors.iter().copied().filter(|&a| a > 0 && a < thr).collect(),
        }
    }
}

pub fn smith_normal_form(a: &Matrix, transforms: bool) -> Snf {
    smith_normal_form_with(a, transforms, Exec::default())
}

pub fn smith_normal_form_with(a: &Matrix, transforms: bool, exec: Exec) -> Snf {
    let md = a.md;
    let (r, c) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut u = transforms.then(|| Matrix::identity(&md, r));
    let mut v = transforms.then(|| Matrix::identity(&md, c));
    let mut divisors = Vec::with_capacity(r.min(c));
    for t in 0..r.min(c) {
        // pivot: minimal valuation in the trailing block
        let mut best: Option<(u32, usize, usize)> = None;
        'scan: for i in t..r {
            for j in t..c {
                let x = m.get(i, j);
                if x == 0 {
                    continue;
                }
                let vx = md.val(x);
                if best.is_none_or(|b| vx < b.0) {
                    best = Some((vx, i, j));
                    if vx == 0 {
                        break 'scan;
                    }
                }
            }
        }
        let Some((val, pi, pj)) = best else {
            divisors.extend(std::iter::repeat_n(md.n, r.min(c) - t));
            break;
        };
        swap_rows(&mut m, t, pi);
        if let Some(u) = u.as_mut() {
            swap_rows(u, t, pi);
        }
        swap_cols(&mut m, t, pj);
        if let Some(v) = v.as_mut() {
            swap_cols(v, t, pj);
        }
        // normalize the pivot to p^val
        let pv = md.ppow(val);
        let unit = m.get(t, t) / pv;
        let uinv = md.inv(unit).expect("unit part of pivot");
        scale_row(&mut m, t, uinv);
        if let Some(u) = u.as_mut() {
            scale_row(u, t, uinv);
        }
        // row elimination below the pivot (rows are independent)
        let factors: Vec<u64> = (0..r).map(|i| if i > t { m.get(i, t) / pv } else { 0 }).collect();
        let prow: Vec<u64> = m.data[t * c..(t + 1) * c].to_vec();
        eliminate_rows(&mut m, t, &factors, &prow, exec);
        if let Some(u) = u.as_mut() {
            let urow: Vec<u64> = u.data[t * r..(t + 1) * r].to_vec();
            eliminate_rows(u, t, &factors, &urow, exec);
        }
        // column elimination right of the pivot; only row t is touched in m
        for j in t + 1..c {
            let x = m.get(t, j);
            if x == 0 {
                continue;
            }
            let f = x / pv;
            m.set(t, j, 0);
            if let Some(v) = v.as_mut() {
                for i in 0..c {
                    let val_ = md.sub(v.get(i, j), md.mul(f, v.get(i, t)));
                    v.set(i, j, val_);
                }
            }
        }
        divisors.push(val);
    }
    let pivots = divisors.clone();
    divisors.sort_unstable();
    Snf { divisors, pivots, u, v }
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let c = m.cols;
    for j in 0..c {
        m.data.swap(a * c + j, b * c + j);
    }
}

fn swap_cols(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let c = m.cols;
    for i in 0..m.rows {
        m.data.swap(i * c + a, i * c + b);
    }
}

fn scale_row(m: &mut Matrix, i: usize, s: u64) {
    let md = m.md;
    let c = m.cols;
    for x in &mut m.data[i * c..(i + 1) * c] {
        *x = md.mul(*x, s);
    }
}

/// `row_i -= factors[i] * prow` for every `i` with a nonzero factor.
fn eliminate_rows(m: &mut Matrix, t: usize, factors: &[u64], prow: &[u64], exec: Exec) {
    let md = m.md;
    let c = m.cols;
    let job = |i: usize, row: &mut [u64]| {
        let f = factors[i];
        if i <= t || f == 0 {
            return;
        }
        for (x, &y) in row.iter_mut().zip(prow) {
            if y != 0 {
                *x = md.sub(*x, md.mul(f, y));
            }
        }
    };
    exec.for_each_chunk(&mut m.data, c.max(1), job);
}

/// Generators of `ker A` from Smith data with transforms. Columns whose
/// divisor is zero at precision (`a >= N - guard`) contribute `V e_j`; torsion
/// divisors contribute `p^(N-a) V e_j`.
pub fn kernel_generators(cols: usize, s: &Snf, n: u32, guard: u32) -> Vec<Vec<u64>> {
    let v = s.v.as_ref().expect("kernel needs the column transform");
    let md = v.md;
    let mut out = Vec::new();
    for j in 0..cols {
        let a = s.pivots.get(j).copied().unwrap_or(n);
        if a == 0 {
            continue;
        }
        let scale = if a >= n.saturating_sub(guard) { 1 } else { md.ppow(n - a) };
        out.push(v.col(j).into_iter().map(|x| md.mul(x, scale)).collect());
    }
    out
}

/// Orders `p^t` of the cyclic factors of the submodule generated by the
/// columns of `w` inside `coker B`, where `b` is the Smith data of `B` with
/// transforms. Row `i` of `U w` is scaled by `p^(N - a_i)`, turning membership
/// in `im B` into a kernel condition over `Z/p^N`.
pub fn image_in_cokernel(b: &Snf, w: &Matrix, exec: Exec) -> Vec<u32> {
    let md = w.md;
    let u = b.u.as_ref().expect("image needs the row transform");
    let mut uw = u.mul(w, exec);
    for i in 0..uw.rows {
        let a = b.pivots.get(i).copied().unwrap_or(md.n);
        let f = md.ppow(md.n - a.min(md.n));
        for j in 0..uw.cols {
            let x = uw.get(i, j);
            uw.set(i, j, md.mul(x, f));
        }
    }
    let s = smith_normal_form_with(&uw, false, Exec::Sequential);
    let mut t: Vec<u32> = s.divisors.iter().filter(|&&d| d < md.n).map(|&d| md.n - d).collect();
    t.sort_unstable_by(|a, b| b.cmp(a));
    t
}

/// Solve `A x = b` modulo `p^N`, returning `None` when `b` is not in the image.
pub fn solve(a: &Matrix, b: &[u64]) -> Option<Vec<u64>> {
    let md = a.md;
    let s = smith_normal_form(a, true);
    let (u, v) = (s.u.as_ref().unwrap(), s.v.as_ref().unwrap());
    // U A V = D is computed on a permuted diagonal; recover the diagonal directly
    let d = u.mul(a, Exec::Sequential).mul(v, Exec::Sequential);
    let ub = u.mul_vec(b);
    let mut y = vec![0u64; a.cols];
    for i in 0..a.rows {
        let di = if i < a.cols { d.get(i, i) } else { 0 };
        let bi = ub[i];
        if di == 0 {
            if bi != 0 {
                return None;
            }
            continue;
        }
        let vd = md.val(di);
        if md.val(bi) < vd {
            return None;
        }
        let unit = di / md.ppow(vd);
        let q = bi / md.ppow(vd);
        y[i] = md.mul(q, md.inv(unit).expect("unit"));
    }
    Some(v.mul_vec(&y))
}
