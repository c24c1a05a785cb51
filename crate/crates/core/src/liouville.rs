//! Compiled Lindblad superoperator acting on dense row-major density matrices.
//!
//! The generator is written as
//!
//! ```text
//! L(ρ) = -i (H_eff ρ - ρ H_eff†) + Σ_k w_k C_k ρ C_k†,
//! H_eff = H - (i/2) Σ_k r_k C_k† C_k
//! ```
//!
//! where `r_k` is the channel rate and `w_k ≤ r_k` the recycling weight
//! (`w_k < r_k` for a channel that is partly monitored and conditioned on no
//! click). `H_eff` is stored in CSR form. Jump operators with at most one
//! nonzero per row, which covers every ladder and projector-times-ladder
//! operator in this model, take a gather path costing `O(s²)` for `s`
//! nonzeros instead of two sparse-dense products.
//!
//! When `H` and every jump operator are real, a Hermitian `ρ = X + iY` splits
//! into a symmetric and an antisymmetric real plane and
//!
//! ```text
//! Re L(ρ) = M₁ + M₁ᵀ + Σ w C X Cᵀ,   M₁ =  H Y + K X
//! Im L(ρ) = M₂ - M₂ᵀ + Σ w C Y Cᵀ,   M₂ = -H X + K Y
//! ```
//!
//! with `K = -½ Σ r C†C`, so only real arithmetic and half the recycled block
//! are needed.

use num_complex::Complex64 as C64;

use crate::qops::Operator;

#[derive(Clone, Debug)]
pub(crate) struct SparseRows {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseRows {
    pub(crate) fn from_dense(op: &Operator) -> Self {
        let dim = op.dim();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for (j, &z) in op.row(i).iter().enumerate() {
                if z.re != 0.0 || z.im != 0.0 {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `out += scale · A ρ`
    fn mul_dense_into(&self, scale: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            let out_row = &mut out[i * d..(i + 1) * d];
            for (k, a) in self.row(i) {
                let f = scale * a;
                let src = &rho[k * d..(k + 1) * d];
                for (o, s) in out_row.iter_mut().zip(src) {
                    *o += f * s;
                }
            }
        }
    }

    /// `out += scale · X A†`
    fn mul_adjoint_right_into(&self, scale: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for j in 0..d {
            for (k, a) in self.row(j) {
                let f = scale * a.conj();
                for i in 0..d {
                    out[i * d + j] += f * x[i * d + k];
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Recycle {
    /// Row `i` of the jump operator holds a single entry `coef` at column `src`.
    Gather { weight: f64, rows: Vec<usize>, src: Vec<usize>, coef: Vec<C64> },
    General { weight: f64, op: SparseRows },
}

impl Recycle {
    fn new(weight: f64, op: &Operator) -> Self {
        let sparse = SparseRows::from_dense(op);
        let single_per_row = (0..sparse.dim).all(|i| sparse.row_ptr[i + 1] - sparse.row_ptr[i] <= 1);
        if !single_per_row {
            return Recycle::General { weight, op: sparse };
        }
        let mut rows = Vec::new();
        let mut src = Vec::new();
        let mut coef = Vec::new();
        for i in 0..sparse.dim {
            if let Some((k, c)) = sparse.row(i).next() {
                rows.push(i);
                src.push(k);
                coef.push(c);
            }
        }
        Recycle::Gather { weight, rows, src, coef }
    }

    fn apply(&self, dim: usize, rho: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        match self {
            Recycle::Gather { weight, rows, src, coef } => {
                if *weight == 0.0 {
                    return;
                }
                for ((&i, &p), &c) in rows.iter().zip(src).zip(coef) {
                    let wc = c * *weight;
                    let out_row = &mut out[i * dim..(i + 1) * dim];
                    let rho_row = &rho[p * dim..(p + 1) * dim];
                    for ((&j, &q), &cj) in rows.iter().zip(src).zip(coef) {
                        out_row[j] += wc * cj.conj() * rho_row[q];
                    }
                }
            }
            Recycle::General { weight, op } => {
                if *weight == 0.0 {
                    return;
                }
                scratch.clear();
                scratch.resize(dim * dim, C64::new(0.0, 0.0));
                op.mul_dense_into(C64::new(1.0, 0.0), rho, scratch);
                op.mul_adjoint_right_into(C64::new(*weight, 0.0), scratch, out);
            }
        }
    }
}

#[derive(Clone, Debug)]
struct RealGather {
    weight: f64,
    rows: Vec<usize>,
    src: Vec<usize>,
    coef: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct RealKernel {
    dim: usize,
    h_ptr: Vec<usize>,
    h: Vec<(usize, f64)>,
    k_ptr: Vec<usize>,
    k: Vec<(usize, f64)>,
    recycle: Vec<RealGather>,
}

fn real_rows(dim: usize, f: impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<(usize, f64)>) {
    let mut ptr = vec![0];
    let mut entries = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            let v = f(i, j);
            if v != 0.0 {
                entries.push((j, v));
            }
        }
        ptr.push(entries.len());
    }
    (ptr, entries)
}

impl RealKernel {
    fn new(hamiltonian: &Operator, channels: &[(f64, f64, &Operator)], recycle: &[Recycle]) -> Option<Self> {
        let dim = hamiltonian.dim();
        if hamiltonian.as_slice().iter().any(|z| z.im != 0.0) {
            return None;
        }
        let mut k = vec![0.0; dim * dim];
        for &(rate, _, op) in channels {
            if op.as_slice().iter().any(|z| z.im != 0.0) {
                return None;
            }
            if rate == 0.0 {
                continue;
            }
            let cdc = &op.adjoint() * op;
            for (kv, z) in k.iter_mut().zip(cdc.as_slice()) {
                *kv -= 0.5 * rate * z.re;
            }
        }
        let (h_ptr, h) = real_rows(dim, |i, j| hamiltonian[(i, j)].re);
        let (k_ptr, k) = real_rows(dim, |i, j| k[i * dim + j]);
        let mut gathers = Vec::new();
        for r in recycle {
            match r {
                Recycle::Gather { weight, rows, src, coef } => gathers.push(RealGather {
                    weight: *weight,
                    rows: rows.clone(),
                    src: src.clone(),
                    coef: coef.iter().map(|c| c.re).collect(),
                }),
                Recycle::General { .. } => return None,
            }
        }
        Some(Self { dim, h_ptr, h, k_ptr, k, recycle: gathers })
    }

    /// `(ox, oy) = L(x + iy)` for symmetric `x` and antisymmetric `y`.
    /// `m1`, `m2` are scratch planes of the same size.
    pub(crate) fn apply(&self, x: &[f64], y: &[f64], ox: &mut [f64], oy: &mut [f64], m1: &mut [f64], m2: &mut [f64]) {
        let d = self.dim;
        m1.fill(0.0);
        m2.fill(0.0);
        for i in 0..d {
            let r1 = &mut m1[i * d..(i + 1) * d];
            let r2 = &mut m2[i * d..(i + 1) * d];
            for &(k, h) in &self.h[self.h_ptr[i]..self.h_ptr[i + 1]] {
                let xs = &x[k * d..(k + 1) * d];
                let ys = &y[k * d..(k + 1) * d];
                for ((a, b), (&xv, &yv)) in r1.iter_mut().zip(r2.iter_mut()).zip(xs.iter().zip(ys)) {
                    *a += h * yv;
                    *b -= h * xv;
                }
            }
            for &(k, kk) in &self.k[self.k_ptr[i]..self.k_ptr[i + 1]] {
                let xs = &x[k * d..(k + 1) * d];
                let ys = &y[k * d..(k + 1) * d];
                for ((a, b), (&xv, &yv)) in r1.iter_mut().zip(r2.iter_mut()).zip(xs.iter().zip(ys)) {
                    *a += kk * xv;
                    *b += kk * yv;
                }
            }
        }
        for i in 0..d {
            ox[i * d + i] = 2.0 * m1[i * d + i];
            oy[i * d + i] = 0.0;
            for j in (i + 1)..d {
                ox[i * d + j] = m1[i * d + j] + m1[j * d + i];
                oy[i * d + j] = m2[i * d + j] - m2[j * d + i];
            }
        }
        // rows are ascending, so b >= a stays on or above the diagonal
        for g in &self.recycle {
            let n = g.rows.len();
            for a in 0..n {
                let (i, p, ca) = (g.rows[a], g.src[a], g.weight * g.coef[a]);
                let xp = &x[p * d..(p + 1) * d];
                let yp = &y[p * d..(p + 1) * d];
                for b in a..n {
                    let (j, q) = (g.rows[b], g.src[b]);
                    let f = ca * g.coef[b];
                    ox[i * d + j] += f * xp[q];
                    oy[i * d + j] += f * yp[q];
                }
            }
        }
        for i in 0..d {
            oy[i * d + i] = 0.0;
            for j in (i + 1)..d {
                ox[j * d + i] = ox[i * d + j];
                oy[j * d + i] = -oy[i * d + j];
            }
        }
    }
}

/// A Lindblad superoperator ready to be applied to dense states.
#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    heff: SparseRows,
    recycle: Vec<Recycle>,
    real: Option<RealKernel>,
}

impl Superoperator {
    /// `channels` holds `(rate, recycling weight, operator)` triples.
    pub(crate) fn new(hamiltonian: &Operator, channels: &[(f64, f64, &Operator)]) -> Self {
        let dim = hamiltonian.dim();
        let mut heff = hamiltonian.clone();
        for &(rate, _, op) in channels {
            if rate == 0.0 {
                continue;
            }
            let cdc = &op.adjoint() * op;
            heff = &heff - &cdc.scale(C64::new(0.0, 0.5 * rate));
        }
        let recycle: Vec<Recycle> = channels
            .iter()
            .filter(|(_, w, _)| *w != 0.0)
            .map(|&(_, w, op)| Recycle::new(w, op))
            .collect();
        let real = RealKernel::new(hamiltonian, channels, &recycle);
        Self { dim, heff: SparseRows::from_dense(&heff), recycle, real }
    }

    pub(crate) fn real_kernel(&self) -> Option<&RealKernel> {
        self.real.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gershgorin bound on the spectral radius of `H_eff`. Twice this bounds
    /// the fastest rate in the generator.
    pub fn heff_radius(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.heff.row(i).map(|(_, z)| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `out = L(ρ)` for an arbitrary (not necessarily Hermitian) `ρ`.
    pub fn apply_into(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        assert_eq!(rho.len(), d * d);
        assert_eq!(out.len(), d * d);
        out.fill(C64::new(0.0, 0.0));
        self.heff.mul_dense_into(C64::new(0.0, -1.0), rho, out);
        self.heff.mul_adjoint_right_into(C64::new(0.0, 1.0), rho, out);
        let mut scratch = Vec::new();
        for r in &self.recycle {
            r.apply(d, rho, out, &mut scratch);
        }
    }

    /// `out = L(ρ)` assuming `ρ = ρ†`; the result is Hermitian by construction.
    pub fn apply_hermitian_into(&self, rho: &[C64], out: &mut [C64], scratch: &mut Vec<C64>) {
        let d = self.dim;
        debug_assert_eq!(rho.len(), d * d);
        out.fill(C64::new(0.0, 0.0));
        self.heff.mul_dense_into(C64::new(0.0, -1.0), rho, out);
        // out <- Y + Y† + X with X = Σ w C ρ C†, then Hermitian part of the
        // recycled block so rounding cannot break ρ = ρ†.
        for i in 0..d {
            let ii = i * d + i;
            out[ii] = C64::new(2.0 * out[ii].re, 0.0);
            for j in (i + 1)..d {
                let a = out[i * d + j];
                let b = out[j * d + i];
                let s = a + b.conj();
                out[i * d + j] = s;
                out[j * d + i] = s.conj();
            }
        }
        for r in &self.recycle {
            r.apply(d, rho, out, scratch);
        }
        for i in 0..d {
            let ii = i * d + i;
            out[ii].im = 0.0;
            for j in (i + 1)..d {
                let s = 0.5 * (out[i * d + j] + out[j * d + i].conj());
                out[i * d + j] = s;
                out[j * d + i] = s.conj();
            }
        }
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let mut out = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        self.apply_into(rho.as_slice(), &mut out);
        Operator::from_row_major(self.dim, out)
    }
}
