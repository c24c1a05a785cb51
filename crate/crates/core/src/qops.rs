//! Composite Hilbert space of two ions sharing one motional mode.
//!
//! Basis ordering is `ion1 ⊗ ion2 ⊗ motion`: the flat index of
//! `|a b⟩ ⊗ |n⟩` is `(a * L + b) * N + n` with `L` internal levels per ion and
//! `N` retained Fock states.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Internal level of a single ion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Ground,
    Excited,
    /// Short-lived level, present only in the three-level model.
    Temporary,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
            Level::Temporary => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ion {
    One,
    Two,
}

/// Single-ion operators that can be embedded in the composite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IonOp {
    /// `|g⟩⟨e|`
    SigmaMinus,
    /// `|e⟩⟨g|`
    SigmaPlus,
    /// `|g⟩⟨g|`
    ProjGround,
    /// `|g⟩⟨t|`, decay out of the temporary level.
    TempDecay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpec {
    internal_levels: usize,
    n_motional: usize,
}

impl HilbertSpec {
    pub const DEFAULT_MOTIONAL: usize = 20;

    pub fn new(internal_levels: usize, n_motional: usize) -> Result<Self> {
        if !(internal_levels == 2 || internal_levels == 3) {
            return Err(Error::InvalidHilbert(format!(
                "internal_levels must be 2 or 3, got {internal_levels}"
            )));
        }
        if n_motional < 2 {
            return Err(Error::InvalidHilbert(format!(
                "n_motional must be at least 2, got {n_motional}"
            )));
        }
        Ok(Self { internal_levels, n_motional })
    }

    /// Two internal levels (`|g⟩`, `|e⟩`), used by the eliminated model.
    pub fn two_level(n_motional: usize) -> Result<Self> {
        Self::new(2, n_motional)
    }

    /// Three internal levels (`|g⟩`, `|e⟩`, `|t⟩`), used by the full model.
    pub fn three_level(n_motional: usize) -> Result<Self> {
        Self::new(3, n_motional)
    }

    pub fn internal_levels(&self) -> usize {
        self.internal_levels
    }

    pub fn n_motional(&self) -> usize {
        self.n_motional
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_levels * self.internal_levels
    }

    pub fn dim(&self) -> usize {
        self.internal_dim() * self.n_motional
    }

    pub fn index(&self, ion1: Level, ion2: Level, n: usize) -> usize {
        debug_assert!(n < self.n_motional);
        (ion1.index() * self.internal_levels + ion2.index()) * self.n_motional + n
    }

    /// Basis ket `|ion1 ion2⟩ ⊗ |n⟩`.
    pub fn ket(&self, ion1: Level, ion2: Level, n: usize) -> Result<Vec<C64>> {
        self.check_level(ion1)?;
        self.check_level(ion2)?;
        if n >= self.n_motional {
            return Err(Error::InvalidHilbert(format!(
                "Fock state {n} outside truncation {}",
                self.n_motional
            )));
        }
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[self.index(ion1, ion2, n)] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// `(|ge⟩ - |eg⟩)/√2 ⊗ |n⟩`
    pub fn antisymmetric_bell(&self, n: usize) -> Result<Vec<C64>> {
        bell(self, n, -1.0)
    }

    /// `(|ge⟩ + |eg⟩)/√2 ⊗ |n⟩`
    pub fn symmetric_bell(&self, n: usize) -> Result<Vec<C64>> {
        bell(self, n, 1.0)
    }

    fn check_level(&self, level: Level) -> Result<()> {
        if level.index() >= self.internal_levels {
            return Err(Error::LevelMismatch {
                expected: 3,
                found: self.internal_levels,
            });
        }
        Ok(())
    }
}

fn bell(spec: &HilbertSpec, n: usize, sign: f64) -> Result<Vec<C64>> {
    let mut v = spec.ket(Level::Ground, Level::Excited, n)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[spec.index(Level::Ground, Level::Excited, n)] = C64::new(s, 0.0);
    v[spec.index(Level::Excited, Level::Ground, n)] = C64::new(sign * s, 0.0);
    Ok(v)
}

/// Dense complex square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.3}{:+.3}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Wraps row-major data; panics if the length is not a perfect square of `dim`.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), dim * dim, "operator data length mismatch");
        Self { dim, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |i, j| {
            assert_eq!(rows[i].len(), dim, "matrix must be square");
            C64::new(rows[i][j], 0.0)
        })
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// `|ket⟩⟨bra|`
    pub fn outer(ket: &[C64], bra: &[C64]) -> Self {
        assert_eq!(ket.len(), bra.len());
        Self::from_fn(ket.len(), |i, j| ket[i] * bra[j].conj())
    }

    pub fn projector(ket: &[C64]) -> Self {
        Self::outer(ket, ket)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `AB - BA`
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖A - A†‖_F ≤ tol · max(1, ‖A‖_F)`
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * self.frobenius_norm().max(1.0)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|z| z.norm_sqr() > 0.0).count()
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Expectation value `⟨v|A|v⟩`.
    pub fn expectation(&self, v: &[C64]) -> C64 {
        let av = self.matvec(v);
        v.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row_b = &rhs.data[k * n..(k + 1) * n];
                let row_o = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in row_o.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (da, db) = (a.dim, b.dim);
    let n = da * db;
    let mut out = Operator::zeros(n);
    for ia in 0..da {
        for ja in 0..da {
            let x = a[(ia, ja)];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for ib in 0..db {
                let row = (ia * db + ib) * n + ja * db;
                for jb in 0..db {
                    out.data[row + jb] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Truncated bosonic annihilation operator on `n` Fock states.
pub fn annihilation(n: usize) -> Result<Operator> {
    if n < 2 {
        return Err(Error::InvalidHilbert(format!(
            "motional truncation must be at least 2, got {n}"
        )));
    }
    let mut a = Operator::zeros(n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Ok(a)
}

fn single_ion(levels: usize, op: IonOp) -> Result<Operator> {
    let (g, e, t) = (Level::Ground.index(), Level::Excited.index(), Level::Temporary.index());
    let mut m = Operator::zeros(levels);
    let one = C64::new(1.0, 0.0);
    match op {
        IonOp::SigmaMinus => m[(g, e)] = one,
        IonOp::SigmaPlus => m[(e, g)] = one,
        IonOp::ProjGround => m[(g, g)] = one,
        IonOp::TempDecay => {
            if levels < 3 {
                return Err(Error::LevelMismatch { expected: 3, found: levels });
            }
            m[(g, t)] = one;
        }
    }
    Ok(m)
}

/// Single-ion operator acting on `ion`, identity on the other ion and the mode.
pub fn embed_ion_op(spec: &HilbertSpec, ion: Ion, op: IonOp) -> Result<Operator> {
    let levels = spec.internal_levels();
    let local = single_ion(levels, op)?;
    let id_ion = Operator::identity(levels);
    let id_mode = Operator::identity(spec.n_motional());
    let internal = match ion {
        Ion::One => kron(&local, &id_ion),
        Ion::Two => kron(&id_ion, &local),
    };
    Ok(kron(&internal, &id_mode))
}

/// Motional operator embedded as `I ⊗ I ⊗ op`.
pub fn embed_mode_op(spec: &HilbertSpec, op: &Operator) -> Result<Operator> {
    if op.dim() != spec.n_motional() {
        return Err(Error::InvalidHilbert(format!(
            "mode operator has dimension {}, expected {}",
            op.dim(),
            spec.n_motional()
        )));
    }
    Ok(kron(&Operator::identity(spec.internal_dim()), op))
}

/// Embedded mode annihilation operator `a`.
pub fn mode_annihilation(spec: &HilbertSpec) -> Operator {
    // n_motional >= 2 is enforced by HilbertSpec
    embed_mode_op(spec, &annihilation(spec.n_motional()).expect("valid truncation"))
        .expect("matching dimension")
}

/// Embedded number operator `a†a`.
pub fn number_operator(spec: &HilbertSpec) -> Operator {
    let n: Vec<C64> = (0..spec.n_motional()).map(|k| C64::new(k as f64, 0.0)).collect();
    embed_mode_op(spec, &Operator::diagonal(&n)).expect("matching dimension")
}

/// Collective lowering operator `J₋ = σ₋¹ + σ₋²`.
pub fn collective_lowering(spec: &HilbertSpec) -> Operator {
    let s1 = embed_ion_op(spec, Ion::One, IonOp::SigmaMinus).expect("always defined");
    let s2 = embed_ion_op(spec, Ion::Two, IonOp::SigmaMinus).expect("always defined");
    &s1 + &s2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        assert_eq!(kron(&Operator::identity(2), &Operator::identity(3)), Operator::identity(6));
    }

    #[test]
    fn kron_acts_locally() {
        let sz = Operator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let op = kron(&sz, &Operator::identity(2));
        // basis |e⟩⊗|g⟩ = index 2
        let mut v = vec![c(0.0); 4];
        v[2] = c(1.0);
        let w = op.matvec(&v);
        assert_eq!(w[2], c(-1.0));
        assert!(w.iter().enumerate().all(|(i, z)| i == 2 || z.norm() == 0.0));
    }

    #[test]
    fn annihilation_small_case() {
        let a = annihilation(2).unwrap();
        assert_eq!(a, Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]));
        assert!(annihilation(1).is_err());
    }

    #[test]
    fn number_operator_diagonal() {
        let a = annihilation(6).unwrap();
        let n = &a.adjoint() * &a;
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert!((n[(i, j)] - c(want)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn canonical_commutator_truncation_defect() {
        // [a, a†] = I except the top entry, which is 1 - N.
        let n = 7;
        let a = annihilation(n).unwrap();
        let comm = a.commutator(&a.adjoint());
        for i in 0..n {
            for j in 0..n {
                let want = match (i == j, i == n - 1) {
                    (true, false) => 1.0,
                    (true, true) => -((n - 1) as f64),
                    _ => 0.0,
                };
                assert!((comm[(i, j)] - c(want)).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn ladder_action_on_ions() {
        let spec = HilbertSpec::two_level(3).unwrap();
        let s1 = embed_ion_op(&spec, Ion::One, IonOp::SigmaMinus).unwrap();
        let eg = spec.ket(Level::Excited, Level::Ground, 0).unwrap();
        let ge = spec.ket(Level::Ground, Level::Excited, 0).unwrap();
        let gg = spec.ket(Level::Ground, Level::Ground, 0).unwrap();
        assert_eq!(s1.matvec(&eg), gg);
        assert!(s1.matvec(&ge).iter().all(|z| z.norm() == 0.0));

        let p1 = embed_ion_op(&spec, Ion::One, IonOp::ProjGround).unwrap();
        assert_eq!(p1.expectation(&ge), c(1.0));
    }

    #[test]
    fn temp_decay_requires_three_levels() {
        let two = HilbertSpec::two_level(3).unwrap();
        assert!(matches!(
            embed_ion_op(&two, Ion::One, IonOp::TempDecay),
            Err(Error::LevelMismatch { .. })
        ));
        let three = HilbertSpec::three_level(3).unwrap();
        let b2 = embed_ion_op(&three, Ion::Two, IonOp::TempDecay).unwrap();
        let gt = three.ket(Level::Ground, Level::Temporary, 1).unwrap();
        let gg = three.ket(Level::Ground, Level::Ground, 1).unwrap();
        assert_eq!(b2.matvec(&gt), gg);
    }

    #[test]
    fn carrier_drive_cancels_on_antisymmetric_bell() {
        for spec in [HilbertSpec::two_level(4).unwrap(), HilbertSpec::three_level(4).unwrap()] {
            let jm = collective_lowering(&spec);
            let drive = &jm + &jm.adjoint();
            let psi = spec.antisymmetric_bell(0).unwrap();
            let out = drive.matvec(&psi);
            assert!(out.iter().all(|z| z.norm() < 1e-15));
            assert!(drive.expectation(&psi).norm() < 1e-15);
        }
    }

    #[test]
    fn hilbert_spec_validation() {
        assert!(HilbertSpec::new(4, 20).is_err());
        assert!(HilbertSpec::new(2, 1).is_err());
        let s = HilbertSpec::new(3, 20).unwrap();
        assert_eq!(s.dim(), 180);
    }

    #[test]
    fn ladder_sparsity_patterns() {
        let spec = HilbertSpec::two_level(5).unwrap();
        let a = mode_annihilation(&spec);
        // a only connects n -> n-1 within the same internal state
        for i in 0..spec.dim() {
            for j in 0..spec.dim() {
                if a[(i, j)].norm() != 0.0 {
                    assert_eq!(j, i + 1);
                    assert_eq!(i / 5, j / 5);
                }
            }
        }
        let s2 = embed_ion_op(&spec, Ion::Two, IonOp::SigmaMinus).unwrap();
        for i in 0..spec.dim() {
            for j in 0..spec.dim() {
                if s2[(i, j)].norm() != 0.0 {
                    // ion 2 excited -> ground keeps ion 1 and n; stride N
                    assert_eq!(j, i + 5);
                }
            }
        }
    }
}
