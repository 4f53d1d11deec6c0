//! Operators and states on the truncated space Fock(n_max) ⊗ {|g⟩, |e⟩}.
//!
//! Basis ordering is fixed: the product state |m⟩|s⟩ sits at composite index
//! `2m + s` with `s = 0` for |g⟩ and `s = 1` for |e⟩. Every matrix, vector and
//! serialized dataset in the crate uses this ordering.

use ndarray::{Array1, Array2, Zip};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest Fock cutoff accepted anywhere in the crate. Factorials of the
/// ladder matrix elements stay well inside double precision below it.
pub const MAX_N_MAX: usize = 20;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tls {
    Ground,
    Excited,
}

impl Tls {
    pub fn index(self) -> usize {
        match self {
            Tls::Ground => 0,
            Tls::Excited => 1,
        }
    }

    fn from_index(s: usize) -> Self {
        if s == 0 {
            Tls::Ground
        } else {
            Tls::Excited
        }
    }
}

/// Truncation metadata: Fock levels 0..=n_max times the two TLS levels.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceDims {
    n_max: usize,
}

impl SpaceDims {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidDims("n_max must be at least 1".into()));
        }
        if n_max > MAX_N_MAX {
            return Err(Error::InvalidDims(format!(
                "n_max = {n_max} exceeds the cap of {MAX_N_MAX}"
            )));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn total_dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Composite index of |m⟩|s⟩.
    pub fn index(&self, m: usize, s: Tls) -> usize {
        debug_assert!(m <= self.n_max);
        2 * m + s.index()
    }

    /// Inverse of [`SpaceDims::index`].
    pub fn split(&self, k: usize) -> (usize, Tls) {
        (k / 2, Tls::from_index(k % 2))
    }

    pub fn check(&self, other: &SpaceDims) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                found: other.total_dim(),
            });
        }
        Ok(())
    }
}

/// Dense operator on the truncated product space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: SpaceDims,
    mat: Array2<C64>,
}

impl Operator {
    pub fn from_matrix(dims: SpaceDims, mat: Array2<C64>) -> Result<Self> {
        let d = dims.total_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { dims, mat })
    }

    pub fn zeros(dims: SpaceDims) -> Self {
        let d = dims.total_dim();
        Self { dims, mat: Array2::zeros((d, d)) }
    }

    pub fn identity(dims: SpaceDims) -> Self {
        Self { dims, mat: Array2::eye(dims.total_dim()) }
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[[row, col]]
    }

    pub fn matmul(&self, rhs: &Operator) -> Result<Operator> {
        self.dims.check(&rhs.dims)?;
        Ok(Operator { dims: self.dims, mat: self.mat.dot(&rhs.mat) })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Operator {
        Operator { dims: self.dims, mat: self.mat.t().mapv(|z| z.conj()) }
    }

    /// `[self, rhs] = self·rhs − rhs·self`.
    pub fn commutator(&self, rhs: &Operator) -> Result<Operator> {
        self.dims.check(&rhs.dims)?;
        let mat = self.mat.dot(&rhs.mat) - rhs.mat.dot(&self.mat);
        Ok(Operator { dims: self.dims, mat })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.dims.check(&rhs.dims)?;
        Ok(Operator { dims: self.dims, mat: &self.mat + &rhs.mat })
    }

    pub fn sub(&self, rhs: &Operator) -> Result<Operator> {
        self.dims.check(&rhs.dims)?;
        Ok(Operator { dims: self.dims, mat: &self.mat - &rhs.mat })
    }

    pub fn scale(&self, factor: impl Into<C64>) -> Operator {
        let f = factor.into();
        Operator { dims: self.dims, mat: self.mat.mapv(|z| z * f) }
    }

    pub fn pow(&self, k: u32) -> Operator {
        let mut out = Operator::identity(self.dims);
        for _ in 0..k {
            out.mat = out.mat.dot(&self.mat);
        }
        out
    }

    /// Largest elementwise modulus of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &Operator) -> f64 {
        max_abs_diff(&self.mat, &rhs.mat)
    }

    /// Largest elementwise modulus of `H − H†`.
    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.mat)
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.dims.check(&psi.dims)?;
        Ok(StateVector { dims: self.dims, amps: self.mat.dot(&psi.amps) })
    }

    /// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
    pub fn eigh(&self) -> Result<(Array1<f64>, Array2<C64>)> {
        Ok(self.mat.eigh(UPLO::Upper)?)
    }
}

/// Pure state given by amplitudes `d_{m,s}` in the composite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    dims: SpaceDims,
    amps: Array1<C64>,
}

impl StateVector {
    pub fn from_amplitudes(dims: SpaceDims, amps: Array1<C64>) -> Result<Self> {
        if amps.len() != dims.total_dim() {
            return Err(Error::DimensionMismatch { expected: dims.total_dim(), found: amps.len() });
        }
        Ok(Self { dims, amps })
    }

    /// Bare product state |m⟩|s⟩.
    pub fn basis(dims: SpaceDims, m: usize, s: Tls) -> Result<Self> {
        if m > dims.n_max() {
            return Err(Error::InvalidParameter(format!(
                "Fock index {m} above n_max = {}",
                dims.n_max()
            )));
        }
        let mut amps = Array1::zeros(dims.total_dim());
        amps[dims.index(m, s)] = ONE;
        Ok(Self { dims, amps })
    }

    /// |m⟩ ⊗ (g·|g⟩ + e·|e⟩).
    pub fn product(dims: SpaceDims, m: usize, tls: [C64; 2]) -> Result<Self> {
        let mut psi = Self::basis(dims, m, Tls::Ground)?;
        psi.amps[dims.index(m, Tls::Ground)] = tls[0];
        psi.amps[dims.index(m, Tls::Excited)] = tls[1];
        Ok(psi)
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Array1<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero or non-finite state".into()));
        }
        Ok(Self { dims: self.dims, amps: self.amps.mapv(|z| z / n) })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.dims.check(&other.dims)?;
        Ok(self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-9
    }

    pub fn density(&self) -> DensityMatrix {
        let d = self.dims.total_dim();
        let mut mat = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityMatrix { dims: self.dims, mat }
    }
}

/// Density operator ρ. Construction does not enforce physicality; call
/// [`DensityMatrix::validate`] where the invariants matter.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: SpaceDims,
    mat: Array2<C64>,
}

/// Deviations of a density matrix from the physical invariants.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Physicality {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn from_matrix(dims: SpaceDims, mat: Array2<C64>) -> Result<Self> {
        let op = Operator::from_matrix(dims, mat)?;
        Ok(Self { dims, mat: op.mat })
    }

    /// Incoherent mixture `Σ w_i |ψ_i⟩⟨ψ_i|`.
    pub fn mixture(parts: &[(f64, StateVector)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let dims = first.1.dims;
        let mut mat = Array2::zeros((dims.total_dim(), dims.total_dim()));
        for (w, psi) in parts {
            dims.check(&psi.dims)?;
            mat = mat + psi.density().mat.mapv(|z| z * *w);
        }
        Ok(Self { dims, mat })
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    pub fn physicality(&self) -> Result<Physicality> {
        let hermiticity = hermiticity_error(&self.mat);
        let trace_error = (self.trace() - ONE).norm();
        // Symmetrize before the Hermitian eigensolver.
        let sym = (&self.mat + &self.mat.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let (w, _) = sym.eigh(UPLO::Upper)?;
        let min_eigenvalue = w.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Physicality { hermiticity, trace_error, min_eigenvalue })
    }

    /// Checks Hermiticity, unit trace and positivity against the given limits.
    pub fn validate(&self, herm_tol: f64, trace_tol: f64, eig_floor: f64) -> Result<Physicality> {
        let p = self.physicality()?;
        if p.hermiticity > herm_tol {
            return Err(Error::ToleranceViolation(format!(
                "density matrix not Hermitian (|ρ − ρ†| = {:e})",
                p.hermiticity
            )));
        }
        if p.trace_error > trace_tol {
            return Err(Error::ToleranceViolation(format!(
                "trace deviates from 1 by {:e}",
                p.trace_error
            )));
        }
        if p.min_eigenvalue < -eig_floor {
            return Err(Error::ToleranceViolation(format!(
                "negative eigenvalue {:e}",
                p.min_eigenvalue
            )));
        }
        Ok(p)
    }

    /// Population of the top Fock level, the truncation gauge.
    pub fn tail_population(&self) -> f64 {
        let n = self.dims.n_max();
        let g = self.dims.index(n, Tls::Ground);
        let e = self.dims.index(n, Tls::Excited);
        self.mat[[g, g]].re + self.mat[[e, e]].re
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.dims.check(&other.dims)?;
        let diff = &self.mat - &other.mat;
        let sym = (&diff + &diff.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
        let (w, _) = sym.eigh(UPLO::Upper)?;
        Ok(0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
    }
}

/// Either kind of state, for routines that accept both.
#[derive(Copy, Clone, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(psi: &'a StateVector) -> Self {
        StateRef::Pure(psi)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(rho: &'a DensityMatrix) -> Self {
        StateRef::Mixed(rho)
    }
}

impl StateRef<'_> {
    pub fn dims(&self) -> SpaceDims {
        match self {
            StateRef::Pure(psi) => psi.dims,
            StateRef::Mixed(rho) => rho.dims,
        }
    }
}

/// `a ⊗ I₂` with `⟨m−1|a|m⟩ = √m`.
pub fn fock_annihilation(dims: SpaceDims) -> Operator {
    let mut op = Operator::zeros(dims);
    for m in 1..=dims.n_max() {
        let amp = C64::new((m as f64).sqrt(), 0.0);
        for s in [Tls::Ground, Tls::Excited] {
            op.mat[[dims.index(m - 1, s), dims.index(m, s)]] = amp;
        }
    }
    op
}

pub fn fock_number(dims: SpaceDims) -> Operator {
    let mut op = Operator::zeros(dims);
    for k in 0..dims.total_dim() {
        let (m, _) = dims.split(k);
        op.mat[[k, k]] = C64::new(m as f64, 0.0);
    }
    op
}

/// `|m⟩⟨m| ⊗ I₂`.
pub fn fock_projector(dims: SpaceDims, m: usize) -> Operator {
    let mut op = Operator::zeros(dims);
    if m <= dims.n_max() {
        for s in [Tls::Ground, Tls::Excited] {
            let k = dims.index(m, s);
            op.mat[[k, k]] = ONE;
        }
    }
    op
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TlsKind {
    SigmaMinus,
    SigmaPlus,
    SigmaX,
    SigmaZ,
    ExcitedProjector,
}

impl TlsKind {
    /// The 2×2 matrix in the (g, e) basis.
    fn matrix(self) -> [[C64; 2]; 2] {
        match self {
            TlsKind::SigmaMinus => [[ZERO, ONE], [ZERO, ZERO]],
            TlsKind::SigmaPlus => [[ZERO, ZERO], [ONE, ZERO]],
            TlsKind::SigmaX => [[ZERO, ONE], [ONE, ZERO]],
            TlsKind::SigmaZ => [[-ONE, ZERO], [ZERO, ONE]],
            TlsKind::ExcitedProjector => [[ZERO, ZERO], [ZERO, ONE]],
        }
    }
}

/// `I_Fock ⊗ σ` for the requested TLS operator.
pub fn tls_operator(kind: TlsKind, dims: SpaceDims) -> Operator {
    let small = kind.matrix();
    let mut op = Operator::zeros(dims);
    for m in 0..=dims.n_max() {
        for (r, row) in small.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                op.mat[[2 * m + r, 2 * m + c]] = *v;
            }
        }
    }
    op
}

/// `Tr(op·ρ)` or `⟨ψ|op|ψ⟩`.
pub fn expectation<'a>(op: &Operator, state: impl Into<StateRef<'a>>) -> Result<C64> {
    let state = state.into();
    op.dims.check(&state.dims())?;
    Ok(match state {
        StateRef::Pure(psi) => {
            let v = op.mat.dot(&psi.amps);
            psi.amps.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()
        }
        StateRef::Mixed(rho) => trace_product(&op.mat, &rho.mat),
    })
}

/// `Tr(A·B)` without forming the product.
pub fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let mut acc = ZERO;
    Zip::from(a).and(&b.t()).for_each(|x, y| acc += x * y);
    acc
}

pub(crate) fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a).and(b).for_each(|x, y| m = m.max((x - y).norm()));
    m
}

pub(crate) fn hermiticity_error(a: &Array2<C64>) -> f64 {
    let mut m = 0.0f64;
    Zip::from(a).and(&a.t()).for_each(|x, y| m = m.max((x - y.conj()).norm()));
    m
}
