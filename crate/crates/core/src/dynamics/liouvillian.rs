//! Lindblad generator as a dense superoperator on column-stacked ρ.
//!
//! `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`, so
//!
//! ```text
//! L = −i(I⊗H − Hᵀ⊗I) + Σ_c r_c [ c̄⊗c − ½ I⊗c†c − ½ (c†c)ᵀ⊗I ]
//! ```
//!
//! which is the matrix form of `−i[H,ρ] + Σ_c r_c D[c]ρ` with
//! `D[o]ρ = (2oρo† − ρo†o − o†oρ)/2`.

use ndarray::{Array1, Array2, ShapeBuilder};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::Result;
use crate::hilbert::{fock_annihilation, tls_operator, Operator, SpaceDims, TlsKind};
use crate::model::{build_h_i, ModelParams};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Cavity,
    Tls,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::Cavity => "cavity",
            Channel::Tls => "tls",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub channel: Channel,
    pub rate: f64,
    pub op: Operator,
}

/// Compressed sparse rows, only used for fast matrix-vector products.
#[derive(Clone, Debug)]
struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &Array2<C64>) -> Self {
        let mut indptr = Vec::with_capacity(m.nrows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.rows() {
            for (j, v) in row.iter().enumerate() {
                if *v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(*v);
                }
            }
            indptr.push(indices.len());
        }
        Self { indptr, indices, values }
    }

    /// Rows and columns restricted to `keep` (ascending), renumbered.
    fn restrict(&self, keep: &[usize], n: usize) -> Self {
        let mut map = vec![usize::MAX; n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut indptr = Vec::with_capacity(keep.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &i in keep {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = map[self.indices[k]];
                if j != usize::MAX {
                    indices.push(j);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        Self { indptr, indices, values }
    }

    fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Liouvillian {
    dims: SpaceDims,
    hamiltonian: Operator,
    channels: Vec<CollapseChannel>,
    matrix: Array2<C64>,
    sparse: Csr,
    /// Connected component of every `vec(ρ)` index in the coupling graph.
    component: Vec<usize>,
}

/// Invariant subspace of `L` spanned by whole connected components.
#[derive(Clone, Debug)]
pub struct Block {
    indices: Vec<usize>,
    sparse: Csr,
}

impl Block {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn gather(&self, x: &Array1<C64>) -> Array1<C64> {
        self.indices.iter().map(|&k| x[k]).collect()
    }

    pub fn scatter(&self, y: &Array1<C64>, n: usize) -> Array1<C64> {
        let mut x = Array1::zeros(n);
        for (v, &k) in y.iter().zip(&self.indices) {
            x[k] = *v;
        }
        x
    }

    pub fn apply_vec(&self, x: &Array1<C64>, y: &mut Array1<C64>) {
        self.sparse.matvec(
            x.as_slice().expect("contiguous"),
            y.as_slice_mut().expect("contiguous"),
        );
    }
}

fn connected_components(a: &Csr) -> Vec<usize> {
    let n = a.indptr.len() - 1;
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for i in 0..n {
        for &j in &a.indices[a.indptr[i]..a.indptr[i + 1]] {
            let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    (0..n).map(|k| root(&mut parent, k)).collect()
}

/// Column-stacking `vec(ρ)`.
pub fn vectorize(rho: &Array2<C64>) -> Array1<C64> {
    rho.t().iter().cloned().collect()
}

pub fn unvectorize(v: &Array1<C64>, d: usize) -> Array2<C64> {
    Array2::from_shape_vec((d, d).f(), v.to_vec()).expect("length d² vector")
}

impl Liouvillian {
    pub fn new(hamiltonian: Operator, channels: Vec<CollapseChannel>) -> Self {
        let dims = hamiltonian.dims();
        let d = dims.total_dim();
        let mut matrix = Array2::<C64>::zeros((d * d, d * d));
        let idx = |i: usize, j: usize| i + j * d;
        // Left and right multiplication: Aρ ↦ I⊗A and ρB ↦ Bᵀ⊗I.
        let left = |m: &mut Array2<C64>, a: &Array2<C64>, f: C64| {
            for ((i, k), v) in a.indexed_iter().filter(|(_, v)| **v != C64::new(0.0, 0.0)) {
                for j in 0..d {
                    m[[idx(i, j), idx(k, j)]] += f * v;
                }
            }
        };
        let right = |m: &mut Array2<C64>, b: &Array2<C64>, f: C64| {
            for ((l, j), v) in b.indexed_iter().filter(|(_, v)| **v != C64::new(0.0, 0.0)) {
                for i in 0..d {
                    m[[idx(i, j), idx(i, l)]] += f * v;
                }
            }
        };
        let h = hamiltonian.matrix();
        left(&mut matrix, h, C64::new(0.0, -1.0));
        right(&mut matrix, h, C64::new(0.0, 1.0));
        for ch in channels.iter().filter(|c| c.rate != 0.0) {
            let c = ch.op.matrix();
            let cdc = ch.op.dagger().matmul(&ch.op).expect("same dims").into_matrix();
            let half = C64::new(-0.5 * ch.rate, 0.0);
            left(&mut matrix, &cdc, half);
            right(&mut matrix, &cdc, half);
            // cρc† ↦ c̄⊗c.
            let nz: Vec<((usize, usize), C64)> =
                c.indexed_iter().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(k, v)| (k, *v)).collect();
            for &((i, k), a) in &nz {
                for &((j, l), b) in &nz {
                    matrix[[idx(i, j), idx(k, l)]] += a * b.conj() * ch.rate;
                }
            }
        }
        let sparse = Csr::from_dense(&matrix);
        let component = connected_components(&sparse);
        Self { dims, hamiltonian, channels, matrix, sparse, component }
    }

    /// Smallest union of coupled components containing every index in
    /// `support`. Evolution started inside it never leaves it.
    pub fn block_for(&self, support: impl IntoIterator<Item = usize>) -> Block {
        let mut labels: Vec<usize> = support.into_iter().map(|k| self.component[k]).collect();
        labels.sort_unstable();
        labels.dedup();
        let indices: Vec<usize> = (0..self.component.len())
            .filter(|k| labels.binary_search(&self.component[*k]).is_ok())
            .collect();
        let sparse = self.sparse.restrict(&indices, self.component.len());
        Block { indices, sparse }
    }

    /// Block holding the populations `ρ_kk`.
    pub fn population_block(&self) -> Block {
        let d = self.dims.total_dim();
        self.block_for((0..d).map(|k| k + k * d))
    }

    pub fn dims(&self) -> SpaceDims {
        self.dims
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[CollapseChannel] {
        &self.channels
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn norm_fro(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn rate_scale(&self) -> f64 {
        self.matrix
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn has_dissipation(&self) -> bool {
        self.channels.iter().any(|c| c.rate > 0.0)
    }

    /// `L·vec(ρ)` through the sparse copy of the superoperator.
    pub fn apply_vec(&self, x: &Array1<C64>, y: &mut Array1<C64>) {
        self.sparse.matvec(
            x.as_slice().expect("contiguous"),
            y.as_slice_mut().expect("contiguous"),
        );
    }

    /// `L(ρ)` through the superoperator.
    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        let x = vectorize(rho);
        let mut y = Array1::zeros(x.len());
        self.apply_vec(&x, &mut y);
        unvectorize(&y, self.dims.total_dim())
    }

    /// `L(ρ)` evaluated from commutators and dissipators directly.
    pub fn apply_direct(&self, rho: &Array2<C64>) -> Array2<C64> {
        let h = self.hamiltonian.matrix();
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| z * C64::new(0.0, -1.0));
        for ch in self.channels.iter().filter(|c| c.rate != 0.0) {
            let c = ch.op.matrix();
            let cd = c.t().mapv(|z| z.conj());
            let cdc = cd.dot(c);
            let d = c.dot(rho).dot(&cd).mapv(|z| z * 2.0) - rho.dot(&cdc) - cdc.dot(rho);
            out = out + d.mapv(|z| z * (0.5 * ch.rate));
        }
        out
    }
}

/// Generator of the master equation with cavity decay κ and TLS decay γ.
pub fn build_liouvillian(p: &ModelParams) -> Result<Liouvillian> {
    let h = build_h_i(p)?;
    let channels = vec![
        CollapseChannel { channel: Channel::Cavity, rate: p.kappa, op: fock_annihilation(p.dims) },
        CollapseChannel {
            channel: Channel::Tls,
            rate: p.gamma,
            op: tls_operator(TlsKind::SigmaMinus, p.dims),
        },
    ];
    Ok(Liouvillian::new(h, channels))
}
