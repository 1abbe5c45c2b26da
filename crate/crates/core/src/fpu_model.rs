//! FPU chain with one end attached to a wall and the other free.
//!
//! Particles are indexed `0..N`; particle `i` is `q_{i+1}` in one-based notation.
//! Bond `j` sits to the left of particle `j`: `b_0 = -q_0`,
//! `b_j = q_{j-1} - q_j`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpuParams {
    pub n_particles: usize,
    pub alpha: f64,
    pub beta: f64,
    pub temperature: f64,
}

impl FpuParams {
    pub fn new(n_particles: usize, alpha: f64, beta: f64, temperature: f64) -> Result<Self> {
        let p = Self {
            n_particles,
            alpha,
            beta,
            temperature,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `N >= 1`, `T > 0` and `beta >= 0`.
    ///
    /// `beta = 0` is accepted only together with `alpha = 0` (the harmonic
    /// chain); otherwise the Gibbs weight is not normalizable.
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParams("n_particles must be at least 1".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParams(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::InvalidParams("couplings must be finite".into()));
        }
        if self.beta < 0.0 || (self.beta == 0.0 && self.alpha != 0.0) {
            return Err(Error::InvalidParams(format!(
                "potential with alpha={} beta={} is not bounded below",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn is_harmonic(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }

    /// Spring potential `V(b)`.
    #[inline]
    pub fn potential(&self, b: f64) -> f64 {
        let b2 = b * b;
        b2 * (0.5 + b * self.alpha / 3.0 + b2 * self.beta / 4.0)
    }

    /// Spring force law `V'(b)`.
    #[inline]
    pub fn potential_prime(&self, b: f64) -> f64 {
        b * (1.0 + b * (self.alpha + b * self.beta))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub bonds: Vec<f64>,
}

impl PhasePoint {
    pub fn zero(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            p: vec![0.0; n],
            bonds: vec![0.0; n],
        }
    }

    pub fn from_qp(q: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(q.len(), p.len());
        let bonds = bonds_from_positions(&q);
        Self { q, p, bonds }
    }

    pub fn from_bonds(bonds: Vec<f64>, p: Vec<f64>) -> Self {
        assert_eq!(bonds.len(), p.len());
        let q = positions_from_bonds(&bonds);
        Self { q, p, bonds }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

pub fn bonds_from_positions(q: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    q.iter()
        .map(|&qi| {
            let b = prev - qi;
            prev = qi;
            b
        })
        .collect()
}

pub fn positions_from_bonds(bonds: &[f64]) -> Vec<f64> {
    let mut q = 0.0;
    bonds
        .iter()
        .map(|&b| {
            q -= b;
            q
        })
        .collect()
}

/// Linear coupling matrix: tridiagonal, diagonal `(2, ..., 2, 1)`, off-diagonal `-1`.
pub fn coupling_matrix(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = if i + 1 == n { 1.0 } else { 2.0 };
        if i + 1 < n {
            a[(i, i + 1)] = -1.0;
            a[(i + 1, i)] = -1.0;
        }
    }
    a
}

#[derive(Clone, Debug)]
pub struct ChainModel {
    pub params: FpuParams,
    /// Ascending.
    pub mode_frequencies: Vec<f64>,
    /// Column `k` is the eigenvector of mode `k`.
    pub mode_vectors: DMatrix<f64>,
    pub low_mode_count: usize,
}

pub fn build_chain(params: FpuParams) -> Result<ChainModel> {
    params.validate()?;
    let n = params.n_particles;
    let a = coupling_matrix(n);
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolver("symmetric QR iteration did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut freqs = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let lam = eig.eigenvalues[src];
        if !(lam > 0.0) {
            return Err(Error::EigenSolver(format!("non-positive eigenvalue {lam}")));
        }
        freqs.push(lam.sqrt());
        let mut col = eig.eigenvectors.column(src).clone_owned();
        // Deterministic sign: largest-magnitude component positive.
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(k, &col);
    }
    Ok(ChainModel {
        params,
        mode_frequencies: freqs,
        mode_vectors: vecs,
        low_mode_count: (n / 2 + 1).min(n),
    })
}

impl ChainModel {
    pub fn n(&self) -> usize {
        self.params.n_particles
    }

    pub fn max_frequency(&self) -> f64 {
        *self.mode_frequencies.last().expect("N >= 1")
    }

    /// Number of particles whose kinetic energy enters `K`.
    pub fn half_count(&self) -> usize {
        self.n() / 2
    }

    /// Projection of a configuration-space vector on mode `k`.
    #[inline]
    pub fn project(&self, k: usize, v: &[f64]) -> f64 {
        let col = self.mode_vectors.column(k);
        col.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn forces(&self, bonds: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let left = self.params.potential_prime(bonds[i]);
            let right = if i + 1 < n {
                self.params.potential_prime(bonds[i + 1])
            } else {
                0.0
            };
            out[i] = left - right;
        }
    }
}

pub fn kinetic_energy(x: &PhasePoint) -> f64 {
    x.p.iter().map(|p| 0.5 * p * p).sum()
}

pub fn potential_energy(model: &ChainModel, x: &PhasePoint) -> f64 {
    x.bonds.iter().map(|&b| model.params.potential(b)).sum()
}

pub fn hamiltonian(model: &ChainModel, x: &PhasePoint) -> f64 {
    kinetic_energy(x) + potential_energy(model, x)
}

pub fn mode_energies(model: &ChainModel, x: &PhasePoint) -> Vec<f64> {
    (0..model.n())
        .map(|k| {
            let qk = model.project(k, &x.q);
            let pk = model.project(k, &x.p);
            let w = model.mode_frequencies[k];
            0.5 * (pk * pk + w * w * qk * qk)
        })
        .collect()
}

/// Energy per particle held by the `low_mode_count` lowest modes.
pub fn observable_e(model: &ChainModel, x: &PhasePoint) -> f64 {
    let s: f64 = (0..model.low_mode_count)
        .map(|k| {
            let qk = model.project(k, &x.q);
            let pk = model.project(k, &x.p);
            let w = model.mode_frequencies[k];
            0.5 * (pk * pk + w * w * qk * qk)
        })
        .sum();
    s / model.n() as f64
}

/// Kinetic energy of the first `floor(N/2)` particles.
pub fn observable_k(model: &ChainModel, x: &PhasePoint) -> f64 {
    x.p[..model.half_count()].iter().map(|p| 0.5 * p * p).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCoeffs {
    pub lambda_e: f64,
    pub lambda_k: f64,
    pub sample_size: usize,
}

pub fn observable_etilde(model: &ChainModel, x: &PhasePoint, proj: &ProjectionCoeffs) -> f64 {
    observable_e(model, x) - proj.lambda_e * hamiltonian(model, x)
}

pub fn observable_ktilde(model: &ChainModel, x: &PhasePoint, proj: &ProjectionCoeffs) -> f64 {
    observable_k(model, x) - proj.lambda_k * hamiltonian(model, x)
}
