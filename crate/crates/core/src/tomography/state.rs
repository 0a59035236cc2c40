use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-10;

/// Density matrix in a truncated Fock basis `|0⟩ … |N_Fock - 1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    rho: DMatrix<Complex64>,
}

/// Row-major JSON form: `{"n_fock": N, "re": [...], "im": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockDensityMatrixJson {
    pub n_fock: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FockDensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        let s = Self { rho };
        s.validate()?;
        Ok(s)
    }

    /// Hermitizes, floors negative eigenvalues at zero and renormalizes. Use only
    /// to absorb roundoff; large violations are still reported.
    pub fn from_approximate(rho: DMatrix<Complex64>) -> Result<Self> {
        if !rho.is_square() || rho.nrows() == 0 {
            return Err(Error::param("density matrix must be square and nonempty"));
        }
        let herm = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(herm.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let fixed = if min < 0.0 {
            let floored = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0), 0.0));
            &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.adjoint()
        } else {
            herm
        };
        let tr = fixed.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::Numerical(format!("cannot normalize matrix with trace {tr}")));
        }
        let mut out = fixed / Complex64::new(tr, 0.0);
        for i in 0..out.nrows() {
            out[(i, i)].im = 0.0;
            for j in 0..i {
                let v = 0.5 * (out[(i, j)] + out[(j, i)].conj());
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
        Self::new(out)
    }

    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::Cutoff {
                have: dim,
                required: n + 1,
            });
        }
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(Self { rho })
    }

    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(0, dim)
    }

    /// `1 / N_Fock`.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be >= 1"));
        }
        Ok(Self {
            rho: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d: Vec<Complex64> = populations.iter().map(|&p| Complex64::new(p, 0.0)).collect();
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)))
    }

    /// `|ψ⟩⟨ψ|` for a normalized amplitude vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::new(&v * v.adjoint())
    }

    /// Coherent state `|α⟩` truncated to `dim` levels and renormalized.
    pub fn coherent(alpha: Complex64, dim: usize) -> Result<Self> {
        let mut amps = Vec::with_capacity(dim);
        let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        for n in 0..dim {
            amps.push(c);
            c = c * alpha / ((n + 1) as f64).sqrt();
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = amps.into_iter().map(|a| a / norm).collect();
        Self::pure(&amps)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rho;
        if !r.is_square() || r.nrows() == 0 {
            return Err(Error::param("density matrix must be square and nonempty"));
        }
        let herm = (r - r.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::param(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = r.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::param(format!("density matrix trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -EIGEN_TOL {
            return Err(Error::param(format!("density matrix has eigenvalue {min:e} < 0")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    /// `ρ_nn`; zero beyond the cutoff.
    pub fn population(&self, n: usize) -> f64 {
        if n < self.dim() {
            self.rho[(n, n)].re
        } else {
            0.0
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.population(n)).collect()
    }

    /// `⟨m|ρ|n⟩`.
    pub fn element(&self, m: usize, n: usize) -> Complex64 {
        self.rho[(m, n)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.rho.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean field `⟨a⟩ = Tr[ρ a] = Σ √(n+1) ρ_{n+1,n}`.
    pub fn mean_amplitude(&self) -> Complex64 {
        (0..self.dim().saturating_sub(1))
            .map(|n| ((n + 1) as f64).sqrt() * self.rho[(n + 1, n)])
            .sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.population(n)).sum()
    }

    /// Embed into a larger cutoff (zero padding) or truncate-and-renormalize
    /// into a smaller one.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        let mut out = DMatrix::zeros(dim, dim);
        let k = dim.min(self.dim());
        out.view_mut((0, 0), (k, k)).copy_from(&self.rho.view((0, 0), (k, k)));
        Self::from_approximate(out)
    }

    pub fn to_json(&self) -> FockDensityMatrixJson {
        let n = self.dim();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(self.rho[(i, j)].re);
                im.push(self.rho[(i, j)].im);
            }
        }
        FockDensityMatrixJson { n_fock: n, re, im }
    }

    pub fn from_json(j: &FockDensityMatrixJson) -> Result<Self> {
        let n = j.n_fock;
        if j.re.len() != n * n || j.im.len() != n * n {
            return Err(Error::Data(format!(
                "state JSON has {} / {} entries, expected {}",
                j.re.len(),
                j.im.len(),
                n * n
            )));
        }
        let rho = DMatrix::from_fn(n, n, |i, k| Complex64::new(j.re[i * n + k], j.im[i * n + k]));
        Self::new(rho)
    }
}
