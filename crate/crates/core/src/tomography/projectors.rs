use nalgebra::DMatrix;
use num_complex::Complex64;

use super::histogram::BinEdges;
use super::state::FockDensityMatrix;
use crate::error::{Error, Result};
use crate::quad;

/// Largest supported Fock cutoff.
pub const MAX_FOCK: usize = 64;

/// Absolute tolerance of the per-bin overlap integrals.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Floor applied to predicted bin probabilities.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// `ψ_n(x) = ⟨x|n⟩` for the quadrature `X = a + a†` (vacuum variance 1).
pub fn quadrature_wavefunction(n: usize, x: f64) -> Result<f64> {
    if n >= MAX_FOCK {
        return Err(Error::Cutoff {
            have: MAX_FOCK,
            required: n + 1,
        });
    }
    let mut out = [0.0; MAX_FOCK];
    fill_wavefunctions(x, &mut out[..=n]);
    Ok(out[n])
}

/// Writes `ψ_0(x) … ψ_{len-1}(x)` into `out` by the upward recurrence
/// `√(n+1) ψ_{n+1} = x ψ_n − √n ψ_{n−1}`.
pub fn fill_wavefunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (2.0 * std::f64::consts::PI).powf(-0.25) * (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

/// Index of `(m, n)`, `m ≤ n`, in packed upper-triangular storage.
#[inline]
fn packed(m: usize, n: usize, dim: usize) -> usize {
    m * dim - m * (m + 1) / 2 + n
}

/// Bin projectors `Π_{θ,j}` for every phase and bin.
///
/// Only the real overlap integrals `I_{mn,j} = ∫_{x_j}^{x_{j+1}} ψ_m ψ_n dx` are
/// stored; `⟨m|Π_{θ,j}|n⟩ = e^{i(n−m)θ} I_{mn,j}` is formed on demand.
///
/// Outcome `j = bin_count()` is the complement `1 − Σ_j Π_{θ,j}` (a sample
/// outside the edge range), which makes each phase's outcomes a complete POVM
/// on the truncated space.
#[derive(Debug, Clone)]
pub struct ProjectorSet {
    phases: Vec<f64>,
    edges: BinEdges,
    dim: usize,
    /// Per bin, packed upper triangle of `I_{mn,j}`.
    integrals: Vec<Vec<f64>>,
}

/// Computes the overlap integrals for every bin.
pub fn build_projectors(phases: &[f64], edges: &BinEdges, n_fock: usize) -> Result<ProjectorSet> {
    if phases.is_empty() {
        return Err(Error::param("projector set needs at least one phase"));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::param("non-finite phase"));
    }
    if !(2..=MAX_FOCK).contains(&n_fock) {
        return Err(Error::param(format!("N_Fock must be in [2, {MAX_FOCK}], got {n_fock}")));
    }
    let dim = n_fock;
    let packed_len = dim * (dim + 1) / 2;
    let mut psi = vec![0.0; dim];
    let mut integrals = Vec::with_capacity(edges.bin_count());
    for j in 0..edges.bin_count() {
        let (lo, hi) = edges.bin(j);
        let v = quad::integrate_vec(
            |x, out| {
                fill_wavefunctions(x, &mut psi);
                for m in 0..dim {
                    for n in m..dim {
                        out[packed(m, n, dim)] = psi[m] * psi[n];
                    }
                }
            },
            lo,
            hi,
            packed_len,
            PROJECTOR_TOL,
        )
        .map_err(|e| Error::Numerical(format!("overlap integrals (m, n < {dim}) of bin {j} [{lo}, {hi}]: {e}")))?;
        integrals.push(v);
    }
    let mut complement = vec![0.0; packed_len];
    for m in 0..dim {
        for n in m..dim {
            let inside: f64 = integrals.iter().map(|v| v[packed(m, n, dim)]).sum();
            complement[packed(m, n, dim)] = if m == n { 1.0 - inside } else { -inside };
        }
    }
    integrals.push(complement);
    Ok(ProjectorSet {
        phases: phases.to_vec(),
        edges: edges.clone(),
        dim,
        integrals,
    })
}

impl ProjectorSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn edges(&self) -> &BinEdges {
        &self.edges
    }

    pub fn bin_count(&self) -> usize {
        self.integrals.len() - 1
    }

    /// Bins plus the out-of-range complement.
    pub fn outcome_count(&self) -> usize {
        self.integrals.len()
    }

    /// `I_{mn,j}`; `j = bin_count()` gives the complement.
    pub fn overlap(&self, j: usize, m: usize, n: usize) -> f64 {
        let (a, b) = if m <= n { (m, n) } else { (n, m) };
        self.integrals[j][packed(a, b, self.dim)]
    }

    /// Dense `⟨m|Π_{θ,j}|n⟩` for phase index `k` and outcome `j`.
    pub fn projector(&self, k: usize, j: usize) -> DMatrix<Complex64> {
        let theta = self.phases[k];
        DMatrix::from_fn(self.dim, self.dim, |m, n| {
            Complex64::from_polar(self.overlap(j, m, n), (n as f64 - m as f64) * theta)
        })
    }

    /// `Σ_j Π_{θ,j}` (phase independent, real).
    pub fn bin_sum(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |m, n| {
            (0..self.bin_count()).map(|j| self.overlap(j, m, n)).sum()
        })
    }

    /// `1 − min_n (Σ_j Π)_{nn}`: probability mass of the worst Fock state outside
    /// the binned range.
    pub fn completeness_deficit(&self) -> f64 {
        let s = self.bin_sum();
        1.0 - (0..self.dim).map(|n| s[(n, n)]).fold(f64::INFINITY, f64::min)
    }

    /// Unclipped `Tr[ρ Π_{θ,j}]` for all outcomes of phase `k`, written into `out`.
    pub(crate) fn phase_probabilities(&self, rho: &DMatrix<Complex64>, k: usize, out: &mut [f64]) {
        let dim = self.dim;
        let theta = self.phases[k];
        // Tr[ρΠ] = Σ_{m,n} I_mn Re(ρ_nm e^{i(n−m)θ}); the summand is symmetric in (m, n).
        let mut rot = vec![0.0; dim * (dim + 1) / 2];
        for m in 0..dim {
            for n in m..dim {
                let w = if m == n { 1.0 } else { 2.0 };
                let ph = Complex64::from_polar(1.0, (n as f64 - m as f64) * theta);
                rot[packed(m, n, dim)] = w * (rho[(n, m)] * ph).re;
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.integrals[j].iter().zip(&rot).map(|(a, b)| a * b).sum();
        }
    }

    /// Adds `Σ_j c_j Π_{θ,j}` for phase `k` to `acc`.
    pub(crate) fn accumulate(&self, k: usize, coeffs: &[f64], acc: &mut DMatrix<Complex64>) {
        let dim = self.dim;
        let mut s = vec![0.0; dim * (dim + 1) / 2];
        for (c, ints) in coeffs.iter().zip(&self.integrals) {
            if *c != 0.0 {
                for (a, b) in s.iter_mut().zip(ints) {
                    *a += c * b;
                }
            }
        }
        let theta = self.phases[k];
        for m in 0..dim {
            for n in m..dim {
                let v = Complex64::from_polar(s[packed(m, n, dim)], (n as f64 - m as f64) * theta);
                acc[(m, n)] += v;
                if m != n {
                    acc[(n, m)] += v.conj();
                }
            }
        }
    }

    /// Clipped predicted probabilities `pr_ρ(θ, j)` for every phase and outcome.
    pub fn probabilities(&self, rho: &FockDensityMatrix) -> Result<Vec<Vec<f64>>> {
        self.check_dim(rho)?;
        let mut out = vec![vec![0.0; self.outcome_count()]; self.phases.len()];
        for (k, row) in out.iter_mut().enumerate() {
            self.phase_probabilities(rho.matrix(), k, row);
            row.iter_mut().for_each(|p| *p = p.clamp(PROBABILITY_FLOOR, 1.0));
        }
        Ok(out)
    }

    pub(crate) fn check_dim(&self, rho: &FockDensityMatrix) -> Result<()> {
        if rho.dim() != self.dim {
            return Err(Error::Cutoff {
                have: self.dim,
                required: rho.dim(),
            });
        }
        Ok(())
    }
}

/// `Tr[ρ Π]` clipped to `[1e-12, 1]`.
pub fn predicted_probability(rho: &FockDensityMatrix, projector: &DMatrix<Complex64>) -> f64 {
    let p = (rho.matrix() * projector).trace().re;
    p.clamp(PROBABILITY_FLOOR, 1.0)
}
