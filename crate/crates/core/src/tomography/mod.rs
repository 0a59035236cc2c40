//! Maximum-likelihood reconstruction of the filtered-mode density matrix from
//! binned quadrature samples (RρR iteration).
//!
//! Phases are angles `θ` of `X_θ = a e^{iθ} + a† e^{−iθ}`, so
//! `⟨m|Π_{θ,j}|n⟩ = e^{i(n−m)θ} ∫_{x_j}^{x_{j+1}} ψ_m ψ_n dx`. A homodyne record
//! taken at local-oscillator phase `φ` measures `X_θ` with `θ = −φ`.

mod histogram;
mod mle;
mod projectors;
mod state;
pub mod synthetic;

pub use histogram::{bin_samples, BinEdges, OverflowPolicy, QuadratureHistogram, DEFAULT_BINS, DEFAULT_BIN_WIDTH, DEFAULT_RANGE};
pub use mle::{
    mle_reconstruct, mle_reconstruct_with, mle_step, r_operator, r_operator_frequencies, Frequencies, MleOptions,
    MleReport,
};
pub use projectors::{
    build_projectors, fill_wavefunctions, predicted_probability, quadrature_wavefunction, ProjectorSet, MAX_FOCK,
    PROBABILITY_FLOOR, PROJECTOR_TOL,
};
pub use state::{FockDensityMatrix, FockDensityMatrixJson};

/// Quadrature angle measured by a record at local-oscillator phase `φ`,
/// reduced to `[0, 2π)`.
pub fn theta_from_lo_phase(phi: f64) -> f64 {
    (-phi).rem_euclid(2.0 * std::f64::consts::PI)
}
