//! Inverse-CDF sampling of exact quadrature distributions, used as a test
//! oracle for the reconstruction. Wavefunctions here come from the explicit
//! Hermite sum, not from the recurrence used by the projectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::state::FockDensityMatrix;
use crate::error::{Error, Result};
use crate::trajectory::QuadratureSample;

/// Largest cutoff the explicit Hermite sum is trusted for.
pub const SAMPLER_MAX_FOCK: usize = 20;

const GRID_STEP: f64 = 1e-3;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `H_n(y)` from `Σ_m (−1)^m n! / (m! (n−2m)!) (2y)^{n−2m}`.
fn hermite_sum(n: usize, y: f64) -> f64 {
    (0..=n / 2)
        .map(|m| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n) / (factorial(m) * factorial(n - 2 * m)) * (2.0 * y).powi((n - 2 * m) as i32)
        })
        .sum()
}

fn psi_explicit(n: usize, x: f64) -> f64 {
    (2.0 * std::f64::consts::PI).powf(-0.25) / (2f64.powi(n as i32) * factorial(n)).sqrt()
        * hermite_sum(n, x / std::f64::consts::SQRT_2)
        * (-0.25 * x * x).exp()
}

/// Quadrature density `pr(x|θ) = Σ_{mn} ρ_{mn} e^{i(m−n)θ} ψ_m(x) ψ_n(x)` of
/// `X_θ = a e^{iθ} + a† e^{−iθ}`.
pub fn quadrature_density(rho: &FockDensityMatrix, theta: f64, x: f64) -> f64 {
    let dim = rho.dim();
    let psi: Vec<f64> = (0..dim).map(|n| psi_explicit(n, x)).collect();
    let mut p = 0.0;
    for m in 0..dim {
        for n in 0..dim {
            let ph = num_complex::Complex64::from_polar(1.0, (m as f64 - n as f64) * theta);
            p += (rho.element(m, n) * ph).re * psi[m] * psi[n];
        }
    }
    p
}

/// Tabulated inverse CDF of `pr(x|θ)`.
#[derive(Debug, Clone)]
pub struct QuadratureSampler {
    lo: f64,
    cdf: Vec<f64>,
}

impl QuadratureSampler {
    pub fn new(rho: &FockDensityMatrix, theta: f64) -> Result<Self> {
        if rho.dim() > SAMPLER_MAX_FOCK {
            return Err(Error::Cutoff {
                have: SAMPLER_MAX_FOCK,
                required: rho.dim(),
            });
        }
        let half = 8.0 + 2.0 * (rho.dim() as f64).sqrt();
        let n = (2.0 * half / GRID_STEP).round() as usize;
        let dens: Vec<f64> = (0..=n)
            .map(|i| quadrature_density(rho, theta, -half + i as f64 * GRID_STEP).max(0.0))
            .collect();
        let mut cdf = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in dens.windows(2) {
            acc += 0.5 * (w[0] + w[1]) * GRID_STEP;
            cdf.push(acc);
        }
        if (acc - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!("sampler density integrates to {acc}")));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { lo: -half, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + (i as f64 - 1.0 + frac) * GRID_STEP
    }
}

/// `per_phase` samples of `X_θ` for each `θ` in `thetas`; the samples'
/// `phase` field holds `θ` itself.
pub fn synthetic_samples(
    rho: &FockDensityMatrix,
    thetas: &[f64],
    per_phase: usize,
    seed: u64,
) -> Result<Vec<QuadratureSample>> {
    let mut out = Vec::with_capacity(thetas.len() * per_phase);
    for (k, &theta) in thetas.iter().enumerate() {
        let sampler = QuadratureSampler::new(rho, theta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        for i in 0..per_phase {
            out.push(QuadratureSample {
                phase_index: k,
                phase: theta,
                value: sampler.sample(&mut rng),
                sample_index: i,
                trajectory_id: k as u64,
            });
        }
    }
    Ok(out)
}
