use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::filter::FilterSpec;
use crate::phase_space::{integrated_negativity, single_photon_negativity, wigner_from_density_matrix, GridSpec};
use crate::tls::{regression_correlation_series, two_time_correlation, SystemParams};
use crate::tomography::synthetic::synthetic_samples;
use crate::tomography::{
    bin_samples, build_projectors, mle_reconstruct_with, theta_from_lo_phase, BinEdges, FockDensityMatrix,
    Frequencies, MleOptions, OverflowPolicy,
};
use crate::trajectory::{batch_samples, equally_spaced_phases, step_sme, BatchConfig, ConditionedState, TrajectoryConfig};

const SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            expected,
            tolerance,
            passed: (value - expected).abs() <= tolerance,
        }
    }

    /// Passes when `value < bound`.
    fn below(name: &'static str, value: f64, bound: f64) -> Self {
        Self {
            name,
            value,
            expected: 0.0,
            tolerance: bound,
            passed: value < bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<34} {:>14} {:>14} {:>10}  result", "check", "value", "expected", "tol")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<34} {:>14.6e} {:>14.6e} {:>10.1e}  {}",
                c.name,
                c.value,
                c.expected,
                c.tolerance,
                if c.passed { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Variance of filtered quadratures of the undriven emitter (vacuum output).
fn vacuum_variance() -> Result<Check> {
    let p = SystemParams::new(1.0, 0.0)?;
    let cfg = BatchConfig::new(p, 4, 500, SEED);
    let f = FilterSpec::boxcar(cfg.t0, 1.0)?;
    let xs: Vec<f64> = batch_samples(&cfg, &f)?.iter().map(|s| s.value).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // About five standard errors of a unit-variance estimate from 2000 samples.
    Ok(Check::new("vacuum quadrature variance", var, 1.0, 0.15))
}

/// Record drift of a state with `⟨σ₋⟩ = c` against `2|β| cos(φ − arg β)`,
/// `β = √γ c`, and against the tomography mean `2|β| cos(θ + arg β)` at `θ = −φ`.
fn trajectory_phase() -> Result<Check> {
    let gamma: f64 = 1.0;
    let c = Complex64::from_polar(0.3, PI / 3.0);
    let rho = ConditionedState::from_matrix(Matrix2::new(
        Complex64::new(0.5, 0.0),
        c.conj(),
        c,
        Complex64::new(0.5, 0.0),
    ))?;
    let beta = gamma.sqrt() * c;
    let mut worst: f64 = 0.0;
    for phi in equally_spaced_phases(12) {
        let cfg = TrajectoryConfig::new(SystemParams::new(gamma, 0.0)?, phi, SEED);
        let (_, dj) = step_sme(&rho, &cfg, 0.0)?;
        let rate = dj / cfg.dt;
        let lo = 2.0 * beta.norm() * (phi - beta.arg()).cos();
        let theta = theta_from_lo_phase(phi);
        let tomo = 2.0 * beta.norm() * (theta + beta.arg()).cos();
        worst = worst.max((rate - lo).abs()).max((rate - tomo).abs());
    }
    Ok(Check::below("record drift phase (LO and theta)", worst, 1e-12))
}

/// Synthetic coherent-state data: per-phase means and the reconstructed `⟨a⟩`.
fn tomography_phase() -> Result<Vec<Check>> {
    let alpha = Complex64::from_polar(0.8, PI / 3.0);
    let n_fock = 8;
    let truth = FockDensityMatrix::coherent(alpha, n_fock)?;
    let thetas = equally_spaced_phases(12);
    let per_phase = 2000;
    let samples = synthetic_samples(&truth, &thetas, per_phase, SEED)?;
    let mut worst_z: f64 = 0.0;
    for (k, &theta) in thetas.iter().enumerate() {
        let xs: Vec<f64> = samples.iter().filter(|s| s.phase_index == k).map(|s| s.value).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let expected = 2.0 * alpha.norm() * (theta + alpha.arg()).cos();
        worst_z = worst_z.max((mean - expected).abs() * (per_phase as f64).sqrt());
    }
    let edges = BinEdges::for_cutoff(n_fock)?;
    let hist = bin_samples(&samples, &edges, &thetas, OverflowPolicy::Tally)?;
    let projectors = build_projectors(&thetas, &edges, n_fock)?;
    let (rho, _) = mle_reconstruct_with(&Frequencies::from_histogram(&hist)?, &projectors, &MleOptions::default(), None)?;
    let err = (rho.mean_amplitude() - alpha).norm();
    Ok(vec![
        Check::below("coherent sample means (max z)", worst_z, 4.5),
        Check::below("coherent <a> after MLE", err, 0.05),
    ])
}

fn single_photon() -> Result<Check> {
    let grid = wigner_from_density_matrix(&FockDensityMatrix::fock(1, 2)?, &GridSpec::default())?;
    let n = integrated_negativity(&grid)?.n;
    Ok(Check::new("N of |1> by grid quadrature", n, single_photon_negativity(), 1e-3))
}

fn completeness() -> Result<Check> {
    let p = build_projectors(&equally_spaced_phases(12), &BinEdges::for_cutoff(8)?, 8)?;
    Ok(Check::below("projector completeness N_Fock=8", p.completeness_deficit(), 1e-3))
}

fn correlation() -> Result<Check> {
    let delays: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let mut worst: f64 = 0.0;
    for omega in [0.2, (1.0f64 / 8.0).sqrt(), 0.5, 0.8] {
        let p = SystemParams::new(1.0, omega)?;
        for (&t, r) in delays.iter().zip(regression_correlation_series(&p, &delays)?) {
            worst = worst.max((two_time_correlation(&p, t)?.sigma_correlation - r).norm());
        }
    }
    Ok(Check::below("correlation closed form vs ODE", worst, 1e-8))
}

/// Convention self-tests: vacuum variance, coherent-signal phase on both the
/// record and the tomography side, `𝒩_{|1⟩}`, projector completeness and the
/// correlation closed form.
pub fn run_selftest() -> Result<SelftestReport> {
    let mut checks = vec![vacuum_variance()?, trajectory_phase()?];
    checks.extend(tomography_phase()?);
    checks.push(single_photon()?);
    checks.push(completeness()?);
    checks.push(correlation()?);
    Ok(SelftestReport { checks })
}
