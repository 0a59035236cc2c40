use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifacts;
use super::config::{ExperimentConfig, OmegaSpec};
use crate::error::Result;
use crate::filter::FilterSpec;
use crate::phase_space::{integrated_negativity, purity, wigner_from_density_matrix, NegativityReport, PhaseSpaceGrid};
use crate::tls::{filtered_mean_photon_number, SystemParams};
use crate::tomography::{
    bin_samples, build_projectors, mle_reconstruct_with, theta_from_lo_phase, FockDensityMatrix, Frequencies,
    MleReport, QuadratureHistogram,
};
use crate::trajectory::{batch_samples_multi, BatchConfig, QuadratureSample};

/// Largest population shift tolerated between `N_Fock` and `N_Fock + 2`.
pub const CUTOFF_SHIFT_TOL: f64 = 0.01;

/// Populations reported in summaries.
pub const REPORTED_POPULATIONS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub omega: f64,
    #[serde(rename = "T")]
    pub length: f64,
    pub seed: u64,
    pub config_hash: String,
    pub n_fock: usize,
    pub populations: Vec<f64>,
    pub purity: f64,
    pub negativity: NegativityReport,
    pub wigner_min: f64,
    pub mle: MleReport,
    pub samples: usize,
    pub overflow: u64,
    /// Filtered photon number from the correlation-function oracle.
    pub n_bar_oracle: f64,
    /// Phase-averaged `(⟨x²⟩ − 1)/2` of the raw samples.
    pub n_bar_moment: f64,
    /// `Tr[ρ a†a]` of the reconstruction.
    pub n_bar_state: f64,
    /// Largest population change when the cutoff is raised by two.
    pub cutoff_shift: Option<f64>,
    pub warnings: Vec<String>,
    pub runtime_seconds: f64,
}

impl PointResult {
    pub fn population(&self, n: usize) -> f64 {
        self.populations.get(n).copied().unwrap_or(0.0)
    }
}

/// Everything computed for one `(Ω, T)` point.
#[derive(Debug, Clone)]
pub struct PointAnalysis {
    pub result: PointResult,
    pub histogram: QuadratureHistogram,
    pub state: FockDensityMatrix,
    pub grid: PhaseSpaceGrid,
}

fn batch_config(cfg: &ExperimentConfig, params: SystemParams) -> BatchConfig {
    let t = &cfg.trajectory;
    let mut b = BatchConfig::new(params, t.phases, t.samples_per_phase, t.seed);
    b.dt = t.dt;
    b.substeps = t.substeps;
    b.t0 = cfg.filter.t0;
    b.harvesting = t.harvesting;
    b
}

/// Samples for every filter time in `lengths`, all taken from the same
/// trajectories (the windows share their start `t0`).
pub fn simulate_samples(cfg: &ExperimentConfig, params: SystemParams, lengths: &[f64]) -> Result<Vec<Vec<QuadratureSample>>> {
    let filters: Vec<FilterSpec> = lengths.iter().map(|&t| cfg.filter_spec(t)).collect::<Result<_>>()?;
    batch_samples_multi(&batch_config(cfg, params), &filters)
}

/// `(⟨x²⟩ − 1)/2` averaged over phases.
pub fn moment_photon_number(samples: &[QuadratureSample], phase_count: usize) -> f64 {
    let mut sum = vec![0.0; phase_count];
    let mut n = vec![0usize; phase_count];
    for s in samples {
        sum[s.phase_index] += s.value * s.value;
        n[s.phase_index] += 1;
    }
    let per_phase: Vec<f64> = sum.iter().zip(&n).filter(|(_, &c)| c > 0).map(|(s, &c)| s / c as f64).collect();
    (per_phase.iter().sum::<f64>() / per_phase.len() as f64 - 1.0) / 2.0
}

/// Bins, reconstructs and analyzes samples of one point.
pub fn analyze_samples(
    cfg: &ExperimentConfig,
    params: SystemParams,
    length: f64,
    samples: &[QuadratureSample],
) -> Result<PointAnalysis> {
    let start = Instant::now();
    let filter = cfg.filter_spec(length)?;
    let n_bar_oracle = filtered_mean_photon_number(&params, &filter)?;
    let n_fock = cfg.n_fock_for(length, n_bar_oracle);
    let edges = cfg.edges_for(n_fock)?;
    let lo_phases = batch_config(cfg, params).phases;
    let thetas: Vec<f64> = lo_phases.iter().map(|&p| theta_from_lo_phase(p)).collect();
    let histogram = bin_samples(samples, &edges, &thetas, cfg.tomography.overflow)?;
    let data = Frequencies::from_histogram(&histogram)?;
    let opts = cfg.mle_options();
    let projectors = build_projectors(&thetas, &edges, n_fock)?;
    let (state, mle) = mle_reconstruct_with(&data, &projectors, &opts, None)?;

    let mut warnings = Vec::new();
    if !mle.converged {
        warnings.push(format!(
            "MLE stopped after {} iterations with delta {:e}",
            mle.iterations, mle.final_delta
        ));
    }
    let cutoff_shift = if cfg.tomography.cutoff_check {
        let bigger = build_projectors(&thetas, &edges, n_fock + 2)?;
        let (alt, _) = mle_reconstruct_with(&data, &bigger, &opts, None)?;
        let shift = (0..n_fock + 2)
            .map(|n| (state.population(n) - alt.population(n)).abs())
            .fold(0.0, f64::max);
        if shift > CUTOFF_SHIFT_TOL {
            warnings.push(format!("populations move by {shift:.4} when N_Fock is raised to {}", n_fock + 2));
        }
        Some(shift)
    } else {
        None
    };

    let grid = wigner_from_density_matrix(&state, &cfg.analysis.grid)?;
    if let Some(w) = &grid.warning {
        warnings.push(w.clone());
    }
    let negativity = integrated_negativity(&grid)?;

    let result = PointResult {
        omega: params.omega(),
        length,
        seed: cfg.trajectory.seed,
        config_hash: cfg.hash(),
        n_fock,
        populations: state.populations(),
        purity: purity(&state),
        wigner_min: grid.min(),
        negativity,
        mle,
        samples: samples.len(),
        overflow: histogram.overflow_total(),
        n_bar_oracle,
        n_bar_moment: moment_photon_number(samples, thetas.len()),
        n_bar_state: state.mean_photon_number(),
        cutoff_shift,
        warnings,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(PointAnalysis {
        result,
        histogram,
        state,
        grid,
    })
}

/// Directory name of a sweep point.
pub fn point_dir_name(omega: f64, length: f64) -> String {
    format!("omega{omega:.5}_T{length:.2}")
}

/// Simulates, reconstructs and analyzes the configured `(Ω, T)` point,
/// writing artifacts under `out` if given.
pub fn run_point(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PointResult> {
    let params = cfg.system_params(&cfg.params.omega)?;
    let start = Instant::now();
    let samples = simulate_samples(cfg, params, &[cfg.filter.length])?.remove(0);
    let mut a = analyze_samples(cfg, params, cfg.filter.length, &samples)?;
    a.result.runtime_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        artifacts::write_point(cfg, dir, &a, cfg.output.write_samples.then_some(samples.as_slice()))?;
    }
    Ok(a.result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub omega: f64,
    #[serde(rename = "T")]
    pub length: f64,
    pub dir: Option<PathBuf>,
    pub result: std::result::Result<PointResult, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn get(&self, omega: f64, length: f64) -> Option<&PointResult> {
        self.entries
            .iter()
            .find(|e| (e.omega - omega).abs() < 1e-12 && (e.length - length).abs() < 1e-12)
            .and_then(|e| e.result.as_ref().ok())
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.result.is_err()).count()
    }

    pub fn warnings(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(&e.result, Ok(r) if !r.warnings.is_empty()))
            .count()
    }
}

/// Runs every `(Ω, T)` of the sweep. One set of trajectories per `Ω` serves
/// all `T`. Failures are recorded per point and do not stop the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepResult> {
    let mut entries = Vec::new();
    for omega_spec in &cfg.sweep.omegas {
        entries.extend(sweep_omega(cfg, omega_spec, out)?);
    }
    let result = SweepResult {
        config_hash: cfg.hash(),
        entries,
    };
    if let Some(dir) = out {
        artifacts::write_summary(cfg, dir, &result)?;
    }
    Ok(result)
}

fn sweep_omega(cfg: &ExperimentConfig, omega_spec: &OmegaSpec, out: Option<&Path>) -> Result<Vec<SweepEntry>> {
    let params = cfg.system_params(omega_spec)?;
    let lengths = &cfg.sweep.lengths;
    let batches = match simulate_samples(cfg, params, lengths) {
        Ok(b) => b,
        Err(e) => {
            return Ok(lengths
                .iter()
                .map(|&t| SweepEntry {
                    omega: params.omega(),
                    length: t,
                    dir: None,
                    result: Err(e.to_string()),
                })
                .collect())
        }
    };
    let point_cfgs: Vec<ExperimentConfig> = lengths
        .iter()
        .map(|&t| {
            let mut c = cfg.clone();
            c.params.omega = OmegaSpec::Value(params.omega());
            c.filter.length = t;
            c
        })
        .collect();
    let analyses: Vec<Result<PointAnalysis>> = point_cfgs
        .par_iter()
        .zip(batches.par_iter())
        .map(|(c, samples)| analyze_samples(c, params, c.filter.length, samples))
        .collect();
    let mut entries = Vec::with_capacity(lengths.len());
    for ((point_cfg, samples), analysis) in point_cfgs.iter().zip(&batches).zip(analyses) {
        let t = point_cfg.filter.length;
        let dir = out.map(|o| o.join(point_dir_name(params.omega(), t)));
        let result = analysis.and_then(|a| {
            if let Some(d) = &dir {
                artifacts::write_point(point_cfg, d, &a, cfg.output.write_samples.then_some(samples.as_slice()))?;
            }
            Ok(a.result)
        });
        entries.push(SweepEntry {
            omega: params.omega(),
            length: t,
            dir,
            result: result.map_err(|e| e.to_string()),
        });
    }
    Ok(entries)
}
