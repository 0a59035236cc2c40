//! Diffusive homodyne unraveling of the emitter master equation.
//!
//! The drive enters through the Hamiltonian, so the homodyne current only
//! carries the emission `√γ σ₋`:
//!
//! ```text
//! dJ = √γ ⟨σ₋ e^{-iφ} + σ₊ e^{iφ}⟩ dt + dW
//! ```
//!
//! Each step applies the first-order Kraus operator
//! `M = 1 - (iH + c†c/2) dt + c dJ` with `c = √γ e^{-iφ} σ₋` and renormalizes.
//! To first order this is the Itô stochastic master equation at unit
//! efficiency, and it maps states to states exactly (pure states stay pure).
//!
//! Basis ordering throughout is `(|g⟩, |e⟩)`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{evaluate_filter, FilterSpec};
use crate::tls::{BlochVector, SystemParams};

/// Largest record step accepted, in units of `1/γ`.
pub const MAX_DT: f64 = 1e-3;
/// Shortest burn-in accepted, in units of `1/γ`.
pub const MIN_BURN_IN: f64 = 10.0;

const BRIDGE_STREAM_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Harvesting {
    /// One trajectory per sample, started in the ground state.
    #[default]
    FreshPerSample,
    /// Consecutive windows on one trajectory separated by `dead_time`.
    /// Samples from neighbouring windows are weakly correlated.
    MultiWindow {
        dead_time: f64,
        windows_per_trajectory: usize,
    },
}


#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryConfig {
    pub params: SystemParams,
    /// Record step. Increments are reported on this grid.
    pub dt: f64,
    /// Integration sub-steps per record step. The sub-step noise is a Brownian
    /// bridge conditioned on the record-step increment, so refining keeps the
    /// coarse Wiener path.
    pub substeps: u32,
    /// Burn-in before the measurement window.
    pub t0: f64,
    /// Local-oscillator phase `φ`.
    pub phase: f64,
    pub seed: u64,
    pub harvesting: Harvesting,
}

impl TrajectoryConfig {
    pub fn new(params: SystemParams, phase: f64, seed: u64) -> Self {
        Self {
            params,
            dt: MAX_DT / params.gamma(),
            substeps: 1,
            t0: MIN_BURN_IN / params.gamma(),
            phase,
            seed,
            harvesting: Harvesting::FreshPerSample,
        }
    }

    pub fn validate(&self) -> Result<()> {
        SystemParams::new(self.params.gamma(), self.params.omega())?;
        let g = self.params.gamma();
        if !(self.dt > 0.0 && self.dt * g <= MAX_DT * (1.0 + 1e-12)) {
            return Err(Error::param(format!(
                "dt must be in (0, {MAX_DT}/γ], got {}",
                self.dt
            )));
        }
        if self.substeps == 0 {
            return Err(Error::param("substeps must be >= 1"));
        }
        if !(self.t0 * g >= MIN_BURN_IN * (1.0 - 1e-12)) {
            return Err(Error::param(format!(
                "burn-in t0 must be >= {MIN_BURN_IN}/γ, got {}",
                self.t0
            )));
        }
        if !(0.0..PI).contains(&self.phase) {
            return Err(Error::param(format!("phase must be in [0, π), got {}", self.phase)));
        }
        if let Harvesting::MultiWindow {
            dead_time,
            windows_per_trajectory,
        } = self.harvesting
        {
            if !(dead_time >= 0.0 && dead_time.is_finite()) || windows_per_trajectory == 0 {
                return Err(Error::param("multi-window harvesting needs dead_time >= 0 and >= 1 window"));
            }
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Conditioned 2×2 density matrix of the emitter, basis `(|g⟩, |e⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionedState(Matrix2<Complex64>);

impl ConditionedState {
    pub fn ground() -> Self {
        Self(Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ))
    }

    pub fn from_matrix(m: Matrix2<Complex64>) -> Result<Self> {
        let s = Self(m);
        if (m - m.adjoint()).norm() > 1e-10 || (s.trace() - 1.0).abs() > 1e-10 || s.min_eigenvalue() < -1e-10 {
            return Err(Error::param("not a valid 2x2 density matrix"));
        }
        Ok(s)
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        (self.0[(0, 0)] + self.0[(1, 1)]).re
    }

    pub fn purity(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)].norm();
        0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt()
    }

    pub fn bloch(&self) -> BlochVector {
        // ⟨σ₋⟩ = Tr[σ₋ρ] = ρ_eg
        let sm = self.0[(1, 0)];
        BlochVector {
            sp: sm.conj(),
            sm,
            sz: (self.0[(1, 1)] - self.0[(0, 0)]).re,
        }
    }
}

/// Per-configuration constants of the Kraus step.
#[derive(Debug, Clone, Copy)]
struct Stepper {
    h: f64,
    /// `κh` with `κ = √γ Ω`
    drive_h: f64,
    /// `1 - γh/2`
    decay: f64,
    /// `√γ e^{-iφ}`
    meas: Complex64,
}

impl Stepper {
    fn new(params: &SystemParams, phase: f64, h: f64) -> Self {
        let sg = params.gamma().sqrt();
        Self {
            h,
            drive_h: sg * params.omega() * h,
            decay: 1.0 - 0.5 * params.gamma() * h,
            meas: sg * Complex64::from_polar(1.0, -phase),
        }
    }

    /// Mean current `√γ ⟨σ₋e^{-iφ} + h.c.⟩` for coherence `ρ_eg = ⟨σ₋⟩`.
    #[inline]
    fn drift(&self, sm: Complex64) -> f64 {
        2.0 * (self.meas * sm).re
    }

    /// `M = [[1, κh + c̃ dY], [-κh, 1 - γh/2]]`, `c̃ = √γ e^{-iφ}`.
    #[inline]
    fn kraus(&self, dy: f64) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(1.0, 0.0),
            self.drive_h + self.meas * dy,
            Complex64::new(-self.drive_h, 0.0),
            Complex64::new(self.decay, 0.0),
        )
    }

    fn apply(&self, rho: &ConditionedState, dw: f64) -> Result<(ConditionedState, f64)> {
        let dy = self.drift(rho.0[(1, 0)]) * self.h + dw;
        let m = self.kraus(dy);
        let next = m * rho.0 * m.adjoint();
        let tr = (next[(0, 0)] + next[(1, 1)]).re;
        if !(tr.is_finite() && tr > 1e-300) {
            return Err(Error::Instability {
                trajectory: 0,
                step: 0,
                detail: format!("trace {tr} after step from {:?}", rho.0),
            });
        }
        let mut out = next / Complex64::new(tr, 0.0);
        // Restore exact Hermiticity lost to roundoff.
        let off = 0.5 * (out[(0, 1)] + out[(1, 0)].conj());
        out[(0, 1)] = off;
        out[(1, 0)] = off.conj();
        out[(0, 0)].im = 0.0;
        out[(1, 1)].im = 0.0;
        Ok((ConditionedState(out), dy))
    }

    /// Pure-state version: `ψ ← Mψ / |Mψ|`.
    #[inline]
    fn apply_pure(&self, psi: &mut [Complex64; 2], dw: f64) -> f64 {
        let sm = psi[0].conj() * psi[1];
        let dy = self.drift(sm) * self.h + dw;
        let upper = self.drive_h + self.meas * dy;
        let g = psi[0] + upper * psi[1];
        let e = -self.drive_h * psi[0] + self.decay * psi[1];
        let inv = 1.0 / (g.norm_sqr() + e.norm_sqr()).sqrt();
        psi[0] = g * inv;
        psi[1] = e * inv;
        dy
    }
}

/// Advance the conditioned state by one integration step with Wiener
/// increment `dw` (mean 0, variance `cfg.dt / cfg.substeps`). Returns the new
/// state and the current increment `dJ` over the step.
pub fn step_sme(state: &ConditionedState, cfg: &TrajectoryConfig, dw: f64) -> Result<(ConditionedState, f64)> {
    Stepper::new(&cfg.params, cfg.phase, cfg.step()).apply(state, dw)
}

/// Wiener increments on the record grid, refined by Brownian bridges.
struct NoiseSource {
    main: ChaCha8Rng,
    bridge: ChaCha8Rng,
    dt: f64,
    substeps: u32,
    buf: Vec<f64>,
}

impl NoiseSource {
    fn new(seed: u64, trajectory_id: u64, dt: f64, substeps: u32) -> Self {
        let mut main = ChaCha8Rng::seed_from_u64(seed);
        main.set_stream(trajectory_id);
        let mut bridge = ChaCha8Rng::seed_from_u64(seed);
        bridge.set_stream(trajectory_id | BRIDGE_STREAM_BIT);
        Self {
            main,
            bridge,
            dt,
            substeps,
            buf: vec![0.0; substeps as usize],
        }
    }

    /// Fills the sub-step increments for the next record step.
    fn next(&mut self) -> &[f64] {
        let z: f64 = self.main.sample(StandardNormal);
        let total = self.dt.sqrt() * z;
        let m = self.substeps as usize;
        if m == 1 {
            self.buf[0] = total;
            return &self.buf;
        }
        let h = self.dt / m as f64;
        let mut rem_w = total;
        let mut rem_t = self.dt;
        for i in 0..m - 1 {
            let zb: f64 = self.bridge.sample(StandardNormal);
            let mean = rem_w * h / rem_t;
            let var = h * (rem_t - h) / rem_t;
            let inc = mean + var.max(0.0).sqrt() * zb;
            self.buf[i] = inc;
            rem_w -= inc;
            rem_t -= h;
        }
        self.buf[m - 1] = rem_w;
        &self.buf
    }
}

/// Measured current increments on a uniform grid starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub phase: f64,
    pub start: f64,
    pub dt: f64,
    pub increments: Vec<f64>,
}

impl HomodyneRecord {
    pub fn end(&self) -> f64 {
        self.start + self.dt * self.increments.len() as f64
    }

    /// Left edge of each record step.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.increments.len()).map(move |k| self.start + k as f64 * self.dt)
    }
}

/// A conditioned trajectory stepped one record step at a time.
pub struct Trajectory {
    cfg: TrajectoryConfig,
    stepper: Stepper,
    noise: NoiseSource,
    state: ConditionedState,
    id: u64,
    steps: u64,
}

impl Trajectory {
    pub fn new(cfg: &TrajectoryConfig, trajectory_id: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            stepper: Stepper::new(&cfg.params, cfg.phase, cfg.step()),
            noise: NoiseSource::new(cfg.seed, trajectory_id, cfg.dt, cfg.substeps),
            state: ConditionedState::ground(),
            id: trajectory_id,
            steps: 0,
        })
    }

    pub fn state(&self) -> &ConditionedState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.dt
    }

    /// Advances one record step and returns its current increment.
    pub fn advance(&mut self) -> Result<f64> {
        let mut dj = 0.0;
        let noise = self.noise.next();
        for &dw in noise {
            match self.stepper.apply(&self.state, dw) {
                Ok((s, dy)) => {
                    self.state = s;
                    dj += dy;
                }
                Err(Error::Instability { detail, .. }) => {
                    return Err(Error::Instability {
                        trajectory: self.id,
                        step: self.steps,
                        detail,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        self.steps += 1;
        Ok(dj)
    }
}

/// Simulates one trajectory from the ground state and returns the full record
/// over `[0, duration]`.
pub fn simulate_record(cfg: &TrajectoryConfig, trajectory_id: u64, duration: f64) -> Result<HomodyneRecord> {
    let mut traj = Trajectory::new(cfg, trajectory_id)?;
    let n = (duration / cfg.dt).round() as usize;
    let mut increments = Vec::with_capacity(n);
    for _ in 0..n {
        increments.push(traj.advance()?);
    }
    Ok(HomodyneRecord {
        phase: cfg.phase,
        start: 0.0,
        dt: cfg.dt,
        increments,
    })
}

/// One filtered-mode quadrature outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub phase_index: usize,
    /// Local-oscillator phase `φ` of the record.
    pub phase: f64,
    pub value: f64,
    pub sample_index: usize,
    pub trajectory_id: u64,
}

/// Filter weights `f(t_k)` at step midpoints over the steps a filter touches.
#[derive(Debug, Clone)]
struct SampledFilter {
    first: usize,
    weights: Vec<f64>,
}

impl SampledFilter {
    fn new(f: &FilterSpec, start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        let (a, b) = f.support();
        let end = start + dt * n_steps as f64;
        let slack = 1e-9 * dt;
        if a < start - slack || b > end + slack {
            return Err(Error::Coverage(format!(
                "filter support [{a}, {b}] not covered by record [{start}, {end}]"
            )));
        }
        let first = (((a - start) / dt).floor().max(0.0)) as usize;
        let last = ((((b - start) / dt).ceil()) as usize).min(n_steps);
        let weights = (first..last)
            .map(|k| evaluate_filter(f, start + (k as f64 + 0.5) * dt))
            .collect();
        Ok(Self { first, weights })
    }

    fn apply(&self, increments: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&increments[self.first..])
            .map(|(w, dj)| w * dj)
            .sum()
    }

    fn last(&self) -> usize {
        self.first + self.weights.len()
    }
}

/// `x = Σ_k f(t_k) dJ_k`, the discrete `∫ f dJ` of the record.
pub fn sample_filtered_quadrature(record: &HomodyneRecord, f: &FilterSpec) -> Result<f64> {
    let sampled = SampledFilter::new(f, record.start, record.dt, record.increments.len())?;
    Ok(sampled.apply(&record.increments))
}

/// A grid of phases and samples per phase sharing one trajectory configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub params: SystemParams,
    pub dt: f64,
    pub substeps: u32,
    /// Burn-in / measurement start.
    pub t0: f64,
    pub phases: Vec<f64>,
    pub samples_per_phase: usize,
    pub seed: u64,
    pub harvesting: Harvesting,
}

impl BatchConfig {
    pub fn new(params: SystemParams, phase_count: usize, samples_per_phase: usize, seed: u64) -> Self {
        Self {
            params,
            dt: MAX_DT / params.gamma(),
            substeps: 1,
            t0: MIN_BURN_IN / params.gamma(),
            phases: equally_spaced_phases(phase_count),
            samples_per_phase,
            seed,
            harvesting: Harvesting::FreshPerSample,
        }
    }

    fn trajectory_config(&self, phase: f64) -> TrajectoryConfig {
        TrajectoryConfig {
            params: self.params,
            dt: self.dt,
            substeps: self.substeps,
            t0: self.t0,
            phase,
            seed: self.seed,
            harvesting: self.harvesting,
        }
    }
}

/// `count` phases equally spaced in `[0, π)`.
pub fn equally_spaced_phases(count: usize) -> Vec<f64> {
    (0..count).map(|k| PI * k as f64 / count as f64).collect()
}

/// Unique trajectory identifier for `(phase index, trajectory index)`; also the
/// RNG stream id.
pub fn trajectory_id(phase_index: usize, trajectory_index: usize) -> u64 {
    ((phase_index as u64) << 32) | trajectory_index as u64
}

/// Samples for one filter; see [`batch_samples_multi`].
pub fn batch_samples(cfg: &BatchConfig, f: &FilterSpec) -> Result<Vec<QuadratureSample>> {
    Ok(batch_samples_multi(cfg, std::slice::from_ref(f))?.remove(0))
}

/// Generates `samples_per_phase` quadrature samples per phase for every filter
/// from the same records. The filters are specified for the first measurement
/// window (starting at `cfg.t0`); in multi-window harvesting they are shifted
/// to each later window.
///
/// Output is ordered by `(phase index, sample index)` and is bit-identical for a
/// fixed seed regardless of how trajectories are scheduled.
pub fn batch_samples_multi(cfg: &BatchConfig, filters: &[FilterSpec]) -> Result<Vec<Vec<QuadratureSample>>> {
    if cfg.phases.is_empty() {
        return Err(Error::param("at least one phase is required"));
    }
    if cfg.samples_per_phase == 0 {
        return Err(Error::param("samples_per_phase must be >= 1"));
    }
    if filters.is_empty() {
        return Err(Error::Filter("at least one filter is required".into()));
    }
    for &phase in &cfg.phases {
        cfg.trajectory_config(phase).validate()?;
    }

    // Window geometry, measured in whole record steps.
    let window_end = filters.iter().map(|f| f.support().1).fold(cfg.t0, f64::max);
    let window_steps = (window_end / cfg.dt - 1e-9).ceil() as usize;
    let sampled: Vec<SampledFilter> = filters
        .iter()
        .map(|f| SampledFilter::new(f, 0.0, cfg.dt, window_steps))
        .collect::<Result<_>>()?;
    let first_used = sampled.iter().map(|s| s.first).min().unwrap_or(0);
    let last_used = sampled.iter().map(SampledFilter::last).max().unwrap_or(0);
    let (windows_per_traj, period_steps) = match cfg.harvesting {
        Harvesting::FreshPerSample => (1, 0),
        Harvesting::MultiWindow {
            dead_time,
            windows_per_trajectory,
        } => {
            let dead = (dead_time / cfg.dt).round() as usize;
            (windows_per_trajectory, last_used - first_used + dead)
        }
    };

    let trajectories_per_phase = cfg.samples_per_phase.div_ceil(windows_per_traj);
    let jobs: Vec<(usize, usize)> = (0..cfg.phases.len())
        .flat_map(|p| (0..trajectories_per_phase).map(move |j| (p, j)))
        .collect();

    let results: Vec<Result<Vec<Vec<f64>>>> = jobs
        .par_iter()
        .map_init(
            || vec![0.0; window_steps],
            |buf, &(p, j)| {
                let windows = windows_per_traj.min(cfg.samples_per_phase - j * windows_per_traj);
                run_windows(cfg, p, j, windows, period_steps, (first_used, last_used), &sampled, buf)
            },
        )
        .collect();

    let mut out: Vec<Vec<QuadratureSample>> =
        vec![Vec::with_capacity(cfg.phases.len() * cfg.samples_per_phase); filters.len()];
    for ((p, j), res) in jobs.iter().zip(results) {
        let per_window = res?;
        for (w, values) in per_window.into_iter().enumerate() {
            let sample_index = j * windows_per_traj + w;
            for (fi, value) in values.into_iter().enumerate() {
                out[fi].push(QuadratureSample {
                    phase_index: *p,
                    phase: cfg.phases[*p],
                    value,
                    sample_index,
                    trajectory_id: trajectory_id(*p, *j),
                });
            }
        }
    }
    Ok(out)
}

/// Runs one pure-state trajectory and returns, per window, one value per filter.
///
/// Window `w` covers steps `used + w * period` of the trajectory; steps outside
/// the used spans (burn-in, dead time) are simulated but not stored.
#[allow(clippy::too_many_arguments)]
fn run_windows(
    cfg: &BatchConfig,
    phase_index: usize,
    traj_index: usize,
    windows: usize,
    period_steps: usize,
    used: (usize, usize),
    sampled: &[SampledFilter],
    buf: &mut [f64],
) -> Result<Vec<Vec<f64>>> {
    let tcfg = cfg.trajectory_config(cfg.phases[phase_index]);
    let id = trajectory_id(phase_index, traj_index);
    let stepper = Stepper::new(&tcfg.params, tcfg.phase, tcfg.step());
    let mut noise = NoiseSource::new(cfg.seed, id, cfg.dt, cfg.substeps);
    let mut psi = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut step: usize = 0;

    let mut advance = |psi: &mut [Complex64; 2], step: usize| -> Result<f64> {
        let mut dj = 0.0;
        for &dw in noise.next() {
            dj += stepper.apply_pure(psi, dw);
        }
        if !(psi[0].re.is_finite() && psi[1].re.is_finite()) {
            return Err(Error::Instability {
                trajectory: id,
                step: step as u64,
                detail: format!("state {psi:?}"),
            });
        }
        Ok(dj)
    };

    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let start = used.0 + w * period_steps;
        while step < start {
            advance(&mut psi, step)?;
            step += 1;
        }
        for slot in buf[used.0..used.1].iter_mut() {
            *slot = advance(&mut psi, step)?;
            step += 1;
        }
        out.push(sampled.iter().map(|s| s.apply(buf)).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(omega: f64) -> SystemParams {
        SystemParams::new(1.0, omega).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = TrajectoryConfig::new(params(0.3), 0.0, 1);
        assert!(c.validate().is_ok());
        c.dt = 2e-3;
        assert!(c.validate().is_err());
        c.dt = 1e-3;
        c.t0 = 5.0;
        assert!(c.validate().is_err());
        c.t0 = 10.0;
        c.phase = 4.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn undriven_ground_state_records_pure_noise() {
        let cfg = TrajectoryConfig::new(params(0.0), 0.7, 3);
        let mut rho = ConditionedState::ground();
        for &dw in &[0.01, -0.03, 0.002] {
            let (next, dj) = step_sme(&rho, &cfg, dw).unwrap();
            assert_eq!(dj, dw);
            assert_eq!(next, ConditionedState::ground());
            rho = next;
        }
    }

    #[test]
    fn state_stays_physical() {
        let mut cfg = TrajectoryConfig::new(params(0.6), 1.1, 9);
        cfg.substeps = 2;
        let mut traj = Trajectory::new(&cfg, 0).unwrap();
        for _ in 0..20_000 {
            traj.advance().unwrap();
            let s = traj.state();
            assert!((s.trace() - 1.0).abs() < 1e-12);
            assert!(s.purity() <= 1.0 + 1e-9);
            assert!(s.min_eigenvalue() >= -1e-10);
            let m = s.matrix();
            assert!((m - m.adjoint()).norm() < 1e-14);
        }
    }

    #[test]
    fn pure_and_density_paths_agree() {
        // Same noise, same Kraus map: the batch engine's pure-state path must
        // reproduce the density-matrix record.
        let p = params(0.35);
        let mut cfg = BatchConfig::new(p, 3, 2, 17);
        cfg.t0 = 10.0;
        let f = FilterSpec::boxcar(10.0, 2.0).unwrap();
        let fast = batch_samples(&cfg, &f).unwrap();
        for s in &fast {
            let tcfg = cfg.trajectory_config(s.phase);
            let rec = simulate_record(&tcfg, s.trajectory_id, 12.0).unwrap();
            let slow = sample_filtered_quadrature(&rec, &f).unwrap();
            assert!((slow - s.value).abs() < 1e-10, "{slow} vs {}", s.value);
        }
    }

    #[test]
    fn coverage_error() {
        let cfg = TrajectoryConfig::new(params(0.2), 0.0, 1);
        let rec = simulate_record(&cfg, 0, 11.0).unwrap();
        let f = FilterSpec::boxcar(10.0, 2.0).unwrap();
        assert!(matches!(sample_filtered_quadrature(&rec, &f), Err(Error::Coverage(_))));
    }

    #[test]
    fn bridge_refinement_preserves_record_step_increment() {
        let mut coarse = NoiseSource::new(5, 11, 1e-3, 1);
        let mut fine = NoiseSource::new(5, 11, 1e-3, 4);
        for _ in 0..100 {
            let a = coarse.next()[0];
            let b: f64 = fine.next().iter().sum();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let cfg = BatchConfig::new(params(0.35), 12, 1, 2024);
        let f = FilterSpec::boxcar(10.0, 1.0).unwrap();
        let a = batch_samples(&cfg, &f).unwrap();
        let b = batch_samples(&cfg, &f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        let ids: std::collections::BTreeSet<u64> = a.iter().map(|s| s.trajectory_id).collect();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn sweep_filters_share_records_without_changing_samples() {
        // In fresh-per-sample mode the sample for a short window does not depend
        // on which longer windows are extracted alongside it.
        let cfg = BatchConfig::new(params(0.35), 2, 3, 8);
        let short = FilterSpec::boxcar(10.0, 1.0).unwrap();
        let long = FilterSpec::boxcar(10.0, 3.0).unwrap();
        let alone = batch_samples(&cfg, &short).unwrap();
        let shared = batch_samples_multi(&cfg, &[long, short]).unwrap();
        assert_eq!(alone, shared[1]);
    }

    #[test]
    fn multi_window_matches_record_windows() {
        let p = params(0.4);
        let mut cfg = BatchConfig::new(p, 1, 3, 21);
        cfg.harvesting = Harvesting::MultiWindow {
            dead_time: 5.0,
            windows_per_trajectory: 3,
        };
        let f = FilterSpec::boxcar(10.0, 2.0).unwrap();
        let samples = batch_samples(&cfg, &f).unwrap();
        assert_eq!(samples.len(), 3);
        let tcfg = cfg.trajectory_config(0.0);
        let rec = simulate_record(&tcfg, trajectory_id(0, 0), 10.0 + 3.0 * 7.0).unwrap();
        for (w, s) in samples.iter().enumerate() {
            let fw = f.with_start(10.0 + 7.0 * w as f64).unwrap();
            let direct = sample_filtered_quadrature(&rec, &fw).unwrap();
            assert!((direct - s.value).abs() < 1e-10, "window {w}: {direct} vs {}", s.value);
        }
    }
}
