use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::histogram::QuadratureHistogram;
use super::projectors::{build_projectors, ProjectorSet, PROBABILITY_FLOOR};
use super::state::FockDensityMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    /// Stop when `‖ρ_{k+1} − ρ_k‖_F ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Allowed decrease of the per-sample log-likelihood between iterates.
    pub monotonicity_slack: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            monotonicity_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleReport {
    pub iterations: usize,
    pub final_delta: f64,
    /// `(1/n) Σ n_{θ,j} ln pr(θ, j)` for the starting point and every iterate.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    /// Iterations that needed the damped update `(I + εR)ρ(I + εR)`.
    pub damped_steps: usize,
}

/// Counts (or exact frequencies) per phase and outcome, matching a
/// [`ProjectorSet`]: one entry per bin followed by the out-of-range count.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequencies {
    weights: Vec<Vec<f64>>,
    total: f64,
}

impl Frequencies {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Data("frequencies must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().flatten().sum();
        if total <= 0.0 {
            return Err(Error::Data("histogram has zero total counts".into()));
        }
        Ok(Self { weights, total })
    }

    /// Bin counts plus the overflow tally as the complement outcome.
    pub fn from_histogram(h: &QuadratureHistogram) -> Result<Self> {
        let mut w = h.weights();
        for (row, &o) in w.iter_mut().zip(&h.overflow) {
            row.push(o as f64);
        }
        Self::new(w)
    }

    /// Exact bin probabilities of `rho`, one unit of weight per phase.
    pub fn exact(projectors: &ProjectorSet, rho: &FockDensityMatrix) -> Result<Self> {
        Self::new(projectors.probabilities(rho)?)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    fn check(&self, p: &ProjectorSet) -> Result<()> {
        if self.weights.len() != p.phases().len() || self.weights.iter().any(|r| r.len() != p.outcome_count()) {
            return Err(Error::Data(format!(
                "histogram geometry ({} phases) does not match projectors ({} phases x {} outcomes)",
                self.weights.len(),
                p.phases().len(),
                p.outcome_count()
            )));
        }
        Ok(())
    }
}

/// Iteration workspace: a state and its clipped bin probabilities.
struct Iterate {
    rho: DMatrix<Complex64>,
    probs: Vec<Vec<f64>>,
    log_l: f64,
}

impl Iterate {
    fn new(rho: DMatrix<Complex64>, data: &Frequencies, p: &ProjectorSet) -> Self {
        let mut probs = vec![vec![0.0; p.outcome_count()]; p.phases().len()];
        for (k, row) in probs.iter_mut().enumerate() {
            p.phase_probabilities(&rho, k, row);
            row.iter_mut().for_each(|v| *v = v.clamp(PROBABILITY_FLOOR, 1.0));
        }
        let mut log_l = 0.0;
        for (wr, pr) in data.weights.iter().zip(&probs) {
            for (w, q) in wr.iter().zip(pr) {
                if *w > 0.0 {
                    log_l += w * q.ln();
                }
            }
        }
        Self {
            rho,
            probs,
            log_l: log_l / data.total,
        }
    }

    fn r_operator(&self, data: &Frequencies, p: &ProjectorSet) -> DMatrix<Complex64> {
        let dim = p.dim();
        let mut r = DMatrix::zeros(dim, dim);
        let mut coeffs = vec![0.0; p.outcome_count()];
        for (k, (wr, pr)) in data.weights.iter().zip(&self.probs).enumerate() {
            for ((c, w), q) in coeffs.iter_mut().zip(wr).zip(pr) {
                *c = w / (data.total * q);
            }
            p.accumulate(k, &coeffs, &mut r);
        }
        r
    }
}

/// `R(ρ) = (1/n) Σ_{θ,j} n_{θ,j} / pr_ρ(θ,j) · Π_{θ,j}`.
pub fn r_operator(rho: &FockDensityMatrix, hist: &QuadratureHistogram, projectors: &ProjectorSet) -> Result<DMatrix<Complex64>> {
    r_operator_frequencies(rho, &Frequencies::from_histogram(hist)?, projectors)
}

pub fn r_operator_frequencies(
    rho: &FockDensityMatrix,
    data: &Frequencies,
    projectors: &ProjectorSet,
) -> Result<DMatrix<Complex64>> {
    projectors.check_dim(rho)?;
    data.check(projectors)?;
    Ok(Iterate::new(rho.matrix().clone(), data, projectors).r_operator(data, projectors))
}

/// `N[A ρ A†]` for Hermitian `A`, re-Hermitized.
fn sandwich(a: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let next = a * rho * a;
    let tr = next.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Numerical(format!("RρR has trace {tr}")));
    }
    let herm = (&next + next.adjoint()) * Complex64::new(0.5 / tr, 0.0);
    Ok(herm)
}

/// One undamped update `N[R(ρ) ρ R(ρ)]`.
pub fn mle_step(rho: &FockDensityMatrix, data: &Frequencies, projectors: &ProjectorSet) -> Result<DMatrix<Complex64>> {
    let r = r_operator_frequencies(rho, data, projectors)?;
    sandwich(&r, rho.matrix())
}

/// Reconstructs from a histogram, building projectors for its geometry.
pub fn mle_reconstruct(
    hist: &QuadratureHistogram,
    n_fock: usize,
    opts: &MleOptions,
) -> Result<(FockDensityMatrix, MleReport)> {
    let projectors = build_projectors(&hist.phases, &hist.edges, n_fock)?;
    mle_reconstruct_with(&Frequencies::from_histogram(hist)?, &projectors, opts, None)
}

/// RρR iteration from `start` (default `1/N_Fock`).
///
/// If a full step would lower the likelihood by more than the slack, the step
/// is damped with `R_ε = (I + εR)/(1 + ε)`, halving `ε` until it is accepted.
pub fn mle_reconstruct_with(
    data: &Frequencies,
    projectors: &ProjectorSet,
    opts: &MleOptions,
    start: Option<&FockDensityMatrix>,
) -> Result<(FockDensityMatrix, MleReport)> {
    data.check(projectors)?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::param("MLE needs tol > 0 and max_iter >= 1"));
    }
    let dim = projectors.dim();
    let rho0 = match start {
        Some(s) => {
            projectors.check_dim(s)?;
            s.clone()
        }
        None => FockDensityMatrix::maximally_mixed(dim)?,
    };
    let mut cur = Iterate::new(rho0.matrix().clone(), data, projectors);
    let mut trace = vec![cur.log_l];
    let mut damped = 0;
    let mut delta = f64::INFINITY;
    let mut iterations = 0;
    let identity = DMatrix::<Complex64>::identity(dim, dim);

    while iterations < opts.max_iter {
        iterations += 1;
        let r = cur.r_operator(data, projectors);
        let mut next = Iterate::new(sandwich(&r, &cur.rho)?, data, projectors);
        if next.log_l < cur.log_l - opts.monotonicity_slack {
            damped += 1;
            let mut eps = 0.5;
            loop {
                let re = (&identity + &r * Complex64::new(eps, 0.0)) / Complex64::new(1.0 + eps, 0.0);
                next = Iterate::new(sandwich(&re, &cur.rho)?, data, projectors);
                if next.log_l >= cur.log_l - opts.monotonicity_slack {
                    break;
                }
                eps *= 0.5;
                if eps < 1e-10 {
                    return Err(Error::LikelihoodDecrease {
                        iteration: iterations,
                        decrease: cur.log_l - next.log_l,
                    });
                }
            }
        }
        delta = (&next.rho - &cur.rho).norm();
        cur = next;
        trace.push(cur.log_l);
        if delta <= opts.tol {
            break;
        }
    }
    let state = FockDensityMatrix::from_approximate(cur.rho)?;
    Ok((
        state,
        MleReport {
            iterations,
            final_delta: delta,
            log_likelihood: trace,
            converged: delta <= opts.tol,
            damped_steps: damped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::histogram::BinEdges;

    fn setup(n_fock: usize, phases: usize) -> ProjectorSet {
        let ph: Vec<f64> = (0..phases).map(|k| std::f64::consts::PI * k as f64 / phases as f64).collect();
        build_projectors(&ph, &BinEdges::default(), n_fock).unwrap()
    }

    #[test]
    fn r_is_hermitian_at_uniform_start() {
        let p = setup(4, 3);
        let weights = (0..3).map(|k| (0..82).map(|j| ((j * 7 + k * 3) % 11) as f64).collect()).collect();
        let data = Frequencies::new(weights).unwrap();
        let rho = FockDensityMatrix::maximally_mixed(4).unwrap();
        let r = r_operator_frequencies(&rho, &data, &p).unwrap();
        assert!((&r - r.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn exact_data_gives_identity_r() {
        let p = setup(5, 6);
        let amps: Vec<Complex64> = [0.7, 0.5, 0.3, 0.1, 0.0]
            .iter()
            .enumerate()
            .map(|(n, &a)| Complex64::from_polar(a, 0.4 * n as f64))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<_> = amps.into_iter().map(|a| a / norm).collect();
        let rho = FockDensityMatrix::pure(&amps).unwrap();
        let data = Frequencies::exact(&p, &rho).unwrap();
        let r = r_operator_frequencies(&rho, &data, &p).unwrap();
        // With the complement outcome the projectors of each phase sum to one, so R = I.
        assert!((&r - DMatrix::<Complex64>::identity(5, 5)).norm() < 1e-12);
        let next = mle_step(&rho, &data, &p).unwrap();
        assert!((next - rho.matrix()).norm() < 1e-10);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let p = setup(3, 2);
        let data = Frequencies::new(vec![vec![1.0; 82]; 3]).unwrap();
        assert!(mle_reconstruct_with(&data, &p, &MleOptions::default(), None).is_err());
        let data = Frequencies::new(vec![vec![1.0; 81]; 2]).unwrap();
        assert!(mle_reconstruct_with(&data, &p, &MleOptions::default(), None).is_err());
        assert!(Frequencies::new(vec![vec![0.0; 82]; 2]).is_err());
    }

    #[test]
    fn converges_on_exact_fock_mixture() {
        let p = setup(4, 4);
        let truth = FockDensityMatrix::diagonal(&[0.5, 0.3, 0.15, 0.05]).unwrap();
        let data = Frequencies::exact(&p, &truth).unwrap();
        let opts = MleOptions {
            tol: 1e-8,
            ..Default::default()
        };
        let (rho, rep) = mle_reconstruct_with(&data, &p, &opts, None).unwrap();
        assert!(rep.converged);
        assert!(rep.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        for n in 0..4 {
            assert!((rho.population(n) - truth.population(n)).abs() < 1e-3, "{:?}", rho.populations());
        }
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
    }
}
