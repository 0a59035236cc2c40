//! Wigner functions, integrated negativity and purity of reconstructed states.
//!
//! `W(α) = Tr[ρ D(α) P D†(α)] / π` with parity `P = (−1)^{a†a}`, so the vacuum is
//! `e^{−2|α|²}/π`. Grid points map to `α = (x + ip)/2` and integrals use
//! `dx dp`; under this measure every state has total mass 2 and
//! `𝒩_{|1⟩} = 2(2e^{−1/2} − 1)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::{FockDensityMatrix, MAX_FOCK};

pub const CONVENTION: &str = "W(alpha)=Tr[rho D(alpha) P D(alpha)^dag]/pi; alpha=(x+ip)/2; measure dx dp; total mass 2";

/// `∫ W dx dp` for any unit-trace state.
pub const TOTAL_MASS: f64 = 2.0;

/// Closed form `2(2e^{−1/2} − 1)` of the single-photon negativity.
pub fn single_photon_negativity() -> f64 {
    2.0 * (2.0 * (-0.5f64).exp() - 1.0)
}

const NORMALIZER_TOL: f64 = 1e-3;
const MASS_WARN: f64 = 1e-2;
/// Retained trace when choosing the cutoff of a displaced state.
const DISPLACED_TRACE_TOL: f64 = 1e-10;
const MAX_DISPLACEMENT: f64 = 2.0;

/// Generalized Laguerre polynomials `L_0^{(k)}(x) … L_{len−1}^{(k)}(x)`.
fn laguerre_into(k: usize, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let k = k as f64;
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 1.0 + k - x;
    }
    for i in 1..out.len().saturating_sub(1) {
        let fi = i as f64;
        out[i + 1] = ((2.0 * fi + 1.0 + k - x) * out[i] - (fi + k) * out[i - 1]) / (fi + 1.0);
    }
}

/// `L_n^{(k)}(x)`.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let mut out = vec![0.0; n + 1];
    laguerre_into(k, x, &mut out);
    out[n]
}

/// `⟨m|D(β)|n⟩` for `m, n < dim`.
pub fn displacement_matrix(beta: Complex64, dim: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(dim, dim);
    fill_displacement(beta, &mut out, &mut vec![0.0; dim]);
    out
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    for i in 1..=n {
        v[i] = v[i - 1] + (i as f64).ln();
    }
    v
}

fn fill_displacement(beta: Complex64, out: &mut DMatrix<Complex64>, lag: &mut [f64]) {
    let dim = out.nrows();
    let b2 = beta.norm_sqr();
    let lf = ln_factorials(dim);
    let gauss = (-0.5 * b2).exp();
    // ⟨m|D|n⟩ = √(n!/m!) β^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²) for m ≥ n,
    // and ⟨n|D|m⟩ = √(n!/m!) (−β*)^{m−n} e^{−|β|²/2} L_n^{(m−n)}(|β|²).
    let mut beta_pow = Complex64::new(1.0, 0.0);
    let mut mbeta_pow = Complex64::new(1.0, 0.0);
    for d in 0..dim {
        laguerre_into(d, b2, &mut lag[..dim - d]);
        for n in 0..dim - d {
            let m = n + d;
            let c = (0.5 * (lf[n] - lf[m])).exp() * gauss * lag[n];
            out[(m, n)] = beta_pow * c;
            if d > 0 {
                out[(n, m)] = mbeta_pow * c;
            }
        }
        beta_pow *= beta;
        mbeta_pow *= -beta.conj();
    }
}

/// Wigner function of `|n⟩`: `(−1)^n e^{−2|α|²} L_n(4|α|²) / π`.
pub fn wigner_fock_diagonal(n: usize, alpha: Complex64) -> f64 {
    let r2 = alpha.norm_sqr();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * (-2.0 * r2).exp() * laguerre(n, 0, 4.0 * r2) / PI
}

/// Wigner function of a state on `{|0⟩, |1⟩}` with `ρ₁₀ = ⟨1|ρ|0⟩`:
/// `ρ₀W₀ + ρ₁W₁ + (4/π) e^{−2|α|²} Re[ρ₁₀ α*]`.
pub fn wigner_two_level(rho0: f64, rho1: f64, rho10: Complex64, alpha: Complex64) -> Result<f64> {
    if (rho0 + rho1 - 1.0).abs() > 1e-10 {
        return Err(Error::param(format!("populations sum to {}, not 1", rho0 + rho1)));
    }
    if rho0 < -1e-10 || rho1 < -1e-10 || rho10.norm_sqr() > rho0 * rho1 + 1e-10 {
        return Err(Error::param("two-level state is not positive semidefinite"));
    }
    let r2 = alpha.norm_sqr();
    let g = (-2.0 * r2).exp() / PI;
    Ok(rho0 * g + rho1 * g * (4.0 * r2 - 1.0) + 4.0 * g * (rho10 * alpha.conj()).re)
}

/// Wigner function of a Fock-basis density matrix at one point.
pub fn wigner_at(rho: &FockDensityMatrix, alpha: Complex64) -> f64 {
    let dim = rho.dim();
    let mut d = DMatrix::zeros(dim, dim);
    let mut lag = vec![0.0; dim];
    wigner_with(rho, alpha, &mut d, &mut lag)
}

fn wigner_with(rho: &FockDensityMatrix, alpha: Complex64, d: &mut DMatrix<Complex64>, lag: &mut [f64]) -> f64 {
    let dim = rho.dim();
    fill_displacement(2.0 * alpha, d, lag);
    // W = (1/π) Σ_{mn} ρ_nm (−1)^n ⟨m|D(2α)|n⟩, paired over m > n by Hermiticity.
    let mut w = 0.0;
    for n in 0..dim {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        w += sign * rho.element(n, n).re * d[(n, n)].re;
        for m in n + 1..dim {
            w += 2.0 * sign * (rho.element(n, m) * d[(m, n)]).re;
        }
    }
    w / PI
}

/// Square grid `[−half_width, half_width]²` with spacing `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width: 5.0,
            step: 0.025,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.step > 0.0 && self.step <= self.half_width) {
            return Err(Error::Grid(format!("invalid grid {self:?}")));
        }
        let n = 2.0 * self.half_width / self.step;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::Grid(format!(
                "step {} does not divide the width {}",
                self.step,
                2.0 * self.half_width
            )));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        let n = (2.0 * self.half_width / self.step).round() as usize;
        (0..=n).map(|i| -self.half_width + i as f64 * self.step).collect()
    }

    /// Same extent, half the spacing.
    pub fn refined(&self) -> Self {
        Self {
            half_width: self.half_width,
            step: 0.5 * self.step,
        }
    }
}

/// Wigner function sampled on a grid; `values[i * p.len() + j] = W(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub spec: GridSpec,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<f64>,
    pub convention: String,
    /// Trapezoid estimate of `∫ W dx dp`.
    pub mass: f64,
    pub warning: Option<String>,
}

impl PhaseSpaceGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.len() + j]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// 2-D composite trapezoid of `g(W)` over the grid.
    fn trapezoid(&self, g: impl Fn(f64) -> f64) -> f64 {
        let (nx, np) = (self.x.len(), self.p.len());
        let edge = |i: usize, n: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let mut s = 0.0;
        for i in 0..nx {
            let mut row = 0.0;
            for j in 0..np {
                row += edge(j, np) * g(self.at(i, j));
            }
            s += edge(i, nx) * row;
        }
        s * self.spec.step * self.spec.step
    }
}

/// Evaluates `W` of `rho` on the grid. A mass deficit above `1e-2` is reported
/// in `warning`.
pub fn wigner_from_density_matrix(rho: &FockDensityMatrix, spec: &GridSpec) -> Result<PhaseSpaceGrid> {
    spec.validate()?;
    let x = spec.axis();
    let p = x.clone();
    let dim = rho.dim();
    let values: Vec<f64> = x
        .par_iter()
        .map_init(
            || (DMatrix::zeros(dim, dim), vec![0.0; dim]),
            |(d, lag), &xi| {
                p.iter()
                    .map(|&pj| wigner_with(rho, Complex64::new(0.5 * xi, 0.5 * pj), d, lag))
                    .collect::<Vec<f64>>()
            },
        )
        .flatten()
        .collect();
    let mut grid = PhaseSpaceGrid {
        spec: *spec,
        x,
        p,
        values,
        convention: CONVENTION.to_string(),
        mass: 0.0,
        warning: None,
    };
    grid.mass = grid.trapezoid(|w| w);
    if (grid.mass - TOTAL_MASS).abs() > MASS_WARN {
        grid.warning = Some(format!(
            "grid captures mass {:.6} of {TOTAL_MASS}; extend the grid",
            grid.mass
        ));
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    /// `𝒩 = ½ ∫ (|W| − W) dx dp`.
    pub n: f64,
    pub n_rel: f64,
    /// `𝒩_{|1⟩}` computed with the same quadrature on the same grid.
    pub n_single_photon: f64,
    pub spec: GridSpec,
    pub convention: String,
}

/// Total and relative integrated negativity. Fails if the grid reproduces the
/// single-photon normalizer worse than `1e-3`.
pub fn integrated_negativity(grid: &PhaseSpaceGrid) -> Result<NegativityReport> {
    let one = FockDensityMatrix::fock(1, 2)?;
    let reference = wigner_from_density_matrix(&one, &grid.spec)?;
    let n1 = negativity_of(&reference);
    let closed = single_photon_negativity();
    if (n1 - closed).abs() > NORMALIZER_TOL {
        return Err(Error::Grid(format!(
            "grid {:?} gives N_|1> = {n1:.6}, closed form {closed:.6}",
            grid.spec
        )));
    }
    let n = negativity_of(grid);
    Ok(NegativityReport {
        n,
        n_rel: n / n1,
        n_single_photon: n1,
        spec: grid.spec,
        convention: grid.convention.clone(),
    })
}

fn negativity_of(grid: &PhaseSpaceGrid) -> f64 {
    grid.trapezoid(|w| 0.5 * (w.abs() - w)).max(0.0)
}

/// `D†(β) ρ D(β)` with matrix elements from the closed form. The result keeps
/// the smallest cutoff (at least the input's) holding all but `1e-10` of the
/// trace, renormalized.
pub fn displace_density_matrix(rho: &FockDensityMatrix, beta: Complex64) -> Result<FockDensityMatrix> {
    if !(beta.norm() <= MAX_DISPLACEMENT) {
        return Err(Error::param(format!("|beta| = {} exceeds {MAX_DISPLACEMENT}", beta.norm())));
    }
    let n = rho.dim();
    let big = MAX_FOCK;
    let d = displacement_matrix(beta, big);
    // (D†ρD)_{ab} = Σ_{c,e < n} conj(D_{ca}) ρ_{ce} D_{eb}.
    let dn = d.rows(0, n).into_owned();
    let full = dn.adjoint() * rho.matrix() * &dn;
    let mut keep = n;
    let mut kept_trace: f64 = (0..n).map(|i| full[(i, i)].re).sum();
    while 1.0 - kept_trace > DISPLACED_TRACE_TOL {
        if keep >= big {
            return Err(Error::Cutoff {
                have: big,
                required: big + 1,
            });
        }
        kept_trace += full[(keep, keep)].re;
        keep += 1;
    }
    // Headroom for the top of the truncated block.
    if keep + 2 > big {
        return Err(Error::Cutoff {
            have: big,
            required: keep + 2,
        });
    }
    FockDensityMatrix::from_approximate(full.view((0, 0), (keep, keep)).into_owned())
}

/// `Tr ρ²`.
pub fn purity(rho: &FockDensityMatrix) -> f64 {
    rho.matrix().iter().map(|c| c.norm_sqr()).sum()
}
