//! Analytic model of a resonantly driven two-level emitter in front of a mirror.
//!
//! The emitter has decay rate `gamma` into the single output channel and is
//! driven with real amplitude `omega` (`omega²` is the incoming power). In the
//! frame of the drive, `H = -i √γ Ω (σ₊ - σ₋)` and the zero-temperature master
//! equation is `dρ/dt = -i[H, ρ] + γ D[σ₋]ρ`. The output field obeys
//! `a_out = Ω + √γ σ₋`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterSpec;

/// Step of the fixed-step RK4 propagation of the Bloch equations, in units of `1/γ`.
pub const BLOCH_STEP: f64 = 1e-3;

/// Branch-point neighbourhood `|√(1 - 64Ω²/γ)| < BRANCH_EPS` evaluated by series.
const BRANCH_EPS: f64 = 1e-3;

/// Decay rate and drive amplitude of the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    gamma: f64,
    omega: f64,
}

impl SystemParams {
    pub fn new(gamma: f64, omega: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
        }
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::param(format!("omega must be >= 0, got {omega}")));
        }
        Ok(Self { gamma, omega })
    }

    /// Parameters at the incoherent drive point `Ω* = √(γ/8)`.
    pub fn incoherent(gamma: f64) -> Result<Self> {
        Self::new(gamma, incoherent_drive_amplitude(gamma)?)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Saturation parameter `8Ω²/γ`.
    fn saturation(&self) -> f64 {
        8.0 * self.omega * self.omega / self.gamma
    }
}

/// Expectation values `(⟨σ₊⟩, ⟨σ₋⟩, ⟨σ_z⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub sp: Complex64,
    pub sm: Complex64,
    pub sz: f64,
}

impl BlochVector {
    pub fn ground() -> Self {
        Self {
            sp: Complex64::new(0.0, 0.0),
            sm: Complex64::new(0.0, 0.0),
            sz: -1.0,
        }
    }

    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.sz)
    }

    pub fn norm(&self) -> f64 {
        (self.sp.norm_sqr() + self.sm.norm_sqr() + self.sz * self.sz).sqrt()
    }
}

/// Right-hand side of the Bloch equations for `(⟨σ₊⟩, ⟨σ₋⟩, ⟨σ_z⟩)`.
pub fn bloch_rhs(p: &SystemParams, v: &BlochVector) -> BlochVector {
    let drive = p.gamma.sqrt() * p.omega;
    let half = 0.5 * p.gamma;
    BlochVector {
        sp: -half * v.sp + drive * v.sz,
        sm: -half * v.sm + drive * v.sz,
        sz: -p.gamma * (1.0 + v.sz) - 2.0 * drive * (v.sp + v.sm).re,
    }
}

pub fn steady_state_bloch(p: &SystemParams) -> Result<BlochVector> {
    let p = SystemParams::new(p.gamma, p.omega)?;
    let denom = 1.0 + p.saturation();
    let s = -(2.0 * p.omega / p.gamma.sqrt()) / denom;
    Ok(BlochVector {
        sp: Complex64::new(s, 0.0),
        sm: Complex64::new(s, 0.0),
        sz: -1.0 / denom,
    })
}

/// Steady-state mean of the output field, `Ω + √γ ⟨σ₋⟩_ss`.
pub fn output_coherent_amplitude(p: &SystemParams) -> Result<Complex64> {
    let b = steady_state_bloch(p)?;
    Ok(p.omega + p.gamma.sqrt() * b.sm)
}

/// The drive amplitude `√(γ/8)` at which the coherent output vanishes.
pub fn incoherent_drive_amplitude(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
    }
    Ok((gamma / 8.0).sqrt())
}

/// Steady-state two-time correlation of the output field at delay `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationValue {
    pub t: f64,
    /// `⟨a_out†(t) a_out(0)⟩_ss`
    pub value: Complex64,
    /// `|⟨a_out⟩_ss|²`, the delay-independent part.
    pub coherent_part: Complex64,
    /// `γ (⟨σ₊(t)σ₋(0)⟩ - ⟨σ₊⟩⟨σ₋⟩)`, decays to zero.
    pub connected_part: Complex64,
    /// Full emitter correlation `⟨σ₊(t)σ₋(0)⟩_ss`, including `⟨σ₊⟩_ss⟨σ₋⟩_ss`.
    pub sigma_correlation: Complex64,
}

/// Square root `q = √(1 - 64Ω²/γ)` on the principal branch. The oscillating
/// exponent `√(64Ω²/γ - 1)` is identified with `-i q`, which makes the two
/// printed closed forms agree on both sides of the branch point.
fn branch_root(p: &SystemParams) -> Complex64 {
    Complex64::new(1.0 - 64.0 * p.omega * p.omega / p.gamma, 0.0).sqrt()
}

/// Coefficient `λ₊` multiplying `exp[-γt(3 + q)/4]`. `None` exactly at the branch point.
pub fn lambda_plus(p: &SystemParams) -> Option<Complex64> {
    let q = branch_root(p);
    if q.norm() == 0.0 {
        return None;
    }
    Some(lambda_numerator(p, q) / q)
}

/// `λ(q) q`, a quadratic polynomial in `q`.
fn lambda_numerator(p: &SystemParams, q: Complex64) -> Complex64 {
    let o2 = p.omega * p.omega;
    let denom = 2.0 * (1.0 + p.saturation()).powi(2);
    o2 * (q - 1.0) * (16.0 * o2 / p.gamma - 1.0 + q) / denom
}

/// Connected emitter correlation `⟨σ₊(t)σ₋(0)⟩ - ⟨σ₊⟩⟨σ₋⟩` in closed form.
fn connected_sigma(p: &SystemParams, t: f64) -> Complex64 {
    let g = p.gamma;
    let o2 = p.omega * p.omega;
    let incoherent = (2.0 * o2 / g) / (1.0 + p.saturation()) * (-0.5 * g * t).exp();

    let q = branch_root(p);
    let s = 0.25 * g * t;
    let damp = (-3.0 * s).exp();
    let pair = if q.norm() < BRANCH_EPS {
        // λ(q)e^{-qs} + λ(-q)e^{qs} = [P(q)e^{-qs} - P(-q)e^{qs}]/q is even in q;
        // expand to O(q²) with P(q) = p0 + p1 q + p2 q².
        let k = o2 / (2.0 * (1.0 + p.saturation()).powi(2));
        let c = 16.0 * o2 / g - 1.0;
        let (p0, p1, p2) = (-k * c, k * (c - 1.0), k);
        let first = p1 - s * p0;
        let third = -s * s * s * p0 + 3.0 * s * s * p1 - 6.0 * s * p2;
        let q2 = q * q;
        2.0 * (first + q2 * third / 6.0) * damp
    } else {
        let lp = lambda_numerator(p, q) / q;
        let lm = lambda_numerator(p, -q) / (-q);
        lp * (-s * (3.0 + q)).exp() + lm * (-s * (3.0 - q)).exp()
    };
    incoherent + pair / g
}

/// Closed-form `⟨a_out†(t) a_out(0)⟩_ss`.
pub fn two_time_correlation(p: &SystemParams, t: f64) -> Result<CorrelationValue> {
    let p = SystemParams::new(p.gamma, p.omega)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(format!("delay must be >= 0, got {t}")));
    }
    let b = steady_state_bloch(&p)?;
    let amp = output_coherent_amplitude(&p)?;
    let coherent_part = Complex64::new(amp.norm_sqr(), 0.0);
    let connected = connected_sigma(&p, t);
    let connected_part = p.gamma * connected;
    Ok(CorrelationValue {
        t,
        value: coherent_part + connected_part,
        coherent_part,
        connected_part,
        sigma_correlation: b.sp * b.sm + connected,
    })
}

/// One RK4 step of the affine system `v' = A v + b` for the regression vector.
fn rk4_step<F: Fn(&[Complex64; 3]) -> [Complex64; 3]>(
    rhs: &F,
    v: &[Complex64; 3],
    h: f64,
) -> [Complex64; 3] {
    let add = |a: &[Complex64; 3], k: &[Complex64; 3], s: f64| {
        [a[0] + k[0] * s, a[1] + k[1] * s, a[2] + k[2] * s]
    };
    let k1 = rhs(v);
    let k2 = rhs(&add(v, &k1, 0.5 * h));
    let k3 = rhs(&add(v, &k2, 0.5 * h));
    let k4 = rhs(&add(v, &k3, h));
    let mut out = *v;
    for i in 0..3 {
        out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
    out
}

/// Integrate `v' = rhs(v)` from 0, returning the state at each (sorted) time.
fn propagate_series<F: Fn(&[Complex64; 3]) -> [Complex64; 3]>(
    rhs: F,
    v0: [Complex64; 3],
    times: &[f64],
    step: f64,
) -> Result<Vec<[Complex64; 3]>> {
    let mut out = Vec::with_capacity(times.len());
    let mut v = v0;
    let mut now = 0.0;
    for &t in times {
        if !(t.is_finite() && t >= now) {
            return Err(Error::param(format!(
                "times must be finite, non-negative and sorted (got {t} after {now})"
            )));
        }
        let span = t - now;
        let n = (span / step).ceil() as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                v = rk4_step(&rhs, &v, h);
            }
        }
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Numerical(format!(
                "Bloch propagation diverged before t = {t} (state {v:?})"
            )));
        }
        out.push(v);
        now = t;
    }
    Ok(out)
}

/// `⟨σ₊(t)σ₋(0)⟩_ss` from the quantum regression theorem, propagating the Bloch
/// equations from the post-measurement initial condition. Independent of the
/// closed form in [`two_time_correlation`].
pub fn regression_correlation(p: &SystemParams, t: f64) -> Result<Complex64> {
    Ok(regression_correlation_series(p, &[t])?[0])
}

/// [`regression_correlation`] at several sorted delays in one propagation.
pub fn regression_correlation_series(p: &SystemParams, times: &[f64]) -> Result<Vec<Complex64>> {
    let p = SystemParams::new(p.gamma, p.omega)?;
    let ss = steady_state_bloch(&p)?;
    let drive = p.gamma.sqrt() * p.omega;
    let g = p.gamma;
    // v = (⟨σ₊(t)σ₋⟩, ⟨σ₋(t)σ₋⟩, ⟨σ_z(t)σ₋⟩); the constant in the σ_z equation
    // picks up ⟨σ₋⟩_ss.
    let inhom = -g * ss.sm;
    let rhs = move |v: &[Complex64; 3]| {
        [
            -0.5 * g * v[0] + drive * v[2],
            -0.5 * g * v[1] + drive * v[2],
            -g * v[2] + inhom - 2.0 * drive * (v[0] + v[1]),
        ]
    };
    let v0 = [
        Complex64::new(ss.excited_population(), 0.0),
        Complex64::new(0.0, 0.0),
        -ss.sm,
    ];
    let states = propagate_series(rhs, v0, times, BLOCH_STEP / g)?;
    Ok(states.into_iter().map(|v| v[0]).collect())
}

/// Propagate the unconditional Bloch vector for time `t` (RK4, step `1e-3/γ`).
pub fn propagate_bloch(p: &SystemParams, v0: &BlochVector, t: f64) -> Result<BlochVector> {
    let p = SystemParams::new(p.gamma, p.omega)?;
    let rhs = move |v: &[Complex64; 3]| {
        let b = bloch_rhs(
            &p,
            &BlochVector {
                sp: v[0],
                sm: v[1],
                sz: v[2].re,
            },
        );
        [b.sp, b.sm, Complex64::new(b.sz, 0.0)]
    };
    let v = propagate_series(
        rhs,
        [v0.sp, v0.sm, Complex64::new(v0.sz, 0.0)],
        &[t],
        BLOCH_STEP / p.gamma,
    )?[0];
    Ok(BlochVector {
        sp: v[0],
        sm: v[1],
        sz: v[2].re,
    })
}

/// Steady-state emitter correlation `⟨σ₊(τ)σ₋(0)⟩` (real for this model).
fn sigma_correlation_real(p: &SystemParams, tau: f64) -> f64 {
    let ss = steady_state_bloch(p).expect("validated params");
    (ss.sp * ss.sm + connected_sigma(p, tau)).re
}

/// Mean photon number of the filtered emission-only mode,
/// `γ ∫∫ f(t) f(t') ⟨σ₊(t)σ₋(t')⟩_ss dt dt'`.
///
/// Composite trapezoid on a uniform `(t, t')` grid of step `T/2000`; by
/// stationarity the kernel only depends on `|i - j|`, so it is tabulated once
/// and the double sum runs over the upper triangle.
pub fn filtered_mean_photon_number(p: &SystemParams, f: &FilterSpec) -> Result<f64> {
    let p = SystemParams::new(p.gamma, p.omega)?;
    crate::filter::filter_norm(f)?;
    if p.omega == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = f.support();
    let h0 = f.length() / 2000.0;
    let m = ((b - a) / h0).ceil() as usize;
    let h = (b - a) / m as f64;

    let u: Vec<f64> = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            w * h * f.value_closed(a + i as f64 * h)
        })
        .collect();
    let kernel: Vec<f64> = (0..=m)
        .map(|k| sigma_correlation_real(&p, k as f64 * h))
        .collect();

    let mut diag = 0.0;
    for ui in &u {
        diag += ui * ui;
    }
    let mut off = 0.0;
    for k in 1..=m {
        let mut acc = 0.0;
        for i in 0..=(m - k) {
            acc += u[i] * u[i + k];
        }
        off += kernel[k] * acc;
    }
    Ok(p.gamma * (kernel[0] * diag + 2.0 * off))
}
