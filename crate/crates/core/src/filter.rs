//! Temporal-mode filters that contract the continuum output field into a
//! single bosonic mode.
//!
//! A filter `f(t)` defines the mode operator `A_f = ∫ f(t) a_out(t) dt`; it is
//! a proper bosonic mode when `∫ |f|² dt = 1`. Filters are kept analytic and are
//! only sampled on the trajectory grid.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Constant `1/√T` on `[t0, t0 + T)`.
    Boxcar,
    /// Gaussian whose intensity `|f|²` has mean `t0 + T/2` and standard
    /// deviation `T/4`, truncated to `t ≥ 0` and renormalized.
    Gaussian,
}

/// An analytic, unit-norm temporal filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    kind: FilterKind,
    t0: f64,
    length: f64,
    amplitude: f64,
}

impl FilterSpec {
    pub fn new(kind: FilterKind, t0: f64, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Filter(format!("filter time T must be > 0, got {length}")));
        }
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(Error::Filter(format!("start time t0 must be >= 0, got {t0}")));
        }
        let amplitude = match kind {
            FilterKind::Boxcar => 1.0 / length.sqrt(),
            FilterKind::Gaussian => {
                let sigma = 0.25 * length;
                let center = t0 + 0.5 * length;
                // ∫_0^∞ exp(-(t-c)²/2σ²) dt = σ √(π/2) erfc(-c / (σ√2))
                let mass = sigma * (0.5 * PI).sqrt() * libm::erfc(-center / (sigma * 2f64.sqrt()));
                1.0 / mass.sqrt()
            }
        };
        Ok(Self {
            kind,
            t0,
            length,
            amplitude,
        })
    }

    pub fn boxcar(t0: f64, length: f64) -> Result<Self> {
        Self::new(FilterKind::Boxcar, t0, length)
    }

    pub fn gaussian(t0: f64, length: f64) -> Result<Self> {
        Self::new(FilterKind::Gaussian, t0, length)
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Filter time `T`.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Amplitude normalization constant (`1/√T` for the boxcar, the Gaussian peak otherwise).
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Interval outside of which the filter is zero, or negligible (< e^-32 of
    /// its peak intensity) for the Gaussian.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            FilterKind::Boxcar => (self.t0, self.t0 + self.length),
            FilterKind::Gaussian => {
                let sigma = 0.25 * self.length;
                let center = self.t0 + 0.5 * self.length;
                ((center - 8.0 * sigma).max(0.0), center + 8.0 * sigma)
            }
        }
    }

    /// Same filter moved to start at `t0`.
    pub fn with_start(&self, t0: f64) -> Result<Self> {
        Self::new(self.kind, t0, self.length)
    }

    /// Filter value treating the boxcar window as closed; used by quadrature
    /// rules that place nodes on the window edges.
    pub(crate) fn value_closed(&self, t: f64) -> f64 {
        match self.kind {
            FilterKind::Boxcar if t >= self.t0 && t <= self.t0 + self.length => self.amplitude,
            _ => evaluate_filter(self, t),
        }
    }
}

/// Filter amplitude `f(t)`. Negative times evaluate to zero.
pub fn evaluate_filter(f: &FilterSpec, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    match f.kind {
        FilterKind::Boxcar => {
            if t >= f.t0 && t < f.t0 + f.length {
                f.amplitude
            } else {
                0.0
            }
        }
        FilterKind::Gaussian => {
            let sigma = 0.25 * f.length;
            let d = t - (f.t0 + 0.5 * f.length);
            f.amplitude * (-d * d / (4.0 * sigma * sigma)).exp()
        }
    }
}

/// Numerically integrates `∫ |f(t)|² dt`.
///
/// Fails if the result deviates from one by more than `1e-8`.
pub fn filter_norm(f: &FilterSpec) -> Result<f64> {
    let norm = match f.kind {
        FilterKind::Boxcar => quad::integrate(|_| f.amplitude * f.amplitude, f.t0, f.t0 + f.length, 1e-14)?,
        FilterKind::Gaussian => {
            let sigma = 0.25 * f.length;
            let center = f.t0 + 0.5 * f.length;
            let lo = (center - 12.0 * sigma).max(0.0);
            let hi = center + 12.0 * sigma;
            quad::integrate(
                |t| {
                    let v = evaluate_filter(f, t);
                    v * v
                },
                lo,
                hi,
                1e-14,
            )?
        }
    };
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Filter(format!("filter norm {norm} deviates from 1")));
    }
    Ok(norm)
}

/// Approximate bandwidth `2/(πT)` (width of the sinc main lobe). Boxcar only.
pub fn filter_bandwidth(f: &FilterSpec) -> Result<f64> {
    match f.kind {
        FilterKind::Boxcar => Ok(2.0 / (PI * f.length)),
        FilterKind::Gaussian => Err(Error::Filter(
            "bandwidth is only defined for the boxcar filter".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boxcar_values() {
        let f = FilterSpec::boxcar(10.0, 4.0).unwrap();
        assert_eq!(evaluate_filter(&f, 11.0), 0.5);
        assert_eq!(evaluate_filter(&f, 9.0), 0.0);
        assert_eq!(evaluate_filter(&f, 14.0), 0.0);
        assert_eq!(evaluate_filter(&f, 10.0), 0.5);
    }

    #[test]
    fn gaussian_peak_fixed_by_norm() {
        let f = FilterSpec::gaussian(10.0, 4.0).unwrap();
        // Independent oracle: dense trapezoid of exp(-(t-c)²/(2σ²)) over ±12σ.
        let sigma = 1.0;
        let c = 12.0;
        let h = 1e-4;
        let n = (24.0 * sigma / h) as usize;
        let mut mass = 0.0;
        for i in 0..=n {
            let t = c - 12.0 * sigma + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * (-(t - c) * (t - c) / (2.0 * sigma * sigma)).exp();
        }
        mass *= h;
        let peak = 1.0 / mass.sqrt();
        assert!((evaluate_filter(&f, c) - peak).abs() < 1e-10);
    }

    #[test]
    fn norms() {
        assert!((filter_norm(&FilterSpec::boxcar(3.0, 7.0).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert!((filter_norm(&FilterSpec::gaussian(10.0, 4.0).unwrap()).unwrap() - 1.0).abs() < 1e-10);
        // Window starting at zero: the Gaussian tail below t = 0 is cut and renormalized.
        assert!((filter_norm(&FilterSpec::gaussian(0.0, 4.0).unwrap()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn invalid_windows_rejected() {
        assert!(matches!(FilterSpec::boxcar(0.0, 0.0), Err(Error::Filter(_))));
        assert!(FilterSpec::boxcar(-1.0, 1.0).is_err());
        assert!(FilterSpec::gaussian(0.0, f64::NAN).is_err());
    }

    #[test]
    fn bandwidth() {
        let b1 = filter_bandwidth(&FilterSpec::boxcar(0.0, 1.0).unwrap()).unwrap();
        assert!((b1 - std::f64::consts::FRAC_2_PI).abs() < 1e-12);
        let b2 = filter_bandwidth(&FilterSpec::boxcar(0.0, 2.0).unwrap()).unwrap();
        assert!((b2 - std::f64::consts::FRAC_1_PI).abs() < 1e-12);
        let b_inf = filter_bandwidth(&FilterSpec::boxcar(0.0, 1e12).unwrap()).unwrap();
        assert!(b_inf < 1e-12);
        assert!(filter_bandwidth(&FilterSpec::gaussian(0.0, 1.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn unit_norm_for_any_window(t0 in 0.0f64..50.0, len in 0.05f64..30.0, gauss in any::<bool>()) {
            let kind = if gauss { FilterKind::Gaussian } else { FilterKind::Boxcar };
            let f = FilterSpec::new(kind, t0, len).unwrap();
            let n = filter_norm(&f).unwrap();
            prop_assert!((n - 1.0).abs() < 1e-10);
        }

        #[test]
        fn boxcar_scale_covariance(t0 in 0.0f64..20.0, len in 0.1f64..10.0, frac in -0.5f64..1.5, s in 0.1f64..10.0) {
            let t = t0 + frac * len;
            prop_assume!(t >= 0.0);
            let f = FilterSpec::boxcar(t0, len).unwrap();
            let g = FilterSpec::boxcar(t0 * s, len * s).unwrap();
            // Skip points where rounding could move the window edge.
            prop_assume!((frac.abs() > 1e-9) && ((frac - 1.0).abs() > 1e-9));
            let lhs = evaluate_filter(&g, t * s);
            let rhs = evaluate_filter(&f, t) / s.sqrt();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
