//! Adaptive Gauss–Kronrod (7/15) quadrature, scalar and vector-valued.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 40;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let out = integrate_vec(|x, buf| buf[0] = f(x), a, b, 1, tol)?;
    Ok(out[0])
}

/// Integrate a vector-valued function component-wise. The tolerance applies to
/// the largest component error on every accepted panel.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("non-finite interval [{a}, {b}]")));
    }
    let mut total = vec![0.0; dim];
    if a == b {
        return Ok(total);
    }
    let mut scratch = Scratch::new(dim);
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, local_tol, depth)) = stack.pop() {
        let err = scratch.panel(&mut f, lo, hi);
        if err <= local_tol || (hi - lo).abs() < 1e-14 * (1.0 + lo.abs()) {
            for (t, k) in total.iter_mut().zip(&scratch.kronrod) {
                *t += k;
            }
            continue;
        }
        if depth >= MAX_DEPTH {
            return Err(Error::Numerical(format!(
                "quadrature did not converge on [{lo}, {hi}] (error estimate {err:e}, tolerance {local_tol:e})"
            )));
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, 0.5 * local_tol, depth + 1));
        stack.push((lo, mid, 0.5 * local_tol, depth + 1));
    }
    Ok(total)
}

struct Scratch {
    kronrod: Vec<f64>,
    gauss: Vec<f64>,
    val: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Self {
            kronrod: vec![0.0; dim],
            gauss: vec![0.0; dim],
            val: vec![0.0; dim],
        }
    }

    /// Fills `kronrod` with the K15 estimate and returns the max |K15 - G7|.
    fn panel<F: FnMut(f64, &mut [f64])>(&mut self, f: &mut F, lo: f64, hi: f64) -> f64 {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.kronrod.iter_mut().for_each(|v| *v = 0.0);
        self.gauss.iter_mut().for_each(|v| *v = 0.0);

        f(center, &mut self.val);
        for i in 0..self.val.len() {
            self.kronrod[i] += WGK[7] * self.val[i];
            self.gauss[i] += WG[3] * self.val[i];
        }
        for (k, &x) in XGK.iter().enumerate().take(7) {
            let gauss_w = if k % 2 == 1 { Some(WG[k / 2]) } else { None };
            for sign in [-1.0, 1.0] {
                f(center + sign * half * x, &mut self.val);
                for i in 0..self.val.len() {
                    self.kronrod[i] += WGK[k] * self.val[i];
                    if let Some(w) = gauss_w {
                        self.gauss[i] += w * self.val[i];
                    }
                }
            }
        }
        let mut err: f64 = 0.0;
        for i in 0..self.kronrod.len() {
            self.kronrod[i] *= half;
            self.gauss[i] *= half;
            err = err.max((self.kronrod[i] - self.gauss[i]).abs());
        }
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, 1e-12).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn gaussian_integral() {
        let v = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-13).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn vector_components_independent() {
        let v = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            0.0,
            std::f64::consts::PI,
            2,
            1e-12,
        )
        .unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(integrate(|x| x, 3.0, 3.0, 1e-9).unwrap(), 0.0);
    }
}
