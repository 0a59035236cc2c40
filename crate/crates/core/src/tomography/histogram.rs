use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::QuadratureSample;

pub const DEFAULT_RANGE: (f64, f64) = (-6.0, 6.0);
pub const DEFAULT_BINS: usize = 81;

/// Bin width of the default geometry.
pub const DEFAULT_BIN_WIDTH: f64 = (DEFAULT_RANGE.1 - DEFAULT_RANGE.0) / DEFAULT_BINS as f64;

/// Strictly increasing bin edges `x_0 < … < x_J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BinEdges(Vec<f64>);

impl BinEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::param("need at least two bin edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("bin edges must be finite"));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("bin edges must be strictly increasing"));
        }
        Ok(Self(edges))
    }

    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) {
            return Err(Error::param(format!("invalid uniform binning [{lo}, {hi}] with {bins} bins")));
        }
        let w = (hi - lo) / bins as f64;
        let mut e: Vec<f64> = (0..bins).map(|j| lo + j as f64 * w).collect();
        e.push(hi);
        Self::new(e)
    }

    /// Symmetric range wide enough that every Fock state below `n_fock` keeps
    /// more than `1 − 1e-3` of its quadrature mass inside, at the default bin
    /// width. Never narrower than the default range.
    pub fn for_cutoff(n_fock: usize) -> Result<Self> {
        let half = (2.0 * (n_fock as f64).sqrt() + 1.5).max(DEFAULT_RANGE.1);
        let half = (2.0 * half).ceil() / 2.0;
        let bins = (2.0 * half / DEFAULT_BIN_WIDTH).round() as usize;
        Self::uniform(-half, half, bins)
    }

    pub fn bin_count(&self) -> usize {
        self.0.len() - 1
    }

    pub fn bin(&self, j: usize) -> (f64, f64) {
        (self.0[j], self.0[j + 1])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn range(&self) -> (f64, f64) {
        (self.0[0], self.0[self.0.len() - 1])
    }

    /// Bin containing `x` (half-open bins, last bin closed), or `None` outside.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if x < lo || x > hi {
            return None;
        }
        let j = self.0.partition_point(|&e| e <= x);
        Some(j.saturating_sub(1).min(self.bin_count() - 1))
    }
}

impl Default for BinEdges {
    fn default() -> Self {
        Self::uniform(DEFAULT_RANGE.0, DEFAULT_RANGE.1, DEFAULT_BINS).expect("valid default binning")
    }
}

impl TryFrom<Vec<f64>> for BinEdges {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BinEdges> for Vec<f64> {
    fn from(e: BinEdges) -> Self {
        e.0
    }
}

/// What to do with samples outside the edge range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverflowPolicy {
    /// Drop them from the histogram and count them per phase.
    #[default]
    Tally,
    /// Put them in the nearest extreme bin.
    Clamp,
}

/// Counts `n_{θ,j}` of quadrature samples per phase and bin.
///
/// `phases[k]` is the angle `θ` of `X_θ = a e^{iθ} + a† e^{−iθ}` measured for
/// samples with phase index `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureHistogram {
    pub phases: Vec<f64>,
    pub edges: BinEdges,
    pub counts: Vec<Vec<u64>>,
    /// Per phase, samples that fell outside the range and were not clamped.
    pub overflow: Vec<u64>,
}

impl QuadratureHistogram {
    /// `n_θ` for phase index `k`.
    pub fn phase_total(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// `n`.
    pub fn total(&self) -> u64 {
        (0..self.phases.len()).map(|k| self.phase_total(k)).sum()
    }

    pub fn overflow_total(&self) -> u64 {
        self.overflow.iter().sum()
    }

    /// Counts as a frequency table for the likelihood.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        self.counts.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect()
    }
}

/// Bins samples by `phase_index`; `phases` gives `θ` for each index.
pub fn bin_samples(
    samples: &[QuadratureSample],
    edges: &BinEdges,
    phases: &[f64],
    policy: OverflowPolicy,
) -> Result<QuadratureHistogram> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to bin".into()));
    }
    if phases.is_empty() {
        return Err(Error::Data("empty phase list".into()));
    }
    let bins = edges.bin_count();
    let mut counts = vec![vec![0u64; bins]; phases.len()];
    let mut overflow = vec![0u64; phases.len()];
    for (i, s) in samples.iter().enumerate() {
        if s.value.is_nan() {
            return Err(Error::Data(format!("sample {i} is NaN")));
        }
        if s.phase_index >= phases.len() {
            return Err(Error::Data(format!(
                "sample {i} has phase index {} but only {} phases are listed",
                s.phase_index,
                phases.len()
            )));
        }
        let row = &mut counts[s.phase_index];
        match edges.locate(s.value) {
            Some(j) => row[j] += 1,
            None => match policy {
                OverflowPolicy::Tally => overflow[s.phase_index] += 1,
                OverflowPolicy::Clamp => {
                    let j = if s.value < edges.range().0 { 0 } else { bins - 1 };
                    row[j] += 1;
                }
            },
        }
    }
    Ok(QuadratureHistogram {
        phases: phases.to_vec(),
        edges: edges.clone(),
        counts,
        overflow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(k: usize, v: f64) -> QuadratureSample {
        QuadratureSample {
            phase_index: k,
            phase: 0.0,
            value: v,
            sample_index: 0,
            trajectory_id: 0,
        }
    }

    #[test]
    fn conservation_small() {
        let edges = BinEdges::uniform(-6.0, 6.0, 80).unwrap();
        let s = [sample(0, -0.1), sample(0, 0.0), sample(0, 5.9)];
        let h = bin_samples(&s, &edges, &[0.0], OverflowPolicy::Tally).unwrap();
        assert_eq!(h.total(), 3);
        assert_eq!(h.counts[0][79], 1);
    }

    #[test]
    fn overflow_and_clamp() {
        let edges = BinEdges::default();
        assert_eq!(edges.bin_count(), 81);
        let s = [sample(0, -7.0), sample(0, 6.0), sample(0, 9.0)];
        let h = bin_samples(&s, &edges, &[0.0], OverflowPolicy::Tally).unwrap();
        assert_eq!((h.total(), h.overflow_total()), (1, 2));
        let h = bin_samples(&s, &edges, &[0.0], OverflowPolicy::Clamp).unwrap();
        assert_eq!((h.total(), h.counts[0][0], h.counts[0][80]), (3, 1, 2));
    }

    #[test]
    fn errors() {
        let edges = BinEdges::default();
        assert!(bin_samples(&[], &edges, &[0.0], OverflowPolicy::Tally).is_err());
        let e = bin_samples(&[sample(0, 0.0), sample(0, f64::NAN)], &edges, &[0.0], OverflowPolicy::Tally);
        assert!(matches!(e, Err(Error::Data(m)) if m.contains("sample 1")));
        assert!(bin_samples(&[sample(2, 0.0)], &edges, &[0.0, 1.0], OverflowPolicy::Tally).is_err());
        assert!(BinEdges::new(vec![0.0, 0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn counts_conserved(values in prop::collection::vec((0usize..3, -8.0f64..8.0), 1..200)) {
            let s: Vec<_> = values.iter().map(|&(k, v)| sample(k, v)).collect();
            let edges = BinEdges::default();
            let h = bin_samples(&s, &edges, &[0.0, 1.0, 2.0], OverflowPolicy::Tally).unwrap();
            prop_assert_eq!(h.total() + h.overflow_total(), s.len() as u64);
            for k in 0..3 {
                let expect = values.iter().filter(|v| v.0 == k).count() as u64;
                prop_assert_eq!(h.phase_total(k) + h.overflow[k], expect);
            }
        }

        #[test]
        fn locate_is_consistent(x in -6.0f64..6.0) {
            let edges = BinEdges::default();
            let j = edges.locate(x).unwrap();
            let (lo, hi) = edges.bin(j);
            prop_assert!(lo <= x && x <= hi);
        }
    }
}
