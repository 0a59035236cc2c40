use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::filter::{FilterKind, FilterSpec};
use crate::phase_space::GridSpec;
use crate::tls::{incoherent_drive_amplitude, SystemParams};
use crate::tomography::{BinEdges, MleOptions, OverflowPolicy, DEFAULT_BINS, DEFAULT_RANGE};
use crate::trajectory::{Harvesting, MAX_DT, MIN_BURN_IN};

/// Drive amplitude: a number or the incoherent point `"omega_star"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Value(f64),
    Named(NamedOmega),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedOmega {
    OmegaStar,
}

impl OmegaSpec {
    pub fn resolve(&self, gamma: f64) -> Result<f64> {
        match self {
            OmegaSpec::Value(v) => Ok(*v),
            OmegaSpec::Named(NamedOmega::OmegaStar) => incoherent_drive_amplitude(gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub omega: OmegaSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub kind: FilterKind,
    /// Measurement start; also the burn-in time of every trajectory.
    pub t0: f64,
    #[serde(rename = "T")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub dt: f64,
    pub substeps: u32,
    pub phases: usize,
    pub samples_per_phase: usize,
    pub seed: u64,
    pub harvesting: Harvesting,
}

/// Fixed value or `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto<T> {
    Fixed(T),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformBins {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographySection {
    /// `"auto"` widens the range with the cutoff; see [`BinEdges::for_cutoff`].
    pub edges: Auto<UniformBins>,
    pub overflow: OverflowPolicy,
    pub n_fock: Auto<usize>,
    pub tol: f64,
    pub max_iter: usize,
    /// Also reconstruct with `N_Fock + 2` and report the largest population shift.
    pub cutoff_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub grid: GridSpec,
    pub write_wigner: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omegas: Vec<OmegaSpec>,
    #[serde(rename = "Ts")]
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub write_samples: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamsConfig,
    pub filter: FilterConfig,
    pub trajectory: TrajectorySection,
    pub tomography: TomographySection,
    pub analysis: AnalysisSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    /// Desk-scale profile: 12 phases × 2000 samples.
    fn default() -> Self {
        Self {
            params: ParamsConfig {
                gamma: 1.0,
                omega: OmegaSpec::Named(NamedOmega::OmegaStar),
            },
            filter: FilterConfig {
                kind: FilterKind::Boxcar,
                t0: MIN_BURN_IN,
                length: 4.0,
            },
            trajectory: TrajectorySection {
                dt: MAX_DT,
                substeps: 1,
                phases: 12,
                samples_per_phase: 2000,
                seed: 1,
                harvesting: Harvesting::FreshPerSample,
            },
            tomography: TomographySection {
                edges: Auto::Auto(AutoTag::Auto),
                overflow: OverflowPolicy::Tally,
                n_fock: Auto::Auto(AutoTag::Auto),
                tol: 1e-6,
                max_iter: 5000,
                cutoff_check: true,
            },
            analysis: AnalysisSection {
                grid: GridSpec::default(),
                write_wigner: true,
            },
            sweep: SweepSection {
                omegas: vec![
                    OmegaSpec::Value(0.2),
                    OmegaSpec::Named(NamedOmega::OmegaStar),
                    OmegaSpec::Value(0.5),
                    OmegaSpec::Value(0.8),
                ],
                lengths: (1..=10).map(f64::from).collect(),
            },
            output: OutputSection {
                dir: PathBuf::from("out"),
                write_samples: true,
            },
        }
    }
}

/// Sets `root[path] = value` for a dotted path. Intermediate objects must exist.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(parts[..i].join("."), "not an object"))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*key) {
                return Err(Error::config(path, "unknown key"));
            }
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj
            .get_mut(*key)
            .ok_or_else(|| Error::config(parts[..=i].join("."), "unknown key"))?;
    }
    Err(Error::config(path, "empty path"))
}

/// Parses `--a.b value` pairs. Values are read as JSON when possible, else as strings.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let key = flag
            .strip_prefix("--")
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::config(flag.as_str(), "expected an override of the form --section.key value"))?;
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::config(key, "missing value"))?;
                (key.to_string(), v.clone())
            }
        };
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        out.push((key, value));
    }
    Ok(out)
}

fn section<T: serde::de::DeserializeOwned>(root: &Value, key: &str) -> Result<T> {
    let v = root.get(key).ok_or_else(|| Error::config(key, "missing section"))?;
    serde_json::from_value(v.clone()).map_err(|e| Error::config(key, e.to_string()))
}

impl ExperimentConfig {
    /// Loads `path` (or the defaults), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut root = serde_json::to_value(Self::default())?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?;
            merge(&mut root, file, "")?;
        }
        for (k, v) in overrides {
            set_path(&mut root, k, v.clone())?;
        }
        Self::from_value(&root)
    }

    pub fn from_value(root: &Value) -> Result<Self> {
        if let Some(obj) = root.as_object() {
            for k in obj.keys() {
                if !["params", "filter", "trajectory", "tomography", "analysis", "sweep", "output"].contains(&k.as_str()) {
                    return Err(Error::config(k.as_str(), "unknown section"));
                }
            }
        }
        let cfg = Self {
            params: section(root, "params")?,
            filter: section(root, "filter")?,
            trajectory: section(root, "trajectory")?,
            tomography: section(root, "tomography")?,
            analysis: section(root, "analysis")?,
            sweep: section(root, "sweep")?,
            output: section(root, "output")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.params.gamma;
        SystemParams::new(g, 0.0).map_err(|e| Error::config("params.gamma", e.to_string()))?;
        self.system_params(&self.params.omega).map_err(|e| Error::config("params.omega", e.to_string()))?;
        for (i, o) in self.sweep.omegas.iter().enumerate() {
            self.system_params(o)
                .map_err(|e| Error::config(format!("sweep.omegas[{i}]"), e.to_string()))?;
        }
        self.filter_spec(self.filter.length)
            .map_err(|e| Error::config("filter", e.to_string()))?;
        if self.filter.t0 < MIN_BURN_IN / g {
            return Err(Error::config("filter.t0", format!("burn-in must be >= {}/gamma", MIN_BURN_IN)));
        }
        for (i, &t) in self.sweep.lengths.iter().enumerate() {
            self.filter_spec(t)
                .map_err(|e| Error::config(format!("sweep.Ts[{i}]"), e.to_string()))?;
        }
        let tr = &self.trajectory;
        if !(tr.dt > 0.0 && tr.dt <= MAX_DT / g * (1.0 + 1e-12)) {
            return Err(Error::config("trajectory.dt", format!("must be in (0, {MAX_DT}/gamma]")));
        }
        if tr.substeps == 0 {
            return Err(Error::config("trajectory.substeps", "must be >= 1"));
        }
        if tr.phases == 0 {
            return Err(Error::config("trajectory.phases", "must be >= 1"));
        }
        if tr.samples_per_phase == 0 {
            return Err(Error::config("trajectory.samples_per_phase", "must be >= 1"));
        }
        if let Harvesting::MultiWindow {
            dead_time,
            windows_per_trajectory,
        } = tr.harvesting
        {
            if !(dead_time >= 0.0) || windows_per_trajectory == 0 {
                return Err(Error::config("trajectory.harvesting", "need dead_time >= 0 and windows >= 1"));
            }
        }
        let tm = &self.tomography;
        if let Auto::Fixed(n) = tm.n_fock {
            if !(2..=crate::tomography::MAX_FOCK).contains(&n) {
                return Err(Error::config("tomography.n_fock", "must be in [2, 64] or \"auto\""));
            }
        }
        if let Auto::Fixed(b) = tm.edges {
            BinEdges::uniform(b.lo, b.hi, b.bins).map_err(|e| Error::config("tomography.edges", e.to_string()))?;
        }
        if !(tm.tol > 0.0) || tm.max_iter == 0 {
            return Err(Error::config("tomography", "need tol > 0 and max_iter >= 1"));
        }
        self.analysis
            .grid
            .validate()
            .map_err(|e| Error::config("analysis.grid", e.to_string()))?;
        if self.sweep.omegas.is_empty() || self.sweep.lengths.is_empty() {
            return Err(Error::config("sweep", "omegas and Ts must be nonempty"));
        }
        Ok(())
    }

    pub fn system_params(&self, omega: &OmegaSpec) -> Result<SystemParams> {
        SystemParams::new(self.params.gamma, omega.resolve(self.params.gamma)?)
    }

    pub fn filter_spec(&self, length: f64) -> Result<FilterSpec> {
        FilterSpec::new(self.filter.kind, self.filter.t0, length)
    }

    pub fn mle_options(&self) -> MleOptions {
        MleOptions {
            tol: self.tomography.tol,
            max_iter: self.tomography.max_iter,
            ..MleOptions::default()
        }
    }

    /// Default cutoff for filter time `T` (4 up to `T = 2`, else 8), raised
    /// when the photon-number oracle `n̄` calls for more.
    pub fn n_fock_for(&self, length: f64, n_bar: f64) -> usize {
        match self.tomography.n_fock {
            Auto::Fixed(n) => n,
            Auto::Auto(_) => {
                let base = if length * self.params.gamma <= 2.0 { 4 } else { 8 };
                let needed = (n_bar + 4.0 * n_bar.sqrt() + 2.0).ceil() as usize;
                base.max(needed).min(crate::tomography::MAX_FOCK)
            }
        }
    }

    pub fn edges_for(&self, n_fock: usize) -> Result<BinEdges> {
        match self.tomography.edges {
            Auto::Fixed(b) => BinEdges::uniform(b.lo, b.hi, b.bins),
            Auto::Auto(_) => BinEdges::for_cutoff(n_fock),
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Recursively overlays `src` onto `dst`, rejecting keys `dst` lacks.
fn merge(dst: &mut Value, src: Value, path: &str) -> Result<()> {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match d.get_mut(&k) {
                    // Tagged enums and "auto"/object alternatives are replaced wholesale.
                    Some(slot) if slot.is_object() && v.is_object() && !is_variant_object(&p) => merge(slot, v, &p)?,
                    Some(slot) => *slot = v,
                    None => return Err(Error::config(p, "unknown key")),
                }
            }
            Ok(())
        }
        (d, s) => {
            *d = s;
            Ok(())
        }
    }
}

fn is_variant_object(path: &str) -> bool {
    matches!(path, "trajectory.harvesting" | "tomography.edges")
}

/// Default uniform binning as a config value.
pub fn default_uniform_bins() -> UniformBins {
    UniformBins {
        lo: DEFAULT_RANGE.0,
        hi: DEFAULT_RANGE.1,
        bins: DEFAULT_BINS,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["params"]["omega"], "omega_star");
        assert_eq!(v["tomography"]["n_fock"], "auto");
        assert_eq!(ExperimentConfig::from_value(&v).unwrap(), c);
        let om = c.system_params(&c.params.omega).unwrap().omega();
        assert!((om - (1.0f64 / 8.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply_by_path() {
        let args: Vec<String> = ["--trajectory.seed", "7", "--params.omega", "0.2", "--filter.kind=gaussian"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let o = parse_overrides(&args).unwrap();
        let c = ExperimentConfig::load(None, &o).unwrap();
        assert_eq!(c.trajectory.seed, 7);
        assert_eq!(c.params.omega, OmegaSpec::Value(0.2));
        assert_eq!(c.filter.kind, FilterKind::Gaussian);
        let bad = parse_overrides(&["--trajectory.sed".into(), "1".into()]).unwrap();
        assert!(matches!(ExperimentConfig::load(None, &bad), Err(Error::Config { path, .. }) if path == "trajectory.sed"));
    }

    #[test]
    fn validation_names_fields() {
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        v["trajectory"]["dt"] = 0.01.into();
        assert!(matches!(ExperimentConfig::from_value(&v), Err(Error::Config { path, .. }) if path == "trajectory.dt"));
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        v["filter"]["t0"] = 2.0.into();
        assert!(matches!(ExperimentConfig::from_value(&v), Err(Error::Config { path, .. }) if path == "filter.t0"));
        let mut v = serde_json::to_value(ExperimentConfig::default()).unwrap();
        v["params"]["omega"] = "omega_start".into();
        assert!(matches!(ExperimentConfig::from_value(&v), Err(Error::Config { path, .. }) if path == "params"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.trajectory.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn auto_cutoff() {
        let c = ExperimentConfig::default();
        assert_eq!(c.n_fock_for(1.0, 0.2), 4);
        assert_eq!(c.n_fock_for(1.0, 0.25), 5);
        assert_eq!(c.n_fock_for(4.0, 1.0), 8);
        assert!(c.n_fock_for(10.0, 4.2) >= 14);
        let mut f = c.clone();
        f.tomography.n_fock = Auto::Fixed(6);
        assert_eq!(f.n_fock_for(10.0, 4.2), 6);
        f.tomography.edges = Auto::Fixed(default_uniform_bins());
        assert_eq!(f.edges_for(6).unwrap(), BinEdges::default());
    }
}
