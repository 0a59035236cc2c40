//! On-disk layout of run and sweep outputs.
//!
//! Every CSV starts with a `# config_hash=... seed=...` line and every JSON
//! file carries `config_hash`. `manifest.json` lists the SHA-256 of each file
//! in a point directory and is checked before any artifact is reused.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{hex_digest, ExperimentConfig};
use super::pipeline::{PointAnalysis, SweepResult, REPORTED_POPULATIONS};
use crate::error::{Error, Result};
use crate::phase_space::{NegativityReport, PhaseSpaceGrid};
use crate::tomography::{FockDensityMatrix, FockDensityMatrixJson, QuadratureHistogram};
use crate::trajectory::QuadratureSample;

pub const MANIFEST: &str = "manifest.json";
pub const SAMPLES: &str = "samples.csv";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const HISTOGRAM_JSON: &str = "histogram.json";
pub const STATE: &str = "state.json";
pub const REPORT: &str = "report.json";
pub const WIGNER_CSV: &str = "wigner.csv";
pub const WIGNER_JSON: &str = "wigner.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// File name → SHA-256 hex digest.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateArtifact {
    pub config_hash: String,
    pub seed: u64,
    pub omega: f64,
    #[serde(rename = "T")]
    pub length: f64,
    pub state: FockDensityMatrixJson,
}

#[derive(Debug, Clone, Serialize)]
struct HistogramArtifact<'a> {
    config_hash: &'a str,
    seed: u64,
    /// Quadrature angles `θ` used by the projectors.
    thetas: &'a [f64],
    /// Local-oscillator phases `φ` of the records.
    lo_phases: Vec<f64>,
    edges: &'a [f64],
    totals: Vec<u64>,
    overflow: &'a [u64],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerArtifact {
    pub config_hash: String,
    pub seed: u64,
    pub convention: String,
    pub spec: crate::phase_space::GridSpec,
    pub mass: f64,
    pub min: f64,
    pub max: f64,
    pub warning: Option<String>,
    pub state_sha256: String,
    pub negativity: NegativityReport,
}

fn header(cfg: &ExperimentConfig) -> String {
    format!("# config_hash={} seed={}\n", cfg.hash(), cfg.trajectory.seed)
}

fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

/// Collects a point directory's files and writes them with a manifest.
struct PointWriter<'a> {
    dir: &'a Path,
    cfg: &'a ExperimentConfig,
    files: BTreeMap<String, String>,
}

impl<'a> PointWriter<'a> {
    /// Opens `dir`, refusing one that already holds artifacts of another config.
    fn open(cfg: &'a ExperimentConfig, dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut files = BTreeMap::new();
        if dir.join(MANIFEST).exists() {
            let m = read_manifest(dir)?;
            if m.config_hash != cfg.hash() {
                return Err(Error::Provenance(format!(
                    "{} holds artifacts of config {}, not {}",
                    dir.display(),
                    m.config_hash,
                    cfg.hash()
                )));
            }
            files = m.files;
        }
        Ok(Self { dir, cfg, files })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), hex_digest(bytes));
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let m = Manifest {
            config_hash: self.cfg.hash(),
            seed: self.cfg.trajectory.seed,
            config: self.cfg.clone(),
            files: self.files,
        };
        fs::write(self.dir.join(MANIFEST), to_json_bytes(&m)?)?;
        Ok(())
    }
}

pub fn samples_csv(cfg: &ExperimentConfig, samples: &[QuadratureSample]) -> String {
    let mut s = header(cfg);
    s.push_str("phase_index,phase_radians,sample_value,seed,trajectory_id\n");
    for q in samples {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            q.phase_index, q.phase, q.value, cfg.trajectory.seed, q.trajectory_id
        );
    }
    s
}

pub fn histogram_csv(cfg: &ExperimentConfig, h: &QuadratureHistogram) -> String {
    let mut s = header(cfg);
    s.push_str("phase_index,bin_index,count\n");
    for (k, row) in h.counts.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let _ = writeln!(s, "{k},{j},{c}");
        }
    }
    s
}

pub fn wigner_csv(cfg: &ExperimentConfig, g: &PhaseSpaceGrid) -> String {
    let mut s = header(cfg);
    s.push_str("x,p,W\n");
    for (i, x) in g.x.iter().enumerate() {
        for (j, p) in g.p.iter().enumerate() {
            let _ = writeln!(s, "{x},{p},{}", g.at(i, j));
        }
    }
    s
}

fn state_bytes(cfg: &ExperimentConfig, omega: f64, length: f64, state: &FockDensityMatrix) -> Result<Vec<u8>> {
    to_json_bytes(&StateArtifact {
        config_hash: cfg.hash(),
        seed: cfg.trajectory.seed,
        omega,
        length,
        state: state.to_json(),
    })
}

fn write_wigner_files(
    w: &mut PointWriter<'_>,
    grid: &PhaseSpaceGrid,
    negativity: &NegativityReport,
    state_sha256: String,
) -> Result<()> {
    let cfg = w.cfg;
    w.put(WIGNER_CSV, wigner_csv(cfg, grid).as_bytes())?;
    let meta = WignerArtifact {
        config_hash: cfg.hash(),
        seed: cfg.trajectory.seed,
        convention: grid.convention.clone(),
        spec: grid.spec,
        mass: grid.mass,
        min: grid.min(),
        max: grid.max(),
        warning: grid.warning.clone(),
        state_sha256,
        negativity: negativity.clone(),
    };
    w.put(WIGNER_JSON, &to_json_bytes(&meta)?)
}

/// Writes all artifacts of one point into `dir`.
pub fn write_point(
    cfg: &ExperimentConfig,
    dir: &Path,
    a: &PointAnalysis,
    samples: Option<&[QuadratureSample]>,
) -> Result<()> {
    let mut w = PointWriter::open(cfg, dir)?;
    if let Some(s) = samples {
        w.put(SAMPLES, samples_csv(cfg, s).as_bytes())?;
    }
    w.put(HISTOGRAM_CSV, histogram_csv(cfg, &a.histogram).as_bytes())?;
    let hash = cfg.hash();
    let hist = HistogramArtifact {
        config_hash: &hash,
        seed: cfg.trajectory.seed,
        thetas: &a.histogram.phases,
        lo_phases: crate::trajectory::equally_spaced_phases(cfg.trajectory.phases),
        edges: a.histogram.edges.as_slice(),
        totals: (0..a.histogram.phases.len()).map(|k| a.histogram.phase_total(k)).collect(),
        overflow: &a.histogram.overflow,
    };
    w.put(HISTOGRAM_JSON, &to_json_bytes(&hist)?)?;
    let state = state_bytes(cfg, a.result.omega, a.result.length, &a.state)?;
    let state_sha = hex_digest(&state);
    w.put(STATE, &state)?;
    w.put(REPORT, &to_json_bytes(&a.result)?)?;
    if cfg.analysis.write_wigner {
        write_wigner_files(&mut w, &a.grid, &a.result.negativity, state_sha)?;
    }
    w.finish()
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a saved state after checking it against its directory's manifest.
pub fn load_verified_state(dir: &Path) -> Result<(Manifest, StateArtifact, String)> {
    let manifest = read_manifest(dir)?;
    let bytes = fs::read(dir.join(STATE))?;
    let sha = hex_digest(&bytes);
    match manifest.files.get(STATE) {
        Some(expected) if *expected == sha => {}
        Some(_) => {
            return Err(Error::Provenance(format!(
                "{} does not match the manifest digest",
                dir.join(STATE).display()
            )))
        }
        None => return Err(Error::Provenance(format!("manifest in {} lists no state", dir.display()))),
    }
    let state: StateArtifact = serde_json::from_slice(&bytes)?;
    if state.config_hash != manifest.config_hash || manifest.config.hash() != manifest.config_hash {
        return Err(Error::Provenance(format!(
            "state config {} differs from manifest config {}",
            state.config_hash, manifest.config_hash
        )));
    }
    Ok((manifest, state, sha))
}

/// Rewrites the Wigner files of a point directory from its saved state. The
/// grid may differ from the one the point was produced with.
pub fn rewrite_wigner(dir: &Path, grid_spec: &crate::phase_space::GridSpec) -> Result<(PhaseSpaceGrid, NegativityReport)> {
    let (manifest, artifact, sha) = load_verified_state(dir)?;
    let state = FockDensityMatrix::from_json(&artifact.state)?;
    let grid = crate::phase_space::wigner_from_density_matrix(&state, grid_spec)?;
    let negativity = crate::phase_space::integrated_negativity(&grid)?;
    let mut w = PointWriter::open(&manifest.config, dir)?;
    write_wigner_files(&mut w, &grid, &negativity, sha)?;
    w.finish()?;
    Ok((grid, negativity))
}

pub fn summary_csv(cfg: &ExperimentConfig, result: &SweepResult) -> String {
    let mut s = header(cfg);
    s.push_str("omega,T,");
    for n in 0..REPORTED_POPULATIONS {
        let _ = write!(s, "rho{n},");
    }
    s.push_str("purity,N,N_rel,wigner_min,samples,overflow,seed,n_fock,converged,iterations,status,dir\n");
    for e in &result.entries {
        let dir = e
            .dir
            .as_ref()
            .and_then(|d| d.file_name())
            .map(|d| d.to_string_lossy().into_owned())
            .unwrap_or_default();
        let _ = write!(s, "{},{},", e.omega, e.length);
        match &e.result {
            Ok(r) => {
                for n in 0..REPORTED_POPULATIONS {
                    let _ = write!(s, "{},", r.population(n));
                }
                let status = if r.warnings.is_empty() { "ok" } else { "warning" };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{status},{dir}",
                    r.purity,
                    r.negativity.n,
                    r.negativity.n_rel,
                    r.wigner_min,
                    r.samples,
                    r.overflow,
                    r.seed,
                    r.n_fock,
                    r.mle.converged,
                    r.mle.iterations
                );
            }
            Err(_) => {
                s.push_str(&",".repeat(REPORTED_POPULATIONS + 4));
                let _ = writeln!(s, ",,{},,,,failed,{dir}", cfg.trajectory.seed);
            }
        }
    }
    s
}

/// Writes `summary.csv` and `summary.json` at the sweep root.
pub fn write_summary(cfg: &ExperimentConfig, dir: &Path, result: &SweepResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_CSV), summary_csv(cfg, result))?;
    fs::write(dir.join(SUMMARY_JSON), to_json_bytes(result)?)?;
    Ok(())
}
