use std::fmt::Write as _;
use std::path::Path;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::tls::{
    filtered_mean_photon_number, output_coherent_amplitude, regression_correlation_series, steady_state_bloch,
    two_time_correlation,
};

pub const ORACLE_CSV: &str = "oracle.csv";
pub const CORRELATION_CSV: &str = "correlation.csv";

/// Delay grid of the correlation table.
pub fn correlation_delays() -> Vec<f64> {
    (0..=100).map(|k| k as f64 * 0.1).collect()
}

#[derive(Debug, Clone)]
pub struct OracleTables {
    pub oracle_csv: String,
    pub correlation_csv: String,
    /// Largest `|closed form − regression|` over the correlation table.
    pub max_correlation_gap: f64,
}

/// Steady-state values and filtered photon numbers over the sweep grid, and
/// correlation curves from both the closed form and the regression oracle.
pub fn oracle_tables(cfg: &ExperimentConfig) -> Result<OracleTables> {
    let hash = cfg.hash();
    let mut oracle = format!("# config_hash={hash}\n");
    oracle.push_str("omega,T,sigma_minus,sigma_z,emission_mean,output_amplitude_re,output_amplitude_im,n_bar_filtered\n");
    let mut corr = format!("# config_hash={hash}\n");
    corr.push_str("omega,t,closed_re,closed_im,regression_re,regression_im,abs_diff\n");
    let delays = correlation_delays();
    let mut gap: f64 = 0.0;
    for o in &cfg.sweep.omegas {
        let p = cfg.system_params(o)?;
        let ss = steady_state_bloch(&p)?;
        let amp = output_coherent_amplitude(&p)?;
        let emission = p.gamma().sqrt() * ss.sm.re;
        for &t in &cfg.sweep.lengths {
            let n = filtered_mean_photon_number(&p, &cfg.filter_spec(t)?)?;
            let _ = writeln!(
                oracle,
                "{},{},{},{},{},{},{},{}",
                p.omega(),
                t,
                ss.sm.re,
                ss.sz,
                emission,
                amp.re,
                amp.im,
                n
            );
        }
        let reg = regression_correlation_series(&p, &delays)?;
        for (&t, r) in delays.iter().zip(reg) {
            let c = two_time_correlation(&p, t)?.sigma_correlation;
            let d = (c - r).norm();
            gap = gap.max(d);
            let _ = writeln!(corr, "{},{},{},{},{},{},{}", p.omega(), t, c.re, c.im, r.re, r.im, d);
        }
    }
    Ok(OracleTables {
        oracle_csv: oracle,
        correlation_csv: corr,
        max_correlation_gap: gap,
    })
}

pub fn write_oracle(cfg: &ExperimentConfig, dir: &Path) -> Result<OracleTables> {
    let t = oracle_tables(cfg)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(ORACLE_CSV), &t.oracle_csv)?;
    std::fs::write(dir.join(CORRELATION_CSV), &t.correlation_csv)?;
    Ok(t)
}
