use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rfwigner::experiment::artifacts::{rewrite_wigner, REPORT};
use rfwigner::experiment::config::parse_overrides;
use rfwigner::experiment::oracle::write_oracle;
use rfwigner::experiment::{run_point, run_selftest, run_sweep, ExperimentConfig, PointResult};
use rfwigner::Error;

const EXIT_SELFTEST_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_WARNINGS: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(version, about = "Homodyne tomography of a filtered emitter mode")]
struct Cli {
    /// JSON config; keys not given keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convention self-tests.
    Selftest,
    /// Analytic tables over the sweep grid.
    Oracle {
        /// Key overrides such as `--sweep.Ts [1,2]`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// One (Ω, T) point: simulate, reconstruct, analyze.
    Run {
        /// Key overrides such as `--params.omega 0.5 --filter.T 2`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Every (Ω, T) of the sweep lists.
    Sweep {
        /// Key overrides such as `--sweep.omegas [0.2] --trajectory.seed 3`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Recompute the Wigner function of a saved point directory.
    Wigner {
        point_dir: PathBuf,
        /// `analysis.grid` overrides, e.g. `--analysis.grid.step 0.0125`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config { .. } => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_NUMERICAL),
    }
}

fn summary_line(r: &PointResult) -> String {
    format!(
        "omega={} T={} rho0={:.4} rho1={:.4} rho2={:.4} purity={:.4} N_rel={:.5} min_W={:.5}",
        r.omega,
        r.length,
        r.population(0),
        r.population(1),
        r.population(2),
        r.purity,
        r.negativity.n_rel,
        r.wigner_min
    )
}

fn load(config: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(config, &parse_overrides(overrides)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    let outcome = match &cli.command {
        Command::Selftest => run_selftest().map(|r| {
            print!("{r}");
            if r.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_SELFTEST_FAILED)
            }
        }),
        Command::Oracle { overrides } => load(config, overrides).and_then(|cfg| {
            let t = write_oracle(&cfg, &cfg.output.dir)?;
            println!(
                "wrote oracle tables to {} (max correlation gap {:e})",
                cfg.output.dir.display(),
                t.max_correlation_gap
            );
            Ok(ExitCode::SUCCESS)
        }),
        Command::Run { overrides } => load(config, overrides).and_then(|cfg| {
            let r = run_point(&cfg, Some(&cfg.output.dir))?;
            println!("{}", summary_line(&r));
            println!("report: {}", cfg.output.dir.join(REPORT).display());
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if r.warnings.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_WARNINGS)
            })
        }),
        Command::Sweep { overrides } => load(config, overrides).and_then(|cfg| {
            let s = run_sweep(&cfg, Some(&cfg.output.dir))?;
            for e in &s.entries {
                match &e.result {
                    Ok(r) => println!("{}", summary_line(r)),
                    Err(msg) => eprintln!("omega={} T={} failed: {msg}", e.omega, e.length),
                }
            }
            Ok(if s.failures() > 0 {
                ExitCode::from(EXIT_NUMERICAL)
            } else if s.warnings() > 0 {
                ExitCode::from(EXIT_WARNINGS)
            } else {
                ExitCode::SUCCESS
            })
        }),
        Command::Wigner { point_dir, overrides } => (|| {
            let manifest = rfwigner::experiment::artifacts::read_manifest(point_dir)?;
            let mut root = serde_json::to_value(&manifest.config)?;
            for (k, v) in parse_overrides(overrides)? {
                if !k.starts_with("analysis.grid.") {
                    return Err(Error::Config {
                        path: k,
                        msg: "only analysis.grid keys can be changed here".into(),
                    });
                }
                let ptr = format!("/{}", k.replace('.', "/"));
                *root.pointer_mut(&ptr).ok_or_else(|| Error::Config {
                    path: k.clone(),
                    msg: "unknown key".into(),
                })? = v;
            }
            let spec = ExperimentConfig::from_value(&root)?.analysis.grid;
            let (grid, neg) = rewrite_wigner(point_dir, &spec)?;
            println!(
                "N={} N_rel={} min W={} mass={}",
                neg.n,
                neg.n_rel,
                grid.min(),
                grid.mass
            );
            Ok(match grid.warning {
                Some(w) => {
                    eprintln!("warning: {w}");
                    ExitCode::from(EXIT_WARNINGS)
                }
                None => ExitCode::SUCCESS,
            })
        })(),
    };
    outcome.unwrap_or_else(|e| exit_for(&e))
}
