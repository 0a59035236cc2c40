use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rfwigner::experiment::artifacts::{self, rewrite_wigner};
use rfwigner::experiment::config::parse_overrides;
use rfwigner::experiment::{run_point, run_sweep, ExperimentConfig, OmegaSpec};
use rfwigner::Error;

fn small(omega: OmegaSpec, length: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.params.omega = omega;
    c.filter.length = length;
    c.trajectory.phases = 4;
    c.trajectory.samples_per_phase = 150;
    c.analysis.grid.step = 0.05;
    c.tomography.cutoff_check = false;
    c
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn undriven_run_reconstructs_vacuum() {
    let mut c = small(OmegaSpec::Value(0.0), 1.0);
    c.trajectory.phases = 12;
    c.trajectory.samples_per_phase = 1000;
    let r = run_point(&c, None).unwrap();
    assert!(r.population(0) >= 0.99, "{:?}", r.populations);
    assert!(r.negativity.n_rel < 0.02);
    assert!(r.mle.converged);
}

#[test]
fn runs_are_byte_identical_across_thread_counts() {
    let c = small(OmegaSpec::Named(rfwigner::experiment::NamedOmega::OmegaStar), 2.0);
    let tmp = tempfile::tempdir().unwrap();
    let run_with = |threads: usize, name: &str| {
        let dir = tmp.path().join(name);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_point(&c, Some(&dir)).unwrap());
        dir
    };
    let a = run_with(1, "a");
    let b = run_with(3, "b");
    let (fa, fb) = (csv_bytes(&a), csv_bytes(&b));
    assert_eq!(fa.len(), 3);
    assert_eq!(fa, fb);
    assert_eq!(fs::read(a.join("state.json")).unwrap(), fs::read(b.join("state.json")).unwrap());
}

#[test]
fn mixed_configs_are_rejected() {
    let c = small(OmegaSpec::Value(0.3), 1.0);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    run_point(&c, Some(&dir)).unwrap();
    let mut other = c.clone();
    other.trajectory.seed += 1;
    assert!(matches!(run_point(&other, Some(&dir)), Err(Error::Provenance(_))));

    let (_, neg) = rewrite_wigner(&dir, &c.analysis.grid).unwrap();
    assert!(neg.n >= 0.0);

    let path = dir.join(artifacts::STATE);
    let text = fs::read_to_string(&path).unwrap().replace(&c.hash(), &other.hash());
    fs::write(&path, text).unwrap();
    assert!(matches!(rewrite_wigner(&dir, &c.analysis.grid), Err(Error::Provenance(_))));
}

#[test]
fn sweep_points_match_single_runs() {
    let mut c = small(OmegaSpec::Value(0.5), 1.0);
    c.sweep.omegas = vec![OmegaSpec::Value(0.5), OmegaSpec::Value(0.2)];
    c.sweep.lengths = vec![1.0, 2.5];
    let tmp = tempfile::tempdir().unwrap();
    let s = run_sweep(&c, Some(tmp.path())).unwrap();
    assert_eq!(s.entries.len(), 4);
    assert_eq!(s.failures(), 0);

    let summary = fs::read_to_string(tmp.path().join(artifacts::SUMMARY_CSV)).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert!(lines[0].starts_with(&format!("# config_hash={}", c.hash())));
    assert!(lines[1].starts_with("omega,T,rho0,rho1,rho2,rho3,rho4,purity,N,N_rel"));
    assert_eq!(lines.len(), 6);
    for e in &s.entries {
        let r = e.result.as_ref().unwrap();
        assert!(r.populations.iter().sum::<f64>() <= 1.0 + 1e-8);
    }

    let mut single = c.clone();
    single.filter.length = 2.5;
    single.params.omega = OmegaSpec::Value(0.5);
    let dir = tmp.path().join("single");
    let r = run_point(&single, Some(&dir)).unwrap();
    let swept = s.get(0.5, 2.5).unwrap();
    assert_eq!(r.populations, swept.populations);
    assert_eq!(r.config_hash, swept.config_hash);
    let point_dir = s.entries.iter().find(|e| e.omega == 0.5 && e.length == 2.5).unwrap().dir.clone().unwrap();
    assert_eq!(
        point_dir.file_name().unwrap().to_string_lossy(),
        "omega0.50000_T2.50"
    );
    assert_eq!(csv_bytes(&dir), csv_bytes(&point_dir));

    let again = tempfile::tempdir().unwrap();
    run_sweep(&c, Some(again.path())).unwrap();
    assert_eq!(
        fs::read(tmp.path().join(artifacts::SUMMARY_CSV)).unwrap(),
        fs::read(again.path().join(artifacts::SUMMARY_CSV)).unwrap()
    );
}

#[test]
fn repository_profiles_load() {
    let desk = ExperimentConfig::load(Some(&repo_config("desk.json")), &[]).unwrap();
    assert_eq!(desk.trajectory.samples_per_phase, 2000);
    assert_eq!(desk.trajectory.phases, 12);
    let paper = ExperimentConfig::load(Some(&repo_config("paper.json")), &[]).unwrap();
    assert_eq!(paper.trajectory.samples_per_phase, 10_000);
    let o = parse_overrides(&["--trajectory.seed=9".to_string()]).unwrap();
    assert_eq!(ExperimentConfig::load(Some(&repo_config("desk.json")), &o).unwrap().trajectory.seed, 9);
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_rfwigner");
    let st = Command::new(bin).arg("selftest").output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stdout));
    assert!(String::from_utf8_lossy(&st.stdout).contains("PASS"));

    let bad = Command::new(bin).args(["run", "--trajectory.dt", "0.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = Command::new(bin).args(["run", "--trajectory.sed", "1"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle");
    let o = Command::new(bin)
        .args(["oracle", "--output.dir", out.to_str().unwrap(), "--sweep.omegas", "[0, \"omega_star\"]", "--sweep.Ts", "[1]"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("oracle.csv")).unwrap();
    let star = table.lines().find(|l| l.starts_with("0.3535")).unwrap();
    let cols: Vec<f64> = star.split(',').map(|v| v.parse().unwrap()).collect();
    assert!(cols[5].abs() < 1e-12 && cols[6].abs() < 1e-12);
    assert!((cols[7] - 0.245775316763658).abs() < 1e-6);
    let corr = fs::read_to_string(out.join("correlation.csv")).unwrap();
    for l in corr.lines().skip(2).filter(|l| l.starts_with("0,")) {
        let cols: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[2..6].iter().all(|v| *v == 0.0));
    }
}
