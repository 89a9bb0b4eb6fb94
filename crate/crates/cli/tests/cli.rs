use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bondint"))
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    fs::write(dir.join("run.toml"), config).unwrap();
    bin().current_dir(dir).args(["--config", "run.toml", "--out", "out"]).args(args).output().unwrap()
}

fn run_dir(dir: &Path, command: &str) -> PathBuf {
    let out = dir.join("out");
    fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with(command))
        .expect("run directory")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = "
[grid]
steps = 16
[scenarios]
count = 400
seed = 3
[model]
n_max = 20
[strategy]
schedule = [5, 10, 20]
random_controls = 2
";

#[test]
fn unknown_key_is_a_config_error_with_line() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "[grid]\nsteps = 4\n# note\nstpes = 8\n", &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 4") && err.contains("stpes"), "{err}");
}

#[test]
fn degenerate_n_max_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), "[model]\nn_max = 1\n", &["example21"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_max ≥ 2"));
}

#[test]
fn perturbation_index_beyond_n_max_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL}\n[strategy.example22]\nk = [20]\n");
    let o = run(d.path(), &cfg, &["example22"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_writes_matching_binary_and_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), SMALL, &["simulate", "--scenarios", "20"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = run_dir(d.path(), "simulate");
    let (header, bin) = bondint::io::read_family(fs::File::open(dir.join("family.bin")).unwrap(), true).unwrap();
    assert_eq!(header.tag, "gaussian");
    assert_eq!(header.seed, 3);
    let csv = bondint::io::read_family_csv(std::io::BufReader::new(fs::File::open(dir.join("family.csv")).unwrap()), true)
        .unwrap();
    assert_eq!(bin.data(), csv.data());
    let m = json(&dir.join("manifest.json"));
    assert_eq!(m["scenarios"], 20);
    assert_eq!(m["passed"], true);
    assert!(dir.join("config.resolved.toml").exists());
}

#[test]
fn json_only_writes_no_data_files() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), SMALL, &["simulate", "--json-only"]);
    assert_eq!(o.status.code(), Some(0));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed["command"], "simulate");
    let dir = run_dir(d.path(), "simulate");
    let mut names: Vec<String> =
        fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names, ["config.resolved.toml", "manifest.json", "verdicts.json"]);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    for (name, bytes) in files.iter_mut() {
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_slice(bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_time_s");
            *bytes = serde_json::to_vec(&v).unwrap();
        }
    }
    files
}

#[test]
fn identical_config_and_seed_reproduce_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(d.path(), SMALL, &["example21"]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (da, db) = (run_dir(a.path(), "example21"), run_dir(b.path(), "example21"));
    assert_eq!(da.file_name(), db.file_name());
    assert_eq!(snapshot(&da), snapshot(&db));
}

#[test]
fn seed_changes_digits_not_layout() {
    let d = tempfile::tempdir().unwrap();
    run(d.path(), SMALL, &["example21", "--seed", "1"]);
    run(d.path(), SMALL, &["example21", "--seed", "2"]);
    let dirs: Vec<PathBuf> = fs::read_dir(d.path().join("out")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(dirs.len(), 2);
    let a = fs::read_to_string(dirs[0].join("example21.csv")).unwrap();
    let b = fs::read_to_string(dirs[1].join("example21.csv")).unwrap();
    assert_ne!(a, b);
    assert_eq!(a.lines().count(), b.lines().count());
    let va = json(&dirs[0].join("verdicts.json"));
    assert!(va["verdicts"]["converges_to_A"].is_boolean());
    assert!(va["verdicts"]["limit_mean_positive"].is_boolean());
}

#[test]
fn measure_run_passes_on_small_market() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), SMALL, &["measure"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&run_dir(d.path(), "measure").join("verdicts.json"));
    assert_eq!(v["verdicts"]["total_variation_bound"], true);
    assert_eq!(v["verdicts"]["pairing_error_rate"], true);
}

#[test]
fn zero_price_of_risk_gives_flat_log_utility() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{SMALL}\n[utility]\nrestarts = 0\noptimizer_scenarios = 4000\nsets = [[5.0], [2.0, 5.0]]\n"
    )
    .replace("[model]\n", "[model]\nlambda = [0.0, 0.0]\n");
    let o = run(d.path(), &cfg, &["utility", "--scenarios", "4000"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&run_dir(d.path(), "utility").join("verdicts.json"));
    assert!(v["details"]["u_dual"]["mean"].as_f64().unwrap().abs() < 1e-8);
    for u in v["details"]["u_j"].as_array().unwrap() {
        let u = u.as_f64().unwrap();
        // in-sample fitting bias only
        assert!((0.0..2e-3).contains(&u), "{u}");
    }
}

#[test]
fn continuity_profile_on_example21_family() {
    let d = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("[model]\n", "[model]\ntag = \"example21\"\n");
    let o = run(d.path(), &cfg, &["continuity"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let csv = fs::read_to_string(run_dir(d.path(), "continuity").join("continuity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}
