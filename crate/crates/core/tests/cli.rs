use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobility-gwr"))
        .args(args)
        .output()
        .expect("binary should start")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn generate_into(dir: &Path, bundled: &str) -> String {
    let d = dir.to_str().unwrap().to_string();
    ok(&["synth", "generate", "--bundled", bundled, "--out", &d]);
    d
}

#[test]
fn pipeline_run_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = generate_into(tmp.path(), "regional");
    let config = format!("{dir}/pipeline.toml");
    ok(&["pipeline", "run", "--config", &config]);
    let out = tmp.path().join("out");
    for f in ["ols_report.txt", "moran_report.txt", "mgwr_report.txt", "gwr_local.csv", "hotspots.geojson", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let before = std::fs::read(out.join("manifest.json")).unwrap();
    std::fs::remove_file(out.join("hotspots.geojson")).unwrap();
    ok(&["pipeline", "run", "--config", &config, "--resume"]);
    assert!(out.join("hotspots.geojson").exists());
    assert_eq!(std::fs::read(out.join("manifest.json")).unwrap(), before);
}

#[test]
fn gate_stops_on_independent_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = generate_into(tmp.path(), "regional-iid");
    ok(&["pipeline", "run", "--config", &format!("{dir}/pipeline.toml")]);
    let out = tmp.path().join("out");
    assert!(out.join("moran_report.txt").exists());
    assert!(!out.join("mgwr_report.txt").exists());
}

#[test]
fn stage_subcommands_print_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = generate_into(tmp.path(), "regional");
    let config = format!("{dir}/pipeline.toml");
    let ols = ok(&["ols", "--config", &config]);
    assert!(ols.contains("No. Observations:  158"), "{ols}");
    let moran = ok(&["moran", "--config", &config, "--permutations", "99", "--seed", "1"]);
    assert!(moran.contains("Moran's I"), "{moran}");
    let hot = ok(&["hotspots", "--config", &config]);
    assert!(!hot.is_empty());
    let gwr = ok(&["gwr", "--config", &config, "--bandwidth", "60"]);
    assert!(gwr.contains("Bandwidth: 60"), "{gwr}");
    let mgwr = ok(&["mgwr", "--config", &config]);
    assert!(mgwr.starts_with("Variable"), "{mgwr}");
}

#[test]
fn explicit_columns_on_point_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().to_str().unwrap();
    let scenario = tmp.path().join("s.toml");
    std::fs::write(
        &scenario,
        r#"
seed = 3
noise_std = 0.3
[layout]
kind = "random"
n = 60
width = 10.0
height = 10.0
[intercept]
kind = "constant"
value = 1.0
[[covariates]]
name = "a"
beta = { kind = "linear", a = 0.1, b = 0.0 }
"#,
    )
    .unwrap();
    ok(&["synth", "generate", "--scenario", scenario.to_str().unwrap(), "--out", d]);
    let input = format!("{d}/data.csv");
    let out = ok(&["ols", "--input", &input, "--dependent", "y", "--covariates", "a", "--coords", "u,v"]);
    assert!(out.contains("No. Observations:  60"), "{out}");
}

#[test]
fn errors_exit_nonzero() {
    let out = cli(&["pipeline", "run", "--config", "/nonexistent/pipeline.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let tmp = tempfile::tempdir().unwrap();
    let dir = generate_into(tmp.path(), "regional");
    let out = cli(&["ols", "--input", &format!("{dir}/data.csv"), "--dependent", "nope", "--coords", "u,v"]);
    assert!(!out.status.success());
}
