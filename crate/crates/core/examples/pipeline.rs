// The full workflow on the bundled 158-unit scenario: descriptive
// statistics, OLS + VIF, residual Moran's I, and, because the residuals
// are spatially clustered, GWR, MGWR, and Gi* hot spots.
//
// ```text
// cargo run --release --example pipeline [-- <output-dir>]
// ```

use std::path::Path;

use mobility_gwr::pipeline::{run_pipeline, RunSummary};
use mobility_gwr::synth::{generate, SyntheticScenario};

pub fn run_in(dir: &Path) -> mobility_gwr::Result<RunSummary> {
    let data = generate(&SyntheticScenario::regional())?;
    data.write_to(dir)?;
    let mut config = data.pipeline_config();
    config.resolve_paths(dir);
    let summary = run_pipeline(&config, false)?;
    for name in ["descriptive.txt", "ols_report.txt", "moran_report.txt", "mgwr_report.txt"] {
        let p = summary.output_dir.join(name);
        if let Ok(text) = std::fs::read_to_string(&p) {
            println!("== {name}\n{text}");
        }
    }
    println!("gate decision: {:?}", summary.manifest.gate.decision);
    println!("outputs: {}", summary.output_dir.display());
    Ok(summary)
}

pub fn run_example() -> mobility_gwr::Result<RunSummary> {
    let dir = tempfile::tempdir().map_err(|e| mobility_gwr::Error::InvalidInput(e.to_string()))?;
    run_in(dir.path())
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    match std::env::args().nth(1) {
        Some(d) => run_in(Path::new(&d)).map(|_| ()),
        None => run_example().map(|_| ()),
    }
}
