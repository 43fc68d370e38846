// Define a scenario in TOML, generate it, and write the data, truth, and a
// ready-to-run pipeline config.
//
// ```text
// cargo run --example synth_scenario [-- <output-dir>]
// ```

use std::path::Path;

use mobility_gwr::synth::{generate, SyntheticData, SyntheticScenario};

const SCENARIO: &str = r#"
seed = 42
noise_std = 0.25

[layout]
kind = "random"
n = 120
width = 50.0
height = 30.0

[intercept]
kind = "linear"
a = 0.02
b = -0.01
c = 1.0

[[covariates]]
name = "density"
beta = { kind = "sinusoidal", wavelength = 50.0, amplitude = 0.8 }

[[covariates]]
name = "income"
mean = 60.0
sd = 20.0
min = 15.0
loading = 0.4
beta = { kind = "constant", value = 0.3 }
"#;

pub fn run_in(dir: &Path) -> mobility_gwr::Result<SyntheticData> {
    let scenario = SyntheticScenario::from_toml(SCENARIO)?;
    let data = generate(&scenario)?;
    for p in data.write_to(dir)? {
        println!("wrote {}", p.display());
    }
    let names = data.truth_names();
    println!("first rows of the true coefficient surfaces:");
    for i in 0..5 {
        let cells: Vec<String> = names
            .iter()
            .enumerate()
            .map(|(j, n)| format!("{n} = {:+.3}", data.truth[(i, j)]))
            .collect();
        println!("  {}: {}", data.table.units()[i].id, cells.join(", "));
    }
    Ok(data)
}

pub fn run_example() -> mobility_gwr::Result<SyntheticData> {
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
