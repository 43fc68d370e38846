// Moran's I on OLS residuals under queen contiguity, with analytic and
// permutation inference.
//
// ```text
// cargo run --example moran_residuals
// ```

use mobility_gwr::esda::{morans_i, MoranResult};
use mobility_gwr::ols::fit_ols;
use mobility_gwr::report;
use mobility_gwr::synth::{generate, SyntheticScenario};
use mobility_gwr::weights::{build_contiguity_weights, Contiguity};

pub fn run_example() -> mobility_gwr::Result<(MoranResult, MoranResult)> {
    let mut out = Vec::new();
    for (label, scenario) in [
        ("clustered noise", SyntheticScenario::regional()),
        ("i.i.d. noise", SyntheticScenario::regional_iid()),
    ] {
        let table = generate(&scenario)?.table.standardize()?;
        let fit = fit_ols(&table)?;
        let w = build_contiguity_weights(&table, Contiguity::Queen)?.row_standardized();
        let m = morans_i(&fit.residuals, &w, 999, 7)?;
        println!("== {label}");
        print!("{}", report::moran_text(&m, "OLS residuals"));
        println!();
        out.push(m);
    }
    let iid = out.pop().unwrap();
    let clustered = out.pop().unwrap();
    Ok((clustered, iid))
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    run_example().map(|_| ())
}
