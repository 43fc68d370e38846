// Global OLS with a VIF screen on correlated covariates.
//
// ```text
// cargo run --example ols_vif
// ```

use mobility_gwr::ols::{fit_ols, vif_flag, GlobalFit, VifFlag};
use mobility_gwr::report;
use mobility_gwr::synth::{generate, SyntheticScenario};

pub fn run_example() -> mobility_gwr::Result<GlobalFit> {
    let data = generate(&SyntheticScenario::regional())?;
    let table = data.table.standardize()?;
    let fit = fit_ols(&table)?;
    print!("{}", report::ols_text(&fit, table.y_name()));
    println!();
    for (name, v) in table.covariate_names().iter().zip(&fit.vif) {
        let flag = vif_flag(*v);
        if flag != VifFlag::None {
            println!("VIF {v:.2} for `{name}`: {flag:?}");
        }
    }
    Ok(fit)
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    run_example().map(|_| ())
}
