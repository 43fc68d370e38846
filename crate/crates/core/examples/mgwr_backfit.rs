// Multiscale GWR: one covariate varies over space, the others do not.
// Backfitting assigns the varying term a small bandwidth and the rest
// bandwidths near n.
//
// ```text
// cargo run --release --example mgwr_backfit
// ```

use mobility_gwr::mgwr::{fit_mgwr, summarize_mgwr, MgwrModel, MgwrSettings};
use mobility_gwr::report;
use mobility_gwr::synth::{generate, Surface, SyntheticScenario};

pub fn run_example() -> mobility_gwr::Result<MgwrModel> {
    let scenario = SyntheticScenario::grid(
        12,
        12,
        Surface::Constant { value: 1.0 },
        vec![
            Surface::Constant { value: 0.6 },
            Surface::Sinusoidal { wavelength: 12.0, amplitude: 1.0, offset: 0.0 },
            Surface::Constant { value: -0.4 },
        ],
        0.2,
        5,
    );
    let table = generate(&scenario)?.table.standardize()?;
    let model = fit_mgwr(&table, &MgwrSettings::default())?;
    print!("{}", report::mgwr_text(&summarize_mgwr(&model)));
    println!();
    println!("iteration   SOC          RSS");
    for (k, (soc, rss)) in model.soc_trace.iter().zip(&model.rss_trace).enumerate() {
        println!("{:>9}   {soc:<11.3e}  {rss:.6}", k + 1);
    }
    Ok(model)
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    run_example().map(|_| ())
}
