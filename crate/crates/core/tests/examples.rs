mod trip_change {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/trip_change.rs"));
}
mod ols_vif {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ols_vif.rs"));
}
mod moran_residuals {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/moran_residuals.rs"));
}
mod hotspots {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hotspots.rs"));
}
mod gwr_bandwidth {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gwr_bandwidth.rs"));
}
mod mgwr_backfit {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/mgwr_backfit.rs"));
}
mod synth_scenario {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/synth_scenario.rs"));
}
mod pipeline {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pipeline.rs"));
}

#[test]
fn trip_change_example_runs() {
    let ing = trip_change::run_example().expect("trip change example should run");
    assert_eq!(ing.report.rows_kept, 4);
    assert_eq!(ing.report.dropped.len(), 2);
}

#[test]
fn ols_vif_example_runs() {
    let fit = ols_vif::run_example().expect("OLS example should run");
    assert_eq!((fit.n, fit.df_model, fit.df_residuals), (158, 15, 142));
}

#[test]
fn moran_residuals_example_runs() {
    let (clustered, iid) = moran_residuals::run_example().expect("Moran example should run");
    assert!(clustered.p_value().unwrap() < 0.05);
    assert!(iid.p_value().unwrap() > 0.05);
}

#[test]
fn hotspots_example_runs() {
    let h = hotspots::run_example().expect("hot spot example should run");
    assert!(h.class[40].is_hot_at(0.99));
}

#[test]
fn gwr_bandwidth_example_runs() {
    let out = gwr_bandwidth::run_example().expect("GWR example should run");
    assert_eq!(out.golden, out.exhaustive);
    assert!(out.rmse < 0.15);
    assert_eq!(out.model.n(), 400);
}

#[test]
fn mgwr_backfit_example_runs() {
    let m = mgwr_backfit::run_example().expect("MGWR example should run");
    assert!(m.converged);
    let bw: Vec<f64> = m.bandwidths.iter().map(|b| b.value()).collect();
    assert!(bw[2] < bw[1] && bw[2] < bw[3]);
}

#[test]
fn synth_scenario_example_runs() {
    let data = synth_scenario::run_example().expect("synthetic scenario example should run");
    assert_eq!(data.table.n(), 120);
}

#[test]
fn pipeline_example_runs() {
    let summary = pipeline::run_example().expect("pipeline example should run");
    assert!(summary.mgwr.is_some());
}
