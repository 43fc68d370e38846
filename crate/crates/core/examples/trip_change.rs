// Trip change from before/after counts, with listwise deletion of rows
// that cannot be used.
//
// ```text
// cargo run --example trip_change
// ```

use mobility_gwr::data::{load_csv_bytes, Ingested, Schema};

const COUNTS: &str = "\
county,x,y,trips_2019,trips_2020,income
c03,2.0,0.0,1200,1320,48.5
c01,0.0,0.0,1000,400,61.2
c02,1.0,0.0,800,600,55.0
c04,3.0,0.0,0,15,40.1
c05,4.0,0.0,950,NA,52.3
c06,5.0,0.0,1500,300,70.8
";

pub fn run_example() -> mobility_gwr::Result<Ingested> {
    let schema = Schema {
        id: "county".into(),
        coord_x: Some("x".into()),
        coord_y: Some("y".into()),
        trips_before: Some("trips_2019".into()),
        trips_after: Some("trips_2020".into()),
        covariates: vec!["income".into()],
        ..Default::default()
    };
    let ing = load_csv_bytes(COUNTS.as_bytes(), &schema)?;
    println!("{:<6} {:>8} {:>8} {:>10}", "id", "before", "after", "TC (%)");
    for rec in ing.table.trips().unwrap_or_default() {
        let tc = rec.trip_change.map_or("undefined".to_string(), |v| format!("{v:.2}"));
        println!("{:<6} {:>8} {:>8} {:>10}", rec.area_id, rec.trips_before, rec.trips_after, tc);
    }
    for d in &ing.report.dropped {
        println!("dropped row {} (`{}`): {}", d.row, d.id, d.reason);
    }
    println!("kept {} of {} rows", ing.report.rows_kept, ing.report.rows_read);
    Ok(ing)
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    run_example().map(|_| ())
}
