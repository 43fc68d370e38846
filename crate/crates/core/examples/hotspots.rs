// Getis-Ord Gi* on a 9×9 grid with a block of high values in the center.
//
// ```text
// cargo run --example hotspots
// ```

use mobility_gwr::data::{AreaUnit, ObservationTable};
use mobility_gwr::esda::{getis_ord_gstar, HotSpotClass, HotSpotResult};
use mobility_gwr::geometry::{MultiPolygon, Polygon};
use mobility_gwr::weights::{build_contiguity_weights, Contiguity};
use nalgebra::{DMatrix, DVector};

pub fn hot_block_grid() -> mobility_gwr::Result<ObservationTable> {
    let mut units = Vec::new();
    let mut y = Vec::new();
    for r in 0..9 {
        for c in 0..9 {
            let cell = MultiPolygon(vec![Polygon::square(c as f64, r as f64, 1.0)]);
            units.push(AreaUnit::from_polygon(format!("r{r}c{c}"), cell)?);
            let hot = (3..6).contains(&r) && (3..6).contains(&c);
            y.push(if hot { 10.0 } else { 1.0 + ((r * 9 + c) % 3) as f64 * 0.1 });
        }
    }
    ObservationTable::new(units, "value", DVector::from_vec(y), vec![], DMatrix::zeros(81, 0))
}

fn symbol(class: HotSpotClass) -> &'static str {
    match class {
        HotSpotClass::Hot99 => " H3",
        HotSpotClass::Hot95 => " H2",
        HotSpotClass::Hot90 => " H1",
        HotSpotClass::NotSignificant => "  .",
        HotSpotClass::Cold90 => " C1",
        HotSpotClass::Cold95 => " C2",
        HotSpotClass::Cold99 => " C3",
    }
}

pub fn run_example() -> mobility_gwr::Result<HotSpotResult> {
    let table = hot_block_grid()?;
    let w = build_contiguity_weights(&table, Contiguity::Queen)?.binary_with_self();
    let values: Vec<f64> = table.y().iter().copied().collect();
    let h = getis_ord_gstar(&values, &w)?;
    for r in (0..9).rev() {
        let row: String = (0..9).map(|c| symbol(h.class[r * 9 + c])).collect();
        println!("{row}");
    }
    println!("H/C = hot/cold spot at 90 (1), 95 (2), 99 (3) percent confidence");
    println!("center z = {:.2}", h.z[40]);
    Ok(h)
}

#[allow(dead_code)]
fn main() -> mobility_gwr::Result<()> {
    run_example().map(|_| ())
}
