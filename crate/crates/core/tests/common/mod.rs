#![allow(dead_code)]

use mobility_gwr::data::{AreaUnit, ObservationTable};
use mobility_gwr::geometry::{MultiPolygon, Polygon};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

pub fn point_units(coords: &[[f64; 2]]) -> Vec<AreaUnit> {
    coords
        .iter()
        .enumerate()
        .map(|(i, c)| AreaUnit::at(format!("u{i:04}"), *c))
        .collect()
}

pub fn rows_of(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn table_from(coords: &[[f64; 2]], x: &DMatrix<f64>, y: &[f64]) -> ObservationTable {
    let names = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
    ObservationTable::new(point_units(coords), "y", DVector::from_column_slice(y), names, x.clone()).unwrap()
}

/// Random points in the unit square, covariates with varied location and
/// scale, and a linear response with coefficients bounded away from zero.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub coords: Vec<[f64; 2]>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
}

impl RandomInstance {
    pub fn new(seed: u64, n: usize, p: usize) -> Self {
        let mut r = rng(seed);
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [r.random::<f64>() * 10.0, r.random::<f64>() * 10.0]).collect();
        let loc: Vec<f64> = (0..p).map(|_| r.random_range(-5.0..5.0)).collect();
        let scale: Vec<f64> = (0..p).map(|_| r.random_range(0.5..3.0)).collect();
        let x = DMatrix::from_fn(n, p, |_, j| loc[j] + scale[j] * normal(&mut r));
        let beta: Vec<f64> = (0..=p)
            .map(|_| {
                let m = r.random_range(0.5..2.0);
                if r.random::<bool>() { m } else { -m }
            })
            .collect();
        let y = (0..n)
            .map(|i| beta[0] + (0..p).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>() + 0.1 * normal(&mut r))
            .collect();
        RandomInstance { coords, x, y }
    }

    pub fn table(&self) -> ObservationTable {
        table_from(&self.coords, &self.x, &self.y)
    }

    pub fn rows(&self) -> Rows {
        rows_of(&self.x)
    }
}

/// `p` mutually orthogonal, zero-mean ±1 columns on `2^m >= p + 1` rows.
pub fn walsh_design(m: u32, p: usize) -> DMatrix<f64> {
    let n = 1usize << m;
    assert!(p < n);
    DMatrix::from_fn(n, p, |i, j| {
        let mask = j + 1;
        if (i & mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 }
    })
}

pub fn line_coords(n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|i| [i as f64, 0.0]).collect()
}

/// Square cells of unit side on a `rows × cols` grid, row-major from the
/// bottom-left corner.
pub fn grid_table(rows: usize, cols: usize, values: &[f64]) -> ObservationTable {
    let mut units = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let cell = MultiPolygon(vec![Polygon::square(c as f64, r as f64, 1.0)]);
            units.push(AreaUnit::from_polygon(format!("r{r:02}c{c:02}"), cell).unwrap());
        }
    }
    let n = rows * cols;
    ObservationTable::new(units, "value", DVector::from_column_slice(values), vec![], DMatrix::zeros(n, 0)).unwrap()
}

/// 9×9 grid with a 3×3 block of high values in the middle.
pub fn hot_block_values() -> Vec<f64> {
    let mut v = Vec::new();
    for r in 0..9 {
        for c in 0..9 {
            let hot = (3..6).contains(&r) && (3..6).contains(&c);
            v.push(if hot { 10.0 } else { 1.0 + ((r * 9 + c) % 3) as f64 * 0.1 });
        }
    }
    v
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b { 0.0 } else { (a - b).abs() / b.abs() }
}

pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}
