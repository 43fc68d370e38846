//! Distance matrices, neighbor graphs (KNN, queen/rook contiguity), and the
//! distance-decay kernels used by local regression.

use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Touch};

/// Dense symmetric Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
    /// Each row sorted ascending, for nearest-neighbor scale lookups.
    sorted: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_points(points: &[Point]) -> Self {
        let n = points.len();
        let rows: Vec<Vec<f64>> = points
            .par_iter()
            .map(|p| {
                points
                    .iter()
                    .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let sorted: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                let mut s = r.clone();
                s.sort_by(|a, b| a.total_cmp(b));
                s
            })
            .collect();
        DistanceMatrix {
            n,
            d: rows.into_iter().flatten().collect(),
            sorted,
        }
    }

    pub fn from_table(table: &ObservationTable) -> Self {
        Self::from_points(&table.locations())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Smallest and largest off-diagonal distance.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = self.get(i, j);
                if v > 0.0 {
                    lo = lo.min(v);
                }
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    /// Distance from `i` to its `k`-th nearest point, counting `i` itself as
    /// the first.
    pub fn kth_distance(&self, i: usize, k: usize) -> f64 {
        self.sorted[i * self.n + k - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightStyle {
    Binary,
    RowStandardized,
}

/// Sparse nonnegative spatial weights, one sorted neighbor list per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialWeights {
    ids: Vec<String>,
    neighbors: Vec<Vec<(usize, f64)>>,
    style: WeightStyle,
    includes_self: bool,
}

impl SpatialWeights {
    /// Build from per-row neighbor lists. Rows are sorted and validated.
    pub fn from_neighbors(
        ids: Vec<String>,
        mut neighbors: Vec<Vec<(usize, f64)>>,
        style: WeightStyle,
    ) -> Result<Self> {
        let n = ids.len();
        if neighbors.len() != n {
            return Err(Error::InvalidWeights("row count differs from id count".into()));
        }
        let mut includes_self = false;
        for (i, row) in neighbors.iter_mut().enumerate() {
            row.sort_by_key(|(j, _)| *j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidWeights(format!("duplicate entry ({i}, {})", w[0].0)));
                }
            }
            for &(j, w) in row.iter() {
                if j >= n {
                    return Err(Error::InvalidWeights(format!("index {j} out of range")));
                }
                if !(w >= 0.0 && w.is_finite()) {
                    return Err(Error::InvalidWeights(format!("bad weight {w} at ({i}, {j})")));
                }
                if i == j {
                    includes_self = true;
                }
            }
        }
        Ok(SpatialWeights {
            ids,
            neighbors,
            style,
            includes_self,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn style(&self) -> WeightStyle {
        self.style
    }

    pub fn includes_self(&self) -> bool {
        self.includes_self
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.neighbors.iter().map(|r| r.as_slice())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.neighbors[i]
            .binary_search_by_key(&j, |(k, _)| *k)
            .map(|pos| self.neighbors[i][pos].1)
            .unwrap_or(0.0)
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.neighbors.iter().map(|r| r.len()).collect()
    }

    /// Units with no neighbors.
    pub fn islands(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.neighbors[i].is_empty()).collect()
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.neighbors.iter().flatten().map(|(_, w)| w).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n()).all(|i| {
            self.neighbors[i]
                .iter()
                .all(|&(j, w)| (self.get(j, i) - w).abs() <= 1e-12 * w.abs().max(1.0))
        })
    }

    /// Union with the transpose: `i ~ j` if either lists the other. Binary
    /// weights stay binary; otherwise the larger of the two weights is kept.
    pub fn symmetrized(&self) -> Self {
        let n = self.n();
        let mut rows: Vec<Vec<(usize, f64)>> = self.neighbors.clone();
        for i in 0..n {
            for &(j, w) in &self.neighbors[i] {
                match rows[j].iter_mut().find(|(k, _)| *k == i) {
                    Some(e) => e.1 = e.1.max(w),
                    None => rows[j].push((i, w)),
                }
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|(j, _)| *j);
        }
        SpatialWeights {
            neighbors: rows,
            ..self.clone()
        }
    }

    /// Scale every nonempty row to sum to one. Zero pattern is unchanged.
    pub fn row_standardized(&self) -> Self {
        let neighbors = self
            .neighbors
            .iter()
            .map(|row| {
                let s: f64 = row.iter().map(|(_, w)| w).sum();
                if s > 0.0 {
                    row.iter().map(|&(j, w)| (j, w / s)).collect()
                } else {
                    row.clone()
                }
            })
            .collect();
        SpatialWeights {
            neighbors,
            style: WeightStyle::RowStandardized,
            ..self.clone()
        }
    }

    /// Binary copy with a unit self-weight on every row (the Gi* form).
    pub fn binary_with_self(&self) -> Self {
        let neighbors = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r: Vec<(usize, f64)> = row.iter().map(|&(j, _)| (j, 1.0)).collect();
                if !r.iter().any(|(j, _)| *j == i) {
                    r.push((i, 1.0));
                }
                r.sort_by_key(|(j, _)| *j);
                r
            })
            .collect();
        SpatialWeights {
            ids: self.ids.clone(),
            neighbors,
            style: WeightStyle::Binary,
            includes_self: true,
        }
    }

    /// Dense copy, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                d[i][j] = w;
            }
        }
        d
    }

    /// Write `i,j,w` triplets using area ids.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["i", "j", "w"])?;
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                wtr.write_record([self.ids[i].as_str(), self.ids[j].as_str(), &w.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Read `i,j,w` triplets, mapping ids onto the order of `ids`.
    pub fn read_triplets(path: impl AsRef<Path>, ids: &[String], style: WeightStyle) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path.as_ref())?;
        let index: std::collections::HashMap<&str, usize> =
            ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
        let mut rows = vec![Vec::new(); ids.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let look = |s: &str| {
                index
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::InvalidWeights(format!("unknown id `{s}`")))
            };
            let i = look(&rec[0])?;
            let j = look(&rec[1])?;
            let w: f64 = rec[2]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidWeights(format!("bad weight `{}`", &rec[2])))?;
            rows[i].push((j, w));
        }
        Self::from_neighbors(ids.to_vec(), rows, style)
    }

    pub fn write_triplets_to<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["i", "j", "w"])?;
        for (i, row) in self.neighbors.iter().enumerate() {
            for &(j, w) in row {
                wtr.write_record([self.ids[i].as_str(), self.ids[j].as_str(), &w.to_string()])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<writer>", e))?;
        Ok(())
    }
}

fn table_ids(table: &ObservationTable) -> Vec<String> {
    table.units().iter().map(|u| u.id.clone()).collect()
}

/// Binary k-nearest-neighbor graph (not symmetrized, no self).
///
/// Equidistant candidates are ordered by table position, which is id order
/// for ingested tables; a warning is logged when the cut falls on a tie.
pub fn build_knn_weights(table: &ObservationTable, k: usize) -> Result<SpatialWeights> {
    knn_from_points(&table.locations(), table_ids(table), k)
}

pub fn knn_from_points(points: &[Point], ids: Vec<String>, k: usize) -> Result<SpatialWeights> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidWeights(format!("k = {k} outside [1, {}]", n.saturating_sub(1))));
    }
    let dm = DistanceMatrix::from_points(points);
    let mut rows = Vec::with_capacity(n);
    let mut tied = Vec::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (dm.get(i, j), j)).collect();
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if k < cand.len() && cand[k - 1].0 == cand[k].0 {
            tied.push(ids[i].as_str());
        }
        rows.push(cand[..k].iter().map(|&(_, j)| (j, 1.0)).collect());
    }
    if !tied.is_empty() {
        warn!(
            "knn: distance ties at the {k}-th neighbor for {} units (first `{}`); broken by id order",
            tied.len(),
            tied[0]
        );
    }
    SpatialWeights::from_neighbors(ids, rows, WeightStyle::Binary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contiguity {
    /// Shared vertex or edge.
    Queen,
    /// Shared edge of positive length.
    Rook,
}

/// Binary polygon contiguity. Islands keep an empty row and log a warning.
pub fn build_contiguity_weights(table: &ObservationTable, rule: Contiguity) -> Result<SpatialWeights> {
    let mut geoms = Vec::with_capacity(table.n());
    for u in table.units() {
        match &u.geometry {
            Some(g) if g.is_valid() => geoms.push(g),
            Some(_) => return Err(Error::InvalidGeometry(format!("unit `{}`", u.id))),
            None => return Err(Error::InvalidGeometry(format!("unit `{}` has no polygon", u.id))),
        }
    }
    // tolerance relative to the overall extent
    let extent = geoms
        .iter()
        .map(|g| {
            let b = g.bbox();
            (b[2] - b[0]).abs().max((b[3] - b[1]).abs())
        })
        .fold(0.0, f64::max);
    let tol = 1e-9 * extent.max(1.0);
    let n = geoms.len();
    let pairs: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .filter(|&j| match geometry::touch(geoms[i], geoms[j], tol) {
                    Touch::Edge => true,
                    Touch::Point => rule == Contiguity::Queen,
                    Touch::None => false,
                })
                .map(|j| (j, 1.0))
                .collect()
        })
        .collect();
    let w = SpatialWeights::from_neighbors(table_ids(table), pairs, WeightStyle::Binary)?;
    for i in w.islands() {
        warn!("contiguity: `{}` has no neighbors", w.ids()[i]);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Bisquare,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthMode {
    /// Bandwidth is a nearest-neighbor count.
    Adaptive,
    /// Bandwidth is a distance.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Adaptive(usize),
    Fixed(f64),
}

impl Bandwidth {
    pub fn mode(&self) -> BandwidthMode {
        match self {
            Bandwidth::Adaptive(_) => BandwidthMode::Adaptive,
            Bandwidth::Fixed(_) => BandwidthMode::Fixed,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Bandwidth::Adaptive(k) => k as f64,
            Bandwidth::Fixed(h) => h,
        }
    }

    pub fn from_value(mode: BandwidthMode, v: f64) -> Self {
        match mode {
            BandwidthMode::Adaptive => Bandwidth::Adaptive(v.round() as usize),
            BandwidthMode::Fixed => Bandwidth::Fixed(v),
        }
    }
}

impl std::fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bandwidth::Adaptive(k) => write!(f, "{k}"),
            Bandwidth::Fixed(h) => write!(f, "{h:.3}"),
        }
    }
}

/// Kernel family plus bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn adaptive_bisquare(k: usize) -> Self {
        KernelSpec {
            family: KernelFamily::Bisquare,
            bandwidth: Bandwidth::Adaptive(k),
        }
    }

    pub fn fixed_gaussian(h: f64) -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth: Bandwidth::Fixed(h),
        }
    }

    /// Check the bandwidth against table size: adaptive `k ∈ [1, n]`,
    /// fixed `h > 0`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self.bandwidth {
            Bandwidth::Adaptive(k) if k == 0 || k > n => Err(Error::InvalidKernel(format!(
                "adaptive bandwidth {k} outside [1, {n}]"
            ))),
            Bandwidth::Fixed(h) if !(h > 0.0 && h.is_finite()) => {
                Err(Error::InvalidKernel(format!("fixed bandwidth {h} must be > 0")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel weight at distance `d` for truncation/scale distance `b`.
    pub fn weight(&self, d: f64, b: f64) -> f64 {
        if d == 0.0 {
            return 1.0;
        }
        if !(b > 0.0) {
            return 0.0;
        }
        let r = d / b;
        match self.family {
            KernelFamily::Bisquare => {
                if r < 1.0 {
                    (1.0 - r * r).powi(2)
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * r * r).exp(),
        }
    }

    /// Scale distance at location `i`: the `k`-th nearest distance
    /// (self counted first) for adaptive, `h` for fixed.
    pub fn scale_at(&self, i: usize, distances: &DistanceMatrix) -> f64 {
        match self.bandwidth {
            Bandwidth::Adaptive(k) => distances.kth_distance(i, k),
            Bandwidth::Fixed(h) => h,
        }
    }
}

/// Kernel weights of every unit relative to location `i`.
pub fn kernel_weights_at(i: usize, spec: &KernelSpec, distances: &DistanceMatrix) -> Result<Vec<f64>> {
    spec.validate(distances.n())?;
    if i >= distances.n() {
        return Err(Error::InvalidInput(format!("location {i} out of range")));
    }
    let b = spec.scale_at(i, distances);
    Ok(distances.row(i).iter().map(|&d| spec.weight(d, b)).collect())
}
