//! Areal-unit observation tables: ingestion from CSV / GeoJSON, the
//! trip-change dependent variable, and z-score standardization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, Point, Polygon};

/// One areal unit (county, tract, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct AreaUnit {
    pub id: String,
    pub name: String,
    /// Planar location (u, v) in projected meters.
    pub location: Point,
    pub geometry: Option<MultiPolygon>,
}

impl AreaUnit {
    pub fn at(id: impl Into<String>, location: Point) -> Self {
        let id = id.into();
        AreaUnit {
            name: id.clone(),
            id,
            location,
            geometry: None,
        }
    }

    /// Build a unit from its polygon, using the centroid as location.
    pub fn from_polygon(id: impl Into<String>, geometry: MultiPolygon) -> Result<Self> {
        let id = id.into();
        if !geometry.is_valid() {
            return Err(Error::InvalidGeometry(format!("unit `{id}`")));
        }
        let location = geometry
            .centroid()
            .ok_or_else(|| Error::InvalidGeometry(format!("unit `{id}` has no centroid")))?;
        Ok(AreaUnit {
            name: id.clone(),
            id,
            location,
            geometry: Some(geometry),
        })
    }
}

/// Trip counts for one area and the derived percent change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripChangeRecord {
    pub area_id: String,
    pub trips_before: f64,
    pub trips_after: f64,
    /// `None` when `trips_before == 0`.
    pub trip_change: Option<f64>,
}

impl TripChangeRecord {
    pub fn is_defined(&self) -> bool {
        self.trip_change.is_some()
    }
}

/// Percent decrease in trips: `(before - after) * 100 / before`.
///
/// Positive values mean fewer trips after; negative values mean more.
/// Undefined when `before` is zero.
pub fn trip_change(before: f64, after: f64) -> Option<f64> {
    if before > 0.0 {
        Some((before - after) * 100.0 / before)
    } else {
        None
    }
}

/// Compute trip change for every area, matching the two count lists by id.
///
/// Areas with zero trips before are kept and flagged with `trip_change =
/// None`. Output is sorted by id.
pub fn compute_trip_change(
    before: &[(String, f64)],
    after: &[(String, f64)],
) -> Result<Vec<TripChangeRecord>> {
    let b = index_counts(before)?;
    let a = index_counts(after)?;
    let b_ids: BTreeSet<&String> = b.keys().copied().collect();
    let a_ids: BTreeSet<&String> = a.keys().copied().collect();
    let mismatched: Vec<String> = b_ids
        .symmetric_difference(&a_ids)
        .map(|s| s.to_string())
        .collect();
    if !mismatched.is_empty() {
        return Err(Error::MismatchedIds(mismatched));
    }
    let mut out = Vec::with_capacity(b.len());
    for (id, &tb) in &b {
        let ta = a[id];
        let tc = trip_change(tb, ta);
        if tc.is_none() {
            warn!("area `{id}` has zero trips before; trip change undefined");
        }
        out.push(TripChangeRecord {
            area_id: id.to_string(),
            trips_before: tb,
            trips_after: ta,
            trip_change: tc,
        });
    }
    Ok(out)
}

fn index_counts(counts: &[(String, f64)]) -> Result<BTreeMap<&String, f64>> {
    let mut map = BTreeMap::new();
    for (id, c) in counts {
        if !(c.is_finite() && *c >= 0.0) {
            return Err(Error::NegativeCount(id.clone()));
        }
        if map.insert(id, *c).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(map)
}

/// Column mapping from an input file onto an [`ObservationTable`].
///
/// The dependent variable comes either from a column (`dependent`) or is
/// computed as trip change from `trips_before` / `trips_after`. Location
/// comes from `coord_x`/`coord_y` when given, else from polygon centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub coord_x: Option<String>,
    #[serde(default)]
    pub coord_y: Option<String>,
    #[serde(default)]
    pub dependent: Option<String>,
    #[serde(default)]
    pub trips_before: Option<String>,
    #[serde(default)]
    pub trips_after: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl Schema {
    fn validate(&self) -> Result<()> {
        let trips = self.trips_before.is_some() || self.trips_after.is_some();
        match (&self.dependent, trips) {
            (Some(_), true) => Err(Error::Config(
                "schema names both `dependent` and trip-count columns".into(),
            )),
            (None, false) => Err(Error::Config(
                "schema needs `dependent` or `trips_before`/`trips_after`".into(),
            )),
            (None, true) if self.trips_before.is_none() || self.trips_after.is_none() => Err(
                Error::Config("both `trips_before` and `trips_after` are required".into()),
            ),
            _ => {
                if self.coord_x.is_some() != self.coord_y.is_some() {
                    return Err(Error::Config("coord_x and coord_y go together".into()));
                }
                Ok(())
            }
        }
    }

    fn dependent_name(&self) -> String {
        self.dependent
            .clone()
            .unwrap_or_else(|| "trip_change".to_string())
    }
}

/// Per-column z-score parameters (sample standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub y_mean: f64,
    pub y_std: f64,
    pub x_means: Vec<f64>,
    pub x_stds: Vec<f64>,
}

/// Ordered areal units with a dependent vector and named covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    units: Vec<AreaUnit>,
    y_name: String,
    y: DVector<f64>,
    covariate_names: Vec<String>,
    x: DMatrix<f64>,
    standardization: Option<Standardization>,
    trips: Option<Vec<TripChangeRecord>>,
}

impl ObservationTable {
    /// Build a table, validating shapes, ids, and finiteness.
    pub fn new(
        units: Vec<AreaUnit>,
        y_name: impl Into<String>,
        y: DVector<f64>,
        covariate_names: Vec<String>,
        x: DMatrix<f64>,
    ) -> Result<Self> {
        let n = units.len();
        if n == 0 {
            return Err(Error::NoRows("table".into()));
        }
        if y.len() != n || x.nrows() != n || x.ncols() != covariate_names.len() {
            return Err(Error::InvalidInput(format!(
                "shape mismatch: {n} units, {} y, {}x{} X, {} names",
                y.len(),
                x.nrows(),
                x.ncols(),
                covariate_names.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for u in &units {
            if !seen.insert(u.id.as_str()) {
                return Err(Error::DuplicateId(u.id.clone()));
            }
            if !(u.location[0].is_finite() && u.location[1].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "non-finite location for `{}`",
                    u.id
                )));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in y or X".into()));
        }
        Ok(ObservationTable {
            units,
            y_name: y_name.into(),
            y,
            covariate_names,
            x,
            standardization: None,
            trips: None,
        })
    }

    pub fn with_trips(mut self, trips: Vec<TripChangeRecord>) -> Self {
        self.trips = Some(trips);
        self
    }

    pub fn n(&self) -> usize {
        self.units.len()
    }

    /// Number of covariates, excluding the intercept.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn units(&self) -> &[AreaUnit] {
        &self.units
    }

    pub fn ids(&self) -> Vec<&str> {
        self.units.iter().map(|u| u.id.as_str()).collect()
    }

    pub fn locations(&self) -> Vec<Point> {
        self.units.iter().map(|u| u.location).collect()
    }

    pub fn has_polygons(&self) -> bool {
        self.units.iter().all(|u| u.geometry.is_some())
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn y_name(&self) -> &str {
        &self.y_name
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn trips(&self) -> Option<&[TripChangeRecord]> {
        self.trips.as_deref()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// Design matrix with a leading column of ones.
    pub fn design(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut d = DMatrix::from_element(n, self.p() + 1, 1.0);
        d.view_mut((0, 1), (n, self.p())).copy_from(&self.x);
        d
    }

    /// Names of the design columns, intercept first.
    pub fn design_names(&self) -> Vec<String> {
        std::iter::once("Intercept".to_string())
            .chain(self.covariate_names.iter().cloned())
            .collect()
    }

    /// Keep only the named covariates, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.covariate_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::MissingColumn(n.to_string()))
            })
            .collect::<Result<_>>()?;
        let x = self.x.select_columns(idx.iter());
        let mut out = self.clone();
        out.x = x;
        out.covariate_names = names.iter().map(|s| s.to_string()).collect();
        if let Some(s) = &self.standardization {
            out.standardization = Some(Standardization {
                y_mean: s.y_mean,
                y_std: s.y_std,
                x_means: idx.iter().map(|&i| s.x_means[i]).collect(),
                x_stds: idx.iter().map(|&i| s.x_stds[i]).collect(),
            });
        }
        Ok(out)
    }

    /// Z-score `y` and every covariate with the sample standard deviation.
    /// Parameters compose, so `unstandardize` always returns the raw data.
    pub fn standardize(&self) -> Result<Self> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput("standardize needs n >= 2".into()));
        }
        let (ym, ys) = mean_std(self.y.as_slice());
        if !(ys > 0.0) {
            return Err(Error::ZeroVariance(self.y_name.clone()));
        }
        let mut x = self.x.clone();
        let mut means = Vec::with_capacity(self.p());
        let mut stds = Vec::with_capacity(self.p());
        for (j, name) in self.covariate_names.iter().enumerate() {
            let col: Vec<f64> = self.x.column(j).iter().copied().collect();
            let (m, s) = mean_std(&col);
            if !(s > 0.0) || s < 1e-12 * m.abs() {
                return Err(Error::ZeroVariance(name.clone()));
            }
            for v in x.column_mut(j).iter_mut() {
                *v = (*v - m) / s;
            }
            means.push(m);
            stds.push(s);
        }
        let y = self.y.map(|v| (v - ym) / ys);
        let params = match &self.standardization {
            None => Standardization {
                y_mean: ym,
                y_std: ys,
                x_means: means,
                x_stds: stds,
            },
            Some(old) => Standardization {
                y_mean: old.y_mean + old.y_std * ym,
                y_std: old.y_std * ys,
                x_means: (0..self.p())
                    .map(|j| old.x_means[j] + old.x_stds[j] * means[j])
                    .collect(),
                x_stds: (0..self.p()).map(|j| old.x_stds[j] * stds[j]).collect(),
            },
        };
        Ok(ObservationTable {
            y,
            x,
            standardization: Some(params),
            ..self.clone()
        })
    }

    /// Inverse of [`standardize`](Self::standardize). A raw table is returned unchanged.
    pub fn unstandardize(&self) -> Self {
        let Some(s) = &self.standardization else {
            return self.clone();
        };
        let mut x = self.x.clone();
        for j in 0..self.p() {
            for v in x.column_mut(j).iter_mut() {
                *v = *v * s.x_stds[j] + s.x_means[j];
            }
        }
        ObservationTable {
            y: self.y.map(|v| v * s.y_std + s.y_mean),
            x,
            standardization: None,
            ..self.clone()
        }
    }
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss = v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    (m, (ss / (n - 1.0)).sqrt())
}

/// One row dropped during ingestion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedRow {
    /// 1-based data row (header excluded) or feature index.
    pub row: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct IngestionReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub dropped: Vec<DroppedRow>,
}

/// A freshly loaded table plus what ingestion dropped.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub table: ObservationTable,
    pub report: IngestionReport,
}

/// Load a CSV or GeoJSON (`.geojson` / `.json`) file through a schema.
///
/// Rows are sorted by id. Rows with missing cells (empty, `NA`, `NaN`,
/// `null`) or undefined trip change are dropped and reported.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<Ingested> {
    let path = path.as_ref();
    schema.validate()?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    let raw = match ext.as_deref() {
        Some("geojson") | Some("json") => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            read_geojson(&text)?
        }
        _ => {
            let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            read_csv(&text)?
        }
    };
    if raw.rows.is_empty() {
        return Err(Error::NoRows(path.display().to_string()));
    }
    assemble(raw, schema, &path.display().to_string())
}

/// Load CSV from an in-memory buffer.
pub fn load_csv_bytes(bytes: &[u8], schema: &Schema) -> Result<Ingested> {
    schema.validate()?;
    let raw = read_csv(bytes)?;
    if raw.rows.is_empty() {
        return Err(Error::NoRows("input".into()));
    }
    assemble(raw, schema, "input")
}

struct RawRow {
    cells: HashMap<String, String>,
    geometry: Option<Geometry>,
}

enum Geometry {
    Point(Point),
    Area(MultiPolygon),
}

struct RawTable {
    columns: BTreeSet<String>,
    rows: Vec<RawRow>,
}

fn read_csv(bytes: &[u8]) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let cells = headers
            .iter()
            .cloned()
            .zip(rec.iter().map(|c| c.to_string()))
            .collect();
        rows.push(RawRow {
            cells,
            geometry: None,
        });
    }
    Ok(RawTable {
        columns: headers.into_iter().collect(),
        rows,
    })
}

fn read_geojson(text: &str) -> Result<RawTable> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    if v.get("type").and_then(|t| t.as_str()) != Some("FeatureCollection") {
        return Err(Error::InvalidInput("expected a GeoJSON FeatureCollection".into()));
    }
    let features = v
        .get("features")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::InvalidInput("FeatureCollection without features".into()))?;
    let mut columns = BTreeSet::new();
    let mut rows = Vec::new();
    for (k, f) in features.iter().enumerate() {
        let mut cells = HashMap::new();
        if let Some(props) = f.get("properties").and_then(|p| p.as_object()) {
            for (key, val) in props {
                columns.insert(key.clone());
                let s = match val {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                cells.insert(key.clone(), s);
            }
        }
        let geometry = match f.get("geometry") {
            Some(g) if !g.is_null() => parse_geometry(g)
                .map_err(|e| Error::InvalidGeometry(format!("feature {}: {e}", k + 1)))?,
            _ => None,
        };
        rows.push(RawRow { cells, geometry });
    }
    Ok(RawTable { columns, rows })
}

fn parse_ring(v: &serde_json::Value) -> std::result::Result<Vec<Point>, String> {
    v.as_array()
        .ok_or("ring is not an array")?
        .iter()
        .map(|p| {
            let a = p.as_array().ok_or("position is not an array")?;
            match (a.first().and_then(|x| x.as_f64()), a.get(1).and_then(|x| x.as_f64())) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err("bad position".to_string()),
            }
        })
        .collect()
}

fn parse_polygon(v: &serde_json::Value) -> std::result::Result<Polygon, String> {
    let rings = v.as_array().ok_or("polygon is not an array")?;
    let mut it = rings.iter();
    let exterior = parse_ring(it.next().ok_or("polygon without rings")?)?;
    let holes = it.map(parse_ring).collect::<std::result::Result<_, _>>()?;
    Ok(Polygon { exterior, holes })
}

fn parse_geometry(g: &serde_json::Value) -> std::result::Result<Option<Geometry>, String> {
    let kind = g.get("type").and_then(|t| t.as_str()).ok_or("geometry without type")?;
    let coords = g.get("coordinates").ok_or("geometry without coordinates")?;
    match kind {
        "Polygon" => Ok(Some(Geometry::Area(MultiPolygon(vec![parse_polygon(coords)?])))),
        "MultiPolygon" => Ok(Some(Geometry::Area(MultiPolygon(
            coords
                .as_array()
                .ok_or("multipolygon is not an array")?
                .iter()
                .map(parse_polygon)
                .collect::<std::result::Result<_, _>>()?,
        )))),
        "Point" => {
            let p = parse_ring(&serde_json::Value::Array(vec![coords.clone()]))?;
            Ok(Some(Geometry::Point(p[0])))
        }
        other => Err(format!("unsupported geometry type {other}")),
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || c.eq_ignore_ascii_case("na")
        || c.eq_ignore_ascii_case("nan")
        || c.eq_ignore_ascii_case("null")
}

enum Cell {
    Value(f64),
    Missing,
}

fn numeric(cells: &HashMap<String, String>, column: &str, row: usize) -> Result<Cell> {
    let raw = cells.get(column).map(|s| s.as_str()).unwrap_or("");
    if is_missing(raw) {
        return Ok(Cell::Missing);
    }
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Cell::Value)
        .ok_or_else(|| Error::NonNumeric {
            column: column.to_string(),
            row,
            value: raw.to_string(),
        })
}

fn assemble(raw: RawTable, schema: &Schema, source: &str) -> Result<Ingested> {
    let mut required: Vec<&String> = vec![&schema.id];
    required.extend(schema.name.iter());
    required.extend(schema.coord_x.iter());
    required.extend(schema.coord_y.iter());
    required.extend(schema.dependent.iter());
    required.extend(schema.trips_before.iter());
    required.extend(schema.trips_after.iter());
    required.extend(schema.covariates.iter());
    for c in required {
        if !raw.columns.contains(c) {
            return Err(Error::MissingColumn(c.clone()));
        }
    }

    let mut seen = BTreeSet::new();
    for r in &raw.rows {
        let id = r.cells.get(&schema.id).cloned().unwrap_or_default();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
    }

    struct Kept {
        unit: AreaUnit,
        y: f64,
        x: Vec<f64>,
        trips: Option<TripChangeRecord>,
    }

    let mut report = IngestionReport {
        rows_read: raw.rows.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    'rows: for (k, r) in raw.rows.into_iter().enumerate() {
        let row = k + 1;
        let id = r.cells.get(&schema.id).cloned().unwrap_or_default();
        let drop = |report: &mut IngestionReport, reason: String| {
            report.dropped.push(DroppedRow {
                row,
                id: id.clone(),
                reason,
            })
        };
        if is_missing(&id) {
            drop(&mut report, "missing id".into());
            continue;
        }

        let mut values = Vec::with_capacity(schema.covariates.len());
        for c in &schema.covariates {
            match numeric(&r.cells, c, row)? {
                Cell::Value(v) => values.push(v),
                Cell::Missing => {
                    drop(&mut report, format!("missing `{c}`"));
                    continue 'rows;
                }
            }
        }

        let (y, trips) = if let Some(dep) = &schema.dependent {
            match numeric(&r.cells, dep, row)? {
                Cell::Value(v) => (v, None),
                Cell::Missing => {
                    drop(&mut report, format!("missing `{dep}`"));
                    continue;
                }
            }
        } else {
            let (bcol, acol) = (
                schema.trips_before.as_ref().unwrap(),
                schema.trips_after.as_ref().unwrap(),
            );
            let (tb, ta) = match (numeric(&r.cells, bcol, row)?, numeric(&r.cells, acol, row)?) {
                (Cell::Value(b), Cell::Value(a)) => (b, a),
                _ => {
                    drop(&mut report, "missing trip count".into());
                    continue;
                }
            };
            if tb < 0.0 || ta < 0.0 {
                return Err(Error::NegativeCount(id));
            }
            match trip_change(tb, ta) {
                Some(tc) => (
                    tc,
                    Some(TripChangeRecord {
                        area_id: id.clone(),
                        trips_before: tb,
                        trips_after: ta,
                        trip_change: Some(tc),
                    }),
                ),
                None => {
                    drop(&mut report, "trip change undefined (zero trips before)".into());
                    continue;
                }
            }
        };

        let name = schema
            .name
            .as_ref()
            .and_then(|c| r.cells.get(c).cloned())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| id.clone());

        let location = match (&schema.coord_x, &schema.coord_y) {
            (Some(cx), Some(cy)) => match (numeric(&r.cells, cx, row)?, numeric(&r.cells, cy, row)?) {
                (Cell::Value(u), Cell::Value(v)) => Some([u, v]),
                _ => None,
            },
            _ => None,
        };
        let (point, geometry) = match r.geometry {
            Some(Geometry::Point(p)) => (Some(p), None),
            Some(Geometry::Area(g)) => {
                if !g.is_valid() {
                    return Err(Error::InvalidGeometry(format!("row {row} (`{id}`)")));
                }
                (None, Some(g))
            }
            None => (None, None),
        };
        let location = location
            .or(point)
            .or_else(|| geometry.as_ref().and_then(|g| g.centroid()));
        let location = match location {
            Some(l) => l,
            None => {
                drop(&mut report, "no location".into());
                continue;
            }
        };

        kept.push(Kept {
            unit: AreaUnit {
                id,
                name,
                location,
                geometry,
            },
            y,
            x: values,
            trips,
        });
    }

    for d in &report.dropped {
        warn!("dropped row {} (`{}`): {}", d.row, d.id, d.reason);
    }
    if kept.is_empty() {
        return Err(Error::NoRows(source.to_string()));
    }
    kept.sort_by(|a, b| a.unit.id.cmp(&b.unit.id));
    report.rows_kept = kept.len();

    let n = kept.len();
    let p = schema.covariates.len();
    let x = DMatrix::from_fn(n, p, |i, j| kept[i].x[j]);
    let y = DVector::from_iterator(n, kept.iter().map(|k| k.y));
    let trips: Option<Vec<TripChangeRecord>> =
        kept.iter().map(|k| k.trips.clone()).collect::<Option<Vec<_>>>();
    let units = kept.into_iter().map(|k| k.unit).collect();
    let mut table = ObservationTable::new(
        units,
        schema.dependent_name(),
        y,
        schema.covariates.clone(),
        x,
    )?;
    if let Some(t) = trips {
        table = table.with_trips(t);
    }
    Ok(Ingested { table, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema {
            id: "id".into(),
            coord_x: Some("x".into()),
            coord_y: Some("y".into()),
            dependent: Some("tc".into()),
            covariates: vec!["a".into(), "b".into()],
            ..Default::default()
        }
    }

    #[test]
    fn trip_change_examples() {
        assert_eq!(trip_change(100.0, 50.0), Some(50.0));
        assert_eq!(trip_change(100.0, 100.0), Some(0.0));
        assert_eq!(trip_change(80.0, 100.0), Some(-25.0));
        assert_eq!(trip_change(0.0, 10.0), None);
    }

    #[test]
    fn compute_trip_change_flags_zero_before() {
        let b = vec![("a".to_string(), 0.0), ("b".to_string(), 10.0)];
        let a = vec![("b".to_string(), 5.0), ("a".to_string(), 3.0)];
        let r = compute_trip_change(&b, &a).unwrap();
        assert_eq!(r.len(), 2);
        assert!(!r[0].is_defined());
        assert_eq!(r[1].trip_change, Some(50.0));
    }

    #[test]
    fn compute_trip_change_rejects_mismatched_ids() {
        let b = vec![("a".to_string(), 1.0), ("b".to_string(), 10.0)];
        let a = vec![("a".to_string(), 1.0), ("c".to_string(), 10.0)];
        match compute_trip_change(&b, &a) {
            Err(Error::MismatchedIds(ids)) => assert_eq!(ids, vec!["b", "c"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_csv_is_no_rows() {
        let err = load_csv_bytes(b"id,x,y,tc,a,b\n", &schema()).unwrap_err();
        assert!(err.to_string().contains("no rows"), "{err}");
    }

    #[test]
    fn duplicate_id_named() {
        let csv = b"id,x,y,tc,a,b\n1,0,0,1,2,3\n2,1,1,2,3,4\n1,2,2,3,4,5\n";
        match load_csv_bytes(csv, &schema()) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column_and_non_numeric() {
        let csv = b"id,x,y,tc,a\n1,0,0,1,2\n";
        assert!(matches!(load_csv_bytes(csv, &schema()), Err(Error::MissingColumn(c)) if c == "b"));
        let csv = b"id,x,y,tc,a,b\n1,0,0,1,2,abc\n";
        assert!(matches!(
            load_csv_bytes(csv, &schema()),
            Err(Error::NonNumeric { column, row: 1, .. }) if column == "b"
        ));
    }

    #[test]
    fn rows_sorted_and_missing_dropped() {
        let csv = b"id,x,y,tc,a,b\nc,0,0,1,2,3\na,1,1,2,NA,4\nb,2,2,3,4,5\n";
        let ing = load_csv_bytes(csv, &schema()).unwrap();
        assert_eq!(ing.table.ids(), vec!["b", "c"]);
        assert_eq!(ing.report.dropped.len(), 1);
        assert_eq!(ing.report.dropped[0].id, "a");
        assert_eq!(ing.report.rows_read, 3);
    }

    #[test]
    fn trip_columns_compute_dependent() {
        let s = Schema {
            id: "id".into(),
            coord_x: Some("x".into()),
            coord_y: Some("y".into()),
            trips_before: Some("tb".into()),
            trips_after: Some("ta".into()),
            covariates: vec!["a".into()],
            ..Default::default()
        };
        let csv = b"id,x,y,tb,ta,a\n1,0,0,100,50,1\n2,1,0,0,5,2\n3,0,1,80,100,3\n";
        let ing = load_csv_bytes(csv, &s).unwrap();
        assert_eq!(ing.table.y().as_slice(), &[50.0, -25.0]);
        assert_eq!(ing.report.dropped.len(), 1);
        assert_eq!(ing.table.trips().unwrap().len(), 2);
    }

    #[test]
    fn standardize_basic_and_zero_variance() {
        let units = (0..3).map(|i| AreaUnit::at(i.to_string(), [i as f64, 0.0])).collect();
        let t = ObservationTable::new(
            units,
            "y",
            DVector::from_vec(vec![1.0, 2.0, 3.0]),
            vec!["a".into(), "c".into()],
            DMatrix::from_row_slice(3, 2, &[1.0, 5.0, 2.0, 5.0, 3.0, 5.0]),
        )
        .unwrap();
        match t.standardize() {
            Err(Error::ZeroVariance(c)) => assert_eq!(c, "c"),
            other => panic!("{other:?}"),
        }
        let s = t.select(&["a"]).unwrap().standardize().unwrap();
        let col: Vec<f64> = s.x().column(0).iter().copied().collect();
        let (m, sd) = mean_std(&col);
        assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn geojson_polygons_give_centroids() {
        let gj = r#"{"type":"FeatureCollection","features":[
          {"type":"Feature","properties":{"id":"b","tc":2,"a":1},
           "geometry":{"type":"Polygon","coordinates":[[[1,0],[2,0],[2,1],[1,1],[1,0]]]}},
          {"type":"Feature","properties":{"id":"a","tc":1,"a":3},
           "geometry":{"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,1],[0,0]]]]}}
        ]}"#;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.geojson");
        std::fs::write(&p, gj).unwrap();
        let s = Schema {
            id: "id".into(),
            dependent: Some("tc".into()),
            covariates: vec!["a".into()],
            ..Default::default()
        };
        let ing = load_table(&p, &s).unwrap();
        assert_eq!(ing.table.ids(), vec!["a", "b"]);
        assert_eq!(ing.table.units()[0].location, [0.5, 0.5]);
        assert_eq!(ing.table.units()[1].location, [1.5, 0.5]);
        assert!(ing.table.has_polygons());
    }
}
