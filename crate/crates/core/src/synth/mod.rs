//! Seeded synthetic datasets with known coefficient surfaces, plus
//! brute-force reference implementations in [`oracle`].

pub mod oracle;

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{AreaUnit, ObservationTable, Schema, TripChangeRecord};
use crate::error::{Error, Result};
use crate::geometry::{MultiPolygon, Point, Polygon};

const STREAM_LAYOUT: u64 = 0;
const STREAM_COVARIATES: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_CLUSTERED: u64 = 3;
const STREAM_TRIPS: u64 = 4;

/// Scenario bundled with the crate: 158 grid cells with covariate ranges
/// modeled on county-level job, income, mode-share, and health statistics,
/// one spatially varying coefficient, and spatially clustered noise.
pub const REGIONAL: &str = include_str!("../../data/regional.toml");
/// Same layout and covariates with constant coefficients and i.i.d. noise.
pub const REGIONAL_IID: &str = include_str!("../../data/regional_iid.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Layout {
    /// Unit cells on a regular grid, filled row by row. `count` truncates
    /// the last row.
    Grid {
        rows: usize,
        cols: usize,
        #[serde(default = "one")]
        spacing: f64,
        #[serde(default)]
        count: Option<usize>,
    },
    /// Uniform random points in `[0, width] × [0, height]`.
    Random { n: usize, width: f64, height: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Surface {
    Constant {
        value: f64,
    },
    /// `a·u + b·v + c`.
    Linear {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// `offset + amplitude · sin(2πu / wavelength)`.
    Sinusoidal {
        wavelength: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl Surface {
    pub fn at(&self, [u, v]: Point) -> f64 {
        match *self {
            Surface::Constant { value } => value,
            Surface::Linear { a, b, c } => a * u + b * v + c,
            Surface::Sinusoidal {
                wavelength,
                amplitude,
                offset,
            } => offset + amplitude * (2.0 * PI * u / wavelength).sin(),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = match *self {
            Surface::Constant { value } => value.is_finite(),
            Surface::Linear { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
            Surface::Sinusoidal {
                wavelength,
                amplitude,
                offset,
            } => wavelength > 0.0 && wavelength.is_finite() && amplitude.is_finite() && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!("invalid surface for `{what}`: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub name: String,
    pub beta: Surface,
    /// Draws are `x = mean + sd · z`; the coefficient applies to `z`.
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "one")]
    pub sd: f64,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    /// Loading on a shared standard-normal factor, in `[-1, 1]`.
    #[serde(default)]
    pub loading: f64,
}

/// Smooth Gaussian-kernel noise field with unit marginal variance, scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteredNoise {
    pub std: f64,
    pub range: f64,
}

/// Emit trip counts whose trip change equals the generated response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripSpec {
    pub before_min: f64,
    pub before_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScenario {
    pub seed: u64,
    pub layout: Layout,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub clustered_noise: Option<ClusteredNoise>,
    #[serde(default = "default_dependent")]
    pub dependent: String,
    pub intercept: Surface,
    #[serde(default)]
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub trips: Option<TripSpec>,
}

fn default_dependent() -> String {
    "y".into()
}

impl SyntheticScenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SyntheticScenario =
            toml::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn regional() -> Self {
        Self::from_toml(REGIONAL).expect("bundled scenario parses")
    }

    pub fn regional_iid() -> Self {
        Self::from_toml(REGIONAL_IID).expect("bundled scenario parses")
    }

    /// Grid layout with standard-normal covariates.
    pub fn grid(rows: usize, cols: usize, intercept: Surface, betas: Vec<Surface>, noise_std: f64, seed: u64) -> Self {
        SyntheticScenario {
            seed,
            layout: Layout::Grid {
                rows,
                cols,
                spacing: 1.0,
                count: None,
            },
            noise_std,
            clustered_noise: None,
            dependent: default_dependent(),
            intercept,
            covariates: betas
                .into_iter()
                .enumerate()
                .map(|(j, beta)| CovariateSpec {
                    name: format!("x{}", j + 1),
                    beta,
                    mean: 0.0,
                    sd: 1.0,
                    min: None,
                    max: None,
                    loading: 0.0,
                })
                .collect(),
            trips: None,
        }
    }

    pub fn n(&self) -> usize {
        match self.layout {
            Layout::Grid { rows, cols, count, .. } => count.unwrap_or(rows * cols),
            Layout::Random { n, .. } => n,
        }
    }

    pub fn p(&self) -> usize {
        self.covariates.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n() < 25 {
            return bad(format!("n = {} but at least 25 units are required", self.n()));
        }
        match self.layout {
            Layout::Grid { rows, cols, spacing, count } => {
                if !(spacing > 0.0) {
                    return bad("grid spacing must be > 0".into());
                }
                if count.is_some_and(|c| c > rows * cols) {
                    return bad("grid count exceeds rows × cols".into());
                }
            }
            Layout::Random { width, height, .. } => {
                if !(width > 0.0 && height > 0.0) {
                    return bad("random layout needs positive width and height".into());
                }
            }
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be ≥ 0".into());
        }
        if let Some(c) = &self.clustered_noise {
            if !(c.std >= 0.0 && c.range > 0.0) {
                return bad("clustered noise needs std ≥ 0 and range > 0".into());
            }
        }
        if let Some(t) = &self.trips {
            if !(t.before_min >= 1.0 && t.before_max >= t.before_min) {
                return bad("trip counts need 1 ≤ before_min ≤ before_max".into());
            }
        }
        self.intercept.validate("Intercept")?;
        let mut names = std::collections::BTreeSet::new();
        for c in &self.covariates {
            c.beta.validate(&c.name)?;
            if !names.insert(c.name.as_str()) || c.name == "Intercept" || c.name == self.dependent {
                return bad(format!("duplicate or reserved covariate name `{}`", c.name));
            }
            if !(c.sd > 0.0) || !(-1.0..=1.0).contains(&c.loading) {
                return bad(format!("covariate `{}` needs sd > 0 and |loading| ≤ 1", c.name));
            }
            if let (Some(lo), Some(hi)) = (c.min, c.max) {
                if lo > hi {
                    return bad(format!("covariate `{}` has min > max", c.name));
                }
            }
        }
        Ok(())
    }
}

/// Generated table plus the true coefficient surfaces it was drawn from.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub scenario: SyntheticScenario,
    pub table: ObservationTable,
    /// `n × (p + 1)` true coefficients on the standardized draws, intercept first.
    pub truth: DMatrix<f64>,
    /// Standardized draws `z` the coefficients apply to.
    pub z: DMatrix<f64>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Draw a dataset. The seed fully determines the output.
pub fn generate(scenario: &SyntheticScenario) -> Result<SyntheticData> {
    scenario.validate()?;
    let n = scenario.n();
    let p = scenario.p();
    let width = n.saturating_sub(1).to_string().len();
    let id = |i: usize| format!("{i:0width$}");

    let units: Vec<AreaUnit> = match scenario.layout {
        Layout::Grid { cols, spacing, .. } => (0..n)
            .map(|i| {
                let (r, c) = (i / cols, i % cols);
                let cell = MultiPolygon(vec![Polygon::square(c as f64 * spacing, r as f64 * spacing, spacing)]);
                AreaUnit::from_polygon(id(i), cell)
            })
            .collect::<Result<_>>()?,
        Layout::Random { width: w, height: h, .. } => {
            let mut g = rng(scenario.seed, STREAM_LAYOUT);
            (0..n)
                .map(|i| AreaUnit::at(id(i), [g.random_range(0.0..w), g.random_range(0.0..h)]))
                .collect()
        }
    };
    let locs: Vec<Point> = units.iter().map(|u| u.location).collect();

    let mut z = DMatrix::zeros(n, p);
    let mut x = DMatrix::zeros(n, p);
    let mut g = rng(scenario.seed, STREAM_COVARIATES);
    for i in 0..n {
        let f: f64 = g.sample(StandardNormal);
        for (j, c) in scenario.covariates.iter().enumerate() {
            let e: f64 = g.sample(StandardNormal);
            let draw = c.loading * f + (1.0 - c.loading * c.loading).sqrt() * e;
            let mut v = c.mean + c.sd * draw;
            if let Some(lo) = c.min {
                v = v.max(lo);
            }
            if let Some(hi) = c.max {
                v = v.min(hi);
            }
            x[(i, j)] = v;
            z[(i, j)] = (v - c.mean) / c.sd;
        }
    }

    let mut truth = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        truth[(i, 0)] = scenario.intercept.at(locs[i]);
        for (j, c) in scenario.covariates.iter().enumerate() {
            truth[(i, j + 1)] = c.beta.at(locs[i]);
        }
    }

    let mut g = rng(scenario.seed, STREAM_NOISE);
    let mut y = DVector::from_fn(n, |i, _| {
        let signal = truth[(i, 0)] + (0..p).map(|j| truth[(i, j + 1)] * z[(i, j)]).sum::<f64>();
        let e: f64 = g.sample(StandardNormal);
        signal + scenario.noise_std * e
    });
    if let Some(c) = &scenario.clustered_noise {
        let mut g = rng(scenario.seed, STREAM_CLUSTERED);
        let base: Vec<f64> = (0..n).map(|_| g.sample(StandardNormal)).collect();
        for i in 0..n {
            let k: Vec<f64> = locs
                .iter()
                .map(|l| {
                    let d2 = (l[0] - locs[i][0]).powi(2) + (l[1] - locs[i][1]).powi(2);
                    (-0.5 * d2 / (c.range * c.range)).exp()
                })
                .collect();
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
            let s: f64 = k.iter().zip(&base).map(|(a, b)| a * b).sum();
            y[i] += c.std * s / norm;
        }
    }

    let names: Vec<String> = scenario.covariates.iter().map(|c| c.name.clone()).collect();
    let mut table = ObservationTable::new(units, scenario.dependent.clone(), y.clone(), names, x)?;
    if let Some(t) = &scenario.trips {
        let mut g = rng(scenario.seed, STREAM_TRIPS);
        let (lo, hi) = (t.before_min.ln(), t.before_max.ln());
        let mut records = Vec::with_capacity(n);
        let mut tc = y.clone();
        for i in 0..n {
            let before = g.random_range(lo..=hi).exp().round().max(1.0);
            let after = (before * (1.0 - y[i] / 100.0)).round().max(0.0);
            let change = crate::data::trip_change(before, after).expect("before ≥ 1");
            tc[i] = change;
            records.push(TripChangeRecord {
                area_id: id(i),
                trips_before: before,
                trips_after: after,
                trip_change: Some(change),
            });
        }
        // trip change is what ingestion will recompute from the counts
        table = ObservationTable::new(
            table.units().to_vec(),
            scenario.dependent.clone(),
            tc,
            table.covariate_names().to_vec(),
            table.x().clone(),
        )?
        .with_trips(records);
    }
    Ok(SyntheticData {
        scenario: scenario.clone(),
        table,
        truth,
        z,
    })
}

impl SyntheticData {
    pub fn truth_names(&self) -> Vec<String> {
        self.table.design_names()
    }

    /// Schema that reads back the CSV written by [`SyntheticData::to_csv`].
    pub fn schema(&self) -> Schema {
        let trips = self.scenario.trips.is_some();
        Schema {
            id: "id".into(),
            name: None,
            coord_x: Some("u".into()),
            coord_y: Some("v".into()),
            dependent: (!trips).then(|| self.scenario.dependent.clone()),
            trips_before: trips.then(|| "trips_before".into()),
            trips_after: trips.then(|| "trips_after".into()),
            covariates: self.table.covariate_names().to_vec(),
        }
    }

    /// Data in the ingestion CSV layout: `id, u, v, covariates…, dependent`
    /// and, when configured, trip counts.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let t = &self.table;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "u".into(), "v".into()];
        header.extend(t.covariate_names().iter().cloned());
        header.push(t.y_name().to_string());
        if t.trips().is_some() {
            header.push("trips_before".into());
            header.push("trips_after".into());
        }
        w.write_record(&header)?;
        for (i, u) in t.units().iter().enumerate() {
            let mut rec = vec![u.id.clone(), u.location[0].to_string(), u.location[1].to_string()];
            rec.extend(t.x().row(i).iter().map(|v| v.to_string()));
            rec.push(t.y()[i].to_string());
            if let Some(tr) = t.trips() {
                rec.push(tr[i].trips_before.to_string());
                rec.push(tr[i].trips_after.to_string());
            }
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// True surfaces: `id, u, v, beta_<term>…`.
    pub fn truth_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "u".into(), "v".into()];
        header.extend(self.truth_names().iter().map(|n| format!("beta_{n}")));
        w.write_record(&header)?;
        for (i, u) in self.table.units().iter().enumerate() {
            let mut rec = vec![u.id.clone(), u.location[0].to_string(), u.location[1].to_string()];
            rec.extend(self.truth.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Pipeline config reading this dataset from `data.geojson` (grid
    /// layouts) or `data.csv`, writing to `out/`.
    pub fn pipeline_config(&self) -> crate::pipeline::PipelineConfig {
        let mut schema = self.schema();
        let path = if self.table.has_polygons() {
            schema.coord_x = None;
            schema.coord_y = None;
            "data.geojson"
        } else {
            "data.csv"
        };
        crate::pipeline::PipelineConfig {
            output_dir: "out".into(),
            standardize: true,
            input: crate::pipeline::InputConfig {
                path: path.into(),
                schema,
            },
            weights: Default::default(),
            kernel: Default::default(),
            mgwr: Default::default(),
            moran: crate::pipeline::MoranConfig {
                seed: Some(self.scenario.seed),
                ..Default::default()
            },
            cn: Default::default(),
        }
    }

    /// Write `data.csv`, `truth.csv`, `pipeline.toml`, and for grid layouts
    /// `data.geojson` into `dir`. Returns the written paths.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut out = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
            out.push(p);
            Ok(())
        };
        put("data.csv", self.to_csv()?)?;
        put("truth.csv", self.truth_csv()?)?;
        if self.table.has_polygons() {
            let t = &self.table;
            let mut cols: Vec<(String, Vec<f64>)> = vec![(t.y_name().into(), t.y().iter().copied().collect())];
            for (j, name) in t.covariate_names().iter().enumerate() {
                cols.push((name.clone(), t.x().column(j).iter().copied().collect()));
            }
            if let Some(tr) = t.trips() {
                cols.push(("trips_before".into(), tr.iter().map(|r| r.trips_before).collect()));
                cols.push(("trips_after".into(), tr.iter().map(|r| r.trips_after).collect()));
            }
            put("data.geojson", crate::report::geojson_layer(t, &cols, &[])?)?;
        }
        let config = toml::to_string(&self.pipeline_config()).map_err(|e| Error::Config(e.to_string()))?;
        put("pipeline.toml", config.into_bytes())?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        let s = SyntheticScenario::regional();
        assert_eq!(s.n(), 158);
        assert_eq!(s.p(), 15);
        assert_eq!(SyntheticScenario::regional_iid().n(), 158);
    }

    #[test]
    fn rejects_small_and_bad_surfaces() {
        let s = SyntheticScenario::grid(4, 4, Surface::Constant { value: 1.0 }, vec![], 0.0, 1);
        assert!(matches!(generate(&s), Err(Error::InvalidScenario(_))));
        let s = SyntheticScenario::grid(
            5,
            5,
            Surface::Constant { value: 1.0 },
            vec![Surface::Sinusoidal { wavelength: 0.0, amplitude: 1.0, offset: 0.0 }],
            0.0,
            1,
        );
        assert!(matches!(generate(&s), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = SyntheticScenario::regional();
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(generate(&other).unwrap().to_csv().unwrap(), a.to_csv().unwrap());
    }

    #[test]
    fn csv_round_trips_through_ingestion() {
        let d = generate(&SyntheticScenario::regional()).unwrap();
        let back = crate::data::load_csv_bytes(&d.to_csv().unwrap(), &d.schema()).unwrap();
        assert_eq!(back.report.rows_kept, 158);
        assert_eq!(back.table.x(), d.table.x());
        assert_eq!(back.table.y(), d.table.y());
    }

    #[test]
    fn truncated_grid() {
        let mut s = SyntheticScenario::grid(6, 6, Surface::Constant { value: 0.0 }, vec![], 0.0, 3);
        s.layout = Layout::Grid { rows: 6, cols: 6, spacing: 2.0, count: Some(27) };
        let d = generate(&s).unwrap();
        assert_eq!(d.table.n(), 27);
        assert_eq!(d.table.units()[26].location, [5.0, 9.0]);
    }
}
