//! End-to-end workflow: load → trip change → descriptive statistics →
//! standardize → OLS + VIF → Moran's I on residuals → (gate) → GWR → MGWR
//! → Gi* hot spots → reports and layers, with a hashed run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{load_table, IngestionReport, ObservationTable, Schema};
use crate::error::{Error, Result};
use crate::esda::{self, HotSpotResult, MoranResult};
use crate::gwr::{GwrModel, GwrSettings, CN_THRESHOLD};
use crate::mgwr::{self, MgwrInit, MgwrModel, MgwrSettings};
use crate::ols::{self, GlobalFit};
use crate::report;
use crate::search::SearchMethod;
use crate::weights::{self, BandwidthMode, Contiguity, KernelFamily, SpatialWeights};

pub const FAILED_MARKER: &str = "FAILED";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub schema: Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WeightsKind {
    /// Queen contiguity when polygons are present, else k-nearest neighbors.
    #[default]
    Auto,
    Queen,
    Rook,
    Knn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default)]
    pub kind: WeightsKind,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    8
}

impl Default for WeightsConfig {
    fn default() -> Self {
        WeightsConfig {
            kind: WeightsKind::Auto,
            k: default_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: KernelFamily,
    #[serde(default = "default_mode")]
    pub mode: BandwidthMode,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
    #[serde(default = "default_method")]
    pub method: SearchMethod,
}

fn default_family() -> KernelFamily {
    KernelFamily::Bisquare
}
fn default_mode() -> BandwidthMode {
    BandwidthMode::Adaptive
}
fn default_method() -> SearchMethod {
    SearchMethod::GoldenSection
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            family: default_family(),
            mode: default_mode(),
            bounds: None,
            method: default_method(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MgwrConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub init: MgwrInit,
}

fn default_tol() -> f64 {
    1e-5
}
fn default_max_iter() -> usize {
    200
}
fn default_alpha() -> f64 {
    0.05
}

impl Default for MgwrConfig {
    fn default() -> Self {
        MgwrConfig {
            tol: default_tol(),
            max_iter: default_max_iter(),
            alpha: default_alpha(),
            init: MgwrInit::Gwr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoranConfig {
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    /// Required whenever `permutations > 0`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Proceed to local models when the residual Moran p-value is below this.
    #[serde(default = "default_alpha")]
    pub gate: f64,
}

fn default_permutations() -> usize {
    esda::DEFAULT_PERMUTATIONS
}

impl Default for MoranConfig {
    fn default() -> Self {
        MoranConfig {
            permutations: default_permutations(),
            seed: None,
            gate: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnConfig {
    #[serde(default = "default_cn")]
    pub threshold: f64,
}

fn default_cn() -> f64 {
    CN_THRESHOLD
}

impl Default for CnConfig {
    fn default() -> Self {
        CnConfig { threshold: default_cn() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub standardize: bool,
    pub input: InputConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mgwr: MgwrConfig,
    #[serde(default)]
    pub moran: MoranConfig,
    #[serde(default)]
    pub cn: CnConfig,
}

fn yes() -> bool {
    true
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Parse a config file and resolve relative paths against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        c.resolve_paths(base);
        Ok(c)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        if self.input.path.is_relative() {
            self.input.path = base.join(&self.input.path);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.moran.permutations > 0 && self.moran.seed.is_none() {
            return Err(Error::Config("`moran.seed` is required when permutations > 0".into()));
        }
        if !(self.moran.gate > 0.0 && self.moran.gate < 1.0) {
            return Err(Error::Config("`moran.gate` must lie in (0, 1)".into()));
        }
        if !(self.mgwr.tol > 0.0) || self.mgwr.max_iter == 0 {
            return Err(Error::Config("`mgwr.tol` must be > 0 and `mgwr.max_iter` ≥ 1".into()));
        }
        if !(self.mgwr.alpha > 0.0 && self.mgwr.alpha < 1.0) {
            return Err(Error::Config("`mgwr.alpha` must lie in (0, 1)".into()));
        }
        if self.weights.k == 0 {
            return Err(Error::Config("`weights.k` must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn gwr_settings(&self) -> GwrSettings {
        GwrSettings {
            family: self.kernel.family,
            mode: self.kernel.mode,
            bounds: self.kernel.bounds,
            method: self.kernel.method,
            ..Default::default()
        }
    }

    pub fn mgwr_settings(&self) -> MgwrSettings {
        MgwrSettings {
            family: self.kernel.family,
            mode: self.kernel.mode,
            bounds: self.kernel.bounds,
            method: self.kernel.method,
            init: self.mgwr.init,
            tol: self.mgwr.tol,
            max_iter: self.mgwr.max_iter,
            alpha: self.mgwr.alpha,
            ..Default::default()
        }
    }

    fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateDecision {
    Proceed,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub p_value: f64,
    pub threshold: f64,
    pub decision: GateDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub input_sha256: String,
    pub gate: Gate,
    /// Output file name → SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// What a run did; not written to disk.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest: Manifest,
    /// Files written by this run (all outputs unless resuming).
    pub written: Vec<String>,
    pub ols: GlobalFit,
    pub moran: MoranResult,
    pub gwr: Option<GwrModel>,
    pub mgwr: Option<MgwrModel>,
    pub hotspots: Option<HotSpotResult>,
}

struct Outputs {
    dir: PathBuf,
    resume: bool,
    written: Vec<String>,
}

impl Outputs {
    fn missing(&self, names: &[&str]) -> bool {
        !self.resume || names.iter().any(|n| !self.dir.join(n).exists())
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.dir.join(name);
        if self.resume && p.exists() {
            return Ok(());
        }
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn sha256_file(p: &Path) -> Result<String> {
    let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Load the configured input, returning the raw table and ingestion log.
pub fn load_input(config: &PipelineConfig) -> Result<(ObservationTable, IngestionReport)> {
    let ing = load_table(&config.input.path, &config.input.schema)?;
    Ok((ing.table, ing.report))
}

/// Binary (unstandardized, self-free) weights per the config.
pub fn build_weights(table: &ObservationTable, config: &WeightsConfig) -> Result<SpatialWeights> {
    match config.kind {
        WeightsKind::Queen => weights::build_contiguity_weights(table, Contiguity::Queen),
        WeightsKind::Rook => weights::build_contiguity_weights(table, Contiguity::Rook),
        WeightsKind::Knn => weights::build_knn_weights(table, config.k.min(table.n() - 1)),
        WeightsKind::Auto if table.has_polygons() => weights::build_contiguity_weights(table, Contiguity::Queen),
        WeightsKind::Auto => weights::build_knn_weights(table, config.k.min(table.n() - 1)),
    }
}

pub const GWR_FILES: [&str; 3] = ["gwr_report.txt", "gwr_local.csv", "gwr_coefficients.geojson"];
pub const MGWR_FILES: [&str; 5] = [
    "mgwr_report.txt",
    "mgwr_summary.csv",
    "mgwr_convergence.csv",
    "mgwr_local.csv",
    "mgwr_coefficients.geojson",
];
pub const HOTSPOT_FILES: [&str; 2] = ["hotspots.csv", "hotspots.geojson"];

/// Run the whole workflow into `config.output_dir`.
///
/// On failure a `FAILED` marker naming the stage is written next to any
/// outputs already produced, and the error carries the stage name. With
/// `resume`, existing outputs are kept and stages whose outputs all exist
/// are skipped.
pub fn run_pipeline(config: &PipelineConfig, resume: bool) -> Result<RunSummary> {
    config.validate()?;
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let marker = dir.join(FAILED_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    let mut out = Outputs {
        dir: dir.clone(),
        resume,
        written: Vec::new(),
    };
    match run_stages(config, &mut out) {
        Ok(s) => Ok(s),
        Err(e) => {
            let text = format!("{e}\n");
            let _ = std::fs::write(&marker, text);
            Err(e)
        }
    }
}

fn run_stages(config: &PipelineConfig, out: &mut Outputs) -> Result<RunSummary> {
    let stage = |name: &'static str| move |e: Error| e.at_stage(name);

    info!("stage load: {}", config.input.path.display());
    let (raw, ingestion) = load_input(config).map_err(stage("load"))?;
    out.put("ingestion.json", &json_bytes(&ingestion)?)?;
    let desc = report::descriptive_stats(&raw);
    out.put("descriptive.txt", report::descriptive_text(&desc).as_bytes())?;
    out.put("descriptive.csv", &report::descriptive_csv(&desc)?)?;
    if let Some(trips) = raw.trips() {
        let ids: Vec<String> = trips.iter().map(|t| t.area_id.clone()).collect();
        let cols = vec![
            ("trips_before".to_string(), trips.iter().map(|t| t.trips_before).collect()),
            ("trips_after".to_string(), trips.iter().map(|t| t.trips_after).collect()),
            ("trip_change".to_string(), trips.iter().map(|t| t.trip_change.unwrap_or(f64::NAN)).collect()),
        ];
        out.put("trip_change.csv", &report::columns_csv(&ids, &cols, &[])?)?;
    }

    let table = if config.standardize {
        info!("stage standardize");
        raw.standardize().map_err(stage("standardize"))?
    } else {
        raw.clone()
    };

    info!("stage ols");
    let fit = ols::fit_ols(&table).map_err(stage("ols"))?;
    out.put("ols_report.txt", report::ols_text(&fit, table.y_name()).as_bytes())?;
    out.put("ols_coefficients.csv", &report::ols_coefficients_csv(&fit)?)?;
    out.put("ols_summary.csv", &report::ols_summary_csv(&fit)?)?;

    info!("stage moran");
    let binary = build_weights(&table, &config.weights).map_err(stage("moran"))?;
    let seed = config.moran.seed.unwrap_or(0);
    let moran = esda::morans_i(&fit.residuals, &binary.row_standardized(), config.moran.permutations, seed)
        .map_err(stage("moran"))?;
    out.put("moran_report.txt", report::moran_text(&moran, "OLS residuals").as_bytes())?;
    out.put("moran.json", &json_bytes(&moran)?)?;

    let p = moran.p_value().unwrap_or(1.0);
    let decision = if p < config.moran.gate {
        GateDecision::Proceed
    } else {
        GateDecision::Stop
    };
    info!("gate: p = {p:.4} vs {} → {decision:?}", config.moran.gate);
    let gate = Gate {
        p_value: p,
        threshold: config.moran.gate,
        decision,
    };

    let mut gwr_model = None;
    let mut mgwr_model = None;
    let mut hot = None;
    if decision == GateDecision::Proceed {
        if out.missing(&GWR_FILES) {
            info!("stage gwr");
            let m = crate::gwr::calibrate_gwr(&table, &config.gwr_settings()).map_err(stage("gwr"))?;
            out.put("gwr_report.txt", report::gwr_text(&m, config.cn.threshold).as_bytes())?;
            let cols = report::gwr_columns(&m);
            out.put("gwr_local.csv", &report::columns_csv(&m.ids, &cols, &[])?)?;
            out.put("gwr_coefficients.geojson", &report::geojson_layer(&table, &cols, &[])?)?;
            gwr_model = Some(m);
        }
        if out.missing(&MGWR_FILES) {
            info!("stage mgwr");
            let m = mgwr::fit_mgwr(&table, &config.mgwr_settings()).map_err(stage("mgwr"))?;
            let s = mgwr::summarize_mgwr(&m);
            out.put("mgwr_report.txt", report::mgwr_text(&s).as_bytes())?;
            out.put("mgwr_summary.csv", &report::mgwr_summary_csv(&s)?)?;
            out.put("mgwr_convergence.csv", &report::convergence_csv(&m)?)?;
            let cols = report::mgwr_columns(&m);
            out.put("mgwr_local.csv", &report::columns_csv(&m.ids, &cols, &[])?)?;
            out.put("mgwr_coefficients.geojson", &report::geojson_layer(&table, &cols, &[])?)?;
            mgwr_model = Some(m);
        }
        if out.missing(&HOTSPOT_FILES) {
            info!("stage hotspots");
            let values: Vec<f64> = raw.y().iter().copied().collect();
            let h = esda::getis_ord_gstar(&values, &binary.binary_with_self()).map_err(stage("hotspots"))?;
            let (cols, text) = report::hotspot_columns(&values, &h);
            let ids: Vec<String> = table.ids().into_iter().map(String::from).collect();
            out.put("hotspots.csv", &report::columns_csv(&ids, &cols, &text)?)?;
            out.put("hotspots.geojson", &report::geojson_layer(&table, &cols, &text)?)?;
            hot = Some(h);
        }
    }

    let mut names: Vec<&str> = vec![
        "ingestion.json",
        "descriptive.txt",
        "descriptive.csv",
        "ols_report.txt",
        "ols_coefficients.csv",
        "ols_summary.csv",
        "moran_report.txt",
        "moran.json",
    ];
    if raw.trips().is_some() {
        names.push("trip_change.csv");
    }
    if decision == GateDecision::Proceed {
        names.extend(GWR_FILES);
        names.extend(MGWR_FILES);
        names.extend(HOTSPOT_FILES);
    }
    let mut files = BTreeMap::new();
    for n in names {
        files.insert(n.to_string(), sha256_file(&out.dir.join(n))?);
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: config.moran.seed,
        config_sha256: config.hash(),
        input_sha256: sha256_file(&config.input.path)?,
        gate,
        files,
    };
    out.put(MANIFEST, &json_bytes(&manifest)?)?;

    Ok(RunSummary {
        output_dir: out.dir.clone(),
        manifest,
        written: out.written.clone(),
        ols: fit,
        moran,
        gwr: gwr_model,
        mgwr: mgwr_model,
        hotspots: hot,
    })
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
output_dir = "out"
[input]
path = "data.csv"
[input.schema]
id = "id"
dependent = "y"
covariates = ["x1"]
[moran]
seed = 1
"#;

    #[test]
    fn parses_with_defaults() {
        let c = PipelineConfig::from_toml(MINIMAL).unwrap();
        assert!(c.standardize);
        assert_eq!(c.moran.permutations, 999);
        assert_eq!(c.moran.gate, 0.05);
        assert_eq!(c.mgwr.max_iter, 200);
        assert_eq!(c.weights.k, 8);
    }

    #[test]
    fn seed_required_for_permutations() {
        let text = MINIMAL.replace("seed = 1", "permutations = 99");
        assert!(matches!(PipelineConfig::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("seed = 1", "permutations = 0");
        assert!(PipelineConfig::from_toml(&text).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{MINIMAL}\n[kernel]\nfamly = \"gaussian\"\n");
        assert!(PipelineConfig::from_toml(&text).is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut c = PipelineConfig::from_toml(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/tmp/run"));
        assert_eq!(c.input.path, PathBuf::from("/tmp/run/data.csv"));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/run/out"));
    }
}
