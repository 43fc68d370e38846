//! Spatial regression toolkit for area-level mobility change: global OLS
//! with collinearity screening, Moran's I and Getis-Ord Gi* diagnostics,
//! geographically weighted regression (GWR) and its multiscale variant
//! (MGWR), a synthetic scenario generator, and an end-to-end pipeline.

pub mod data;
pub mod error;
pub mod esda;
pub mod geometry;
pub mod gwr;
pub mod linalg;
pub mod mgwr;
pub mod ols;
pub mod pipeline;
pub mod report;
pub mod search;
pub mod stats;
pub mod synth;
pub mod weights;

pub use data::{load_table, trip_change, AreaUnit, ObservationTable, Schema};
pub use error::{Error, Result};
pub use esda::{getis_ord_gstar, morans_i, HotSpotClass, MoranResult};
pub use gwr::{calibrate_gwr, fit_gwr, GwrModel, GwrSettings};
pub use mgwr::{fit_mgwr, summarize_mgwr, MgwrModel, MgwrSettings};
pub use ols::{fit_ols, GlobalFit};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use synth::{generate, SyntheticScenario};
pub use weights::{build_contiguity_weights, build_knn_weights, Bandwidth, KernelSpec, SpatialWeights};
