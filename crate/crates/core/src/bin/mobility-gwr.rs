use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mobility_gwr::data::{ObservationTable, Schema};
use mobility_gwr::pipeline::{self, InputConfig, PipelineConfig, WeightsKind};
use mobility_gwr::synth::{self, SyntheticScenario};
use mobility_gwr::weights::{Bandwidth, BandwidthMode, KernelFamily, KernelSpec};
use mobility_gwr::{esda, gwr, mgwr, ols, report, Error, Result};

#[derive(Parser)]
#[command(name = "mobility-gwr", version, about = "Global and local spatial regression for areal mobility data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full workflow driven by a config file.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
    /// Global OLS with VIF.
    Ols(StageArgs),
    /// Moran's I on OLS residuals (or the dependent variable).
    Moran {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long, value_enum, default_value_t = MoranTarget::Residuals)]
        on: MoranTarget,
    },
    /// Single-bandwidth GWR.
    Gwr(LocalArgs),
    /// Multiscale GWR.
    Mgwr(LocalArgs),
    /// Getis-Ord Gi* on the raw dependent variable.
    Hotspots(StageArgs),
    /// Synthetic scenarios.
    Synth {
        #[command(subcommand)]
        action: SynthAction,
    },
}

#[derive(Subcommand)]
enum PipelineAction {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Keep existing outputs and only produce missing ones.
        #[arg(long)]
        resume: bool,
    },
}

#[derive(Subcommand)]
enum SynthAction {
    Generate {
        /// Scenario TOML file.
        #[arg(long, conflicts_with = "bundled")]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum)]
        bundled: Option<Bundled>,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Bundled {
    Regional,
    RegionalIid,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MoranTarget {
    Residuals,
    Dependent,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline config supplying input, schema, and settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    input: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    id: String,
    #[arg(long)]
    dependent: Option<String>,
    #[arg(long, requires = "trips_after")]
    trips_before: Option<String>,
    #[arg(long, requires = "trips_before")]
    trips_after: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Coordinate columns `x,y`; polygon centroids are used otherwise.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    coords: Option<Vec<String>>,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, value_enum)]
    weights: Option<WeightsArg>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV/GeoJSON outputs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LocalArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Use this bandwidth instead of searching.
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Auto,
    Queen,
    Rook,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Bisquare,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Adaptive,
    Fixed,
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => {
                let trips = self.trips_before.is_some();
                let coords = self.coords.clone();
                if coords.as_ref().is_some_and(|c| c.len() != 2) {
                    return Err(Error::InvalidInput("--coords takes two column names, `x,y`".into()));
                }
                PipelineConfig {
                    output_dir: PathBuf::from("."),
                    standardize: true,
                    input: InputConfig {
                        path: self.input.clone().expect("clap enforces --input"),
                        schema: Schema {
                            id: self.id.clone(),
                            name: None,
                            coord_x: coords.as_ref().map(|c| c[0].clone()),
                            coord_y: coords.as_ref().map(|c| c[1].clone()),
                            dependent: if trips { None } else { Some(self.dependent.clone().unwrap_or_else(|| "y".into())) },
                            trips_before: self.trips_before.clone(),
                            trips_after: self.trips_after.clone(),
                            covariates: self.covariates.clone(),
                        },
                    },
                    weights: Default::default(),
                    kernel: Default::default(),
                    mgwr: Default::default(),
                    moran: pipeline::MoranConfig {
                        seed: Some(0),
                        ..Default::default()
                    },
                    cn: Default::default(),
                }
            }
        };
        if self.no_standardize {
            c.standardize = false;
        }
        if let Some(w) = self.weights {
            c.weights.kind = match w {
                WeightsArg::Auto => WeightsKind::Auto,
                WeightsArg::Queen => WeightsKind::Queen,
                WeightsArg::Rook => WeightsKind::Rook,
                WeightsArg::Knn => WeightsKind::Knn,
            };
        }
        if let Some(k) = self.k {
            c.weights.k = k;
        }
        if let Some(p) = self.permutations {
            c.moran.permutations = p;
        }
        if let Some(s) = self.seed {
            c.moran.seed = Some(s);
        }
        c.validate()?;
        Ok(c)
    }

    fn tables(&self, c: &PipelineConfig) -> Result<(ObservationTable, ObservationTable)> {
        let (raw, _) = pipeline::load_input(c)?;
        let t = if c.standardize { raw.standardize()? } else { raw.clone() };
        Ok((raw, t))
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))?;
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

impl LocalArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(f) = self.family {
            c.kernel.family = match f {
                FamilyArg::Bisquare => KernelFamily::Bisquare,
                FamilyArg::Gaussian => KernelFamily::Gaussian,
            };
        }
        if let Some(m) = self.mode {
            c.kernel.mode = match m {
                ModeArg::Adaptive => BandwidthMode::Adaptive,
                ModeArg::Fixed => BandwidthMode::Fixed,
            };
        }
    }

    fn bandwidth(&self, c: &PipelineConfig) -> Option<Bandwidth> {
        self.bandwidth.map(|b| Bandwidth::from_value(c.kernel.mode, b))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pipeline {
            action: PipelineAction::Run { config, resume },
        } => {
            let c = PipelineConfig::from_file(&config)?;
            let s = pipeline::run_pipeline(&c, resume)?;
            println!(
                "gate: p = {:.4} (threshold {}) -> {:?}",
                s.manifest.gate.p_value, s.manifest.gate.threshold, s.manifest.gate.decision
            );
            println!("outputs in {}", s.output_dir.display());
        }
        Command::Ols(a) => {
            let c = a.config()?;
            let (_, t) = a.tables(&c)?;
            let fit = ols::fit_ols(&t).map_err(|e| e.at_stage("ols"))?;
            print!("{}", report::ols_text(&fit, t.y_name()));
            a.write("ols_coefficients.csv", &report::ols_coefficients_csv(&fit)?)?;
            a.write("ols_summary.csv", &report::ols_summary_csv(&fit)?)?;
        }
        Command::Moran { stage: a, on } => {
            let c = a.config()?;
            let (raw, t) = a.tables(&c)?;
            let (values, label): (Vec<f64>, &str) = match on {
                MoranTarget::Residuals => (ols::fit_ols(&t).map_err(|e| e.at_stage("ols"))?.residuals, "OLS residuals"),
                MoranTarget::Dependent => (raw.y().iter().copied().collect(), raw.y_name()),
            };
            let w = pipeline::build_weights(&t, &c.weights)?.row_standardized();
            let m = esda::morans_i(&values, &w, c.moran.permutations, c.moran.seed.unwrap_or(0))
                .map_err(|e| e.at_stage("moran"))?;
            print!("{}", report::moran_text(&m, label));
            a.write("moran.json", &serde_json::to_vec_pretty(&m)?)?;
        }
        Command::Gwr(l) => {
            let mut c = l.stage.config()?;
            l.apply(&mut c);
            let (_, t) = l.stage.tables(&c)?;
            let m = match l.bandwidth(&c) {
                Some(bw) => gwr::fit_gwr(&t, &KernelSpec { family: c.kernel.family, bandwidth: bw }),
                None => gwr::calibrate_gwr(&t, &c.gwr_settings()),
            }
            .map_err(|e| e.at_stage("gwr"))?;
            print!("{}", report::gwr_text(&m, c.cn.threshold));
            let cols = report::gwr_columns(&m);
            l.stage.write("gwr_local.csv", &report::columns_csv(&m.ids, &cols, &[])?)?;
            l.stage.write("gwr_coefficients.geojson", &report::geojson_layer(&t, &cols, &[])?)?;
        }
        Command::Mgwr(l) => {
            let mut c = l.stage.config()?;
            l.apply(&mut c);
            let (_, t) = l.stage.tables(&c)?;
            let mut s = c.mgwr_settings();
            s.fixed_bandwidths = l.bandwidth(&c).map(|b| vec![b; t.p() + 1]);
            let m = mgwr::fit_mgwr(&t, &s).map_err(|e| e.at_stage("mgwr"))?;
            let summary = mgwr::summarize_mgwr(&m);
            print!("{}", report::mgwr_text(&summary));
            let cols = report::mgwr_columns(&m);
            l.stage.write("mgwr_summary.csv", &report::mgwr_summary_csv(&summary)?)?;
            l.stage.write("mgwr_convergence.csv", &report::convergence_csv(&m)?)?;
            l.stage.write("mgwr_local.csv", &report::columns_csv(&m.ids, &cols, &[])?)?;
            l.stage.write("mgwr_coefficients.geojson", &report::geojson_layer(&t, &cols, &[])?)?;
        }
        Command::Hotspots(a) => {
            let c = a.config()?;
            let (raw, _) = a.tables(&c)?;
            let w = pipeline::build_weights(&raw, &c.weights)?.binary_with_self();
            let values: Vec<f64> = raw.y().iter().copied().collect();
            let h = esda::getis_ord_gstar(&values, &w).map_err(|e| e.at_stage("hotspots"))?;
            let (cols, text) = report::hotspot_columns(&values, &h);
            let ids: Vec<String> = raw.ids().into_iter().map(String::from).collect();
            let csv = report::columns_csv(&ids, &cols, &text)?;
            print!("{}", String::from_utf8_lossy(&csv));
            a.write("hotspots.csv", &csv)?;
            a.write("hotspots.geojson", &report::geojson_layer(&raw, &cols, &text)?)?;
        }
        Command::Synth {
            action: SynthAction::Generate { scenario, bundled, out, seed },
        } => {
            let mut s = match (scenario, bundled) {
                (Some(p), _) => SyntheticScenario::from_file(&p)?,
                (None, Some(Bundled::RegionalIid)) => SyntheticScenario::regional_iid(),
                (None, _) => SyntheticScenario::regional(),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let data = synth::generate(&s)?;
            for p in data.write_to(&out)? {
                println!("{}", display(&p));
            }
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
