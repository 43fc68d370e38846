//! Multiscale GWR: every covariate surface gets its own bandwidth,
//! calibrated by backfitting univariate GWR smoothers on partial residuals.
//!
//! The per-term smoother matrices `R_j` (with `ŷ = Σ_j R_j y`) are carried
//! through the backfitting sweeps, so `ENP_j = tr(R_j)` and the local
//! standard errors are exact rather than approximated.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::gwr::{self, adjusted_critical_t, aicc, GwrProblem, GwrSettings, SingularPolicy};
use crate::linalg;
use crate::ols::gaussian_log_likelihood;
use crate::search::{self, SearchMethod};
use crate::stats;
use crate::weights::{Bandwidth, BandwidthMode, DistanceMatrix, KernelFamily, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MgwrInit {
    /// Start from a calibrated single-bandwidth GWR.
    #[default]
    Gwr,
    /// Start from the global OLS coefficients.
    Ols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgwrSettings {
    pub family: KernelFamily,
    pub mode: BandwidthMode,
    pub bounds: Option<(f64, f64)>,
    pub init: MgwrInit,
    /// Bandwidth for the GWR initialization; calibrated by AICc when `None`.
    pub init_bandwidth: Option<Bandwidth>,
    /// Hold every term at these bandwidths instead of searching.
    pub fixed_bandwidths: Option<Vec<Bandwidth>>,
    pub max_iter: usize,
    /// Convergence threshold on the score of change of fitted values.
    pub tol: f64,
    pub alpha: f64,
    pub method: SearchMethod,
}

impl Default for MgwrSettings {
    fn default() -> Self {
        MgwrSettings {
            family: KernelFamily::Bisquare,
            mode: BandwidthMode::Adaptive,
            bounds: None,
            init: MgwrInit::Gwr,
            init_bandwidth: None,
            fixed_bandwidths: None,
            max_iter: 200,
            tol: 1e-5,
            alpha: 0.05,
            method: SearchMethod::GoldenSection,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgwrModel {
    pub family: KernelFamily,
    /// Per design column, intercept first.
    pub bandwidths: Vec<Bandwidth>,
    pub names: Vec<String>,
    pub ids: Vec<String>,
    #[serde(skip)]
    pub local_coefficients: DMatrix<f64>,
    #[serde(skip)]
    pub local_se: DMatrix<f64>,
    #[serde(skip)]
    pub local_t: DMatrix<f64>,
    /// `X_j ∘ β_j`, one column per term; rows sum to the fitted values.
    #[serde(skip)]
    pub term_contributions: DMatrix<f64>,
    /// Effective number of parameters per term, `tr(R_j)`.
    pub enp: Vec<f64>,
    pub hat_trace: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub aic: f64,
    pub bic: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub alpha: f64,
    /// `alpha / ENP_j`.
    pub adjusted_alpha: Vec<f64>,
    pub critical_t: Vec<f64>,
    pub local_cn: Vec<f64>,
    pub init_bandwidth: Option<Bandwidth>,
    pub soc_trace: Vec<f64>,
    pub rss_trace: Vec<f64>,
    pub bandwidth_trace: Vec<Vec<Bandwidth>>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl MgwrModel {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    /// `|t_ij| > t_crit(j)`.
    pub fn is_significant(&self, i: usize, j: usize) -> bool {
        self.local_t[(i, j)].abs() > self.critical_t[j]
    }
}

/// One univariate term: `y ≈ β(i) x` locally.
struct Term<'a> {
    x: DVector<f64>,
    distances: &'a DistanceMatrix,
    family: KernelFamily,
}

impl Term<'_> {
    fn n(&self) -> usize {
        self.x.len()
    }

    fn spec(&self, bw: Bandwidth) -> KernelSpec {
        KernelSpec {
            family: self.family,
            bandwidth: bw,
        }
    }

    fn weights(&self, i: usize, spec: &KernelSpec) -> Vec<f64> {
        let b = spec.scale_at(i, self.distances);
        self.distances.row(i).iter().map(|&d| spec.weight(d, b)).collect()
    }

    /// Per location: (β, s_ii). `None` if the local design is degenerate.
    fn local(&self, i: usize, spec: &KernelSpec, r: &DVector<f64>) -> Option<(f64, f64)> {
        let w = self.weights(i, spec);
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for m in 0..self.n() {
            let wx = w[m] * self.x[m];
            sxx += wx * self.x[m];
            sxy += wx * r[m];
        }
        let scale = self.x.amax().powi(2) * w.iter().sum::<f64>();
        if !(sxx > 1e-12 * scale) {
            return None;
        }
        Some((sxy / sxx, self.x[i] * self.x[i] * w[i] / sxx))
    }

    fn aicc(&self, spec: &KernelSpec, r: &DVector<f64>) -> f64 {
        let parts: Option<Vec<(f64, f64)>> = (0..self.n())
            .into_par_iter()
            .map(|i| {
                self.local(i, spec, r)
                    .map(|(b, s)| ((r[i] - b * self.x[i]).powi(2), s))
            })
            .collect();
        match parts {
            Some(p) => aicc(p.iter().map(|v| v.0).sum(), self.n(), p.iter().map(|v| v.1).sum()),
            None => f64::INFINITY,
        }
    }

    /// β surface plus the operator rows `A[i, m] = w_im x_m / Σ w x²`.
    fn smooth(&self, spec: &KernelSpec, r: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let rows: Option<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w = self.weights(i, spec);
                let sxx: f64 = (0..n).map(|m| w[m] * self.x[m] * self.x[m]).sum();
                let scale = self.x.amax().powi(2) * w.iter().sum::<f64>();
                if !(sxx > 1e-12 * scale) {
                    return None;
                }
                Some((0..n).map(|m| w[m] * self.x[m] / sxx).collect())
            })
            .collect();
        let rows = rows?;
        let a = DMatrix::from_fn(n, n, |i, m| rows[i][m]);
        let beta = &a * r;
        Some((beta, a))
    }
}

/// Fit MGWR by backfitting. The table must be standardized.
pub fn fit_mgwr(table: &ObservationTable, settings: &MgwrSettings) -> Result<MgwrModel> {
    if !table.is_standardized() {
        return Err(Error::NotStandardized);
    }
    let n = table.n();
    let k = table.p() + 1;
    if n <= table.p() + 2 {
        return Err(Error::InvalidInput(format!("MGWR needs n > p + 2 (n = {n}, p = {})", table.p())));
    }
    if let Some(f) = &settings.fixed_bandwidths {
        if f.len() != k {
            return Err(Error::InvalidInput(format!("{} fixed bandwidths for {k} terms", f.len())));
        }
        for b in f {
            KernelSpec { family: settings.family, bandwidth: *b }.validate(n)?;
        }
    }
    let problem = GwrProblem::new(table);
    let names = table.design_names();
    let x = table.design();
    let y = table.y().clone();
    let mut warnings = Vec::new();

    // initial surfaces and their y → β maps
    let mut beta = DMatrix::zeros(n, k);
    let mut c: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); k];
    let mut init_bandwidth = None;
    match settings.init {
        MgwrInit::Gwr => {
            let bw = match settings.init_bandwidth {
                Some(b) => b,
                None => {
                    let gs = GwrSettings {
                        family: settings.family,
                        mode: settings.mode,
                        bounds: settings.bounds,
                        method: settings.method,
                        singular: SingularPolicy::PseudoInverse,
                        ..Default::default()
                    };
                    problem.select_bandwidth(&gs)?.bandwidth
                }
            };
            init_bandwidth = Some(bw);
            let spec = KernelSpec { family: settings.family, bandwidth: bw };
            let (model, cs) = problem.fit_surfaces(&spec, SingularPolicy::PseudoInverse)?;
            warnings.extend(model.warnings);
            beta = model.local_coefficients;
            for (i, ci) in cs.iter().enumerate() {
                for j in 0..k {
                    c[j].set_row(i, &ci.row(j));
                }
            }
        }
        MgwrInit::Ols => {
            let (b, solver) = linalg::least_squares(&x, &y, &names)?;
            let map = solver.gram_pinv() * x.transpose();
            for i in 0..n {
                beta.set_row(i, &b.transpose());
                for j in 0..k {
                    c[j].set_row(i, &map.row(j));
                }
            }
        }
    }

    let distances = problem.distances();
    let terms: Vec<Term> = (0..k)
        .map(|j| Term {
            x: x.column(j).into_owned(),
            distances,
            family: settings.family,
        })
        .collect();

    let contributions = |beta: &DMatrix<f64>| beta.component_mul(&x);
    let mut f = contributions(&beta);
    let mut fitted: DVector<f64> = f.column_sum();
    let mut resid = &y - &fitted;
    // E = I - Σ_j diag(X_j) C_j maps y to the residual
    let mut e = DMatrix::identity(n, n);
    for j in 0..k {
        e -= row_scaled(&c[j], &terms[j].x);
    }

    let (lo, hi) = settings.bounds.unwrap_or(match settings.mode {
        BandwidthMode::Adaptive => ((k + 1) as f64, n as f64),
        BandwidthMode::Fixed => distances.range(),
    });
    let mut bandwidths: Vec<Bandwidth> = match &settings.fixed_bandwidths {
        Some(b) => b.clone(),
        None => vec![init_bandwidth.unwrap_or(Bandwidth::from_value(settings.mode, hi)); k],
    };

    let mut soc_trace = Vec::new();
    let mut rss_trace = Vec::new();
    let mut bandwidth_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut fallbacks = 0;
    let mut frozen = settings.fixed_bandwidths.is_some();

    for _ in 0..settings.max_iter {
        iterations += 1;
        for j in 0..k {
            let term = &terms[j];
            let partial: DVector<f64> = f.column(j) + &resid;
            if !frozen {
                let f_of = |v: f64| term.aicc(&term.spec(Bandwidth::from_value(settings.mode, v)), &partial);
                let outcome = match settings.mode {
                    BandwidthMode::Adaptive => {
                        let (l, h) = ((lo.round() as i64).max(1), (hi.round() as i64).min(n as i64));
                        match settings.method {
                            SearchMethod::GoldenSection => search::golden_section_int(l, h, |v| f_of(v as f64)),
                            SearchMethod::Exhaustive => search::exhaustive_int(l, h, |v| f_of(v as f64)),
                        }
                    }
                    BandwidthMode::Fixed => search::golden_section_real(lo, hi, 1e-3, f_of),
                };
                fallbacks += outcome.fell_back as usize;
                if !outcome.score.is_finite() {
                    return Err(Error::RankDeficient(vec![names[j].clone()]));
                }
                bandwidths[j] = Bandwidth::from_value(settings.mode, outcome.argmin);
            }
            let spec = term.spec(bandwidths[j]);
            let (bj, a) = term
                .smooth(&spec, &partial)
                .ok_or_else(|| Error::RankDeficient(vec![names[j].clone()]))?;
            let new_f = bj.component_mul(&term.x);
            resid = &partial - &new_f;
            beta.set_column(j, &bj);
            f.set_column(j, &new_f);

            let p = row_scaled(&c[j], &term.x) + &e;
            c[j] = a * &p;
            e = p - row_scaled(&c[j], &term.x);
        }
        let new_fitted: DVector<f64> = f.column_sum();
        let n_f = n as f64;
        let num = ((&new_fitted - &fitted).norm_squared() / n_f).sqrt();
        let den = (new_fitted.norm_squared() / n_f).sqrt();
        let soc = if den > 0.0 { num / den } else { num };
        fitted = new_fitted;
        soc_trace.push(soc);
        rss_trace.push(resid.norm_squared());
        bandwidth_trace.push(bandwidths.clone());
        let t = bandwidth_trace.len();
        if !frozen && t >= 3 && bandwidth_trace[t - 1] == bandwidth_trace[t - 3] && bandwidth_trace[t - 1] != bandwidth_trace[t - 2] {
            frozen = true;
            let msg = format!("bandwidth selection cycled at iteration {t}; bandwidths held fixed from here");
            debug!("{msg}");
            warnings.push(msg);
        }
        if soc < settings.tol {
            converged = true;
            break;
        }
    }
    if fallbacks > 0 {
        warnings.push(format!(
            "{fallbacks} term bandwidth searches found a non-unimodal AICc curve and used an exhaustive scan"
        ));
    }
    if !converged {
        let msg = format!("backfitting did not converge in {} iterations", settings.max_iter);
        warn!("{msg}");
        warnings.push(msg);
    }

    let resid_v: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let rss: f64 = resid_v.iter().map(|r| r * r).sum();
    let enp: Vec<f64> = (0..k)
        .map(|j| (0..n).map(|i| terms[j].x[i] * c[j][(i, i)]).sum())
        .collect();
    // tr(S) from the residual operator, independent of the per-term traces
    let tr = n as f64 - e.trace();
    let nf = n as f64;
    let df = nf - tr;
    let sigma2 = rss / df;
    let mut se = DMatrix::zeros(n, k);
    for j in 0..k {
        for i in 0..n {
            se[(i, j)] = (sigma2 * c[j].row(i).norm_squared()).sqrt();
        }
    }
    let t = beta.component_div(&se);
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r2 = 1.0 - rss / tss;
    let llf = gaussian_log_likelihood(rss, n);
    let adjusted_alpha: Vec<f64> = enp.iter().map(|e| settings.alpha / e.max(1.0)).collect();
    let critical_t: Vec<f64> = enp
        .iter()
        .map(|e| adjusted_critical_t(settings.alpha, *e, df.max(1.0)))
        .collect();

    let local_cn = multiscale_condition_numbers(&x, distances, settings.family, &bandwidths);

    Ok(MgwrModel {
        family: settings.family,
        bandwidths,
        names,
        ids: table.ids().into_iter().map(String::from).collect(),
        local_coefficients: beta,
        local_se: se,
        local_t: t,
        term_contributions: f,
        enp,
        hat_trace: tr,
        fitted: fitted.iter().copied().collect(),
        residuals: resid_v,
        rss,
        sigma2,
        aicc: aicc(rss, n, tr),
        aic: -2.0 * llf + 2.0 * (tr + 1.0),
        bic: -2.0 * llf + (tr + 1.0) * nf.ln(),
        r_squared: r2,
        adj_r_squared: 1.0 - (1.0 - r2) * (nf - 1.0) / df,
        alpha: settings.alpha,
        adjusted_alpha,
        critical_t,
        local_cn,
        init_bandwidth,
        soc_trace,
        rss_trace,
        bandwidth_trace,
        converged,
        iterations,
        warnings,
    })
}

/// `diag(x) · m`.
fn row_scaled(m: &DMatrix<f64>, x: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= x[i];
    }
    out
}

/// Local condition numbers where each design column is weighted by its own
/// term's kernel.
pub fn multiscale_condition_numbers(
    design: &DMatrix<f64>,
    distances: &DistanceMatrix,
    family: KernelFamily,
    bandwidths: &[Bandwidth],
) -> Vec<f64> {
    let (n, k) = design.shape();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let ws: Vec<Vec<f64>> = bandwidths
                .iter()
                .map(|bw| {
                    let spec = KernelSpec { family, bandwidth: *bw };
                    let b = spec.scale_at(i, distances);
                    distances.row(i).iter().map(|&d| spec.weight(d, b)).collect()
                })
                .collect();
            let mut a = DMatrix::from_fn(n, k, |r, c| ws[c][r].sqrt() * design[(r, c)]);
            for mut col in a.column_iter_mut() {
                let norm = col.norm();
                if norm == 0.0 {
                    return f64::INFINITY;
                }
                col /= norm;
            }
            linalg::condition_number(a)
        })
        .collect()
}

/// One row of the multiscale summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub term: String,
    pub bandwidth: f64,
    pub enp: f64,
    pub adjusted_alpha: f64,
    pub critical_t: f64,
    pub mean: f64,
    /// Population standard deviation of the surface.
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Share of locations where the term is significant after adjustment.
    pub share_significant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgwrSummary {
    pub terms: Vec<TermSummary>,
    pub n: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub aicc: f64,
    pub aic: f64,
    pub bic: f64,
    pub hat_trace: f64,
    pub converged: bool,
    pub iterations: usize,
}

pub fn summarize_mgwr(model: &MgwrModel) -> MgwrSummary {
    let n = model.n();
    let terms = (0..model.names.len())
        .map(|j| {
            let col: Vec<f64> = model.local_coefficients.column(j).iter().copied().collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let sig = (0..n).filter(|&i| model.is_significant(i, j)).count();
            TermSummary {
                term: model.names[j].clone(),
                bandwidth: model.bandwidths[j].value(),
                enp: model.enp[j],
                adjusted_alpha: model.adjusted_alpha[j],
                critical_t: model.critical_t[j],
                mean,
                std,
                min: col.iter().cloned().fold(f64::INFINITY, f64::min),
                median: stats::median(&col),
                max: col.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                share_significant: sig as f64 / n as f64,
            }
        })
        .collect();
    MgwrSummary {
        terms,
        n,
        r_squared: model.r_squared,
        adj_r_squared: model.adj_r_squared,
        aicc: model.aicc,
        aic: model.aic,
        bic: model.bic,
        hat_trace: model.hat_trace,
        converged: model.converged,
        iterations: model.iterations,
    }
}

// keep the single-bandwidth flagging helper reachable from here too
pub use gwr::flag_condition_numbers;
