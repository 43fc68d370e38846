//! Geographically weighted regression with a single shared bandwidth.
//!
//! Each location gets its own weighted least-squares fit
//! `β(i) = (XᵀW_iX)⁻¹XᵀW_i y`, with kernel weights `W_i` decaying with
//! distance from location `i`. The bandwidth is calibrated by minimizing
//! AICc over the hat-matrix trace.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::linalg::{self, SvdSolver};
use crate::ols::gaussian_log_likelihood;
use crate::search::{self, SearchMethod, SearchOutcome};
use crate::stats;
use crate::weights::{Bandwidth, BandwidthMode, DistanceMatrix, KernelFamily, KernelSpec};

/// Local condition numbers above this indicate local collinearity.
pub const CN_THRESHOLD: f64 = 30.0;

/// What to do when a local design is rank deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SingularPolicy {
    /// Fail with [`Error::LocalRankDeficient`].
    Error,
    /// Use the SVD pseudo-inverse and record a warning.
    #[default]
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwrSettings {
    pub family: KernelFamily,
    pub mode: BandwidthMode,
    /// Search interval; defaults to `[p + 2, n]` (adaptive) or the
    /// min/max pairwise distance (fixed).
    pub bounds: Option<(f64, f64)>,
    pub method: SearchMethod,
    pub singular: SingularPolicy,
    /// Absolute tolerance for fixed-bandwidth searches.
    pub fixed_tol: f64,
}

impl Default for GwrSettings {
    fn default() -> Self {
        GwrSettings {
            family: KernelFamily::Bisquare,
            mode: BandwidthMode::Adaptive,
            bounds: None,
            method: SearchMethod::GoldenSection,
            singular: SingularPolicy::PseudoInverse,
            fixed_tol: 1e-3,
        }
    }
}

/// Corrected AIC: `2n ln σ̂ + n ln 2π + n (n + tr S) / (n - 2 - tr S)` with
/// `σ̂² = RSS / n`. Infinite when `tr S >= n - 2`.
pub fn aicc(rss: f64, n: usize, tr_s: f64) -> f64 {
    let nf = n as f64;
    let denom = nf - 2.0 - tr_s;
    if !(denom > 0.0) || !(rss > 0.0) {
        return f64::INFINITY;
    }
    nf * (rss / nf).ln() + nf * (2.0 * PI).ln() + nf * (nf + tr_s) / denom
}

/// One local fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub beta: DVector<f64>,
    /// Row `i` of the hat matrix: `x_iᵀ (XᵀW_iX)⁻¹ XᵀW_i`.
    pub hat_row: DVector<f64>,
    /// `(XᵀW_iX)⁻¹ XᵀW_i² X (XᵀW_iX)⁻¹`; times σ̂² gives the coefficient covariance.
    pub cov_unscaled: DMatrix<f64>,
    /// Diagonal hat entry `s_ii`.
    pub influence: f64,
    pub pseudo_inverse: bool,
}

/// Bandwidth calibration result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSelection {
    pub bandwidth: Bandwidth,
    pub aicc: f64,
    pub search: SearchOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwrModel {
    pub kernel: KernelSpec,
    /// Design column names, intercept first.
    pub names: Vec<String>,
    pub ids: Vec<String>,
    /// n × (p + 1).
    #[serde(skip)]
    pub local_coefficients: DMatrix<f64>,
    #[serde(skip)]
    pub local_se: DMatrix<f64>,
    #[serde(skip)]
    pub local_t: DMatrix<f64>,
    pub influence: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// `tr(S)`, also the effective number of parameters.
    pub hat_trace: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub aic: f64,
    pub bic: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub local_cn: Vec<f64>,
    pub selection: Option<BandwidthSelection>,
    pub warnings: Vec<String>,
}

impl GwrModel {
    pub fn n(&self) -> usize {
        self.fitted.len()
    }

    pub fn effective_params(&self) -> f64 {
        self.hat_trace
    }

    /// Locations whose condition number exceeds `threshold`.
    pub fn collinear_locations(&self, threshold: f64) -> Vec<usize> {
        flag_condition_numbers(&self.local_cn, threshold)
    }
}

pub fn flag_condition_numbers(cn: &[f64], threshold: f64) -> Vec<usize> {
    cn.iter()
        .enumerate()
        .filter(|(_, c)| **c > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// A regression problem bound to locations: design (with intercept column),
/// response, and the pairwise distances.
#[derive(Debug, Clone)]
pub struct GwrProblem {
    design: DMatrix<f64>,
    y: DVector<f64>,
    distances: DistanceMatrix,
    names: Vec<String>,
    ids: Vec<String>,
}

pub(crate) struct LocalCore {
    pub beta: DVector<f64>,
    pub influence: f64,
    /// (p + 1) × n map from y to β(i), present on full fits.
    pub c: Option<DMatrix<f64>>,
    pub pseudo: bool,
}

impl GwrProblem {
    pub fn new(table: &ObservationTable) -> Self {
        GwrProblem {
            design: table.design(),
            y: table.y().clone(),
            distances: DistanceMatrix::from_table(table),
            names: table.design_names(),
            ids: table.ids().into_iter().map(String::from).collect(),
        }
    }

    pub fn from_parts(
        design: DMatrix<f64>,
        y: DVector<f64>,
        distances: DistanceMatrix,
        names: Vec<String>,
        ids: Vec<String>,
    ) -> Self {
        GwrProblem {
            design,
            y,
            distances,
            names,
            ids,
        }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Columns including the intercept.
    pub fn k(&self) -> usize {
        self.design.ncols()
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn weights_at(&self, i: usize, spec: &KernelSpec) -> Vec<f64> {
        let b = spec.scale_at(i, &self.distances);
        self.distances.row(i).iter().map(|&d| spec.weight(d, b)).collect()
    }

    pub(crate) fn solve_at(
        &self,
        i: usize,
        w: &[f64],
        full: bool,
        policy: SingularPolicy,
    ) -> Result<LocalCore> {
        let k = self.k();
        let active: Vec<usize> = (0..self.n()).filter(|&j| w[j] > 0.0).collect();
        let m = active.len();
        let a = DMatrix::from_fn(m, k, |r, c| w[active[r]].sqrt() * self.design[(active[r], c)]);
        let solver = SvdSolver::new(a);
        let pseudo = !solver.full_rank() || m < k;
        if pseudo && policy == SingularPolicy::Error {
            return Err(Error::LocalRankDeficient {
                location: i,
                id: self.ids.get(i).cloned().unwrap_or_default(),
            });
        }
        let ginv = solver.gram_pinv();
        let mut xty = DVector::zeros(k);
        for &j in &active {
            let s = w[j] * self.y[j];
            for c in 0..k {
                xty[c] += self.design[(j, c)] * s;
            }
        }
        let beta = &ginv * xty;
        let xi = self.design.row(i).transpose();
        let gx = &ginv * &xi;
        let influence = w[i] * xi.dot(&gx);
        let c = full.then(|| {
            let mut c = DMatrix::zeros(k, self.n());
            for &j in &active {
                let xj = self.design.row(j).transpose();
                let col = &ginv * xj * w[j];
                c.set_column(j, &col);
            }
            c
        });
        Ok(LocalCore {
            beta,
            influence,
            c,
            pseudo,
        })
    }

    /// Local fit at one location.
    pub fn fit_at(&self, i: usize, spec: &KernelSpec) -> Result<LocalFit> {
        spec.validate(self.n())?;
        if i >= self.n() {
            return Err(Error::InvalidInput(format!("location {i} out of range")));
        }
        let w = self.weights_at(i, spec);
        let core = self.solve_at(i, &w, true, SingularPolicy::Error)?;
        let c = core.c.expect("full fit");
        let hat_row = c.tr_mul(&self.design.row(i).transpose());
        Ok(LocalFit {
            cov_unscaled: &c * c.transpose(),
            hat_row,
            beta: core.beta,
            influence: core.influence,
            pseudo_inverse: core.pseudo,
        })
    }

    /// RSS and `tr(S)` for a bandwidth, without building full surfaces.
    pub fn rss_and_trace(&self, spec: &KernelSpec, policy: SingularPolicy) -> Result<(f64, f64)> {
        spec.validate(self.n())?;
        let parts: Vec<(f64, f64)> = (0..self.n())
            .into_par_iter()
            .map(|i| {
                let w = self.weights_at(i, spec);
                let core = self.solve_at(i, &w, false, policy)?;
                let fit = self.design.row(i).transpose().dot(&core.beta);
                Ok(((self.y[i] - fit).powi(2), core.influence))
            })
            .collect::<Result<_>>()?;
        let rss = parts.iter().map(|p| p.0).sum();
        let tr = parts.iter().map(|p| p.1).sum();
        Ok((rss, tr))
    }

    /// AICc at a bandwidth; rank-deficient local designs score `+∞`.
    pub fn aicc_at(&self, spec: &KernelSpec) -> f64 {
        match self.rss_and_trace(spec, SingularPolicy::Error) {
            Ok((rss, tr)) => aicc(rss, self.n(), tr),
            Err(_) => f64::INFINITY,
        }
    }

    fn default_bounds(&self, mode: BandwidthMode) -> (f64, f64) {
        match mode {
            BandwidthMode::Adaptive => ((self.k() + 1) as f64, self.n() as f64),
            BandwidthMode::Fixed => self.distances.range(),
        }
    }

    /// Calibrate the bandwidth by AICc.
    pub fn select_bandwidth(&self, settings: &GwrSettings) -> Result<BandwidthSelection> {
        let (lo, hi) = settings.bounds.unwrap_or_else(|| self.default_bounds(settings.mode));
        let spec_for = |v: f64| KernelSpec {
            family: settings.family,
            bandwidth: Bandwidth::from_value(settings.mode, v),
        };
        let outcome = match settings.mode {
            BandwidthMode::Adaptive => {
                let lo = (lo.round() as i64).max(1);
                let hi = (hi.round() as i64).min(self.n() as i64);
                if lo > hi {
                    return Err(Error::InvalidKernel(format!("empty bandwidth range [{lo}, {hi}]")));
                }
                let f = |k: i64| self.aicc_at(&spec_for(k as f64));
                match settings.method {
                    SearchMethod::GoldenSection => search::golden_section_int(lo, hi, f),
                    SearchMethod::Exhaustive => search::exhaustive_int(lo, hi, f),
                }
            }
            BandwidthMode::Fixed => {
                if !(lo > 0.0 && hi >= lo) {
                    return Err(Error::InvalidKernel(format!("bad fixed range [{lo}, {hi}]")));
                }
                search::golden_section_real(lo, hi, settings.fixed_tol, |h| self.aicc_at(&spec_for(h)))
            }
        };
        if !outcome.score.is_finite() {
            return Err(Error::InvalidKernel(
                "no bandwidth in the search range gives a full-rank local fit everywhere".into(),
            ));
        }
        Ok(BandwidthSelection {
            bandwidth: Bandwidth::from_value(settings.mode, outcome.argmin),
            aicc: outcome.score,
            search: outcome,
        })
    }

    pub(crate) fn fit_surfaces(
        &self,
        spec: &KernelSpec,
        policy: SingularPolicy,
    ) -> Result<(GwrModel, Vec<DMatrix<f64>>)> {
        spec.validate(self.n())?;
        let n = self.n();
        let k = self.k();
        let locals: Vec<(LocalCore, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let w = self.weights_at(i, spec);
                let core = self.solve_at(i, &w, true, policy)?;
                let cn = self.local_cn(&w);
                Ok((core, cn))
            })
            .collect::<Result<_>>()?;

        let mut beta = DMatrix::zeros(n, k);
        let mut fitted = Vec::with_capacity(n);
        let mut influence = Vec::with_capacity(n);
        let mut warnings = Vec::new();
        for (i, (core, _)) in locals.iter().enumerate() {
            beta.set_row(i, &core.beta.transpose());
            fitted.push(self.design.row(i).transpose().dot(&core.beta));
            influence.push(core.influence);
            if core.pseudo {
                let msg = format!("location {} (`{}`): rank-deficient local design, used pseudo-inverse", i, self.ids[i]);
                warn!("{msg}");
                warnings.push(msg);
            }
        }
        let residuals: Vec<f64> = (0..n).map(|i| self.y[i] - fitted[i]).collect();
        let rss: f64 = residuals.iter().map(|r| r * r).sum();
        let tr: f64 = influence.iter().sum();
        let sigma2 = rss / (n as f64 - tr);
        let mut se = DMatrix::zeros(n, k);
        for (i, (core, _)) in locals.iter().enumerate() {
            let c = core.c.as_ref().expect("full fit");
            for j in 0..k {
                se[(i, j)] = (sigma2 * c.row(j).norm_squared()).sqrt();
            }
        }
        let t = beta.component_div(&se);
        let ybar = self.y.mean();
        let tss: f64 = self.y.iter().map(|v| (v - ybar).powi(2)).sum();
        let r2 = 1.0 - rss / tss;
        let llf = gaussian_log_likelihood(rss, n);
        let nf = n as f64;
        let model = GwrModel {
            kernel: *spec,
            names: self.names.clone(),
            ids: self.ids.clone(),
            local_coefficients: beta,
            local_se: se,
            local_t: t,
            influence,
            fitted,
            residuals,
            rss,
            hat_trace: tr,
            sigma2,
            aicc: aicc(rss, n, tr),
            aic: -2.0 * llf + 2.0 * (tr + 1.0),
            bic: -2.0 * llf + (tr + 1.0) * nf.ln(),
            r_squared: r2,
            adj_r_squared: 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - tr),
            local_cn: locals.iter().map(|l| l.1).collect(),
            selection: None,
            warnings,
        };
        let cs = locals.into_iter().map(|(core, _)| core.c.unwrap()).collect();
        Ok((model, cs))
    }

    /// Fit every location at a given bandwidth.
    pub fn fit(&self, spec: &KernelSpec, policy: SingularPolicy) -> Result<GwrModel> {
        self.fit_surfaces(spec, policy).map(|(m, _)| m)
    }

    /// Select the bandwidth, then fit.
    pub fn calibrate(&self, settings: &GwrSettings) -> Result<GwrModel> {
        let sel = self.select_bandwidth(settings)?;
        let spec = KernelSpec {
            family: settings.family,
            bandwidth: sel.bandwidth,
        };
        let mut model = self.fit(&spec, settings.singular)?;
        if sel.search.fell_back {
            let msg = "AICc curve not unimodal over the search range; bandwidth chosen by exhaustive scan".to_string();
            warn!("{msg}");
            model.warnings.push(msg);
        }
        model.selection = Some(sel);
        Ok(model)
    }

    /// Condition number of `W^{1/2} X` after scaling columns to unit norm.
    fn local_cn(&self, w: &[f64]) -> f64 {
        let a = DMatrix::from_fn(self.n(), self.k(), |r, c| w[r].sqrt() * self.design[(r, c)]);
        scaled_condition_number(a)
    }

    pub fn condition_numbers(&self, spec: &KernelSpec) -> Result<Vec<f64>> {
        spec.validate(self.n())?;
        Ok((0..self.n())
            .into_par_iter()
            .map(|i| self.local_cn(&self.weights_at(i, spec)))
            .collect())
    }
}

fn scaled_condition_number(mut a: DMatrix<f64>) -> f64 {
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        col /= norm;
    }
    linalg::condition_number(a)
}

/// Local fit at `location` (see [`GwrProblem::fit_at`]).
pub fn fit_gwr_at(location: usize, table: &ObservationTable, spec: &KernelSpec) -> Result<LocalFit> {
    GwrProblem::new(table).fit_at(location, spec)
}

/// Fit GWR at a fixed bandwidth.
pub fn fit_gwr(table: &ObservationTable, spec: &KernelSpec) -> Result<GwrModel> {
    GwrProblem::new(table).fit(spec, SingularPolicy::default())
}

/// Calibrate and fit GWR.
pub fn calibrate_gwr(table: &ObservationTable, settings: &GwrSettings) -> Result<GwrModel> {
    GwrProblem::new(table).calibrate(settings)
}

pub fn select_bandwidth(table: &ObservationTable, settings: &GwrSettings) -> Result<BandwidthSelection> {
    GwrProblem::new(table).select_bandwidth(settings)
}

/// Local condition numbers at each location; infinite where singular.
pub fn local_condition_numbers(table: &ObservationTable, spec: &KernelSpec) -> Result<Vec<f64>> {
    GwrProblem::new(table).condition_numbers(spec)
}

/// Adjusted two-sided critical t for a family of `enp` effective tests.
pub fn adjusted_critical_t(alpha: f64, enp: f64, df: f64) -> f64 {
    stats::t_critical(alpha / enp.max(1.0), df)
}

impl KernelSpec {
    /// A kernel giving every location weight one, which collapses GWR onto
    /// global OLS.
    pub fn global() -> Self {
        KernelSpec {
            family: KernelFamily::Bisquare,
            bandwidth: Bandwidth::Fixed(f64::MAX),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AreaUnit;

    fn toy(n: usize) -> ObservationTable {
        let units: Vec<AreaUnit> = (0..n)
            .map(|i| AreaUnit::at(format!("{i:03}"), [(i % 7) as f64, (i / 7) as f64]))
            .collect();
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * (j + 3) * 7919) % 101) as f64 / 50.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| 1.0 + x[(i, 0)] - 0.5 * x[(i, 1)] + 0.1 * ((i * 31) % 7) as f64);
        ObservationTable::new(units, "y", y, vec!["a".into(), "b".into()], x).unwrap()
    }

    #[test]
    fn aicc_guards() {
        assert!(aicc(1.0, 10, 8.0).is_infinite());
        assert!(aicc(1.0, 10, 3.0).is_finite());
    }

    #[test]
    fn global_kernel_gives_unit_weights() {
        let t = toy(20);
        let p = GwrProblem::new(&t);
        assert!(p.weights_at(3, &KernelSpec::global()).iter().all(|&w| w == 1.0));
    }

    #[test]
    fn intercept_only_is_weighted_mean() {
        let t = toy(20).select(&[]).unwrap();
        let spec = KernelSpec::adaptive_bisquare(8);
        let p = GwrProblem::new(&t);
        let w = p.weights_at(5, &spec);
        let f = p.fit_at(5, &spec).unwrap();
        let wm = w.iter().zip(t.y().iter()).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((f.beta[0] - wm).abs() < 1e-12);
    }

    #[test]
    fn tiny_bandwidth_rank_deficient() {
        let t = toy(30);
        let spec = KernelSpec::adaptive_bisquare(2);
        match fit_gwr_at(4, &t, &spec) {
            Err(Error::LocalRankDeficient { location: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        let m = GwrProblem::new(&t).fit(&spec, SingularPolicy::PseudoInverse).unwrap();
        assert!(!m.warnings.is_empty());
    }

    #[test]
    fn hat_row_reproduces_fit() {
        let t = toy(35);
        let spec = KernelSpec::adaptive_bisquare(15);
        let m = fit_gwr(&t, &spec).unwrap();
        for i in [0, 10, 34] {
            let f = fit_gwr_at(i, &t, &spec).unwrap();
            assert!((f.hat_row.dot(t.y()) - m.fitted[i]).abs() < 1e-10);
            assert!((f.hat_row[i] - m.influence[i]).abs() < 1e-12);
        }
        let recomputed = aicc(m.residuals.iter().map(|r| r * r).sum(), t.n(), m.hat_trace);
        assert!((recomputed - m.aicc).abs() < 1e-9);
        assert!(m.hat_trace > 3.0 && m.hat_trace < 35.0);
        assert!(m.local_cn.iter().all(|&c| c >= 1.0));
    }

    #[test]
    fn fixed_mode_selects_within_range() {
        let t = toy(35);
        let s = GwrSettings {
            family: KernelFamily::Gaussian,
            mode: BandwidthMode::Fixed,
            ..Default::default()
        };
        let sel = select_bandwidth(&t, &s).unwrap();
        let (lo, hi) = DistanceMatrix::from_table(&t).range();
        assert!(sel.bandwidth.value() >= lo && sel.bandwidth.value() <= hi);
    }
}
