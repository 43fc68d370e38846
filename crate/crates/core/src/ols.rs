//! Global ordinary least squares with the usual diagnostic block:
//! t/p values, VIF, R², adjusted R², AIC and BIC.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::linalg::{self, SvdSolver};
use crate::stats;

/// Collinearity screening levels applied to VIF values.
pub const VIF_INFO: f64 = 5.0;
pub const VIF_HIGH: f64 = 7.5;
pub const VIF_SEVERE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalFit {
    /// Design column names, intercept first.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// One entry per covariate (the intercept has none).
    pub vif: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rss: f64,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n: usize,
    pub df_model: usize,
    pub df_residuals: usize,
}

/// Gaussian log-likelihood at the ML variance `rss / n`.
pub fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * PI).ln() + (rss / n).ln() + 1.0)
}

/// Fit `y = b0 + X b + e` by least squares (SVD), with VIF per covariate.
///
/// AIC and BIC count `p + 1` mean parameters: `AIC = -2 llf + 2 (p + 1)`,
/// `BIC = -2 llf + (p + 1) ln n`, with the full Gaussian constant in `llf`.
pub fn fit_ols(table: &ObservationTable) -> Result<GlobalFit> {
    let n = table.n();
    let p = table.p();
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!(
            "OLS needs n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let design = table.design();
    let names = table.design_names();
    let (beta, solver) = linalg::least_squares(&design, table.y(), &names)?;
    let fitted = &design * &beta;
    let resid = table.y() - &fitted;
    let rss = resid.norm_squared();
    let df_res = n - p - 1;
    let sigma2 = rss / df_res as f64;
    let cov = solver.gram_pinv() * sigma2;
    let se: Vec<f64> = (0..=p).map(|j| cov[(j, j)].sqrt()).collect();
    let t: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv: Vec<f64> = t.iter().map(|&t| stats::t_two_sided_p(t, df_res as f64)).collect();

    let ybar = table.y().mean();
    let tss = table.y().iter().map(|v| (v - ybar).powi(2)).sum::<f64>();
    let r2 = 1.0 - rss / tss;
    let adj = 1.0 - (1.0 - r2) * (n - 1) as f64 / df_res as f64;
    let llf = gaussian_log_likelihood(rss, n);
    let k = (p + 1) as f64;

    Ok(GlobalFit {
        names,
        coefficients: beta.iter().copied().collect(),
        std_errors: se,
        t_values: t,
        p_values: pv,
        vif: compute_vif(table)?,
        residuals: resid.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
        rss,
        r_squared: r2,
        adj_r_squared: adj,
        log_likelihood: llf,
        aic: -2.0 * llf + 2.0 * k,
        bic: -2.0 * llf + k * (n as f64).ln(),
        n,
        df_model: p,
        df_residuals: df_res,
    })
}

/// Variance inflation factors `1 / (1 - R_j²)`, regressing each covariate
/// on the others plus an intercept. Perfectly collinear columns get
/// `f64::INFINITY`.
pub fn compute_vif(table: &ObservationTable) -> Result<Vec<f64>> {
    vif_matrix(table.x())
}

pub fn vif_matrix(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if p == 0 {
        return Ok(vec![]);
    }
    if n <= p {
        return Err(Error::InvalidInput(format!("VIF needs n > p (n = {n}, p = {p})")));
    }
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let target: DVector<f64> = x.column(j).into_owned();
        let mut aux = DMatrix::from_element(n, p, 1.0);
        let mut c = 1;
        for k in 0..p {
            if k != j {
                aux.set_column(c, &x.column(k));
                c += 1;
            }
        }
        let mean = target.mean();
        let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
        if tss == 0.0 {
            out.push(f64::INFINITY);
            continue;
        }
        let solver = SvdSolver::new(aux.clone());
        let fit = &aux * solver.solve(&target);
        let rss = (&target - fit).norm_squared();
        let r2 = 1.0 - rss / tss;
        let vif = 1.0 / (1.0 - r2);
        // rss at rounding level means the column is in the span of the others
        if rss <= 1e-20 * tss || !vif.is_finite() || vif > 1e14 {
            out.push(f64::INFINITY);
        } else {
            out.push(vif.max(1.0));
        }
    }
    Ok(out)
}

/// Screening level a VIF value reaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum VifFlag {
    None,
    /// Above 5.
    Moderate,
    /// Above 7.5.
    High,
    /// Above 10.
    Severe,
}

pub fn vif_flag(v: f64) -> VifFlag {
    if v > VIF_SEVERE {
        VifFlag::Severe
    } else if v > VIF_HIGH {
        VifFlag::High
    } else if v > VIF_INFO {
        VifFlag::Moderate
    } else {
        VifFlag::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AreaUnit;

    fn table(x: DMatrix<f64>, y: Vec<f64>) -> ObservationTable {
        let n = y.len();
        let units = (0..n).map(|i| AreaUnit::at(format!("{i:03}"), [i as f64, 0.0])).collect();
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        ObservationTable::new(units, "y", DVector::from_vec(y), names, x).unwrap()
    }

    #[test]
    fn exact_line() {
        let x = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let f = fit_ols(&table(x, vec![2.0, 4.0, 6.0, 8.0, 10.0])).unwrap();
        assert!(f.coefficients[0].abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!((f.df_model, f.df_residuals), (1, 3));
    }

    #[test]
    fn orthogonal_noise_gives_zero_fit() {
        // x is orthogonal to y after centering
        let x = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let f = fit_ols(&table(x, vec![1.0, 1.0, -1.0, -1.0])).unwrap();
        assert!(f.coefficients[1].abs() < 1e-12);
        assert!(f.r_squared.abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_names_columns() {
        let x = DMatrix::from_row_slice(5, 3, &[
            1.0, 2.0, 2.0, 2.0, 1.0, 1.0, 3.0, 5.0, 5.0, 4.0, 0.0, 0.0, 5.0, 7.0, 7.0,
        ]);
        match fit_ols(&table(x, vec![1.0, 2.0, 3.0, 4.0, 6.0])) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, vec!["x1", "x2"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn orthogonal_vif_is_one_and_duplicate_infinite() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0]);
        let v = vif_matrix(&x).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        let d = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, 0.0, 0.0, 5.0, 5.0]);
        assert!(vif_matrix(&d).unwrap().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn flags() {
        assert_eq!(vif_flag(5.47), VifFlag::Moderate);
        assert_eq!(vif_flag(7.6), VifFlag::High);
        assert_eq!(vif_flag(11.0), VifFlag::Severe);
        assert_eq!(vif_flag(1.0), VifFlag::None);
    }

    #[test]
    fn intercept_only() {
        let f = fit_ols(&table(DMatrix::zeros(4, 0), vec![1.0, 2.0, 3.0, 6.0])).unwrap();
        assert_eq!(f.coefficients.len(), 1);
        assert!((f.coefficients[0] - 3.0).abs() < 1e-12);
        assert!(f.vif.is_empty());
    }
}
