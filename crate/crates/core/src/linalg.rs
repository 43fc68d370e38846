//! Dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a direction is treated as
/// numerically null.
pub const RANK_TOL: f64 = 1e-10;

/// Thin-SVD least-squares factorization `A = U Σ Vᵀ` with a rank cut.
#[derive(Debug, Clone)]
pub struct SvdSolver {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    sigma: DVector<f64>,
    rank: usize,
}

impl SvdSolver {
    pub fn new(a: DMatrix<f64>) -> Self {
        let svd = a.svd(true, true);
        let u = svd.u.expect("u requested");
        let v = svd.v_t.expect("v requested").transpose();
        let sigma = svd.singular_values;
        let max = sigma.iter().cloned().fold(0.0, f64::max);
        let rank = sigma.iter().filter(|s| **s > RANK_TOL * max && **s > 0.0).count();
        SvdSolver { u, v, sigma, rank }
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.cols()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.sigma
    }

    fn inv_sigma(&self) -> DVector<f64> {
        let max = self.sigma.iter().cloned().fold(0.0, f64::max);
        self.sigma
            .map(|s| if s > RANK_TOL * max && s > 0.0 { 1.0 / s } else { 0.0 })
    }

    /// Minimum-norm solution of `A x ≈ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let utb = self.u.tr_mul(b);
        let scaled = utb.component_mul(&self.inv_sigma());
        &self.v * scaled
    }

    /// `(AᵀA)⁺ = V Σ⁻² Vᵀ`.
    pub fn gram_pinv(&self) -> DMatrix<f64> {
        let inv2 = self.inv_sigma().map(|s| s * s);
        let vs = DMatrix::from_fn(self.v.nrows(), self.v.ncols(), |i, j| self.v[(i, j)] * inv2[j]);
        vs * self.v.transpose()
    }

    /// Null-space direction for the smallest singular value.
    pub fn null_vector(&self) -> DVector<f64> {
        let (k, _) = self
            .sigma
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        self.v.column(k).into_owned()
    }
}

/// Ratio of the largest to smallest singular value; infinite when singular.
pub fn condition_number(a: DMatrix<f64>) -> f64 {
    let s = a.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > RANK_TOL * max) || min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Find a small set of linearly dependent columns of `a`, by column index.
///
/// Columns are scanned left to right; the first one lying in the span of
/// the earlier independent columns is reported together with the earlier
/// columns that carry nonzero weight in its representation.
pub fn dependent_columns(a: &DMatrix<f64>) -> Option<Vec<usize>> {
    let scale: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
    let mut independent: Vec<usize> = Vec::new();
    for j in 0..a.ncols() {
        if scale[j] == 0.0 {
            return Some(vec![j]);
        }
        let mut cols = independent.clone();
        cols.push(j);
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])] / scale[cols[k]]);
        let solver = SvdSolver::new(sub);
        if solver.full_rank() {
            independent.push(j);
            continue;
        }
        let null = solver.null_vector();
        let max = null.amax();
        let set: Vec<usize> = cols
            .iter()
            .zip(null.iter())
            .filter(|(_, c)| c.abs() > 1e-6 * max)
            .map(|(&c, _)| c)
            .collect();
        return Some(set);
    }
    None
}

/// Ordinary least squares via SVD, rejecting rank-deficient designs.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, names: &[String]) -> Result<(DVector<f64>, SvdSolver)> {
    let solver = SvdSolver::new(a.clone());
    if !solver.full_rank() {
        let cols = dependent_columns(a).unwrap_or_default();
        return Err(Error::RankDeficient(
            cols.into_iter().map(|c| names.get(c).cloned().unwrap_or_else(|| c.to_string())).collect(),
        ));
    }
    let beta = solver.solve(b);
    Ok((beta, solver))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_column_detected() {
        let a = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0, 3.0, 1.0, 5.0, 5.0]);
        assert_eq!(dependent_columns(&a), Some(vec![1, 2]));
        assert!(condition_number(a).is_infinite());
    }

    #[test]
    fn solve_matches_exact() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, 3.0, 5.0]);
        let x = SvdSolver::new(a).solve(&b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
