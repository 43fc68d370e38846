//! Brute-force reference implementations used to check the engines.
//!
//! Everything here works on plain `Vec`s with textbook algorithms and
//! shares no code with the nalgebra-based engines.

use crate::error::{Error, Result};

/// Row-major dense matrix.
pub type Rows = Vec<Vec<f64>>;

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Rows, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("solve_dense: shape mismatch".into()));
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= 1e-13 * scale {
            return Err(Error::Singular);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

/// Weighted least squares through the normal equations
/// `(Xᵀ W X) β = Xᵀ W y`, with `W = diag(w)`.
pub fn brute_force_wls(x: &Rows, w: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if x.len() != n || w.len() != n {
        return Err(Error::InvalidInput("brute_force_wls: shape mismatch".into()));
    }
    let k = x.first().map_or(0, |r| r.len());
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..n {
        for r in 0..k {
            b[r] += x[i][r] * w[i] * y[i];
            for c in 0..k {
                a[r][c] += x[i][r] * w[i] * x[i][c];
            }
        }
    }
    solve_dense(a, b)
}

/// Prepend a column of ones.
pub fn with_intercept(x: &Rows) -> Rows {
    x.iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect()
}

/// OLS with intercept through the normal equations.
pub fn ols_normal_equations(x: &Rows, y: &[f64]) -> Result<Vec<f64>> {
    brute_force_wls(&with_intercept(x), &vec![1.0; y.len()], y)
}

/// VIF of every column by explicit auxiliary regressions.
pub fn vif_auxiliary(x: &Rows) -> Result<Vec<f64>> {
    let p = x.first().map_or(0, |r| r.len());
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let target: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let others: Rows = x
            .iter()
            .map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, v)| *v).collect())
            .collect();
        let beta = match ols_normal_equations(&others, &target) {
            Ok(b) => b,
            Err(Error::Singular) => {
                out.push(f64::INFINITY);
                continue;
            }
            Err(e) => return Err(e),
        };
        let design = with_intercept(&others);
        let mean = target.iter().sum::<f64>() / target.len() as f64;
        let mut rss = 0.0;
        let mut tss = 0.0;
        for (row, t) in design.iter().zip(&target) {
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            rss += (t - fit).powi(2);
            tss += (t - mean).powi(2);
        }
        out.push(if rss <= 1e-20 * tss { f64::INFINITY } else { tss / rss });
    }
    Ok(out)
}

/// Singular values by one-sided Jacobi rotations, descending.
pub fn singular_values(a: &Rows) -> Vec<f64> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    // work on columns
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|v| v * v).sum();
                let beta: f64 = cols[q].iter().map(|v| v * v).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `σ_max / σ_min`; infinite when the smallest singular value vanishes.
pub fn condition_number(a: &Rows) -> f64 {
    let sv = singular_values(a);
    let (hi, lo) = (sv[0], *sv.last().unwrap());
    if lo <= 1e-12 * hi {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Local condition number: columns of `W^{1/2} X` scaled to unit length.
pub fn local_condition_number(x: &Rows, w: &[f64]) -> f64 {
    let k = x[0].len();
    let mut a: Rows = x
        .iter()
        .zip(w)
        .map(|(r, wi)| r.iter().map(|v| v * wi.sqrt()).collect())
        .collect();
    for j in 0..k {
        let norm = a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return f64::INFINITY;
        }
        for r in a.iter_mut() {
            r[j] /= norm;
        }
    }
    condition_number(&a)
}

/// Moran's I from the double sum definition with a dense weight matrix.
pub fn moran_direct(values: &[f64], w: &Rows) -> f64 {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let mut num = 0.0;
    let mut s0 = 0.0;
    for i in 0..n {
        for j in 0..n {
            num += w[i][j] * z[i] * z[j];
            s0 += w[i][j];
        }
    }
    let den: f64 = z.iter().map(|v| v * v).sum();
    (n as f64 / s0) * num / den
}

/// Gi* z-scores from the textbook formula with self-inclusive weights.
pub fn gstar_direct(values: &[f64], w: &Rows) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let s = (values.iter().map(|v| v * v).sum::<f64>() / n - mean * mean).sqrt();
    w.iter()
        .map(|row| {
            let sw: f64 = row.iter().sum();
            let sw2: f64 = row.iter().map(|v| v * v).sum();
            let lag: f64 = row.iter().zip(values).map(|(a, b)| a * b).sum();
            let den = s * ((n * sw2 - sw * sw) / (n - 1.0)).sqrt();
            (lag - mean * sw) / den
        })
        .collect()
}

/// Neighbor lists of a `rows × cols` lattice (row-major cell order).
pub fn grid_adjacency(rows: usize, cols: usize, queen: bool) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); rows * cols];
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    if (dr, dc) == (0, 0) || (!queen && dr != 0 && dc != 0) {
                        continue;
                    }
                    let (nr, nc) = (r + dr, c + dc);
                    if nr >= 0 && nc >= 0 && nr < rows as i64 && nc < cols as i64 {
                        out[(r * cols as i64 + c) as usize].push((nr * cols as i64 + nc) as usize);
                    }
                }
            }
        }
    }
    for v in out.iter_mut() {
        v.sort_unstable();
    }
    out
}

/// Dense matrix from neighbor lists, optionally row-standardized.
pub fn dense_from_neighbors(neighbors: &[Vec<usize>], row_standardize: bool) -> Rows {
    let n = neighbors.len();
    neighbors
        .iter()
        .map(|nb| {
            let mut row = vec![0.0; n];
            let v = if row_standardize && !nb.is_empty() { 1.0 / nb.len() as f64 } else { 1.0 };
            for &j in nb {
                row[j] = v;
            }
            row
        })
        .collect()
}

/// Adaptive bisquare weights at location `i`: scale is the distance to the
/// `k`-th nearest point counting `i` itself.
pub fn adaptive_bisquare_weights(coords: &[[f64; 2]], i: usize, k: usize) -> Vec<f64> {
    let d: Vec<f64> = coords
        .iter()
        .map(|c| ((c[0] - coords[i][0]).powi(2) + (c[1] - coords[i][1]).powi(2)).sqrt())
        .collect();
    let mut sorted = d.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let b = sorted[k - 1];
    d.iter()
        .map(|&di| {
            if di == 0.0 {
                1.0
            } else if di < b {
                (1.0 - (di / b).powi(2)).powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Local GWR coefficients and leverage `s_ii` at `i` for an adaptive
/// bisquare kernel, by dense WLS.
pub fn gwr_local(x: &Rows, y: &[f64], coords: &[[f64; 2]], i: usize, k: usize) -> Result<(Vec<f64>, f64)> {
    let design = with_intercept(x);
    let w = adaptive_bisquare_weights(coords, i, k);
    let beta = brute_force_wls(&design, &w, y)?;
    // s_ii = w_ii x_iᵀ (XᵀWX)⁻¹ x_i
    let p = design[0].len();
    let mut g = vec![vec![0.0; p]; p];
    for (row, wi) in design.iter().zip(&w) {
        for r in 0..p {
            for c in 0..p {
                g[r][c] += row[r] * wi * row[c];
            }
        }
    }
    let sol = solve_dense(g, design[i].clone())?;
    let s_ii = w[i] * design[i].iter().zip(&sol).map(|(a, b)| a * b).sum::<f64>();
    Ok((beta, s_ii))
}
