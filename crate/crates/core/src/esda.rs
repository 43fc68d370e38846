//! Exploratory spatial statistics: global Moran's I with analytic and
//! permutation inference, and Getis-Ord Gi* hot-spot classification.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::weights::SpatialWeights;

pub const DEFAULT_PERMUTATIONS: usize = 999;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoranResult {
    pub i: f64,
    pub expected_i: f64,
    /// Variance of I under randomization; `None` when `n < 4`.
    pub variance: Option<f64>,
    pub z: Option<f64>,
    /// Two-sided normal-approximation p-value.
    pub p_analytic: Option<f64>,
    /// Folded one-sided pseudo p-value `(extreme + 1) / (permutations + 1)`.
    pub p_permutation: Option<f64>,
    pub permutations: usize,
    pub seed: u64,
    pub n: usize,
}

impl MoranResult {
    /// Permutation p when available, else the analytic one.
    pub fn p_value(&self) -> Option<f64> {
        self.p_permutation.or(self.p_analytic)
    }
}

fn centered(values: &[f64], what: &str) -> Result<(Vec<f64>, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let m2: f64 = z.iter().map(|v| v * v).sum();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(m2 > 1e-24 * n * scale * scale) || m2 == 0.0 {
        return Err(Error::ZeroVariance(what.into()));
    }
    Ok((z, m2))
}

fn moran_statistic(z: &[f64], m2: f64, w: &SpatialWeights, s0: f64) -> f64 {
    let n = z.len() as f64;
    let cross: f64 = w
        .rows()
        .enumerate()
        .map(|(i, row)| z[i] * row.iter().map(|&(j, wij)| wij * z[j]).sum::<f64>())
        .sum();
    n / s0 * cross / m2
}

/// Global Moran's I of `values` under `weights`.
///
/// Replicate `r` shuffles with a ChaCha8 stream seeded by `seed` on stream
/// `r`, so results do not depend on thread count.
pub fn morans_i(values: &[f64], weights: &SpatialWeights, permutations: usize, seed: u64) -> Result<MoranResult> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("Moran's I needs n >= 3 (n = {n})")));
    }
    if weights.n() != n {
        return Err(Error::InvalidWeights(format!("weights cover {} units, values {n}", weights.n())));
    }
    if weights.includes_self() {
        return Err(Error::InvalidWeights("Moran's I weights must not contain self-loops".into()));
    }
    let (z, m2) = centered(values, "values")?;
    let s0 = weights.s0();
    if !(s0 > 0.0) {
        return Err(Error::InvalidWeights("all weight rows are empty".into()));
    }
    let i = moran_statistic(&z, m2, weights, s0);
    let nf = n as f64;
    let expected = -1.0 / (nf - 1.0);

    let variance = (n >= 4).then(|| {
        let dense_t = transpose_rows(weights);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for a in 0..n {
            let out_sum: f64 = weights.row(a).iter().map(|(_, w)| w).sum();
            let in_sum: f64 = dense_t[a].iter().map(|(_, w)| w).sum();
            s2 += (out_sum + in_sum).powi(2);
            for &(b, w) in weights.row(a) {
                s1 += (w + weights.get(b, a)).powi(2);
            }
            for &(b, w) in &dense_t[a] {
                if weights.get(a, b) == 0.0 {
                    s1 += w.powi(2);
                }
            }
        }
        s1 *= 0.5;
        let m4: f64 = z.iter().map(|v| v.powi(4)).sum::<f64>() / nf;
        let kurt = m4 / (m2 / nf).powi(2);
        let num = nf * ((nf * nf - 3.0 * nf + 3.0) * s1 - nf * s2 + 3.0 * s0 * s0)
            - kurt * ((nf * nf - nf) * s1 - 2.0 * nf * s2 + 6.0 * s0 * s0);
        let den = (nf - 1.0) * (nf - 2.0) * (nf - 3.0) * s0 * s0;
        num / den - expected * expected
    });
    let z_score = variance.filter(|v| *v > 0.0).map(|v| (i - expected) / v.sqrt());
    let p_analytic = z_score.map(stats::normal_two_sided_p);

    let p_permutation = (permutations > 0).then(|| {
        let sims: Vec<f64> = (0..permutations)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                let mut zz = z.clone();
                zz.shuffle(&mut rng);
                moran_statistic(&zz, m2, weights, s0)
            })
            .collect();
        let above = sims.iter().filter(|&&s| s >= i).count();
        let extreme = above.min(permutations - above);
        (extreme as f64 + 1.0) / (permutations as f64 + 1.0)
    });

    Ok(MoranResult {
        i,
        expected_i: expected,
        variance,
        z: z_score,
        p_analytic,
        p_permutation,
        permutations,
        seed,
        n,
    })
}

fn transpose_rows(w: &SpatialWeights) -> Vec<Vec<(usize, f64)>> {
    let mut t = vec![Vec::new(); w.n()];
    for (i, row) in w.rows().enumerate() {
        for &(j, v) in row {
            t[j].push((i, v));
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HotSpotClass {
    #[serde(rename = "hot-99")]
    Hot99,
    #[serde(rename = "hot-95")]
    Hot95,
    #[serde(rename = "hot-90")]
    Hot90,
    #[serde(rename = "not-significant")]
    NotSignificant,
    #[serde(rename = "cold-90")]
    Cold90,
    #[serde(rename = "cold-95")]
    Cold95,
    #[serde(rename = "cold-99")]
    Cold99,
}

impl HotSpotClass {
    /// Two-sided 90/95/99% z cut-offs.
    pub fn from_z(z: f64) -> Self {
        let a = z.abs();
        let level = if a >= 2.576 {
            3
        } else if a >= 1.960 {
            2
        } else if a >= 1.645 {
            1
        } else {
            0
        };
        match (level, z > 0.0) {
            (0, _) => HotSpotClass::NotSignificant,
            (1, true) => HotSpotClass::Hot90,
            (2, true) => HotSpotClass::Hot95,
            (_, true) => HotSpotClass::Hot99,
            (1, false) => HotSpotClass::Cold90,
            (2, false) => HotSpotClass::Cold95,
            (_, false) => HotSpotClass::Cold99,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            HotSpotClass::Hot99 => "hot-99",
            HotSpotClass::Hot95 => "hot-95",
            HotSpotClass::Hot90 => "hot-90",
            HotSpotClass::NotSignificant => "not-significant",
            HotSpotClass::Cold90 => "cold-90",
            HotSpotClass::Cold95 => "cold-95",
            HotSpotClass::Cold99 => "cold-99",
        }
    }

    pub fn mirrored(&self) -> Self {
        match self {
            HotSpotClass::Hot99 => HotSpotClass::Cold99,
            HotSpotClass::Hot95 => HotSpotClass::Cold95,
            HotSpotClass::Hot90 => HotSpotClass::Cold90,
            HotSpotClass::NotSignificant => HotSpotClass::NotSignificant,
            HotSpotClass::Cold90 => HotSpotClass::Hot90,
            HotSpotClass::Cold95 => HotSpotClass::Hot95,
            HotSpotClass::Cold99 => HotSpotClass::Hot99,
        }
    }

    /// At least hot at the given confidence (0.90, 0.95, 0.99).
    pub fn is_hot_at(&self, confidence: f64) -> bool {
        let lvl = match self {
            HotSpotClass::Hot99 => 0.99,
            HotSpotClass::Hot95 => 0.95,
            HotSpotClass::Hot90 => 0.90,
            _ => return false,
        };
        lvl >= confidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotSpotResult {
    /// Local weighted sum `Σ_j w_ij x_j`.
    pub local_sum: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub class: Vec<HotSpotClass>,
    /// Units whose denominator vanished.
    pub degenerate: Vec<usize>,
}

/// Getis-Ord Gi* z-scores. `weights` must include self (see
/// [`SpatialWeights::binary_with_self`]).
pub fn getis_ord_gstar(values: &[f64], weights: &SpatialWeights) -> Result<HotSpotResult> {
    let n = values.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("Gi* needs n >= 3 (n = {n})")));
    }
    if weights.n() != n {
        return Err(Error::InvalidWeights(format!("weights cover {} units, values {n}", weights.n())));
    }
    if !weights.includes_self() {
        return Err(Error::InvalidWeights("Gi* weights must include self".into()));
    }
    centered(values, "values")?;
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let s = (values.iter().map(|v| v * v).sum::<f64>() / nf - mean * mean).max(0.0).sqrt();

    let mut out = HotSpotResult {
        local_sum: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        class: Vec::with_capacity(n),
        degenerate: Vec::new(),
    };
    for (i, row) in weights.rows().enumerate() {
        let wsum: f64 = row.iter().map(|(_, w)| w).sum();
        let w2: f64 = row.iter().map(|(_, w)| w * w).sum();
        let lsum: f64 = row.iter().map(|&(j, w)| w * values[j]).sum();
        let inner = (nf * w2 - wsum * wsum) / (nf - 1.0);
        out.local_sum.push(lsum);
        if !(inner > 1e-12 * wsum.max(1.0).powi(2)) {
            warn!("Gi*: degenerate denominator at `{}`", weights.ids()[i]);
            out.degenerate.push(i);
            out.z.push(0.0);
            out.p.push(1.0);
            out.class.push(HotSpotClass::NotSignificant);
            continue;
        }
        let z = (lsum - mean * wsum) / (s * inner.sqrt());
        out.z.push(z);
        out.p.push(stats::normal_two_sided_p(z));
        out.class.push(HotSpotClass::from_z(z));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{knn_from_points, WeightStyle};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn ring(n: usize) -> SpatialWeights {
        let rows = (0..n).map(|i| vec![((i + 1) % n, 1.0), ((i + n - 1) % n, 1.0)]).collect();
        SpatialWeights::from_neighbors(ids(n), rows, WeightStyle::Binary).unwrap()
    }

    #[test]
    fn constant_values_rejected() {
        let w = ring(5);
        assert!(matches!(morans_i(&[2.0; 5], &w, 0, 1), Err(Error::ZeroVariance(_))));
        assert!(matches!(getis_ord_gstar(&[2.0; 5], &w.binary_with_self()), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn expected_value() {
        let w = ring(158);
        let v: Vec<f64> = (0..158).map(|i| ((i * 37) % 11) as f64).collect();
        let r = morans_i(&v, &w, 0, 0).unwrap();
        assert_eq!(r.expected_i, -1.0 / 157.0);
        assert!(r.p_permutation.is_none());
    }

    #[test]
    fn alternating_ring_is_negative_one() {
        let w = ring(8).row_standardized();
        let v: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = morans_i(&v, &w, 99, 3).unwrap();
        assert!((r.i + 1.0).abs() < 1e-12);
        assert!(r.p_permutation.unwrap() <= 0.05);
    }

    #[test]
    fn self_loops_rejected() {
        let w = ring(5).binary_with_self();
        assert!(morans_i(&[1.0, 2.0, 3.0, 4.0, 5.0], &w, 0, 0).is_err());
    }

    #[test]
    fn empty_weights_rejected() {
        let w = SpatialWeights::from_neighbors(ids(4), vec![vec![]; 4], WeightStyle::Binary).unwrap();
        assert!(matches!(morans_i(&[1.0, 2.0, 3.0, 5.0], &w, 0, 0), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn class_thresholds() {
        assert_eq!(HotSpotClass::from_z(2.6), HotSpotClass::Hot99);
        assert_eq!(HotSpotClass::from_z(2.0), HotSpotClass::Hot95);
        assert_eq!(HotSpotClass::from_z(1.7), HotSpotClass::Hot90);
        assert_eq!(HotSpotClass::from_z(1.0), HotSpotClass::NotSignificant);
        assert_eq!(HotSpotClass::from_z(-2.0), HotSpotClass::Cold95);
        assert!(HotSpotClass::Hot99.is_hot_at(0.95));
        assert!(!HotSpotClass::Hot90.is_hot_at(0.95));
    }

    #[test]
    fn saturated_weights_are_degenerate() {
        let n = 4;
        let rows = (0..n).map(|_| (0..n).map(|j| (j, 1.0)).collect()).collect();
        let w = SpatialWeights::from_neighbors(ids(n), rows, WeightStyle::Binary).unwrap();
        let r = getis_ord_gstar(&[1.0, 2.0, 3.0, 4.0], &w).unwrap();
        assert_eq!(r.degenerate, vec![0, 1, 2, 3]);
        assert!(r.class.iter().all(|c| *c == HotSpotClass::NotSignificant));
    }

    #[test]
    fn knn_moran_runs() {
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [(i % 6) as f64, (i / 6) as f64]).collect();
        let w = knn_from_points(&pts, ids(30), 4).unwrap().row_standardized();
        let v: Vec<f64> = pts.iter().map(|p| p[0] + 0.1 * p[1]).collect();
        let r = morans_i(&v, &w, 199, 11).unwrap();
        assert!(r.i > 0.5);
        assert!(r.z.unwrap() > 3.0);
        assert!(r.p_permutation.unwrap() < 0.01);
    }
}
