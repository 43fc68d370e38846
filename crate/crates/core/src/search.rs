//! One-dimensional minimizers for bandwidth calibration: golden-section
//! search on integers or reals, with an exhaustive fallback when the
//! objective turns out not to be unimodal.
//!
//! Integer searches over wide intervals first evaluate a coarse grid and
//! run golden-section inside the bracket around its best point, so a
//! narrow basin at small bandwidths is not skipped in favor of the
//! boundary at `n`.

use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

const INV_PHI2: f64 = 0.381_966_011_250_105_1; // 2 - φ

/// Interior points of the coarse grid for integer searches.
const COARSE_POINTS: i64 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMethod {
    GoldenSection,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub argmin: f64,
    pub score: f64,
    pub method: SearchMethod,
    /// Golden-section found an inconsistent bracket and the exhaustive scan
    /// was used instead.
    pub fell_back: bool,
    /// Every evaluated point, sorted by argument.
    pub evaluations: Vec<(f64, f64)>,
}

/// `a` beats `b` when strictly smaller beyond a relative tie tolerance.
fn better(a: f64, b: f64) -> bool {
    if a.is_nan() {
        return false;
    }
    if b.is_nan() {
        return true;
    }
    if a == b {
        return false;
    }
    let tol = 1e-10 * a.abs().max(b.abs()).max(1.0);
    if a.is_finite() && b.is_finite() {
        a < b - tol
    } else {
        a < b
    }
}

/// Best point of a set; ties go to the larger argument.
fn best_of<'a, I: Iterator<Item = (&'a i64, &'a f64)>>(it: I) -> Option<(i64, f64)> {
    let mut best: Option<(i64, f64)> = None;
    for (&x, &s) in it {
        best = match best {
            None => Some((x, s)),
            Some((bx, bs)) => {
                if better(s, bs) || (!better(bs, s) && x > bx) {
                    Some((x, s))
                } else {
                    Some((bx, bs))
                }
            }
        };
    }
    best
}

struct Cache<F> {
    f: F,
    seen: BTreeMap<i64, f64>,
}

impl<F: FnMut(i64) -> f64> Cache<F> {
    fn eval(&mut self, x: i64) -> f64 {
        if let Some(&v) = self.seen.get(&x) {
            return v;
        }
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.seen.insert(x, v);
        v
    }
}

/// Minimize `f` over the integers in `[lo, hi]`.
pub fn golden_section_int<F: FnMut(i64) -> f64>(lo: i64, hi: i64, f: F) -> SearchOutcome {
    assert!(lo <= hi, "empty search interval");
    let mut c = Cache { f, seen: BTreeMap::new() };
    let (mut a, mut b) = coarse_bracket(&mut c, lo, hi);
    while b - a > 3 {
        let step = ((b - a) as f64 * INV_PHI2).round() as i64;
        let x1 = a + step.max(1);
        let mut x2 = b - step.max(1);
        if x2 <= x1 {
            x2 = x1 + 1;
        }
        let f1 = c.eval(x1);
        let f2 = c.eval(x2);
        if better(f1, f2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    for x in a..=b {
        c.eval(x);
    }
    let (mut arg, mut score) = best_of(c.seen.range(a..=b)).expect("non-empty bracket");
    // a point outside the final bracket that beats its minimum, or a
    // minimum on the bracket edge that is not a local minimum, means the
    // objective is not unimodal over [lo, hi]
    let mut consistent = !c.seen.iter().any(|(_, &s)| better(s, score));
    for nb in [arg - 1, arg + 1] {
        if consistent && (lo..=hi).contains(&nb) && better(c.eval(nb), score) {
            consistent = false;
        }
    }
    let mut fell_back = false;
    let mut method = SearchMethod::GoldenSection;
    if !consistent {
        debug!("golden-section bracket inconsistent on [{lo}, {hi}]; scanning exhaustively");
        for x in lo..=hi {
            c.eval(x);
        }
        (arg, score) = best_of(c.seen.iter()).unwrap();
        fell_back = true;
        method = SearchMethod::Exhaustive;
    }
    SearchOutcome {
        argmin: arg as f64,
        score,
        method,
        fell_back,
        evaluations: c.seen.iter().map(|(&x, &s)| (x as f64, s)).collect(),
    }
}

/// Bracket around the best point of an evenly spaced grid over `[lo, hi]`.
fn coarse_bracket<F: FnMut(i64) -> f64>(c: &mut Cache<F>, lo: i64, hi: i64) -> (i64, i64) {
    let span = hi - lo;
    if span <= 4 * (COARSE_POINTS + 1) {
        return (lo, hi);
    }
    let grid: Vec<i64> = (0..=COARSE_POINTS + 1)
        .map(|k| lo + ((span as f64) * k as f64 / (COARSE_POINTS + 1) as f64).round() as i64)
        .collect();
    for &x in &grid {
        c.eval(x);
    }
    let (best, _) = best_of(grid.iter().map(|x| (x, &c.seen[x]))).unwrap();
    let m = grid.iter().position(|&x| x == best).unwrap();
    (grid[m.saturating_sub(1)], grid[(m + 1).min(grid.len() - 1)])
}

/// Evaluate every integer in `[lo, hi]`.
pub fn exhaustive_int<F: FnMut(i64) -> f64>(lo: i64, hi: i64, f: F) -> SearchOutcome {
    let mut c = Cache { f, seen: BTreeMap::new() };
    for x in lo..=hi {
        c.eval(x);
    }
    let (arg, score) = best_of(c.seen.iter()).expect("non-empty interval");
    SearchOutcome {
        argmin: arg as f64,
        score,
        method: SearchMethod::Exhaustive,
        fell_back: false,
        evaluations: c.seen.iter().map(|(&x, &s)| (x as f64, s)).collect(),
    }
}

/// Minimize `f` over `[lo, hi]` to an absolute tolerance `tol`.
///
/// Falls back to a 200-point grid plus a local golden refinement when the
/// final bracket is beaten by an earlier evaluation.
pub fn golden_section_real<F: FnMut(f64) -> f64>(lo: f64, hi: f64, tol: f64, mut f: F) -> SearchOutcome {
    assert!(lo <= hi, "empty search interval");
    let mut evals: Vec<(f64, f64)> = Vec::new();
    let mut g = |x: f64, evals: &mut Vec<(f64, f64)>| {
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        evals.push((x, v));
        v
    };
    let refine = |mut a: f64, mut b: f64, evals: &mut Vec<(f64, f64)>, g: &mut dyn FnMut(f64, &mut Vec<(f64, f64)>) -> f64| {
        let mut x1 = a + INV_PHI2 * (b - a);
        let mut x2 = b - INV_PHI2 * (b - a);
        let mut f1 = g(x1, evals);
        let mut f2 = g(x2, evals);
        while (b - a) > tol {
            if better(f1, f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = a + INV_PHI2 * (b - a);
                f1 = g(x1, evals);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = b - INV_PHI2 * (b - a);
                f2 = g(x2, evals);
            }
        }
        if better(f1, f2) {
            (x1, f1)
        } else {
            (x2, f2)
        }
    };
    let (mut arg, mut score) = refine(lo, hi, &mut evals, &mut g);
    let ends = [g(lo, &mut evals), g(hi, &mut evals)];
    let mut method = SearchMethod::GoldenSection;
    let mut fell_back = false;
    if evals.iter().any(|&(_, s)| better(s, score)) || ends.iter().any(|&s| better(s, score)) {
        debug!("golden-section bracket inconsistent on [{lo}, {hi}]; scanning exhaustively");
        let steps = 200;
        let h = (hi - lo) / steps as f64;
        let grid: Vec<(f64, f64)> = (0..=steps)
            .map(|k| {
                let x = lo + h * k as f64;
                (x, g(x, &mut evals))
            })
            .collect();
        let mut k_best = 0;
        for (k, &(_, s)) in grid.iter().enumerate() {
            if !better(grid[k_best].1, s) {
                k_best = k;
            }
        }
        let a = grid[k_best.saturating_sub(1)].0;
        let b = grid[(k_best + 1).min(steps)].0;
        (arg, score) = refine(a, b, &mut evals, &mut g);
        if better(grid[k_best].1, score) {
            (arg, score) = grid[k_best];
        }
        method = SearchMethod::Exhaustive;
        fell_back = true;
    }
    evals.sort_by(|a, b| a.0.total_cmp(&b.0));
    evals.dedup_by(|a, b| a.0 == b.0);
    SearchOutcome {
        argmin: arg,
        score,
        method,
        fell_back,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_parabola() {
        for target in [3i64, 17, 40, 99, 100] {
            let out = golden_section_int(3, 100, |x| ((x - target) as f64).powi(2));
            assert_eq!(out.argmin as i64, target);
            assert!(!out.fell_back);
        }
    }

    #[test]
    fn flat_ties_prefer_larger() {
        let out = golden_section_int(5, 60, |x| if x > 30 { 1.0 } else { 2.0 });
        assert_eq!(out.argmin, 60.0);
        let out = exhaustive_int(5, 60, |_| 0.0);
        assert_eq!(out.argmin, 60.0);
    }

    #[test]
    fn infinite_left_plateau() {
        let out = golden_section_int(2, 50, |x| if x < 10 { f64::INFINITY } else { (x as f64 - 20.0).abs() });
        assert_eq!(out.argmin, 20.0);
    }

    #[test]
    fn coarse_grid_catches_narrow_basin() {
        // narrow well near the left edge, broad basin on the right
        let f = |x: i64| {
            let d = (x - 12) as f64;
            if d.abs() <= 6.0 {
                -5.0 + d * d / 10.0
            } else {
                ((x - 80) as f64).powi(2) / 1000.0
            }
        };
        let ex = exhaustive_int(1, 200, f);
        let gs = golden_section_int(1, 200, f);
        assert_eq!(ex.argmin, 12.0);
        assert_eq!(gs.argmin, 12.0);
        assert!(!gs.fell_back);
        assert!(gs.evaluations.len() < 60);
    }

    #[test]
    fn detects_inconsistency_from_cached_points() {
        // an isolated dip hit by the first probe, then abandoned on ties
        let f = |x: i64| match x {
            24 => 1.0,
            37 => 2.0,
            _ => 3.0,
        };
        let out = golden_section_int(1, 60, f);
        assert!(out.fell_back);
        assert_eq!(out.argmin, 24.0);
    }

    #[test]
    fn real_parabola() {
        let out = golden_section_real(0.0, 10.0, 1e-6, |x| (x - 3.3).powi(2));
        assert!((out.argmin - 3.3).abs() < 1e-5);
    }
}
