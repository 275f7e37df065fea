//! Forward selection of metrics by cross-validated R².
//!
//! Starting from an empty set, each step adds the metric whose inclusion
//! gives the highest mean held-out R² of a linear regression onto the human
//! ratings. The whole procedure is repeated on bootstrap resamples of the
//! table to see how stable each pick is.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::MetricTable;
use crate::error::{Error, Result};

/// Relative size of an R diagonal entry below which a column counts as a
/// linear combination of the columns before it.
const RANK_TOL: f64 = 1e-10;

/// Ridge penalty on standardized features used when a selection step hits a
/// collinear design.
pub const FALLBACK_RIDGE: f64 = 1e-8;

/// Intercept followed by one slope per feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn predict(&self, columns: &[&[f64]], row: usize) -> f64 {
        self.coefficients[0]
            + columns
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(c, b)| c[row] * b)
                .sum::<f64>()
    }
}

fn check_columns(columns: &[&[f64]], y: &[f64]) -> Result<()> {
    for c in columns {
        if c.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                got: c.len(),
            });
        }
    }
    Ok(())
}

fn solve_qr(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let p = a.ncols();
    let qr = a.qr();
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    let r = qr.r();
    let top = qtb.rows(0, p).into_owned();
    r.solve_upper_triangular(&top)
        .expect("triangular factor checked nonsingular")
}

/// Least squares with intercept via Householder QR.
///
/// Fails if `n <= p + 1` or if some column is (numerically) a linear
/// combination of the intercept and earlier columns; the error names the
/// dependent columns using `names` (or `x<j>` when no names are given).
pub fn ols_fit_named(columns: &[&[f64]], names: &[&str], y: &[f64]) -> Result<LinearFit> {
    check_columns(columns, y)?;
    let n = y.len();
    let p = columns.len();
    if n <= p + 1 {
        return Err(Error::InvalidInput(format!(
            "least squares with {p} feature(s) and intercept needs more than {} rows, got {n}",
            p + 1
        )));
    }
    let a = DMatrix::from_fn(
        n,
        p + 1,
        |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] },
    );
    let diag = a.clone().qr().r().diagonal();
    let dependent: Vec<String> = (0..=p)
        .filter(|&j| {
            let norm = a.column(j).norm();
            norm == 0.0 || diag[j].abs() <= RANK_TOL * norm
        })
        .map(|j| match j {
            0 => "intercept".to_owned(),
            j => names
                .get(j - 1)
                .map_or_else(|| format!("x{}", j - 1), |s| s.to_string()),
        })
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient(dependent));
    }
    let beta = solve_qr(a, DVector::from_column_slice(y));
    Ok(LinearFit {
        coefficients: beta.iter().copied().collect(),
    })
}

pub fn ols_fit(columns: &[&[f64]], y: &[f64]) -> Result<LinearFit> {
    ols_fit_named(columns, &[], y)
}

/// Ridge regression on standardized features with an unpenalized intercept,
/// mapped back to the original feature scale.
pub fn ridge_fit(columns: &[&[f64]], y: &[f64], lambda: f64) -> Result<LinearFit> {
    check_columns(columns, y)?;
    let n = y.len();
    let p = columns.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "ridge fit needs at least 2 rows".into(),
        ));
    }
    let nf = n as f64;
    let y_mean = y.iter().sum::<f64>() / nf;
    let stats: Vec<(f64, f64)> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / nf;
            let sd = (c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt();
            (m, if sd > 0.0 { sd } else { 1.0 })
        })
        .collect();
    let root = lambda.sqrt();
    let a = DMatrix::from_fn(n + p, p, |i, j| {
        if i < n {
            (columns[j][i] - stats[j].0) / stats[j].1
        } else if i - n == j {
            root
        } else {
            0.0
        }
    });
    let b = DVector::from_fn(n + p, |i, _| if i < n { y[i] - y_mean } else { 0.0 });
    let beta = solve_qr(a, b);
    let slopes: Vec<f64> = beta.iter().zip(&stats).map(|(b, (_, sd))| b / sd).collect();
    let intercept = y_mean
        - slopes
            .iter()
            .zip(&stats)
            .map(|(b, (m, _))| b * m)
            .sum::<f64>();
    let mut coefficients = vec![intercept];
    coefficients.extend(slopes);
    Ok(LinearFit { coefficients })
}

/// OLS, or the tiny ridge of [`FALLBACK_RIDGE`] when the design is collinear.
pub fn fit_with_fallback(columns: &[&[f64]], y: &[f64]) -> Result<LinearFit> {
    match ols_fit(columns, y) {
        Err(Error::RankDeficient(_)) => ridge_fit(columns, y, FALLBACK_RIDGE),
        other => other,
    }
}

/// Held-out row indices for each fold: one seeded shuffle of `0..n`, then
/// contiguous chunks, the first `n % folds` chunks one row longer.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!(
            "cross-validation needs n >= folds >= 2 (n={n}, folds={folds})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// `1 - SS_res / SS_tot` with `SS_tot` about the mean of `actual`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R² of a constant held-out target".into()));
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Mean held-out R² over `folds` folds (see [`fold_assignment`]). Each fold
/// is fitted with [`fit_with_fallback`].
pub fn cv_r2(columns: &[&[f64]], y: &[f64], folds: usize, seed: u64) -> Result<f64> {
    check_columns(columns, y)?;
    let assignment = fold_assignment(y.len(), folds, seed)?;
    let mut in_test = vec![usize::MAX; y.len()];
    for (f, rows) in assignment.iter().enumerate() {
        for &r in rows {
            in_test[r] = f;
        }
    }
    let mut total = 0.0;
    for (f, test) in assignment.iter().enumerate() {
        let train: Vec<usize> = (0..y.len()).filter(|&r| in_test[r] != f).collect();
        let pick = |v: &[f64], rows: &[usize]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        let train_cols: Vec<Vec<f64>> = columns.iter().map(|c| pick(c, &train)).collect();
        let train_refs: Vec<&[f64]> = train_cols.iter().map(Vec::as_slice).collect();
        let fit = fit_with_fallback(&train_refs, &pick(y, &train))?;
        let predicted: Vec<f64> = test.iter().map(|&r| fit.predict(columns, r)).collect();
        total += r_squared(&pick(y, test), &predicted)?;
    }
    Ok(total / folds as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    /// Metric names in the order they were added.
    pub order: Vec<String>,
    /// Cross-validated R² after each addition.
    pub r2_path: Vec<f64>,
}

/// Greedy forward selection over every metric in `table`.
///
/// Ties in R² go to the metric whose name sorts first. Every step reuses the
/// same folds, so the trace depends only on `(table, folds, seed)`.
pub fn forward_select(table: &MetricTable, folds: usize, seed: u64) -> Result<SelectionTrace> {
    if table.num_metrics() < 2 {
        return Err(Error::InvalidInput(
            "forward selection needs at least 2 metrics".into(),
        ));
    }
    if table.len() < 2 * folds {
        return Err(Error::InvalidInput(format!(
            "forward selection with {folds} folds needs at least {} rows, got {}",
            2 * folds,
            table.len()
        )));
    }
    let mut remaining: Vec<&str> = table.metric_names().collect();
    remaining.sort_unstable();
    let mut chosen: Vec<&str> = Vec::new();
    let mut r2_path = Vec::new();
    while !remaining.is_empty() {
        let scores = remaining
            .par_iter()
            .map(|&cand| {
                let cols: Vec<&[f64]> = chosen
                    .iter()
                    .chain(std::iter::once(&cand))
                    .map(|n| table.metric(n).unwrap())
                    .collect();
                cv_r2(&cols, table.human(), folds, seed)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = i;
            }
        }
        chosen.push(remaining.remove(best));
        r2_path.push(scores[best]);
    }
    Ok(SelectionTrace {
        order: chosen.into_iter().map(str::to_owned).collect(),
        r2_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    /// `n` rows drawn with replacement, instance level.
    WithReplacement,
    /// Every bootstrap sees the original table.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSelectionResult {
    pub traces: Vec<SelectionTrace>,
    pub first_pick_counts: BTreeMap<String, usize>,
}

impl BootstrapSelectionResult {
    /// How often each metric was chosen at `step` (0-based).
    pub fn pick_counts(&self, step: usize) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.traces {
            if let Some(name) = t.order.get(step) {
                *counts.entry(name.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Mean, standard deviation, min and max of R² at each step.
    pub fn r2_curve(&self) -> Vec<CurvePoint> {
        let steps = self
            .traces
            .iter()
            .map(|t| t.r2_path.len())
            .max()
            .unwrap_or(0);
        (0..steps)
            .map(|step| {
                let vals: Vec<f64> = self
                    .traces
                    .iter()
                    .filter_map(|t| t.r2_path.get(step).copied())
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                CurvePoint {
                    step: step + 1,
                    mean,
                    std: var.sqrt(),
                    min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                    max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn bootstrap_forward_select(
    table: &MetricTable,
    folds: usize,
    bootstraps: usize,
    seed: u64,
) -> Result<BootstrapSelectionResult> {
    bootstrap_forward_select_with(table, folds, bootstraps, seed, Resampling::WithReplacement)
}

/// Bootstrap `b` resamples rows with a ChaCha8 stream seeded `seed + b` and
/// runs [`forward_select`] with fold seed `seed + b`.
pub fn bootstrap_forward_select_with(
    table: &MetricTable,
    folds: usize,
    bootstraps: usize,
    seed: u64,
    resampling: Resampling,
) -> Result<BootstrapSelectionResult> {
    if bootstraps == 0 {
        return Err(Error::InvalidInput("bootstraps must be at least 1".into()));
    }
    let n = table.len();
    let traces = (0..bootstraps)
        .into_par_iter()
        .map(|b| {
            let s = seed.wrapping_add(b as u64);
            match resampling {
                Resampling::Identity => forward_select(table, folds, s),
                Resampling::WithReplacement => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    forward_select(&table.select_rows(&rows), folds, s)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut result = BootstrapSelectionResult {
        traces,
        first_pick_counts: BTreeMap::new(),
    };
    result.first_pick_counts = result.pick_counts(0);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 2.0).collect();
        let fit = ols_fit(&[&x], &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn zero_column_is_rank_deficient() {
        let x = vec![0.0; 10];
        let y = noise(10, 1);
        match ols_fit_named(&[&x], &["zeros"], &y) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, ["zeros"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_column_is_named() {
        let a = noise(20, 2);
        let y = noise(20, 3);
        match ols_fit_named(&[&a, &a], &["m1", "m2"], &y) {
            Err(Error::RankDeficient(cols)) => assert_eq!(cols, ["m2"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(
            ols_fit(&[&[1.0, 2.0]], &[1.0, 2.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn residuals_are_orthogonal_to_columns() {
        let (a, b, y) = (noise(50, 4), noise(50, 5), noise(50, 6));
        let cols: [&[f64]; 2] = [&a, &b];
        let fit = ols_fit(&cols, &y).unwrap();
        let resid: Vec<f64> = (0..50).map(|i| y[i] - fit.predict(&cols, i)).collect();
        let rnorm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
        let ones = vec![1.0; 50];
        for c in [&ones, &a, &b] {
            let dot: f64 = c.iter().zip(&resid).map(|(x, r)| x * r).sum();
            let cnorm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(dot.abs() <= 1e-8 * cnorm * rnorm, "{dot}");
        }
    }

    #[test]
    fn ridge_matches_ols_on_well_posed_data() {
        let (a, y) = (noise(30, 7), noise(30, 8));
        let ols = ols_fit(&[&a], &y).unwrap();
        let ridge = ridge_fit(&[&a], &y, FALLBACK_RIDGE).unwrap();
        for (o, r) in ols.coefficients.iter().zip(&ridge.coefficients) {
            assert!((o - r).abs() < 1e-6);
        }
    }

    #[test]
    fn folds_partition_rows() {
        let f = fold_assignment(23, 5, 9).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(f, fold_assignment(23, 5, 9).unwrap());
        assert!(fold_assignment(3, 5, 0).is_err());
        assert!(fold_assignment(10, 1, 0).is_err());
    }

    #[test]
    fn cv_r2_of_exact_linear_target() {
        let (a, b) = (noise(40, 10), noise(40, 11));
        let y: Vec<f64> = (0..40).map(|i| 1.5 * a[i] - 0.5 * b[i] + 4.0).collect();
        for folds in [2, 5, 10] {
            let r2 = cv_r2(&[&a, &b], &y, folds, 3).unwrap();
            assert!((1.0 - r2).abs() <= 1e-10, "{r2}");
        }
    }

    #[test]
    fn cv_r2_is_deterministic() {
        let (a, y) = (noise(60, 12), noise(60, 13));
        assert_eq!(
            cv_r2(&[&a], &y, 5, 77).unwrap(),
            cv_r2(&[&a], &y, 5, 77).unwrap()
        );
    }

    #[test]
    fn constant_held_out_target_is_undefined() {
        let a = noise(10, 14);
        let y = vec![2.0; 10];
        assert!(matches!(cv_r2(&[&a], &y, 5, 0), Err(Error::Undefined(_))));
    }

    fn table(cols: Vec<(&str, Vec<f64>)>, human: Vec<f64>) -> MetricTable {
        let ids = (0..human.len()).map(|i| i.to_string()).collect();
        MetricTable::new(ids, human, cols.into_iter().map(|(n, c)| (n.to_owned(), c))).unwrap()
    }

    #[test]
    fn perfect_predictor_is_picked_first() {
        let a = noise(100, 20);
        let t = table(
            vec![("metric_b", noise(100, 21)), ("metric_a", a.clone())],
            a,
        );
        let trace = forward_select(&t, 5, 1).unwrap();
        assert_eq!(trace.order[0], "metric_a");
        assert_eq!(trace.order.len(), 2);
        assert_eq!(trace.r2_path.len(), 2);
    }

    #[test]
    fn duplicated_columns_fall_back_to_ridge() {
        let m = noise(100, 22);
        let human: Vec<f64> = m
            .iter()
            .zip(noise(100, 23))
            .map(|(a, e)| a + 0.1 * e)
            .collect();
        let t = table(vec![("m2", m.clone()), ("m1", m)], human);
        let trace = forward_select(&t, 5, 4).unwrap();
        assert_eq!(trace.order, ["m1", "m2"]);
        assert!((trace.r2_path[1] - trace.r2_path[0]).abs() < 1e-6);
    }

    #[test]
    fn selection_preconditions() {
        let t = table(vec![("a", noise(20, 1))], noise(20, 2));
        assert!(forward_select(&t, 5, 0).is_err());
        let t = table(vec![("a", noise(8, 1)), ("b", noise(8, 3))], noise(8, 2));
        assert!(forward_select(&t, 5, 0).is_err());
    }

    #[test]
    fn identity_bootstrap_equals_forward_select() {
        let a = noise(60, 30);
        let human: Vec<f64> = a
            .iter()
            .zip(noise(60, 31))
            .map(|(x, e)| x + 0.5 * e)
            .collect();
        let t = table(
            vec![("a", a), ("b", noise(60, 32)), ("c", noise(60, 33))],
            human,
        );
        let boot = bootstrap_forward_select_with(&t, 5, 1, 8, Resampling::Identity).unwrap();
        assert_eq!(boot.traces, vec![forward_select(&t, 5, 8).unwrap()]);
        assert_eq!(boot.first_pick_counts.get("a"), Some(&1));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let a = noise(80, 40);
        let human: Vec<f64> = a.iter().zip(noise(80, 41)).map(|(x, e)| x + e).collect();
        let t = table(vec![("a", a), ("b", noise(80, 42))], human);
        let r1 = bootstrap_forward_select(&t, 5, 4, 3).unwrap();
        let r2 = bootstrap_forward_select(&t, 5, 4, 3).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.traces.len(), 4);
        let curve = r1.r2_curve();
        assert_eq!(curve.len(), 2);
        assert!(curve.iter().all(|p| p.min <= p.mean && p.mean <= p.max));
    }
}
