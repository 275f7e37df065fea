//! Rank and linear correlation.
//!
//! Kendall's tau is computed from exact integer pair counts in
//! `O(n log n)`: sort by `(x, y)`, count x-ties and joint ties over runs,
//! count discordant pairs as merge-sort inversions of the `y` sequence, then
//! count y-ties over runs of the sorted `y`.
//!
//! ```text
//! tau_b = (C - D) / sqrt((C + D + Tx) (C + D + Ty))
//! tau_c = 2m (C - D) / (n^2 (m - 1)),   m = min(#distinct x, #distinct y)
//! ```
//!
//! Undefined cases (constant columns, too few distinct values) are errors,
//! never NaN.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two equal-length, NaN-free columns with at least two observations.
#[derive(Debug, Clone, Copy)]
pub struct PairedSample<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> PairedSample<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::Undefined(format!(
                "correlation needs at least 2 observations, got {}",
                x.len()
            )));
        }
        if x.iter().chain(y).any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("NaN in correlation input".into()));
        }
        Ok(PairedSample { x, y })
    }

    pub fn x(&self) -> &'a [f64] {
        self.x
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Classification of all `n (n - 1) / 2` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied in x but not in y.
    pub tied_x: u64,
    /// Tied in y but not in x.
    pub tied_y: u64,
    pub tied_xy: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "tau-b")]
    TauB,
    #[serde(rename = "tau-c")]
    TauC,
    #[serde(rename = "spearman")]
    Spearman,
    #[serde(rename = "pearson")]
    Pearson,
}

impl Statistic {
    pub fn compute(self, s: &PairedSample<'_>) -> Result<f64> {
        match self {
            Statistic::TauB => kendall_tau_b(s),
            Statistic::TauC => kendall_tau_c(s),
            Statistic::Spearman => spearman(s),
            Statistic::Pearson => pearson(s),
        }
    }
}

// Inputs are NaN-free (checked by PairedSample).
fn cmp(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).unwrap()
}

fn tie_pairs(run: u64) -> u64 {
    run * (run - 1) / 2
}

/// Sum of `t (t - 1) / 2` over runs of equal adjacent elements.
fn run_ties<T>(sorted: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += tie_pairs(run);
            run = 1;
        }
    }
    total + tie_pairs(run)
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_sort_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        merge_sort_inversions(&mut v[..mid], buf) + merge_sort_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        // equal elements are not inversions: take from the left first
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

pub fn pair_counts(s: &PairedSample<'_>) -> PairCounts {
    let n = s.len() as u64;
    let mut pairs: Vec<(f64, f64)> = s.x.iter().copied().zip(s.y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(&a.0, &b.0).then_with(|| cmp(&a.1, &b.1)));

    let x_ties = run_ties(&pairs, |a, b| a.0 == b.0);
    let xy_ties = run_ties(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = merge_sort_inversions(&mut ys, &mut buf);
    let y_ties = run_ties(&ys, |a, b| a == b);

    let total = n * (n - 1) / 2;
    PairCounts {
        concordant: total + xy_ties - x_ties - y_ties - discordant,
        discordant,
        tied_x: x_ties - xy_ties,
        tied_y: y_ties - xy_ties,
        tied_xy: xy_ties,
    }
}

pub fn distinct_count(v: &[f64]) -> usize {
    let mut sorted = v.to_vec();
    sorted.sort_by(cmp);
    sorted.dedup_by(|a, b| a == b);
    sorted.len()
}

pub fn kendall_tau_b(s: &PairedSample<'_>) -> Result<f64> {
    tau_b_from_counts(&pair_counts(s))
}

pub fn tau_b_from_counts(c: &PairCounts) -> Result<f64> {
    let cd = c.concordant + c.discordant;
    let dx = cd + c.tied_x;
    let dy = cd + c.tied_y;
    if dx == 0 || dy == 0 {
        return Err(Error::Undefined("tau-b of a constant column".into()));
    }
    let num = c.concordant as f64 - c.discordant as f64;
    Ok(num / ((dx as f64) * (dy as f64)).sqrt())
}

pub fn kendall_tau_c(s: &PairedSample<'_>) -> Result<f64> {
    let m = distinct_count(s.x).min(distinct_count(s.y));
    tau_c_from_counts(&pair_counts(s), s.len(), m)
}

pub fn tau_c_from_counts(c: &PairCounts, n: usize, m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::Undefined(
            "tau-c needs at least two distinct values in each column".into(),
        ));
    }
    let num = 2.0 * m as f64 * (c.concordant as f64 - c.discordant as f64);
    let n = n as f64;
    Ok(num / (n * n * (m as f64 - 1.0)))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| cmp(&v[a], &v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let r = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

pub fn pearson(s: &PairedSample<'_>) -> Result<f64> {
    let n = s.len() as f64;
    let mx = s.x.iter().sum::<f64>() / n;
    let my = s.y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in s.x.iter().zip(s.y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined(
            "pearson correlation of a constant column".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(s: &PairedSample<'_>) -> Result<f64> {
    let rx = average_ranks(s.x);
    let ry = average_ranks(s.y);
    pearson(&PairedSample::new(&rx, &ry)?)
        .map_err(|_| Error::Undefined("spearman correlation of a constant column".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample<'a>(x: &'a [f64], y: &'a [f64]) -> PairedSample<'a> {
        PairedSample::new(x, y).unwrap()
    }

    #[test]
    fn tau_b_examples() {
        assert_eq!(
            kendall_tau_b(&sample(&[1., 2., 3.], &[1., 2., 3.])).unwrap(),
            1.0
        );
        assert_eq!(
            kendall_tau_b(&sample(&[1., 2., 3.], &[3., 2., 1.])).unwrap(),
            -1.0
        );
        let s = sample(&[1., 1., 2.], &[1., 2., 3.]);
        assert_eq!(
            pair_counts(&s),
            PairCounts {
                concordant: 2,
                discordant: 0,
                tied_x: 1,
                tied_y: 0,
                tied_xy: 0
            }
        );
        let t = kendall_tau_b(&s).unwrap();
        assert!((t - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((t - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn tau_c_examples() {
        assert_eq!(
            kendall_tau_c(&sample(&[1., 2., 3.], &[1., 2., 3.])).unwrap(),
            1.0
        );
        assert_eq!(
            kendall_tau_c(&sample(&[1., 1., 2.], &[1., 2., 3.])).unwrap(),
            8.0 / 9.0
        );
        assert_eq!(kendall_tau_c(&sample(&[1., 2.], &[2., 1.])).unwrap(), -1.0);
    }

    #[test]
    fn kendall_constant_column_is_undefined() {
        let s = sample(&[1., 1., 1.], &[1., 2., 3.]);
        assert!(matches!(kendall_tau_b(&s), Err(Error::Undefined(_))));
        assert!(matches!(kendall_tau_c(&s), Err(Error::Undefined(_))));
    }

    #[test]
    fn joint_ties_are_not_counted_as_one_sided() {
        let s = sample(&[1., 1., 2., 2.], &[5., 5., 6., 7.]);
        let c = pair_counts(&s);
        assert_eq!(c.tied_xy, 1);
        assert_eq!(c.tied_x, 1);
        assert_eq!(c.tied_y, 0);
        assert_eq!(c.concordant, 4);
    }

    #[test]
    fn spearman_examples() {
        assert!(
            (spearman(&sample(&[1., 2., 3., 4.], &[2., 1., 4., 3.])).unwrap() - 0.6).abs() < 1e-12
        );
        let x = [0.5, 1.0, 3.0, 9.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert!((spearman(&sample(&x, &y)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            spearman(&sample(&[2., 2., 2.], &[1., 2., 3.])),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn pearson_examples() {
        let x = [0., 1., 2., 5.];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&sample(&x, &y)).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&sample(&x, &neg)).unwrap() + 1.0).abs() < 1e-12);
        let r = pearson(&sample(&[0., 1., 2.], &[0., 1., 4.])).unwrap();
        assert!((r - 4.0 / (2.0f64 * 78.0 / 9.0).sqrt()).abs() < 1e-12);
        assert!((r - 0.9608).abs() < 1e-4);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(
            average_ranks(&[10., 20., 10., 30.]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
    }

    #[test]
    fn sample_validation() {
        assert!(PairedSample::new(&[1.0], &[1.0]).is_err());
        assert!(PairedSample::new(&[1.0, 2.0], &[1.0]).is_err());
        assert!(PairedSample::new(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
    }
}
