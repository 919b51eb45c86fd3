//! Rank-based tests and density summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Exact Mann-Whitney p-values are used up to this combined sample size.
pub const EXACT_MWU_MAX_TOTAL: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U statistic of the first sample.
    pub u: f64,
    /// Tie-corrected, continuity-corrected z-score of `u`.
    pub z: f64,
    pub p_two_sided: f64,
    pub method: UTestMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_two_sided: f64,
    pub n: usize,
}

/// Midranks (1-based) of `values`; tied values share the mean of their
/// positions. Also returns the tie group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Upper-tail probability of the standard normal.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Number of arrangements of `n` first-sample and `m` second-sample items
/// yielding each U value `0..=n*m`, by the standard counting recurrence.
fn u_null_counts(n: usize, m: usize) -> Vec<f64> {
    // table[i][j] holds the count vector for sizes (i, j).
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 || j == 0 {
                table[i][j] = vec![1.0];
                continue;
            }
            let mut counts = vec![0.0; i * j + 1];
            // Largest item from the first sample: it beats all j others.
            for (u, c) in table[i - 1][j].iter().enumerate() {
                counts[u + j] += c;
            }
            // Largest item from the second sample: contributes nothing.
            for (u, c) in table[i][j - 1].iter().enumerate() {
                counts[u] += c;
            }
            table[i][j] = counts;
        }
    }
    std::mem::take(&mut table[n][m])
}

/// Two-sided Mann-Whitney U test.
///
/// The statistic uses midranks. Without ties and with at most
/// [`EXACT_MWU_MAX_TOTAL`] observations the p-value comes from the exact
/// null distribution; otherwise a normal approximation with tie and
/// continuity corrections is used.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Insufficient(
            "Mann-Whitney U needs at least one value per sample".into(),
        ));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("samples contain NaN".into()));
    }
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    if ties.first() == Some(&total) {
        return Err(Error::DegenerateTest(
            "all observations are identical".into(),
        ));
    }
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let nf = n as f64;
    let mf = m as f64;
    let u = rank_sum_a - nf * (nf + 1.0) / 2.0;

    let mean = nf * mf / 2.0;
    let big_n = total as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let sd = var.sqrt();
    let diff = u - mean;
    let z = diff.signum() * (diff.abs() - 0.5).max(0.0) / sd;

    if ties.is_empty() && total <= EXACT_MWU_MAX_TOTAL {
        let counts = u_null_counts(n, m);
        let all: f64 = counts.iter().sum();
        let u_int = u.round() as usize;
        let lower: f64 = counts[..=u_int].iter().sum::<f64>() / all;
        let upper: f64 = counts[u_int..].iter().sum::<f64>() / all;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(UTestResult {
            u,
            z,
            p_two_sided: p,
            method: UTestMethod::Exact,
        });
    }

    let p = (2.0 * normal_sf(z.abs())).min(1.0);
    Ok(UTestResult {
        u,
        z,
        p_two_sided: p,
        method: UTestMethod::NormalApprox,
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with a two-sided p-value from the
/// t-distribution with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Insufficient(format!(
            "Spearman correlation needs at least 3 pairs, got {n}"
        )));
    }
    let (rx, _) = midranks(x);
    let (ry, _) = midranks(y);
    let rho = pearson(&rx, &ry)
        .ok_or_else(|| Error::DegenerateTest("a variable has zero rank variance".into()))?;
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(SpearmanResult {
        rho,
        p_two_sided: p,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]`; the last bin is closed on the
/// right. A constant sample is binned over `[v - 0.5, v + 0.5]`.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            left: lo + i as f64 * width,
            right: if i + 1 == bins {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub x: f64,
    pub density: f64,
}

/// Scott's-rule bandwidth `n^(-1/5) * sd` with the sample standard
/// deviation.
pub fn scott_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    n.powf(-0.2) * var.sqrt()
}

/// Gaussian kernel density estimate evaluated on `grid` evenly spaced
/// points spanning `[min - 3h, max + 3h]`.
pub fn kde(values: &[f64], grid: usize) -> Result<Vec<DensityPoint>> {
    if values.len() < 2 {
        return Err(Error::Insufficient("KDE needs at least two values".into()));
    }
    if grid < 2 {
        return Err(Error::InvalidArgument(
            "KDE grid needs at least two points".into(),
        ));
    }
    let h = scott_bandwidth(values);
    if !(h > 0.0) {
        return Err(Error::DegenerateTest(
            "KDE of a zero-variance sample".into(),
        ));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (grid - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..grid)
        .map(|i| {
            let x = lo + i as f64 * step;
            let density = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
                * norm;
            DensityPoint { x, density }
        })
        .collect())
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["bin_left", "bin_right", "count"])?;
    for b in bins {
        wtr.write_record([b.left.to_string(), b.right.to_string(), b.count.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_kde_csv<W: Write>(points: &[DensityPoint], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "density"])?;
    for p in points {
        wtr.write_record([p.x.to_string(), p.density.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn midranks_share_ties() {
        let (r, ties) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn u_null_counts_small() {
        // C(4,2) = 6 arrangements with U in {0,1,2,2,3,4}.
        assert_eq!(u_null_counts(2, 2), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn separated_pairs_exact() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.method, UTestMethod::Exact);
        assert_abs_diff_eq!(r.p_two_sided, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_samples_center_u() {
        let a = [0.3, 1.7, 2.2, 5.0, 4.1];
        let b = [5.0, 2.2, 0.3, 4.1, 1.7];
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(r.u, 12.5);
        assert_eq!(r.method, UTestMethod::NormalApprox);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn well_separated_large_samples() {
        let a: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..200).map(|i| 1000.0 + i as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(r.p_two_sided < 1e-10, "{}", r.p_two_sided);
        assert!(r.z < 0.0);
    }

    #[test]
    fn all_identical_is_degenerate() {
        assert!(matches!(
            mann_whitney_u(&[1.0, 1.0], &[1.0]),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&x, &[2.0, 4.0, 8.0, 16.0, 32.0]).unwrap().rho, 1.0);
        assert_eq!(spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        let r = spearman(&x, &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r.rho, 0.8, epsilon = 1e-12);
        assert!(r.p_two_sided > 0.0 && r.p_two_sided < 1.0);
        assert!(matches!(
            spearman(&x, &[1.0; 5]),
            Err(Error::DegenerateTest(_))
        ));
        assert!(spearman(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn spearman_p_matches_t_reference() {
        // rho = 0.8, n = 5: t = 0.8 * sqrt(3 / 0.36) = 2.3094, df 3 -> p = 0.1041.
        let r = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        assert_abs_diff_eq!(r.p_two_sided, 0.1041, epsilon = 1e-3);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 2);
        assert_eq!(
            h,
            vec![
                HistogramBin {
                    left: 0.0,
                    right: 1.5,
                    count: 2
                },
                HistogramBin {
                    left: 1.5,
                    right: 3.0,
                    count: 2
                },
            ]
        );
        let single = histogram(&[4.2], 1);
        assert_eq!(single.len(), 1);
        assert!(single[0].left <= 4.2 && 4.2 <= single[0].right);
        assert_eq!(single[0].count, 1);
    }

    #[test]
    fn kde_integrates_to_one() {
        let values = [0.1, 0.5, 0.7, 1.3, 2.2, 2.4, 3.9];
        let pts = kde(&values, 400).unwrap();
        assert!(pts.iter().all(|p| p.density >= 0.0));
        let area: f64 = pts
            .windows(2)
            .map(|w| 0.5 * (w[0].density + w[1].density) * (w[1].x - w[0].x))
            .sum();
        assert_abs_diff_eq!(area, 1.0, epsilon = 0.02);
    }

    #[test]
    fn kde_symmetric_sample() {
        let values = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
        let pts = kde(&values, 101).unwrap();
        for i in 0..pts.len() {
            let j = pts.len() - 1 - i;
            assert_abs_diff_eq!(pts[i].x, -pts[j].x, epsilon = 1e-9);
            assert_abs_diff_eq!(pts[i].density, pts[j].density, epsilon = 1e-6);
        }
    }

    #[test]
    fn kde_zero_variance() {
        assert!(matches!(
            kde(&[1.0, 1.0, 1.0], 10),
            Err(Error::DegenerateTest(_))
        ));
    }

    #[test]
    fn csv_has_header() {
        let mut buf = Vec::new();
        write_histogram_csv(&histogram(&[0.0, 1.0], 1), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n"));
    }
}
