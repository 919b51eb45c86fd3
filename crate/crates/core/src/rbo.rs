//! Rank-biased overlap between two rankings.
//!
//! Agreement at depth `d` is `X_d / d` where `X_d` is the size of the
//! intersection of the two length-`d` prefixes. RBO weights depth `d` by
//! `p^(d-1)`, so a persistence `p` close to 1 looks further down the lists.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERSISTENCE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RboVariant {
    /// Point estimate that extrapolates the agreement at the last depth.
    #[default]
    Ext,
    /// Lower bound assuming no agreement beyond the evaluated depth.
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboConfig {
    pub p: f64,
    /// Evaluation depth; `None` uses the full list length.
    pub depth: Option<usize>,
    pub variant: RboVariant,
}

impl Default for RboConfig {
    fn default() -> Self {
        Self {
            p: DEFAULT_PERSISTENCE,
            depth: None,
            variant: RboVariant::Ext,
        }
    }
}

impl RboConfig {
    pub fn with_p(p: f64) -> Self {
        Self {
            p,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "RBO persistence must lie in (0, 1), got {}",
                self.p
            )));
        }
        if self.depth == Some(0) {
            return Err(Error::InvalidArgument("RBO depth must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_unique<T: Eq + Hash + std::fmt::Debug>(list: &[T]) -> Result<()> {
    let mut seen = HashSet::with_capacity(list.len());
    for item in list {
        if !seen.insert(item) {
            return Err(Error::MalformedRanking(format!("{item:?}")));
        }
    }
    Ok(())
}

/// Prefix overlaps `X_1..=X_k`, maintained with a running counter.
fn prefix_overlaps<T: Eq + Hash>(s: &[T], t: &[T], k: usize) -> Vec<usize> {
    let mut seen_s = HashSet::with_capacity(k);
    let mut seen_t = HashSet::with_capacity(k);
    let mut overlap = 0;
    let mut out = Vec::with_capacity(k);
    for (a, b) in s.iter().zip(t).take(k) {
        if a == b {
            overlap += 1;
        } else {
            if seen_t.contains(a) {
                overlap += 1;
            }
            if seen_s.contains(b) {
                overlap += 1;
            }
        }
        seen_s.insert(a);
        seen_t.insert(b);
        out.push(overlap);
    }
    out
}

/// RBO between two equal-length, duplicate-free rankings.
pub fn rbo<T: Eq + Hash + std::fmt::Debug>(s: &[T], t: &[T], config: &RboConfig) -> Result<f64> {
    config.validate()?;
    if s.len() != t.len() {
        return Err(Error::InvalidArgument(format!(
            "rankings must have equal length ({} vs {})",
            s.len(),
            t.len()
        )));
    }
    check_unique(s)?;
    check_unique(t)?;
    let k = config.depth.map_or(s.len(), |d| d.min(s.len()));
    if k == 0 {
        // Two empty rankings agree trivially.
        return Ok(1.0);
    }
    let p = config.p;
    let overlaps = prefix_overlaps(s, t, k);
    let x_k = overlaps[k - 1] as f64;

    let value = match config.variant {
        RboVariant::Ext => {
            let mut weighted = 0.0;
            let mut pd = 1.0;
            for (i, &x) in overlaps.iter().enumerate() {
                pd *= p;
                weighted += x as f64 / (i + 1) as f64 * pd;
            }
            x_k / k as f64 * pd + (1.0 - p) / p * weighted
        }
        RboVariant::Min => {
            let mut weighted = 0.0;
            let mut pd = 1.0;
            for (i, &x) in overlaps.iter().enumerate() {
                pd *= p;
                weighted += (x as f64 - x_k) * pd / (i + 1) as f64;
            }
            (1.0 - p) / p * (weighted - x_k * (1.0 - p).ln())
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Extrapolated RBO; the variant in `config` is ignored.
pub fn rbo_ext<T: Eq + Hash + std::fmt::Debug>(
    s: &[T],
    t: &[T],
    config: &RboConfig,
) -> Result<f64> {
    let cfg = RboConfig {
        variant: RboVariant::Ext,
        ..*config
    };
    rbo(s, t, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_lists_score_one() {
        let s: Vec<u32> = (0..37).collect();
        for p in [0.5, 0.9, 0.98] {
            assert_abs_diff_eq!(
                rbo_ext(&s, &s, &RboConfig::with_p(p)).unwrap(),
                1.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn swapped_head() {
        let v = rbo_ext(&["a", "b", "c"], &["b", "a", "c"], &RboConfig::with_p(0.9)).unwrap();
        assert_abs_diff_eq!(v, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_lists_score_zero() {
        let v = rbo_ext(&["a", "b", "c"], &["x", "y", "z"], &RboConfig::default()).unwrap();
        assert_eq!(v, 0.0);
        let cfg = RboConfig {
            variant: RboVariant::Min,
            ..RboConfig::default()
        };
        assert_eq!(rbo(&["a", "b"], &["x", "y"], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn rejects_duplicates_and_length_mismatch() {
        let cfg = RboConfig::default();
        assert!(matches!(
            rbo_ext(&["a", "a"], &["a", "b"], &cfg),
            Err(Error::MalformedRanking(_))
        ));
        assert!(matches!(
            rbo_ext(&["a"], &["a", "b"], &cfg),
            Err(Error::InvalidArgument(_))
        ));
        assert!(rbo_ext(&["a"], &["a"], &RboConfig::with_p(1.0)).is_err());
    }

    #[test]
    fn depth_truncates() {
        let cfg = RboConfig {
            depth: Some(1),
            ..RboConfig::default()
        };
        // Only the first position is compared.
        assert_eq!(rbo_ext(&["a", "b"], &["a", "c"], &cfg).unwrap(), 1.0);
    }

    #[test]
    fn min_variant_is_a_lower_bound() {
        let s = ["a", "b", "c", "d", "e"];
        let t = ["b", "a", "d", "c", "e"];
        let ext = rbo_ext(&s, &t, &RboConfig::default()).unwrap();
        let min = rbo(
            &s,
            &t,
            &RboConfig {
                variant: RboVariant::Min,
                ..RboConfig::default()
            },
        )
        .unwrap();
        assert!(min <= ext);
        assert!(min > 0.0);
    }
}
