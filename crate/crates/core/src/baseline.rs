//! Non-personalized elicitation orders: every user is offered the same
//! ranked list of items.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ItemId, RatingMatrix};
use crate::error::{Error, Result};

/// Items ordered by descending score; equal scores keep ascending item id.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticRanking {
    pub items: Vec<ItemId>,
    pub scores: BTreeMap<ItemId, f64>,
}

impl StaticRanking {
    fn from_scores(scores: BTreeMap<ItemId, f64>) -> Self {
        let mut items: Vec<ItemId> = scores.keys().copied().collect();
        // partial_cmp treats -0.0 and 0.0 as equal; scores are never NaN
        items.sort_by(|a, b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(b))
        });
        StaticRanking { items, scores }
    }

    pub fn score(&self, item: ItemId) -> Option<f64> {
        self.scores.get(&item).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Heuristic {
    Popularity,
    Variance,
    Entropy,
    Helf,
}

impl Heuristic {
    pub fn rank(self, k: &RatingMatrix, candidates: &[ItemId], bins: usize) -> Result<StaticRanking> {
        match self {
            Heuristic::Popularity => rank_popularity(k, candidates),
            Heuristic::Variance => rank_variance(k, candidates),
            Heuristic::Entropy => rank_entropy(k, candidates, bins),
            Heuristic::Helf => rank_helf(k, candidates, bins),
        }
    }
}

fn columns(
    k: &RatingMatrix,
    candidates: &[ItemId],
) -> Result<BTreeMap<ItemId, Vec<f64>>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let wanted: BTreeSet<ItemId> = candidates.iter().copied().collect();
    let mut cols: BTreeMap<ItemId, Vec<f64>> =
        wanted.iter().map(|&i| (i, Vec::new())).collect();
    for (_, i, v) in k.iter() {
        if let Some(col) = cols.get_mut(&i) {
            col.push(v);
        }
    }
    Ok(cols)
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidArgument("bins must be at least 2".into()));
    }
    Ok(())
}

/// Score: number of ratings.
pub fn rank_popularity(k: &RatingMatrix, candidates: &[ItemId]) -> Result<StaticRanking> {
    let cols = columns(k, candidates)?;
    Ok(StaticRanking::from_scores(
        cols.into_iter().map(|(i, c)| (i, c.len() as f64)).collect(),
    ))
}

/// Score: population variance of the ratings, zero below two ratings.
pub fn rank_variance(k: &RatingMatrix, candidates: &[ItemId]) -> Result<StaticRanking> {
    let cols = columns(k, candidates)?;
    Ok(StaticRanking::from_scores(
        cols.into_iter().map(|(i, c)| (i, variance(&c))).collect(),
    ))
}

fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for (n, &x) in values.iter().enumerate() {
        let d = x - mean;
        mean += d / (n + 1) as f64;
        m2 += d * (x - mean);
    }
    (m2 / values.len() as f64).max(0.0)
}

/// Score: Shannon entropy (bits) of the ratings over `bins` equal-width bins
/// spanning the matrix's scale.
pub fn rank_entropy(k: &RatingMatrix, candidates: &[ItemId], bins: usize) -> Result<StaticRanking> {
    check_bins(bins)?;
    let cols = columns(k, candidates)?;
    let (lo, hi) = k.scale().bounds();
    Ok(StaticRanking::from_scores(
        cols.into_iter()
            .map(|(i, c)| (i, entropy(&c, bins, lo, hi)))
            .collect(),
    ))
}

fn entropy(values: &[f64], bins: usize, lo: f64, hi: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut hist = vec![0usize; bins];
    for &v in values {
        let b = libm::floor((v - lo) / (hi - lo) * bins as f64) as isize;
        hist[b.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let n = values.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum()
}

/// Score: harmonic mean of normalized entropy `H / log2(bins)` and
/// log-frequency `ln(1 + n) / ln(1 + max n)`, the maximum taken over the
/// candidates.
pub fn rank_helf(k: &RatingMatrix, candidates: &[ItemId], bins: usize) -> Result<StaticRanking> {
    check_bins(bins)?;
    let cols = columns(k, candidates)?;
    let (lo, hi) = k.scale().bounds();
    let max_freq = cols.values().map(Vec::len).max().unwrap_or(0);
    let log_max = libm::log(1.0 + max_freq as f64);
    let h_max = libm::log2(bins as f64);
    Ok(StaticRanking::from_scores(
        cols.into_iter()
            .map(|(i, c)| {
                let lf = if log_max > 0.0 {
                    libm::log(1.0 + c.len() as f64) / log_max
                } else {
                    0.0
                };
                let h = entropy(&c, bins, lo, hi) / h_max;
                let score = if lf + h > 0.0 {
                    2.0 * lf * h / (lf + h)
                } else {
                    0.0
                };
                (i, score)
            })
            .collect(),
    ))
}
