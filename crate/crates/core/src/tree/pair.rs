use alloc::collections::BTreeSet;

use crate::data::{ItemId, RatingMatrix, Scale};
use crate::error::{Error, Result};
use crate::tree::split::RatingView;
use crate::tree::BranchLabel;

/// How the second item of a pair is chosen from the ranked pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PairStrategy {
    /// The two lowest-error items.
    FirstTwo,
    /// The lowest-error item and the pool item most cosine-similar to it.
    FirstPlusMostSimilar,
}

/// Branch of a user given their semi-binary values for the two items of a
/// pair. Equal values (including both missing) are indifferent, a liked item
/// beats anything else, and a rated item beats a missing one.
pub fn pair_branch(first: Option<f64>, second: Option<f64>) -> Result<BranchLabel> {
    for v in [first, second].into_iter().flatten() {
        if !Scale::SemiBinary.admits(v) {
            return Err(Error::NotSemiBinary(v));
        }
    }
    // liked > disliked > missing
    let rank = |v: Option<f64>| match v {
        None => 0,
        Some(x) if x == Scale::DISLIKED => 1,
        Some(_) => 2,
    };
    Ok(match rank(first).cmp(&rank(second)) {
        core::cmp::Ordering::Equal => BranchLabel::Indifferent,
        core::cmp::Ordering::Greater => BranchLabel::PreferFirst,
        core::cmp::Ordering::Less => BranchLabel::PreferSecond,
    })
}

/// Picks the pair to ask from a pool ordered by ascending split error.
pub fn select_pair(
    k: &RatingMatrix,
    pool: &[ItemId],
    strategy: PairStrategy,
) -> Result<(ItemId, ItemId)> {
    if pool.len() < 2 {
        return Err(Error::PoolTooSmall(pool.len()));
    }
    let types: BTreeSet<_> = pool.iter().map(|&i| k.item_type(i)).collect();
    if types.len() != 1 {
        return Err(Error::MixedPoolTypes);
    }
    let view = RatingView::new(k, &BTreeSet::new());
    let dense: alloc::vec::Vec<Option<usize>> = pool
        .iter()
        .map(|i| view.item_index.get(i).copied())
        .collect();
    let second = pick_second(strategy, &dense, |a, b| view.cosine(a, b));
    Ok((pool[0], pool[second]))
}

/// Index into `pool` of the item paired with `pool[0]`. Items absent from the
/// rating view have similarity zero; similarity ties keep pool order.
pub(crate) fn pick_second(
    strategy: PairStrategy,
    pool: &[Option<usize>],
    cosine: impl Fn(usize, usize) -> f64,
) -> usize {
    match strategy {
        PairStrategy::FirstTwo => 1,
        PairStrategy::FirstPlusMostSimilar => {
            let mut best = (1, f64::NEG_INFINITY);
            for (pos, other) in pool.iter().enumerate().skip(1) {
                let sim = match (pool[0], *other) {
                    (Some(a), Some(b)) => cosine(a, b),
                    _ => 0.0,
                };
                if sim > best.1 {
                    best = (pos, sim);
                }
            }
            best.0
        }
    }
}
