//! Density filtering, cold/warm user split, and the known / pool / test
//! partition that drives an elicitation run.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{ItemType, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};
use crate::rng;

/// Removes users and items below their rating-count thresholds, repeating
/// until nothing changes.
///
/// Item types without an entry in `min_ratings_per_type` have no threshold.
/// The result is the largest sub-matrix in which every threshold holds.
pub fn filter_density(
    m: &RatingMatrix,
    min_user_ratings: usize,
    min_ratings_per_type: &BTreeMap<ItemType, usize>,
) -> Result<RatingMatrix> {
    expect_scale(m, Scale::Raw)?;
    let mut out = m.clone();
    loop {
        let before = (out.len(), out.item_types().len());

        let item_counts = out.item_counts();
        out.retain_items(|item, t| {
            let need = min_ratings_per_type.get(&t).copied().unwrap_or(0);
            item_counts.get(&item).copied().unwrap_or(0) >= need
        });

        let user_counts = out.user_counts();
        out.retain(|u, _, _| user_counts[&u] >= min_user_ratings);

        if (out.len(), out.item_types().len()) == before {
            return Ok(out);
        }
    }
}

/// Splits users into cold and warm at random; returns `(cold, warm)`.
///
/// Exactly `round(cold_fraction * |users|)` users end up cold and every user
/// keeps all of their ratings on one side.
pub fn split_users(
    m: &RatingMatrix,
    cold_fraction: f64,
    seed: u64,
) -> Result<(RatingMatrix, RatingMatrix)> {
    if !(0.0..=1.0).contains(&cold_fraction) {
        return Err(Error::InvalidArgument(alloc::format!(
            "cold_fraction must lie in [0, 1], got {cold_fraction}"
        )));
    }
    let mut users: Vec<UserId> = m.users().into_iter().collect();
    users.shuffle(&mut rng::seeded(seed));
    let n_cold = libm::round(cold_fraction * users.len() as f64) as usize;
    let cold: BTreeSet<UserId> = users[..n_cold].iter().copied().collect();
    let warm: BTreeSet<UserId> = users[n_cold..].iter().copied().collect();
    Ok((m.restrict_users(&cold), m.restrict_users(&warm)))
}

/// The three disjoint rating sets carved out of the cold users' logs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReSplit {
    pub known: RatingMatrix,
    pub pool: RatingMatrix,
    pub test: RatingMatrix,
    /// Users that lacked `k_per_user + t_per_user` target-type ratings.
    pub dropped: BTreeSet<UserId>,
}

/// Per cold user: `k_per_user` random target ratings become known,
/// `t_per_user` further ones become test, everything else (all types) forms
/// the elicitation pool. Users without enough target ratings are dropped.
pub fn re_split(
    cold: &RatingMatrix,
    k_per_user: usize,
    t_per_user: usize,
    target_type: ItemType,
    seed: u64,
) -> Result<ReSplit> {
    let mut rng = rng::seeded(seed);
    let mut out = ReSplit {
        known: cold.empty_like(),
        pool: cold.empty_like(),
        test: cold.empty_like(),
        dropped: BTreeSet::new(),
    };
    for user in cold.users() {
        let (mut target, other): (Vec<_>, Vec<_>) = cold
            .user_ratings(user)
            .partition(|&(i, _)| cold.item_type(i) == Some(target_type));
        if target.len() < k_per_user + t_per_user {
            log::debug!(
                "dropping cold user {user}: {} {target_type} ratings, need {}",
                target.len(),
                k_per_user + t_per_user
            );
            out.dropped.insert(user);
            continue;
        }
        target.shuffle(&mut rng);
        let (known, rest) = target.split_at(k_per_user);
        let (test, pool) = rest.split_at(t_per_user);
        for &(i, v) in known {
            out.known.insert(user, i, v)?;
        }
        for &(i, v) in test {
            out.test.insert(user, i, v)?;
        }
        for &(i, v) in pool.iter().chain(other.iter()) {
            out.pool.insert(user, i, v)?;
        }
    }
    if !out.dropped.is_empty() {
        log::warn!(
            "dropped {} cold users with fewer than {} {target_type} ratings",
            out.dropped.len(),
            k_per_user + t_per_user
        );
    }
    Ok(out)
}

/// Maps raw ratings to the semi-binary scale: at or above `threshold` becomes
/// liked, below becomes disliked, absent entries stay absent.
pub fn semi_binarize(m: &RatingMatrix, threshold: f64) -> Result<RatingMatrix> {
    expect_scale(m, Scale::Raw)?;
    m.map_values(Scale::SemiBinary, |v| {
        if v >= threshold {
            Scale::LIKED
        } else {
            Scale::DISLIKED
        }
    })
}

pub(crate) fn expect_scale(m: &RatingMatrix, expected: Scale) -> Result<()> {
    if m.scale() == expected {
        Ok(())
    } else {
        Err(Error::ScaleMismatch {
            expected,
            found: m.scale(),
        })
    }
}

/// Parameters of the cold/warm split and the per-user known/test carve-out.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SplitConfig {
    pub cold_fraction: f64,
    pub k_per_user: usize,
    pub t_per_user: usize,
    pub target_type: ItemType,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            cold_fraction: 0.9,
            k_per_user: 1,
            t_per_user: 30,
            target_type: ItemType::Artist,
            seed: 0,
        }
    }
}

/// Mutable state of an elicitation run.
///
/// `known` holds the warm users' full logs plus the cold users' seed ratings;
/// `pool` and `test` hold cold users' ratings only.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionState {
    pub known: RatingMatrix,
    pub pool: RatingMatrix,
    pub test: RatingMatrix,
    pub cold_users: BTreeSet<UserId>,
    pub warm_users: BTreeSet<UserId>,
}

impl PartitionState {
    /// Splits `m` into cold and warm users, carves known/pool/test out of the
    /// cold logs and folds the warm logs into `known`.
    pub fn build(m: &RatingMatrix, cfg: &SplitConfig) -> Result<Self> {
        let (cold, warm) = split_users(m, cfg.cold_fraction, rng::derive_seed(cfg.seed, 1))?;
        let split = re_split(
            &cold,
            cfg.k_per_user,
            cfg.t_per_user,
            cfg.target_type,
            rng::derive_seed(cfg.seed, 2),
        )?;
        let cold_users = cold
            .users()
            .difference(&split.dropped)
            .copied()
            .collect();
        let warm_users = warm.users();
        let mut known = split.known;
        known.absorb(&warm)?;
        Ok(PartitionState {
            known,
            pool: split.pool,
            test: split.test,
            cold_users,
            warm_users,
        })
    }

    /// The same partition with every rating mapped to the semi-binary scale.
    pub fn semi_binarized(&self, threshold: f64) -> Result<Self> {
        Ok(PartitionState {
            known: semi_binarize(&self.known, threshold)?,
            pool: semi_binarize(&self.pool, threshold)?,
            test: semi_binarize(&self.test, threshold)?,
            cold_users: self.cold_users.clone(),
            warm_users: self.warm_users.clone(),
        })
    }

    pub fn scale(&self) -> Scale {
        self.known.scale()
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation found.
    pub fn audit(&self) -> core::result::Result<(), alloc::string::String> {
        for (u, i) in self.pool.keys() {
            if self.known.contains(u, i) || self.test.contains(u, i) {
                return Err(alloc::format!("pool key ({u}, {i}) also in known or test"));
            }
            if !self.cold_users.contains(&u) {
                return Err(alloc::format!("pool holds non-cold user {u}"));
            }
        }
        for (u, i) in self.test.keys() {
            if self.known.contains(u, i) {
                return Err(alloc::format!("test key ({u}, {i}) also in known"));
            }
            if !self.cold_users.contains(&u) {
                return Err(alloc::format!("test holds non-cold user {u}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ItemId;

    fn matrix(rows: &[(u32, u32, f64)]) -> RatingMatrix {
        let mut m = RatingMatrix::new(Scale::Raw);
        for &(u, i, v) in rows {
            m.insert_typed(UserId(u), ItemId(i), ItemType::Artist, v)
                .unwrap();
        }
        m
    }

    #[test]
    fn zero_thresholds_are_identity() {
        let m = matrix(&[(0, 0, 1.0), (1, 1, 2.0), (1, 2, 3.0)]);
        assert_eq!(filter_density(&m, 0, &BTreeMap::new()).unwrap(), m);
    }

    #[test]
    fn filter_cascades_to_fixed_point() {
        // u0: a b c, u1: a b, u2: c d; users >= 2, artists >= 2.
        // Pass 1 drops d, which leaves u2 with one rating; dropping u2 leaves
        // c with one rating. Fixed point: {u0, u1} x {a, b}.
        let m = matrix(&[
            (0, 0, 10.0),
            (0, 1, 20.0),
            (0, 2, 30.0),
            (1, 0, 40.0),
            (1, 1, 50.0),
            (2, 2, 60.0),
            (2, 3, 70.0),
        ]);
        let thresholds = BTreeMap::from([(ItemType::Artist, 2)]);
        let f = filter_density(&m, 2, &thresholds).unwrap();
        let keys: Vec<_> = f.keys().map(|(u, i)| (u.0, i.0)).collect();
        assert_eq!(keys, [(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(f.item_types().len(), 2);
    }

    #[test]
    fn filter_rejects_semi_binary_input() {
        let m = semi_binarize(&matrix(&[(0, 0, 60.0)]), 50.0).unwrap();
        assert!(matches!(
            filter_density(&m, 0, &BTreeMap::new()),
            Err(Error::ScaleMismatch { .. })
        ));
    }

    #[test]
    fn split_users_edge_fractions() {
        let m = matrix(&[(0, 0, 1.0), (1, 0, 2.0), (2, 0, 3.0), (3, 1, 4.0)]);
        let (cold, warm) = split_users(&m, 0.0, 7).unwrap();
        assert!(cold.is_empty());
        assert_eq!(warm, m);
        let (cold, warm) = split_users(&m, 1.0, 7).unwrap();
        assert_eq!(cold, m);
        assert!(warm.is_empty());
        assert!(split_users(&m, 1.5, 7).is_err());
    }

    #[test]
    fn split_users_counts_and_determinism() {
        let rows: Vec<_> = (0..20).map(|u| (u, u % 3, 50.0)).collect();
        let m = matrix(&rows);
        let (c1, w1) = split_users(&m, 0.9, 42).unwrap();
        let (c2, w2) = split_users(&m, 0.9, 42).unwrap();
        assert_eq!(c1.users().len(), 18);
        assert_eq!(w1.users().len(), 2);
        assert_eq!((c1, w1), (c2, w2));
    }

    #[test]
    fn re_split_boundary_user_has_only_non_target_pool() {
        let mut m = RatingMatrix::new(Scale::Raw);
        for i in 0..3 {
            m.insert_typed(UserId(0), ItemId(i), ItemType::Artist, 70.0)
                .unwrap();
        }
        m.insert_typed(UserId(0), ItemId(10), ItemType::Genre, 30.0)
            .unwrap();
        let s = re_split(&m, 1, 2, ItemType::Artist, 3).unwrap();
        assert_eq!(s.known.len(), 1);
        assert_eq!(s.test.len(), 2);
        let pool: Vec<_> = s.pool.keys().collect();
        assert_eq!(pool, [(UserId(0), ItemId(10))]);
    }

    #[test]
    fn re_split_drops_short_users() {
        let m = matrix(&[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]);
        let s = re_split(&m, 1, 1, ItemType::Artist, 0).unwrap();
        assert_eq!(s.dropped, BTreeSet::from([UserId(1)]));
        assert!(s.known.users().iter().all(|&u| u == UserId(0)));
    }

    #[test]
    fn semi_binarize_boundaries() {
        let m = matrix(&[(0, 0, 50.0), (0, 1, 49.999), (1, 0, 100.0), (1, 2, 0.0)]);
        let b = semi_binarize(&m, 50.0).unwrap();
        assert_eq!(b.scale(), Scale::SemiBinary);
        assert_eq!(b.get(UserId(0), ItemId(0)), Some(1.0));
        assert_eq!(b.get(UserId(0), ItemId(1)), Some(0.01));
        assert_eq!(b.get(UserId(1), ItemId(0)), Some(1.0));
        assert_eq!(b.get(UserId(1), ItemId(2)), Some(0.01));
        assert_eq!(b.get(UserId(1), ItemId(1)), None);
        assert!(b.keys().eq(m.keys()));
        assert!(matches!(
            semi_binarize(&b, 50.0),
            Err(Error::ScaleMismatch { .. })
        ));
    }
}
