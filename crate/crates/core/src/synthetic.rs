//! Synthetic rating logs with planted latent structure.
//!
//! Users and items live in a shared latent space. Every artist belongs to one
//! genre and its latent vector is pulled towards that genre's centre, and the
//! genre item itself sits at the centre. A user's genre rating is therefore a
//! noisy summary of how they rate the genre's artists.
//!
//! Which cells are observed is not uniform: item popularity is long-tailed,
//! user activity varies, and users are more likely to rate items they like.

use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{ItemId, ItemType, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_artists: usize,
    pub n_genres: usize,
    pub n_factors: usize,
    /// Fraction of user × item cells that carry a rating.
    pub density: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_users: 500,
            n_artists: 300,
            n_genres: 30,
            n_factors: 8,
            density: 0.3,
            noise_sd: 5.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.n_users == 0 || self.n_artists == 0 || self.n_genres == 0 {
            return bad("n_users, n_artists and n_genres must be at least 1");
        }
        if self.n_factors == 0 {
            return bad("n_factors must be at least 1");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        Ok(())
    }

    pub fn n_items(&self) -> usize {
        self.n_artists + self.n_genres
    }

    /// Number of ratings a generated matrix holds.
    pub fn n_observed(&self) -> usize {
        libm::round(self.density * (self.n_users * self.n_items()) as f64) as usize
    }
}

/// Generated ratings together with the latent vectors that produced them.
///
/// Item ids `0..n_artists` are artists, the following `n_genres` ids are
/// genres. Before noise and clipping, the rating of user `u` for item `i` is
/// exactly `dot(user_vectors[u], item_vectors[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub ratings: RatingMatrix,
    pub user_vectors: Vec<Vec<f64>>,
    pub item_vectors: Vec<Vec<f64>>,
    /// Genre item id of each artist.
    pub genre_of: Vec<ItemId>,
}

const RATING_MIDPOINT: f64 = 50.0;
const AFFINITY_SPREAD: f64 = 25.0;
const USER_BIAS_SD: f64 = 8.0;
const ITEM_BIAS_SD: f64 = 8.0;
const GENRE_PULL: f64 = 0.8;
const ARTIST_JITTER: f64 = 0.6;
const POPULARITY_EXPONENT: f64 = 0.8;
const ACTIVITY_SD: f64 = 0.4;
const LIKING_PROPENSITY: f64 = 1.0;
const GENRE_POPULARITY_BOOST: f64 = 4.0;

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let f = cfg.n_factors;
    let gauss = |rng: &mut rng::Rng| -> f64 { StandardNormal.sample(rng) };

    let centres: Vec<Vec<f64>> = (0..cfg.n_genres)
        .map(|_| (0..f).map(|_| gauss(&mut rng)).collect())
        .collect();

    let genre_of: Vec<ItemId> = (0..cfg.n_artists)
        .map(|a| ItemId((cfg.n_artists + a % cfg.n_genres) as u32))
        .collect();

    // Latent parts of the item vectors: artists are pulled to their genre.
    let mut latent_items: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_items());
    for a in 0..cfg.n_artists {
        let c = &centres[a % cfg.n_genres];
        latent_items.push(
            c.iter()
                .map(|&x| GENRE_PULL * x + ARTIST_JITTER * gauss(&mut rng))
                .collect(),
        );
    }
    latent_items.extend(centres.iter().cloned());

    let scale = AFFINITY_SPREAD / libm::sqrt(f as f64);
    let item_vectors: Vec<Vec<f64>> = latent_items
        .iter()
        .map(|q| {
            let mut v = Vec::with_capacity(f + 2);
            v.push(1.0);
            v.push(ITEM_BIAS_SD * gauss(&mut rng));
            v.extend_from_slice(q);
            v
        })
        .collect();
    let user_vectors: Vec<Vec<f64>> = (0..cfg.n_users)
        .map(|_| {
            let mut v = Vec::with_capacity(f + 2);
            v.push(RATING_MIDPOINT + USER_BIAS_SD * gauss(&mut rng));
            v.push(1.0);
            v.extend((0..f).map(|_| scale * gauss(&mut rng)));
            v
        })
        .collect();

    // Long-tailed item popularity over a random ranking of the artists.
    let mut ranks: Vec<usize> = (0..cfg.n_artists).collect();
    rand::seq::SliceRandom::shuffle(ranks.as_mut_slice(), &mut rng);
    let mut popularity: Vec<f64> = ranks
        .iter()
        .map(|&r| libm::pow(r as f64 + 1.0, -POPULARITY_EXPONENT))
        .collect();
    popularity.extend(core::iter::repeat(GENRE_POPULARITY_BOOST).take(cfg.n_genres));
    let activity: Vec<f64> = (0..cfg.n_users)
        .map(|_| libm::exp(ACTIVITY_SD * gauss(&mut rng)))
        .collect();

    // Weighted sampling of exactly `n_observed` cells without replacement:
    // keep the largest keys ln(U) / w.
    let noise = Normal::new(0.0, cfg.noise_sd)
        .map_err(|_| Error::InvalidArgument("noise_sd".into()))?;
    let mut cells: Vec<(f64, u32, u32, f64)> = Vec::with_capacity(cfg.n_users * cfg.n_items());
    for (u, uv) in user_vectors.iter().enumerate() {
        for (i, iv) in item_vectors.iter().enumerate() {
            let affinity = dot(&uv[2..], &iv[2..]) / AFFINITY_SPREAD;
            let weight =
                activity[u] * popularity[i] * libm::exp(LIKING_PROPENSITY * affinity);
            let uniform = 1.0 - rng.random::<f64>();
            let key = libm::log(uniform) / weight;
            let rating = (dot(uv, iv) + noise.sample(&mut rng)).clamp(0.0, 100.0);
            cells.push((key, u as u32, i as u32, rating));
        }
    }
    let n_obs = cfg.n_observed().min(cells.len());
    if n_obs < cells.len() {
        cells.select_nth_unstable_by(n_obs, |a, b| b.0.total_cmp(&a.0));
        cells.truncate(n_obs);
    }

    let mut ratings = RatingMatrix::new(Scale::Raw);
    for i in 0..cfg.n_items() {
        let t = if i < cfg.n_artists {
            ItemType::Artist
        } else {
            ItemType::Genre
        };
        ratings.declare_item(ItemId(i as u32), t)?;
    }
    for &(_, u, i, r) in &cells {
        ratings.insert(UserId(u), ItemId(i), r)?;
    }

    Ok(SyntheticData {
        ratings,
        user_vectors,
        item_vectors,
        genre_of,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
