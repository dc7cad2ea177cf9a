//! Biased matrix factorization trained by stochastic gradient descent.
//!
//! Predictions are `global_mean + b_u + b_i + p_u · q_i`. Training works on
//! ratings rescaled to `[0, 1]` by the matrix's scale bounds so the same
//! hyperparameters behave alike on raw and semi-binary data; predictions are
//! mapped back and clamped to the scale.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::data::{ItemId, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MfHyperparams {
    pub factors: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub epochs: usize,
    pub init_sd: f64,
    pub seed: u64,
}

impl Default for MfHyperparams {
    fn default() -> Self {
        MfHyperparams {
            factors: 20,
            learning_rate: 0.005,
            l2_reg: 0.02,
            epochs: 50,
            init_sd: 0.1,
            seed: 0,
        }
    }
}

impl MfHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.factors == 0 {
            return bad("factors must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return bad("l2_reg must be non-negative");
        }
        if !(self.init_sd >= 0.0 && self.init_sd.is_finite()) {
            return bad("init_sd must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MfModel {
    factors: usize,
    scale: Scale,
    /// Mean of the normalized training ratings.
    global_mean: f64,
    users: BTreeMap<UserId, usize>,
    items: BTreeMap<ItemId, usize>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    /// Row-major, `factors` values per user.
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
}

/// A training rating resolved to dense indices, value normalized.
#[derive(Clone, Copy)]
struct Example {
    user: usize,
    item: usize,
    value: f64,
}

impl MfModel {
    /// Fits a model on `known` from scratch.
    pub fn fit(known: &RatingMatrix, hp: &MfHyperparams) -> Result<Self> {
        Self::fit_observed(known, hp, |_, _| {})
    }

    /// Like [`MfModel::fit`], calling `on_epoch(epoch, &model)` after every
    /// completed epoch.
    pub fn fit_observed(
        known: &RatingMatrix,
        hp: &MfHyperparams,
        mut on_epoch: impl FnMut(usize, &MfModel),
    ) -> Result<Self> {
        hp.validate()?;
        if known.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let mut model = Self::initialize(known, hp)?;
        let mut examples = model.examples(known);
        let mut rng = rng::seeded(rng::derive_seed(hp.seed, 0x5eed));
        for epoch in 0..hp.epochs {
            examples.shuffle(&mut rng);
            for ex in &examples {
                model.sgd_step(ex, hp.learning_rate, hp.l2_reg);
            }
            on_epoch(epoch, &model);
        }
        Ok(model)
    }

    fn initialize(known: &RatingMatrix, hp: &MfHyperparams) -> Result<Self> {
        let scale = known.scale();
        let users: BTreeMap<UserId, usize> = known
            .users()
            .into_iter()
            .enumerate()
            .map(|(k, u)| (u, k))
            .collect();
        let items: BTreeMap<ItemId, usize> = known
            .rated_items()
            .into_iter()
            .enumerate()
            .map(|(k, i)| (i, k))
            .collect();
        let total: f64 = known.iter().map(|(_, _, v)| normalize(scale, v)).sum();
        let global_mean = total / known.len() as f64;

        let init = Normal::new(0.0, hp.init_sd)
            .map_err(|_| Error::InvalidArgument("init_sd".into()))?;
        let mut rng = rng::seeded(hp.seed);
        let f = hp.factors;
        let user_factors = (0..users.len() * f).map(|_| init.sample(&mut rng)).collect();
        let item_factors = (0..items.len() * f).map(|_| init.sample(&mut rng)).collect();
        Ok(MfModel {
            factors: f,
            scale,
            global_mean,
            user_bias: vec![0.0; users.len()],
            item_bias: vec![0.0; items.len()],
            users,
            items,
            user_factors,
            item_factors,
        })
    }

    fn examples(&self, known: &RatingMatrix) -> Vec<Example> {
        known
            .iter()
            .map(|(u, i, v)| Example {
                user: self.users[&u],
                item: self.items[&i],
                value: normalize(self.scale, v),
            })
            .collect()
    }

    fn sgd_step(&mut self, ex: &Example, lr: f64, reg: f64) {
        let f = self.factors;
        let err = ex.value - self.dense_predict(ex.user, ex.item);
        let bu = &mut self.user_bias[ex.user];
        *bu += lr * (err - reg * *bu);
        let bi = &mut self.item_bias[ex.item];
        *bi += lr * (err - reg * *bi);
        let p = &mut self.user_factors[ex.user * f..(ex.user + 1) * f];
        let q = &mut self.item_factors[ex.item * f..(ex.item + 1) * f];
        for (pk, qk) in p.iter_mut().zip(q.iter_mut()) {
            let (p0, q0) = (*pk, *qk);
            *pk += lr * (err * q0 - reg * p0);
            *qk += lr * (err * p0 - reg * q0);
        }
    }

    fn dense_predict(&self, user: usize, item: usize) -> f64 {
        let f = self.factors;
        let p = &self.user_factors[user * f..(user + 1) * f];
        let q = &self.item_factors[item * f..(item + 1) * f];
        self.global_mean
            + self.user_bias[user]
            + self.item_bias[item]
            + p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Unclamped prediction on the normalized scale. Unknown users or items
    /// contribute only the bias terms that exist.
    fn normalized_predict(&self, user: UserId, item: ItemId) -> f64 {
        match (self.users.get(&user), self.items.get(&item)) {
            (Some(&u), Some(&i)) => self.dense_predict(u, i),
            (Some(&u), None) => self.global_mean + self.user_bias[u],
            (None, Some(&i)) => self.global_mean + self.item_bias[i],
            (None, None) => self.global_mean,
        }
    }

    /// Predicted rating on the training scale, clamped to its bounds.
    pub fn predict(&self, user: UserId, item: ItemId) -> f64 {
        self.scale
            .clamp(denormalize(self.scale, self.normalized_predict(user, item)))
    }

    /// Root mean squared error of [`MfModel::predict`] over `test`.
    pub fn evaluate_rmse(&self, test: &RatingMatrix) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::EmptyTest);
        }
        let sse: f64 = test
            .iter()
            .map(|(u, i, r)| {
                let d = r - self.predict(u, i);
                d * d
            })
            .sum();
        Ok(libm::sqrt(sse / test.len() as f64))
    }

    /// Training objective on the normalized scale:
    /// `Σ (r − r̂)² + l2_reg · (b_u² + b_i² + ‖p_u‖² + ‖q_i‖²)`, summed over
    /// the ratings in `known`. Ratings of users or items the model has never
    /// seen are skipped.
    pub fn objective(&self, known: &RatingMatrix, l2_reg: f64) -> f64 {
        let f = self.factors;
        self.resolvable(known)
            .map(|ex| {
                let err = ex.value - self.dense_predict(ex.user, ex.item);
                let p = &self.user_factors[ex.user * f..(ex.user + 1) * f];
                let q = &self.item_factors[ex.item * f..(ex.item + 1) * f];
                let (bu, bi) = (self.user_bias[ex.user], self.item_bias[ex.item]);
                let norms = bu * bu
                    + bi * bi
                    + p.iter().map(|x| x * x).sum::<f64>()
                    + q.iter().map(|x| x * x).sum::<f64>();
                err * err + l2_reg * norms
            })
            .sum()
    }

    /// Analytic gradient of [`MfModel::objective`], laid out like
    /// [`MfModel::parameters`].
    pub fn gradient(&self, known: &RatingMatrix, l2_reg: f64) -> Vec<f64> {
        let f = self.factors;
        let (nu, ni) = (self.users.len(), self.items.len());
        let mut g = vec![0.0; self.parameter_count()];
        let (g_ub, rest) = g.split_at_mut(nu);
        let (g_ib, rest) = rest.split_at_mut(ni);
        let (g_pu, g_qi) = rest.split_at_mut(nu * f);
        for ex in self.resolvable(known) {
            let err = ex.value - self.dense_predict(ex.user, ex.item);
            g_ub[ex.user] += -2.0 * err + 2.0 * l2_reg * self.user_bias[ex.user];
            g_ib[ex.item] += -2.0 * err + 2.0 * l2_reg * self.item_bias[ex.item];
            for k in 0..f {
                let p = self.user_factors[ex.user * f + k];
                let q = self.item_factors[ex.item * f + k];
                g_pu[ex.user * f + k] += -2.0 * err * q + 2.0 * l2_reg * p;
                g_qi[ex.item * f + k] += -2.0 * err * p + 2.0 * l2_reg * q;
            }
        }
        g
    }

    fn resolvable<'a>(&'a self, known: &'a RatingMatrix) -> impl Iterator<Item = Example> + 'a {
        known.iter().filter_map(move |(u, i, v)| {
            Some(Example {
                user: *self.users.get(&u)?,
                item: *self.items.get(&i)?,
                value: normalize(self.scale, v),
            })
        })
    }

    fn parameter_count(&self) -> usize {
        let (nu, ni) = (self.users.len(), self.items.len());
        nu + ni + (nu + ni) * self.factors
    }

    /// All learned parameters: user biases, item biases, user factors, item
    /// factors, each in id order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        out.extend_from_slice(&self.user_bias);
        out.extend_from_slice(&self.item_bias);
        out.extend_from_slice(&self.user_factors);
        out.extend_from_slice(&self.item_factors);
        out
    }

    /// Overwrites the learned parameters; `values` uses the layout of
    /// [`MfModel::parameters`].
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::InvalidArgument(alloc::format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let (nu, ni) = (self.users.len(), self.items.len());
        let (ub, rest) = values.split_at(nu);
        let (ib, rest) = rest.split_at(ni);
        let (pu, qi) = rest.split_at(nu * self.factors);
        self.user_bias.copy_from_slice(ub);
        self.item_bias.copy_from_slice(ib);
        self.user_factors.copy_from_slice(pu);
        self.item_factors.copy_from_slice(qi);
        Ok(())
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Global mean on the original rating scale.
    pub fn global_mean(&self) -> f64 {
        denormalize(self.scale, self.global_mean)
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.users.keys().copied()
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.keys().copied()
    }

    /// Bias and factor vector of a user, on the normalized scale.
    pub fn user_params(&self, user: UserId) -> Option<(f64, &[f64])> {
        let &u = self.users.get(&user)?;
        let f = self.factors;
        Some((self.user_bias[u], &self.user_factors[u * f..(u + 1) * f]))
    }

    /// Bias and factor vector of an item, on the normalized scale.
    pub fn item_params(&self, item: ItemId) -> Option<(f64, &[f64])> {
        let &i = self.items.get(&item)?;
        let f = self.factors;
        Some((self.item_bias[i], &self.item_factors[i * f..(i + 1) * f]))
    }

    /// Normalized global mean, as used inside the prediction formula.
    pub fn normalized_global_mean(&self) -> f64 {
        self.global_mean
    }
}

fn normalize(scale: Scale, value: f64) -> f64 {
    let (lo, hi) = scale.bounds();
    (value - lo) / (hi - lo)
}

fn denormalize(scale: Scale, value: f64) -> f64 {
    let (lo, hi) = scale.bounds();
    lo + value * (hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ItemType;

    fn raw(rows: &[(u32, u32, f64)]) -> RatingMatrix {
        let mut m = RatingMatrix::new(Scale::Raw);
        for &(u, i, v) in rows {
            m.insert_typed(UserId(u), ItemId(i), ItemType::Artist, v)
                .unwrap();
        }
        m
    }

    #[test]
    fn empty_training_is_an_error() {
        let k = RatingMatrix::new(Scale::Raw);
        assert_eq!(
            MfModel::fit(&k, &MfHyperparams::default()),
            Err(Error::EmptyTraining)
        );
    }

    #[test]
    fn single_rating_fit() {
        let k = raw(&[(0, 0, 80.0)]);
        let m = MfModel::fit(&k, &MfHyperparams::default()).unwrap();
        assert!((m.predict(UserId(0), ItemId(0)) - 80.0).abs() < 1.0);
    }

    #[test]
    fn unseen_entities_fall_back_to_global_mean() {
        let k = raw(&[(0, 0, 80.0), (1, 1, 40.0)]);
        let m = MfModel::fit(&k, &MfHyperparams::default()).unwrap();
        assert!((m.predict(UserId(9), ItemId(9)) - 60.0).abs() < 1e-9);
        assert!(m.predict(UserId(0), ItemId(9)).is_finite());
    }

    #[test]
    fn predictions_are_clamped() {
        let k = raw(&[(0, 0, 80.0)]);
        let mut m = MfModel::fit(&k, &MfHyperparams::default()).unwrap();
        let mut params = m.parameters();
        // normalized 1.2 corresponds to 120 on the raw scale
        params[0] = 1.2 - m.normalized_global_mean();
        params[1] = 0.0;
        for p in &mut params[2..] {
            *p = 0.0;
        }
        m.set_parameters(&params).unwrap();
        assert_eq!(m.predict(UserId(0), ItemId(0)), 100.0);
    }

    #[test]
    fn empty_test_is_an_error() {
        let k = raw(&[(0, 0, 80.0)]);
        let m = MfModel::fit(&k, &MfHyperparams::default()).unwrap();
        assert_eq!(
            m.evaluate_rmse(&RatingMatrix::new(Scale::Raw)),
            Err(Error::EmptyTest)
        );
    }

    #[test]
    fn invalid_hyperparams() {
        let k = raw(&[(0, 0, 80.0)]);
        for hp in [
            MfHyperparams {
                factors: 0,
                ..Default::default()
            },
            MfHyperparams {
                epochs: 0,
                ..Default::default()
            },
            MfHyperparams {
                learning_rate: 0.0,
                ..Default::default()
            },
            MfHyperparams {
                l2_reg: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                MfModel::fit(&k, &hp),
                Err(Error::InvalidArgument(_))
            ));
        }
    }
}
