//! Offline replay of rating elicitation.
//!
//! Each round every cold user is asked one query. Answers are looked up in
//! the user's held-back pool ratings; whatever is found moves into the known
//! set, the recommender is refit on the known set from scratch, and its error
//! on the untouched test set is recorded.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::baseline::{Heuristic, StaticRanking};
use crate::data::{ItemId, ItemType, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};
use crate::mf::{MfHyperparams, MfModel};
use crate::partition::{PartitionState, SplitConfig};
use crate::rng;
use crate::tree::{
    build_tree, is_lover, pair_branch, BranchLabel, ElicitationTree, PairStrategy, Query,
    TreeConfig, TreeMode,
};

/// Strategy names accepted by [`Strategy::from_name`].
pub const STRATEGY_NAMES: [&str; 9] = [
    "popularity",
    "variance",
    "entropy",
    "helf",
    "tree_single",
    "tree_hybrid",
    "pairwise_tree_1",
    "pairwise_tree_2",
    "random",
];

/// How queries are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// One ranking computed from the initial known set, shared by all users.
    Static {
        heuristic: Heuristic,
        candidate_types: Vec<ItemType>,
        bins: usize,
    },
    /// An independent uniformly shuffled item order per user.
    Random { candidate_types: Vec<ItemType> },
    /// A tree rebuilt from the known set every round and walked from the root.
    Tree(TreeConfig),
}

/// Knobs shared by the named strategies.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct StrategyParams {
    /// Candidate types of every strategy except `tree_single`.
    pub candidate_types: Vec<ItemType>,
    pub target_type: ItemType,
    pub bins: usize,
    pub max_depth: usize,
    pub min_node_users: usize,
    pub love_threshold: f64,
    pub pool_size: usize,
}

impl Default for StrategyParams {
    fn default() -> Self {
        let tree = TreeConfig::default();
        StrategyParams {
            candidate_types: alloc::vec![ItemType::Artist, ItemType::Genre],
            target_type: ItemType::Artist,
            bins: 5,
            max_depth: tree.max_depth,
            min_node_users: tree.min_node_users,
            love_threshold: tree.love_threshold,
            pool_size: 20,
        }
    }
}

impl Strategy {
    pub fn from_name(name: &str, p: &StrategyParams) -> Result<Strategy> {
        let tree = |mode: TreeMode, candidate_types: Vec<ItemType>| {
            Strategy::Tree(TreeConfig {
                mode,
                candidate_types,
                target_type: p.target_type,
                max_depth: p.max_depth,
                min_node_users: p.min_node_users,
                love_threshold: p.love_threshold,
            })
        };
        let fixed = |heuristic| Strategy::Static {
            heuristic,
            candidate_types: p.candidate_types.clone(),
            bins: p.bins,
        };
        let pairwise = |strategy| {
            tree(
                TreeMode::Pairwise {
                    strategy,
                    pool_size: p.pool_size,
                },
                p.candidate_types.clone(),
            )
        };
        Ok(match name {
            "popularity" => fixed(Heuristic::Popularity),
            "variance" => fixed(Heuristic::Variance),
            "entropy" => fixed(Heuristic::Entropy),
            "helf" => fixed(Heuristic::Helf),
            "tree_single" => tree(TreeMode::Single, alloc::vec![p.target_type]),
            "tree_hybrid" => tree(TreeMode::Hybrid, p.candidate_types.clone()),
            "pairwise_tree_1" => pairwise(PairStrategy::FirstTwo),
            "pairwise_tree_2" => pairwise(PairStrategy::FirstPlusMostSimilar),
            "random" => Strategy::Random {
                candidate_types: p.candidate_types.clone(),
            },
            other => {
                return Err(Error::InvalidArgument(alloc::format!(
                    "unknown strategy `{other}`; valid names: {}",
                    STRATEGY_NAMES.join(", ")
                )))
            }
        })
    }

    /// Pairwise trees only work on semi-binary ratings.
    pub fn requires_semi_binary(&self) -> bool {
        matches!(
            self,
            Strategy::Tree(TreeConfig {
                mode: TreeMode::Pairwise { .. },
                ..
            })
        )
    }

    fn into_policy(self, seed: u64, backtracking: bool) -> Box<dyn ElicitationPolicy> {
        match self {
            Strategy::Static {
                heuristic,
                candidate_types,
                bins,
            } => Box::new(StaticPolicy {
                heuristic,
                candidate_types,
                bins,
                ranking: None,
            }),
            Strategy::Random { candidate_types } => Box::new(RandomPolicy {
                candidate_types,
                seed,
                orders: BTreeMap::new(),
            }),
            Strategy::Tree(cfg) => Box::new(TreePolicy {
                cfg,
                backtracking,
                tree: None,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Label of the run in result tables.
    pub name: String,
    pub n_iterations: usize,
    pub strategy: Strategy,
    /// Scale the whole run works on; semi-binary partitions are derived from
    /// the raw one with `binarize_threshold`.
    pub scale: Scale,
    pub binarize_threshold: f64,
    pub mf: MfHyperparams,
    pub split: SplitConfig,
    /// Seed of strategy-side randomness.
    pub seed: u64,
    /// When a user's tree path ends in a leaf, back up and continue down
    /// the no-information branches instead of asking nothing.
    pub tree_backtracking: bool,
}

impl SimConfig {
    pub fn new(name: impl Into<String>, strategy: Strategy) -> Self {
        let scale = if strategy.requires_semi_binary() {
            Scale::SemiBinary
        } else {
            Scale::Raw
        };
        SimConfig {
            name: name.into(),
            n_iterations: 20,
            strategy,
            scale,
            binarize_threshold: 50.0,
            mf: MfHyperparams::default(),
            split: SplitConfig::default(),
            seed: 0,
            tree_backtracking: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidArgument("n_iterations must be at least 1".into()));
        }
        if self.strategy.requires_semi_binary() && self.scale != Scale::SemiBinary {
            return Err(Error::ScaleMismatch {
                expected: Scale::SemiBinary,
                found: self.scale,
            });
        }
        self.mf.validate()?;
        if let Strategy::Tree(t) = &self.strategy {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    pub rmse: f64,
    pub known_size: usize,
    pub queries_issued: usize,
    /// Ratings found in the pool by this round's queries.
    pub queries_answered: usize,
}

/// One asked query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryEvent {
    pub iteration: usize,
    pub user: UserId,
    pub query: Query,
    pub label: BranchLabel,
    pub answered: usize,
}

/// The answers one cold user has given so far.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSession {
    pub user: UserId,
    pub asked: BTreeMap<Query, BranchLabel>,
}

impl UserSession {
    pub fn new(user: UserId) -> Self {
        UserSession {
            user,
            asked: BTreeMap::new(),
        }
    }

    fn record(&mut self, query: Query, label: BranchLabel) -> Result<()> {
        if self.asked.contains_key(&query) {
            return Err(Error::AlreadyAsked {
                user: self.user,
                query,
            });
        }
        self.asked.insert(query, label);
        Ok(())
    }
}

/// Answer to one query and the number of ratings it moved out of the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolution {
    pub label: BranchLabel,
    pub migrated: usize,
}

/// Asks `session.user` about `item`. A pool rating moves into `known` and
/// decides lover or hater; otherwise the answer is unknown.
pub fn resolve_single(
    session: &mut UserSession,
    item: ItemId,
    pool: &mut RatingMatrix,
    known: &mut RatingMatrix,
    love_threshold: f64,
) -> Result<Resolution> {
    let user = session.user;
    if session.asked.contains_key(&Query::Item(item)) {
        return Err(Error::AlreadyAsked {
            user,
            query: Query::Item(item),
        });
    }
    let res = match pool.remove(user, item) {
        Some(v) => {
            known.insert(user, item, v)?;
            let label = if is_lover(pool.scale(), v, love_threshold) {
                BranchLabel::Lover
            } else {
                BranchLabel::Hater
            };
            Resolution { label, migrated: 1 }
        }
        None => Resolution {
            label: BranchLabel::Unknown,
            migrated: 0,
        },
    };
    session.record(Query::Item(item), res.label)?;
    Ok(res)
}

/// Asks `session.user` to compare two items. Values are read from the pool
/// or, failing that, from `known`; pool values move into `known`.
pub fn resolve_pair(
    session: &mut UserSession,
    first: ItemId,
    second: ItemId,
    pool: &mut RatingMatrix,
    known: &mut RatingMatrix,
) -> Result<Resolution> {
    let user = session.user;
    let query = Query::Pair { first, second };
    if session.asked.contains_key(&query) {
        return Err(Error::AlreadyAsked { user, query });
    }
    let lookup = |item| {
        pool.get(user, item)
            .map(|v| (v, true))
            .or_else(|| known.get(user, item).map(|v| (v, false)))
    };
    let (a, b) = (lookup(first), lookup(second));
    let label = pair_branch(a.map(|x| x.0), b.map(|x| x.0))?;
    let mut migrated = 0;
    for (item, found) in [(first, a), (second, b)] {
        if let Some((v, true)) = found {
            pool.remove(user, item);
            known.insert(user, item, v)?;
            migrated += 1;
        }
    }
    session.record(query, label)?;
    Ok(Resolution { label, migrated })
}

/// What a user's known ratings already say about a query, without asking.
pub fn implied_answer(
    known: &RatingMatrix,
    user: UserId,
    query: &Query,
    love_threshold: f64,
) -> Option<BranchLabel> {
    match *query {
        Query::Item(i) => known.get(user, i).map(|v| {
            if is_lover(known.scale(), v, love_threshold) {
                BranchLabel::Lover
            } else {
                BranchLabel::Hater
            }
        }),
        Query::Pair { first, second } => {
            let (a, b) = (known.get(user, first)?, known.get(user, second)?);
            pair_branch(Some(a), Some(b)).ok()
        }
    }
}

/// Source of queries for a simulation.
pub trait ElicitationPolicy {
    /// Called at the start of every round, before any user is asked.
    fn refresh(&mut self, state: &PartitionState, round: usize) -> Result<()>;

    /// The next query for the session's user, or `None` when the policy has
    /// nothing left to ask them.
    fn next_query(&mut self, session: &UserSession, known: &RatingMatrix) -> Option<Query>;
}

struct TreePolicy {
    cfg: TreeConfig,
    backtracking: bool,
    tree: Option<ElicitationTree>,
}

/// The tree a tree strategy walks in a round whose known set is `state.known`:
/// built over every user with known ratings plus every cold user.
pub fn round_tree(state: &PartitionState, cfg: &TreeConfig) -> Result<ElicitationTree> {
    let mut users = state.known.users();
    users.extend(state.cold_users.iter().copied());
    build_tree(&state.known, &users, cfg)
}

impl ElicitationPolicy for TreePolicy {
    fn refresh(&mut self, state: &PartitionState, _round: usize) -> Result<()> {
        self.tree = Some(round_tree(state, &self.cfg)?);
        Ok(())
    }

    fn next_query(&mut self, session: &UserSession, known: &RatingMatrix) -> Option<Query> {
        let threshold = self.cfg.love_threshold;
        let answer = |q: &Query| {
            session
                .asked
                .get(q)
                .copied()
                .or_else(|| implied_answer(known, session.user, q, threshold))
        };
        let tree = self.tree.as_ref()?;
        if self.backtracking {
            tree.next_query_backtracking(answer)
        } else {
            tree.next_query_with(answer)
        }
    }
}

/// First item of `order` that is neither asked nor already known.
fn first_fresh(order: &[ItemId], session: &UserSession, known: &RatingMatrix) -> Option<Query> {
    order
        .iter()
        .map(|&i| Query::Item(i))
        .find(|q| {
            let Query::Item(i) = *q else { unreachable!() };
            !session.asked.contains_key(q) && !known.contains(session.user, i)
        })
}

struct StaticPolicy {
    heuristic: Heuristic,
    candidate_types: Vec<ItemType>,
    bins: usize,
    ranking: Option<StaticRanking>,
}

impl ElicitationPolicy for StaticPolicy {
    fn refresh(&mut self, state: &PartitionState, _round: usize) -> Result<()> {
        if self.ranking.is_none() {
            let candidates = state.known.items_of_types(&self.candidate_types);
            self.ranking = Some(self.heuristic.rank(&state.known, &candidates, self.bins)?);
        }
        Ok(())
    }

    fn next_query(&mut self, session: &UserSession, known: &RatingMatrix) -> Option<Query> {
        first_fresh(&self.ranking.as_ref()?.items, session, known)
    }
}

struct RandomPolicy {
    candidate_types: Vec<ItemType>,
    seed: u64,
    orders: BTreeMap<UserId, Vec<ItemId>>,
}

impl ElicitationPolicy for RandomPolicy {
    fn refresh(&mut self, state: &PartitionState, _round: usize) -> Result<()> {
        if self.orders.is_empty() {
            let candidates = state.known.items_of_types(&self.candidate_types);
            for &u in &state.cold_users {
                let mut order = candidates.clone();
                order.shuffle(&mut rng::seeded(rng::derive_seed(self.seed, u.0 as u64)));
                self.orders.insert(u, order);
            }
        }
        Ok(())
    }

    fn next_query(&mut self, session: &UserSession, known: &RatingMatrix) -> Option<Query> {
        first_fresh(self.orders.get(&session.user)?, session, known)
    }
}

/// Result of one simulated run.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub name: String,
    pub scale: Scale,
    /// Iteration 0 is the model before any elicitation.
    pub records: Vec<IterationRecord>,
    pub queries: Vec<QueryEvent>,
    pub model: MfModel,
}

/// A run in progress; [`Simulation::step`] performs one elicitation round.
pub struct Simulation {
    cfg: SimConfig,
    state: PartitionState,
    policy: Box<dyn ElicitationPolicy>,
    sessions: BTreeMap<UserId, UserSession>,
    model: MfModel,
    records: Vec<IterationRecord>,
    queries: Vec<QueryEvent>,
}

impl Simulation {
    /// Starts a run on an existing partition, which must already be on the
    /// configured scale. Fits and evaluates the initial model.
    pub fn new(state: PartitionState, cfg: SimConfig) -> Result<Self> {
        let policy = cfg
            .strategy
            .clone()
            .into_policy(cfg.seed, cfg.tree_backtracking);
        Self::with_policy(state, cfg, policy)
    }

    /// Like [`Simulation::new`] with a caller-supplied query source.
    pub fn with_policy(
        state: PartitionState,
        cfg: SimConfig,
        policy: Box<dyn ElicitationPolicy>,
    ) -> Result<Self> {
        cfg.validate()?;
        crate::partition::expect_scale(&state.known, cfg.scale)?;
        let model = MfModel::fit(&state.known, &cfg.mf)?;
        let rmse = model.evaluate_rmse(&state.test)?;
        let sessions = state
            .cold_users
            .iter()
            .map(|&u| (u, UserSession::new(u)))
            .collect();
        let records = alloc::vec![IterationRecord {
            iteration: 0,
            rmse,
            known_size: state.known.len(),
            queries_issued: 0,
            queries_answered: 0,
        }];
        Ok(Simulation {
            cfg,
            state,
            policy,
            sessions,
            model,
            records,
            queries: Vec::new(),
        })
    }

    /// Runs one round: refresh the policy, ask every cold user one query,
    /// refit on the grown known set, evaluate on the test set.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let round = self.records.len();
        self.policy.refresh(&self.state, round)?;
        let (mut issued, mut answered) = (0, 0);
        // Each user's answer only touches that user's own keys, so migrating
        // user by user equals applying the round's migrations as one batch.
        for session in self.sessions.values_mut() {
            let Some(query) = self.policy.next_query(session, &self.state.known) else {
                continue;
            };
            let PartitionState { known, pool, .. } = &mut self.state;
            let res = match query {
                Query::Item(i) => {
                    let threshold = match &self.cfg.strategy {
                        Strategy::Tree(t) => t.love_threshold,
                        _ => crate::tree::TreeConfig::default().love_threshold,
                    };
                    resolve_single(session, i, pool, known, threshold)?
                }
                Query::Pair { first, second } => resolve_pair(session, first, second, pool, known)?,
            };
            issued += 1;
            answered += res.migrated;
            self.queries.push(QueryEvent {
                iteration: round,
                user: session.user,
                query,
                label: res.label,
                answered: res.migrated,
            });
        }
        self.model = MfModel::fit(&self.state.known, &self.cfg.mf)?;
        let record = IterationRecord {
            iteration: round,
            rmse: self.model.evaluate_rmse(&self.state.test)?,
            known_size: self.state.known.len(),
            queries_issued: issued,
            queries_answered: answered,
        };
        self.records.push(record);
        Ok(record)
    }

    /// Runs the remaining rounds up to `n_iterations`.
    pub fn run(mut self) -> Result<SimulationOutcome> {
        while self.records.len() <= self.cfg.n_iterations {
            self.step()?;
        }
        Ok(SimulationOutcome {
            name: self.cfg.name,
            scale: self.cfg.scale,
            records: self.records,
            queries: self.queries,
            model: self.model,
        })
    }

    pub fn state(&self) -> &PartitionState {
        &self.state
    }

    pub fn model(&self) -> &MfModel {
        &self.model
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn queries(&self) -> &[QueryEvent] {
        &self.queries
    }

    pub fn sessions(&self) -> &BTreeMap<UserId, UserSession> {
        &self.sessions
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }
}

/// Converts a raw partition to the scale a run works on.
pub fn partition_for(raw: &PartitionState, cfg: &SimConfig) -> Result<PartitionState> {
    match (raw.scale(), cfg.scale) {
        (a, b) if a == b => Ok(raw.clone()),
        (Scale::Raw, Scale::SemiBinary) => raw.semi_binarized(cfg.binarize_threshold),
        (found, expected) => Err(Error::ScaleMismatch { expected, found }),
    }
}

/// Splits `data` per `cfg.split` and runs every round.
pub fn run_simulation(data: &RatingMatrix, cfg: &SimConfig) -> Result<SimulationOutcome> {
    cfg.validate()?;
    let raw = PartitionState::build(data, &cfg.split)?;
    Simulation::new(partition_for(&raw, cfg)?, cfg.clone())?.run()
}

/// Runs several variants over one shared partition.
pub fn run_comparison(data: &RatingMatrix, variants: &[SimConfig]) -> Result<Vec<SimulationOutcome>> {
    let Some(first) = variants.first() else {
        return Ok(Vec::new());
    };
    if variants.iter().any(|v| v.split != first.split) {
        return Err(Error::MismatchedSplits);
    }
    for v in variants {
        v.validate()?;
    }
    let raw = PartitionState::build(data, &first.split)?;
    variants
        .iter()
        .map(|v| Simulation::new(partition_for(&raw, v)?, v.clone())?.run())
        .collect()
}

/// Distinct scales among outcomes; more than one means the RMSE curves are
/// not comparable.
pub fn scales_of(outcomes: &[SimulationOutcome]) -> BTreeSet<&'static str> {
    outcomes
        .iter()
        .map(|o| match o.scale {
            Scale::Raw => "raw",
            Scale::SemiBinary => "semi_binary",
        })
        .collect()
}
