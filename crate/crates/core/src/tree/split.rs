//! Split-error computation over a dense view of the known ratings.
//!
//! For a node holding users `U`, let `m_i` be the moments (count, sum, sum of
//! squares) of item `i`'s ratings among `U`. The squared error of a branch is
//! `Σ_i (sumsq_i − sum_i² / n_i)`, which equals the sum of squared residuals
//! around the branch's per-item means. Two branches are accumulated
//! explicitly from the users that fall in them; the third is the node's
//! moments minus the other two, so scoring a candidate costs time
//! proportional to the ratings of the users who rated it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ItemId, ItemType, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};

/// Whether `value` puts a user in the lovers branch.
///
/// On the semi-binary scale only a liked value counts and `threshold` is
/// ignored.
pub fn is_lover(scale: Scale, value: f64, threshold: f64) -> bool {
    match scale {
        Scale::Raw => value >= threshold,
        Scale::SemiBinary => value >= Scale::LIKED,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u32,
    sum: f64,
    sumsq: f64,
}

impl Moments {
    fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sumsq += v * v;
    }

    fn minus(self, a: Moments, b: Moments) -> Moments {
        Moments {
            n: self.n - a.n - b.n,
            sum: self.sum - a.sum - b.sum,
            sumsq: self.sumsq - a.sumsq - b.sumsq,
        }
    }

    fn sse(self) -> f64 {
        match self.n {
            0 | 1 => 0.0,
            n => (self.sumsq - self.sum * self.sum / n as f64).max(0.0),
        }
    }
}

/// Known ratings indexed densely by user and item.
///
/// Values are stored shifted by the scale midpoint, which keeps the moment
/// sums small; squared errors are shift-invariant.
pub(crate) struct RatingView {
    pub scale: Scale,
    pub users: Vec<UserId>,
    pub items: Vec<ItemId>,
    pub item_types: Vec<ItemType>,
    pub user_index: BTreeMap<UserId, usize>,
    pub item_index: BTreeMap<ItemId, usize>,
    shift: f64,
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
    norms: Vec<f64>,
}

impl RatingView {
    /// View over every rated item of `k`, with `extra_users` added as users
    /// without ratings when they are absent from `k`.
    pub fn new(k: &RatingMatrix, extra_users: &BTreeSet<UserId>) -> Self {
        let mut users: BTreeSet<UserId> = k.users();
        users.extend(extra_users.iter().copied());
        let users: Vec<UserId> = users.into_iter().collect();
        let user_index: BTreeMap<UserId, usize> =
            users.iter().enumerate().map(|(n, &u)| (u, n)).collect();
        let items: Vec<ItemId> = k.rated_items().into_iter().collect();
        let item_index: BTreeMap<ItemId, usize> =
            items.iter().enumerate().map(|(n, &i)| (i, n)).collect();
        let item_types = items
            .iter()
            .map(|&i| k.item_type(i).expect("rated items are typed"))
            .collect();
        let (lo, hi) = k.scale().bounds();
        let shift = (lo + hi) / 2.0;

        let mut rows = vec![Vec::new(); users.len()];
        let mut cols = vec![Vec::new(); items.len()];
        let mut norms = vec![0.0; items.len()];
        for (u, i, v) in k.iter() {
            let (u, i) = (user_index[&u], item_index[&i]);
            rows[u].push((i, v));
            cols[i].push((u, v));
            norms[i] += v * v;
        }
        for n in &mut norms {
            *n = libm::sqrt(*n);
        }
        RatingView {
            scale: k.scale(),
            users,
            items,
            item_types,
            user_index,
            item_index,
            shift,
            rows,
            cols,
            norms,
        }
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Ratings of the item at dense index `item`, by dense user index.
    pub fn column(&self, item: usize) -> &[(usize, f64)] {
        &self.cols[item]
    }

    /// Cosine of two item columns, missing entries read as zero.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let (ca, cb) = (&self.cols[a], &self.cols[b]);
        let (mut x, mut y, mut dot) = (0, 0, 0.0);
        while x < ca.len() && y < cb.len() {
            match ca[x].0.cmp(&cb[y].0) {
                core::cmp::Ordering::Less => x += 1,
                core::cmp::Ordering::Greater => y += 1,
                core::cmp::Ordering::Equal => {
                    dot += ca[x].1 * cb[y].1;
                    x += 1;
                    y += 1;
                }
            }
        }
        dot / (na * nb)
    }
}

/// Moments of every item over one node's users, plus scratch space for
/// scoring candidate splits of that node.
pub(crate) struct NodeScorer<'v> {
    view: &'v RatingView,
    member: Vec<bool>,
    totals: Vec<Moments>,
    total_sse: f64,
    parts: Vec<[Moments; 2]>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl<'v> NodeScorer<'v> {
    pub fn new(view: &'v RatingView, users: &[usize]) -> Self {
        let mut member = vec![false; view.users.len()];
        let mut totals = vec![Moments::default(); view.n_items()];
        for &u in users {
            member[u] = true;
            for &(i, v) in &view.rows[u] {
                totals[i].add(v - view.shift);
            }
        }
        let total_sse = totals.iter().map(|m| m.sse()).sum();
        NodeScorer {
            view,
            member,
            totals,
            total_sse,
            parts: vec![[Moments::default(); 2]; view.n_items()],
            touched: Vec::new(),
            seen: vec![false; view.n_items()],
        }
    }

    /// Ordering key of a split error. Errors closer than a billionth of the
    /// node's total error compare equal, so that rounding noise does not
    /// override the smallest-id tie rule.
    pub fn tie_key(&self, error: f64) -> f64 {
        // adding 0.0 turns -0.0 into 0.0 for total_cmp
        libm::round(error / (1e-9 * self.total_sse.max(1.0))) + 0.0
    }

    /// Number of node users who rated the item.
    pub fn raters(&self, item: usize) -> u32 {
        self.totals[item].n
    }

    /// Node users who rated `item`, with their ratings.
    pub fn member_ratings(&self, item: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.view
            .column(item)
            .iter()
            .copied()
            .filter(|&(u, _)| self.member[u])
    }

    /// Split error when `assign` places users in branch 0 or 1 and every
    /// other node user in the third branch.
    pub fn error_of(&mut self, assign: impl IntoIterator<Item = (usize, usize)>) -> f64 {
        let view = self.view;
        for (u, branch) in assign {
            for &(i, v) in &view.rows[u] {
                self.parts[i][branch].add(v - view.shift);
                if !self.seen[i] {
                    self.seen[i] = true;
                    self.touched.push(i);
                }
            }
        }
        let mut e = self.total_sse;
        for &i in &self.touched {
            let [a, b] = self.parts[i];
            let t = self.totals[i];
            e += a.sse() + b.sse() + t.minus(a, b).sse() - t.sse();
            self.parts[i] = [Moments::default(); 2];
            self.seen[i] = false;
        }
        self.touched.clear();
        e.max(0.0)
    }

    /// Split error of querying the single item at dense index `item`.
    pub fn single_error(&mut self, item: usize, threshold: f64) -> f64 {
        let scale = self.view.scale;
        let assign: Vec<(usize, usize)> = self
            .member_ratings(item)
            .map(|(u, v)| (u, if is_lover(scale, v, threshold) { 0 } else { 1 }))
            .collect();
        self.error_of(assign)
    }
}

fn dense_users(view: &RatingView, users: &BTreeSet<UserId>) -> Vec<usize> {
    users.iter().map(|u| view.user_index[u]).collect()
}

/// Mean rating of each item among `users`; items none of them rated are
/// absent.
pub fn node_item_means(k: &RatingMatrix, users: &BTreeSet<UserId>) -> BTreeMap<ItemId, f64> {
    let mut acc: BTreeMap<ItemId, (f64, usize)> = BTreeMap::new();
    for &u in users {
        for (i, v) in k.user_ratings(u) {
            let e = acc.entry(i).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(i, (s, n))| (i, s / n as f64))
        .collect()
}

/// Split error of partitioning `users` into lovers, haters and unknowns of
/// `candidate`.
pub fn split_error(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    candidate: ItemId,
    love_threshold: f64,
) -> f64 {
    let view = RatingView::new(k, users);
    let Some(&item) = view.item_index.get(&candidate) else {
        // Nobody rated the candidate: every user is unknown, the node's error.
        return NodeScorer::new(&view, &dense_users(&view, users)).total_sse;
    };
    NodeScorer::new(&view, &dense_users(&view, users)).single_error(item, love_threshold)
}

/// Candidates with their split errors, ascending by error then item id.
fn rank_candidates(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    candidates: &[ItemId],
    love_threshold: f64,
) -> Result<Vec<(ItemId, f64)>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let unique: BTreeSet<ItemId> = candidates.iter().copied().collect();
    let view = RatingView::new(k, users);
    let mut scorer = NodeScorer::new(&view, &dense_users(&view, users));
    let mut scored: Vec<(ItemId, f64)> = unique
        .into_iter()
        .map(|c| {
            let e = match view.item_index.get(&c) {
                Some(&i) => scorer.single_error(i, love_threshold),
                None => scorer.total_sse,
            };
            (c, e)
        })
        .collect();
    scored.sort_by(|a, b| {
        scorer
            .tie_key(a.1)
            .total_cmp(&scorer.tie_key(b.1))
            .then(a.0.cmp(&b.0))
    });
    Ok(scored)
}

/// The candidate with the lowest split error; ties go to the smallest id.
pub fn select_single_split(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    candidates: &[ItemId],
    love_threshold: f64,
) -> Result<(ItemId, f64)> {
    Ok(rank_candidates(k, users, candidates, love_threshold)?[0])
}

/// Up to `top` candidates with the smallest split errors, ascending.
pub fn top_k_candidates(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    candidates: &[ItemId],
    top: usize,
    love_threshold: f64,
) -> Result<Vec<(ItemId, f64)>> {
    if top == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut ranked = rank_candidates(k, users, candidates, love_threshold)?;
    ranked.truncate(top);
    Ok(ranked)
}

/// Cosine similarity of two items' rating columns in `k`.
pub fn item_cosine_similarity(k: &RatingMatrix, a: ItemId, b: ItemId) -> f64 {
    let view = RatingView::new(k, &BTreeSet::new());
    match (view.item_index.get(&a), view.item_index.get(&b)) {
        (Some(&x), Some(&y)) => view.cosine(x, y),
        _ => 0.0,
    }
}
