//! Ternary elicitation trees.
//!
//! Each node asks one query (an item, or a pair of same-typed items) and
//! routes the users it holds into three branches by their answer. The query
//! at a node is the candidate whose three-way split leaves the smallest
//! within-branch squared error of the known ratings.

mod pair;
mod split;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::data::{ItemId, ItemType, RatingMatrix, Scale, UserId};
use crate::error::{Error, Result};

pub use pair::{pair_branch, select_pair, PairStrategy};
pub use split::{
    is_lover, item_cosine_similarity, node_item_means, select_single_split, split_error,
    top_k_candidates,
};

use split::{NodeScorer, RatingView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Query {
    Item(ItemId),
    Pair { first: ItemId, second: ItemId },
}

impl Query {
    pub fn items(&self) -> impl Iterator<Item = ItemId> {
        let (a, b) = match *self {
            Query::Item(i) => (i, None),
            Query::Pair { first, second } => (first, Some(second)),
        };
        core::iter::once(a).chain(b)
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, Query::Pair { .. })
    }

    /// The three labels a node asking this query branches on, in slot order.
    pub fn labels(&self) -> [BranchLabel; 3] {
        if self.is_pair() {
            BranchLabel::PAIR
        } else {
            BranchLabel::SINGLE
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::Item(i) => write!(f, "{i}"),
            Query::Pair { first, second } => write!(f, "{first} vs {second}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BranchLabel {
    Lover,
    Hater,
    Unknown,
    PreferFirst,
    PreferSecond,
    Indifferent,
}

impl BranchLabel {
    pub const SINGLE: [BranchLabel; 3] = [BranchLabel::Lover, BranchLabel::Hater, BranchLabel::Unknown];
    pub const PAIR: [BranchLabel; 3] = [
        BranchLabel::PreferFirst,
        BranchLabel::PreferSecond,
        BranchLabel::Indifferent,
    ];

    /// Child slot: positive answers first, the no-information branch last.
    pub fn slot(self) -> usize {
        match self {
            BranchLabel::Lover | BranchLabel::PreferFirst => 0,
            BranchLabel::Hater | BranchLabel::PreferSecond => 1,
            BranchLabel::Unknown | BranchLabel::Indifferent => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BranchLabel::Lover => "lover",
            BranchLabel::Hater => "hater",
            BranchLabel::Unknown => "unknown",
            BranchLabel::PreferFirst => "prefer_first",
            BranchLabel::PreferSecond => "prefer_second",
            BranchLabel::Indifferent => "indifferent",
        }
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub label: BranchLabel,
    /// Build-time users routed into this branch.
    pub n_users: usize,
    /// `None` for a leaf.
    pub child: Option<Box<TreeNode>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeNode {
    pub query: Query,
    pub depth: usize,
    pub split_error: f64,
    pub n_users: usize,
    pub branches: [Branch; 3],
}

impl TreeNode {
    pub fn child(&self, label: BranchLabel) -> Option<&TreeNode> {
        self.branches[label.slot()].child.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElicitationTree {
    /// `None` when the root users offered no candidate to split on.
    pub root: Option<TreeNode>,
}

impl ElicitationTree {
    /// First query on the path selected by `answers` that has no answer yet.
    pub fn next_query(&self, answers: &BTreeMap<Query, BranchLabel>) -> Option<Query> {
        self.next_query_with(|q| answers.get(q).copied())
    }

    /// Like [`ElicitationTree::next_query`] with answers supplied by a lookup.
    pub fn next_query_with(
        &self,
        mut answer: impl FnMut(&Query) -> Option<BranchLabel>,
    ) -> Option<Query> {
        let mut node = self.root.as_ref()?;
        loop {
            match answer(&node.query) {
                None => return Some(node.query),
                Some(label) => node = node.child(label)?,
            }
        }
    }

    /// Like [`ElicitationTree::next_query_with`], but a walk that ends in a
    /// leaf backs up along its path and retries down each node's
    /// no-information branch, deepest node first.
    pub fn next_query_backtracking(
        &self,
        mut answer: impl FnMut(&Query) -> Option<BranchLabel>,
    ) -> Option<Query> {
        fn visit(
            node: &TreeNode,
            answer: &mut dyn FnMut(&Query) -> Option<BranchLabel>,
        ) -> Option<Query> {
            let Some(label) = answer(&node.query) else {
                return Some(node.query);
            };
            if let Some(q) = node.child(label).and_then(|c| visit(c, answer)) {
                return Some(q);
            }
            let fallback = node.query.labels()[2];
            if label == fallback {
                return None;
            }
            visit(node.child(fallback)?, answer)
        }
        visit(self.root.as_ref()?, &mut answer)
    }

    /// Nodes visited when following `answers`, ending at the first node
    /// without an answer or at a leaf.
    pub fn path<'t>(&'t self, answers: &BTreeMap<Query, BranchLabel>) -> Vec<&'t TreeNode> {
        let mut out = Vec::new();
        let mut cur = self.root.as_ref();
        while let Some(node) = cur {
            out.push(node);
            cur = answers.get(&node.query).and_then(|&l| node.child(l));
        }
        out
    }

    /// Every node, depth first.
    pub fn nodes(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack: Vec<&TreeNode> = self.root.iter().collect();
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.branches.iter().rev().filter_map(|b| b.child.as_deref()));
        }
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes().iter().map(|n| n.depth + 1).max().unwrap_or(0)
    }

    /// Copy keeping only nodes above `depth`; branch user counts of cut
    /// children are kept.
    pub fn truncated(&self, depth: usize) -> ElicitationTree {
        fn cut(node: &TreeNode, depth: usize) -> Option<TreeNode> {
            if node.depth >= depth {
                return None;
            }
            let mut out = node.clone();
            for b in &mut out.branches {
                b.child = b.child.as_deref().and_then(|c| cut(c, depth)).map(Box::new);
            }
            Some(out)
        }
        ElicitationTree {
            root: self.root.as_ref().and_then(|r| cut(r, depth)),
        }
    }
}

/// Which kind of query a tree asks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeMode {
    /// Items of the target type only.
    Single,
    /// Items of any of the configured candidate types.
    Hybrid,
    /// Pairs of same-typed items drawn from the `pool_size` lowest-error
    /// candidates.
    Pairwise {
        strategy: PairStrategy,
        pool_size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub mode: TreeMode,
    pub candidate_types: Vec<ItemType>,
    pub target_type: ItemType,
    pub max_depth: usize,
    pub min_node_users: usize,
    /// Raw ratings at or above this are lovers; unused on semi-binary data.
    pub love_threshold: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            mode: TreeMode::Single,
            candidate_types: alloc::vec![ItemType::Artist],
            target_type: ItemType::Artist,
            max_depth: 25,
            min_node_users: 2,
            love_threshold: 50.0,
        }
    }
}

impl TreeConfig {
    pub fn single() -> Self {
        Self::default()
    }

    pub fn hybrid() -> Self {
        TreeConfig {
            mode: TreeMode::Hybrid,
            candidate_types: alloc::vec![ItemType::Artist, ItemType::Genre],
            ..Self::default()
        }
    }

    pub fn pairwise(strategy: PairStrategy) -> Self {
        TreeConfig {
            mode: TreeMode::Pairwise {
                strategy,
                pool_size: 20,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.candidate_types.is_empty() {
            return bad("candidate_types must not be empty");
        }
        match self.mode {
            TreeMode::Single if self.candidate_types != [self.target_type] => {
                bad("single-item trees ask only target-type items")
            }
            TreeMode::Pairwise { pool_size, .. } if pool_size < 2 => {
                bad("pool_size must be at least 2")
            }
            _ => Ok(()),
        }
    }
}

/// Splits `users` into the three branches of `query` by their ratings in `k`.
pub fn partition_users(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    query: &Query,
    love_threshold: f64,
) -> Result<[BTreeSet<UserId>; 3]> {
    let mut out: [BTreeSet<UserId>; 3] = Default::default();
    for &u in users {
        let label = match *query {
            Query::Item(i) => match k.get(u, i) {
                None => BranchLabel::Unknown,
                Some(v) if is_lover(k.scale(), v, love_threshold) => BranchLabel::Lover,
                Some(_) => BranchLabel::Hater,
            },
            Query::Pair { first, second } => pair_branch(k.get(u, first), k.get(u, second))?,
        };
        out[label.slot()].insert(u);
    }
    Ok(out)
}

/// Grows an elicitation tree over `users` from the known ratings `k`.
///
/// A node is split while it sits above `max_depth`, holds at least
/// `min_node_users` users, and has a candidate: an item of a candidate type
/// rated by one of its users and not already asked on the path from the root.
pub fn build_tree(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    cfg: &TreeConfig,
) -> Result<ElicitationTree> {
    cfg.validate()?;
    if users.is_empty() {
        return Err(Error::EmptyUsers);
    }
    if matches!(cfg.mode, TreeMode::Pairwise { .. }) && k.scale() != Scale::SemiBinary {
        return Err(Error::ScaleMismatch {
            expected: Scale::SemiBinary,
            found: k.scale(),
        });
    }
    let view = RatingView::new(k, users);
    let roots: Vec<usize> = users.iter().map(|u| view.user_index[u]).collect();
    let mut builder = Builder {
        view: &view,
        cfg,
        on_path: alloc::vec![false; view.n_items()],
    };
    Ok(ElicitationTree {
        root: builder.grow(roots, 0),
    })
}

struct Builder<'a> {
    view: &'a RatingView,
    cfg: &'a TreeConfig,
    /// Items already asked between the root and the node being grown.
    on_path: Vec<bool>,
}

impl Builder<'_> {
    fn grow(&mut self, users: Vec<usize>, depth: usize) -> Option<TreeNode> {
        if depth >= self.cfg.max_depth || users.len() < self.cfg.min_node_users.max(1) {
            return None;
        }
        let view = self.view;
        let mut scorer = NodeScorer::new(view, &users);
        let candidates: Vec<usize> = (0..view.n_items())
            .filter(|&i| {
                scorer.raters(i) > 0
                    && !self.on_path[i]
                    && self.cfg.candidate_types.contains(&view.item_types[i])
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }

        let threshold = self.cfg.love_threshold;
        let (query, assign, split_error) = match self.cfg.mode {
            TreeMode::Single | TreeMode::Hybrid => {
                // candidates ascend by id, so keeping the first minimum
                // implements the smallest-id tie rule
                let mut best = (candidates[0], f64::INFINITY, f64::INFINITY);
                for &c in &candidates {
                    let e = scorer.single_error(c, threshold);
                    let key = scorer.tie_key(e);
                    if key < best.2 {
                        best = (c, e, key);
                    }
                }
                let item = best.0;
                let assign: Vec<(usize, usize)> = scorer
                    .member_ratings(item)
                    .map(|(u, v)| {
                        let label = if is_lover(view.scale, v, threshold) {
                            BranchLabel::Lover
                        } else {
                            BranchLabel::Hater
                        };
                        (u, label.slot())
                    })
                    .collect();
                (Query::Item(view.items[item]), assign, best.1)
            }
            TreeMode::Pairwise {
                strategy,
                pool_size,
            } => {
                let mut ranked: Vec<(usize, f64)> = candidates
                    .iter()
                    .map(|&c| (c, scorer.single_error(c, threshold)))
                    .collect();
                ranked.sort_by(|a, b| {
                    scorer
                        .tie_key(a.1)
                        .total_cmp(&scorer.tie_key(b.1))
                        .then(a.0.cmp(&b.0))
                });
                let lead_type = view.item_types[ranked[0].0];
                let mut pool: Vec<usize> = ranked[..pool_size.min(ranked.len())]
                    .iter()
                    .map(|&(c, _)| c)
                    .filter(|&c| view.item_types[c] == lead_type)
                    .collect();
                if pool.len() < 2 {
                    // The lead item needs a same-typed partner from outside
                    // the top of the ranking.
                    pool.extend(
                        ranked[pool_size.min(ranked.len())..]
                            .iter()
                            .map(|&(c, _)| c)
                            .filter(|&c| view.item_types[c] == lead_type)
                            .take(2 - pool.len()),
                    );
                }
                if pool.len() < 2 {
                    return None;
                }
                let dense: Vec<Option<usize>> = pool.iter().map(|&c| Some(c)).collect();
                let second = pool[pair::pick_second(strategy, &dense, |a, b| view.cosine(a, b))];
                let first = pool[0];
                let assign = pair_assignment(&scorer, first, second);
                let e = scorer.error_of(assign.iter().copied());
                let query = Query::Pair {
                    first: view.items[first],
                    second: view.items[second],
                };
                (query, assign, e)
            }
        };

        let mut children: [Vec<usize>; 3] = Default::default();
        let mut slot_of = alloc::vec![2usize; view.users.len()];
        for &(u, slot) in &assign {
            slot_of[u] = slot;
        }
        for &u in &users {
            children[slot_of[u]].push(u);
        }
        drop(scorer);

        let asked: Vec<usize> = query.items().map(|i| view.item_index[&i]).collect();
        for &i in &asked {
            self.on_path[i] = true;
        }
        let labels = query.labels();
        let n_users = users.len();
        let branches = children.map(|members| {
            let count = members.len();
            (count, self.grow(members, depth + 1))
        });
        for &i in &asked {
            self.on_path[i] = false;
        }
        let [b0, b1, b2] = branches;
        let branch = |label: BranchLabel, (n, child): (usize, Option<TreeNode>)| Branch {
            label,
            n_users: n,
            child: child.map(Box::new),
        };
        Some(TreeNode {
            query,
            depth,
            split_error,
            n_users,
            branches: [
                branch(labels[0], b0),
                branch(labels[1], b1),
                branch(labels[2], b2),
            ],
        })
    }
}

/// Node users who prefer one item of the pair, with their branch slot.
/// Everyone else is indifferent.
fn pair_assignment(scorer: &NodeScorer<'_>, first: usize, second: usize) -> Vec<(usize, usize)> {
    let mut values: BTreeMap<usize, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for (u, v) in scorer.member_ratings(first) {
        values.entry(u).or_default().0 = Some(v);
    }
    for (u, v) in scorer.member_ratings(second) {
        values.entry(u).or_default().1 = Some(v);
    }
    values
        .into_iter()
        .filter_map(|(u, (a, b))| {
            // values come from a semi-binary matrix
            let label = pair_branch(a, b).ok()?;
            (label != BranchLabel::Indifferent).then(|| (u, label.slot()))
        })
        .collect()
}
