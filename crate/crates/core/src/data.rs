//! Sparse rating matrices with typed items and a declared value scale.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::ops::RangeInclusive;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct UserId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ItemId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.0)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

/// Kind of catalogue entry a rating refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ItemType {
    Artist,
    Genre,
    Track,
    Album,
}

impl ItemType {
    pub const ALL: [ItemType; 4] = [
        ItemType::Artist,
        ItemType::Genre,
        ItemType::Track,
        ItemType::Album,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ItemType::Artist => "artist",
            ItemType::Genre => "genre",
            ItemType::Track => "track",
            ItemType::Album => "album",
        }
    }
}

impl fmt::Display for ItemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ItemType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ItemType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown item type `{s}`")))
    }
}

/// Value scale of a rating matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scale {
    /// Explicit ratings in `[0, 100]`.
    Raw,
    /// `1` for liked, `0.01` for rated-but-disliked; absence means unrated.
    SemiBinary,
}

impl Scale {
    pub const LIKED: f64 = 1.0;
    pub const DISLIKED: f64 = 0.01;

    /// Smallest and largest representable value.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Scale::Raw => (0.0, 100.0),
            Scale::SemiBinary => (Self::DISLIKED, Self::LIKED),
        }
    }

    pub fn range(self) -> RangeInclusive<f64> {
        let (lo, hi) = self.bounds();
        lo..=hi
    }

    pub fn admits(self, value: f64) -> bool {
        match self {
            Scale::Raw => self.range().contains(&value),
            Scale::SemiBinary => value == Self::LIKED || value == Self::DISLIKED,
        }
    }

    pub fn clamp(self, value: f64) -> f64 {
        let (lo, hi) = self.bounds();
        value.clamp(lo, hi)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Raw => "raw 0-100",
            Scale::SemiBinary => "semi-binary",
        })
    }
}

/// Sparse user × item ratings.
///
/// Every rated item has a declared [`ItemType`]; items may be declared without
/// carrying any rating. Entries are ordered by `(user, item)` so iteration is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    scale: Scale,
    item_types: BTreeMap<ItemId, ItemType>,
    entries: BTreeMap<(UserId, ItemId), f64>,
}

impl RatingMatrix {
    pub fn new(scale: Scale) -> Self {
        RatingMatrix {
            scale,
            item_types: BTreeMap::new(),
            entries: BTreeMap::new(),
        }
    }

    /// Empty matrix sharing this matrix's scale and item declarations.
    pub fn empty_like(&self) -> Self {
        RatingMatrix {
            scale: self.scale,
            item_types: self.item_types.clone(),
            entries: BTreeMap::new(),
        }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn declare_item(&mut self, item: ItemId, item_type: ItemType) -> Result<()> {
        match self.item_types.get(&item) {
            Some(&existing) if existing != item_type => Err(Error::ConflictingItemType {
                item,
                existing,
                requested: item_type,
            }),
            Some(_) => Ok(()),
            None => {
                self.item_types.insert(item, item_type);
                Ok(())
            }
        }
    }

    /// Adds a rating. The item must be declared and the key must be new.
    pub fn insert(&mut self, user: UserId, item: ItemId, value: f64) -> Result<()> {
        if !self.item_types.contains_key(&item) {
            return Err(Error::UntypedItem(item));
        }
        if !self.scale.admits(value) {
            return Err(Error::OutOfRange {
                user,
                item,
                value,
                scale: self.scale,
            });
        }
        match self.entries.entry((user, item)) {
            alloc::collections::btree_map::Entry::Occupied(_) => {
                Err(Error::DuplicateRating { user, item })
            }
            alloc::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(value);
                Ok(())
            }
        }
    }

    /// Declares the item and inserts the rating in one step.
    pub fn insert_typed(
        &mut self,
        user: UserId,
        item: ItemId,
        item_type: ItemType,
        value: f64,
    ) -> Result<()> {
        self.declare_item(item, item_type)?;
        self.insert(user, item, value)
    }

    pub fn remove(&mut self, user: UserId, item: ItemId) -> Option<f64> {
        self.entries.remove(&(user, item))
    }

    pub fn get(&self, user: UserId, item: ItemId) -> Option<f64> {
        self.entries.get(&(user, item)).copied()
    }

    pub fn contains(&self, user: UserId, item: ItemId) -> bool {
        self.entries.contains_key(&(user, item))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, ItemId, f64)> + '_ {
        self.entries.iter().map(|(&(u, i), &v)| (u, i, v))
    }

    pub fn keys(&self) -> impl Iterator<Item = (UserId, ItemId)> + '_ {
        self.entries.keys().copied()
    }

    /// Ratings of one user in item order.
    pub fn user_ratings(&self, user: UserId) -> impl Iterator<Item = (ItemId, f64)> + '_ {
        self.entries
            .range((user, ItemId(0))..=(user, ItemId(u32::MAX)))
            .map(|(&(_, i), &v)| (i, v))
    }

    pub fn users(&self) -> BTreeSet<UserId> {
        self.entries.keys().map(|&(u, _)| u).collect()
    }

    /// Items that carry at least one rating.
    pub fn rated_items(&self) -> BTreeSet<ItemId> {
        self.entries.keys().map(|&(_, i)| i).collect()
    }

    pub fn item_type(&self, item: ItemId) -> Option<ItemType> {
        self.item_types.get(&item).copied()
    }

    pub fn item_types(&self) -> &BTreeMap<ItemId, ItemType> {
        &self.item_types
    }

    /// Declared items whose type is in `types`, in item order.
    pub fn items_of_types(&self, types: &[ItemType]) -> Vec<ItemId> {
        self.item_types
            .iter()
            .filter(|(_, t)| types.contains(t))
            .map(|(&i, _)| i)
            .collect()
    }

    /// Number of ratings per item.
    pub fn item_counts(&self) -> BTreeMap<ItemId, usize> {
        let mut counts = BTreeMap::new();
        for &(_, i) in self.entries.keys() {
            *counts.entry(i).or_insert(0) += 1;
        }
        counts
    }

    /// Number of ratings per user.
    pub fn user_counts(&self) -> BTreeMap<UserId, usize> {
        let mut counts = BTreeMap::new();
        for &(u, _) in self.entries.keys() {
            *counts.entry(u).or_insert(0) += 1;
        }
        counts
    }

    /// Ratings of each item, in user order.
    pub fn item_columns(&self) -> BTreeMap<ItemId, Vec<(UserId, f64)>> {
        let mut cols: BTreeMap<ItemId, Vec<(UserId, f64)>> = BTreeMap::new();
        for (u, i, v) in self.iter() {
            cols.entry(i).or_default().push((u, v));
        }
        cols
    }

    /// Keeps only the ratings for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(UserId, ItemId, f64) -> bool) {
        self.entries.retain(|&(u, i), v| keep(u, i, *v));
    }

    /// Restricts declared items to those for which `keep` returns true, and
    /// drops their ratings.
    pub fn retain_items(&mut self, mut keep: impl FnMut(ItemId, ItemType) -> bool) {
        self.item_types.retain(|&i, t| keep(i, *t));
        let types = &self.item_types;
        self.entries.retain(|(_, i), _| types.contains_key(i));
    }

    /// Copies every rating of `other` into `self`; fails on a shared key.
    pub fn absorb(&mut self, other: &RatingMatrix) -> Result<()> {
        if other.scale != self.scale {
            return Err(Error::ScaleMismatch {
                expected: self.scale,
                found: other.scale,
            });
        }
        for (&item, &t) in &other.item_types {
            self.declare_item(item, t)?;
        }
        for (u, i, v) in other.iter() {
            self.insert(u, i, v)?;
        }
        Ok(())
    }

    /// Applies `f` to every value, producing a matrix on `scale`.
    pub fn map_values(&self, scale: Scale, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut out = RatingMatrix {
            scale,
            item_types: self.item_types.clone(),
            entries: BTreeMap::new(),
        };
        for (u, i, v) in self.iter() {
            out.insert(u, i, f(v))?;
        }
        Ok(out)
    }

    /// Sub-matrix with the ratings of `users` only.
    pub fn restrict_users(&self, users: &BTreeSet<UserId>) -> Self {
        let mut out = self.empty_like();
        out.entries = self
            .entries
            .iter()
            .filter(|((u, _), _)| users.contains(u))
            .map(|(&k, &v)| (k, v))
            .collect();
        out
    }
}
