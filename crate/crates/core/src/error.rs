use alloc::string::String;

use crate::data::{ItemId, ItemType, Scale, UserId};
use crate::tree::Query;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate rating for user {user} and item {item}")]
    DuplicateRating { user: UserId, item: ItemId },

    #[error("rating {value} for user {user} and item {item} is not valid on the {scale} scale")]
    OutOfRange {
        user: UserId,
        item: ItemId,
        value: f64,
        scale: Scale,
    },

    #[error("item {0} has no item type")]
    UntypedItem(ItemId),

    #[error("item {item} already declared as {existing}, cannot redeclare as {requested}")]
    ConflictingItemType {
        item: ItemId,
        existing: ItemType,
        requested: ItemType,
    },

    #[error("expected a {expected} rating matrix, found {found}")]
    ScaleMismatch { expected: Scale, found: Scale },

    #[error("cannot fit a model on an empty training set")]
    EmptyTraining,

    #[error("cannot evaluate on an empty test set")]
    EmptyTest,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("user set is empty")]
    EmptyUsers,

    #[error("a pair needs at least two pool items, got {0}")]
    PoolTooSmall(usize),

    #[error("pool items must share one item type")]
    MixedPoolTypes,

    #[error("value {0} is not a semi-binary rating (expected 1 or 0.01)")]
    NotSemiBinary(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("user {user} was already asked {query}")]
    AlreadyAsked { user: UserId, query: Query },

    #[error("comparison variants must share one split configuration")]
    MismatchedSplits,
}
