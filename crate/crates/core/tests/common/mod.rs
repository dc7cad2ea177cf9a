#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use coldtree_core::{ItemId, ItemType, RatingMatrix, Scale, UserId};
use proptest::prelude::*;

/// Cells of a small dense grid, `None` where unrated.
#[derive(Debug, Clone)]
pub struct Grid {
    pub types: Vec<ItemType>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl Grid {
    pub fn matrix(&self) -> RatingMatrix {
        let mut m = RatingMatrix::new(Scale::Raw);
        for (i, &t) in self.types.iter().enumerate() {
            m.declare_item(ItemId(i as u32), t).unwrap();
        }
        for (u, row) in self.cells.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    m.insert(UserId(u as u32), ItemId(i as u32), v).unwrap();
                }
            }
        }
        m
    }

    pub fn users(&self) -> BTreeSet<UserId> {
        (0..self.cells.len() as u32).map(UserId).collect()
    }

    pub fn items(&self) -> Vec<ItemId> {
        (0..self.types.len() as u32).map(ItemId).collect()
    }
}

/// Random grids up to `max_users` × `max_items` with ratings in 0–100 and
/// random missingness.
pub fn grid(max_users: usize, max_items: usize) -> impl Strategy<Value = Grid> {
    (1..=max_users, 1..=max_items, 0.0..0.8f64).prop_flat_map(|(nu, ni, missing)| {
        let types = prop::collection::vec(
            prop_oneof![Just(ItemType::Artist), Just(ItemType::Genre)],
            ni,
        );
        let cell = (0.0..1.0f64, 0.0..=100.0f64)
            .prop_map(move |(p, v)| if p < missing { None } else { Some(v) });
        let cells = prop::collection::vec(prop::collection::vec(cell, ni), nu);
        (types, cells).prop_map(|(types, cells)| Grid { types, cells })
    })
}

/// Like [`grid`], but ratings are drawn from a handful of round values so
/// that ties and threshold hits are common.
pub fn coarse_grid(max_users: usize, max_items: usize) -> impl Strategy<Value = Grid> {
    grid(max_users, max_items).prop_map(|mut g| {
        for row in &mut g.cells {
            for v in row.iter_mut().flatten() {
                *v = (*v / 25.0).round() * 25.0;
            }
        }
        g
    })
}

/// Naive squared error of the lover / hater / unknown partition.
pub fn brute_split_error(
    k: &RatingMatrix,
    users: &BTreeSet<UserId>,
    candidate: ItemId,
    threshold: f64,
) -> f64 {
    let mut parts: [Vec<UserId>; 3] = Default::default();
    for &u in users {
        let slot = match k.get(u, candidate) {
            Some(v) if v >= threshold => 0,
            Some(_) => 1,
            None => 2,
        };
        parts[slot].push(u);
    }
    let items: BTreeSet<ItemId> = k.keys().map(|(_, i)| i).collect();
    let mut total = 0.0;
    for part in &parts {
        for &i in &items {
            let vals: Vec<f64> = part.iter().filter_map(|&u| k.get(u, i)).collect();
            if vals.is_empty() {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            total += vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        }
    }
    total
}

pub fn brute_means(k: &RatingMatrix, users: &BTreeSet<UserId>) -> BTreeMap<ItemId, f64> {
    let mut sums: BTreeMap<ItemId, (f64, usize)> = BTreeMap::new();
    for (u, i, v) in k.iter() {
        if users.contains(&u) {
            let e = sums.entry(i).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(i, (s, n))| (i, s / n as f64)).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
