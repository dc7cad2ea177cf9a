//! Tab-separated rating files.
//!
//! One header line `user_id	item_id	item_type	rating`, then one rating per
//! line. Ids are arbitrary strings; they are numbered densely in
//! (length, text) order, which is numeric order for plain integer ids.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use coldtree_core::{ItemId, ItemType, RatingMatrix, Scale, UserId};

pub const HEADER: [&str; 4] = ["user_id", "item_id", "item_type", "rating"];

/// Ratings together with the external ids of their users and items.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ratings: RatingMatrix,
    /// External id of `UserId(n)` at index `n`.
    pub users: Vec<String>,
    /// External id of `ItemId(n)` at index `n`.
    pub items: Vec<String>,
}

impl Dataset {
    /// Wraps a matrix whose ids become their own decimal labels.
    pub fn from_matrix(ratings: RatingMatrix) -> Self {
        let n_users = ratings.users().last().map_or(0, |u| u.0 as usize + 1);
        let n_items = ratings.item_types().keys().last().map_or(0, |i| i.0 as usize + 1);
        Dataset {
            ratings,
            users: (0..n_users).map(|u| u.to_string()).collect(),
            items: (0..n_items).map(|i| i.to_string()).collect(),
        }
    }

    pub fn user_label(&self, user: UserId) -> &str {
        &self.users[user.0 as usize]
    }

    pub fn item_label(&self, item: ItemId) -> &str {
        &self.items[item.0 as usize]
    }

    /// Same labels over a different matrix with the same ids.
    pub fn with_ratings(&self, ratings: RatingMatrix) -> Self {
        Dataset {
            ratings,
            users: self.users.clone(),
            items: self.items.clone(),
        }
    }
}

struct Row {
    line: u64,
    user: String,
    item: String,
    item_type: ItemType,
    rating: f64,
}

fn dense_ids(labels: BTreeSet<&str>) -> (Vec<String>, BTreeMap<String, u32>) {
    let mut sorted: Vec<&str> = labels.into_iter().collect();
    sorted.sort_by_key(|s| (s.len(), *s));
    let index = sorted
        .iter()
        .enumerate()
        .map(|(n, s)| (s.to_string(), n as u32))
        .collect();
    (sorted.into_iter().map(String::from).collect(), index)
}

pub fn read_tsv(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().context("reading header")?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        bail!("line 1: expected header `{}`", HEADER.join("\t"));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            bail!("line {line}: expected 4 fields, found {}", record.len());
        }
        let item_type: ItemType = record[2]
            .parse()
            .with_context(|| format!("line {line}"))?;
        let rating: f64 = record[3]
            .trim()
            .parse()
            .with_context(|| format!("line {line}: bad rating `{}`", &record[3]))?;
        rows.push(Row {
            line,
            user: record[0].to_string(),
            item: record[1].to_string(),
            item_type,
            rating,
        });
    }
    let (users, user_index) = dense_ids(rows.iter().map(|r| r.user.as_str()).collect());
    let (items, item_index) = dense_ids(rows.iter().map(|r| r.item.as_str()).collect());
    let mut ratings = RatingMatrix::new(Scale::Raw);
    for r in &rows {
        let (u, i) = (UserId(user_index[&r.user]), ItemId(item_index[&r.item]));
        ratings
            .insert_typed(u, i, r.item_type, r.rating)
            .with_context(|| format!("line {}", r.line))?;
    }
    Ok(Dataset {
        ratings,
        users,
        items,
    })
}

pub fn write_tsv(data: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(writer);
    w.write_record(HEADER)?;
    for (u, i, v) in data.ratings.iter() {
        let item_type = data.ratings.item_type(i).expect("rated items are typed");
        w.write_record([
            data.user_label(u),
            data.item_label(i),
            item_type.as_str(),
            &v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tsv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_tsv(file).with_context(|| format!("reading {}", path.display()))
}

pub fn save_tsv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_tsv(data, std::io::BufWriter::new(file))
}
