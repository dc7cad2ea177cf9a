//! The four CLI commands as library functions.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use coldtree_core::partition::filter_density;
use coldtree_core::sim::{partition_for, round_tree, run_comparison, scales_of, IterationRecord};
use coldtree_core::synthetic::generate_synthetic;
use coldtree_core::tree::{BranchLabel, TreeNode};
use coldtree_core::{
    ElicitationTree, MfModel, PartitionState, Query, SimConfig, SimulationOutcome,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{scale_name, Config};
use crate::io::{load_tsv, save_tsv, Dataset};

/// Everything needed to repeat a command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seed: Option<u64>,
    pub versions: Versions,
    /// Config as used, with the top-level seed already pushed down.
    pub config: Config,
    pub outputs: Vec<String>,
    pub runs: Vec<RunSummary>,
    /// Set when the runs' RMSE values live on different scales.
    pub incomparable_scales: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub coldtree: String,
    pub coldtree_core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub scale: String,
    pub final_rmse: f64,
}

/// Where a command was invoked from and where it writes.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunManifest {
    fn new(command: &str, inv: &Invocation, cfg: &Config) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        RunManifest {
            command: command.into(),
            config_path: inv.config_path.clone(),
            out_dir: inv.out_dir.clone(),
            timestamp,
            seed: cfg.seed,
            versions: Versions {
                coldtree: env!("CARGO_PKG_VERSION").into(),
                coldtree_core: coldtree_core::VERSION.into(),
            },
            config: cfg.resolved(),
            outputs: Vec::new(),
            runs: Vec::new(),
            incomparable_scales: false,
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// Loads the configured dataset, or generates the synthetic one, and applies
/// the density filter.
pub fn load_data(cfg: &Config) -> Result<Dataset> {
    let cfg = cfg.resolved();
    let data = match &cfg.dataset {
        Some(path) => load_tsv(path)?,
        None => Dataset::from_matrix(generate_synthetic(&cfg.synthetic)?.ratings),
    };
    let f = &cfg.filter;
    if f.min_user_ratings == 0 && f.min_ratings_per_type.values().all(|&n| n == 0) {
        return Ok(data);
    }
    let filtered = filter_density(&data.ratings, f.min_user_ratings, &f.min_ratings_per_type)?;
    info!("filter kept {} of {} ratings", filtered.len(), data.ratings.len());
    Ok(data.with_ratings(filtered))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes the synthetic dataset as `ratings.tsv` plus a manifest.
pub fn generate(cfg: &Config, inv: &Invocation) -> Result<PathBuf> {
    let resolved = cfg.resolved();
    let data = Dataset::from_matrix(generate_synthetic(&resolved.synthetic)?.ratings);
    create_dir(&inv.out_dir)?;
    let path = inv.out_dir.join("ratings.tsv");
    save_tsv(&data, &path)?;
    info!("wrote {} ratings to {}", data.ratings.len(), path.display());
    let mut manifest = RunManifest::new("generate", inv, cfg);
    manifest.outputs.push("ratings.tsv".into());
    manifest.write(&inv.out_dir)?;
    Ok(path)
}

pub const RESULTS_HEADER: [&str; 6] = [
    "strategy",
    "iteration",
    "rmse",
    "known_size",
    "queries_issued",
    "queries_answered",
];

pub fn write_results(outcomes: &[SimulationOutcome], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for o in outcomes {
        for r in &o.records {
            let IterationRecord {
                iteration,
                rmse,
                known_size,
                queries_issued,
                queries_answered,
            } = *r;
            w.write_record([
                o.name.clone(),
                iteration.to_string(),
                rmse.to_string(),
                known_size.to_string(),
                queries_issued.to_string(),
                queries_answered.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text parameter listing: one line per user and item with its bias
/// followed by its factors.
pub fn dump_model(model: &MfModel, data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scale\t{}", scale_name(model.scale()));
    let _ = writeln!(out, "factors\t{}", model.factors());
    let _ = writeln!(out, "global_mean\t{}", model.global_mean());
    let mut line = |kind: &str, label: &str, bias: f64, factors: &[f64]| {
        let _ = write!(out, "{kind}\t{label}\t{bias}");
        for x in factors {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    };
    for u in model.users() {
        let (b, f) = model.user_params(u).expect("listed user");
        line("user", data.user_label(u), b, f);
    }
    for i in model.items() {
        let (b, f) = model.item_params(i).expect("listed item");
        line("item", data.item_label(i), b, f);
    }
    out
}

/// Runs every configured strategy on one shared partition.
pub fn run_configured(cfg: &Config, data: &Dataset) -> Result<Vec<SimulationOutcome>> {
    let variants = cfg.sim_configs()?;
    for v in &variants {
        info!("run {} on the {} scale", v.name, scale_name(v.scale));
    }
    Ok(run_comparison(&data.ratings, &variants)?)
}

/// Writes `results.csv` and a manifest, plus model dumps when configured.
pub fn simulate(cfg: &Config, inv: &Invocation) -> Result<Vec<SimulationOutcome>> {
    let data = load_data(cfg)?;
    let outcomes = run_configured(cfg, &data)?;
    create_dir(&inv.out_dir)?;
    let results = inv.out_dir.join("results.csv");
    let file = std::fs::File::create(&results)
        .with_context(|| format!("creating {}", results.display()))?;
    write_results(&outcomes, std::io::BufWriter::new(file))?;

    let mut manifest = RunManifest::new("simulate", inv, cfg);
    manifest.outputs.push("results.csv".into());
    if cfg.simulation.dump_models {
        for o in &outcomes {
            let name = format!("model_{}.txt", o.name);
            std::fs::write(inv.out_dir.join(&name), dump_model(&o.model, &data))?;
            manifest.outputs.push(name);
        }
    }
    manifest.runs = outcomes
        .iter()
        .map(|o| RunSummary {
            label: o.name.clone(),
            scale: scale_name(o.scale).into(),
            final_rmse: o.records.last().map_or(f64::NAN, |r| r.rmse),
        })
        .collect();
    manifest.incomparable_scales = scales_of(&outcomes).len() > 1;
    if manifest.incomparable_scales {
        log::warn!("runs mix raw and semi-binary scales; their RMSE values are not comparable");
    }
    manifest.write(&inv.out_dir)?;
    Ok(outcomes)
}

/// The tree a named tree strategy would walk in its first round.
pub fn initial_tree(cfg: &Config, data: &Dataset, strategy: &str) -> Result<ElicitationTree> {
    let resolved = cfg.resolved();
    let (tree_cfg, scale) = resolved.tree_strategy(strategy)?;
    let raw = PartitionState::build(&data.ratings, &resolved.split)?;
    let mut sim = SimConfig::new(strategy, coldtree_core::Strategy::Tree(tree_cfg.clone()));
    sim.scale = scale;
    sim.binarize_threshold = resolved.simulation.binarize_threshold;
    let state = partition_for(&raw, &sim)?;
    Ok(round_tree(&state, &tree_cfg)?)
}

pub fn query_text(q: &Query, data: &Dataset) -> String {
    let name = |i| {
        let kind = data.ratings.item_type(i).map_or("item", |t| t.as_str());
        format!("{kind} {}", data.item_label(i))
    };
    match *q {
        Query::Item(i) => name(i),
        Query::Pair { first, second } => format!("{} vs {}", name(first), name(second)),
    }
}

/// Indented text listing of a tree.
pub fn tree_text(tree: &ElicitationTree, data: &Dataset) -> String {
    fn node(n: &TreeNode, data: &Dataset, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        let _ = writeln!(
            out,
            "{pad}{}  users={} split_error={:.4}",
            query_text(&n.query, data),
            n.n_users,
            n.split_error
        );
        for b in &n.branches {
            let leaf = if b.child.is_none() { "  (leaf)" } else { "" };
            let _ = writeln!(out, "{pad}  {}: {} users{leaf}", b.label, b.n_users);
            if let Some(c) = &b.child {
                node(c, data, indent + 2, out);
            }
        }
    }
    let mut out = String::new();
    match &tree.root {
        Some(r) => node(r, data, 0, &mut out),
        None => out.push_str("(empty tree)\n"),
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeFormat {
    Text,
    Json,
}

/// Tree dump of the configured strategy, cut to the configured depth.
pub fn inspect_tree(cfg: &Config, format: TreeFormat) -> Result<String> {
    let data = load_data(cfg)?;
    let mut tree = initial_tree(cfg, &data, &cfg.inspect.strategy)?;
    if let Some(d) = cfg.inspect.depth {
        tree = tree.truncated(d);
    }
    Ok(match format {
        TreeFormat::Text => tree_text(&tree, &data),
        TreeFormat::Json => serde_json::to_string_pretty(&tree)? + "\n",
    })
}

fn parse_answer(line: &str, pair: bool) -> Option<Option<BranchLabel>> {
    let word = line.trim().to_ascii_lowercase();
    if matches!(word.as_str(), "quit" | "q" | "exit") {
        return Some(None);
    }
    let label = match (pair, word.as_str()) {
        (false, "like" | "l") => BranchLabel::Lover,
        (false, "dislike" | "d") => BranchLabel::Hater,
        (false, "skip" | "s") => BranchLabel::Unknown,
        (true, "first" | "1") => BranchLabel::PreferFirst,
        (true, "second" | "2") => BranchLabel::PreferSecond,
        (true, "same" | "s") => BranchLabel::Indifferent,
        _ => return None,
    };
    Some(Some(label))
}

/// Walks `tree` with answers read from `input`, at most `depth` queries.
/// Returns the answered path; quitting or end of input stops early.
pub fn walk_tree(
    tree: &ElicitationTree,
    data: &Dataset,
    depth: Option<usize>,
    mut input: impl BufRead,
    mut output: impl Write,
) -> Result<Vec<(Query, BranchLabel)>> {
    let mut path = Vec::new();
    let mut node = tree.root.as_ref();
    while let Some(n) = node {
        if depth.is_some_and(|d| path.len() >= d) {
            break;
        }
        let prompt = if n.query.is_pair() {
            "first/second/same"
        } else {
            "like/dislike/skip"
        };
        writeln!(output, "Q{}: {}", path.len() + 1, query_text(&n.query, data))?;
        let label = loop {
            write!(output, "[{prompt}/quit] > ")?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                break None;
            }
            match parse_answer(&line, n.query.is_pair()) {
                Some(answer) => break answer,
                None => writeln!(output, "please answer {prompt}, or quit")?,
            }
        };
        let Some(label) = label else { break };
        path.push((n.query, label));
        node = n.child(label);
    }
    writeln!(output, "path:")?;
    for (q, l) in &path {
        writeln!(output, "  {} -> {l}", query_text(q, data))?;
    }
    if path.is_empty() {
        writeln!(output, "  (empty)")?;
    }
    Ok(path)
}

pub fn interactive(
    cfg: &Config,
    input: impl BufRead,
    output: impl Write,
) -> Result<Vec<(Query, BranchLabel)>> {
    let data = load_data(cfg)?;
    let tree = initial_tree(cfg, &data, &cfg.interactive.strategy)?;
    walk_tree(&tree, &data, cfg.interactive.depth, input, output)
}
