use std::path::{Path, PathBuf};
use std::process::Command;

use coldtree::commands::{self, Invocation, RunManifest, TreeFormat};
use coldtree::io::{load_tsv, read_tsv};
use coldtree::Config;
use coldtree_core::synthetic::{generate_synthetic, SyntheticConfig};
use coldtree_core::tree::BranchLabel;
use coldtree_core::ElicitationTree;

const SMALL: &str = r#"
[synthetic]
n_users = 80
n_artists = 60
n_genres = 6
density = 0.4

[split]
t_per_user = 8

[mf]
epochs = 10

[simulation]
n_iterations = 3
runs = ["tree_hybrid", "helf"]
"#;

fn small() -> Config {
    Config::from_toml(SMALL).unwrap()
}

fn inv(dir: &Path) -> Invocation {
    Invocation {
        config_path: None,
        out_dir: dir.to_path_buf(),
    }
}

fn data_lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn generated_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = commands::generate(&Config::default(), &inv(dir.path())).unwrap();
    let d = SyntheticConfig::default();
    let expected = d.density * (d.n_users * (d.n_artists + d.n_genres)) as f64;
    assert!((data_lines(&path) as f64 - expected).abs() <= 1.0);

    let sparse = Config::from_toml("[synthetic]\nn_users = 200\ndensity = 0.05").unwrap();
    let path = commands::generate(&sparse, &inv(dir.path())).unwrap();
    assert_eq!(data_lines(&path), (0.05f64 * (200 * 330) as f64).round() as usize);
}

#[test]
fn generated_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let path = commands::generate(&cfg, &inv(dir.path())).unwrap();
    let loaded = load_tsv(&path).unwrap();
    let original = generate_synthetic(&cfg.synthetic).unwrap().ratings;
    assert_eq!(loaded.ratings.iter().collect::<Vec<_>>(), original.iter().collect::<Vec<_>>());
    for (u, i, _) in original.iter() {
        assert_eq!(loaded.ratings.item_type(i), original.item_type(i), "{u} {i}");
    }

    let again = tempfile::tempdir().unwrap();
    let path2 = commands::generate(&cfg, &inv(again.path())).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(path2).unwrap());
}

#[test]
fn simulating_from_the_file_matches_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small();
    let path = commands::generate(&cfg, &inv(&dir.path().join("data"))).unwrap();
    let mem = commands::simulate(&cfg, &inv(&dir.path().join("a"))).unwrap();
    let from_file = Config {
        dataset: Some(path),
        ..cfg
    };
    let file = commands::simulate(&from_file, &inv(&dir.path().join("b"))).unwrap();
    assert_eq!(mem[0].records, file[0].records);
    assert_eq!(
        std::fs::read(dir.path().join("a/results.csv")).unwrap(),
        std::fs::read(dir.path().join("b/results.csv")).unwrap()
    );
}

#[test]
fn two_strategies_two_curves() {
    let dir = tempfile::tempdir().unwrap();
    commands::simulate(&small(), &inv(dir.path())).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), commands::RESULTS_HEADER.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 4);
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], ["tree_hybrid", "helf"][n / 4]);
        assert_eq!(row[1].parse::<usize>().unwrap(), n % 4);
        assert!(row[2].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.seed = Some(17);
    cfg.simulation.dump_models = true;
    commands::simulate(&cfg, &inv(&dir.path().join("first"))).unwrap();
    let text = std::fs::read_to_string(dir.path().join("first/manifest.json")).unwrap();
    let manifest: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest.seed, Some(17));
    assert_eq!(manifest.config.mf.seed, 17);
    assert!(!manifest.incomparable_scales);
    assert!(manifest.outputs.contains(&"model_helf.txt".to_string()));

    commands::simulate(&manifest.config, &inv(&dir.path().join("second"))).unwrap();
    for name in ["results.csv", "model_helf.txt", "model_tree_hybrid.txt"] {
        assert_eq!(
            std::fs::read(dir.path().join("first").join(name)).unwrap(),
            std::fs::read(dir.path().join("second").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn mixed_scales_are_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.simulation.runs = Config::from_toml("[simulation]\nruns = [\"helf\", \"pairwise_tree_1\"]")
        .unwrap()
        .simulation
        .runs;
    commands::simulate(&cfg, &inv(dir.path())).unwrap();
    let m: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert!(m.incomparable_scales);
    assert_eq!(m.runs[1].scale, "semi_binary");
}

#[test]
fn zero_iterations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.simulation.n_iterations = 0;
    assert!(commands::simulate(&cfg, &inv(dir.path())).is_err());
}

#[test]
fn depth_one_dump_is_the_root_with_branch_summaries() {
    let mut cfg = small();
    cfg.inspect.depth = Some(1);
    let json = commands::inspect_tree(&cfg, TreeFormat::Json).unwrap();
    let tree: ElicitationTree = serde_json::from_str(&json).unwrap();
    let root = tree.root.as_ref().unwrap();
    assert!(root.branches.iter().all(|b| b.child.is_none()));
    assert_eq!(root.branches.iter().map(|b| b.n_users).sum::<usize>(), root.n_users);
    let text = commands::inspect_tree(&cfg, TreeFormat::Text).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn json_dump_round_trips() {
    let cfg = small();
    let data = commands::load_data(&cfg).unwrap();
    let tree = commands::initial_tree(&cfg, &data, "tree_hybrid").unwrap();
    let json = commands::inspect_tree(&cfg, TreeFormat::Json).unwrap();
    let back: ElicitationTree = serde_json::from_str(&json).unwrap();
    assert_eq!(back, tree);
    assert!(tree.depth() > 1);
}

#[test]
fn pair_nodes_print_both_items() {
    let mut cfg = small();
    cfg.inspect.strategy = "pairwise_tree_2".into();
    cfg.inspect.depth = Some(2);
    let text = commands::inspect_tree(&cfg, TreeFormat::Text).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.contains(" vs "), "{first}");
    cfg.inspect.strategy = "helf".into();
    assert!(commands::inspect_tree(&cfg, TreeFormat::Text).is_err());
}

fn session(cfg: &Config, script: &str) -> (Vec<(coldtree_core::Query, BranchLabel)>, String) {
    let mut out = Vec::new();
    let path = commands::interactive(cfg, script.as_bytes(), &mut out).unwrap();
    (path, String::from_utf8(out).unwrap())
}

#[test]
fn quitting_at_once_gives_an_empty_path() {
    let (path, out) = session(&small(), "quit\n");
    assert!(path.is_empty());
    assert!(out.ends_with("path:\n  (empty)\n"), "{out}");
    let (path, _) = session(&small(), "");
    assert!(path.is_empty());
}

#[test]
fn scripted_answers_follow_the_tree() {
    let cfg = small();
    let data = commands::load_data(&cfg).unwrap();
    let tree = commands::initial_tree(&cfg, &data, "tree_hybrid").unwrap();

    // skipping every query walks the unknown spine
    let (path, _) = session(&cfg, &"skip\n".repeat(40));
    let mut node = tree.root.as_ref();
    let mut traced = Vec::new();
    while let Some(n) = node {
        traced.push((n.query, BranchLabel::Unknown));
        node = n.child(BranchLabel::Unknown);
    }
    assert_eq!(path, traced);

    // a mixed script with one invalid line, traced by hand
    let script = ["like", "nonsense", "dislike", "skip", "like"];
    let (path, out) = session(&cfg, &(script.join("\n") + "\n"));
    assert!(out.contains("please answer like/dislike/skip"));
    let mut node = tree.root.as_ref();
    let mut traced = Vec::new();
    for label in [BranchLabel::Lover, BranchLabel::Hater, BranchLabel::Unknown, BranchLabel::Lover] {
        let Some(n) = node else { break };
        traced.push((n.query, label));
        node = n.child(label);
    }
    assert_eq!(path, traced);
}

#[test]
fn interactive_depth_limit() {
    let mut cfg = small();
    cfg.interactive.depth = Some(2);
    let (path, _) = session(&cfg, &"skip\n".repeat(10));
    assert_eq!(path.len(), 2);
    cfg.interactive.strategy = "pairwise_tree_1".into();
    let (path, out) = session(&cfg, "like\nsecond\nsame\n");
    assert!(out.contains("please answer first/second/same"));
    assert_eq!(path[0].1, BranchLabel::PreferSecond);
    assert!(path[0].0.is_pair());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coldtree"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulation]\nruns = [\"tree_magic\"]");
    let out = binary()
        .args(["--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("o"))
        .arg("simulate")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tree_magic") && err.contains("tree_hybrid"), "{err}");

    let typo = write_config(dir.path(), "[mf]\nepoch = 3");
    let out = binary().args(["--config", typo.to_str().unwrap(), "generate"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}

#[test]
fn binary_generate_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |seed: &str, out: &str| {
        let run = binary()
            .args(["--config", cfg.to_str().unwrap(), "--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .arg("generate")
            .output()
            .unwrap();
        assert!(run.status.success());
        std::fs::read(dir.path().join(out).join("ratings.tsv")).unwrap()
    };
    let a = run("5", "a");
    assert_eq!(a, run("5", "b"));
    assert_ne!(a, run("6", "c"));
    let parsed = read_tsv(a.as_slice()).unwrap();
    assert_eq!(parsed.users.len(), 80);
}
