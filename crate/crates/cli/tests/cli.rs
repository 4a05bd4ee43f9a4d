use std::path::Path;
use std::process::{Command, Output};

use ordembed::encoders::GruEncoder;
use ordembed::io::save_checkpoint;
use ordembed::tasks::EntailmentModel;
use ordembed::training::{Checkpoint, TaskKind, TrainConfig};

fn ordembed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordembed"))
        .args(args)
        .env_remove("OE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn chain_closure_has_three_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.tsv");
    let out = dir.path().join("closure.tsv");
    std::fs::write(&edges, "poodle\tdog\ndog\tanimal\n").unwrap();
    let o = ordembed(&["taxonomy", "closure", "--edges", p(&edges), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.sort_unstable();
    assert_eq!(lines, ["dog\tanimal", "poodle\tanimal", "poodle\tdog"]);
}

#[test]
fn oversized_split_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let closure = dir.path().join("closure.tsv");
    std::fs::write(&closure, "a\tb\na\tc\nb\tc\n").unwrap();
    let out = dir.path().join("split.tsv");
    let o = ordembed(&[
        "taxonomy", "split", "--closure", p(&closure), "--dev", "2", "--test", "2", "--seed", "1", "--out", p(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2 dev + 2 test"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tsv");
    let out = dir.path().join("out.tsv");
    let o = ordembed(&["taxonomy", "closure", "--edges", p(&missing), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));

    let cyclic = dir.path().join("cyclic.tsv");
    std::fs::write(&cyclic, "a\tb\nb\ta\n").unwrap();
    let o = ordembed(&["taxonomy", "closure", "--edges", p(&cyclic), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cycle"), "{}", stderr(&o));

    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"NOTACKPT").unwrap();
    let o = ordembed(&["algebra", "join", "--model", p(&bad), "--inputs", "x"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(ordembed(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ordembed(&["taxonomy", "closure"]).status.code(), Some(1));
    assert_eq!(
        ordembed(&["hypernym", "train", "--split", "s", "--out", "o", "--scorer", "dot"]).status.code(),
        Some(1)
    );
}

/// Penalties follow the hypothesis word (premise is `<unk>`, encoded as 0):
/// a < b < c < d with labels -, +, +, -. The best threshold sits between c
/// and d and gets 3 of 4 right.
#[test]
fn entail_eval_on_four_pair_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = EntailmentModel {
        text: GruEncoder::zeros(5, 1, 1, false),
    };
    model.text.w_h.set(0, 0, 1.0);
    for (id, w) in [(1, 0.1), (2, 0.2), (3, 0.3), (4, 0.4)] {
        model.text.words.weights.set(id, 0, w);
    }
    let config = TrainConfig {
        dim: 1,
        word_dim: 1,
        normalize: false,
        ..TrainConfig::for_task(TaskKind::Entailment)
    };
    let vocab = ["<unk>", "a", "b", "c", "d"].map(String::from).to_vec();
    let ckpt = dir.path().join("model.ckpt");
    save_checkpoint(&Checkpoint::capture(&model, &config, 1, 0.0, vocab), &ckpt).unwrap();

    let pairs = dir.path().join("pairs.tsv");
    std::fs::write(
        &pairs,
        "entailment\tzzz\tb\nnon-entailment\tzzz\td\nentailment\tzzz\tc\nnon-entailment\tzzz\ta\n",
    )
    .unwrap();
    let report = dir.path().join("report.tsv");
    let o = ordembed(&[
        "entail", "eval", "--model", p(&ckpt), "--dev-pairs", p(&pairs), "--test-pairs", p(&pairs), "--out", p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2-class accuracy: 75.0"), "{}", stdout(&o));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.lines().any(|l| l == "test_accuracy\t75"), "{text}");
}

const SUBCOMMANDS: &[&[&str]] = &[
    &[],
    &["taxonomy"],
    &["taxonomy", "closure"],
    &["taxonomy", "split"],
    &["taxonomy", "negatives"],
    &["hypernym", "train"],
    &["hypernym", "eval"],
    &["retrieval", "train"],
    &["retrieval", "eval"],
    &["entail", "train"],
    &["entail", "eval"],
    &["algebra", "join"],
    &["algebra", "meet"],
    &["synth", "dag"],
    &["synth", "two-level"],
    &["synth", "entail"],
];

#[test]
fn help_documents_every_flag() {
    for path in SUBCOMMANDS {
        let mut args = path.to_vec();
        args.push("--help");
        let o = ordembed(&args);
        assert!(o.status.success(), "{args:?}");
        let text = stdout(&o);
        assert!(text.contains("Usage:"), "{args:?}");
        // every flag has a description, inline or on the next line
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let trimmed = line.trim_start();
            if !trimmed.starts_with("--") {
                continue;
            }
            let inline = trimmed.split_once("  ").is_some_and(|(_, r)| !r.trim().is_empty());
            let below = lines.get(i + 1).is_some_and(|n| {
                let t = n.trim_start();
                !t.is_empty() && !t.starts_with('-') && n.len() - t.len() > line.len() - trimmed.len()
            });
            assert!(inline || below, "{args:?}: {trimmed} has no description");
        }
    }
    let o = ordembed(&["hypernym", "train", "--help"]);
    for flag in ["--config", "--dim", "--margin", "--lr", "--epochs", "--seed", "--scorer", "--reverse-order", "--threads"] {
        assert!(stdout(&o).contains(flag), "{flag}");
    }
}

fn hypernym_pipeline(dir: &Path, seed: &str) -> Vec<Vec<u8>> {
    let f = |name: &str| dir.join(name);
    let run = |args: &[&str]| {
        let o = ordembed(args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };
    run(&["synth", "dag", "--nodes", "40", "--seed", seed, "--out", p(&f("dag.tsv"))]);
    run(&["taxonomy", "closure", "--edges", p(&f("dag.tsv")), "--out", p(&f("closure.tsv"))]);
    run(&[
        "taxonomy", "split", "--closure", p(&f("closure.tsv")), "--dev", "10", "--test", "10", "--seed", seed, "--out",
        p(&f("split.tsv")),
    ]);
    run(&["taxonomy", "negatives", "--split", p(&f("split.tsv")), "--seed", seed, "--out", p(&f("neg.tsv"))]);
    let train = run(&[
        "hypernym", "train", "--split", p(&f("split.tsv")), "--negatives", p(&f("neg.tsv")), "--dim", "5", "--epochs", "4",
        "--seed", seed, "--out", p(&f("model.ckpt")),
    ]);
    let epochs: Vec<String> = stdout(&train).lines().map(String::from).collect();
    assert!(!epochs.is_empty());
    for line in &epochs {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert!(fields.iter().all(|x| x.parse::<f64>().is_ok()), "{line}");
    }
    run(&[
        "hypernym", "eval", "--model", p(&f("model.ckpt")), "--split", p(&f("split.tsv")), "--negatives",
        p(&f("neg.tsv")), "--out", p(&f("report.tsv")),
    ]);
    ["dag.tsv", "closure.tsv", "split.tsv", "neg.tsv", "model.ckpt", "report.tsv"]
        .iter()
        .map(|n| std::fs::read(f(n)).unwrap())
        .chain(std::iter::once(train.stdout))
        .collect()
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(hypernym_pipeline(a.path(), "7"), hypernym_pipeline(b.path(), "7"));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dag.tsv");
    let o = Command::new(env!("CARGO_BIN_EXE_ordembed"))
        .args(["synth", "dag", "--nodes", "30", "--out", p(&out)])
        .env("OE_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let via_env = std::fs::read(&out).unwrap();
    ordembed(&["synth", "dag", "--nodes", "30", "--seed", "7", "--out", p(&out)]);
    assert_eq!(via_env, std::fs::read(&out).unwrap());
    assert_eq!(ordembed(&["synth", "dag", "--nodes", "30", "--out", p(&out)]).status.code(), Some(1));
}

#[test]
fn join_with_itself_keeps_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    hypernym_pipeline(dir.path(), "3");
    let model = dir.path().join("model.ckpt");
    let neighbors = |inputs: &[&str]| {
        let mut args = vec!["algebra", "join", "--model", p(&model), "--top-k", "4", "--inputs"];
        args.extend_from_slice(inputs);
        let o = ordembed(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
            .lines()
            .filter(|l| l.starts_with("above") || l.starts_with("below") || l.starts_with("vector"))
            .map(String::from)
            .collect::<Vec<_>>()
    };
    let single = neighbors(&["n00"]);
    assert_eq!(single.len(), 9);
    assert_eq!(single, neighbors(&["n00", "n00"]));
    let o = ordembed(&["algebra", "meet", "--model", p(&model), "--inputs", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}
