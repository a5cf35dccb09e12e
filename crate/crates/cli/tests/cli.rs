// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rankprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankprobe")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = rankprobe(args);
    assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_probe_validate_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let s = ok(&[
        "synth",
        "--out",
        p(out),
        "--n-samples",
        "600",
        "--n-neurons",
        "64",
        "--plant-layer",
        "4",
        "--head-noise",
        "0.25",
    ]);
    assert!(s.contains("store.aprb") && s.contains("head.json"));
    let probe = ok(&[
        "probe",
        "--out",
        p(out),
        "--store",
        p(&out.join("store.aprb")),
        "--labels",
        p(&out.join("labels/planted.csv")),
    ]);
    assert!(probe.contains("planted: max R2") && probe.contains("present"), "{probe}");
    let v = ok(&[
        "validate",
        "--out",
        p(out),
        "--store",
        p(&out.join("store.aprb")),
        "--probe-model",
        p(&out.join("models/planted.final.json")),
        "--head",
        p(&out.join("head.json")),
    ]);
    assert!(v.contains("/100 cases"), "{v}");
    let summary = fs::read_to_string(out.join("validation/planted.json")).unwrap();
    assert!(summary.contains("\"cases_at_95th\""));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["synth", "--out", p(out), "--n-samples", "200", "--n-neurons", "32"]);

    // Unknown feature: configuration error.
    let o = rankprobe(&[
        "features",
        "--out",
        p(out),
        "--feature",
        "bm52",
        "--run",
        "x",
        "--queries",
        "y",
        "--collection",
        "z",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bm52"));

    // Missing input path: configuration error.
    let o = rankprobe(&["probe", "--out", p(out), "--store", "missing.aprb", "--labels", "x.csv"]);
    assert_eq!(code(&o), 2);

    // Unknown config key.
    let cfg = out.join("bad.toml");
    fs::write(&cfg, "[probe]\nalpah = 0.1\n").unwrap();
    assert_eq!(code(&rankprobe(&["--config", p(&cfg), "synth", "--out", p(out)])), 2);

    // Corrupt store: runtime error.
    let store = out.join("store.aprb");
    let mut bytes = fs::read(&store).unwrap();
    let n = bytes.len();
    bytes[n / 2] ^= 0xFF;
    fs::write(&store, bytes).unwrap();
    let o =
        rankprobe(&["probe", "--out", p(out), "--store", p(&store), "--labels", p(&out.join("labels/planted.csv"))]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));

    // Bad flag value: clap usage error.
    assert_eq!(code(&rankprobe(&["synth", "--dtype", "f16"])), 2);
}

#[test]
fn seed_flag_controls_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["--seed", seed, "synth", "--out", p(&out), "--n-samples", "100", "--n-neurons", "16"]);
        fs::read(out.join("store.aprb")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("a", "3"), run("c", "4"));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, "out = \"from_config\"\n[synth]\nn_samples = 50\nn_layers = 2\nn_neurons = 8\n").unwrap();
    ok(&["--config", p(&cfg), "synth", "--n-layers", "3"]);
    let store = dir.path().join("from_config/store.aprb");
    let bytes = fs::read(&store).unwrap();
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 50);

    let other = dir.path().join("flag_out");
    ok(&["--config", p(&cfg), "--out", p(&other), "synth"]);
    assert!(other.join("store.aprb").exists());
}

#[test]
fn demo_features_balance_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["demo", "--out", p(out), "--queries", "10", "--docs", "20"]);
    let corpus = out.join("corpus");
    let f = ok(&[
        "features",
        "--out",
        p(out),
        "--run",
        p(&corpus.join("run.trec")),
        "--queries",
        p(&corpus.join("queries.tsv")),
        "--collection",
        p(&corpus.join("collection.tsv")),
        "--feature",
        "bm25,QTR",
        "--group",
        "(QTR+STF+VTFIDF)^2",
    ]);
    assert!(f.starts_with("200 pairs, 3 label files"), "{f}");
    let b = ok(&["balance", "--out", p(out), "--labels", p(&out.join("labels/bm25.csv")), "--per-bin", "10"]);
    assert!(b.starts_with("bm25: "));
    assert!(out.join("datasets/bm25.json").exists());

    for run in ["r1", "r2"] {
        let d = out.join(run);
        ok(&[
            "--seed",
            "1",
            "synth",
            "--out",
            p(&d),
            "--n-samples",
            "150",
            "--n-neurons",
            "16",
            "--n-layers",
            "3",
            "--plant-layer",
            "1",
        ]);
        ok(&[
            "--seed",
            "1",
            "probe",
            "--out",
            p(&d),
            "--store",
            p(&d.join("store.aprb")),
            "--labels",
            p(&d.join("labels/planted.csv")),
        ]);
    }
    let r1 = format!("in={}", p(&out.join("r1")));
    let r2 = format!("ood={}", p(&out.join("r2")));
    let t = ok(&["compare", "--out", p(&out.join("cmp")), "--run", &r1, "--run", &r2, "--stat", "final"]);
    assert!(t.starts_with("feature\tin\tood\nplanted\t"), "{t}");
    let dup = format!("in={}", p(&out.join("r2")));
    assert_eq!(code(&rankprobe(&["compare", "--out", p(out), "--run", &r1, "--run", &dup])), 2);
}

#[test]
fn group_probe_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["demo", "--out", p(out), "--queries", "15", "--docs", "20"]);
    let corpus = out.join("corpus");
    ok(&[
        "features",
        "--out",
        p(out),
        "--run",
        p(&corpus.join("run.trec")),
        "--queries",
        p(&corpus.join("queries.tsv")),
        "--collection",
        p(&corpus.join("collection.tsv")),
        "--feature",
        "QTR,STF,VTFIDF",
    ]);
    // Activations aligned with the corpus pair ids, planted with the group label.
    let cfg = out.join("exp.toml");
    let group_csv = out.join("labels/group.csv");
    let labels = fs::read_to_string(out.join("labels/covered_qt_ratio.csv")).unwrap();
    fs::write(&group_csv, labels.replace(",covered_qt_ratio,", ",g,")).unwrap();
    fs::write(
        &cfg,
        format!(
            "[synth]\nn_samples = 300\nn_layers = 2\nn_neurons = 16\n[[synth.plant]]\nlayer = 1\nneurons = [2, 5]\nweights = [1.0, 1.0]\nlabels = \"{}\"\n",
            p(&group_csv)
        ),
    )
    .unwrap();
    ok(&["--config", p(&cfg), "synth", "--out", p(out)]);
    let g = ok(&[
        "group-probe",
        "--out",
        p(out),
        "--store",
        p(&out.join("store.aprb")),
        "--labels-dir",
        p(&out.join("labels")),
        "--group",
        "QTR+STF",
    ]);
    assert!(g.starts_with("(QTR+STF): max R2"), "{g}");
    assert!(out.join("group_probe.json").exists());
}
