// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rankprobe::actstore::Dtype;
use rankprobe::attribution::Baseline;
use rankprobe::report::{self, CompareRun, CompareStat, ExperimentConfig, HeadSection, PlantSection};

#[derive(Parser)]
#[command(name = "rankprobe", version, about = "Probe ranking-model activations for IR features")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for every random step (overrides all seeds in the config).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute feature label CSVs for a run file.
    Features(FeaturesArgs),
    /// Build balanced probing datasets from label CSVs.
    Balance(BalanceArgs),
    /// Fit one probe per layer and emit curves and verdicts.
    Probe(ProbeArgs),
    /// Probe feature-group expressions and their leaves.
    GroupProbe(GroupProbeArgs),
    /// Compare curves across probe output directories.
    Compare(CompareArgs),
    /// Check that probe neurons drive the ranking score.
    Validate(ValidateArgs),
    /// Generate a synthetic activation store with planted signals.
    Synth(SynthArgs),
    /// Write a small synthetic retrieval corpus.
    Demo(DemoArgs),
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    collection: Option<PathBuf>,
    /// Feature names or aliases; `all` for every registered feature.
    #[arg(long = "feature", value_delimiter = ',')]
    features: Vec<String>,
    /// Group expression, e.g. `(QTR+STF+VTFIDF)^2`.
    #[arg(long = "group")]
    groups: Vec<String>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args)]
struct BalanceArgs {
    /// Label CSVs to balance.
    #[arg(long = "labels")]
    labels: Vec<PathBuf>,
    #[arg(long)]
    n_bins: Option<usize>,
    #[arg(long)]
    per_bin: Option<usize>,
}

#[derive(Args)]
struct ProbeOpts {
    /// Activation store.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    opts: ProbeOpts,
    /// Label or dataset CSVs.
    #[arg(long = "labels")]
    labels: Vec<PathBuf>,
}

#[derive(Args)]
struct GroupProbeArgs {
    #[command(flatten)]
    opts: ProbeOpts,
    /// Directory of leaf label CSVs.
    #[arg(long)]
    labels_dir: Option<PathBuf>,
    #[arg(long = "group")]
    groups: Vec<String>,
    /// Use raw leaf values instead of min-max normalized ones.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// `LABEL=DIR` pairs, one per probe output directory.
    #[arg(long = "run", value_parser = parse_run)]
    runs: Vec<CompareRun>,
    /// `max` or `final`.
    #[arg(long)]
    stat: Option<CompareStat>,
    /// Inclusive layer range `LO..HI` for the max statistic.
    #[arg(long, value_parser = parse_range)]
    layers: Option<[usize; 2]>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    /// Final-layer probe model JSON.
    #[arg(long)]
    probe_model: Option<PathBuf>,
    /// Score head JSON.
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    n_pairs: Option<usize>,
    /// `zero` or `dataset-mean`.
    #[arg(long)]
    baseline: Option<Baseline>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_layers: Option<usize>,
    #[arg(long)]
    n_neurons: Option<usize>,
    /// `f32` or `i8`.
    #[arg(long)]
    dtype: Option<Dtype>,
    /// Layer of the default planted signal.
    #[arg(long)]
    plant_layer: Option<usize>,
    /// Also write an aligned score head with this noise sd.
    #[arg(long)]
    head_noise: Option<f64>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 500)]
    queries: usize,
    #[arg(long, default_value_t = 100)]
    docs: usize,
}

fn parse_run(s: &str) -> Result<CompareRun, String> {
    let (label, dir) = s.split_once('=').ok_or_else(|| format!("expected LABEL=DIR, got `{s}`"))?;
    Ok(CompareRun { label: label.to_string(), dir: dir.into() })
}

fn parse_range(s: &str) -> Result<[usize; 2], String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    Ok([p(lo)?, p(hi)?])
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_probe_opts(cfg: &mut ExperimentConfig, o: ProbeOpts) {
    set_opt(&mut cfg.probe.store, o.store);
    set(&mut cfg.probe.alpha, o.alpha);
    set(&mut cfg.probe.max_iter, o.max_iter);
    set(&mut cfg.probe.tol, o.tol);
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.override_seed(seed);
    }
    set_opt(&mut cfg.out, cli.global.out);
    set_opt(&mut cfg.threads, cli.global.threads);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }

    match cli.command {
        Command::Features(a) => {
            set_opt(&mut cfg.corpus.run, a.run);
            set_opt(&mut cfg.corpus.queries, a.queries);
            set_opt(&mut cfg.corpus.collection, a.collection);
            if !a.features.is_empty() {
                cfg.features.names = a.features;
            }
            if !a.groups.is_empty() {
                cfg.features.groups = a.groups;
            }
            set(&mut cfg.bm25.k1, a.k1);
            set(&mut cfg.bm25.b, a.b);
            let r = report::cmd_features(&cfg)?;
            println!("{} pairs, {} label files", r.n_pairs, r.files.len());
        }
        Command::Balance(a) => {
            if !a.labels.is_empty() {
                cfg.balance.labels = a.labels;
            }
            set(&mut cfg.balance.n_bins, a.n_bins);
            set(&mut cfg.balance.per_bin, a.per_bin);
            for ds in report::cmd_balance(&cfg)? {
                println!("{}: {} pairs, bins {:?}", ds.feature_name, ds.len(), ds.bin_counts());
            }
        }
        Command::Probe(a) => {
            apply_probe_opts(&mut cfg, a.opts);
            if !a.labels.is_empty() {
                cfg.probe.labels = a.labels;
            }
            for c in report::cmd_probe(&cfg)? {
                let s = c.summary();
                println!(
                    "{}: max R2 {:.4} at layer {}, final {:.4}, {}",
                    s.feature, s.max_r2, s.argmax_layer, s.final_r2, s.verdict
                );
            }
        }
        Command::GroupProbe(a) => {
            apply_probe_opts(&mut cfg, a.opts);
            set_opt(&mut cfg.features.labels_dir, a.labels_dir);
            if !a.groups.is_empty() {
                cfg.features.groups = a.groups;
            }
            if a.no_normalize {
                cfg.features.normalize_groups = false;
            }
            for g in report::cmd_group_probe(&cfg)? {
                let leaves: Vec<String> = g.leaves.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
                println!(
                    "{}: max R2 {:.4} at layer {} (leaves: {})",
                    g.expr,
                    g.max_r2,
                    g.argmax_layer,
                    leaves.join(", ")
                );
            }
        }
        Command::Compare(a) => {
            if !a.runs.is_empty() {
                cfg.compare.runs = a.runs;
            }
            set(&mut cfg.compare.stat, a.stat);
            set_opt(&mut cfg.compare.layers, a.layers);
            let t = report::cmd_compare(&cfg)?;
            println!("feature\t{}", t.runs.join("\t"));
            for (f, row) in t.features.iter().zip(&t.cells) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
                println!("{f}\t{}", cells.join("\t"));
            }
        }
        Command::Validate(a) => {
            set_opt(&mut cfg.validate.store, a.store);
            set_opt(&mut cfg.validate.probe_model, a.probe_model);
            set_opt(&mut cfg.validate.head, a.head);
            set(&mut cfg.validate.n_pairs, a.n_pairs);
            set(&mut cfg.validate.baseline, a.baseline);
            let s = report::cmd_validate(&cfg)?;
            println!("{}: {}/{} cases at the 95th percentile", s.feature, s.cases_at_95th, s.n_pairs);
        }
        Command::Synth(a) => {
            set(&mut cfg.synth.n_samples, a.n_samples);
            set(&mut cfg.synth.n_layers, a.n_layers);
            set(&mut cfg.synth.n_neurons, a.n_neurons);
            set(&mut cfg.synth.dtype, a.dtype);
            if let Some(layer) = a.plant_layer {
                if cfg.synth.plant.is_empty() {
                    cfg.synth.plant.push(PlantSection::default());
                }
                cfg.synth.plant[0].layer = Some(layer);
            }
            if let Some(noise_sd) = a.head_noise {
                cfg.synth.head = Some(HeadSection { plant: 0, noise_sd });
            }
            let r = report::cmd_synth(&cfg)?;
            println!("wrote {}", r.store.display());
            if let Some(h) = r.head {
                println!("wrote {}", h.display());
            }
        }
        Command::Demo(a) => {
            let dir = report::cmd_demo(&cfg, a.queries, a.docs)?;
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<rankprobe::Error>().is_some_and(rankprobe::Error::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
