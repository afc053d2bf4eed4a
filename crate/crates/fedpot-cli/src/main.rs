//! `fedpot` — run, compare, and verify FedPot simulations from the shell.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use fedpot_core::config::parse_config;
use fedpot_core::contract::{verify_ldic_luic, verify_monotonicity, ContractItem, ContractMenu};
use fedpot_core::experiment::{run_experiment, ExperimentOutcome};
use fedpot_core::federation::AggregationScheme;
use fedpot_core::ExperimentConfig;

#[derive(Parser)]
#[command(name = "fedpot", version, about = "Federated honeypot-defense simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write reports to the output directory
    Run {
        /// Experiment config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; reseeds every section seed deterministically
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the same config under all three aggregation schemes with shared seeds
    Compare {
        /// Experiment config (TOML)
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a contract menu for reward monotonicity and adjacent IC
    Verify {
        /// Menu file (TOML, a list of [[items]] with theta/reward/cost)
        #[arg(long)]
        menu: PathBuf,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FEDPOT_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("FEDPOT_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("FEDPOT_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to configure the worker pool")?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let resolved = config.resolved_toml()?;
    fs::write(dir.join("config.resolved"), resolved)?;

    let mut jsonl = String::new();
    for report in &outcome.reports {
        jsonl.push_str(&serde_json::to_string(report)?);
        jsonl.push('\n');
    }
    fs::write(dir.join("rounds.jsonl"), jsonl)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "round",
        "selected",
        "accuracy",
        "loss",
        "tprate",
        "tnr",
        "f1",
        "fairness",
        "deviation",
        "budget_spent",
        "tpr_utility",
    ])?;
    for r in &outcome.reports {
        w.write_record([
            r.round.to_string(),
            r.selected.len().to_string(),
            format!("{}", r.metrics.accuracy),
            format!("{}", r.metrics.loss),
            opt(r.metrics.tprate),
            opt(r.metrics.tnr),
            opt(r.metrics.f1),
            opt(r.fairness),
            opt(r.deviation),
            format!("{}", r.budget_spent),
            opt(r.tpr_utility),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_run(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut config = parse_config(config_path)?;
    if let Some(dir) = out {
        config.output.dir = dir.to_string_lossy().into_owned();
    }
    if let Some(master) = seed {
        config.reseed(master);
    }
    config.validate()?;
    let outcome = run_experiment(&config)?;
    let dir = PathBuf::from(&config.output.dir);
    write_outputs(&dir, &config, &outcome)?;
    let s = &outcome.summary;
    println!(
        "rounds={} accuracy={:.4} loss={:.4} spent={:.4}/{:.4} -> {}",
        s.rounds,
        s.final_metrics.accuracy,
        s.final_metrics.loss,
        s.total_spent,
        s.budget_total,
        dir.display()
    );
    Ok(())
}

fn cmd_compare(config_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let mut base = parse_config(config_path)?;
    if let Some(dir) = out {
        base.output.dir = dir.to_string_lossy().into_owned();
    }
    base.validate()?;

    let schemes = [
        ("conventional", AggregationScheme::ConventionalFedAvg),
        ("trust", AggregationScheme::TrustBased),
        ("untrust", AggregationScheme::UntrustBased),
    ];
    let mut outcomes = Vec::new();
    for (name, scheme) in schemes {
        let mut cfg = base.clone();
        cfg.federation.scheme = scheme;
        let outcome = run_experiment(&cfg)?;
        println!(
            "{name:>12}: accuracy={:.4} loss={:.4} fairness={}",
            outcome.summary.final_metrics.accuracy,
            outcome.summary.final_metrics.loss,
            opt(outcome.summary.final_fairness),
        );
        outcomes.push(outcome);
    }

    let dir = PathBuf::from(&base.output.dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
    w.write_record([
        "round",
        "conventional_accuracy",
        "trust_accuracy",
        "untrust_accuracy",
    ])?;
    for z in 0..base.federation.rounds {
        let mut row = vec![(z + 1).to_string()];
        for outcome in &outcomes {
            row.push(format!("{}", outcome.reports[z].metrics.accuracy));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("series -> {}", dir.join("compare.csv").display());
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MenuFile {
    items: Vec<MenuItem>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MenuItem {
    type_index: usize,
    theta: f64,
    reward: f64,
    cost: f64,
}

fn cmd_verify(menu_path: &Path) -> Result<()> {
    let text = fs::read_to_string(menu_path)
        .with_context(|| format!("reading {}", menu_path.display()))?;
    let parsed: MenuFile = toml::from_str(&text)
        .with_context(|| format!("parsing {}", menu_path.display()))?;
    let items = parsed
        .items
        .into_iter()
        .map(|i| ContractItem {
            type_index: i.type_index,
            theta: i.theta,
            reward: i.reward,
            cost: i.cost,
        })
        .collect();
    let menu = ContractMenu::new(items)?;

    let mono = verify_monotonicity(&menu);
    let ic = verify_ldic_luic(&menu)?;
    for v in &mono {
        println!(
            "monotonicity violation: reward for type {} is not above type {}",
            v.upper_type, v.lower_type
        );
    }
    for v in &ic {
        println!(
            "{:?} IC violation at type {} against type {} (slack {:.6})",
            v.direction, v.at_type, v.neighbor_type, v.slack
        );
    }
    if mono.is_empty() && ic.is_empty() {
        println!("menu passes monotonicity and adjacent IC checks");
        Ok(())
    } else {
        bail!("{} violation(s) found", mono.len() + ic.len());
    }
}

fn main() -> Result<()> {
    init_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => cmd_run(&config, out, seed),
        Command::Compare { config, out } => cmd_compare(&config, out),
        Command::Verify { menu } => cmd_verify(&menu),
    }
}
