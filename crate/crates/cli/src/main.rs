use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semdist_core::experiment::synthetic::write_synthetic_experiment;
use semdist_core::experiment::{run_stage, write_report, Analysis, Stage};
use semdist_core::{reproduce_reference_stats, run_experiment, ExperimentConfig, StatReport};

#[derive(Parser)]
#[command(name = "semdist", version, about = "Corpus semantic distance and classifier generalizability audits")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split notes into sentences and keep those matching a lexicon term.
    Extract,
    /// Embed every extracted sentence.
    Embed,
    /// Build per-specialty train/test cohorts and their combinations.
    Cohorts,
    /// Train one classifier head per training cohort.
    Train,
    /// Score every trained model on every test cohort.
    Evaluate,
    /// Median cosine distances between cohorts; prints the pair table as CSV.
    Distances,
    /// PCA and t-SNE projections of the sentence embeddings.
    Project,
    /// Regressions, ANOVAs and t-tests over the evaluation results.
    Stats,
    /// Per-table CSV and JSON files from the statistics.
    Report,
    /// All stages from extraction to report.
    Run,
    /// Statistics from the bundled reference tables, no embeddings needed.
    Reproduce {
        /// Directory holding auc_by_pair.csv, ppv_by_pair.csv and intra_mcd.csv.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Write a synthetic corpus, lexicons and config into a directory.
    Synthetic {
        dir: PathBuf,
        #[arg(long, default_value_t = 300)]
        per_specialty: usize,
    },
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Extract => Stage::Extract,
            Command::Embed => Stage::Embed,
            Command::Cohorts => Stage::Cohorts,
            Command::Train => Stage::Train,
            Command::Evaluate => Stage::Evaluate,
            Command::Distances => Stage::Distances,
            Command::Project => Stage::Project,
            Command::Stats => Stage::Stats,
            Command::Report => Stage::Report,
            _ => return None,
        })
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        bail!("--config is required for this command");
    };
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn print_reports(reports: &[StatReport]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "test,statistic,df,p_value")?;
    for r in reports {
        let df: Vec<String> = r.df.iter().map(usize::to_string).collect();
        writeln!(out, "{},{:.6},{},{:.6e}", r.test, r.statistic, df.join(";"), r.p_value)?;
    }
    Ok(())
}

fn print_summary(a: &Analysis) {
    for r in &a.auc_vs_mcd {
        println!(
            "auc ~ mcd [{}]: slope {:.4} r2 {:.4} p {:.4e}",
            r.label, r.ols.slope, r.ols.r_squared, r.ols.p_value
        );
    }
    for g in &a.mcd_by_relation {
        println!("mean mcd [{}]: {:.6} (n = {})", g.relation, g.mean, g.count);
    }
    let m = a.single_specialty_means;
    println!(
        "single-specialty macro-AUC native/partial/external: {:.4}/{:.4}/{:.4} (rm-anova p {:.4})",
        m.native, m.partial, m.external, a.single_specialty_anova.p_value
    );
    println!(
        "macro-AUC by training size: monotone {} (rm-anova p {:.3e})",
        a.train_size_monotone, a.train_size_anova.p_value
    );
}

fn run_one(cfg: &ExperimentConfig, stage: Stage) -> Result<()> {
    let result = run_stage(cfg, stage)?;
    let out = &cfg.output_dir;
    match stage {
        Stage::Distances => {
            let csv = fs::read_to_string(out.join("distances.csv")).context("reading distances.csv")?;
            print!("{csv}");
        }
        Stage::Stats => {
            if let Some(r) = result {
                print_reports(&r.analysis.reports)?;
            }
        }
        _ => log::info!("stage {stage} complete in {}", out.display()),
    }
    Ok(())
}

fn reproduce(fixtures: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let (set, analysis) = reproduce_reference_stats(fixtures)?;
    print_summary(&analysis);
    if let Some(dir) = out {
        let files = write_report(dir, &set.records, &set.intra, &analysis)?;
        log::info!("wrote {} report files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(stage) = cli.command.stage() {
        return run_one(&load_config(&cli)?, stage);
    }
    match &cli.command {
        Command::Run => {
            let cfg = load_config(&cli)?;
            let result = run_experiment(&cfg)?;
            print_summary(&result.analysis);
        }
        Command::Reproduce { fixtures } => reproduce(fixtures.as_deref(), cli.out.as_deref())?,
        Command::Synthetic { dir, per_specialty } => {
            let cfg = write_synthetic_experiment(dir, cli.seed.unwrap_or(0), *per_specialty)?;
            println!("{}", dir.join("config.toml").display());
            log::info!("{} lexicons, output directory {}", cfg.lexicons.len(), cfg.output_dir.display());
        }
        _ => unreachable!("stage commands handled above"),
    }
    Ok(())
}
