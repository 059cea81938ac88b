use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use clkoop::harness::{self, ExperimentConfig, ScoreTarget};

#[derive(Parser)]
#[command(name = "clkoop", version, about = "Closed-loop Koopman identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the training and test episodes and write them as CSV.
    Generate(Common),
    /// Spectral radii and cross-validated scores over the α grid.
    Sweep(Common),
    /// Test-set scores of every method/selection combination.
    Score(Common),
    /// Eigenvalues before and after re-wrapping an extracted plant.
    Rewrap(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dataset seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading configuration {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.dataset.generate.seed = seed;
        }
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        v.to_string()
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.load()?;
            let manifest = harness::cmd_generate(&cfg, &c.out)?;
            println!("{}", manifest.display());
        }
        Command::Sweep(c) => {
            let rows = harness::cmd_sweep(c.load()?, &c.out)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows ({failed} failed) -> {}", rows.len(), out_file(&c.out, "sweep.csv"));
        }
        Command::Score(c) => {
            let results = harness::cmd_score(c.load()?, &c.out)?;
            println!("{:<8} {:<12} {:>10} {:>10} {:>10} {:>10}", "method", "selection", "alpha", "r2_cl", "r2_plant", "rho_cl");
            for r in &results {
                println!(
                    "{:<8} {:<12} {:>10.3e} {:>10} {:>10} {:>10.6}",
                    r.combination.method.name(),
                    r.combination.selection.name(),
                    r.alpha,
                    fmt(r.report(ScoreTarget::ClosedLoop).r2_mean),
                    fmt(r.report(ScoreTarget::Plant).r2_mean),
                    r.eigenvalues.rho_cl
                );
            }
            println!("-> {}", out_file(&c.out, "table.csv"));
        }
        Command::Rewrap(c) => {
            let r = harness::cmd_rewrap(c.load()?, &c.out)?;
            for (name, p) in [("constrained", &r.constrained), ("lstsq", &r.lstsq)] {
                println!(
                    "{name:<12} max |dλ| {:.3e}  rho {:.6} -> {:.6}  crosses unit circle: {}",
                    p.max_displacement, p.rho_before, p.rho_after, p.crosses_unit_circle
                );
            }
            println!("-> {}", out_file(&c.out, "rewrap.csv"));
        }
    }
    Ok(())
}

fn out_file(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<clkoop::Error>() {
                Some(clkoop::Error::Assertion(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
