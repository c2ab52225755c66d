use std::path::PathBuf;
use std::process::ExitCode;

use chainsense::acceptance::{self, Check};
use chainsense::commands;
use chainsense::{CliError, Result, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "chainsense", version, about = "Field estimation with sequential measurements on a spin chain")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (`rng.seed`).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(0..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores (`output.workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output root (`output.dir`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Generate the error table from the configured power law (`sweep.synthetic`).
    #[arg(long, global = true)]
    synthetic: bool,
    /// Override any configuration value, e.g. `--set chain.field=0.2`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,
    /// Suppress progress on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Magnetization of the first and last sites, free and measured.
    Magnetization,
    /// Posterior after each measurement of one simulated dataset.
    Posterior,
    /// Error sweep over field, total time and sequence length, with fits.
    Scaling,
    /// Scaling sweep with the time-exponent table preset.
    ReproduceTable1,
    /// Run the acceptance checks.
    Selftest {
        /// Also run the full scaling sweep (slow).
        #[arg(long)]
        full: bool,
    },
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(seed) = self.seed {
            v.push(format!("rng.seed={seed}"));
        }
        if let Some(w) = self.workers {
            v.push(format!("output.workers={w}"));
        }
        if let Some(dir) = &self.out_dir {
            v.push(format!("output.dir={}", toml::Value::String(dir.display().to_string())));
        }
        if self.synthetic {
            v.push("sweep.synthetic=true".into());
        }
        v.extend(self.set.iter().cloned());
        v
    }

    fn load(&self, base: RunConfig) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
                let file: toml::Table =
                    toml::from_str(&text).map_err(|e| CliError::config("--config", e.to_string()))?;
                // file values on top of the base
                let flat = flatten("", &toml::Value::Table(file));
                base.with_overrides(&flat)?
            }
            None => base,
        };
        base.with_overrides(&self.overrides())
    }
}

fn flatten(prefix: &str, value: &toml::Value) -> Vec<String> {
    match value {
        toml::Value::Table(t) => t
            .iter()
            .flat_map(|(k, v)| {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&path, v)
            })
            .collect(),
        other => vec![format!("{prefix}={other}")],
    }
}

fn report(checks: &[Check]) -> Result<()> {
    for c in checks {
        println!("{c}");
    }
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(CliError::SelfTest(n)),
    }
}

fn run(cli: Cli) -> Result<()> {
    let progress = !cli.common.quiet;
    match cli.command {
        Command::Magnetization => {
            let out = commands::magnetization(&cli.common.load(RunConfig::default())?)?;
            println!("{}", out.dir.path().display());
        }
        Command::Posterior => {
            let out = commands::posterior(&cli.common.load(RunConfig::default())?)?;
            for p in &out.report.prefixes {
                println!(
                    "n_seq={} mean={:.6} variance={:.3e} deltaB={:.4}",
                    p.n_seq, p.mean, p.variance, p.delta_b
                );
            }
            println!("{}", out.dir.path().display());
        }
        Command::Scaling => {
            let config = cli.common.load(RunConfig::default())?;
            let out = commands::scaling(&config, progress)?;
            print!("{}", commands::alpha_table(&config, &out.report));
            println!("{}", out.dir.path().display());
        }
        Command::ReproduceTable1 => {
            let config = cli.common.load(RunConfig::table1_preset())?;
            let (out, table) = commands::reproduce_table1(&config, progress)?;
            print!("{table}");
            println!("{}", out.dir.path().display());
        }
        Command::Selftest { full } => {
            let mut checks = acceptance::quick_suite();
            if full {
                let config = cli.common.load(RunConfig::table1_preset())?;
                let report = commands::compute_scaling(&config, progress)?;
                checks.extend(acceptance::sweep_suite(&report));
            }
            checks.sort_by_key(|c| c.id);
            report(&checks)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
