use std::path::PathBuf;
use std::process::ExitCode;

use bpre::config::{Experiment, RunConfig};
use bpre::runner::{output_dir, run, write_outputs, RunOptions};
use clap::Parser;

/// Run a branching-process experiment from a TOML configuration.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// simulate, oracle-check, charfn, clt, edgeworth, renewal, diagnostics or full-acceptance
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> bpre::Result<i32> {
    let experiment: Experiment = cli.experiment.parse()?;
    let cfg = RunConfig::load(&cli.config)?;
    if cfg.experiment != experiment {
        return Err(bpre::Error::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    let opts = RunOptions {
        out: cli.out.clone(),
        threads: cli.threads,
        seed: cli.seed,
    };
    let summary = run(&cfg, &opts)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let dir = output_dir(&cfg, &opts);
    let written = write_outputs(&cfg, &summary, &dir)?;
    let (table, code) = summary.table();
    print!("{table}");
    println!("{} files written to {}", written.len(), dir.display());
    Ok(code)
}
