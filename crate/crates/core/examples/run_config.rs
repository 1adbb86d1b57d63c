//! Drive the experiment runner from an inline TOML configuration.

use bpre::config::RunConfig;
use bpre::runner::{run, RunOptions};

const CONFIG: &str = r#"
experiment = "oracle-check"

[model]
kind = "finite_mixture"
laws = [{ kind = "explicit", pmf = [0.2, 0.3, 0.5] }, { kind = "explicit", pmf = [0.1, 0.2, 0.7] }]
weights = [0.5, 0.5]

[sim]
seed = 42
n = [2, 4]
trajectories = 50000
"#;

fn main() -> bpre::Result<()> {
    let cfg = RunConfig::parse(CONFIG)?;
    let summary = run(&cfg, &RunOptions::default())?;
    let (table, code) = summary.table();
    print!("{table}");
    for a in &summary.artifacts {
        println!("{} ({} bytes)", a.name, a.body.len());
    }
    println!("exit code {code}");
    Ok(())
}
