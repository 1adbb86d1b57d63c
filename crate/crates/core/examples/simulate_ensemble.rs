//! Simulate one path of M0, then a survivor ensemble, and print summaries.

use bpre::envmodel::reference::m0;
use bpre::{simulate_trajectory, survivor_ensemble, EnsembleSpec, SimPolicy};

fn main() -> bpre::Result<()> {
    let model = m0();
    let policy = SimPolicy::default();
    let path = simulate_trajectory(&model, 30, 0, 7, &policy)?;
    for n in [1, 5, 10, 20, 30] {
        match path.log_z(n) {
            Some(z) => println!("n = {n:2}  log Z_n = {z:8.4}  n mu = {:8.4}", n as f64 * model.mu()),
            None => println!("n = {n:2}  extinct"),
        }
    }

    let spec = EnsembleSpec::new(20, 20_000, 11).checkpoints(vec![10, 20]);
    let ens = survivor_ensemble(&model, &spec, &policy)?;
    let logs = ens.log_z_at(20)?;
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    println!(
        "{} survivors of {} attempts (margin {}), E[log Z_20 | S] - 20 mu = {:.4}",
        ens.len(),
        ens.counts.attempted,
        ens.margin,
        mean - 20.0 * model.mu()
    );
    Ok(())
}
