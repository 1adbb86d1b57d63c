//! Kolmogorov distance of the standardized log Z_n to Phi as n grows.

use bpre::edgeworth::standardized_log_z;
use bpre::envmodel::reference::dirac23;
use bpre::limits::ks_to_normal;
use bpre::{survivor_ensemble, EnsembleSpec, SimPolicy};

fn main() -> bpre::Result<()> {
    let model = dirac23(0.5);
    let ns = vec![10, 25, 50, 100];
    let spec = EnsembleSpec::new(100, 100_000, 4).checkpoints(ns.clone());
    let ens = survivor_ensemble(&model, &spec, &SimPolicy::default())?;
    for n in ns {
        let c = ks_to_normal(&standardized_log_z(&ens, &model, n)?, n);
        println!("n = {n:3}  KS = {:.5}  DKW = {:.5}  KS sqrt(n) = {:.3}", c.ks, c.dkw, c.ks * (n as f64).sqrt());
    }
    Ok(())
}
