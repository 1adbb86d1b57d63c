//! Estimate phi'(0) for M0 from survivors recorded at every generation.

use bpre::envmodel::reference::m0;
use bpre::fourier::phi_deriv0;
use bpre::{survivor_ensemble, Ensemble, EnsembleSpec, SimPolicy};

fn main() -> bpre::Result<()> {
    let model = m0();
    let ens = survivor_ensemble(&model, &EnsembleSpec::new(25, 50_000, 5), &SimPolicy::default())?;
    let inputs: Vec<(usize, &Ensemble)> = (1..=25).map(|n| (n, &ens)).collect();
    let seq = phi_deriv0(&inputs, &model, 1)?;
    for p in seq.points.iter().step_by(4) {
        println!("n = {:2}  phi_n'(0) = {:+.5}i +- {:.5}", p.n, p.im, p.std_error);
    }
    match seq.limit {
        Some((re, im)) => println!("limit {re:+.5}{im:+.5}i +- {:.5}", seq.limit_uncertainty),
        None => println!("extrapolation refused; last term {:+.5}i", seq.best_value().im),
    }
    Ok(())
}
