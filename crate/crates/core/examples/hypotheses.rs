//! Hypothesis report and lambda band scan for the reference models and a
//! continuous environment.

use bpre::envmodel::reference::{dirac2, dirac23, m0};
use bpre::fourier::lambda_band_sup;
use bpre::{check_hypotheses, EnvironmentKind, EnvironmentModel};

fn main() -> bpre::Result<()> {
    let continuous = EnvironmentModel::new(EnvironmentKind::PoissonLogUniform { a_min: 1.2, a_max: 3.0 })?;
    let models = [("Dirac(2)", dirac2()), ("d2/d3 1/2", dirac23(0.5)), ("M0", m0()), ("Poisson log-uniform", continuous)];
    for (name, model) in &models {
        let h = check_hypotheses(model, 4.0, 2.0)?;
        println!(
            "{name:20} mu {:.4} sigma2 {:.4} gamma {:.3} H1 {} nonlattice {} strongly {} cramer {}",
            h.mu,
            h.sigma2,
            h.gamma,
            h.h1_holds(),
            h.nonlattice,
            h.strongly_nonlattice,
            h.cramer
        );
        println!("{:20} sup |lambda| on [0.5, 15] = {:.6}", "", lambda_band_sup(model, 0.5, 15.0, 1000)?);
    }
    Ok(())
}
