//! phi_n(s) for M0: exact values, the Monte Carlo estimate, and the
//! geometric fit of the exact increments.

use bpre::envmodel::reference::m0;
use bpre::fourier::{convergence_fit, estimate_phi_at, SGrid};
use bpre::oracle::{exact_distributions, phi_from_distribution};
use bpre::{survivor_ensemble, EnsembleSpec, SimPolicy};

fn main() -> bpre::Result<()> {
    let model = m0();
    let s = 0.3;
    let laws = exact_distributions(&model, 11, 2048)?;
    let exact: Vec<_> = laws[1..]
        .iter()
        .map(|d| phi_from_distribution(&model, d, s))
        .collect::<bpre::Result<_>>()?;
    for (i, v) in exact.iter().enumerate() {
        println!("n = {:2}  phi_n({s}) = {:.6}{:+.6}i", i + 1, v.re, v.im);
    }
    let fit = convergence_fit(&exact, 1)?;
    println!("fit over n = 1..11: C {:.4} rho {:.4} R2 {:.4}", fit.c, fit.rho, fit.r_squared);

    let spec = EnsembleSpec::new(6, 100_000, 3).checkpoints(vec![6]);
    let ens = survivor_ensemble(&model, &spec, &SimPolicy::default().with_margin(0))?;
    let est = estimate_phi_at(&ens, &model, &SGrid::from_nonnegative(&[s])?, 6)?;
    let p = est.at(s).unwrap();
    println!(
        "Monte Carlo phi_6({s}) = {:.5}{:+.5}i +- {:.5} (exact {:.5}{:+.5}i)",
        p.re, p.im, p.std_error, exact[5].re, exact[5].im
    );
    Ok(())
}
