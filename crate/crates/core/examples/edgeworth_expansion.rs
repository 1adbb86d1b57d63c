//! G_3 against Phi and the empirical CDF of the standardized log Z_n.

use bpre::edgeworth::{standardized_log_z, CdfComparison, EdgeworthSeries};
use bpre::envmodel::reference::dirac23;
use bpre::numeric::normal_cdf;
use bpre::{survivor_ensemble, EnsembleSpec, SimPolicy};
use num_complex::Complex64;

fn main() -> bpre::Result<()> {
    let model = dirac23(0.75);
    // log Z_n is a random walk here, so phi = 1 and phi'(0) = 0.
    let series = EdgeworthSeries::for_model(&model, &[Complex64::new(0.0, 0.0)], 3)?;
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!("x = {x:+.1}  Phi {:.5}  G_3(n = 25) {:.5}", normal_cdf(x), series.evaluate(25, x));
    }
    let spec = EnsembleSpec::new(25, 200_000, 9).checkpoints(vec![25]);
    let ens = survivor_ensemble(&model, &spec, &SimPolicy::default())?;
    let xs = standardized_log_z(&ens, &model, 25)?;
    let c = CdfComparison::from_sorted(&xs, &series, 25)?;
    println!(
        "sup|F - Phi| = {:.5}  sup|F - G_3| = {:.5}  DKW 99% = {:.5}",
        c.sup_phi, c.sup_gr, c.dkw
    );
    Ok(())
}
