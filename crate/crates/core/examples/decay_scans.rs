//! Decay scans on M0: small populations, negative moments, survival gap and
//! the growth of log moments.

use bpre::envmodel::reference::m0;
use bpre::limits::{decay_scan, DecayKind};
use bpre::SimPolicy;

fn main() -> bpre::Result<()> {
    let model = m0();
    let ns: Vec<usize> = (1..=10).collect();
    let kinds = [
        DecayKind::SmallPop { theta: model.mu() / 2.0 },
        DecayKind::NegMoment { delta: 0.5 },
        DecayKind::SurvivalGap { m: 10 },
        DecayKind::LogMoment { k: 2 },
    ];
    for kind in kinds {
        let scan = decay_scan(&model, kind, &ns, 100_000, 21, &SimPolicy::default())?;
        match scan.log_moment_max {
            Some((n, v)) => println!("{:12}  max values[n]/n^2 = {v:.4} at n = {n}", kind.name()),
            None => println!(
                "{:12}  beta {:.4}  R2 {:.4}",
                kind.name(),
                scan.beta_hat.unwrap_or(f64::NAN),
                scan.r_squared.unwrap_or(f64::NAN)
            ),
        }
    }
    Ok(())
}
