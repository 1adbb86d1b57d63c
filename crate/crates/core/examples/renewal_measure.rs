//! Expected number of visits of log Z_n to y + [B, C).

use bpre::envmodel::reference::dirac23;
use bpre::limits::renewal_estimate;
use bpre::SimPolicy;

fn main() -> bpre::Result<()> {
    let model = dirac23(0.5);
    for (c, y) in [(1.0, 20.0), (1.0, 30.0), (2.0, 30.0)] {
        let r = renewal_estimate(&model, 0.0, c, y, 20_000, 12, &SimPolicy::default())?;
        let (lo, hi) = r.interval95();
        println!("y = {y}  [0, {c})  estimate {:.4} in [{lo:.4}, {hi:.4}]  target {:.4}", r.estimate, r.target);
    }
    Ok(())
}
