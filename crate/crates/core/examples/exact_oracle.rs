//! Exact laws of Z_n for M0 and the annealed survival curve.

use bpre::envmodel::reference::m0;
use bpre::oracle::{exact_distribution, exact_survival_curve};

fn main() -> bpre::Result<()> {
    let model = m0();
    let law = exact_distribution(&model, 3, 8)?;
    for (k, p) in law.atoms.iter().enumerate() {
        println!("P[Z_3 = {k}] = {p:.8}");
    }
    println!("E[log Z_3 | Z_3 > 0] = {:.6}", law.conditional_log_moment(1));

    let curve = exact_survival_curve(&model, 15, 1024)?;
    for t in [1, 5, 10, 15] {
        println!("P[Z_{t} > 0] = {:.6}", curve.at(t));
    }
    let d = &curve.decrements;
    println!("decrement ratio near t = 12: {:.4}", d[11] / d[10]);
    Ok(())
}
