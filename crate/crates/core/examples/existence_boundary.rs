//! The existence boundary of the first ratio moment, seen two ways: the
//! Loewner-order criterion and the stability of batch means in the
//! sampling oracle.
//!
//! Run with: `cargo run --example existence_boundary`

use likratio::moments::{empirical_batch_means, moment_exists, MomentQuery};
use likratio::CovarianceSpec;

fn main() -> likratio::Result<()> {
    let sigma_eta = 1.0f64;
    println!("first-moment existence for sigma_eta = {sigma_eta} (scalar case):");
    println!(
        "{:>14} {:>8} {:>26}",
        "sigma_delta2", "exists", "max/median of batch means"
    );
    for sigma2 in [0.5f64, 0.8, 0.95, 1.05, 1.25, 1.5] {
        let eta = CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, 1)?;
        let delta = CovarianceSpec::scalar_identity(sigma2 * sigma2, 1)?;
        let exists = moment_exists(1, &eta, &delta)?;
        let query = MomentQuery {
            order: 1,
            drho1: vec![0.0],
            drho2: vec![0.0],
            mu1: vec![0.0],
            mu2: vec![0.0],
            sigma1: CovarianceSpec::scalar_identity(0.25, 1)?,
            sigma2: delta,
            sigma_eta: eta,
        };
        let means = empirical_batch_means(&query, 200_000, 10, 5)?;
        let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sorted = means.clone();
        sorted.sort_by(f64::total_cmp);
        let median = 0.5 * (sorted[4] + sorted[5]);
        println!("{sigma2:>14} {exists:>8} {:>26.2}", top / median);
    }
    println!();
    println!("Inside the boundary batch means agree; outside, a single batch");
    println!("can dwarf the rest because the estimator has no finite mean.");
    Ok(())
}
