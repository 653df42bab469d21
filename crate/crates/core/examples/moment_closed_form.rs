//! Closed-form raw moments of the likelihood ratio against the brute-force
//! sampling oracle, including a case where the moment does not exist.
//!
//! Run with: `cargo run --example moment_closed_form`

use likratio::moments::{empirical_ratio_moment, ratio_moment, MomentQuery};
use likratio::CovarianceSpec;

fn scalar_query(order: u32, sigma_eta: f64, sigma1: f64, sigma2: f64, drho2: f64) -> MomentQuery {
    MomentQuery {
        order,
        drho1: vec![0.0],
        drho2: vec![drho2],
        mu1: vec![0.0],
        mu2: vec![0.0],
        sigma1: CovarianceSpec::scalar_identity(sigma1 * sigma1, 1).unwrap(),
        sigma2: CovarianceSpec::scalar_identity(sigma2 * sigma2, 1).unwrap(),
        sigma_eta: CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, 1).unwrap(),
    }
}

fn main() -> likratio::Result<()> {
    println!("scalar queries: sigma_eta = 1, sigma_delta = 0.5 on both sides");
    for (label, query) in [
        ("zero residuals", scalar_query(1, 1.0, 0.5, 0.5, 0.0)),
        (
            "denominator residual 1",
            scalar_query(1, 1.0, 0.5, 0.5, 1.0),
        ),
    ] {
        let closed = ratio_moment(&query)?;
        let est = empirical_ratio_moment(&query, 2_000_000, 17)?;
        println!(
            "  {label}: closed form {:.5}, sampled {:.5} +/- {:.5}",
            closed.log_moment.unwrap().exp(),
            est.estimate,
            est.standard_error
        );
    }

    println!();
    println!("pushing the denominator noise past the boundary sigma_eta:");
    for sigma2 in [0.8, 0.999, 1.001, 1.3] {
        let query = scalar_query(1, 1.0, 0.5, sigma2, 0.0);
        let result = ratio_moment(&query)?;
        match result.log_moment {
            Some(lm) => println!("  sigma_delta2 = {sigma2}: moment = {:.4}", lm.exp()),
            None => println!(
                "  sigma_delta2 = {sigma2}: moment does not exist (boundary flag {})",
                result.boundary
            ),
        }
    }

    println!();
    println!("second moments tighten the requirement to sigma_delta2 < sigma_eta/sqrt(2):");
    for sigma2 in [0.5, 0.75] {
        let query = scalar_query(2, 1.0, 0.5, sigma2, 0.0);
        let result = ratio_moment(&query)?;
        println!(
            "  sigma_delta2 = {sigma2}: second moment exists = {}",
            result.exists
        );
    }
    Ok(())
}
