//! A desk-scale sweep over observation noise and ensemble size, printing
//! the long-format CSV that the sweep subcommands emit.
//!
//! Run with: `cargo run --example acceptance_sweep`

use likratio::sweep::{run_sweep, write_csv, SweepConfig};

fn main() -> likratio::Result<()> {
    let cfg = SweepConfig {
        particle_counts: vec![100, 1_000, 10_000],
        sigma_etas: vec![0.01, 0.05, 0.25],
        replications: 200,
        seed: 7,
        ..SweepConfig::default()
    };
    eprintln!(
        "running {} x {} sweep points, {} replications each...",
        cfg.sigma_etas.len(),
        cfg.particle_counts.len(),
        cfg.replications
    );
    let records = run_sweep(&cfg)?;
    write_csv(&records, std::io::stdout().lock())?;
    eprintln!();
    eprintln!("mean_truncated drifts toward 0.5 wherever the solver noise");
    eprintln!("dominates the observation noise (sigma_delta >> sigma_eta);");
    eprintln!("empty mean fields mark points whose samples all underflowed");
    eprintln!("raw double-precision density evaluation.");
    Ok(())
}
