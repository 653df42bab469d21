//! Sweep harness: likelihood-ratio statistics over ensemble size and
//! observation noise.
//!
//! One replication draws a fresh synthetic observation from the finite
//! difference reference solution at the true diffusion coefficient, runs
//! two independent particle forward maps (numerator and denominator
//! parameter values), and evaluates both likelihoods and their ratio. A
//! sweep runs `R` replications at every `(σ_η, P)` pair of the configured
//! grid and aggregates per-point records.
//!
//! Aggregation conventions:
//!
//! * A replication is *invalid* when both its likelihood densities
//!   underflow double precision (a raw-density pipeline would have divided
//!   zero by zero). Likelihood means and the ratio mean are taken over
//!   valid replications only, so such points drop out of log-scale plots
//!   exactly as omitted samples would.
//! * The truncated ratio and `σ_δ` are computed in log space and are always
//!   well defined, so their means run over all replications; the
//!   solver-noise-dominated regime, where nothing survives the validity
//!   filter, is precisely where the two-state behavior of the truncated
//!   ratio lives.
//! * Ratio samples that overflow to `+∞` are valid; one of them makes the
//!   ratio mean `+∞` (divergence shows up as blowup, not as an error).
//!
//! All seeds derive from the master seed and the replication coordinates,
//! so a sweep is reproducible byte for byte.

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::grid::{fmt17, parse_field, PeriodicGrid};
use crate::likelihood::{log_likelihood, log_ratio, LogLikelihood, RatioSample};
use crate::particle::{forward, ParticleConfig};
use crate::reference::{fd_solve, synthesize_observation, InitialCondition, ReferenceConfig};
use crate::rng::{derive_seed, DEFAULT_CHUNK_SIZE};
use rayon::prelude::*;
use std::io::{BufRead, Write};

const ROLE_OBSERVATION: u64 = 1;
const ROLE_NUMERATOR: u64 = 2;
const ROLE_DENOMINATOR: u64 = 3;

/// Configuration of a sweep. Defaults follow the reference experiment:
/// `N = 100`, `L = 10`, `t = 10`, `D* = 0.1`, ensemble sizes
/// `10², …, 10⁶`, seven observation-noise levels, 1000 replications, and a
/// single particle step `Δt = t`.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: PeriodicGrid,
    pub t_final: f64,
    /// Diffusion coefficient generating the observations.
    pub d_true: f64,
    /// Numerator parameter value `D₁`.
    pub d_num: f64,
    /// Denominator parameter value `D₂`.
    pub d_den: f64,
    pub particle_counts: Vec<usize>,
    pub sigma_etas: Vec<f64>,
    pub replications: usize,
    /// Time step of the finite difference reference solution.
    pub ref_dt: f64,
    /// Particle time step; the default single step `Δt = t` is exact in law.
    pub particle_dt: f64,
    pub seed: u64,
    pub chunk_size: usize,
    /// Reuse one observation per `σ_η` (expectation over solver noise only)
    /// instead of drawing a fresh observation per replication.
    pub fixed_observation: bool,
    pub ic: InitialCondition,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: PeriodicGrid::new(10.0, 100).expect("valid default grid"),
            t_final: 10.0,
            d_true: 0.1,
            d_num: 0.1,
            d_den: 0.1,
            particle_counts: vec![100, 1_000, 10_000, 100_000, 1_000_000],
            sigma_etas: vec![0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0],
            replications: 1000,
            ref_dt: 0.1,
            particle_dt: 10.0,
            seed: 0,
            chunk_size: DEFAULT_CHUNK_SIZE,
            fixed_observation: false,
            ic: InitialCondition::CosineBump,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_true", self.d_true),
            ("d_num", self.d_num),
            ("d_den", self.d_den),
            ("ref_dt", self.ref_dt),
            ("particle_dt", self.particle_dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.particle_counts.is_empty() {
            return Err(Error::Config("particle_counts must not be empty".into()));
        }
        if self.particle_counts.contains(&0) {
            return Err(Error::Config("particle counts must be positive".into()));
        }
        if self.sigma_etas.is_empty() {
            return Err(Error::Config("sigma_etas must not be empty".into()));
        }
        if self.sigma_etas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config("sigma_eta values must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if self.chunk_size == 0 {
            return Err(Error::Config("chunk_size must be positive".into()));
        }
        ReferenceConfig {
            diffusion: self.d_true,
            t_final: self.t_final,
            dt: self.ref_dt,
            grid: self.grid,
        }
        .validate()?;
        self.particle_config(1, self.seed).validate()?;
        self.ic.validate(self.grid.length())
    }

    fn particle_config(&self, particles: usize, seed: u64) -> ParticleConfig {
        ParticleConfig {
            particles,
            t_final: self.t_final,
            dt: self.particle_dt,
            grid: self.grid,
            seed,
            chunk_size: self.chunk_size,
        }
    }
}

/// Everything produced by one replication.
#[derive(Debug, Clone)]
pub struct Replication {
    pub numerator: LogLikelihood,
    pub denominator: LogLikelihood,
    pub ratio: RatioSample,
    /// `σ_δ` of the denominator forward run: the solver-noise scale that
    /// governs moment existence.
    pub sigma_delta_den: f64,
}

/// Runs one replication at the given noise level and ensemble size.
///
/// Seeds for the observation draw and the two forward runs derive from
/// `(master seed, σ_η, P, replication index)`, so replications are
/// independent and reproducible in isolation.
pub fn run_replication(
    cfg: &SweepConfig,
    sigma_eta: f64,
    particles: usize,
    rep_index: usize,
) -> Result<Replication> {
    if !(sigma_eta.is_finite() && sigma_eta > 0.0) {
        return Err(Error::invalid(format!(
            "sigma_eta must be positive, got {sigma_eta}"
        )));
    }
    if particles == 0 {
        return Err(Error::invalid("ensemble size must be positive"));
    }
    let reference = fd_solve(
        &cfg.ic,
        &ReferenceConfig {
            diffusion: cfg.d_true,
            t_final: cfg.t_final,
            dt: cfg.ref_dt,
            grid: cfg.grid,
        },
    )?;
    let noise = CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, cfg.grid.cells())?;
    let sbits = sigma_eta.to_bits();
    let rep = rep_index as u64;
    let obs_seed = if cfg.fixed_observation {
        derive_seed(cfg.seed, &[ROLE_OBSERVATION, sbits])
    } else {
        derive_seed(cfg.seed, &[ROLE_OBSERVATION, sbits, particles as u64, rep])
    };
    let obs = synthesize_observation(&reference, &noise, obs_seed)?;

    let num_seed = derive_seed(cfg.seed, &[ROLE_NUMERATOR, sbits, particles as u64, rep]);
    let den_seed = derive_seed(cfg.seed, &[ROLE_DENOMINATOR, sbits, particles as u64, rep]);
    let num_out = forward(
        cfg.d_num,
        &cfg.particle_config(particles, num_seed),
        &cfg.ic,
    )?;
    let den_out = forward(
        cfg.d_den,
        &cfg.particle_config(particles, den_seed),
        &cfg.ic,
    )?;

    let numerator = log_likelihood(&obs, &num_out.field, &noise)?;
    let denominator = log_likelihood(&obs, &den_out.field, &noise)?;
    let ratio = log_ratio(&numerator, &denominator)?;
    Ok(Replication {
        numerator,
        denominator,
        ratio,
        sigma_delta_den: den_out.sigma_delta,
    })
}

/// Aggregate statistics of one `(σ_η, P)` sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sigma_eta: f64,
    pub particle_count: usize,
    /// Mean `σ_δ` of the denominator runs, over all replications.
    pub sigma_delta_mean: Option<f64>,
    /// Log of the mean numerator likelihood over valid replications.
    pub mean_lik_num_log: Option<f64>,
    /// Log of the mean denominator likelihood over valid replications.
    pub mean_lik_den_log: Option<f64>,
    /// Mean ratio over valid replications; `+∞` if any of them overflowed.
    pub mean_ratio: Option<f64>,
    /// Mean truncated ratio over all replications.
    pub mean_truncated: Option<f64>,
    pub n_valid: usize,
    pub n_invalid: usize,
    pub n_overflow: usize,
}

/// Log of the arithmetic mean of `exp(v)` over the given log values.
fn log_mean_exp(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Some(m + (sum / values.len() as f64).ln())
}

/// Collapses the replications of one sweep point into a record.
pub fn aggregate(sigma_eta: f64, particle_count: usize, reps: &[Replication]) -> SweepRecord {
    let n = reps.len();
    let valid: Vec<&Replication> = reps
        .iter()
        .filter(|r| !r.ratio.invalid_in_paper_convention)
        .collect();
    let n_valid = valid.len();
    let n_overflow = valid.iter().filter(|r| r.ratio.ratio.is_infinite()).count();
    let num_logs: Vec<f64> = valid.iter().map(|r| r.numerator.value).collect();
    let den_logs: Vec<f64> = valid.iter().map(|r| r.denominator.value).collect();
    let mean_ratio = if n_valid > 0 {
        Some(valid.iter().map(|r| r.ratio.ratio).sum::<f64>() / n_valid as f64)
    } else {
        None
    };
    let mean_truncated = if n > 0 {
        Some(reps.iter().map(|r| r.ratio.truncated).sum::<f64>() / n as f64)
    } else {
        None
    };
    let sigma_delta_mean = if n > 0 {
        Some(reps.iter().map(|r| r.sigma_delta_den).sum::<f64>() / n as f64)
    } else {
        None
    };
    SweepRecord {
        sigma_eta,
        particle_count,
        sigma_delta_mean,
        mean_lik_num_log: log_mean_exp(&num_logs),
        mean_lik_den_log: log_mean_exp(&den_logs),
        mean_ratio,
        mean_truncated,
        n_valid,
        n_invalid: n - n_valid,
        n_overflow,
    }
}

/// Runs the full sweep: `R` replications at every `(σ_η, P)` pair.
///
/// Replications run in parallel but are collected and aggregated in index
/// order, so the result depends only on the configuration.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.sigma_etas.len() * cfg.particle_counts.len());
    for &sigma_eta in &cfg.sigma_etas {
        for &particles in &cfg.particle_counts {
            let reps: Vec<Replication> = (0..cfg.replications)
                .into_par_iter()
                .map(|rep| run_replication(cfg, sigma_eta, particles, rep))
                .collect::<Result<_>>()?;
            records.push(aggregate(sigma_eta, particles, &reps));
        }
    }
    Ok(records)
}

/// Writes sweep records as a long-format CSV, sorted by
/// `(sigma_eta, particle_count)`. Floats carry 17 significant digits,
/// infinities render as `inf`, and absent means render as empty fields.
pub fn write_csv<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    if records.is_empty() {
        return Err(Error::invalid("no sweep records to write"));
    }
    let mut sorted: Vec<&SweepRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.sigma_eta
            .total_cmp(&b.sigma_eta)
            .then(a.particle_count.cmp(&b.particle_count))
    });
    writeln!(
        out,
        "sigma_eta,particle_count,sigma_delta_mean,mean_lik_num_log,mean_lik_den_log,mean_ratio,mean_truncated,n_valid,n_invalid,n_overflow"
    )?;
    for r in sorted {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt17(r.sigma_eta),
            r.particle_count,
            opt17(r.sigma_delta_mean),
            opt17(r.mean_lik_num_log),
            opt17(r.mean_lik_den_log),
            opt17(r.mean_ratio),
            opt17(r.mean_truncated),
            r.n_valid,
            r.n_invalid,
            r.n_overflow
        )?;
    }
    Ok(())
}

fn opt17(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

/// Reads records back from the CSV written by [`write_csv`].
pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<SweepRecord>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty sweep CSV".into()))??;
    if header.trim()
        != "sigma_eta,particle_count,sigma_delta_mean,mean_lik_num_log,mean_lik_den_log,mean_ratio,mean_truncated,n_valid,n_invalid,n_overflow"
    {
        return Err(Error::Parse(format!("unexpected sweep CSV header: {header}")));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse(format!(
                "expected 10 fields, got {}",
                fields.len()
            )));
        }
        records.push(SweepRecord {
            sigma_eta: parse_field(Some(fields[0]), "sigma_eta")?,
            particle_count: parse_field(Some(fields[1]), "particle_count")?,
            sigma_delta_mean: parse_optional(fields[2], "sigma_delta_mean")?,
            mean_lik_num_log: parse_optional(fields[3], "mean_lik_num_log")?,
            mean_lik_den_log: parse_optional(fields[4], "mean_lik_den_log")?,
            mean_ratio: parse_optional(fields[5], "mean_ratio")?,
            mean_truncated: parse_optional(fields[6], "mean_truncated")?,
            n_valid: parse_field(Some(fields[7]), "n_valid")?,
            n_invalid: parse_field(Some(fields[8]), "n_invalid")?,
            n_overflow: parse_field(Some(fields[9]), "n_overflow")?,
        });
    }
    Ok(records)
}

fn parse_optional(raw: &str, name: &str) -> Result<Option<f64>> {
    if raw.trim().is_empty() {
        return Ok(None);
    }
    parse_field(Some(raw), name).map(Some)
}
