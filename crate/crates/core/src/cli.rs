//! Command-line surface: argument parsing, config-file merging, dispatch.
//!
//! Every subcommand accepts `--config <path>` (a flat `key = value` file)
//! plus one flag per config key; flags override file values. All output
//! goes to `--out` (stdout by default). Exit status: 0 on success, 2 on a
//! configuration error, 1 on a runtime error.

use clap::{Args, Parser, Subcommand};
use likratio::config::load_kv;
use likratio::error::Error;
use likratio::grid::{DensityField, PeriodicGrid};
use likratio::mh::{ExactModel, MhConfig, ParticleModel, RefreshMode};
use likratio::moments::{empirical_ratio_moment, ratio_moment, write_moment_csv, MomentQuery};
use likratio::particle::{forward, ParticleConfig};
use likratio::reference::{
    exact_solution, fd_solve, synthesize_observation, InitialCondition, ReferenceConfig,
};
use likratio::rng::{derive_seed, DEFAULT_CHUNK_SIZE};
use likratio::sweep::{run_sweep, SweepConfig};
use likratio::CovarianceSpec;
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

pub enum CliError {
    /// Invalid or missing configuration; exit status 2.
    Config(String),
    /// Failure while running a validly configured command; exit status 1.
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser)]
#[command(
    name = "likratio",
    version,
    about = "Particle solvers for the periodic diffusion equation and the statistics of the noisy likelihood ratios they induce"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic reference solution (Crank-Nicolson or exact spectral)
    SolveRef(SolveRefArgs),
    /// One Monte Carlo particle forward run with noise quantification
    SolveMc(SolveMcArgs),
    /// Synthetic observation: reference solution plus Gaussian noise
    Observe(ObserveArgs),
    /// Closed-form existence and value of a likelihood-ratio moment
    Moment(MomentArgs),
    /// Monte Carlo estimate of a likelihood-ratio moment
    MomentMc(MomentMcArgs),
    /// Sweep over (sigma_eta, P); study the mean approximate likelihoods
    SweepLikelihood(SweepArgs),
    /// Sweep over (sigma_eta, P); study the mean likelihood ratio
    SweepRatio(SweepArgs),
    /// Sweep over (sigma_eta, P); study the mean truncated (acceptance) ratio
    SweepAcceptance(SweepArgs),
    /// Metropolis-Hastings chain over the diffusion coefficient
    Mh(MhArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; command-line flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output file (defaults to stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections (defaults to all cores)
    #[arg(long, value_name = "T")]
    threads: Option<usize>,
}

/// Merged view of config-file values for one subcommand.
struct Resolver {
    values: HashMap<String, String>,
}

impl Resolver {
    fn new(common: &CommonArgs, valid_keys: &[&str]) -> CliResult<Self> {
        let mut values = HashMap::new();
        if let Some(path) = &common.config {
            let pairs = load_kv(path).map_err(|e| config_err(e.to_string()))?;
            for (key, value) in pairs {
                if !valid_keys.contains(&key.as_str()) {
                    return Err(config_err(format!(
                        "unknown config key `{key}`; valid keys: {}",
                        valid_keys.join(", ")
                    )));
                }
                values.insert(key, value);
            }
        }
        Ok(Resolver { values })
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> CliResult<T> {
        raw.trim()
            .parse()
            .map_err(|_| config_err(format!("cannot parse config key `{key}` from {raw:?}")))
    }

    /// Flag value if given, else config-file value, else `None`.
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => self.parse_value(key, raw).map(Some),
            None => Ok(None),
        }
    }

    fn get_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.get(flag, key)?.ok_or_else(|| {
            config_err(format!(
                "missing required key `{key}` (flag --{})",
                key.replace('_', "-")
            ))
        })
    }

    fn get_list<T: FromStr>(&self, flag: Option<String>, key: &str) -> CliResult<Option<Vec<T>>> {
        let raw = match flag {
            Some(s) => Some(s),
            None => self.values.get(key).cloned(),
        };
        match raw {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|item| self.parse_value(key, item))
                .collect::<CliResult<Vec<T>>>()
                .map(Some),
        }
    }
}

fn load_initial_condition(
    resolver: &Resolver,
    flag: Option<PathBuf>,
) -> CliResult<InitialCondition> {
    let path = match resolver.get(flag.map(|p| p.display().to_string()), "ic_file")? {
        Some(p) => PathBuf::from(p),
        None => return Ok(InitialCondition::CosineBump),
    };
    let file = std::fs::File::open(&path)
        .map_err(|e| config_err(format!("cannot open ic_file {}: {e}", path.display())))?;
    let field = DensityField::read_csv(std::io::BufReader::new(file))
        .map_err(|e| config_err(format!("invalid ic_file {}: {e}", path.display())))?;
    Ok(InitialCondition::Tabulated(field))
}

fn write_output(
    common: &CommonArgs,
    body: impl FnOnce(&mut dyn Write) -> likratio::Result<()>,
) -> CliResult<()> {
    let result = match &common.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(Error::from)?;
            let mut writer = std::io::BufWriter::new(file);
            body(&mut writer).and_then(|()| writer.flush().map_err(Error::from))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).and_then(|()| lock.flush().map_err(Error::from))
        }
    };
    match result {
        // A closed pipe on stdout is the reader's choice, not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map_err(CliError::from),
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

fn grid_from(
    resolver: &Resolver,
    n: Option<usize>,
    length: Option<f64>,
) -> CliResult<PeriodicGrid> {
    let cells = resolver.get_or(n, "n", 100)?;
    let length = resolver.get_or(length, "length", 10.0)?;
    PeriodicGrid::new(length, cells).map_err(|e| config_err(e.to_string()))
}

/// Broadcasts a comma-separated vector spec to dimension `n`.
fn vector_arg(
    resolver: &Resolver,
    flag: Option<String>,
    key: &str,
    n: usize,
) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = resolver.get_list(flag, key)?.unwrap_or_else(|| vec![0.0]);
    if values.len() == n {
        Ok(values)
    } else if values.len() == 1 {
        Ok(vec![values[0]; n])
    } else {
        Err(config_err(format!(
            "`{key}` must have 1 or {n} entries, got {}",
            values.len()
        )))
    }
}

// ---------------------------------------------------------------------------
// solve-ref

#[derive(Args)]
struct SolveRefArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of grid cells
    #[arg(long)]
    n: Option<usize>,
    /// Domain length L
    #[arg(long)]
    length: Option<f64>,
    /// Diffusion coefficient
    #[arg(long)]
    d: Option<f64>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// Reference time step
    #[arg(long)]
    dt: Option<f64>,
    /// Solver: `cn` (Crank-Nicolson) or `exact` (spectral)
    #[arg(long)]
    method: Option<String>,
    /// Tabulated initial condition (density CSV); default is the cosine bump
    #[arg(long)]
    ic_file: Option<PathBuf>,
}

const SOLVE_REF_KEYS: &[&str] = &["n", "length", "d", "t", "dt", "method", "ic_file"];

fn run_solve_ref(args: SolveRefArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, SOLVE_REF_KEYS)?;
    let grid = grid_from(&resolver, args.n, args.length)?;
    let d = resolver.get_or(args.d, "d", 0.1)?;
    let t = resolver.get_or(args.t, "t", 10.0)?;
    let dt = resolver.get_or(args.dt, "dt", 0.1)?;
    let method = resolver.get_or(args.method, "method", "cn".to_string())?;
    let ic = load_initial_condition(&resolver, args.ic_file)?;
    let field = match method.as_str() {
        "cn" => fd_solve(
            &ic,
            &ReferenceConfig {
                diffusion: d,
                t_final: t,
                dt,
                grid,
            },
        )?,
        "exact" => exact_solution(&ic, d, t, &grid)?,
        other => {
            return Err(config_err(format!(
                "unknown method `{other}`; expected cn or exact"
            )))
        }
    };
    write_output(&args.common, |out| field.write_csv(out))
}

// ---------------------------------------------------------------------------
// solve-mc

#[derive(Args)]
struct SolveMcArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of grid cells
    #[arg(long)]
    n: Option<usize>,
    /// Domain length L
    #[arg(long)]
    length: Option<f64>,
    /// Diffusion coefficient
    #[arg(long)]
    d: Option<f64>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// Particle time step (default: the final time, a single step)
    #[arg(long)]
    dt: Option<f64>,
    /// Ensemble size P
    #[arg(long)]
    particles: Option<usize>,
    /// RNG seed (required: there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,
    /// Particles per parallel chunk
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Tabulated initial condition (density CSV)
    #[arg(long)]
    ic_file: Option<PathBuf>,
}

const SOLVE_MC_KEYS: &[&str] = &[
    "n",
    "length",
    "d",
    "t",
    "dt",
    "particles",
    "seed",
    "chunk_size",
    "ic_file",
];

fn run_solve_mc(args: SolveMcArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, SOLVE_MC_KEYS)?;
    let grid = grid_from(&resolver, args.n, args.length)?;
    let d = resolver.get_or(args.d, "d", 0.1)?;
    let t = resolver.get_or(args.t, "t", 10.0)?;
    let dt = resolver.get_or(args.dt, "dt", t)?;
    let particles = resolver.get_or(args.particles, "particles", 10_000)?;
    let seed = resolver.require(args.seed, "seed")?;
    let chunk_size = resolver.get_or(args.chunk_size, "chunk_size", DEFAULT_CHUNK_SIZE)?;
    let ic = load_initial_condition(&resolver, args.ic_file)?;
    let cfg = ParticleConfig {
        particles,
        t_final: t,
        dt,
        grid,
        seed,
        chunk_size,
    };
    let output = with_threads(args.common.threads, || forward(d, &cfg, &ic))?;
    write_output(&args.common, |out| output.write_csv(out))
}

// ---------------------------------------------------------------------------
// observe

#[derive(Args)]
struct ObserveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of grid cells
    #[arg(long)]
    n: Option<usize>,
    /// Domain length L
    #[arg(long)]
    length: Option<f64>,
    /// True diffusion coefficient generating the observation
    #[arg(long)]
    d: Option<f64>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// Reference time step
    #[arg(long)]
    dt: Option<f64>,
    /// Observation noise standard deviation
    #[arg(long)]
    sigma_eta: Option<f64>,
    /// RNG seed (required: there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,
    /// Tabulated initial condition (density CSV)
    #[arg(long)]
    ic_file: Option<PathBuf>,
}

const OBSERVE_KEYS: &[&str] = &[
    "n",
    "length",
    "d",
    "t",
    "dt",
    "sigma_eta",
    "seed",
    "ic_file",
];

fn run_observe(args: ObserveArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, OBSERVE_KEYS)?;
    let grid = grid_from(&resolver, args.n, args.length)?;
    let d = resolver.get_or(args.d, "d", 0.1)?;
    let t = resolver.get_or(args.t, "t", 10.0)?;
    let dt = resolver.get_or(args.dt, "dt", 0.1)?;
    let sigma_eta = resolver.get_or(args.sigma_eta, "sigma_eta", 0.1)?;
    let seed = resolver.require(args.seed, "seed")?;
    let ic = load_initial_condition(&resolver, args.ic_file)?;
    if !(sigma_eta.is_finite() && sigma_eta > 0.0) {
        return Err(config_err(format!(
            "sigma_eta must be positive, got {sigma_eta}"
        )));
    }
    let field = fd_solve(
        &ic,
        &ReferenceConfig {
            diffusion: d,
            t_final: t,
            dt,
            grid,
        },
    )?;
    let noise = CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, grid.cells())?;
    let obs = synthesize_observation(&field, &noise, seed)?;
    write_output(&args.common, |out| obs.field.write_csv(out))
}

// ---------------------------------------------------------------------------
// moment / moment-mc

#[derive(Args)]
struct MomentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Moment order p
    #[arg(long)]
    p: Option<u32>,
    /// Dimension of the residual vectors
    #[arg(long)]
    n: Option<usize>,
    /// Observation noise standard deviation (scalar identity)
    #[arg(long)]
    sigma_eta: Option<f64>,
    /// Numerator solver-noise standard deviation
    #[arg(long)]
    sigma_delta1: Option<f64>,
    /// Denominator solver-noise standard deviation
    #[arg(long)]
    sigma_delta2: Option<f64>,
    /// Numerator residual (scalar broadcast or comma-separated vector)
    #[arg(long)]
    drho1: Option<String>,
    /// Denominator residual (scalar broadcast or comma-separated vector)
    #[arg(long)]
    drho2: Option<String>,
    /// Numerator solver-noise mean
    #[arg(long)]
    mu1: Option<String>,
    /// Denominator solver-noise mean
    #[arg(long)]
    mu2: Option<String>,
}

const MOMENT_KEYS: &[&str] = &[
    "p",
    "n",
    "sigma_eta",
    "sigma_delta1",
    "sigma_delta2",
    "drho1",
    "drho2",
    "mu1",
    "mu2",
];

fn moment_query_from(args: &MomentArgs, resolver: &Resolver) -> CliResult<MomentQuery> {
    let p = resolver.get_or(args.p, "p", 1)?;
    let n = resolver.get_or(args.n, "n", 1)?;
    if n == 0 {
        return Err(config_err("n must be positive"));
    }
    let sigma_eta = resolver.require(args.sigma_eta, "sigma_eta")?;
    let sigma_delta1 = resolver.require(args.sigma_delta1, "sigma_delta1")?;
    let sigma_delta2 = resolver.require(args.sigma_delta2, "sigma_delta2")?;
    for (key, v) in [
        ("sigma_eta", sigma_eta),
        ("sigma_delta1", sigma_delta1),
        ("sigma_delta2", sigma_delta2),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(config_err(format!("{key} must be positive, got {v}")));
        }
    }
    Ok(MomentQuery {
        order: p,
        drho1: vector_arg(resolver, args.drho1.clone(), "drho1", n)?,
        drho2: vector_arg(resolver, args.drho2.clone(), "drho2", n)?,
        mu1: vector_arg(resolver, args.mu1.clone(), "mu1", n)?,
        mu2: vector_arg(resolver, args.mu2.clone(), "mu2", n)?,
        sigma1: CovarianceSpec::scalar_identity(sigma_delta1 * sigma_delta1, n)?,
        sigma2: CovarianceSpec::scalar_identity(sigma_delta2 * sigma_delta2, n)?,
        sigma_eta: CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, n)?,
    })
}

fn run_moment(args: MomentArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, MOMENT_KEYS)?;
    let query = moment_query_from(&args, &resolver)?;
    let result = ratio_moment(&query)?;
    write_output(&args.common, |out| {
        write_moment_csv(&[(query.order, result.clone())], out)
    })
}

#[derive(Args)]
struct MomentMcArgs {
    #[command(flatten)]
    inner: MomentArgs,
    /// Number of Monte Carlo samples
    #[arg(long)]
    samples: Option<usize>,
    /// RNG seed (required: there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,
}

const MOMENT_MC_KEYS: &[&str] = &[
    "p",
    "n",
    "sigma_eta",
    "sigma_delta1",
    "sigma_delta2",
    "drho1",
    "drho2",
    "mu1",
    "mu2",
    "samples",
    "seed",
];

fn run_moment_mc(args: MomentMcArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.inner.common, MOMENT_MC_KEYS)?;
    let query = moment_query_from(&args.inner, &resolver)?;
    let samples = resolver.get_or(args.samples, "samples", 1_000_000)?;
    let seed = resolver.require(args.seed, "seed")?;
    let threads = args.inner.common.threads;
    let estimate = with_threads(threads, || empirical_ratio_moment(&query, samples, seed))?;
    write_output(&args.inner.common, |out| {
        writeln!(out, "p,estimate,standard_error")?;
        writeln!(
            out,
            "{},{},{}",
            query.order,
            likratio::grid::fmt17(estimate.estimate),
            likratio::grid::fmt17(estimate.standard_error)
        )?;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of grid cells
    #[arg(long)]
    n: Option<usize>,
    /// Domain length L
    #[arg(long)]
    length: Option<f64>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// True diffusion coefficient generating observations
    #[arg(long)]
    d_true: Option<f64>,
    /// Numerator parameter value D1
    #[arg(long)]
    d_num: Option<f64>,
    /// Denominator parameter value D2
    #[arg(long)]
    d_den: Option<f64>,
    /// Comma-separated ensemble sizes
    #[arg(long)]
    particle_counts: Option<String>,
    /// Comma-separated observation-noise standard deviations
    #[arg(long)]
    sigma_etas: Option<String>,
    /// Replications per sweep point
    #[arg(long)]
    replications: Option<usize>,
    /// Reference solver time step
    #[arg(long)]
    ref_dt: Option<f64>,
    /// Particle time step (default: the final time, a single step)
    #[arg(long)]
    particle_dt: Option<f64>,
    /// Master RNG seed (required: there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,
    /// Particles per parallel chunk
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Reuse one observation per sigma_eta instead of one per replication
    #[arg(long)]
    fixed_observation: Option<bool>,
    /// Tabulated initial condition (density CSV)
    #[arg(long)]
    ic_file: Option<PathBuf>,
}

const SWEEP_KEYS: &[&str] = &[
    "n",
    "length",
    "t",
    "d_true",
    "d_num",
    "d_den",
    "particle_counts",
    "sigma_etas",
    "replications",
    "ref_dt",
    "particle_dt",
    "seed",
    "chunk_size",
    "fixed_observation",
    "ic_file",
];

fn run_sweep_command(args: SweepArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, SWEEP_KEYS)?;
    let defaults = SweepConfig::default();
    let grid = grid_from(&resolver, args.n, args.length)?;
    let t_final = resolver.get_or(args.t, "t", defaults.t_final)?;
    let cfg = SweepConfig {
        grid,
        t_final,
        d_true: resolver.get_or(args.d_true, "d_true", defaults.d_true)?,
        d_num: resolver.get_or(args.d_num, "d_num", defaults.d_num)?,
        d_den: resolver.get_or(args.d_den, "d_den", defaults.d_den)?,
        particle_counts: resolver
            .get_list(args.particle_counts, "particle_counts")?
            .unwrap_or(defaults.particle_counts),
        sigma_etas: resolver
            .get_list(args.sigma_etas, "sigma_etas")?
            .unwrap_or(defaults.sigma_etas),
        replications: resolver.get_or(args.replications, "replications", defaults.replications)?,
        ref_dt: resolver.get_or(args.ref_dt, "ref_dt", defaults.ref_dt)?,
        particle_dt: resolver.get_or(args.particle_dt, "particle_dt", t_final)?,
        seed: resolver.require(args.seed, "seed")?,
        chunk_size: resolver.get_or(args.chunk_size, "chunk_size", defaults.chunk_size)?,
        fixed_observation: resolver
            .get(args.fixed_observation, "fixed_observation")?
            .unwrap_or(false),
        ic: load_initial_condition(&resolver, args.ic_file)?,
    };
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    eprintln!(
        "sweep: {} sigma_eta values x {} ensemble sizes x {} replications",
        cfg.sigma_etas.len(),
        cfg.particle_counts.len(),
        cfg.replications
    );
    let records = with_threads(args.common.threads, || run_sweep(&cfg))?;
    write_output(&args.common, |out| {
        likratio::sweep::write_csv(&records, out)
    })
}

// ---------------------------------------------------------------------------
// mh

#[derive(Args)]
struct MhArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of grid cells
    #[arg(long)]
    n: Option<usize>,
    /// Domain length L
    #[arg(long)]
    length: Option<f64>,
    /// Final time
    #[arg(long)]
    t: Option<f64>,
    /// True diffusion coefficient generating the observation
    #[arg(long)]
    d_true: Option<f64>,
    /// Reference solver time step for the observation
    #[arg(long)]
    ref_dt: Option<f64>,
    /// Observation noise standard deviation
    #[arg(long)]
    sigma_eta: Option<f64>,
    /// Seed of the observation draw (default: derived from the chain seed)
    #[arg(long)]
    obs_seed: Option<u64>,
    /// Uniform prior lower bound
    #[arg(long)]
    prior_min: Option<f64>,
    /// Uniform prior upper bound
    #[arg(long)]
    prior_max: Option<f64>,
    /// Random-walk proposal standard deviation
    #[arg(long)]
    proposal_std: Option<f64>,
    /// Number of chain states (including the initial draw)
    #[arg(long)]
    chain_length: Option<usize>,
    /// `refresh-both` or `retain-current`
    #[arg(long)]
    refresh_mode: Option<String>,
    /// Forward model: `particle` or `exact`
    #[arg(long)]
    forward: Option<String>,
    /// Ensemble size of the particle forward model
    #[arg(long)]
    particles: Option<usize>,
    /// Particle time step (default: the final time, a single step)
    #[arg(long)]
    particle_dt: Option<f64>,
    /// Chain RNG seed (required: there is no wall-clock default)
    #[arg(long)]
    seed: Option<u64>,
    /// Particles per parallel chunk
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Tabulated initial condition (density CSV)
    #[arg(long)]
    ic_file: Option<PathBuf>,
}

const MH_KEYS: &[&str] = &[
    "n",
    "length",
    "t",
    "d_true",
    "ref_dt",
    "sigma_eta",
    "obs_seed",
    "prior_min",
    "prior_max",
    "proposal_std",
    "chain_length",
    "refresh_mode",
    "forward",
    "particles",
    "particle_dt",
    "seed",
    "chunk_size",
    "ic_file",
];

fn run_mh(args: MhArgs) -> CliResult<()> {
    let resolver = Resolver::new(&args.common, MH_KEYS)?;
    let grid = grid_from(&resolver, args.n, args.length)?;
    let t_final = resolver.get_or(args.t, "t", 10.0)?;
    let d_true = resolver.get_or(args.d_true, "d_true", 0.1)?;
    let ref_dt = resolver.get_or(args.ref_dt, "ref_dt", 0.1)?;
    let sigma_eta = resolver.get_or(args.sigma_eta, "sigma_eta", 0.1)?;
    if !(sigma_eta.is_finite() && sigma_eta > 0.0) {
        return Err(config_err(format!(
            "sigma_eta must be positive, got {sigma_eta}"
        )));
    }
    let seed = resolver.require(args.seed, "seed")?;
    let obs_seed = resolver
        .get(args.obs_seed, "obs_seed")?
        .unwrap_or_else(|| derive_seed(seed, &[0xB5]));
    let defaults = MhConfig::default();
    let cfg = MhConfig {
        prior_min: resolver.get_or(args.prior_min, "prior_min", defaults.prior_min)?,
        prior_max: resolver.get_or(args.prior_max, "prior_max", defaults.prior_max)?,
        proposal_std: resolver.get_or(args.proposal_std, "proposal_std", defaults.proposal_std)?,
        chain_length: resolver.get_or(args.chain_length, "chain_length", defaults.chain_length)?,
        refresh_mode: match resolver
            .get_or(
                args.refresh_mode,
                "refresh_mode",
                "refresh-both".to_string(),
            )?
            .as_str()
        {
            "refresh-both" => RefreshMode::RefreshBoth,
            "retain-current" => RefreshMode::RetainCurrent,
            other => {
                return Err(config_err(format!(
                    "unknown refresh_mode `{other}`; expected refresh-both or retain-current"
                )))
            }
        },
        seed,
    };
    cfg.validate().map_err(|e| config_err(e.to_string()))?;
    let ic = load_initial_condition(&resolver, args.ic_file)?;
    let field = fd_solve(
        &ic,
        &ReferenceConfig {
            diffusion: d_true,
            t_final,
            dt: ref_dt,
            grid,
        },
    )?;
    let noise = CovarianceSpec::scalar_identity(sigma_eta * sigma_eta, grid.cells())?;
    let observation = synthesize_observation(&field, &noise, obs_seed)?;
    let forward_kind = resolver.get_or(args.forward, "forward", "particle".to_string())?;
    let threads = args.common.threads;
    let output = match forward_kind.as_str() {
        "particle" => {
            let model = ParticleModel {
                observation,
                ic,
                particles: resolver.get_or(args.particles, "particles", 10_000)?,
                t_final,
                dt: resolver.get_or(args.particle_dt, "particle_dt", t_final)?,
                chunk_size: resolver.get_or(args.chunk_size, "chunk_size", DEFAULT_CHUNK_SIZE)?,
            };
            with_threads(threads, || likratio::mh::run_chain(&cfg, &model))?
        }
        "exact" => {
            let model = ExactModel {
                observation,
                ic,
                t_final,
            };
            with_threads(threads, || likratio::mh::run_chain(&cfg, &model))?
        }
        other => {
            return Err(config_err(format!(
                "unknown forward model `{other}`; expected particle or exact"
            )))
        }
    };
    write_output(&args.common, |out| output.write_csv(out))
}

/// Parses arguments and dispatches; the caller maps the error variants to
/// exit codes.
pub fn run() -> CliResult<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::SolveRef(args) => run_solve_ref(args),
        Command::SolveMc(args) => run_solve_mc(args),
        Command::Observe(args) => run_observe(args),
        Command::Moment(args) => run_moment(args),
        Command::MomentMc(args) => run_moment_mc(args),
        Command::SweepLikelihood(args)
        | Command::SweepRatio(args)
        | Command::SweepAcceptance(args) => run_sweep_command(args),
        Command::Mh(args) => run_mh(args),
    }
}
