//! Monte Carlo particle solver: the approximate forward map of the inverse
//! problem.
//!
//! An ensemble of `P` particles is drawn i.i.d. from the initial density by
//! rejection sampling, propagated by the Euler–Maruyama rule
//! `X_{k+1} = X_k + sqrt(2 D Δt) W_k` with wrapping into `[0, L)` after
//! every step, and binned into a histogram density
//! `ρ̂_n = count_n / (P Δx)`. Because the diffusion coefficient is
//! constant, the time discretization is exact in law; the estimator's only
//! bias is the `O(Δx²)` binning bias at cell centers, and its per-cell
//! variance scales as `O(1/(PΔx))`.
//!
//! Work is split into fixed-size particle chunks, each driven by its own
//! counter-based RNG substream, so output is bit-identical for a fixed
//! `(seed, chunk_size)` regardless of thread count.

use crate::error::{Error, Result};
use crate::grid::{fmt17, DensityField, PeriodicGrid};
use crate::reference::{steps_for, InitialCondition};
use crate::rng::{chunk_ranges, derive_seed, stream_rng, DEFAULT_CHUNK_SIZE};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::Write;

/// Seed-derivation labels for the two random phases of a forward run.
const PHASE_INITIAL: u64 = 1;
const PHASE_PROPAGATE: u64 = 2;
const PHASE_REPLICATE: u64 = 3;

/// Positions of a particle ensemble, wrapped into `[0, L)`.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    grid: PeriodicGrid,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, grid: PeriodicGrid) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("ensemble must hold at least one particle"));
        }
        if positions
            .iter()
            .any(|x| !x.is_finite() || *x < 0.0 || *x >= grid.length())
        {
            return Err(Error::invalid("particle positions must lie in [0, L)"));
        }
        Ok(ParticleEnsemble { positions, grid })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Configuration of a particle forward run (everything but the diffusion
/// coefficient, which is the parameter being inferred).
#[derive(Debug, Clone)]
pub struct ParticleConfig {
    /// Ensemble size `P`.
    pub particles: usize,
    /// Final time `t ≥ 0`.
    pub t_final: f64,
    /// Particle time step; `t/Δt` must be an integer. A single step
    /// `Δt = t` is exact in law for constant diffusion.
    pub dt: f64,
    pub grid: PeriodicGrid,
    pub seed: u64,
    /// Particles per parallel chunk; part of the reproducibility contract.
    pub chunk_size: usize,
}

impl ParticleConfig {
    pub fn new(particles: usize, t_final: f64, dt: f64, grid: PeriodicGrid, seed: u64) -> Self {
        ParticleConfig {
            particles,
            t_final,
            dt,
            grid,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::invalid("ensemble size must be positive"));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::invalid(format!(
                "final time must be nonnegative, got {}",
                self.t_final
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::invalid("chunk size must be positive"));
        }
        self.steps().map(|_| ())
    }

    pub fn steps(&self) -> Result<usize> {
        steps_for(self.t_final, self.dt)
    }
}

/// Output of one forward run: the binned density, its per-cell variance
/// estimates, and the scalar solver-noise summary
/// `σ_δ = sqrt(max_n var_n)`.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub field: DensityField,
    pub cell_variances: Vec<f64>,
    pub sigma_delta: f64,
    pub particles: usize,
    pub seed: u64,
}

impl ForwardOutput {
    /// Writes `cell_index,x_center,density,variance` rows followed by a
    /// `# sigma_delta=... P=... seed=...` metadata line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "cell_index,x_center,density,variance")?;
        let grid = self.field.grid();
        for (n, (v, var)) in self
            .field
            .values()
            .iter()
            .zip(&self.cell_variances)
            .enumerate()
        {
            writeln!(
                out,
                "{},{},{},{}",
                n,
                fmt17(grid.center(n)),
                fmt17(*v),
                fmt17(*var)
            )?;
        }
        writeln!(
            out,
            "# sigma_delta={} P={} seed={}",
            fmt17(self.sigma_delta),
            self.particles,
            self.seed
        )?;
        Ok(())
    }
}

/// Fills `out` with i.i.d. draws from the initial density by rejection
/// sampling against the uniform envelope.
fn fill_initial_chunk(
    ic: &InitialCondition,
    grid: &PeriodicGrid,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let length = grid.length();
    let envelope = ic.max_density(length);
    for slot in out.iter_mut() {
        loop {
            let x = length * rng.random::<f64>();
            let u = envelope * rng.random::<f64>();
            if u < ic.density_at(x, length) {
                *slot = x;
                break;
            }
        }
    }
}

/// Advances a chunk of particles `steps` Euler–Maruyama steps, wrapping
/// after every step.
fn propagate_chunk(
    positions: &mut [f64],
    grid: &PeriodicGrid,
    diffusion: f64,
    dt: f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) {
    let scale = (2.0 * diffusion * dt).sqrt();
    for _ in 0..steps {
        for x in positions.iter_mut() {
            let w: f64 = rng.sample(StandardNormal);
            *x = grid.wrap_fast(*x + scale * w);
        }
    }
}

fn count_chunk(positions: &[f64], grid: &PeriodicGrid, counts: &mut [u64]) {
    for &x in positions {
        counts[grid.cell_of(x)] += 1;
    }
}

/// Draws `particles` i.i.d. positions from the initial density.
///
/// Deterministic for a fixed seed; parallel over chunks of the default
/// chunk size.
pub fn sample_initial(
    ic: &InitialCondition,
    particles: usize,
    grid: &PeriodicGrid,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if particles == 0 {
        return Err(Error::invalid("ensemble size must be positive"));
    }
    ic.validate(grid.length())?;
    let mut positions = vec![0.0; particles];
    positions
        .par_chunks_mut(DEFAULT_CHUNK_SIZE)
        .enumerate()
        .for_each(|(chunk, slice)| {
            let mut rng = stream_rng(seed, chunk as u64);
            fill_initial_chunk(ic, grid, &mut rng, slice);
        });
    ParticleEnsemble::new(positions, *grid)
}

/// Euler–Maruyama propagation of an ensemble over `steps` steps of size
/// `dt`, with periodic wrapping applied after every step.
pub fn propagate(
    ensemble: &ParticleEnsemble,
    diffusion: f64,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if !(diffusion.is_finite() && diffusion >= 0.0) {
        return Err(Error::invalid(format!(
            "diffusion coefficient must be nonnegative, got {diffusion}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let mut positions = ensemble.positions.clone();
    let grid = ensemble.grid;
    positions
        .par_chunks_mut(DEFAULT_CHUNK_SIZE)
        .enumerate()
        .for_each(|(chunk, slice)| {
            let mut rng = stream_rng(seed, chunk as u64);
            propagate_chunk(slice, &grid, diffusion, dt, steps, &mut rng);
        });
    ParticleEnsemble::new(positions, grid)
}

/// Histogram density estimate `ρ̂_n = count_n / (P Δx)`.
pub fn bin(ensemble: &ParticleEnsemble) -> DensityField {
    let grid = ensemble.grid;
    let mut counts = vec![0u64; grid.cells()];
    count_chunk(&ensemble.positions, &grid, &mut counts);
    field_from_counts(&counts, ensemble.len(), &grid)
}

fn field_from_counts(counts: &[u64], particles: usize, grid: &PeriodicGrid) -> DensityField {
    let scale = 1.0 / (particles as f64 * grid.spacing());
    let values = counts.iter().map(|c| *c as f64 * scale).collect();
    DensityField::new(*grid, values).expect("histogram values are finite")
}

/// Binomial plug-in estimate of the per-cell variance of the binned
/// density: `v_n = p̂_n (1 - p̂_n) / (P Δx²)` with `p̂_n = ρ̂_n Δx`.
pub fn estimate_cell_variances(field: &DensityField, particles: usize) -> Result<Vec<f64>> {
    if particles == 0 {
        return Err(Error::invalid("ensemble size must be positive"));
    }
    let dx = field.grid().spacing();
    let denom = particles as f64 * dx * dx;
    Ok(field
        .values()
        .iter()
        .map(|v| {
            let p = (v * dx).clamp(0.0, 1.0);
            p * (1.0 - p) / denom
        })
        .collect())
}

/// Full forward map: sample, propagate, bin, quantify noise.
///
/// `σ_δ` is the square root of the largest per-cell variance estimate,
/// which is robust to cells holding few or no particles. Bit-reproducible
/// for fixed `(seed, chunk_size)` independent of thread count.
pub fn forward(
    diffusion: f64,
    cfg: &ParticleConfig,
    ic: &InitialCondition,
) -> Result<ForwardOutput> {
    if !(diffusion.is_finite() && diffusion > 0.0) {
        return Err(Error::invalid(format!(
            "diffusion coefficient must be positive, got {diffusion}"
        )));
    }
    cfg.validate()?;
    ic.validate(cfg.grid.length())?;
    let steps = cfg.steps()?;
    let seed_init = derive_seed(cfg.seed, &[PHASE_INITIAL]);
    let seed_prop = derive_seed(cfg.seed, &[PHASE_PROPAGATE]);
    let grid = cfg.grid;

    let partials: Vec<Vec<u64>> = chunk_ranges(cfg.particles, cfg.chunk_size)
        .into_par_iter()
        .enumerate()
        .map(|(chunk, range)| {
            let mut positions = vec![0.0; range.len()];
            let mut rng = stream_rng(seed_init, chunk as u64);
            fill_initial_chunk(ic, &grid, &mut rng, &mut positions);
            if steps > 0 {
                let mut rng = stream_rng(seed_prop, chunk as u64);
                propagate_chunk(&mut positions, &grid, diffusion, cfg.dt, steps, &mut rng);
            }
            let mut counts = vec![0u64; grid.cells()];
            count_chunk(&positions, &grid, &mut counts);
            counts
        })
        .collect();

    let mut counts = vec![0u64; grid.cells()];
    for partial in partials {
        for (total, c) in counts.iter_mut().zip(partial) {
            *total += c;
        }
    }
    let field = field_from_counts(&counts, cfg.particles, &grid);
    let cell_variances = estimate_cell_variances(&field, cfg.particles)?;
    let sigma_delta = cell_variances.iter().cloned().fold(0.0, f64::max).sqrt();
    Ok(ForwardOutput {
        field,
        cell_variances,
        sigma_delta,
        particles: cfg.particles,
        seed: cfg.seed,
    })
}

/// Cross-check mode for the noise model: per-cell sample variance of the
/// binned density over `runs` independent forward runs.
pub fn empirical_cell_variances(
    diffusion: f64,
    cfg: &ParticleConfig,
    ic: &InitialCondition,
    runs: usize,
) -> Result<Vec<f64>> {
    if runs < 2 {
        return Err(Error::invalid("need at least two replicate runs"));
    }
    let fields: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = derive_seed(cfg.seed, &[PHASE_REPLICATE, r as u64]);
            forward(diffusion, &run_cfg, ic).map(|out| out.field.values().to_vec())
        })
        .collect::<Result<_>>()?;
    let cells = cfg.grid.cells();
    let mut variances = vec![0.0; cells];
    for n in 0..cells {
        let mean = fields.iter().map(|f| f[n]).sum::<f64>() / runs as f64;
        let ss = fields.iter().map(|f| (f[n] - mean).powi(2)).sum::<f64>();
        variances[n] = ss / (runs - 1) as f64;
    }
    Ok(variances)
}
