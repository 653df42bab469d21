//! Random-walk Metropolis–Hastings over the diffusion coefficient, driven
//! by noisy likelihood evaluations.
//!
//! The chain targets the posterior of `D` under a uniform prior and a
//! symmetric Gaussian proposal, so the acceptance probability reduces to
//! the truncated likelihood ratio. Likelihood evaluation is abstracted
//! behind [`LikelihoodModel`]; the particle solver gives the noisy chain
//! studied here, the exact solver gives the reference chain, and test
//! doubles can emulate unbiased estimators.
//!
//! Two refresh modes control how solver noise enters a transition:
//!
//! * [`RefreshMode::RefreshBoth`] re-simulates the current state alongside
//!   every proposal, so the two noise draws of a transition are
//!   independent.
//! * [`RefreshMode::RetainCurrent`] keeps the estimate that was accepted
//!   for the current state (pseudo-marginal style) and only simulates the
//!   proposal.
//!
//! Proposals outside the prior support are rejected before any forward
//! evaluation. Chains are emitted raw; burn-in and thinning are the
//! caller's concern.

use crate::error::{Error, Result};
use crate::grid::{fmt17, Observation};
use crate::likelihood::{log_likelihood, log_ratio, LogLikelihood, RatioSample};
use crate::particle::{forward, ParticleConfig};
use crate::reference::{exact_solution, InitialCondition};
use crate::rng::{derive_seed, stream_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;

const ROLE_CHAIN_EVAL: u64 = 10;

/// A (possibly stochastic) likelihood evaluation for a parameter value.
///
/// `eval_seed` identifies the evaluation; stochastic models must be
/// deterministic given it, and deterministic models may ignore it.
pub trait LikelihoodModel {
    fn evaluate(&self, diffusion: f64, eval_seed: u64) -> Result<LogLikelihood>;
}

/// Noisy likelihood backed by the particle forward map.
#[derive(Debug, Clone)]
pub struct ParticleModel {
    pub observation: Observation,
    pub ic: InitialCondition,
    pub particles: usize,
    pub t_final: f64,
    pub dt: f64,
    pub chunk_size: usize,
}

impl LikelihoodModel for ParticleModel {
    fn evaluate(&self, diffusion: f64, eval_seed: u64) -> Result<LogLikelihood> {
        let cfg = ParticleConfig {
            particles: self.particles,
            t_final: self.t_final,
            dt: self.dt,
            grid: *self.observation.field.grid(),
            seed: eval_seed,
            chunk_size: self.chunk_size,
        };
        let out = forward(diffusion, &cfg, &self.ic)?;
        log_likelihood(&self.observation, &out.field, &self.observation.noise)
    }
}

/// Noise-free likelihood backed by the exact spectral solution.
#[derive(Debug, Clone)]
pub struct ExactModel {
    pub observation: Observation,
    pub ic: InitialCondition,
    pub t_final: f64,
}

impl LikelihoodModel for ExactModel {
    fn evaluate(&self, diffusion: f64, _eval_seed: u64) -> Result<LogLikelihood> {
        let field = exact_solution(
            &self.ic,
            diffusion,
            self.t_final,
            self.observation.field.grid(),
        )?;
        log_likelihood(&self.observation, &field, &self.observation.noise)
    }
}

/// How the current state's likelihood is treated at each transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefreshMode {
    /// Re-simulate both states every step; the transition's two noise
    /// draws are independent.
    RefreshBoth,
    /// Keep the stored estimate for the current state (pseudo-marginal).
    RetainCurrent,
}

/// Chain configuration: uniform prior on `[prior_min, prior_max]`, Gaussian
/// random-walk proposal, and the refresh mode.
#[derive(Debug, Clone)]
pub struct MhConfig {
    pub prior_min: f64,
    pub prior_max: f64,
    pub proposal_std: f64,
    pub chain_length: usize,
    pub refresh_mode: RefreshMode,
    pub seed: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        MhConfig {
            prior_min: 0.01,
            prior_max: 1.0,
            proposal_std: 0.05,
            chain_length: 1000,
            refresh_mode: RefreshMode::RefreshBoth,
            seed: 0,
        }
    }
}

impl MhConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_min.is_finite() && self.prior_min > 0.0) {
            return Err(Error::invalid("prior lower bound must be positive"));
        }
        if !(self.prior_max.is_finite() && self.prior_max > self.prior_min) {
            return Err(Error::invalid(
                "prior upper bound must exceed the lower bound",
            ));
        }
        if !(self.proposal_std.is_finite() && self.proposal_std > 0.0) {
            return Err(Error::invalid(
                "proposal standard deviation must be positive",
            ));
        }
        if self.chain_length == 0 {
            return Err(Error::invalid("chain length must be positive"));
        }
        Ok(())
    }

    fn in_support(&self, d: f64) -> bool {
        (self.prior_min..=self.prior_max).contains(&d)
    }
}

/// Mutable state of a running chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current_d: f64,
    pub current_log_lik: LogLikelihood,
    pub step_index: usize,
    pub accept_count: usize,
}

/// What a single transition did.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub accepted: bool,
    /// The evaluated ratio; `None` when the proposal fell outside the
    /// prior support and was rejected without forward evaluation.
    pub ratio: Option<RatioSample>,
}

/// One recorded chain step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub d: f64,
    pub log_lik: f64,
    pub accepted: bool,
}

/// A completed chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub steps: Vec<StepRecord>,
    /// Accepted transitions over attempted transitions; `None` for a
    /// single-state chain (0/0).
    pub acceptance_rate: Option<f64>,
}

impl ChainOutput {
    /// The visited parameter values in order.
    pub fn samples(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.d).collect()
    }

    /// Writes `step,D,log_lik,accepted` rows plus a trailing
    /// `# acceptance_rate=` summary line (empty value for a 0/0 rate).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,D,log_lik,accepted")?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                i,
                fmt17(s.d),
                fmt17(s.log_lik),
                u8::from(s.accepted)
            )?;
        }
        let rate = self.acceptance_rate.map(fmt17).unwrap_or_default();
        writeln!(out, "# acceptance_rate={rate}")?;
        Ok(())
    }
}

/// Advances the chain by one transition.
///
/// Draw order within a step: the proposal increment first, then (only for
/// in-support proposals) the acceptance uniform. Evaluation seeds derive
/// from `(chain seed, step index, side)`, so a step is reproducible in
/// isolation. The accepted proposal's likelihood becomes the stored
/// current value; in refresh-both mode a rejected transition still leaves
/// the freshly re-simulated current-state likelihood in place.
pub fn mh_step<M: LikelihoodModel>(
    state: &mut ChainState,
    cfg: &MhConfig,
    model: &M,
    rng: &mut ChaCha8Rng,
) -> Result<StepOutcome> {
    state.step_index += 1;
    let step = state.step_index as u64;
    let z: f64 = rng.sample(StandardNormal);
    let proposal = state.current_d + cfg.proposal_std * z;
    if !cfg.in_support(proposal) {
        return Ok(StepOutcome {
            accepted: false,
            ratio: None,
        });
    }
    let proposal_ll =
        model.evaluate(proposal, derive_seed(cfg.seed, &[ROLE_CHAIN_EVAL, step, 0]))?;
    let current_ll = match cfg.refresh_mode {
        RefreshMode::RefreshBoth => {
            let fresh = model.evaluate(
                state.current_d,
                derive_seed(cfg.seed, &[ROLE_CHAIN_EVAL, step, 1]),
            )?;
            state.current_log_lik = fresh.clone();
            fresh
        }
        RefreshMode::RetainCurrent => state.current_log_lik.clone(),
    };
    let ratio = log_ratio(&proposal_ll, &current_ll)?;
    let u: f64 = rng.random();
    let accepted = u < ratio.truncated;
    if accepted {
        state.current_d = proposal;
        state.current_log_lik = proposal_ll;
        state.accept_count += 1;
    }
    Ok(StepOutcome {
        accepted,
        ratio: Some(ratio),
    })
}

/// Runs a chain of `chain_length` states from a uniform prior draw.
pub fn run_chain<M: LikelihoodModel>(cfg: &MhConfig, model: &M) -> Result<ChainOutput> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, 0);
    let initial_d = cfg.prior_min + (cfg.prior_max - cfg.prior_min) * rng.random::<f64>();
    let initial_ll = model.evaluate(initial_d, derive_seed(cfg.seed, &[ROLE_CHAIN_EVAL, 0, 0]))?;
    let mut state = ChainState {
        current_d: initial_d,
        current_log_lik: initial_ll,
        step_index: 0,
        accept_count: 0,
    };
    let mut steps = Vec::with_capacity(cfg.chain_length);
    steps.push(StepRecord {
        d: state.current_d,
        log_lik: state.current_log_lik.value,
        accepted: false,
    });
    for _ in 1..cfg.chain_length {
        let outcome = mh_step(&mut state, cfg, model, &mut rng)?;
        steps.push(StepRecord {
            d: state.current_d,
            log_lik: state.current_log_lik.value,
            accepted: outcome.accepted,
        });
    }
    let transitions = cfg.chain_length - 1;
    let acceptance_rate = if transitions > 0 {
        Some(state.accept_count as f64 / transitions as f64)
    } else {
        None
    };
    Ok(ChainOutput {
        steps,
        acceptance_rate,
    })
}
