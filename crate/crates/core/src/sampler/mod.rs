//! Metropolis-within-Gibbs sampler for the Dirichlet mixture posterior with the mixture
//! weights integrated out.
//!
//! One sweep updates, in order: every allocation `z_j`, the Gamma prior shape `alpha`,
//! the Gamma prior rate `beta`, and every concentration parameter `rho[l][i]`.

mod kernels;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{AllocationVector, ClusterParams, CompositionDataset, Hyperparams};

pub use kernels::{
    alpha_log_acceptance, classification_probs, complete_log_likelihood, log_allocation_prior,
    log_posterior, proposal_sigma, rho_log_acceptance, update_allocations_gibbs,
    update_allocations_metropolis, update_alpha, update_beta, update_rho, ClusterStats,
};

/// How the allocation vector is refreshed each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    /// Exact draw from each full conditional. Records the classification matrix.
    #[default]
    Gibbs,
    /// Uniform proposal over labels with a Metropolis accept step.
    Metropolis,
}

impl std::str::FromStr for AllocationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gibbs" => Ok(AllocationMode::Gibbs),
            "metropolis" => Ok(AllocationMode::Metropolis),
            other => Err(Error::config(format!("unknown allocation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of mixture components.
    pub k: usize,
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Log-scale standard deviation of the `alpha` proposal.
    pub sigma_alpha: f64,
    /// Proposal variance of each `rho` entry as a fraction of its current value.
    pub p_var: f64,
    pub hyper: Hyperparams,
    pub allocation_mode: AllocationMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub const DEFAULT_SIGMA_ALPHA: f64 = 0.5;
    pub const DEFAULT_P_VAR: f64 = 0.7;

    pub fn new(k: usize) -> Self {
        SamplerConfig {
            k,
            iterations: 50_000,
            burn_in: 10_000,
            thin: 5,
            sigma_alpha: Self::DEFAULT_SIGMA_ALPHA,
            p_var: Self::DEFAULT_P_VAR,
            hyper: Hyperparams::default(),
            allocation_mode: AllocationMode::Gibbs,
            seed: 0,
        }
    }

    pub fn with_schedule(mut self, iterations: usize, burn_in: usize, thin: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.thin = thin;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("thin must be at least 1"));
        }
        if !(self.sigma_alpha.is_finite() && self.sigma_alpha > 0.0) {
            return Err(Error::config("sigma_alpha must be positive"));
        }
        if !(self.p_var.is_finite() && self.p_var > 0.0) {
            return Err(Error::config("p_var must be positive"));
        }
        self.hyper.validate()
    }

    /// Number of draws a run keeps: `floor((iterations - burn_in) / thin)`.
    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Current values of all sampled quantities in one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub z: AllocationVector,
    pub rho: ClusterParams,
    pub alpha: f64,
    pub beta: f64,
}

impl ChainState {
    pub fn validate(&self, data: &CompositionDataset) -> Result<()> {
        if self.z.len() != data.n() {
            return Err(Error::LengthMismatch(self.z.len(), data.n()));
        }
        if self.rho.r() != data.r() {
            return Err(Error::LengthMismatch(self.rho.r(), data.r()));
        }
        self.z.validate(self.rho.k())?;
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::domain("alpha and beta must be positive"));
        }
        Ok(())
    }

    /// Draws every quantity from its prior: `z_j` uniform, `alpha ~ Exp(gamma)`,
    /// `beta ~ Gamma(phi, lambda)`, `rho[l][i] ~ Gamma(alpha, beta)`.
    pub fn from_prior<R: rand::Rng + ?Sized>(
        n: usize,
        k: usize,
        r: usize,
        hyper: &Hyperparams,
        rng: &mut R,
    ) -> Result<Self> {
        let labels = Uniform::new(0, k).map_err(|e| Error::config(e.to_string()))?;
        let z = AllocationVector((0..n).map(|_| labels.sample(rng)).collect());
        let alpha = Exp::new(hyper.gamma)
            .map_err(|e| Error::config(e.to_string()))?
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let beta = Gamma::new(hyper.phi, 1.0 / hyper.lambda)
            .map_err(|e| Error::config(e.to_string()))?
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let prior = Gamma::new(alpha, 1.0 / beta).map_err(|e| Error::config(e.to_string()))?;
        let values = (0..k * r)
            .map(|_| prior.sample(rng).max(f64::MIN_POSITIVE))
            .collect();
        Ok(ChainState {
            z,
            rho: ClusterParams::from_flat(k, r, values)?,
            alpha,
            beta,
        })
    }

    /// Applies the label permutation `perm` (old label `l` becomes `perm[l]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        ChainState {
            z: self.z.permute(perm),
            rho: self.rho.permute_rows(perm),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Accepted and proposed counts of one Metropolis block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptCounter {
    pub accepted: u64,
    pub proposed: u64,
}

impl AcceptCounter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Acceptance bookkeeping for a whole run, burn-in included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub alpha: AcceptCounter,
    /// Row-major `k x r`.
    pub rho: Vec<AcceptCounter>,
    /// Only populated in metropolis allocation mode.
    pub allocation: AcceptCounter,
}

impl AcceptanceStats {
    pub fn new(k: usize, r: usize) -> Self {
        AcceptanceStats {
            alpha: AcceptCounter::default(),
            rho: vec![AcceptCounter::default(); k * r],
            allocation: AcceptCounter::default(),
        }
    }
}

/// Stored output of one chain.
///
/// `class_probs[t]` is the row-major `n x k` matrix of full-conditional allocation
/// probabilities at draw `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    /// One-based sweep index of each stored draw.
    pub iterations: Vec<usize>,
    pub draws: Vec<ChainState>,
    pub class_probs: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    pub acceptance: AcceptanceStats,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Checks the length and shape invariants.
    pub fn validate(&self) -> Result<()> {
        let len = self.draws.len();
        for other in [self.class_probs.len(), self.log_post.len(), self.iterations.len()] {
            if other != len {
                return Err(Error::LengthMismatch(other, len));
            }
        }
        for (d, m) in self.draws.iter().zip(&self.class_probs) {
            if d.z.len() != self.n || d.rho.k() != self.k || d.rho.r() != self.r {
                return Err(Error::Shape("draw dimensions disagree with trace".into()));
            }
            if m.len() != self.n * self.k {
                return Err(Error::MissingClassProbs);
            }
        }
        Ok(())
    }

    /// Series of `rho[l][i]` across stored draws.
    pub fn rho_series(&self, l: usize, i: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.rho.get(l, i)).collect()
    }
}

/// Random stream for chain `chain` of a run seeded with `master_seed`.
pub fn chain_rng(master_seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(chain as u64);
    rng
}

/// Derives an independent seed for a sub-run tagged `tag`.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(tag.wrapping_add(1 << 32));
    rng.next_u64()
}

/// Runs a single chain on stream 0 of `config.seed`.
pub fn run_chain(data: &CompositionDataset, config: &SamplerConfig) -> Result<Trace> {
    run_chain_on_stream(data, config, 0)
}

/// Runs chain number `chain`, initialized from the prior.
pub fn run_chain_on_stream(
    data: &CompositionDataset,
    config: &SamplerConfig,
    chain: usize,
) -> Result<Trace> {
    config.validate()?;
    let mut rng = chain_rng(config.seed, chain);
    let state = ChainState::from_prior(data.n(), config.k, data.r(), &config.hyper, &mut rng)?;
    run_chain_from(data, config, state, &mut rng)
}

/// Runs a chain from an explicit starting state.
pub fn run_chain_from<R: rand::Rng + ?Sized>(
    data: &CompositionDataset,
    config: &SamplerConfig,
    mut state: ChainState,
    rng: &mut R,
) -> Result<Trace> {
    config.validate()?;
    state.validate(data)?;
    if state.rho.k() != config.k {
        return Err(Error::config("initial state has the wrong number of clusters"));
    }
    let (n, k, r) = (data.n(), config.k, data.r());
    let hyper = &config.hyper;
    let kept = config.kept_draws();
    let mut trace = Trace {
        n,
        k,
        r,
        iterations: Vec::with_capacity(kept),
        draws: Vec::with_capacity(kept),
        class_probs: Vec::with_capacity(kept),
        log_post: Vec::with_capacity(kept),
        acceptance: AcceptanceStats::new(k, r),
    };
    let mut probs = vec![0.0; n * k];
    for sweep in 1..=config.iterations {
        match config.allocation_mode {
            AllocationMode::Gibbs => {
                probs = update_allocations_gibbs(&mut state, data, hyper, rng);
            }
            AllocationMode::Metropolis => {
                update_allocations_metropolis(
                    &mut state,
                    data,
                    hyper,
                    rng,
                    &mut trace.acceptance.allocation,
                );
            }
        }
        let accepted = update_alpha(&mut state, hyper, config.sigma_alpha, rng);
        trace.acceptance.alpha.record(accepted);
        update_beta(&mut state, hyper, rng);
        let stats = ClusterStats::new(&state.z, data, k);
        let flags = update_rho(&mut state, &stats, config.p_var, rng);
        for (counter, accepted) in trace.acceptance.rho.iter_mut().zip(flags) {
            counter.record(accepted);
        }

        if sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            let lp = log_posterior(&state, data, hyper)?;
            if !lp.is_finite() {
                return Err(Error::Numerical(format!("log posterior is {lp} at sweep {sweep}")));
            }
            let m = match config.allocation_mode {
                AllocationMode::Gibbs => probs.clone(),
                AllocationMode::Metropolis => classification_probs(&state, data, hyper),
            };
            trace.iterations.push(sweep);
            trace.draws.push(state.clone());
            trace.class_probs.push(m);
            trace.log_post.push(lp);
        }
    }
    Ok(trace)
}

/// Runs `chains` independent chains, chain `c` on stream `c` of `config.seed`.
pub fn run_chains(
    data: &CompositionDataset,
    config: &SamplerConfig,
    chains: usize,
) -> Result<Vec<Trace>> {
    config.validate()?;
    if chains == 0 {
        return Err(Error::config("at least one chain is required"));
    }
    (0..chains)
        .into_par_iter()
        .map(|c| run_chain_on_stream(data, config, c))
        .collect()
}

#[cfg(test)]
mod tests;
