use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{AcceptCounter, ChainState};
use crate::dirichlet::{log_normalizer, logpdf_from_logs};
use crate::error::{Error, Result};
use crate::simplex::{AllocationVector, ClusterParams, CompositionDataset, Hyperparams};

/// Per-cluster counts and summed log proportions, the sufficient statistics of the
/// cluster likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub counts: Vec<usize>,
    /// Row-major `k x r`: `Σ_{j: z_j = l} ln p_ji`.
    pub log_sums: Vec<f64>,
    r: usize,
}

impl ClusterStats {
    pub fn new(z: &AllocationVector, data: &CompositionDataset, k: usize) -> Self {
        let r = data.r();
        let mut counts = vec![0; k];
        let mut log_sums = vec![0.0; k * r];
        for (j, &l) in z.labels().iter().enumerate() {
            counts[l] += 1;
            for (acc, lp) in log_sums[l * r..(l + 1) * r].iter_mut().zip(data.log_row(j)) {
                *acc += lp;
            }
        }
        ClusterStats { counts, log_sums, r }
    }

    pub fn log_sums_row(&self, l: usize) -> &[f64] {
        &self.log_sums[l * self.r..(l + 1) * self.r]
    }
}

/// Normalized Dirichlet-multinomial log mass of an allocation with cluster sizes
/// `counts`: `ln Γ(kδ) − k ln Γ(δ) + Σ ln Γ(n_l + δ) − ln Γ(n + kδ)`.
pub fn log_allocation_prior(counts: &[usize], delta: f64) -> f64 {
    let k = counts.len() as f64;
    let n: usize = counts.iter().sum();
    ln_gamma(k * delta) - k * ln_gamma(delta)
        + counts.iter().map(|&c| ln_gamma(c as f64 + delta)).sum::<f64>()
        - ln_gamma(n as f64 + k * delta)
}

/// `ln f(p | z, rho)`: sum of each observation's log density under its cluster.
pub fn complete_log_likelihood(
    z: &AllocationVector,
    rho: &ClusterParams,
    data: &CompositionDataset,
) -> f64 {
    let norms: Vec<f64> = rho.rows().map(log_normalizer).collect();
    z.labels()
        .iter()
        .enumerate()
        .map(|(j, &l)| logpdf_from_logs(data.log_row(j), rho.row(l), norms[l]))
        .sum()
}

fn log_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Unnormalized log posterior of the collapsed model: data term, Gamma prior on every
/// `rho` entry, Dirichlet-multinomial allocation mass, `Exp(gamma)` on `alpha` and
/// `Gamma(phi, lambda)` on `beta`. All prior terms carry their normalizing constants.
pub fn log_posterior(
    state: &ChainState,
    data: &CompositionDataset,
    hyper: &Hyperparams,
) -> Result<f64> {
    state.validate(data)?;
    let k = state.rho.k();
    let data_term = complete_log_likelihood(&state.z, &state.rho, data);
    let rho_prior: f64 = state
        .rho
        .as_slice()
        .iter()
        .map(|&x| log_gamma_density(x, state.alpha, state.beta))
        .sum();
    let z_prior = log_allocation_prior(&state.z.counts(k), hyper.delta);
    let alpha_prior = hyper.gamma.ln() - hyper.gamma * state.alpha;
    let beta_prior = log_gamma_density(state.beta, hyper.phi, hyper.lambda);
    Ok(data_term + rho_prior + z_prior + alpha_prior + beta_prior)
}

/// Log weights `ln f(p_j | rho_l) + ln(n_l^{-j} + δ)` for each label `l`.
#[inline]
fn allocation_log_weights(
    log_p: &[f64],
    rho: &ClusterParams,
    norms: &[f64],
    counts: &[usize],
    delta: f64,
    out: &mut [f64],
) {
    for (l, w) in out.iter_mut().enumerate() {
        *w = logpdf_from_logs(log_p, rho.row(l), norms[l]) + (counts[l] as f64 + delta).ln();
    }
}

/// Exponentiates and normalizes log weights in place.
#[inline]
fn normalize_log_weights(w: &mut [f64]) {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    w.iter_mut().for_each(|v| *v /= total);
}

/// Full-conditional allocation probabilities of every observation given the others,
/// evaluated at a fixed state. Row-major `n x k`.
pub fn classification_probs(
    state: &ChainState,
    data: &CompositionDataset,
    hyper: &Hyperparams,
) -> Vec<f64> {
    let k = state.rho.k();
    let norms: Vec<f64> = state.rho.rows().map(log_normalizer).collect();
    let mut counts = state.z.counts(k);
    let mut m = vec![0.0; data.n() * k];
    for (j, &l) in state.z.labels().iter().enumerate() {
        counts[l] -= 1;
        let row = &mut m[j * k..(j + 1) * k];
        allocation_log_weights(data.log_row(j), &state.rho, &norms, &counts, hyper.delta, row);
        normalize_log_weights(row);
        counts[l] += 1;
    }
    m
}

/// Systematic Gibbs scan over `z_1, …, z_n`, each drawn from its full conditional given
/// the current values of all other labels. Returns the `n x k` matrix of the
/// conditional probabilities used for the draws.
pub fn update_allocations_gibbs<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CompositionDataset,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Vec<f64> {
    let k = state.rho.k();
    let n = data.n();
    let mut m = vec![0.0; n * k];
    if k == 1 {
        m.fill(1.0);
        return m;
    }
    let norms: Vec<f64> = state.rho.rows().map(log_normalizer).collect();
    let mut counts = state.z.counts(k);
    for j in 0..n {
        let current = state.z.0[j];
        counts[current] -= 1;
        let row = &mut m[j * k..(j + 1) * k];
        allocation_log_weights(data.log_row(j), &state.rho, &norms, &counts, hyper.delta, row);
        normalize_log_weights(row);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = k - 1;
        for (l, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = l;
                break;
            }
        }
        state.z.0[j] = chosen;
        counts[chosen] += 1;
    }
    m
}

/// Metropolis scan over `z_1, …, z_n` with a uniform proposal over all `k` labels.
pub fn update_allocations_metropolis<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &CompositionDataset,
    hyper: &Hyperparams,
    rng: &mut R,
    counter: &mut AcceptCounter,
) {
    let k = state.rho.k();
    let norms: Vec<f64> = state.rho.rows().map(log_normalizer).collect();
    let mut counts = state.z.counts(k);
    for j in 0..data.n() {
        let current = state.z.0[j];
        let proposed = rng.random_range(0..k);
        if proposed == current {
            counter.record(true);
            continue;
        }
        counts[current] -= 1;
        let log_p = data.log_row(j);
        let target = |l: usize| {
            logpdf_from_logs(log_p, state.rho.row(l), norms[l])
                + (counts[l] as f64 + hyper.delta).ln()
        };
        let log_ratio = target(proposed) - target(current);
        let accept = rng.random::<f64>().ln() < log_ratio;
        counter.record(accept);
        let next = if accept { proposed } else { current };
        state.z.0[j] = next;
        counts[next] += 1;
    }
}

/// Log of the `alpha` full conditional, up to a constant.
fn alpha_log_target(alpha: f64, beta: f64, sum_log_rho: f64, count: f64, gamma: f64) -> f64 {
    count * (alpha * beta.ln() - ln_gamma(alpha)) + (alpha - 1.0) * sum_log_rho - gamma * alpha
}

/// Log acceptance ratio of moving `alpha` from `current` to `proposed` under the
/// log-normal random walk, including the Hastings factor `proposed / current`.
pub fn alpha_log_acceptance(
    current: f64,
    proposed: f64,
    beta: f64,
    rho: &ClusterParams,
    hyper: &Hyperparams,
) -> f64 {
    let sum_log_rho: f64 = rho.as_slice().iter().map(|v| v.ln()).sum();
    let count = rho.as_slice().len() as f64;
    alpha_log_target(proposed, beta, sum_log_rho, count, hyper.gamma)
        - alpha_log_target(current, beta, sum_log_rho, count, hyper.gamma)
        + proposed.ln()
        - current.ln()
}

/// Metropolis-Hastings step for `alpha` with a log-normal proposal centred (in median)
/// on the current value. Returns whether the proposal was accepted.
pub fn update_alpha<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &Hyperparams,
    sigma_alpha: f64,
    rng: &mut R,
) -> bool {
    let z: f64 = rng.sample(StandardNormal);
    let proposed = state.alpha * (sigma_alpha * z).exp();
    let u: f64 = rng.random();
    if !(proposed.is_finite() && proposed > 0.0) {
        return false;
    }
    let log_r = alpha_log_acceptance(state.alpha, proposed, state.beta, &state.rho, hyper);
    if u.ln() < log_r {
        state.alpha = proposed;
        true
    } else {
        false
    }
}

/// Exact Gibbs draw of `beta ~ Gamma(phi + r k alpha, lambda + Σ rho)`.
pub fn update_beta<R: Rng + ?Sized>(state: &mut ChainState, hyper: &Hyperparams, rng: &mut R) {
    let count = state.rho.as_slice().len() as f64;
    let shape = hyper.phi + count * state.alpha;
    let rate = hyper.lambda + state.rho.as_slice().iter().sum::<f64>();
    let draw: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("shape and rate are positive")
        .sample(rng);
    state.beta = draw.max(f64::MIN_POSITIVE);
}

/// Log-scale standard deviation giving a log-normal proposal with median `rho` and
/// variance `p_var * rho`.
///
/// Solves `(e^{σ²} − 1) e^{2 ln ρ + σ²} = p_var ρ`: with `x = e^{σ²}`,
/// `x = (√(4 p_var ρ³ + ρ⁴) + ρ²) / (2ρ²)` and `σ = √(ln x)`.
pub fn proposal_sigma(rho: f64, p_var: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) || !(p_var.is_finite() && p_var > 0.0) {
        return Err(Error::domain(format!(
            "proposal scale needs positive rho and p_var, got {rho} and {p_var}"
        )));
    }
    Ok(sigma_unchecked(rho, p_var))
}

#[inline]
fn sigma_unchecked(rho: f64, p_var: f64) -> f64 {
    // x - 1 = (√(1 + 4c) − 1) / 2 with c = p_var / rho, written to avoid cancellation.
    let c = p_var / rho;
    let x_minus_one = 2.0 * c / ((1.0 + 4.0 * c).sqrt() + 1.0);
    x_minus_one.ln_1p().sqrt()
}

#[inline]
fn log_normal_log_density(y: f64, x: f64, sigma: f64) -> f64 {
    let d = y.ln() - x.ln();
    -y.ln() - sigma.ln() - d * d / (2.0 * sigma * sigma)
}

/// Log acceptance ratio for moving `rho[l][i]` from its current value to `proposed`,
/// holding the rest of row `l` fixed. Empty clusters contribute the prior term only.
pub fn rho_log_acceptance(
    state: &ChainState,
    stats: &ClusterStats,
    l: usize,
    i: usize,
    proposed: f64,
    p_var: f64,
) -> f64 {
    let current = state.rho.get(l, i);
    let row_total: f64 = state.rho.row(l).iter().sum();
    let count = stats.counts[l] as f64;
    let likelihood = if count > 0.0 {
        count
            * (ln_gamma(row_total - current + proposed) - ln_gamma(row_total) - ln_gamma(proposed)
                + ln_gamma(current))
            + (proposed - current) * stats.log_sums_row(l)[i]
    } else {
        0.0
    };
    let prior = (state.alpha - 1.0) * (proposed.ln() - current.ln()) - state.beta * (proposed - current);
    let hastings = log_normal_log_density(current, proposed, sigma_unchecked(proposed, p_var))
        - log_normal_log_density(proposed, current, sigma_unchecked(current, p_var));
    likelihood + prior + hastings
}

/// One Metropolis-Hastings pass over every `rho[l][i]` in row-major order with the
/// state-dependent log-normal proposal. Returns per-entry accept flags (row-major).
pub fn update_rho<R: Rng + ?Sized>(
    state: &mut ChainState,
    stats: &ClusterStats,
    p_var: f64,
    rng: &mut R,
) -> Vec<bool> {
    let (k, r) = (state.rho.k(), state.rho.r());
    let mut flags = vec![false; k * r];
    for l in 0..k {
        for i in 0..r {
            let current = state.rho.get(l, i);
            let z: f64 = rng.sample(StandardNormal);
            let proposed = current * (sigma_unchecked(current, p_var) * z).exp();
            let u: f64 = rng.random();
            if !(proposed.is_finite() && proposed > 0.0) {
                continue;
            }
            if u.ln() < rho_log_acceptance(state, stats, l, i, proposed, p_var) {
                state.rho.set(l, i, proposed);
                flags[l * r + i] = true;
            }
        }
    }
    flags
}
