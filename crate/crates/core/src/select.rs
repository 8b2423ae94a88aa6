//! Information criteria for choosing the number of clusters.
//!
//! * ICL: `ln f(p | z̃, ρ̃) − (k r / 2) ln n + ln f(z̃ | δ)`; larger is better.
//! * DIC₅: `−4 E[ln f(p, z | ρ)] + 2 ln f(p, z̃ | ρ̃)` with
//!   `ln f(p, z | ρ) = ln f(p | z, ρ) + ln f(z | δ)`; smaller is better.
//! * BIC: `−2 Σ_j ln Σ_l ω̂_l Dir(p_j | ρ̃_l) + ν ln n`, `ω̂_l = (n_l(z̃) + δ)/(n + kδ)`,
//!   `ν = k r + k − 1`; smaller is better.
//!
//! `(z̃, ρ̃)` is the stored draw with the largest log posterior.

use serde::{Deserialize, Serialize};

use crate::dirichlet::{log_normalizer, logpdf_from_logs};
use crate::error::{Error, Result};
use crate::postprocess::{map_estimate, stephens_relabel, DEFAULT_RELABEL_ROUNDS};
use crate::sampler::{
    complete_log_likelihood, derive_seed, log_allocation_prior, run_chains, ChainState,
    SamplerConfig, Trace,
};
use crate::simplex::{CompositionDataset, Hyperparams};

/// BIC parameter-count convention, reported alongside results.
pub const BIC_CONVENTION: &str =
    "BIC = -2 ln L_mix(MAP rho, w_l = (n_l + delta)/(n + k delta)) + (k r + k - 1) ln n";
/// DIC5 joint-term convention, reported alongside results.
pub const DIC5_CONVENTION: &str =
    "DIC5 joint term ln f(p, z | rho) = ln f(p | z, rho) + ln f(z | delta) (normalized)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub k: usize,
    pub icl: f64,
    pub bic: f64,
    pub dic5: f64,
    /// Free components of the parameter matrix, `k r`.
    pub lambda_k: usize,
    /// Parameter count used by BIC, `k r + k − 1`.
    pub bic_params: usize,
    pub map_logpost: f64,
}

/// `ln f(p | z, ρ) + ln f(z | δ)` at a draw.
pub fn joint_data_allocation(state: &ChainState, data: &CompositionDataset, delta: f64) -> f64 {
    complete_log_likelihood(&state.z, &state.rho, data)
        + log_allocation_prior(&state.z.counts(state.rho.k()), delta)
}

fn check(traces: &[Trace], data: &CompositionDataset) -> Result<()> {
    if traces.iter().all(Trace::is_empty) {
        return Err(Error::EmptyTrace);
    }
    if traces.iter().any(|t| t.n != data.n() || t.r != data.r()) {
        return Err(Error::Shape("trace dimensions disagree with data".into()));
    }
    Ok(())
}

pub fn icl(traces: &[Trace], data: &CompositionDataset, hyper: &Hyperparams) -> Result<f64> {
    check(traces, data)?;
    let map = map_estimate(traces)?.state;
    let k = map.rho.k();
    let lambda_k = (k * data.r()) as f64;
    Ok(complete_log_likelihood(&map.z, &map.rho, data) - 0.5 * lambda_k * (data.n() as f64).ln()
        + log_allocation_prior(&map.z.counts(k), hyper.delta))
}

pub fn dic5(traces: &[Trace], data: &CompositionDataset, hyper: &Hyperparams) -> Result<f64> {
    check(traces, data)?;
    let map = map_estimate(traces)?.state;
    let (sum, count) = traces
        .iter()
        .flat_map(|t| t.draws.iter())
        .fold((0.0, 0usize), |(s, c), d| {
            (s + joint_data_allocation(d, data, hyper.delta), c + 1)
        });
    let expected = sum / count as f64;
    Ok(-4.0 * expected + 2.0 * joint_data_allocation(&map, data, hyper.delta))
}

pub fn bic(traces: &[Trace], data: &CompositionDataset, hyper: &Hyperparams) -> Result<f64> {
    check(traces, data)?;
    let map = map_estimate(traces)?.state;
    let (k, n, r) = (map.rho.k(), data.n(), data.r());
    let counts = map.z.counts(k);
    let denom = n as f64 + k as f64 * hyper.delta;
    let log_w: Vec<f64> = counts
        .iter()
        .map(|&c| ((c as f64 + hyper.delta) / denom).ln())
        .collect();
    let norms: Vec<f64> = map.rho.rows().map(log_normalizer).collect();
    let mut loglik = 0.0;
    let mut terms = vec![0.0; k];
    for j in 0..n {
        for (l, t) in terms.iter_mut().enumerate() {
            *t = log_w[l] + logpdf_from_logs(data.log_row(j), map.rho.row(l), norms[l]);
        }
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        loglik += max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    }
    let nu = (k * r + k - 1) as f64;
    Ok(-2.0 * loglik + nu * (n as f64).ln())
}

/// All three criteria for one fitted `k`.
pub fn criteria(traces: &[Trace], data: &CompositionDataset, hyper: &Hyperparams) -> Result<CriterionReport> {
    check(traces, data)?;
    let map = map_estimate(traces)?;
    let k = map.state.rho.k();
    Ok(CriterionReport {
        k,
        icl: icl(traces, data, hyper)?,
        bic: bic(traces, data, hyper)?,
        dic5: dic5(traces, data, hyper)?,
        lambda_k: k * data.r(),
        bic_params: k * data.r() + k - 1,
        map_logpost: map.log_post,
    })
}

/// Fits every `k` in `k_range` independently and reports the criteria.
///
/// The fit for `k` uses the seed `derive_seed(base.seed, k)`. Criteria are evaluated on
/// the pooled, relabeled chains.
pub fn scan_k(
    data: &CompositionDataset,
    base: &SamplerConfig,
    chains: usize,
    k_range: impl IntoIterator<Item = usize>,
) -> Result<Vec<CriterionReport>> {
    let ks: Vec<usize> = k_range.into_iter().collect();
    if ks.is_empty() {
        return Err(Error::config("k range is empty"));
    }
    ks.into_iter()
        .map(|k| {
            let config = SamplerConfig {
                k,
                seed: derive_seed(base.seed, k as u64),
                ..base.clone()
            };
            fit_criteria(data, &config, chains).map_err(|e| Error::FitFailed {
                k,
                source: Box::new(e),
            })
        })
        .collect()
}

fn fit_criteria(data: &CompositionDataset, config: &SamplerConfig, chains: usize) -> Result<CriterionReport> {
    let traces = run_chains(data, config, chains)?;
    let relabeled = stephens_relabel(&traces, DEFAULT_RELABEL_ROUNDS)?.traces;
    criteria(&relabeled, data, &config.hyper)
}

/// Preferred `k` per criterion: argmax ICL, argmin BIC and DIC₅ (first on ties).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub icl: usize,
    pub bic: usize,
    pub dic5: usize,
}

impl Recommendation {
    pub fn agree(&self) -> Option<usize> {
        (self.icl == self.bic && self.bic == self.dic5).then_some(self.icl)
    }
}

pub fn recommend(reports: &[CriterionReport]) -> Option<Recommendation> {
    let first = reports.first()?;
    let mut rec = (first, first, first);
    for r in &reports[1..] {
        if r.icl > rec.0.icl {
            rec.0 = r;
        }
        if r.bic < rec.1.bic {
            rec.1 = r;
        }
        if r.dic5 < rec.2.dic5 {
            rec.2 = r;
        }
    }
    Some(Recommendation {
        icl: rec.0.k,
        bic: rec.1.k,
        dic5: rec.2.k,
    })
}
