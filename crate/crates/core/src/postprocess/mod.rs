//! Label-switching resolution, convergence diagnostics and posterior summaries.

mod diagnostics;
mod relabel;
mod summary;

pub use diagnostics::{bgr_report, bgr_statistic, BgrReport};
pub use relabel::{apply_permutations, stephens_relabel, Relabeling};
pub use summary::{
    coallocation_matrix, entropy_distribution, fraction_above, map_estimate, quantile, summarize,
    EntropyQuantiles, Interval, MapEstimate, Summaries,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{run_chains, AcceptanceStats, SamplerConfig, Trace};
use crate::simplex::CompositionDataset;

/// Upper bound on Stephens reference/assignment rounds.
pub const DEFAULT_RELABEL_ROUNDS: usize = 100;

/// Acceptance rates of `rho` entries outside this range are flagged.
pub const RHO_ACCEPTANCE_RANGE: (f64, f64) = (0.10, 0.80);

/// Everything derived from a set of chains after relabeling.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub relabeled_traces: Vec<Trace>,
    pub permutations: Vec<Vec<Vec<usize>>>,
    pub relabel_converged: bool,
    pub map: MapEstimate,
    pub summaries: Summaries,
    pub coalloc: Vec<Vec<f64>>,
    /// `None` with fewer than two chains.
    pub bgr: Option<BgrReport>,
    pub entropy_quantiles: Vec<EntropyQuantiles>,
}

impl FitResult {
    pub fn acceptance(&self) -> Vec<&AcceptanceStats> {
        self.relabeled_traces.iter().map(|t| &t.acceptance).collect()
    }
}

/// Relabels and summarizes finished chains. A pure function of its input.
pub fn analyze(traces: &[Trace]) -> Result<FitResult> {
    let relabeling = stephens_relabel(traces, DEFAULT_RELABEL_ROUNDS)?;
    let relabeled = relabeling.traces;
    let bgr = match bgr_report(&relabeled) {
        Ok(report) => Some(report),
        Err(Error::InsufficientChains(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FitResult {
        map: map_estimate(&relabeled)?,
        summaries: summarize(&relabeled)?,
        coalloc: coallocation_matrix(&relabeled)?,
        entropy_quantiles: entropy_distribution(&relabeled)?,
        bgr,
        permutations: relabeling.permutations,
        relabel_converged: relabeling.converged,
        relabeled_traces: relabeled,
    })
}

/// Runs `chains` chains and analyzes them.
pub fn fit(data: &CompositionDataset, config: &SamplerConfig, chains: usize) -> Result<FitResult> {
    let traces = run_chains(data, config, chains)?;
    analyze(&traces)
}

/// One acceptance rate outside [`RHO_ACCEPTANCE_RANGE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceWarning {
    pub chain: usize,
    /// Zero-based cluster and part.
    pub cluster: usize,
    pub part: usize,
    pub rate: f64,
}

pub fn acceptance_warnings(stats: &[&AcceptanceStats], r: usize) -> Vec<AcceptanceWarning> {
    let (lo, hi) = RHO_ACCEPTANCE_RANGE;
    let mut out = Vec::new();
    for (chain, s) in stats.iter().enumerate() {
        for (idx, counter) in s.rho.iter().enumerate() {
            let rate = counter.rate();
            if !(lo..=hi).contains(&rate) {
                out.push(AcceptanceWarning {
                    chain,
                    cluster: idx / r,
                    part: idx % r,
                    rate,
                });
            }
        }
    }
    out
}
