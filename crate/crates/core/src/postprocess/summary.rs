//! Posterior summaries of relabeled traces.

use serde::{Deserialize, Serialize};

use crate::dirichlet::dirichlet_entropy;
use crate::error::{Error, Result};
use crate::sampler::{ChainState, Trace};

/// Quantile of sorted data by linear interpolation between order statistics
/// (`h = (N − 1) p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl Interval {
    fn from_samples(mut xs: Vec<f64>, lower: f64, upper: f64) -> Self {
        xs.sort_by(f64::total_cmp);
        Interval {
            lower: quantile(&xs, lower),
            median: quantile(&xs, 0.5),
            upper: quantile(&xs, upper),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Medians and 95% credible intervals per `(l, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summaries {
    /// `rho[l][i]`.
    pub rho: Vec<Vec<Interval>>,
    /// `rho[l][i] / Σ_i rho[l][i]`.
    pub normalized: Vec<Vec<Interval>>,
}

fn pooled(traces: &[Trace]) -> Result<impl Iterator<Item = &ChainState>> {
    if traces.iter().all(Trace::is_empty) {
        return Err(Error::EmptyTrace);
    }
    Ok(traces.iter().flat_map(|t| t.draws.iter()))
}

pub fn summarize(traces: &[Trace]) -> Result<Summaries> {
    let _ = pooled(traces)?;
    let (k, r) = (traces[0].k, traces[0].r);
    let mut rho = Vec::with_capacity(k);
    let mut normalized = Vec::with_capacity(k);
    for l in 0..k {
        let mut raw_row = Vec::with_capacity(r);
        let mut norm_row = Vec::with_capacity(r);
        for i in 0..r {
            let raw: Vec<f64> = pooled(traces)?.map(|d| d.rho.get(l, i)).collect();
            let norm: Vec<f64> = pooled(traces)?
                .map(|d| d.rho.get(l, i) / d.rho.row(l).iter().sum::<f64>())
                .collect();
            raw_row.push(Interval::from_samples(raw, 0.025, 0.975));
            norm_row.push(Interval::from_samples(norm, 0.025, 0.975));
        }
        rho.push(raw_row);
        normalized.push(norm_row);
    }
    Ok(Summaries { rho, normalized })
}

/// 5%, 50% and 95% quantiles of a cluster's posterior entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyQuantiles {
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

pub fn entropy_distribution(traces: &[Trace]) -> Result<Vec<EntropyQuantiles>> {
    let _ = pooled(traces)?;
    (0..traces[0].k)
        .map(|l| {
            let mut h = pooled(traces)?
                .map(|d| dirichlet_entropy(d.rho.row(l)))
                .collect::<Result<Vec<f64>>>()?;
            h.sort_by(f64::total_cmp);
            Ok(EntropyQuantiles {
                q05: quantile(&h, 0.05),
                q50: quantile(&h, 0.5),
                q95: quantile(&h, 0.95),
            })
        })
        .collect()
}

/// The stored draw with the largest log posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub state: ChainState,
    pub log_post: f64,
    pub chain: usize,
    pub draw: usize,
}

/// Scans every stored draw; ties go to the earliest chain, then the earliest draw.
pub fn map_estimate(traces: &[Trace]) -> Result<MapEstimate> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (c, t) in traces.iter().enumerate() {
        for (d, &lp) in t.log_post.iter().enumerate() {
            if best.is_none_or(|(_, _, b)| lp > b) {
                best = Some((c, d, lp));
            }
        }
    }
    let (chain, draw, log_post) = best.ok_or(Error::EmptyTrace)?;
    Ok(MapEstimate {
        state: traces[chain].draws[draw].clone(),
        log_post,
        chain,
        draw,
    })
}

/// Fraction of stored draws in which observations `i` and `j` share a cluster.
pub fn coallocation_matrix(traces: &[Trace]) -> Result<Vec<Vec<f64>>> {
    let total: usize = traces.iter().map(Trace::len).sum();
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    let n = traces[0].n;
    let mut counts = vec![0u64; n * n];
    for d in traces.iter().flat_map(|t| t.draws.iter()) {
        let z = d.z.labels();
        for i in 0..n {
            for j in (i + 1)..n {
                if z[i] == z[j] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let mut out = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = counts[i * n + j] as f64 / total as f64;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Fraction of off-diagonal pairs whose co-allocation probability exceeds `threshold`.
pub fn fraction_above(coalloc: &[Vec<f64>], threshold: f64) -> f64 {
    let n = coalloc.len();
    if n < 2 {
        return 0.0;
    }
    let mut above = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            above += (coalloc[i][j] > threshold) as usize;
        }
    }
    above as f64 / (n * (n - 1) / 2) as f64
}
