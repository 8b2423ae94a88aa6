//! Stephens' Kullback-Leibler relabeling of mixture draws.

use crate::assignment::min_cost_assignment;
use crate::error::{Error, Result};
use crate::sampler::Trace;

/// Output of [`stephens_relabel`].
#[derive(Debug, Clone)]
pub struct Relabeling {
    /// `permutations[c][t][l]` is the new label of old label `l` in draw `t` of chain `c`.
    pub permutations: Vec<Vec<Vec<usize>>>,
    pub traces: Vec<Trace>,
    /// Number of reference/assignment rounds performed.
    pub rounds: usize,
    /// False when `max_iter` rounds ran without the permutations settling.
    pub converged: bool,
}

fn check_traces(traces: &[Trace]) -> Result<(usize, usize)> {
    let first = traces.first().ok_or(Error::EmptyTrace)?;
    let (n, k) = (first.n, first.k);
    let mut total = 0;
    for t in traces {
        if t.n != n || t.k != k || t.r != first.r {
            return Err(Error::Shape("traces disagree on dimensions".into()));
        }
        if t.class_probs.len() != t.draws.len() || t.class_probs.iter().any(|m| m.len() != n * k) {
            return Err(Error::MissingClassProbs);
        }
        total += t.len();
    }
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    Ok((n, k))
}

/// Relabels pooled draws from all chains so their classification matrices agree with a
/// common reference.
///
/// Each round averages the currently permuted matrices into a reference `Q`, then picks
/// for every draw the permutation minimizing `Σ_j Σ_l M_jl ln(M_jl / Q_{j,σ(l)})` by
/// solving a `k x k` assignment exactly. Stops once no permutation changes or after
/// `max_iter` rounds. Allocations, `rho` rows and matrix columns are permuted together.
pub fn stephens_relabel(traces: &[Trace], max_iter: usize) -> Result<Relabeling> {
    let (n, k) = check_traces(traces)?;
    let identity: Vec<usize> = (0..k).collect();
    let mut perms: Vec<Vec<Vec<usize>>> = traces
        .iter()
        .map(|t| vec![identity.clone(); t.len()])
        .collect();
    let total_draws: usize = traces.iter().map(Trace::len).sum();

    let mut rounds = 0;
    let mut converged = k == 1;
    let mut cost = vec![0.0; k * k];
    while !converged && rounds < max_iter {
        rounds += 1;
        let mut q = vec![0.0; n * k];
        for (trace, chain_perms) in traces.iter().zip(&perms) {
            for (m, perm) in trace.class_probs.iter().zip(chain_perms) {
                for j in 0..n {
                    for l in 0..k {
                        q[j * k + perm[l]] += m[j * k + l];
                    }
                }
            }
        }
        let log_q: Vec<f64> = q
            .iter()
            .map(|&v| (v / total_draws as f64).max(f64::MIN_POSITIVE).ln())
            .collect();

        let mut changed = false;
        for (trace, chain_perms) in traces.iter().zip(perms.iter_mut()) {
            for (m, perm) in trace.class_probs.iter().zip(chain_perms.iter_mut()) {
                // The Σ M ln M part is the same for every permutation, so only the cross
                // term enters the assignment costs. 0 ln 0 = 0.
                cost.fill(0.0);
                for j in 0..n {
                    for l in 0..k {
                        let p = m[j * k + l];
                        if p > 0.0 {
                            for target in 0..k {
                                cost[l * k + target] -= p * log_q[j * k + target];
                            }
                        }
                    }
                }
                let best = min_cost_assignment(&cost, k);
                if best != *perm {
                    *perm = best;
                    changed = true;
                }
            }
        }
        converged = !changed;
    }

    let relabeled = traces
        .iter()
        .zip(&perms)
        .map(|(t, chain_perms)| apply_permutations(t, chain_perms))
        .collect();
    Ok(Relabeling {
        permutations: perms,
        traces: relabeled,
        rounds,
        converged,
    })
}

/// Applies one label permutation per draw.
pub fn apply_permutations(trace: &Trace, perms: &[Vec<usize>]) -> Trace {
    let (n, k) = (trace.n, trace.k);
    let draws = trace
        .draws
        .iter()
        .zip(perms)
        .map(|(d, p)| d.permuted(p))
        .collect();
    let class_probs = trace
        .class_probs
        .iter()
        .zip(perms)
        .map(|(m, p)| {
            let mut out = vec![0.0; n * k];
            for j in 0..n {
                for l in 0..k {
                    out[j * k + p[l]] = m[j * k + l];
                }
            }
            out
        })
        .collect();
    Trace {
        n,
        k,
        r: trace.r,
        iterations: trace.iterations.clone(),
        draws,
        class_probs,
        log_post: trace.log_post.clone(),
        acceptance: trace.acceptance.clone(),
    }
}
