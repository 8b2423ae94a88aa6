//! Convergence and mixing diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Trace;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Potential scale reduction factor over `m >= 2` equal-length chains (no splitting).
///
/// With `W` the mean within-chain variance and `B` the between-chain variance of the
/// means scaled by the chain length `n`, returns `√(((n−1)/n · W + B/n) / W)`. When every
/// chain is constant and they agree the result is 1; constant but disagreeing chains give
/// infinity.
pub fn bgr_statistic<S: AsRef<[f64]>>(chains: &[S]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InsufficientChains(m));
    }
    let n = chains[0].as_ref().len();
    if let Some(c) = chains.iter().find(|c| c.as_ref().len() != n) {
        return Err(Error::LengthMismatch(c.as_ref().len(), n));
    }
    if n < 2 {
        return Err(Error::Shape("each chain needs at least two draws".into()));
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c.as_ref())).collect();
    let means: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let nf = n as f64;
    let b = nf * mean_var(&means).1;
    if w <= 0.0 {
        return Ok(if b <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let v_hat = (nf - 1.0) / nf * w + b / nf;
    Ok((v_hat / w).sqrt())
}

/// Scale reduction factors of every relabeled `rho` entry and of `alpha`, `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgrReport {
    /// Row-major `k x r`.
    pub rho: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl BgrReport {
    pub fn max_rho(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Computes the report over relabeled chains, truncating to the shortest chain.
pub fn bgr_report(traces: &[Trace]) -> Result<BgrReport> {
    if traces.len() < 2 {
        return Err(Error::InsufficientChains(traces.len()));
    }
    let len = traces.iter().map(Trace::len).min().unwrap_or(0);
    let (k, r) = (traces[0].k, traces[0].r);
    let series = |f: &dyn Fn(&crate::sampler::ChainState) -> f64| -> Result<f64> {
        let chains: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.draws[..len].iter().map(f).collect())
            .collect();
        bgr_statistic(&chains)
    };
    let mut rho = Vec::with_capacity(k * r);
    for l in 0..k {
        for i in 0..r {
            rho.push(series(&|d| d.rho.get(l, i))?);
        }
    }
    Ok(BgrReport {
        rho,
        alpha: series(&|d| d.alpha)?,
        beta: series(&|d| d.beta)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn constant_chains_give_one() {
        let chains = vec![vec![2.0; 10], vec![2.0; 10], vec![2.0; 10]];
        assert_eq!(bgr_statistic(&chains).unwrap(), 1.0);
        let split = vec![vec![2.0; 10], vec![3.0; 10]];
        assert!(bgr_statistic(&split).unwrap().is_infinite());
    }

    #[test]
    fn iid_normal_chains_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..10_000).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let r = bgr_statistic(&chains).unwrap();
        assert!(r < 1.05, "{r}");
    }

    #[test]
    fn separated_chains_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..1000).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1000).map(|_| 10.0 + normal.sample(&mut rng)).collect();
        assert!(bgr_statistic(&[a, b]).unwrap() > 1.1);
    }

    #[test]
    fn affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let chains: Vec<Vec<f64>> = (0..3)
            .map(|c| (0..500).map(|_| c as f64 * 0.1 + normal.sample(&mut rng)).collect())
            .collect();
        let moved: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|x| -3.5 * x + 12.0).collect())
            .collect();
        let (a, b) = (bgr_statistic(&chains).unwrap(), bgr_statistic(&moved).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(bgr_statistic(&[vec![1.0, 2.0]]), Err(Error::InsufficientChains(1))));
        assert!(matches!(
            bgr_statistic(&[vec![1.0, 2.0], vec![1.0]]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }
}
