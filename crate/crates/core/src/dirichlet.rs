//! Closed-form Dirichlet mathematics, evaluated in log space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

fn check_rho(rho: &[f64]) -> Result<()> {
    if rho.is_empty() {
        return Err(Error::domain("empty parameter vector"));
    }
    if let Some(v) = rho.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::domain(format!("concentration parameter {v} is not positive")));
    }
    Ok(())
}

/// `ln Γ(Σρ) − Σ ln Γ(ρ_i)`, the log normalizing constant of `Dir(ρ)`.
pub fn log_normalizer(rho: &[f64]) -> f64 {
    let total: f64 = rho.iter().sum();
    ln_gamma(total) - rho.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

/// Log density given `ln p` directly. No validation.
#[inline]
pub(crate) fn logpdf_from_logs(log_p: &[f64], rho: &[f64], log_norm: f64) -> f64 {
    log_norm
        + rho
            .iter()
            .zip(log_p)
            .map(|(&a, &lp)| (a - 1.0) * lp)
            .sum::<f64>()
}

/// Log density of `Dir(rho)` at an interior simplex point `p`.
pub fn dirichlet_logpdf(p: &[f64], rho: &[f64]) -> Result<f64> {
    check_rho(rho)?;
    if p.len() != rho.len() {
        return Err(Error::LengthMismatch(p.len(), rho.len()));
    }
    if p.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::domain("point is not interior to the simplex"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("point sums to {sum}, expected 1")));
    }
    let log_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    Ok(logpdf_from_logs(&log_p, rho, log_normalizer(rho)))
}

/// Differential entropy of `Dir(rho)`:
/// `ln B(ρ) + (ρ₀ − r) ψ(ρ₀) − Σ (ρ_i − 1) ψ(ρ_i)`.
pub fn dirichlet_entropy(rho: &[f64]) -> Result<f64> {
    check_rho(rho)?;
    let r = rho.len() as f64;
    let total: f64 = rho.iter().sum();
    let log_beta = -log_normalizer(rho);
    Ok(log_beta + (total - r) * digamma(total)
        - rho.iter().map(|&a| (a - 1.0) * digamma(a)).sum::<f64>())
}

/// Draws `ln X` for `X ~ Dir(rho)`, normalized so that `Σ exp(ln X_i) = 1`.
///
/// Shapes below one use `G(a) = G(a + 1) U^{1/a}` so tiny components stay representable
/// in log space.
pub(crate) fn sample_dirichlet_log<R: Rng + ?Sized>(rho: &[f64], rng: &mut R) -> Vec<f64> {
    let mut logs: Vec<f64> = rho
        .iter()
        .map(|&a| {
            if a >= 1.0 {
                let g: f64 = Gamma::new(a, 1.0).expect("positive shape").sample(rng);
                g.ln()
            } else {
                let g: f64 = Gamma::new(a + 1.0, 1.0).expect("positive shape").sample(rng);
                let u: f64 = rng.random::<f64>();
                g.ln() + (1.0 - u).ln() / a
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logs.iter_mut().for_each(|l| *l -= log_total);
    logs
}

/// One draw from `Dir(rho)`.
///
/// Components that would underflow are floored at the smallest positive normal double
/// so the point stays interior.
pub fn sample_dirichlet<R: Rng + ?Sized>(rho: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_rho(rho)?;
    let mut p: Vec<f64> = sample_dirichlet_log(rho, rng)
        .into_iter()
        .map(|l| l.exp().max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// Monte Carlo estimate of the Hellinger distance with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HellingerEstimate {
    /// `√max(Ĥ², 0)`.
    pub distance: f64,
    /// Raw estimate of the squared distance, possibly slightly negative.
    pub squared: f64,
    /// Standard error of `squared`.
    pub std_error: f64,
    pub samples: usize,
}

/// Hellinger distance between `Dir(rho_f)` and `Dir(rho_g)` from `m` draws of `g`:
/// `Ĥ² = 1 − mean √(f(x)/g(x))`.
pub fn hellinger_mc_detailed(
    rho_f: &[f64],
    rho_g: &[f64],
    m: usize,
    seed: u64,
) -> Result<HellingerEstimate> {
    check_rho(rho_f)?;
    check_rho(rho_g)?;
    if rho_f.len() != rho_g.len() {
        return Err(Error::LengthMismatch(rho_f.len(), rho_g.len()));
    }
    if m == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm_f = log_normalizer(rho_f);
    let norm_g = log_normalizer(rho_g);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..m {
        let x = sample_dirichlet_log(rho_g, &mut rng);
        let w = (0.5 * (logpdf_from_logs(&x, rho_f, norm_f) - logpdf_from_logs(&x, rho_g, norm_g))).exp();
        sum += w;
        sum_sq += w * w;
    }
    let mf = m as f64;
    let mean = sum / mf;
    let var = if m > 1 {
        ((sum_sq - mf * mean * mean) / (mf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let squared = 1.0 - mean;
    Ok(HellingerEstimate {
        distance: squared.max(0.0).sqrt(),
        squared,
        std_error: (var / mf).sqrt(),
        samples: m,
    })
}

/// Hellinger distance between two Dirichlet densities, estimated from `m` draws.
pub fn hellinger_mc(rho_f: &[f64], rho_g: &[f64], m: usize, seed: u64) -> Result<f64> {
    hellinger_mc_detailed(rho_f, rho_g, m, seed).map(|h| h.distance)
}
