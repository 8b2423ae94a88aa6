use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Exp as ExpDist, Gamma as GammaDist};
use statrs::function::gamma::ln_gamma;

use super::*;

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn toy_data() -> CompositionDataset {
    CompositionDataset::new(&[
        vec![0.1, 0.2, 0.3, 0.4],
        vec![0.4, 0.3, 0.2, 0.1],
        vec![0.25, 0.25, 0.25, 0.25],
    ])
    .unwrap()
}

fn toy_state() -> ChainState {
    ChainState {
        z: AllocationVector(vec![0, 1, 0]),
        rho: ClusterParams::new(&[vec![2.0, 3.0, 4.0, 5.0], vec![5.0, 4.0, 1.5, 0.7]]).unwrap(),
        alpha: 1.7,
        beta: 0.6,
    }
}

/// Independent evaluation of the five log terms.
fn log_posterior_oracle(state: &ChainState, data: &CompositionDataset, h: &Hyperparams) -> f64 {
    let mut data_term = 0.0;
    for (j, p) in data.rows().enumerate() {
        let rho = state.rho.row(state.z.0[j]);
        let mut v = ln_gamma(rho.iter().sum());
        for (a, x) in rho.iter().zip(p) {
            v += -ln_gamma(*a) + (a - 1.0) * x.ln();
        }
        data_term += v;
    }
    let prior_rho = GammaDist::new(state.alpha, state.beta).unwrap();
    let rho_term: f64 = state.rho.as_slice().iter().map(|&x| prior_rho.ln_pdf(x)).sum();
    let k = state.rho.k();
    let counts = state.z.counts(k);
    let a: Vec<f64> = counts.iter().map(|&c| c as f64 + h.delta).collect();
    let z_term = ln_gamma(k as f64 * h.delta) - k as f64 * ln_gamma(h.delta)
        + a.iter().map(|&x| ln_gamma(x)).sum::<f64>()
        - ln_gamma(a.iter().sum());
    let alpha_term = ExpDist::new(h.gamma).unwrap().ln_pdf(state.alpha);
    let beta_term = GammaDist::new(h.phi, h.lambda).unwrap().ln_pdf(state.beta);
    data_term + rho_term + z_term + alpha_term + beta_term
}

#[test]
fn log_posterior_single_flat_point() {
    let data = CompositionDataset::new(&[vec![0.25; 4]]).unwrap();
    let h = Hyperparams::default();
    let state = ChainState {
        z: AllocationVector(vec![0]),
        rho: ClusterParams::new(&[vec![1.0; 4]]).unwrap(),
        alpha: 2.0,
        beta: 1.5,
    };
    let lp = log_posterior(&state, &data, &h).unwrap();
    let priors = 4.0 * GammaDist::new(2.0, 1.5).unwrap().ln_pdf(1.0)
        + ExpDist::new(0.2).unwrap().ln_pdf(2.0)
        + GammaDist::new(5.0, 6.0).unwrap().ln_pdf(1.5);
    assert!((lp - (6f64.ln() + priors)).abs() < 1e-10, "{lp}");
}

#[test]
fn log_posterior_matches_oracle() {
    let data = toy_data();
    let h = Hyperparams::default();
    let state = toy_state();
    let lp = log_posterior(&state, &data, &h).unwrap();
    assert!((lp - log_posterior_oracle(&state, &data, &h)).abs() < 1e-9);
}

#[test]
fn log_posterior_label_symmetry() {
    let data = toy_data();
    let h = Hyperparams::default();
    let state = toy_state();
    let swapped = state.permuted(&[1, 0]);
    let a = log_posterior(&state, &data, &h).unwrap();
    let b = log_posterior(&swapped, &data, &h).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn log_posterior_dimension_mismatch() {
    let data = toy_data();
    let mut state = toy_state();
    state.z = AllocationVector(vec![0, 1]);
    assert!(log_posterior(&state, &data, &Hyperparams::default()).is_err());
}

#[test]
fn allocation_prior_single_cluster_is_zero() {
    assert!(log_allocation_prior(&[17], 0.5).abs() < 1e-12);
}

#[test]
fn allocation_prior_sums_to_one() {
    // Σ over all 2^4 labelings of 4 observations into 2 clusters.
    let total: f64 = (0..16u32)
        .map(|bits| {
            let ones = bits.count_ones() as usize;
            log_allocation_prior(&[4 - ones, ones], 0.5).exp()
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn gibbs_single_cluster() {
    let data = toy_data();
    let mut state = toy_state();
    state.rho = ClusterParams::new(&[vec![2.0, 3.0, 4.0, 5.0]]).unwrap();
    state.z = AllocationVector(vec![0; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = update_allocations_gibbs(&mut state, &data, &Hyperparams::default(), &mut rng);
    assert!(m.iter().all(|&v| v == 1.0));
    assert_eq!(state.z.0, vec![0; 3]);
}

#[test]
fn gibbs_identical_clusters_split_evenly() {
    let data = CompositionDataset::new(&[vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
    let mut state = ChainState {
        z: AllocationVector(vec![0]),
        rho: ClusterParams::new(&[vec![2.0; 4], vec![2.0; 4]]).unwrap(),
        alpha: 1.0,
        beta: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = update_allocations_gibbs(&mut state, &data, &Hyperparams::default(), &mut rng);
    assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
}

#[test]
fn class_prob_rows_sum_to_one() {
    let data = toy_data();
    let state = toy_state();
    let m = classification_probs(&state, &data, &Hyperparams::default());
    for row in m.chunks(2) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn metropolis_single_cluster_always_accepts() {
    let data = toy_data();
    let mut state = toy_state();
    state.rho = ClusterParams::new(&[vec![2.0, 3.0, 4.0, 5.0]]).unwrap();
    state.z = AllocationVector(vec![0; 3]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut counter = AcceptCounter::default();
    for _ in 0..10 {
        update_allocations_metropolis(&mut state, &data, &Hyperparams::default(), &mut rng, &mut counter);
    }
    assert_eq!(counter.accepted, 30);
    assert_eq!(counter.proposed, 30);
}

#[test]
fn identity_proposals_have_unit_ratio() {
    let state = toy_state();
    let h = Hyperparams::default();
    assert_eq!(alpha_log_acceptance(1.7, 1.7, 0.6, &state.rho, &h), 0.0);
    let stats = ClusterStats::new(&state.z, &toy_data(), 2);
    for l in 0..2 {
        for i in 0..4 {
            let v = state.rho.get(l, i);
            assert_eq!(rho_log_acceptance(&state, &stats, l, i, v, 0.7), 0.0);
        }
    }
}

/// Quadrature CDF of the `alpha` target with `k = r = 1`, `rho = beta = 1`:
/// density proportional to `exp(-gamma a) / Gamma(a)`.
fn alpha_target_cdf(gamma: f64) -> impl Fn(f64) -> f64 {
    let h = 1e-3;
    let upper = 80.0;
    let steps = (upper / h) as usize;
    let dens = |a: f64| if a <= 0.0 { 0.0 } else { (-gamma * a - ln_gamma(a)).exp() };
    let mut cum = vec![0.0; steps + 1];
    for s in 0..steps {
        let (a, b) = (s as f64 * h, (s + 1) as f64 * h);
        cum[s + 1] = cum[s] + h / 6.0 * (dens(a) + 4.0 * dens(0.5 * (a + b)) + dens(b));
    }
    let total = cum[steps];
    move |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let pos = x / h;
        let idx = pos.floor() as usize;
        if idx >= steps {
            return 1.0;
        }
        let frac = pos - idx as f64;
        (cum[idx] + frac * (cum[idx + 1] - cum[idx])) / total
    }
}

#[test]
fn alpha_kernel_matches_quadrature() {
    let h = Hyperparams::default();
    let mut state = ChainState {
        z: AllocationVector(vec![]),
        rho: ClusterParams::new(&[vec![1.0]]).unwrap(),
        alpha: 1.0,
        beta: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut draws = Vec::new();
    for t in 0..400_000 {
        update_alpha(&mut state, &h, 0.5, &mut rng);
        if t >= 1000 && t % 4 == 0 {
            draws.push(state.alpha);
        }
    }
    let d = ks_distance(draws, alpha_target_cdf(h.gamma));
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn beta_draws_match_gamma_moments() {
    let h = Hyperparams::default();
    let mut state = ChainState {
        z: AllocationVector(vec![]),
        rho: ClusterParams::new(&[vec![1.0; 4]]).unwrap(),
        alpha: 1.0,
        beta: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..m {
        update_beta(&mut state, &h, &mut rng);
        s += state.beta;
        s2 += state.beta * state.beta;
    }
    let mean = s / m as f64;
    let var = s2 / m as f64 - mean * mean;
    // Gamma(9, 10)
    assert!((mean - 0.9).abs() / 0.9 < 0.01, "{mean}");
    assert!((var - 0.09).abs() / 0.09 < 0.02, "{var}");
}

#[test]
fn beta_shape_grows_with_k() {
    // Doubling k at alpha = 1, r = 4 adds 4 to the shape: compare mean * rate.
    let h = Hyperparams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut shape_estimate = |k: usize| {
        let mut state = ChainState {
            z: AllocationVector(vec![]),
            rho: ClusterParams::from_flat(k, 4, vec![1e-9; 4 * k]).unwrap(),
            alpha: 1.0,
            beta: 1.0,
        };
        let m = 400_000;
        let mut s = 0.0;
        for _ in 0..m {
            update_beta(&mut state, &h, &mut rng);
            s += state.beta;
        }
        s / m as f64 * h.lambda
    };
    let (s1, s2) = (shape_estimate(1), shape_estimate(2));
    assert!((s1 - 9.0).abs() < 0.05, "{s1}");
    assert!((s2 - s1 - 4.0).abs() < 0.1, "{s1} {s2}");
}

fn lognormal_variance(rho: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    s2.exp_m1() * (2.0 * rho.ln() + s2).exp()
}

#[test]
fn proposal_sigma_variance_identity() {
    let s = proposal_sigma(1.0, 0.7).unwrap();
    let expected = ((3.8f64.sqrt() + 1.0) / 2.0).ln().sqrt();
    assert!((s - expected).abs() < 1e-14);
    assert!((lognormal_variance(1.0, s) - 0.7).abs() < 1e-10);
    let s10 = proposal_sigma(10.0, 0.7).unwrap();
    assert!((lognormal_variance(10.0, s10) - 7.0).abs() < 1e-10);
    assert!(proposal_sigma(3.0, 1e-14).unwrap() < 1e-6);
    assert!(proposal_sigma(0.0, 0.7).is_err());
    assert!(proposal_sigma(1.0, -0.7).is_err());
}

#[test]
fn empty_cluster_rho_recovers_prior() {
    let data = CompositionDataset::new(&[vec![0.3, 0.7]]).unwrap();
    let mut state = ChainState {
        z: AllocationVector(vec![0]),
        rho: ClusterParams::new(&[vec![3.0, 3.0], vec![1.0, 1.0]]).unwrap(),
        alpha: 2.5,
        beta: 1.3,
    };
    let stats = ClusterStats::new(&state.z, &data, 2);
    assert_eq!(stats.counts, vec![1, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut draws = Vec::new();
    for t in 0..300_000 {
        update_rho(&mut state, &stats, 0.7, &mut rng);
        if t >= 1000 && t % 3 == 0 {
            draws.push(state.rho.get(1, 0));
        }
    }
    let prior = GammaDist::new(2.5, 1.3).unwrap();
    let d = ks_distance(draws, |x| prior.cdf(x));
    assert!(d < 0.02, "KS {d}");
}

#[test]
fn stored_draw_count() {
    let data = toy_data();
    let config = SamplerConfig::new(2).with_schedule(100, 50, 5).with_seed(3);
    let trace = run_chain(&data, &config).unwrap();
    assert_eq!(trace.len(), 10);
    assert_eq!(trace.iterations, (1..=10).map(|i| 50 + 5 * i).collect::<Vec<_>>());
    trace.validate().unwrap();
    for m in &trace.class_probs {
        for row in m.chunks(2) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn equal_seeds_identical_traces() {
    let data = toy_data();
    let config = SamplerConfig::new(2).with_schedule(300, 100, 2).with_seed(77);
    let a = run_chain(&data, &config).unwrap();
    let b = run_chain(&data, &config).unwrap();
    assert_eq!(a, b);
    let c = run_chain(&data, &config.clone().with_seed(78)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn invalid_schedules_rejected() {
    let data = toy_data();
    for cfg in [
        SamplerConfig::new(2).with_schedule(10, 10, 1),
        SamplerConfig::new(2).with_schedule(10, 2, 0),
        SamplerConfig::new(0),
    ] {
        assert!(matches!(run_chain(&data, &cfg), Err(Error::Config(_))));
    }
    let mut cfg = SamplerConfig::new(2);
    cfg.sigma_alpha = 0.0;
    assert!(cfg.validate().is_err());
}

#[test]
fn acceptance_bookkeeping_is_exact() {
    let data = toy_data();
    let mut config = SamplerConfig::new(3).with_schedule(200, 20, 3).with_seed(1);
    config.allocation_mode = AllocationMode::Metropolis;
    let trace = run_chain(&data, &config).unwrap();
    let acc = &trace.acceptance;
    assert_eq!(acc.alpha.proposed, 200);
    assert!(acc.rho.iter().all(|c| c.proposed == 200));
    assert_eq!(acc.allocation.proposed, 600);
    assert!(acc.rho.iter().all(|c| c.accepted <= c.proposed));
    trace.validate().unwrap();
}

#[test]
fn chains_use_distinct_streams() {
    let data = toy_data();
    let config = SamplerConfig::new(2).with_schedule(50, 10, 1).with_seed(4);
    let traces = run_chains(&data, &config, 3).unwrap();
    assert_eq!(traces[0], run_chain(&data, &config).unwrap());
    assert_ne!(traces[0].log_post, traces[1].log_post);
    assert_eq!(traces[2], run_chain_on_stream(&data, &config, 2).unwrap());
}

#[test]
fn prior_only_run_recovers_hyperpriors() {
    let data = CompositionDataset::empty(2);
    let config = SamplerConfig::new(1).with_schedule(2_000_000 + 5_000, 5_000, 20).with_seed(8);
    let trace = run_chain(&data, &config).unwrap();
    assert_eq!(trace.len(), 100_000);
    let alphas: Vec<f64> = trace.draws.iter().map(|d| d.alpha).collect();
    let betas: Vec<f64> = trace.draws.iter().map(|d| d.beta).collect();
    let exp = ExpDist::new(0.2).unwrap();
    let gam = GammaDist::new(5.0, 6.0).unwrap();
    let da = ks_distance(alphas, |x| exp.cdf(x));
    let db = ks_distance(betas, |x| gam.cdf(x));
    assert!(da < 0.02, "alpha KS {da}");
    assert!(db < 0.02, "beta KS {db}");
}
