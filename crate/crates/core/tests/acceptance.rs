//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits nonzero
//! when any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use dirmix::assignment::min_cost_assignment;
use dirmix::dirichlet::{dirichlet_entropy, dirichlet_logpdf, hellinger_mc, sample_dirichlet};
use dirmix::io::read_dataset_csv;
use dirmix::postprocess::{
    analyze, coallocation_matrix, fraction_above, stephens_relabel, FitResult,
    DEFAULT_RELABEL_ROUNDS,
};
use dirmix::sampler::{
    log_allocation_prior, proposal_sigma, run_chains, update_allocations_gibbs,
    update_allocations_metropolis, update_beta, AcceptCounter, AllocationMode, ChainState,
    SamplerConfig, Trace,
};
use dirmix::select::{recommend, scan_k};
use dirmix::simplex::{
    AllocationVector, ClusterParams, CompositionDataset, Hyperparams, ValidationOptions,
};
use dirmix::synth::{confusion_matrix, generate, library_entry, scenario_library};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

const REPLICATES: u64 = 20;
const REQUIRED: usize = 18;
const CHAINS: usize = 3;

enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, outcome: Outcome, what: &str, detail: String, started: Instant) {
        let tag = match outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => {
                self.failures += 1;
                "FAIL"
            }
            Outcome::Skip => "SKIP",
        };
        println!(
            "criterion {id:>2} {tag} {what}: {detail} [{:.1}s]",
            started.elapsed().as_secs_f64()
        );
    }

    fn check(&mut self, id: u32, ok: bool, what: &str, detail: String, started: Instant) {
        let outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        self.line(id, outcome, what, detail, started);
    }
}

fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn config(k: usize, seed: u64) -> SamplerConfig {
    SamplerConfig::new(k)
        .with_schedule(50_000, 10_000, 5)
        .with_seed(seed)
}

struct Replicate {
    truth: AllocationVector,
    rho_true: Vec<Vec<f64>>,
    traces: Vec<Trace>,
    fit: FitResult,
}

fn replicate(scenario: &str, n: usize, k: usize, rep: u64) -> Replicate {
    let entry = library_entry(scenario).unwrap();
    let sc = entry.scenario(n, 10_000 + 100 * n as u64 + rep);
    let (data, truth) = generate(&sc).unwrap();
    let traces = run_chains(&data, &config(k, 20_000 + rep), CHAINS).unwrap();
    let fit = analyze(&traces).unwrap();
    Replicate {
        truth,
        rho_true: entry.rho.clone(),
        traces,
        fit,
    }
}

fn accuracy(r: &Replicate) -> f64 {
    confusion_matrix(&r.truth, &r.fit.map.state.z).unwrap().accuracy
}

/// Maps each true cluster to the estimated cluster whose normalized medians are closest.
fn match_clusters(r: &Replicate) -> Vec<usize> {
    let k = r.rho_true.len();
    let mut cost = vec![0.0; k * k];
    for (l, truth) in r.rho_true.iter().enumerate() {
        let total: f64 = truth.iter().sum();
        for e in 0..k {
            cost[l * k + e] = truth
                .iter()
                .zip(&r.fit.summaries.normalized[e])
                .map(|(t, iv)| (t / total - iv.median).powi(2))
                .sum();
        }
    }
    min_cost_assignment(&cost, k)
}

fn main() {
    let mut report = Report { failures: 0 };
    println!("acceptance suite: {REPLICATES} replicates, {CHAINS} chains, 50000 iterations");

    // Criteria 1, 4, 11 and 12 share the high-separation two-cluster fits.
    let started = Instant::now();
    let mut high2: Vec<(usize, Replicate)> = Vec::new();
    for n in [30, 50] {
        for rep in 0..REPLICATES {
            high2.push((n, replicate("high2", n, 2, rep)));
        }
    }
    let perfect = |n: usize| {
        high2
            .iter()
            .filter(|(m, r)| *m == n && accuracy(r) == 1.0)
            .count()
    };
    let (p30, p50) = (perfect(30), perfect(50));
    report.check(
        1,
        p30 >= REQUIRED && p50 >= REQUIRED,
        "high-separation 2-cluster recovery",
        format!("perfect MAP partitions n=30 {p30}/20, n=50 {p50}/20 (need >= {REQUIRED})"),
        started,
    );

    let started = Instant::now();
    let perfect3 = (0..REPLICATES)
        .filter(|&rep| accuracy(&replicate("high3", 50, 3, rep)) == 1.0)
        .count();
    report.check(
        2,
        perfect3 >= REQUIRED,
        "3-cluster high-separation recovery",
        format!("perfect MAP partitions n=50 {perfect3}/20 (need >= {REQUIRED})"),
        started,
    );

    let started = Instant::now();
    let accs: Vec<f64> = (0..REPLICATES)
        .map(|rep| accuracy(&replicate("moderate2", 50, 2, rep)))
        .collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    report.check(
        3,
        mean >= 0.84,
        "moderate-separation accuracy",
        format!("mean accuracy {mean:.4} (need >= 0.84), min {:.2}", accs.iter().copied().fold(1.0, f64::min)),
        started,
    );

    let started = Instant::now();
    let (mut covered, mut total) = (0usize, 0usize);
    for (_, r) in high2.iter().filter(|(n, _)| *n == 50) {
        let matched = match_clusters(r);
        for (l, truth) in r.rho_true.iter().enumerate() {
            for (i, &v) in truth.iter().enumerate() {
                total += 1;
                covered += r.fit.summaries.rho[matched[l]][i].contains(v) as usize;
            }
        }
    }
    let coverage = covered as f64 / total as f64;
    report.check(
        4,
        coverage >= 0.9,
        "credible-interval coverage",
        format!("{covered}/{total} true values inside 95% intervals ({coverage:.3}, need >= 0.90)"),
        started,
    );

    let started = Instant::now();
    let mut agreements = Vec::new();
    for (scenario, k) in [("high2", 2), ("high3", 3)] {
        let mut hits = 0;
        for rep in 0..REPLICATES {
            let entry = library_entry(scenario).unwrap();
            let (data, _) = generate(&entry.scenario(50, 30_000 + rep)).unwrap();
            let reports = scan_k(&data, &config(1, 40_000 + rep), CHAINS, 1..=5).unwrap();
            let rec = recommend(&reports).unwrap();
            if rec.agree() == Some(k) {
                hits += 1;
            } else {
                println!("    criterion 5 detail: {scenario} replicate {rep} picked {rec:?}");
            }
        }
        agreements.push((scenario, hits));
    }
    report.check(
        5,
        agreements.iter().all(|&(_, h)| h >= REQUIRED),
        "model selection agreement",
        agreements
            .iter()
            .map(|(s, h)| format!("{s} {h}/20"))
            .collect::<Vec<_>>()
            .join(", ")
            + &format!(" with ICL, BIC and DIC5 all at the generating k (need >= {REQUIRED})"),
        started,
    );

    let started = Instant::now();
    let (tv_gibbs, tv_metropolis) = allocation_kernel_tv();
    report.check(
        6,
        tv_gibbs < 0.01 && tv_metropolis < 0.01,
        "allocation-kernel exactness",
        format!("total variation gibbs {tv_gibbs:.5}, metropolis {tv_metropolis:.5} (need < 0.01)"),
        started,
    );

    let started = Instant::now();
    let (mean_err, var_err, ks) = beta_conjugacy();
    report.check(
        7,
        mean_err < 0.02 && var_err < 0.02 && ks < 0.005,
        "beta conjugacy",
        format!("relative mean error {mean_err:.5}, variance error {var_err:.5} (need < 0.02), KS {ks:.5} (need < 0.005)"),
        started,
    );

    let started = Instant::now();
    let worst = sigma_identity();
    report.check(
        8,
        worst < 1e-10,
        "proposal-scale variance identity",
        format!("worst relative error {worst:.3e} over 1000 pairs (need < 1e-10)"),
        started,
    );

    let started = Instant::now();
    let (worst, flat_err) = entropy_oracle();
    report.check(
        9,
        worst < 0.05 && flat_err <= 1e-12,
        "entropy oracle",
        format!("worst |closed form - MC| {worst:.4} (need < 0.05), flat error {flat_err:.1e}"),
        started,
    );

    let started = Instant::now();
    let (worst, worst_label, self_max) = hellinger_table();
    report.check(
        10,
        worst <= 0.05 && self_max <= 0.02,
        "Hellinger reproduction",
        format!("worst deviation from reference {worst:.4} at {worst_label} (need <= 0.05), max H(f,f) {self_max:.4} (need <= 0.02)"),
        started,
    );

    let started = Instant::now();
    let diff = relabel_invariance(&high2[0].1.traces[0]);
    report.check(
        11,
        diff <= 1e-12,
        "relabeling invariance",
        format!("max co-allocation difference {diff:.1e} (need <= 1e-12)"),
        started,
    );

    let started = Instant::now();
    let max_bgr = high2
        .iter()
        .filter_map(|(_, r)| r.fit.bgr.as_ref().map(|b| b.max_rho()))
        .fold(f64::NEG_INFINITY, f64::max);
    let alpha_rates: Vec<f64> = high2
        .iter()
        .map(|(_, r)| {
            let mut c = AcceptCounter::default();
            for t in &r.traces {
                c.accepted += t.acceptance.alpha.accepted;
                c.proposed += t.acceptance.alpha.proposed;
            }
            c.rate()
        })
        .collect();
    let in_band = alpha_rates.iter().filter(|r| (0.3..=0.5).contains(*r)).count();
    let (lo, hi) = alpha_rates
        .iter()
        .fold((1.0f64, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    report.check(
        12,
        max_bgr < 1.1 && in_band > 0,
        "convergence diagnostics",
        format!("max rho BGR {max_bgr:.4} over {} fits (need < 1.1); alpha acceptance {lo:.3}..{hi:.3}, {in_band} fits in 30-50%", high2.len()),
        started,
    );

    let started = Instant::now();
    match gbr_fixture() {
        None => report.line(
            13,
            Outcome::Skip,
            "2012 survey fit",
            "fixtures/gbr/2012.csv not bundled".into(),
            started,
        ),
        Some(path) => {
            let (ok, detail) = gbr_2012(&path);
            report.check(13, ok, "2012 survey fit", detail, started);
        }
    }

    if report.failures > 0 {
        println!("{} criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all criteria passed or skipped");
}

/// Runs each allocation kernel at fixed `rho` and compares visit frequencies with the
/// enumerated conditional over all `2^5` labelings.
fn allocation_kernel_tv() -> (f64, f64) {
    let rho = vec![vec![4.0, 2.0, 1.0], vec![1.5, 2.0, 3.0]];
    let data = CompositionDataset::new(&[
        vec![0.6, 0.3, 0.1],
        vec![0.2, 0.3, 0.5],
        vec![0.35, 0.35, 0.3],
        vec![0.5, 0.2, 0.3],
        vec![0.1, 0.5, 0.4],
    ])
    .unwrap();
    let hyper = Hyperparams::default();
    let (n, k) = (5usize, 2usize);
    let configs = 1usize << n;
    let labels = |code: usize| (0..n).map(|j| (code >> j) & 1).collect::<Vec<usize>>();
    let mut exact: Vec<f64> = (0..configs)
        .map(|code| {
            let z = AllocationVector(labels(code));
            let lik: f64 = (0..n)
                .map(|j| dirichlet_logpdf(data.row(j), &rho[z.0[j]]).unwrap())
                .sum();
            lik + log_allocation_prior(&z.counts(k), hyper.delta)
        })
        .collect();
    let max = exact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    exact.iter_mut().for_each(|v| *v = (*v - max).exp());
    let norm: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|v| *v /= norm);

    let sweeps = 200_000;
    let run = |mode: AllocationMode| {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut state = ChainState {
            z: AllocationVector(vec![0; n]),
            rho: ClusterParams::new(&rho).unwrap(),
            alpha: 1.0,
            beta: 1.0,
        };
        let mut counter = AcceptCounter::default();
        let mut visits = vec![0u64; configs];
        for _ in 0..sweeps {
            match mode {
                AllocationMode::Gibbs => {
                    update_allocations_gibbs(&mut state, &data, &hyper, &mut rng);
                }
                AllocationMode::Metropolis => {
                    update_allocations_metropolis(&mut state, &data, &hyper, &mut rng, &mut counter);
                }
            }
            let code: usize = state.z.0.iter().enumerate().map(|(j, &l)| l << j).sum();
            visits[code] += 1;
        }
        0.5 * visits
            .iter()
            .zip(&exact)
            .map(|(&v, &p)| (v as f64 / sweeps as f64 - p).abs())
            .sum::<f64>()
    };
    (run(AllocationMode::Gibbs), run(AllocationMode::Metropolis))
}

fn beta_conjugacy() -> (f64, f64, f64) {
    let hyper = Hyperparams::default();
    let rho = vec![vec![2.0, 0.5, 3.0, 1.0], vec![4.0, 1.5, 0.7, 2.2]];
    let mut state = ChainState {
        z: AllocationVector(vec![0, 1]),
        rho: ClusterParams::new(&rho).unwrap(),
        alpha: 1.3,
        beta: 1.0,
    };
    let (k, r) = (2.0, 4.0);
    let shape = hyper.phi + r * state.alpha * k;
    let rate = hyper.lambda + rho.iter().flatten().sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| {
            update_beta(&mut state, &hyper, &mut rng);
            state.beta
        })
        .collect();
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let var = draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let (true_mean, true_var) = (shape / rate, shape / (rate * rate));
    let gamma = Gamma::new(shape, rate).unwrap();
    let ks = ks_distance(draws, |x| gamma.cdf(x));
    (
        (mean / true_mean - 1.0).abs(),
        (var / true_var - 1.0).abs(),
        ks,
    )
}

/// A log-normal step `ln rho* ~ N(ln rho, s^2)` has variance `rho^2 e^{s^2}(e^{s^2} - 1)`.
fn sigma_identity() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    (0..1000)
        .map(|_| {
            let rho = 10f64.powf(rng.random_range(-3.0..3.0));
            let p_var = rng.random_range(0.01..5.0);
            let s2 = proposal_sigma(rho, p_var).unwrap().powi(2);
            let var = rho * rho * s2.exp() * s2.exp_m1();
            (var / (p_var * rho) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn entropy_oracle() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 1_000_000;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rho: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..20.0)).collect();
        let mc = -(0..draws)
            .map(|_| dirichlet_logpdf(&sample_dirichlet(&rho, &mut rng).unwrap(), &rho).unwrap())
            .sum::<f64>()
            / draws as f64;
        worst = worst.max((dirichlet_entropy(&rho).unwrap() - mc).abs());
    }
    let flat = (dirichlet_entropy(&[1.0; 4]).unwrap() + 6f64.ln()).abs();
    (worst, flat)
}

fn hellinger_table() -> (f64, String, f64) {
    let m = 10_000;
    let mut worst = 0.0;
    let mut worst_label = String::new();
    let mut self_max: f64 = 0.0;
    for (e, entry) in scenario_library().iter().enumerate() {
        for &(a, b, reference) in &entry.hellinger {
            let seed = 50_000 + 10 * e as u64 + a as u64;
            let h = hellinger_mc(&entry.rho[a], &entry.rho[b], m, seed).unwrap();
            let dev = (h - reference).abs();
            println!(
                "    criterion 10 detail: {} H({}, {}) = {h:.4}, reference {reference}",
                entry.name,
                a + 1,
                b + 1
            );
            if dev > worst {
                worst = dev;
                worst_label = format!("{} ({}, {})", entry.name, a + 1, b + 1);
            }
        }
        for (l, rho) in entry.rho.iter().enumerate() {
            let h = hellinger_mc(rho, rho, m, 60_000 + 10 * e as u64 + l as u64).unwrap();
            self_max = self_max.max(h);
        }
    }
    (worst, worst_label, self_max)
}

fn relabel_invariance(trace: &Trace) -> f64 {
    let k = trace.k;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut scrambled = trace.clone();
    for (d, m) in scrambled.draws.iter_mut().zip(scrambled.class_probs.iter_mut()) {
        let perm: Vec<usize> = if rng.random::<bool>() { vec![1, 0] } else { vec![0, 1] };
        assert_eq!(perm.len(), k);
        *d = d.permuted(&perm);
        let old = m.clone();
        for j in 0..trace.n {
            for l in 0..k {
                m[j * k + perm[l]] = old[j * k + l];
            }
        }
    }
    let reference = coallocation_matrix(std::slice::from_ref(trace)).unwrap();
    let relabeled = stephens_relabel(&[scrambled], DEFAULT_RELABEL_ROUNDS).unwrap();
    let after = coallocation_matrix(&relabeled.traces).unwrap();
    reference
        .iter()
        .flatten()
        .zip(after.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn gbr_fixture() -> Option<PathBuf> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/gbr/2012.csv");
    path.exists().then_some(path)
}

/// Reference values for the 2012 survey: normalized median and 95% interval per
/// group and part (Algae, Hard coral, Sand, Soft coral).
const GBR_2012_NORMALIZED: [[(f64, f64, f64); 4]; 4] = [
    [(0.43, 0.36, 0.50), (0.43, 0.38, 0.49), (0.03, 0.01, 0.05), (0.10, 0.07, 0.15)],
    [(0.28, 0.20, 0.35), (0.31, 0.23, 0.40), (0.07, 0.03, 0.22), (0.34, 0.19, 0.41)],
    [(0.18, 0.12, 0.26), (0.37, 0.25, 0.44), (0.38, 0.20, 0.48), (0.07, 0.04, 0.22)],
    [(0.21, 0.17, 0.26), (0.44, 0.39, 0.49), (0.17, 0.12, 0.25), (0.17, 0.12, 0.24)],
];

fn gbr_2012(path: &PathBuf) -> (bool, String) {
    let data = read_dataset_csv(path, ValidationOptions::default()).unwrap();
    let chains = 5;
    let reports = scan_k(&data, &config(1, 70_000), chains, 1..=10).unwrap();
    let rec = recommend(&reports).unwrap();
    let fit = analyze(&run_chains(&data, &config(4, 70_004), chains).unwrap()).unwrap();
    let mut cost = vec![0.0; 16];
    for (g, row) in GBR_2012_NORMALIZED.iter().enumerate() {
        for e in 0..4 {
            cost[g * 4 + e] = row
                .iter()
                .zip(&fit.summaries.normalized[e])
                .map(|(t, iv)| (t.0 - iv.median).powi(2))
                .sum();
        }
    }
    let matched = min_cost_assignment(&cost, 4);
    let mut inside = 0;
    for (g, row) in GBR_2012_NORMALIZED.iter().enumerate() {
        for (i, &(_, lo, hi)) in row.iter().enumerate() {
            let median = fit.summaries.normalized[matched[g]][i].median;
            inside += (lo <= median && median <= hi) as usize;
        }
    }
    let above = 100.0 * fraction_above(&fit.coalloc, 0.9);
    (
        rec.agree() == Some(4) && inside >= 14 && (above - 5.4).abs() <= 2.0,
        format!("criteria pick {rec:?}; {inside}/16 medians inside reference intervals; {above:.2}% pairs above 0.9 (need 5.4 +/- 2)"),
    )
}
