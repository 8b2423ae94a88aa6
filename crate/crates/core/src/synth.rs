//! Synthetic mixtures of Dirichlet distributions and partition-quality metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::dirichlet::sample_dirichlet;
use crate::error::{Error, Result};
use crate::simplex::{AllocationVector, ClusterParams, CompositionDataset};

/// Generating parameters for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rho_true: ClusterParams,
    /// Observations drawn from each cluster, in block order.
    pub sizes: Vec<usize>,
    pub seed: u64,
    pub label: String,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() != self.rho_true.k() {
            return Err(Error::LengthMismatch(self.sizes.len(), self.rho_true.k()));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::config("every cluster needs at least one observation"));
        }
        if self.rho_true.r() < 2 {
            return Err(Error::config("need at least two parts"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Splits `n` into `k` near-equal blocks, giving the remainder to the last blocks
/// (50 into 3 is 16, 17, 17).
pub fn even_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    (0..k).map(|l| base + usize::from(l >= k - extra)).collect()
}

/// Draws block `l` of the scenario from `Dir(rho_l)`; returns data and true labels.
pub fn generate(scenario: &Scenario) -> Result<(CompositionDataset, AllocationVector)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut rows = Vec::with_capacity(scenario.n());
    let mut labels = Vec::with_capacity(scenario.n());
    for (l, &size) in scenario.sizes.iter().enumerate() {
        for _ in 0..size {
            rows.push(sample_dirichlet(scenario.rho_true.row(l), &mut rng)?);
            labels.push(l);
        }
    }
    Ok((CompositionDataset::new(&rows)?, AllocationVector(labels)))
}

/// A named parameter configuration with its printed pairwise Hellinger distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub name: &'static str,
    pub separation: &'static str,
    pub rho: Vec<Vec<f64>>,
    /// `(a, b, distance)` with zero-based cluster indices.
    pub hellinger: Vec<(usize, usize, f64)>,
}

impl LibraryEntry {
    pub fn k(&self) -> usize {
        self.rho.len()
    }

    /// Scenario with `n` observations split by [`even_sizes`].
    pub fn scenario(&self, n: usize, seed: u64) -> Scenario {
        self.scenario_with_sizes(even_sizes(n, self.k()), seed)
    }

    pub fn scenario_with_sizes(&self, sizes: Vec<usize>, seed: u64) -> Scenario {
        Scenario {
            rho_true: ClusterParams::new(&self.rho).expect("library parameters are valid"),
            sizes,
            seed,
            label: format!("{} separation, {} clusters", self.separation, self.k()),
        }
    }
}

/// Sample sizes used with each library configuration.
pub const LIBRARY_SIZES: [usize; 2] = [30, 50];

/// The six simulation configurations: high, moderate and low separation with two and
/// three clusters.
pub fn scenario_library() -> Vec<LibraryEntry> {
    vec![
        LibraryEntry {
            name: "high2",
            separation: "high",
            rho: vec![vec![15.0, 15.0, 1.0, 1.0], vec![2.0, 2.0, 15.0, 20.0]],
            hellinger: vec![(0, 1, 1.0)],
        },
        LibraryEntry {
            name: "moderate2",
            separation: "moderate",
            rho: vec![vec![10.0, 9.0, 3.0, 2.0], vec![10.0, 8.0, 5.0, 7.0]],
            hellinger: vec![(0, 1, 0.75)],
        },
        LibraryEntry {
            name: "low2",
            separation: "low",
            rho: vec![vec![9.0, 8.0, 4.0, 5.0], vec![13.0, 12.0, 6.0, 12.0]],
            hellinger: vec![(0, 1, 0.45)],
        },
        LibraryEntry {
            name: "high3",
            separation: "high",
            rho: vec![
                vec![10.0, 10.0, 10.0, 10.0],
                vec![1.0, 2.0, 15.0, 18.0],
                vec![10.0, 12.0, 1.0, 0.5],
            ],
            hellinger: vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)],
        },
        LibraryEntry {
            name: "moderate3",
            separation: "moderate",
            rho: vec![
                vec![1.0, 5.0, 1.0, 15.0],
                vec![13.0, 7.0, 0.5, 4.0],
                vec![9.0, 8.0, 1.0, 1.0],
            ],
            hellinger: vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 0.72)],
        },
        LibraryEntry {
            name: "low3",
            separation: "low",
            rho: vec![
                vec![6.0, 9.0, 1.0, 1.0],
                vec![8.0, 8.0, 3.0, 3.0],
                vec![7.0, 7.0, 4.0, 1.0],
            ],
            hellinger: vec![(0, 1, 0.68), (0, 2, 0.56), (1, 2, 0.69)],
        },
    ]
}

pub fn library_entry(name: &str) -> Result<LibraryEntry> {
    scenario_library()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Cross-tabulation of true and estimated labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionQuality {
    /// `counts[true][estimated]`.
    pub counts: Vec<Vec<usize>>,
    /// Fraction matched under the best one-to-one mapping of estimated labels.
    pub accuracy: f64,
    pub adjusted_rand_index: f64,
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

pub fn confusion_matrix(truth: &AllocationVector, estimate: &AllocationVector) -> Result<PartitionQuality> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch(truth.len(), estimate.len()));
    }
    let n = truth.len();
    let kt = truth.labels().iter().max().map_or(0, |m| m + 1);
    let ke = estimate.labels().iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; ke]; kt];
    for (&a, &b) in truth.labels().iter().zip(estimate.labels()) {
        counts[a][b] += 1;
    }

    let size = kt.max(ke);
    let mut cost = vec![0.0; size * size];
    for (a, row) in counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            cost[a * size + b] = -(c as f64);
        }
    }
    let matched: usize = min_cost_assignment(&cost, size)
        .iter()
        .enumerate()
        .filter(|&(a, &b)| a < kt && b < ke)
        .map(|(a, &b)| counts[a][b])
        .sum();
    let accuracy = if n == 0 { 1.0 } else { matched as f64 / n as f64 };

    let sum_cells: f64 = counts.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = counts.iter().map(|r| choose2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..ke)
        .map(|b| choose2(counts.iter().map(|r| r[b]).sum()))
        .sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sum_rows * sum_cols / total } else { 0.0 };
    let max_index = 0.5 * (sum_rows + sum_cols);
    let ari = if (max_index - expected).abs() < f64::EPSILON {
        1.0
    } else {
        (sum_cells - expected) / (max_index - expected)
    };
    Ok(PartitionQuality {
        counts,
        accuracy,
        adjusted_rand_index: ari,
    })
}
