//! Domain types for compositional data and model parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum deviation of a raw row sum from 1 before it is rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// How zero (boundary) proportions are handled on ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "epsilon", rename_all = "lowercase")]
pub enum ZeroPolicy {
    /// Any entry `<= 0` is an error.
    Reject,
    /// Zeros are replaced by the given value and the row renormalized.
    Epsilon(f64),
}

impl Default for ZeroPolicy {
    fn default() -> Self {
        ZeroPolicy::Reject
    }
}

impl ZeroPolicy {
    pub const DEFAULT_EPSILON: f64 = 1e-6;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub zero_policy: ZeroPolicy,
    /// Rescale rows to unit sum instead of rejecting rows that are off by more than
    /// [`ROW_SUM_TOLERANCE`].
    pub renormalize: bool,
}

/// `n` observations on the open `r`-simplex, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionDataset {
    values: Vec<f64>,
    log_values: Vec<f64>,
    n: usize,
    r: usize,
    ids: Option<Vec<String>>,
    part_names: Option<Vec<String>>,
}

impl CompositionDataset {
    /// Validates raw rows with the default options (reject zeros, no renormalization).
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        validate_dataset(rows, ValidationOptions::default())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.r..(j + 1) * self.r]
    }

    /// Element-wise natural log of row `j`.
    pub fn log_row(&self, j: usize) -> &[f64] {
        &self.log_values[j * self.r..(j + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.r)
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn part_names(&self) -> Option<&[String]> {
        self.part_names.as_deref()
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::LengthMismatch(ids.len(), self.n));
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn with_part_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.r {
            return Err(Error::LengthMismatch(names.len(), self.r));
        }
        self.part_names = Some(names);
        Ok(self)
    }

    /// A dataset with no observations, used to run the sampler against the prior alone.
    #[cfg(test)]
    pub(crate) fn empty(r: usize) -> Self {
        CompositionDataset {
            values: Vec::new(),
            log_values: Vec::new(),
            n: 0,
            r,
            ids: None,
            part_names: None,
        }
    }
}

/// Rows whose sum is this many machine epsilons from one count as normalized.
pub const NORMALIZED_ULPS: f64 = 16.0;

/// Checks raw proportions against the simplex constraints and builds a dataset.
///
/// Every accepted row is rescaled by its own sum, so stored rows sum to one up to
/// rounding. Rows already within [`NORMALIZED_ULPS`] of unit sum are kept bit-exact, which
/// makes validation idempotent.
pub fn validate_dataset(rows: &[Vec<f64>], opts: ValidationOptions) -> Result<CompositionDataset> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Shape("dataset has no rows".into()));
    }
    let r = rows[0].len();
    if r < 2 {
        return Err(Error::Shape(format!("need at least 2 parts, got {r}")));
    }
    let mut values = Vec::with_capacity(n * r);
    for (row_idx, row) in rows.iter().enumerate() {
        if row.len() != r {
            return Err(Error::Shape(format!(
                "row {row_idx} has {} entries, expected {r}",
                row.len()
            )));
        }
        for (column, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: row_idx, column });
            }
            let bad = match opts.zero_policy {
                ZeroPolicy::Reject => v <= 0.0,
                ZeroPolicy::Epsilon(_) => v < 0.0,
            };
            if bad {
                return Err(Error::NonPositiveEntry { row: row_idx, column, value: v });
            }
        }
        let raw_sum: f64 = row.iter().sum();
        if !opts.renormalize && (raw_sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::RowSumViolation { row: row_idx, sum: raw_sum });
        }
        let start = values.len();
        match opts.zero_policy {
            ZeroPolicy::Epsilon(eps) => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(Error::config(format!("epsilon must lie in (0, 1), got {eps}")));
                }
                values.extend(row.iter().map(|&v| if v == 0.0 { eps } else { v }));
            }
            ZeroPolicy::Reject => values.extend_from_slice(row),
        }
        let total: f64 = values[start..].iter().sum();
        if total <= 0.0 {
            return Err(Error::RowSumViolation { row: row_idx, sum: total });
        }
        if (total - 1.0).abs() > NORMALIZED_ULPS * f64::EPSILON {
            values[start..].iter_mut().for_each(|v| *v /= total);
        }
    }
    let log_values = values.iter().map(|v| v.ln()).collect();
    Ok(CompositionDataset {
        values,
        log_values,
        n,
        r,
        ids: None,
        part_names: None,
    })
}

/// `k x r` matrix of Dirichlet concentration parameters, one row per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    k: usize,
    r: usize,
    values: Vec<f64>,
}

impl ClusterParams {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::domain("parameter matrix has no rows"));
        }
        let r = rows[0].len();
        let mut values = Vec::with_capacity(k * r);
        for row in rows {
            if row.len() != r {
                return Err(Error::LengthMismatch(row.len(), r));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(k, r, values)
    }

    pub fn from_flat(k: usize, r: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || r == 0 {
            return Err(Error::domain("parameter matrix must be non-empty"));
        }
        if values.len() != k * r {
            return Err(Error::LengthMismatch(values.len(), k * r));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!("concentration parameter {v} is not positive")));
        }
        Ok(ClusterParams { k, r, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.values[l * self.r..(l + 1) * self.r]
    }

    pub fn get(&self, l: usize, i: usize) -> f64 {
        self.values[l * self.r + i]
    }

    pub(crate) fn set(&mut self, l: usize, i: usize, v: f64) {
        self.values[l * self.r + i] = v;
    }

    /// Row-major view of all entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.r)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Row `l` divided by its sum: the mean composition of cluster `l`.
    pub fn normalized_row(&self, l: usize) -> Vec<f64> {
        let row = self.row(l);
        let total: f64 = row.iter().sum();
        row.iter().map(|v| v / total).collect()
    }

    /// Reorders rows so that old row `l` becomes row `perm[l]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (l, &target) in perm.iter().enumerate() {
            values[target * self.r..(target + 1) * self.r].copy_from_slice(self.row(l));
        }
        ClusterParams { k: self.k, r: self.r, values }
    }
}

/// Fixed hyperparameters of the hierarchical prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Symmetric Dirichlet weight on the mixture proportions.
    pub delta: f64,
    /// Rate of the exponential prior on `alpha`.
    pub gamma: f64,
    /// Shape of the Gamma prior on `beta`.
    pub phi: f64,
    /// Rate of the Gamma prior on `beta`.
    pub lambda: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            delta: 0.5,
            gamma: 0.2,
            phi: 5.0,
            lambda: 6.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("phi", self.phi),
            ("lambda", self.lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Cluster labels, one per observation.
///
/// Labels are stored zero-based (`0..k`); files and user-facing output use `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationVector(pub Vec<usize>);

impl AllocationVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    /// Number of observations in each of `k` clusters.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &l in &self.0 {
            counts[l] += 1;
        }
        counts
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self.0.iter().find(|&&l| l >= k) {
            Some(l) => Err(Error::domain(format!("label {} outside 1..={k}", l + 1))),
            None => Ok(()),
        }
    }

    /// Relabels so that old label `l` becomes `perm[l]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        AllocationVector(self.0.iter().map(|&l| perm[l]).collect())
    }
}
