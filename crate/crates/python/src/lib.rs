//! Python bindings. Structured results (fit summaries, selection tables) are returned
//! as plain dicts and lists built from the same JSON documents the CLI writes.

use dirmix::dirichlet;
use dirmix::io::build_summary;
use dirmix::sampler::{self, AllocationMode};
use dirmix::select::{criteria, scan_k as scan};
use dirmix::simplex::{validate_dataset, ValidationOptions};
use dirmix::synth::{confusion_matrix, even_sizes, generate, library_entry, Scenario};
use dirmix::{AllocationVector, ClusterParams, CompositionDataset, SamplerConfig, ZeroPolicy};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: dirmix::Error) -> PyErr {
    match e {
        dirmix::Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Compositions on the open simplex, validated on construction.
#[pyclass(frozen, module = "dirmix")]
struct Dataset {
    inner: CompositionDataset,
}

#[pymethods]
impl Dataset {
    /// `zero_policy` is "reject" or "epsilon"; `renormalize` rescales rows off unit sum.
    #[new]
    #[pyo3(signature = (rows, zero_policy = "reject", epsilon = ZeroPolicy::DEFAULT_EPSILON, renormalize = false))]
    fn new(rows: Vec<Vec<f64>>, zero_policy: &str, epsilon: f64, renormalize: bool) -> PyResult<Self> {
        let zero_policy = match zero_policy {
            "reject" => ZeroPolicy::Reject,
            "epsilon" => ZeroPolicy::Epsilon(epsilon),
            other => return Err(PyValueError::new_err(format!("unknown zero policy `{other}`"))),
        };
        let opts = ValidationOptions { zero_policy, renormalize };
        Ok(Dataset {
            inner: validate_dataset(&rows, opts).map_err(to_py)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows().map(<[f64]>::to_vec).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(n={}, r={})", self.inner.n(), self.inner.r())
    }
}

#[pyfunction]
fn dirichlet_logpdf(p: Vec<f64>, rho: Vec<f64>) -> PyResult<f64> {
    dirichlet::dirichlet_logpdf(&p, &rho).map_err(to_py)
}

#[pyfunction]
fn dirichlet_entropy(rho: Vec<f64>) -> PyResult<f64> {
    dirichlet::dirichlet_entropy(&rho).map_err(to_py)
}

/// Monte Carlo Hellinger distance with `m` draws from each density.
#[pyfunction]
#[pyo3(signature = (rho_f, rho_g, m = 10_000, seed = 0))]
fn hellinger(rho_f: Vec<f64>, rho_g: Vec<f64>, m: usize, seed: u64) -> PyResult<f64> {
    dirichlet::hellinger_mc(&rho_f, &rho_g, m, seed).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rho, p_var = SamplerConfig::DEFAULT_P_VAR))]
fn proposal_sigma(rho: f64, p_var: f64) -> PyResult<f64> {
    sampler::proposal_sigma(rho, p_var).map_err(to_py)
}

/// Draws a labelled data set from a named scenario or explicit parameters.
///
/// Returns `(rows, labels)` with one-based labels.
#[pyfunction]
#[pyo3(signature = (scenario = None, rho = None, sizes = None, seed = 1))]
fn simulate(
    scenario: Option<&str>,
    rho: Option<Vec<Vec<f64>>>,
    sizes: Option<Vec<usize>>,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let rho = match (scenario, rho) {
        (Some(name), None) => library_entry(name).map_err(to_py)?.rho,
        (None, Some(rho)) => rho,
        _ => return Err(PyValueError::new_err("give exactly one of `scenario` and `rho`")),
    };
    let sizes = match sizes {
        Some(s) => s,
        None if scenario.is_some() => even_sizes(50, rho.len()),
        None => return Err(PyValueError::new_err("`sizes` is required with `rho`")),
    };
    let scenario = Scenario {
        rho_true: ClusterParams::new(&rho).map_err(to_py)?,
        sizes,
        seed,
        label: "python".into(),
    };
    let (data, z) = generate(&scenario).map_err(to_py)?;
    let rows = data.rows().map(<[f64]>::to_vec).collect();
    Ok((rows, z.0.into_iter().map(|l| l + 1).collect()))
}

fn config(
    k: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    allocation_mode: &str,
) -> PyResult<SamplerConfig> {
    let mode: AllocationMode = allocation_mode.parse().map_err(to_py)?;
    let cfg = SamplerConfig {
        allocation_mode: mode,
        ..SamplerConfig::new(k)
    }
    .with_schedule(iterations, burn_in, thin)
    .with_seed(seed);
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Fits a `k`-component mixture and returns the summary document as a dict.
///
/// With `truth` (one-based labels) the dict gains a `partition_quality` entry.
#[pyfunction]
#[pyo3(signature = (data, k, chains = 5, iterations = 50_000, burn_in = 10_000, thin = 5, seed = 1, allocation_mode = "gibbs", truth = None))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    data: &Dataset,
    k: usize,
    chains: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    allocation_mode: &str,
    truth: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(k, iterations, burn_in, thin, seed, allocation_mode)?;
    let truth = truth
        .map(|t| {
            t.into_iter()
                .map(|l| l.checked_sub(1).ok_or_else(|| PyValueError::new_err("labels are one-based")))
                .collect::<PyResult<Vec<_>>>()
                .map(AllocationVector)
        })
        .transpose()?;
    let data = &data.inner;
    let doc = py
        .detach(|| -> dirmix::Result<_> {
            let fit = dirmix::fit(data, &cfg, chains)?;
            let report = criteria(&fit.relabeled_traces, data, &cfg.hyper)?;
            let quality = truth
                .map(|t| confusion_matrix(&t, &fit.map.state.z))
                .transpose()?;
            Ok(build_summary(&fit, Some(report), quality))
        })
        .map_err(to_py)?;
    json_to_py(py, &doc)
}

/// Fits every `k` in `k_min..=k_max` and returns one criteria dict per `k`.
#[pyfunction]
#[pyo3(signature = (data, k_min, k_max, chains = 5, iterations = 50_000, burn_in = 10_000, thin = 5, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn scan_k<'py>(
    py: Python<'py>,
    data: &Dataset,
    k_min: usize,
    k_max: usize,
    chains: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    if k_min == 0 || k_min > k_max {
        return Err(PyValueError::new_err("need 1 <= k_min <= k_max"));
    }
    let cfg = config(k_min, iterations, burn_in, thin, seed, "gibbs")?;
    let data = &data.inner;
    let reports = py
        .detach(|| scan(data, &cfg, chains, k_min..=k_max))
        .map_err(to_py)?;
    json_to_py(py, &reports)
}

#[pymodule]
#[pyo3(name = "dirmix")]
fn dirmix_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(dirichlet_logpdf, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(proposal_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(scan_k, m)?)?;
    Ok(())
}
