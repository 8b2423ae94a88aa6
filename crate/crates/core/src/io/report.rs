//! Summary, manifest and model-selection documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fmt_f64, ColumnSelection};
use crate::error::Result;
use crate::postprocess::{
    acceptance_warnings, AcceptanceWarning, BgrReport, EntropyQuantiles, FitResult, Interval,
};
use crate::sampler::{AllocationMode, SamplerConfig};
use crate::select::{recommend, CriterionReport, BIC_CONVENTION, DIC5_CONVENTION};
use crate::simplex::ValidationOptions;
use crate::synth::PartitionQuality;

/// Scale reduction factors, or a marker when fewer than two chains ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BgrSection {
    Computed(BgrReport),
    Unavailable { status: String },
}

/// Acceptance rates of one chain; `None` where nothing was proposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    /// One-based.
    pub chain: usize,
    pub alpha: Option<f64>,
    /// Row-major `k x r`.
    pub rho: Vec<Option<f64>>,
    pub allocation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSection {
    pub bgr: BgrSection,
    pub relabel_converged: bool,
    pub acceptance: Vec<AcceptanceSummary>,
    /// One-based chain, cluster and part.
    pub acceptance_warnings: Vec<AcceptanceWarning>,
}

/// The maximum a posteriori draw; labels one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSection {
    pub chain: usize,
    pub draw: usize,
    pub log_post: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: Vec<Vec<f64>>,
    pub partition: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub k: usize,
    pub n: usize,
    pub r: usize,
    pub parameters: Vec<Vec<Interval>>,
    pub normalized_parameters: Vec<Vec<Interval>>,
    pub entropy: Vec<EntropyQuantiles>,
    pub coallocation: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<CriterionReport>,
    pub map: MapSection,
    pub diagnostics: DiagnosticsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_quality: Option<PartitionQuality>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Assembles the summary of a fit. Contains no timestamps, so identical fits give
/// identical documents.
pub fn build_summary(
    fit: &FitResult,
    criteria: Option<CriterionReport>,
    quality: Option<PartitionQuality>,
) -> SummaryDocument {
    let first = &fit.relabeled_traces[0];
    let (n, k, r) = (first.n, first.k, first.r);
    let bgr = match &fit.bgr {
        Some(b) => BgrSection::Computed(b.clone()),
        None => BgrSection::Unavailable {
            status: "insufficient chains".into(),
        },
    };
    let acceptance = fit
        .relabeled_traces
        .iter()
        .enumerate()
        .map(|(c, t)| AcceptanceSummary {
            chain: c + 1,
            alpha: finite(t.acceptance.alpha.rate()),
            rho: t.acceptance.rho.iter().map(|a| finite(a.rate())).collect(),
            allocation: finite(t.acceptance.allocation.rate()),
        })
        .collect();
    let warnings = acceptance_warnings(&fit.acceptance(), r)
        .into_iter()
        .map(|w| AcceptanceWarning {
            chain: w.chain + 1,
            cluster: w.cluster + 1,
            part: w.part + 1,
            rate: w.rate,
        })
        .collect();
    let s = &fit.map.state;
    SummaryDocument {
        k,
        n,
        r,
        parameters: fit.summaries.rho.clone(),
        normalized_parameters: fit.summaries.normalized.clone(),
        entropy: fit.entropy_quantiles.clone(),
        coallocation: fit.coalloc.clone(),
        criteria,
        map: MapSection {
            chain: fit.map.chain + 1,
            draw: fit.map.draw + 1,
            log_post: fit.map.log_post,
            alpha: s.alpha,
            beta: s.beta,
            rho: s.rho.to_rows(),
            partition: s.z.labels().iter().map(|l| l + 1).collect(),
        },
        diagnostics: DiagnosticsSection {
            bgr,
            relabel_converged: fit.relabel_converged,
            acceptance,
            acceptance_warnings: warnings,
        },
        partition_quality: quality,
    }
}

pub fn write_summary(path: impl AsRef<Path>, doc: &SummaryDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<SummaryDocument> {
    Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// RNG stream of one chain: a ChaCha8 generator keyed by `seed` on stream `stream`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStream {
    pub chain: usize,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub bic: String,
    pub dic5: String,
    pub labels: String,
    pub allocation_update: AllocationMode,
}

/// Everything needed to rerun a fit bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub input: String,
    pub columns: ColumnSelection,
    pub validation: ValidationOptions,
    /// One-based reference labels scored against the MAP partition.
    pub truth: Option<String>,
    pub config: SamplerConfig,
    pub chains: usize,
    pub chain_streams: Vec<ChainStream>,
    /// Model-selection runs only: scanned `k` values and the master seed of each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_seeds: Vec<(usize, u64)>,
    /// Set when the master seed was drawn from system entropy.
    pub seed_from_entropy: bool,
    pub conventions: Conventions,
    /// Seconds since the Unix epoch.
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(
        input: impl Into<String>,
        validation: ValidationOptions,
        config: SamplerConfig,
        chains: usize,
        seed_from_entropy: bool,
    ) -> Self {
        let now = unix_now();
        RunManifest {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            input: input.into(),
            columns: ColumnSelection::default(),
            validation,
            truth: None,
            chain_streams: (0..chains)
                .map(|c| ChainStream {
                    chain: c + 1,
                    seed: config.seed,
                    stream: c as u64,
                })
                .collect(),
            conventions: Conventions {
                bic: BIC_CONVENTION.into(),
                dic5: DIC5_CONVENTION.into(),
                labels: "one-based in all files".into(),
                allocation_update: config.allocation_mode,
            },
            config,
            chains,
            k_seeds: Vec::new(),
            seed_from_entropy,
            started_unix: now,
            finished_unix: now,
        }
    }

    /// Resets both timestamps for a rerun of a recorded manifest.
    pub fn restart(&mut self) {
        self.started_unix = unix_now();
        self.finished_unix = self.started_unix;
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &RunManifest) -> Result<()> {
    write_json(path, manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<RunManifest> {
    Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
}

/// Writes one row per `k` with the preferred value of each criterion marked `*`.
pub fn write_selection_table(path: impl AsRef<Path>, reports: &[CriterionReport]) -> Result<()> {
    write_selection(std::fs::File::create(path)?, reports)
}

/// [`write_selection_table`] to any writer.
pub fn write_selection<W: std::io::Write>(out: W, reports: &[CriterionReport]) -> Result<()> {
    let rec = recommend(reports);
    let mark = |best: Option<usize>, k: usize| if best == Some(k) { "*" } else { "" };
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k", "icl", "bic", "dic5", "lambda_k", "bic_params", "map_logpost", "best_icl",
        "best_bic", "best_dic5",
    ])?;
    for r in reports {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.icl),
            fmt_f64(r.bic),
            fmt_f64(r.dic5),
            r.lambda_k.to_string(),
            r.bic_params.to_string(),
            fmt_f64(r.map_logpost),
            mark(rec.map(|x| x.icl), r.k).into(),
            mark(rec.map(|x| x.bic), r.k).into(),
            mark(rec.map(|x| x.dic5), r.k).into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
