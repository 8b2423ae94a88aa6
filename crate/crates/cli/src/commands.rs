use std::path::{Path, PathBuf};

use dirmix::io::{
    build_summary, read_dataset_csv_with, read_labels_csv, read_manifest, read_rho_csv,
    read_traces, write_dataset_csv, write_labels_csv, write_manifest, write_selection, write_selection_table,
    write_summary, BgrSection, RunManifest, SummaryDocument,
};
use dirmix::postprocess::{analyze, FitResult, RHO_ACCEPTANCE_RANGE};
use dirmix::sampler::{derive_seed, run_chains};
use dirmix::select::{criteria, recommend, scan_k};
use dirmix::synth::{confusion_matrix, even_sizes, generate, library_entry, Scenario};
use dirmix::{ClusterParams, CompositionDataset, Error, Result};

use crate::args::{FitArgs, SelectArgs, SimulateArgs, TraceArgs};

const MANIFEST: &str = "manifest.json";
const SUMMARY: &str = "summary.json";
const INPUT_COPY: &str = "input.csv";
const TRUTH_COPY: &str = "truth.csv";
const TRACES: &str = "traces";
const BGR_WARNING: f64 = 1.1;

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn load(manifest: &RunManifest) -> Result<CompositionDataset> {
    read_dataset_csv_with(&manifest.input, manifest.validation, &manifest.columns)
}

fn summarize_fit(
    fit: &FitResult,
    data: Option<&CompositionDataset>,
    manifest: Option<&RunManifest>,
    truth: Option<&Path>,
) -> Result<SummaryDocument> {
    let report = match (data, manifest) {
        (Some(d), Some(m)) => Some(criteria(&fit.relabeled_traces, d, &m.config.hyper)?),
        _ => None,
    };
    let quality = match truth {
        Some(p) => Some(confusion_matrix(&read_labels_csv(p)?, &fit.map.state.z)?),
        None => None,
    };
    Ok(build_summary(fit, report, quality))
}

pub fn fit(args: FitArgs) -> Result<()> {
    let mut manifest = match &args.manifest {
        Some(path) => {
            let mut m = read_manifest(path)?;
            m.restart();
            m
        }
        None => {
            let k = args
                .k
                .ok_or_else(|| Error::Config("--k is required unless --manifest is given".into()))?;
            let input = args
                .input
                .input
                .as_ref()
                .ok_or_else(|| Error::Config("--input is required unless --manifest is given".into()))?;
            let (config, from_entropy) = args.sampler.config(k)?;
            let mut m = RunManifest::new(
                path_string(input),
                args.input.validation(),
                config,
                args.sampler.chains,
                from_entropy,
            );
            m.columns = args.input.columns();
            m.truth = args.truth.as_deref().map(path_string);
            m
        }
    };
    manifest.config.validate()?;
    let data = load(&manifest)?;
    let truth = manifest.truth.as_ref().map(PathBuf::from);
    if let Some(t) = &truth {
        let labels = read_labels_csv(t)?;
        if labels.len() != data.n() {
            return Err(Error::LengthMismatch(labels.len(), data.n()));
        }
    }

    let traces = run_chains(&data, &manifest.config, manifest.chains)?;
    let fit = analyze(&traces)?;
    let doc = summarize_fit(&fit, Some(&data), Some(&manifest), truth.as_deref())?;

    let out = &args.out;
    std::fs::create_dir_all(out)?;
    dirmix::io::write_traces(out.join(TRACES), &traces)?;
    std::fs::copy(&manifest.input, out.join(INPUT_COPY))?;
    if let Some(t) = &truth {
        std::fs::copy(t, out.join(TRUTH_COPY))?;
    }
    write_labels_csv(out.join("map_labels.csv"), &data, &fit.map.state.z)?;
    write_summary(out.join(SUMMARY), &doc)?;
    manifest.finish();
    write_manifest(out.join(MANIFEST), &manifest)?;
    warn_diagnostics(&doc);
    for name in [MANIFEST, SUMMARY, "map_labels.csv", TRACES] {
        println!("{}", path_string(&out.join(name)));
    }
    Ok(())
}

pub fn select(args: SelectArgs) -> Result<()> {
    if args.k_min == 0 || args.k_min > args.k_max {
        return Err(Error::Config(format!(
            "need 1 <= k-min <= k-max, got {}..{}",
            args.k_min, args.k_max
        )));
    }
    let input = args
        .input
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("--input is required".into()))?;
    let (config, from_entropy) = args.sampler.config(args.k_min)?;
    let mut manifest = RunManifest::new(
        path_string(input),
        args.input.validation(),
        config.clone(),
        args.sampler.chains,
        from_entropy,
    );
    manifest.columns = args.input.columns();
    manifest.k_seeds = (args.k_min..=args.k_max)
        .map(|k| (k, derive_seed(config.seed, k as u64)))
        .collect();
    let data = load(&manifest)?;
    let reports = scan_k(&data, &config, args.sampler.chains, args.k_min..=args.k_max)?;
    let rec = recommend(&reports).expect("k range is non-empty");
    match &args.out {
        Some(out) => {
            std::fs::create_dir_all(out)?;
            let table = out.join("selection.csv");
            write_selection_table(&table, &reports)?;
            manifest.finish();
            write_manifest(out.join(MANIFEST), &manifest)?;
            println!("{}", path_string(&table));
            println!("{}", path_string(&out.join(MANIFEST)));
        }
        None => write_selection(std::io::stdout().lock(), &reports)?,
    }
    eprintln!(
        "recommended k: ICL {}, BIC {}, DIC5 {}",
        rec.icl, rec.bic, rec.dic5
    );
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let (rho, label) = match (&args.scenario, &args.rho_file) {
        (Some(name), _) => (library_entry(name)?.rho, name.clone()),
        (None, Some(path)) => (read_rho_csv(path)?, path_string(path)),
        (None, None) => return Err(Error::Config("--scenario or --rho-file is required".into())),
    };
    let sizes = match &args.sizes {
        Some(s) => s.clone(),
        None if args.scenario.is_some() => even_sizes(50, rho.len()),
        None => return Err(Error::Config("--sizes is required with --rho-file".into())),
    };
    let scenario = Scenario {
        rho_true: ClusterParams::new(&rho)?,
        sizes,
        seed: args.seed,
        label,
    };
    let (data, truth) = generate(&scenario)?;
    std::fs::create_dir_all(&args.out)?;
    let data_path = args.out.join("data.csv");
    let truth_path = args.out.join(TRUTH_COPY);
    write_dataset_csv(&data_path, &data)?;
    write_labels_csv(&truth_path, &data, &truth)?;
    println!("{}", path_string(&data_path));
    println!("{}", path_string(&truth_path));
    Ok(())
}

/// Locates the traces and, when present, the fit directory holding the manifest.
fn resolve(dir: &Path) -> (PathBuf, Option<PathBuf>) {
    if dir.join(TRACES).is_dir() {
        return (dir.join(TRACES), Some(dir.to_path_buf()));
    }
    let parent = dir.parent().filter(|p| p.join(MANIFEST).is_file());
    (dir.to_path_buf(), parent.map(Path::to_path_buf))
}

fn emit(text: String, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            println!("{}", path_string(p));
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn summarize(args: TraceArgs) -> Result<()> {
    let (trace_dir, fit_dir) = resolve(&args.trace_dir);
    let traces = read_traces(&trace_dir)?;
    let fit = analyze(&traces)?;
    let doc = match &fit_dir {
        Some(dir) => {
            let mut manifest = read_manifest(dir.join(MANIFEST))?;
            manifest.input = path_string(&dir.join(INPUT_COPY));
            let data = load(&manifest)?;
            let truth = dir.join(TRUTH_COPY);
            let truth = manifest.truth.is_some().then_some(truth.as_path());
            summarize_fit(&fit, Some(&data), Some(&manifest), truth)?
        }
        None => summarize_fit(&fit, None, None, None)?,
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    emit(text, args.out.as_deref())
}

pub fn diagnose(args: TraceArgs) -> Result<()> {
    let (trace_dir, _) = resolve(&args.trace_dir);
    let traces = read_traces(&trace_dir)?;
    let fit = analyze(&traces)?;
    let doc = build_summary(&fit, None, None);
    warn_diagnostics(&doc);
    let mut text = serde_json::to_string_pretty(&doc.diagnostics)?;
    text.push('\n');
    emit(text, args.out.as_deref())
}

fn warn_diagnostics(doc: &SummaryDocument) {
    let (lo, hi) = RHO_ACCEPTANCE_RANGE;
    for w in &doc.diagnostics.acceptance_warnings {
        eprintln!(
            "warning: chain {} rho[{}][{}] acceptance rate {:.3} outside {lo:.2}-{hi:.2}",
            w.chain, w.cluster, w.part, w.rate
        );
    }
    match &doc.diagnostics.bgr {
        BgrSection::Computed(b) => {
            let worst = b.max_rho();
            if worst.is_nan() || worst >= BGR_WARNING {
                eprintln!("warning: largest rho scale reduction factor {worst:.3} is not below {BGR_WARNING}");
            }
        }
        BgrSection::Unavailable { status } => eprintln!("note: scale reduction factors unavailable: {status}"),
    }
    if !doc.diagnostics.relabel_converged {
        eprintln!("warning: relabeling did not reach a fixed point");
    }
}
