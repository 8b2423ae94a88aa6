//! Per-chain trace files.
//!
//! For chain `c` (one-based) a directory holds `chain_{c}.csv` with columns
//! `iteration, alpha, beta, rho_{l}_{i}..., z_1..z_n, log_post` (labels one-based) and
//! `chain_{c}_class_probs.csv` with columns `draw, observation, p_1..p_k`. Acceptance
//! counters of all chains share `acceptance.csv` with columns
//! `chain, block, accepted, proposed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{fmt_f64, parse_f64};
use crate::error::{Error, Result};
use crate::sampler::{AcceptCounter, AcceptanceStats, ChainState, Trace};
use crate::simplex::{AllocationVector, ClusterParams};

pub const ACCEPTANCE_FILE: &str = "acceptance.csv";

fn chain_file(dir: &Path, c: usize) -> PathBuf {
    dir.join(format!("chain_{c}.csv"))
}

fn probs_file(dir: &Path, c: usize) -> PathBuf {
    dir.join(format!("chain_{c}_class_probs.csv"))
}

/// Writes every trace under `dir`, creating it if needed.
pub fn write_traces(dir: impl AsRef<Path>, traces: &[Trace]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut acc = csv::Writer::from_path(dir.join(ACCEPTANCE_FILE))?;
    acc.write_record(["chain", "block", "accepted", "proposed"])?;
    for (idx, t) in traces.iter().enumerate() {
        let c = idx + 1;
        write_chain(&chain_file(dir, c), t)?;
        write_probs(&probs_file(dir, c), t)?;
        let a = &t.acceptance;
        let mut blocks = vec![("alpha".to_string(), a.alpha), ("allocation".to_string(), a.allocation)];
        for l in 0..t.k {
            for i in 0..t.r {
                blocks.push((format!("rho_{}_{}", l + 1, i + 1), a.rho[l * t.r + i]));
            }
        }
        for (name, counter) in blocks {
            acc.write_record([
                c.to_string(),
                name,
                counter.accepted.to_string(),
                counter.proposed.to_string(),
            ])?;
        }
    }
    acc.flush()?;
    Ok(())
}

fn write_chain(path: &Path, t: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string(), "alpha".into(), "beta".into()];
    for l in 1..=t.k {
        for i in 1..=t.r {
            header.push(format!("rho_{l}_{i}"));
        }
    }
    header.extend((1..=t.n).map(|j| format!("z_{j}")));
    header.push("log_post".into());
    w.write_record(&header)?;
    for ((it, d), lp) in t.iterations.iter().zip(&t.draws).zip(&t.log_post) {
        let mut rec = vec![it.to_string(), fmt_f64(d.alpha), fmt_f64(d.beta)];
        rec.extend(d.rho.as_slice().iter().map(|&v| fmt_f64(v)));
        rec.extend(d.z.labels().iter().map(|l| (l + 1).to_string()));
        rec.push(fmt_f64(*lp));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_probs(path: &Path, t: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["draw".to_string(), "observation".into()];
    header.extend((1..=t.k).map(|l| format!("p_{l}")));
    w.write_record(&header)?;
    for (d, m) in t.class_probs.iter().enumerate() {
        for j in 0..t.n {
            let mut rec = vec![(d + 1).to_string(), (j + 1).to_string()];
            rec.extend(m[j * t.k..(j + 1) * t.k].iter().map(|&v| fmt_f64(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads every `chain_{c}.csv` under `dir` in chain order, with class probabilities and
/// acceptance counters when present.
pub fn read_traces(dir: impl AsRef<Path>) -> Result<Vec<Trace>> {
    let dir = dir.as_ref();
    let mut chains = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(c) = name
            .strip_prefix("chain_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            chains.insert(c, ());
        }
    }
    if chains.is_empty() {
        return Err(Error::format(dir, "no chain_<c>.csv files"));
    }
    let mut acceptance = read_acceptance(dir)?;
    let mut out = Vec::with_capacity(chains.len());
    for &c in chains.keys() {
        let mut t = read_chain(&chain_file(dir, c))?;
        let probs = probs_file(dir, c);
        if probs.exists() {
            t.class_probs = read_probs(&probs, &t)?;
        }
        if let Some(blocks) = acceptance.remove(&c) {
            t.acceptance = stats_from_blocks(blocks, t.k, t.r);
        }
        t.validate()?;
        out.push(t);
    }
    Ok(out)
}

fn read_chain(path: &Path) -> Result<Trace> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut k = 0;
    let mut r = 0;
    let mut n = 0;
    for h in headers.iter() {
        if let Some(rest) = h.strip_prefix("rho_") {
            let mut parts = rest.split('_').map(str::parse::<usize>);
            if let (Some(Ok(l)), Some(Ok(i))) = (parts.next(), parts.next()) {
                k = k.max(l);
                r = r.max(i);
            }
        } else if h.starts_with("z_") {
            n += 1;
        }
    }
    let expected = 3 + k * r + n + 1;
    if k == 0 || r == 0 || headers.len() != expected {
        return Err(Error::format(path, "unrecognized trace header"));
    }
    let bad = |row: usize, what: &str| Error::format(path, format!("data row {row}: bad {what}"));
    let mut t = Trace {
        n,
        k,
        r,
        iterations: Vec::new(),
        draws: Vec::new(),
        class_probs: Vec::new(),
        log_post: Vec::new(),
        acceptance: AcceptanceStats::new(k, r),
    };
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = row + 1;
        if rec.len() != expected {
            return Err(bad(row, "field count"));
        }
        let float = |idx: usize| parse_f64(&rec[idx]).ok_or_else(|| bad(row, &headers[idx]));
        t.iterations.push(rec[0].parse().map_err(|_| bad(row, "iteration"))?);
        let rho = (3..3 + k * r).map(float).collect::<Result<Vec<f64>>>()?;
        let z = (3 + k * r..3 + k * r + n)
            .map(|idx| match rec[idx].parse::<usize>() {
                Ok(l) if l >= 1 => Ok(l - 1),
                _ => Err(bad(row, &headers[idx])),
            })
            .collect::<Result<Vec<usize>>>()?;
        t.draws.push(ChainState {
            z: AllocationVector(z),
            rho: ClusterParams::from_flat(k, r, rho)?,
            alpha: float(1)?,
            beta: float(2)?,
        });
        t.log_post.push(float(expected - 1)?);
    }
    Ok(t)
}

fn read_probs(path: &Path, t: &Trace) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = vec![vec![f64::NAN; t.n * t.k]; t.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = || Error::format(path, format!("data row {}", row + 1));
        if rec.len() != 2 + t.k {
            return Err(bad());
        }
        let d: usize = rec[0].parse().map_err(|_| bad())?;
        let j: usize = rec[1].parse().map_err(|_| bad())?;
        if d == 0 || d > t.len() || j == 0 || j > t.n {
            return Err(bad());
        }
        for l in 0..t.k {
            out[d - 1][(j - 1) * t.k + l] = parse_f64(&rec[2 + l]).ok_or_else(bad)?;
        }
    }
    if out.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::format(path, "incomplete class probabilities"));
    }
    Ok(out)
}

type Blocks = BTreeMap<String, AcceptCounter>;

fn read_acceptance(dir: &Path) -> Result<BTreeMap<usize, Blocks>> {
    let path = dir.join(ACCEPTANCE_FILE);
    let mut out: BTreeMap<usize, Blocks> = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut reader = csv::Reader::from_path(&path)?;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let bad = || Error::format(&path, format!("data row {}", row + 1));
        if rec.len() != 4 {
            return Err(bad());
        }
        let chain: usize = rec[0].parse().map_err(|_| bad())?;
        let counter = AcceptCounter {
            accepted: rec[2].parse().map_err(|_| bad())?,
            proposed: rec[3].parse().map_err(|_| bad())?,
        };
        out.entry(chain).or_default().insert(rec[1].to_string(), counter);
    }
    Ok(out)
}

fn stats_from_blocks(mut blocks: Blocks, k: usize, r: usize) -> AcceptanceStats {
    let mut s = AcceptanceStats::new(k, r);
    s.alpha = blocks.remove("alpha").unwrap_or_default();
    s.allocation = blocks.remove("allocation").unwrap_or_default();
    for l in 0..k {
        for i in 0..r {
            s.rho[l * r + i] = blocks
                .remove(&format!("rho_{}_{}", l + 1, i + 1))
                .unwrap_or_default();
        }
    }
    s
}
