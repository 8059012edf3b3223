//! Result files.
//!
//! Sweeps produce a CSV with a fixed column set (schema `sweep_v1`) plus a
//! JSON sidecar with timings and warnings. The CSV holds only quantities
//! that are a function of the configuration and seed, so equal inputs give
//! byte-identical files. Reals are printed with 12 significant digits.
//! Files are written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::sweep::{FeasibilityRecord, SweepRecord};

pub const SWEEP_SCHEMA: &str = "sweep_v1";
pub const FEASIBILITY_SCHEMA: &str = "feasibility_v1";
pub const SIDECAR_SCHEMA: &str = "sweep_meta_v1";

pub const SWEEP_COLUMNS: &[&str] = &[
    "index",
    "algorithm",
    "k",
    "r",
    "n_b",
    "n_e",
    "budget",
    "delta",
    "seed",
    "feasible",
    "bob_trace",
    "eve_trace",
    "delta_min",
    "iterations",
    "termination",
    "infeasible_steps",
    "avg_mse",
    "mse_std_error",
    "crlb_trace",
    "active_count",
    "error",
];

pub const FEASIBILITY_COLUMNS: &[&str] = &[
    "k",
    "r",
    "budget",
    "delta_min",
    "sdr_bound",
    "eigen_lower",
    "eigen_upper",
    "draws",
];

/// `x` with 12 significant digits, in plain notation for moderate
/// exponents and scientific notation otherwise. Trailing zeros are dropped.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map(format_real).unwrap_or_default()
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace(['\n', '\r'], " "))
    } else {
        s.to_string()
    }
}

fn termination_name(t: ris_core::altopt::Termination) -> &'static str {
    use ris_core::altopt::Termination::*;
    match t {
        Converged => "converged",
        MaxIter => "max_iter",
        SingleStep => "single_step",
        Infeasible => "infeasible",
    }
}

pub fn sweep_csv(rows: &[SweepRecord]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let p = &row.point;
        let mse = row.mse.as_ref();
        let fields = [
            p.index.to_string(),
            row.algorithm.name().to_string(),
            p.k.to_string(),
            p.r.to_string(),
            row.n_b.to_string(),
            row.n_e.to_string(),
            format_real(p.budget),
            format_real(p.delta),
            row.seed.to_string(),
            row.feasible.to_string(),
            opt_real(row.bob_trace),
            opt_real(row.eve_trace),
            opt_real(row.delta_min),
            row.iterations.to_string(),
            row.termination.map(termination_name).unwrap_or_default().to_string(),
            row.infeasible_steps.to_string(),
            opt_real(mse.map(|m| m.avg_mse)),
            opt_real(mse.map(|m| m.std_error)),
            opt_real(mse.map(|m| m.crlb_trace)),
            mse.map(|m| m.active_count.to_string()).unwrap_or_default(),
            row.error.as_deref().map(quote).unwrap_or_default(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn feasibility_csv(rows: &[FeasibilityRecord]) -> String {
    let mut out = FEASIBILITY_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        let (lo, hi) = row.eigen_bracket.unzip();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.k,
            row.r,
            format_real(row.budget),
            format_real(row.delta_min.delta_min),
            format_real(row.delta_min.sdr_bound),
            opt_real(lo),
            opt_real(hi),
            row.delta_min.draws
        );
    }
    out
}

#[derive(Serialize)]
struct SidecarRow<'a> {
    index: usize,
    algorithm: &'static str,
    wall_time_s: f64,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema: &'static str,
    csv_schema: &'static str,
    name: &'a str,
    master_seed: u64,
    rng_algorithm: &'static str,
    crate_version: &'static str,
    workers: usize,
    total_wall_time_s: f64,
    rows: Vec<SidecarRow<'a>>,
}

pub fn sidecar_json(
    cfg: &ScenarioConfig,
    csv_schema: &'static str,
    rows: &[SweepRecord],
    workers: usize,
    total_wall_time_s: f64,
) -> String {
    let doc = Sidecar {
        schema: SIDECAR_SCHEMA,
        csv_schema,
        name: &cfg.name,
        master_seed: cfg.seed,
        rng_algorithm: ris_core::rng::ALGORITHM,
        crate_version: env!("CARGO_PKG_VERSION"),
        workers,
        total_wall_time_s,
        rows: rows
            .iter()
            .map(|r| SidecarRow {
                index: r.point.index,
                algorithm: r.algorithm.name(),
                wall_time_s: r.wall_time_s,
                warnings: &r.warnings,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("sidecar serializes")
}

/// The sidecar path for a CSV: same stem, `.json` extension.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, creating parent directories as needed.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
