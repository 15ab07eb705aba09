//! CSV and JSON artifacts of a scenario run.
//!
//! Layout under the output root:
//!
//! ```text
//! <name>/manifest.json
//! <name>/summary.json
//! <name>/certificate.json
//! <name>/weights.csv
//! <name>/<run>.csv
//! <name>/<run>_profiles.csv
//! ```
//!
//! Only `manifest.json` carries a timestamp; everything else is a function
//! of the scenario document.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;
use stvenant_core::certifier::Certificate;

use crate::error::LabError;
use crate::runner::{Outcome, RunArtifact};

pub const OUT_ENV: &str = "STVENANT_OUT";

/// Output root: `$STVENANT_OUT`, else `./stvenant-out`.
pub fn default_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("stvenant-out"), PathBuf::from)
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    h2: f64,
    l2: f64,
    z_abs: f64,
    lyap: Option<f64>,
    va: Option<f64>,
    vb: Option<f64>,
    vc: Option<f64>,
    z: f64,
    h_l: f64,
    q0: f64,
    flux_in: f64,
    flux_out: f64,
    mass: f64,
    mass_rate: f64,
    mass_balance_error: f64,
    controller_residual: f64,
}

pub fn write_trajectory(path: &Path, run: &RunArtifact) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, s) in run.record.samples.iter().enumerate() {
        let ly = run.series.lyap.get(i);
        w.serialize(TrajectoryRow {
            t: s.t,
            h2: run.series.h2[i],
            l2: run.series.l2[i],
            z_abs: run.series.z_abs[i],
            lyap: ly.map(|l| l.total()),
            va: ly.map(|l| l.va),
            vb: ly.and_then(|l| l.vb),
            vc: ly.and_then(|l| l.vc),
            z: s.z,
            h_l: s.h_l,
            q0: s.q0,
            flux_in: s.flux_in,
            flux_out: s.flux_out,
            mass: s.mass,
            mass_rate: s.mass_rate,
            mass_balance_error: s.mass_balance_error(),
            controller_residual: s.controller_residual,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per sample and node.
pub fn write_profiles(path: &Path, run: &RunArtifact) -> Result<(), LabError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "h", "v"])?;
    for (s, p) in run.record.samples.iter().zip(&run.record.profiles) {
        for i in 0..p.grid.n {
            w.serialize((s.t, p.grid.x(i), p.h[i], p.v[i]))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-node certificate fields. Needs `chi`, `f1`, `f2` on every node.
pub fn write_weights(path: &Path, cert: &Certificate) -> Result<(), LabError> {
    let f = &cert.fields;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "h1", "v1", "lambda1", "lambda2", "chi", "f1", "f2"])?;
    for i in 0..f.grid.n {
        w.serialize((
            f.grid.x(i),
            f.h1[i],
            f.v1[i],
            f.lambda1[i],
            f.lambda2[i],
            cert.chi[i],
            cert.f1[i],
            cert.f2[i],
        ))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), LabError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Scenario document, derived channel and run parameters.
pub fn manifest(o: &Outcome) -> serde_json::Value {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    json!({
        "timestamp_unix": timestamp,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "scenario": o.spec,
        "channel": o.cfg,
        "start_time": o.summary.t0,
        "transit_time": o.summary.transit_time,
        "horizon": o.summary.horizon,
        "sample_every": o.summary.sample_every,
        "scheme": o.scheme,
        "dt": o.summary.dt,
        "steps": o.summary.steps,
        "certificate": o.certificate.as_ref().map(|c| json!({
            "epsilon": c.epsilon,
            "mu": c.mu,
            "q": c.q,
        })),
        "runs": o.runs.iter().map(|r| json!({
            "label": r.label,
            "dt": r.record.dt,
            "steps": r.record.steps,
            "samples": r.record.samples.len(),
        })).collect::<Vec<_>>(),
    })
}

/// Writes every artifact into `root/<name>/` and returns that directory.
pub fn write_outcome(root: &Path, o: &Outcome) -> Result<PathBuf, LabError> {
    let dir = root.join(&o.spec.name);
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("manifest.json"), &manifest(o))?;
    write_json(&dir.join("summary.json"), &o.summary)?;
    if let Some(c) = &o.certificate {
        write_json(&dir.join("certificate.json"), c)?;
        let n = c.fields.grid.n;
        if c.chi.len() == n && c.f1.len() == n && c.f2.len() == n {
            write_weights(&dir.join("weights.csv"), c)?;
        }
    }
    for r in &o.runs {
        write_trajectory(&dir.join(format!("{}.csv", r.label)), r)?;
        if !r.record.profiles.is_empty() {
            write_profiles(&dir.join(format!("{}_profiles.csv", r.label)), r)?;
        }
    }
    Ok(dir)
}
