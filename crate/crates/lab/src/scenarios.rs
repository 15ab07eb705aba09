//! Scenarios shipped with the binary.

use std::path::Path;

use crate::config::ScenarioSpec;
use crate::error::LabError;

/// `(name, document)` in listing order.
pub const BUNDLED: [(&str, &str); 8] = [
    (
        "homogeneous-branch1",
        include_str!("../scenarios/homogeneous-branch1.json"),
    ),
    (
        "friction-slope-branch1",
        include_str!("../scenarios/friction-slope-branch1.json"),
    ),
    ("branch2", include_str!("../scenarios/branch2.json")),
    (
        "steady-preservation",
        include_str!("../scenarios/steady-preservation.json"),
    ),
    (
        "necessity-probe",
        include_str!("../scenarios/necessity-probe.json"),
    ),
    (
        "iss-sinusoid",
        include_str!("../scenarios/iss-sinusoid.json"),
    ),
    (
        "feedforward-tracking",
        include_str!("../scenarios/feedforward-tracking.json"),
    ),
    (
        "rejected-gains",
        include_str!("../scenarios/rejected-gains.json"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Result<&'static str, LabError> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| LabError::UnknownScenario(name.to_string()))
}

pub fn find(name: &str) -> Result<ScenarioSpec, LabError> {
    ScenarioSpec::from_json(source(name)?)
}

/// `name  description` lines.
pub fn list() -> String {
    let width = names().map(str::len).max().unwrap_or(0);
    let mut out = String::new();
    for (name, text) in BUNDLED {
        let desc = ScenarioSpec::from_json(text)
            .map(|s| s.description)
            .unwrap_or_default();
        out.push_str(&format!("{name:width$}  {desc}\n"));
    }
    out
}

pub fn describe(name: &str) -> Result<String, LabError> {
    let spec = find(name)?;
    let mut out = format!("{}\n  {}\n", spec.name, spec.description);
    let c = &spec.controller;
    out.push_str(&format!(
        "  gains k_p = {}, k_I = {}, setpoint {} ({:?})\n",
        c.k_p, c.k_i, c.h_c, c.variant
    ));
    let inflow = if spec.inflow.is_constant() {
        format!("constant inflow {}", spec.inflow.value(0.0))
    } else {
        format!(
            "time-varying inflow {}",
            serde_json::to_string(&spec.inflow).unwrap_or_default()
        )
    };
    out.push_str(&format!("  {inflow}\n  grid n = {}\n", spec.grid.n));
    if spec.simulate {
        if let Some(h) = spec.horizon_transits {
            out.push_str(&format!("  horizon {h} transit times\n"));
        }
        if let Some(p) = spec.horizon_periods {
            out.push_str(&format!("  horizon {p} forcing periods\n"));
        }
    } else {
        out.push_str("  certificate only\n");
    }
    out.push_str(&format!(
        "  expect {}\n",
        serde_json::to_string(&spec.expect).unwrap_or_default()
    ));
    Ok(out)
}

/// A bundled name, or a path to a scenario file, with overrides applied.
pub fn load(target: &str, overrides: &[String]) -> Result<ScenarioSpec, LabError> {
    if let Ok(text) = source(target) {
        return ScenarioSpec::from_json_with(text, overrides);
    }
    let path = Path::new(target);
    if !path.exists() {
        return Err(LabError::UnknownScenario(target.to_string()));
    }
    let text =
        std::fs::read_to_string(path).map_err(|e| LabError::Parse(format!("{target}: {e}")))?;
    ScenarioSpec::from_json_with(&text, overrides)
}
