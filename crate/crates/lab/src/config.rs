//! Scenario documents and `key=value` overrides.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use stvenant_core::channel::{ChannelConfig, Grid, SlopeSpec, TabulatedSlope};
use stvenant_core::pde::ControllerVariant;
use stvenant_core::steady::{InflowSignal, Profile};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub channel: ChannelSpec,
    pub controller: ControllerInput,
    pub inflow: InflowSignal,
    /// Initial time. Ignored when `start_at_trough` is set.
    #[serde(default)]
    pub t0: f64,
    /// Start a sinusoidal inflow at its first minimum, where its slope is
    /// zero and the steady initial profile is compatible with the forcing.
    #[serde(default)]
    pub start_at_trough: bool,
    pub grid: GridSpec,
    #[serde(default)]
    pub perturbation: Perturbation,
    /// Run length in transit times `L / min lambda2`.
    #[serde(default)]
    pub horizon_transits: Option<f64>,
    /// Run length in forcing periods (periodic inflow only).
    #[serde(default)]
    pub horizon_periods: Option<f64>,
    #[serde(default = "default_sample")]
    pub sample_transits: f64,
    #[serde(default)]
    pub certificate: CertificateInput,
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default)]
    pub analysis: AnalysisInput,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default)]
    pub write_profiles: bool,
}

fn default_sample() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

fn default_g() -> f64 {
    9.81
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "default_g")]
    pub g: f64,
    pub k: f64,
    pub slope: SlopeInput,
    #[serde(rename = "L")]
    pub length: f64,
    pub v_g: f64,
    pub alpha: f64,
    pub h_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlopeInput {
    Constant {
        c0: f64,
    },
    Affine {
        c0: f64,
        c1: f64,
    },
    Tabulated {
        x: Vec<f64>,
        c: Vec<f64>,
    },
    /// `amplitude * sin(pi x / L)` tabulated on `nodes` points.
    SineTable {
        amplitude: f64,
        nodes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerInput {
    pub k_p: f64,
    pub k_i: f64,
    pub h_c: f64,
    #[serde(default = "pure_pi")]
    pub variant: ControllerVariant,
}

fn pure_pi() -> ControllerVariant {
    ControllerVariant::PurePi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
}

/// Initial deviation from the base steady profile. Bumps are
/// `amplitude sin^8(pi s)` on `[center - width/2, center + width/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    #[default]
    None,
    HeightBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    VelocityBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Steady profile for the setpoint raised by `amplitude`, with the
    /// integrator that satisfies the gate relation.
    LevelOffset { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateInput {
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub skip: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisInput {
    /// Decay fits use `t >= t0 + fit_from * horizon`.
    #[serde(default = "fit_from")]
    pub fit_from: f64,
    #[serde(default = "monotone_after")]
    pub monotone_after_transits: f64,
    /// Forcing periods discarded before the bounded-deviation window.
    #[serde(default = "settle")]
    pub settle_periods: f64,
    /// Second run with this sinusoid amplitude for the gain comparison.
    #[serde(default)]
    pub companion_amplitude: Option<f64>,
    /// Run the same forcing with pure PI control as a baseline.
    #[serde(default)]
    pub compare_pure_pi: bool,
}

fn fit_from() -> f64 {
    0.4
}

fn monotone_after() -> f64 {
    2.0
}

fn settle() -> f64 {
    1.0
}

impl Default for AnalysisInput {
    fn default() -> Self {
        AnalysisInput {
            fit_from: fit_from(),
            monotone_after_transits: monotone_after(),
            settle_periods: settle(),
            companion_amplitude: None,
            compare_pure_pi: false,
        }
    }
}

/// Scenario assertions. Unset fields are not checked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub certificate_valid: Option<bool>,
    /// Fitted decay rate of the Lyapunov series must exceed this.
    pub gamma_min: Option<f64>,
    pub r2_min: Option<f64>,
    /// Lyapunov series nonincreasing after the transient, within this slack.
    pub lyapunov_slack: Option<f64>,
    pub final_h2_ratio_max: Option<f64>,
    /// Smallest H2 deviation over the run relative to the initial one.
    pub min_h2_ratio_min: Option<f64>,
    pub h2_max: Option<f64>,
    pub mass_balance_rel_max: Option<f64>,
    pub controller_residual_max: Option<f64>,
    pub iss_bounded: Option<bool>,
    /// `|gain ratio - 1|` between main and companion runs.
    pub gain_ratio_tolerance: Option<f64>,
    /// Tracking deviation over the pure-PI baseline deviation.
    pub tracking_ratio_max: Option<f64>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let spec: ScenarioSpec =
            serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Parses after applying `key.path=value` overrides to the raw document.
    pub fn from_json_with(text: &str, overrides: &[String]) -> Result<Self, LabError> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let spec: ScenarioSpec =
            serde_json::from_value(doc).map_err(|e| LabError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Parse(format!("{}: {m}", self.name)));
        self.channel_config()?;
        if self.name.is_empty() {
            return Err(LabError::Parse("scenario name is empty".into()));
        }
        if !(self.controller.h_c > 0.0) {
            return bad(format!(
                "setpoint must be positive, got {}",
                self.controller.h_c
            ));
        }
        if self.grid.n < 7 {
            return bad(format!("grid needs at least 7 nodes, got {}", self.grid.n));
        }
        self.inflow
            .check()
            .map_err(|e| LabError::Parse(format!("{}: {e}", self.name)))?;
        if self.start_at_trough && self.inflow.period().is_none() {
            return bad("start_at_trough needs a sinusoidal inflow".into());
        }
        if self.start_at_trough && self.t0 != 0.0 {
            return bad("t0 and start_at_trough are exclusive".into());
        }
        if self.simulate {
            match (self.horizon_transits, self.horizon_periods) {
                (Some(h), None) if h > 0.0 => {}
                (None, Some(p)) if p > 0.0 && self.inflow.period().is_some() => {}
                (None, Some(_)) => return bad("horizon_periods needs a periodic inflow".into()),
                _ => {
                    return bad(
                        "give exactly one positive horizon_transits or horizon_periods".into(),
                    )
                }
            }
            if !(self.sample_transits > 0.0) {
                return bad("sample_transits must be positive".into());
            }
        }
        let l = self.channel.length;
        match self.perturbation {
            Perturbation::HeightBump { center, width, .. }
            | Perturbation::VelocityBump { center, width, .. } => {
                let (a, b) = (center - 0.5 * width, center + 0.5 * width);
                if !(width > 0.0) || a < 0.1 * l - 1e-12 || b > 0.9 * l + 1e-12 {
                    return bad(format!(
                        "bump support [{a}, {b}] must lie within [0.1L, 0.9L]"
                    ));
                }
            }
            _ => {}
        }
        if let Some(a) = self.analysis.companion_amplitude {
            if !matches!(self.inflow, InflowSignal::Sinusoid { .. }) || !(a > 0.0) {
                return bad(
                    "companion_amplitude needs a sinusoidal inflow and a positive amplitude".into(),
                );
            }
        }
        if !(0.0..1.0).contains(&self.analysis.fit_from) {
            return bad("analysis.fit_from must lie in [0, 1)".into());
        }
        Ok(())
    }

    pub fn channel_config(&self) -> Result<ChannelConfig, LabError> {
        let c = &self.channel;
        let slope = match &c.slope {
            SlopeInput::Constant { c0 } => SlopeSpec::Constant { c0: *c0 },
            SlopeInput::Affine { c0, c1 } => SlopeSpec::Affine { c0: *c0, c1: *c1 },
            SlopeInput::Tabulated { x, c } => {
                SlopeSpec::Tabulated(TabulatedSlope::new(x.clone(), c.clone())?)
            }
            SlopeInput::SineTable { amplitude, nodes } => {
                let (a, l) = (*amplitude, c.length);
                if !(l > 0.0) {
                    return Err(LabError::Parse(format!(
                        "channel length must be positive, got {l}"
                    )));
                }
                SlopeSpec::Tabulated(TabulatedSlope::sample(l, *nodes, |x| {
                    a * (PI * x / l).sin()
                })?)
            }
        };
        ChannelConfig::new(c.g, c.k, slope, c.length, c.v_g, c.alpha, c.h_max)
            .map_err(|e| LabError::Parse(format!("{}: {e}", self.name)))
    }

    pub fn grid(&self) -> Result<Grid, LabError> {
        Grid::new(self.grid.n, self.channel.length).map_err(|e| LabError::Parse(e.to_string()))
    }

    pub fn start_time(&self) -> f64 {
        match (&self.inflow, self.start_at_trough) {
            (InflowSignal::Sinusoid { omega, .. }, true) => 1.5 * PI / omega.abs(),
            _ => self.t0,
        }
    }

    pub fn is_time_varying(&self) -> bool {
        !self.inflow.is_constant()
    }
}

impl Perturbation {
    /// Adds a bump to `p`. `LevelOffset` is handled by the runner since it
    /// needs a steady solve.
    pub fn apply_bump(&self, p: &mut Profile) {
        let (amp, center, width, field) = match *self {
            Perturbation::HeightBump {
                amplitude,
                center,
                width,
            } => (amplitude, center, width, 0),
            Perturbation::VelocityBump {
                amplitude,
                center,
                width,
            } => (amplitude, center, width, 1),
            _ => return,
        };
        let start = center - 0.5 * width;
        for i in 0..p.grid.n {
            let s = (p.grid.x(i) - start) / width;
            if s > 0.0 && s < 1.0 {
                let b = amp * (PI * s).sin().powi(8);
                if field == 0 {
                    p.h[i] += b;
                } else {
                    p.v[i] += b;
                }
            }
        }
    }
}

/// Applies one `a.b.c=value` override. The value is read as JSON when it
/// parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, text: &str) -> Result<(), LabError> {
    let (path, raw) = text
        .split_once('=')
        .ok_or_else(|| LabError::Parse(format!("override `{text}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (depth, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(LabError::Parse(format!(
                "override `{text}` has an empty key"
            )));
        }
        let last = depth + 1 == keys.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*key).to_string(), value);
                    return Ok(());
                }
                map.entry((*key).to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = key.parse().map_err(|_| {
                    LabError::Parse(format!("override `{text}`: `{key}` is not an index"))
                })?;
                let slot = items.get_mut(idx).ok_or_else(|| {
                    LabError::Parse(format!("override `{text}`: index {idx} out of range"))
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => {
                return Err(LabError::Parse(format!(
                    "override `{text}`: `{key}` is not inside an object"
                )))
            }
        };
    }
    Ok(())
}
