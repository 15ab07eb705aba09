//! Physical channel description and fluvial-regime checks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::CubicSpline;
use crate::steady::Profile;

/// Bed slope `C(x)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "variant", rename_all = "snake_case"))]
pub enum SlopeSpec {
    Constant { c0: f64 },
    Affine { c0: f64, c1: f64 },
    Tabulated(TabulatedSlope),
}

/// Slope samples interpolated by a not-a-knot cubic spline, so `C` is C².
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "TabulatedRaw", into = "TabulatedRaw")
)]
pub struct TabulatedSlope {
    spline: CubicSpline,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct TabulatedRaw {
    x: Vec<f64>,
    c: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<TabulatedRaw> for TabulatedSlope {
    type Error = Error;
    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        TabulatedSlope::new(raw.x, raw.c)
    }
}

#[cfg(feature = "serde")]
impl From<TabulatedSlope> for TabulatedRaw {
    fn from(t: TabulatedSlope) -> Self {
        let (x, c) = t.nodes();
        TabulatedRaw {
            x: x.to_vec(),
            c: c.to_vec(),
        }
    }
}

impl TabulatedSlope {
    pub fn new(x: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        Ok(TabulatedSlope {
            spline: CubicSpline::new(x, c)?,
        })
    }

    /// Samples `gen` at `n` equally spaced nodes on `[0, length]`.
    pub fn sample(length: f64, n: usize, gen: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(
                "tabulated slope needs at least 4 nodes".into(),
            ));
        }
        let x: Vec<f64> = (0..n).map(|i| length * i as f64 / (n - 1) as f64).collect();
        let c = x.iter().map(|&x| gen(x)).collect();
        Self::new(x, c)
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        self.spline.nodes()
    }
}

impl SlopeSpec {
    /// Evaluates `C(x)` without a range check.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            SlopeSpec::Constant { c0 } => *c0,
            SlopeSpec::Affine { c0, c1 } => c0 + c1 * x,
            SlopeSpec::Tabulated(t) => t.spline.eval(x),
        }
    }

    fn check(&self, length: f64) -> Result<()> {
        let finite = match self {
            SlopeSpec::Constant { c0 } => c0.is_finite(),
            SlopeSpec::Affine { c0, c1 } => c0.is_finite() && c1.is_finite(),
            SlopeSpec::Tabulated(t) => {
                let (x, _) = t.nodes();
                let span = length * 1e-12;
                if (x[0]).abs() > span || (x[x.len() - 1] - length).abs() > span {
                    return Err(Error::InvalidConfig(format!(
                        "tabulated slope must span [0, {length}], got [{}, {}]",
                        x[0],
                        x[x.len() - 1]
                    )));
                }
                true
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "slope coefficients must be finite".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelConfig {
    pub g: f64,
    /// Friction coefficient.
    pub k: f64,
    pub slope: SlopeSpec,
    #[cfg_attr(feature = "serde", serde(rename = "L"))]
    pub length: f64,
    /// Gate constant.
    pub v_g: f64,
    /// Fluvial margin: `gH - V^2` must stay above it.
    pub alpha: f64,
    pub h_max: f64,
}

impl ChannelConfig {
    pub fn new(
        g: f64,
        k: f64,
        slope: SlopeSpec,
        length: f64,
        v_g: f64,
        alpha: f64,
        h_max: f64,
    ) -> Result<Self> {
        let cfg = ChannelConfig {
            g,
            k,
            slope,
            length,
            v_g,
            alpha,
            h_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the invariants. Deserialized configs should be passed through
    /// this before use.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g", self.g),
            ("L", self.length),
            ("v_g", self.v_g),
            ("alpha", self.alpha),
            ("h_max", self.h_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "k must be nonnegative, got {}",
                self.k
            )));
        }
        self.slope.check(self.length)
    }

    pub fn slope_at(&self, x: f64) -> Result<f64> {
        slope_at(self, x)
    }
}

pub fn slope_at(cfg: &ChannelConfig, x: f64) -> Result<f64> {
    let tol = cfg.length * 1e-12;
    if !(x >= -tol && x <= cfg.length + tol) {
        return Err(Error::Domain {
            what: "slope abscissa",
            value: x,
        });
    }
    Ok(cfg.slope.eval(x))
}

/// `gH - V^2`; positive in the fluvial regime.
pub fn froude_margin(cfg: &ChannelConfig, h: f64, v: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain {
            what: "height",
            value: h,
        });
    }
    Ok(cfg.g * h - v * v)
}

/// Uniform grid on `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub n: usize,
    pub length: f64,
    pub dx: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid length must be positive, got {length}"
            )));
        }
        Ok(Grid {
            n,
            length,
            dx: length / (n - 1) as f64,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.dx
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeReport {
    /// `min (gH - V^2) - alpha` over nodes.
    pub min_fluvial_margin: f64,
    pub min_fluvial_x: f64,
    /// `max H - h_max` over nodes.
    pub max_height_excess: f64,
    pub max_height_x: f64,
    pub min_height: f64,
    pub pass: bool,
}

impl RegimeReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            return Ok(self);
        }
        if !(self.min_height > 0.0) {
            return Err(Error::regime(
                self.min_fluvial_x,
                format!("nonpositive height {}", self.min_height),
            ));
        }
        if !(self.min_fluvial_margin > 0.0) {
            return Err(Error::regime(
                self.min_fluvial_x,
                format!(
                    "fluvial margin gH - V^2 - alpha = {}",
                    self.min_fluvial_margin
                ),
            ));
        }
        Err(Error::regime(
            self.max_height_x,
            format!("height exceeds cap by {}", self.max_height_excess),
        ))
    }
}

pub fn validate_regime(cfg: &ChannelConfig, p: &Profile) -> RegimeReport {
    let mut rep = RegimeReport {
        min_fluvial_margin: f64::INFINITY,
        min_fluvial_x: 0.0,
        max_height_excess: f64::NEG_INFINITY,
        max_height_x: 0.0,
        min_height: f64::INFINITY,
        pass: true,
    };
    for i in 0..p.grid.n {
        let (h, v) = (p.h[i], p.v[i]);
        let x = p.grid.x(i);
        let margin = cfg.g * h - v * v - cfg.alpha;
        // NaN must register as a failure, hence the negated comparisons.
        if !(margin >= rep.min_fluvial_margin) {
            rep.min_fluvial_margin = margin;
            rep.min_fluvial_x = x;
        }
        let excess = h - cfg.h_max;
        if !(excess <= rep.max_height_excess) {
            rep.max_height_excess = excess;
            rep.max_height_x = x;
        }
        if !(h >= rep.min_height) {
            rep.min_height = h;
        }
    }
    rep.pass = rep.min_height > 0.0 && rep.min_fluvial_margin > 0.0 && rep.max_height_excess < 0.0;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady::Role;
    use core::f64::consts::PI;

    pub(crate) fn cfg(slope: SlopeSpec) -> ChannelConfig {
        ChannelConfig::new(9.81, 0.1, slope, 10.0, 1.0, 1.0, 5.0).unwrap()
    }

    fn uniform(h: f64, v: f64) -> Profile {
        let grid = Grid::new(11, 10.0).unwrap();
        Profile::new(grid, vec![h; 11], vec![v; 11], Role::State).unwrap()
    }

    #[test]
    fn slope_variants() {
        let c = cfg(SlopeSpec::Constant { c0: 0.0 });
        assert_eq!(c.slope_at(5.0).unwrap(), 0.0);
        let c = cfg(SlopeSpec::Affine { c0: 0.01, c1: 0.0 });
        for x in [0.0, 3.3, 10.0] {
            assert_eq!(c.slope_at(x).unwrap(), 0.01);
        }
        let t = TabulatedSlope::sample(10.0, 33, |x| 0.01 * (PI * x / 10.0).sin()).unwrap();
        let c = cfg(SlopeSpec::Tabulated(t));
        assert!((c.slope_at(5.0).unwrap() - 0.01).abs() < 1e-6);
        assert!(matches!(c.slope_at(10.5), Err(Error::Domain { .. })));
        assert!(c.slope_at(-0.1).is_err());
    }

    #[test]
    fn tabulated_slope_off_node_accuracy() {
        let gen = |x: f64| 0.01 * (PI * x / 10.0).sin();
        let t = TabulatedSlope::sample(10.0, 33, gen).unwrap();
        let scale = 0.01;
        for k in 0..200 {
            let x = 10.0 * (k as f64 + 0.5) / 200.0;
            assert!((t.spline.eval(x) - gen(x)).abs() < 1e-5 * scale);
        }
    }

    #[test]
    fn tabulated_slope_must_span_channel() {
        let t = TabulatedSlope::sample(5.0, 8, |_| 0.0).unwrap();
        let r = ChannelConfig::new(9.81, 0.0, SlopeSpec::Tabulated(t), 10.0, 1.0, 1.0, 5.0);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn config_invariants() {
        let s = || SlopeSpec::Constant { c0: 0.0 };
        assert!(ChannelConfig::new(9.81, 0.0, s(), -1.0, 1.0, 1.0, 5.0).is_err());
        assert!(ChannelConfig::new(9.81, -0.1, s(), 1.0, 1.0, 1.0, 5.0).is_err());
        assert!(ChannelConfig::new(0.0, 0.0, s(), 1.0, 1.0, 1.0, 5.0).is_err());
        assert!(ChannelConfig::new(9.81, 0.0, s(), 1.0, 0.0, 1.0, 5.0).is_err());
        assert!(ChannelConfig::new(9.81, 0.0, s(), 1.0, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn froude_margin_examples() {
        let c = cfg(SlopeSpec::Constant { c0: 0.0 });
        assert!((froude_margin(&c, 2.0, 1.0).unwrap() - 18.62).abs() < 1e-12);
        let v: f64 = 1.7;
        assert!(froude_margin(&c, v * v / 9.81, v).unwrap().abs() < 1e-12);
        assert!(froude_margin(&c, 0.05, 3.0).unwrap() < 0.0);
        assert!(froude_margin(&c, 0.0, 1.0).is_err());
    }

    #[test]
    fn validate_regime_examples() {
        let c = cfg(SlopeSpec::Constant { c0: 0.0 });
        let r = validate_regime(&c, &uniform(2.0, 1.0));
        assert!(r.pass);
        assert!((r.min_fluvial_margin - 17.62).abs() < 1e-12);
        assert!(!validate_regime(&c, &uniform(6.0, 1.0)).pass);
        let r = validate_regime(&c, &uniform(0.1, 3.0));
        assert!(!r.pass && r.min_fluvial_margin < 0.0);
        assert!(r.into_result().unwrap_err().is_regime());
    }

    #[test]
    fn grid_endpoints() {
        let g = Grid::new(7, 3.0).unwrap();
        assert_eq!(g.x(0), 0.0);
        assert_eq!(g.x(6), 3.0);
        assert!((g.dx - 0.5).abs() < 1e-15);
        assert!(Grid::new(2, 1.0).is_err());
    }
}
