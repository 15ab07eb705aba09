//! Steady backwater profiles and inflow signals.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{validate_regime, ChannelConfig, Grid};
use crate::error::{Error, Result};
use crate::math::{cos, sin};
use crate::numerics::{d1, CubicSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Steady,
    QuasiStatic,
    Target,
    State,
}

/// Heights and velocities sampled on a uniform grid.
///
/// Positivity of `h` is not enforced here so that failing states can still
/// be represented and reported; see [`validate_regime`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Profile {
    pub grid: Grid,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub role: Role,
}

impl Profile {
    pub fn new(grid: Grid, h: Vec<f64>, v: Vec<f64>, role: Role) -> Result<Self> {
        if h.len() != grid.n || v.len() != grid.n {
            return Err(Error::GridMismatch);
        }
        Ok(Profile { grid, h, v, role })
    }

    pub fn uniform(grid: Grid, h: f64, v: f64, role: Role) -> Self {
        Profile {
            grid,
            h: vec![h; grid.n],
            v: vec![v; grid.n],
            role,
        }
    }

    pub fn flux(&self) -> Vec<f64> {
        self.h.iter().zip(&self.v).map(|(h, v)| h * v).collect()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn same_grid(&self, other: &Profile) -> bool {
        self.grid.n == other.grid.n && self.grid.length == other.grid.length
    }
}

/// Upstream discharge `Q0(t)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "variant", rename_all = "snake_case"))]
pub enum InflowSignal {
    Constant {
        q: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        omega: f64,
    },
    /// Smooth transition from `from` to `to` over `[start, start + duration]`.
    /// The blend is the degree-7 smoothstep, so three derivatives vanish at
    /// both ends.
    Ramp {
        from: f64,
        to: f64,
        start: f64,
        duration: f64,
    },
    Tabulated(TabulatedInflow),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(try_from = "TabulatedInflowRaw", into = "TabulatedInflowRaw")
)]
pub struct TabulatedInflow {
    spline: CubicSpline,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct TabulatedInflowRaw {
    t: Vec<f64>,
    q: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<TabulatedInflowRaw> for TabulatedInflow {
    type Error = Error;
    fn try_from(raw: TabulatedInflowRaw) -> Result<Self> {
        TabulatedInflow::new(raw.t, raw.q)
    }
}

#[cfg(feature = "serde")]
impl From<TabulatedInflow> for TabulatedInflowRaw {
    fn from(t: TabulatedInflow) -> Self {
        let (x, y) = t.spline.nodes();
        TabulatedInflowRaw {
            t: x.to_vec(),
            q: y.to_vec(),
        }
    }
}

impl TabulatedInflow {
    pub fn new(t: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Ok(TabulatedInflow {
            spline: CubicSpline::new(t, q)?,
        })
    }
}

fn smoothstep7(s: f64) -> [f64; 4] {
    if s <= 0.0 {
        return [0.0; 4];
    }
    if s >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let v = s4 * (35.0 - 84.0 * s + 70.0 * s2 - 20.0 * s3);
    let d = 140.0 * s3 * (1.0 - s) * (1.0 - s) * (1.0 - s);
    // d/ds of 140 s^3 (1-s)^3
    let dd = 420.0 * s2 * (1.0 - s) * (1.0 - s) * (1.0 - 2.0 * s);
    let ddd = 840.0 * s * (1.0 - s) * (1.0 - 5.0 * s + 5.0 * s2);
    [v, d, dd, ddd]
}

impl InflowSignal {
    /// `[Q0, Q0', Q0'', Q0''']` at time `t`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        match self {
            InflowSignal::Constant { q } => [*q, 0.0, 0.0, 0.0],
            InflowSignal::Sinusoid {
                mean,
                amplitude,
                omega,
            } => {
                let (s, c) = (sin(omega * t), cos(omega * t));
                let (a, w) = (*amplitude, *omega);
                [mean + a * s, a * w * c, -a * w * w * s, -a * w * w * w * c]
            }
            InflowSignal::Ramp {
                from,
                to,
                start,
                duration,
            } => {
                let s = smoothstep7((t - start) / duration);
                let jump = to - from;
                [
                    from + jump * s[0],
                    jump * s[1] / duration,
                    jump * s[2] / (duration * duration),
                    jump * s[3] / (duration * duration * duration),
                ]
            }
            InflowSignal::Tabulated(tab) => {
                let (v, d, dd) = tab.spline.eval_all(t);
                [v, d, dd, tab.spline.third(t)]
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            InflowSignal::Constant { q } => *q,
            _ => self.derivatives(t)[0],
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            InflowSignal::Constant { .. } => true,
            InflowSignal::Sinusoid {
                amplitude, omega, ..
            } => *amplitude == 0.0 || *omega == 0.0,
            _ => false,
        }
    }

    /// Forcing period, for periodic signals.
    pub fn period(&self) -> Option<f64> {
        match self {
            InflowSignal::Sinusoid {
                amplitude, omega, ..
            } if *amplitude != 0.0 && *omega != 0.0 => {
                Some(2.0 * core::f64::consts::PI / omega.abs())
            }
            _ => None,
        }
    }

    /// `sup |d^k Q0/dt^k|` over `[t0, t1]`. Exact for the constant and
    /// sinusoid variants; sampled (1e4 points) otherwise.
    pub fn derivative_sup(&self, order: usize, t0: f64, t1: f64) -> f64 {
        assert!(order <= 3, "derivatives are available up to third order");
        match self {
            InflowSignal::Constant { .. } if order > 0 => 0.0,
            InflowSignal::Sinusoid {
                amplitude, omega, ..
            } if order > 0 && t1 - t0 >= 2.0 * core::f64::consts::PI / omega.abs() => {
                let mut v = amplitude.abs();
                for _ in 0..order {
                    v *= omega.abs();
                }
                v
            }
            _ => {
                let m = 10_000;
                (0..=m)
                    .map(|i| self.derivatives(t0 + (t1 - t0) * i as f64 / m as f64)[order].abs())
                    .fold(0.0, f64::max)
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = match self {
            InflowSignal::Constant { q } => *q > 0.0,
            InflowSignal::Sinusoid {
                mean,
                amplitude,
                omega,
            } => mean.is_finite() && omega.is_finite() && *mean - amplitude.abs() > 0.0,
            InflowSignal::Ramp {
                from,
                to,
                duration,
                start,
            } => *from > 0.0 && *to > 0.0 && *duration > 0.0 && start.is_finite(),
            InflowSignal::Tabulated(t) => t.spline.nodes().1.iter().all(|q| *q > 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "inflow must stay positive: {self:?}"
            )))
        }
    }
}

/// `dH/dx` for the steady equations with discharge `q`.
pub fn steady_rhs(cfg: &ChannelConfig, h: f64, x: f64, q: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain {
            what: "height",
            value: h,
        });
    }
    let r = q * q / (h * h * h);
    let den = cfg.g - r;
    if !(den > 0.0) {
        return Err(Error::CriticalFlow { x });
    }
    Ok((cfg.slope.eval(x) - cfg.k * r) / den)
}

/// Backward RK4 integration of the steady ODE from `H(L) = h_c`.
pub fn solve_steady(cfg: &ChannelConfig, q: f64, h_c: f64, grid: Grid) -> Result<Profile> {
    if !(q > 0.0) {
        return Err(Error::Domain {
            what: "steady discharge",
            value: q,
        });
    }
    if !(h_c > 0.0) {
        return Err(Error::Domain {
            what: "setpoint height",
            value: h_c,
        });
    }
    if grid.length != cfg.length {
        return Err(Error::GridMismatch);
    }
    let n = grid.n;
    let mut h = vec![0.0; n];
    h[n - 1] = h_c;
    let step = -grid.dx;
    for i in (0..n - 1).rev() {
        let x = grid.x(i + 1);
        let y = h[i + 1];
        let wrap = |e: Error| match e {
            Error::Domain { .. } => Error::regime(x, "height left the positive range"),
            e => e,
        };
        let k1 = steady_rhs(cfg, y, x, q).map_err(wrap)?;
        let k2 = steady_rhs(cfg, y + 0.5 * step * k1, x + 0.5 * step, q).map_err(wrap)?;
        let k3 = steady_rhs(cfg, y + 0.5 * step * k2, x + 0.5 * step, q).map_err(wrap)?;
        let k4 = steady_rhs(cfg, y + step * k3, grid.x(i), q).map_err(wrap)?;
        let next = y + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(next > 0.0) {
            return Err(Error::regime(grid.x(i), "height left the positive range"));
        }
        if next > cfg.h_max {
            return Err(Error::regime(
                grid.x(i),
                format!("height {next} exceeds cap {}", cfg.h_max),
            ));
        }
        h[i] = next;
    }
    let v = h.iter().map(|h| q / h).collect();
    let p = Profile {
        grid,
        h,
        v,
        role: Role::Steady,
    };
    validate_regime(cfg, &p).into_result()?;
    Ok(p)
}

/// Largest nodal residual of the steady equations (mass and momentum).
pub fn steady_residual(cfg: &ChannelConfig, p: &Profile) -> f64 {
    let dx = p.grid.dx;
    let dq = d1(&p.flux(), dx);
    let dh = d1(&p.h, dx);
    let dv = d1(&p.v, dx);
    let mut worst = 0.0f64;
    for i in 0..p.grid.n {
        let (h, v) = (p.h[i], p.v[i]);
        let mom = v * dv[i] + cfg.g * dh[i] + cfg.k * v * v / h - cfg.slope.eval(p.grid.x(i));
        worst = worst.max(dq[i].abs()).max(mom.abs());
        if !mom.is_finite() || !dq[i].is_finite() {
            return f64::INFINITY;
        }
    }
    worst
}

/// Steady profiles for the instantaneous inflow at each requested time.
pub fn quasi_static_family(
    cfg: &ChannelConfig,
    inflow: &InflowSignal,
    h_c: f64,
    grid: Grid,
    times: &[f64],
) -> Result<Vec<Profile>> {
    let mut out: Vec<Profile> = Vec::with_capacity(times.len());
    for &t in times {
        let q = inflow.value(t);
        // Constant inflow: every snapshot is the same profile.
        if let (true, Some(first)) = (inflow.is_constant(), out.first()) {
            out.push(first.clone());
            continue;
        }
        let p = solve_steady(cfg, q, h_c, grid).map_err(|e| e.at_time(t))?;
        out.push(p.with_role(Role::QuasiStatic));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{SlopeSpec, TabulatedSlope};
    use core::f64::consts::PI;

    fn channel(k: f64, slope: SlopeSpec) -> ChannelConfig {
        ChannelConfig::new(9.81, k, slope, 10.0, 1.0, 1.0, 10.0).unwrap()
    }

    fn sine_slope() -> SlopeSpec {
        SlopeSpec::Tabulated(
            TabulatedSlope::sample(10.0, 1025, |x| 0.01 * (PI * x / 10.0).sin()).unwrap(),
        )
    }

    #[test]
    fn rhs_examples() {
        let flat = SlopeSpec::Constant { c0: 0.0 };
        let c = channel(0.0, flat.clone());
        assert_eq!(steady_rhs(&c, 1.3, 2.0, 2.0).unwrap(), 0.0);
        let c = channel(
            0.1,
            SlopeSpec::Constant {
                c0: 0.1 * 4.0 / 8.0,
            },
        );
        assert!(steady_rhs(&c, 2.0, 1.0, 2.0).unwrap().abs() < 1e-16);
        let c = channel(0.1, flat);
        let expect = -(0.1 * 4.0 / 8.0) / (9.81 - 4.0 / 8.0);
        assert!((steady_rhs(&c, 2.0, 0.0, 2.0).unwrap() - expect).abs() < 1e-15);
        assert!(matches!(
            steady_rhs(&c, 0.5, 0.0, 2.0),
            Err(Error::CriticalFlow { .. })
        ));
    }

    #[test]
    fn homogeneous_steady_is_exact() {
        let c = channel(0.0, SlopeSpec::Constant { c0: 0.0 });
        let p = solve_steady(&c, 2.0, 2.0, Grid::new(101, 10.0).unwrap()).unwrap();
        assert!(p.h.iter().all(|h| *h == 2.0));
        assert!(p.v.iter().all(|v| *v == 1.0));
        assert!(steady_residual(&c, &p) < 1e-12);
    }

    #[test]
    fn balanced_slope_keeps_setpoint() {
        let c = channel(
            0.1,
            SlopeSpec::Constant {
                c0: 0.1 * 4.0 / 8.0,
            },
        );
        let p = solve_steady(&c, 2.0, 2.0, Grid::new(101, 10.0).unwrap()).unwrap();
        assert!(p.h.iter().all(|h| (h - 2.0).abs() < 1e-14));
    }

    #[test]
    fn backwater_rise_matches_fine_grid() {
        let c = channel(0.1, SlopeSpec::Constant { c0: 0.0 });
        let coarse = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        let fine = solve_steady(&c, 2.0, 2.0, Grid::new(4001, 10.0).unwrap()).unwrap();
        assert!(coarse.h[0] > 2.0);
        assert!((coarse.h[0] - fine.h[0]).abs() < 1e-8);
        assert_eq!(coarse.h[400], 2.0);
    }

    #[test]
    fn residual_small_and_fourth_order() {
        let c = channel(0.1, sine_slope());
        let r = |n| {
            steady_residual(
                &c,
                &solve_steady(&c, 2.0, 2.0, Grid::new(n, 10.0).unwrap()).unwrap(),
            )
        };
        let (r0, r1, r2) = (r(101), r(201), r(401));
        assert!(r2 < 1e-8, "residual {r2}");
        // Below n = 401 the residual is still well above round-off.
        assert!((r0 / r1).log2() > 3.9, "order {}", (r0 / r1).log2());
    }

    #[test]
    fn point_perturbation_is_detected() {
        let c = channel(0.1, SlopeSpec::Constant { c0: 0.0 });
        let mut p = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        p.h[200] += 0.01;
        assert!(steady_residual(&c, &p) > 1e-3);
    }

    #[test]
    fn mass_line_is_flat() {
        let c = channel(0.1, sine_slope());
        let p = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        let f = p.flux();
        let spread = f.iter().fold(0.0f64, |m, q| m.max((q - 2.0).abs()));
        assert!(spread < 1e-12 * 2.0);
    }

    #[test]
    fn supercritical_request_fails_with_regime_error() {
        let c = channel(0.1, SlopeSpec::Constant { c0: 0.0 });
        let e = solve_steady(&c, 5.0, 0.5, Grid::new(51, 10.0).unwrap()).unwrap_err();
        assert!(e.is_regime(), "{e:?}");
    }

    #[test]
    fn quasi_static_examples() {
        let c = channel(0.1, sine_slope());
        let grid = Grid::new(401, 10.0).unwrap();
        let steady = solve_steady(&c, 2.0, 2.0, grid).unwrap();
        let times = [0.0, 3.0, 10.0];
        for inflow in [
            InflowSignal::Constant { q: 2.0 },
            InflowSignal::Sinusoid {
                mean: 2.0,
                amplitude: 0.0,
                omega: 0.3,
            },
        ] {
            for p in quasi_static_family(&c, &inflow, 2.0, grid, &times).unwrap() {
                assert_eq!(p.h, steady.h);
            }
        }
        let inflow = InflowSignal::Sinusoid {
            mean: 2.0,
            amplitude: 0.1,
            omega: 0.01,
        };
        let fam = quasi_static_family(&c, &inflow, 2.0, grid, &[0.0, 50.0, 150.0, 400.0]).unwrap();
        for p in &fam {
            assert!(steady_residual(&c, p) < 1e-8);
            assert_eq!(p.role, Role::QuasiStatic);
        }
    }

    #[test]
    fn family_errors_carry_time() {
        let c = channel(0.1, SlopeSpec::Constant { c0: 0.0 });
        let inflow = InflowSignal::Sinusoid {
            mean: 3.0,
            amplitude: 2.5,
            omega: 1.0,
        };
        let grid = Grid::new(51, 10.0).unwrap();
        let e = quasi_static_family(&c, &inflow, 0.6, grid, &[0.0, 1.5]).unwrap_err();
        assert!(matches!(e, Error::AtTime { .. }) && e.is_regime(), "{e:?}");
    }

    #[test]
    fn inflow_derivatives_match_finite_differences() {
        let signals = [
            InflowSignal::Sinusoid {
                mean: 2.0,
                amplitude: 0.3,
                omega: 0.7,
            },
            InflowSignal::Ramp {
                from: 2.0,
                to: 2.5,
                start: 1.0,
                duration: 4.0,
            },
        ];
        let h = 1e-4;
        for s in &signals {
            for t in [0.5, 2.0, 3.7] {
                let d = s.derivatives(t);
                for k in 0..3 {
                    let fd = (s.derivatives(t + h)[k] - s.derivatives(t - h)[k]) / (2.0 * h);
                    assert!(
                        (fd - d[k + 1]).abs() < 1e-6 * (1.0 + d[k + 1].abs()),
                        "{s:?} t={t} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn ramp_is_flat_outside_transition() {
        let r = InflowSignal::Ramp {
            from: 2.0,
            to: 3.0,
            start: 1.0,
            duration: 2.0,
        };
        assert_eq!(r.derivatives(0.5), [2.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.derivatives(3.5), [3.0, 0.0, 0.0, 0.0]);
        // Peak of the blend's slope is 140/64 at the midpoint.
        assert!((r.derivative_sup(1, 0.0, 4.0) - 140.0 / 64.0 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn sinusoid_sup_closed_form() {
        let s = InflowSignal::Sinusoid {
            mean: 2.0,
            amplitude: 0.1,
            omega: 0.5,
        };
        assert!((s.derivative_sup(2, 0.0, 100.0) - 0.025).abs() < 1e-15);
        assert!(s.check().is_ok());
        assert!(InflowSignal::Sinusoid {
            mean: 1.0,
            amplitude: 1.5,
            omega: 1.0
        }
        .check()
        .is_err());
    }
}
