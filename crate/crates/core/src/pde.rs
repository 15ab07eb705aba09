//! Method-of-lines simulator for the closed-loop Saint-Venant system.
//!
//! The state is `(H, V)` on a uniform grid plus the integrator `Z`. Interior
//! nodes are advanced by classical RK4. At each end the outgoing Riemann
//! invariant is advanced with the one-sided semi-discrete operator and the
//! boundary node is then recovered from it and the boundary relation
//! (imposed inflow upstream, PI gate downstream), at every stage.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{validate_regime, ChannelConfig, Grid};
use crate::error::{End, Error, Result};
use crate::math::sqrt;
use crate::numerics::{banded_jacobian, d1, find_root, integrate, lagrange4};
use crate::steady::{solve_steady, InflowSignal, Profile, Role};

/// Spatial discretization parameters, fixed for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scheme {
    /// Coefficient of the fourth-difference dissipation `-sigma dx^3 D^4`.
    pub sigma: f64,
    pub cfl: f64,
}

impl Scheme {
    pub const DEFAULT_CFL: f64 = 0.4;

    pub fn new(sigma: f64, cfl: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "dissipation must be nonnegative, got {sigma}"
            )));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "CFL number must lie in (0, 1], got {cfl}"
            )));
        }
        Ok(Scheme { sigma, cfl })
    }

    /// `sigma = 0.02 max lambda1` over the reference profile, CFL 0.4.
    pub fn for_profile(cfg: &ChannelConfig, p: &Profile) -> Self {
        Scheme {
            sigma: 0.02 * max_speed(cfg.g, &p.h, &p.v),
            cfl: Self::DEFAULT_CFL,
        }
    }
}

fn max_speed(g: f64, h: &[f64], v: &[f64]) -> f64 {
    h.iter()
        .zip(v)
        .map(|(h, v)| v.abs() + sqrt(g * h.max(0.0)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ControllerVariant {
    PurePi,
    /// PI plus the target outflow `H1 V1(t, L)`.
    Feedforward,
    /// `H(t, L) = H_c` exactly; produces the target trajectory.
    Pinned,
}

/// Outflow of a target run sampled every `dt` from `t0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeedforwardFlux {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl FeedforwardFlux {
    pub fn eval(&self, t: f64) -> f64 {
        lagrange4(&self.values, self.t0, self.dt, t)
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len().saturating_sub(1)) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControllerSpec {
    pub k_p: f64,
    pub k_i: f64,
    pub h_c: f64,
    pub variant: ControllerVariant,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub feedforward: Option<FeedforwardFlux>,
}

impl ControllerSpec {
    pub fn pure_pi(k_p: f64, k_i: f64, h_c: f64) -> Self {
        ControllerSpec {
            k_p,
            k_i,
            h_c,
            variant: ControllerVariant::PurePi,
            feedforward: None,
        }
    }

    pub fn pinned(h_c: f64) -> Self {
        ControllerSpec {
            k_p: 0.0,
            k_i: 0.0,
            h_c,
            variant: ControllerVariant::Pinned,
            feedforward: None,
        }
    }

    pub fn feedforward(k_p: f64, k_i: f64, h_c: f64, flux: FeedforwardFlux) -> Self {
        ControllerSpec {
            k_p,
            k_i,
            h_c,
            variant: ControllerVariant::Feedforward,
            feedforward: Some(flux),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h_c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "setpoint must be positive, got {}",
                self.h_c
            )));
        }
        if !self.k_p.is_finite() || !self.k_i.is_finite() {
            return Err(Error::InvalidConfig("gains must be finite".into()));
        }
        if self.variant == ControllerVariant::Feedforward && self.feedforward.is_none() {
            return Err(Error::InvalidConfig(
                "feedforward variant needs a feedforward flux".into(),
            ));
        }
        Ok(())
    }

    /// Downstream relation `H V = a H + b` at time `t` with integrator `z`.
    fn relation(&self, v_g: f64, t: f64, z: f64) -> (f64, f64) {
        let a = v_g * (1.0 + self.k_p);
        match self.variant {
            ControllerVariant::PurePi | ControllerVariant::Pinned => {
                (a, -v_g * self.k_p * self.h_c - v_g * self.k_i * z)
            }
            ControllerVariant::Feedforward => {
                let f = self.feedforward.as_ref().map_or(0.0, |f| f.eval(t));
                (a, f - a * self.h_c - v_g * self.k_i * z)
            }
        }
    }

    /// Integrator value for which the downstream relation holds for `p` at
    /// time `t`. Zero without integral action.
    pub fn consistent_z(&self, cfg: &ChannelConfig, p: &Profile, t: f64) -> f64 {
        if self.k_i == 0.0 || self.variant == ControllerVariant::Pinned {
            return 0.0;
        }
        let n = p.grid.n;
        let (h, v) = (p.h[n - 1], p.v[n - 1]);
        let (a, b0) = self.relation(cfg.v_g, t, 0.0);
        (a * h + b0 - h * v) / (cfg.v_g * self.k_i)
    }

    /// Equilibrium integrator value when the outflow is `q_out` and
    /// `H(L) = H_c`.
    pub fn z_equilibrium(&self, cfg: &ChannelConfig, q_out: f64) -> f64 {
        match self.variant {
            ControllerVariant::PurePi if self.k_i != 0.0 => {
                (cfg.v_g * self.h_c - q_out) / (cfg.v_g * self.k_i)
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimState {
    pub t: f64,
    pub profile: Profile,
    pub z: f64,
}

/// Semi-discrete right-hand side at every node.
pub fn interior_rhs(cfg: &ChannelConfig, scheme: &Scheme, p: &Profile) -> (Vec<f64>, Vec<f64>) {
    let slope: Vec<f64> = (0..p.grid.n).map(|i| cfg.slope.eval(p.grid.x(i))).collect();
    rhs_with_slope(cfg, scheme, p.grid.dx, &slope, &p.h, &p.v)
}

fn rhs_with_slope(
    cfg: &ChannelConfig,
    scheme: &Scheme,
    dx: f64,
    slope: &[f64],
    h: &[f64],
    v: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let q: Vec<f64> = h.iter().zip(v).map(|(h, v)| h * v).collect();
    let dq = d1(&q, dx);
    let dh = d1(h, dx);
    let dv = d1(v, dx);
    let mut rh = vec![0.0; n];
    let mut rv = vec![0.0; n];
    for i in 0..n {
        rh[i] = -dq[i];
        rv[i] = -v[i] * dv[i] - cfg.g * dh[i] - cfg.k * v[i] * v[i] / h[i] + slope[i];
    }
    if scheme.sigma > 0.0 && n >= 5 {
        let c = scheme.sigma / dx;
        for i in 2..n - 2 {
            rh[i] -= c * (h[i - 2] - 4.0 * h[i - 1] + 6.0 * h[i] - 4.0 * h[i + 1] + h[i + 2]);
            rv[i] -= c * (v[i - 2] - 4.0 * v[i - 1] + 6.0 * v[i] - 4.0 * v[i + 1] + v[i + 2]);
        }
    }
    (rh, rv)
}

/// Outgoing Riemann invariants `(V - 2 sqrt(gH))(0)` and `(V + 2 sqrt(gH))(L)`.
fn outgoing(g: f64, h: &[f64], v: &[f64]) -> [f64; 2] {
    let n = h.len();
    [
        v[0] - 2.0 * sqrt(g * h[0]),
        v[n - 1] + 2.0 * sqrt(g * h[n - 1]),
    ]
}

/// Rates of the outgoing invariants given the nodal rhs.
fn outgoing_rates(g: f64, h: &[f64], rh: &[f64], rv: &[f64]) -> [f64; 2] {
    let n = h.len();
    [
        rv[0] - sqrt(g / h[0]) * rh[0],
        rv[n - 1] + sqrt(g / h[n - 1]) * rh[n - 1],
    ]
}

/// Solves `H V = q` with `V - 2 sqrt(gH) = w` on the subcritical branch.
fn solve_upstream(g: f64, w: f64, q: f64, guess_c: f64) -> Result<(f64, f64)> {
    if !(w < 0.0) {
        return Err(Error::regime(
            0.0,
            "upstream outgoing invariant is nonnegative",
        ));
    }
    let (lo, hi) = (-w / 3.0, -w);
    if !(hi * hi * (w + 2.0 * hi) > g * q) {
        return Err(Error::regime(
            0.0,
            "inflow exceeds the subcritical capacity at x = 0",
        ));
    }
    let f = |c: f64| (c * c * (w + 2.0 * c) - g * q, 2.0 * c * w + 6.0 * c * c);
    let c = find_root(f, lo, hi, guess_c, 1e-15).ok_or(Error::BoundarySolve {
        end: End::Upstream,
        detail: "no root on the subcritical branch",
    })?;
    Ok((c * c / g, w + 2.0 * c))
}

/// Solves `H V = a H + b` with `V + 2 sqrt(gH) = w`.
fn solve_downstream(
    g: f64,
    length: f64,
    w: f64,
    a: f64,
    b: f64,
    guess_c: f64,
) -> Result<(f64, f64)> {
    if !(w > 0.0) {
        return Err(Error::regime(
            length,
            "downstream outgoing invariant is nonpositive",
        ));
    }
    let f = |c: f64| {
        let r = c * c / g * (w - 2.0 * c - a) - b;
        let dr = 2.0 * c / g * (w - 3.0 * c - a);
        (r, dr)
    };
    let c = find_root(f, w / 3.0, w, guess_c, 1e-15).ok_or(Error::BoundarySolve {
        end: End::Downstream,
        detail: "no subcritical root of the gate relation",
    })?;
    Ok((c * c / g, w - 2.0 * c))
}

fn pinned_downstream(g: f64, length: f64, w: f64, h_c: f64) -> Result<(f64, f64)> {
    let c = sqrt(g * h_c);
    let v = w - 2.0 * c;
    if !(v.abs() < c) {
        return Err(Error::regime(
            length,
            "pinned downstream height is not subcritical",
        ));
    }
    Ok((h_c, v))
}

#[allow(clippy::too_many_arguments)]
fn set_boundaries(
    cfg: &ChannelConfig,
    ctrl: &ControllerSpec,
    t: f64,
    q0: f64,
    z: f64,
    w: [f64; 2],
    h: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let g = cfg.g;
    let n = h.len();
    let [wu, wd] = w;
    let (h0, v0) = solve_upstream(g, wu, q0, sqrt(g * h[0].max(0.0)))?;
    h[0] = h0;
    v[0] = v0;
    let (hl, vl) = match ctrl.variant {
        ControllerVariant::Pinned => pinned_downstream(g, cfg.length, wd, ctrl.h_c)?,
        _ => {
            let (a, b) = ctrl.relation(cfg.v_g, t, z);
            solve_downstream(g, cfg.length, wd, a, b, sqrt(g * h[n - 1].max(0.0)))?
        }
    };
    h[n - 1] = hl;
    v[n - 1] = vl;
    Ok(())
}

/// Moves both boundary nodes of `state` onto the boundary relations while
/// keeping their outgoing Riemann invariants.
pub fn apply_boundaries(
    cfg: &ChannelConfig,
    ctrl: &ControllerSpec,
    state: &mut SimState,
    q0: f64,
) -> Result<()> {
    let SimState { t, profile, z } = state;
    let w = outgoing(cfg.g, &profile.h, &profile.v);
    set_boundaries(cfg, ctrl, *t, q0, *z, w, &mut profile.h, &mut profile.v)
}

/// Residual of the downstream relation for `state` (zero for a solved
/// boundary).
pub fn controller_residual(cfg: &ChannelConfig, ctrl: &ControllerSpec, state: &SimState) -> f64 {
    let n = state.profile.grid.n;
    let (h, v) = (state.profile.h[n - 1], state.profile.v[n - 1]);
    match ctrl.variant {
        ControllerVariant::Pinned => h - ctrl.h_c,
        _ => {
            let (a, b) = ctrl.relation(cfg.v_g, state.t, state.z);
            h * v - a * h - b
        }
    }
}

/// Steady profile that the semi-discrete operator (with `scheme`'s
/// dissipation and the characteristic boundary closures) leaves exactly
/// invariant, with `H V = q` upstream and `H(L) = h_c`. Newton iteration
/// seeded by [`solve_steady`].
pub fn discrete_steady(
    cfg: &ChannelConfig,
    scheme: &Scheme,
    q: f64,
    h_c: f64,
    grid: Grid,
) -> Result<Profile> {
    if grid.n < 7 {
        return Err(Error::InvalidConfig(
            "the simulator needs at least 7 nodes".into(),
        ));
    }
    let seed = solve_steady(cfg, q, h_c, grid)?;
    let n = grid.n;
    let slope: Vec<f64> = (0..n).map(|i| cfg.slope.eval(grid.x(i))).collect();
    let g = cfg.g;
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let h: Vec<f64> = x.iter().step_by(2).copied().collect();
        let v: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
        if h.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::regime(
                f64::NAN,
                "nonpositive height during the discrete steady solve",
            ));
        }
        let (rh, rv) = rhs_with_slope(cfg, scheme, grid.dx, &slope, &h, &v);
        let mut r = vec![0.0; 2 * n];
        r[0] = h[0] * v[0] - q;
        let [ru, rd] = outgoing_rates(g, &h, &rh, &rv);
        r[1] = ru;
        for i in 1..n - 1 {
            r[2 * i] = rh[i];
            r[2 * i + 1] = rv[i];
        }
        r[2 * n - 2] = h[n - 1] - h_c;
        r[2 * n - 1] = rd;
        Ok(r)
    };
    let mut x: Vec<f64> = seed
        .h
        .iter()
        .zip(&seed.v)
        .flat_map(|(h, v)| [*h, *v])
        .collect();
    let mut r = residual(&x)?;
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best = norm(&r);
    for _ in 0..40 {
        if best < 1e-14 {
            break;
        }
        let jac = banded_jacobian(&x, &r, 9, 9, residual)?;
        let mut dx = r.iter().map(|v| -v).collect::<Vec<_>>();
        jac.solve(&mut dx)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
            if let Ok(rt) = residual(&trial) {
                let nt = norm(&rt);
                if nt < best {
                    x = trial;
                    r = rt;
                    best = nt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(best < 1e-10) {
        return Err(Error::NonConvergence("discrete steady Newton iteration"));
    }
    let h = x.iter().step_by(2).copied().collect();
    let v = x.iter().skip(1).step_by(2).copied().collect();
    let p = Profile::new(grid, h, v, Role::Steady)?;
    validate_regime(cfg, &p).into_result()?;
    Ok(p)
}

/// Dynamic variables: nodal fields, integrator and the outgoing invariants
/// that drive the boundary nodes.
#[derive(Clone)]
struct Dyn {
    h: Vec<f64>,
    v: Vec<f64>,
    z: f64,
    w: [f64; 2],
}

impl Dyn {
    fn new(g: f64, h: Vec<f64>, v: Vec<f64>, z: f64) -> Self {
        let w = outgoing(g, &h, &v);
        Dyn { h, v, z, w }
    }
}

/// Everything needed to advance one state.
struct Stepper<'a> {
    cfg: &'a ChannelConfig,
    ctrl: &'a ControllerSpec,
    scheme: &'a Scheme,
    inflow: &'a InflowSignal,
    slope: Vec<f64>,
    dx: f64,
}

struct StageOut {
    dh: Vec<f64>,
    dv: Vec<f64>,
    dz: f64,
    dw: [f64; 2],
}

impl<'a> Stepper<'a> {
    fn new(
        cfg: &'a ChannelConfig,
        ctrl: &'a ControllerSpec,
        scheme: &'a Scheme,
        inflow: &'a InflowSignal,
        grid: Grid,
    ) -> Self {
        let slope = (0..grid.n).map(|i| cfg.slope.eval(grid.x(i))).collect();
        Stepper {
            cfg,
            ctrl,
            scheme,
            inflow,
            slope,
            dx: grid.dx,
        }
    }

    fn dz(&self, h: &[f64]) -> f64 {
        match self.ctrl.variant {
            ControllerVariant::Pinned => 0.0,
            _ => self.ctrl.h_c - h[h.len() - 1],
        }
    }

    /// Sets the boundary nodes for time `t` and evaluates all rates.
    fn stage(&self, t: f64, s: &mut Dyn) -> Result<StageOut> {
        set_boundaries(
            self.cfg,
            self.ctrl,
            t,
            self.inflow.value(t),
            s.z,
            s.w,
            &mut s.h,
            &mut s.v,
        )?;
        let (dh, dv) = rhs_with_slope(self.cfg, self.scheme, self.dx, &self.slope, &s.h, &s.v);
        let dw = outgoing_rates(self.cfg.g, &s.h, &dh, &dv);
        Ok(StageOut {
            dh,
            dv,
            dz: self.dz(&s.h),
            dw,
        })
    }

    fn max_courant(&self, dt: f64, h: &[f64], v: &[f64]) -> f64 {
        dt * max_speed(self.cfg.g, h, v) / self.dx
    }

    /// One RK4 step in place; boundary nodes are consistent with `t + dt`
    /// on return.
    fn step(&self, t: f64, dt: f64, s: &mut Dyn) -> Result<()> {
        let courant = self.max_courant(dt, &s.h, &s.v);
        if courant > self.scheme.cfl {
            return Err(Error::Cfl {
                courant,
                limit: self.scheme.cfl,
            });
        }
        let n = s.h.len();
        let k1 = self.stage(t, s)?;
        let mut y = s.clone();
        let advance = |y: &mut Dyn, k: &StageOut, c: f64, s: &Dyn| {
            for i in 1..n - 1 {
                y.h[i] = s.h[i] + c * k.dh[i];
                y.v[i] = s.v[i] + c * k.dv[i];
            }
            y.z = s.z + c * k.dz;
            y.w = [s.w[0] + c * k.dw[0], s.w[1] + c * k.dw[1]];
        };
        advance(&mut y, &k1, 0.5 * dt, s);
        let k2 = self.stage(t + 0.5 * dt, &mut y)?;
        advance(&mut y, &k2, 0.5 * dt, s);
        let k3 = self.stage(t + 0.5 * dt, &mut y)?;
        advance(&mut y, &k3, dt, s);
        let k4 = self.stage(t + dt, &mut y)?;
        let c = dt / 6.0;
        let comb = |a: f64, b: f64, c3: f64, d: f64| c * (a + 2.0 * b + 2.0 * c3 + d);
        for i in 1..n - 1 {
            s.h[i] += comb(k1.dh[i], k2.dh[i], k3.dh[i], k4.dh[i]);
            s.v[i] += comb(k1.dv[i], k2.dv[i], k3.dv[i], k4.dv[i]);
        }
        s.z += comb(k1.dz, k2.dz, k3.dz, k4.dz);
        for j in 0..2 {
            s.w[j] += comb(k1.dw[j], k2.dw[j], k3.dw[j], k4.dw[j]);
        }
        set_boundaries(
            self.cfg,
            self.ctrl,
            t + dt,
            self.inflow.value(t + dt),
            s.z,
            s.w,
            &mut s.h,
            &mut s.v,
        )
    }
}

/// One RK4 step of the coupled `(H, V, Z)` system.
pub fn step(
    cfg: &ChannelConfig,
    ctrl: &ControllerSpec,
    scheme: &Scheme,
    state: &SimState,
    inflow: &InflowSignal,
    dt: f64,
) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "time step",
            value: dt,
        });
    }
    let stepper = Stepper::new(cfg, ctrl, scheme, inflow, state.profile.grid);
    let mut d = Dyn::new(
        cfg.g,
        state.profile.h.clone(),
        state.profile.v.clone(),
        state.z,
    );
    stepper
        .step(state.t, dt, &mut d)
        .map_err(|e| e.at_time(state.t))?;
    let z = d.z;
    let profile = Profile::new(state.profile.grid, d.h, d.v, Role::State)?;
    validate_regime(cfg, &profile)
        .into_result()
        .map_err(|e| e.at_time(state.t + dt))?;
    Ok(SimState {
        t: state.t + dt,
        profile,
        z,
    })
}

/// State after an accepted step together with its time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub t: f64,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub z: f64,
    /// Semi-discrete `dH/dt` at every node (boundary nodes use the one-sided
    /// operator).
    pub dh: Vec<f64>,
    pub dv: Vec<f64>,
    pub dz: f64,
    pub q0: f64,
}

impl StepState {
    pub fn profile(&self, grid: Grid) -> Profile {
        Profile {
            grid,
            h: self.h.clone(),
            v: self.v.clone(),
            role: Role::State,
        }
    }

    fn mass(&self, dx: f64) -> f64 {
        integrate(&self.h, dx)
    }
}

/// Step states around a sample. `prev` is absent at the first sample, where
/// `next2` is provided instead so one-sided differences stay second order.
pub struct SampleWindow<'a> {
    pub index: usize,
    pub dt: f64,
    pub grid: Grid,
    pub prev: Option<&'a StepState>,
    pub cur: &'a StepState,
    pub next: &'a StepState,
    pub next2: Option<&'a StepState>,
}

impl SampleWindow<'_> {
    /// Second-order time derivative of a per-step quantity at the sample.
    pub fn rate<F: Fn(&StepState) -> f64>(&self, f: F) -> f64 {
        match (self.prev, self.next2) {
            (Some(p), _) => (f(self.next) - f(p)) / (2.0 * self.dt),
            (None, Some(n2)) => (-3.0 * f(self.cur) + 4.0 * f(self.next) - f(n2)) / (2.0 * self.dt),
            (None, None) => (f(self.next) - f(self.cur)) / self.dt,
        }
    }

    /// Nodewise version of [`rate`](Self::rate).
    pub fn rate_nodes<F: Fn(&StepState) -> &[f64]>(&self, f: F) -> Vec<f64> {
        let n = self.cur.h.len();
        (0..n).map(|i| self.rate(|s| f(s)[i])).collect()
    }

    pub fn mass_rate(&self) -> f64 {
        let dx = self.grid.dx;
        self.rate(|s| s.mass(dx))
    }
}

/// Hook called at every recorded sample.
pub trait SampleObserver {
    fn observe(&mut self, w: &SampleWindow<'_>) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub t: f64,
    pub z: f64,
    pub h_l: f64,
    pub q0: f64,
    pub flux_in: f64,
    pub flux_out: f64,
    pub mass: f64,
    /// Time derivative of the stored volume.
    pub mass_rate: f64,
    pub controller_residual: f64,
}

impl Sample {
    /// `|d/dt ∫H - (Q0 - HV(L))|`.
    pub fn mass_balance_error(&self) -> f64 {
        (self.mass_rate - (self.q0 - self.flux_out)).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub horizon: f64,
    pub sample_every: f64,
    pub record_profiles: bool,
    /// Keep `H V(L)` at every step (input for a feedforward run).
    pub record_outflux: bool,
    /// Overrides the automatic step `0.9 cfl dx / max speed`.
    pub dt: Option<f64>,
}

impl RunOptions {
    pub fn new(horizon: f64, sample_every: f64) -> Self {
        RunOptions {
            horizon,
            sample_every,
            record_profiles: false,
            record_outflux: false,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    pub samples: Vec<Sample>,
    pub profiles: Vec<Profile>,
    pub outflux: Option<FeedforwardFlux>,
    /// Set when the run stopped early; samples up to the failure are kept.
    pub failure: Option<Error>,
}

impl TrajectoryRecord {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Advances `initial` to `initial.t + horizon`, recording every
/// `sample_every`. Invalid inputs are errors; failures during the run end it
/// early and are stored in the record with their time.
pub fn run(
    cfg: &ChannelConfig,
    ctrl: &ControllerSpec,
    scheme: &Scheme,
    initial: &SimState,
    inflow: &InflowSignal,
    opts: &RunOptions,
    observers: &mut [&mut dyn SampleObserver],
) -> Result<TrajectoryRecord> {
    ctrl.validate()?;
    inflow.check()?;
    if !(opts.horizon > 0.0) || !(opts.sample_every > 0.0) {
        return Err(Error::InvalidConfig(
            "horizon and sample interval must be positive".into(),
        ));
    }
    let grid = initial.profile.grid;
    if grid.n < 7 {
        return Err(Error::InvalidConfig(
            "the simulator needs at least 7 nodes".into(),
        ));
    }
    validate_regime(cfg, &initial.profile).into_result()?;
    let stepper = Stepper::new(cfg, ctrl, scheme, inflow, grid);

    let mut d = Dyn::new(
        cfg.g,
        initial.profile.h.clone(),
        initial.profile.v.clone(),
        initial.z,
    );
    let t0 = initial.t;
    let first = stepper.stage(t0, &mut d).map_err(|e| e.at_time(t0))?;

    let auto_dt = 0.9 * scheme.cfl * grid.dx / max_speed(cfg.g, &d.h, &d.v);
    let dt_max = opts.dt.unwrap_or(auto_dt);
    let per_sample = libm::ceil(opts.sample_every / dt_max).max(1.0) as usize;
    let dt = opts.sample_every / per_sample as f64;
    let n_samples = libm::ceil(opts.horizon / opts.sample_every - 1e-9) as usize;
    let last_step = n_samples * per_sample;
    if let Some(ff) = &ctrl.feedforward {
        let need = t0 + (last_step + 2) as f64 * dt;
        if ctrl.variant == ControllerVariant::Feedforward && ff.end() + 1e-9 * need.abs() < need {
            return Err(Error::InvalidConfig(format!(
                "feedforward flux ends at {} but the run needs {need}",
                ff.end()
            )));
        }
    }

    let mut rec = TrajectoryRecord {
        grid,
        dt,
        steps: 0,
        samples: Vec::with_capacity(n_samples + 1),
        profiles: Vec::new(),
        outflux: None,
        failure: None,
    };
    let mut outflux = Vec::new();
    let mut window: VecDeque<StepState> = VecDeque::with_capacity(4);
    let push = |window: &mut VecDeque<StepState>, s: StepState| {
        if window.len() == 4 {
            window.pop_front();
        }
        window.push_back(s);
    };
    let n = grid.n;
    let state0 = StepState {
        t: t0,
        h: d.h.clone(),
        v: d.v.clone(),
        z: d.z,
        dh: first.dh,
        dv: first.dv,
        dz: first.dz,
        q0: inflow.value(t0),
    };
    if opts.record_outflux {
        outflux.push(d.h[n - 1] * d.v[n - 1]);
    }
    push(&mut window, state0);
    let mut next_sample = 0usize;

    // Step index k has time t0 + k dt; sample j sits at step j * per_sample
    // and is emitted once the steps it needs for time differences exist.
    let mut k = 0usize;
    loop {
        let target_step = next_sample * per_sample;
        let needed = if target_step == 0 { 2 } else { target_step + 1 };
        if k >= needed {
            let len = window.len();
            let cur_pos = len - 1 - (k - target_step);
            let w = SampleWindow {
                index: next_sample,
                dt,
                grid,
                prev: if target_step == 0 {
                    None
                } else {
                    Some(&window[cur_pos - 1])
                },
                cur: &window[cur_pos],
                next: &window[cur_pos + 1],
                next2: if target_step == 0 {
                    window.get(cur_pos + 2)
                } else {
                    None
                },
            };
            let cur = w.cur;
            let sample = Sample {
                t: cur.t,
                z: cur.z,
                h_l: cur.h[n - 1],
                q0: cur.q0,
                flux_in: cur.h[0] * cur.v[0],
                flux_out: cur.h[n - 1] * cur.v[n - 1],
                mass: cur.mass(grid.dx),
                mass_rate: w.mass_rate(),
                controller_residual: controller_residual(
                    cfg,
                    ctrl,
                    &SimState {
                        t: cur.t,
                        profile: cur.profile(grid),
                        z: cur.z,
                    },
                ),
            };
            let mut failed = None;
            for obs in observers.iter_mut() {
                if let Err(e) = obs.observe(&w) {
                    failed = Some(e.at_time(cur.t));
                    break;
                }
            }
            if opts.record_profiles {
                rec.profiles.push(cur.profile(grid));
            }
            rec.samples.push(sample);
            if let Some(e) = failed {
                rec.failure = Some(e);
                break;
            }
            next_sample += 1;
            if next_sample > n_samples {
                break;
            }
            continue;
        }
        let t = t0 + k as f64 * dt;
        let stepped = stepper
            .step(t, dt, &mut d)
            .and_then(|_| {
                let p = Profile {
                    grid,
                    h: d.h.clone(),
                    v: d.v.clone(),
                    role: Role::State,
                };
                validate_regime(cfg, &p).into_result().map(|_| ())
            })
            .and_then(|_| stepper.stage(t + dt, &mut d));
        let out = match stepped {
            Ok(out) => out,
            Err(e) => {
                rec.failure = Some(e.at_time(t + dt));
                break;
            }
        };
        k += 1;
        rec.steps = k;
        let tk = t0 + k as f64 * dt;
        if opts.record_outflux {
            outflux.push(d.h[n - 1] * d.v[n - 1]);
        }
        push(
            &mut window,
            StepState {
                t: tk,
                h: d.h.clone(),
                v: d.v.clone(),
                z: d.z,
                dh: out.dh,
                dv: out.dv,
                dz: out.dz,
                q0: inflow.value(tk),
            },
        );
    }
    if opts.record_outflux {
        rec.outflux = Some(FeedforwardFlux {
            t0,
            dt,
            values: outflux,
        });
    }
    Ok(rec)
}
