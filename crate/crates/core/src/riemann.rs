//! Linearization fields around a base profile and the Riemann coordinates.

use alloc::vec::Vec;

use crate::channel::{validate_regime, ChannelConfig, Grid};
use crate::error::{Error, Result};
use crate::math::{exp, sqrt};
use crate::numerics::{cumulative_integral, d1};
use crate::steady::Profile;

/// Characteristic speeds, source couplings and exponential weights of a
/// base profile `(H1, V1)`. Both speeds are stored positive.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiemannFields {
    pub grid: Grid,
    pub g: f64,
    pub h1: Vec<f64>,
    pub v1: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub delta1: Vec<f64>,
    pub delta2: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi: Vec<f64>,
    pub dh1dx: Vec<f64>,
    pub dv1dx: Vec<f64>,
}

/// `(V + sqrt(gH), sqrt(gH) - V)`.
pub fn eigenvalues(g: f64, h: f64, v: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) {
        return Err(Error::Domain {
            what: "height",
            value: h,
        });
    }
    if !(g * h > v * v) {
        return Err(Error::regime(
            f64::NAN,
            "supercritical state has no positive second speed",
        ));
    }
    let c = sqrt(g * h);
    Ok((v + c, c - v))
}

/// Builds all fields (speeds, couplings and the `phi` weights).
pub fn coupling_coefficients(cfg: &ChannelConfig, base: &Profile) -> Result<RiemannFields> {
    validate_regime(cfg, base).into_result()?;
    let grid = base.grid;
    let n = grid.n;
    let g = cfg.g;
    let k = cfg.k;
    let dh = d1(&base.h, grid.dx);
    let dv = d1(&base.v, grid.dx);
    let mut f = RiemannFields {
        grid,
        g,
        h1: base.h.clone(),
        v1: base.v.clone(),
        lambda1: Vec::with_capacity(n),
        lambda2: Vec::with_capacity(n),
        gamma1: Vec::with_capacity(n),
        gamma2: Vec::with_capacity(n),
        delta1: Vec::with_capacity(n),
        delta2: Vec::with_capacity(n),
        phi1: Vec::new(),
        phi2: Vec::new(),
        phi: Vec::new(),
        dh1dx: dh,
        dv1dx: dv,
    };
    for i in 0..n {
        let (h, v) = (base.h[i], base.v[i]);
        let (l1, l2) = eigenvalues(g, h, v).map_err(|e| match e {
            Error::Regime { detail, .. } => Error::Regime {
                x: grid.x(i),
                detail,
            },
            e => e,
        })?;
        f.lambda1.push(l1);
        f.lambda2.push(l2);
        let s = sqrt(g / h) * f.dh1dx[i];
        let vx = f.dv1dx[i];
        let a = k * v / h;
        let b = k * v * v / (2.0 * h * h) * sqrt(h / g);
        f.gamma1.push(0.75 * s + 0.75 * vx + a - b);
        f.gamma2.push(0.25 * s + 0.25 * vx + a + b);
        f.delta1.push(-0.25 * s + 0.25 * vx + a - b);
        f.delta2.push(-0.75 * s + 0.75 * vx + a + b);
    }
    let (p1, p2, p) = phi_weights(&f);
    f.phi1 = p1;
    f.phi2 = p2;
    f.phi = p;
    Ok(f)
}

/// `phi1 = exp(∫ gamma1/lambda1)`, `phi2 = exp(-∫ delta2/lambda2)` and their
/// ratio, integrated from `x = 0`.
pub fn phi_weights(fields: &RiemannFields) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dx = fields.grid.dx;
    let r1: Vec<f64> = fields
        .gamma1
        .iter()
        .zip(&fields.lambda1)
        .map(|(g, l)| g / l)
        .collect();
    let r2: Vec<f64> = fields
        .delta2
        .iter()
        .zip(&fields.lambda2)
        .map(|(d, l)| -d / l)
        .collect();
    let phi1: Vec<f64> = cumulative_integral(&r1, dx).into_iter().map(exp).collect();
    let phi2: Vec<f64> = cumulative_integral(&r2, dx).into_iter().map(exp).collect();
    let phi = phi1.iter().zip(&phi2).map(|(a, b)| a / b).collect();
    (phi1, phi2, phi)
}

/// `u1 = v + sqrt(g/H1) h`, `u2 = v - sqrt(g/H1) h` with `(h, v)` the
/// deviation of `state` from `base`.
pub fn to_riemann(g: f64, state: &Profile, base: &Profile) -> Result<(Vec<f64>, Vec<f64>)> {
    if !state.same_grid(base) {
        return Err(Error::GridMismatch);
    }
    let n = base.grid.n;
    let mut u1 = Vec::with_capacity(n);
    let mut u2 = Vec::with_capacity(n);
    for i in 0..n {
        let h = state.h[i] - base.h[i];
        let v = state.v[i] - base.v[i];
        let c = sqrt(g / base.h[i]);
        u1.push(v + c * h);
        u2.push(v - c * h);
    }
    Ok((u1, u2))
}

/// Inverse of [`to_riemann`]: returns the deviations `(h, v)`.
pub fn from_riemann(
    g: f64,
    u1: &[f64],
    u2: &[f64],
    base: &Profile,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if u1.len() != base.grid.n || u2.len() != base.grid.n {
        return Err(Error::GridMismatch);
    }
    let h = u1
        .iter()
        .zip(u2)
        .zip(&base.h)
        .map(|((a, b), h1)| 0.5 * (a - b) * sqrt(h1 / g))
        .collect();
    let v = u1.iter().zip(u2).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((h, v))
}
