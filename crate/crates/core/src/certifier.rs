//! Lyapunov stability certificate for a pair of PI gains.
//!
//! The pipeline is: gain gate, boundary reflection coefficients, the
//! Riccati-type auxiliary function `chi`, the weights `f1`, `f2`, the
//! interior condition (c3), the boundary conditions (c1), (c2) with the
//! choice of `q`, and finally a search for the exponential weight `mu`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::math::{exp, sqrt};
use crate::numerics::{d1, lagrange4};
use crate::riemann::{coupling_coefficients, RiemannFields};
use crate::steady::Profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Branch {
    /// `k_p > -1` and `k_I > 0`.
    Branch1,
    /// `k_p < threshold2` and `k_I < 0`.
    Branch2,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GainCheck {
    pub branch: Branch,
    /// `k_p + 1`.
    pub margin_kp: f64,
    pub k_i: f64,
    /// `threshold2 - k_p`; positive when `k_p` is below the threshold.
    pub margin2: f64,
    /// `-1 - (g H1(L) - V1(L)^2) / (v_G V1(L))`.
    pub threshold2: f64,
}

pub fn check_gains(cfg: &ChannelConfig, base: &Profile, k_p: f64, k_i: f64) -> Result<GainCheck> {
    let n = base.grid.n;
    let (h, v) = (base.h[n - 1], base.v[n - 1]);
    if !(v > 0.0) {
        return Err(Error::Domain {
            what: "downstream velocity",
            value: v,
        });
    }
    if !(h > 0.0) {
        return Err(Error::Domain {
            what: "downstream height",
            value: h,
        });
    }
    let threshold2 = -1.0 - (cfg.g * h - v * v) / (cfg.v_g * v);
    let branch = if k_p > -1.0 && k_i > 0.0 {
        Branch::Branch1
    } else if k_p < threshold2 && k_i < 0.0 {
        Branch::Branch2
    } else {
        Branch::Rejected
    };
    Ok(GainCheck {
        branch,
        margin_kp: k_p + 1.0,
        k_i,
        margin2: threshold2 - k_p,
        threshold2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

pub fn boundary_coefficients(
    v_g: f64,
    fields: &RiemannFields,
    k_p: f64,
    k_i: f64,
) -> Result<BoundaryCoefficients> {
    let n = fields.grid.n;
    let gate = v_g * (1.0 + k_p);
    let den = fields.lambda2[n - 1] + gate;
    let scale = fields.lambda2[n - 1].abs() + gate.abs();
    if !(den.abs() > 1e-12 * scale) {
        return Err(Error::Domain {
            what: "gate gain v_G(1 + k_p) + lambda2(L)",
            value: den,
        });
    }
    Ok(BoundaryCoefficients {
        k1: -(fields.lambda1[n - 1] - gate) / den,
        k2: -fields.lambda2[0] / fields.lambda1[0],
        k3: 2.0 * v_g * k_i * sqrt(fields.g / fields.h1[n - 1]) / den,
    })
}

/// Extra term of the `chi` equation coming from a time-varying base,
/// `(phi / lambda1^2) sqrt(g/H1) dH1/dt`.
fn time_term(fields: &RiemannFields, dt_h1: &[f64], i: usize) -> f64 {
    let l1 = fields.lambda1[i];
    fields.phi[i] / (l1 * l1) * sqrt(fields.g / fields.h1[i]) * dt_h1[i]
}

/// Coefficients of `chi' = a(x) + b(x) chi^2` (without `epsilon`).
fn chi_coefficients(fields: &RiemannFields, dt_h1: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = fields.grid.n;
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for i in 0..n {
        a.push(fields.phi[i] * fields.gamma2[i] / fields.lambda1[i] + time_term(fields, dt_h1, i));
        b.push(fields.delta1[i] / (fields.phi[i] * fields.lambda2[i]));
    }
    (a, b)
}

fn check_len(fields: &RiemannFields, v: &[f64]) -> Result<()> {
    if v.len() == fields.grid.n {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Integrates the `chi_epsilon` equation from `x = 0` with RK4; field values
/// between nodes come from cubic interpolation.
pub fn chi_solve(fields: &RiemannFields, dt_h1: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    check_len(fields, dt_h1)?;
    if !(epsilon >= 0.0) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
        });
    }
    let n = fields.grid.n;
    let dx = fields.grid.dx;
    let (a, b) = chi_coefficients(fields, dt_h1);
    let rhs = |x: f64, chi: f64| {
        lagrange4(&a, 0.0, dx, x) + lagrange4(&b, 0.0, dx, x) * chi * chi + epsilon
    };
    let mut chi = Vec::with_capacity(n);
    chi.push(fields.lambda2[0] / fields.lambda1[0] + epsilon);
    for i in 0..n - 1 {
        let x = i as f64 * dx;
        let y = chi[i];
        // Nodes use the tabulated values directly.
        let k1 = a[i] + b[i] * y * y + epsilon;
        let k2 = rhs(x + 0.5 * dx, y + 0.5 * dx * k1);
        let k3 = rhs(x + 0.5 * dx, y + 0.5 * dx * k2);
        let y4 = y + dx * k3;
        let k4 = a[i + 1] + b[i + 1] * y4 * y4 + epsilon;
        let next = y + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(next.abs() <= 1e6) {
            return Err(Error::CertificateInfeasible(format!(
                "chi blows up before x = {}",
                fields.grid.x(i + 1)
            )));
        }
        chi.push(next);
    }
    Ok(chi)
}

/// Right-hand side of the `chi` equation at the nodes.
pub fn chi_derivative(
    fields: &RiemannFields,
    dt_h1: &[f64],
    chi: &[f64],
    epsilon: f64,
) -> Vec<f64> {
    let (a, b) = chi_coefficients(fields, dt_h1);
    (0..fields.grid.n)
        .map(|i| a[i] + b[i] * chi[i] * chi[i] + epsilon)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Lemma2Report {
    /// Max over nodes of `|chi0' - rhs(chi0)|` with `chi0 = lambda2 phi / lambda1`.
    pub residual: f64,
    /// Min over nodes of the bracket `phi gamma2/lambda1 + delta1 chi0^2/(phi lambda2)`
    /// plus the time term.
    pub min_bracket: f64,
    pub positive: bool,
}

/// Checks that `lambda2 phi / lambda1` solves the `epsilon = 0` equation.
pub fn verify_lemma2(fields: &RiemannFields, dt_h1: &[f64]) -> Result<Lemma2Report> {
    check_len(fields, dt_h1)?;
    let n = fields.grid.n;
    let chi0: Vec<f64> = (0..n)
        .map(|i| fields.lambda2[i] * fields.phi[i] / fields.lambda1[i])
        .collect();
    let dchi = d1(&chi0, fields.grid.dx);
    let rhs = chi_derivative(fields, dt_h1, &chi0, 0.0);
    let mut residual = 0.0f64;
    let mut min_bracket = f64::INFINITY;
    for i in 0..n {
        residual = residual.max((dchi[i] - rhs[i]).abs());
        min_bracket = min_bracket.min(rhs[i]);
    }
    Ok(Lemma2Report {
        residual,
        min_bracket,
        positive: min_bracket > 0.0,
    })
}

/// `f1 = phi1^2 / (lambda1 chi)`, `f2 = phi2^2 chi / lambda2`.
pub fn build_weights(fields: &RiemannFields, chi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(fields, chi)?;
    if let Some(i) = chi.iter().position(|c| !(*c > 0.0)) {
        return Err(Error::CertificateInfeasible(format!(
            "chi is not positive at x = {}",
            fields.grid.x(i)
        )));
    }
    let n = fields.grid.n;
    let f1 = (0..n)
        .map(|i| fields.phi1[i] * fields.phi1[i] / (fields.lambda1[i] * chi[i]))
        .collect();
    let f2 = (0..n)
        .map(|i| fields.phi2[i] * fields.phi2[i] * chi[i] / fields.lambda2[i])
        .collect();
    Ok((f1, f2))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InteriorCheck {
    /// `a1 = (-lambda1 f1)_x + 2 gamma1 f1 - dt f1` at every node.
    pub a1: Vec<f64>,
    /// `a2 = (lambda2 f2)_x + 2 delta2 f2 - dt f2` at every node.
    pub a2: Vec<f64>,
    pub c3a: f64,
    pub c3b: f64,
    /// Largest disagreement between the finite-difference `a1`, `a2` and
    /// their closed forms in terms of `chi'`.
    pub identity_residual: f64,
}

pub fn check_interior(
    fields: &RiemannFields,
    f1: &[f64],
    f2: &[f64],
    dt_f1: &[f64],
    dt_f2: &[f64],
    chi: &[f64],
    dchi: &[f64],
) -> Result<InteriorCheck> {
    for v in [f1, f2, dt_f1, dt_f2, chi, dchi] {
        check_len(fields, v)?;
    }
    let n = fields.grid.n;
    let dx = fields.grid.dx;
    let m1: Vec<f64> = (0..n).map(|i| -fields.lambda1[i] * f1[i]).collect();
    let m2: Vec<f64> = (0..n).map(|i| fields.lambda2[i] * f2[i]).collect();
    let dm1 = d1(&m1, dx);
    let dm2 = d1(&m2, dx);
    let mut a1 = Vec::with_capacity(n);
    let mut a2 = Vec::with_capacity(n);
    let mut c3a = f64::INFINITY;
    let mut c3b = f64::INFINITY;
    let mut identity_residual = 0.0f64;
    for i in 0..n {
        let s1 = dm1[i] + 2.0 * fields.gamma1[i] * f1[i];
        let s2 = dm2[i] + 2.0 * fields.delta2[i] * f2[i];
        let p1 = fields.phi1[i] * fields.phi1[i];
        let p2 = fields.phi2[i] * fields.phi2[i];
        identity_residual = identity_residual
            .max((s1 - p1 * dchi[i] / (chi[i] * chi[i])).abs())
            .max((s2 - p2 * dchi[i]).abs());
        let x1 = s1 - dt_f1[i];
        let x2 = s2 - dt_f2[i];
        let cross = fields.gamma2[i] * f1[i] + fields.delta1[i] * f2[i];
        c3a = c3a.min(x1);
        c3b = c3b.min(x1 * x2 - cross * cross);
        a1.push(x1);
        a2.push(x2);
    }
    Ok(InteriorCheck {
        a1,
        a2,
        c3a,
        c3b,
        identity_residual,
    })
}

/// `h(X) = (X - k1)^2 - X (k1 - 1)^2`, whose roots are `k1^2` and `1`.
pub fn discriminant_factor(x: f64, k1: f64) -> f64 {
    (x - k1) * (x - k1) - x * (k1 - 1.0) * (k1 - 1.0)
}

/// `P(q)`, the left-hand side of (c2b), at the downstream end.
pub fn boundary_polynomial(
    q: f64,
    h_l: f64,
    g: f64,
    l1f1: f64,
    l2f2: f64,
    bc: &BoundaryCoefficients,
) -> f64 {
    let s = sqrt(h_l / g);
    let (k1, k3) = (bc.k1, bc.k3);
    -(q * q / 4.0) * (h_l / g) * (k1 - 1.0) * (k1 - 1.0) + q * s * k3 * (l1f1 - l2f2 * k1)
        - l1f1 * l2f2 * k3 * k3
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryCheck {
    pub c1: f64,
    pub c2a: f64,
    /// `P(q)` at the selected `q`.
    pub c2b: f64,
    pub discriminant: f64,
    /// Selected integral weight; `None` when no positive `q` makes `P > 0`.
    pub q: Option<f64>,
}

pub fn check_boundary_and_select_q(
    fields: &RiemannFields,
    f1: &[f64],
    f2: &[f64],
    bc: &BoundaryCoefficients,
) -> Result<BoundaryCheck> {
    check_len(fields, f1)?;
    check_len(fields, f2)?;
    let n = fields.grid.n;
    let g = fields.g;
    let l1f1_0 = fields.lambda1[0] * f1[0];
    let l2f2_0 = fields.lambda2[0] * f2[0];
    let c1 = l2f2_0 / l1f1_0 - bc.k2 * bc.k2;
    let l1f1 = fields.lambda1[n - 1] * f1[n - 1];
    let l2f2 = fields.lambda2[n - 1] * f2[n - 1];
    let h_l = fields.h1[n - 1];
    let c2a = l1f1 / l2f2 - bc.k1 * bc.k1;
    let ratio = l1f1 / l2f2;
    let discriminant = (h_l / g) * bc.k3 * bc.k3 * l2f2 * l2f2 * discriminant_factor(ratio, bc.k1);
    let slope = sqrt(h_l / g) * bc.k3 * (l1f1 - l2f2 * bc.k1);
    let quad = (bc.k1 - 1.0) * (bc.k1 - 1.0);
    let q = if quad > 1e-24 {
        let vertex = 2.0 * sqrt(g / h_l) * bc.k3 * (l1f1 - l2f2 * bc.k1) / quad;
        (vertex > 0.0).then_some(vertex)
    } else if slope > 0.0 {
        // P is linear; twice its root leaves a margin equal to the constant term.
        Some(2.0 * l1f1 * l2f2 * bc.k3 * bc.k3 / slope)
    } else {
        None
    };
    let c2b = match q {
        Some(q) => boundary_polynomial(q, h_l, g, l1f1, l2f2, bc),
        None => boundary_polynomial(0.0, h_l, g, l1f1, l2f2, bc).min(-0.0),
    };
    Ok(BoundaryCheck {
        c1,
        c2a,
        c2b,
        discriminant,
        q,
    })
}

/// Positive definiteness of the `mu`-weighted boundary and interior forms.
fn mu_admissible(
    fields: &RiemannFields,
    f1: &[f64],
    f2: &[f64],
    interior: &InteriorCheck,
    bc: &BoundaryCoefficients,
    q: f64,
    mu: f64,
) -> bool {
    let n = fields.grid.n;
    let len = fields.grid.length;
    let (em, ep) = (exp(-mu * len), exp(mu * len));
    let l1f1 = fields.lambda1[n - 1] * f1[n - 1];
    let l2f2 = fields.lambda2[n - 1] * f2[n - 1];
    let s = sqrt(fields.h1[n - 1] / fields.g);
    let min_speed = fields
        .lambda1
        .iter()
        .chain(&fields.lambda2)
        .fold(f64::INFINITY, |m, v| m.min(*v));
    let xx = l1f1 * em - l2f2 * ep * bc.k1 * bc.k1;
    let yy = q * s * bc.k3 - l2f2 * ep * bc.k3 * bc.k3 - mu * min_speed * q;
    let xy = 2.0 * l2f2 * ep * bc.k3 * bc.k1 - q * s * (bc.k1 - 1.0);
    if !(xx > 0.0 && yy > 0.0 && 4.0 * xx * yy - xy * xy > 0.0) {
        return false;
    }
    let at0 = fields.lambda2[0] * f2[0] - fields.lambda1[0] * f1[0] * bc.k2 * bc.k2;
    if !(at0 > 0.0) {
        return false;
    }
    (0..n).all(|i| {
        let x = fields.grid.x(i);
        let (em, ep) = (exp(-mu * x), exp(mu * x));
        let a1 = em * (interior.a1[i] + mu * fields.lambda1[i] * f1[i]);
        let a2 = ep * (interior.a2[i] + mu * fields.lambda2[i] * f2[i]);
        let cross = fields.gamma2[i] * f1[i] * em + fields.delta1[i] * f2[i] * ep;
        a1 > 0.0 && a1 * a2 - cross * cross > 0.0
    })
}

/// Optional inputs to [`certify`]. Time derivatives default to zero (steady
/// base).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CertifyOptions {
    /// Defaults to `1e-2 lambda2(0) / lambda1(0)`.
    pub epsilon: Option<f64>,
    /// Starting value of the halving search; defaults to `0.5 / L`.
    pub mu: Option<f64>,
    pub dt_h1: Option<Vec<f64>>,
    pub dt_f1: Option<Vec<f64>>,
    pub dt_f2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Checks {
    pub c1: Option<f64>,
    pub c2a: Option<f64>,
    pub c2b: Option<f64>,
    pub c3a: Option<f64>,
    pub c3b: Option<f64>,
}

impl Checks {
    pub fn named(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("c1", self.c1),
            ("c2a", self.c2a),
            ("c2b", self.c2b),
            ("c3a", self.c3a),
            ("c3b", self.c3b),
        ]
    }

    fn all_positive(&self) -> bool {
        self.named()
            .iter()
            .all(|(_, m)| matches!(m, Some(v) if *v > 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    pub k_p: f64,
    pub k_i: f64,
    pub gains: GainCheck,
    pub coefficients: Option<BoundaryCoefficients>,
    pub fields: RiemannFields,
    pub epsilon: f64,
    pub chi: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub q: f64,
    pub mu: f64,
    pub checks: Checks,
    pub discriminant: Option<f64>,
    pub identity_residual: Option<f64>,
    pub valid: bool,
    pub diagnostic: Option<String>,
}

impl Certificate {
    fn invalid(mut self, why: impl Into<String>) -> Self {
        self.valid = false;
        self.diagnostic = Some(why.into());
        self
    }
}

/// Runs the whole pipeline. Only a base that fails the regime check is an
/// error; every later failure yields an invalid certificate with a
/// diagnostic.
///
/// Without an explicit `epsilon` the default `1e-2 lambda2(0)/lambda1(0)` is
/// tried first and halved (up to 10 times) while the certificate fails, since
/// the conditions only ask for `epsilon` to be small enough.
pub fn certify(
    cfg: &ChannelConfig,
    base: &Profile,
    k_p: f64,
    k_i: f64,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let fields = coupling_coefficients(cfg, base)?;
    let gains = check_gains(cfg, base, k_p, k_i)?;
    if let Some(eps) = opts.epsilon {
        return Ok(certify_fixed(cfg, fields, gains, k_p, k_i, eps, opts));
    }
    let mut eps = 1e-2 * fields.lambda2[0] / fields.lambda1[0];
    let first = certify_fixed(cfg, fields.clone(), gains, k_p, k_i, eps, opts);
    if first.valid || gains.branch == Branch::Rejected {
        return Ok(first);
    }
    for _ in 0..10 {
        eps *= 0.5;
        let cert = certify_fixed(cfg, fields.clone(), gains, k_p, k_i, eps, opts);
        if cert.valid {
            return Ok(cert);
        }
    }
    Ok(first)
}

fn certify_fixed(
    cfg: &ChannelConfig,
    fields: RiemannFields,
    gains: GainCheck,
    k_p: f64,
    k_i: f64,
    epsilon: f64,
    opts: &CertifyOptions,
) -> Certificate {
    let n = fields.grid.n;
    let zeros = alloc::vec![0.0; n];
    let dt_h1 = opts.dt_h1.as_deref().unwrap_or(&zeros);
    let dt_f1 = opts.dt_f1.as_deref().unwrap_or(&zeros);
    let dt_f2 = opts.dt_f2.as_deref().unwrap_or(&zeros);
    let mu0 = opts.mu.unwrap_or(0.5 / cfg.length);

    let mut cert = Certificate {
        k_p,
        k_i,
        gains,
        coefficients: None,
        fields,
        epsilon,
        chi: Vec::new(),
        f1: Vec::new(),
        f2: Vec::new(),
        q: 0.0,
        mu: 0.0,
        checks: Checks {
            c1: None,
            c2a: None,
            c2b: None,
            c3a: None,
            c3b: None,
        },
        discriminant: None,
        identity_residual: None,
        valid: false,
        diagnostic: None,
    };
    if gains.branch == Branch::Rejected {
        return cert.invalid("gains satisfy neither branch of the gain condition");
    }
    let bc = match boundary_coefficients(cfg.v_g, &cert.fields, k_p, k_i) {
        Ok(bc) => bc,
        Err(e) => return cert.invalid(format!("boundary coefficients: {e}")),
    };
    cert.coefficients = Some(bc);
    let chi = match chi_solve(&cert.fields, dt_h1, epsilon) {
        Ok(c) => c,
        Err(e) => return cert.invalid(format!("chi: {e}")),
    };
    let (f1, f2) = match build_weights(&cert.fields, &chi) {
        Ok(w) => w,
        Err(e) => {
            cert.chi = chi;
            return cert.invalid(format!("weights: {e}"));
        }
    };
    let dchi = chi_derivative(&cert.fields, dt_h1, &chi, epsilon);
    let interior = match check_interior(&cert.fields, &f1, &f2, dt_f1, dt_f2, &chi, &dchi) {
        Ok(i) => i,
        Err(e) => return cert.invalid(format!("interior: {e}")),
    };
    let boundary = match check_boundary_and_select_q(&cert.fields, &f1, &f2, &bc) {
        Ok(b) => b,
        Err(e) => return cert.invalid(format!("boundary: {e}")),
    };
    cert.checks = Checks {
        c1: Some(boundary.c1),
        c2a: Some(boundary.c2a),
        c2b: Some(boundary.c2b),
        c3a: Some(interior.c3a),
        c3b: Some(interior.c3b),
    };
    cert.discriminant = Some(boundary.discriminant);
    cert.identity_residual = Some(interior.identity_residual);
    cert.chi = chi;
    cert.f1 = f1;
    cert.f2 = f2;
    let Some(q) = boundary.q else {
        return cert.invalid("no positive q makes the downstream form positive");
    };
    cert.q = q;
    if !cert.checks.all_positive() {
        let failed: Vec<&str> = cert
            .checks
            .named()
            .iter()
            .filter(|(_, m)| !matches!(m, Some(v) if *v > 0.0))
            .map(|(name, _)| *name)
            .collect();
        return cert.invalid(format!("conditions not met: {}", failed.join(", ")));
    }
    let mut mu = mu0;
    for _ in 0..=20 {
        if mu_admissible(&cert.fields, &cert.f1, &cert.f2, &interior, &bc, q, mu) {
            cert.mu = mu;
            cert.valid = true;
            return cert;
        }
        mu *= 0.5;
    }
    cert.invalid("no admissible mu found by halving")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Grid, SlopeSpec, TabulatedSlope};
    use crate::steady::{solve_steady, Role};
    use core::f64::consts::PI;

    fn channel(k: f64, slope: SlopeSpec) -> ChannelConfig {
        ChannelConfig::new(9.81, k, slope, 10.0, 1.0, 1.0, 10.0).unwrap()
    }

    fn flat() -> SlopeSpec {
        SlopeSpec::Constant { c0: 0.0 }
    }

    fn sine_slope() -> SlopeSpec {
        SlopeSpec::Tabulated(
            TabulatedSlope::sample(10.0, 1025, |x| 0.01 * (PI * x / 10.0).sin()).unwrap(),
        )
    }

    fn uniform(n: usize, h: f64, v: f64) -> Profile {
        Profile::uniform(Grid::new(n, 10.0).unwrap(), h, v, Role::Steady)
    }

    #[test]
    fn gain_gate_examples() {
        let c = channel(0.0, flat());
        let base = uniform(11, 2.0, 1.0);
        assert_eq!(
            check_gains(&c, &base, 1.0, 0.5).unwrap().branch,
            Branch::Branch1
        );
        let g = check_gains(&c, &base, -20.0, -0.1).unwrap();
        assert_eq!(g.branch, Branch::Branch2);
        assert!((g.threshold2 + 19.62).abs() < 1e-12);
        assert_eq!(
            check_gains(&c, &base, -2.0, 0.5).unwrap().branch,
            Branch::Rejected
        );
        assert!(check_gains(&c, &uniform(11, 2.0, 0.0), 1.0, 0.5).is_err());
    }

    #[test]
    fn boundary_coefficient_examples() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(11, 2.0, 1.0)).unwrap();
        // v_G (1 + k_p) = V(L) = 1 makes the reflection exactly -1.
        let bc = boundary_coefficients(1.0, &f, 0.0, 0.3).unwrap();
        assert_eq!(bc.k1, -1.0);
        assert!((bc.k2 + 3.429447 / 5.429447).abs() < 1e-6);
        assert_eq!(boundary_coefficients(1.0, &f, 1.0, 0.0).unwrap().k3, 0.0);
        let kp = -1.0 - f.lambda2[10];
        assert!(boundary_coefficients(1.0, &f, kp, 0.1).is_err());
    }

    #[test]
    fn chi_uniform_frictionless() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(41, 2.0, 1.0)).unwrap();
        let z = vec![0.0; 41];
        let chi = chi_solve(&f, &z, 0.0).unwrap();
        let r = f.lambda2[0] / f.lambda1[0];
        assert!(chi.iter().all(|c| *c == r));
        // With epsilon > 0 the solution is linear: chi = r + eps (1 + x).
        let chi = chi_solve(&f, &z, 0.01).unwrap();
        let fine = chi_solve(
            &coupling_coefficients(&c, &uniform(401, 2.0, 1.0)).unwrap(),
            &vec![0.0; 401],
            0.01,
        )
        .unwrap();
        assert!((chi[40] - fine[400]).abs() < 1e-10);
        assert!((chi[40] - (r + 0.01 * 11.0)).abs() < 1e-12);
    }

    #[test]
    fn chi_matches_closed_form_on_frictional_base() {
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        let f = coupling_coefficients(&c, &base).unwrap();
        let chi = chi_solve(&f, &vec![0.0; 401], 0.0).unwrap();
        for i in 0..401 {
            let closed = f.lambda2[i] * f.phi[i] / f.lambda1[i];
            assert!(
                (chi[i] - closed).abs() < 1e-8,
                "{i}: {} vs {closed}",
                chi[i]
            );
        }
    }

    #[test]
    fn chi_blow_up_is_infeasible() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(41, 2.0, 1.0)).unwrap();
        // A large quadratic coefficient makes the Riccati equation blow up.
        let mut g = f.clone();
        g.delta1 = vec![50.0; 41];
        let e = chi_solve(&g, &vec![0.0; 41], 0.0).unwrap_err();
        assert!(matches!(e, Error::CertificateInfeasible(_)));
    }

    fn chi_residual(n: usize) -> f64 {
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(n, 10.0).unwrap()).unwrap();
        let f = coupling_coefficients(&c, &base).unwrap();
        verify_lemma2(&f, &vec![0.0; n]).unwrap().residual
    }

    #[test]
    fn chi_equation_examples() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(41, 2.0, 1.0)).unwrap();
        assert!(verify_lemma2(&f, &vec![0.0; 41]).unwrap().residual < 1e-12);
        let r = chi_residual(401);
        assert!(r < 1e-8, "{r}");
        let order = (chi_residual(101) / chi_residual(201)).log2();
        assert!(order > 3.8, "order {order}");
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        let rep =
            verify_lemma2(&coupling_coefficients(&c, &base).unwrap(), &vec![0.0; 401]).unwrap();
        assert!(rep.positive && rep.min_bracket > 0.0);
    }

    #[test]
    fn weights_examples() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(21, 2.0, 1.0)).unwrap();
        let chi = chi_solve(&f, &vec![0.0; 21], 0.0).unwrap();
        let (f1, f2) = build_weights(&f, &chi).unwrap();
        for i in 0..21 {
            assert!((f1[i] - 1.0 / f.lambda2[i]).abs() < 1e-15);
            assert!((f2[i] - 1.0 / f.lambda1[i]).abs() < 1e-15);
        }
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(201, 10.0).unwrap()).unwrap();
        let f = coupling_coefficients(&c, &base).unwrap();
        let chi = chi_solve(&f, &vec![0.0; 201], 0.01).unwrap();
        let (f1, f2) = build_weights(&f, &chi).unwrap();
        for i in 0..201 {
            assert!(f1[i] > 0.0 && f2[i] > 0.0);
            let prod = f1[i] * f2[i] * f.lambda1[i] * f.lambda2[i];
            let expect = (f.phi1[i] * f.phi2[i]).powi(2);
            assert!((prod / expect - 1.0).abs() < 1e-14);
        }
        let mut bad = chi.clone();
        bad[5] = -1.0;
        assert!(build_weights(&f, &bad).is_err());
    }

    #[test]
    fn interior_examples() {
        let c = channel(0.0, flat());
        let f = coupling_coefficients(&c, &uniform(401, 2.0, 1.0)).unwrap();
        let z = vec![0.0; 401];
        let eps = 0.01;
        let chi = chi_solve(&f, &z, eps).unwrap();
        let dchi = chi_derivative(&f, &z, &chi, eps);
        let (f1, f2) = build_weights(&f, &chi).unwrap();
        let ic = check_interior(&f, &f1, &f2, &z, &z, &chi, &dchi).unwrap();
        for i in 0..401 {
            assert!((ic.a1[i] - eps / (chi[i] * chi[i])).abs() < 1e-10);
            assert!((ic.a2[i] - eps).abs() < 1e-10);
        }
        assert!(ic.c3a > 0.0 && ic.c3b > 0.0);
        assert!(ic.identity_residual < 1e-8);

        // epsilon = 0: the determinant condition degenerates to zero.
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(401, 10.0).unwrap()).unwrap();
        let f = coupling_coefficients(&c, &base).unwrap();
        let z = vec![0.0; 401];
        let chi = chi_solve(&f, &z, 0.0).unwrap();
        let dchi = chi_derivative(&f, &z, &chi, 0.0);
        let (f1, f2) = build_weights(&f, &chi).unwrap();
        let ic = check_interior(&f, &f1, &f2, &z, &z, &chi, &dchi).unwrap();
        let worst = ic
            .a1
            .iter()
            .zip(&ic.a2)
            .enumerate()
            .map(|(i, (a, b))| {
                let cross = f.gamma2[i] * f1[i] + f.delta1[i] * f2[i];
                (a * b - cross * cross).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
        assert!(ic.identity_residual < 1e-8, "{}", ic.identity_residual);
    }

    #[test]
    fn boundary_examples_and_polynomial() {
        let c = channel(0.0, flat());
        let base = uniform(41, 2.0, 1.0);
        let cert = certify(
            &c,
            &base,
            1.0,
            0.1,
            &CertifyOptions {
                epsilon: Some(0.01),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(cert.valid, "{:?}", cert.diagnostic);
        let bc = cert.coefficients.unwrap();
        let n = 41;
        let f = &cert.fields;
        let p = boundary_polynomial(
            cert.q,
            2.0,
            9.81,
            f.lambda1[n - 1] * cert.f1[n - 1],
            f.lambda2[n - 1] * cert.f2[n - 1],
            &bc,
        );
        assert!(p > 0.0 && cert.q > 0.0);
        assert!((p - cert.checks.c2b.unwrap()).abs() < 1e-15);

        for k1 in [2.5f64, 0.3, -1.7] {
            let x = (k1 * k1).max(1.0);
            assert!(discriminant_factor(x, k1).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_integral_action_is_infeasible() {
        let c = channel(0.0, flat());
        let base = uniform(41, 2.0, 1.0);
        let f = coupling_coefficients(&c, &base).unwrap();
        let z = vec![0.0; 41];
        let chi = chi_solve(&f, &z, 0.01).unwrap();
        let (f1, f2) = build_weights(&f, &chi).unwrap();
        let bc = boundary_coefficients(1.0, &f, 1.0, 1e-12).unwrap();
        let b = check_boundary_and_select_q(&f, &f1, &f2, &bc).unwrap();
        assert!(b.c2b <= 1e-20);
        let bc = boundary_coefficients(1.0, &f, 1.0, 0.0).unwrap();
        let b = check_boundary_and_select_q(&f, &f1, &f2, &bc).unwrap();
        assert!(b.q.is_none() && !(b.c2b > 0.0));
    }

    #[test]
    fn certify_end_to_end() {
        let c = channel(0.0, flat());
        let base = uniform(101, 2.0, 1.0);
        let cert = certify(&c, &base, 1.0, 0.1, &CertifyOptions::default()).unwrap();
        assert!(cert.valid && cert.mu > 0.0);
        let cert = certify(&c, &base, -2.0, 0.5, &CertifyOptions::default()).unwrap();
        assert!(!cert.valid);
        assert_eq!(cert.gains.branch, Branch::Rejected);
        let cert = certify(&c, &base, -20.0, -0.1, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.gains.branch, Branch::Branch2);
        assert!(cert.valid, "{:?}", cert.diagnostic);
        let bc = cert.coefficients.unwrap();
        assert!(bc.k3 > 0.0 && bc.k1 > 1.0);
    }

    #[test]
    fn epsilon_monotone_margins() {
        let c = channel(0.1, sine_slope());
        let base = solve_steady(&c, 2.0, 2.0, Grid::new(201, 10.0).unwrap()).unwrap();
        let mut prev: Option<(f64, f64)> = None;
        for eps in [0.0, 0.002, 0.005, 0.01, 0.02] {
            let cert = certify(
                &c,
                &base,
                1.0,
                0.1,
                &CertifyOptions {
                    epsilon: Some(eps),
                    ..Default::default()
                },
            )
            .unwrap();
            let now = (cert.checks.c1.unwrap(), cert.checks.c3a.unwrap());
            if let Some(p) = prev {
                assert!(
                    now.0 >= p.0 && now.1 >= p.1 - 1e-12,
                    "{eps}: {now:?} < {p:?}"
                );
            }
            prev = Some(now);
        }
    }

    #[test]
    fn certificate_grid_independent() {
        let c = channel(0.1, sine_slope());
        let run = |n| {
            let base = solve_steady(&c, 2.0, 2.0, Grid::new(n, 10.0).unwrap()).unwrap();
            certify(&c, &base, 1.0, 0.1, &CertifyOptions::default()).unwrap()
        };
        let (a, b) = (run(201), run(401));
        assert!(a.valid && b.valid);
        for ((name, x), (_, y)) in a.checks.named().iter().zip(b.checks.named().iter()) {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!(((x - y) / y).abs() < 0.1, "{name}: {x} vs {y}");
        }
    }
}
