//! steady profile -> certificate -> simulations -> analysis -> assertions.

use serde::Serialize;
use stvenant_core::analysis::{
    gain_ratio, iss_check, DecayFit, IssReport, NormObserver, NormSeries, Reference,
};
use stvenant_core::certifier::{certify, Branch, Certificate, CertifyOptions, Checks};
use stvenant_core::channel::{validate_regime, ChannelConfig};
use stvenant_core::pde::{
    discrete_steady, run, ControllerSpec, ControllerVariant, RunOptions, Scheme, SimState,
    TrajectoryRecord,
};
use stvenant_core::riemann::eigenvalues;
use stvenant_core::steady::{solve_steady, InflowSignal, Profile};

use crate::config::{Perturbation, ScenarioSpec};
use crate::error::LabError;

/// One simulated trajectory with its deviation series.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    /// `main`, `companion`, `pure_pi` or `target`.
    pub label: &'static str,
    pub record: TrajectoryRecord,
    pub series: NormSeries,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub spec: ScenarioSpec,
    pub cfg: ChannelConfig,
    /// Steady profile the certificate is built on.
    pub base: Profile,
    pub scheme: Option<Scheme>,
    pub certificate: Option<Certificate>,
    pub runs: Vec<RunArtifact>,
    pub summary: Summary,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    /// `Err(Assertion)` listing the failed checks, if any.
    pub fn status(&self) -> Result<(), LabError> {
        let failed: Vec<String> = self
            .summary
            .assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| format!("{} (expected {}, got {})", a.name, a.expected, a.actual))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(LabError::Assertion(failed))
        }
    }

    pub fn run(&self, label: &str) -> Option<&RunArtifact> {
        self.runs.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub valid: bool,
    pub branch: Branch,
    pub threshold2: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub q: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub checks: Checks,
    pub discriminant: Option<f64>,
    pub diagnostic: Option<String>,
}

impl From<&Certificate> for CertificateSummary {
    fn from(c: &Certificate) -> Self {
        CertificateSummary {
            valid: c.valid,
            branch: c.gains.branch,
            threshold2: c.gains.threshold2,
            epsilon: c.epsilon,
            mu: c.mu,
            q: c.q,
            k1: c.coefficients.map(|k| k.k1),
            k2: c.coefficients.map(|k| k.k2),
            k3: c.coefficients.map(|k| k.k3),
            checks: c.checks.clone(),
            discriminant: c.discriminant,
            diagnostic: c.diagnostic.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Tracking {
    /// Sup of the deviation from the target trajectory after settling.
    pub deviation_sup: f64,
    /// Sup of the pure-PI deviation from the quasi-static family over the
    /// same window.
    pub baseline_sup: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Summary {
    pub name: String,
    pub transit_time: f64,
    pub t0: f64,
    pub horizon: Option<f64>,
    pub sample_every: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub certificate: Option<CertificateSummary>,
    pub initial_h2: Option<f64>,
    pub final_h2: Option<f64>,
    pub max_h2: Option<f64>,
    pub min_h2_ratio: Option<f64>,
    pub final_h2_ratio: Option<f64>,
    pub h2_fit: Option<DecayFit>,
    pub lyapunov_fit: Option<DecayFit>,
    pub max_lyapunov_increase: Option<f64>,
    /// Largest `|mass balance error| / Q0` over every sample of every run.
    pub mass_balance_rel_max: Option<f64>,
    pub controller_residual_max: Option<f64>,
    pub iss: Option<IssReport>,
    pub companion_iss: Option<IssReport>,
    pub gain_ratio: Option<f64>,
    pub tracking: Option<Tracking>,
    pub notes: Vec<String>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
}

/// `L / min lambda2` over the profile.
pub fn transit_time(cfg: &ChannelConfig, p: &Profile) -> Result<f64, LabError> {
    let mut lmin = f64::INFINITY;
    for i in 0..p.grid.n {
        let (_, l2) = eigenvalues(cfg.g, p.h[i], p.v[i]).map_err(LabError::stage("steady"))?;
        lmin = lmin.min(l2);
    }
    Ok(cfg.length / lmin)
}

fn base_discharge(inflow: &InflowSignal, t0: f64) -> f64 {
    match inflow {
        InflowSignal::Sinusoid { mean, .. } => *mean,
        other => other.value(t0),
    }
}

/// Steady profile and certificate only.
pub fn certify_scenario(
    spec: &ScenarioSpec,
) -> Result<(ChannelConfig, Profile, Certificate), LabError> {
    let cfg = spec.channel_config()?;
    let grid = spec.grid()?;
    let q = base_discharge(&spec.inflow, spec.start_time());
    let base =
        solve_steady(&cfg, q, spec.controller.h_c, grid).map_err(LabError::stage("steady"))?;
    validate_regime(&cfg, &base)
        .into_result()
        .map_err(LabError::stage("steady"))?;
    let opts = CertifyOptions {
        epsilon: spec.certificate.epsilon,
        mu: spec.certificate.mu,
        ..CertifyOptions::default()
    };
    let cert = certify(&cfg, &base, spec.controller.k_p, spec.controller.k_i, &opts)
        .map_err(LabError::stage("certify"))?;
    Ok((cfg, base, cert))
}

struct Sim<'a> {
    spec: &'a ScenarioSpec,
    cfg: &'a ChannelConfig,
    scheme: Scheme,
    t0: f64,
    opts: RunOptions,
}

impl Sim<'_> {
    fn steady_at(&self, h_c: f64) -> Result<Profile, LabError> {
        let q = self.spec.inflow.value(self.t0);
        discrete_steady(self.cfg, &self.scheme, q, h_c, self.spec.grid()?)
            .map_err(LabError::stage("steady"))
    }

    #[allow(clippy::too_many_arguments)]
    fn simulate(
        &self,
        label: &'static str,
        ctrl: &ControllerSpec,
        inflow: &InflowSignal,
        initial: Profile,
        reference: Reference,
        cert: Option<&Certificate>,
        opts: &RunOptions,
    ) -> Result<RunArtifact, LabError> {
        let z = ctrl.consistent_z(self.cfg, &initial, self.t0);
        let state = SimState {
            t: self.t0,
            profile: initial,
            z,
        };
        let mut obs = NormObserver::new(self.cfg, ctrl, inflow, reference);
        if let Some(c) = cert {
            obs = obs
                .with_certificate(c)
                .map_err(LabError::stage("analyze"))?;
        }
        let record = run(
            self.cfg,
            ctrl,
            &self.scheme,
            &state,
            inflow,
            opts,
            &mut [&mut obs],
        )
        .map_err(LabError::stage("simulate"))?;
        if let Some(e) = record.failure.clone() {
            return Err(LabError::Stage {
                stage: "simulate",
                source: e,
            });
        }
        Ok(RunArtifact {
            label,
            record,
            series: obs.into_series(),
        })
    }
}

fn quasi_static_or_steady(
    sim: &Sim<'_>,
    ctrl: &ControllerSpec,
    inflow: &InflowSignal,
    steady: &Profile,
) -> Reference {
    if inflow.is_constant() {
        Reference::Steady {
            profile: steady.clone(),
            z: ctrl.consistent_z(sim.cfg, steady, sim.t0),
        }
    } else {
        Reference::QuasiStatic {
            scheme: sim.scheme,
            h_c: ctrl.h_c,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"))
}

/// Runs the whole pipeline. Stage failures are errors; failed assertions
/// are reported in the summary (see [`Outcome::status`]).
pub fn run_scenario(spec: &ScenarioSpec) -> Result<Outcome, LabError> {
    spec.validate()?;
    let cfg = spec.channel_config()?;
    let grid = spec.grid()?;
    let t0 = spec.start_time();
    let ctl = &spec.controller;
    let base = solve_steady(&cfg, base_discharge(&spec.inflow, t0), ctl.h_c, grid)
        .map_err(LabError::stage("steady"))?;
    validate_regime(&cfg, &base)
        .into_result()
        .map_err(LabError::stage("steady"))?;
    let transit = transit_time(&cfg, &base)?;

    let mut summary = Summary {
        name: spec.name.clone(),
        transit_time: transit,
        t0,
        ..Summary::default()
    };

    let certificate = if spec.certificate.skip {
        None
    } else {
        let opts = CertifyOptions {
            epsilon: spec.certificate.epsilon,
            mu: spec.certificate.mu,
            ..CertifyOptions::default()
        };
        Some(certify(&cfg, &base, ctl.k_p, ctl.k_i, &opts).map_err(LabError::stage("certify"))?)
    };
    if let Some(c) = &certificate {
        summary.certificate = Some(c.into());
        if spec.expect.certificate_valid == Some(true) && !c.valid {
            return Err(LabError::CertificateInfeasible(
                c.diagnostic
                    .clone()
                    .unwrap_or_else(|| "no diagnostic".into()),
            ));
        }
    }

    let mut runs = Vec::new();
    let mut scheme = None;
    if spec.simulate {
        let sch = Scheme::for_profile(&cfg, &base);
        scheme = Some(sch);
        let period = spec.inflow.period();
        let horizon = match (spec.horizon_transits, spec.horizon_periods, period) {
            (Some(h), _, _) => h * transit,
            (None, Some(p), Some(per)) => p * per,
            _ => return Err(LabError::Parse("no usable horizon".into())),
        };
        let sample_every = spec.sample_transits * transit;
        let mut opts = RunOptions::new(horizon, sample_every);
        opts.record_profiles = spec.write_profiles;
        let sim = Sim {
            spec,
            cfg: &cfg,
            scheme: sch,
            t0,
            opts,
        };
        summary.horizon = Some(horizon);
        summary.sample_every = Some(sample_every);

        let steady = sim.steady_at(ctl.h_c)?;
        let initial = match spec.perturbation {
            Perturbation::LevelOffset { amplitude } => sim.steady_at(ctl.h_c + amplitude)?,
            p => {
                let mut prof = steady.clone();
                p.apply_bump(&mut prof);
                prof
            }
        };

        let (ctrl, reference) = match ctl.variant {
            ControllerVariant::Feedforward => {
                let mut topts = RunOptions::new(horizon + 2.0 * sample_every, sample_every);
                topts.record_profiles = true;
                topts.record_outflux = true;
                let pinned = ControllerSpec::pinned(ctl.h_c);
                let target = sim.simulate(
                    "target",
                    &pinned,
                    &spec.inflow,
                    steady.clone(),
                    quasi_static_or_steady(&sim, &pinned, &spec.inflow, &steady),
                    None,
                    &topts,
                )?;
                let flux = target
                    .record
                    .outflux
                    .clone()
                    .ok_or_else(|| LabError::Stage {
                        stage: "target",
                        source: stvenant_core::Error::InsufficientData(
                            "target run recorded no outflow".into(),
                        ),
                    })?;
                let reference = Reference::Trajectory {
                    t: target.record.samples.iter().map(|s| s.t).collect(),
                    profiles: target.record.profiles.clone(),
                };
                let mut target = target;
                if !spec.write_profiles {
                    target.record.profiles.clear();
                }
                runs.push(target);
                (
                    ControllerSpec::feedforward(ctl.k_p, ctl.k_i, ctl.h_c, flux),
                    reference,
                )
            }
            ControllerVariant::Pinned => {
                let c = ControllerSpec::pinned(ctl.h_c);
                let r = quasi_static_or_steady(&sim, &c, &spec.inflow, &steady);
                (c, r)
            }
            ControllerVariant::PurePi => {
                let c = ControllerSpec::pure_pi(ctl.k_p, ctl.k_i, ctl.h_c);
                let r = quasi_static_or_steady(&sim, &c, &spec.inflow, &steady);
                (c, r)
            }
        };
        let lyap_cert = certificate.as_ref().filter(|c| {
            c.valid
                && ctl.variant == ControllerVariant::PurePi
                && matches!(reference, Reference::Steady { .. })
        });
        let main = sim.simulate(
            "main",
            &ctrl,
            &spec.inflow,
            initial,
            reference,
            lyap_cert,
            &sim.opts,
        )?;
        summary.dt = Some(main.record.dt);
        summary.steps = Some(main.record.steps);

        let settle = t0 + spec.analysis.settle_periods * period.unwrap_or(0.0);
        if let (Some(a), InflowSignal::Sinusoid { mean, omega, .. }) =
            (spec.analysis.companion_amplitude, &spec.inflow)
        {
            let inflow = InflowSignal::Sinusoid {
                mean: *mean,
                amplitude: a,
                omega: *omega,
            };
            let sim2 = Sim {
                spec,
                cfg: &cfg,
                scheme: sch,
                t0,
                opts: sim.opts.clone(),
            };
            let q = inflow.value(t0);
            let start =
                discrete_steady(&cfg, &sch, q, ctl.h_c, grid).map_err(LabError::stage("steady"))?;
            let reference = quasi_static_or_steady(&sim2, &ctrl, &inflow, &start);
            runs.push(sim2.simulate(
                "companion",
                &ctrl,
                &inflow,
                start,
                reference,
                None,
                &sim.opts,
            )?);
        }
        if spec.analysis.compare_pure_pi && spec.is_time_varying() {
            let c = ControllerSpec::pure_pi(ctl.k_p, ctl.k_i, ctl.h_c);
            let reference = Reference::QuasiStatic {
                scheme: sch,
                h_c: ctl.h_c,
            };
            runs.push(sim.simulate(
                "pure_pi",
                &c,
                &spec.inflow,
                steady.clone(),
                reference,
                None,
                &sim.opts,
            )?);
        }

        analyze(
            spec,
            &main,
            &runs,
            t0,
            horizon,
            transit,
            settle,
            &mut summary,
        );
        runs.insert(0, main);
        summary.mass_balance_rel_max = runs
            .iter()
            .flat_map(|r| r.record.samples.iter())
            .map(|s| (s.mass_balance_error() / s.q0).abs())
            .reduce(f64::max);
    }

    assertions(spec, certificate.as_ref(), &mut summary);
    Ok(Outcome {
        spec: spec.clone(),
        cfg,
        base,
        scheme,
        certificate,
        runs,
        summary,
    })
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    spec: &ScenarioSpec,
    main: &RunArtifact,
    others: &[RunArtifact],
    t0: f64,
    horizon: f64,
    transit: f64,
    settle: f64,
    s: &mut Summary,
) {
    let series = &main.series;
    let (Some(&first), Some(&last)) = (series.h2.first(), series.h2.last()) else {
        s.notes.push("main run produced no samples".into());
        return;
    };
    s.initial_h2 = Some(first);
    s.final_h2 = Some(last);
    s.max_h2 = series.h2.iter().copied().reduce(f64::max);
    if first > 0.0 {
        s.min_h2_ratio = series
            .h2
            .iter()
            .copied()
            .reduce(f64::min)
            .map(|m| m / first);
        s.final_h2_ratio = Some(last / first);
    }
    s.controller_residual_max = main
        .record
        .samples
        .iter()
        .map(|x| x.controller_residual.abs())
        .reduce(f64::max);

    let fit_start = t0 + spec.analysis.fit_from * horizon;
    if spec.inflow.is_constant() && first > 0.0 {
        match series.fit_h2(fit_start) {
            Ok(f) => s.h2_fit = Some(f),
            Err(e) => s.notes.push(format!("H2 decay fit: {e}")),
        }
    }
    if series.lyap.len() == series.len() && !series.is_empty() {
        if first > 0.0 {
            match series.fit_lyapunov(fit_start) {
                Ok(f) => s.lyapunov_fit = Some(f),
                Err(e) => s.notes.push(format!("Lyapunov decay fit: {e}")),
            }
        }
        s.max_lyapunov_increase =
            series.max_lyap_increase(t0 + spec.analysis.monotone_after_transits * transit);
    }

    if !spec.inflow.is_constant() {
        let iss = |r: &RunArtifact| iss_check(&r.series, &spec.inflow, settle);
        if spec.controller.variant != ControllerVariant::Feedforward {
            match iss(main) {
                Ok(r) => s.iss = Some(r),
                Err(e) => s.notes.push(format!("ISS check: {e}")),
            }
        }
        if let Some(c) = others.iter().find(|r| r.label == "companion") {
            let inflow = match (&spec.inflow, spec.analysis.companion_amplitude) {
                (InflowSignal::Sinusoid { mean, omega, .. }, Some(a)) => InflowSignal::Sinusoid {
                    mean: *mean,
                    amplitude: a,
                    omega: *omega,
                },
                _ => spec.inflow.clone(),
            };
            match iss_check(&c.series, &inflow, settle) {
                Ok(r) => s.companion_iss = Some(r),
                Err(e) => s.notes.push(format!("companion ISS check: {e}")),
            }
        }
        if let (Some(a), Some(b)) = (&s.iss, &s.companion_iss) {
            s.gain_ratio = gain_ratio(a, b);
        }
        if let Some(b) = others.iter().find(|r| r.label == "pure_pi") {
            let window_sup = |x: &NormSeries| {
                x.t.iter()
                    .zip(&x.h2)
                    .filter(|(t, _)| **t >= settle)
                    .map(|(_, h)| *h)
                    .fold(0.0, f64::max)
            };
            let (dev, base) = (window_sup(series), window_sup(&b.series));
            s.tracking = Some(Tracking {
                deviation_sup: dev,
                baseline_sup: base,
                ratio: dev / base,
            });
        }
    }
}

fn assertions(spec: &ScenarioSpec, cert: Option<&Certificate>, s: &mut Summary) {
    let e = &spec.expect;
    let mut out = Vec::new();
    let mut num =
        |name: &'static str, expected: String, actual: Option<f64>, ok: &dyn Fn(f64) -> bool| {
            out.push(Assertion {
                name,
                expected,
                actual: fmt_opt(actual),
                pass: actual.is_some_and(ok),
            });
        };
    let fit = s.lyapunov_fit.or(s.h2_fit);

    if let Some(m) = e.gamma_min {
        num(
            "gamma_min",
            format!("> {m:e}"),
            fit.map(|f| f.gamma),
            &|g| g > m,
        );
    }
    if let Some(m) = e.r2_min {
        num("r2_min", format!("> {m}"), fit.map(|f| f.r2), &|r| r > m);
    }
    if let Some(m) = e.lyapunov_slack {
        num(
            "lyapunov_slack",
            format!("max increase <= {m:e}"),
            s.max_lyapunov_increase,
            &|x| x <= m,
        );
    }
    if let Some(m) = e.final_h2_ratio_max {
        num(
            "final_h2_ratio_max",
            format!("< {m:e}"),
            s.final_h2_ratio,
            &|r| r < m,
        );
    }
    if let Some(m) = e.min_h2_ratio_min {
        num(
            "min_h2_ratio_min",
            format!(">= {m}"),
            s.min_h2_ratio,
            &|r| r >= m,
        );
    }
    if let Some(m) = e.h2_max {
        num("h2_max", format!("< {m:e}"), s.max_h2, &|x| x < m);
    }
    if let Some(m) = e.mass_balance_rel_max {
        num(
            "mass_balance_rel_max",
            format!("< {m:e}"),
            s.mass_balance_rel_max,
            &|x| x < m,
        );
    }
    if let Some(m) = e.controller_residual_max {
        num(
            "controller_residual_max",
            format!("< {m:e}"),
            s.controller_residual_max,
            &|x| x < m,
        );
    }
    if let Some(tol) = e.gain_ratio_tolerance {
        num(
            "gain_ratio_tolerance",
            format!("|ratio - 1| <= {tol}"),
            s.gain_ratio,
            &|g| (g - 1.0).abs() <= tol,
        );
    }
    if let Some(m) = e.tracking_ratio_max {
        num(
            "tracking_ratio_max",
            format!("< {m}"),
            s.tracking.as_ref().map(|t| t.ratio),
            &|r| r < m,
        );
    }

    let mut flag = |name: &'static str, want: bool, got: Option<bool>| {
        out.push(Assertion {
            name,
            expected: want.to_string(),
            actual: got.map_or_else(|| "not computed".into(), |g| g.to_string()),
            pass: got == Some(want),
        });
    };
    if let Some(want) = e.certificate_valid {
        flag("certificate_valid", want, cert.map(|c| c.valid));
    }
    if let Some(want) = e.iss_bounded {
        let got = match (&s.iss, &s.companion_iss) {
            (Some(a), Some(b)) => Some(a.bounded && b.bounded),
            (Some(a), None) => Some(a.bounded),
            _ => None,
        };
        flag("iss_bounded", want, got);
    }
    s.passed = out.iter().all(|a| a.pass);
    s.assertions = out;
}
