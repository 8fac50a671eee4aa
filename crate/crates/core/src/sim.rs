//! Closed-loop time integration.
//!
//! Both subdomains (or the single full-sensing domain) are advanced with
//! explicit steps of length `dt`. The control is evaluated once per step
//! and held over the step. Per step:
//!
//! 1. active regime from the switching schedule;
//! 2. `V1`, `V2` by Riemann sums;
//! 3. adaptation events at the first step with `t >= t_i`;
//! 4. gain integration;
//! 5. boundary third derivatives from one-sided stencils;
//! 6. input assignment;
//! 7. boundary pinning;
//! 8. time step of the interior nodes;
//! 9. logging.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::adaptation::{AdaptationConfig, AdaptationState, Variant, WindowStart};
use crate::control::{assign_inputs, ControlDecision};
use crate::model::{
    apply_boundary_constraints_in_place, rhs_into, BoundaryInput, Forcing, LambdaProfile, Side,
    SubdomainModel, SubdomainState,
};
use crate::monitor::{riemann_v, BlowUpInfo, LogMeta, LogRow, Snapshot, TrajectoryLog};
use crate::oracles::{m_bounds, nominal_c, nominal_coefficients, GainBoundInputs};
use crate::par::{self, Execution};
use crate::rbf::{boundary_derivative, build_grid, BoundaryStencil, StencilSide};
use crate::schedule::{active_regime, validate_dwell, DwellBounds, Regime, SwitchingSequence};
use crate::{Error, Result};

/// Largest admissible `dt * ||lambda d2 + d4||` for explicit stepping.
pub const STABILITY_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    IntermittentGes,
    IntermittentIss,
    IntermittentGuub,
    FullSensingGpa,
}

impl Mode {
    /// Adaptation rule that belongs to this mode.
    pub fn variant(self) -> Variant {
        match self {
            Mode::IntermittentGes => Variant::GesAlg1,
            Mode::IntermittentIss => Variant::IssAlg3,
            Mode::IntermittentGuub => Variant::GuubAlg4,
            Mode::FullSensingGpa => Variant::FullSensingAlg2,
        }
    }

    pub fn is_full_sensing(self) -> bool {
        self == Mode::FullSensingGpa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub y: f64,
    /// Nodes per subdomain; for full sensing, nodes on `(0, 1)`.
    pub n_per_subdomain: usize,
    pub c: f64,
    pub dt: f64,
    pub t_final: f64,
    pub lambda: LambdaProfile,
    pub forcing: Forcing,
    pub amplitude: f64,
    /// Required for the intermittent modes; its horizon must equal `t_final`.
    pub schedule: Option<SwitchingSequence>,
    pub adaptation: AdaptationConfig,
    pub snapshot_stride: usize,
    pub log_stride: usize,
    pub blowup_cap: f64,
    pub integrator: Integrator,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0) {
            errs.push(format!("scheme.dt = {} must be > 0", self.dt));
        }
        if !(self.dt < self.t_final) {
            errs.push(format!(
                "scheme.dt = {} must be below scheme.t_final = {}",
                self.dt, self.t_final
            ));
        }
        if !(self.y > 0.0 && self.y < 1.0) {
            errs.push(format!("domain.y = {} must lie in (0, 1)", self.y));
        }
        if self.n_per_subdomain < crate::rbf::MIN_NODES {
            errs.push(format!(
                "domain.nodes = {} must be at least {}",
                self.n_per_subdomain,
                crate::rbf::MIN_NODES
            ));
        }
        if !(self.c > 0.0) {
            errs.push(format!("domain.shape = {} must be > 0", self.c));
        }
        if !(self.blowup_cap > 0.0) {
            errs.push(format!("output.blowup_cap = {} must be > 0", self.blowup_cap));
        }
        if self.snapshot_stride == 0 || self.log_stride == 0 {
            errs.push("output strides must be positive".into());
        }
        if !(self.amplitude >= 0.0) {
            errs.push(format!("domain.amplitude = {} must be >= 0", self.amplitude));
        }
        if self.adaptation.variant != self.mode.variant() {
            errs.push(format!(
                "adaptation variant {:?} does not match mode {:?}",
                self.adaptation.variant, self.mode
            ));
        }
        errs.extend(self.adaptation.validate());
        match (&self.schedule, self.mode.is_full_sensing()) {
            (None, false) => errs.push("intermittent modes need [schedule] instants".into()),
            (Some(s), false) if (s.horizon() - self.t_final).abs() > 1e-15 => errs.push(format!(
                "schedule horizon {} differs from t_final {}",
                s.horizon(),
                self.t_final
            )),
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Number of time steps to reach `t_final`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Stable hash of the configuration, stored in log metadata.
    pub fn fingerprint(&self) -> String {
        let mut h = DefaultHasher::new();
        format!("{self:?}").hash(&mut h);
        format!("{:016x}", h.finish())
    }

    /// Same configuration with a different initial amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self {
            name: format!("{}_a{amplitude}", self.name),
            amplitude,
            ..self.clone()
        }
    }
}

/// `-A (cos(4 pi x) - 1)`.
pub fn initial_profile(amplitude: f64, x: f64) -> f64 {
    -amplitude * ((4.0 * std::f64::consts::PI * x).cos() - 1.0)
}

fn sample_initial(model: &SubdomainModel, amplitude: f64) -> SubdomainState {
    let mut values: Vec<f64> = model
        .grid
        .nodes()
        .iter()
        .map(|&x| initial_profile(amplitude, x))
        .collect();
    apply_boundary_constraints_in_place(&mut values, model.side, BoundaryInput::new(0.0));
    SubdomainState { values, time: 0.0 }
}

fn build_models(cfg: &ExperimentConfig) -> Result<Vec<SubdomainModel>> {
    let known = match cfg.mode {
        Mode::IntermittentIss => Some(cfg.forcing.sup()),
        _ => None,
    };
    if cfg.mode.is_full_sensing() {
        let grid = build_grid(0.0, 1.0, cfg.n_per_subdomain, cfg.c)?;
        return Ok(vec![SubdomainModel::new(
            grid,
            &cfg.lambda,
            cfg.forcing.clone(),
            known,
            Side::LeftOfY,
        )?]);
    }
    let left = build_grid(0.0, cfg.y, cfg.n_per_subdomain, cfg.c)?;
    let right = build_grid(cfg.y, 1.0, cfg.n_per_subdomain, cfg.c)?;
    Ok(vec![
        SubdomainModel::new(left, &cfg.lambda, cfg.forcing.clone(), known, Side::LeftOfY)?,
        SubdomainModel::new(right, &cfg.lambda, cfg.forcing.clone(), known, Side::RightOfY)?,
    ])
}

/// Nodal initial data on each subdomain with zero inputs applied.
pub fn initial_condition(cfg: &ExperimentConfig) -> Result<(SubdomainState, SubdomainState)> {
    let models = build_models(cfg)?;
    let left = sample_initial(&models[0], cfg.amplitude);
    let right = models
        .get(1)
        .map(|m| sample_initial(m, cfg.amplitude))
        .unwrap_or_else(|| SubdomainState::zeros(0));
    Ok((left, right))
}

/// `dt` times the largest row sum of `|lambda|_inf d2 + d4` over evolved rows.
pub fn stability_product(model: &SubdomainModel, dt: f64) -> f64 {
    let composite = &model.ops.d2 * model.lambda_sup + &model.ops.d4;
    let norm = model
        .interior()
        .map(|i| composite.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    dt * norm
}

fn check_stability(models: &[SubdomainModel], dt: f64) -> Result<()> {
    for m in models {
        let product = stability_product(m, dt);
        if !(product <= STABILITY_LIMIT) {
            return Err(Error::UnstableDt { product });
        }
    }
    Ok(())
}

/// Reusable buffers for one subdomain.
struct Stepper {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
        }
    }

    /// Advance `values` by `dt` with the inputs held fixed.
    fn step(
        &mut self,
        integrator: Integrator,
        model: &SubdomainModel,
        values: &mut [f64],
        t: f64,
        dt: f64,
    ) -> Result<()> {
        match integrator {
            Integrator::Euler => {
                rhs_into(values, model, t, &mut self.k[0])?;
                for (v, k) in values.iter_mut().zip(&self.k[0]) {
                    *v += dt * k;
                }
            }
            Integrator::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                rhs_into(values, model, t, k1)?;
                axpy(&mut self.stage, values, 0.5 * dt, k1);
                rhs_into(&self.stage, model, t + 0.5 * dt, k2)?;
                axpy(&mut self.stage, values, 0.5 * dt, k2);
                rhs_into(&self.stage, model, t + 0.5 * dt, k3)?;
                axpy(&mut self.stage, values, dt, k3);
                rhs_into(&self.stage, model, t + dt, k4)?;
                for j in 0..values.len() {
                    values[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
        }
        Ok(())
    }
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, v| {
        if v.is_nan() {
            f64::NAN
        } else {
            m.max(v.abs())
        }
    })
}

fn snapshot(t: f64, models: &[SubdomainModel], states: &[&[f64]]) -> Snapshot {
    let mut x = Vec::new();
    let mut u = Vec::new();
    for (k, (m, s)) in models.iter().zip(states).enumerate() {
        // The interface node is shared; keep the copy from the left side.
        let skip = usize::from(k > 0);
        x.extend_from_slice(&m.grid.nodes()[skip..]);
        u.extend_from_slice(&s[skip..]);
    }
    Snapshot { t, x, u }
}

fn new_log(cfg: &ExperimentConfig) -> TrajectoryLog {
    TrajectoryLog {
        rows: Vec::with_capacity(cfg.steps() / cfg.log_stride + 2),
        snapshots: Vec::new(),
        meta: LogMeta {
            fingerprint: cfg.fingerprint(),
            instants: cfg
                .schedule
                .as_ref()
                .map(|s| s.instants().to_vec())
                .unwrap_or_default(),
            horizon: cfg.t_final,
            blowup: None,
        },
    }
}

fn blow_up(mut log: TrajectoryLog, t: f64, max_abs: f64, cap: f64) -> Error {
    log.meta.blowup = Some(BlowUpInfo { t, max_abs });
    Error::BlowUp {
        t,
        max_abs,
        cap,
        log: Box::new(log),
    }
}

fn adaptation_config(cfg: &ExperimentConfig) -> Result<AdaptationConfig> {
    let mut a = cfg.adaptation.clone();
    if cfg.mode == Mode::IntermittentIss && a.c1 == 0.0 && a.c2 == 0.0 {
        let (c1, c2) = nominal_c(cfg.forcing.sup(), cfg.y)?;
        a.c1 = c1;
        a.c2 = c2;
    }
    Ok(a)
}

/// Simulate the intermittently sensed closed loop.
///
/// On blow-up the error carries the truncated log.
pub fn run_closed_loop(cfg: &ExperimentConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    if cfg.mode.is_full_sensing() {
        return run_full_sensing(cfg);
    }
    let schedule = cfg.schedule.as_ref().expect("validated");
    let acfg = adaptation_config(cfg)?;
    let models = build_models(cfg)?;
    check_stability(&models, cfg.dt)?;
    let (m1, m2) = (&models[0], &models[1]);
    let n = cfg.n_per_subdomain;
    let left_stencil = BoundaryStencil::minimal(StencilSide::Left, 3, n)?;
    let right_stencil = BoundaryStencil::minimal(StencilSide::Right, 3, n)?;
    let (s1, s2) = (m1.grid.spacing(), m2.grid.spacing());

    let (w0, v0) = initial_condition(cfg)?;
    let (mut w, mut v) = (w0.values, v0.values);
    let mut adapt = AdaptationState::new(&acfg);
    let mut next_instant = 0usize;
    let instants = schedule.instants();
    let mut stepper1 = Stepper::new(n);
    let mut stepper2 = Stepper::new(n);
    let mut log = new_log(cfg);
    let steps = cfg.steps();
    let gain_step = acfg.clock_step(cfg.dt);

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let last = k == steps;
        // The final row records the state at t_final without stepping past it.
        let regime = if last {
            active_regime(schedule, t - 0.5 * cfg.dt)?
        } else {
            active_regime(schedule, t)?
        };
        let v1 = riemann_v(&w, &m1.grid);
        let v2 = riemann_v(&v, &m2.grid);

        while next_instant < instants.len() && t >= instants[next_instant] - 1e-3 * cfg.dt {
            let index = next_instant + 1;
            adapt = adapt.window_start(&acfg, WindowStart::from_index(index), t, v1, v2)?;
            next_instant += 1;
        }

        if !last {
            adapt.integrate_theta(gain_step);
        }

        // The stencil reads the state as held, actuated nodes included.
        let w_xxx = boundary_derivative(&w, &left_stencil, s1)?;
        let v_xxx = boundary_derivative(&v, &right_stencil, s2)?;
        let ControlDecision { u1, u2, .. } = assign_inputs(
            regime,
            v1,
            v2,
            w_xxx,
            v_xxx,
            adapt.theta1_hat,
            adapt.theta2_hat,
        )?;

        if k % cfg.log_stride == 0 || last {
            log.push(LogRow {
                t,
                v1,
                v2,
                theta1_hat: adapt.theta1_hat,
                theta2_hat: adapt.theta2_hat,
                u1,
                u2,
            });
        }
        if k % cfg.snapshot_stride == 0 || last {
            log.snapshots.push(snapshot(t, &models, &[&w, &v]));
        }
        if last {
            break;
        }

        apply_boundary_constraints_in_place(&mut w, m1.side, BoundaryInput::new(u1));
        apply_boundary_constraints_in_place(&mut v, m2.side, BoundaryInput::new(u2));
        stepper1.step(cfg.integrator, m1, &mut w, t, cfg.dt)?;
        stepper2.step(cfg.integrator, m2, &mut v, t, cfg.dt)?;

        let peak = max_abs(&w).max(max_abs(&v));
        if !(peak <= cfg.blowup_cap) {
            return Err(blow_up(log, t + cfg.dt, peak, cfg.blowup_cap));
        }
    }
    Ok(log)
}

/// Simulate the fully sensed loop on `(0, 1)` with the `tau`-grid rule.
pub fn run_full_sensing(cfg: &ExperimentConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    if !cfg.mode.is_full_sensing() {
        return Err(Error::Validation(vec![format!(
            "run_full_sensing needs mode full_sensing_gpa, got {:?}",
            cfg.mode
        )]));
    }
    let acfg = cfg.adaptation.clone();
    let models = build_models(cfg)?;
    check_stability(&models, cfg.dt)?;
    let m = &models[0];
    let stencil = BoundaryStencil::minimal(StencilSide::Left, 3, m.len())?;
    let spacing = m.grid.spacing();
    let (u0, _) = initial_condition(cfg)?;
    let mut u = u0.values;
    let mut adapt = AdaptationState::new(&acfg);
    let mut stepper = Stepper::new(m.len());
    let mut log = new_log(cfg);
    let steps = cfg.steps();

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let last = k == steps;
        let vv = riemann_v(&u, &m.grid);
        adapt = adapt.alg2_on_tick(&acfg, t, vv);
        let u_xxx = boundary_derivative(&u, &stencil, spacing)?;
        let d = assign_inputs(Regime::FullSensing, vv, 0.0, u_xxx, 0.0, adapt.theta1_hat, 0.0)?;
        if k % cfg.log_stride == 0 || last {
            log.push(LogRow {
                t,
                v1: vv,
                v2: 0.0,
                theta1_hat: adapt.theta1_hat,
                theta2_hat: 0.0,
                u1: d.u1,
                u2: 0.0,
            });
        }
        if k % cfg.snapshot_stride == 0 || last {
            log.snapshots.push(snapshot(t, &models, &[&u]));
        }
        if last {
            break;
        }
        apply_boundary_constraints_in_place(&mut u, m.side, BoundaryInput::new(d.u1));
        stepper.step(cfg.integrator, m, &mut u, t, cfg.dt)?;
        let peak = max_abs(&u);
        if !(peak <= cfg.blowup_cap) {
            return Err(blow_up(log, t + cfg.dt, peak, cfg.blowup_cap));
        }
    }
    Ok(log)
}

/// Explicit gain bounds `(M1, M2)` for `cfg` using the empirical dwell
/// bounds of its schedule. Under the per-step clock the latched slope adds
/// `Delta` per step, so the effective growth rate is `Delta / dt`.
pub fn gain_bounds(cfg: &ExperimentConfig) -> Result<(DwellBounds, (f64, f64))> {
    let Some(schedule) = cfg.schedule.as_ref() else {
        return Err(Error::Validation(vec![
            "gain bounds need a switching schedule".into(),
        ]));
    };
    let dwell = validate_dwell(schedule)?;
    let nominal =
        nominal_coefficients(cfg.lambda.sup(), cfg.lambda.prime_sup(), cfg.forcing.sup(), cfg.y)?;
    let a = &cfg.adaptation;
    let rate = a.clock_step(cfg.dt) / cfg.dt;
    let inputs = GainBoundInputs {
        theta1: nominal.theta1,
        theta2: nominal.theta2,
        c1: nominal.c1,
        c2: nominal.c2,
        sigma: a.sigma,
        dwell,
        delta1: a.delta1 * rate,
        delta2: a.delta2 * rate,
        epsilon: a.epsilon,
    };
    Ok((dwell, m_bounds(cfg.mode.variant(), &inputs)))
}

/// Dispatch on the mode.
pub fn run(cfg: &ExperimentConfig) -> Result<TrajectoryLog> {
    if cfg.mode.is_full_sensing() {
        run_full_sensing(cfg)
    } else {
        run_closed_loop(cfg)
    }
}

/// Independent runs; the output order matches `cfgs`.
pub fn run_batch(cfgs: &[ExperimentConfig]) -> Vec<Result<TrajectoryLog>> {
    run_batch_with(Execution::available(), cfgs)
}

pub fn run_batch_with(exec: Execution, cfgs: &[ExperimentConfig]) -> Vec<Result<TrajectoryLog>> {
    par::map_with(exec, cfgs, run)
}
