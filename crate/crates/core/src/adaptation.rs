//! Gain adaptation.
//!
//! The three intermittent rules (GES, ISS, GUUB) are event driven: at the start of every sensing
//! window the measured Lyapunov value is compared against the value one
//! full cycle earlier, and the slope of the active gain is latched to
//! either `Delta` or `0` for the whole window. The inactive gain is frozen.
//! They differ only in the additive slack of the comparison:
//!
//! ```text
//! V(t_i) > V(t_{i-2}) e^{-sigma (t_i - t_{i-2})} + S e^{(th(t_{i-2}) + 1)(t_i - t_{i-2})}
//! ```
//!
//! with `S = 0` (GES), `S = C + C^2/4` (ISS) and
//! `S = th(t_{i-2}) + th(t_{i-2})^2/4` (GUUB).
//!
//! The full-sensing rule checks an exponential envelope on a fixed
//! `tau` grid and jumps the gain by `Delta` at most once per window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// GES rule: intermittent sensing, `f = 0`.
    GesAlg1,
    /// Practical-attractivity rule: full sensing, `|f|_inf` unknown.
    FullSensingAlg2,
    /// ISS rule: intermittent sensing, `|f|_inf` known.
    IssAlg3,
    /// GUUB rule: intermittent sensing, `|f|_inf` unknown.
    GuubAlg4,
}

/// How a latched slope is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainClock {
    /// `d th/dt = slope`: the gain grows by `slope * dt` per step.
    #[default]
    Continuous,
    /// The gain grows by `slope` per simulation step.
    PerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationConfig {
    pub variant: Variant,
    pub delta1: f64,
    pub delta2: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub theta1_init: f64,
    pub theta2_init: f64,
    pub clock: GainClock,
}

impl AdaptationConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            delta1: 0.01,
            delta2: 0.01,
            sigma: 100.0,
            epsilon: 1.0,
            tau: 1e-3,
            c1: 0.0,
            c2: 0.0,
            theta1_init: 0.0,
            theta2_init: 0.0,
            clock: GainClock::Continuous,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = |name: &str, v: f64, errs: &mut Vec<String>| {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("adaptation.{name} = {v} must be > 0"));
            }
        };
        positive("sigma", self.sigma, &mut errs);
        match self.variant {
            Variant::FullSensingAlg2 => {
                positive("delta1", self.delta1, &mut errs);
                positive("epsilon", self.epsilon, &mut errs);
                positive("tau", self.tau, &mut errs);
            }
            _ => {
                positive("delta1", self.delta1, &mut errs);
                positive("delta2", self.delta2, &mut errs);
            }
        }
        for (name, v) in [
            ("c1", self.c1),
            ("c2", self.c2),
            ("theta1_init", self.theta1_init),
            ("theta2_init", self.theta2_init),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("adaptation.{name} = {v} must be >= 0"));
            }
        }
        errs
    }

    /// Integration step handed to [`AdaptationState::integrate_theta`] for a
    /// simulation step of length `dt`.
    pub fn clock_step(&self, dt: f64) -> f64 {
        match self.clock {
            GainClock::Continuous => dt,
            GainClock::PerStep => 1.0,
        }
    }
}

/// Lyapunov values and gains recorded at a switching instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSample {
    pub t: f64,
    pub v1: f64,
    pub v2: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
}

/// Which sensing window just opened, by its 1-based switching index `i`:
/// odd `i` opens an I1 window, even `i` an I2 window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowStart {
    I1 { index: usize },
    I2 { index: usize },
}

impl WindowStart {
    pub fn from_index(index: usize) -> Self {
        if index % 2 == 1 {
            WindowStart::I1 { index }
        } else {
            WindowStart::I2 { index }
        }
    }

    pub fn index(&self) -> usize {
        match *self {
            WindowStart::I1 { index } | WindowStart::I2 { index } => index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationState {
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub slope1: f64,
    pub slope2: f64,
    /// Samples at the switching instants of the last two cycles.
    pub anchors: BTreeMap<usize, AnchorSample>,
    /// Start of the current `tau` window (full-sensing rule).
    pub last_window_start: f64,
    /// Index `k` of the current `tau` window (full-sensing rule).
    pub window_k: usize,
    /// `V(k tau)` (full-sensing rule).
    pub window_start_v: f64,
    /// `th(k tau)` (full-sensing rule).
    pub window_start_theta: f64,
    /// Jump already taken in this `tau` window (full-sensing rule).
    pub violation_latched: bool,
}

impl AdaptationState {
    pub fn new(cfg: &AdaptationConfig) -> Self {
        Self {
            theta1_hat: cfg.theta1_init,
            theta2_hat: cfg.theta2_init,
            slope1: 0.0,
            slope2: 0.0,
            anchors: BTreeMap::new(),
            last_window_start: 0.0,
            window_k: 0,
            window_start_v: 0.0,
            window_start_theta: cfg.theta1_init,
            violation_latched: false,
        }
    }

    fn record_anchor(&mut self, index: usize, sample: AnchorSample) {
        self.anchors.insert(index, sample);
        // Two cycles = four switching instants.
        while self.anchors.len() > 4 {
            let first = *self.anchors.keys().next().expect("nonempty");
            self.anchors.remove(&first);
        }
    }

    fn slack(&self, cfg: &AdaptationConfig, anchor: &AnchorSample, first: bool) -> f64 {
        match cfg.variant {
            Variant::GesAlg1 | Variant::FullSensingAlg2 => 0.0,
            Variant::IssAlg3 => {
                let c = if first { cfg.c1 } else { cfg.c2 };
                c + c * c / 4.0
            }
            Variant::GuubAlg4 => {
                let th = if first {
                    anchor.theta1_hat
                } else {
                    anchor.theta2_hat
                };
                th + th * th / 4.0
            }
        }
    }

    /// Window-start rule shared by the three intermittent variants.
    fn on_window_start(
        &self,
        cfg: &AdaptationConfig,
        window: WindowStart,
        t: f64,
        v1_now: f64,
        v2_now: f64,
    ) -> Result<Self> {
        let mut next = self.clone();
        let index = window.index();
        if index == 0 {
            return Err(Error::IndexOutOfRange { index, len: 0 });
        }
        next.record_anchor(
            index,
            AnchorSample {
                t,
                v1: v1_now,
                v2: v2_now,
                theta1_hat: self.theta1_hat,
                theta2_hat: self.theta2_hat,
            },
        );
        let first = matches!(window, WindowStart::I1 { .. });
        if first {
            next.slope2 = 0.0;
        } else {
            next.slope1 = 0.0;
        }
        // Gains stay frozen on [t_1, t_3].
        if index < 3 {
            if first {
                next.slope1 = 0.0;
            } else {
                next.slope2 = 0.0;
            }
            return Ok(next);
        }
        let anchor = *self
            .anchors
            .get(&(index - 2))
            .ok_or(Error::MissingAnchor(index - 2))?;
        let span = t - anchor.t;
        let (v_now, v_then, th_then, delta) = if first {
            (v1_now, anchor.v1, anchor.theta1_hat, cfg.delta1)
        } else {
            (v2_now, anchor.v2, anchor.theta2_hat, cfg.delta2)
        };
        let slack = self.slack(cfg, &anchor, first);
        let mut threshold = v_then * (-cfg.sigma * span).exp();
        if slack != 0.0 {
            threshold += slack * ((th_then + 1.0) * span).exp();
        }
        let slope = if v_now > threshold { delta } else { 0.0 };
        if first {
            next.slope1 = slope;
        } else {
            next.slope2 = slope;
        }
        Ok(next)
    }

    /// GES rule at the start of a sensing window.
    pub fn alg1_on_window_start(
        &self,
        cfg: &AdaptationConfig,
        window: WindowStart,
        t: f64,
        v1_now: f64,
        v2_now: f64,
    ) -> Result<Self> {
        self.on_window_start(&with_variant(cfg, Variant::GesAlg1), window, t, v1_now, v2_now)
    }

    /// ISS rule (known forcing bound, slack `C + C^2/4`).
    pub fn alg3_on_window_start(
        &self,
        cfg: &AdaptationConfig,
        window: WindowStart,
        t: f64,
        v1_now: f64,
        v2_now: f64,
    ) -> Result<Self> {
        self.on_window_start(&with_variant(cfg, Variant::IssAlg3), window, t, v1_now, v2_now)
    }

    /// GUUB rule (unknown forcing bound, slack from the anchored gain).
    pub fn alg4_on_window_start(
        &self,
        cfg: &AdaptationConfig,
        window: WindowStart,
        t: f64,
        v1_now: f64,
        v2_now: f64,
    ) -> Result<Self> {
        self.on_window_start(&with_variant(cfg, Variant::GuubAlg4), window, t, v1_now, v2_now)
    }

    /// Dispatch to the configured intermittent-sensing rule.
    pub fn window_start(
        &self,
        cfg: &AdaptationConfig,
        window: WindowStart,
        t: f64,
        v1_now: f64,
        v2_now: f64,
    ) -> Result<Self> {
        self.on_window_start(cfg, window, t, v1_now, v2_now)
    }

    /// Full-sensing rule at one simulation instant `t` with current value `v_now`.
    ///
    /// Rolls over to the `tau` window containing `t`, then tests the
    /// envelope `V(s) <= V(k tau) e^{-sigma (s - k tau)} + eps / sigma`.
    /// The first violation in a window sets `th = th(k tau) + Delta` and
    /// latches until the window ends. The gain is frozen on `[0, tau)`.
    pub fn alg2_on_tick(&self, cfg: &AdaptationConfig, t: f64, v_now: f64) -> Self {
        let mut next = self.clone();
        let k = (t / cfg.tau + 1e-9).floor() as usize;
        if k != next.window_k || t == 0.0 {
            next.window_k = k;
            next.last_window_start = t;
            next.window_start_v = v_now;
            next.window_start_theta = next.theta1_hat;
            next.violation_latched = false;
        }
        if k == 0 || next.violation_latched {
            return next;
        }
        let envelope = next.window_start_v * (-cfg.sigma * (t - next.last_window_start)).exp()
            + cfg.epsilon / cfg.sigma;
        if v_now > envelope {
            next.theta1_hat = next.window_start_theta + cfg.delta1;
            next.violation_latched = true;
        }
        next
    }

    /// Advance the gains by their latched slopes.
    pub fn integrate_theta(&mut self, dt: f64) {
        self.theta1_hat += self.slope1 * dt;
        self.theta2_hat += self.slope2 * dt;
    }
}

fn with_variant(cfg: &AdaptationConfig, variant: Variant) -> AdaptationConfig {
    AdaptationConfig {
        variant,
        ..cfg.clone()
    }
}
