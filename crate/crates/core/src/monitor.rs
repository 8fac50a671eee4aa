//! Lyapunov monitoring and certificate checks.
//!
//! Each check turns one of the closed-loop stability properties into a
//! falsifiable test on a recorded trajectory:
//!
//! - GES: `V1 + V2 <= gamma (V1(0) + V2(0)) e^{-sigma t}` with a finite
//!   fitted `gamma` (capped at [`GAMMA_CAP`]).
//! - GpA: the tail of `V` stays below `eps/sigma (1/(1 - e^{-sigma tau}) + 1)`.
//! - ISS: `V1 + V2 <= gamma V(0) e^{-sigma t} + Phi` with `Phi` taken from the
//!   terminal plateau.
//! - GUUB: runs from different initial amplitudes settle on a common bound.

use std::fmt;

use crate::rbf::SpatialGrid;
use crate::{Error, Result};

/// Largest overshoot constant accepted as "finite" at desk scale.
pub const GAMMA_CAP: f64 = 1e6;
/// Tail fraction of the horizon used for plateaus and limsup estimates.
pub const TAIL_FRACTION: f64 = 0.1;
/// Maximum ratio between terminal plateaus for a uniform ultimate bound.
pub const UNIFORMITY_RATIO: f64 = 2.0;

/// `(1/2) sum_j w_j^2 dx` over the left endpoints `j = 0..n-2`.
pub fn riemann_v(values: &[f64], grid: &SpatialGrid) -> f64 {
    let dx = grid.spacing();
    let n = values.len().min(grid.len());
    0.5 * dx * values[..n.saturating_sub(1)].iter().map(|w| w * w).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogRow {
    pub t: f64,
    pub v1: f64,
    pub v2: f64,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub u1: f64,
    pub u2: f64,
}

impl LogRow {
    pub fn v_total(&self) -> f64 {
        self.v1 + self.v2
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.v1,
            self.v2,
            self.theta1_hat,
            self.theta2_hat,
            self.u1,
            self.u2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Full nodal state over `[0, 1]` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUpInfo {
    pub t: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogMeta {
    pub fingerprint: String,
    /// Switching instants of the run (empty for full sensing).
    pub instants: Vec<f64>,
    pub horizon: f64,
    pub blowup: Option<BlowUpInfo>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
    pub snapshots: Vec<Snapshot>,
    pub meta: LogMeta,
}

impl TrajectoryLog {
    pub fn push(&mut self, row: LogRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.t < row.t));
        self.rows.push(row);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        if self.meta.horizon > 0.0 {
            self.meta.horizon
        } else {
            self.rows.last().map_or(0.0, |r| r.t)
        }
    }

    /// Rows with `t` in `[from, to)`.
    pub fn rows_between(&self, from: f64, to: f64) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.t >= from && r.t < to)
    }

    fn tail_rows(&self) -> impl Iterator<Item = &LogRow> {
        let h = self.horizon();
        self.rows_between(h * (1.0 - TAIL_FRACTION), f64::INFINITY)
    }

    /// Mean of `V1 + V2` over the final 10% of the horizon.
    pub fn terminal_plateau(&self) -> f64 {
        let (sum, n) = self
            .tail_rows()
            .fold((0.0, 0usize), |(s, n), r| (s + r.v_total(), n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    }

    /// Maximum of `V1 + V2` over the final 10% of the horizon.
    pub fn tail_max(&self) -> f64 {
        self.tail_rows().map(|r| r.v_total()).fold(f64::NAN, f64::max)
    }

    /// Window covering the final two complete sensing cycles, if the
    /// schedule has enough of them.
    pub fn final_cycles_window(&self, cycles: usize) -> Option<(f64, f64)> {
        let t = &self.meta.instants;
        let mut bounds: Vec<f64> = t.iter().step_by(2).copied().collect();
        if t.len().is_multiple_of(2) {
            // Last instant opens an I2 window: the final cycle closes at the horizon.
            bounds.push(self.horizon());
        } else {
            bounds.pop();
            bounds.push(*t.last()?);
        }
        if bounds.len() < cycles + 1 {
            return None;
        }
        Some((bounds[bounds.len() - 1 - cycles], bounds[bounds.len() - 1]))
    }
}

/// Least-squares decay rate `-d/dt ln(V1 + V2)` over rows in `[from, to)`.
pub fn fit_decay_rate(log: &TrajectoryLog, from: f64, to: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = log
        .rows_between(from, to)
        .filter(|r| r.v_total() > 0.0)
        .map(|r| (r.t, r.v_total().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Ges,
    Gpa,
    Iss,
    Guub,
}

impl fmt::Display for CertificateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateKind::Ges => "GES",
            CertificateKind::Gpa => "GpA",
            CertificateKind::Iss => "ISS",
            CertificateKind::Guub => "GUUB",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    /// Fitted overshoot constant.
    pub gamma: f64,
    /// Fitted decay rate.
    pub rate: f64,
    /// Fitted offset: `Phi`, the GpA bound, or the ultimate bound `r`.
    pub offset: f64,
    pub pass: bool,
    pub details: String,
}

impl CertificateReport {
    /// Machine-readable `key=value` lines.
    pub fn key_values(&self) -> String {
        format!(
            "kind={}\npass={}\ngamma={:e}\nrate={:e}\noffset={:e}\n",
            self.kind, self.pass, self.gamma, self.rate, self.offset
        )
    }
}

impl fmt::Display for CertificateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} certificate: {}",
            self.kind,
            if self.pass { "PASS" } else { "FAIL" }
        )?;
        writeln!(f, "  gamma  = {:.6e}", self.gamma)?;
        writeln!(f, "  rate   = {:.6e}", self.rate)?;
        writeln!(f, "  offset = {:.6e}", self.offset)?;
        if !self.details.is_empty() {
            for line in self.details.lines() {
                writeln!(f, "  {line}")?;
            }
        }
        Ok(())
    }
}

fn gamma_star(log: &TrajectoryLog, sigma: f64, offset: f64) -> Result<(f64, f64)> {
    let first = log.rows.first().ok_or(Error::EmptyLog)?;
    let v0 = first.v_total();
    let t0 = first.t;
    let mut gamma = 0.0f64;
    for r in &log.rows {
        let excess = (r.v_total() - offset).max(0.0);
        gamma = gamma.max(excess * (sigma * (r.t - t0)).exp() / v0);
    }
    Ok((gamma, v0))
}

/// Exponential-stability certificate.
///
/// `gamma* = max_t V(t) e^{sigma (t - t0)} / V(t0)`; passes when finite
/// and below [`GAMMA_CAP`]. The time origin is the first logged row, so a
/// time-shifted log gives the same answer. The decay rate is fitted over
/// the final two sensing cycles when the schedule is known, else over the
/// second half of the log.
pub fn check_ges(log: &TrajectoryLog, sigma: f64) -> Result<CertificateReport> {
    let (gamma, v0) = gamma_star(log, sigma, 0.0)?;
    if !(v0 > 0.0) {
        return Ok(CertificateReport {
            kind: CertificateKind::Ges,
            gamma: 1.0,
            rate: f64::NAN,
            offset: 0.0,
            pass: log.rows.iter().all(|r| r.v_total() == 0.0),
            details: "initial Lyapunov value is zero".into(),
        });
    }
    let (from, to) = log.final_cycles_window(2).unwrap_or_else(|| {
        let h = log.horizon();
        (0.5 * h, f64::INFINITY)
    });
    let rate = fit_decay_rate(log, from, to).unwrap_or(f64::NAN);
    let finite = log.rows.iter().all(LogRow::is_finite) && log.meta.blowup.is_none();
    let pass = finite && gamma.is_finite() && gamma <= GAMMA_CAP;
    Ok(CertificateReport {
        kind: CertificateKind::Ges,
        gamma: gamma.max(1.0),
        rate,
        offset: 0.0,
        pass,
        details: format!(
            "gamma* = {gamma:.4e} (cap {GAMMA_CAP:e}); decay rate fitted on [{from:.4e}, {to:.4e})"
        ),
    })
}

/// `eps/sigma * (1/(1 - e^{-sigma tau})) + eps/sigma`.
pub fn gpa_bound(sigma: f64, epsilon: f64, tau: f64) -> f64 {
    let base = epsilon / sigma;
    base / (1.0 - (-sigma * tau).exp()) + base
}

/// Practical-attractivity certificate on a full-sensing log; `tolerance`
/// is relative (0.2 accepts a tail up to 1.2 times the bound).
pub fn check_gpa(
    log: &TrajectoryLog,
    sigma: f64,
    epsilon: f64,
    tau: f64,
    tolerance: f64,
) -> Result<CertificateReport> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let bound = gpa_bound(sigma, epsilon, tau);
    let tail = log.tail_max();
    let tail = if tail.is_nan() { 0.0 } else { tail };
    let pass = log.meta.blowup.is_none() && tail <= bound * (1.0 + tolerance);
    Ok(CertificateReport {
        kind: CertificateKind::Gpa,
        gamma: 1.0,
        rate: sigma,
        offset: bound,
        pass,
        details: format!(
            "tail max V = {tail:.4e}; bound = {bound:.4e} (+{:.0}% tolerance)",
            tolerance * 100.0
        ),
    })
}

/// Input-to-state certificate: `Phi` is the tail maximum and `gamma` the
/// overshoot of the excess `V - Phi` over `V(0) e^{-sigma t}`.
pub fn check_iss(log: &TrajectoryLog, sigma: f64) -> Result<CertificateReport> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let phi = log.tail_max();
    let phi = if phi.is_nan() { 0.0 } else { phi };
    let (gamma, v0) = gamma_star(log, sigma, phi)?;
    let gamma = if v0 > 0.0 { gamma } else { 0.0 };
    let pass = log.meta.blowup.is_none() && gamma.is_finite() && gamma <= GAMMA_CAP;
    Ok(CertificateReport {
        kind: CertificateKind::Iss,
        gamma: gamma.max(1.0),
        rate: sigma,
        offset: phi,
        pass,
        details: format!("Phi = {phi:.4e}; gamma* = {gamma:.4e} (cap {GAMMA_CAP:e})"),
    })
}

/// Uniform ultimate bound across runs with different initial amplitudes.
///
/// `r` is the largest tail value over all logs; each log's reaching time
/// is the first instant after which it stays below `r`. Passes when no
/// run blew up and the terminal plateaus agree within [`UNIFORMITY_RATIO`].
pub fn check_ultimate_bound(logs: &[TrajectoryLog]) -> Result<CertificateReport> {
    if logs.len() < 2 {
        return Err(Error::InsufficientLogs {
            need: 2,
            got: logs.len(),
        });
    }
    let mut details = Vec::new();
    if let Some((i, info)) = logs
        .iter()
        .enumerate()
        .find_map(|(i, l)| l.meta.blowup.map(|b| (i, b)))
    {
        return Ok(CertificateReport {
            kind: CertificateKind::Guub,
            gamma: f64::NAN,
            rate: f64::NAN,
            offset: f64::INFINITY,
            pass: false,
            details: format!(
                "log {i} diverged at t = {:.4e} (|value| = {:.4e})",
                info.t, info.max_abs
            ),
        });
    }
    if let Some(i) = logs.iter().position(|l| l.is_empty()) {
        return Err(Error::InsufficientLogs { need: 2, got: i });
    }
    let r = logs
        .iter()
        .map(|l| l.tail_max())
        .fold(0.0f64, f64::max);
    let plateaus: Vec<f64> = logs.iter().map(|l| l.terminal_plateau()).collect();
    for (i, l) in logs.iter().enumerate() {
        let reach = l
            .rows
            .iter()
            .rposition(|row| row.v_total() > r)
            .map_or(l.rows[0].t, |k| l.rows.get(k + 1).map_or(f64::INFINITY, |row| row.t));
        details.push(format!(
            "log {i}: V(0) = {:.4e}, plateau = {:.4e}, T(R) = {:.4e}",
            l.rows[0].v_total(),
            plateaus[i],
            reach
        ));
    }
    let hi = plateaus.iter().copied().fold(f64::MIN, f64::max);
    let lo = plateaus.iter().copied().fold(f64::MAX, f64::min);
    let ratio = if hi == lo {
        1.0
    } else if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    };
    let pass = ratio.is_finite() && ratio <= UNIFORMITY_RATIO;
    details.push(format!(
        "plateau ratio = {ratio:.4} (limit {UNIFORMITY_RATIO}); r = {r:.4e}"
    ));
    Ok(CertificateReport {
        kind: CertificateKind::Guub,
        gamma: ratio,
        rate: f64::NAN,
        offset: r,
        pass,
        details: details.join("\n"),
    })
}
