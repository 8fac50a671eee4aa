//! Executable forms of the supporting inequalities and bound constants.
//!
//! - Nominal Lyapunov coefficients `theta_1`, `theta_2`, `C_1`, `C_2` for a
//!   given `|lambda|_inf`, `|lambda'|_inf`, `|f|_inf` and interface `Y`.
//! - The Halperin-Pitt interpolation inequality
//!   `int (u')^2 <= [1/eps + 12/(b-a)^2] int u^2 + eps int (u'')^2`.
//! - The comparison bound for `V' <= theta V + C sqrt(V)`.
//! - The envelope for sequences that mostly decay at rate `sigma` but may
//!   grow on `N*` bad steps, with a worst-case recurrence to check it.
//! - Explicit upper bounds on the adapted gains.

use crate::adaptation::Variant;
use crate::schedule::DwellBounds;
use crate::{Error, Result};

fn check_y(y: f64) -> Result<()> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::InvalidY(y));
    }
    Ok(())
}

fn theta_for_length(lambda_sup: f64, lambda_prime_sup: f64, length: f64) -> f64 {
    let l = lambda_sup + 0.5;
    lambda_prime_sup + 2.0 * l * (l + 12.0 / (length * length))
}

/// `(theta_1, theta_2)` for subdomains `(0, Y)` and `(Y, 1)`.
pub fn nominal_theta(lambda_sup: f64, lambda_prime_sup: f64, y: f64) -> Result<(f64, f64)> {
    check_y(y)?;
    Ok((
        theta_for_length(lambda_sup, lambda_prime_sup, y),
        theta_for_length(lambda_sup, lambda_prime_sup, 1.0 - y),
    ))
}

/// `(C_1, C_2) = (sqrt(2Y) |f|, sqrt(2(1-Y)) |f|)`.
pub fn nominal_c(f_sup: f64, y: f64) -> Result<(f64, f64)> {
    check_y(y)?;
    Ok(((2.0 * y).sqrt() * f_sup, (2.0 * (1.0 - y)).sqrt() * f_sup))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalCoefficients {
    pub theta1: f64,
    pub theta2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Whole-domain `theta` (full sensing, length 1).
    pub theta_full: f64,
    /// Whole-domain `C = sqrt(2) |f|`.
    pub c_full: f64,
}

pub fn nominal_coefficients(
    lambda_sup: f64,
    lambda_prime_sup: f64,
    f_sup: f64,
    y: f64,
) -> Result<NominalCoefficients> {
    let (theta1, theta2) = nominal_theta(lambda_sup, lambda_prime_sup, y)?;
    let (c1, c2) = nominal_c(f_sup, y)?;
    Ok(NominalCoefficients {
        theta1,
        theta2,
        c1,
        c2,
        theta_full: theta_for_length(lambda_sup, lambda_prime_sup, 1.0),
        c_full: 2f64.sqrt() * f_sup,
    })
}

/// Outcome of the interpolation inequality on one function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Composite trapezoid rule on uniform samples over `[a, b]`.
fn trapezoid(a: f64, b: f64, f: impl Iterator<Item = f64>) -> f64 {
    let samples: Vec<f64> = f.collect();
    let n = samples.len();
    let h = (b - a) / (n - 1) as f64;
    let inner: f64 = samples[1..n - 1].iter().sum();
    h * (inner + 0.5 * (samples[0] + samples[n - 1]))
}

pub const MIN_QUADRATURE_SAMPLES: usize = 10;

/// Halperin-Pitt check from uniform samples of `u`, `u'`, `u''` on `[a, b]`.
pub fn halperin_pitt_check(
    a: f64,
    b: f64,
    u: &[f64],
    du: &[f64],
    d2u: &[f64],
    epsilon: f64,
) -> Result<InequalityCheck> {
    let n = u.len().min(du.len()).min(d2u.len());
    if n < MIN_QUADRATURE_SAMPLES {
        return Err(Error::QuadratureDegenerate {
            got: n,
            min: MIN_QUADRATURE_SAMPLES,
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NegativeInput {
            name: "epsilon",
            value: epsilon,
        });
    }
    if !(b > a) {
        return Err(Error::InvalidInterval { a, b });
    }
    let int_du2 = trapezoid(a, b, du[..n].iter().map(|v| v * v));
    let int_u2 = trapezoid(a, b, u[..n].iter().map(|v| v * v));
    let int_d2u2 = trapezoid(a, b, d2u[..n].iter().map(|v| v * v));
    let lhs = int_du2;
    let rhs = (1.0 / epsilon + 12.0 / ((b - a) * (b - a))) * int_u2 + epsilon * int_d2u2;
    Ok(InequalityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// Halperin-Pitt check for an analytic function with supplied derivatives,
/// sampled on `samples` uniform points.
pub fn halperin_pitt_fn(
    a: f64,
    b: f64,
    samples: usize,
    epsilon: f64,
    u: impl Fn(f64) -> f64,
    du: impl Fn(f64) -> f64,
    d2u: impl Fn(f64) -> f64,
) -> Result<InequalityCheck> {
    let n = samples.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect();
    let s = |f: &dyn Fn(f64) -> f64| xs.iter().map(|&x| f(x)).collect::<Vec<_>>();
    halperin_pitt_check(a, b, &s(&u), &s(&du), &s(&d2u), epsilon)
}

/// Upper bound on solutions of `V' <= theta V + C sqrt(V)`:
/// `V0 e^{(theta+delta) t} + (C^2 / 4 delta) / (theta + delta) (e^{(theta+delta) t} - 1)`.
pub fn gronwall_sqrt_bound(v0: f64, theta: f64, c: f64, delta: f64, t: f64) -> f64 {
    let rate = theta + delta;
    let growth = (rate * t).exp();
    v0 * growth + (c * c / (4.0 * delta)) / rate * (growth - 1.0)
}

/// Hypotheses of the switched-sequence lemma.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEnvelopeSpec {
    pub m: f64,
    pub psi: f64,
    pub sigma: f64,
    pub n_star: usize,
    pub t_lower: f64,
    pub t_upper: f64,
    /// Steps `i` on which `V(T_{i+1}) <= (V(T_i) + M^2/4) e^{psi (T_{i+1} - T_i)}`.
    pub bad_indices: Vec<usize>,
}

impl SequenceEnvelopeSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.bad_indices.len() != self.n_star {
            errs.push(format!(
                "bad_indices has {} entries, N* = {}",
                self.bad_indices.len(),
                self.n_star
            ));
        }
        if !(self.t_lower > 0.0 && self.t_lower <= self.t_upper) {
            errs.push(format!(
                "need 0 < T_lower <= T_upper, got {} and {}",
                self.t_lower, self.t_upper
            ));
        }
        if self.m < 0.0 || self.psi < 0.0 || self.sigma < 0.0 {
            errs.push("M, psi and sigma must be nonnegative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// `(1 / (1 - e^{-sigma T_lower})) (M + M^2/4) e^{psi T_upper}`.
    pub fn eta_infinity(&self) -> Result<f64> {
        let st = self.sigma * self.t_lower;
        if st == 0.0 {
            return Err(Error::DegenerateEnvelope);
        }
        let slack = self.m + self.m * self.m / 4.0;
        if slack == 0.0 {
            return Ok(0.0);
        }
        Ok(slack * (self.psi * self.t_upper).exp() / (1.0 - (-st).exp()))
    }
}

/// Envelope `e^{(sigma+psi) N* T_upper} (V0 e^{-sigma T_i} + eta_inf)` at time `t_i = T_i`.
pub fn sequence_envelope_bound(spec: &SequenceEnvelopeSpec, v0: f64, t_i: f64) -> Result<f64> {
    spec.validate()?;
    let eta = spec.eta_infinity()?;
    let inflation = ((spec.sigma + spec.psi) * spec.n_star as f64 * spec.t_upper).exp();
    Ok(inflation * (v0 * (-spec.sigma * t_i).exp() + eta))
}

/// Worst case of the lemma's recurrences: every step holds with equality.
/// Returns `(T_i, V(T_i))` for `i = 0..=gaps.len()`.
pub fn worst_case_recurrence(spec: &SequenceEnvelopeSpec, v0: f64, gaps: &[f64]) -> Vec<(f64, f64)> {
    let slack = spec.m + spec.m * spec.m / 4.0;
    let quarter = spec.m * spec.m / 4.0;
    let mut out = Vec::with_capacity(gaps.len() + 1);
    let (mut t, mut v) = (0.0, v0);
    out.push((t, v));
    for (i, &g) in gaps.iter().enumerate() {
        v = if spec.bad_indices.contains(&i) {
            (v + quarter) * (spec.psi * g).exp()
        } else {
            v * (-spec.sigma * g).exp() + slack * (spec.psi * g).exp()
        };
        t += g;
        out.push((t, v));
    }
    out
}

/// Inputs to the explicit gain bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBoundInputs {
    pub theta1: f64,
    pub theta2: f64,
    pub c1: f64,
    pub c2: f64,
    pub sigma: f64,
    pub dwell: DwellBounds,
    /// Gain growth rates per unit time while a slope is latched.
    pub delta1: f64,
    pub delta2: f64,
    /// Only used by the full-sensing bound.
    pub epsilon: f64,
}

/// Explicit bounds `(M1, M2)` with `|th_i|_inf <= max(th_i(0), M_i)`.
///
/// For full sensing only `M1` is meaningful: `theta + C^2/eps + sigma + Delta`
/// with `theta = theta1`, `C = c1`.
pub fn m_bounds(variant: Variant, p: &GainBoundInputs) -> (f64, f64) {
    let d = p.dwell;
    let cycle = d.t1_upper + d.t2_upper;
    match variant {
        Variant::GesAlg1 => (
            p.theta1 + (p.sigma * cycle + p.theta1 * d.t1_upper) / d.t1_lower
                + 2.0 * p.delta1 * d.t1_upper,
            p.theta2 + (p.sigma * cycle + p.theta2 * d.t2_upper) / d.t2_lower
                + 2.0 * p.delta2 * d.t2_upper,
        ),
        Variant::IssAlg3 | Variant::GuubAlg4 => (
            p.theta1
                + p.c1
                + ((p.theta1 + 1.0) * d.t2_upper + p.sigma * cycle) / d.t1_lower
                + 1.0
                + 2.0 * p.delta1 * d.t1_upper,
            p.theta2
                + p.c2
                + ((p.theta2 + 1.0) * d.t1_upper + p.sigma * cycle) / d.t2_lower
                + 1.0
                + 2.0 * p.delta2 * d.t2_upper,
        ),
        Variant::FullSensingAlg2 => {
            let m = p.theta1 + p.c1 * p.c1 / p.epsilon + p.sigma + p.delta1;
            (m, m)
        }
    }
}
