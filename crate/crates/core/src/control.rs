//! Discontinuous boundary feedback.
//!
//! With `l(V, th) = (1 + 3 th) V^{2/3} / 3`, the law
//!
//! ```text
//! kappa(V, w, th) = -sign(w) V^{1/3}           if |w| >= l(V, th)
//!                 = -3 (3 th + 1) V^{1/3}      otherwise
//! ```
//!
//! guarantees `P(kappa, w) = kappa^3 / 3 + kappa w <= -th V` on both
//! branches, which is what makes the boundary term dissipative.

use crate::schedule::Regime;
use crate::{Error, Result};

/// Inputs `(u1, u2)` for one step together with the regime they were built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub u1: f64,
    pub u2: f64,
    pub regime: Regime,
}

/// Clamp tiny negative Lyapunov values (quadrature round-off) to zero.
#[inline]
pub fn clamp_lyapunov(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

fn check_theta(theta_hat: f64) -> Result<()> {
    if theta_hat < 0.0 || theta_hat.is_nan() {
        return Err(Error::NegativeInput {
            name: "theta_hat",
            value: theta_hat,
        });
    }
    Ok(())
}

/// `(1/3)(1 + 3 th) V^{2/3}`.
pub fn threshold_l(v: f64, theta_hat: f64) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        return Err(Error::NegativeInput {
            name: "V",
            value: v,
        });
    }
    check_theta(theta_hat)?;
    Ok((1.0 + 3.0 * theta_hat) * v.cbrt().powi(2) / 3.0)
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Boundary feedback; ties `|omega| = l` take the first branch.
pub fn kappa(v: f64, omega: f64, theta_hat: f64) -> Result<f64> {
    let l = threshold_l(v, theta_hat)?;
    let root = v.cbrt();
    Ok(if omega.abs() >= l {
        -sign(omega) * root
    } else {
        -3.0 * (3.0 * theta_hat + 1.0) * root
    })
}

/// Boundary dissipation functional `u^3/3 + u omega`.
#[inline]
pub fn dissipation_p(u: f64, omega: f64) -> f64 {
    u * u * u / 3.0 + u * omega
}

/// Map the active regime and measurements to `(u1, u2)`.
///
/// In `Sense1` the left input is `kappa(V1, w_xxx(0), th1)`; in `Sense2`
/// the right input is `-kappa(V2, v_xxx(1), th2)`; in `FullSensing` the
/// left input is `kappa(V1, u_xxx(0), th1)` with `V1` the whole-domain value.
/// Negative Lyapunov values are clamped to zero first.
#[allow(clippy::too_many_arguments)]
pub fn assign_inputs(
    regime: Regime,
    v1: f64,
    v2: f64,
    w_xxx_0: f64,
    v_xxx_1: f64,
    theta1_hat: f64,
    theta2_hat: f64,
) -> Result<ControlDecision> {
    let (v1, v2) = (clamp_lyapunov(v1), clamp_lyapunov(v2));
    let (u1, u2) = match regime {
        Regime::Sense1 | Regime::FullSensing => (kappa(v1, w_xxx_0, theta1_hat)?, 0.0),
        Regime::Sense2 => (0.0, -kappa(v2, v_xxx_1, theta2_hat)?),
    };
    Ok(ControlDecision { u1, u2, regime })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert_relative_eq!(threshold_l(1.0, 0.0).unwrap(), 1.0 / 3.0);
        assert_eq!(threshold_l(0.0, 5.0).unwrap(), 0.0);
        assert_relative_eq!(threshold_l(8.0, 1.0).unwrap(), 16.0 / 3.0, max_relative = 1e-14);
        assert!(threshold_l(-1.0, 0.0).is_err());
        assert!(threshold_l(1.0, -1.0).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(1.0, 1.0, 0.0).unwrap(), -1.0);
        assert_eq!(kappa(1.0, 0.0, 0.0).unwrap(), -3.0);
        for &(w, th) in &[(-5.0, 0.0), (0.0, 3.0), (1e6, 100.0)] {
            assert_eq!(kappa(0.0, w, th).unwrap(), 0.0);
        }
        // Tie at |omega| = l goes to the first branch.
        let l = threshold_l(8.0, 1.0).unwrap();
        assert_relative_eq!(kappa(8.0, -l, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        assert!(kappa(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn dissipation_examples() {
        assert_eq!(dissipation_p(0.0, 17.0), 0.0);
        assert_relative_eq!(dissipation_p(-1.0, 1.0), -4.0 / 3.0);
        assert_eq!(dissipation_p(3.0, 0.0), 9.0);
    }

    #[test]
    fn input_assignment_examples() {
        let d = assign_inputs(Regime::Sense2, 123.0, 1.0, 5.0, 0.0, 7.0, 0.0).unwrap();
        assert_eq!(d.u1, 0.0);
        assert_eq!(d.u2, 3.0);
        let d = assign_inputs(Regime::Sense1, 1.0, 9.0, 1.0, 4.0, 0.0, 2.0).unwrap();
        assert_eq!((d.u1, d.u2), (-1.0, 0.0));
        let d = assign_inputs(Regime::FullSensing, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!((d.u1, d.u2), (-3.0, 0.0));
        // Round-off negatives are clamped instead of rejected.
        let d = assign_inputs(Regime::Sense1, -1e-18, 0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(d.u1, 0.0);
    }

    /// Second-branch dissipation in closed form: for |w| < l,
    /// P = -(3(3th+1))^3 V/3 - 3(3th+1) V^{1/3} w  <=  -9(3th+1)^3 V + (3th+1)^2 V.
    #[test]
    fn branchwise_algebra() {
        for &(v, th) in &[(1.0, 0.0), (0.3, 2.0), (10.0, 0.5)] {
            let l = threshold_l(v, th).unwrap();
            let a = 3.0 * th + 1.0;
            let worst2 = -9.0 * a.powi(3) * v + 3.0 * a * v.cbrt() * l;
            assert!(worst2 <= -th * v);
            // First branch worst case |w| = l.
            let worst1 = v / 3.0 - v.cbrt() * l;
            assert!(worst1 <= -th * v + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn dissipation_holds(v in 0.0f64..1e3, w in -1e6f64..1e6, th in 0.0f64..1e3) {
            let u = kappa(v, w, th).unwrap();
            prop_assert!(dissipation_p(u, w) <= -th * v + 1e-9 * (1.0 + th * v));
        }

        #[test]
        fn magnitude_bound(v in 0.0f64..1e3, w in -1e6f64..1e6, th in 0.0f64..1e3) {
            let u = kappa(v, w, th).unwrap();
            prop_assert!(u.abs() <= 3.0 * (3.0 * th + 1.0) * v.cbrt() * (1.0 + 1e-15));
        }

        #[test]
        fn first_branch_opposes_omega(v in 1e-6f64..1e3, w in -1e6f64..1e6, th in 0.0f64..1e3) {
            let l = threshold_l(v, th).unwrap();
            prop_assume!(w.abs() >= l && w != 0.0);
            let u = kappa(v, w, th).unwrap();
            prop_assert_eq!(u.signum(), -w.signum());
        }
    }
}
