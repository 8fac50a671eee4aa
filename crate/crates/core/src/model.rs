//! Semi-discrete noisy KS dynamics on one subdomain.
//!
//! The evolved unknowns are the interior nodal values. The four nodes
//! nearest the two ends are algebraically pinned by the boundary
//! constraints: the Dirichlet value sits on the end node and the
//! homogeneous Neumann condition is imposed by copying that value onto
//! the adjacent node, which is exactly what the two-point one-sided
//! difference reads as a zero slope.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::rbf::{build_derivative_operators, DerivativeOperators, SpatialGrid};
use crate::{Error, Result};

/// Nodal values of `w` (on `(0, Y)`) or `v` (on `(Y, 1)`) at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainState {
    pub values: Vec<f64>,
    pub time: f64,
}

impl SubdomainState {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Which side of the interface the subdomain lies on.
///
/// `LeftOfY` carries the control at its left end (`w(0) = u1`) and is
/// clamped at its right end; `RightOfY` is the mirror image. The
/// full-sensing problem on `(0, 1)` uses the `LeftOfY` layout, since its
/// boundary set `u(0) = u1, u(1) = u_x(0) = u_x(1) = 0` has the same shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    LeftOfY,
    RightOfY,
}

/// Dirichlet control at the actuated end of a subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryInput {
    pub dirichlet_control: f64,
}

impl BoundaryInput {
    pub fn new(u: f64) -> Self {
        Self {
            dirichlet_control: u,
        }
    }
}

/// Destabilizing coefficient `lambda(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaProfile {
    Constant(f64),
    /// Piecewise-linear through `(xs[i], values[i])`, held constant outside.
    Sampled { xs: Vec<f64>, values: Vec<f64> },
}

impl LambdaProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LambdaProfile::Constant(v) => *v,
            LambdaProfile::Sampled { xs, values } => piecewise_linear(xs, values, x),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            LambdaProfile::Constant(v) => v.abs(),
            LambdaProfile::Sampled { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Sup norm of the derivative (largest segment slope for sampled data).
    pub fn prime_sup(&self) -> f64 {
        match self {
            LambdaProfile::Constant(_) => 0.0,
            LambdaProfile::Sampled { xs, values } => xs
                .windows(2)
                .zip(values.windows(2))
                .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

fn piecewise_linear(xs: &[f64], values: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[xs.len() - 1] {
        return values[values.len() - 1];
    }
    let k = xs.partition_point(|&xi| xi <= x) - 1;
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Forcing term `f(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    /// `amplitude * sin(omega * t)`, uniform in space.
    Sinusoid { amplitude: f64, omega: f64 },
    /// Piecewise-linear in time, uniform in space.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl Forcing {
    pub fn eval(&self, _x: f64, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Sinusoid { amplitude, omega } => amplitude * (omega * t).sin(),
            Forcing::Tabulated { times, values } => piecewise_linear(times, values, t),
        }
    }

    /// `|f|_inf`.
    pub fn sup(&self) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Sinusoid { amplitude, .. } => amplitude.abs(),
            Forcing::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

/// Reference destabilizing coefficient `4 pi^2 / 0.25 + 50`.
pub fn reference_lambda() -> f64 {
    4.0 * PI * PI / 0.25 + 50.0
}

/// Everything needed to evaluate the semi-discrete right-hand side on one
/// subdomain. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SubdomainModel {
    pub grid: SpatialGrid,
    pub ops: DerivativeOperators,
    pub lambda_values: Vec<f64>,
    pub lambda_sup: f64,
    pub lambda_prime_sup: f64,
    pub forcing: Forcing,
    /// `|f|_inf` when known to the designer; `None` marks it unknown.
    pub forcing_sup: Option<f64>,
    pub side: Side,
    /// Include the `w w_x` term. Turning it off leaves the linear operator.
    pub include_advection: bool,
}

impl SubdomainModel {
    pub fn new(
        grid: SpatialGrid,
        lambda: &LambdaProfile,
        forcing: Forcing,
        forcing_sup: Option<f64>,
        side: Side,
    ) -> Result<Self> {
        let ops = build_derivative_operators(&grid)?;
        let lambda_values: Vec<f64> = grid.nodes().iter().map(|&x| lambda.eval(x)).collect();
        let sampled_sup = lambda_values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        Ok(Self {
            grid,
            ops,
            lambda_values,
            lambda_sup: lambda.sup().max(sampled_sup),
            lambda_prime_sup: lambda.prime_sup(),
            forcing,
            forcing_sup,
            side,
            include_advection: true,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Indices that are algebraically pinned by the boundary constraints.
    pub fn pinned(&self) -> [usize; 4] {
        let n = self.len();
        [0, 1, n - 2, n - 1]
    }

    /// Indices evolved by the time integrator.
    pub fn interior(&self) -> std::ops::Range<usize> {
        2..self.len() - 2
    }
}

/// Pin the boundary nodes in place for the given input.
pub fn apply_boundary_constraints_in_place(
    values: &mut [f64],
    side: Side,
    input: BoundaryInput,
) {
    let n = values.len();
    let u = input.dirichlet_control;
    match side {
        Side::LeftOfY => {
            values[0] = u;
            values[1] = u;
            values[n - 2] = 0.0;
            values[n - 1] = 0.0;
        }
        Side::RightOfY => {
            values[0] = 0.0;
            values[1] = 0.0;
            values[n - 2] = u;
            values[n - 1] = u;
        }
    }
}

pub fn apply_boundary_constraints(
    state: &SubdomainState,
    model: &SubdomainModel,
    input: BoundaryInput,
) -> SubdomainState {
    let mut out = state.clone();
    apply_boundary_constraints_in_place(&mut out.values, model.side, input);
    out
}

/// Time derivative of every nodal value; pinned nodes get 0.
pub fn rhs(state: &SubdomainState, model: &SubdomainModel, t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; model.len()];
    rhs_into(&state.values, model, t, &mut out)?;
    Ok(out)
}

/// Allocation-light variant of [`rhs`] used by the integrator.
pub fn rhs_into(values: &[f64], model: &SubdomainModel, t: f64, out: &mut [f64]) -> Result<()> {
    let w = DVector::from_column_slice(values);
    let wx = &model.ops.d1 * &w;
    let wxx = &model.ops.d2 * &w;
    let wxxxx = &model.ops.d4 * &w;
    let nodes = model.grid.nodes();
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in model.interior() {
        let advection = if model.include_advection {
            w[j] * wx[j]
        } else {
            0.0
        };
        let value = model.forcing.eval(nodes[j], t)
            - advection
            - model.lambda_values[j] * wxx[j]
            - wxxxx[j];
        if !value.is_finite() {
            return Err(Error::NonFiniteRhs { node: j });
        }
        out[j] = value;
    }
    Ok(())
}
