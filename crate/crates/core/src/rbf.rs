//! Multiquadric RBF collocation on a single subdomain.
//!
//! Differentiation matrices follow the Kansa construction with a cubic
//! polynomial tail. With the interpolation matrix
//! `A[i][j] = phi(|x_i - x_j|)`, monomials `P[i][m] = s_i^m` in the scaled
//! coordinate `s = (x - a) / (b - a)`, and their `k`-th derivatives `B_k`,
//! `P_k` at the nodes, the interpolant solves
//!
//! ```text
//! [ A   P ] [alpha]   [u]
//! [ P^T 0 ] [beta ] = [0]
//! ```
//!
//! and `D_k` is the first `n` columns of `[B_k P_k] M^{-1}`. The tail makes
//! the operators exact on cubics; without it a ten-node multiquadric
//! matrix maps constants to fourth derivatives of order `10^2`.
//!
//! Boundary derivatives used by the controller are not taken from `D_k`;
//! they come from one-sided finite-difference stencils (see
//! [`BoundaryStencil`]).

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Minimum node count: four boundary constraints plus interior dynamics.
pub const MIN_NODES: usize = 6;

/// Interpolation matrices whose 2-norm condition number exceeds this are
/// rejected as numerically singular.
pub const CONDITIONING_CAP: f64 = 1e12;

/// Degree of the polynomial tail appended to the multiquadric basis.
pub const TAIL_DEGREE: usize = 3;

/// Hardy multiquadric `sqrt(r^2 + c^2)`.
#[inline]
pub fn multiquadric(r: f64, c: f64) -> f64 {
    (r * r + c * c).sqrt()
}

/// k-th derivative (k = 0..=4) of `s -> sqrt(s^2 + c^2)` at signed offset `s`.
fn multiquadric_derivative(s: f64, c: f64, order: usize) -> f64 {
    let c2 = c * c;
    let q = s * s + c2;
    let sq = q.sqrt();
    match order {
        0 => sq,
        1 => s / sq,
        2 => c2 / (q * sq),
        3 => -3.0 * c2 * s / (q * q * sq),
        4 => 3.0 * c2 * (4.0 * s * s - c2) / (q * q * q * sq),
        _ => unreachable!("multiquadric derivatives are provided up to order 4"),
    }
}

/// Collocation nodes on `[a, b]` plus the multiquadric shape parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    shape_parameter: f64,
    a: f64,
    b: f64,
}

impl SpatialGrid {
    /// `n` uniformly spaced nodes from `a` to `b` inclusive.
    pub fn uniform(a: f64, b: f64, n: usize, c: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        if n < MIN_NODES {
            return Err(Error::TooFewNodes { n, min: MIN_NODES });
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidShape(c));
        }
        let span = b - a;
        let last = (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|j| a + span * j as f64 / last).collect();
        nodes[n - 1] = b;
        Ok(Self {
            nodes,
            shape_parameter: c,
            a,
            b,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape_parameter(&self) -> f64 {
        self.shape_parameter
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Uniform node spacing.
    pub fn spacing(&self) -> f64 {
        (self.b - self.a) / (self.len() - 1) as f64
    }
}

/// Shorthand for [`SpatialGrid::uniform`].
pub fn build_grid(a: f64, b: f64, n: usize, c: f64) -> Result<SpatialGrid> {
    SpatialGrid::uniform(a, b, n, c)
}

/// Dense nodal differentiation matrices of orders 1, 2 and 4.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOperators {
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub d4: DMatrix<f64>,
    /// 2-norm condition number of the interpolation matrix.
    pub interp_conditioning: f64,
}

impl DerivativeOperators {
    pub fn dim(&self) -> usize {
        self.d1.nrows()
    }

    /// Maximum absolute row sum of `lambda_sup * d2 + d4`, the quantity the
    /// explicit-step stability guard is checked against.
    pub fn linear_operator_norm(&self, lambda_sup: f64) -> f64 {
        let composite = &self.d2 * lambda_sup + &self.d4;
        composite
            .row_iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn basis_matrix(grid: &SpatialGrid, order: usize) -> DMatrix<f64> {
    let x = grid.nodes();
    let c = grid.shape_parameter();
    DMatrix::from_fn(x.len(), x.len(), |i, j| {
        multiquadric_derivative(x[i] - x[j], c, order)
    })
}

/// `d^k/dx^k` of `s^m` with `s = (x - a) / len`, as a function of `s`.
fn monomial_derivative(s: f64, m: usize, k: usize, len: f64) -> f64 {
    if k > m {
        return 0.0;
    }
    let falling: f64 = ((m - k + 1)..=m).map(|v| v as f64).product();
    falling * s.powi((m - k) as i32) / len.powi(k as i32)
}

/// Assemble `D_k` for k in {1, 2, 4} (see the module docs).
pub fn build_derivative_operators(grid: &SpatialGrid) -> Result<DerivativeOperators> {
    let a = basis_matrix(grid, 0);
    let singular = a.clone().singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let conditioning = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(conditioning <= CONDITIONING_CAP) {
        return Err(Error::SingularInterpolation {
            conditioning,
            cap: CONDITIONING_CAP,
        });
    }

    let n = grid.len();
    let m = TAIL_DEGREE + 1;
    let (lo, hi) = grid.interval();
    let len = hi - lo;
    let s: Vec<f64> = grid.nodes().iter().map(|x| (x - lo) / len).collect();
    let mut saddle = DMatrix::zeros(n + m, n + m);
    saddle.view_mut((0, 0), (n, n)).copy_from(&a);
    for i in 0..n {
        for p in 0..m {
            let v = s[i].powi(p as i32);
            saddle[(i, n + p)] = v;
            saddle[(n + p, i)] = v;
        }
    }
    // The saddle matrix is symmetric, so D M = [B_k P_k] becomes M D^T = [B_k P_k]^T.
    let lu = saddle.lu();
    let solve = |k: usize| -> Result<DMatrix<f64>> {
        let b = basis_matrix(grid, k);
        let rhs = DMatrix::from_fn(n + m, n, |r, i| {
            if r < n {
                b[(i, r)]
            } else {
                monomial_derivative(s[i], r - n, k, len)
            }
        });
        lu.solve(&rhs)
            .map(|dt| dt.rows(0, n).transpose())
            .ok_or(Error::SingularInterpolation {
                conditioning,
                cap: CONDITIONING_CAP,
            })
    };

    Ok(DerivativeOperators {
        d1: solve(1)?,
        d2: solve(2)?,
        d4: solve(4)?,
        interp_conditioning: conditioning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilSide {
    Left,
    Right,
}

/// One-sided finite-difference stencil at a subdomain end.
///
/// Weights are expressed in units of `spacing^-order`; the left stencil is
/// the forward difference on nodes `0..=order`, the right one the backward
/// difference on the last `order + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStencil {
    pub side: StencilSide,
    pub order: usize,
    pub weights: Vec<f64>,
    pub node_indices: Vec<usize>,
}

impl BoundaryStencil {
    /// Minimal one-sided stencil (`order + 1` points) on a grid of `n` nodes.
    pub fn minimal(side: StencilSide, order: usize, n: usize) -> Result<Self> {
        let points = order + 1;
        if order == 0 || points > n {
            return Err(Error::IndexOutOfRange {
                index: points,
                len: n,
            });
        }
        // Offsets in units of spacing measured from the boundary node.
        let offsets: Vec<f64> = match side {
            StencilSide::Left => (0..points).map(|j| j as f64).collect(),
            StencilSide::Right => (0..points).map(|j| -(j as f64)).collect(),
        };
        let weights = fd_weights(&offsets, order);
        let node_indices = match side {
            StencilSide::Left => (0..points).collect(),
            StencilSide::Right => (0..points).map(|j| n - 1 - j).collect(),
        };
        Ok(Self {
            side,
            order,
            weights,
            node_indices,
        })
    }
}

/// Finite-difference weights for the `order`-th derivative at offset 0
/// from samples at `offsets`, by solving the moment (Vandermonde) system
/// `sum_j w_j o_j^m = m! [m == order]` for m < offsets.len().
fn fd_weights(offsets: &[f64], order: usize) -> Vec<f64> {
    let p = offsets.len();
    let vander = DMatrix::from_fn(p, p, |m, j| offsets[j].powi(m as i32));
    let mut rhs = DVector::zeros(p);
    rhs[order] = (1..=order).map(|k| k as f64).product::<f64>();
    let w = vander
        .lu()
        .solve(&rhs)
        .expect("distinct offsets give a nonsingular Vandermonde system");
    // The exact weights are integers for unit-spaced offsets; snap the
    // round-off so the stencils are reproducible to the bit.
    w.iter()
        .map(|v| {
            let r = v.round();
            if (v - r).abs() < 1e-9 {
                r
            } else {
                *v
            }
        })
        .collect()
}

/// Apply a boundary stencil to nodal values with uniform `spacing`.
pub fn boundary_derivative(values: &[f64], stencil: &BoundaryStencil, spacing: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (&idx, &w) in stencil.node_indices.iter().zip(&stencil.weights) {
        let v = values.get(idx).ok_or(Error::IndexOutOfRange {
            index: idx,
            len: values.len(),
        })?;
        acc += w * v;
    }
    Ok(acc / spacing.powi(stencil.order as i32))
}
