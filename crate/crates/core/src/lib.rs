//! Adaptive boundary control of the one-dimensional (noisy)
//! Kuramoto-Sivashinsky equation under intermittent sensing.
//!
//! The crate is organised bottom-up:
//!
//! - [`rbf`]: multiquadric collocation nodes, differentiation matrices and
//!   one-sided boundary stencils.
//! - [`model`]: semi-discrete dynamics on one subdomain with pinned
//!   boundary nodes.
//! - [`schedule`]: switching instants, sensing windows and dwell bounds.
//! - [`control`]: the discontinuous boundary feedback and input assignment.
//! - [`adaptation`]: the four gain-update state machines.
//! - [`monitor`]: Riemann-sum Lyapunov values, trajectory logs and
//!   certificate checks.
//! - [`oracles`]: nominal constants, interpolation and comparison
//!   inequalities, switched-sequence envelopes and gain bounds.
//! - [`sim`]: closed-loop time stepping.
//! - [`config`] and [`csv_io`]: experiment documents, presets and CSV files.
//! - [`par`]: data-parallel helpers with a sequential fallback.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod config;
pub mod control;
pub mod csv_io;
pub mod model;
pub mod monitor;
pub mod oracles;
pub mod par;
pub mod rbf;
pub mod schedule;
pub mod sim;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: a = {a} must be < b = {b}")]
    InvalidInterval { a: f64, b: f64 },
    #[error("too few nodes: {n} < {min}")]
    TooFewNodes { n: usize, min: usize },
    #[error("invalid shape parameter {0}: must be > 0")]
    InvalidShape(f64),
    #[error("singular interpolation matrix: condition number {conditioning:e} exceeds {cap:e}")]
    SingularInterpolation { conditioning: f64, cap: f64 },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite right-hand side at node {node}")]
    NonFiniteRhs { node: usize },
    #[error("time {t} lies beyond the schedule horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("switching instants are not strictly increasing at index {index}")]
    NonmonotoneSequence { index: usize },
    #[error("negative input {name} = {value}")]
    NegativeInput { name: &'static str, value: f64 },
    #[error("missing anchor sample for switching instant index {0}")]
    MissingAnchor(usize),
    #[error("trajectory log is empty")]
    EmptyLog,
    #[error("need at least {need} logs, got {got}")]
    InsufficientLogs { need: usize, got: usize },
    #[error("quadrature needs at least {min} samples, got {got}")]
    QuadratureDegenerate { got: usize, min: usize },
    #[error("degenerate envelope: sigma * T_lower = 0")]
    DegenerateEnvelope,
    #[error("interface position Y = {0} must lie strictly inside (0, 1)")]
    InvalidY(f64),
    #[error("blow-up at t = {t:e}: |value| = {max_abs:e} exceeds cap {cap:e}")]
    BlowUp {
        t: f64,
        max_abs: f64,
        cap: f64,
        log: Box<monitor::TrajectoryLog>,
    },
    #[error("unstable time step: dt * operator norm = {product:.3} > 2")]
    UnstableDt { product: f64 },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
