//! TOML experiment documents and built-in presets.
//!
//! A document has the sections `[domain]`, `[scheme]`, `[lambda]`,
//! `[forcing]`, `[schedule]`, `[adaptation]` and `[output]`. Unknown keys
//! are rejected. A bare preset name (`ges_fig2`, `guub_fig4`,
//! `full_sensing`) is accepted wherever a path is.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adaptation::{AdaptationConfig, GainClock};
use crate::model::{Forcing, LambdaProfile};
use crate::schedule::{DwellBounds, SwitchingSequence};
use crate::sim::{ExperimentConfig, Integrator, Mode};
use crate::{Error, Result};

pub const PRESETS: &[(&str, &str)] = &[
    ("ges_fig2", include_str!("../presets/ges_fig2.toml")),
    ("guub_fig4", include_str!("../presets/guub_fig4.toml")),
    ("full_sensing", include_str!("../presets/full_sensing.toml")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub name: Option<String>,
    pub mode: Mode,
    pub domain: DomainSection,
    pub scheme: SchemeSection,
    pub lambda: LambdaSection,
    #[serde(default)]
    pub forcing: ForcingSection,
    pub schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default = "default_y")]
    pub y: f64,
    pub nodes: usize,
    pub shape: f64,
    pub amplitude: f64,
    /// Amplitudes used by `sweep` when none are given on the command line.
    #[serde(default)]
    pub sweep_amplitudes: Vec<f64>,
}

fn default_y() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaSection {
    Constant { value: f64 },
    Sampled { xs: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSection {
    #[default]
    Zero,
    Sinusoid { amplitude: f64, omega: f64 },
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSection {
    Explicit {
        instants: Vec<f64>,
        bounds: Option<[f64; 4]>,
    },
    Uniform {
        gap: f64,
    },
    Random {
        /// `[T1_lower, T1_upper, T2_lower, T2_upper]`.
        bounds: [f64; 4],
        seed: u64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSection {
    #[serde(default = "d_delta")]
    pub delta1: f64,
    #[serde(default = "d_delta")]
    pub delta2: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_one")]
    pub epsilon: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default)]
    pub c1: f64,
    #[serde(default)]
    pub c2: f64,
    #[serde(default)]
    pub theta1_init: f64,
    #[serde(default)]
    pub theta2_init: f64,
    #[serde(default)]
    pub clock: GainClock,
}

fn d_delta() -> f64 {
    0.01
}
fn d_sigma() -> f64 {
    100.0
}
fn d_one() -> f64 {
    1.0
}
fn d_tau() -> f64 {
    1e-3
}

impl Default for AdaptationSection {
    fn default() -> Self {
        Self {
            delta1: d_delta(),
            delta2: d_delta(),
            sigma: d_sigma(),
            epsilon: d_one(),
            tau: d_tau(),
            c1: 0.0,
            c2: 0.0,
            theta1_init: 0.0,
            theta2_init: 0.0,
            clock: GainClock::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_log_stride")]
    pub log_stride: usize,
    #[serde(default = "d_snapshot_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "d_cap")]
    pub blowup_cap: f64,
    /// Directory for CSV output; relative paths resolve against the CWD.
    pub dir: Option<PathBuf>,
    /// Write `snapshot_<index>.csv` files alongside the trajectory.
    #[serde(default = "d_true")]
    pub snapshots: bool,
}

fn d_log_stride() -> usize {
    10
}
fn d_snapshot_stride() -> usize {
    100
}
fn d_cap() -> f64 {
    1e9
}
fn d_true() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            log_stride: d_log_stride(),
            snapshot_stride: d_snapshot_stride(),
            blowup_cap: d_cap(),
            dir: None,
            snapshots: true,
        }
    }
}

fn bounds_from(b: [f64; 4]) -> DwellBounds {
    DwellBounds {
        t1_lower: b[0],
        t1_upper: b[1],
        t2_lower: b[2],
        t2_upper: b[3],
    }
}

impl ConfigDocument {
    pub fn parse(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Build and validate the experiment.
    pub fn to_experiment(&self) -> Result<ExperimentConfig> {
        let t_final = self.scheme.t_final;
        let schedule = match &self.schedule {
            None => None,
            Some(ScheduleSection::Explicit { instants, bounds }) => {
                let s = SwitchingSequence::new(instants.clone(), t_final)?;
                Some(match bounds {
                    Some(b) => s.with_dwell_bounds(bounds_from(*b))?,
                    None => s,
                })
            }
            Some(ScheduleSection::Uniform { gap }) => Some(SwitchingSequence::uniform(*gap, t_final)?),
            Some(ScheduleSection::Random { bounds, seed }) => Some(
                SwitchingSequence::random_in_bounds(bounds_from(*bounds), t_final, *seed)?,
            ),
        };
        let a = &self.adaptation;
        let adaptation = AdaptationConfig {
            variant: self.mode.variant(),
            delta1: a.delta1,
            delta2: a.delta2,
            sigma: a.sigma,
            epsilon: a.epsilon,
            tau: a.tau,
            c1: a.c1,
            c2: a.c2,
            theta1_init: a.theta1_init,
            theta2_init: a.theta2_init,
            clock: a.clock,
        };
        let cfg = ExperimentConfig {
            name: self.name.clone().unwrap_or_else(|| "experiment".into()),
            mode: self.mode,
            y: self.domain.y,
            n_per_subdomain: self.domain.nodes,
            c: self.domain.shape,
            dt: self.scheme.dt,
            t_final,
            lambda: match &self.lambda {
                LambdaSection::Constant { value } => LambdaProfile::Constant(*value),
                LambdaSection::Sampled { xs, values } => {
                    if xs.len() != values.len() || xs.is_empty() {
                        return Err(Error::Validation(vec![
                            "lambda.xs and lambda.values must be nonempty and of equal length"
                                .into(),
                        ]));
                    }
                    LambdaProfile::Sampled {
                        xs: xs.clone(),
                        values: values.clone(),
                    }
                }
            },
            forcing: match &self.forcing {
                ForcingSection::Zero => Forcing::Zero,
                ForcingSection::Sinusoid { amplitude, omega } => Forcing::Sinusoid {
                    amplitude: *amplitude,
                    omega: *omega,
                },
                ForcingSection::Tabulated { times, values } => {
                    if times.len() != values.len() || times.is_empty() {
                        return Err(Error::Validation(vec![
                            "forcing.times and forcing.values must be nonempty and of equal length"
                                .into(),
                        ]));
                    }
                    Forcing::Tabulated {
                        times: times.clone(),
                        values: values.clone(),
                    }
                }
            },
            amplitude: self.domain.amplitude,
            schedule,
            adaptation,
            snapshot_stride: self.output.snapshot_stride,
            log_stride: self.output.log_stride,
            blowup_cap: self.output.blowup_cap,
            integrator: self.scheme.integrator,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Load a document from a file path or a preset name.
pub fn load_document(path_or_preset: &str) -> Result<ConfigDocument> {
    if let Some(src) = preset_source(path_or_preset) {
        return ConfigDocument::parse(src);
    }
    let path = Path::new(path_or_preset);
    if !path.exists() {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        return Err(Error::Parse(format!(
            "'{path_or_preset}' is neither a readable file nor a preset ({})",
            names.join(", ")
        )));
    }
    let src = std::fs::read_to_string(path)?;
    ConfigDocument::parse(&src)
}

/// Fully validated experiment from a path or preset name.
pub fn parse_config(path_or_preset: &str) -> Result<ExperimentConfig> {
    load_document(path_or_preset)?.to_experiment()
}
