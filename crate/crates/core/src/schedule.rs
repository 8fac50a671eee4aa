//! Intermittent sensing schedule.
//!
//! Switching instants are indexed from 1 as `t_1 = 0 < t_2 < ...`. The
//! state on `(0, Y)` is available on `[t_{2k-1}, t_{2k})` and the state on
//! `(Y, 1)` on `[t_{2k}, t_{2k+1})`. The final window is closed by the
//! horizon rather than by another switching instant.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `u((0, Y), t)` measured.
    Sense1,
    /// `u((Y, 1), t)` measured.
    Sense2,
    /// Whole state measured (single-domain problem).
    FullSensing,
}

/// Lower/upper window lengths `(T1_lo, T1_hi, T2_lo, T2_hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellBounds {
    pub t1_lower: f64,
    pub t1_upper: f64,
    pub t2_lower: f64,
    pub t2_upper: f64,
}

impl DwellBounds {
    pub fn contains(&self, other: &DwellBounds) -> bool {
        other.t1_lower >= self.t1_lower
            && other.t1_upper <= self.t1_upper
            && other.t2_lower >= self.t2_lower
            && other.t2_upper <= self.t2_upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingSequence {
    instants: Vec<f64>,
    horizon: f64,
    dwell_bounds: Option<DwellBounds>,
}

impl SwitchingSequence {
    /// Instants must start at 0, increase strictly and stay below `horizon`.
    pub fn new(instants: Vec<f64>, horizon: f64) -> Result<Self> {
        check_monotone(&instants)?;
        if instants.first() != Some(&0.0) {
            return Err(Error::Validation(vec![
                "switching sequence must start at t_1 = 0".into(),
            ]));
        }
        if let Some(&last) = instants.last() {
            if !(horizon > last) {
                return Err(Error::Validation(vec![format!(
                    "horizon {horizon} must exceed the last switching instant {last}"
                )]));
            }
        }
        Ok(Self {
            instants,
            horizon,
            dwell_bounds: None,
        })
    }

    /// Attach declared dwell bounds; fails if the instants violate them.
    pub fn with_dwell_bounds(mut self, bounds: DwellBounds) -> Result<Self> {
        if self.instants.len() >= 3 {
            let empirical = validate_dwell(&self)?;
            if !bounds.contains(&empirical) {
                return Err(Error::Validation(vec![format!(
                    "switching instants violate the declared dwell bounds: empirical {empirical:?}, declared {bounds:?}"
                )]));
            }
        }
        self.dwell_bounds = Some(bounds);
        Ok(self)
    }

    /// Alternating windows of equal length `gap` up to `horizon`.
    pub fn uniform(gap: f64, horizon: f64) -> Result<Self> {
        if !(gap > 0.0) {
            return Err(Error::Validation(vec![format!("gap {gap} must be > 0")]));
        }
        let count = ((horizon / gap) - 1e-9).ceil().max(1.0) as usize;
        let instants = (0..count).map(|i| i as f64 * gap).collect();
        Self::new(instants, horizon)
    }

    /// Window lengths drawn uniformly inside `bounds`, deterministic in `seed`.
    pub fn random_in_bounds(bounds: DwellBounds, horizon: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut instants = vec![0.0];
        let mut t = 0.0;
        let mut sense1 = true;
        loop {
            let (lo, hi) = if sense1 {
                (bounds.t1_lower, bounds.t1_upper)
            } else {
                (bounds.t2_lower, bounds.t2_upper)
            };
            let gap = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            t += gap;
            if t >= horizon {
                break;
            }
            instants.push(t);
            sense1 = !sense1;
        }
        Self::new(instants, horizon)?.with_dwell_bounds(bounds)
    }

    pub fn instants(&self) -> &[f64] {
        &self.instants
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dwell_bounds(&self) -> Option<DwellBounds> {
        self.dwell_bounds
    }

    /// `t_i` with the 1-based index used throughout.
    pub fn instant(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.instants.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.instants.len(),
            });
        }
        Ok(self.instants[i - 1])
    }

    /// 1-based index `i` of the window `[t_i, t_{i+1})` containing `t`.
    pub fn window_index(&self, t: f64) -> Result<usize> {
        if !(t < self.horizon) {
            return Err(Error::BeyondHorizon {
                t,
                horizon: self.horizon,
            });
        }
        if t < 0.0 {
            return Err(Error::NegativeInput { name: "t", value: t });
        }
        Ok(self.instants.partition_point(|&ti| ti <= t))
    }
}

fn check_monotone(instants: &[f64]) -> Result<()> {
    for (i, w) in instants.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonmonotoneSequence { index: i + 2 });
        }
    }
    Ok(())
}

/// Sensing regime active at time `t`.
pub fn active_regime(seq: &SwitchingSequence, t: f64) -> Result<Regime> {
    let i = seq.window_index(t)?;
    Ok(if i % 2 == 1 {
        Regime::Sense1
    } else {
        Regime::Sense2
    })
}

/// Empirical dwell bounds over the complete windows `[t_i, t_{i+1})`.
///
/// A parity with no complete window reports the other parity's bounds.
pub fn validate_dwell(seq: &SwitchingSequence) -> Result<DwellBounds> {
    let t = seq.instants();
    check_monotone(t)?;
    if t.len() < 3 {
        return Err(Error::Validation(vec![format!(
            "dwell validation needs at least 3 switching instants, got {}",
            t.len()
        )]));
    }
    let mut odd = (f64::INFINITY, 0.0f64);
    let mut even = (f64::INFINITY, 0.0f64);
    for (i, w) in t.windows(2).enumerate() {
        let gap = w[1] - w[0];
        // windows(2) index 0 is [t_1, t_2): an I1 window.
        let slot = if i % 2 == 0 { &mut odd } else { &mut even };
        slot.0 = slot.0.min(gap);
        slot.1 = slot.1.max(gap);
    }
    Ok(DwellBounds {
        t1_lower: odd.0,
        t1_upper: odd.1,
        t2_lower: even.0,
        t2_upper: even.1,
    })
}

/// Comparison instants for the `k`-th cycle:
/// `((t_{2k-3}, t_{2k-1}), (t_{2k-2}, t_{2k}))`.
pub fn anchor_instants(seq: &SwitchingSequence, k: usize) -> Result<((f64, f64), (f64, f64))> {
    if k < 2 {
        return Err(Error::IndexOutOfRange { index: k, len: 2 });
    }
    Ok((
        (seq.instant(2 * k - 3)?, seq.instant(2 * k - 1)?),
        (seq.instant(2 * k - 2)?, seq.instant(2 * k)?),
    ))
}
