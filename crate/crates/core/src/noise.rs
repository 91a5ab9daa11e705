//! Analytic noise levels and estimation sensitivities.
//!
//! The measured quantity is a variance, normalized to the standard quantum
//! limit: 2|amplitude|^2 for the two-beam difference signal, |amplitude|^2 for
//! a single beam. For Gaussian signals the variance of a measured variance is
//! exactly twice its square, so every strategy shares
//! `delta_T^2 = 2 M^2 / |dM/dT|^2`.
//!
//! The two-beam noise is evaluated as
//!
//! ```text
//! M = 1 + 1/2 sum_i [ t_i^2 (va_i - 1) + b_i^2 (vb_i - 1) - 2 t_i b_i cross_i ]
//! ```
//!
//! where `t_i` are the masked-LO overlaps and `b_i` the raw reference-LO
//! overlaps. Basis weight not captured on either side enters as vacuum, which
//! is what the leading 1 encodes; when the reference LO is fully captured this
//! reduces to the familiar `1/2 + 1/2 sum[t^2 va + a^2 vb - 2 t a cross - t^2]`
//! form.

use crate::error::{Error, Result};
use crate::mask::OverlapSet;
use crate::state::StateSpec;

/// Measurement strategy the noise value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Difference signal of two homodyne detectors on entangled beams.
    TwoBeam,
    /// Single homodyne detector on the masked beam.
    SingleBeam,
    /// Two-beam configuration with all quantum cross-correlations removed.
    NoQuantum,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::TwoBeam => write!(f, "two-beam"),
            Strategy::SingleBeam => write!(f, "single-beam"),
            Strategy::NoQuantum => write!(f, "no-quantum"),
        }
    }
}

/// Global LO phase offsets for the two detectors, added to the per-mode
/// relative phases from the `OverlapSet`. Zero measures at the
/// squeezing-optimal quadratures.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoPhases {
    pub beam_a: f64,
    pub beam_b: f64,
}

/// SQL-normalized noise level together with its own variance (`2 m^2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseValue {
    pub m: f64,
    pub variance: f64,
    pub strategy: Strategy,
}

impl NoiseValue {
    fn new(m: f64, strategy: Strategy) -> Self {
        Self { m, variance: 2.0 * m * m, strategy }
    }
}

fn two_beam_noise(
    overlaps: &OverlapSet,
    state: &StateSpec,
    phases: LoPhases,
    keep_cross: bool,
    strategy: Strategy,
) -> Result<NoiseValue> {
    let mut acc = 0.0;
    for i in 0..overlaps.mode_count() {
        let noise = state.mode_noise(
            i + 1,
            phases.beam_a + overlaps.masked_phase[i],
            phases.beam_b + overlaps.reference_phase[i],
        )?;
        let t = overlaps.masked_overlap[i];
        let b = overlaps.raw_reference_overlap(i);
        let cross = if keep_cross { noise.cross } else { 0.0 };
        acc += t * t * (noise.var_a - 1.0) + b * b * (noise.var_b - 1.0) - 2.0 * t * b * cross;
    }
    let m = 1.0 + 0.5 * acc;
    if m < -1e-9 {
        return Err(Error::InvalidArgument(format!(
            "two-beam noise evaluated to {m}; overlaps and state are inconsistent"
        )));
    }
    Ok(NoiseValue::new(m.max(0.0), strategy))
}

/// Normalized noise of the two-beam difference signal.
pub fn m_tb(overlaps: &OverlapSet, state: &StateSpec, phases: LoPhases) -> Result<NoiseValue> {
    two_beam_noise(overlaps, state, phases, true, Strategy::TwoBeam)
}

/// Two-beam noise with the a-b cross correlations forced to zero: what a
/// classically correlated source can achieve at best.
pub fn m_nq(overlaps: &OverlapSet, state: &StateSpec, phases: LoPhases) -> Result<NoiseValue> {
    two_beam_noise(overlaps, state, phases, false, Strategy::NoQuantum)
}

/// Normalized noise of the single-beam signal,
/// `M = 1 + sum_i t_i^2 (va_i - 1)`.
pub fn m_sb(overlaps: &OverlapSet, state: &StateSpec, phase: f64) -> Result<NoiseValue> {
    let mut acc = 0.0;
    for i in 0..overlaps.mode_count() {
        let noise = state.mode_noise(i + 1, phase + overlaps.masked_phase[i], 0.0)?;
        let t = overlaps.masked_overlap[i];
        acc += t * t * (noise.var_a - 1.0);
    }
    Ok(NoiseValue::new(1.0 + acc, Strategy::SingleBeam))
}

/// Dispatch to the strategy's noise formula.
pub fn noise_for(
    strategy: Strategy,
    overlaps: &OverlapSet,
    state: &StateSpec,
    phases: LoPhases,
) -> Result<NoiseValue> {
    match strategy {
        Strategy::TwoBeam => m_tb(overlaps, state, phases),
        Strategy::SingleBeam => m_sb(overlaps, state, phases.beam_a),
        Strategy::NoQuantum => m_nq(overlaps, state, phases),
    }
}

/// Transmission-estimation uncertainty at one operating point.
///
/// A vanishing slope makes the estimate uninformative; that case is carried
/// as an infinite `delta_t2` with `degenerate` set, not as an error, since
/// scans legitimately cross zero-slope points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityResult {
    pub strategy: Strategy,
    pub t_value: f64,
    pub m: f64,
    pub dm_dt: f64,
    pub delta_t2: f64,
    pub degenerate: bool,
}

impl SensitivityResult {
    /// `delta_T^2 = 2 m^2 / (dm/dT)^2`.
    pub fn from_slope(strategy: Strategy, t_value: f64, m: f64, dm_dt: f64) -> Self {
        if dm_dt == 0.0 || !dm_dt.is_finite() {
            return Self { strategy, t_value, m, dm_dt, delta_t2: f64::INFINITY, degenerate: true };
        }
        let delta_t2 = 2.0 * m * m / (dm_dt * dm_dt);
        Self { strategy, t_value, m, dm_dt, delta_t2, degenerate: false }
    }
}

/// Closed-form single-beam sensitivity for a thermal state whose captured
/// transmission tracks T: `2 (T var + 1 - T)^2 / (var - 1)^2`.
pub fn dt2_sb_closed(var: f64, t_value: f64) -> Result<f64> {
    if var == 1.0 {
        return Err(Error::InvalidArgument(
            "a coherent state (variance 1) carries no transmission information".into(),
        ));
    }
    let m = t_value * var + 1.0 - t_value;
    let slope = var - 1.0;
    Ok(2.0 * m * m / (slope * slope))
}

/// Closed-form two-beam sensitivity in the matched-LO regime (T near 1):
/// `2 [(1-T)(var+1) + 2 T m0]^2 / [2 m0 - (var+1)]^2`.
pub fn dt2_tb_matched(var: f64, m0: f64, t_value: f64) -> f64 {
    let num = (1.0 - t_value) * (var + 1.0) + 2.0 * t_value * m0;
    let den = 2.0 * m0 - (var + 1.0);
    2.0 * num * num / (den * den)
}

/// Two-beam noise in the uniform-mode limit (every spatial mode excited with
/// identical statistics): `1 + (var-1)(T+1)/2 - (var - m0) * sum t_i a_i`.
pub fn m_tb_uniform(var: f64, m0: f64, t_value: f64, sum_t_alpha: f64) -> f64 {
    1.0 + 0.5 * (var - 1.0) * (t_value + 1.0) - (var - m0) * sum_t_alpha
}
