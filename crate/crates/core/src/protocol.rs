//! End-to-end estimation pipelines.
//!
//! A scan displaces the square LO of beam a along one axis across the mask,
//! records the LO transmission and the mode-space overlaps at every position,
//! and evaluates the analytic noise of each strategy. The reference (beam b)
//! LO stays fixed at the matched shape of the scan origin. Transmission and
//! noise both have a kink at the matched point, so dM/dT there is taken as
//! the ratio of second central differences M''/T'', which converges to the
//! one-sided slope along the physical scan; a Richardson step-doubling check
//! guards the estimate.
//!
//! Binary masks are pixel-sampled, so scan and stencil steps must move the LO
//! by at least two grid pixels; [`scan_displacement`] rejects anything finer.

use rayon::prelude::*;

use crate::basis::{HgBasis, TransverseGrid};
use crate::error::{Error, Result};
use crate::mask::{expansion_coeffs, masked_lo, square_lo, MaskSpec, OverlapSet};
use crate::montecarlo::{sample_difference_signal, sample_single_signal, McRun};
use crate::noise::{
    dt2_sb_closed, m_nq, m_sb, m_tb, m_tb_uniform, LoPhases, SensitivityResult, Strategy,
};
use crate::state::StateSpec;

/// Which transmission is treated as the estimand when differentiating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimand {
    /// Total LO transmission through the mask.
    #[default]
    TTotal,
    /// Transmission captured by the truncated analysis basis.
    TCaptured,
}

/// Shape of the reference-beam LO during a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceLo {
    /// Square LO matched to the scan origin (the paper's measurement layout).
    #[default]
    MatchedSquare,
    /// First basis mode only: the single-mode variant of the uniform analysis.
    SingleMode,
}

/// One scan position with everything needed to re-evaluate noise levels.
#[derive(Debug, Clone)]
pub struct ScanSample {
    pub displacement: f64,
    pub t_total: f64,
    pub t_captured: f64,
    pub overlaps: OverlapSet,
    pub m_tb: f64,
    pub m_sb: f64,
    pub m_nq: f64,
}

impl ScanSample {
    pub fn m(&self, strategy: Strategy) -> f64 {
        match strategy {
            Strategy::TwoBeam => self.m_tb,
            Strategy::SingleBeam => self.m_sb,
            Strategy::NoQuantum => self.m_nq,
        }
    }

    fn estimand(&self, estimand: Estimand) -> f64 {
        match estimand {
            Estimand::TTotal => self.t_total,
            Estimand::TCaptured => self.t_captured,
        }
    }
}

/// Noise versus transmission along a displacement scan, with enough context
/// to differentiate noise with respect to the transmission.
#[derive(Debug, Clone)]
pub struct TransmissionCurve {
    samples: Vec<ScanSample>,
    estimand: Estimand,
}

impl TransmissionCurve {
    pub fn samples(&self) -> &[ScanSample] {
        &self.samples
    }

    pub fn estimand(&self) -> Estimand {
        self.estimand
    }

    /// Index of the central sample (scan grids are odd-length by contract).
    pub fn center_index(&self) -> usize {
        self.samples.len() / 2
    }

    /// Re-evaluate the analytic noise values for a different state or phase
    /// choice, reusing the stored overlaps.
    pub fn reevaluate(&self, state: &StateSpec, phases: LoPhases) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(ScanSample {
                    m_tb: m_tb(&s.overlaps, state, phases)?.m,
                    m_sb: m_sb(&s.overlaps, state, phases.beam_a)?.m,
                    m_nq: m_nq(&s.overlaps, state, phases)?.m,
                    ..s.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, estimand: self.estimand })
    }

    /// Replace the noise values of one strategy (used to drive the pipeline
    /// with Monte Carlo estimates instead of analytic ones).
    pub fn with_m_values(&self, strategy: Strategy, values: &[f64]) -> Result<Self> {
        if values.len() != self.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "got {} replacement values for {} samples",
                values.len(),
                self.samples.len()
            )));
        }
        let samples = self
            .samples
            .iter()
            .zip(values)
            .map(|(s, &m)| {
                let mut s = s.clone();
                match strategy {
                    Strategy::TwoBeam => s.m_tb = m,
                    Strategy::SingleBeam => s.m_sb = m,
                    Strategy::NoQuantum => s.m_nq = m,
                }
                s
            })
            .collect();
        Ok(Self { samples, estimand: self.estimand })
    }
}

fn validate_d_grid(d_grid: &[f64]) -> Result<()> {
    if d_grid.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "scan needs at least 5 displacement samples for second differences, got {}",
            d_grid.len()
        )));
    }
    if d_grid.len() % 2 == 0 {
        return Err(Error::InvalidArgument(
            "scan grids must have an odd number of samples so a central sample exists".into(),
        ));
    }
    if d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "displacement samples must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Scan the beam-a LO across the mask. The reference LO is pinned to the
/// matched shape at `reference_displacement` (the scan origin for centered
/// masks).
pub fn scan_displacement_at(
    mask: &MaskSpec,
    basis: &HgBasis,
    state: &StateSpec,
    d_grid: &[f64],
    lo_half_width: f64,
    reference_displacement: f64,
    reference_lo: ReferenceLo,
    estimand: Estimand,
    phases: LoPhases,
) -> Result<TransmissionCurve> {
    validate_d_grid(d_grid)?;
    let grid = basis.grid();
    let min_step = d_grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if min_step < 2.0 * grid.spacing() - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "scan step {min_step} is below two grid pixels ({}); finite differences on a \
             pixel-sampled mask need coarser steps or a finer grid",
            2.0 * grid.spacing()
        )));
    }
    let reference = match reference_lo {
        ReferenceLo::MatchedSquare => square_lo(reference_displacement, lo_half_width, grid)?,
        ReferenceLo::SingleMode => basis.profile(0)?,
    };
    let samples: Vec<ScanSample> = d_grid
        .par_iter()
        .map(|&d| {
            let lo = square_lo(d, lo_half_width, grid)?;
            let masked = masked_lo(&lo, mask)?;
            let overlaps = expansion_coeffs(&masked, &reference, basis)?;
            Ok(ScanSample {
                displacement: d,
                t_total: overlaps.lo_transmission,
                t_captured: overlaps.captured_transmission,
                m_tb: m_tb(&overlaps, state, phases)?.m,
                m_sb: m_sb(&overlaps, state, phases.beam_a)?.m,
                m_nq: m_nq(&overlaps, state, phases)?.m,
                overlaps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionCurve { samples, estimand })
}

/// [`scan_displacement_at`] with the reference LO at the scan origin and the
/// default estimand.
pub fn scan_displacement(
    mask: &MaskSpec,
    basis: &HgBasis,
    state: &StateSpec,
    d_grid: &[f64],
    lo_half_width: f64,
    phases: LoPhases,
) -> Result<TransmissionCurve> {
    scan_displacement_at(
        mask,
        basis,
        state,
        d_grid,
        lo_half_width,
        0.0,
        ReferenceLo::MatchedSquare,
        Estimand::TTotal,
        phases,
    )
}

/// Symmetric displacement grid with exactly mirrored samples.
pub fn symmetric_d_grid(half_range: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 5 || steps % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "symmetric scans need an odd number of steps >= 5, got {steps}"
        )));
    }
    let half = steps / 2;
    let step = half_range / half as f64;
    let mut d = Vec::with_capacity(steps);
    for i in 0..half {
        d.push(-((half - i) as f64) * step);
    }
    d.push(0.0);
    for i in 1..=half {
        d.push(i as f64 * step);
    }
    Ok(d)
}

/// Derivative of noise with respect to the transmission estimand at the
/// central sample.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeEstimate {
    pub dm_dt: f64,
    /// Relative deviation of the step-doubled estimate, when computable.
    pub richardson_delta: Option<f64>,
    /// False when the step-doubling check moved the estimate by more than 25%.
    pub consistent: bool,
}

/// At the matched point the transmission is stationary in displacement, so
/// dM/dT is evaluated as the ratio of second central differences of M and T
/// over the scan; this is the limit of dM/dT along the physical scan path.
pub fn derivative_wrt_t(curve: &TransmissionCurve, strategy: Strategy) -> Result<DerivativeEstimate> {
    let s = curve.samples();
    let c = curve.center_index();
    if s.len() < 5 {
        return Err(Error::InvalidArgument(
            "derivative needs at least 5 scan samples".into(),
        ));
    }
    let step = s[c + 1].displacement - s[c].displacement;
    let back = s[c].displacement - s[c - 1].displacement;
    if ((step - back) / step).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "derivative stencil requires uniform spacing around the central sample".into(),
        ));
    }
    let second = |f: &dyn Fn(usize) -> f64, k: usize| -> f64 {
        let h = k as f64 * step;
        (f(c + k) - 2.0 * f(c) + f(c - k)) / (h * h)
    };
    let m_at = |i: usize| s[i].m(strategy);
    let t_at = |i: usize| s[i].estimand(curve.estimand());
    let t2 = second(&t_at, 1);
    if t2.abs() < 1e-12 {
        return Err(Error::DegenerateParameterization(format!(
            "transmission curvature is {t2}; the estimand does not vary over the stencil"
        )));
    }
    let dm_dt = second(&m_at, 1) / t2;
    let richardson_delta = if c >= 2 && c + 2 < s.len() {
        let t2w = second(&t_at, 2);
        if t2w.abs() < 1e-12 {
            None
        } else {
            let wide = second(&m_at, 2) / t2w;
            Some(if dm_dt.abs() > 0.0 { (wide / dm_dt - 1.0).abs() } else { f64::INFINITY })
        }
    } else {
        None
    };
    let consistent = richardson_delta.map_or(true, |d| d <= 0.25);
    Ok(DerivativeEstimate { dm_dt, richardson_delta, consistent })
}

/// Find the interior extremum of a scan and refine it by parabolic
/// interpolation through the bracketing triple.
pub fn locate_optimum(curve: &TransmissionCurve, strategy: Strategy) -> Result<(f64, f64)> {
    let s = curve.samples();
    if s.len() < 3 {
        return Err(Error::InvalidArgument("scan too short to locate an optimum".into()));
    }
    let m: Vec<f64> = s.iter().map(|x| x.m(strategy)).collect();
    let (lo, hi) = m.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(Error::NoSignal(format!(
            "noise level is flat at {hi}; the scan carries no information about the mask"
        )));
    }
    // Tie-break toward smaller |d|.
    let pick = |better: &dyn Fn(f64, f64) -> bool| -> usize {
        let mut best = 0usize;
        for i in 1..m.len() {
            if better(m[i], m[best])
                || (m[i] == m[best] && s[i].displacement.abs() < s[best].displacement.abs())
            {
                best = i;
            }
        }
        best
    };
    let imin = pick(&|a, b| a < b);
    let imax = pick(&|a, b| a > b);
    let strict_interior = |i: usize, is_min: bool| -> bool {
        i > 0
            && i + 1 < m.len()
            && if is_min { m[i] < m[i - 1] && m[i] < m[i + 1] } else { m[i] > m[i - 1] && m[i] > m[i + 1] }
    };
    let min_ok = strict_interior(imin, true);
    let max_ok = strict_interior(imax, false);
    let edge_mean = 0.5 * (m[0] + m[m.len() - 1]);
    let k = match (min_ok, max_ok) {
        (true, false) => imin,
        (false, true) => imax,
        (true, true) => {
            if (m[imin] - edge_mean).abs() >= (m[imax] - edge_mean).abs() {
                imin
            } else {
                imax
            }
        }
        (false, false) => {
            return Err(Error::BoundaryExtremum(
                "no strict interior extremum; the scan range does not bracket the optimum".into(),
            ))
        }
    };
    let step = s[k + 1].displacement - s[k].displacement;
    let denom = m[k + 1] - 2.0 * m[k] + m[k - 1];
    if denom.abs() < 1e-15 {
        return Ok((s[k].displacement, m[k]));
    }
    let offset = -0.5 * step * (m[k + 1] - m[k - 1]) / denom;
    // The parabola vertex through a kinked extremum can only be trusted
    // within the bracketing cell.
    let offset = offset.clamp(-step.abs(), step.abs());
    let d_star = s[k].displacement + offset;
    let m_star = m[k] + 0.5 * offset * (m[k + 1] - m[k - 1]) / step
        + 0.5 * offset * offset * denom / (step * step);
    Ok((d_star, m_star))
}

/// Sensitivity of one strategy evaluated at the central scan sample.
pub fn sensitivity_at(curve: &TransmissionCurve, strategy: Strategy) -> Result<SensitivityResult> {
    let c = curve.center_index();
    let sample = &curve.samples()[c];
    let derivative = derivative_wrt_t(curve, strategy)?;
    Ok(SensitivityResult::from_slope(
        strategy,
        sample.estimand(curve.estimand()),
        sample.m(strategy),
        derivative.dm_dt,
    ))
}

/// One row of the transmission-uncertainty comparison.
#[derive(Debug, Clone, Copy)]
pub struct Fig2Row {
    pub t: f64,
    pub dt2_sb: f64,
    pub dt2_tb: f64,
}

/// Closed-form uncertainty comparison between the thermal single-beam
/// strategy and the twin-beam strategy with a single reference mode and a
/// linear mode transmission `t1 = 0.8 T`.
#[derive(Debug, Clone)]
pub struct Fig2Table {
    pub var: f64,
    pub m0: f64,
    pub rows: Vec<Fig2Row>,
    /// Transmission where the two strategies exchange the lead, if bracketed.
    pub crossover: Option<f64>,
}

fn fig2_dt2_tb(var: f64, m0: f64, t: f64) -> f64 {
    let m = m_tb_uniform(var, m0, t, 0.8 * t);
    let slope = 0.5 * (var - 1.0) - 0.8 * (var - m0);
    2.0 * m * m / (slope * slope)
}

/// Evaluate both closed-form uncertainty curves on `t_grid` and locate their
/// crossover by bisection.
pub fn fig2_table(var: f64, m0: f64, t_grid: &[f64]) -> Result<Fig2Table> {
    if !(var > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "comparison requires a thermal-level variance above 1, got {var}"
        )));
    }
    if !(m0 > 0.0) {
        return Err(Error::InvalidArgument(format!("squeezing must be positive, got {m0}")));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument("transmission grid must lie in [0, 1]".into()));
    }
    let rows: Vec<Fig2Row> = t_grid
        .iter()
        .map(|&t| {
            Ok(Fig2Row { t, dt2_sb: dt2_sb_closed(var, t)?, dt2_tb: fig2_dt2_tb(var, m0, t) })
        })
        .collect::<Result<Vec<_>>>()?;
    let gap = |t: f64| fig2_dt2_tb(var, m0, t) - dt2_sb_closed(var, t).unwrap_or(f64::NAN);
    let mut crossover = None;
    for w in rows.windows(2) {
        let (a, b) = (w[0].t, w[1].t);
        let (ga, gb) = (gap(a), gap(b));
        if ga == 0.0 {
            crossover = Some(a);
            break;
        }
        if ga * gb < 0.0 {
            let (mut lo, mut hi) = (a, b);
            let mut glo = ga;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let gm = gap(mid);
                if gm == 0.0 || hi - lo < 1e-14 {
                    break;
                }
                if glo * gm < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            crossover = Some(0.5 * (lo + hi));
            break;
        }
    }
    Ok(Fig2Table { var, m0, rows, crossover })
}

/// Enhancement of the estimation sensitivity at full transmission as a
/// function of the number of excited spatial modes.
#[derive(Debug, Clone, Copy)]
pub struct EnhancementPoint {
    pub n_modes: usize,
    /// `delta_T^2(single-beam) / delta_T^2(two-beam)`.
    pub ratio: f64,
}

/// Geometry and stencil parameters of the mode-count study.
#[derive(Debug, Clone)]
pub struct Fig3Params {
    pub n_max: usize,
    pub var: f64,
    pub m0: f64,
    /// Hermite-Gauss waist in units of the aperture half width.
    pub waist_over_half_width: f64,
    pub aperture_half_width: f64,
    pub samples_per_axis: usize,
    /// Displacement stencil step; the grid must resolve half of it.
    pub derivative_step: f64,
    pub estimand: Estimand,
}

impl Fig3Params {
    /// Calibrated defaults: waist 1.9 aperture half widths, stencil step
    /// half-width/50, grid resolving the step with two pixels.
    pub fn new(n_max: usize) -> Self {
        let aperture_half_width: f64 = 1.0;
        let derivative_step = aperture_half_width / 50.0;
        let waist_over_half_width: f64 = 1.9;
        let half_extent = 4.0 * (waist_over_half_width * aperture_half_width).max(aperture_half_width);
        let samples_per_axis = (4.0 * half_extent / derivative_step).round() as usize;
        Self {
            n_max,
            var: 5.0,
            m0: 0.1,
            waist_over_half_width,
            aperture_half_width,
            samples_per_axis,
            derivative_step,
            estimand: Estimand::TTotal,
        }
    }

    pub fn grid(&self) -> Result<TransverseGrid> {
        let scale = (self.waist_over_half_width * self.aperture_half_width).max(self.aperture_half_width);
        TransverseGrid::new(4.0 * scale, self.samples_per_axis)
    }
}

/// The mode-count study: excite the first N even modes, evaluate both
/// strategies' uncertainties at the matched point, and report the ratio.
///
/// Returns the enhancement points together with the underlying stencil curve
/// (overlaps are shared across all N, so the scan is done once).
pub fn fig3_curve(params: &Fig3Params) -> Result<(Vec<EnhancementPoint>, TransmissionCurve)> {
    if params.n_max == 0 || params.n_max > crate::basis::MAX_EVEN_MODES {
        return Err(Error::InvalidArgument(format!(
            "mode count must lie in [1, {}], got {}",
            crate::basis::MAX_EVEN_MODES,
            params.n_max
        )));
    }
    let grid = params.grid()?;
    let waist = params.waist_over_half_width * params.aperture_half_width;
    let basis = HgBasis::even(crate::basis::MAX_EVEN_MODES, waist, &grid)?;
    let mask = MaskSpec::binary_square([0.0, 0.0], params.aperture_half_width)?;
    let d_grid = symmetric_d_grid(2.0 * params.derivative_step, 5)?;
    let state = StateSpec::twin_beam(params.var, params.m0, params.n_max)?;
    let base = scan_displacement_at(
        &mask,
        &basis,
        &state,
        &d_grid,
        params.aperture_half_width,
        0.0,
        ReferenceLo::MatchedSquare,
        params.estimand,
        LoPhases::default(),
    )?;
    let points = (1..=params.n_max)
        .map(|n| {
            let curve = base.reevaluate(&state.with_excited_modes(n), LoPhases::default())?;
            let sb = sensitivity_at(&curve, Strategy::SingleBeam)?;
            let tb = sensitivity_at(&curve, Strategy::TwoBeam)?;
            if tb.degenerate || sb.degenerate {
                return Err(Error::DegenerateParameterization(format!(
                    "zero noise slope at N = {n}"
                )));
            }
            let ratio = sb.delta_t2 / tb.delta_t2;
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(Error::DegenerateParameterization(format!(
                    "enhancement ratio {ratio} at N = {n} is not usable"
                )));
            }
            Ok(EnhancementPoint { n_modes: n, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((points, base))
}

/// Scan geometry for the full estimation pipeline.
#[derive(Debug, Clone)]
pub struct ScanSettings {
    pub half_range: f64,
    pub steps: usize,
    pub derivative_step: f64,
    pub lo_half_width: f64,
    pub estimand: Estimand,
    pub reference_lo: ReferenceLo,
    /// Strategy whose noise curve drives the optimum search.
    pub locate_strategy: Strategy,
}

/// Monte Carlo settings for the data-driven pipeline variant.
#[derive(Debug, Clone, Copy)]
pub struct McSettings {
    pub shots: u64,
    pub seed: u64,
}

/// Result of the full pipeline: located optimum plus sensitivities of every
/// strategy at that operating point.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub d_star: f64,
    pub m_star: f64,
    /// Optimum located on the Monte Carlo noise curve, when MC was enabled.
    pub d_star_mc: Option<f64>,
    pub sensitivities: Vec<SensitivityResult>,
    /// `delta_T^2(single-beam) / delta_T^2(two-beam)` at the optimum.
    pub enhancement: f64,
    pub scan: TransmissionCurve,
}

/// Monte Carlo noise values for every sample of a scan, derived seeds
/// `seed + index` per position.
fn mc_curve_values(
    curve: &TransmissionCurve,
    state: &StateSpec,
    strategy: Strategy,
    mc: McSettings,
) -> Result<Vec<f64>> {
    curve
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = mc.seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let run: McRun = match strategy {
                Strategy::TwoBeam => {
                    sample_difference_signal(&s.overlaps, state, mc.shots, seed, LoPhases::default())?
                }
                Strategy::SingleBeam => {
                    sample_single_signal(&s.overlaps, state, mc.shots, seed, LoPhases::default())?
                }
                Strategy::NoQuantum => {
                    return Err(Error::InvalidArgument(
                        "the no-quantum strategy is an analytic reference, not a measurement".into(),
                    ))
                }
            };
            Ok(run.empirical_m)
        })
        .collect()
}

/// Full pipeline: scan, locate the optimum, evaluate the sensitivities of all
/// strategies on a refined stencil centered at the optimum.
///
/// With `mc` set, the optimum is additionally located on a Monte Carlo noise
/// curve (at least 10^4 shots per scan position); sensitivities always come
/// from the analytic stencil, where second differences are meaningful.
pub fn estimate_shape(
    mask: &MaskSpec,
    basis: &HgBasis,
    state: &StateSpec,
    scan: &ScanSettings,
    mc: Option<McSettings>,
    phases: LoPhases,
) -> Result<EstimateReport> {
    if let Some(mc) = &mc {
        if mc.shots < 10_000 {
            return Err(Error::InvalidArgument(format!(
                "Monte Carlo estimation needs at least 10000 shots per position, got {}",
                mc.shots
            )));
        }
    }
    let d_grid = symmetric_d_grid(scan.half_range, scan.steps)?;
    let curve = scan_displacement_at(
        mask,
        basis,
        state,
        &d_grid,
        scan.lo_half_width,
        0.0,
        scan.reference_lo,
        scan.estimand,
        phases,
    )?;
    let (d_star, m_star) = locate_optimum(&curve, scan.locate_strategy)?;
    let d_star_mc = match mc {
        Some(settings) => {
            let values = mc_curve_values(&curve, state, scan.locate_strategy, settings)?;
            let mc_curve = curve.with_m_values(scan.locate_strategy, &values)?;
            Some(locate_optimum(&mc_curve, scan.locate_strategy)?.0)
        }
        None => None,
    };
    // Refined stencil centered on the located optimum, reference LO matched
    // to it.
    let s = scan.derivative_step;
    let stencil: Vec<f64> = (-2..=2).map(|k| d_star + k as f64 * s).collect();
    let refined = scan_displacement_at(
        mask,
        basis,
        state,
        &stencil,
        scan.lo_half_width,
        d_star,
        scan.reference_lo,
        scan.estimand,
        phases,
    )?;
    let sensitivities: Vec<SensitivityResult> =
        [Strategy::TwoBeam, Strategy::SingleBeam, Strategy::NoQuantum]
            .into_iter()
            .map(|strat| sensitivity_at(&refined, strat))
            .collect::<Result<Vec<_>>>()?;
    let dt2 = |strategy: Strategy| {
        sensitivities.iter().find(|r| r.strategy == strategy).map(|r| r.delta_t2).unwrap()
    };
    let enhancement = dt2(Strategy::SingleBeam) / dt2(Strategy::TwoBeam);
    Ok(EstimateReport { d_star, m_star, d_star_mc, sensitivities, enhancement, scan: curve })
}
