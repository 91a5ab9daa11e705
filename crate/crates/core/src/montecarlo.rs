//! Stochastic oracle for the analytic noise model.
//!
//! Draws homodyne outcomes shot by shot from the Gaussian state description
//! and estimates the noise (and the noise of the noise) empirically. Each shot
//! has its own counter-derived random stream keyed by `(seed, shot index)`, so
//! sample generation is reproducible bit for bit and independent of how shots
//! are scheduled across threads. Statistics are reduced sequentially over the
//! ordered sample vector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::OverlapSet;
use crate::noise::LoPhases;
use crate::state::StateSpec;

/// Outcome of a Monte Carlo run: the SQL-normalized per-shot values and the
/// empirical moments derived from them.
#[derive(Debug, Clone)]
pub struct McRun {
    pub seed: u64,
    pub shots: u64,
    /// SQL-normalized signal value per shot.
    pub samples: Vec<f64>,
    /// Empirical noise level (mean squared sample).
    pub empirical_m: f64,
    /// Empirical fourth moment of the normalized samples.
    pub empirical_m4: f64,
    /// Standard error of `empirical_m`.
    pub stderr_m: f64,
}

impl McRun {
    /// Mean of the normalized samples (expected zero).
    pub fn sample_mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Standard error of the sample mean.
    pub fn stderr_mean(&self) -> f64 {
        (self.empirical_m / self.samples.len() as f64).sqrt()
    }

    /// Ratio `<y^4> / (3 <y^2>^2)`, exactly 1 for Gaussian statistics.
    pub fn gaussian_moment_ratio(&self) -> f64 {
        self.empirical_m4 / (3.0 * self.empirical_m * self.empirical_m)
    }
}

/// Lower Cholesky factor of a 2x2 covariance block.
#[derive(Clone, Copy)]
struct PairSampler {
    l11: f64,
    l21: f64,
    l22: f64,
}

impl PairSampler {
    fn new(var_a: f64, var_b: f64, cross: f64) -> Self {
        if var_a > 0.0 {
            let l11 = var_a.sqrt();
            let l21 = cross / l11;
            let l22 = (var_b - l21 * l21).max(0.0).sqrt();
            Self { l11, l21, l22 }
        } else {
            Self { l11: 0.0, l21: 0.0, l22: var_b.max(0.0).sqrt() }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (self.l11 * z1, self.l21 * z1 + self.l22 * z2)
    }
}

struct SignalModel {
    pairs: Vec<PairSampler>,
    masked_weights: Vec<f64>,
    reference_weights: Vec<f64>,
    vacuum_scale: f64,
    sql_scale: f64,
}

impl SignalModel {
    fn build(
        overlaps: &OverlapSet,
        state: &StateSpec,
        phases: LoPhases,
        two_beam: bool,
    ) -> Result<Self> {
        let k = overlaps.mode_count();
        let mut pairs = Vec::with_capacity(k);
        for i in 0..k {
            let noise = state.mode_noise(
                i + 1,
                phases.beam_a + overlaps.masked_phase[i],
                phases.beam_b + overlaps.reference_phase[i],
            )?;
            pairs.push(PairSampler::new(noise.var_a, noise.var_b, noise.cross));
        }
        let masked_weights = overlaps.masked_overlap.clone();
        let reference_weights: Vec<f64> = if two_beam {
            (0..k).map(|i| overlaps.raw_reference_overlap(i)).collect()
        } else {
            vec![0.0; k]
        };
        // Mode weight outside the basis is vacuum on both arms; independent
        // Gaussians combine into one variate with the summed variance.
        let mut vacuum_var = (1.0 - overlaps.captured_transmission).max(0.0);
        if two_beam {
            vacuum_var += (1.0 - overlaps.reference_captured).max(0.0);
        }
        Ok(Self {
            pairs,
            masked_weights,
            reference_weights,
            vacuum_scale: vacuum_var.sqrt(),
            sql_scale: if two_beam { std::f64::consts::SQRT_2 } else { 1.0 },
        })
    }

    fn shot(&self, seed: u64, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut signal = 0.0;
        for (i, pair) in self.pairs.iter().enumerate() {
            let (xa, xb) = pair.draw(&mut rng);
            signal += self.masked_weights[i] * xa - self.reference_weights[i] * xb;
        }
        let vac: f64 = rng.sample(StandardNormal);
        signal += self.vacuum_scale * vac;
        signal / self.sql_scale
    }
}

fn run_model(model: &SignalModel, shots: u64, seed: u64) -> McRun {
    let samples: Vec<f64> = (0..shots).into_par_iter().map(|i| model.shot(seed, i)).collect();
    let n = samples.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_quad = 0.0;
    for &y in &samples {
        let y2 = y * y;
        sum_sq += y2;
        sum_quad += y2 * y2;
    }
    let empirical_m = sum_sq / n;
    let empirical_m4 = sum_quad / n;
    // Var(y^2) estimated from the fourth moment; no Gaussian assumption.
    let var_of_sq = (empirical_m4 - empirical_m * empirical_m).max(0.0);
    let stderr_m = (var_of_sq / n).sqrt();
    McRun { seed, shots, samples, empirical_m, empirical_m4, stderr_m }
}

/// Sample the two-beam difference signal.
pub fn sample_difference_signal(
    overlaps: &OverlapSet,
    state: &StateSpec,
    shots: u64,
    seed: u64,
    phases: LoPhases,
) -> Result<McRun> {
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let model = SignalModel::build(overlaps, state, phases, true)?;
    Ok(run_model(&model, shots, seed))
}

/// Sample the single-beam signal (reference arm removed, single-beam SQL).
pub fn sample_single_signal(
    overlaps: &OverlapSet,
    state: &StateSpec,
    shots: u64,
    seed: u64,
    phases: LoPhases,
) -> Result<McRun> {
    if shots == 0 {
        return Err(Error::InvalidArgument("need at least one shot".into()));
    }
    let model = SignalModel::build(overlaps, state, phases, false)?;
    Ok(run_model(&model, shots, seed))
}

/// Outcome of the variance-of-variance consistency check.
#[derive(Debug, Clone, Copy)]
pub struct VarianceOfVarianceReport {
    pub batches: usize,
    pub batch_size: usize,
    /// Sample variance of the per-batch noise estimates.
    pub observed: f64,
    /// `2 m^2 / batch_size`, the Gaussian prediction.
    pub predicted: f64,
    /// Normalized deviation of observed from predicted.
    pub z_score: f64,
}

/// Check the `variance(M) = 2 M^2` law on a finished run by batching the
/// shots and comparing the spread of per-batch variance estimates against the
/// Gaussian prediction. Requires at least 10^4 shots.
pub fn validate_variance_of_variance(
    run: &McRun,
    batches: usize,
) -> Result<VarianceOfVarianceReport> {
    if run.shots < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "variance-of-variance check needs at least 10000 shots, got {}",
            run.shots
        )));
    }
    if batches < 2 || run.samples.len() / batches < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} samples into {batches} usable batches",
            run.samples.len()
        )));
    }
    if run.empirical_m < 1e-9 {
        return Err(Error::InvalidArgument(
            "run is statistically degenerate: empirical noise is zero".into(),
        ));
    }
    let batch_size = run.samples.len() / batches;
    let batch_vars: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &run.samples[b * batch_size..(b + 1) * batch_size];
            chunk.iter().map(|y| y * y).sum::<f64>() / batch_size as f64
        })
        .collect();
    let mean = batch_vars.iter().sum::<f64>() / batches as f64;
    let observed =
        batch_vars.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (batches - 1) as f64;
    let predicted = 2.0 * run.empirical_m * run.empirical_m / batch_size as f64;
    // The sample variance of k near-Gaussian batch estimates fluctuates with
    // relative standard deviation sqrt(2 / (k - 1)).
    let z_score = (observed - predicted) / (predicted * (2.0 / (batches as f64 - 1.0)).sqrt());
    Ok(VarianceOfVarianceReport { batches, batch_size, observed, predicted, z_score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ModeIndex;
    use crate::noise::{m_sb, m_tb};

    fn matched() -> OverlapSet {
        OverlapSet::matched_single_mode()
    }

    #[test]
    fn identical_seed_reproduces_the_stream() {
        let state = StateSpec::twin_beam(5.0, 0.1, 1).unwrap();
        let a = sample_difference_signal(&matched(), &state, 500, 7, LoPhases::default()).unwrap();
        let b = sample_difference_signal(&matched(), &state, 500, 7, LoPhases::default()).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = sample_difference_signal(&matched(), &state, 500, 8, LoPhases::default()).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn matched_twin_beam_variance_matches_analytic() {
        let state = StateSpec::twin_beam(5.0, 0.1, 1).unwrap();
        let run =
            sample_difference_signal(&matched(), &state, 100_000, 11, LoPhases::default()).unwrap();
        let analytic = m_tb(&matched(), &state, LoPhases::default()).unwrap().m;
        assert!((run.empirical_m - analytic).abs() < 3.0 * run.stderr_m);
        assert!(run.sample_mean().abs() < 3.0 * run.stderr_mean());
    }

    #[test]
    fn thermal_single_beam_matches_analytic() {
        let state = StateSpec::thermal(5.0, 1).unwrap();
        let run = sample_single_signal(&matched(), &state, 100_000, 3, LoPhases::default()).unwrap();
        let analytic = m_sb(&matched(), &state, 0.0).unwrap().m;
        assert!((run.empirical_m - analytic).abs() < 3.0 * run.stderr_m);
    }

    #[test]
    fn coherent_state_sits_at_the_sql() {
        let state = StateSpec::coherent(1).unwrap();
        let tb = sample_difference_signal(&matched(), &state, 50_000, 5, LoPhases::default()).unwrap();
        assert!((tb.empirical_m - 1.0).abs() < 3.0 * tb.stderr_m);
        let sb = sample_single_signal(&matched(), &state, 50_000, 5, LoPhases::default()).unwrap();
        assert!((sb.empirical_m - 1.0).abs() < 3.0 * sb.stderr_m);
    }

    #[test]
    fn opaque_mask_single_beam_is_vacuum() {
        let set = OverlapSet::from_parts(
            vec![ModeIndex::new(0, 0)],
            vec![0.0],
            vec![0.0],
            vec![1.0],
            vec![0.0],
            0.0,
            1.0,
        )
        .unwrap();
        let state = StateSpec::thermal(5.0, 1).unwrap();
        let run = sample_single_signal(&set, &state, 50_000, 9, LoPhases::default()).unwrap();
        assert!((run.empirical_m - 1.0).abs() < 3.0 * run.stderr_m);
    }

    #[test]
    fn fourth_moment_follows_gaussian_statistics() {
        let state = StateSpec::twin_beam(5.0, 0.1, 1).unwrap();
        let run =
            sample_difference_signal(&matched(), &state, 100_000, 13, LoPhases::default()).unwrap();
        assert!((run.gaussian_moment_ratio() - 1.0).abs() < 0.05);
    }

    #[test]
    fn variance_of_variance_follows_the_two_m_squared_law() {
        let state = StateSpec::twin_beam(5.0, 0.1, 1).unwrap();
        let run =
            sample_difference_signal(&matched(), &state, 100_000, 17, LoPhases::default()).unwrap();
        let report = validate_variance_of_variance(&run, 100).unwrap();
        assert!(report.z_score.abs() < 3.0, "z = {}", report.z_score);

        let thermal = StateSpec::thermal(5.0, 1).unwrap();
        let run = sample_single_signal(&matched(), &thermal, 100_000, 19, LoPhases::default()).unwrap();
        let report = validate_variance_of_variance(&run, 100).unwrap();
        assert!(report.z_score.abs() < 3.0, "z = {}", report.z_score);
    }

    #[test]
    fn degenerate_zero_variance_input_is_rejected() {
        // No masked weight, no reference weight, no vacuum residue on the
        // single-beam path (captured transmission forced to 1 via raw parts).
        let set = OverlapSet {
            modes: vec![ModeIndex::new(0, 0)],
            masked_overlap: vec![0.0],
            masked_phase: vec![0.0],
            reference_overlap: vec![1.0],
            reference_phase: vec![0.0],
            lo_transmission: 1.0,
            captured_transmission: 1.0,
            reference_captured: 1.0,
        };
        let state = StateSpec::coherent(1).unwrap();
        let run = sample_single_signal(&set, &state, 20_000, 1, LoPhases::default()).unwrap();
        assert!(validate_variance_of_variance(&run, 100).is_err());
    }

    #[test]
    fn too_few_shots_are_rejected() {
        let state = StateSpec::coherent(1).unwrap();
        let run = sample_single_signal(&matched(), &state, 5_000, 1, LoPhases::default()).unwrap();
        assert!(validate_variance_of_variance(&run, 50).is_err());
    }

    #[test]
    fn doubling_shots_shrinks_the_standard_error() {
        let state = StateSpec::twin_beam(5.0, 0.1, 1).unwrap();
        let a = sample_difference_signal(&matched(), &state, 50_000, 23, LoPhases::default()).unwrap();
        let b = sample_difference_signal(&matched(), &state, 100_000, 29, LoPhases::default()).unwrap();
        let ratio = a.stderr_m / b.stderr_m;
        assert!((ratio / std::f64::consts::SQRT_2 - 1.0).abs() < 0.1, "ratio = {ratio}");
    }
}
