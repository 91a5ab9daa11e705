//! Gaussian second-moment model of the per-mode quadrature statistics.
//!
//! Variances are normalized so the vacuum (and any coherent state) sits at 1.
//! A state excites its first `excited_modes` spatial modes; every mode beyond
//! that is vacuum. Different spatial modes are never correlated with each
//! other, so the joint description is block diagonal with one 2x2 block per
//! mode pairing the beam-a and beam-b quadratures.

use crate::error::{Error, Result};

/// Second moments of the pair `(X_a(phase_a), X_b(phase_b))` for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeNoise {
    pub var_a: f64,
    pub var_b: f64,
    /// `<X_a(phase_a) X_b(phase_b)>`.
    pub cross: f64,
}

impl ModeNoise {
    pub const VACUUM: ModeNoise = ModeNoise { var_a: 1.0, var_b: 1.0, cross: 0.0 };

    pub fn new(var_a: f64, var_b: f64, cross: f64) -> Result<Self> {
        let n = Self { var_a, var_b, cross };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.var_a < 0.0 || self.var_b < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "quadrature variances must be non-negative, got ({}, {})",
                self.var_a, self.var_b
            )));
        }
        if self.cross * self.cross > self.var_a * self.var_b * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "cross correlation {} violates Cauchy-Schwarz for variances ({}, {})",
                self.cross, self.var_a, self.var_b
            )));
        }
        Ok(())
    }

    /// Normalized noise of the quadrature difference, `var(X_a - X_b) / 2`.
    pub fn difference_noise(&self) -> f64 {
        0.5 * (self.var_a + self.var_b - 2.0 * self.cross)
    }
}

/// One component of a classically correlated mixture: a separable state with
/// per-beam means and variances, occurring with probability `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
}

/// Families of Gaussian states supported by the noise model.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    /// Vacuum twin beams: each beam thermal-like with variance `var`, and the
    /// quadrature-difference noise squeezed to `m0` at the optimal phases.
    TwinBeam { var: f64, m0: f64 },
    /// Single-beam thermal state of variance `var`; beam b is vacuum.
    Thermal { var: f64 },
    Coherent,
    /// Phase-dependent single-beam variance, `v_min` along `axis`.
    PhaseSensitive { v_min: f64, v_max: f64, axis: f64 },
    /// Statistical mixture of separable two-beam states; correlations are
    /// purely classical. Moments are taken about zero, matching the zero-mean
    /// homodyne signal convention.
    ClassicalMixture { components: Vec<MixtureComponent> },
}

impl StateKind {
    fn validate(&self) -> Result<()> {
        match self {
            StateKind::TwinBeam { var, m0 } => {
                if !(*var > 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "twin-beam single-beam variance must exceed 1, got {var}"
                    )));
                }
                if !(*m0 > 0.0 && *m0 <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "twin-beam squeezing must lie in (0, 1], got {m0}"
                    )));
                }
            }
            StateKind::Thermal { var } => {
                if !(*var >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "thermal variance must be at least 1, got {var}"
                    )));
                }
            }
            StateKind::Coherent => {}
            StateKind::PhaseSensitive { v_min, v_max, .. } => {
                if !(*v_min >= 0.0 && *v_max >= *v_min) {
                    return Err(Error::InvalidArgument(format!(
                        "phase-sensitive variances need 0 <= v_min <= v_max, got ({v_min}, {v_max})"
                    )));
                }
            }
            StateKind::ClassicalMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidArgument("mixture needs at least one component".into()));
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| c.weight < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "mixture weights must be non-negative and sum to 1, sum is {total}"
                    )));
                }
                if components.iter().any(|c| c.var_a < 0.0 || c.var_b < 0.0) {
                    return Err(Error::InvalidArgument(
                        "mixture component variances must be non-negative".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-mode override of the shared noise family, applied to one excited mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOverride {
    /// 1-based rank of the excited mode the override applies to.
    pub rank: usize,
    pub kind: StateKind,
}

/// Full state description: a noise family shared by the first
/// `excited_modes` modes, with optional per-mode overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    kind: StateKind,
    excited_modes: usize,
    overrides: Vec<ModeOverride>,
}

impl StateSpec {
    pub fn new(kind: StateKind, excited_modes: usize) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, excited_modes, overrides: Vec::new() })
    }

    /// Twin beams with the paper-default parameters on `excited_modes` modes.
    pub fn twin_beam(var: f64, m0: f64, excited_modes: usize) -> Result<Self> {
        Self::new(StateKind::TwinBeam { var, m0 }, excited_modes)
    }

    pub fn thermal(var: f64, excited_modes: usize) -> Result<Self> {
        Self::new(StateKind::Thermal { var }, excited_modes)
    }

    pub fn coherent(excited_modes: usize) -> Result<Self> {
        Self::new(StateKind::Coherent, excited_modes)
    }

    pub fn with_overrides(mut self, overrides: Vec<ModeOverride>) -> Result<Self> {
        for o in &overrides {
            o.kind.validate()?;
            if o.rank == 0 || o.rank > self.excited_modes {
                return Err(Error::InvalidArgument(format!(
                    "override rank {} outside the excited range 1..={}",
                    o.rank, self.excited_modes
                )));
            }
        }
        self.overrides = overrides;
        Ok(self)
    }

    pub fn kind(&self) -> &StateKind {
        &self.kind
    }

    pub fn excited_modes(&self) -> usize {
        self.excited_modes
    }

    /// Same state family restricted to a different number of excited modes.
    pub fn with_excited_modes(&self, excited_modes: usize) -> Self {
        Self { kind: self.kind.clone(), excited_modes, overrides: self.overrides.clone() }
    }

    /// Second moments of mode `rank` (1-based) for quadratures measured at
    /// `phase_a` / `phase_b`. Phase zero is the squeezing-optimal choice.
    pub fn mode_noise(&self, rank: usize, phase_a: f64, phase_b: f64) -> Result<ModeNoise> {
        if rank == 0 {
            return Err(Error::InvalidArgument("mode rank is 1-based".into()));
        }
        if rank > self.excited_modes {
            return Ok(ModeNoise::VACUUM);
        }
        let kind = self
            .overrides
            .iter()
            .find(|o| o.rank == rank)
            .map(|o| &o.kind)
            .unwrap_or(&self.kind);
        let noise = match kind {
            StateKind::TwinBeam { var, m0 } => {
                // Individual twin beams are phase insensitive; the a-b
                // correlation peaks at phase sum zero where the difference
                // noise reaches m0.
                let cross = (var - m0) * (phase_a + phase_b).cos();
                ModeNoise { var_a: *var, var_b: *var, cross }
            }
            StateKind::Thermal { var } => ModeNoise { var_a: *var, var_b: 1.0, cross: 0.0 },
            StateKind::Coherent => ModeNoise::VACUUM,
            StateKind::PhaseSensitive { v_min, v_max, axis } => {
                let profile = |phase: f64| {
                    let c = (phase - axis).cos();
                    let s = (phase - axis).sin();
                    v_min * c * c + v_max * s * s
                };
                ModeNoise { var_a: profile(phase_a), var_b: profile(phase_b), cross: 0.0 }
            }
            StateKind::ClassicalMixture { components } => {
                let mut var_a = 0.0;
                let mut var_b = 0.0;
                let mut cross = 0.0;
                for c in components {
                    var_a += c.weight * (c.var_a + c.mean_a * c.mean_a);
                    var_b += c.weight * (c.var_b + c.mean_b * c.mean_b);
                    cross += c.weight * c.mean_a * c.mean_b;
                }
                ModeNoise { var_a, var_b, cross }
            }
        };
        noise.validate()?;
        Ok(noise)
    }
}

/// Block-diagonal joint covariance of `(X_a, X_b)` over the first `modes`
/// modes; block `i` is `[[var_a, cross], [cross, var_b]]` for mode rank
/// `i + 1` at the given phases.
pub fn quadrature_covariance(
    state: &StateSpec,
    modes: usize,
    phases: &[(f64, f64)],
) -> Result<Vec<[[f64; 2]; 2]>> {
    if modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    if phases.len() != modes {
        return Err(Error::InvalidArgument(format!(
            "got {} phase pairs for {} modes",
            phases.len(),
            modes
        )));
    }
    (0..modes)
        .map(|i| {
            let n = state.mode_noise(i + 1, phases[i].0, phases[i].1)?;
            Ok([[n.var_a, n.cross], [n.cross, n.var_b]])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn twin_beam_default_moments() {
        let s = StateSpec::twin_beam(5.0, 0.1, 3).unwrap();
        let n = s.mode_noise(1, 0.0, 0.0).unwrap();
        assert_eq!(n, ModeNoise { var_a: 5.0, var_b: 5.0, cross: 4.9 });
        // M0 recovery is exact at the optimal phases.
        assert_abs_diff_eq!(n.difference_noise(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn coherent_is_vacuum_level() {
        let s = StateSpec::coherent(2).unwrap();
        assert_eq!(s.mode_noise(1, 0.3, -0.2).unwrap(), ModeNoise::VACUUM);
    }

    #[test]
    fn modes_beyond_excitation_are_vacuum() {
        let s = StateSpec::twin_beam(5.0, 0.1, 2).unwrap();
        assert_eq!(s.mode_noise(3, 0.0, 0.0).unwrap(), ModeNoise::VACUUM);
    }

    #[test]
    fn zero_mean_mixture_has_no_cross_correlation() {
        let s = StateSpec::new(
            StateKind::ClassicalMixture {
                components: vec![
                    MixtureComponent { weight: 0.4, mean_a: 0.0, mean_b: 0.0, var_a: 2.0, var_b: 3.0 },
                    MixtureComponent { weight: 0.6, mean_a: 0.0, mean_b: 0.0, var_a: 1.0, var_b: 1.5 },
                ],
            },
            1,
        )
        .unwrap();
        let n = s.mode_noise(1, 0.0, 0.0).unwrap();
        assert_eq!(n.cross, 0.0);
        assert_abs_diff_eq!(n.var_a, 1.4, epsilon = 1e-15);
    }

    #[test]
    fn displaced_mixture_builds_classical_correlations() {
        let s = StateSpec::new(
            StateKind::ClassicalMixture {
                components: vec![
                    MixtureComponent { weight: 0.5, mean_a: 1.0, mean_b: 1.0, var_a: 1.0, var_b: 1.0 },
                    MixtureComponent { weight: 0.5, mean_a: -1.0, mean_b: -1.0, var_a: 1.0, var_b: 1.0 },
                ],
            },
            1,
        )
        .unwrap();
        let n = s.mode_noise(1, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(n.cross, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.var_a, 2.0, epsilon = 1e-15);
        n.validate().unwrap();
    }

    #[test]
    fn phase_sensitive_profile() {
        let s = StateSpec::new(
            StateKind::PhaseSensitive { v_min: 0.5, v_max: 2.0, axis: 0.7 },
            1,
        )
        .unwrap();
        let at_axis = s.mode_noise(1, 0.7, 0.0).unwrap();
        assert_abs_diff_eq!(at_axis.var_a, 0.5, epsilon = 1e-15);
        let pi_later = s.mode_noise(1, 0.7 + std::f64::consts::PI, 0.0).unwrap();
        assert_abs_diff_eq!(pi_later.var_a, 0.5, epsilon = 1e-12);
        let quarter = s.mode_noise(1, 0.7 + std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        assert_abs_diff_eq!(quarter.var_a, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(StateSpec::twin_beam(0.9, 0.1, 1).is_err());
        assert!(StateSpec::twin_beam(5.0, 0.0, 1).is_err());
        assert!(StateSpec::twin_beam(5.0, -0.2, 1).is_err());
        assert!(StateSpec::thermal(0.5, 1).is_err());
        let bad_mix = StateKind::ClassicalMixture {
            components: vec![MixtureComponent { weight: 0.7, mean_a: 0.0, mean_b: 0.0, var_a: 1.0, var_b: 1.0 }],
        };
        assert!(StateSpec::new(bad_mix, 1).is_err());
    }

    #[test]
    fn covariance_blocks_match_mode_noise() {
        let s = StateSpec::twin_beam(5.0, 0.1, 2).unwrap();
        let blocks = quadrature_covariance(&s, 3, &[(0.0, 0.0); 3]).unwrap();
        assert_eq!(blocks[0], [[5.0, 4.9], [4.9, 5.0]]);
        assert_eq!(blocks[1], [[5.0, 4.9], [4.9, 5.0]]);
        assert_eq!(blocks[2], [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn vacuum_covariance_is_identity() {
        let s = StateSpec::coherent(0).unwrap();
        let blocks = quadrature_covariance(&s, 1, &[(0.0, 0.0)]).unwrap();
        assert_eq!(blocks[0], [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn override_replaces_one_mode() {
        let s = StateSpec::twin_beam(5.0, 0.1, 2)
            .unwrap()
            .with_overrides(vec![ModeOverride { rank: 2, kind: StateKind::Coherent }])
            .unwrap();
        assert_eq!(s.mode_noise(1, 0.0, 0.0).unwrap().var_a, 5.0);
        assert_eq!(s.mode_noise(2, 0.0, 0.0).unwrap(), ModeNoise::VACUUM);
        assert!(StateSpec::twin_beam(5.0, 0.1, 2)
            .unwrap()
            .with_overrides(vec![ModeOverride { rank: 5, kind: StateKind::Coherent }])
            .is_err());
    }
}
