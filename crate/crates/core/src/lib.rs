//! Estimation of the shape and position of an amplitude mask from homodyne
//! noise measurements of multi-spatial-mode twin beams.
//!
//! One beam of an entangled twin-beam pair passes through the mask; both
//! beams hit homodyne detectors whose local-oscillator shapes act as spatial
//! mode filters. Because the noise of the difference signal dips when the LO
//! matches the transmitted field, scanning the LO and optimizing the measured
//! noise reveals the mask, even when the photon flux is far too small for
//! direct detection.
//!
//! The crate provides:
//!
//! - [`basis`]: transverse grids, Hermite-Gauss modes, inner products;
//! - [`mask`]: mask transfer functions and mode-overlap extraction;
//! - [`state`]: Gaussian second-moment models (twin beams, thermal, coherent,
//!   phase-sensitive, classically correlated mixtures);
//! - [`noise`]: analytic noise levels and estimation sensitivities for the
//!   two-beam, single-beam and no-quantum strategies;
//! - [`montecarlo`]: a seeded, reproducible sampling oracle for all of the
//!   analytic results;
//! - [`protocol`]: displacement scans, optimum location, and the two standard
//!   numerical studies (uncertainty versus transmission, enhancement versus
//!   mode count).

pub mod basis;
pub mod error;
pub mod mask;
pub mod montecarlo;
pub mod noise;
pub mod protocol;
pub mod state;

pub use basis::{
    even_mode_sequence, hermite_gauss, inner_product, FieldProfile, HgBasis, ModeIndex,
    TransverseGrid,
};
pub use error::{Error, Result};
pub use mask::{expansion_coeffs, lo_transmission, masked_lo, square_lo, MaskSpec, OverlapSet};
pub use montecarlo::{
    sample_difference_signal, sample_single_signal, validate_variance_of_variance, McRun,
    VarianceOfVarianceReport,
};
pub use noise::{
    dt2_sb_closed, dt2_tb_matched, m_nq, m_sb, m_tb, m_tb_uniform, noise_for, LoPhases,
    NoiseValue, SensitivityResult, Strategy,
};
pub use protocol::{
    derivative_wrt_t, estimate_shape, fig2_table, fig3_curve, locate_optimum, scan_displacement,
    scan_displacement_at, sensitivity_at, symmetric_d_grid, EnhancementPoint, Estimand,
    EstimateReport, Fig2Table, Fig3Params, McSettings, ReferenceLo, ScanSample, ScanSettings,
    TransmissionCurve,
};
pub use state::{quadrature_covariance, MixtureComponent, ModeNoise, ModeOverride, StateKind, StateSpec};
