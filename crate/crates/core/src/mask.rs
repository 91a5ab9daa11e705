//! Mask transfer functions and extraction of mode-space overlap coefficients.
//!
//! A mask multiplies a field by `sqrt(T(x,y)) * exp(-i phi(x,y))`. Binary
//! masks are rasterized with a pixel-center in/out rule, no anti-aliasing;
//! the residual staircase error is absorbed by the grid-resolution tolerances
//! used throughout. [`expansion_coeffs`] projects the masked LO and the
//! reference-beam LO onto an analysis basis and packages everything the noise
//! formulas need, including how much of each LO the truncated basis captures.

use std::io::BufRead;

use ndarray::Array2;
use num_complex::Complex64;

use crate::basis::{FieldProfile, HgBasis, ModeIndex, TransverseGrid};
use crate::error::{Error, Result};

/// Intensity/phase transfer function of the object being estimated.
#[derive(Debug, Clone)]
pub enum MaskSpec {
    /// Transmission exactly 1 inside a square, 0 outside.
    BinarySquare { center: [f64; 2], half_width: f64 },
    /// Sampled intensity transmission in `[0, 1]`.
    Soft { grid: TransverseGrid, transmission: Array2<f64> },
    /// Sampled phase (radians) with an optional sampled transmission.
    Phase { grid: TransverseGrid, transmission: Array2<f64>, phase: Array2<f64> },
}

fn validate_transmission(grid: &TransverseGrid, transmission: &Array2<f64>) -> Result<()> {
    let n = grid.samples_per_axis();
    if transmission.shape() != [n, n] {
        return Err(Error::GridMismatch(format!(
            "transmission shape {:?} does not match grid ({n} x {n})",
            transmission.shape()
        )));
    }
    if let Some(bad) = transmission.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidArgument(format!(
            "intensity transmission must lie in [0, 1], found {bad}"
        )));
    }
    Ok(())
}

impl MaskSpec {
    pub fn binary_square(center: [f64; 2], half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mask half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self::BinarySquare { center, half_width })
    }

    pub fn soft(grid: TransverseGrid, transmission: Array2<f64>) -> Result<Self> {
        validate_transmission(&grid, &transmission)?;
        Ok(Self::Soft { grid, transmission })
    }

    pub fn phase_mask(
        grid: TransverseGrid,
        transmission: Array2<f64>,
        phase: Array2<f64>,
    ) -> Result<Self> {
        validate_transmission(&grid, &transmission)?;
        if phase.shape() != transmission.shape() {
            return Err(Error::GridMismatch(
                "phase raster must match the transmission raster".into(),
            ));
        }
        Ok(Self::Phase { grid, transmission, phase })
    }

    /// Import a sampled mask from CSV rows `x,y,T,phi`. Every grid pixel must
    /// be covered exactly once (rows are matched to the nearest pixel center).
    /// Returns a `Phase` mask when any phi is nonzero, otherwise `Soft`.
    pub fn from_csv<R: BufRead>(reader: R, grid: &TransverseGrid) -> Result<Self> {
        let n = grid.samples_per_axis();
        let mut transmission = Array2::<f64>::from_elem((n, n), f64::NAN);
        let mut phase = Array2::<f64>::zeros((n, n));
        let locate = |coord: f64| -> Result<usize> {
            let k = (coord + grid.half_extent()) / grid.spacing() - 0.5;
            let idx = k.round();
            if (k - idx).abs() > 0.25 || idx < 0.0 || idx >= n as f64 {
                return Err(Error::CsvParse(format!(
                    "coordinate {coord} does not match a pixel center of the target grid"
                )));
            }
            Ok(idx as usize)
        };
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || (lineno == 0 && trimmed.starts_with(|c: char| c.is_alphabetic())) {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::CsvParse(format!(
                    "line {}: expected 4 fields x,y,T,phi, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::CsvParse(format!("line {}: {e}", lineno + 1)))
            };
            let (x, y) = (parse(fields[0])?, parse(fields[1])?);
            let (t, p) = (parse(fields[2])?, parse(fields[3])?);
            let (i, j) = (locate(x)?, locate(y)?);
            transmission[[i, j]] = t;
            phase[[i, j]] = p;
        }
        if let Some(((i, j), _)) = transmission.indexed_iter().find(|(_, t)| t.is_nan()) {
            return Err(Error::CsvParse(format!(
                "pixel ({}, {}) not covered by the CSV raster",
                grid.coordinate(i),
                grid.coordinate(j)
            )));
        }
        if phase.iter().any(|&p| p != 0.0) {
            Self::phase_mask(grid.clone(), transmission, phase)
        } else {
            Self::soft(grid.clone(), transmission)
        }
    }

    fn check_grid(&self, grid: &TransverseGrid) -> Result<()> {
        match self {
            Self::BinarySquare { .. } => Ok(()),
            Self::Soft { grid: g, .. } | Self::Phase { grid: g, .. } => {
                if g == grid {
                    Ok(())
                } else {
                    Err(Error::GridMismatch(
                        "sampled mask raster does not match the LO grid".into(),
                    ))
                }
            }
        }
    }

    /// Intensity transmission at pixel `(i, j)` of `grid`.
    fn transmission_at(&self, grid: &TransverseGrid, i: usize, j: usize) -> f64 {
        match self {
            Self::BinarySquare { center, half_width } => {
                let x = grid.coordinate(i);
                let y = grid.coordinate(j);
                if (x - center[0]).abs() <= *half_width && (y - center[1]).abs() <= *half_width {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Soft { transmission, .. } | Self::Phase { transmission, .. } => {
                transmission[[i, j]]
            }
        }
    }

    fn phase_at(&self, i: usize, j: usize) -> f64 {
        match self {
            Self::Phase { phase, .. } => phase[[i, j]],
            _ => 0.0,
        }
    }
}

/// Apply the mask to a local oscillator profile:
/// `out(x) = exp(-i phi(x)) * sqrt(T(x)) * lo(x)`. Not renormalized.
pub fn masked_lo(lo: &FieldProfile, mask: &MaskSpec) -> Result<FieldProfile> {
    mask.check_grid(lo.grid())?;
    let grid = lo.grid().clone();
    let n = grid.samples_per_axis();
    let mut amplitude = lo.amplitude().clone();
    for i in 0..n {
        for j in 0..n {
            let t = mask.transmission_at(&grid, i, j);
            let phi = mask.phase_at(i, j);
            let factor = if phi == 0.0 {
                Complex64::new(t.sqrt(), 0.0)
            } else {
                Complex64::from_polar(t.sqrt(), -phi)
            };
            amplitude[[i, j]] *= factor;
        }
    }
    FieldProfile::from_amplitude(grid, amplitude)
}

/// Intensity transmission of the LO through the mask:
/// `integral T |lo|^2 / integral |lo|^2`.
pub fn lo_transmission(lo: &FieldProfile, mask: &MaskSpec) -> Result<f64> {
    mask.check_grid(lo.grid())?;
    let grid = lo.grid();
    let n = grid.samples_per_axis();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = lo.amplitude()[[i, j]].norm_sqr();
            num += mask.transmission_at(grid, i, j) * p;
            den += p;
        }
    }
    if den <= 0.0 {
        return Err(Error::InvalidArgument(
            "LO transmission undefined for a zero-norm LO".into(),
        ));
    }
    Ok(num / den)
}

/// Uniform-amplitude square LO of side `2 * half_width`, centered at
/// `(displacement, 0)`, normalized to unit discrete norm. The displacement
/// moves the LO along the x axis only.
pub fn square_lo(
    displacement: f64,
    half_width: f64,
    grid: &TransverseGrid,
) -> Result<FieldProfile> {
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "LO half width must be positive and finite, got {half_width}"
        )));
    }
    if displacement.abs() + half_width > grid.half_extent() {
        return Err(Error::InvalidArgument(format!(
            "square LO at displacement {displacement} with half width {half_width} \
             exits the grid (half extent {})",
            grid.half_extent()
        )));
    }
    let n = grid.samples_per_axis();
    let xs = grid.coordinates();
    let inside_x: Vec<bool> = xs.iter().map(|&x| (x - displacement).abs() <= half_width).collect();
    let inside_y: Vec<bool> = xs.iter().map(|&y| y.abs() <= half_width).collect();
    let mut amplitude = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        if !inside_x[i] {
            continue;
        }
        for j in 0..n {
            if inside_y[j] {
                amplitude[[i, j]] = Complex64::new(1.0, 0.0);
            }
        }
    }
    FieldProfile::from_amplitude(grid.clone(), amplitude)?.into_normalized()
}

/// Mode-space description of one measurement configuration: overlaps of the
/// masked LO and of the reference-beam (beam b) LO with each basis mode, plus
/// the total and captured LO transmissions.
///
/// `reference_overlap` is normalized so its squares sum to one; the raw
/// captured weight of the reference LO is kept in `reference_captured` so the
/// noise model can treat the weight outside the basis as vacuum.
#[derive(Debug, Clone)]
pub struct OverlapSet {
    pub modes: Vec<ModeIndex>,
    /// Field overlap of the masked LO with each mode (non-negative).
    pub masked_overlap: Vec<f64>,
    /// Relative phase of the masked LO against each mode (radians).
    pub masked_phase: Vec<f64>,
    /// Normalized field overlap of the reference LO with each mode.
    pub reference_overlap: Vec<f64>,
    /// Relative phase of the reference LO against each mode (radians).
    pub reference_phase: Vec<f64>,
    /// Total LO transmission through the mask.
    pub lo_transmission: f64,
    /// Sum of squared masked overlaps (transmission captured by the basis).
    pub captured_transmission: f64,
    /// Fraction of the reference LO power captured by the basis.
    pub reference_captured: f64,
}

impl OverlapSet {
    /// Assemble from raw coefficients, validating the stored invariants.
    pub fn from_parts(
        modes: Vec<ModeIndex>,
        masked_overlap: Vec<f64>,
        masked_phase: Vec<f64>,
        reference_overlap: Vec<f64>,
        reference_phase: Vec<f64>,
        lo_transmission: f64,
        reference_captured: f64,
    ) -> Result<Self> {
        let k = modes.len();
        if [masked_overlap.len(), masked_phase.len(), reference_overlap.len(), reference_phase.len()]
            .iter()
            .any(|&l| l != k)
        {
            return Err(Error::InvalidArgument(
                "overlap vectors must all match the mode list length".into(),
            ));
        }
        if masked_overlap.iter().chain(reference_overlap.iter()).any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("overlaps must be non-negative".into()));
        }
        let alpha_sq: f64 = reference_overlap.iter().map(|a| a * a).sum();
        if (alpha_sq - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "reference overlaps must be normalized: sum of squares is {alpha_sq}"
            )));
        }
        if !(0.0..=1.0 + 1e-9).contains(&lo_transmission) {
            return Err(Error::InvalidArgument(format!(
                "LO transmission must lie in [0, 1], got {lo_transmission}"
            )));
        }
        if !(0.0..=1.0 + 1e-9).contains(&reference_captured) {
            return Err(Error::InvalidArgument(format!(
                "captured reference weight must lie in [0, 1], got {reference_captured}"
            )));
        }
        let captured_transmission: f64 = masked_overlap.iter().map(|t| t * t).sum();
        if captured_transmission > lo_transmission + 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "captured transmission {captured_transmission} exceeds total {lo_transmission}"
            )));
        }
        Ok(Self {
            modes,
            masked_overlap,
            masked_phase,
            reference_overlap,
            reference_phase,
            lo_transmission,
            captured_transmission,
            reference_captured,
        })
    }

    /// A single fully matched mode: both LOs exactly on mode 0 of the basis.
    pub fn matched_single_mode() -> Self {
        Self {
            modes: vec![ModeIndex::new(0, 0)],
            masked_overlap: vec![1.0],
            masked_phase: vec![0.0],
            reference_overlap: vec![1.0],
            reference_phase: vec![0.0],
            lo_transmission: 1.0,
            captured_transmission: 1.0,
            reference_captured: 1.0,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Raw (un-normalized) reference overlap of mode `i`.
    pub fn raw_reference_overlap(&self, i: usize) -> f64 {
        self.reference_overlap[i] * self.reference_captured.sqrt()
    }
}

/// Expand the masked LO and the reference LO over `basis`.
///
/// `masked` must be the output of [`masked_lo`] applied to a *normalized* LO,
/// so that its squared norm equals the LO transmission through the mask.
/// `reference_lo` must be normalized.
pub fn expansion_coeffs(
    masked: &FieldProfile,
    reference_lo: &FieldProfile,
    basis: &HgBasis,
) -> Result<OverlapSet> {
    if masked.grid() != reference_lo.grid() || masked.grid() != basis.grid() {
        return Err(Error::GridMismatch(
            "masked LO, reference LO and basis must share one grid".into(),
        ));
    }
    let masked_coeffs = basis.project(masked)?;
    let reference_coeffs = basis.project(reference_lo)?;

    let reference_captured: f64 = reference_coeffs.iter().map(|c| c.norm_sqr()).sum();
    if reference_captured < 1e-12 {
        return Err(Error::DegenerateLo(
            "reference LO is orthogonal to every basis mode".into(),
        ));
    }
    let scale = 1.0 / reference_captured.sqrt();

    let mut masked_overlap = Vec::with_capacity(basis.len());
    let mut masked_phase = Vec::with_capacity(basis.len());
    for c in &masked_coeffs {
        masked_overlap.push(c.norm());
        masked_phase.push(if c.norm() > 0.0 { c.arg() } else { 0.0 });
    }
    let mut reference_overlap = Vec::with_capacity(basis.len());
    let mut reference_phase = Vec::with_capacity(basis.len());
    for c in &reference_coeffs {
        reference_overlap.push(c.norm() * scale);
        reference_phase.push(if c.norm() > 0.0 { c.arg() } else { 0.0 });
    }

    let lo_transmission = masked.norm_sq().min(1.0);
    let captured_transmission: f64 = masked_overlap.iter().map(|t| t * t).sum();
    if captured_transmission > lo_transmission + 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "captured transmission {captured_transmission} exceeds total {lo_transmission}; \
             was the LO normalized before masking?"
        )));
    }
    Ok(OverlapSet {
        modes: basis.modes().to_vec(),
        masked_overlap,
        masked_phase,
        reference_overlap,
        reference_phase,
        lo_transmission,
        captured_transmission,
        reference_captured,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{hermite_gauss, ModeIndex};
    use approx::assert_abs_diff_eq;

    fn grid() -> TransverseGrid {
        TransverseGrid::new(4.0, 512).unwrap()
    }

    #[test]
    fn transparent_mask_is_identity() {
        let g = grid();
        let lo = square_lo(0.0, 1.0, &g).unwrap();
        let mask = MaskSpec::soft(g.clone(), Array2::from_elem((512, 512), 1.0)).unwrap();
        let out = masked_lo(&lo, &mask).unwrap();
        assert_abs_diff_eq!(out.norm_sq(), 1.0, epsilon = 1e-12);
        for (a, b) in lo.amplitude().iter().zip(out.amplitude().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn opaque_mask_annihilates() {
        let g = grid();
        let lo = square_lo(0.0, 1.0, &g).unwrap();
        let mask = MaskSpec::soft(g.clone(), Array2::zeros((512, 512))).unwrap();
        let out = masked_lo(&lo, &mask).unwrap();
        assert_eq!(out.norm_sq(), 0.0);
    }

    #[test]
    fn knife_edge_halves_the_power() {
        let g = grid();
        let lo = square_lo(0.0, 1.0, &g).unwrap();
        let mut t = Array2::zeros((512, 512));
        for i in 0..512 {
            if g.coordinate(i) < 0.0 {
                t.row_mut(i).fill(1.0);
            }
        }
        let mask = MaskSpec::soft(g.clone(), t).unwrap();
        let out = masked_lo(&lo, &mask).unwrap();
        assert_abs_diff_eq!(out.norm_sq(), 0.5, epsilon = 1e-3);
    }

    #[test]
    fn lo_transmission_tent_values() {
        let g = grid();
        let mask = MaskSpec::binary_square([0.0, 0.0], 1.0).unwrap();
        let matched = square_lo(0.0, 1.0, &g).unwrap();
        assert_abs_diff_eq!(lo_transmission(&matched, &mask).unwrap(), 1.0, epsilon = 1e-12);
        let half = square_lo(1.0, 1.0, &g).unwrap();
        assert_abs_diff_eq!(lo_transmission(&half, &mask).unwrap(), 0.5, epsilon = 1e-3);
        let gone = square_lo(2.0, 1.0, &g).unwrap();
        assert_abs_diff_eq!(lo_transmission(&gone, &mask).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lo_transmission_matches_masked_norm_for_flat_phase() {
        let g = grid();
        let mask = MaskSpec::binary_square([0.3, 0.0], 0.8).unwrap();
        for d in [-0.6, 0.0, 0.45] {
            let lo = square_lo(d, 1.0, &g).unwrap();
            let t = lo_transmission(&lo, &mask).unwrap();
            let m = masked_lo(&lo, &mask).unwrap().norm_sq();
            assert_abs_diff_eq!(t, m, epsilon = 1e-8);
        }
    }

    #[test]
    fn square_lo_must_fit() {
        let g = grid();
        assert!(square_lo(3.5, 1.0, &g).is_err());
        assert!(square_lo(0.0, 5.0, &g).is_err());
        assert!(square_lo(0.0, -1.0, &g).is_err());
    }

    #[test]
    fn soft_mask_rejects_out_of_range_transmission() {
        let g = TransverseGrid::new(1.0, 16).unwrap();
        let mut t = Array2::zeros((16, 16));
        t[[3, 3]] = 1.5;
        assert!(MaskSpec::soft(g, t).is_err());
    }

    #[test]
    fn expansion_recovers_a_basis_element() {
        let g = TransverseGrid::new(4.0, 256).unwrap();
        let basis = HgBasis::even(4, 1.0, &g).unwrap();
        let a1 = hermite_gauss(ModeIndex::new(0, 0), 1.0, &g).unwrap();
        let set = expansion_coeffs(&a1, &a1, &basis).unwrap();
        assert_abs_diff_eq!(set.masked_overlap[0], 1.0, epsilon = 1e-9);
        for t in &set.masked_overlap[1..] {
            assert_abs_diff_eq!(*t, 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(set.masked_phase[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(set.reference_captured, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn expansion_of_two_mode_superposition() {
        let g = TransverseGrid::new(4.0, 256).unwrap();
        let basis = HgBasis::even(4, 1.0, &g).unwrap();
        let a1 = hermite_gauss(ModeIndex::new(0, 0), 1.0, &g).unwrap();
        let a2 = hermite_gauss(ModeIndex::new(0, 2), 1.0, &g).unwrap();
        let mixed = FieldProfile::from_amplitude(
            g.clone(),
            (a1.amplitude() + a2.amplitude()).mapv(|v| v / Complex64::new(2f64.sqrt(), 0.0)),
        )
        .unwrap();
        let set = expansion_coeffs(&mixed, &a1, &basis).unwrap();
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(set.masked_overlap[0], inv_sqrt2, epsilon = 1e-9);
        assert_abs_diff_eq!(set.masked_overlap[1], inv_sqrt2, epsilon = 1e-9);
        assert_abs_diff_eq!(set.masked_overlap[2], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn even_profile_has_no_odd_mode_weight() {
        let g = TransverseGrid::new(4.0, 256).unwrap();
        let odd = HgBasis::from_modes(
            vec![ModeIndex::new(1, 0), ModeIndex::new(0, 1), ModeIndex::new(1, 1), ModeIndex::new(3, 0)],
            1.0,
            &g,
        )
        .unwrap();
        let lo = square_lo(0.0, 1.0, &g).unwrap();
        for c in odd.project(&lo).unwrap() {
            assert_abs_diff_eq!(c.norm(), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn degenerate_reference_lo_is_rejected() {
        let g = TransverseGrid::new(4.0, 256).unwrap();
        let odd = HgBasis::from_modes(vec![ModeIndex::new(1, 0)], 1.0, &g).unwrap();
        let lo = square_lo(0.0, 1.0, &g).unwrap();
        let err = expansion_coeffs(&lo, &lo, &odd);
        assert!(matches!(err, Err(Error::DegenerateLo(_))));
    }

    #[test]
    fn mask_csv_import_roundtrip() {
        let g = TransverseGrid::new(1.0, 16).unwrap();
        let mut csv = String::from("x,y,T,phi\n");
        for i in 0..16 {
            for j in 0..16 {
                let t = if i < 8 { 1.0 } else { 0.25 };
                csv.push_str(&format!("{},{},{},0.0\n", g.coordinate(i), g.coordinate(j), t));
            }
        }
        let mask = MaskSpec::from_csv(csv.as_bytes(), &g).unwrap();
        match &mask {
            MaskSpec::Soft { transmission, .. } => {
                assert_eq!(transmission[[0, 0]], 1.0);
                assert_eq!(transmission[[15, 15]], 0.25);
            }
            _ => panic!("expected a soft mask"),
        }
    }

    #[test]
    fn mask_csv_rejects_incomplete_raster() {
        let g = TransverseGrid::new(1.0, 16).unwrap();
        let csv = format!("x,y,T,phi\n{},{},1.0,0.0\n", g.coordinate(0), g.coordinate(0));
        assert!(matches!(MaskSpec::from_csv(csv.as_bytes(), &g), Err(Error::CsvParse(_))));
    }

    #[test]
    fn phase_mask_applies_conjugated_phase() {
        let g = TransverseGrid::new(1.0, 16).unwrap();
        let lo = square_lo(0.0, 0.5, &g).unwrap();
        let phase = Array2::from_elem((16, 16), std::f64::consts::FRAC_PI_2);
        let mask = MaskSpec::phase_mask(g.clone(), Array2::from_elem((16, 16), 1.0), phase).unwrap();
        let out = masked_lo(&lo, &mask).unwrap();
        // exp(-i pi/2) rotates a real amplitude onto the negative imaginary axis.
        let (i, j) = (8, 8);
        assert!(out.amplitude()[[i, j]].im < 0.0);
        assert_abs_diff_eq!(out.norm_sq(), 1.0, epsilon = 1e-12);
    }
}
