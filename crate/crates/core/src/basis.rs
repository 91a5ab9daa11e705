//! Transverse grid, Hermite-Gauss modes, and mode-space projections.
//!
//! All fields are sampled on a square grid centered at the origin, using the
//! midpoint rule: sample k along an axis sits at `-half_extent + (k + 1/2) * spacing`.
//! The midpoint layout keeps samples in exact `±x` pairs, so parity arguments
//! (odd modes integrating to zero against even fields) hold to machine
//! precision, and the quadrature converges superalgebraically for the smooth
//! Gaussian-weighted integrands handled here.
//!
//! Mode functions are Hermite-Gauss profiles at the beam waist (flat phase),
//! normalized to unit *discrete* norm so that orthonormality holds on the grid
//! to the accuracy verified by the Gram-matrix checks.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square sampling grid, centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseGrid {
    half_extent: f64,
    samples_per_axis: usize,
    spacing: f64,
}

/// Minimum number of samples per axis for a usable quadrature.
pub const MIN_SAMPLES_PER_AXIS: usize = 16;

/// Default number of samples per axis.
pub const DEFAULT_SAMPLES_PER_AXIS: usize = 512;

impl TransverseGrid {
    /// Build a centered square grid covering `[-half_extent, half_extent]`
    /// on both axes with `samples_per_axis` midpoint samples.
    pub fn new(half_extent: f64, samples_per_axis: usize) -> Result<Self> {
        if !(half_extent > 0.0) || !half_extent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid half extent must be positive and finite, got {half_extent}"
            )));
        }
        if samples_per_axis < MIN_SAMPLES_PER_AXIS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_SAMPLES_PER_AXIS} samples per axis, got {samples_per_axis}"
            )));
        }
        Ok(Self {
            half_extent,
            samples_per_axis,
            spacing: 2.0 * half_extent / samples_per_axis as f64,
        })
    }

    /// Default grid for a basis of the given waist and an optional aperture:
    /// half extent 4x the larger scale, 512 samples per axis. This keeps the
    /// highest supported mode contained and the Gram matrix of the 25 even
    /// modes within 1e-4 of identity.
    pub fn default_for(waist: f64, aperture_half_width: Option<f64>) -> Result<Self> {
        let scale = waist.max(aperture_half_width.unwrap_or(0.0));
        Self::new(4.0 * scale, DEFAULT_SAMPLES_PER_AXIS)
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn samples_per_axis(&self) -> usize {
        self.samples_per_axis
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Coordinate of sample `k` along either axis (midpoint rule).
    pub fn coordinate(&self, k: usize) -> f64 {
        -self.half_extent + (k as f64 + 0.5) * self.spacing
    }

    /// All sample coordinates along one axis.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.samples_per_axis).map(|k| self.coordinate(k)).collect()
    }
}

/// Hermite-Gauss mode label: `m` is the x order, `n` the y order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
}

impl ModeIndex {
    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HG{}{}", self.m, self.n)
    }
}

/// Maximum number of even-even modes supported by [`even_mode_sequence`].
pub const MAX_EVEN_MODES: usize = 25;

/// The first `count` even-even Hermite-Gauss modes (orders in {0,2,4,6,8}),
/// ordered by total order `m + n` ascending, then `m` ascending. The sequence
/// starts HG00, HG02, HG20 and ends at HG88 for `count = 25`.
pub fn even_mode_sequence(count: usize) -> Result<Vec<ModeIndex>> {
    if count == 0 || count > MAX_EVEN_MODES {
        return Err(Error::InvalidArgument(format!(
            "even mode count must be in [1, {MAX_EVEN_MODES}], got {count}"
        )));
    }
    let mut modes: Vec<ModeIndex> = [0u32, 2, 4, 6, 8]
        .iter()
        .flat_map(|&m| [0u32, 2, 4, 6, 8].iter().map(move |&n| ModeIndex::new(m, n)))
        .collect();
    modes.sort_by_key(|p| (p.m + p.n, p.m));
    modes.truncate(count);
    Ok(modes)
}

/// Complex scalar field sampled on a [`TransverseGrid`].
///
/// `amplitude[[i, j]]` is the value at `(x_i, y_j)`.
#[derive(Debug, Clone)]
pub struct FieldProfile {
    grid: TransverseGrid,
    amplitude: Array2<Complex64>,
    normalized: bool,
    containment_warning: bool,
}

impl FieldProfile {
    /// Wrap an amplitude array; shape must match the grid.
    pub fn from_amplitude(grid: TransverseGrid, amplitude: Array2<Complex64>) -> Result<Self> {
        let n = grid.samples_per_axis();
        if amplitude.shape() != [n, n] {
            return Err(Error::GridMismatch(format!(
                "amplitude shape {:?} does not match grid ({n} x {n})",
                amplitude.shape()
            )));
        }
        Ok(Self { grid, amplitude, normalized: false, containment_warning: false })
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &Array2<Complex64> {
        &self.amplitude
    }

    /// Whether this profile was produced with unit discrete norm.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Set when a mode was generated on a grid that may not contain it.
    pub fn containment_warning(&self) -> bool {
        self.containment_warning
    }

    /// Discrete squared norm, `sum |f|^2 * spacing^2`.
    pub fn norm_sq(&self) -> f64 {
        let w = self.grid.spacing() * self.grid.spacing();
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * w
    }

    /// Rescale to unit discrete norm.
    pub fn into_normalized(mut self) -> Result<Self> {
        let n2 = self.norm_sq();
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize profile with squared norm {n2}"
            )));
        }
        let s = Complex64::new(1.0 / n2.sqrt(), 0.0);
        self.amplitude.mapv_inplace(|a| a * s);
        self.normalized = true;
        Ok(self)
    }

    /// Export as CSV rows `x,y,re,im` (header included), for debugging.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y,re,im")?;
        let n = self.grid.samples_per_axis();
        for i in 0..n {
            let x = self.grid.coordinate(i);
            for j in 0..n {
                let y = self.grid.coordinate(j);
                let a = self.amplitude[[i, j]];
                writeln!(out, "{:.11e},{:.11e},{:.11e},{:.11e}", x, y, a.re, a.im)?;
            }
        }
        Ok(())
    }
}

/// Physicists' Hermite polynomial values H_0..=H_max at `xi`, by recurrence.
fn hermite_column(max_order: u32, xi: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(max_order as usize + 1);
    h.push(1.0);
    if max_order >= 1 {
        h.push(2.0 * xi);
        for k in 1..max_order as usize {
            let next = 2.0 * xi * h[k] - 2.0 * k as f64 * h[k - 1];
            h.push(next);
        }
    }
    h
}

/// One-dimensional Hermite-Gauss factor of order `m`, sampled along the grid
/// axis and normalized to unit discrete 1D norm.
fn hg_axis_factor(m: u32, waist: f64, grid: &TransverseGrid) -> Vec<f64> {
    let mut u: Vec<f64> = grid
        .coordinates()
        .iter()
        .map(|&x| {
            let xi = std::f64::consts::SQRT_2 * x / waist;
            hermite_column(m, xi)[m as usize] * (-x * x / (waist * waist)).exp()
        })
        .collect();
    let norm = (u.iter().map(|v| v * v).sum::<f64>() * grid.spacing()).sqrt();
    for v in &mut u {
        *v /= norm;
    }
    u
}

/// Generate the Hermite-Gauss mode `HG_mn` at the beam waist (flat phase) on
/// `grid`, normalized to unit discrete norm.
///
/// The profile is flagged with a containment warning when
/// `half_extent < 3 * waist * sqrt(max(m, n) + 1)`.
pub fn hermite_gauss(index: ModeIndex, waist: f64, grid: &TransverseGrid) -> Result<FieldProfile> {
    if !(waist > 0.0) || !waist.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "waist must be positive and finite, got {waist}"
        )));
    }
    let ux = hg_axis_factor(index.m, waist, grid);
    let uy = hg_axis_factor(index.n, waist, grid);
    let n = grid.samples_per_axis();
    let mut amplitude = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            amplitude[[i, j]] = Complex64::new(ux[i] * uy[j], 0.0);
        }
    }
    let contained =
        grid.half_extent() >= 3.0 * waist * ((index.m.max(index.n) + 1) as f64).sqrt();
    let mut profile = FieldProfile { grid: grid.clone(), amplitude, normalized: true, containment_warning: !contained };
    // 1D factors are individually normalized; renormalize in 2D to absorb the
    // last rounding.
    let n2 = profile.norm_sq();
    let s = Complex64::new(1.0 / n2.sqrt(), 0.0);
    profile.amplitude.mapv_inplace(|a| a * s);
    Ok(profile)
}

/// Discrete inner product `<f, g> = sum conj(f) g * spacing^2`.
pub fn inner_product(f: &FieldProfile, g: &FieldProfile) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(
            "inner product requires both profiles on one grid".into(),
        ));
    }
    let w = f.grid.spacing() * f.grid.spacing();
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.amplitude.iter().zip(g.amplitude.iter()) {
        acc += a.conj() * b;
    }
    Ok(acc * w)
}

/// A set of Hermite-Gauss modes sharing one waist and grid.
///
/// Profiles factor into 1D axis functions, which lets projections of a field
/// onto the whole set run in `O(orders * samples^2)` instead of
/// `O(modes * samples^2)` and avoids materializing every mode.
#[derive(Debug, Clone)]
pub struct HgBasis {
    modes: Vec<ModeIndex>,
    waist: f64,
    grid: TransverseGrid,
    /// 1D factors keyed by order, in ascending order of `orders`.
    orders: Vec<u32>,
    factors: Vec<Vec<f64>>,
}

impl HgBasis {
    /// Basis over the first `count` even-even modes.
    pub fn even(count: usize, waist: f64, grid: &TransverseGrid) -> Result<Self> {
        Self::from_modes(even_mode_sequence(count)?, waist, grid)
    }

    pub fn from_modes(modes: Vec<ModeIndex>, waist: f64, grid: &TransverseGrid) -> Result<Self> {
        if !(waist > 0.0) || !waist.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "waist must be positive and finite, got {waist}"
            )));
        }
        if modes.is_empty() {
            return Err(Error::InvalidArgument("basis needs at least one mode".into()));
        }
        let mut orders: Vec<u32> = modes.iter().flat_map(|p| [p.m, p.n]).collect();
        orders.sort_unstable();
        orders.dedup();
        let factors = orders.iter().map(|&m| hg_axis_factor(m, waist, grid)).collect();
        Ok(Self { modes, waist, grid: grid.clone(), orders, factors })
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn grid(&self) -> &TransverseGrid {
        &self.grid
    }

    fn factor(&self, order: u32) -> &[f64] {
        let k = self.orders.binary_search(&order).expect("order present by construction");
        &self.factors[k]
    }

    /// Materialize mode `i` as a full profile.
    pub fn profile(&self, i: usize) -> Result<FieldProfile> {
        hermite_gauss(self.modes[i], self.waist, &self.grid)
    }

    /// Project `field` onto every mode: returns `<A_i, field>` for each mode.
    ///
    /// Uses the separable structure: first contracts the field against each
    /// distinct y-order factor, then dots the partial sums against x factors.
    pub fn project(&self, field: &FieldProfile) -> Result<Vec<Complex64>> {
        if *field.grid() != self.grid {
            return Err(Error::GridMismatch(
                "projection requires the field on the basis grid".into(),
            ));
        }
        let n = self.grid.samples_per_axis();
        let w = self.grid.spacing() * self.grid.spacing();
        let amp = field.amplitude();
        // partial[k][i] = sum_j factors[k][j] * field[i, j]
        let partial: Vec<Vec<Complex64>> = self
            .factors
            .par_iter()
            .map(|uy| {
                (0..n)
                    .map(|i| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..n {
                            acc += uy[j] * amp[[i, j]];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(self
            .modes
            .iter()
            .map(|p| {
                let ux = self.factor(p.m);
                let ky = self.orders.binary_search(&p.n).expect("order present");
                let col = &partial[ky];
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    acc += ux[i] * col[i];
                }
                acc * w
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_spacing_follows_definition() {
        let g = TransverseGrid::new(4.0, 256).unwrap();
        assert_abs_diff_eq!(g.spacing(), 0.03125);
        let g = TransverseGrid::new(1.0, 16).unwrap();
        assert_abs_diff_eq!(g.spacing(), 0.125);
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(TransverseGrid::new(0.0, 256).is_err());
        assert!(TransverseGrid::new(-1.0, 256).is_err());
        assert!(TransverseGrid::new(1.0, 8).is_err());
    }

    #[test]
    fn grid_is_centered() {
        let g = TransverseGrid::new(2.0, 64).unwrap();
        let xs = g.coordinates();
        for (k, x) in xs.iter().enumerate() {
            assert_abs_diff_eq!(*x, -xs[xs.len() - 1 - k], epsilon = 1e-15);
        }
    }

    #[test]
    fn even_sequence_matches_stated_ordering() {
        assert_eq!(even_mode_sequence(1).unwrap(), vec![ModeIndex::new(0, 0)]);
        assert_eq!(
            even_mode_sequence(3).unwrap(),
            vec![ModeIndex::new(0, 0), ModeIndex::new(0, 2), ModeIndex::new(2, 0)]
        );
        let all = even_mode_sequence(25).unwrap();
        assert_eq!(all.len(), 25);
        assert_eq!(*all.last().unwrap(), ModeIndex::new(8, 8));
        assert!(even_mode_sequence(0).is_err());
        assert!(even_mode_sequence(26).is_err());
    }

    #[test]
    fn even_sequence_prefix_property() {
        for k in 1..25 {
            let a = even_mode_sequence(k).unwrap();
            let b = even_mode_sequence(k + 1).unwrap();
            assert_eq!(a[..], b[..k]);
        }
    }

    #[test]
    fn hg00_is_normalized_and_orthogonal_to_hg02() {
        let grid = TransverseGrid::default_for(1.0, None).unwrap();
        let f = hermite_gauss(ModeIndex::new(0, 0), 1.0, &grid).unwrap();
        let g = hermite_gauss(ModeIndex::new(0, 2), 1.0, &grid).unwrap();
        assert_abs_diff_eq!(f.norm_sq(), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(inner_product(&f, &g).unwrap().norm(), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(inner_product(&f, &f).unwrap().re, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn hg00_peak_matches_closed_form() {
        // sqrt(2/pi)/w at the origin; odd sample count puts a sample exactly there.
        let grid = TransverseGrid::new(4.0, 257).unwrap();
        let f = hermite_gauss(ModeIndex::new(0, 0), 1.0, &grid).unwrap();
        let center = 257 / 2;
        let peak = f.amplitude()[[center, center]].re;
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(peak, expected, epsilon = 1e-9);
    }

    #[test]
    fn hermite_gauss_rejects_bad_waist() {
        let grid = TransverseGrid::new(4.0, 64).unwrap();
        assert!(hermite_gauss(ModeIndex::new(0, 0), 0.0, &grid).is_err());
        assert!(hermite_gauss(ModeIndex::new(0, 0), -2.0, &grid).is_err());
    }

    #[test]
    fn containment_warning_tracks_grid_size() {
        let grid = TransverseGrid::new(3.0, 64).unwrap();
        let ok = hermite_gauss(ModeIndex::new(0, 0), 1.0, &grid).unwrap();
        assert!(!ok.containment_warning());
        let tight = hermite_gauss(ModeIndex::new(8, 8), 1.0, &grid).unwrap();
        assert!(tight.containment_warning());
    }

    #[test]
    fn inner_product_requires_matching_grids() {
        let g1 = TransverseGrid::new(4.0, 64).unwrap();
        let g2 = TransverseGrid::new(4.0, 128).unwrap();
        let f = hermite_gauss(ModeIndex::new(0, 0), 1.0, &g1).unwrap();
        let g = hermite_gauss(ModeIndex::new(0, 0), 1.0, &g2).unwrap();
        assert!(matches!(inner_product(&f, &g), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn projection_agrees_with_materialized_inner_products() {
        let grid = TransverseGrid::new(4.0, 96).unwrap();
        let basis = HgBasis::even(6, 1.0, &grid).unwrap();
        let field = hermite_gauss(ModeIndex::new(2, 0), 1.0, &grid).unwrap();
        let coeffs = basis.project(&field).unwrap();
        for (i, c) in coeffs.iter().enumerate() {
            let direct = inner_product(&basis.profile(i).unwrap(), &field).unwrap();
            assert_abs_diff_eq!(c.re, direct.re, epsilon = 1e-12);
            assert_abs_diff_eq!(c.im, direct.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn csv_export_roundtrips_values() {
        let grid = TransverseGrid::new(1.0, 16).unwrap();
        let f = hermite_gauss(ModeIndex::new(0, 0), 0.5, &grid).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y,re,im");
        assert_eq!(text.lines().count(), 1 + 16 * 16);
    }
}
