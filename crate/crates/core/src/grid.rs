//! Periodic one-dimensional grids, complex and real fields sampled on them,
//! and the spectral machinery (FFT, free propagation, circular convolution)
//! shared by every physics module.
//!
//! Positions are dimensionless, `y = σ_G x / ħ`. Grid point `j` sits at
//! `y_j = -L/2 + j·Δy`; the dual wavenumbers follow FFT ordering with
//! spacing `2π/L`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance for "already normalized" checks on densities.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    n_points: usize,
    length: f64,
}

impl SpatialGrid {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::Grid(format!(
                "n_points must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Grid(format!("length must be positive, got {length}")));
        }
        Ok(Self { n_points, length })
    }

    /// Smallest power-of-two grid of the given length whose spacing does not
    /// exceed `max_spacing`.
    pub fn with_max_spacing(length: f64, max_spacing: f64) -> Result<Self> {
        if !(max_spacing > 0.0) {
            return Err(Error::Grid(format!("max_spacing must be positive, got {max_spacing}")));
        }
        let needed = (length / max_spacing).ceil().max(2.0) as usize;
        Self::new(needed.next_power_of_two(), length)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    /// Minimum-image offset of index `j` from index 0, in `[-L/2, L/2)`.
    pub fn offset(&self, j: usize) -> f64 {
        let n = self.n_points;
        let k = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
        k * self.spacing()
    }

    /// Wraps a displacement into `[-L/2, L/2)`.
    pub fn wrap(&self, d: f64) -> f64 {
        d - self.length * (d / self.length + 0.5).floor()
    }

    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = self.wavenumber_spacing();
        (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect()
    }

    /// Largest representable wavenumber magnitude, `π/Δy`.
    pub fn max_wavenumber(&self) -> f64 {
        PI / self.spacing()
    }

    pub(crate) fn check_same(&self, other: &SpatialGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Grid(format!(
                "grid mismatch: ({}, {}) vs ({}, {})",
                self.n_points, self.length, other.n_points, other.length
            )))
        }
    }
}

/// Complex amplitudes `ψ(y_j)` on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: SpatialGrid,
    amplitudes: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: SpatialGrid, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::Grid(format!(
                "expected {} amplitudes, got {}",
                grid.n_points(),
                amplitudes.len()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = grid.positions().into_iter().map(f).collect();
        Self { grid, amplitudes }
    }

    /// Normalized Gaussian packet `exp(-(y-y0)²/(4σ²) + i p0 (y-y0))`.
    pub fn gaussian(grid: SpatialGrid, center: f64, width: f64, momentum: f64) -> Self {
        Self::chirped_gaussian(grid, center, width, 0.0, momentum)
    }

    /// Gaussian with a quadratic phase `exp(-(y-y0)²/(4σ²) - i c (y-y0)²/2 + i p0 (y-y0))`.
    ///
    /// The displacement is measured with the minimum-image convention so a
    /// packet near the edge of the box stays smooth across the boundary.
    pub fn chirped_gaussian(
        grid: SpatialGrid,
        center: f64,
        width: f64,
        chirp: f64,
        momentum: f64,
    ) -> Self {
        let mut f = Self::from_fn(grid, |y| {
            let d = grid.wrap(y - center);
            let re = -d * d / (4.0 * width * width);
            let im = -0.5 * chirp * d * d + momentum * d;
            Complex64::new(re, im).exp()
        });
        f.renormalize();
        f
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `Δy Σ|ψ_j|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.grid.spacing() * self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `|ψ|²` as a real field.
    pub fn density(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.amplitudes.iter().map(|c| c.norm_sqr()).collect(),
        }
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm()).collect()
    }

    /// `⟨self|other⟩ = Δy Σ conj(self_j) other_j`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        let s: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.spacing())
    }

    pub fn scale(&mut self, factor: Complex64) {
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    /// In-place normalization; leaves an all-zero field untouched and
    /// returns the squared norm found before scaling.
    pub fn renormalize(&mut self) -> f64 {
        let n2 = self.norm_sqr();
        if n2 > 0.0 && n2.is_finite() {
            let s = 1.0 / n2.sqrt();
            for a in &mut self.amplitudes {
                *a *= s;
            }
        }
        n2
    }

    /// Linear combination `Σ c_i φ_i` over fields sharing a grid.
    pub fn superpose(terms: &[(Complex64, &ComplexField)]) -> Result<ComplexField> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Grid("empty superposition".into()))?;
        let grid = *first.1.grid();
        let mut out = ComplexField::zeros(grid);
        for (c, f) in terms {
            grid.check_same(f.grid())?;
            for (o, a) in out.amplitudes.iter_mut().zip(f.amplitudes()) {
                *o += c * a;
            }
        }
        Ok(out)
    }

    /// Translates the field by `s` (spectrally): the result is `ψ(y - s)`.
    pub fn translated(&self, s: f64) -> ComplexField {
        let spectral = Spectral::new(&self.grid);
        let mut buf = self.amplitudes.clone();
        spectral.forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(spectral.wavenumbers()) {
            *b *= Complex64::from_polar(1.0, -k * s);
        }
        spectral.inverse(&mut buf);
        ComplexField {
            grid: self.grid,
            amplitudes: buf,
        }
    }

    /// Multiplies by the plane wave `e^{i u y}`; `u` is a momentum kick in
    /// units of σ_G. On a periodic box this is exact only for `u` on the
    /// dual lattice, which is what [`Self::boosted`] callers should use for
    /// long evolutions.
    pub fn boosted(&self, u: f64) -> ComplexField {
        let mut out = self.clone();
        for (a, y) in out.amplitudes.iter_mut().zip(self.grid.positions()) {
            *a *= Complex64::from_polar(1.0, u * y);
        }
        out
    }
}

/// Real samples on a [`SpatialGrid`].
///
/// Densities store `f(y_j)`; convolution kernels store `K(offset(j))`, i.e.
/// the kernel evaluated at the minimum-image displacement of index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::Grid(format!(
                "expected {} values, got {}",
                grid.n_points(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.positions().into_iter().map(f).collect(),
        }
    }

    /// Samples a displacement kernel at the minimum-image offsets.
    pub fn kernel_from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: (0..grid.n_points()).map(|j| f(grid.offset(j))).collect(),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// `Δy Σ self_j other_j`.
    pub fn dot(&self, other: &RealField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }
}

fn planner_cache() -> &'static Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Forward/inverse FFT pair for one grid size, plus the grid's wavenumbers.
///
/// Plans are cached process-wide, so constructing a `Spectral` is cheap.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("n", &self.wavenumbers.len())
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let n = grid.n_points();
        let (forward, inverse) = {
            let mut cache = planner_cache().lock().expect("fft plan cache poisoned");
            cache
                .entry(n)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
                })
                .clone()
        };
        Self {
            forward,
            inverse,
            wavenumbers: grid.wavenumbers(),
        }
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavenumbers.is_empty()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the `1/n` factor, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / buf.len() as f64;
        for b in buf.iter_mut() {
            *b *= s;
        }
    }

    /// Free-propagation phases `exp(-i κ k² t / 2)` in FFT order.
    pub fn kinetic_phases(&self, dt: f64, kappa: f64) -> Vec<Complex64> {
        self.wavenumbers
            .iter()
            .map(|k| Complex64::from_polar(1.0, -0.5 * kappa * k * k * dt))
            .collect()
    }

    /// Multiplies in momentum space by `phases` (FFT order).
    pub fn apply_momentum_diagonal(&self, buf: &mut [Complex64], phases: &[Complex64]) {
        self.forward(buf);
        for (b, p) in buf.iter_mut().zip(phases) {
            *b *= p;
        }
        self.inverse(buf);
    }
}

/// Returns the field scaled to unit norm.
pub fn normalize(field: &ComplexField) -> Result<ComplexField> {
    let n2 = field.norm_sqr();
    if !(n2 > 0.0) || !n2.is_finite() {
        return Err(Error::Norm(format!("cannot normalize field with norm² = {n2}")));
    }
    let mut out = field.clone();
    out.scale(Complex64::new(1.0 / n2.sqrt(), 0.0));
    Ok(out)
}

/// Circular convolution `(ρ∗K)(y_i) = Δy Σ_j ρ_j K(y_i - y_j)`.
///
/// `kernel` holds samples at minimum-image offsets (see
/// [`RealField::kernel_from_fn`]).
pub fn periodic_convolve(density: &RealField, kernel: &RealField) -> Result<RealField> {
    density.grid().check_same(kernel.grid())?;
    let grid = *density.grid();
    let spectral = Spectral::new(&grid);
    let mut a: Vec<Complex64> = density.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut b: Vec<Complex64> = kernel.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spectral.forward(&mut a);
    spectral.forward(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    spectral.inverse(&mut a);
    let dx = grid.spacing();
    // Convolution of index 0 maps onto offset 0; densities start at -L/2,
    // so the result is aligned with the density's sample positions.
    RealField::new(grid, a.into_iter().map(|c| c.re * dx).collect())
}

/// Free evolution over a duration `dt`: multiplies the momentum amplitudes
/// by `exp(-i κ q² dt / 2)`. The Strang splitter calls this with `dt/2`.
pub fn kinetic_step(field: &ComplexField, dt: f64, kappa: f64) -> Result<ComplexField> {
    if !(dt > 0.0) {
        return Err(Error::config("dt", format!("must be positive, got {dt}")));
    }
    let spectral = Spectral::new(field.grid());
    let phases = spectral.kinetic_phases(dt, kappa);
    let mut buf = field.amplitudes().to_vec();
    spectral.apply_momentum_diagonal(&mut buf, &phases);
    ComplexField::new(*field.grid(), buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize, l: f64) -> SpatialGrid {
        SpatialGrid::new(n, l).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(SpatialGrid::new(100, 1.0).is_err());
        assert!(SpatialGrid::new(128, 0.0).is_err());
        assert!(SpatialGrid::new(128, -2.0).is_err());
        let g = SpatialGrid::with_max_spacing(10.0, 0.03).unwrap();
        assert!(g.spacing() <= 0.03);
        assert_eq!(g.n_points(), 512);
    }

    #[test]
    fn dual_grid_spacing() {
        let g = grid(64, 8.0);
        let k = g.wavenumbers();
        assert_relative_eq!(k[1] - k[0], 2.0 * PI / 8.0, epsilon = 1e-15);
        assert_relative_eq!(k[32], -PI / g.spacing(), epsilon = 1e-12);
        assert_relative_eq!(g.wrap(4.5), -3.5, epsilon = 1e-15);
        assert_relative_eq!(g.wrap(-4.5), 3.5, epsilon = 1e-15);
    }

    #[test]
    fn normalize_scales_to_unit_norm() {
        let g = grid(128, 10.0);
        let mut f = ComplexField::gaussian(g, 0.0, 1.0, 0.3);
        f.scale(Complex64::new(2.0, 0.0));
        assert_relative_eq!(f.norm_sqr(), 4.0, max_relative = 1e-13);
        let n = normalize(&f).unwrap();
        assert_relative_eq!(n.norm_sqr(), 1.0, max_relative = 1e-14);
        for (a, b) in n.amplitudes().iter().zip(f.amplitudes()) {
            assert_relative_eq!(a.re, b.re / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_is_idempotent() {
        let g = grid(128, 10.0);
        let f = ComplexField::gaussian(g, 1.0, 0.7, -2.0);
        let n = normalize(&f).unwrap();
        for (a, b) in n.amplitudes().iter().zip(f.amplitudes()) {
            assert!((a - b).norm() <= 1e-14 * b.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn normalize_rejects_zero_field() {
        let g = grid(16, 1.0);
        assert!(matches!(normalize(&ComplexField::zeros(g)), Err(Error::Norm(_))));
    }

    #[test]
    fn convolution_sifts_delta() {
        let g = grid(128, 16.0);
        let j0 = 77;
        let mut delta = vec![0.0; 128];
        delta[j0] = 1.0 / g.spacing();
        let rho = RealField::new(g, delta).unwrap();
        let kernel = RealField::kernel_from_fn(g, |s| (-s * s / 2.0).exp());
        let out = periodic_convolve(&rho, &kernel).unwrap();
        let y0 = g.position(j0);
        for (j, v) in out.values().iter().enumerate() {
            let d = g.wrap(g.position(j) - y0);
            assert_relative_eq!(*v, (-d * d / 2.0).exp(), epsilon = 1e-13);
        }
    }

    #[test]
    fn convolution_of_uniform_density() {
        let g = grid(256, 20.0);
        let level = 0.05;
        let rho = RealField::new(g, vec![level; 256]).unwrap();
        let kernel = RealField::kernel_from_fn(g, |s| (-s * s / 2.0).exp());
        let kint = kernel.integral();
        let out = periodic_convolve(&rho, &kernel).unwrap();
        for v in out.values() {
            assert_relative_eq!(*v, level * kint, max_relative = 1e-12);
        }
    }

    /// Direct O(n²) circular sum used as the reference for the FFT path.
    fn brute_convolve(rho: &RealField, kernel: &RealField) -> Vec<f64> {
        let g = rho.grid();
        let n = g.n_points();
        (0..n)
            .map(|i| {
                g.spacing()
                    * (0..n)
                        .map(|j| rho.values()[j] * kernel.values()[(i + n - j) % n])
                        .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn convolution_matches_double_sum_for_two_gaussians() {
        let g = grid(256, 24.0);
        let rho = RealField::from_fn(g, |y| {
            0.7 * (-(y + 4.0).powi(2) / 0.5).exp() + 0.3 * (-(y - 5.0).powi(2) / 2.0).exp()
        });
        let kernel = RealField::kernel_from_fn(g, |s| (-s * s / 2.0).exp());
        let fast = periodic_convolve(&rho, &kernel).unwrap();
        let slow = brute_convolve(&rho, &kernel);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let swapped = periodic_convolve(&kernel, &rho).unwrap();
        for (a, b) in fast.values().iter().zip(swapped.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convolution_rejects_grid_mismatch() {
        let a = RealField::new(grid(16, 1.0), vec![0.0; 16]).unwrap();
        let b = RealField::new(grid(16, 2.0), vec![0.0; 16]).unwrap();
        assert!(matches!(periodic_convolve(&a, &b), Err(Error::Grid(_))));
    }

    #[test]
    fn kinetic_step_on_plane_wave() {
        let g = grid(64, 2.0 * PI);
        let q = 3.0;
        let f = ComplexField::from_fn(g, |y| Complex64::from_polar(1.0, q * y));
        let (dt, kappa) = (0.01, 0.7);
        let out = kinetic_step(&f, dt, kappa).unwrap();
        let phase = Complex64::from_polar(1.0, -0.5 * kappa * q * q * dt);
        for (a, b) in out.amplitudes().iter().zip(f.amplitudes()) {
            assert!((a - b * phase).norm() < 1e-13);
            assert_relative_eq!(a.norm(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn kinetic_step_with_zero_kappa_is_identity() {
        let g = grid(128, 12.0);
        let f = ComplexField::gaussian(g, 0.5, 0.8, 1.5);
        let out = kinetic_step(&f, 0.1, 0.0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(f.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(kinetic_step(&f, 0.0, 1.0).is_err());
    }

    #[test]
    fn free_dispersion_matches_analytic_gaussian() {
        // σ(t)² = σ0² + (κ t / (2 σ0))² for a minimum-uncertainty packet.
        let g = grid(1024, 80.0);
        let (s0, kappa, dt) = (1.0, 0.5, 0.05);
        let mut f = ComplexField::gaussian(g, 0.0, s0, 0.0);
        for _ in 0..100 {
            f = kinetic_step(&f, dt, kappa).unwrap();
        }
        let t = 100.0 * dt;
        assert_relative_eq!(f.norm_sqr(), 1.0, max_relative = 1e-13);
        let rho = f.density();
        let var = rho.dot(&RealField::from_fn(g, |y| y * y)).unwrap();
        let expected = s0 * s0 + (kappa * t / (2.0 * s0)).powi(2);
        assert!(((var - expected) / expected).abs() < 1e-6, "{var} vs {expected}");
    }

    #[test]
    fn translation_and_boost() {
        let g = grid(256, 32.0);
        let f = ComplexField::gaussian(g, 0.0, 1.0, 0.0);
        let t = f.translated(2.5);
        let expected = ComplexField::gaussian(g, 2.5, 1.0, 0.0);
        for (a, b) in t.amplitudes().iter().zip(expected.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        let b = f.boosted(1.0);
        assert_relative_eq!(b.norm_sqr(), 1.0, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn fft_round_trip_is_identity(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = grid(128, 10.0);
            let s = Spectral::new(&g);
            let orig: Vec<Complex64> = (0..128)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let mut buf = orig.clone();
            s.forward(&mut buf);
            s.inverse(&mut buf);
            for (a, b) in buf.iter().zip(&orig) {
                prop_assert!((a - b).norm() < 1e-13);
            }
        }

        #[test]
        fn fft_convolution_agrees_with_double_sum(seed in any::<u64>(), log_n in 3u32..9) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 1usize << log_n;
            let g = grid(n, 7.0);
            let rho = RealField::new(g, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
            let kernel = RealField::kernel_from_fn(g, |s| (-s * s).exp());
            let fast = periodic_convolve(&rho, &kernel).unwrap();
            let slow = brute_convolve(&rho, &kernel);
            for (a, b) in fast.values().iter().zip(&slow) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
