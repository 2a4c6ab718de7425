//! Collisional-decoherence model objects: the momentum-transfer
//! distribution `G(q)`, its Fourier transform `Ĝ(s)`, the localization rate
//! `F(s) = γ(1 - Ĝ(s))` and the nonlinear gain functional
//! `Λ[ρ](y) = γ((ρ∗Ĝ)(y) - ∫ρ(ρ∗Ĝ))`.
//!
//! Internally everything is dimensionless: positions in units of `ħ/σ_G`,
//! momenta in units of `σ_G`, times in units of `1/γ`.

use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use num_complex::Complex64;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RealField, Spectral, SpatialGrid, NORM_TOLERANCE};

/// Dimensional inputs; `kappa = σ_G² / (m ħ γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    pub gamma: f64,
    pub mass: f64,
    pub sigma_g: f64,
    pub hbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    kappa: f64,
    dimensional: Option<DimensionalParams>,
}

impl SimulationParams {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::config("kappa", format!("must be finite and positive, got {kappa}")));
        }
        Ok(Self {
            kappa,
            dimensional: None,
        })
    }

    pub fn from_dimensional(d: DimensionalParams) -> Result<Self> {
        for (name, v) in [
            ("gamma", d.gamma),
            ("mass", d.mass),
            ("sigma_g", d.sigma_g),
            ("hbar", d.hbar),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be finite and positive, got {v}")));
            }
        }
        let kappa = d.sigma_g * d.sigma_g / (d.mass * d.hbar * d.gamma);
        let mut p = Self::new(kappa)?;
        p.dimensional = Some(d);
        Ok(p)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dimensional(&self) -> Option<&DimensionalParams> {
        self.dimensional.as_ref()
    }

    /// `y = σ_G x / ħ`; identity when no dimensional set is attached.
    pub fn to_dimensionless_position(&self, x: f64) -> f64 {
        match self.dimensional {
            Some(d) => d.sigma_g * x / d.hbar,
            None => x,
        }
    }

    /// `τ = γ t`.
    pub fn to_dimensionless_time(&self, t: f64) -> f64 {
        match self.dimensional {
            Some(d) => d.gamma * t,
            None => t,
        }
    }

    pub fn to_physical_position(&self, y: f64) -> f64 {
        match self.dimensional {
            Some(d) => d.hbar * y / d.sigma_g,
            None => y,
        }
    }
}

/// An even, normalized momentum-transfer distribution `G(q)`.
pub trait MomentumDistribution: Debug + Send + Sync {
    fn pdf(&self, q: f64) -> f64;

    /// Characteristic function `Ĝ(s) = ∫ G(q) e^{iqs} dq` (real for even `G`).
    /// The default integrates numerically over `±12` standard deviations.
    fn characteristic(&self, s: f64) -> f64 {
        let w = 12.0 * self.std_dev();
        simpson(|q| self.pdf(q) * (q * s).cos(), -w, w, 4096)
    }

    fn std_dev(&self) -> f64;

    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Centered Gaussian `G(q) = exp(-q²/(2σ²)) / √(2πσ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTransfer {
    pub sigma: f64,
}

impl Default for GaussianTransfer {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

impl MomentumDistribution for GaussianTransfer {
    fn pdf(&self, q: f64) -> f64 {
        let z = q / self.sigma;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    fn characteristic(&self, s: f64) -> f64 {
        (-0.5 * self.sigma * self.sigma * s * s).exp()
    }

    fn std_dev(&self) -> f64 {
        self.sigma
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.sigma * z
    }
}

/// Composite Simpson rule on `n` (even) intervals.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Nodes and weights of the composite Simpson rule on `n` (even) intervals.
pub(crate) fn simpson_weights(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + i as f64 * h, w * h / 3.0)
        })
        .unzip()
}

/// Momentum kernel sampled on one grid. Holds `Ĝ` and `F` at the grid's
/// minimum-image offsets plus the FFT of `Ĝ` used for `Λ`.
#[derive(Debug, Clone)]
pub struct MomentumKernel {
    gamma: f64,
    distribution: Arc<dyn MomentumDistribution>,
    grid: SpatialGrid,
    g_hat: RealField,
    rate: RealField,
    g_hat_spectrum: Vec<Complex64>,
    spectral: Spectral,
}

/// `Λ[ρ]` together with the constant `a_ψ = ∫ρ(ρ∗Ĝ)`.
#[derive(Debug, Clone)]
pub struct LambdaEvaluation {
    pub lambda: RealField,
    pub a_psi: f64,
}

impl MomentumKernel {
    /// Gaussian kernel with unit width (the dimensionless model).
    pub fn gaussian(grid: SpatialGrid, gamma: f64) -> Result<Self> {
        Self::new(grid, gamma, Arc::new(GaussianTransfer::default()))
    }

    /// `gamma = 0` is accepted and switches collisions off entirely.
    pub fn new(
        grid: SpatialGrid,
        gamma: f64,
        distribution: Arc<dyn MomentumDistribution>,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::config("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        let g0 = distribution.characteristic(0.0);
        if (g0 - 1.0).abs() > 1e-10 {
            return Err(Error::config("distribution", format!("not normalized: Ĝ(0) = {g0}")));
        }
        let g_hat = RealField::kernel_from_fn(grid, |s| distribution.characteristic(s));
        let rate_values: Vec<f64> = (0..grid.n_points())
            .map(|j| gamma * (1.0 - distribution.characteristic(grid.offset(j))))
            .collect();
        for (f, g) in rate_values.iter().zip(g_hat.values()) {
            if (f - gamma * (1.0 - g)).abs() > 1e-12 || *f < -1e-12 {
                return Err(Error::config("distribution", "F(s) = γ(1 - Ĝ(s)) violated"));
            }
        }
        let rate = RealField::new(grid, rate_values)?;
        let spectral = Spectral::new(&grid);
        let mut g_hat_spectrum: Vec<Complex64> =
            g_hat.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectral.forward(&mut g_hat_spectrum);
        Ok(Self {
            gamma,
            distribution,
            grid,
            g_hat,
            rate,
            g_hat_spectrum,
            spectral,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn distribution(&self) -> &dyn MomentumDistribution {
        self.distribution.as_ref()
    }

    /// `Ĝ` sampled at minimum-image offsets.
    pub fn g_hat(&self) -> &RealField {
        &self.g_hat
    }

    /// `F` sampled at minimum-image offsets.
    pub fn sampled_rate(&self) -> &RealField {
        &self.rate
    }

    /// `F(s) = γ(1 - Ĝ(s))` at an arbitrary separation.
    pub fn localization_rate(&self, s: f64) -> f64 {
        self.gamma * (1.0 - self.distribution.characteristic(s))
    }

    pub fn sample_momentum(&self, rng: &mut dyn RngCore) -> f64 {
        self.distribution.sample(rng)
    }

    /// `(ρ∗Ĝ)` into `out`; `density` and `out` have one value per grid point.
    pub(crate) fn convolve_into(&self, density: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(density.iter().map(|&v| Complex64::new(v, 0.0)));
        self.spectral.forward(buf);
        for (b, g) in buf.iter_mut().zip(&self.g_hat_spectrum) {
            *b *= g;
        }
        self.spectral.inverse(buf);
        let dx = self.grid.spacing();
        for (o, b) in out.iter_mut().zip(buf.iter()) {
            *o = b.re * dx;
        }
    }

    /// Writes `Λ[ρ]` into `out` and returns `a_ψ`; no normalization check.
    pub(crate) fn lambda_into(&self, density: &[f64], out: &mut [f64], buf: &mut Vec<Complex64>) -> f64 {
        self.convolve_into(density, out, buf);
        let dx = self.grid.spacing();
        let a_psi = dx * density.iter().zip(out.iter()).map(|(r, c)| r * c).sum::<f64>();
        for o in out.iter_mut() {
            *o = self.gamma * (*o - a_psi);
        }
        a_psi
    }

    /// `Λ[ρ]` for a normalized density, with `a_ψ`.
    pub fn evaluate_lambda(&self, density: &RealField) -> Result<LambdaEvaluation> {
        self.grid.check_same(density.grid())?;
        let total = density.integral();
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Norm(format!("density integrates to {total}, expected 1")));
        }
        let mut out = vec![0.0; self.grid.n_points()];
        let mut buf = Vec::with_capacity(self.grid.n_points());
        let a_psi = self.lambda_into(density.values(), &mut out, &mut buf);
        Ok(LambdaEvaluation {
            lambda: RealField::new(self.grid, out)?,
            a_psi,
        })
    }

    /// `Λ[ρ] = γ((ρ∗Ĝ) - ∫ρ(ρ∗Ĝ))`.
    pub fn lambda_functional(&self, density: &RealField) -> Result<RealField> {
        Ok(self.evaluate_lambda(density)?.lambda)
    }
}
