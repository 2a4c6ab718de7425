//! Deterministic evolution under the nonlinear pointer-state equation
//!
//! ```text
//! ∂τ φ = (iκ/2) ∂²_y φ - i V(y) φ + Λ[|φ|²] φ
//! ```
//!
//! integrated with a Strang split step: free half-step, gain/loss step
//! `φ ← φ e^{Λ dt}` (renormalized) combined with the potential phase, free
//! half-step. Also hosts the classical reference integrator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, RealField, Spectral, SpatialGrid};
use crate::kernel::MomentumKernel;

/// Upper bound on `dt · κ · q_max²`.
pub const KINETIC_STABILITY_LIMIT: f64 = 0.5;

/// Dimensionless external potential `V(y)` (energy in units of `ħγ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum Potential {
    #[default]
    Free,
    /// `V = slope · y`
    Linear { slope: f64 },
    /// `V = a y⁴ - b y²`
    Quartic { a: f64, b: f64 },
}

impl Potential {
    pub fn value(&self, y: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Linear { slope } => slope * y,
            Potential::Quartic { a, b } => a * y.powi(4) - b * y * y,
        }
    }

    /// `-V'(y)`
    pub fn force(&self, y: f64) -> f64 {
        match *self {
            Potential::Free => 0.0,
            Potential::Linear { slope } => -slope,
            Potential::Quartic { a, b } => -(4.0 * a * y.powi(3) - 2.0 * b * y),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Potential::Free)
    }

    pub fn sample(&self, grid: &SpatialGrid) -> RealField {
        RealField::from_fn(*grid, |y| self.value(y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub kappa: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Threshold on the co-moving modulus drift per unit τ.
    pub convergence_tol: f64,
    /// τ between two convergence checks.
    pub check_interval: f64,
    /// τ between two expectation-track samples.
    pub track_interval: f64,
    pub potential: Potential,
    /// Stop as soon as the drift criterion is met.
    pub stop_on_convergence: bool,
}

impl EvolutionConfig {
    /// Defaults for a given κ on a given grid: the largest step allowed by
    /// the kinetic stability bound (capped at 0.01), tolerance 1e-6.
    pub fn for_grid(kappa: f64, grid: &SpatialGrid) -> Self {
        let qmax = grid.max_wavenumber();
        let dt = (0.8 * KINETIC_STABILITY_LIMIT / (kappa * qmax * qmax)).min(0.01);
        Self {
            kappa,
            dt,
            t_max: 200.0,
            convergence_tol: 1e-6,
            check_interval: 0.5,
            track_interval: 0.1,
            potential: Potential::Free,
            stop_on_convergence: true,
        }
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::config("kappa", format!("must be >= 0, got {}", self.kappa)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::config("t_max", format!("must be >= 0, got {}", self.t_max)));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::config("convergence_tol", "must be positive"));
        }
        if !(self.check_interval > 0.0) || !(self.track_interval > 0.0) {
            return Err(Error::config("check_interval", "intervals must be positive"));
        }
        let qmax = grid.max_wavenumber();
        let stiffness = self.dt * self.kappa * qmax * qmax;
        if stiffness >= KINETIC_STABILITY_LIMIT {
            return Err(Error::config(
                "dt",
                format!(
                    "dt·κ·q_max² = {stiffness:.3} exceeds {KINETIC_STABILITY_LIMIT} (dt = {})",
                    self.dt
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub position: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub final_field: ComplexField,
    pub converged: bool,
    pub convergence_time: Option<f64>,
    /// Elapsed τ when the evolution stopped.
    pub final_time: f64,
    /// Last measured co-moving modulus drift per unit τ.
    pub final_drift: f64,
    pub expectation_track: Vec<TrackPoint>,
    pub drift_history: Vec<(f64, f64)>,
}

/// Reusable Strang stepper. Holds the FFT plan, the precomputed phase
/// factors and scratch buffers.
#[derive(Debug, Clone)]
pub struct NonlinearStepper<'k> {
    kernel: &'k MomentumKernel,
    spectral: Spectral,
    half_kinetic: Vec<Complex64>,
    potential_phase: Option<Vec<Complex64>>,
    dt: f64,
    density: Vec<f64>,
    lambda: Vec<f64>,
    buf: Vec<Complex64>,
}

impl<'k> NonlinearStepper<'k> {
    pub fn new(kernel: &'k MomentumKernel, kappa: f64, dt: f64, potential: Potential) -> Self {
        let grid = *kernel.grid();
        let spectral = Spectral::new(&grid);
        let half_kinetic = spectral.kinetic_phases(0.5 * dt, kappa);
        let potential_phase = (!potential.is_free()).then(|| {
            grid.positions()
                .iter()
                .map(|&y| Complex64::from_polar(1.0, -potential.value(y) * dt))
                .collect()
        });
        let n = grid.n_points();
        Self {
            kernel,
            spectral,
            half_kinetic,
            potential_phase,
            dt,
            density: vec![0.0; n],
            lambda: vec![0.0; n],
            buf: Vec::with_capacity(n),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self) -> &MomentumKernel {
        self.kernel
    }

    /// One composite step. Returns `a_ψ` evaluated at the mid-step state,
    /// so `γ(1 - a_ψ)` is the midpoint total jump rate of the step.
    pub fn step(&mut self, psi: &mut [Complex64]) -> f64 {
        self.spectral.apply_momentum_diagonal(psi, &self.half_kinetic);
        let a_psi = self.local_step(psi);
        self.spectral.apply_momentum_diagonal(psi, &self.half_kinetic);
        a_psi
    }

    /// Position-diagonal part: gain/loss with renormalization, then the
    /// potential phase. Both commute, the gain only depends on `|ψ|²`.
    fn local_step(&mut self, psi: &mut [Complex64]) -> f64 {
        let dx = self.kernel.grid().spacing();
        for (d, p) in self.density.iter_mut().zip(psi.iter()) {
            *d = p.norm_sqr();
        }
        let norm: f64 = dx * self.density.iter().sum::<f64>();
        let inv = 1.0 / norm;
        for d in &mut self.density {
            *d *= inv;
        }
        let a_psi = self
            .kernel
            .lambda_into(&self.density, &mut self.lambda, &mut self.buf);
        let gamma = self.kernel.gamma();
        if gamma > 0.0 {
            let mut n2 = 0.0;
            for ((p, l), d) in psi.iter_mut().zip(&self.lambda).zip(&self.density) {
                let g = (l * self.dt).exp();
                *p *= g;
                n2 += d * g * g;
            }
            let s = 1.0 / (n2 * dx * norm).sqrt() * norm.sqrt();
            for p in psi.iter_mut() {
                *p *= s;
            }
        }
        if let Some(phase) = &self.potential_phase {
            for (p, v) in psi.iter_mut().zip(phase) {
                *p *= v;
            }
        }
        a_psi
    }
}

/// `(⟨y⟩, ⟨p⟩)` for a normalized field.
///
/// The position is the density mean of displacements measured from the
/// density peak with the minimum-image convention, so a localized packet
/// straddling the periodic boundary is handled. The momentum uses the
/// spectral derivative.
pub fn expectation_values(field: &ComplexField) -> (f64, f64) {
    let grid = field.grid();
    let dx = grid.spacing();
    let rho: Vec<f64> = field.amplitudes().iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = rho.iter().sum::<f64>() * dx;
    let (jmax, _) = rho
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (j, &r)| if r > acc.1 { (j, r) } else { acc });
    let y0 = grid.position(jmax);
    let mean_offset: f64 = rho
        .iter()
        .enumerate()
        .map(|(j, r)| r * grid.wrap(grid.position(j) - y0))
        .sum::<f64>()
        * dx
        / total;
    let position = grid.wrap(y0 + mean_offset);

    let spectral = Spectral::new(grid);
    let mut buf = field.amplitudes().to_vec();
    spectral.forward(&mut buf);
    let (num, den) = buf
        .iter()
        .zip(spectral.wavenumbers())
        .fold((0.0, 0.0), |(n, d), (c, k)| (n + k * c.norm_sqr(), d + c.norm_sqr()));
    (position, num / den)
}

/// Imaginary residue of `⟨ψ|-i∂ψ⟩` computed in position space; used to
/// confirm the momentum expectation is real.
pub fn momentum_imaginary_residue(field: &ComplexField) -> f64 {
    let spectral = Spectral::new(field.grid());
    let mut d = field.amplitudes().to_vec();
    spectral.forward(&mut d);
    for (c, k) in d.iter_mut().zip(spectral.wavenumbers()) {
        *c *= Complex64::new(0.0, *k);
    }
    spectral.inverse(&mut d);
    let dx = field.grid().spacing();
    let v: Complex64 = field
        .amplitudes()
        .iter()
        .zip(&d)
        .map(|(p, dp)| p.conj() * dp * Complex64::new(0.0, -1.0))
        .sum::<Complex64>()
        * dx;
    v.im.abs()
}

/// Modulus `|ψ|` translated so that `⟨y⟩` sits at `y = 0`.
pub fn centered_modulus(field: &ComplexField) -> Vec<f64> {
    let (x, _) = expectation_values(field);
    let grid = field.grid();
    let spectral = Spectral::new(grid);
    let mut buf: Vec<Complex64> = field
        .amplitudes()
        .iter()
        .map(|c| Complex64::new(c.norm(), 0.0))
        .collect();
    spectral.forward(&mut buf);
    for (b, k) in buf.iter_mut().zip(spectral.wavenumbers()) {
        *b *= Complex64::from_polar(1.0, k * x);
    }
    spectral.inverse(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// L² distance between two sampled moduli.
pub fn modulus_distance(a: &[f64], b: &[f64], dx: f64) -> f64 {
    (dx * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
}

/// Co-moving L² distance between the moduli of two fields.
pub fn comoving_distance(a: &ComplexField, b: &ComplexField) -> Result<f64> {
    a.grid().check_same(b.grid())?;
    Ok(modulus_distance(
        &centered_modulus(a),
        &centered_modulus(b),
        a.grid().spacing(),
    ))
}

/// Integrates the nonlinear equation from `initial` (which must be
/// normalized) until `t_max`, or until convergence when
/// `stop_on_convergence` is set.
pub fn evolve_nonlinear(
    initial: &ComplexField,
    kernel: &MomentumKernel,
    config: &EvolutionConfig,
) -> Result<EvolutionResult> {
    let grid = *initial.grid();
    grid.check_same(kernel.grid())?;
    config.validate(&grid)?;
    let n0 = initial.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Norm(format!("initial field has norm² = {n0}")));
    }

    let mut stepper = NonlinearStepper::new(kernel, config.kappa, config.dt, config.potential);
    let mut psi = initial.clone();
    let steps_total = (config.t_max / config.dt).round() as usize;
    let check_every = ((config.check_interval / config.dt).round() as usize).max(1);
    let track_every = ((config.track_interval / config.dt).round() as usize).max(1);
    let dx = grid.spacing();

    let mut track = Vec::new();
    let (x0, p0) = expectation_values(&psi);
    track.push(TrackPoint {
        t: 0.0,
        position: x0,
        momentum: p0,
    });
    let mut last_x = x0;
    let mut reference = centered_modulus(&psi);
    let mut drift_history = Vec::new();
    let mut converged = false;
    let mut convergence_time = None;
    let mut final_drift = f64::INFINITY;
    let mut t = 0.0;

    for step in 1..=steps_total {
        stepper.step(psi.amplitudes_mut());
        t = step as f64 * config.dt;
        if psi.amplitudes().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Divergence { step });
        }
        let n2 = psi.norm_sqr();
        if (n2 - 1.0).abs() > 1e-12 {
            psi.renormalize();
        }
        if step % track_every == 0 {
            let (x, p) = expectation_values(&psi);
            let x = last_x + grid.wrap(x - last_x);
            last_x = x;
            track.push(TrackPoint {
                t,
                position: x,
                momentum: p,
            });
        }
        if step % check_every == 0 {
            let current = centered_modulus(&psi);
            let drift = modulus_distance(&current, &reference, dx) / (check_every as f64 * config.dt);
            drift_history.push((t, drift));
            final_drift = drift;
            reference = current;
            if drift < config.convergence_tol {
                if !converged {
                    convergence_time = Some(t);
                }
                converged = true;
                if config.stop_on_convergence {
                    break;
                }
            } else {
                converged = false;
                convergence_time = None;
            }
        }
    }

    Ok(EvolutionResult {
        final_field: psi,
        converged,
        convergence_time,
        final_time: t,
        final_drift,
        expectation_track: track,
        drift_history,
    })
}

/// Width and chirp of the Gaussian that is stationary under the flow when
/// `Λ` is expanded to second order about the packet centre. Returns
/// `(σ, chirp)` for [`ComplexField::chirped_gaussian`].
pub fn gaussian_soliton_guess(kappa: f64) -> (f64, f64) {
    let s = (2.0 * kappa).sqrt();
    ((0.5 * s).sqrt(), -1.0 / s)
}

/// Phase-space point of a classical trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub t: f64,
    pub x: f64,
    pub p: f64,
}

/// Energy `κ p²/2 + V(x)` in the dimensionless units.
pub fn classical_energy(potential: &Potential, kappa: f64, x: f64, p: f64) -> f64 {
    0.5 * kappa * p * p + potential.value(x)
}

/// Kick-drift-kick leapfrog for `H = κ p²/2 + V(y)`, i.e. mass `1/κ`.
/// Fails with [`Error::Domain`] once `|x|` leaves `domain_half_width`.
pub fn classical_trajectory(
    x0: f64,
    p0: f64,
    potential: &Potential,
    kappa: f64,
    t_max: f64,
    dt: f64,
    domain_half_width: f64,
) -> Result<Vec<PhasePoint>> {
    if !(dt > 0.0) {
        return Err(Error::config("dt", "must be positive"));
    }
    let steps = (t_max / dt).round() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut x, mut p) = (x0, p0);
    out.push(PhasePoint { t: 0.0, x, p });
    for i in 1..=steps {
        p += 0.5 * dt * potential.force(x);
        x += dt * kappa * p;
        p += 0.5 * dt * potential.force(x);
        let t = i as f64 * dt;
        if x.abs() > domain_half_width || !x.is_finite() {
            return Err(Error::Domain { t });
        }
        out.push(PhasePoint { t, x, p });
    }
    Ok(out)
}
