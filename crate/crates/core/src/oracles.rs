//! Independent reference models: the analytic two-level dephasing model,
//! direct grid integration of the collisional-decoherence master equation
//!
//! ```text
//! ∂t ρ(y, y') = -i[H, ρ](y, y') - F(y - y') ρ(y, y')
//! ```
//!
//! and the standard quantum-jump unraveling with kicks `e^{iqy}` at the
//! state-independent rate `γ`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientConfig, CoefficientState, sample_outcomes};
use crate::dynamics::Potential;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Spectral, SpatialGrid};
use crate::kernel::MomentumKernel;
use crate::rng::RngStream;
use crate::unraveling::{JumpEvent, Snapshot, UnravelingConfig, UnravelingTrajectory};

/// Largest grid accepted by the density-matrix oracle.
pub const MAX_ORACLE_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub a: [f64; 3],
}

impl BlochState {
    pub fn new(a: [f64; 3]) -> Result<Self> {
        let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if r > 1.0 + 1e-12 {
            return Err(Error::config("a", format!("Bloch vector length {r} exceeds 1")));
        }
        Ok(Self { a })
    }

    /// Pure state at polar angle `θ` and azimuth `φ`.
    pub fn pure(theta: f64, phi: f64) -> Self {
        Self {
            a: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    /// `Tr[P↑ ρ] = (1 + a_z)/2`.
    pub fn p_up(&self) -> f64 {
        0.5 * (1.0 + self.a[2])
    }

    pub fn is_pure(&self) -> bool {
        let r2: f64 = self.a.iter().map(|v| v * v).sum();
        (r2 - 1.0).abs() < 1e-12
    }
}

/// `(e^{-2γt} a_x, e^{-2γt} a_y, a_z)`.
pub fn dephasing_solution(a0: BlochState, gamma: f64, t: f64) -> BlochState {
    let d = (-2.0 * gamma * t).exp();
    BlochState {
        a: [d * a0.a[0], d * a0.a[1], a0.a[2]],
    }
}

/// Polar angle under `θ̇ = -γ sin 2θ`, i.e. `tan θ = tan θ₀ e^{-2γt}`.
pub fn dephasing_pointer_flow(theta0: f64, gamma: f64, t: f64) -> f64 {
    let (s, c) = theta0.sin_cos();
    (s * (-2.0 * gamma * t).exp()).atan2(c)
}

/// Pure two-level state as a saturated two-packet coefficient state whose
/// collision rate `2γ` reproduces dephasing at rate `γ`: index 0 is `|↑⟩`.
pub fn dephasing_as_coefficients(theta0: f64, phi0: f64, gamma: f64) -> Result<CoefficientState> {
    let c = vec![
        Complex64::new((0.5 * theta0).cos(), 0.0),
        Complex64::from_polar((0.5 * theta0).sin(), phi0),
    ];
    CoefficientState::saturated(c, 2.0 * gamma)
}

/// Number of `|↑⟩` outcomes among `n` stochastic two-level trajectories.
pub fn dephasing_outcomes(theta0: f64, phi0: f64, gamma: f64, n: usize, base: RngStream) -> Result<u64> {
    let state = dephasing_as_coefficients(theta0, phi0, gamma)?;
    let out = sample_outcomes(&state, &CoefficientConfig::default(), base, n)?;
    Ok(out.iter().filter(|o| o.index == 0).count() as u64)
}

/// Density matrix sampled on a grid with `Σ_j ρ_jj = 1`
/// (`ρ_jk = Δy ψ_j ψ_k*` for a pure state).
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensityMatrix {
    pub grid: SpatialGrid,
    pub matrix: DMatrix<Complex64>,
}

impl GridDensityMatrix {
    pub fn from_pure(field: &ComplexField) -> Result<Self> {
        Self::from_ensemble(&[field])
    }

    pub fn from_ensemble(fields: &[&ComplexField]) -> Result<Self> {
        let first = fields
            .first()
            .ok_or_else(|| Error::config("trajectories", "need at least one state"))?;
        let grid = *first.grid();
        let n = grid.n_points();
        let mut psi = DMatrix::<Complex64>::zeros(n, fields.len());
        let scale = (grid.spacing() / fields.len() as f64).sqrt();
        for (i, f) in fields.iter().enumerate() {
            grid.check_same(f.grid())?;
            for (j, a) in f.amplitudes().iter().enumerate() {
                psi[(j, i)] = a * scale;
            }
        }
        Ok(Self {
            grid,
            matrix: &psi * psi.adjoint(),
        })
    }

    /// Weighted ensemble `Σ_i w_i |ψ_i⟩⟨ψ_i| / Σ w` from the column matrix of
    /// pre-scaled states.
    fn weighted(grid: SpatialGrid, columns: &DMatrix<Complex64>, weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut scaled = columns.clone();
        for (i, w) in weights.iter().enumerate() {
            let s = Complex64::new((w / total).sqrt(), 0.0);
            scaled.column_mut(i).scale_mut(s.re);
        }
        Self {
            grid,
            matrix: &scaled * scaled.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().collect()
    }

    /// Checks Hermiticity (1e-12), unit trace (1e-10) and positivity
    /// (eigenvalues ≥ -1e-10).
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > 1e-12 {
            return Err(Error::Oracle(format!("Hermiticity violated by {h:e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > 1e-10 {
            return Err(Error::Oracle(format!("trace = {tr}")));
        }
        let min = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Oracle(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// `½ Σ |λ_i(ρ - σ)|`.
    pub fn trace_distance(&self, other: &GridDensityMatrix) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let d = &self.matrix - &other.matrix;
        let h = (&d + d.adjoint()) * Complex64::new(0.5, 0.0);
        Ok(0.5 * h.symmetric_eigenvalues().iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Probability on the grid points with `lo ≤ y < hi`.
    pub fn weight_in(&self, lo: f64, hi: f64) -> f64 {
        (0..self.grid.n_points())
            .filter(|&j| {
                let y = self.grid.position(j);
                y >= lo && y < hi
            })
            .map(|j| self.matrix[(j, j)].re)
            .sum()
    }

    /// Largest `|ρ_jk|` with `y_j` in `a` and `y_k` in `b`.
    pub fn max_coherence(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let ys = self.grid.positions();
        let mut m: f64 = 0.0;
        for (j, yj) in ys.iter().enumerate() {
            if !(*yj >= a.0 && *yj < a.1) {
                continue;
            }
            for (k, yk) in ys.iter().enumerate() {
                if *yk >= b.0 && *yk < b.1 {
                    m = m.max(self.matrix[(j, k)].norm());
                }
            }
        }
        m
    }
}

/// Strang-split master-equation integrator: free propagation on both
/// indices for half a step, the exact incoherent factor
/// `e^{-F(y_j - y_k) dt}` together with the potential phase, and another
/// free half step.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    grid: SpatialGrid,
    spectral: Spectral,
    half_kinetic: Vec<Complex64>,
    local: DMatrix<Complex64>,
    dt: f64,
}

impl MasterEquation {
    pub fn new(kernel: &MomentumKernel, kappa: f64, dt: f64, potential: Potential) -> Result<Self> {
        let grid = *kernel.grid();
        if grid.n_points() > MAX_ORACLE_POINTS {
            return Err(Error::Grid(format!(
                "density-matrix oracle is limited to {MAX_ORACLE_POINTS} points"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        let qmax = grid.max_wavenumber();
        if dt * kappa * qmax * qmax >= crate::dynamics::KINETIC_STABILITY_LIMIT {
            return Err(Error::config("dt", "violates the kinetic stability bound"));
        }
        let spectral = Spectral::new(&grid);
        let half_kinetic = spectral.kinetic_phases(0.5 * dt, kappa);
        let ys = grid.positions();
        let n = grid.n_points();
        let local = DMatrix::from_fn(n, n, |j, k| {
            let decay = (-kernel.localization_rate(ys[j] - ys[k]) * dt).exp();
            let phase = -(potential.value(ys[j]) - potential.value(ys[k])) * dt;
            Complex64::from_polar(decay, phase)
        });
        Ok(Self {
            grid,
            spectral,
            half_kinetic,
            local,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `ρ ← K ρ K†` for the half-step kinetic propagator `K`.
    fn kinetic_both(&self, m: &mut DMatrix<Complex64>) {
        let n = self.grid.n_points();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            for j in 0..n {
                buf[j] = m[(j, k)];
            }
            self.spectral.apply_momentum_diagonal(&mut buf, &self.half_kinetic);
            for j in 0..n {
                m[(j, k)] = buf[j];
            }
        }
        for j in 0..n {
            for k in 0..n {
                buf[k] = m[(j, k)].conj();
            }
            self.spectral.apply_momentum_diagonal(&mut buf, &self.half_kinetic);
            for k in 0..n {
                m[(j, k)] = buf[k].conj();
            }
        }
    }

    pub fn step(&self, rho: &mut GridDensityMatrix) -> Result<()> {
        self.grid.check_same(&rho.grid)?;
        self.kinetic_both(&mut rho.matrix);
        rho.matrix.component_mul_assign(&self.local);
        self.kinetic_both(&mut rho.matrix);
        let tr = rho.trace();
        if (tr - 1.0).norm() > 1e-10 {
            return Err(Error::Oracle(format!("trace drifted to {tr}")));
        }
        if rho.hermiticity_error() > 1e-10 {
            return Err(Error::Oracle("Hermiticity lost".into()));
        }
        Ok(())
    }
}

/// One split step of the master equation.
pub fn master_equation_step(
    rho: &GridDensityMatrix,
    kernel: &MomentumKernel,
    dt: f64,
    kappa: f64,
    potential: Potential,
) -> Result<GridDensityMatrix> {
    let me = MasterEquation::new(kernel, kappa, dt, potential)?;
    let mut out = rho.clone();
    me.step(&mut out)?;
    Ok(out)
}

/// Integrates from `rho0` and returns the (validated) states at `times`.
pub fn evolve_master_equation(
    rho0: &GridDensityMatrix,
    kernel: &MomentumKernel,
    kappa: f64,
    dt: f64,
    potential: Potential,
    times: &[f64],
) -> Result<Vec<(f64, GridDensityMatrix)>> {
    let me = MasterEquation::new(kernel, kappa, dt, potential)?;
    let mut rho = rho0.clone();
    let mut done = 0usize;
    let mut out = Vec::with_capacity(times.len());
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        let target = (t / dt).round() as usize;
        while done < target {
            me.step(&mut rho)?;
            done += 1;
        }
        rho.validate()?;
        out.push((t, rho.clone()));
    }
    Ok(out)
}

/// Linear Schrödinger propagation over an arbitrary duration in Strang
/// steps no longer than `dt`.
fn propagate_linear(psi: &mut ComplexField, duration: f64, kappa: f64, dt: f64, potential: Potential, spectral: &Spectral) {
    if duration <= 0.0 {
        return;
    }
    let n = (duration / dt).ceil().max(1.0) as usize;
    let h = duration / n as f64;
    let half = spectral.kinetic_phases(0.5 * h, kappa);
    let grid = *psi.grid();
    let vphase: Option<Vec<Complex64>> = (!potential.is_free()).then(|| {
        grid.positions()
            .iter()
            .map(|&y| Complex64::from_polar(1.0, -potential.value(y) * h))
            .collect()
    });
    for _ in 0..n {
        spectral.apply_momentum_diagonal(psi.amplitudes_mut(), &half);
        if let Some(v) = &vphase {
            for (a, p) in psi.amplitudes_mut().iter_mut().zip(v) {
                *a *= p;
            }
        }
        spectral.apply_momentum_diagonal(psi.amplitudes_mut(), &half);
    }
}

/// Quantum-jump trajectory: linear evolution interrupted at rate `γ` by
/// kicks `ψ ← e^{iqy} ψ` with `q ~ G`.
pub fn qmc_trajectory(
    initial: &ComplexField,
    kernel: &MomentumKernel,
    t_max: f64,
    config: &UnravelingConfig,
    stream: RngStream,
) -> Result<UnravelingTrajectory> {
    let grid = *initial.grid();
    grid.check_same(kernel.grid())?;
    let n0 = initial.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Norm(format!("initial field has norm² = {n0}")));
    }
    let mut rng = stream.rng();
    let spectral = Spectral::new(&grid);
    let gamma = kernel.gamma();
    let ys = grid.positions();
    let mut snaps: Vec<f64> = config.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut snap_iter = snaps.into_iter().peekable();
    let mut snapshots = Vec::new();
    let mut events = Vec::new();
    let mut psi = initial.clone();
    let mut t = 0.0;
    loop {
        let next_jump = if gamma > 0.0 {
            let e: f64 = Exp1.sample(&mut rng);
            t + e / gamma
        } else {
            f64::INFINITY
        };
        while let Some(&ts) = snap_iter.peek() {
            if ts > next_jump.min(t_max) {
                break;
            }
            propagate_linear(&mut psi, ts - t, config.kappa, config.dt, config.potential, &spectral);
            t = ts;
            snapshots.push(Snapshot { t: ts, field: psi.clone() });
            snap_iter.next();
        }
        if next_jump > t_max {
            propagate_linear(&mut psi, t_max - t, config.kappa, config.dt, config.potential, &spectral);
            break;
        }
        propagate_linear(&mut psi, next_jump - t, config.kappa, config.dt, config.potential, &spectral);
        t = next_jump;
        let q = kernel.sample_momentum(&mut rng);
        for (a, y) in psi.amplitudes_mut().iter_mut().zip(&ys) {
            *a *= Complex64::from_polar(1.0, q * y);
        }
        if psi.amplitudes().iter().any(|c| !c.re.is_finite()) {
            return Err(Error::Divergence { step: events.len() });
        }
        events.push(JumpEvent {
            time: t,
            q,
            total_rate_at_jump: gamma,
            norm: psi.norm_sqr(),
        });
    }
    Ok(UnravelingTrajectory {
        initial: initial.clone(),
        events,
        final_field: psi,
        stream,
        snapshots,
    })
}

pub fn qmc_ensemble(
    initial: &ComplexField,
    kernel: &MomentumKernel,
    t_max: f64,
    config: &UnravelingConfig,
    base: RngStream,
    n: usize,
) -> Result<Vec<UnravelingTrajectory>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| qmc_trajectory(initial, kernel, t_max, config, base.child(i)))
        .collect()
}

/// Monte Carlo error of an ensemble estimate: the mean trace distance
/// between bootstrap resamples and the full-ensemble density matrix.
pub fn bootstrap_trace_distance_error(fields: &[&ComplexField], n_boot: usize, stream: RngStream) -> Result<f64> {
    let full = GridDensityMatrix::from_ensemble(fields)?;
    let grid = full.grid;
    let n = grid.n_points();
    let m = fields.len();
    let sdx = grid.spacing().sqrt();
    let mut cols = DMatrix::<Complex64>::zeros(n, m);
    for (i, f) in fields.iter().enumerate() {
        for (j, a) in f.amplitudes().iter().enumerate() {
            cols[(j, i)] = a * sdx;
        }
    }
    let mut rng = stream.rng();
    let idx: Vec<usize> = (0..m).collect();
    let mut total = 0.0;
    for _ in 0..n_boot.max(1) {
        let mut w = vec![0.0; m];
        for _ in 0..m {
            w[*idx.choose(&mut rng).unwrap_or(&0)] += 1.0;
        }
        let b = GridDensityMatrix::weighted(grid, &cols, &w);
        total += b.trace_distance(&full)?;
    }
    Ok(total / n_boot.max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceDistanceRecord {
    pub t: f64,
    pub trace_distance: f64,
    pub mc_error: f64,
    pub n_traj: usize,
}
