//! Orthogonal unraveling in the full grid Hilbert space: the nonlinear
//! deterministic flow interrupted by jumps
//! `ψ ← N_q (e^{iqy} - ⟨e^{iqy}⟩) ψ` at rate density
//! `r_q = γ G(q) (1 - |⟨e^{iqy}⟩|²)`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{NonlinearStepper, Potential};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid};
use crate::kernel::{MomentumKernel, simpson_weights};
use crate::oracles::GridDensityMatrix;
use crate::rng::RngStream;

/// Quadrature nodes for `q` integrals.
pub const Q_NODES: usize = 513;
/// Half-width of the `q` quadrature range in units of the transfer spread.
pub const Q_SPAN: f64 = 6.0;
/// Smallest `1 - |χ(q)|²` for which a jump is defined.
pub const JUMP_THRESHOLD: f64 = 1e-12;

/// `χ(q) = ∫ |ψ|² e^{iqy} dy`.
pub fn characteristic(field: &ComplexField, q: f64) -> Complex64 {
    let grid = field.grid();
    let dx = grid.spacing();
    field
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| Complex64::from_polar(a.norm_sqr(), q * grid.position(j)))
        .sum::<Complex64>()
        * dx
}

/// `q` nodes and weights `w_i ∝ G(q_i)` of the rate quadrature, scaled so
/// that the weights integrate `G` to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct QQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QQuadrature {
    pub fn new(kernel: &MomentumKernel) -> Self {
        let dist = kernel.distribution();
        let span = Q_SPAN * dist.std_dev();
        let (nodes, base) = simpson_weights(-span, span, Q_NODES - 1);
        let mut weights: Vec<f64> = nodes.iter().zip(&base).map(|(q, w)| w * dist.pdf(*q)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self { nodes, weights }
    }
}

/// `r_tot = γ (1 - ∫ G(q) |χ(q)|² dq)` by quadrature over `±6σ_G`.
pub fn total_jump_rate(field: &ComplexField, kernel: &MomentumKernel) -> f64 {
    let quad = QQuadrature::new(kernel);
    let mean: f64 = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(q, w)| w * characteristic(field, *q).norm_sqr())
        .sum();
    (kernel.gamma() * (1.0 - mean)).max(0.0)
}

/// The same total rate through `∫ G |χ|² dq = a_ψ`, i.e. `γ (1 - a_ψ)`.
pub fn total_jump_rate_direct(field: &ComplexField, kernel: &MomentumKernel) -> Result<f64> {
    let a = kernel.evaluate_lambda(&field.density())?.a_psi;
    Ok((kernel.gamma() * (1.0 - a)).max(0.0))
}

/// Rate density `r_q`.
pub fn jump_rate_density(field: &ComplexField, kernel: &MomentumKernel, q: f64) -> f64 {
    kernel.gamma() * kernel.distribution().pdf(q) * (1.0 - characteristic(field, q).norm_sqr()).max(0.0)
}

/// Orthogonal jump with momentum transfer `q`.
pub fn apply_jump(field: &ComplexField, q: f64) -> Result<ComplexField> {
    let chi = characteristic(field, q);
    let gap = 1.0 - chi.norm_sqr();
    if gap <= JUMP_THRESHOLD {
        return Err(Error::JumpUndefined(gap));
    }
    let grid = *field.grid();
    let amps = field
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| (Complex64::from_polar(1.0, q * grid.position(j)) - chi) * a)
        .collect();
    let mut out = ComplexField::new(grid, amps)?;
    out.renormalize();
    Ok(out)
}

/// How the jump momentum is drawn from `r_q / r_tot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QSampler {
    /// Propose `q ~ G`, accept with probability `1 - |χ(q)|²`.
    Thinning,
    /// Independence Metropolis-Hastings chain with proposal `G`.
    MetropolisHastings { steps: usize },
}

impl Default for QSampler {
    fn default() -> Self {
        QSampler::Thinning
    }
}

const MAX_PROPOSALS: usize = 10_000_000;

impl QSampler {
    pub fn draw(
        &self,
        field: &ComplexField,
        kernel: &MomentumKernel,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64> {
        let accept = |q: f64| (1.0 - characteristic(field, q).norm_sqr()).max(0.0);
        match *self {
            QSampler::Thinning => {
                for _ in 0..MAX_PROPOSALS {
                    let q = kernel.sample_momentum(rng);
                    if rng.random::<f64>() < accept(q) {
                        return Ok(q);
                    }
                }
                Err(Error::JumpUndefined(0.0))
            }
            QSampler::MetropolisHastings { steps } => {
                let mut q = kernel.sample_momentum(rng);
                let mut w = accept(q);
                for _ in 0..steps.max(1) {
                    let cand = kernel.sample_momentum(rng);
                    let wc = accept(cand);
                    if w <= 0.0 || rng.random::<f64>() * w < wc {
                        q = cand;
                        w = wc;
                    }
                }
                if w <= JUMP_THRESHOLD {
                    return Err(Error::JumpUndefined(w));
                }
                Ok(q)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub q: f64,
    pub total_rate_at_jump: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: ComplexField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnravelingTrajectory {
    pub initial: ComplexField,
    pub events: Vec<JumpEvent>,
    pub final_field: ComplexField,
    pub stream: RngStream,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnravelingConfig {
    pub kappa: f64,
    pub dt: f64,
    pub potential: Potential,
    pub sampler: QSampler,
    /// Times at which the state is recorded (rounded to the step grid).
    pub snapshot_times: Vec<f64>,
}

impl UnravelingConfig {
    pub fn new(kappa: f64, dt: f64) -> Self {
        Self {
            kappa,
            dt,
            potential: Potential::Free,
            sampler: QSampler::Thinning,
            snapshot_times: Vec::new(),
        }
    }

    fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        let qmax = grid.max_wavenumber();
        if self.dt * self.kappa * qmax * qmax >= crate::dynamics::KINETIC_STABILITY_LIMIT {
            return Err(Error::config("dt", "violates the kinetic stability bound"));
        }
        Ok(())
    }
}

fn step_index(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Samples one path on `[0, t_max]`. The waiting time is the first step at
/// which the accumulated rate (midpoint rule along the stepper) exceeds
/// `-ln u`; jumps are applied at step boundaries.
pub fn sample_trajectory(
    initial: &ComplexField,
    kernel: &MomentumKernel,
    t_max: f64,
    config: &UnravelingConfig,
    stream: RngStream,
) -> Result<UnravelingTrajectory> {
    let grid = *initial.grid();
    grid.check_same(kernel.grid())?;
    config.validate(&grid)?;
    let n0 = initial.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Norm(format!("initial field has norm² = {n0}")));
    }
    let mut rng = stream.rng();
    let mut stepper = NonlinearStepper::new(kernel, config.kappa, config.dt, config.potential);
    let gamma = kernel.gamma();
    let mut psi = initial.clone();
    let steps = step_index(t_max, config.dt);
    let mut snap_steps: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| (step_index(t, config.dt), t))
        .collect();
    snap_steps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut snap_iter = snap_steps.into_iter().peekable();
    let mut snapshots = Vec::new();
    while let Some(&(s, t)) = snap_iter.peek() {
        if s != 0 {
            break;
        }
        snapshots.push(Snapshot { t, field: psi.clone() });
        snap_iter.next();
    }

    let mut events = Vec::new();
    let mut target = -(1.0 - rng.random::<f64>()).ln();
    let mut accumulated = 0.0;
    for step in 1..=steps {
        let a_psi = stepper.step(psi.amplitudes_mut());
        if psi.amplitudes().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if gamma > 0.0 {
            accumulated += gamma * (1.0 - a_psi).max(0.0) * config.dt;
        }
        let t = step as f64 * config.dt;
        if gamma > 0.0 && accumulated >= target {
            let rate = total_jump_rate_direct(&psi, kernel)?;
            let q = config.sampler.draw(&psi, kernel, &mut rng)?;
            psi = apply_jump(&psi, q)?;
            events.push(JumpEvent {
                time: t,
                q,
                total_rate_at_jump: rate,
                norm: psi.norm_sqr(),
            });
            accumulated = 0.0;
            target = -(1.0 - rng.random::<f64>()).ln();
        }
        while let Some(&(s, ts)) = snap_iter.peek() {
            if s != step {
                break;
            }
            snapshots.push(Snapshot {
                t: ts,
                field: psi.clone(),
            });
            snap_iter.next();
        }
    }
    Ok(UnravelingTrajectory {
        initial: initial.clone(),
        events,
        final_field: psi,
        stream,
        snapshots,
    })
}

/// `n` trajectories with streams `base.child(i)`; the result does not depend
/// on the number of worker threads.
pub fn sample_ensemble(
    initial: &ComplexField,
    kernel: &MomentumKernel,
    t_max: f64,
    config: &UnravelingConfig,
    base: RngStream,
    n: usize,
) -> Result<Vec<UnravelingTrajectory>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_trajectory(initial, kernel, t_max, config, base.child(i)))
        .collect()
}

/// Average of the projectors `|ψ_i⟩⟨ψ_i|`.
pub fn ensemble_density(fields: &[&ComplexField]) -> Result<GridDensityMatrix> {
    GridDensityMatrix::from_ensemble(fields)
}

/// Fields recorded at snapshot time `t` across an ensemble.
pub fn snapshots_at(trajectories: &[UnravelingTrajectory], t: f64) -> Vec<&ComplexField> {
    trajectories
        .iter()
        .filter_map(|tr| {
            tr.snapshots
                .iter()
                .find(|s| (s.t - t).abs() < 1e-12)
                .map(|s| &s.field)
        })
        .collect()
}
