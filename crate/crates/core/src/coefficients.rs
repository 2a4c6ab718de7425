//! Reduced process for superpositions `Σ c_i π_i` of non-overlapping
//! pointer states at positions `x_i`: the deterministic coefficient flow
//!
//! ```text
//! dc_i/dt = -(Σ_j F_ij |c_j|² - Σ_jk F_jk |c_j|²|c_k|²) c_i
//! ```
//!
//! with `F_ij = F(x_i - x_j)`, interrupted by the orthogonal jumps
//! `c_k ← N (e^{iqx_k} - Σ_i |c_i|² e^{iqx_i}) c_k` at rate density
//! `r_q = γ G(q) (1 - |Σ_j |c_j|² e^{iqx_j}|²)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::RngCore;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GaussianTransfer, MomentumDistribution};
use crate::rng::RngStream;

/// Separation used for the saturated regime (`F_ij = γ` to machine precision).
pub const SATURATED_SPACING: f64 = 1.0e3;

/// `F(s) = γ (1 - Ĝ(s))` for a Gaussian transfer distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionModel {
    pub gamma: f64,
    pub sigma_g: f64,
}

impl CollisionModel {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, sigma_g: 1.0 }
    }

    fn transfer(&self) -> GaussianTransfer {
        GaussianTransfer { sigma: self.sigma_g }
    }

    pub fn rate(&self, s: f64) -> f64 {
        self.gamma * (1.0 - self.transfer().characteristic(s))
    }

    pub fn sample_q(&self, rng: &mut dyn RngCore) -> f64 {
        self.transfer().sample(rng)
    }

    pub fn pdf(&self, q: f64) -> f64 {
        self.transfer().pdf(q)
    }
}

/// Packet motion during the coefficient process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum PacketMotion {
    #[default]
    Fixed,
    /// `x_i(t) = x_i(0) + v_i t`.
    Ballistic { velocities: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientState {
    pub c: Vec<Complex64>,
    pub x: Vec<f64>,
    pub f: Vec<Vec<f64>>,
    pub model: CollisionModel,
}

fn rate_matrix(x: &[f64], model: &CollisionModel) -> Vec<Vec<f64>> {
    x.iter()
        .map(|a| x.iter().map(|b| if a == b { 0.0 } else { model.rate(a - b) }).collect())
        .collect()
}

impl CoefficientState {
    pub fn new(c: Vec<Complex64>, x: Vec<f64>, model: CollisionModel) -> Result<Self> {
        if c.len() != x.len() || c.is_empty() {
            return Err(Error::config("c", "needs one position per coefficient"));
        }
        let n2: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::Norm(format!("Σ|c_i|² = {n2}")));
        }
        let f = rate_matrix(&x, &model);
        Ok(Self { c, x, f, model })
    }

    /// Normalizes `c` before construction.
    pub fn normalized(c: Vec<Complex64>, x: Vec<f64>, model: CollisionModel) -> Result<Self> {
        let n = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::Norm("zero coefficient vector".into()));
        }
        Self::new(c.into_iter().map(|v| v / n).collect(), x, model)
    }

    /// Packets far enough apart that every `F_ij` equals `γ`.
    pub fn saturated(c: Vec<Complex64>, gamma: f64) -> Result<Self> {
        let x = (0..c.len()).map(|i| SATURATED_SPACING * i as f64).collect();
        Self::normalized(c, x, CollisionModel::new(gamma))
    }

    /// Real amplitudes `√w_i` for the given weights.
    pub fn from_weights(weights: &[f64], x: Vec<f64>, model: CollisionModel) -> Result<Self> {
        let c = weights.iter().map(|w| Complex64::new(w.max(0.0).sqrt(), 0.0)).collect();
        Self::normalized(c, x, model)
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.c.iter().map(|v| v.norm_sqr()).collect()
    }

    fn set_positions(&mut self, x: Vec<f64>) {
        self.f = rate_matrix(&x, &self.model);
        self.x = x;
    }
}

/// `(F p)_i` and `S = pᵀ F p`.
fn rate_terms(f: &[Vec<f64>], p: &[f64]) -> (Vec<f64>, f64) {
    let fp: Vec<f64> = f
        .iter()
        .map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum())
        .collect();
    let s = fp.iter().zip(p).map(|(a, b)| a * b).sum();
    (fp, s)
}

pub fn coefficient_derivative(state: &CoefficientState) -> Vec<Complex64> {
    let p = state.weights();
    let (fp, s) = rate_terms(&state.f, &p);
    state
        .c
        .iter()
        .zip(&fp)
        .map(|(c, fpi)| -(fpi - s) * c)
        .collect()
}

/// `χ(q) = Σ_j |c_j|² e^{iqx_j}`.
fn packet_characteristic(state: &CoefficientState, q: f64) -> Complex64 {
    state
        .c
        .iter()
        .zip(&state.x)
        .map(|(c, x)| Complex64::from_polar(c.norm_sqr(), q * x))
        .sum()
}

/// Rate density `r_q`.
pub fn jump_rate(state: &CoefficientState, q: f64) -> f64 {
    let chi = packet_characteristic(state, q);
    state.model.gamma * state.model.pdf(q) * (1.0 - chi.norm_sqr()).max(0.0)
}

/// `∫ r_q dq = Σ_jk F_jk |c_j|²|c_k|²`.
pub fn total_rate(state: &CoefficientState) -> f64 {
    rate_terms(&state.f, &state.weights()).1
}

/// Jump with momentum transfer `q`.
pub fn jump_redistribute(state: &CoefficientState, q: f64) -> Result<CoefficientState> {
    let chi = packet_characteristic(state, q);
    let gap = 1.0 - chi.norm_sqr();
    if gap <= 1e-12 {
        return Err(Error::JumpUndefined(gap));
    }
    let c: Vec<Complex64> = state
        .c
        .iter()
        .zip(&state.x)
        .map(|(c, x)| (Complex64::from_polar(1.0, q * x) - chi) * c)
        .collect();
    let n = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    Ok(CoefficientState {
        c: c.into_iter().map(|v| v / n).collect(),
        x: state.x.clone(),
        f: state.f.clone(),
        model: state.model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    pub jumps: bool,
    /// Terminate once `max |c_i|² > 1 - threshold`.
    pub threshold: f64,
    /// Time limit in units of `1/γ`.
    pub t_max_gamma: f64,
    pub rtol: f64,
    pub motion: PacketMotion,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            jumps: true,
            threshold: 1e-6,
            t_max_gamma: 200.0,
            rtol: 1e-10,
            motion: PacketMotion::Fixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    /// Zero-based index of the surviving packet.
    pub index: usize,
    pub jump_count: usize,
    pub jump_times: Vec<f64>,
    /// `∫ r_tot dt` along the path.
    pub integrated_rate: f64,
    pub final_time: f64,
    pub final_state: CoefficientState,
}

/// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Moduli flow `dp_i/dt = -2((Fp)_i - S) p_i` plus `dμ/dt = S`, with the
/// rate matrix evaluated at time `t`.
struct Flow<'a> {
    x0: &'a [f64],
    model: CollisionModel,
    motion: &'a PacketMotion,
    fixed: &'a [Vec<f64>],
}

impl Flow<'_> {
    fn positions(&self, t: f64) -> Option<Vec<f64>> {
        match self.motion {
            PacketMotion::Fixed => None,
            PacketMotion::Ballistic { velocities } => {
                Some(self.x0.iter().zip(velocities).map(|(x, v)| x + v * t).collect())
            }
        }
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let n = y.len() - 1;
        let p = &y[..n];
        let (fp, s) = match self.positions(t) {
            None => rate_terms(self.fixed, p),
            Some(x) => rate_terms(&rate_matrix(&x, &self.model), p),
        };
        for i in 0..n {
            out[i] = -2.0 * (fp[i] - s) * p[i];
        }
        out[n] = s;
    }
}

enum Stop {
    Reached,
    Converged,
}

/// Adaptive integration of `flow` from `t` to `t_end`, stopping early once
/// `max p > 1 - threshold`. Returns the reached time.
fn integrate(
    flow: &Flow,
    y: &mut Vec<f64>,
    t: f64,
    t_end: f64,
    h: &mut f64,
    rtol: f64,
    threshold: Option<f64>,
) -> (f64, Stop) {
    let n = y.len();
    let np = n - 1;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut t = t;
    let atol = rtol * 1e-2;
    let converged = |y: &[f64]| {
        threshold.is_some_and(|th| y[..np].iter().cloned().fold(0.0, f64::max) > 1.0 - th)
    };
    if converged(y) {
        return (t, Stop::Converged);
    }
    while t < t_end {
        let step = h.min(t_end - t);
        flow.rhs(t, y, &mut k[0]);
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + step * (0..s).map(|j| DP_A[s][j] * k[j][i]).sum::<f64>();
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            flow.rhs(t + DP_C[s] * step, &tmp, &mut tail[0]);
        }
        let mut err: f64 = 0.0;
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            y_new[i] = y[i] + step * (0..7).map(|j| DP_B[j] * k[j][i]).sum::<f64>();
            let e = step * (0..7).map(|j| DP_E[j] * k[j][i]).sum::<f64>();
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 || step < 1e-12 {
            t += step;
            let total: f64 = y_new[..np].iter().map(|v| v.max(0.0)).sum();
            for v in &mut y_new[..np] {
                *v = v.max(0.0) / total;
            }
            *y = y_new;
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            *h = step * grow;
            if converged(y) {
                return (t, Stop::Converged);
            }
        } else {
            *h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
        }
    }
    (t, Stop::Reached)
}

fn with_moduli(state: &CoefficientState, p: &[f64]) -> Vec<Complex64> {
    state
        .c
        .iter()
        .zip(p)
        .map(|(c, w)| {
            let r = c.norm();
            if r > 0.0 { c / r * w.sqrt() } else { Complex64::new(w.sqrt(), 0.0) }
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a })
        .0
}

/// Samples the reduced process until one weight exceeds `1 - threshold`.
/// Candidate jumps arrive at rate `γ` with `q ~ G` and are kept with
/// probability `1 - |χ(q)|²`.
pub fn sample_coefficient_trajectory(
    initial: &CoefficientState,
    config: &CoefficientConfig,
    rng: &mut dyn RngCore,
) -> Result<TrajectoryOutcome> {
    let gamma = initial.model.gamma;
    let t_max = if gamma > 0.0 { config.t_max_gamma / gamma } else { config.t_max_gamma };
    let mut state = initial.clone();
    let mut y: Vec<f64> = state.weights();
    y.push(0.0);
    let mut t = 0.0;
    let mut h = 0.01 / gamma.max(1e-300);
    let mut jump_times = Vec::new();
    loop {
        let next = if config.jumps && gamma > 0.0 {
            let e: f64 = Exp1.sample(rng);
            (t + e / gamma).min(t_max)
        } else {
            t_max
        };
        let flow = Flow {
            x0: &initial.x,
            model: initial.model,
            motion: &config.motion,
            fixed: &initial.f,
        };
        let (reached, stop) =
            integrate(&flow, &mut y, t, next, &mut h, config.rtol, Some(config.threshold));
        t = reached;
        let n = y.len() - 1;
        state.c = with_moduli(&state, &y[..n]);
        if let Some(x) = flow.positions(t) {
            state.set_positions(x);
        }
        if let Stop::Converged = stop {
            return Ok(TrajectoryOutcome {
                index: argmax(&y[..n]),
                jump_count: jump_times.len(),
                jump_times,
                integrated_rate: y[n],
                final_time: t,
                final_state: state,
            });
        }
        if t >= t_max {
            return Err(Error::Timeout { t });
        }
        let q = initial.model.sample_q(rng);
        let accept = 1.0 - packet_characteristic(&state, q).norm_sqr();
        if rng.random::<f64>() < accept {
            state = jump_redistribute(&state, q)?;
            for (yi, w) in y.iter_mut().zip(state.weights()) {
                *yi = w;
            }
            jump_times.push(t);
        }
    }
}

/// State after the jump-free flow has run for time `t` with fixed packets.
pub fn evolve_flow(state: &CoefficientState, t: f64) -> CoefficientState {
    let flow = Flow {
        x0: &state.x,
        model: state.model,
        motion: &PacketMotion::Fixed,
        fixed: &state.f,
    };
    let mut y = state.weights();
    y.push(0.0);
    let mut h = 0.01 / state.model.gamma.max(1e-300);
    integrate(&flow, &mut y, 0.0, t, &mut h, 1e-12, None);
    let n = y.len() - 1;
    let mut out = state.clone();
    out.c = with_moduli(state, &y[..n]);
    out
}

/// Outcomes of `n` trajectories with streams `base.child(i)`.
pub fn sample_outcomes(
    initial: &CoefficientState,
    config: &CoefficientConfig,
    base: RngStream,
    n: usize,
) -> Result<Vec<TrajectoryOutcome>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.child(i).rng();
            sample_coefficient_trajectory(initial, config, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct N2Analytics {
    /// Integrated jump rate `μ(∞)`.
    pub mu_infinity: f64,
    /// Probability of an odd number of jumps.
    pub prob_odd: f64,
}

/// Closed-form `μ(∞) = -ln(1 - 2w)/2` and `P(odd) = (1 - e^{-2μ})/2 = w`
/// for the smaller initial weight `w`.
pub fn n2_analytics(c1_sq_0: f64) -> Result<N2Analytics> {
    if !(c1_sq_0 > 0.0 && c1_sq_0 < 1.0) {
        return Err(Error::config("c1_sq_0", "must lie in (0, 1)"));
    }
    if (c1_sq_0 - 0.5).abs() < 1e-15 {
        return Err(Error::UnstableEquilibrium);
    }
    let w = c1_sq_0.min(1.0 - c1_sq_0);
    let mu = -(1.0 - 2.0 * w).ln() / 2.0;
    Ok(N2Analytics {
        mu_infinity: mu,
        prob_odd: (1.0 - (-2.0 * mu).exp()) / 2.0,
    })
}

/// Weights uniform on the simplex (normalized exponential draws) with
/// uniform phases.
pub fn simplex_sample(
    positions: &[f64],
    model: CollisionModel,
    rng: &mut dyn RngCore,
) -> Result<CoefficientState> {
    if positions.len() < 2 {
        return Err(Error::config("N", "needs at least two packets"));
    }
    let e: Vec<f64> = positions.iter().map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let c = e
        .iter()
        .map(|w| Complex64::from_polar((w / total).sqrt(), TAU * rng.random::<f64>()))
        .collect();
    CoefficientState::normalized(c, positions.to_vec(), model)
}

/// Endpoint of the jump-free flow: `Some(index)` of the attracting fixed
/// point or `None` when the flow stalls before `t_max`.
pub fn flow_endpoint(state: &CoefficientState, t_max: f64, threshold: f64) -> Option<usize> {
    let config = CoefficientConfig {
        jumps: false,
        threshold,
        t_max_gamma: t_max * state.model.gamma,
        ..CoefficientConfig::default()
    };
    let mut rng = RngStream::new(0, 0).rng();
    sample_coefficient_trajectory(state, &config, &mut rng)
        .ok()
        .map(|o| o.index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    pub weights: [f64; 3],
    pub attractor: Option<usize>,
    pub argmax: usize,
    /// Top two weights closer than one cell size.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinMap {
    pub resolution: usize,
    pub positions: [f64; 3],
    pub cells: Vec<BasinCell>,
}

impl BasinMap {
    /// Fraction of non-boundary, non-stalled cells whose attractor differs
    /// from the argmax of the initial weights.
    pub fn argmax_disagreement(&self) -> f64 {
        let (mut n, mut d) = (0usize, 0usize);
        for c in self.cells.iter().filter(|c| !c.boundary) {
            if let Some(a) = c.attractor {
                n += 1;
                if a != c.argmax {
                    d += 1;
                }
            }
        }
        if n == 0 { 0.0 } else { d as f64 / n as f64 }
    }

    pub fn stalled(&self) -> usize {
        self.cells.iter().filter(|c| c.attractor.is_none()).count()
    }
}

/// Centres of the `res²` triangles of a regular subdivision of the
/// 2-simplex.
pub fn simplex_cells(res: usize) -> Vec<[f64; 3]> {
    let r = res as f64;
    let mut out = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res - i {
            let (a, b) = ((i as f64 + 1.0 / 3.0) / r, (j as f64 + 1.0 / 3.0) / r);
            out.push([a, b, 1.0 - a - b]);
            if i + j + 1 < res {
                let (a, b) = ((i as f64 + 2.0 / 3.0) / r, (j as f64 + 2.0 / 3.0) / r);
                out.push([a, b, 1.0 - a - b]);
            }
        }
    }
    out
}

/// Attractor of the jump-free flow for every simplex cell. `positions`
/// `None` gives the saturated map. The time limit is `200/γ` stretched by
/// `γ / min F_ij` so weakly coupled pairs still resolve.
pub fn basin_map(res: usize, positions: Option<[f64; 3]>, gamma: f64) -> Result<BasinMap> {
    if res < 2 {
        return Err(Error::config("resolution", "must be at least 2"));
    }
    let model = CollisionModel::new(gamma);
    let x = positions.unwrap_or([0.0, SATURATED_SPACING, 2.0 * SATURATED_SPACING]);
    if x[0] == x[1] || x[1] == x[2] || x[0] == x[2] {
        return Err(Error::config("positions", "must be distinct"));
    }
    let f_min = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| model.rate(x[i] - x[j]))
        .fold(f64::INFINITY, f64::min);
    let t_max = 200.0 / gamma * (gamma / f_min).max(1.0);
    let cells = simplex_cells(res)
        .into_par_iter()
        .map(|w| {
            let state = CoefficientState::from_weights(&w, x.to_vec(), model)?;
            let mut sorted = w;
            sorted.sort_by(|a, b| b.total_cmp(a));
            Ok(BasinCell {
                weights: w,
                attractor: flow_endpoint(&state, t_max, 1e-6),
                argmax: argmax(&w),
                boundary: sorted[0] - sorted[1] < 1.0 / res as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BasinMap {
        resolution: res,
        positions: x,
        cells,
    })
}
