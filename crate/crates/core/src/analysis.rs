//! Characterization of converged solitons: exponential tails, asymptotic
//! phase slopes, widths and the collision-localization size model.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    EvolutionConfig, EvolutionResult, TrackPoint, evolve_nonlinear, expectation_values,
    gaussian_soliton_guess,
};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, SpatialGrid, Spectral};
use crate::kernel::MomentumKernel;

/// Fit window for tails, relative to the peak modulus.
pub const TAIL_WINDOW: (f64, f64) = (1e-8, 1e-3);
pub const MIN_TAIL_POINTS: usize = 20;
/// Largest wrapped phase step between neighbours accepted by the unwrapper.
pub const UNWRAP_LIMIT: f64 = 0.9 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_regression(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit(format!("need at least two paired points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
    })
}

/// Tail sample on one side: distance from the centre, modulus, phase.
#[derive(Debug, Clone, Copy)]
struct TailPoint {
    d: f64,
    modulus: f64,
    amp: Complex64,
}

/// Tail points with `|π|/max` inside [`TAIL_WINDOW`], split by side and
/// sorted by increasing distance from `⟨y⟩`.
fn tail_points(field: &ComplexField) -> (Vec<TailPoint>, Vec<TailPoint>) {
    let grid = field.grid();
    let (center, _) = expectation_values(field);
    let peak = field
        .amplitudes()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let (lo, hi) = (TAIL_WINDOW.0 * peak, TAIL_WINDOW.1 * peak);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (j, c) in field.amplitudes().iter().enumerate() {
        let m = c.norm();
        if m < lo || m > hi {
            continue;
        }
        let d = grid.wrap(grid.position(j) - center);
        let p = TailPoint {
            d: d.abs(),
            modulus: m,
            amp: *c,
        };
        if d >= 0.0 { right.push(p) } else { left.push(p) }
    }
    let by_d = |a: &TailPoint, b: &TailPoint| a.d.total_cmp(&b.d);
    left.sort_by(by_d);
    right.sort_by(by_d);
    (left, right)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Decay constant in `|π| ∝ e^{-k|y - ⟨y⟩|}`.
    pub k: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Regression of `ln|π|` on `|y - ⟨y⟩|` over both tails.
pub fn fit_exponential_tail(field: &ComplexField) -> Result<TailFit> {
    let (left, right) = tail_points(field);
    for (side, pts) in [("left", &left), ("right", &right)] {
        if let Some(w) = pts.windows(2).find(|w| w[1].modulus >= w[0].modulus) {
            return Err(Error::Fit(format!(
                "{side} tail is not monotone near |y - <y>| = {:.4}",
                w[0].d
            )));
        }
    }
    let n = left.len() + right.len();
    if n < MIN_TAIL_POINTS {
        return Err(Error::Fit(format!(
            "tail window holds {n} points, need {MIN_TAIL_POINTS}"
        )));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = left
        .iter()
        .chain(&right)
        .map(|p| (p.d, p.modulus.ln()))
        .unzip();
    let fit = linear_regression(&x, &y)?;
    if fit.slope >= 0.0 {
        return Err(Error::Fit("tail does not decay".into()));
    }
    Ok(TailFit {
        k: -fit.slope,
        r_squared: fit.r_squared,
        n_points: n,
    })
}

/// Unwraps a sequence of phases, failing when neighbours differ by more than
/// [`UNWRAP_LIMIT`] after wrapping.
pub fn unwrap_phase(phases: &[f64]) -> Result<Vec<f64>> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(phases.len());
    let mut prev: Option<(f64, f64)> = None;
    for &p in phases {
        let v = match prev {
            None => p,
            Some((raw, acc)) => {
                let d = (p - raw + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
                if d.abs() > UNWRAP_LIMIT {
                    return Err(Error::Fit(format!(
                        "phase step {d:.3} between neighbours is too large to unwrap"
                    )));
                }
                acc + d
            }
        };
        out.push(v);
        prev = Some((p, v));
    }
    Ok(out)
}

/// Steady velocity `d⟨y⟩/dτ` from the second half of an expectation track.
pub fn track_velocity(track: &[TrackPoint]) -> f64 {
    let tail = &track[track.len() / 2..];
    if tail.len() < 2 {
        return 0.0;
    }
    let (t, x): (Vec<f64>, Vec<f64>) = tail.iter().map(|p| (p.t, p.position)).unzip();
    linear_regression(&t, &x).map(|f| f.slope).unwrap_or(0.0)
}

/// Standard deviation of `|π|²`, measured around the peak with the
/// minimum-image convention.
pub fn density_width(field: &ComplexField) -> f64 {
    let grid = field.grid();
    let (c, _) = expectation_values(field);
    let dx = grid.spacing();
    let (m0, m2) = field
        .amplitudes()
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(a, b), (j, amp)| {
            let r = amp.norm_sqr();
            let d = grid.wrap(grid.position(j) - c);
            (a + r, b + r * d * d)
        });
    (m2 * dx / (m0 * dx)).sqrt()
}

/// Standard deviation of the momentum distribution `|π̂(k)|²`.
pub fn momentum_width(field: &ComplexField) -> f64 {
    let spectral = Spectral::new(field.grid());
    let mut buf = field.amplitudes().to_vec();
    spectral.forward(&mut buf);
    let (m0, m1, m2) = buf
        .iter()
        .zip(spectral.wavenumbers())
        .fold((0.0, 0.0, 0.0), |(a, b, c), (v, k)| {
            let w = v.norm_sqr();
            (a + w, b + w * k, c + w * k * k)
        });
    let mean = m1 / m0;
    (m2 / m0 - mean * mean).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolitonProfile {
    pub field: ComplexField,
    pub velocity: f64,
    pub tail: TailFit,
    pub sigma_pi: f64,
    /// `a_ψ = ∫ρ (ρ∗g)`.
    pub a_psi: f64,
    pub phase_slope_left: f64,
    pub phase_slope_right: f64,
}

impl SolitonProfile {
    /// Measures a converged field. `velocity` is `d⟨y⟩/dτ`.
    pub fn measure(field: &ComplexField, kernel: &MomentumKernel, velocity: f64) -> Result<Self> {
        let tail = fit_exponential_tail(field)?;
        let a_psi = kernel.evaluate_lambda(&field.density())?.a_psi;
        let (left, right) = measured_phase_slopes(field)?;
        Ok(Self {
            field: field.clone(),
            velocity,
            tail,
            sigma_pi: density_width(field),
            a_psi,
            phase_slope_left: left,
            phase_slope_right: right,
        })
    }

    pub fn from_evolution(result: &EvolutionResult, kernel: &MomentumKernel) -> Result<Self> {
        Self::measure(
            &result.final_field,
            kernel,
            track_velocity(&result.expectation_track),
        )
    }
}

/// Phase gradient `dθ/dy` in the left and right tail windows.
pub fn measured_phase_slopes(field: &ComplexField) -> Result<(f64, f64)> {
    let (left, right) = tail_points(field);
    let (center, _) = expectation_values(field);
    let mut slopes = [0.0; 2];
    for (i, (pts, sign)) in [(left, -1.0), (right, 1.0)].into_iter().enumerate() {
        if pts.len() < MIN_TAIL_POINTS / 2 {
            return Err(Error::Fit(format!(
                "phase window holds {} points on one side",
                pts.len()
            )));
        }
        // Order by position so the slope is dθ/dy rather than dθ/d|y|.
        let mut pts = pts;
        if sign < 0.0 {
            pts.reverse();
        }
        let y: Vec<f64> = pts.iter().map(|p| center + sign * p.d).collect();
        let theta = unwrap_phase(&pts.iter().map(|p| p.amp.arg()).collect::<Vec<_>>())?;
        slopes[i] = linear_regression(&y, &theta)?.slope;
    }
    Ok((slopes[0], slopes[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlopes {
    pub measured_left: f64,
    pub measured_right: f64,
    pub predicted_left: f64,
    pub predicted_right: f64,
}

/// Tail phase gradients against the asymptotic prediction
/// `(v + sgn(y)·γa_ψ/k)/κ`: a tail `e^{-k|y|}` that carries probability
/// outward at the rate `γa_ψ` fixes the outward gradient, and the velocity
/// adds the Galilean offset `v/κ`.
pub fn asymptotic_phase_slope(profile: &SolitonProfile, kappa: f64, gamma: f64) -> PhaseSlopes {
    let outward = gamma * profile.a_psi / profile.tail.k;
    PhaseSlopes {
        measured_left: profile.phase_slope_left,
        measured_right: profile.phase_slope_right,
        predicted_left: (profile.velocity - outward) / kappa,
        predicted_right: (profile.velocity + outward) / kappa,
    }
}

/// Maximum over `q` of `|∫|π|² e^{iqy} dy - e^{iq⟨y⟩}|`, sampled at
/// `n_q` points of `[q_min, q_max]`.
pub fn point_like_phase_error(field: &ComplexField, q_range: (f64, f64), n_q: usize) -> f64 {
    let grid = field.grid();
    let dx = grid.spacing();
    let (c, _) = expectation_values(field);
    let rho: Vec<(f64, f64)> = field
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(j, a)| (grid.wrap(grid.position(j) - c), a.norm_sqr()))
        .collect();
    let norm: f64 = rho.iter().map(|(_, r)| r).sum::<f64>() * dx;
    let n_q = n_q.max(2);
    (0..n_q)
        .map(|i| {
            let q = q_range.0 + (q_range.1 - q_range.0) * i as f64 / (n_q - 1) as f64;
            let s: Complex64 = rho
                .iter()
                .map(|&(d, r)| Complex64::from_polar(r, q * d))
                .sum::<Complex64>()
                * (dx / norm);
            (s - 1.0).norm()
        })
        .fold(0.0, f64::max)
}

/// `σ̃(κ) = a_loc + κ/(4 a_loc)`.
pub fn size_model(kappa: f64, a_loc: f64) -> f64 {
    a_loc + kappa / (4.0 * a_loc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeModelParams {
    pub a_loc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeModelFit {
    pub params: SizeModelParams,
    pub rms: f64,
    pub mean_width: f64,
}

/// Least-squares `a_loc ∈ (0, 3)` for the size model: a coarse log scan
/// followed by golden-section refinement.
pub fn fit_size_model(points: &[(f64, f64)]) -> Result<SizeModelFit> {
    if points.is_empty() {
        return Err(Error::Fit("no (kappa, width) points".into()));
    }
    let sse = |a: f64| -> f64 {
        points
            .iter()
            .map(|&(k, s)| (size_model(k, a) - s).powi(2))
            .sum()
    };
    let (lo_b, hi_b) = (1e-4_f64, 3.0_f64);
    let m = 400;
    let grid: Vec<f64> = (0..=m)
        .map(|i| (lo_b.ln() + (hi_b.ln() - lo_b.ln()) * i as f64 / m as f64).exp())
        .collect();
    let best = (0..=m)
        .min_by(|&i, &j| sse(grid[i]).total_cmp(&sse(grid[j])))
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(m)];
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (sse(x1), sse(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = sse(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = sse(x2);
        }
    }
    let a_loc = 0.5 * (a + b);
    let n = points.len() as f64;
    Ok(SizeModelFit {
        params: SizeModelParams { a_loc },
        rms: (sse(a_loc) / n).sqrt(),
        mean_width: points.iter().map(|p| p.1).sum::<f64>() / n,
    })
}

/// Grid, step and packet scales chosen for a soliton run at a given κ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonSetup {
    pub kappa: f64,
    pub grid: SpatialGrid,
    pub width_estimate: f64,
    pub tail_estimate: f64,
}

impl SolitonSetup {
    /// Resolves both the core (`dx ≤ σ/12`) and the oscillating tail
    /// (`dx ≤ 0.2/k`), with room for the tails to reach 1e-10.
    pub fn for_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::config("kappa", "must be positive"));
        }
        let sigma = if kappa < 0.2 {
            gaussian_soliton_guess(kappa).0
        } else {
            size_model(kappa, 0.4)
        };
        let a_est = 1.0 / (1.0 + 2.0 * sigma * sigma).sqrt();
        let k_est = (a_est / kappa).sqrt();
        let dx = (sigma / 12.0).min(0.2 / k_est).min(0.25);
        let length = (2.0 * (24.0 / k_est + 5.0 * sigma) + 6.0).max(16.0);
        Ok(Self {
            kappa,
            grid: SpatialGrid::with_max_spacing(length, dx)?,
            width_estimate: sigma,
            tail_estimate: k_est,
        })
    }

    /// Chirped Gaussian close to the soliton, centred at `center`.
    pub fn initial_packet(&self, center: f64, momentum: f64) -> ComplexField {
        let (w, c) = gaussian_soliton_guess(self.kappa);
        ComplexField::chirped_gaussian(self.grid, center, w, c, momentum)
    }
}

#[derive(Debug, Clone)]
pub struct ConvergedSoliton {
    pub setup: SolitonSetup,
    pub kernel: MomentumKernel,
    pub result: EvolutionResult,
}

/// Relaxes the chirped-Gaussian guess at rest under the nonlinear flow.
pub fn relax_soliton(kappa: f64, t_max: f64) -> Result<ConvergedSoliton> {
    let setup = SolitonSetup::for_kappa(kappa)?;
    let kernel = MomentumKernel::gaussian(setup.grid, 1.0)?;
    let mut cfg = EvolutionConfig::for_grid(kappa, &setup.grid);
    cfg.t_max = t_max;
    cfg.track_interval = 1.0;
    let result = evolve_nonlinear(&setup.initial_packet(0.0, 0.0), &kernel, &cfg)?;
    Ok(ConvergedSoliton {
        setup,
        kernel,
        result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub kappa: f64,
    pub sigma_pi: f64,
    pub converged: bool,
    pub convergence_time: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSweep {
    pub rows: Vec<WidthRow>,
    /// Fit over the converged rows; `None` when none converged.
    pub fit: Option<SizeModelFit>,
}

/// Relaxes a soliton at every κ (in parallel) and fits the size model to
/// the converged widths.
pub fn width_vs_kappa(kappas: &[f64], t_max: f64) -> WidthSweep {
    let rows: Vec<WidthRow> = kappas
        .par_iter()
        .map(|&kappa| match relax_soliton(kappa, t_max) {
            Ok(s) => WidthRow {
                kappa,
                sigma_pi: density_width(&s.result.final_field),
                converged: s.result.converged,
                convergence_time: s.result.convergence_time,
                error: None,
            },
            Err(e) => WidthRow {
                kappa,
                sigma_pi: f64::NAN,
                converged: false,
                convergence_time: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.kappa, r.sigma_pi))
        .collect();
    let fit = fit_size_model(&pts).ok();
    WidthSweep { rows, fit }
}

/// Log-spaced κ values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
