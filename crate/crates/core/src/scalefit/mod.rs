//! Power law plus constant, `L(x) = α·x^(−β) + γ`.
//!
//! [`fit_power_law`] minimizes `Σ (y_i − α x_i^(−β) − γ)²` in plain y-space
//! with Levenberg-Marquardt and an analytic Jacobian, restarting from a fixed
//! grid of exponents. `γ` is the irreducible loss: the value approached as
//! the resource grows without bound.

mod knee;
mod lm;

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

pub use knee::detect_knee;

use crate::math;
use crate::{Error, Result};

/// Exponents every fit is restarted from.
pub const BETA_STARTS: [f64; 5] = [0.05, 0.1, 0.2, 0.5, 1.0];
/// Largest exponent a fit may report. Step-shaped curves otherwise drive
/// `β` (and `α`) without bound.
pub const BETA_MAX: f64 = 10.0;
/// Default ratio below which a curve counts as saturated.
pub const DEFAULT_PHASE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

impl CurvePoint {
    pub fn validate(&self) -> Result<()> {
        if self.x.is_finite() && self.x > 0.0 && self.y.is_finite() && self.y > 0.0 {
            Ok(())
        } else {
            Err(Error::Input(format!("curve point ({}, {}) must be finite and positive", self.x, self.y)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub converged: bool,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    /// Smallest and largest resource value in the fitted data.
    pub x_min: f64,
    pub x_max: f64,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        predict(self, x)
    }
}

pub fn predict(fit: &PowerLawFit, x: f64) -> f64 {
    fit.alpha * math::powf(x, -fit.beta) + fit.gamma
}

/// The loss approached at infinite scale, `γ`.
pub fn scaling_limit(fit: &PowerLawFit) -> f64 {
    fit.gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    HighReturn,
    Saturating,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::HighReturn => "high-return",
            Phase::Saturating => "saturating",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Saturating iff the reducible loss at `x` has shrunk below `threshold`
/// times the reducible loss at the smallest fitted `x`.
pub fn phase_of(fit: &PowerLawFit, x: f64, threshold: f64) -> Phase {
    let at_start = predict(fit, fit.x_min) - fit.gamma;
    if at_start.is_nan() || at_start <= 0.0 {
        return Phase::Saturating;
    }
    let ratio = (predict(fit, x) - fit.gamma) / at_start;
    if ratio < threshold {
        Phase::Saturating
    } else {
        Phase::HighReturn
    }
}

/// Least-squares fit of `α·x^(−β) + γ` with `α > 0`, `β > 0` and
/// `0 ≤ γ < min(y)`.
///
/// Needs at least 4 points with at least 3 distinct `x`. Returns the best
/// converged start, or the best start with `converged = false` if none
/// converged.
pub fn fit_power_law(points: &[CurvePoint]) -> Result<PowerLawFit> {
    if points.len() < 4 {
        return Err(Error::InsufficientData(format!("power-law fit needs at least 4 points, got {}", points.len())));
    }
    for p in points {
        p.validate()?;
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.x).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 3 distinct x values, got {}",
            distinct.len()
        )));
    }

    // Fit against x / x_min so the problem is scale-free in x.
    let x_min = distinct[0];
    let x_max = distinct[distinct.len() - 1];
    let xs: Vec<f64> = points.iter().map(|p| p.x / x_min).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
    let bounds =
        lm::Bounds { alpha_min: 1e-15 * y_scale, beta_min: 1e-9, beta_max: BETA_MAX, gamma_max: y_min * (1.0 - 1e-12) };

    let mut best_converged: Option<lm::Solution> = None;
    let mut best_any: Option<lm::Solution> = None;
    for start in starts(&xs, &ys, y_min) {
        let sol = lm::solve(start, &xs, &ys, &bounds);
        let better = |cur: &Option<lm::Solution>| cur.is_none_or(|c| sol.sse < c.sse);
        if sol.converged && better(&best_converged) {
            best_converged = Some(sol);
        }
        if better(&best_any) {
            best_any = Some(sol);
        }
    }
    let sol = best_converged.or(best_any).expect("at least one start");

    let [alpha_n, beta, gamma] = sol.params;
    let alpha = alpha_n * math::powf(x_min, beta);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - sol.sse / ss_tot };
    Ok(PowerLawFit {
        alpha,
        beta,
        gamma,
        r_squared,
        n_points: points.len(),
        converged: sol.converged,
        residual_norm: math::sqrt(sol.sse),
        x_min,
        x_max,
    })
}

/// `γ₀ = 0.95·min(y)`; `α, β` from a log-linear regression of `y − γ₀`,
/// followed by one start per entry of [`BETA_STARTS`] with `α` refit for
/// that exponent.
fn starts(xs: &[f64], ys: &[f64], y_min: f64) -> Vec<[f64; 3]> {
    let gamma0 = 0.95 * y_min;
    let lx: Vec<f64> = xs.iter().map(|&x| math::ln(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| math::ln((y - gamma0).max(1e-300))).collect();
    let n = xs.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|l| (l - mx) * (l - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    let mut out = Vec::with_capacity(BETA_STARTS.len() + 1);
    out.push([math::exp(my - slope * mx), -slope, gamma0]);
    for &beta in &BETA_STARTS {
        let ln_alpha = my + beta * mx;
        out.push([math::exp(ln_alpha), beta, gamma0]);
    }
    out
}
