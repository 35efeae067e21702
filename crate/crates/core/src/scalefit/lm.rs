//! Damped Gauss-Newton (Levenberg-Marquardt) for `y = a·x^-b + c` on
//! pre-normalized `x >= 1`.

use crate::math;

pub(super) const MAX_ITERATIONS: usize = 200;
pub(super) const PARAM_TOLERANCE: f64 = 1e-10;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e30;

/// Box constraints, enforced by projection after every step.
#[derive(Debug, Clone, Copy)]
pub(super) struct Bounds {
    pub alpha_min: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub gamma_max: f64,
}

impl Bounds {
    pub fn project(&self, p: [f64; 3]) -> [f64; 3] {
        [p[0].max(self.alpha_min), p[1].clamp(self.beta_min, self.beta_max), p[2].clamp(0.0, self.gamma_max)]
    }
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Solution {
    pub params: [f64; 3],
    pub sse: f64,
    pub converged: bool,
}

pub(super) fn model(p: &[f64; 3], x: f64) -> f64 {
    p[0] * math::powf(x, -p[1]) + p[2]
}

pub(super) fn sse(p: &[f64; 3], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - model(p, x);
            r * r
        })
        .sum()
}

/// `(JᵀJ, Jᵀr)` with `r = y - model`, Jacobian of the model (not the
/// residual).
pub(super) fn normal_equations(p: &[f64; 3], xs: &[f64], ys: &[f64]) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let xb = math::powf(x, -p[1]);
        let j = [xb, -p[0] * xb * math::ln(x), 1.0];
        let r = y - (p[0] * xb + p[2]);
        for a in 0..3 {
            jtr[a] += j[a] * r;
            for b in 0..3 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let upper = a[col];
            for (dst, src) in a[row][col..].iter_mut().zip(&upper[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn relative_change(old: &[f64; 3], new: &[f64; 3]) -> f64 {
    old.iter().zip(new).map(|(o, n)| (n - o).abs() / o.abs().max(1e-12)).fold(0.0, f64::max)
}

pub(super) fn solve(start: [f64; 3], xs: &[f64], ys: &[f64], bounds: &Bounds) -> Solution {
    let mut p = bounds.project(start);
    let mut cost = sse(&p, xs, ys);
    let mut lambda = LAMBDA_START;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        if cost == 0.0 {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&p, xs, ys);
        let mut damped = jtj;
        for k in 0..3 {
            damped[k][k] += lambda * jtj[k][k].max(1e-300);
        }
        let Some(step) = solve3(damped, jtr) else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                break;
            }
            continue;
        };
        let candidate = bounds.project([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
        let change = relative_change(&p, &candidate);
        let candidate_cost = sse(&candidate, xs, ys);
        if candidate_cost < cost {
            p = candidate;
            cost = candidate_cost;
            lambda = (lambda / 10.0).max(1e-300);
            if change < PARAM_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            if change < PARAM_TOLERANCE {
                // No representable improvement left.
                converged = true;
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                break;
            }
        }
    }
    Solution { params: p, sse: cost, converged }
}
