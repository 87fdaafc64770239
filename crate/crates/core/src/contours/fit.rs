//! Damped least-squares fit of the four-parameter "parabola-like" curve
//!
//! ```text
//! y = alpha * |(x - delta) / (lambda / 2)|^beta + gamma
//! ```
//!
//! where the contour width `lambda` is measured and fixed. The objective is
//! non-convex in `beta` and `delta`, so the Levenberg-Marquardt iteration is
//! restarted from a fixed grid of `(beta, delta)` seeds with `(alpha, gamma)`
//! initialised by linear least squares.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};

use super::{ContourFit, ContourLine};

pub const BETA_MIN: f64 = 1e-3;
pub const BETA_MAX: f64 = 10.0;
const BETA_SEEDS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];
const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-10;
const RSS_TOL: f64 = 1e-15;

/// Curve parameters `(alpha, beta, gamma, delta)` for a fixed width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl CurveParams {
    fn to_vec(self) -> Vector4<f64> {
        Vector4::new(self.alpha, self.beta, self.gamma, self.delta)
    }

    fn from_vec(v: &Vector4<f64>) -> Self {
        CurveParams {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            delta: v[3],
        }
    }
}

/// Evaluate the curve at `x`.
pub fn curve(p: &CurveParams, lambda: f64, x: f64) -> f64 {
    let u = (x - p.delta) / (lambda / 2.0);
    p.alpha * u.abs().powf(p.beta) + p.gamma
}

/// Residual sum of squares of `p` on the points.
pub fn rss(p: &CurveParams, lambda: f64, points: &[(f64, f64)]) -> f64 {
    points
        .iter()
        .map(|&(x, y)| (curve(p, lambda, x) - y).powi(2))
        .sum()
}

/// Best `(alpha, gamma)` for fixed `(beta, delta)`: ordinary least squares of
/// `y` on `|u|^beta` with intercept. Returns `(alpha, gamma, rss)`.
pub fn linear_alpha_gamma(
    beta: f64,
    delta: f64,
    lambda: f64,
    points: &[(f64, f64)],
) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let half = lambda / 2.0;
    let mut sb = 0.0;
    let mut sy = 0.0;
    for &(x, y) in points {
        sb += ((x - delta) / half).abs().powf(beta);
        sy += y;
    }
    let (mb, my) = (sb / n, sy / n);
    let mut sbb = 0.0;
    let mut sby = 0.0;
    for &(x, y) in points {
        let b = ((x - delta) / half).abs().powf(beta) - mb;
        sbb += b * b;
        sby += b * (y - my);
    }
    let alpha = if sbb > 0.0 { sby / sbb } else { 0.0 };
    let gamma = my - alpha * mb;
    let p = CurveParams {
        alpha,
        beta,
        gamma,
        delta,
    };
    (alpha, gamma, rss(&p, lambda, points))
}

fn project(v: &mut Vector4<f64>, lambda: f64) {
    v[1] = v[1].clamp(BETA_MIN, BETA_MAX);
    v[3] = v[3].clamp(-lambda / 2.0, lambda / 2.0);
}

/// Normal equations `J^T J` and gradient `J^T r` at `p`, plus the rss.
fn normal_equations(
    p: &Vector4<f64>,
    lambda: f64,
    points: &[(f64, f64)],
) -> (Matrix4<f64>, Vector4<f64>, f64) {
    let (alpha, beta, gamma, delta) = (p[0], p[1], p[2], p[3]);
    let half = lambda / 2.0;
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    let mut total = 0.0;
    for &(x, y) in points {
        let u = (x - delta) / half;
        let au = u.abs();
        let (pow, d_beta, d_delta) = if au > 0.0 {
            let pow = au.powf(beta);
            let dd = -alpha * beta * pow / au * u.signum() / half;
            (pow, alpha * pow * au.ln(), dd)
        } else {
            // Subgradient 0 at the vertex for both beta and delta.
            (0.0, 0.0, 0.0)
        };
        let r = alpha * pow + gamma - y;
        let j = Vector4::new(pow, d_beta, 1.0, d_delta);
        jtj += j * j.transpose();
        jtr += j * r;
        total += r * r;
    }
    (jtj, jtr, total)
}

#[derive(Debug)]
struct LmOutcome {
    params: Vector4<f64>,
    rss: f64,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt(start: Vector4<f64>, lambda: f64, points: &[(f64, f64)]) -> LmOutcome {
    let mut p = start;
    project(&mut p, lambda);
    let (mut jtj, mut jtr, mut cur) = normal_equations(&p, lambda, points);
    let scale = points.iter().map(|q| q.1 * q.1).sum::<f64>().max(1.0);
    let mut mu = 1e-3;
    for iter in 0..MAX_ITERATIONS {
        if cur <= 1e-30 * scale {
            return LmOutcome {
                params: p,
                rss: cur,
                iterations: iter,
                converged: true,
            };
        }
        let mut accepted = false;
        while mu < 1e20 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            let mut cand = p + step;
            project(&mut cand, lambda);
            let (cjtj, cjtr, crss) = normal_equations(&cand, lambda, points);
            if crss.is_finite() && crss < cur {
                let moved = (cand - p).norm();
                let improvement = cur - crss;
                p = cand;
                jtj = cjtj;
                jtr = cjtr;
                cur = crss;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if moved <= STEP_TOL * (p.norm() + STEP_TOL) || improvement <= RSS_TOL * cur {
                    return LmOutcome {
                        params: p,
                        rss: cur,
                        iterations: iter + 1,
                        converged: true,
                    };
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            // No damping level yields descent: stationary within precision.
            return LmOutcome {
                params: p,
                rss: cur,
                iterations: iter + 1,
                converged: true,
            };
        }
    }
    LmOutcome {
        params: p,
        rss: cur,
        iterations: MAX_ITERATIONS,
        converged: false,
    }
}

/// Multi-start seeds `(beta, delta)` in the fixed evaluation order.
pub fn seeds(lambda: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(BETA_SEEDS.len() * 3);
    for &b in &BETA_SEEDS {
        for d in [0.0, -lambda / 8.0, lambda / 8.0] {
            out.push((b, d));
        }
    }
    out
}

/// Fit the curve to a contour's bottom arc.
///
/// The returned rss never exceeds the rss of the best seed. If no restart
/// meets the convergence tests the error carries the best fit found.
pub fn fit_contour(contour: &ContourLine) -> Result<ContourFit> {
    contour.validate()?;
    let lambda = contour.lambda;
    let points = &contour.points;
    let xmin = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if xmax - xmin < lambda / 4.0 {
        return Err(Error::InvalidInput(format!(
            "contour at level {} spans {:.3} mm in x, less than lambda/4",
            contour.level,
            xmax - xmin
        )));
    }

    let mut best: Option<LmOutcome> = None;
    let mut any_converged = false;
    for (beta, delta) in seeds(lambda) {
        let (alpha, gamma, _) = linear_alpha_gamma(beta, delta, lambda, points);
        let start = CurveParams {
            alpha,
            beta,
            gamma,
            delta,
        };
        let out = levenberg_marquardt(start.to_vec(), lambda, points);
        any_converged |= out.converged;
        if best.as_ref().is_none_or(|b| out.rss < b.rss) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one seed");
    let p = CurveParams::from_vec(&best.params);
    let fit = ContourFit {
        level: contour.level,
        alpha: p.alpha,
        beta: p.beta,
        gamma: p.gamma,
        delta: p.delta,
        lambda,
        rss: best.rss,
        iterations: best.iterations,
    };
    if !any_converged {
        return Err(Error::NonConvergence {
            best: Box::new(fit),
        });
    }
    Ok(fit)
}
