use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::sync::{boundary_brackets, SyncPhasePoint};
use crate::error::{Error, Result};

/// Least-squares fit of `y = b √(a² - (x - a)²)` to a synchronization
/// boundary in the coordinates `x = η/(NΓ₂)`, `y = δ/Γ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square deviation of the boundary points from the curve.
    pub residual: f64,
    /// Breakdown squeezing `η̃_c = 2aN`.
    pub eta_c: f64,
    /// Critical detuning `δ_c/Γ₂ = ab`.
    pub delta_c: f64,
    pub n: usize,
}

const MIN_BOUNDARY_POINTS: usize = 5;
const MAX_ITERATIONS: usize = 100;

/// Boundary points `(x, y)` in normalized coordinates: per η̃ column the
/// largest synchronized δ̃ with a larger unsynchronized δ̃ above it.
pub fn boundary_points(points: &[SyncPhasePoint], n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    boundary_brackets(points)
        .into_iter()
        .map(|(eta, delta_sync, _)| (eta / nf, delta_sync / (nf * nf)))
        .collect()
}

/// Fit the boundary extracted from `points` (see [`boundary_points`]).
pub fn fit_ellipse(points: &[SyncPhasePoint], n: usize) -> Result<EllipseFit> {
    if n == 0 {
        return Err(crate::error::invalid("n", "must be at least 1"));
    }
    let boundary = boundary_points(points, n);
    let (a, b, residual) = fit_ellipse_xy(&boundary)?;
    Ok(EllipseFit {
        a,
        b,
        residual,
        eta_c: 2.0 * a * n as f64,
        delta_c: a * b,
        n,
    })
}

fn model(a: f64, b: f64, x: f64) -> f64 {
    b * (x * (2.0 * a - x)).max(0.0).sqrt()
}

fn rms(data: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let ss: f64 = data.iter().map(|&(x, y)| (y - model(a, b, x)).powi(2)).sum();
    (ss / data.len() as f64).sqrt()
}

/// Fit `(a, b)` to normalized boundary points; returns `(a, b, rms)`.
///
/// Starts from the linear least-squares solution of
/// `y² = 2ab²x - b²x²` and polishes with damped Gauss–Newton on the
/// untransformed residuals.
pub fn fit_ellipse_xy(data: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    if data.len() < MIN_BOUNDARY_POINTS {
        return Err(Error::DegenerateBoundary(format!(
            "{} boundary points, need at least {MIN_BOUNDARY_POINTS}",
            data.len()
        )));
    }
    if data.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite() && x > 0.0 && y >= 0.0)) {
        return Err(Error::DegenerateBoundary("boundary points need x > 0 and y ≥ 0".into()));
    }
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for &(x, y) in data {
        let row = Vector2::new(x, -x * x);
        normal += row * row.transpose();
        rhs += row * (y * y);
    }
    let coeffs = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateBoundary("boundary points are collinear in x".into()))?;
    let (p, q) = (coeffs[0], coeffs[1]);
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::DegenerateBoundary("boundary is not dome shaped".into()));
    }
    let mut a = p / (2.0 * q);
    let mut b = q.sqrt();
    let mut lambda = 1e-3;
    let mut current = rms(data, a, b);
    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for &(x, y) in data {
            let inner = x * (2.0 * a - x);
            if inner <= 0.0 {
                continue;
            }
            let root = inner.sqrt();
            let grad = Vector2::new(b * x / root, root);
            jtj += grad * grad.transpose();
            jtr += grad * (y - b * root);
        }
        let mut improved = false;
        for _ in 0..20 {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda;
            let Some(step) = damped.lu().solve(&jtr) else {
                break;
            };
            let (a_new, b_new) = (a + step[0], b + step[1]);
            let trial = rms(data, a_new, b_new);
            if a_new > 0.0 && b_new > 0.0 && trial <= current {
                let done = (a_new - a).abs() <= 1e-15 * a.abs() && (b_new - b).abs() <= 1e-15 * b.abs();
                a = a_new;
                b = b_new;
                current = trial;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok((a, b, current))
}
