//! Derivative-free simplex minimization, plus the positive-definite matrix
//! search used by the bandwidth selectors: Nelder–Mead over the log-Cholesky
//! parameterization, so every iterate is a valid bandwidth matrix.

use crate::error::{Error, Result};
use crate::mat::SymMat;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_iter: usize,
    /// Relative spread of simplex objective values at which to stop.
    pub tol: f64,
    /// Initial step added to each coordinate when building the simplex.
    pub step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-8,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult<R> {
    pub x: Vec<R>,
    pub value: R,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead with the standard reflection/expansion/contraction/shrink
/// coefficients. Returns the best point seen; `converged` reports whether
/// the objective spread fell below tolerance within the budget.
pub fn nelder_mead<R: Real>(
    mut f: impl FnMut(&[R]) -> R,
    x0: &[R],
    opts: &NmOptions,
) -> Result<NmResult<R>> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::Domain("cannot optimize over zero parameters".into()));
    }
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::Domain("objective not finite at the starting point".into()));
    }

    let step = R::of(opts.step);
    let mut simplex: Vec<(Vec<R>, R)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut xi = x0.to_vec();
        xi[i] += step;
        let fi = f(&xi);
        simplex.push((xi, fi));
    }

    let tol = R::of(opts.tol);
    let (alpha, gamma, rho, sigma) = (R::one(), R::of(2.0), R::of(0.5), R::of(0.5));
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let spread = (worst - best).abs();
        if spread <= tol * (best.abs() + R::of(1e-300)) || spread == R::zero() {
            converged = true;
            break;
        }
        iterations += 1;

        // Centroid of all but the worst point.
        let mut centroid = vec![R::zero(); n];
        for (x, _) in simplex.iter().take(n) {
            for j in 0..n {
                centroid[j] += x[j];
            }
        }
        for c in &mut centroid {
            *c /= R::of(n as f64);
        }

        let point_at = |t: R, from: &[R]| -> Vec<R> {
            (0..n).map(|j| centroid[j] + t * (centroid[j] - from[j])).collect()
        };

        let xr = point_at(alpha, &simplex[n].0);
        let fr = f(&xr);

        if fr < simplex[0].1 {
            let xe = point_at(alpha * gamma, &simplex[n].0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 {
                point_at(alpha * rho, &simplex[n].0)
            } else {
                point_at(-rho, &simplex[n].0)
            };
            let fc = f(&xc);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // Shrink towards the best vertex.
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for j in 0..n {
                        v.0[j] = x_best[j] + sigma * (v.0[j] - x_best[j]);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, value) = simplex.swap_remove(0);
    Ok(NmResult {
        x,
        value,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct PdResult<R> {
    pub h: SymMat<R>,
    pub value: R,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes an objective over symmetric positive-definite matrices starting
/// from `start`. Convergence: relative objective change below 1e-8 or
/// 500·d(d+1)/2 iterations.
pub fn optimize_pd<R: Real>(
    objective: impl Fn(&SymMat<R>) -> R,
    start: &SymMat<R>,
) -> Result<PdResult<R>> {
    let d = start.dim();
    let theta0 = start.to_log_cholesky()?;
    let n_params = theta0.len();
    let opts = NmOptions {
        max_iter: 500 * n_params,
        tol: 1e-8,
        step: 0.1,
    };
    let f = |theta: &[R]| objective(&SymMat::from_log_cholesky(d, theta));
    let res = nelder_mead(f, &theta0, &opts)?;
    Ok(PdResult {
        h: SymMat::from_log_cholesky(d, &res.x),
        value: res.value,
        iterations: res.iterations,
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_log_cholesky_coordinates() {
        // Objective quadratic in the parameterization with a known argmin.
        let target = [0.3f64, -0.4, -0.7];
        let obj = |h: &SymMat<f64>| {
            let p = h.to_log_cholesky().unwrap();
            p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let start = SymMat::identity(2);
        let res = optimize_pd(obj, &start).unwrap();
        assert!(res.converged);
        let p = res.h.to_log_cholesky().unwrap();
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn returns_start_when_already_minimal() {
        let start = SymMat::from_rows(2, vec![1.5, 0.2, 0.2, 0.8]).unwrap();
        let t0 = start.to_log_cholesky().unwrap();
        let obj = |h: &SymMat<f64>| {
            let p = h.to_log_cholesky().unwrap();
            p.iter().zip(&t0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        };
        let res = optimize_pd(obj, &start).unwrap();
        assert!(res.converged);
        for i in 0..2 {
            for j in 0..2 {
                assert!((res.h.get(i, j) - start.get(i, j)).abs() < 1e-6);
            }
        }
        assert!(res.value <= 1e-10);
    }

    #[test]
    fn every_iterate_positive_definite() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let evals = AtomicUsize::new(0);
        let obj = |h: &SymMat<f64>| {
            evals.fetch_add(1, Ordering::Relaxed);
            assert!(h.is_positive_definite());
            // Rosenbrock-flavoured surface over the matrix entries.
            let a = h.get(0, 0) - 1.0;
            let b = h.get(1, 1) - 2.0;
            let c = h.get(0, 1) - 0.3;
            a * a + 3.0 * b * b + 10.0 * c * c
        };
        let start = SymMat::from_rows(2, vec![4.0, -0.9, -0.9, 0.5]).unwrap();
        let res = optimize_pd(obj, &start).unwrap();
        assert!(evals.load(Ordering::Relaxed) > 10);
        assert!(res.h.is_positive_definite());
        assert!(res.value < 1e-4);
    }

    #[test]
    fn rejects_non_finite_start() {
        let start = SymMat::<f64>::identity(1);
        let res = optimize_pd(|_| f64::NAN, &start);
        assert!(res.is_err());
    }

    #[test]
    fn plain_nelder_mead_on_shifted_bowl() {
        let res = nelder_mead(
            |x: &[f64]| (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + 5.0,
            &[0.0, 0.0],
            &NmOptions::default(),
        )
        .unwrap();
        assert!(res.converged);
        assert!((res.x[0] - 2.0).abs() < 1e-4);
        assert!((res.x[1] + 1.0).abs() < 1e-4);
    }
}
