//! Gaussian kernel evaluation, Gaussian convolution and the length-d⁴
//! fourth-derivative vector needed by the plug-in and smoothed
//! cross-validation bandwidth selectors.

use crate::error::Result;
use crate::mat::{Chol, SymMat};
use crate::scalar::Real;

/// The fixed d-variate Gaussian kernel: unit mass, identity second-moment
/// matrix (m₂(K) = 1) and roughness R(K) = (4π)^{−d/2}.
#[derive(Debug, Clone, Copy)]
pub struct GaussianKernel {
    pub dim: usize,
}

impl GaussianKernel {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    /// m₂(K) = ∫ y₁² K(y) dy.
    pub fn second_moment<R: Real>(&self) -> R {
        R::one()
    }

    /// R(K) = ∫ K(y)² dy = (4π)^{−d/2}.
    pub fn roughness<R: Real>(&self) -> R {
        (R::of(4.0) * R::PI()).powf(-R::of(self.dim as f64) / R::of(2.0))
    }
}

/// (4π)^{−d/2}, the Gaussian roughness constant.
pub fn gaussian_roughness<R: Real>(dim: usize) -> R {
    GaussianKernel::new(dim).roughness()
}

/// The scaled kernel K_H(y) = |H|^{−1/2} K(H^{−1/2} y), i.e. the N(0, H)
/// density at y.
pub fn eval_scaled<R: Real>(h: &SymMat<R>, y: &[R]) -> Result<R> {
    let chol = h.cholesky()?;
    Ok(eval_scaled_chol(&chol, y))
}

/// N(0, H) density from a cached Cholesky factor.
#[inline]
pub fn eval_scaled_chol<R: Real>(chol: &Chol<R>, y: &[R]) -> R {
    let d = chol.dim();
    let q = chol.mahalanobis_sq(y);
    let half = R::of(0.5);
    let norm = (R::of(2.0) * R::PI()).powf(R::of(d as f64) * half) * chol.sqrt_det();
    (-half * q).exp() / norm
}

/// Covariance of the convolution of two centered Gaussians: H₁ + H₂.
/// The second factor may be the zero matrix (Dirac pilot).
pub fn convolve<R: Real>(h1: &SymMat<R>, h2: &SymMat<R>) -> Result<SymMat<R>> {
    h1.add(h2)
}

/// All fourth-order partial derivatives of the N(0, G) density at y, as a
/// vector of length d⁴ in four-fold Kronecker index order
/// (flat = ((i·d + j)·d + k)·d + l).
///
/// Uses the closed form of the Gaussian derivative recursion: with
/// a = G⁻¹y and B = G⁻¹,
/// ∂⁴φ/∂yᵢ∂yⱼ∂yₖ∂yₗ = [aᵢaⱼaₖaₗ − Σ₆ a·a·B + Σ₃ B·B]·φ(y),
/// the sums running over the pairings of the four indices.
pub fn deriv4_vector<R: Real>(g: &SymMat<R>, y: &[R]) -> Result<Vec<R>> {
    let d = g.dim();
    let chol = g.cholesky()?;
    let inv = g.inverse()?;
    let phi = eval_scaled_chol(&chol, y);
    let a = chol.solve(y); // G⁻¹ y
    let b = |i: usize, j: usize| inv.get(i, j);

    // Mixed partials commute, so compute each index multiset once and copy
    // it to every permutation; components are then exactly symmetric.
    let mut out = vec![R::zero(); d * d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let flat = ((i * d + j) * d + k) * d + l;
                    let mut s = [i, j, k, l];
                    s.sort_unstable();
                    let canonical = ((s[0] * d + s[1]) * d + s[2]) * d + s[3];
                    if flat != canonical {
                        out[flat] = out[canonical];
                        continue;
                    }
                    let quartic = a[i] * a[j] * a[k] * a[l];
                    let pair = a[i] * a[j] * b(k, l)
                        + a[i] * a[k] * b(j, l)
                        + a[i] * a[l] * b(j, k)
                        + a[j] * a[k] * b(i, l)
                        + a[j] * a[l] * b(i, k)
                        + a[k] * a[l] * b(i, j);
                    let double = b(i, j) * b(k, l) + b(i, k) * b(j, l) + b(i, l) * b(j, k);
                    out[flat] = (quartic - pair + double) * phi;
                }
            }
        }
    }
    Ok(out)
}
