//! Small dense symmetric matrices (d ≤ 3) used for bandwidths, pilot
//! bandwidths and sample covariances, plus their Cholesky machinery and the
//! log-Cholesky parameterization used by the positive-definite optimizer.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative tolerance for the symmetry check on construction.
const SYM_REL_TOL: f64 = 1e-12;

/// A d×d symmetric matrix stored densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<R> {
    dim: usize,
    elems: Vec<R>,
}

impl<R: Real> SymMat<R> {
    /// Builds from row-major entries, enforcing symmetry to 1e-12 relative.
    pub fn from_rows(dim: usize, elems: Vec<R>) -> Result<Self> {
        if elems.len() != dim * dim {
            return Err(Error::Domain(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                elems.len()
            )));
        }
        if elems.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        let mut scale = R::zero();
        for e in &elems {
            scale = scale.max(e.abs());
        }
        let tol = scale * R::of(SYM_REL_TOL);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = elems[i * dim + j];
                let b = elems[j * dim + i];
                if (a - b).abs() > tol {
                    return Err(Error::Domain(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        // Store the symmetrized average so downstream algebra sees exact symmetry.
        let mut m = Self { dim, elems };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = (m.get(i, j) + m.get(j, i)) / R::of(2.0);
                m.elems[i * dim + j] = avg;
                m.elems[j * dim + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn from_diag(diag: &[R]) -> Self {
        let dim = diag.len();
        let mut elems = vec![R::zero(); dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            elems[i * dim + i] = v;
        }
        Self { dim, elems }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![R::one(); dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            elems: vec![R::zero(); dim * dim],
        }
    }

    /// c·I, the isotropic matrix.
    pub fn scalar(dim: usize, c: R) -> Self {
        Self::from_diag(&vec![c; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> R {
        self.elems[i * self.dim + j]
    }

    /// Sets (i,j) and (j,i) together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: R) {
        self.elems[i * self.dim + j] = v;
        self.elems[j * self.dim + i] = v;
    }

    pub fn elems(&self) -> &[R] {
        &self.elems
    }

    /// Column-stacked vec(·) of the matrix.
    pub fn vec_cols(&self) -> Vec<R> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * d);
        for j in 0..d {
            for i in 0..d {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Domain(format!(
                "dimension mismatch: {} vs {}",
                self.dim, other.dim
            )));
        }
        let elems = self
            .elems
            .iter()
            .zip(&other.elems)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            dim: self.dim,
            elems,
        })
    }

    pub fn scale(&self, c: R) -> Self {
        Self {
            dim: self.dim,
            elems: self.elems.iter().map(|&e| e * c).collect(),
        }
    }

    pub fn trace(&self) -> R {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.elems.iter().all(|e| *e == R::zero())
    }

    /// Lower Cholesky factor; fails unless strictly positive definite.
    pub fn cholesky(&self) -> Result<Chol<R>> {
        let d = self.dim;
        let mut l = vec![R::zero(); d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if s <= R::zero() || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite(format!(
                            "pivot {i} is {s}"
                        )));
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Ok(Chol { dim: d, l })
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    pub fn determinant(&self) -> Result<R> {
        Ok(self.cholesky()?.det())
    }

    pub fn inverse(&self) -> Result<Self> {
        let chol = self.cholesky()?;
        let d = self.dim;
        let mut inv = vec![R::zero(); d * d];
        for j in 0..d {
            let mut e = vec![R::zero(); d];
            e[j] = R::one();
            let col = chol.solve(&e);
            for i in 0..d {
                inv[i * d + j] = col[i];
            }
        }
        // Symmetrize against rounding.
        let mut m = Self { dim: d, elems: inv };
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = (m.get(i, j) + m.get(j, i)) / R::of(2.0);
                m.set_sym(i, j, avg);
            }
        }
        Ok(m)
    }

    /// Log-Cholesky parameters: row-major lower triangle of L with the
    /// diagonal log-scaled; length d(d+1)/2.
    pub fn to_log_cholesky(&self) -> Result<Vec<R>> {
        let chol = self.cholesky()?;
        let d = self.dim;
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in 0..=i {
                let v = chol.l[i * d + j];
                out.push(if i == j { v.ln() } else { v });
            }
        }
        Ok(out)
    }

    /// Inverse of [`Self::to_log_cholesky`]; any parameter vector maps to a
    /// strictly positive-definite matrix.
    pub fn from_log_cholesky(dim: usize, params: &[R]) -> Self {
        assert_eq!(params.len(), dim * (dim + 1) / 2);
        let mut l = vec![R::zero(); dim * dim];
        let mut idx = 0;
        for i in 0..dim {
            for j in 0..=i {
                l[i * dim + j] = if i == j { params[idx].exp() } else { params[idx] };
                idx += 1;
            }
        }
        // H = L Lᵀ
        let mut elems = vec![R::zero(); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                let mut s = R::zero();
                for k in 0..=i.min(j) {
                    s += l[i * dim + k] * l[j * dim + k];
                }
                elems[i * dim + j] = s;
            }
        }
        Self { dim, elems }
    }
}

/// Cached lower Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Chol<R> {
    dim: usize,
    l: Vec<R>,
}

impl<R: Real> Chol<R> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// det(H) = ∏ Lᵢᵢ².
    pub fn det(&self) -> R {
        let mut p = R::one();
        for i in 0..self.dim {
            let v = self.l[i * self.dim + i];
            p *= v * v;
        }
        p
    }

    pub fn sqrt_det(&self) -> R {
        (0..self.dim).map(|i| self.l[i * self.dim + i]).fold(R::one(), |a, b| a * b)
    }

    /// Solves L z = y (forward substitution). `z` is the whitened vector, so
    /// |z|² is the Mahalanobis norm yᵀH⁻¹y.
    pub fn forward(&self, y: &[R]) -> Vec<R> {
        let d = self.dim;
        let mut z = vec![R::zero(); d];
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * d + k] * z[k];
            }
            z[i] = s / self.l[i * d + i];
        }
        z
    }

    /// yᵀ H⁻¹ y via the whitened vector.
    #[inline]
    pub fn mahalanobis_sq(&self, y: &[R]) -> R {
        match self.dim {
            1 => {
                let z = y[0] / self.l[0];
                z * z
            }
            2 => {
                let z0 = y[0] / self.l[0];
                let z1 = (y[1] - self.l[2] * z0) / self.l[3];
                z0 * z0 + z1 * z1
            }
            _ => self.forward(y).iter().map(|&z| z * z).sum(),
        }
    }

    /// Solves H x = y (forward then backward substitution).
    pub fn solve(&self, y: &[R]) -> Vec<R> {
        let d = self.dim;
        let mut z = self.forward(y);
        for i in (0..d).rev() {
            let mut s = z[i];
            for k in (i + 1)..d {
                s -= self.l[k * d + i] * z[k];
            }
            z[i] = s / self.l[i * d + i];
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat2(a: f64, b: f64, c: f64) -> SymMat<f64> {
        SymMat::from_rows(2, vec![a, b, b, c]).unwrap()
    }

    #[test]
    fn rejects_asymmetric() {
        let r = SymMat::from_rows(2, vec![1.0, 0.5, 0.2, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn cholesky_round_trip() {
        let h = mat2(2.0, 0.3, 1.5);
        let chol = h.cholesky().unwrap();
        let x = chol.solve(&[1.0, -2.0]);
        // H x should give back the right-hand side.
        let r0 = 2.0 * x[0] + 0.3 * x[1];
        let r1 = 0.3 * x[0] + 1.5 * x[1];
        assert!((r0 - 1.0).abs() < 1e-12);
        assert!((r1 + 2.0).abs() < 1e-12);
        assert!((chol.det() - (2.0 * 1.5 - 0.09)).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let h = mat2(1.0, 2.0, 1.0);
        assert!(h.cholesky().is_err());
        assert!(!h.is_positive_definite());
    }

    #[test]
    fn log_cholesky_round_trip() {
        let h = SymMat::<f64>::from_rows(
            3,
            vec![2.0, 0.4, -0.1, 0.4, 1.5, 0.2, -0.1, 0.2, 0.9],
        )
        .unwrap();
        let p = h.to_log_cholesky().unwrap();
        assert_eq!(p.len(), 6);
        let back = SymMat::from_log_cholesky(3, &p);
        for i in 0..3 {
            for j in 0..3 {
                assert!((back.get(i, j) - h.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn any_log_cholesky_params_are_pd() {
        let params = [-3.0f64, 5.0, 2.0];
        let h = SymMat::from_log_cholesky(2, &params);
        assert!(h.is_positive_definite());
    }

    #[test]
    fn inverse_matches_identity() {
        let h = mat2(2.0, 0.7, 3.0);
        let inv = h.inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += h.get(i, k) * inv.get(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let h: SymMat<f32> = SymMat::from_rows(2, vec![2.0, 0.3, 0.3, 1.0]).unwrap();
        assert!(h.is_positive_definite());
        assert!((h.determinant().unwrap() - (2.0 - 0.09)).abs() < 1e-5);
    }
}
