//! The per-margin logarithm transformation t_j(x_j) = log(x_j − u0_j)
//! mapping the bounded domain (u0, ∞) to ℝᵈ, with its inverse and Jacobian.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Margin-wise log transform with independent offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTransform<R> {
    u0: Vec<R>,
}

impl<R: Real> LogTransform<R> {
    pub fn new(u0: Vec<R>) -> Result<Self> {
        if u0.is_empty() || u0.len() > 3 {
            return Err(Error::Domain("offset dimension must be 1..=3".into()));
        }
        if u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("offsets must be finite".into()));
        }
        Ok(Self { u0 })
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn offset(&self) -> &[R] {
        &self.u0
    }

    fn check_domain(&self, x: &[R]) -> Result<()> {
        debug_assert_eq!(x.len(), self.u0.len());
        for j in 0..x.len() {
            if x[j] <= self.u0[j] {
                return Err(Error::Domain(format!(
                    "coordinate {j} = {} is not above the transform offset {}",
                    x[j], self.u0[j]
                )));
            }
        }
        Ok(())
    }

    /// y_j = log(x_j − u0_j).
    pub fn forward(&self, x: &[R]) -> Result<Vec<R>> {
        self.check_domain(x)?;
        Ok(x.iter()
            .zip(&self.u0)
            .map(|(&xj, &oj)| (xj - oj).ln())
            .collect())
    }

    /// x_j = u0_j + exp(y_j).
    pub fn inverse(&self, y: &[R]) -> Vec<R> {
        y.iter()
            .zip(&self.u0)
            .map(|(&yj, &oj)| oj + yj.exp())
            .collect()
    }

    /// |J_t(x)| = ∏ 1/(x_j − u0_j).
    pub fn jacobian(&self, x: &[R]) -> Result<R> {
        self.check_domain(x)?;
        Ok(x.iter()
            .zip(&self.u0)
            .map(|(&xj, &oj)| (xj - oj).recip())
            .fold(R::one(), |a, b| a * b))
    }

    /// Whether x lies strictly inside the transform domain. Values within
    /// 1e-12 (relative) of the offset count as outside: they are rejected
    /// rather than clamped, which would corrupt Jacobians.
    pub fn contains(&self, x: &[R]) -> bool {
        x.iter().zip(&self.u0).all(|(&xj, &oj)| {
            let guard = oj.abs().max(R::one()) * R::of(1e-12);
            xj - oj > guard
        })
    }
}

/// The §-default offset rule: per-column min minus 5% of the per-column
/// range.
pub fn default_offset_columns<R: Real>(columns: &[Vec<R>]) -> Result<Vec<R>> {
    let mut out = Vec::with_capacity(columns.len());
    for (j, col) in columns.iter().enumerate() {
        if col.len() < 2 {
            return Err(Error::InvalidData(format!(
                "column {j}: need at least 2 observations"
            )));
        }
        let mut lo = col[0];
        let mut hi = col[0];
        for &v in col {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let range = hi - lo;
        if range <= R::zero() {
            return Err(Error::InvalidData(format!(
                "column {j} has zero range; the log transform offset is undefined"
            )));
        }
        out.push(lo - R::of(0.05) * range);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DensityGrid;
    use crate::kernels::eval_scaled;
    use crate::mat::SymMat;

    #[test]
    fn default_offset_examples() {
        let u0 = default_offset_columns::<f64>(&[vec![0.0, 10.0]]).unwrap();
        assert!((u0[0] + 0.5).abs() < 1e-15);

        let u0 = default_offset_columns::<f64>(&[vec![-2.0, 2.0]]).unwrap();
        assert!((u0[0] + 2.2).abs() < 1e-15);

        assert!(default_offset_columns::<f64>(&[vec![5.0, 5.0, 5.0]]).is_err());
    }

    #[test]
    fn forward_examples() {
        let t = LogTransform::<f64>::new(vec![0.0]).unwrap();
        assert_eq!(t.forward(&[1.0]).unwrap()[0], 0.0);
        assert!((t.forward(&[std::f64::consts::E]).unwrap()[0] - 1.0).abs() < 1e-15);

        let t2 = LogTransform::<f64>::new(vec![0.0, 0.0]).unwrap();
        let y = t2.forward(&[1.0, std::f64::consts::E.powi(2)]).unwrap();
        assert!((y[0]).abs() < 1e-15);
        assert!((y[1] - 2.0).abs() < 1e-14);

        assert!(t.forward(&[0.0]).is_err());
        assert!(t.forward(&[-1.0]).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let t = LogTransform::<f64>::new(vec![0.0]).unwrap();
        assert!((t.jacobian(&[2.0]).unwrap() - 0.5).abs() < 1e-15);

        let t2 = LogTransform::<f64>::new(vec![0.0, 0.0]).unwrap();
        assert!((t2.jacobian(&[2.0, 4.0]).unwrap() - 0.125).abs() < 1e-15);

        let t3 = LogTransform::<f64>::new(vec![1.0]).unwrap();
        assert!((t3.jacobian(&[3.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn round_trip_over_wide_range() {
        let t = LogTransform::<f64>::new(vec![-0.5, 2.0]).unwrap();
        // deterministic sweep over fifteen decades
        for k in 0..60 {
            let m = 10f64.powf(-4.0 + k as f64 * 0.25);
            let x = [-0.5 + m, 2.0 + m * 1.7];
            let y = t.forward(&x).unwrap();
            let back = t.inverse(&y);
            for j in 0..2 {
                let rel = ((back[j] - x[j]) / x[j].abs().max(1.0)).abs();
                assert!(rel < 1e-12, "x={x:?} back={back:?}");
            }
        }
    }

    #[test]
    fn change_of_variables_preserves_mass() {
        // Pull back a standard bivariate normal through t and integrate the
        // x-space density g(t(x))·|J_t(x)| over (u0, ∞)².
        let t = LogTransform::<f64>::new(vec![0.0, 0.0]).unwrap();
        let h = SymMat::<f64>::identity(2);
        let mut grid: DensityGrid<f64> =
            DensityGrid::log_spaced(&[1e-6, 1e-6], &[2e3, 2e3], &[-1e-6, -1e-6], 400).unwrap();
        grid.fill(|x| {
            let y = t.forward(x).unwrap();
            eval_scaled(&h, &y).unwrap() * t.jacobian(x).unwrap()
        });
        let mass = grid.integrate();
        assert!((mass - 1.0).abs() < 1e-3, "mass = {mass}");
    }
}
