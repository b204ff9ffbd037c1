//! Tensor-product evaluation grids with trapezoidal quadrature weights.
//!
//! Axes may be arbitrarily spaced (strictly increasing); tail workflows use
//! log-spaced axes so that resolution concentrates near the threshold while
//! still reaching far enough into heavy tails to capture the required mass.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default points per axis by dimension (d = 1, 2, 3).
pub const DEFAULT_POINTS: [usize; 3] = [512, 200, 64];

pub fn default_points(dim: usize) -> usize {
    DEFAULT_POINTS[dim - 1]
}

/// A tensor-product grid with per-node density values and quadrature weights.
///
/// Values are stored row-major with the last axis varying fastest.
#[derive(Debug, Clone)]
pub struct DensityGrid<R> {
    axes: Vec<Vec<R>>,
    axis_weights: Vec<Vec<R>>,
    values: Vec<R>,
}

fn trapezoid_weights<R: Real>(axis: &[R]) -> Vec<R> {
    let m = axis.len();
    let half = R::of(0.5);
    let mut w = vec![R::zero(); m];
    for i in 0..m - 1 {
        let h = (axis[i + 1] - axis[i]) * half;
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

impl<R: Real> DensityGrid<R> {
    /// Builds a grid from explicit axes; values start at zero.
    pub fn from_axes(axes: Vec<Vec<R>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::Domain("grid dimension must be 1..=3".into()));
        }
        for axis in &axes {
            if axis.len() < 2 {
                return Err(Error::Domain("each axis needs at least 2 points".into()));
            }
            if axis.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain("axis coordinates must be finite".into()));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Domain("axis must be strictly increasing".into()));
            }
        }
        let axis_weights = axes.iter().map(|a| trapezoid_weights(a)).collect::<Vec<_>>();
        let len = axes.iter().map(Vec::len).product();
        Ok(Self {
            axes,
            axis_weights,
            values: vec![R::zero(); len],
        })
    }

    /// Uniformly spaced axes over `[lower, upper]`.
    pub fn uniform(lower: &[R], upper: &[R], points_per_axis: usize) -> Result<Self> {
        check_bounds(lower, upper, points_per_axis)?;
        let axes = lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| linspace(lo, hi, points_per_axis))
            .collect();
        Self::from_axes(axes)
    }

    /// Axes log-spaced in `(x − offset)`, dense near `lower`.
    pub fn log_spaced(lower: &[R], upper: &[R], offset: &[R], points_per_axis: usize) -> Result<Self> {
        check_bounds(lower, upper, points_per_axis)?;
        let mut axes = Vec::with_capacity(lower.len());
        for j in 0..lower.len() {
            if offset[j] >= lower[j] {
                return Err(Error::Domain(format!(
                    "log-spacing offset must lie below the lower bound in axis {j}"
                )));
            }
            let a = (lower[j] - offset[j]).ln();
            let b = (upper[j] - offset[j]).ln();
            let mut axis: Vec<R> = linspace(a, b, points_per_axis)
                .into_iter()
                .map(|t| offset[j] + t.exp())
                .collect();
            // Pin the endpoints exactly despite rounding through exp/ln.
            axis[0] = lower[j];
            axis[points_per_axis - 1] = upper[j];
            axes.push(axis);
        }
        Self::from_axes(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axes(&self) -> &[Vec<R>] {
        &self.axes
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    pub fn lower(&self) -> Vec<R> {
        self.axes.iter().map(|a| a[0]).collect()
    }

    pub fn upper(&self) -> Vec<R> {
        self.axes.iter().map(|a| *a.last().unwrap()).collect()
    }

    /// Coordinates of the flat node index (last axis fastest).
    pub fn point(&self, mut flat: usize) -> Vec<R> {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        for j in (0..d).rev() {
            let m = self.axes[j].len();
            idx[j] = flat % m;
            flat /= m;
        }
        (0..d).map(|j| self.axes[j][idx[j]]).collect()
    }

    /// Quadrature weight of the flat node index.
    pub fn weight(&self, mut flat: usize) -> R {
        let d = self.dim();
        let mut w = R::one();
        for j in (0..d).rev() {
            let m = self.axes[j].len();
            w *= self.axis_weights[j][flat % m];
            flat /= m;
        }
        w
    }

    /// Total quadrature weight, i.e. the volume of the gridded box.
    pub fn total_weight(&self) -> R {
        self.axis_weights
            .iter()
            .map(|w| w.iter().copied().sum::<R>())
            .fold(R::one(), |a, b| a * b)
    }

    /// ∑ values·weights.
    pub fn integrate(&self) -> R {
        self.integrate_of(|v, _| v)
    }

    /// ∑ f(value, node)·weights.
    pub fn integrate_of(&self, f: impl Fn(R, &[R]) -> R) -> R {
        let mut total = R::zero();
        let mut point = vec![R::zero(); self.dim()];
        for flat in 0..self.len() {
            self.point_into(flat, &mut point);
            total += f(self.values[flat], &point) * self.weight(flat);
        }
        total
    }

    fn point_into(&self, mut flat: usize, out: &mut [R]) {
        let d = self.dim();
        for j in (0..d).rev() {
            let m = self.axes[j].len();
            out[j] = self.axes[j][flat % m];
            flat /= m;
        }
    }

    /// Evaluates `f` at every node in parallel; each node is an independent
    /// output so the result does not depend on the worker count.
    pub fn fill(&mut self, f: impl Fn(&[R]) -> R + Sync) {
        let d = self.dim();
        let axes = &self.axes;
        self.values
            .par_iter_mut()
            .enumerate()
            .for_each(|(flat, out)| {
                let mut point = vec![R::zero(); d];
                let mut rest = flat;
                for j in (0..d).rev() {
                    let m = axes[j].len();
                    point[j] = axes[j][rest % m];
                    rest /= m;
                }
                *out = f(&point);
            });
    }
}

fn check_bounds<R: Real>(lower: &[R], upper: &[R], points: usize) -> Result<()> {
    if lower.len() != upper.len() || lower.is_empty() || lower.len() > 3 {
        return Err(Error::Domain("bounds must share a dimension in 1..=3".into()));
    }
    if points < 2 {
        return Err(Error::Domain("need at least 2 points per axis".into()));
    }
    for j in 0..lower.len() {
        if !lower[j].is_finite() || !upper[j].is_finite() {
            return Err(Error::Domain(format!("non-finite bound in axis {j}")));
        }
        if upper[j] <= lower[j] {
            return Err(Error::Domain(format!(
                "upper bound must exceed lower bound in axis {j}"
            )));
        }
    }
    Ok(())
}

fn linspace<R: Real>(lo: R, hi: R, m: usize) -> Vec<R> {
    let step = (hi - lo) / R::of((m - 1) as f64);
    let mut v: Vec<R> = (0..m).map(|i| lo + step * R::of(i as f64)).collect();
    v[m - 1] = hi;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_trapezoid() {
        let g: DensityGrid<f64> = DensityGrid::uniform(&[0.0], &[1.0], 2).unwrap();
        assert_eq!(g.axes()[0], vec![0.0, 1.0]);
        assert_eq!(g.weight(0), 0.5);
        assert_eq!(g.weight(1), 0.5);
    }

    #[test]
    fn unit_square_weights_tile_area() {
        let g: DensityGrid<f64> = DensityGrid::uniform(&[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_integrates_exactly() {
        let mut g: DensityGrid<f64> = DensityGrid::uniform(&[0.0], &[1.0], 101).unwrap();
        g.fill(|_| 2.0);
        assert!((g.integrate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_integrates_to_machine_precision() {
        // Trapezoid is exact on affine integrands.
        let mut g: DensityGrid<f64> =
            DensityGrid::uniform(&[-1.0, 2.0], &[3.0, 5.0], 37).unwrap();
        g.fill(|x| 1.5 + 2.0 * x[0] - 0.5 * x[1]);
        // ∫∫ (1.5 + 2x - 0.5y) dx dy over [-1,3]x[2,5]
        let exact = 1.5 * 12.0 + 2.0 * (0.5 * (9.0 - 1.0)) * 3.0 - 0.5 * (0.5 * (25.0 - 4.0)) * 4.0;
        assert!((g.integrate() - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn log_spaced_endpoints_exact() {
        let g: DensityGrid<f64> =
            DensityGrid::log_spaced(&[1.0], &[100.0], &[0.0], 64).unwrap();
        assert_eq!(g.axes()[0][0], 1.0);
        assert_eq!(*g.axes()[0].last().unwrap(), 100.0);
        assert!(g.axes()[0].windows(2).all(|w| w[1] > w[0]));
        // Spacing grows towards the tail.
        let first_gap = g.axes()[0][1] - g.axes()[0][0];
        let last_gap = g.axes()[0][63] - g.axes()[0][62];
        assert!(last_gap > 10.0 * first_gap);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(DensityGrid::<f64>::uniform(&[0.0], &[0.0], 8).is_err());
        assert!(DensityGrid::<f64>::uniform(&[0.0], &[f64::INFINITY], 8).is_err());
        assert!(DensityGrid::<f64>::uniform(&[0.0], &[1.0], 1).is_err());
    }

    #[test]
    fn point_decoding_matches_axes() {
        let g: DensityGrid<f64> = DensityGrid::uniform(&[0.0, 10.0], &[1.0, 12.0], 3).unwrap();
        // last axis fastest
        assert_eq!(g.point(0), vec![0.0, 10.0]);
        assert_eq!(g.point(1), vec![0.0, 11.0]);
        assert_eq!(g.point(3), vec![0.5, 10.0]);
    }

    #[test]
    fn generic_f32_instantiation() {
        let mut g: DensityGrid<f32> = DensityGrid::uniform(&[0.0], &[1.0], 33).unwrap();
        g.fill(|x| x[0]);
        assert!((g.integrate() - 0.5).abs() < 1e-6);
    }
}
