//! Kernel density estimation: the standard multivariate estimator, the
//! logarithm-transformation estimator on the original scale, and tail
//! densities normalized over (u, ∞).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::data::{DataMatrix, TailRegion};
use crate::error::{Error, Result};
use crate::grid::{default_points, DensityGrid};
use crate::mat::{Chol, SymMat};
use crate::transform::LogTransform;

/// Mahalanobis-squared cutoff for the truncated-kernel path: contributions
/// beyond 6 standard deviations are below exp(−18) ≈ 1.5e-8 of the kernel
/// peak, so the per-point truncation error is bounded by 1e-8·K_H(0).
const TRUNCATION_MAHALANOBIS_SQ: f64 = 36.0;
/// Direct summation is exact; the truncated path only engages above this n.
const TRUNCATION_MIN_N: usize = 50_000;

static KDE_FITS: AtomicU64 = AtomicU64::new(0);

/// Number of `KdeModel` fits performed by this process. Tail densities at
/// new thresholds reuse the fitted model, so this counter must not move
/// when only the threshold changes.
pub fn kde_fit_count() -> u64 {
    KDE_FITS.load(Ordering::Relaxed)
}

/// A nonnegative density on (a subset of) ℝᵈ.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Density defined by a closure; handy for analytic candidates and tests.
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Density for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdeKind {
    Standard,
    Transformation,
}

/// A fitted kernel density estimator.
#[derive(Debug, Clone)]
pub struct KdeModel {
    data: DataMatrix,
    /// Row-major estimation-space points: the data itself (standard) or the
    /// log-transformed sample (transformation).
    est_points: Vec<f64>,
    h: SymMat<f64>,
    chol: Chol<f64>,
    transform: Option<LogTransform<f64>>,
    truncate: bool,
}

impl KdeModel {
    /// Standard KDE: f̂(x) = n⁻¹ Σ K_H(x − Xᵢ).
    pub fn fit_standard(data: DataMatrix, h: SymMat<f64>) -> Result<Self> {
        Self::fit_inner(data, h, None)
    }

    /// Transformation KDE: f̂_X(x) = |J_t(x)| f̂_Y(t(x); H) with the KDE
    /// built on the transformed sample.
    pub fn fit_transformation(
        data: DataMatrix,
        transform: LogTransform<f64>,
        h: SymMat<f64>,
    ) -> Result<Self> {
        Self::fit_inner(data, h, Some(transform))
    }

    fn fit_inner(
        data: DataMatrix,
        h: SymMat<f64>,
        transform: Option<LogTransform<f64>>,
    ) -> Result<Self> {
        if h.dim() != data.dim() {
            return Err(Error::Domain("bandwidth dimension mismatch".into()));
        }
        let chol = h.cholesky().map_err(|_| {
            Error::NotPositiveDefinite("bandwidth matrix must be positive definite".into())
        })?;
        let est_points = match &transform {
            None => data.rows().flatten().copied().collect(),
            Some(t) => {
                let y = data.transformed(t)?;
                y.rows().flatten().copied().collect()
            }
        };
        KDE_FITS.fetch_add(1, Ordering::Relaxed);
        let truncate = data.n() > TRUNCATION_MIN_N;
        Ok(Self {
            data,
            est_points,
            h,
            chol,
            transform,
            truncate,
        })
    }

    pub fn kind(&self) -> KdeKind {
        if self.transform.is_some() {
            KdeKind::Transformation
        } else {
            KdeKind::Standard
        }
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn bandwidth(&self) -> &SymMat<f64> {
        &self.h
    }

    pub fn transform(&self) -> Option<&LogTransform<f64>> {
        self.transform.as_ref()
    }

    /// The estimation-space density f̂_Y at y (equals f̂_X for the standard
    /// kind).
    pub fn eval_estimation_space(&self, y: &[f64]) -> f64 {
        let d = self.data.dim();
        let n = self.data.n();
        let mut diff = [0.0f64; 3];
        let mut sum = 0.0;
        for row in self.est_points.chunks_exact(d) {
            for j in 0..d {
                diff[j] = y[j] - row[j];
            }
            let q = self.chol.mahalanobis_sq(&diff[..d]);
            if self.truncate && q > TRUNCATION_MAHALANOBIS_SQ {
                continue;
            }
            if q < 1418.0 {
                sum += (-0.5 * q).exp();
            }
        }
        let norm = (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0) * self.chol.sqrt_det();
        sum / (n as f64 * norm)
    }

    /// The density on the original scale.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        match &self.transform {
            None => self.eval_estimation_space(x),
            Some(t) => {
                if !t.contains(x) {
                    return 0.0;
                }
                let y = match t.forward(x) {
                    Ok(y) => y,
                    Err(_) => return 0.0,
                };
                let jac = t.jacobian(x).unwrap_or(0.0);
                jac * self.eval_estimation_space(&y)
            }
        }
    }

    /// Lower support bound per axis: the transform offset, or −∞.
    pub fn support_lower(&self) -> Vec<f64> {
        match &self.transform {
            Some(t) => t.offset().to_vec(),
            None => vec![f64::NEG_INFINITY; self.data.dim()],
        }
    }
}

impl Density for KdeModel {
    fn dim(&self) -> usize {
        self.data.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_point(x)
    }
}

/// Spacing anchor for tail quadrature grids: the transform offset when the
/// model has one, otherwise a point safely below the threshold.
fn grid_offset(model: &KdeModel, region: &TailRegion) -> Vec<f64> {
    match model.transform() {
        Some(t) => t.offset().to_vec(),
        None => {
            let sd = model
                .data()
                .col_sd()
                .unwrap_or_else(|_| vec![1.0; region.dim()]);
            region
                .u
                .iter()
                .zip(&sd)
                .map(|(&u, &s)| u - 2.0 * s.max(1e-8))
                .collect()
        }
    }
}

fn initial_upper(model: &KdeModel, region: &TailRegion) -> Vec<f64> {
    let max = model.data().col_max();
    let sd = model
        .data()
        .col_sd()
        .unwrap_or_else(|_| vec![1.0; region.dim()]);
    (0..region.dim())
        .map(|j| (max[j] + 3.0 * sd[j].max(1e-8)).max(region.u[j] + sd[j].max(1e-8)))
        .collect()
}

fn check_region(model: &KdeModel, region: &TailRegion) -> Result<()> {
    if region.dim() != model.dim() {
        return Err(Error::Domain("threshold dimension mismatch".into()));
    }
    let lower = model.support_lower();
    for j in 0..region.dim() {
        if region.u[j] <= lower[j] {
            return Err(Error::Domain(format!(
                "threshold {} in axis {j} is below the model support {}",
                region.u[j], lower[j]
            )));
        }
    }
    Ok(())
}

/// Quadrature of a density over the tail box [u, upper], doubling the box
/// span until the added mass falls below 1e-5.
fn extending_tail_mass(
    eval: &(impl Fn(&[f64]) -> f64 + Sync),
    u: &[f64],
    offset: &[f64],
    start_upper: &[f64],
    points_per_axis: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut upper = start_upper.to_vec();
    let mut mass_prev: Option<f64> = None;
    let mut mass = 0.0;
    for _round in 0..10 {
        let mut grid = DensityGrid::log_spaced(u, &upper, offset, points_per_axis)?;
        grid.fill(eval);
        mass = grid.integrate();
        if let Some(prev) = mass_prev {
            if (mass - prev).abs() < 1e-5 {
                return Ok((mass, upper));
            }
        }
        mass_prev = Some(mass);
        for j in 0..upper.len() {
            upper[j] = u[j] + 2.0 * (upper[j] - u[j]);
        }
    }
    Ok((mass, upper))
}

/// Estimated survival mass F̄(u): quadrature of the fitted density over
/// (u, truncation), with the truncation auto-extended until the added mass
/// is below 1e-5. Also returns the final per-axis truncation.
pub fn survival_estimate_detailed(
    model: &KdeModel,
    region: &TailRegion,
    points_per_axis: usize,
) -> Result<(f64, Vec<f64>)> {
    check_region(model, region)?;
    let offset = grid_offset(model, region);
    let start = initial_upper(model, region);
    extending_tail_mass(
        &|x: &[f64]| model.eval_point(x),
        &region.u,
        &offset,
        &start,
        points_per_axis,
    )
}

/// Survival mass above the threshold; see [`survival_estimate_detailed`].
pub fn survival_estimate(model: &KdeModel, region: &TailRegion) -> Result<f64> {
    let points = default_points(model.dim());
    survival_estimate_detailed(model, region, points).map(|(m, _)| m)
}

/// A normalized tail density on (u, ∞): base density divided by the
/// estimated survival mass, zero at or below the threshold.
pub struct TailDensityModel {
    base: Arc<dyn Density>,
    region: TailRegion,
    /// The estimated survival mass F̄(u).
    normalizer: f64,
    /// What point evaluations divide by: the normalizer when the base is a
    /// full density, 1 when the base is already a normalized tail.
    divisor: f64,
    grid: DensityGrid<f64>,
}

impl TailDensityModel {
    /// Tail density of a fitted KDE; the model is shared, not refitted.
    pub fn from_kde(model: Arc<KdeModel>, region: &TailRegion) -> Result<Self> {
        let points = default_points(model.dim());
        Self::from_kde_with(model, region, points)
    }

    pub fn from_kde_with(
        model: Arc<KdeModel>,
        region: &TailRegion,
        points_per_axis: usize,
    ) -> Result<Self> {
        let (normalizer, upper) = survival_estimate_detailed(&model, region, points_per_axis)?;
        if !(normalizer > 1e-6) {
            return Err(Error::InvalidData(format!(
                "vanishing tail mass {normalizer:.3e} above threshold {:?}",
                region.u
            )));
        }
        let offset = grid_offset(&model, region);
        let mut grid = DensityGrid::log_spaced(&region.u, &upper, &offset, points_per_axis)?;
        {
            let m = &model;
            grid.fill(|x| m.eval_point(x) / normalizer);
        }
        Ok(Self {
            base: model,
            region: region.clone(),
            normalizer,
            divisor: normalizer,
            grid,
        })
    }

    /// Tail density of an arbitrary full density; the survival mass comes
    /// from the same extending quadrature.
    pub fn from_full_density(
        base: Arc<dyn Density>,
        region: &TailRegion,
        upper_hint: &[f64],
        points_per_axis: usize,
    ) -> Result<Self> {
        let start: Vec<f64> = upper_hint
            .iter()
            .zip(&region.u)
            .map(|(&t, &u)| t.max(u + 1e-6 * (1.0 + u.abs())))
            .collect();
        let (normalizer, upper) = {
            let b = &base;
            extending_tail_mass(
                &|x: &[f64]| b.eval(x),
                &region.u,
                &region.u0,
                &start,
                points_per_axis,
            )?
        };
        if !(normalizer > 1e-6) {
            return Err(Error::InvalidData(format!(
                "vanishing tail mass {normalizer:.3e} above threshold {:?}",
                region.u
            )));
        }
        let mut grid = DensityGrid::log_spaced(&region.u, &upper, &region.u0, points_per_axis)?;
        {
            let b = &base;
            grid.fill(|x| b.eval(x) / normalizer);
        }
        Ok(Self {
            base,
            region: region.clone(),
            normalizer,
            divisor: normalizer,
            grid,
        })
    }

    /// Wraps a density that is already normalized on (u, ∞).
    pub fn from_tail_density(
        base: Arc<dyn Density>,
        region: &TailRegion,
        upper: &[f64],
        points_per_axis: usize,
    ) -> Result<Self> {
        Self::from_tail_density_with_mass(base, region, upper, points_per_axis, 1.0)
    }

    /// Wraps an already-normalized tail density while recording the survival
    /// mass F̄(u) its construction divided by.
    pub fn from_tail_density_with_mass(
        base: Arc<dyn Density>,
        region: &TailRegion,
        upper: &[f64],
        points_per_axis: usize,
        mass: f64,
    ) -> Result<Self> {
        if !(mass > 0.0 && mass <= 1.0 + 1e-9) {
            return Err(Error::Domain(format!(
                "survival mass {mass} outside (0, 1]"
            )));
        }
        let mut grid = DensityGrid::log_spaced(&region.u, upper, &region.u0, points_per_axis)?;
        {
            let b = &base;
            grid.fill(|x| b.eval(x));
        }
        Ok(Self {
            base,
            region: region.clone(),
            normalizer: mass.min(1.0),
            divisor: 1.0,
            grid,
        })
    }

    pub fn region(&self) -> &TailRegion {
        &self.region
    }

    /// The estimated survival mass F̄(u) the base density was divided by.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Normalized tail values on the quadrature grid over [u, truncation].
    pub fn grid(&self) -> &DensityGrid<f64> {
        &self.grid
    }

    /// Tail density at a point: zero unless every coordinate exceeds u.
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        if x.iter().zip(&self.region.u).any(|(&xj, &uj)| xj <= uj) {
            return 0.0;
        }
        self.base.eval(x) / self.divisor
    }

    /// Inverse of the cumulative tail distribution via monotone
    /// interpolation on the quadrature grid (d = 1 only).
    pub fn tail_quantile(&self, p: f64) -> Result<f64> {
        if self.grid.dim() != 1 {
            return Err(Error::Domain("tail quantiles are univariate only".into()));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} not in (0, 1)")));
        }
        let axis = &self.grid.axes()[0];
        let v = self.grid.values();
        let mut cum = Vec::with_capacity(axis.len());
        cum.push(0.0);
        for i in 1..axis.len() {
            let inc = 0.5 * (v[i] + v[i - 1]) * (axis[i] - axis[i - 1]);
            cum.push(cum[i - 1] + inc.max(0.0));
        }
        let total = *cum.last().unwrap();
        if total <= 0.0 {
            return Err(Error::InvalidData(
                "tail density has no mass on its grid".into(),
            ));
        }
        let target = p * total;
        match cum.iter().position(|&c| c >= target) {
            None => Ok(*axis.last().unwrap()),
            Some(0) => Ok(axis[0]),
            Some(i) => {
                let span = cum[i] - cum[i - 1];
                let frac = if span > 0.0 {
                    (target - cum[i - 1]) / span
                } else {
                    0.0
                };
                Ok(axis[i - 1] + frac * (axis[i] - axis[i - 1]))
            }
        }
    }
}

impl Density for TailDensityModel {
    fn dim(&self) -> usize {
        self.grid.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_point(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::SymMat;

    const PHI0: f64 = 0.3989422804014327;

    fn single_point_standard() -> KdeModel {
        let data = DataMatrix::from_column(vec![0.0]).unwrap();
        KdeModel::fit_standard(data, SymMat::identity(1)).unwrap()
    }

    #[test]
    fn single_point_standard_kde_is_the_kernel() {
        let m = single_point_standard();
        assert!((m.eval_point(&[0.0]) - PHI0).abs() < 1e-12);
    }

    #[test]
    fn single_point_transformation_kde() {
        let data = DataMatrix::from_column(vec![1.0]).unwrap();
        let t = LogTransform::new(vec![0.0]).unwrap();
        let m = KdeModel::fit_transformation(data, t, SymMat::identity(1)).unwrap();
        // Jacobian 1 at x = 1 and t(1) = 0 = t(data point).
        assert!((m.eval_point(&[1.0]) - PHI0).abs() < 1e-12);
        // No support below the offset.
        assert_eq!(m.eval_point(&[0.0]), 0.0);
        assert_eq!(m.eval_point(&[-3.0]), 0.0);
    }

    #[test]
    fn permuting_data_leaves_density_unchanged() {
        let a = DataMatrix::from_column(vec![0.3, -1.2, 2.5, 0.9]).unwrap();
        let b = DataMatrix::from_column(vec![2.5, 0.9, 0.3, -1.2]).unwrap();
        let h = SymMat::from_rows(1, vec![0.49]).unwrap();
        let ma = KdeModel::fit_standard(a, h.clone()).unwrap();
        let mb = KdeModel::fit_standard(b, h).unwrap();
        for &x in &[-2.0, 0.0, 0.77, 3.1] {
            assert_eq!(ma.eval_point(&[x]), mb.eval_point(&[x]));
        }
    }

    #[test]
    fn location_equivariance_of_standard_kind() {
        let base = vec![0.3, -1.2, 2.5, 0.9, 1.4];
        let c = 10.0;
        let shifted: Vec<f64> = base.iter().map(|v| v + c).collect();
        let h = SymMat::from_rows(1, vec![0.8]).unwrap();
        let m0 = KdeModel::fit_standard(DataMatrix::from_column(base).unwrap(), h.clone()).unwrap();
        let m1 = KdeModel::fit_standard(DataMatrix::from_column(shifted).unwrap(), h).unwrap();
        for &x in &[-1.0, 0.25, 2.0] {
            let a = m0.eval_point(&[x]);
            let b = m1.eval_point(&[x + c]);
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    fn lognormal_sample(n: usize, seed: u64) -> DataMatrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = crate::rng::RngStream::new(seed, 0).rng();
        let col: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.exp()
            })
            .collect();
        DataMatrix::from_column(col).unwrap()
    }

    #[test]
    fn transformation_kde_integrates_to_one() {
        let data = lognormal_sample(400, 11);
        let t = LogTransform::new(vec![0.0]).unwrap();
        let h = SymMat::from_rows(1, vec![0.05]).unwrap();
        let m = KdeModel::fit_transformation(data, t, h).unwrap();
        let region = TailRegion::new(vec![1e-9], vec![-1e-9], None).unwrap();
        let mass = survival_estimate(&m, &region).unwrap();
        // Integrating from (almost) the support edge captures all mass.
        assert!((mass - 1.0).abs() < 1e-3, "mass = {mass}");
    }

    #[test]
    fn survival_far_below_and_above_data() {
        let data = lognormal_sample(300, 5);
        let maxv = data.col_max()[0];
        let t = LogTransform::new(vec![0.0]).unwrap();
        let h = SymMat::from_rows(1, vec![0.08]).unwrap();
        let m = KdeModel::fit_transformation(data, t, h).unwrap();

        let low = TailRegion::new(vec![1e-8], vec![-1e-8], None).unwrap();
        assert!((survival_estimate(&m, &low).unwrap() - 1.0).abs() < 2e-3);

        let high = TailRegion::new(vec![maxv * 40.0], vec![0.0], None).unwrap();
        assert!(survival_estimate(&m, &high).unwrap() < 1e-3);
    }

    #[test]
    fn survival_half_for_symmetric_target() {
        use rand_distr::{Distribution, StandardNormal};
        // Standard-kind estimator on standard normal data, u = 0.
        let mut masses = Vec::new();
        for rep in 0..10 {
            let mut rng = crate::rng::RngStream::new(99, rep).rng();
            let col: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let data = DataMatrix::from_column(col).unwrap();
            // normal-scale bandwidth
            let sd = data.col_sd().unwrap()[0];
            let h2 = (4.0f64 / (3.0 * 2000.0)).powf(0.4) * sd * sd;
            let m = KdeModel::fit_standard(data, SymMat::from_rows(1, vec![h2]).unwrap()).unwrap();
            let region = TailRegion::new(vec![0.0], vec![-10.0], None).unwrap();
            masses.push(survival_estimate(&m, &region).unwrap());
        }
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        assert!((mean - 0.5).abs() < 0.03, "mean survival {mean}");
    }

    #[test]
    fn tail_density_normalizes_and_truncates() {
        let data = lognormal_sample(500, 21);
        let region = TailRegion::from_quantile(&data, 0.9).unwrap();
        let t = region.transform().unwrap();
        let h = SymMat::from_rows(1, vec![0.06]).unwrap();
        let m = Arc::new(KdeModel::fit_transformation(data, t, h).unwrap());
        let tail = TailDensityModel::from_kde(m, &region).unwrap();

        assert!(tail.normalizer() > 0.0 && tail.normalizer() <= 1.0);
        // zero at and below the threshold
        assert_eq!(tail.eval_point(&[region.u[0]]), 0.0);
        assert_eq!(tail.eval_point(&[region.u[0] - 0.5]), 0.0);
        // integrates to one over its grid
        let total = tail.grid().integrate();
        assert!((total - 1.0).abs() < 1e-3, "total = {total}");
    }

    #[test]
    fn two_thresholds_share_the_fit_and_shapes_agree() {
        let data = lognormal_sample(400, 33);
        let region1 = TailRegion::from_quantile(&data, 0.85).unwrap();
        let region2 = TailRegion::from_quantile(&data, 0.95).unwrap();
        let t = region1.transform().unwrap();
        let h = SymMat::from_rows(1, vec![0.07]).unwrap();
        let fits_before = kde_fit_count();
        let m = Arc::new(KdeModel::fit_transformation(data, t, h).unwrap());
        let tail1 = TailDensityModel::from_kde(m.clone(), &region1).unwrap();
        let tail2 = TailDensityModel::from_kde(m.clone(), &region2).unwrap();
        assert_eq!(kde_fit_count() - fits_before, 1, "thresholding must not refit");

        // Above the higher threshold the two tails differ only by their
        // normalizers.
        let expect = tail2.normalizer() / tail1.normalizer();
        for k in 1..10 {
            let x = region2.u[0] * (1.0 + 0.15 * k as f64);
            let r = tail1.eval_point(&[x]) / tail2.eval_point(&[x]);
            assert!((r - expect).abs() <= 1e-9 * expect.abs());
        }
    }

    #[test]
    fn vanishing_tail_mass_is_an_error() {
        let data = lognormal_sample(100, 3);
        let maxv = data.col_max()[0];
        let t = LogTransform::new(vec![0.0]).unwrap();
        let m = Arc::new(
            KdeModel::fit_transformation(data, t, SymMat::from_rows(1, vec![0.01]).unwrap())
                .unwrap(),
        );
        let region = TailRegion::new(vec![maxv * 1e4], vec![0.0], None).unwrap();
        assert!(TailDensityModel::from_kde(m, &region).is_err());
    }

    #[test]
    fn tail_quantiles_of_known_densities() {
        // Uniform tail density on (0, 1): the p-quantile is p.
        let region = TailRegion::new(vec![0.0], vec![-0.5], None).unwrap();
        let uni: Arc<dyn Density> = Arc::new(FnDensity::new(1, |x: &[f64]| {
            if x[0] >= 0.0 && x[0] <= 1.0 {
                1.0
            } else {
                0.0
            }
        }));
        let tail = TailDensityModel::from_tail_density(uni, &region, &[1.0], 2001).unwrap();
        assert!((tail.tail_quantile(0.25).unwrap() - 0.25).abs() < 1e-3);
        // p → 0 approaches the lower endpoint u
        assert!((tail.tail_quantile(1e-9).unwrap() - 0.0).abs() < 1e-6);

        // Exponential(1) tail above u = 0: median ln 2.
        let expd: Arc<dyn Density> = Arc::new(FnDensity::new(1, |x: &[f64]| {
            if x[0] >= 0.0 {
                (-x[0]).exp()
            } else {
                0.0
            }
        }));
        let tail = TailDensityModel::from_tail_density(expd, &region, &[40.0], 4001).unwrap();
        let med = tail.tail_quantile(0.5).unwrap();
        assert!((med - std::f64::consts::LN_2).abs() < 1e-3, "median {med}");
        assert!(tail.tail_quantile(0.5).is_ok());
        // d > 1 unsupported
        let region2 = TailRegion::new(vec![0.0, 0.0], vec![-1.0, -1.0], None).unwrap();
        let flat: Arc<dyn Density> = Arc::new(FnDensity::new(2, |_: &[f64]| 1.0));
        let t2 = TailDensityModel::from_tail_density(flat, &region2, &[1.0, 1.0], 32).unwrap();
        assert!(t2.tail_quantile(0.5).is_err());
    }

    #[test]
    fn nonnegative_on_grid() {
        let data = lognormal_sample(200, 8);
        let region = TailRegion::from_quantile(&data, 0.8).unwrap();
        let t = region.transform().unwrap();
        let m =
            KdeModel::fit_transformation(data, t, SymMat::from_rows(1, vec![0.1]).unwrap())
                .unwrap();
        let tail = TailDensityModel::from_kde(Arc::new(m), &region).unwrap();
        assert!(tail.grid().values().iter().all(|&v| v >= 0.0));
    }
}
