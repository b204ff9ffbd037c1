//! Numerical verification of the asymptotic theory for the log-transformation
//! kernel estimator: pointwise bias/variance predictions, the Hessian
//! pullback they rest on, Monte Carlo counterparts, and ISE convergence-rate
//! regressions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::pi_select;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::histogram::HistogramModel;
use crate::kde::{Density, KdeModel};
use crate::kernels::gaussian_roughness;
use crate::mat::SymMat;
use crate::rng::{uniform_open01, RngStream};
use crate::transform::LogTransform;

/// A target density with closed-form gradient and Hessian and an exact
/// sampler, so every symbol in the bias/variance expressions has an oracle.
pub trait AnalyticTarget: Send + Sync {
    fn dim(&self) -> usize;
    fn density(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Hessian entries d²f/dxᵢdxⱼ.
    fn hessian(&self, x: &[f64]) -> SymMat<f64>;
    fn sample(&self, n: usize, stream: RngStream) -> DataMatrix;
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard lognormal marginals: closed-form f, f′, f″ on (0, ∞).
fn lognormal_parts(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let l = x.ln();
    let p = phi(l);
    let f = p / x;
    let fp = -p * (l + 1.0) / (x * x);
    let fpp = p * (l * l + 3.0 * l + 1.0) / (x * x * x);
    (f, fp, fpp)
}

/// Product of d independent standard lognormals on (0, ∞)ᵈ.
#[derive(Debug, Clone, Copy)]
pub struct LogNormalProduct {
    pub dim: usize,
}

impl LogNormalProduct {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl AnalyticTarget for LogNormalProduct {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| lognormal_parts(xi).0).product()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let parts: Vec<(f64, f64, f64)> = x.iter().map(|&xi| lognormal_parts(xi)).collect();
        (0..self.dim)
            .map(|i| {
                parts
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if i == j { p.1 } else { p.0 })
                    .product()
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> SymMat<f64> {
        let d = self.dim;
        let parts: Vec<(f64, f64, f64)> = x.iter().map(|&xi| lognormal_parts(xi)).collect();
        let mut elems = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut v = 1.0;
                for (k, p) in parts.iter().enumerate() {
                    v *= if k == i && k == j {
                        p.2
                    } else if k == i || k == j {
                        p.1
                    } else {
                        p.0
                    };
                }
                elems[i * d + j] = v;
            }
        }
        SymMat::from_rows(d, elems).expect("product hessian is symmetric")
    }

    fn sample(&self, n: usize, stream: RngStream) -> DataMatrix {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream.rng();
        let mut values = Vec::with_capacity(n * self.dim);
        for _ in 0..n {
            for _ in 0..self.dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(z.exp());
            }
        }
        DataMatrix::new(values, n, self.dim).expect("lognormal values are finite")
    }
}

/// Unit exponential on (0, ∞): a target with f(0⁺) = 1 > 0, used for the
/// boundary-behaviour checks.
#[derive(Debug, Clone, Copy)]
pub struct Exponential;

impl AnalyticTarget for Exponential {
    fn dim(&self) -> usize {
        1
    }
    fn density(&self, x: &[f64]) -> f64 {
        if x[0] < 0.0 {
            0.0
        } else {
            (-x[0]).exp()
        }
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![-self.density(x)]
    }
    fn hessian(&self, x: &[f64]) -> SymMat<f64> {
        SymMat::from_rows(1, vec![self.density(x)]).unwrap()
    }
    fn sample(&self, n: usize, stream: RngStream) -> DataMatrix {
        let mut rng = stream.rng();
        let col: Vec<f64> = (0..n).map(|_| -uniform_open01(&mut rng).ln()).collect();
        DataMatrix::from_column(col).unwrap()
    }
}

/// D²f_Y(y) for f_Y(y) = exp(|y|)·f_X(exp(y)): entry (i, j) equals
/// π(x)·[f + xᵢfᵢ + xⱼfⱼ + δᵢⱼ·xᵢfᵢ + xᵢxⱼfᵢⱼ] with x = exp(y).
pub fn hessian_pullback(target: &dyn AnalyticTarget, y: &[f64]) -> SymMat<f64> {
    let d = target.dim();
    let x: Vec<f64> = y.iter().map(|&v| v.exp()).collect();
    let pi: f64 = x.iter().product();
    let f = target.density(&x);
    let grad = target.gradient(&x);
    let hess = target.hessian(&x);
    let mut elems = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut v = f + x[i] * grad[i] + x[j] * grad[j] + x[i] * x[j] * hess.get(i, j);
            if i == j {
                v += x[i] * grad[i];
            }
            elems[i * d + j] = pi * v;
        }
    }
    SymMat::from_rows(d, elems).expect("pullback hessian is symmetric")
}

/// f_Y(y) = exp(|y|) f_X(exp(y)), the transformed-scale density.
pub fn transformed_density(target: &dyn AnalyticTarget, y: &[f64]) -> f64 {
    let x: Vec<f64> = y.iter().map(|&v| v.exp()).collect();
    let pi: f64 = x.iter().product();
    pi * target.density(&x)
}

/// Leading pointwise bias of the log-transformation kernel estimator:
/// ½ m₂(K) [ f·𝟙ᵀH𝟙 + 2·𝟙ᵀH Diag(x) Df + tr(H Diag(x) Diag(Df))
///           + tr(H Diag(x) D²f Diag(x)) ].
pub fn theorem1_bias_prediction(
    target: &dyn AnalyticTarget,
    x: &[f64],
    h: &SymMat<f64>,
) -> Result<f64> {
    let d = target.dim();
    if x.len() != d || h.dim() != d {
        return Err(Error::Domain("dimension mismatch in bias prediction".into()));
    }
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("prediction point must lie in (0, ∞)ᵈ".into()));
    }
    let f = target.density(x);
    let grad = target.gradient(x);
    let hess = target.hessian(x);
    let mut term1 = 0.0;
    let mut term2 = 0.0;
    let mut term3 = 0.0;
    let mut term4 = 0.0;
    for i in 0..d {
        term3 += h.get(i, i) * x[i] * grad[i];
        for j in 0..d {
            term1 += h.get(i, j);
            term2 += h.get(i, j) * x[j] * grad[j];
            term4 += h.get(i, j) * x[j] * x[i] * hess.get(j, i);
        }
    }
    Ok(0.5 * (f * term1 + 2.0 * term2 + term3 + term4))
}

/// The d = 1 specialization ½ m₂(K) h² [f + 3xf′ + x²f″].
pub fn theorem1_bias_d1(target: &dyn AnalyticTarget, x: f64, h2: f64) -> Result<f64> {
    if target.dim() != 1 {
        return Err(Error::Domain("scalar bias form needs d = 1".into()));
    }
    let f = target.density(&[x]);
    let fp = target.gradient(&[x])[0];
    let fpp = target.hessian(&[x]).get(0, 0);
    Ok(0.5 * h2 * (f + 3.0 * x * fp + x * x * fpp))
}

/// The d = 2 diagonal-bandwidth specialization:
/// ½ [ (h₁²+h₂²) f + 3(h₁²x₁f₁ + h₂²x₂f₂) + h₁²x₁²f₁₁ + h₂²x₂²f₂₂ ].
pub fn theorem1_bias_d2_diag(
    target: &dyn AnalyticTarget,
    x: &[f64],
    h1sq: f64,
    h2sq: f64,
) -> Result<f64> {
    if target.dim() != 2 {
        return Err(Error::Domain("this closed form needs d = 2".into()));
    }
    let f = target.density(x);
    let g = target.gradient(x);
    let hess = target.hessian(x);
    Ok(0.5
        * ((h1sq + h2sq) * f
            + 3.0 * (h1sq * x[0] * g[0] + h2sq * x[1] * g[1])
            + h1sq * x[0] * x[0] * hess.get(0, 0)
            + h2sq * x[1] * x[1] * hess.get(1, 1)))
}

/// Leading pointwise variance: n⁻¹ |H|^{−1/2} R(K) π(x)⁻¹ f(x).
pub fn theorem1_variance_prediction(
    target: &dyn AnalyticTarget,
    x: &[f64],
    h: &SymMat<f64>,
    n: usize,
) -> Result<f64> {
    let d = target.dim();
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("prediction point must lie in (0, ∞)ᵈ".into()));
    }
    let det = h.determinant()?;
    let pi: f64 = x.iter().product();
    Ok(gaussian_roughness::<f64>(d) * target.density(x) / (n as f64 * det.sqrt() * pi))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloMoments {
    pub bias: f64,
    pub variance: f64,
    pub bias_se: f64,
    pub variance_se: f64,
    pub replicates: usize,
}

/// Monte Carlo bias and variance of f̂_X(x; H) over independent samples of
/// size n, with the transformation offset fixed at the true support edge.
pub fn monte_carlo_bias_variance(
    target: &(impl AnalyticTarget + ?Sized),
    x: &[f64],
    h: &SymMat<f64>,
    n: usize,
    replicates: usize,
    stream: RngStream,
) -> Result<MonteCarloMoments> {
    if replicates < 100 {
        return Err(Error::Config("need at least 100 replicates".into()));
    }
    let d = target.dim();
    let estimates: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let data = target.sample(n, stream.substream(rep as u64));
            let t = LogTransform::new(vec![0.0; d]).expect("zero offset");
            let model = KdeModel::fit_transformation(data, t, h.clone())
                .expect("fixed bandwidth is positive definite");
            model.eval_point(x)
        })
        .collect();
    let r = replicates as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let var = estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let truth = target.density(x);
    Ok(MonteCarloMoments {
        bias: mean - truth,
        variance: var,
        bias_se: (var / r).sqrt(),
        variance_se: var * (2.0 / (r - 1.0)).sqrt(),
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateEstimator {
    /// Transformation KDE with the plug-in bandwidth.
    TransKdePi,
    /// Histogram with the normal-scale binwidth.
    Histogram,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub estimator: RateEstimator,
    pub per_n: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Average ISE against the analytic target per sample size, and the
/// least-squares slope of log ISE on log n.
pub fn mise_rate_check(
    target: &(impl AnalyticTarget + Sync + ?Sized),
    sample_sizes: &[usize],
    estimator: RateEstimator,
    replicates: usize,
    stream: RngStream,
) -> Result<RateReport> {
    if sample_sizes.len() < 4 {
        return Err(Error::Config("need at least 4 sample sizes".into()));
    }
    if sample_sizes.iter().any(|&n| n < 500) {
        return Err(Error::Config("rate checks need n >= 500".into()));
    }
    let d = target.dim();
    if d != 1 {
        return Err(Error::Config("rate checks are univariate".into()));
    }
    // ISE window: essentially the whole lognormal support; both the target
    // and the estimates are negligible outside.
    let grid = DensityGrid::log_spaced(&[0.020], &[40.0], &[0.0], 600)?;

    let mut per_n = Vec::with_capacity(sample_sizes.len());
    for (k, &n) in sample_sizes.iter().enumerate() {
        let ises: Vec<f64> = (0..replicates)
            .into_par_iter()
            .map(|rep| {
                let sub = stream.substream((k * replicates + rep) as u64);
                let data = target.sample(n, sub);
                let fitted: Box<dyn Density> = match estimator {
                    RateEstimator::TransKdePi => {
                        let t = LogTransform::new(vec![0.0]).unwrap();
                        let y = data.transformed(&t).unwrap();
                        let sel = pi_select(&y).unwrap();
                        Box::new(KdeModel::fit_transformation(data, t, sel.h).unwrap())
                    }
                    RateEstimator::Histogram => Box::new(HistogramModel::fit_ns(&data).unwrap()),
                };
                let mut ise = 0.0;
                for flat in 0..grid.len() {
                    let x = grid.point(flat);
                    let diff = fitted.eval(&x) - target.density(&x);
                    ise += diff * diff * grid.weight(flat);
                }
                ise
            })
            .collect();
        per_n.push((n, ises.iter().sum::<f64>() / replicates as f64));
    }

    // log-log least squares
    let pts: Vec<(f64, f64)> = per_n
        .iter()
        .map(|&(n, ise)| ((n as f64).ln(), ise.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateReport {
        estimator,
        per_n,
        slope,
        intercept,
        r2,
    })
}
