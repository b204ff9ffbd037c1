//! Bivariate max-stable families through their Pickands dependence
//! functions, with GEV margins: density, CDF, joint maximum-likelihood
//! fitting and tail restrictions.

use serde::{Deserialize, Serialize};

use super::{norm_cdf, norm_pdf};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kde::Density;
use crate::optimize::{nelder_mead, NmOptions};

const XI_ZERO_EPS: f64 = 1e-8;
/// Clamp for log unit-Fréchet values so t = 1/z never over/underflows.
const LOG_Z_CLAMP: f64 = 690.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BivFamilyKind {
    Bilogistic,
    Anl,
    HuslerReiss,
}

impl BivFamilyKind {
    pub fn label(&self) -> &'static str {
        match self {
            BivFamilyKind::Bilogistic => "bil",
            BivFamilyKind::Anl => "anl",
            BivFamilyKind::HuslerReiss => "hr",
        }
    }
}

/// Dependence structure of a bivariate extreme-value distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BivFamily {
    /// Bilogistic with parameters α, β ∈ (0, 1).
    Bilogistic { alpha: f64, beta: f64 },
    /// Asymmetric negative logistic: dependence r > 0 and asymmetry
    /// coefficients in (0, 1]; a zero coefficient degenerates to
    /// independence.
    Anl { dep: f64, asy: (f64, f64) },
    /// Hüsler-Reiss with λ > 0 (λ → 0 complete dependence, λ → ∞
    /// independence).
    HuslerReiss { lambda: f64 },
}

impl BivFamily {
    pub fn kind(&self) -> BivFamilyKind {
        match self {
            BivFamily::Bilogistic { .. } => BivFamilyKind::Bilogistic,
            BivFamily::Anl { .. } => BivFamilyKind::Anl,
            BivFamily::HuslerReiss { .. } => BivFamilyKind::HuslerReiss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BivFamily::Bilogistic { alpha, beta } => {
                (0.0..1.0).contains(&alpha) && (0.0..1.0).contains(&beta) && alpha > 0.0 && beta > 0.0
            }
            BivFamily::Anl { dep, asy } => {
                dep > 0.0 && (0.0..=1.0).contains(&asy.0) && (0.0..=1.0).contains(&asy.1)
            }
            BivFamily::HuslerReiss { lambda } => lambda > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid dependence parameters: {self:?}")))
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            BivFamily::Bilogistic { alpha, beta } => vec![("alpha", alpha), ("beta", beta)],
            BivFamily::Anl { dep, asy } => {
                vec![("dep", dep), ("asy1", asy.0), ("asy2", asy.1)]
            }
            BivFamily::HuslerReiss { lambda } => vec![("lambda", lambda)],
        }
    }
}

/// Root of the bilogistic equation (1−α)·w·(1−γ)^β = (1−β)·(1−w)·γ^α on
/// (0, 1), monotone in γ; safeguarded bisection to 1e-12.
fn bilogistic_root(alpha: f64, beta: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return 1.0;
    }
    let lhs_const = (1.0 - alpha).ln() + w.ln();
    let rhs_const = (1.0 - beta).ln() + (1.0 - w).ln();
    // g(γ) = lhs + β·ln(1−γ) − rhs − α·ln γ, strictly decreasing.
    let g = |gamma: f64| lhs_const + beta * (1.0 - gamma).ln() - rhs_const - alpha * gamma.ln();
    let mut lo = 1e-300;
    let mut hi = 1.0 - 1e-16;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Pickands dependence function A(w) on [0, 1].
pub fn pickands(family: &BivFamily, w: f64) -> Result<f64> {
    pickands_derivs(family, w).map(|(a, _, _)| a)
}

/// A(w) with its first two derivatives. The derivatives drive the density
/// (V₁, V₂ and V₁₂ are built from them analytically).
pub fn pickands_derivs(family: &BivFamily, w: f64) -> Result<(f64, f64, f64)> {
    family.validate()?;
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("Pickands argument {w} outside [0, 1]")));
    }
    if w == 0.0 || w == 1.0 {
        return Ok((1.0, 0.0, 0.0));
    }
    match *family {
        BivFamily::Anl { dep: r, asy } => {
            let (t1, t2) = asy;
            if t1 == 0.0 || t2 == 0.0 {
                // independence limit
                return Ok((1.0, 0.0, 0.0));
            }
            // Work in logs: the power terms overflow long before w reaches
            // the endpoints, where A and A' stay perfectly finite.
            let lw = w.ln();
            let l1w = (1.0 - w).ln();
            let la = -r * (t1.ln() + l1w); // ln[(θ₁(1−w))^{−r}]
            let lb = -r * (t2.ln() + lw); // ln[(θ₂w)^{−r}]
            let m = la.max(lb);
            let ls = m + ((la - m).exp() + (lb - m).exp()).ln();
            let a = 1.0 - (-ls / r).exp();
            let lp = -(1.0 + 1.0 / r) * ls; // ln S^{−1/r−1}
            let da = (la - l1w + lp).exp() - (lb - lw + lp).exp();
            let mut dda = (r + 1.0)
                * ((la - 2.0 * l1w + lp).exp() + (lb - 2.0 * lw + lp).exp())
                - (1.0 + 1.0 / r)
                    * ((la - l1w + lp).exp() - (lb - lw + lp).exp())
                    * ((la - l1w - ls).exp() - (lb - lw - ls).exp())
                    * r;
            if !dda.is_finite() {
                // limiting A'' at the extremes; the density bracket carries a
                // w(1−w) factor that vanishes there anyway
                dda = 0.0;
            }
            Ok((a, da, dda))
        }
        BivFamily::HuslerReiss { lambda } => {
            let lr = (w / (1.0 - w)).ln() / (2.0 * lambda);
            let z = lambda + lr;
            let zbar = lambda - lr;
            let a = w * norm_cdf(z) + (1.0 - w) * norm_cdf(zbar);
            // w·φ(z) = (1−w)·φ(z̄), which collapses the derivative.
            let da = norm_cdf(z) - norm_cdf(zbar);
            let dda = (norm_pdf(z) + norm_pdf(zbar)) / (2.0 * lambda * w * (1.0 - w));
            Ok((a, da, dda))
        }
        BivFamily::Bilogistic { alpha, beta } => {
            let gamma = bilogistic_root(alpha, beta, w);
            let gp = gamma.powf(1.0 - alpha);
            let omgp = (1.0 - gamma).powf(1.0 - beta);
            let a = w * gp + (1.0 - w) * omgp;
            // The implicit-root terms cancel in A′ (envelope identity).
            let da = gp - omgp;
            let num = (1.0 - alpha) * (1.0 - gamma).powf(beta) + (1.0 - beta) * gamma.powf(alpha);
            let den = beta * (1.0 - alpha) * w * (1.0 - gamma).powf(beta - 1.0)
                + alpha * (1.0 - beta) * (1.0 - w) * gamma.powf(alpha - 1.0);
            let dgamma = num / den;
            let dda =
                ((1.0 - alpha) * gamma.powf(-alpha) + (1.0 - beta) * (1.0 - gamma).powf(-beta))
                    * dgamma;
            Ok((a, da, dda))
        }
    }
}

/// A GEV margin (μ, σ, ξ); ξ = 0 is the Gumbel margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevMargin {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevMargin {
    pub fn unit_frechet() -> Self {
        Self {
            mu: 1.0,
            sigma: 1.0,
            xi: 1.0,
        }
    }

    /// log z(x), the log of the unit-Fréchet transform; None outside the
    /// margin support.
    pub fn log_z(&self, x: f64) -> Option<f64> {
        let s = (x - self.mu) / self.sigma;
        if self.xi.abs() < XI_ZERO_EPS {
            Some(s.clamp(-LOG_Z_CLAMP, LOG_Z_CLAMP))
        } else {
            let t = 1.0 + self.xi * s;
            if t <= 0.0 {
                None
            } else {
                Some((t.ln() / self.xi).clamp(-LOG_Z_CLAMP, LOG_Z_CLAMP))
            }
        }
    }

    /// log of dz/dx = z^{1−ξ}/σ.
    pub fn log_dz_dx(&self, log_z: f64) -> f64 {
        (1.0 - self.xi) * log_z - self.sigma.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.log_z(x) {
            None => {
                if self.xi > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Some(lz) => (-(-lz).exp()).exp(),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} not in (0, 1)")));
        }
        let z = -1.0 / p.ln();
        Ok(self.from_unit_frechet(z))
    }

    /// Maps a unit-Fréchet value back to the margin scale.
    pub fn from_unit_frechet(&self, z: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            self.mu + self.sigma * z.ln()
        } else {
            self.mu + self.sigma * (z.powf(self.xi) - 1.0) / self.xi
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self.log_z(x) {
            None => 0.0,
            Some(lz) => {
                // unit Fréchet density z⁻²e^{−1/z} transported through z(x)
                let t = (-lz).exp();
                let log_pdf = -t - 2.0 * lz + self.log_dz_dx(lz);
                log_pdf.exp()
            }
        }
    }
}

/// Pieces of the exponent measure at a pair of unit-Fréchet points:
/// V, the partials V₁·(−z₁²) = m₁ and V₂·(−z₂²) = m₂, and the bracket
/// entering the density.
struct ExponentPieces {
    v: f64,
    m1: f64,
    /// log of t₁²t₂²[(m₁m₂ + w(1−w)A″/s)]
    log_intensity: f64,
}

fn exponent_pieces(family: &BivFamily, log_z1: f64, log_z2: f64) -> Result<ExponentPieces> {
    let t1 = (-log_z1).exp();
    let t2 = (-log_z2).exp();
    let s = t1 + t2;
    let w = t2 / s;
    let (a, da, dda) = pickands_derivs(family, w)?;
    let v = s * a;
    let m1 = a - w * da;
    let m2 = a + (1.0 - w) * da;
    let bracket = m1 * m2 + w * (1.0 - w) * dda / s;
    let log_intensity = if bracket > 0.0 {
        -2.0 * log_z1 - 2.0 * log_z2 + bracket.ln()
    } else {
        f64::NEG_INFINITY
    };
    Ok(ExponentPieces {
        v,
        m1,
        log_intensity,
    })
}

/// Conditional probability P(Z₂ ≤ z₂ | Z₁ = z₁) on the unit-Fréchet scale,
/// from t = 1/z coordinates: exp(t₁ − V)·(A − wA′).
pub(crate) fn copula_conditional(family: &BivFamily, t1: f64, t2: f64) -> f64 {
    let s = t1 + t2;
    let w = t2 / s;
    let (a, da, _) = pickands_derivs(family, w).unwrap_or((1.0, 0.0, 0.0));
    let v = s * a;
    ((t1 - v).exp() * (a - w * da)).clamp(0.0, 1.0)
}

/// A fitted (or specified) bivariate extreme-value model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BivariateEvdFit {
    pub family: BivFamily,
    pub margins: [GevMargin; 2],
    pub loglik: f64,
    pub converged: bool,
}

impl BivariateEvdFit {
    pub fn from_spec(family: BivFamily, margins: [GevMargin; 2]) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            margins,
            loglik: f64::NAN,
            converged: true,
        })
    }
}

/// Joint CDF F(x₁, x₂) = exp(−V(z₁, z₂)) through the GEV margins.
pub fn bivariate_cdf(fit: &BivariateEvdFit, x: &[f64]) -> f64 {
    let lz1 = fit.margins[0].log_z(x[0]);
    let lz2 = fit.margins[1].log_z(x[1]);
    match (lz1, lz2) {
        (Some(a), Some(b)) => {
            let t1 = (-a).exp();
            let t2 = (-b).exp();
            let s = t1 + t2;
            let w = t2 / s;
            let av = pickands(&fit.family, w).unwrap_or(1.0);
            (-s * av).exp()
        }
        // Below a ξ>0 margin support the CDF vanishes; above a ξ<0 one it
        // saturates at the other margin.
        (None, _) if fit.margins[0].xi > 0.0 => 0.0,
        (_, None) if fit.margins[1].xi > 0.0 => 0.0,
        (None, Some(_)) => fit.margins[1].cdf(x[1]),
        (Some(_), None) => fit.margins[0].cdf(x[0]),
        (None, None) => {
            if fit.margins[0].xi > 0.0 || fit.margins[1].xi > 0.0 {
                0.0
            } else {
                1.0
            }
        }
    }
}

fn log_density(fit: &BivariateEvdFit, x: &[f64]) -> f64 {
    let (lz1, lz2) = match (fit.margins[0].log_z(x[0]), fit.margins[1].log_z(x[1])) {
        (Some(a), Some(b)) => (a, b),
        _ => return f64::NEG_INFINITY,
    };
    match exponent_pieces(&fit.family, lz1, lz2) {
        Ok(p) => {
            -p.v + p.log_intensity
                + fit.margins[0].log_dz_dx(lz1)
                + fit.margins[1].log_dz_dx(lz2)
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Joint density f(x₁, x₂) = ∂²/∂x₁∂x₂ exp(−V), assembled from A, A′, A″.
pub fn bivariate_density(fit: &BivariateEvdFit, x: &[f64]) -> f64 {
    let l = log_density(fit, x);
    if l.is_finite() {
        l.exp()
    } else {
        0.0
    }
}

pub fn bivariate_loglik(fit: &BivariateEvdFit, data: &DataMatrix) -> f64 {
    data.rows().map(|row| log_density(fit, row)).sum()
}

impl Density for BivariateEvdFit {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> f64 {
        bivariate_density(self, x)
    }
}

fn sigmoid(p: f64) -> f64 {
    1.0 / (1.0 + (-p).exp())
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn family_from_params(kind: BivFamilyKind, p: &[f64]) -> BivFamily {
    match kind {
        BivFamilyKind::Bilogistic => BivFamily::Bilogistic {
            alpha: sigmoid(p[0]).clamp(1e-6, 1.0 - 1e-6),
            beta: sigmoid(p[1]).clamp(1e-6, 1.0 - 1e-6),
        },
        BivFamilyKind::Anl => BivFamily::Anl {
            dep: p[0].exp(),
            asy: (
                sigmoid(p[1]).clamp(1e-6, 1.0),
                sigmoid(p[2]).clamp(1e-6, 1.0),
            ),
        },
        BivFamilyKind::HuslerReiss => BivFamily::HuslerReiss { lambda: p[0].exp() },
    }
}

fn dependence_params(family: &BivFamily) -> Vec<f64> {
    match *family {
        BivFamily::Bilogistic { alpha, beta } => vec![logit(alpha), logit(beta)],
        BivFamily::Anl { dep, asy } => vec![dep.ln(), logit(asy.0.min(1.0 - 1e-9)), logit(asy.1.min(1.0 - 1e-9))],
        BivFamily::HuslerReiss { lambda } => vec![lambda.ln()],
    }
}

/// Joint MLE over both GEV margins and the dependence parameters, with
/// three starts (marginal fits plus weak/medium/strong dependence).
pub fn fit_bivariate(data: &DataMatrix, kind: BivFamilyKind) -> Result<BivariateEvdFit> {
    if data.dim() != 2 {
        return Err(Error::InvalidData("bivariate fits need d = 2".into()));
    }
    if data.n() < 50 {
        return Err(Error::InvalidData(format!(
            "bivariate fits need n >= 50, got {}",
            data.n()
        )));
    }

    // Marginal GEV fits give feasible, near-optimal margin starts.
    let m1 = super::univariate::fit_univariate(
        &DataMatrix::from_column(data.column(0))?,
        super::univariate::UniFamily::Gev,
        None,
    )?;
    let m2 = super::univariate::fit_univariate(
        &DataMatrix::from_column(data.column(1))?,
        super::univariate::UniFamily::Gev,
        None,
    )?;
    let margin_start = [
        GevMargin {
            mu: m1.mu,
            sigma: m1.sigma,
            xi: m1.xi.unwrap_or(0.1),
        },
        GevMargin {
            mu: m2.mu,
            sigma: m2.sigma,
            xi: m2.xi.unwrap_or(0.1),
        },
    ];

    let dep_starts: Vec<BivFamily> = match kind {
        BivFamilyKind::Bilogistic => vec![
            BivFamily::Bilogistic { alpha: 0.9, beta: 0.9 },
            BivFamily::Bilogistic { alpha: 0.55, beta: 0.55 },
            BivFamily::Bilogistic { alpha: 0.25, beta: 0.25 },
        ],
        BivFamilyKind::Anl => vec![
            BivFamily::Anl { dep: 0.7, asy: (0.5, 0.5) },
            BivFamily::Anl { dep: 1.5, asy: (0.6, 0.6) },
            BivFamily::Anl { dep: 3.0, asy: (0.8, 0.8) },
        ],
        BivFamilyKind::HuslerReiss => vec![
            BivFamily::HuslerReiss { lambda: 1.2 },
            BivFamily::HuslerReiss { lambda: 0.55 },
            BivFamily::HuslerReiss { lambda: 0.25 },
        ],
    };

    let nll = |p: &[f64]| {
        let margins = [
            GevMargin {
                mu: p[0],
                sigma: p[1].exp(),
                xi: p[2],
            },
            GevMargin {
                mu: p[3],
                sigma: p[4].exp(),
                xi: p[5],
            },
        ];
        let family = family_from_params(kind, &p[6..]);
        if family.validate().is_err() {
            return f64::INFINITY;
        }
        let fit = BivariateEvdFit {
            family,
            margins,
            loglik: 0.0,
            converged: false,
        };
        let ll = bivariate_loglik(&fit, data);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for dep in &dep_starts {
        let mut start = vec![
            margin_start[0].mu,
            margin_start[0].sigma.ln(),
            margin_start[0].xi,
            margin_start[1].mu,
            margin_start[1].sigma.ln(),
            margin_start[1].xi,
        ];
        start.extend(dependence_params(dep));
        if !nll(&start).is_finite() {
            continue;
        }
        let opts = NmOptions {
            max_iter: 400 * start.len(),
            tol: 1e-9,
            step: 0.15,
        };
        if let Ok(res) = nelder_mead(nll, &start, &opts) {
            let cand = (res.x, -res.value, res.converged);
            if best.as_ref().is_none_or(|b| cand.1 > b.1) {
                best = Some(cand);
            }
        }
    }
    let (p, loglik, converged) = best.ok_or_else(|| {
        Error::NonConvergence("no bivariate start produced a finite likelihood".into())
    })?;
    Ok(BivariateEvdFit {
        family: family_from_params(kind, &p[6..]),
        margins: [
            GevMargin {
                mu: p[0],
                sigma: p[1].exp(),
                xi: p[2],
            },
            GevMargin {
                mu: p[3],
                sigma: p[4].exp(),
                xi: p[5],
            },
        ],
        loglik,
        converged,
    })
}

/// A fitted bivariate model restricted to (u, ∞)² and renormalized by its
/// closed-form joint survival.
pub struct BivTailDensity {
    pub fit: BivariateEvdFit,
    pub u: [f64; 2],
    surv: f64,
}

impl BivTailDensity {
    pub fn new(fit: BivariateEvdFit, u: [f64; 2]) -> Result<Self> {
        // P(X₁>u₁, X₂>u₂) = 1 − F₁(u₁) − F₂(u₂) + F(u₁, u₂)
        let f1 = fit.margins[0].cdf(u[0]);
        let f2 = fit.margins[1].cdf(u[1]);
        let joint = bivariate_cdf(&fit, &u);
        let surv = (1.0 - f1 - f2 + joint).max(0.0);
        if !(surv > 1e-12) {
            return Err(Error::InvalidData(format!(
                "fitted bivariate model has no mass above u = {u:?}"
            )));
        }
        Ok(Self { fit, u, surv })
    }

    pub fn survival_at_threshold(&self) -> f64 {
        self.surv
    }
}

impl Density for BivTailDensity {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, x: &[f64]) -> f64 {
        if x[0] <= self.u[0] || x[1] <= self.u[1] {
            return 0.0;
        }
        bivariate_density(&self.fit, x) / self.surv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<BivFamily> {
        vec![
            BivFamily::Bilogistic { alpha: 0.8, beta: 0.52 },
            BivFamily::Anl { dep: 1.3, asy: (0.2, 0.7) },
            BivFamily::HuslerReiss { lambda: 1.0 / 2.4 },
            BivFamily::HuslerReiss { lambda: 2.4 },
        ]
    }

    #[test]
    fn pickands_endpoint_conditions() {
        for fam in families() {
            assert_eq!(pickands(&fam, 0.0).unwrap(), 1.0);
            assert_eq!(pickands(&fam, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn anl_zero_asymmetry_is_independence() {
        for fam in [
            BivFamily::Anl { dep: 1.3, asy: (0.0, 0.7) },
            BivFamily::Anl { dep: 2.0, asy: (0.4, 0.0) },
        ] {
            for k in 1..20 {
                let w = k as f64 / 20.0;
                assert_eq!(pickands(&fam, w).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn pickands_bounds_and_convexity() {
        for fam in families() {
            let m = 1000;
            let a: Vec<f64> = (0..=m)
                .map(|k| pickands(&fam, k as f64 / m as f64).unwrap())
                .collect();
            for (k, &v) in a.iter().enumerate() {
                let w = k as f64 / m as f64;
                assert!(v <= 1.0 + 1e-12, "{fam:?} A({w}) = {v}");
                assert!(v >= w.max(1.0 - w) - 1e-12, "{fam:?} A({w}) = {v}");
            }
            for k in 1..m {
                let second = a[k + 1] - 2.0 * a[k] + a[k - 1];
                assert!(second >= -1e-9, "{fam:?} second difference {second} at {k}");
            }
        }
    }

    #[test]
    fn pickands_derivatives_match_finite_differences() {
        for fam in families() {
            for &w in &[0.11, 0.37, 0.5, 0.62, 0.93] {
                let (_, da, dda) = pickands_derivs(&fam, w).unwrap();
                let h = 1e-5;
                let ap = pickands(&fam, w + h).unwrap();
                let am = pickands(&fam, w - h).unwrap();
                let a0 = pickands(&fam, w).unwrap();
                let fd1 = (ap - am) / (2.0 * h);
                let fd2 = (ap - 2.0 * a0 + am) / (h * h);
                assert!((da - fd1).abs() < 1e-6, "{fam:?} A' at {w}: {da} vs {fd1}");
                assert!(
                    (dda - fd2).abs() < 1e-3 * dda.abs().max(1.0),
                    "{fam:?} A'' at {w}: {dda} vs {fd2}"
                );
            }
        }
    }

    fn frozen_points() -> Vec<[f64; 2]> {
        // interior points of the unit-Fréchet support, spread over the bulk
        let mut pts = Vec::new();
        for i in 1..=10 {
            for j in 1..=10 {
                pts.push([0.4 + 0.9 * i as f64, 0.4 + 1.1 * j as f64]);
            }
        }
        pts
    }

    #[test]
    fn density_matches_cdf_finite_differences() {
        for fam in families().into_iter().take(3) {
            let fit =
                BivariateEvdFit::from_spec(fam, [GevMargin::unit_frechet(); 2]).unwrap();
            for x in frozen_points() {
                let f = bivariate_density(&fit, &x);
                let h1 = 1e-4 * x[0].max(1.0);
                let h2 = 1e-4 * x[1].max(1.0);
                let cdf = |a: f64, b: f64| bivariate_cdf(&fit, &[a, b]);
                let fd = (cdf(x[0] + h1, x[1] + h2) - cdf(x[0] + h1, x[1] - h2)
                    - cdf(x[0] - h1, x[1] + h2)
                    + cdf(x[0] - h1, x[1] - h2))
                    / (4.0 * h1 * h2);
                let denom = f.abs().max(1e-6);
                assert!(
                    (f - fd).abs() / denom < 1e-4,
                    "{fam:?} at {x:?}: density {f} vs fd {fd}",
                    fam = fit.family
                );
            }
        }
    }

    #[test]
    fn density_total_mass() {
        // Lighter margins keep the quadrature box compact.
        let margins = [GevMargin { mu: 0.0, sigma: 1.0, xi: 0.1 }; 2];
        for fam in families().into_iter().take(3) {
            let fit = BivariateEvdFit::from_spec(fam, margins).unwrap();
            let grid = crate::grid::DensityGrid::uniform(
                &[-6.0, -6.0],
                &[35.0, 35.0],
                701,
            )
            .unwrap();
            let mut total = 0.0;
            for flat in 0..grid.len() {
                total += bivariate_density(&fit, &grid.point(flat)) * grid.weight(flat);
            }
            assert!((total - 1.0).abs() < 5e-3, "{:?} mass {total}", fit.family);
        }
    }

    #[test]
    fn independence_factorizes() {
        let fit = BivariateEvdFit::from_spec(
            BivFamily::Anl { dep: 1.7, asy: (0.0, 0.5) },
            [GevMargin::unit_frechet(), GevMargin { mu: 0.5, sigma: 2.0, xi: 0.3 }],
        )
        .unwrap();
        for x in frozen_points() {
            let joint = bivariate_density(&fit, &x);
            let product = fit.margins[0].pdf(x[0]) * fit.margins[1].pdf(x[1]);
            assert!(
                (joint - product).abs() <= 1e-10 * product.max(1e-12),
                "at {x:?}: {joint} vs {product}"
            );
        }
    }

    #[test]
    fn gev_margin_pdf_is_cdf_derivative() {
        let margins = [
            GevMargin::unit_frechet(),
            GevMargin { mu: 0.3, sigma: 1.7, xi: -0.2 },
            GevMargin { mu: -1.0, sigma: 0.8, xi: 0.0 },
        ];
        for m in margins {
            for &x in &[0.5, 1.1, 2.7, 6.3] {
                if m.log_z(x).is_none() {
                    continue;
                }
                let h = 1e-5 * x.abs().max(1.0);
                let fd = (m.cdf(x + h) - m.cdf(x - h)) / (2.0 * h);
                let pdf = m.pdf(x);
                assert!(
                    (pdf - fd).abs() <= 1e-5 * fd.abs().max(1e-8),
                    "margin {m:?} at {x}: {pdf} vs {fd}"
                );
            }
        }
    }
}
