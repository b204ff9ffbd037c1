//! Univariate extreme-value families and their maximum-likelihood fits.

use serde::{Deserialize, Serialize};

use super::chi2_1_sf;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kde::Density;
use crate::optimize::{nelder_mead, NmOptions};

const XI_ZERO_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UniFamily {
    Gumbel,
    Frechet,
    Gev,
    Gpd,
}

impl UniFamily {
    pub fn label(&self) -> &'static str {
        match self {
            UniFamily::Gumbel => "gumbel",
            UniFamily::Frechet => "frechet",
            UniFamily::Gev => "gev",
            UniFamily::Gpd => "gpd",
        }
    }
}

/// A fitted univariate extreme-value model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnivariateEvtFit {
    pub family: UniFamily,
    pub mu: f64,
    pub sigma: f64,
    /// Shape; absent for the Gumbel family.
    pub xi: Option<f64>,
    pub loglik: f64,
    pub converged: bool,
}

// Log-densities. Out-of-support points yield −∞ so the optimizer walks back
// inside rather than erroring mid-search.

pub(crate) fn gumbel_logpdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = (x - mu) / sigma;
    -sigma.ln() - z - (-z).exp()
}

pub(crate) fn frechet_logpdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    if sigma <= 0.0 || xi <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let w = (x - mu) / sigma;
    if w <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let inv_xi = 1.0 / xi;
    -sigma.ln() - xi.ln() - (inv_xi + 1.0) * w.ln() - w.powf(-inv_xi)
}

pub(crate) fn gev_logpdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = (x - mu) / sigma;
    if xi.abs() < XI_ZERO_EPS {
        return gumbel_logpdf(x, mu, sigma);
    }
    let t = 1.0 + xi * z;
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let inv_xi = 1.0 / xi;
    -sigma.ln() - (1.0 + inv_xi) * t.ln() - t.powf(-inv_xi)
}

pub(crate) fn gpd_logpdf(x: f64, mu: f64, sigma: f64, xi: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let y = (x - mu) / sigma;
    if y < 0.0 {
        return f64::NEG_INFINITY;
    }
    if xi.abs() < XI_ZERO_EPS {
        return -sigma.ln() - y;
    }
    let t = 1.0 + xi * y;
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -sigma.ln() - (1.0 + 1.0 / xi) * t.ln()
}

impl UnivariateEvtFit {
    pub fn logpdf(&self, x: f64) -> f64 {
        match self.family {
            UniFamily::Gumbel => gumbel_logpdf(x, self.mu, self.sigma),
            UniFamily::Frechet => frechet_logpdf(x, self.mu, self.sigma, self.xi.unwrap_or(1.0)),
            UniFamily::Gev => gev_logpdf(x, self.mu, self.sigma, self.xi.unwrap_or(0.0)),
            UniFamily::Gpd => gpd_logpdf(x, self.mu, self.sigma, self.xi.unwrap_or(0.0)),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let l = self.logpdf(x);
        if l.is_finite() {
            l.exp()
        } else {
            0.0
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (mu, sigma) = (self.mu, self.sigma);
        match self.family {
            UniFamily::Gumbel => (-(-(x - mu) / sigma).exp()).exp(),
            UniFamily::Frechet => {
                let xi = self.xi.unwrap();
                let w = (x - mu) / sigma;
                if w <= 0.0 {
                    0.0
                } else {
                    (-w.powf(-1.0 / xi)).exp()
                }
            }
            UniFamily::Gev => {
                let xi = self.xi.unwrap_or(0.0);
                if xi.abs() < XI_ZERO_EPS {
                    return (-(-(x - mu) / sigma).exp()).exp();
                }
                let t = 1.0 + xi * (x - mu) / sigma;
                if t <= 0.0 {
                    if xi > 0.0 {
                        0.0
                    } else {
                        1.0
                    }
                } else {
                    (-t.powf(-1.0 / xi)).exp()
                }
            }
            UniFamily::Gpd => {
                let xi = self.xi.unwrap_or(0.0);
                let y = (x - mu) / sigma;
                if y <= 0.0 {
                    return 0.0;
                }
                if xi.abs() < XI_ZERO_EPS {
                    1.0 - (-y).exp()
                } else {
                    let t = 1.0 + xi * y;
                    if t <= 0.0 {
                        1.0
                    } else {
                        1.0 - t.powf(-1.0 / xi)
                    }
                }
            }
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        (1.0 - self.cdf(x)).max(0.0)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} not in (0, 1)")));
        }
        let (mu, sigma) = (self.mu, self.sigma);
        Ok(match self.family {
            UniFamily::Gumbel => mu - sigma * (-p.ln()).ln(),
            UniFamily::Frechet => mu + sigma * (-p.ln()).powf(-self.xi.unwrap()),
            UniFamily::Gev => {
                let xi = self.xi.unwrap_or(0.0);
                if xi.abs() < XI_ZERO_EPS {
                    mu - sigma * (-p.ln()).ln()
                } else {
                    mu + sigma * ((-p.ln()).powf(-xi) - 1.0) / xi
                }
            }
            UniFamily::Gpd => {
                let xi = self.xi.unwrap_or(0.0);
                if xi.abs() < XI_ZERO_EPS {
                    mu - sigma * (1.0 - p).ln()
                } else {
                    mu + sigma * ((1.0 - p).powf(-xi) - 1.0) / xi
                }
            }
        })
    }
}

fn check_fittable(data: &DataMatrix, min_n: usize) -> Result<Vec<f64>> {
    if data.dim() != 1 {
        return Err(Error::InvalidData("univariate fits need d = 1".into()));
    }
    if data.n() < min_n {
        return Err(Error::InvalidData(format!(
            "need at least {min_n} observations, got {}",
            data.n()
        )));
    }
    let col = data.column(0);
    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return Err(Error::InvalidData(
            "degenerate sample (single repeated value)".into(),
        ));
    }
    Ok(col)
}

fn moments(col: &[f64]) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn run_mle(
    objective: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    max_iter: usize,
) -> Result<(Vec<f64>, f64, bool)> {
    let opts = NmOptions {
        max_iter,
        tol: 1e-10,
        step: 0.2,
    };
    let res = nelder_mead(objective, start, &opts)?;
    Ok((res.x, -res.value, res.converged))
}

fn fit_gumbel(col: &[f64]) -> Result<UnivariateEvtFit> {
    let (mean, var) = moments(col);
    let sigma0 = (var.sqrt() * 6f64.sqrt() / std::f64::consts::PI).max(1e-8);
    let mu0 = mean - 0.5772156649 * sigma0;
    let nll = |p: &[f64]| {
        let (mu, sigma) = (p[0], p[1].exp());
        -col.iter().map(|&x| gumbel_logpdf(x, mu, sigma)).sum::<f64>()
    };
    let (p, loglik, converged) = run_mle(nll, &[mu0, sigma0.ln()], 400)?;
    Ok(UnivariateEvtFit {
        family: UniFamily::Gumbel,
        mu: p[0],
        sigma: p[1].exp(),
        xi: None,
        loglik,
        converged,
    })
}

/// Quantile-matching GEV starts for a given shape guess.
fn gev_start_for_xi(sorted: &[f64], xi: f64) -> (f64, f64) {
    let q50 = sorted_quantile(sorted, 0.5);
    let q75 = sorted_quantile(sorted, 0.75);
    let (l50, l75) = ((-0.5f64.ln()) as f64, -(0.75f64.ln()));
    if xi.abs() < 1e-6 {
        let sigma = ((q75 - q50) / (l50.ln() - l75.ln()).abs()).max(1e-8);
        (q50 + sigma * l50.ln(), sigma)
    } else {
        let denom = l75.powf(-xi) - l50.powf(-xi);
        let sigma = (xi * (q75 - q50) / denom).abs().max(1e-8);
        let mu = q50 - sigma * (l50.powf(-xi) - 1.0) / xi;
        (mu, sigma)
    }
}

fn fit_gev(col: &[f64]) -> Result<UnivariateEvtFit> {
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nll = |p: &[f64]| {
        let (mu, sigma, xi) = (p[0], p[1].exp(), p[2]);
        -col.iter().map(|&x| gev_logpdf(x, mu, sigma, xi)).sum::<f64>()
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for &xi0 in &[0.05, 0.4, 1.0] {
        let (mu0, sigma0) = gev_start_for_xi(&sorted, xi0);
        // Widen the scale until every observation is inside the support.
        let mut start = [mu0, sigma0.ln(), xi0];
        let mut tries = 0;
        while !nll(&start).is_finite() && tries < 12 {
            start[1] += 0.5;
            start[2] *= 0.5;
            tries += 1;
        }
        if !nll(&start).is_finite() {
            continue;
        }
        if let Ok(r) = run_mle(nll, &start, 800) {
            if best.as_ref().is_none_or(|b| r.1 > b.1) {
                best = Some(r);
            }
        }
    }
    let (p, loglik, converged) =
        best.ok_or_else(|| Error::NonConvergence("GEV likelihood never evaluated".into()))?;
    Ok(UnivariateEvtFit {
        family: UniFamily::Gev,
        mu: p[0],
        sigma: p[1].exp(),
        xi: Some(p[2]),
        loglik,
        converged,
    })
}

fn fit_frechet(col: &[f64]) -> Result<UnivariateEvtFit> {
    let mut sorted = col.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min = sorted[0];
    let spread = (sorted[sorted.len() - 1] - min).max(1e-8);
    // Location reparameterized as μ = min − exp(θ) so the support constraint
    // μ < min holds for every iterate.
    let nll = |p: &[f64]| {
        let (mu, sigma, xi) = (min - p[0].exp(), p[1].exp(), p[2].exp());
        -col.iter()
            .map(|&x| frechet_logpdf(x, mu, sigma, xi))
            .sum::<f64>()
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for &(gap, xi0) in &[(0.3, 0.3), (1.0, 0.8), (0.05, 0.2)] {
        let start = [(gap * spread).ln(), (0.7 * spread).ln(), xi0f(xi0)];
        if let Ok(r) = run_mle(nll, &start, 800) {
            if best.as_ref().is_none_or(|b| r.1 > b.1) {
                best = Some(r);
            }
        }
    }
    let (p, loglik, converged) =
        best.ok_or_else(|| Error::NonConvergence("Frechet likelihood never evaluated".into()))?;
    Ok(UnivariateEvtFit {
        family: UniFamily::Frechet,
        mu: min - p[0].exp(),
        sigma: p[1].exp(),
        xi: Some(p[2].exp()),
        loglik,
        converged,
    })
}

fn xi0f(x: f64) -> f64 {
    x.ln()
}

fn fit_gpd_at(col: &[f64], mu: f64) -> Result<UnivariateEvtFit> {
    if col.iter().any(|&x| x < mu) {
        return Err(Error::InvalidData(format!(
            "GPD location {mu} exceeds some observations"
        )));
    }
    let shifted: Vec<f64> = col.iter().map(|&x| x - mu).collect();
    let (mean, var) = moments(&shifted);
    if !(var > 0.0) {
        return Err(Error::InvalidData("degenerate exceedances".into()));
    }
    let xi_mom = (0.5 * (1.0 - mean * mean / var)).clamp(-0.4, 0.9);
    let nll = |p: &[f64]| {
        let (sigma, xi) = (p[0].exp(), p[1]);
        -shifted
            .iter()
            .map(|&y| gpd_logpdf(y, 0.0, sigma, xi))
            .sum::<f64>()
    };
    // A negative moment-based shape can put the data outside the candidate
    // support; fall back towards the always-feasible exponential start.
    let mut start = None;
    for xi0 in [xi_mom, 0.5 * xi_mom, 0.1, 0.0] {
        let sigma0 = (mean * (1.0 - xi0.min(0.9))).max(1e-8);
        let cand = [sigma0.ln(), xi0];
        if nll(&cand).is_finite() {
            start = Some(cand);
            break;
        }
    }
    let start =
        start.ok_or_else(|| Error::NonConvergence("no feasible GPD starting point".into()))?;
    let (p, loglik, converged) = run_mle(nll, &start, 600)?;
    Ok(UnivariateEvtFit {
        family: UniFamily::Gpd,
        mu,
        sigma: p[0].exp(),
        xi: Some(p[1]),
        loglik,
        converged,
    })
}

/// Maximum-likelihood fit of a univariate family on the full sample.
///
/// `fixed_location` pins μ for the GPD family; without it, μ̂ is the sample
/// minimum (the boundary MLE for a support parameter).
pub fn fit_univariate(
    data: &DataMatrix,
    family: UniFamily,
    fixed_location: Option<f64>,
) -> Result<UnivariateEvtFit> {
    let col = check_fittable(data, 10)?;
    match family {
        UniFamily::Gumbel => fit_gumbel(&col),
        UniFamily::Gev => fit_gev(&col),
        UniFamily::Frechet => fit_frechet(&col),
        UniFamily::Gpd => {
            let mu = fixed_location
                .unwrap_or_else(|| col.iter().cloned().fold(f64::INFINITY, f64::min));
            fit_gpd_at(&col, mu)
        }
    }
}

/// GPD fit on the exceedances above `u`, with the location fixed at the
/// threshold. The result is already a tail density on (u, ∞).
pub fn fit_gpd_exceedances(data: &DataMatrix, u: f64) -> Result<GpdTail> {
    let col = check_fittable(data, 2)?;
    let exceed: Vec<f64> = col.iter().copied().filter(|&x| x > u).collect();
    if exceed.len() < 5 {
        return Err(Error::InvalidData(format!(
            "only {} exceedances above u = {u}; need at least 5",
            exceed.len()
        )));
    }
    let exc = DataMatrix::from_column(exceed)?;
    let fit = fit_gpd_at(&exc.column(0), u)?;
    Ok(GpdTail {
        u,
        sigma: fit.sigma,
        xi: fit.xi.unwrap(),
        loglik: fit.loglik,
        converged: fit.converged,
    })
}

/// The GPD tail density anchored at the threshold u: a density on (u, ∞)
/// with closed-form unit mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpdTail {
    pub u: f64,
    pub sigma: f64,
    pub xi: f64,
    pub loglik: f64,
    pub converged: bool,
}

impl GpdTail {
    /// Closed-form survival of the exceedance distribution at x ≥ u.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.u {
            return 1.0;
        }
        let y = (x - self.u) / self.sigma;
        if self.xi.abs() < XI_ZERO_EPS {
            (-y).exp()
        } else {
            let t = 1.0 + self.xi * y;
            if t <= 0.0 {
                0.0
            } else {
                t.powf(-1.0 / self.xi)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        if self.xi.abs() < XI_ZERO_EPS {
            self.u - self.sigma * (1.0 - p).ln()
        } else {
            self.u + self.sigma * ((1.0 - p).powf(-self.xi) - 1.0) / self.xi
        }
    }
}

impl Density for GpdTail {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> f64 {
        if x[0] <= self.u {
            return 0.0;
        }
        let l = gpd_logpdf(x[0], self.u, self.sigma, self.xi);
        if l.is_finite() {
            l.exp()
        } else {
            0.0
        }
    }
}

/// Result of the deviance test between the Gumbel (ξ = 0) and the ξ-free
/// GEV fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DevianceReport {
    pub use_frechet: bool,
    pub statistic: f64,
    pub pvalue: f64,
    pub gumbel_loglik: f64,
    pub gev_loglik: f64,
    pub gev_xi: f64,
}

/// Deviance test for the model-selection guard: when the shape parameter is
/// not significantly different from zero (χ²₁ at 5%), the Fréchet candidate
/// is dropped.
pub fn deviance_gumbel_vs_frechet(data: &DataMatrix) -> Result<DevianceReport> {
    let gum = fit_univariate(data, UniFamily::Gumbel, None)?;
    let gev = fit_univariate(data, UniFamily::Gev, None)?;
    if !gum.loglik.is_finite() || !gev.loglik.is_finite() {
        return Err(Error::NonConvergence(
            "deviance test requires both fits to converge".into(),
        ));
    }
    // Nested models: the GEV can never fit worse than its ξ = 0 member.
    let statistic = (2.0 * (gev.loglik - gum.loglik)).max(0.0);
    let pvalue = chi2_1_sf(statistic);
    Ok(DevianceReport {
        use_frechet: pvalue < 0.05,
        statistic,
        pvalue,
        gumbel_loglik: gum.loglik,
        gev_loglik: gev.loglik,
        gev_xi: gev.xi.unwrap_or(0.0),
    })
}

/// A fitted univariate model restricted to (u, ∞) and renormalized by its
/// own survival function — the closed-form candidate densities g_j.
pub struct UniTailDensity {
    pub fit: UnivariateEvtFit,
    pub u: f64,
    surv: f64,
}

impl UniTailDensity {
    pub fn new(fit: UnivariateEvtFit, u: f64) -> Result<Self> {
        let surv = fit.survival(u);
        if !(surv > 1e-12) {
            return Err(Error::InvalidData(format!(
                "fitted {} model has no mass above u = {u}",
                fit.family.label()
            )));
        }
        Ok(Self { fit, u, surv })
    }

    pub fn survival_at_threshold(&self) -> f64 {
        self.surv
    }

    /// Quantile of the tail distribution: F⁻¹(1 − (1−p)·F̄(u)).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        self.fit.quantile(1.0 - (1.0 - p) * self.surv)
    }
}

impl Density for UniTailDensity {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> f64 {
        if x[0] <= self.u {
            return 0.0;
        }
        self.fit.pdf(x[0]) / self.surv
    }
}
