//! The estimator roster behind the CLI tokens: transformation and standard
//! kernel estimators under the four bandwidth selectors, the histogram, the
//! exceedance GPD, and the full-sample parametric families.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bandwidth::{self, SelectorKind, SelectorResult};
use crate::data::{DataMatrix, TailRegion};
use crate::error::{Error, Result};
use crate::grid::default_points;
use crate::histogram;
use crate::kde::{Density, KdeModel, TailDensityModel};
use crate::mat::SymMat;
use crate::parametric::{
    fit_bivariate, fit_gpd_exceedances, fit_univariate, BivFamilyKind, BivTailDensity, GpdTail,
    UniFamily, UniTailDensity,
};

/// Estimator tokens as exposed on the command line. Starred kernel tokens
/// are the standard (untransformed) estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorToken {
    Kns,
    Kpi,
    Kuc,
    Ksc,
    KnsStar,
    KpiStar,
    KucStar,
    KscStar,
    Hist,
    GpdPlus,
    Gum,
    Fre,
    Gpd,
    Bil,
    Anl,
    Hr,
}

impl EstimatorToken {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorToken::Kns => "kns",
            EstimatorToken::Kpi => "kpi",
            EstimatorToken::Kuc => "kuc",
            EstimatorToken::Ksc => "ksc",
            EstimatorToken::KnsStar => "kns*",
            EstimatorToken::KpiStar => "kpi*",
            EstimatorToken::KucStar => "kuc*",
            EstimatorToken::KscStar => "ksc*",
            EstimatorToken::Hist => "hist",
            EstimatorToken::GpdPlus => "gpd+",
            EstimatorToken::Gum => "gum",
            EstimatorToken::Fre => "fre",
            EstimatorToken::Gpd => "gpd",
            EstimatorToken::Bil => "bil",
            EstimatorToken::Anl => "anl",
            EstimatorToken::Hr => "hr",
        }
    }

    pub fn selector(&self) -> Option<(SelectorKind, bool)> {
        // (selector, transformed)
        match self {
            EstimatorToken::Kns => Some((SelectorKind::Ns, true)),
            EstimatorToken::Kpi => Some((SelectorKind::Pi, true)),
            EstimatorToken::Kuc => Some((SelectorKind::Ucv, true)),
            EstimatorToken::Ksc => Some((SelectorKind::Scv, true)),
            EstimatorToken::KnsStar => Some((SelectorKind::Ns, false)),
            EstimatorToken::KpiStar => Some((SelectorKind::Pi, false)),
            EstimatorToken::KucStar => Some((SelectorKind::Ucv, false)),
            EstimatorToken::KscStar => Some((SelectorKind::Scv, false)),
            _ => None,
        }
    }

    pub fn is_kernel(&self) -> bool {
        self.selector().is_some()
    }
}

impl FromStr for EstimatorToken {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "kns" => EstimatorToken::Kns,
            "kpi" => EstimatorToken::Kpi,
            "kuc" => EstimatorToken::Kuc,
            "ksc" => EstimatorToken::Ksc,
            "kns*" => EstimatorToken::KnsStar,
            "kpi*" => EstimatorToken::KpiStar,
            "kuc*" => EstimatorToken::KucStar,
            "ksc*" => EstimatorToken::KscStar,
            "hist" => EstimatorToken::Hist,
            "gpd+" => EstimatorToken::GpdPlus,
            "gum" => EstimatorToken::Gum,
            "fre" => EstimatorToken::Fre,
            "gpd" => EstimatorToken::Gpd,
            "bil" => EstimatorToken::Bil,
            "anl" => EstimatorToken::Anl,
            "hr" => EstimatorToken::Hr,
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator token {other:?}; expected one of kns kpi kuc ksc kns* \
                     kpi* kuc* ksc* hist gpd+ gum fre gpd bil anl hr"
                )))
            }
        })
    }
}

/// A fitted tail estimator plus its reportable metadata.
pub struct FittedEstimator {
    pub token: EstimatorToken,
    pub tail: TailDensityModel,
    pub bandwidth: Option<SymMat<f64>>,
    pub selector: Option<SelectorResult>,
    pub binwidths: Option<Vec<f64>>,
    pub params: Vec<(String, f64)>,
    pub loglik: Option<f64>,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FittedEstimator {
    /// The tail density as a shareable density object.
    pub fn density(self: &Arc<Self>) -> Arc<dyn Density> {
        let me = self.clone();
        Arc::new(crate::kde::FnDensity::new(
            self.tail.grid().dim(),
            move |x: &[f64]| me.tail.eval_point(x),
        ))
    }
}

/// Fits a kernel estimator: bandwidth by selector (on the transformed sample
/// for the unstarred tokens), then the tail density at the region.
fn fit_kernel(
    data: &DataMatrix,
    region: &TailRegion,
    selector: SelectorKind,
    transformed: bool,
    points: usize,
) -> Result<FittedEstimator> {
    let (sel, model) = if transformed {
        let t = region.transform()?;
        let y = data.transformed(&t)?;
        let sel = bandwidth::select(&y, selector)?;
        let model = KdeModel::fit_transformation(data.clone(), t, sel.h.clone())?;
        (sel, model)
    } else {
        let sel = bandwidth::select(data, selector)?;
        let model = KdeModel::fit_standard(data.clone(), sel.h.clone())?;
        (sel, model)
    };
    let tail = TailDensityModel::from_kde_with(Arc::new(model), region, points)?;
    Ok(FittedEstimator {
        token: token_for(selector, transformed),
        bandwidth: Some(sel.h.clone()),
        converged: sel.converged,
        warnings: sel.warnings.clone(),
        selector: Some(sel),
        binwidths: None,
        params: Vec::new(),
        loglik: None,
        tail,
    })
}

fn token_for(selector: SelectorKind, transformed: bool) -> EstimatorToken {
    match (selector, transformed) {
        (SelectorKind::Ns, true) => EstimatorToken::Kns,
        (SelectorKind::Pi, true) => EstimatorToken::Kpi,
        (SelectorKind::Ucv, true) => EstimatorToken::Kuc,
        (SelectorKind::Scv, true) => EstimatorToken::Ksc,
        (SelectorKind::Ns, false) => EstimatorToken::KnsStar,
        (SelectorKind::Pi, false) => EstimatorToken::KpiStar,
        (SelectorKind::Ucv, false) => EstimatorToken::KucStar,
        (SelectorKind::Scv, false) => EstimatorToken::KscStar,
    }
}

fn fit_parametric_univariate(
    data: &DataMatrix,
    region: &TailRegion,
    family: UniFamily,
    token: EstimatorToken,
    points: usize,
) -> Result<FittedEstimator> {
    let fit = fit_univariate(data, family, None)?;
    let converged = fit.converged;
    let loglik = fit.loglik;
    let mut params = vec![("mu".into(), fit.mu), ("sigma".into(), fit.sigma)];
    if let Some(xi) = fit.xi {
        params.push(("xi".into(), xi));
    }
    // Truncation hint: the quantile holding all but 1e-4 of the tail mass.
    let surv = fit.survival(region.u[0]);
    let hint = fit
        .quantile(1.0 - 1e-4 * surv.max(1e-9))
        .unwrap_or(region.u[0] + 1.0);
    let tail_density = UniTailDensity::new(fit, region.u[0])?;
    let tail = TailDensityModel::from_tail_density_with_mass(
        Arc::new(tail_density),
        region,
        &[hint],
        points,
        surv.clamp(1e-12, 1.0),
    )?;
    Ok(FittedEstimator {
        token,
        tail,
        bandwidth: None,
        selector: None,
        binwidths: None,
        params,
        loglik: Some(loglik),
        converged,
        warnings: Vec::new(),
    })
}

fn fit_parametric_bivariate(
    data: &DataMatrix,
    region: &TailRegion,
    kind: BivFamilyKind,
    token: EstimatorToken,
    points: usize,
) -> Result<FittedEstimator> {
    let fit = fit_bivariate(data, kind)?;
    let converged = fit.converged;
    let loglik = fit.loglik;
    let mut params: Vec<(String, f64)> = fit
        .family
        .params()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    for (j, m) in fit.margins.iter().enumerate() {
        params.push((format!("mu{}", j + 1), m.mu));
        params.push((format!("sigma{}", j + 1), m.sigma));
        params.push((format!("xi{}", j + 1), m.xi));
    }
    let hint: Vec<f64> = (0..2)
        .map(|j| {
            fit.margins[j]
                .quantile(1.0 - 1e-4)
                .unwrap_or(region.u[j] + 1.0)
                .max(region.u[j] + 1e-6)
        })
        .collect();
    let tail = BivTailDensity::new(fit, [region.u[0], region.u[1]])?;
    let mass = tail.survival_at_threshold().clamp(1e-12, 1.0);
    let tail =
        TailDensityModel::from_tail_density_with_mass(Arc::new(tail), region, &hint, points, mass)?;
    Ok(FittedEstimator {
        token,
        tail,
        bandwidth: None,
        selector: None,
        binwidths: None,
        params,
        loglik: Some(loglik),
        converged,
        warnings: Vec::new(),
    })
}

/// Fits any roster estimator as a tail density over the region.
pub fn fit_estimator(
    data: &DataMatrix,
    region: &TailRegion,
    token: EstimatorToken,
    points_per_axis: Option<usize>,
) -> Result<FittedEstimator> {
    let points = points_per_axis.unwrap_or(default_points(data.dim()));
    if let Some((selector, transformed)) = token.selector() {
        return fit_kernel(data, region, selector, transformed, points);
    }
    match token {
        EstimatorToken::Hist => {
            let ht = histogram::hist_tail_density(data, region)?;
            let binwidths = ht.histogram().binwidths().to_vec();
            let tail = ht.to_tail_model(points)?;
            Ok(FittedEstimator {
                token,
                tail,
                bandwidth: None,
                selector: None,
                binwidths: Some(binwidths),
                params: Vec::new(),
                loglik: None,
                converged: true,
                warnings: Vec::new(),
            })
        }
        EstimatorToken::GpdPlus => {
            if data.dim() != 1 {
                return Err(Error::Config("gpd+ is univariate only".into()));
            }
            let exceed_frac = data.exceedances(&region.u)?.n() as f64 / data.n() as f64;
            let gpd: GpdTail = fit_gpd_exceedances(data, region.u[0])?;
            let converged = gpd.converged;
            let loglik = gpd.loglik;
            let params = vec![
                ("mu".to_string(), gpd.u),
                ("sigma".to_string(), gpd.sigma),
                ("xi".to_string(), gpd.xi),
            ];
            let hint = gpd.quantile(1.0 - 1e-4).max(region.u[0] + 1e-6);
            let tail = TailDensityModel::from_tail_density_with_mass(
                Arc::new(gpd),
                region,
                &[hint],
                points,
                exceed_frac,
            )?;
            Ok(FittedEstimator {
                token,
                tail,
                bandwidth: None,
                selector: None,
                binwidths: None,
                params,
                loglik: Some(loglik),
                converged,
                warnings: Vec::new(),
            })
        }
        EstimatorToken::Gum => {
            fit_parametric_univariate(data, region, UniFamily::Gumbel, token, points)
        }
        EstimatorToken::Fre => {
            fit_parametric_univariate(data, region, UniFamily::Frechet, token, points)
        }
        EstimatorToken::Gpd => {
            fit_parametric_univariate(data, region, UniFamily::Gpd, token, points)
        }
        EstimatorToken::Bil => {
            fit_parametric_bivariate(data, region, BivFamilyKind::Bilogistic, token, points)
        }
        EstimatorToken::Anl => {
            fit_parametric_bivariate(data, region, BivFamilyKind::Anl, token, points)
        }
        EstimatorToken::Hr => {
            fit_parametric_bivariate(data, region, BivFamilyKind::HuslerReiss, token, points)
        }
        _ => unreachable!("kernel tokens handled above"),
    }
}
