//! Parametric density families and maximum-likelihood fits: univariate
//! Gumbel/Fréchet/GEV/GPD (full-sample and exceedance-only), the
//! Gumbel-vs-Fréchet deviance guard, and the bivariate max-stable families
//! (bilogistic, asymmetric negative logistic, Hüsler-Reiss) with GEV margins.

mod bivariate;
mod univariate;

pub use bivariate::{
    bivariate_cdf, bivariate_density, bivariate_loglik, fit_bivariate, pickands, pickands_derivs,
    BivFamily, BivFamilyKind, BivTailDensity, BivariateEvdFit, GevMargin,
};
pub(crate) use bivariate::copula_conditional as conditional_copula;
pub use univariate::{
    deviance_gumbel_vs_frechet, fit_gpd_exceedances, fit_univariate, DevianceReport, GpdTail,
    UniFamily, UniTailDensity, UnivariateEvtFit,
};

/// Standard normal CDF.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub(crate) fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail of the χ²₁ distribution: P(χ²₁ > x) = erfc(√(x/2)).
pub(crate) fn chi2_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        statrs::function::erf::erfc((x / 2.0).sqrt())
    }
}
