//! Scripted reproduction of the simulation studies: univariate and bivariate
//! model-selection tables, log-L2 error distributions, qq data and highest
//! density level sets, at configurable replicate counts.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TailRegion;
use crate::error::{Error, Result};
use crate::estimators::{fit_estimator, EstimatorToken};
use crate::grid::DensityGrid;
use crate::kde::{Density, TailDensityModel};
use crate::parametric::{
    deviance_gumbel_vs_frechet, fit_bivariate, fit_univariate, BivFamily, BivFamilyKind,
    BivTailDensity, GevMargin, UniFamily, UniTailDensity,
};
use crate::rng::RngStream;
use crate::sampling::TargetSpec;
use crate::tailindex::{select_model, tail_index, LossKind};

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    /// Univariate density/quantile curves (one replicate per target).
    Fig1,
    /// Univariate study: log-L2 errors and model-selection proportions.
    Table1,
    /// Bivariate level sets (one replicate per target).
    Fig3,
    /// Bivariate study: selection proportions and mean L2 errors.
    Table2,
}

/// Study configuration; fully determines the report together with the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Estimators to score against the true tail density (log-L2 panels).
    pub estimators: Vec<String>,
    pub quantile_level: f64,
    pub points_per_axis: Option<usize>,
    /// Interpret the Hüsler-Reiss dependence value as 1/λ (true) or λ.
    pub hr_reciprocal: bool,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentId, seed: u64) -> Self {
        let (n, replicates, quantile_level) = match experiment {
            ExperimentId::Fig1 => (2000, 1, 0.95),
            ExperimentId::Table1 => (2000, 100, 0.95),
            ExperimentId::Fig3 => (4000, 1, 0.90),
            ExperimentId::Table2 => (4000, 50, 0.90),
        };
        let estimators = match experiment {
            ExperimentId::Fig1 | ExperimentId::Table1 => vec![
                "fre", "gum", "gpd", "gpd+", "hist", "kns", "kpi", "kuc", "ksc", "kns*", "kpi*",
                "kuc*", "ksc*",
            ],
            ExperimentId::Fig3 | ExperimentId::Table2 => vec!["hist", "kpi", "kpi*"],
        }
        .into_iter()
        .map(String::from)
        .collect();
        Self {
            experiment,
            n,
            replicates,
            seed,
            estimators,
            quantile_level,
            points_per_axis: None,
            hr_reciprocal: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        if !(self.quantile_level > 0.0 && self.quantile_level < 1.0) {
            return Err(Error::Config("quantile level must lie in (0, 1)".into()));
        }
        for e in &self.estimators {
            e.parse::<EstimatorToken>()?;
        }
        Ok(())
    }

    fn tokens(&self) -> Vec<EstimatorToken> {
        self.estimators
            .iter()
            .map(|e| e.parse().expect("validated tokens"))
            .collect()
    }
}

/// Univariate targets of the study, in fixed order.
pub fn univariate_targets() -> Vec<TargetSpec> {
    vec![
        TargetSpec::Frechet { mu: 1.0, sigma: 0.5, xi: 0.25 },
        TargetSpec::Gumbel { mu: 1.5, sigma: 3.0 },
        TargetSpec::Gpd { mu: 0.0, sigma: 1.0, xi: 0.25 },
    ]
}

/// Bivariate targets with unit-Fréchet margins; the Hüsler-Reiss dependence
/// value 2.4 maps to λ under the configured convention.
pub fn bivariate_targets(hr_reciprocal: bool) -> Vec<TargetSpec> {
    let margins = [GevMargin::unit_frechet(); 2];
    let lambda = if hr_reciprocal { 1.0 / 2.4 } else { 2.4 };
    vec![
        TargetSpec::Bivariate {
            family: BivFamily::Bilogistic { alpha: 0.8, beta: 0.52 },
            margins,
        },
        TargetSpec::Bivariate {
            family: BivFamily::Anl { dep: 1.3, asy: (0.2, 0.7) },
            margins,
        },
        TargetSpec::Bivariate {
            family: BivFamily::HuslerReiss { lambda },
            margins,
        },
    ]
}

/// The estimators feeding the four univariate model-selection indices.
const UNI_INDEX_ESTIMATORS: [(&str, EstimatorToken); 4] = [
    ("hist_l2", EstimatorToken::Hist),
    ("trans_kernel_l2", EstimatorToken::Kpi),
    ("std_kernel_l2", EstimatorToken::KpiStar),
    ("gpd_l2", EstimatorToken::GpdPlus),
];

/// The estimators feeding the three bivariate indices.
const BIV_INDEX_ESTIMATORS: [(&str, EstimatorToken); 3] = [
    ("hist_l2", EstimatorToken::Hist),
    ("trans_kernel_l2", EstimatorToken::Kpi),
    ("std_kernel_l2", EstimatorToken::KpiStar),
];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub counts: BTreeMap<String, usize>,
    pub correct: usize,
    pub total: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QqPoint {
    pub level: f64,
    pub target_quantile: f64,
    pub estimated_quantile: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniTargetReport {
    pub target: String,
    pub replicates_used: usize,
    pub failures: usize,
    /// First few failure messages, for diagnostics.
    pub failure_messages: Vec<String>,
    /// estimator label → per-replicate log L2 error against the true tail.
    pub log_l2: BTreeMap<String, Vec<f64>>,
    /// index label → selection summary over replicates.
    pub selection: BTreeMap<String, SelectionSummary>,
    /// qq pairs (levels 0.95–0.999) per estimator, first replicate only.
    pub qq: BTreeMap<String, Vec<QqPoint>>,
    /// true and estimated tail density curves, first replicate only.
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnivariateStudyReport {
    pub config: ExperimentConfig,
    pub targets: Vec<UniTargetReport>,
}

struct UniRepOutcome {
    log_l2: BTreeMap<String, f64>,
    winners: BTreeMap<String, String>,
    qq: BTreeMap<String, Vec<QqPoint>>,
    curves: BTreeMap<String, Vec<CurvePoint>>,
}

fn uni_candidate_fits(
    data: &crate::data::DataMatrix,
    u: f64,
) -> Result<Vec<(String, Arc<dyn Density>)>> {
    let deviance = deviance_gumbel_vs_frechet(data)?;
    let mut out: Vec<(String, Arc<dyn Density>)> = Vec::new();
    if deviance.use_frechet {
        if let Ok(fit) = fit_univariate(data, UniFamily::Frechet, None) {
            if let Ok(tail) = UniTailDensity::new(fit, u) {
                out.push(("frechet".into(), Arc::new(tail)));
            }
        }
    }
    if let Ok(fit) = fit_univariate(data, UniFamily::Gumbel, None) {
        if let Ok(tail) = UniTailDensity::new(fit, u) {
            out.push(("gumbel".into(), Arc::new(tail)));
        }
    }
    if let Ok(fit) = fit_univariate(data, UniFamily::Gpd, None) {
        if let Ok(tail) = UniTailDensity::new(fit, u) {
            out.push(("gpd".into(), Arc::new(tail)));
        }
    }
    if out.len() < 2 {
        return Err(Error::NonConvergence(
            "fewer than two parametric candidates fitted".into(),
        ));
    }
    Ok(out)
}

fn true_tail_model(
    spec: &TargetSpec,
    region: &TailRegion,
    points: usize,
) -> Result<TailDensityModel> {
    let tail = spec.tail_density(&region.u)?;
    let hint: Vec<f64> = match spec {
        TargetSpec::Bivariate { margins, .. } => (0..2)
            .map(|j| margins[j].quantile(1.0 - 1e-4).unwrap_or(region.u[j] + 1.0))
            .collect(),
        _ => {
            let fit = spec.univariate_fit().unwrap();
            let surv = fit.survival(region.u[0]);
            vec![fit
                .quantile(1.0 - 1e-4 * surv.max(1e-9))
                .unwrap_or(region.u[0] + 1.0)]
        }
    };
    let mass = spec.survival(&region.u)?.clamp(1e-12, 1.0);
    TailDensityModel::from_tail_density_with_mass(tail, region, &hint, points, mass)
}

fn qq_levels() -> Vec<f64> {
    // 0.95 to 0.999 in the tail distribution's own scale: these are levels
    // of the full distribution mapped into the exceedance distribution.
    (0..20).map(|k| 0.95 + 0.0025 * k as f64).collect()
}

fn run_univariate_replicate(
    cfg: &ExperimentConfig,
    spec: &TargetSpec,
    rep: u64,
    want_curves: bool,
) -> Result<UniRepOutcome> {
    let stream = RngStream::new(cfg.seed, rep).substream(match spec {
        TargetSpec::Frechet { .. } => 1,
        TargetSpec::Gumbel { .. } => 2,
        _ => 3,
    });
    let data = spec.sample(cfg.n, stream)?;
    let region = TailRegion::from_quantile(&data, cfg.quantile_level)?;
    let points = cfg.points_per_axis.unwrap_or(512);
    let truth = true_tail_model(spec, &region, points)?;
    let candidates = uni_candidate_fits(&data, region.u[0])?;

    let mut log_l2 = BTreeMap::new();
    let mut winners = BTreeMap::new();
    let mut qq = BTreeMap::new();
    let mut curves = BTreeMap::new();

    // Tail estimates for every requested estimator, scored against truth.
    let mut fitted: BTreeMap<EstimatorToken, Arc<crate::estimators::FittedEstimator>> =
        BTreeMap::new();
    for token in cfg.tokens() {
        let est = fit_estimator(&data, &region, token, Some(points))?;
        let l2 = tail_index(&est.tail, &truth, LossKind::L2, truth.grid())?;
        log_l2.insert(token.label().to_string(), l2.max(1e-300).ln());
        fitted.insert(token, Arc::new(est));
    }

    // Model selection per index estimator.
    for (index_label, token) in UNI_INDEX_ESTIMATORS {
        let reference = match fitted.get(&token) {
            Some(est) => est.clone(),
            None => Arc::new(fit_estimator(&data, &region, token, Some(points))?),
        };
        let report = select_model(&candidates, &reference.tail, LossKind::L2, index_label)?;
        winners.insert(index_label.to_string(), report.winner_name);
    }

    if want_curves {
        let tq = spec.univariate_fit().unwrap();
        let surv = tq.survival(region.u[0]);
        for (token, est) in &fitted {
            // qq pairs: target quantiles of the full law vs estimated tail
            // quantiles at the matching exceedance levels.
            let mut pairs = Vec::new();
            for level in qq_levels() {
                if level <= cfg.quantile_level {
                    continue;
                }
                let p_tail = (level - (1.0 - surv)) / surv;
                if !(0.0..1.0).contains(&p_tail) || p_tail <= 0.0 {
                    continue;
                }
                if let (Ok(tgt), Ok(est_q)) =
                    (tq.quantile(level), est.tail.tail_quantile(p_tail))
                {
                    pairs.push(QqPoint {
                        level,
                        target_quantile: tgt,
                        estimated_quantile: est_q,
                    });
                }
            }
            qq.insert(token.label().to_string(), pairs);

            let grid = est.tail.grid();
            let curve: Vec<CurvePoint> = grid
                .axes()[0]
                .iter()
                .zip(grid.values())
                .map(|(&x, &density)| CurvePoint { x, density })
                .collect();
            curves.insert(token.label().to_string(), curve);
        }
        let truth_curve: Vec<CurvePoint> = truth
            .grid()
            .axes()[0]
            .iter()
            .zip(truth.grid().values())
            .map(|(&x, &density)| CurvePoint { x, density })
            .collect();
        curves.insert("true".into(), truth_curve);
    }

    Ok(UniRepOutcome {
        log_l2,
        winners,
        qq,
        curves,
    })
}

/// Runs the univariate study (Table 1 / Figure 1 / Figure 2 data).
pub fn run_univariate_study(cfg: &ExperimentConfig) -> Result<UnivariateStudyReport> {
    cfg.validate()?;
    let want_curves = matches!(cfg.experiment, ExperimentId::Fig1);
    let mut targets = Vec::new();
    for spec in univariate_targets() {
        let outcomes: Vec<std::result::Result<UniRepOutcome, String>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                run_univariate_replicate(cfg, &spec, rep as u64, want_curves && rep == 0)
                    .map_err(|e| e.to_string())
            })
            .collect();

        let mut report = UniTargetReport {
            target: spec.label(),
            replicates_used: 0,
            failures: 0,
            failure_messages: Vec::new(),
            log_l2: BTreeMap::new(),
            selection: BTreeMap::new(),
            qq: BTreeMap::new(),
            curves: BTreeMap::new(),
        };
        for outcome in outcomes {
            match outcome {
                Err(msg) => {
                    report.failures += 1;
                    if report.failure_messages.len() < 5 {
                        report.failure_messages.push(msg);
                    }
                }
                Ok(out) => {
                    report.replicates_used += 1;
                    for (k, v) in out.log_l2 {
                        report.log_l2.entry(k).or_default().push(v);
                    }
                    for (index, winner) in out.winners {
                        let s = report.selection.entry(index).or_default();
                        *s.counts.entry(winner.clone()).or_insert(0) += 1;
                        s.total += 1;
                        if winner == spec.label() {
                            s.correct += 1;
                        }
                    }
                    if report.qq.is_empty() && !out.qq.is_empty() {
                        report.qq = out.qq;
                        report.curves = out.curves;
                    }
                }
            }
        }
        for s in report.selection.values_mut() {
            s.proportion = if s.total > 0 {
                s.correct as f64 / s.total as f64
            } else {
                0.0
            };
        }
        if report.failures * 20 > cfg.replicates {
            return Err(Error::NonConvergence(format!(
                "{} of {} replicates failed for target {}: {:?}",
                report.failures,
                cfg.replicates,
                spec.label(),
                report.failure_messages
            )));
        }
        targets.push(report);
    }
    Ok(UnivariateStudyReport {
        config: cfg.clone(),
        targets,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BivTargetReport {
    pub target: String,
    pub replicates_used: usize,
    pub failures: usize,
    /// First few failure messages, for diagnostics.
    pub failure_messages: Vec<String>,
    /// index label → selection summary (Table 2 row).
    pub selection: BTreeMap<String, SelectionSummary>,
    /// fitted model → estimator → mean L2 (Table 3 rows for this target).
    pub mean_l2: BTreeMap<String, BTreeMap<String, f64>>,
    /// estimator → per-replicate log L2 against the true tail (Figure 4).
    pub log_l2: BTreeMap<String, Vec<f64>>,
    /// estimator → (probability level → density level), first replicate.
    pub levels: BTreeMap<String, Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BivariateStudyReport {
    pub config: ExperimentConfig,
    pub targets: Vec<BivTargetReport>,
}

struct BivRepOutcome {
    winners: BTreeMap<String, String>,
    l2_matrix: BTreeMap<String, BTreeMap<String, f64>>,
    log_l2: BTreeMap<String, f64>,
    levels: BTreeMap<String, Vec<(f64, f64)>>,
}

fn run_bivariate_replicate(
    cfg: &ExperimentConfig,
    spec: &TargetSpec,
    rep: u64,
    want_levels: bool,
) -> Result<BivRepOutcome> {
    let stream = RngStream::new(cfg.seed, rep).substream(match spec {
        TargetSpec::Bivariate { family, .. } => match family.kind() {
            BivFamilyKind::Bilogistic => 11,
            BivFamilyKind::Anl => 12,
            BivFamilyKind::HuslerReiss => 13,
        },
        _ => unreachable!(),
    });
    let data = spec.sample(cfg.n, stream)?;
    let region = TailRegion::from_quantile(&data, cfg.quantile_level)?;
    let points = cfg.points_per_axis.unwrap_or(crate::grid::default_points(2));
    let truth = true_tail_model(spec, &region, points)?;

    // Parametric candidates: joint MLE of each family.
    let mut candidates: Vec<(String, Arc<dyn Density>)> = Vec::new();
    for kind in [
        BivFamilyKind::Bilogistic,
        BivFamilyKind::Anl,
        BivFamilyKind::HuslerReiss,
    ] {
        let fit = fit_bivariate(&data, kind)?;
        let tail = BivTailDensity::new(fit, [region.u[0], region.u[1]])?;
        candidates.push((kind.label().to_string(), Arc::new(tail)));
    }

    let mut winners = BTreeMap::new();
    let mut l2_matrix: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut log_l2 = BTreeMap::new();
    let mut levels = BTreeMap::new();

    for (index_label, token) in BIV_INDEX_ESTIMATORS {
        let est = fit_estimator(&data, &region, token, Some(points))?;
        let l2_truth = tail_index(&est.tail, &truth, LossKind::L2, truth.grid())?;
        log_l2.insert(token.label().to_string(), l2_truth.max(1e-300).ln());

        let report = select_model(&candidates, &est.tail, LossKind::L2, index_label)?;
        winners.insert(index_label.to_string(), report.winner_name.clone());
        for r in &report.reports {
            l2_matrix
                .entry(r.candidate.clone())
                .or_default()
                .insert(index_label.to_string(), r.value);
        }

        if want_levels {
            let lv = highest_density_levels(est.tail.grid(), &[0.25, 0.50, 0.75, 0.99])?;
            levels.insert(
                token.label().to_string(),
                [0.25, 0.50, 0.75, 0.99].iter().copied().zip(lv).collect(),
            );
        }
    }
    if want_levels {
        let lv = highest_density_levels(truth.grid(), &[0.25, 0.50, 0.75, 0.99])?;
        levels.insert(
            "true".into(),
            [0.25, 0.50, 0.75, 0.99].iter().copied().zip(lv).collect(),
        );
    }

    Ok(BivRepOutcome {
        winners,
        l2_matrix,
        log_l2,
        levels,
    })
}

/// Runs the bivariate study (Table 2 / Table 3 / Figure 3 / Figure 4 data).
pub fn run_bivariate_study(cfg: &ExperimentConfig) -> Result<BivariateStudyReport> {
    cfg.validate()?;
    let want_levels = matches!(cfg.experiment, ExperimentId::Fig3);
    let mut targets = Vec::new();
    for spec in bivariate_targets(cfg.hr_reciprocal) {
        let outcomes: Vec<std::result::Result<BivRepOutcome, String>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| {
                run_bivariate_replicate(cfg, &spec, rep as u64, want_levels && rep == 0)
                    .map_err(|e| e.to_string())
            })
            .collect();

        let mut report = BivTargetReport {
            target: spec.label(),
            replicates_used: 0,
            failures: 0,
            failure_messages: Vec::new(),
            selection: BTreeMap::new(),
            mean_l2: BTreeMap::new(),
            log_l2: BTreeMap::new(),
            levels: BTreeMap::new(),
        };
        let mut sums: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for outcome in outcomes {
            match outcome {
                Err(msg) => {
                    report.failures += 1;
                    if report.failure_messages.len() < 5 {
                        report.failure_messages.push(msg);
                    }
                }
                Ok(out) => {
                    report.replicates_used += 1;
                    for (index, winner) in out.winners {
                        let s = report.selection.entry(index).or_default();
                        *s.counts.entry(winner.clone()).or_insert(0) += 1;
                        s.total += 1;
                        if winner == spec.label() {
                            s.correct += 1;
                        }
                    }
                    for (cand, per_est) in out.l2_matrix {
                        let slot = sums.entry(cand).or_default();
                        for (est, v) in per_est {
                            *slot.entry(est).or_insert(0.0) += v;
                        }
                    }
                    for (est, v) in out.log_l2 {
                        report.log_l2.entry(est).or_default().push(v);
                    }
                    if report.levels.is_empty() && !out.levels.is_empty() {
                        report.levels = out.levels;
                    }
                }
            }
        }
        let used = report.replicates_used.max(1) as f64;
        for (cand, per_est) in sums {
            let slot = report.mean_l2.entry(cand).or_default();
            for (est, total) in per_est {
                slot.insert(est, total / used);
            }
        }
        for s in report.selection.values_mut() {
            s.proportion = if s.total > 0 {
                s.correct as f64 / s.total as f64
            } else {
                0.0
            };
        }
        if report.failures * 20 > cfg.replicates {
            return Err(Error::NonConvergence(format!(
                "{} of {} replicates failed for target {}: {:?}",
                report.failures,
                cfg.replicates,
                spec.label(),
                report.failure_messages
            )));
        }
        targets.push(report);
    }
    Ok(BivariateStudyReport {
        config: cfg.clone(),
        targets,
    })
}

/// For each probability p, the density level c with mass{f ≥ c} = p, by
/// sorting grid mass in decreasing density order.
pub fn highest_density_levels(grid: &DensityGrid<f64>, probs: &[f64]) -> Result<Vec<f64>> {
    let total = grid.integrate();
    if !(total > 0.0) {
        return Err(Error::InvalidData("grid holds no mass".into()));
    }
    if (total - 1.0).abs() > 0.05 {
        return Err(Error::InvalidData(format!(
            "grid is not normalized (mass {total:.4}); level sets need a density"
        )));
    }
    let mut cells: Vec<(f64, f64)> = (0..grid.len())
        .map(|flat| (grid.values()[flat], grid.values()[flat] * grid.weight(flat)))
        .collect();
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let target = p * total;
        let mut acc = 0.0;
        let mut level = 0.0;
        let mut reached = false;
        for &(density, mass) in &cells {
            acc += mass;
            if acc >= target {
                level = density;
                reached = true;
                break;
            }
        }
        out.push(if reached && p < 1.0 { level } else { 0.0 });
    }
    Ok(out)
}

/// Aligned-text rendering of the Table-1-style selection proportions.
pub fn selection_table_text(report: &UnivariateStudyReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<8} {:>10} {:>16} {:>14} {:>10}\n",
        "target", "hist_l2", "trans_kernel_l2", "std_kernel_l2", "gpd_l2"
    ));
    for t in &report.targets {
        let get = |k: &str| {
            t.selection
                .get(k)
                .map(|v| format!("{:.2}", v.proportion))
                .unwrap_or_else(|| "-".into())
        };
        s.push_str(&format!(
            "{:<8} {:>10} {:>16} {:>14} {:>10}\n",
            t.target,
            get("hist_l2"),
            get("trans_kernel_l2"),
            get("std_kernel_l2"),
            get("gpd_l2")
        ));
    }
    s
}

/// Aligned-text rendering of the Table-2-style selection proportions.
pub fn biv_selection_table_text(report: &BivariateStudyReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<8} {:>10} {:>16} {:>14}\n",
        "target", "hist_l2", "trans_kernel_l2", "std_kernel_l2"
    ));
    for t in &report.targets {
        let get = |k: &str| {
            t.selection
                .get(k)
                .map(|v| format!("{:.2}", v.proportion))
                .unwrap_or_else(|| "-".into())
        };
        s.push_str(&format!(
            "{:<8} {:>10} {:>16} {:>14}\n",
            t.target,
            get("hist_l2"),
            get("trans_kernel_l2"),
            get("std_kernel_l2")
        ));
    }
    s
}

/// Aligned-text rendering of the Table-3-style mean L2 matrix.
pub fn mean_l2_table_text(report: &BivariateStudyReport) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<8} {:<8} {:>10} {:>16} {:>14}\n",
        "true", "fitted", "hist_l2", "trans_kernel_l2", "std_kernel_l2"
    ));
    for t in &report.targets {
        for (cand, per_est) in &t.mean_l2 {
            let get = |k: &str| {
                per_est
                    .get(k)
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into())
            };
            s.push_str(&format!(
                "{:<8} {:<8} {:>10} {:>16} {:>14}\n",
                t.target,
                cand,
                get("hist_l2"),
                get("trans_kernel_l2"),
                get("std_kernel_l2")
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_density_levels_are_flat() {
        let mut grid: DensityGrid<f64> = DensityGrid::uniform(&[0.0, 0.0], &[2.0, 0.5], 41).unwrap();
        grid.fill(|_| 1.0); // uniform density on a box of area 1
        let lv = highest_density_levels(&grid, &[0.25, 0.5, 0.9]).unwrap();
        for v in lv {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_mass_level_is_zero() {
        let mut grid: DensityGrid<f64> = DensityGrid::uniform(&[0.0], &[1.0], 101).unwrap();
        grid.fill(|_| 1.0);
        let lv = highest_density_levels(&grid, &[1.0]).unwrap();
        assert_eq!(lv[0], 0.0);
    }

    #[test]
    fn gaussian_half_mass_level() {
        let mut grid: DensityGrid<f64> = DensityGrid::uniform(&[-6.0, -6.0], &[6.0, 6.0], 601).unwrap();
        let inv2pi = 1.0 / (2.0 * std::f64::consts::PI);
        grid.fill(|x| inv2pi * (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp());
        let lv = highest_density_levels(&grid, &[0.5]).unwrap();
        // mass{f ≥ c} = 0.5 at c = 0.5/(2π) for the bivariate normal
        assert!((lv[0] - 0.5 * inv2pi).abs() < 2e-3, "level {}", lv[0]);
    }

    #[test]
    fn unnormalized_grid_rejected() {
        let mut grid: DensityGrid<f64> = DensityGrid::uniform(&[0.0], &[1.0], 51).unwrap();
        grid.fill(|_| 3.0);
        assert!(highest_density_levels(&grid, &[0.5]).is_err());
    }

    #[test]
    fn univariate_smoke_study_is_deterministic() {
        let mut cfg = ExperimentConfig::defaults(ExperimentId::Table1, 20250809);
        cfg.replicates = 3;
        cfg.n = 600;
        cfg.estimators = vec!["kpi".into(), "hist".into(), "gpd+".into(), "kpi*".into()];
        cfg.points_per_axis = Some(200);
        let a = run_univariate_study(&cfg).unwrap();
        let b = run_univariate_study(&cfg).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.targets.len(), 3);
        for t in &a.targets {
            assert!(t.replicates_used >= 2, "{}: too many failures", t.target);
            assert_eq!(t.log_l2.len(), 4);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = ExperimentConfig::defaults(ExperimentId::Table1, 77);
        cfg.replicates = 2;
        cfg.n = 400;
        cfg.estimators = vec!["kns".into(), "hist".into()];
        cfg.points_per_axis = Some(128);
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_univariate_study(&cfg)).unwrap();
        let b = pool4.install(|| run_univariate_study(&cfg)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
