//! Multivariate histogram density and tail-density estimation with the
//! normal-scale binwidth rule.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::data::{DataMatrix, TailRegion};
use crate::error::{Error, Result};
use crate::grid::DensityGrid;
use crate::kde::{Density, TailDensityModel};

/// Regular-partition histogram with sparse counts (tail grids are mostly
/// empty in d = 2, 3).
#[derive(Debug, Clone)]
pub struct HistogramModel {
    origin: Vec<f64>,
    binwidths: Vec<f64>,
    counts: BTreeMap<Vec<i64>, u64>,
    n: u64,
}

/// Normal-scale binwidth: b̂ⱼ = 2·3^{1/(d+2)}·π^{d/(d+4)}·sⱼ·n^{−1/(d+2)},
/// from the tail sample's marginal standard deviations.
pub fn ns_binwidth(tail_data: &DataMatrix) -> Result<Vec<f64>> {
    let n = tail_data.n();
    if n < 2 {
        return Err(Error::InvalidData("binwidth rule needs n >= 2".into()));
    }
    let d = tail_data.dim() as f64;
    let sd = tail_data.col_sd()?;
    if sd.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidData("constant margin: binwidth undefined".into()));
    }
    let factor = 2.0
        * 3f64.powf(1.0 / (d + 2.0))
        * std::f64::consts::PI.powf(d / (d + 4.0))
        * (n as f64).powf(-1.0 / (d + 2.0));
    Ok(sd.into_iter().map(|s| factor * s).collect())
}

impl HistogramModel {
    /// Bins every observation into left-closed, right-open hypercubes
    /// anchored at `origin`.
    pub fn fit(data: &DataMatrix, binwidths: &[f64], origin: &[f64]) -> Result<Self> {
        let d = data.dim();
        if binwidths.len() != d || origin.len() != d {
            return Err(Error::Domain("binwidth/origin dimension mismatch".into()));
        }
        if binwidths.iter().any(|b| !(b.is_finite() && *b > 0.0))
            || origin.iter().any(|o| !o.is_finite())
        {
            return Err(Error::Domain("binwidths must be positive and finite".into()));
        }
        let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
        for row in data.rows() {
            let idx: Vec<i64> = (0..d)
                .map(|j| ((row[j] - origin[j]) / binwidths[j]).floor() as i64)
                .collect();
            *counts.entry(idx).or_insert(0) += 1;
        }
        Ok(Self {
            origin: origin.to_vec(),
            binwidths: binwidths.to_vec(),
            counts,
            n: data.n() as u64,
        })
    }

    /// Fit with the normal-scale binwidth and the per-margin data minimum as
    /// the anchor.
    pub fn fit_ns(data: &DataMatrix) -> Result<Self> {
        let b = ns_binwidth(data)?;
        let origin = data.col_min();
        Self::fit(data, &b, &origin)
    }

    pub fn binwidths(&self) -> &[f64] {
        &self.binwidths
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    fn bin_volume(&self) -> f64 {
        self.binwidths.iter().product()
    }

    fn bin_index(&self, x: &[f64]) -> Vec<i64> {
        (0..x.len())
            .map(|j| ((x[j] - self.origin[j]) / self.binwidths[j]).floor() as i64)
            .collect()
    }

    /// Exact integral of the density over all occupied bins: counts sum to n
    /// so this is 1 by construction.
    pub fn integral(&self) -> f64 {
        let total: u64 = self.counts.values().sum();
        total as f64 / self.n as f64
    }

    /// Restriction to bins whose lower corner lies at or above u, i.e. the
    /// hypercubes covered by (u, ∞); straddling bins are excluded. Returns
    /// the restricted histogram and the covered mass (count/n).
    pub fn tail_restriction(&self, u: &[f64]) -> Result<(HistogramModel, f64)> {
        let d = self.origin.len();
        if u.len() != d {
            return Err(Error::Domain("threshold dimension mismatch".into()));
        }
        let eps: Vec<f64> = self.binwidths.iter().map(|b| 1e-9 * b).collect();
        let included: BTreeMap<Vec<i64>, u64> = self
            .counts
            .iter()
            .filter(|(idx, _)| {
                (0..d).all(|j| {
                    let lower = self.origin[j] + idx[j] as f64 * self.binwidths[j];
                    lower >= u[j] - eps[j]
                })
            })
            .map(|(idx, &c)| (idx.clone(), c))
            .collect();
        let covered: u64 = included.values().sum();
        if covered == 0 {
            return Err(Error::InvalidData(
                "no observations in hypercubes above the threshold".into(),
            ));
        }
        let mass = covered as f64 / self.n as f64;
        Ok((
            HistogramModel {
                origin: self.origin.clone(),
                binwidths: self.binwidths.clone(),
                counts: included,
                n: self.n,
            },
            mass,
        ))
    }

    /// Bounding box of the occupied bins.
    pub fn occupied_box(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.origin.len();
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for idx in self.counts.keys() {
            for j in 0..d {
                lo[j] = lo[j].min(idx[j]);
                hi[j] = hi[j].max(idx[j]);
            }
        }
        let lower = (0..d)
            .map(|j| self.origin[j] + lo[j] as f64 * self.binwidths[j])
            .collect();
        let upper = (0..d)
            .map(|j| self.origin[j] + (hi[j] + 1) as f64 * self.binwidths[j])
            .collect();
        (lower, upper)
    }
}

impl Density for HistogramModel {
    fn dim(&self) -> usize {
        self.origin.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        match self.counts.get(&self.bin_index(x)) {
            Some(&c) => c as f64 / (self.n as f64 * self.bin_volume()),
            None => 0.0,
        }
    }
}

/// Histogram estimator of the tail density: the restriction of the full
/// histogram to (u, ∞), renormalized by the covered-bin mass. The anchor is
/// aligned to u by default so no bin straddles the threshold.
pub fn hist_tail_density(data: &DataMatrix, region: &TailRegion) -> Result<HistTail> {
    let tail_sample = data.exceedances(&region.u)?;
    let b = ns_binwidth(&tail_sample)?;
    let full = HistogramModel::fit(data, &b, &region.u)?;
    hist_tail_from_model(&full, region)
}

/// Tail restriction of an already-fitted histogram.
pub fn hist_tail_from_model(model: &HistogramModel, region: &TailRegion) -> Result<HistTail> {
    let (restricted, mass) = model.tail_restriction(&region.u)?;
    Ok(HistTail {
        hist: Arc::new(restricted),
        normalizer: mass,
        region: region.clone(),
    })
}

/// A renormalized tail histogram.
#[derive(Clone)]
pub struct HistTail {
    hist: Arc<HistogramModel>,
    normalizer: f64,
    region: TailRegion,
}

impl HistTail {
    /// Covered-bin mass used as the normalizer.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn histogram(&self) -> &HistogramModel {
        &self.hist
    }

    pub fn region(&self) -> &TailRegion {
        &self.region
    }

    /// Exact integral of the renormalized tail density (a ratio of counts).
    pub fn integral(&self) -> f64 {
        self.hist.integral() / self.normalizer
    }

    /// Converts to the shared tail-density representation, with the grid
    /// covering the occupied bins.
    pub fn to_tail_model(&self, points_per_axis: usize) -> Result<TailDensityModel> {
        let (_, upper) = self.hist.occupied_box();
        let hist = self.hist.clone();
        let norm = self.normalizer;
        let base: Arc<dyn Density> = Arc::new(ScaledHist { hist, norm });
        TailDensityModel::from_tail_density_with_mass(
            base,
            &self.region,
            &upper,
            points_per_axis,
            self.normalizer,
        )
    }
}

struct ScaledHist {
    hist: Arc<HistogramModel>,
    norm: f64,
}

impl Density for ScaledHist {
    fn dim(&self) -> usize {
        self.hist.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.hist.eval(x) / self.norm
    }
}

impl Density for HistTail {
    fn dim(&self) -> usize {
        self.hist.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        if x.iter().zip(&self.region.u).any(|(&xj, &uj)| xj <= uj) {
            return 0.0;
        }
        self.hist.eval(x) / self.normalizer
    }
}

/// Integrated squared error of a histogram against a reference density over
/// a grid. Used by the rate and anchor-sensitivity checks.
pub fn hist_ise(model: &HistogramModel, reference: &dyn Density, grid: &DensityGrid<f64>) -> f64 {
    let mut total = 0.0;
    for flat in 0..grid.len() {
        let x = grid.point(flat);
        let diff = model.eval(&x) - reference.eval(&x);
        total += diff * diff * grid.weight(flat);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ns_binwidth_closed_form() {
        // d = 1, s = 1, n = 1000
        let col: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let data = DataMatrix::from_column(col).unwrap();
        let sd = data.col_sd().unwrap()[0];
        let b = ns_binwidth(&data).unwrap()[0];
        let expect = 2.0
            * 3f64.powf(1.0 / 3.0)
            * std::f64::consts::PI.powf(0.2)
            * sd
            * 1000f64.powf(-1.0 / 3.0);
        assert!((b - expect).abs() < 1e-12 * expect);
        // Frozen factor at s = 1, n = 1000.
        let unit = expect / sd;
        assert!((unit - 0.36266061061650184).abs() < 1e-12);

        // d = 2, s = (1,1), n = 4000 frozen factor.
        let f2 =
            2.0 * 3f64.powf(0.25) * std::f64::consts::PI.powf(1.0 / 3.0) * 4000f64.powf(-0.25);
        assert!((f2 - 0.48474343467641).abs() < 1e-10);
    }

    #[test]
    fn ns_binwidth_linear_in_scale() {
        let col: Vec<f64> = (0..200).map(|i| (i as f64).sin() * 2.0).collect();
        let data = DataMatrix::from_column(col.clone()).unwrap();
        let scaled = DataMatrix::from_column(col.iter().map(|v| v * 7.0).collect()).unwrap();
        let b0 = ns_binwidth(&data).unwrap()[0];
        let b1 = ns_binwidth(&scaled).unwrap()[0];
        assert!((b1 - 7.0 * b0).abs() < 1e-10 * b1);
    }

    #[test]
    fn single_bin_mass() {
        let data = DataMatrix::from_column(vec![0.1, 0.9]).unwrap();
        let h = HistogramModel::fit(&data, &[1.0], &[0.0]).unwrap();
        assert_eq!(h.bin_count(), 1);
        assert!((h.eval(&[0.5]) - 1.0).abs() < 1e-15);
        assert!((h.integral() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn left_closed_bin_edges() {
        let data = DataMatrix::from_column(vec![1.0, 0.5]).unwrap();
        let h = HistogramModel::fit(&data, &[1.0], &[0.0]).unwrap();
        // The point at exactly 1.0 belongs to [1, 2), not [0, 1).
        assert!((h.eval(&[1.0]) - 0.5).abs() < 1e-15);
        assert!((h.eval(&[0.99]) - 0.5).abs() < 1e-15);
        assert_eq!(h.eval(&[2.0]), 0.0);
    }

    #[test]
    fn total_density_integral_is_one() {
        let col: Vec<f64> = (0..500).map(|i| ((i * 37) % 113) as f64 * 0.11).collect();
        let data = DataMatrix::from_column(col).unwrap();
        let h = HistogramModel::fit_ns(&data).unwrap();
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_restriction_behaviour() {
        let col: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let data = DataMatrix::from_column(col).unwrap();

        // Threshold below all data: identical to the full histogram.
        let region = TailRegion::new(vec![-5.0], vec![-6.0], None).unwrap();
        let tail = hist_tail_density(&data, &region).unwrap();
        assert!((tail.normalizer() - 1.0).abs() < 1e-12);
        assert!((tail.integral() - 1.0).abs() < 1e-12);

        // Threshold above all data: error.
        let region_hi = TailRegion::new(vec![100.0], vec![0.0], None).unwrap();
        assert!(hist_tail_density(&data, &region_hi).is_err());

        // Interior threshold: renormalized tail integrates to one exactly.
        let region_mid = TailRegion::new(vec![5.0], vec![-1.0], None).unwrap();
        let tail = hist_tail_density(&data, &region_mid).unwrap();
        assert!((tail.integral() - 1.0).abs() < 1e-12);
        assert!(tail.normalizer() > 0.0 && tail.normalizer() < 1.0);
        assert_eq!(tail.eval(&[4.9]), 0.0);
    }

    #[test]
    fn anchor_shift_changes_the_estimate() {
        let col: Vec<f64> = (0..400)
            .map(|i| {
                let t = (i as f64 + 0.5) / 400.0;
                -(1.0 - t).ln()
            })
            .collect();
        let data = DataMatrix::from_column(col).unwrap();
        let b = ns_binwidth(&data).unwrap();
        let h0 = HistogramModel::fit(&data, &b, &[0.0]).unwrap();
        let h1 = HistogramModel::fit(&data, &b, &[b[0] / 2.0]).unwrap();
        let reference = crate::kde::FnDensity::new(1, |x: &[f64]| (-x[0]).exp());
        let grid = DensityGrid::uniform(&[0.0], &[6.0], 1201).unwrap();
        let ise0 = hist_ise(&h0, &reference, &grid);
        let ise1 = hist_ise(&h1, &reference, &grid);
        assert!(
            (ise0 - ise1).abs() > 1e-6,
            "anchor shift should move the ISE: {ise0} vs {ise1}"
        );
    }
}
