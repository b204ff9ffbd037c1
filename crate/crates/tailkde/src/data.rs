//! Observation matrices, sample statistics, threshold regions and CSV
//! ingestion.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::SymMat;
use crate::transform::{default_offset_columns, LogTransform};

/// Which space the observations live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    Original,
    Transformed,
}

/// An n×d sample of real observations, row-major, with stable column order.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
    space: Space,
}

impl DataMatrix {
    /// Builds from row-major values. Dimension must be 1..=3 and every entry
    /// finite. Single-observation matrices are allowed; operations with
    /// stronger sample-size requirements enforce them individually.
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        Self::with_space(values, n, d, Space::Original)
    }

    pub fn with_space(values: Vec<f64>, n: usize, d: usize, space: Space) -> Result<Self> {
        if d == 0 || d > 3 {
            return Err(Error::InvalidData(format!("dimension {d} not in 1..=3")));
        }
        if n == 0 {
            return Err(Error::InvalidData("empty sample".into()));
        }
        if values.len() != n * d {
            return Err(Error::InvalidData(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { values, n, d, space })
    }

    pub fn from_column(col: Vec<f64>) -> Result<Self> {
        let n = col.len();
        Self::new(col, n, 1)
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let d = cols.len();
        if d == 0 {
            return Err(Error::InvalidData("no columns".into()));
        }
        let n = cols[0].len();
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidData("ragged columns".into()));
        }
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            for col in cols {
                values.push(col[i]);
            }
        }
        Self::new(values, n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn space(&self) -> Space {
        self.space
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.d + j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|j| self.column(j)).collect()
    }

    pub fn col_min(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| (0..self.n).map(|i| self.values[i * self.d + j]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn col_max(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| {
                (0..self.n)
                    .map(|i| self.values[i * self.d + j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    pub fn col_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for row in self.rows() {
            for j in 0..self.d {
                m[j] += row[j];
            }
        }
        for v in &mut m {
            *v /= self.n as f64;
        }
        m
    }

    /// Per-column sample standard deviations (divisor n−1).
    pub fn col_sd(&self) -> Result<Vec<f64>> {
        if self.n < 2 {
            return Err(Error::InvalidData("need n >= 2 for standard deviations".into()));
        }
        let mean = self.col_mean();
        let mut s = vec![0.0; self.d];
        for row in self.rows() {
            for j in 0..self.d {
                let c = row[j] - mean[j];
                s[j] += c * c;
            }
        }
        Ok(s.into_iter().map(|v| (v / (self.n as f64 - 1.0)).sqrt()).collect())
    }

    /// Sample covariance matrix (divisor n−1).
    pub fn covariance(&self) -> Result<SymMat<f64>> {
        if self.n < 2 {
            return Err(Error::InvalidData("need n >= 2 for a covariance".into()));
        }
        let mean = self.col_mean();
        let d = self.d;
        let mut acc = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                let ci = row[i] - mean[i];
                for j in i..d {
                    acc[i * d + j] += ci * (row[j] - mean[j]);
                }
            }
        }
        let denom = self.n as f64 - 1.0;
        let mut elems = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = acc[i * d + j] / denom;
                elems[i * d + j] = v;
                elems[j * d + i] = v;
            }
        }
        SymMat::from_rows(d, elems)
    }

    /// Per-column order-statistic quantile with type-7 interpolation.
    pub fn empirical_quantile(&self, p: f64) -> Result<Vec<f64>> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} not in (0, 1)")));
        }
        let mut out = Vec::with_capacity(self.d);
        for j in 0..self.d {
            let mut col = self.column(j);
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.push(quantile_type7(&col, p));
        }
        Ok(out)
    }

    /// Rows with every coordinate strictly above `u`.
    pub fn exceedances(&self, u: &[f64]) -> Result<DataMatrix> {
        let rows: Vec<&[f64]> = self
            .rows()
            .filter(|r| r.iter().zip(u).all(|(x, t)| x > t))
            .collect();
        if rows.is_empty() {
            return Err(Error::InvalidData("no observations above the threshold".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for r in &rows {
            values.extend_from_slice(r);
        }
        DataMatrix::with_space(values, rows.len(), self.d, self.space)
    }

    /// Applies the log transform row-wise, yielding the Y sample.
    pub fn transformed(&self, t: &LogTransform<f64>) -> Result<DataMatrix> {
        if t.dim() != self.d {
            return Err(Error::Domain("transform dimension mismatch".into()));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.rows() {
            if !t.contains(row) {
                return Err(Error::Domain(format!(
                    "observation {row:?} at or below the transform offset {:?}",
                    t.offset()
                )));
            }
            values.extend(t.forward(row)?);
        }
        DataMatrix::with_space(values, self.n, self.d, Space::Transformed)
    }

    /// Number of rows that coincide exactly with an earlier row.
    pub fn duplicate_rows(&self) -> usize {
        use std::collections::HashSet;
        let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(self.n);
        let mut dups = 0;
        for row in self.rows() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                dups += 1;
            }
        }
        dups
    }
}

/// Sorted input; linear interpolation of order statistics (type 7).
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Threshold vector u and lower transform offset u0 defining the tail region
/// (u, ∞) and the transform domain (u0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRegion {
    pub u: Vec<f64>,
    pub u0: Vec<f64>,
    pub quantile_level: Option<f64>,
}

impl TailRegion {
    pub fn new(u: Vec<f64>, u0: Vec<f64>, quantile_level: Option<f64>) -> Result<Self> {
        if u.len() != u0.len() || u.is_empty() || u.len() > 3 {
            return Err(Error::Domain("threshold dimension must match offset, in 1..=3".into()));
        }
        if u.iter().chain(&u0).any(|v| !v.is_finite()) {
            return Err(Error::Domain("threshold values must be finite".into()));
        }
        for j in 0..u.len() {
            if u0[j] >= u[j] {
                return Err(Error::Domain(format!(
                    "offset u0[{j}] = {} must lie strictly below u[{j}] = {}",
                    u0[j], u[j]
                )));
            }
        }
        Ok(Self { u, u0, quantile_level })
    }

    /// Threshold at the per-column p-quantile, offset from the default
    /// min − 0.05·range rule.
    pub fn from_quantile(data: &DataMatrix, p: f64) -> Result<Self> {
        let u = data.empirical_quantile(p)?;
        let u0 = default_offset_columns(&data.columns())?;
        Self::new(u, u0, Some(p))
    }

    /// Fixed threshold values with the default offset rule.
    pub fn from_threshold(data: &DataMatrix, u: Vec<f64>) -> Result<Self> {
        let u0 = default_offset_columns(&data.columns())?;
        Self::new(u, u0, None)
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn transform(&self) -> Result<LogTransform<f64>> {
        LogTransform::new(self.u0.clone())
    }
}

/// CSV ingestion: comma-separated, optional single header row (auto-detected
/// by a non-numeric first row), one observation per row.
pub fn read_csv<P: AsRef<Path>>(path: P, cols: Option<&[usize]>) -> Result<DataMatrix> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::InvalidData(format!("cannot open {}: {e}", path.as_ref().display()))
    })?;
    read_csv_reader(file, cols)
}

pub fn read_csv_reader<R: Read>(reader: R, cols: Option<&[usize]>) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r?,
        None => return Err(Error::InvalidData("empty CSV input".into())),
    };

    let width = first.len();
    let selected: Vec<usize> = match cols {
        Some(c) => c.to_vec(),
        None => (0..width).collect(),
    };
    if selected.is_empty() || selected.len() > 3 {
        return Err(Error::Config("select between 1 and 3 columns".into()));
    }
    for &j in &selected {
        if j >= width {
            return Err(Error::Config(format!(
                "column index {j} out of range for {width}-column input"
            )));
        }
    }

    let parse_row = |rec: &csv::StringRecord, line: usize| -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(selected.len());
        for &j in &selected {
            let cell = rec.get(j).unwrap_or("").trim();
            if cell.is_empty() {
                return Err(Error::InvalidData(format!(
                    "blank cell at row {line}, column {j}"
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::InvalidData(format!("non-numeric cell {cell:?} at row {line}, column {j}"))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite value at row {line}, column {j}"
                )));
            }
            row.push(v);
        }
        Ok(row)
    };

    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    // Header auto-detection: a first row with any non-numeric selected cell.
    let first_is_header = selected
        .iter()
        .any(|&j| first.get(j).map_or(true, |c| c.trim().parse::<f64>().is_err()));
    if !first_is_header {
        values.extend(parse_row(&first, 1)?);
        n += 1;
    }
    for (k, rec) in records.enumerate() {
        let rec = rec?;
        values.extend(parse_row(&rec, k + 2)?);
        n += 1;
    }
    if n < 2 {
        return Err(Error::InvalidData(
            "ingested datasets need at least 2 observations".into(),
        ));
    }
    DataMatrix::new(values, n, selected.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_examples() {
        let d = DataMatrix::from_column(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.empirical_quantile(0.5).unwrap()[0], 3.0);

        let d = DataMatrix::from_column(vec![0.0, 1.0]).unwrap();
        assert!((d.empirical_quantile(0.95).unwrap()[0] - 0.95).abs() < 1e-15);

        assert!(d.empirical_quantile(0.0).is_err());
        assert!(d.empirical_quantile(1.0).is_err());
    }

    #[test]
    fn quantile_monotone_in_p() {
        let d = DataMatrix::from_column(vec![3.0, -1.0, 7.0, 2.0, 2.5, 9.0, 0.1]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..40 {
            let p = k as f64 / 40.0;
            let q = d.empirical_quantile(p).unwrap()[0];
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn covariance_of_known_sample() {
        let d = DataMatrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]]).unwrap();
        let s = d.covariance().unwrap();
        assert!((s.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((s.get(0, 1) - 2.0).abs() < 1e-14);
        assert!((s.get(1, 1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_nan_with_location() {
        let err = DataMatrix::new(vec![1.0, f64::NAN, 3.0, 4.0], 2, 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 0") && msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn csv_header_autodetect() {
        let with_header = "temp,humidity\n1.5,10\n2.5,20\n3.5,30\n";
        let d = read_csv_reader(with_header.as_bytes(), None).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.dim(), 2);
        assert_eq!(d.row(0), &[1.5, 10.0]);

        let no_header = "1.5,10\n2.5,20\n";
        let d = read_csv_reader(no_header.as_bytes(), None).unwrap();
        assert_eq!(d.n(), 2);
    }

    #[test]
    fn csv_rejects_blank_and_nan_cells() {
        let bad = "1.0,2.0\n3.0,\n";
        let err = read_csv_reader(bad.as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("row 2"));

        let nan = "1.0\nNaN\n2.0\n";
        assert!(read_csv_reader(nan.as_bytes(), None).is_err());
    }

    #[test]
    fn csv_column_selection() {
        let body = "a,b,c\n1,2,3\n4,5,6\n";
        let d = read_csv_reader(body.as_bytes(), Some(&[2, 0])).unwrap();
        assert_eq!(d.row(0), &[3.0, 1.0]);
        assert_eq!(d.row(1), &[6.0, 4.0]);
        assert!(read_csv_reader(body.as_bytes(), Some(&[9])).is_err());
    }

    #[test]
    fn tail_region_validation() {
        assert!(TailRegion::new(vec![1.0], vec![0.0], None).is_ok());
        assert!(TailRegion::new(vec![1.0], vec![1.0], None).is_err());
        assert!(TailRegion::new(vec![1.0, 2.0], vec![0.0], None).is_err());
    }

    #[test]
    fn exceedances_filter() {
        let d = DataMatrix::from_columns(&[vec![1.0, 5.0, 3.0], vec![1.0, 5.0, 0.5]]).unwrap();
        let e = d.exceedances(&[2.0, 0.6]).unwrap();
        assert_eq!(e.n(), 1);
        assert_eq!(e.row(0), &[5.0, 5.0]);
        assert!(d.exceedances(&[10.0, 10.0]).is_err());
    }

    #[test]
    fn duplicate_row_count() {
        let d = DataMatrix::from_column(vec![1.0, 2.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.duplicate_rows(), 2);
    }
}
