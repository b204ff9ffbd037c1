//! Data-driven bandwidth selection on the (transformed) sample: normal
//! scale, plug-in, unbiased cross-validation and smoothed cross-validation,
//! sharing one positive-definite matrix optimizer.
//!
//! All criteria are evaluated in closed form through Gaussian convolution
//! identities; no quadrature is involved.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kernels::{eval_scaled_chol, gaussian_roughness};
use crate::mat::{Chol, SymMat};
use crate::optimize::optimize_pd;

/// Sample sizes below this fall back to the normal-scale matrix: the CV
/// criteria are too unstable on tiny samples.
const MIN_N_FOR_OPTIMIZED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectorKind {
    Ns,
    Pi,
    Ucv,
    Scv,
}

impl SelectorKind {
    pub fn label(&self) -> &'static str {
        match self {
            SelectorKind::Ns => "NS",
            SelectorKind::Pi => "PI",
            SelectorKind::Ucv => "UCV",
            SelectorKind::Scv => "SCV",
        }
    }
}

/// Outcome of a bandwidth selection.
#[derive(Debug, Clone)]
pub struct SelectorResult {
    pub h: SymMat<f64>,
    pub selector: SelectorKind,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub pilot_g: Option<SymMat<f64>>,
    pub warnings: Vec<String>,
}

/// Σ_{i<j} f(Xᵢ − Xⱼ) with a fixed chunked reduction order, so the result is
/// identical at any worker count.
fn pair_sum(data: &DataMatrix, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
    let n = data.n();
    let d = data.dim();
    let chunk = 128usize;
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();
    let partials: Vec<f64> = starts
        .par_iter()
        .map(|&i0| {
            let mut acc = 0.0;
            let mut delta = [0.0f64; 3];
            for i in i0..(i0 + chunk).min(n) {
                let xi = data.row(i);
                for j in (i + 1)..n {
                    let xj = data.row(j);
                    for k in 0..d {
                        delta[k] = xi[k] - xj[k];
                    }
                    acc += f(&delta[..d]);
                }
            }
            acc
        })
        .collect();
    partials.iter().sum()
}

/// Normal-scale selector: Ĥ_NS = [4/((d+2)n)]^{2/(d+4)} S with S the sample
/// covariance of the input points.
pub fn ns_bandwidth(data: &DataMatrix) -> Result<SelectorResult> {
    let n = data.n();
    let d = data.dim();
    if n < d + 1 {
        return Err(Error::InvalidData(format!(
            "normal-scale selector needs n > d, got n = {n}, d = {d}"
        )));
    }
    let s = data.covariance()?;
    if !s.is_positive_definite() {
        return Err(Error::InvalidData(
            "sample covariance is singular; cannot form a normal-scale bandwidth".into(),
        ));
    }
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(2.0 / (d as f64 + 4.0));
    let h = s.scale(factor);
    Ok(SelectorResult {
        objective_value: 0.0,
        h,
        selector: SelectorKind::Ns,
        iterations: 0,
        converged: true,
        pilot_g: None,
        warnings: Vec::new(),
    })
}

/// Stage-one normal-reference pilot for the plug-in and SCV selectors:
/// G = [2/((d+4)n)]^{2/(d+6)} · 2S.
pub fn normal_scale_pilot(data: &DataMatrix) -> Result<SymMat<f64>> {
    let n = data.n() as f64;
    let d = data.dim() as f64;
    let s = data.covariance()?;
    if !s.is_positive_definite() {
        return Err(Error::InvalidData("singular covariance for the pilot".into()));
    }
    let factor = (2.0 / ((d + 4.0) * n)).powf(2.0 / (d + 6.0)) * 2.0;
    Ok(s.scale(factor))
}

/// Adds D^{⊗4}φ_G(δ)·weight into `acc` (length d⁴, Kronecker index order).
fn deriv4_accumulate(
    binv: &SymMat<f64>,
    chol: &Chol<f64>,
    delta: &[f64],
    weight: f64,
    acc: &mut [f64],
) {
    let d = delta.len();
    let phi = eval_scaled_chol(chol, delta);
    if phi == 0.0 {
        return;
    }
    let mut a = [0.0f64; 3];
    for i in 0..d {
        let mut s = 0.0;
        for j in 0..d {
            s += binv.get(i, j) * delta[j];
        }
        a[i] = s;
    }
    let b = |i: usize, j: usize| binv.get(i, j);
    let mut scratch = [0.0f64; 81];
    for i in 0..d {
        for j in i..d {
            for k in j..d {
                for l in k..d {
                    let quartic = a[i] * a[j] * a[k] * a[l];
                    let pair = a[i] * a[j] * b(k, l)
                        + a[i] * a[k] * b(j, l)
                        + a[i] * a[l] * b(j, k)
                        + a[j] * a[k] * b(i, l)
                        + a[j] * a[l] * b(i, k)
                        + a[k] * a[l] * b(i, j);
                    let double = b(i, j) * b(k, l) + b(i, k) * b(j, l) + b(i, l) * b(j, k);
                    scratch[((i * d + j) * d + k) * d + l] = (quartic - pair + double) * phi;
                }
            }
        }
    }
    // fan the canonical (sorted) entries out to all index permutations
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut s = [i, j, k, l];
                    s.sort_unstable();
                    let canonical = ((s[0] * d + s[1]) * d + s[2]) * d + s[3];
                    acc[((i * d + j) * d + k) * d + l] += weight * scratch[canonical];
                }
            }
        }
    }
}

/// ψ̂₄(G) = n⁻² Σᵢⱼ D^{⊗4} L_G(Yᵢ − Yⱼ), a vector of length d⁴.
pub fn psi4_estimate(data: &DataMatrix, g: &SymMat<f64>) -> Result<Vec<f64>> {
    let n = data.n();
    let d = data.dim();
    let chol = g.cholesky()?;
    let binv = g.inverse()?;
    let len = d * d * d * d;

    // Diagonal terms: n copies of D⊗4 L_G(0).
    let mut diag = vec![0.0; len];
    deriv4_accumulate(&binv, &chol, &vec![0.0; d], n as f64, &mut diag);

    // Off-diagonal pairs; D⊗4 is even in δ, so each unordered pair counts twice.
    let chunk = 128usize;
    let starts: Vec<usize> = (0..n).step_by(chunk).collect();
    let partials: Vec<Vec<f64>> = starts
        .par_iter()
        .map(|&i0| {
            let mut acc = vec![0.0; len];
            let mut delta = [0.0f64; 3];
            for i in i0..(i0 + chunk).min(n) {
                let xi = data.row(i);
                for j in (i + 1)..n {
                    let xj = data.row(j);
                    for k in 0..d {
                        delta[k] = xi[k] - xj[k];
                    }
                    deriv4_accumulate(&binv, &chol, &delta[..d], 2.0, &mut acc);
                }
            }
            acc
        })
        .collect();

    let mut total = diag;
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    let n2 = (n as f64) * (n as f64);
    for t in &mut total {
        *t /= n2;
    }
    Ok(total)
}

/// (vecᵀH ⊗ vecᵀH)·ψ, the quartic form in the plug-in bias term. ψ must be
/// index-permutation symmetric, which makes the ordering convention
/// immaterial.
fn contract_psi4(h: &SymMat<f64>, psi: &[f64]) -> f64 {
    let d = h.dim();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            let hij = h.get(i, j);
            for k in 0..d {
                for l in 0..d {
                    s += hij * h.get(k, l) * psi[((i * d + j) * d + k) * d + l];
                }
            }
        }
    }
    s
}

/// PI(H) = ¼ m₂²(K) (vecᵀH ⊗ vecᵀH) ψ̂₄(G) + n⁻¹ R(K) |H|^{−1/2}.
pub fn pi_objective(h: &SymMat<f64>, psi4: &[f64], n: usize) -> f64 {
    let d = h.dim();
    let det = match h.determinant() {
        Ok(v) if v > 0.0 => v,
        _ => return f64::INFINITY,
    };
    0.25 * contract_psi4(h, psi4) + gaussian_roughness::<f64>(d) / (n as f64 * det.sqrt())
}

fn fallback_ns(data: &DataMatrix, kind: SelectorKind) -> Result<SelectorResult> {
    let mut res = ns_bandwidth(data)?;
    res.selector = kind;
    res.warnings.push(format!(
        "n = {} < {MIN_N_FOR_OPTIMIZED}: {} selection is unstable, falling back to the normal-scale bandwidth",
        data.n(),
        kind.label()
    ));
    Ok(res)
}

/// Plug-in selector: minimizes PI(H) from the normal-scale start, with the
/// normal-reference pilot G.
pub fn pi_select(data: &DataMatrix) -> Result<SelectorResult> {
    if data.n() < MIN_N_FOR_OPTIMIZED {
        return fallback_ns(data, SelectorKind::Pi);
    }
    let g = normal_scale_pilot(data)?;
    let psi4 = psi4_estimate(data, &g)?;
    let start = ns_bandwidth(data)?.h;
    let n = data.n();
    let res = optimize_pd(|h| pi_objective(h, &psi4, n), &start)?;
    let mut warnings = Vec::new();
    if !res.converged {
        warnings.push("plug-in optimizer hit its iteration budget; returning best found".into());
    }
    Ok(SelectorResult {
        h: res.h,
        selector: SelectorKind::Pi,
        objective_value: res.value,
        iterations: res.iterations,
        converged: res.converged,
        pilot_g: Some(g),
        warnings,
    })
}

/// UCV(H) = ∫ f̂² − 2n⁻¹ Σᵢ f̂₋ᵢ(Yᵢ), computed in closed form:
/// ∫ f̂² = n⁻² Σᵢⱼ K_{2H}(Yᵢ−Yⱼ), and the leave-one-out sum carries the
/// [n(n−1)]⁻¹ normalization.
pub fn ucv_objective(data: &DataMatrix, h: &SymMat<f64>) -> f64 {
    let n = data.n() as f64;
    let d = data.dim();
    let chol2 = match h.scale(2.0).cholesky() {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let chol1 = match h.cholesky() {
        Ok(c) => c,
        Err(_) => return f64::INFINITY,
    };
    let off = pair_sum(data, |delta| {
        let int_term = eval_scaled_chol(&chol2, delta) / (n * n);
        let loo_term = eval_scaled_chol(&chol1, delta) / (n * (n - 1.0));
        2.0 * (int_term - 2.0 * loo_term)
    });
    // Diagonal of the ∫f̂² double sum: n⁻¹·K_{2H}(0) = n⁻¹R(K)|H|^{−1/2}.
    let diag = gaussian_roughness::<f64>(d)
        / (n * h.determinant().unwrap_or(f64::INFINITY).sqrt());
    off + diag
}

fn tie_warning(data: &DataMatrix, warnings: &mut Vec<String>) -> usize {
    let dups = data.duplicate_rows();
    if dups * 10 > data.n() {
        warnings.push(format!(
            "{dups} of {} observations are exact ties (> 10%); cross-validation criteria assume \
             replication-free data",
            data.n()
        ));
    }
    dups
}

/// Unbiased (least-squares) cross-validation selector.
pub fn ucv_select(data: &DataMatrix) -> Result<SelectorResult> {
    if data.n() < MIN_N_FOR_OPTIMIZED {
        return fallback_ns(data, SelectorKind::Ucv);
    }
    let mut warnings = Vec::new();
    tie_warning(data, &mut warnings);
    let start = ns_bandwidth(data)?.h;
    let res = optimize_pd(|h| ucv_objective(data, h), &start)?;
    if !res.converged {
        warnings.push("UCV optimizer hit its iteration budget; returning best found".into());
    }
    Ok(SelectorResult {
        h: res.h,
        selector: SelectorKind::Ucv,
        objective_value: res.value,
        iterations: res.iterations,
        converged: res.converged,
        pilot_g: None,
        warnings,
    })
}

/// SCV(H; G) = n⁻¹R(K)|H|^{−1/2}
///           + n⁻² Σᵢⱼ (K_H∗K_H∗L_G∗L_G − 2 K_H∗L_G∗L_G + L_G∗L_G)(Yᵢ−Yⱼ),
/// the three convolutions collapsing to single Gaussians with covariances
/// 2H+2G, H+2G and 2G.
///
/// At G = 0 the pilot is a Dirac delta: on replication-free data the 2G
/// term vanishes off the diagonal, the diagonal degenerates into constants,
/// and the criterion reduces to UCV exactly (the surviving off-diagonal
/// terms take UCV's weights in this limit).
pub fn scv_objective(data: &DataMatrix, h: &SymMat<f64>, g: &SymMat<f64>) -> f64 {
    let n = data.n() as f64;
    let d = data.dim();
    let det = match h.determinant() {
        Ok(v) if v > 0.0 => v,
        _ => return f64::INFINITY,
    };
    let variance_term = gaussian_roughness::<f64>(d) / (n * det.sqrt());

    if g.is_zero() {
        let chol2 = match h.scale(2.0).cholesky() {
            Ok(c) => c,
            Err(_) => return f64::INFINITY,
        };
        let chol1 = match h.cholesky() {
            Ok(c) => c,
            Err(_) => return f64::INFINITY,
        };
        let off = pair_sum(data, |delta| {
            2.0 * (eval_scaled_chol(&chol2, delta) / (n * n)
                - 2.0 * eval_scaled_chol(&chol1, delta) / (n * (n - 1.0)))
        });
        return variance_term + off;
    }

    let two_g = g.scale(2.0);
    let cov_a = match h.scale(2.0).add(&two_g) {
        Ok(m) => m,
        Err(_) => return f64::INFINITY,
    };
    let cov_b = match h.add(&two_g) {
        Ok(m) => m,
        Err(_) => return f64::INFINITY,
    };
    let (ca, cb, cg) = match (cov_a.cholesky(), cov_b.cholesky(), two_g.cholesky()) {
        (Ok(a), Ok(b), Ok(g)) => (a, b, g),
        _ => return f64::INFINITY,
    };
    let summand = |delta: &[f64]| {
        eval_scaled_chol(&ca, delta) - 2.0 * eval_scaled_chol(&cb, delta)
            + eval_scaled_chol(&cg, delta)
    };
    let zero = vec![0.0; d];
    let diag = summand(&zero) / n;
    let off = pair_sum(data, |delta| 2.0 * summand(delta)) / (n * n);
    variance_term + diag + off
}

/// Smoothed cross-validation with the normal-reference pilot.
pub fn scv_select(data: &DataMatrix) -> Result<SelectorResult> {
    if data.n() < MIN_N_FOR_OPTIMIZED {
        return fallback_ns(data, SelectorKind::Scv);
    }
    let g = normal_scale_pilot(data)?;
    scv_select_with_pilot(data, g)
}

/// Smoothed cross-validation with an explicit pilot; a zero pilot selects
/// the Dirac limit (identical to UCV on replication-free data).
pub fn scv_select_with_pilot(data: &DataMatrix, g: SymMat<f64>) -> Result<SelectorResult> {
    if data.n() < MIN_N_FOR_OPTIMIZED {
        return fallback_ns(data, SelectorKind::Scv);
    }
    let mut warnings = Vec::new();
    tie_warning(data, &mut warnings);
    let start = ns_bandwidth(data)?.h;
    let res = optimize_pd(|h| scv_objective(data, h, &g), &start)?;
    if !res.converged {
        warnings.push("SCV optimizer hit its iteration budget; returning best found".into());
    }
    Ok(SelectorResult {
        h: res.h,
        selector: SelectorKind::Scv,
        objective_value: res.value,
        iterations: res.iterations,
        converged: res.converged,
        pilot_g: Some(g),
        warnings,
    })
}

/// Dispatch by selector kind.
pub fn select(data: &DataMatrix, kind: SelectorKind) -> Result<SelectorResult> {
    match kind {
        SelectorKind::Ns => ns_bandwidth(data),
        SelectorKind::Pi => pi_select(data),
        SelectorKind::Ucv => ucv_select(data),
        SelectorKind::Scv => scv_select(data),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(n: usize, seed: u64, stream: u64) -> DataMatrix {
        let mut rng = RngStream::new(seed, stream).rng();
        let col: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        DataMatrix::from_column(col).unwrap()
    }

    fn normal_sample_2d(n: usize, seed: u64, stream: u64) -> DataMatrix {
        let mut rng = RngStream::new(seed, stream).rng();
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        DataMatrix::from_columns(&cols).unwrap()
    }

    #[test]
    fn ns_closed_form_d1() {
        let data = DataMatrix::from_column(
            (0..100).map(|i| (i as f64) * 0.1).collect::<Vec<_>>(),
        )
        .unwrap();
        let s = data.covariance().unwrap().get(0, 0);
        let res = ns_bandwidth(&data).unwrap();
        let expect = (4.0f64 / 300.0).powf(0.4) * s;
        assert!((res.h.get(0, 0) - expect).abs() < 1e-12 * expect);
        // Frozen value of the factor at unit variance.
        assert!(((4.0f64 / 300.0).powf(0.4) - 0.17781790722643998).abs() < 1e-15);
    }

    #[test]
    fn ns_is_scalar_multiple_of_covariance() {
        let data = normal_sample_2d(400, 7, 0);
        let s = data.covariance().unwrap();
        let res = ns_bandwidth(&data).unwrap();
        let factor = (4.0f64 / (4.0 * 400.0)).powf(2.0 / 6.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((res.h.get(i, j) - factor * s.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ns_scales_quadratically_with_data_scale() {
        let base = normal_sample(200, 9, 0);
        let a = 3.5;
        let scaled =
            DataMatrix::from_column(base.column(0).iter().map(|v| v * a).collect()).unwrap();
        let h0 = ns_bandwidth(&base).unwrap().h.get(0, 0);
        let h1 = ns_bandwidth(&scaled).unwrap().h.get(0, 0);
        assert!((h1 - a * a * h0).abs() < 1e-10 * h1);
    }

    #[test]
    fn psi4_single_point_is_self_pair() {
        let data = DataMatrix::new(vec![0.7], 1, 1).unwrap();
        let g = SymMat::from_rows(1, vec![1.0]).unwrap();
        let psi = psi4_estimate(&data, &g).unwrap();
        let expect = crate::kernels::deriv4_vector(&g, &[0.0]).unwrap();
        assert!((psi[0] - expect[0]).abs() < 1e-15);
    }

    #[test]
    fn psi4_two_identical_points() {
        let data = DataMatrix::from_column(vec![0.0, 0.0]).unwrap();
        let g = SymMat::from_rows(1, vec![1.0]).unwrap();
        let psi = psi4_estimate(&data, &g).unwrap();
        // All four pair differences are zero, so ψ̂₄ = φ⁗(0) = 3φ(0).
        assert!((psi[0] - 1.1968268412042982).abs() < 1e-12);
    }

    #[test]
    fn psi4_permutation_invariant() {
        let data = normal_sample_2d(60, 12, 0);
        let perm = {
            let mut rows: Vec<Vec<f64>> = data.rows().map(|r| r.to_vec()).collect();
            rows.reverse();
            rows.swap(3, 40);
            DataMatrix::new(rows.concat(), 60, 2).unwrap()
        };
        let g = normal_scale_pilot(&data).unwrap();
        let a = psi4_estimate(&data, &g).unwrap();
        let b = psi4_estimate(&perm, &g).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10 * x.abs().max(1e-30));
        }
    }

    #[test]
    fn pi_matches_grid_search_and_normal_reference() {
        let n = 10_000;
        let data = normal_sample(n, 202, 0);
        let res = pi_select(&data).unwrap();
        assert!(res.converged);
        let h = res.h.get(0, 0);

        // 1-d grid oracle over the same objective.
        let g = res.pilot_g.clone().unwrap();
        let psi4 = psi4_estimate(&data, &g).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let mut t = 1e-4;
        while t < 1.0 {
            let cand = SymMat::from_rows(1, vec![t]).unwrap();
            let v = pi_objective(&cand, &psi4, n);
            if v < best.0 {
                best = (v, t);
            }
            t *= 1.002;
        }
        assert!(
            (h - best.1).abs() < 2e-3 * best.1,
            "optimizer {h} vs grid {g}",
            g = best.1
        );

        // Within 15% of the analytic AMISE optimum for the normal target.
        let oracle = (4.0f64 / (3.0 * n as f64)).powf(0.4);
        assert!((h - oracle).abs() < 0.15 * oracle, "h = {h}, oracle = {oracle}");
    }

    #[test]
    fn pi_cannot_do_worse_than_its_start() {
        let data = normal_sample(500, 31, 0);
        let res = pi_select(&data).unwrap();
        let g = res.pilot_g.clone().unwrap();
        let psi4 = psi4_estimate(&data, &g).unwrap();
        let at_start = pi_objective(&ns_bandwidth(&data).unwrap().h, &psi4, 500);
        assert!(res.objective_value <= at_start + 1e-12);
    }

    #[test]
    fn pi_bandwidth_shrinks_with_n() {
        // |Ĥ| decreasing in n, checked in expectation over 50 replicates.
        let mut smaller = 0;
        for rep in 0..50 {
            let d1 = normal_sample(150, 777, rep);
            let d2 = normal_sample(300, 778, rep);
            let h1 = pi_select(&d1).unwrap().h.get(0, 0);
            let h2 = pi_select(&d2).unwrap().h.get(0, 0);
            if h2 < h1 {
                smaller += 1;
            }
        }
        assert!(smaller >= 40, "only {smaller}/50 replicates shrank");
    }

    #[test]
    fn ucv_value_matches_brute_force_two_points() {
        // Sample {0, 1}, H = 1: ∫f̂² has 4 terms via the identity
        // ∫K_h(·−a)K_h(·−b) = K_{h√2}(a−b); the leave-one-out sum has 2.
        let data = DataMatrix::from_column(vec![0.0, 1.0]).unwrap();
        let h = SymMat::from_rows(1, vec![1.0]).unwrap();
        let v = ucv_objective(&data, &h);

        let phi = |x: f64, var: f64| {
            (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let n = 2.0;
        let int_f2 = (phi(0.0, 2.0) + phi(1.0, 2.0) + phi(-1.0, 2.0) + phi(0.0, 2.0)) / (n * n);
        let loo = (phi(1.0, 1.0) + phi(-1.0, 1.0)) / (n * (n - 1.0));
        let brute = int_f2 - 2.0 * loo;
        assert!((v - brute).abs() < 1e-14, "{v} vs {brute}");
    }

    #[test]
    fn ucv_translation_invariant() {
        let data = normal_sample(80, 55, 0);
        let shifted =
            DataMatrix::from_column(data.column(0).iter().map(|v| v + 37.5).collect()).unwrap();
        let h = SymMat::from_rows(1, vec![0.3]).unwrap();
        let a = ucv_objective(&data, &h);
        let b = ucv_objective(&shifted, &h);
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }

    #[test]
    fn scv_with_zero_pilot_equals_ucv() {
        let data = normal_sample(300, 404, 0);
        assert_eq!(data.duplicate_rows(), 0);
        // Objectives coincide pointwise on replication-free data...
        for &t in &[0.05, 0.1, 0.3] {
            let h = SymMat::from_rows(1, vec![t]).unwrap();
            let u = ucv_objective(&data, &h);
            let s = scv_objective(&data, &h, &SymMat::zeros(1));
            assert!((u - s).abs() <= 1e-12 * u.abs().max(1e-30), "{u} vs {s}");
        }
        // ...so the argmins agree to optimizer tolerance.
        let ucv = ucv_select(&data).unwrap();
        let scv0 = scv_select_with_pilot(&data, SymMat::zeros(1)).unwrap();
        let rel = (ucv.h.get(0, 0) - scv0.h.get(0, 0)).abs() / ucv.h.get(0, 0);
        assert!(rel < 1e-6, "UCV {} vs SCV(0) {}", ucv.h.get(0, 0), scv0.h.get(0, 0));
    }

    #[test]
    fn scv_single_pair_summand_identity() {
        // The SCV summand at δ is φ_{2H+2G}(δ) − 2φ_{H+2G}(δ) + φ_{2G}(δ).
        let h = SymMat::from_rows(1, vec![0.4]).unwrap();
        let g = SymMat::from_rows(1, vec![0.1]).unwrap();
        let delta = 0.8;
        let phi = |x: f64, var: f64| {
            (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let expect = phi(delta, 2.0 * 0.4 + 2.0 * 0.1) - 2.0 * phi(delta, 0.4 + 2.0 * 0.1)
            + phi(delta, 2.0 * 0.1);

        // A two-point dataset isolates the single off-diagonal pair.
        let data = DataMatrix::from_column(vec![0.0, delta]).unwrap();
        let n = 2.0;
        let v = scv_objective(&data, &h, &g);
        let zero_summand = phi(0.0, 1.0) - 2.0 * phi(0.0, 0.6) + phi(0.0, 0.2);
        let variance_term = gaussian_roughness::<f64>(1) / (n * 0.4f64.sqrt());
        let reconstructed = variance_term + zero_summand / n + 2.0 * expect / (n * n);
        assert!((v - reconstructed).abs() < 1e-15);
    }

    #[test]
    fn scv_diverges_as_h_vanishes() {
        let data = normal_sample(50, 66, 0);
        let g = normal_scale_pilot(&data).unwrap();
        let big = scv_objective(&data, &SymMat::from_rows(1, vec![1e-8]).unwrap(), &g);
        let sane = scv_objective(&data, &SymMat::from_rows(1, vec![0.1]).unwrap(), &g);
        assert!(big > sane.abs() * 100.0);
    }

    #[test]
    fn small_samples_fall_back_to_ns() {
        let data = normal_sample(10, 5, 0);
        for kind in [SelectorKind::Pi, SelectorKind::Ucv, SelectorKind::Scv] {
            let res = select(&data, kind).unwrap();
            assert_eq!(res.selector, kind);
            assert!(!res.warnings.is_empty());
            let ns = ns_bandwidth(&data).unwrap();
            assert_eq!(res.h.get(0, 0), ns.h.get(0, 0));
        }
    }

    #[test]
    fn tie_heavy_data_warns() {
        let mut col: Vec<f64> = (0..30).map(|i| i as f64).collect();
        for i in 0..10 {
            col[20 + i] = 1.0;
        }
        let data = DataMatrix::from_column(col).unwrap();
        let res = ucv_select(&data).unwrap();
        assert!(res.warnings.iter().any(|w| w.contains("ties")));
    }

    #[test]
    fn all_selectors_positive_definite_on_gaussian_mixtures() {
        // Property fuzz over randomized mixture samples.
        let mut checked = 0;
        for trial in 0..1000u64 {
            let mut rng = RngStream::new(31_337, trial).rng();
            let d = if trial % 3 == 0 { 2 } else { 1 };
            let n = 25 + (trial % 30) as usize;
            let centers = [(0.0, 0.0), (2.5, -1.0)];
            let mut cols = vec![Vec::with_capacity(n); d];
            for _ in 0..n {
                let which = if rng.random::<f64>() < 0.5 { 0 } else { 1 };
                for (j, col) in cols.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let c = if j == 0 { centers[which].0 } else { centers[which].1 };
                    col.push(c + z * (0.5 + 0.2 * j as f64));
                }
            }
            let data = DataMatrix::from_columns(&cols).unwrap();
            for kind in [
                SelectorKind::Ns,
                SelectorKind::Pi,
                SelectorKind::Ucv,
                SelectorKind::Scv,
            ] {
                let res = select(&data, kind).unwrap();
                assert!(
                    res.h.is_positive_definite(),
                    "trial {trial} selector {kind:?} not PD"
                );
                assert!(res.objective_value.is_finite());
                checked += 1;
            }
        }
        assert_eq!(checked, 4000);
    }

    #[test]
    fn selector_ratio_envelope_on_normal_data() {
        let data = normal_sample(300, 909, 0);
        let ns = ns_bandwidth(&data).unwrap().h.get(0, 0);
        for kind in [SelectorKind::Pi, SelectorKind::Ucv, SelectorKind::Scv] {
            let h = select(&data, kind).unwrap().h.get(0, 0);
            let ratio = h / ns;
            assert!(
                (0.2..=5.0).contains(&ratio),
                "{kind:?} ratio {ratio} outside the sanity envelope"
            );
        }
    }

    #[test]
    fn asymptotic_mise_minimizer_matches_normal_reference() {
        // d = 1: minimizing ¼H²ψ₄ + R(K)/(n√H) over H = h² gives
        // H* = [R(K)/(n ψ₄)]^{2/5}; with ψ₄ = 3/(8√π) this is (4/(3n))^{2/5}.
        let psi4 = 3.0 / (8.0 * std::f64::consts::PI.sqrt());
        for &n in &[100usize, 2000, 50_000] {
            let h_star = (gaussian_roughness::<f64>(1) / (n as f64 * psi4)).powf(0.4);
            let reference = (4.0 / (3.0 * n as f64)).powf(0.4);
            assert!((h_star - reference).abs() < 1e-10 * reference);

            let mise =
                |h: f64| 0.25 * h * h * psi4 + gaussian_roughness::<f64>(1) / (n as f64 * h.sqrt());
            let eps = 1e-6 * h_star;
            assert!(mise(h_star) <= mise(h_star + eps));
            assert!(mise(h_star) <= mise(h_star - eps));
        }
    }
}
