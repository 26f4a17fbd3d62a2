//! Spectra of scaled spin matrices and the semicircle reference.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::ensembles::ScaledMatrix;
use crate::error::{Error, Result};

/// QL sweeps allowed per eigenvalue before giving up.
const MAX_QL_SWEEPS: usize = 60;

/// Relative tolerance of the trace and Frobenius identities.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Implicit-shift QL on a symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (`e[i]` couples `i` and `i + 1`). Overwrites `d`
/// with the eigenvalues in no particular order. When `z` is given, the
/// plane rotations are accumulated into its columns.
fn tridiagonal_ql(d: &mut [f64], off: &[f64], mut z: Option<&mut DMatrix<f64>>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_QL_SWEEPS {
                return Err(Error::Numeric(format!(
                    "QL did not converge for eigenvalue {l} of {n} after {MAX_QL_SWEEPS} sweeps \
                     (off-diagonal {:e})",
                    e[l]
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    for k in 0..z.nrows() {
                        let zf = z[(k, i + 1)];
                        let zi = z[(k, i)];
                        z[(k, i + 1)] = s * zi + c * zf;
                        z[(k, i)] = c * zi - s * zf;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn check_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Ascending eigenvalues of a dense symmetric matrix (lower triangle is
/// read).
pub fn symmetric_eigenvalues(a: DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(&a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (diag, off) = a.symmetric_tridiagonalize().unpack_tridiagonal();
    let mut d: Vec<f64> = diag.iter().copied().collect();
    tridiagonal_ql(&mut d, off.as_slice(), None)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

/// Ascending eigenvalues and matching unit eigenvectors (as columns).
pub fn symmetric_eigen_decomposition(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(&a)?;
    let n = a.nrows();
    let (q, diag, off) = a.symmetric_tridiagonalize().unpack();
    let mut d: Vec<f64> = diag.iter().copied().collect();
    let mut z = q;
    tridiagonal_ql(&mut d, off.as_slice(), Some(&mut z))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| z[(r, order[c])]);
    Ok((values, vectors))
}

/// Ascending spectrum of `X / N^gamma`.
pub fn eigenvalues(a: &ScaledMatrix<'_>) -> Result<Vec<f64>> {
    symmetric_eigenvalues(a.to_dmatrix())
}

pub fn eigen_decomposition(a: &ScaledMatrix<'_>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    symmetric_eigen_decomposition(a.to_dmatrix())
}

/// `max_j ||A v_j - lambda_j v_j|| / ||A||` over the given pairs, with the
/// spectral norm taken as `max |lambda|`.
pub fn max_relative_residual(a: &DMatrix<f64>, values: &[f64], vectors: &DMatrix<f64>) -> f64 {
    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    values
        .iter()
        .enumerate()
        .map(|(j, &l)| {
            let v = vectors.column(j);
            (a * v - v * l).norm() / norm
        })
        .fold(0.0, f64::max)
}

/// `(1 / 2 pi) sqrt(4 - x^2)` on `[-2, 2]`.
pub fn semicircle_pdf(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

/// Catalan numbers `C_k = binom(2k, k) / (k + 1)`, exact for `k <= 30`.
pub fn catalan(k: u32) -> Result<u64> {
    if k > 30 {
        return Err(Error::Resource(format!("catalan({k}) is only computed for k <= 30")));
    }
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * 2 * (2 * i + 1) / (i + 2);
    }
    Ok(c as u64)
}

/// `∫ x^k dσ`: `C_{k/2}` for even `k`, 0 for odd `k`.
pub fn semicircle_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..(k / 2) as u64 {
        c = c * (2 * (2 * i + 1)) as f64 / (i + 2) as f64;
    }
    c
}

/// Kolmogorov distance between the empirical distribution of `sorted`
/// and the semicircle law, evaluated at the jumps.
pub fn ks_to_semicircle(sorted: &[f64]) -> f64 {
    ks_distance_to(sorted, semicircle_cdf)
}

pub fn ks_distance_to(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Sorted eigenvalues of a scaled matrix with derived statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    /// `moments[k - 1] = (1/N) sum lambda^k` for `k = 1..=k_max`.
    pub moments: Vec<f64>,
    pub ks_to_semicircle: f64,
    pub operator_norm: f64,
    pub scaling_exponent: f64,
}

impl SpectralSummary {
    /// `eigenvalues` must be non-empty; they are sorted here.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, k_max: u32, scaling_exponent: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Precondition("empty spectrum".into()));
        }
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        let moments = (1..=k_max).map(|k| power_mean(&eigenvalues, k)).collect();
        let ks = ks_to_semicircle(&eigenvalues);
        let norm = eigenvalues[0].abs().max(eigenvalues[eigenvalues.len() - 1].abs());
        Ok(Self {
            eigenvalues,
            moments,
            ks_to_semicircle: ks,
            operator_norm: norm,
            scaling_exponent,
        })
    }

    pub fn ks_distance(&self) -> f64 {
        self.ks_to_semicircle
    }

    /// `(1/N) sum_j lambda_j^k`.
    pub fn esd_moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self.moments.get(k as usize - 1) {
            Some(&m) => m,
            _ => power_mean(&self.eigenvalues, k),
        }
    }

    pub fn operator_norm(&self) -> f64 {
        self.operator_norm
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn power_mean(values: &[f64], k: u32) -> f64 {
    values.iter().map(|l| l.powi(k as i32)).sum::<f64>() / values.len() as f64
}

/// How far the spectrum is from the trace and Frobenius identities of
/// the matrix it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `|sum lambda - tr A| / (N max|lambda|)`.
    pub trace: f64,
    /// `|sum lambda^2 - ||A||_F^2| / ||A||_F^2`.
    pub frobenius: f64,
}

impl IdentityCheck {
    pub fn holds(&self) -> bool {
        self.trace <= IDENTITY_TOL && self.frobenius <= IDENTITY_TOL
    }
}

pub fn identity_check(a: &ScaledMatrix<'_>, eigenvalues: &[f64]) -> IdentityCheck {
    let n = eigenvalues.len() as f64;
    let norm = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let sum: f64 = eigenvalues.iter().sum();
    let sq: f64 = eigenvalues.iter().map(|l| l * l).sum();
    let fro = a.frobenius_sq();
    IdentityCheck {
        trace: (sum - a.trace()).abs() / (n * norm),
        frobenius: (sq - fro).abs() / fro,
    }
}

/// Eigensolve, verify the trace and Frobenius identities, and summarize.
pub fn summarize(a: &ScaledMatrix<'_>, k_max: u32) -> Result<SpectralSummary> {
    let eigs = eigenvalues(a)?;
    let check = identity_check(a, &eigs);
    if !check.holds() {
        return Err(Error::Numeric(format!("spectral identities violated: {check:?}")));
    }
    SpectralSummary::from_eigenvalues(eigs, k_max, a.exponent())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub empirical_density: f64,
    pub semicircle_density: f64,
}

/// Density histogram of pooled eigenvalues on `[lo, hi]` with bins of width
/// `width`, next to the semicircle mass of each bin divided by its width.
/// Values outside the range are counted in the normalization only.
pub fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Result<Vec<HistogramBin>> {
    if !(width > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("bad histogram range [{lo}, {hi}] / {width}")));
    }
    let bins = ((hi - lo) / width).round() as usize;
    let mut counts = vec![0usize; bins];
    for &v in values {
        if v >= lo && v < hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        } else if v == hi {
            counts[bins - 1] += 1;
        }
    }
    let total = values.len().max(1) as f64;
    Ok((0..bins)
        .map(|b| {
            let left = lo + b as f64 * width;
            let right = lo + (b + 1) as f64 * width;
            HistogramBin {
                left,
                right,
                empirical_density: counts[b] as f64 / (total * width),
                semicircle_density: (semicircle_cdf(right) - semicircle_cdf(left)) / width,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample, EnsembleConfig, SpinMatrix};
    use proptest::prelude::*;

    #[test]
    fn rank_one_spectra() {
        let two = SpinMatrix::ones(2).unwrap();
        let e = eigenvalues(&two.scale(0.0).unwrap()).unwrap();
        assert!(e[0].abs() < 1e-14 && (e[1] - 2.0).abs() < 1e-14);

        let n = 50;
        let ones = SpinMatrix::ones(n).unwrap();
        let e = eigenvalues(&ones.scale(0.0).unwrap()).unwrap();
        assert!(e[..n - 1].iter().all(|l| l.abs() < 1e-10));
        assert!((e[n - 1] - n as f64).abs() < 1e-10);

        let three = SpinMatrix::ones(3).unwrap();
        let e = eigenvalues(&three.scale(1.0).unwrap()).unwrap();
        assert!(e[0].abs() < 1e-14 && e[1].abs() < 1e-14 && (e[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residuals_are_small() {
        for (n, seed) in [(1, 1), (7, 2), (60, 3), (200, 4)] {
            let m = sample(&EnsembleConfig::full_cw(n, 1.5, seed)).unwrap();
            let a = m.scale(0.5).unwrap();
            let (vals, vecs) = eigen_decomposition(&a).unwrap();
            assert!(max_relative_residual(&a.to_dmatrix(), &vals, &vecs) < 1e-8);
            assert_eq!(vals, eigenvalues(&a).unwrap());
            let orth = (vecs.transpose() * &vecs - DMatrix::identity(n, n)).abs().max();
            assert!(orth < 1e-10);
        }
    }

    #[test]
    fn matches_nalgebra_solver() {
        let m = sample(&EnsembleConfig::iid(120, 5)).unwrap();
        let a = m.scale(0.5).unwrap().to_dmatrix();
        let mut reference: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(|x, y| x.total_cmp(y));
        let ours = symmetric_eigenvalues(a).unwrap();
        for (x, y) in ours.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn rejects_nan() {
        let mut a = DMatrix::identity(3, 3);
        a[(1, 1)] = f64::NAN;
        assert!(matches!(symmetric_eigenvalues(a), Err(Error::Numeric(_))));
    }

    #[test]
    fn semicircle_reference() {
        assert!((semicircle_pdf(0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(semicircle_pdf(2.0), 0.0);
        assert_eq!(semicircle_pdf(-2.5), 0.0);
        assert_eq!(semicircle_cdf(0.0), 0.5);
        assert_eq!(semicircle_cdf(2.0), 1.0);
        assert_eq!(semicircle_cdf(-2.0), 0.0);
        // substitute x = 2 sin u to remove the edge singularities
        let mass = crate::quadrature::integrate_composite(|u| semicircle_pdf(2.0 * u.sin()) * 2.0 * u.cos(), -PI / 2.0, PI / 2.0, 16);
        assert!((mass - 1.0).abs() < 1e-9);
        let upto1 = crate::quadrature::integrate_composite(|u| semicircle_pdf(2.0 * u.sin()) * 2.0 * u.cos(), -PI / 2.0, (0.5f64).asin(), 16);
        assert!((upto1 - semicircle_cdf(1.0)).abs() < 1e-9);
    }

    #[test]
    fn catalan_numbers() {
        // the convolution recurrence as an independent oracle
        let mut rec = vec![1u64];
        for n in 0..30 {
            let next = (0..=n).map(|i| rec[i] * rec[n - i]).sum();
            rec.push(next);
        }
        for k in 0..=30u32 {
            assert_eq!(catalan(k).unwrap(), rec[k as usize]);
        }
        assert_eq!(catalan(3).unwrap(), 5);
        assert_eq!(catalan(10).unwrap(), 16796);
        assert!(matches!(catalan(31), Err(Error::Resource(_))));
        assert_eq!(semicircle_moment(2), 1.0);
        assert_eq!(semicircle_moment(4), 2.0);
        assert_eq!(semicircle_moment(6), 5.0);
        assert_eq!(semicircle_moment(8), 14.0);
        assert_eq!(semicircle_moment(7), 0.0);
    }

    #[test]
    fn ks_examples() {
        let single = SpectralSummary::from_eigenvalues(vec![0.0], 2, 0.5).unwrap();
        assert!((single.ks_distance() - 0.5).abs() < 1e-15);

        let n = 400;
        let quantiles: Vec<f64> = (0..n)
            .map(|i| {
                let p = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (-2.0, 2.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if semicircle_cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        let ks = ks_to_semicircle(&quantiles);
        assert!(ks <= 0.5 / n as f64 + 1e-12, "{ks}");
        assert!(SpectralSummary::from_eigenvalues(vec![], 2, 0.5).is_err());
    }

    #[test]
    fn summary_identities() {
        let m = sample(&EnsembleConfig::full_cw(300, 0.5, 9)).unwrap();
        let a = m.scale(0.5).unwrap();
        let s = summarize(&a, 6).unwrap();
        assert!((s.esd_moment(2) - 1.0).abs() < 1e-10);
        let fro = s.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
        assert!(s.operator_norm() <= fro);
        assert_eq!(
            s.operator_norm(),
            s.eigenvalues[0].abs().max(s.eigenvalues[s.n() - 1].abs())
        );
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.esd_moment(1).abs() < 0.1);
    }

    #[test]
    fn histogram_mass() {
        let vals: Vec<f64> = (0..1000).map(|i| -1.9 + 3.8 * i as f64 / 999.0).collect();
        let h = histogram(&vals, -3.0, 3.0, 0.1).unwrap();
        assert_eq!(h.len(), 60);
        let mass: f64 = h.iter().map(|b| b.empirical_density * (b.right - b.left)).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let sc: f64 = h.iter().map(|b| b.semicircle_density * 0.1).sum();
        assert!((sc - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trace_and_frobenius(n in 1usize..40, seed in any::<u64>(), gamma in 0.0f64..1.5) {
            let m = sample(&EnsembleConfig::full_cw(n, 1.2, seed)).unwrap();
            let a = m.scale(gamma).unwrap();
            let e = eigenvalues(&a).unwrap();
            prop_assert!(identity_check(&a, &e).holds());
        }

        #[test]
        fn cdf_is_monotone(x in -2.5f64..2.5, dx in 0.0f64..1.0) {
            prop_assert!(semicircle_cdf(x + dx) >= semicircle_cdf(x));
        }
    }
}
