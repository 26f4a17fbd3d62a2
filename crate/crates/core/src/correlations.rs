//! Correlations of spin entries: quadrature, Laplace asymptotics and Monte
//! Carlo, plus a finite-grid check of `N^(l/2)`-decay of `l`-point
//! correlations.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::definetti::{find_minimum, laplace_moment_asymptotic, DeFinettiMeasure};
use crate::ensembles::{EnsembleConfig, Sampler, SpinMatrix};
use crate::error::{Error, Result};
use crate::spectral::eigenvalues;

/// Fewest replicas accepted by the Monte Carlo estimators.
pub const MIN_REPLICAS: usize = 100;

/// `E[X_{i_1} ... X_{i_K}]` at distinct positions: the `K`-th moment of the
/// mixing measure.
pub fn exact_correlation(m: &DeFinettiMeasure, k: u32) -> f64 {
    m.moment(k)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { estimate: mean, stderr: (var / n).sqrt(), samples: xs.len() }
    }

    /// `|estimate - reference|` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = (self.estimate - reference).abs();
        if self.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.stderr
        }
    }
}

/// Draws replicas `0..replicas` in parallel and maps each to a number;
/// results are kept in replica order.
pub fn map_replicas<F>(sampler: &Sampler, replicas: usize, f: F) -> Vec<f64>
where
    F: Fn(&SpinMatrix) -> f64 + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| f(&sampler.sample_replica(r)))
        .collect()
}

fn normalize_positions(positions: &[(usize, usize)], n: usize) -> Result<Vec<(usize, usize)>> {
    let mut seen = Vec::with_capacity(positions.len());
    for &(i, j) in positions {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Precondition(format!("position ({i}, {j}) outside 1..={n}")));
        }
        let p = (i.min(j), i.max(j));
        if seen.contains(&p) {
            return Err(Error::Precondition(format!(
                "position ({i}, {j}) repeats an earlier entry of the symmetric matrix"
            )));
        }
        seen.push(p);
    }
    Ok(seen)
}

/// Monte Carlo estimate of `E prod_p X(p)` over `replicas` independent
/// matrices drawn from `(cfg.seed, r)` for `r = 0..replicas`. Positions are
/// 1-based and must be distinct as unordered pairs.
pub fn mc_correlation(cfg: &EnsembleConfig, positions: &[(usize, usize)], replicas: usize) -> Result<McEstimate> {
    let pos = normalize_positions(positions, cfg.n)?;
    if replicas < MIN_REPLICAS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    let sampler = Sampler::new(cfg)?;
    let xs = map_replicas(&sampler, replicas, |m| {
        pos.iter().map(|&(i, j)| m.get(i - 1, j - 1) as f64).product()
    });
    Ok(McEstimate::from_samples(&xs))
}

/// `(1/N) tr (X / N^gamma)^k` of one matrix. Small matrices use matrix
/// powers, larger ones the spectrum.
pub fn normalized_trace_power(m: &SpinMatrix, k: u32, gamma: f64) -> Result<f64> {
    let a = m.scale(gamma)?;
    let n = m.n();
    if n <= 64 {
        let d = a.to_dmatrix();
        let mut p = DMatrix::identity(n, n);
        for _ in 0..k {
            p = &p * &d;
        }
        Ok(p.trace() / n as f64)
    } else {
        let e = eigenvalues(&a)?;
        Ok(e.iter().map(|l| l.powi(k as i32)).sum::<f64>() / n as f64)
    }
}

/// Monte Carlo estimate of `E[(1/N) tr (X / N^gamma)^k]`.
pub fn mc_trace_moment(cfg: &EnsembleConfig, k: u32, gamma: f64, samples: usize) -> Result<McEstimate> {
    if samples < 2 {
        return Err(Error::Precondition("need at least 2 samples".into()));
    }
    let sampler = Sampler::new(cfg)?;
    let xs: Vec<Result<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|r| normalized_trace_power(&sampler.sample_replica(r), k, gamma))
        .collect();
    let xs = xs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&xs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub k: u32,
    pub exact: f64,
    /// Laplace leading term; absent when the potential's minimum cannot be
    /// classified or the measure is a point mass.
    pub asymptotic: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub scale: f64,
    pub label: String,
}

/// Exact, asymptotic and (when `replicas` is given) Monte Carlo `K`-point
/// correlation of an ensemble with a shared latent parameter. The Monte
/// Carlo positions are `(1, 2), (1, 3), ..., (1, K + 1)`.
pub fn correlation_report(cfg: &EnsembleConfig, k: u32, replicas: Option<usize>) -> Result<CorrelationReport> {
    let m = cfg.shared_measure()?;
    let exact = exact_correlation(&m, k);
    let scale = m.scale().unwrap_or(0.0);
    let asymptotic = match m.potential() {
        Some(p) => find_minimum(p.as_ref())
            .ok()
            .and_then(|e| laplace_moment_asymptotic(&e, k, scale).ok()),
        None => None,
    };
    let (mc_estimate, mc_stderr) = match replicas {
        Some(r) if k >= 1 => {
            if cfg.n < k as usize + 1 {
                return Err(Error::Precondition(format!(
                    "{k} distinct positions in row 1 need N >= {}",
                    k + 1
                )));
            }
            let positions: Vec<(usize, usize)> = (0..k as usize).map(|j| (1, j + 2)).collect();
            let est = mc_correlation(cfg, &positions, r)?;
            (Some(est.estimate), Some(est.stderr))
        }
        _ => (None, None),
    };
    Ok(CorrelationReport {
        k,
        exact,
        asymptotic,
        mc_estimate,
        mc_stderr,
        scale,
        label: m.label(),
    })
}

/// Growth per decade below which a normalized correlation counts as
/// bounded.
pub const BOUNDED_GROWTH_PER_DECADE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct UncorrelatedFit {
    pub ell: u32,
    /// `(N, |∫ t^l dμ_N|)`.
    pub observed: Vec<(usize, f64)>,
    /// `(N, N^(l/2) |∫ t^l dμ_N|)`.
    pub normalized: Vec<(usize, f64)>,
    pub fitted_constant: f64,
    /// `(N, |E X^2 - 1|)`, identically zero for spins.
    pub variance_gap: Vec<(usize, f64)>,
    /// Relative growth per decade of `N` between the last two grid points.
    pub growth_per_decade: f64,
    pub bounded: bool,
}

/// Evaluates `N^(l/2) |∫ t^l dμ_N|` on `n_grid` and decides whether it
/// stays bounded: either it does not rise strictly across the three largest
/// grid points with its maximum before the last point, or its growth over
/// the last grid step is below 5% per decade.
pub fn check_approx_uncorrelated<F>(measure_for: F, ell: u32, n_grid: &[usize]) -> Result<UncorrelatedFit>
where
    F: Fn(usize) -> Result<DeFinettiMeasure>,
{
    if ell == 0 {
        return Err(Error::Domain("l must be at least 1".into()));
    }
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("need an increasing grid of at least three N".into()));
    }
    let mut observed = Vec::new();
    let mut normalized = Vec::new();
    for &n in n_grid {
        let v = measure_for(n)?.moment(ell).abs();
        observed.push((n, v));
        normalized.push((n, (n as f64).powf(ell as f64 / 2.0) * v));
    }
    let vals: Vec<f64> = normalized.iter().map(|p| p.1).collect();
    let fitted = vals.iter().copied().fold(0.0, f64::max);
    let len = vals.len();
    let rising_tail = vals[len - 3] < vals[len - 2] && vals[len - 2] < vals[len - 1];
    let max_before_last = vals[..len - 1].iter().any(|&v| v >= vals[len - 1]);
    let (n0, n1) = (n_grid[len - 2] as f64, n_grid[len - 1] as f64);
    let growth = if vals[len - 2] > 0.0 {
        (vals[len - 1] / vals[len - 2]).powf(1.0 / (n1 / n0).log10()) - 1.0
    } else if vals[len - 1] > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let bounded = (!rising_tail && max_before_last) || growth < BOUNDED_GROWTH_PER_DECADE;
    Ok(UncorrelatedFit {
        ell,
        observed,
        normalized,
        fitted_constant: fitted,
        variance_gap: n_grid.iter().map(|&n| (n, 0.0)).collect(),
        growth_per_decade: growth,
        bounded,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::{magnetization, CurieWeiss};
    use std::sync::Arc;

    fn cw(beta: f64, scale: f64) -> DeFinettiMeasure {
        DeFinettiMeasure::new(Arc::new(CurieWeiss::new(beta).unwrap()), scale).unwrap()
    }

    #[test]
    fn exact_examples() {
        assert_eq!(exact_correlation(&cw(0.5, 1e4), 0), 1.0);
        let m2 = magnetization(2.0);
        assert!((exact_correlation(&cw(2.0, 1e6), 2) / (m2 * m2) - 1.0).abs() < 0.01);
        let k4 = exact_correlation(&cw(0.5, 1e4), 4);
        assert!((k4 / 3e-8 - 1.0).abs() < 0.1);
    }

    #[test]
    fn positions_are_checked() {
        let cfg = EnsembleConfig::iid(10, 1);
        assert!(matches!(mc_correlation(&cfg, &[(1, 2), (2, 1)], 200), Err(Error::Precondition(_))));
        assert!(matches!(mc_correlation(&cfg, &[(1, 11)], 200), Err(Error::Precondition(_))));
        assert!(matches!(mc_correlation(&cfg, &[(1, 2)], 50), Err(Error::Precondition(_))));
    }

    #[test]
    fn iid_is_uncorrelated() {
        let est = mc_correlation(&EnsembleConfig::iid(10, 4), &[(1, 2), (3, 4)], 2000).unwrap();
        assert!(est.z_score(0.0) < 3.0, "{est:?}");
    }

    #[test]
    fn mc_matches_quadrature() {
        let cfg = EnsembleConfig::full_cw(100, 0.5, 5);
        let est = mc_correlation(&cfg, &[(1, 2), (3, 4)], 4000).unwrap();
        let exact = exact_correlation(&cfg.shared_measure().unwrap(), 2);
        assert!(est.z_score(exact) < 3.0, "{est:?} vs {exact}");

        let cfg = EnsembleConfig::full_cw(100, 1.5, 6);
        let est = mc_correlation(&cfg, &[(1, 2), (3, 4)], 2000).unwrap();
        let m = magnetization(1.5);
        assert!((est.estimate - m * m).abs() < 3.0 * est.stderr + 0.01, "{est:?}");
    }

    #[test]
    fn reports() {
        let r = correlation_report(&EnsembleConfig::full_cw(20, 0.5, 1), 3, Some(200)).unwrap();
        assert_eq!(r.exact, 0.0);
        assert_eq!(r.asymptotic, Some(0.0));
        assert!(r.mc_stderr.unwrap() >= 0.0);
        let iid = correlation_report(&EnsembleConfig::iid(5, 1), 2, None).unwrap();
        assert_eq!((iid.exact, iid.asymptotic), (0.0, None));
        assert!(correlation_report(&EnsembleConfig::full_cw(3, 0.5, 1), 4, Some(200)).is_err());
    }

    #[test]
    fn mc_trace_moment_small() {
        // (1/N) tr A^2 = 1 exactly
        let est = mc_trace_moment(&EnsembleConfig::full_cw(4, 1.5, 1), 2, 0.5, 50).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-12 && est.stderr < 1e-12);
        let m = SpinMatrix::ones(80).unwrap();
        assert!((normalized_trace_power(&m, 3, 1.0).unwrap() - 1.0 / 80.0).abs() < 1e-10);
    }

    #[test]
    fn uncorrelated_criterion() {
        let grid = [100, 300, 1000, 3000, 10000];
        let full = |n: usize| DeFinettiMeasure::new(Arc::new(CurieWeiss::new(0.5).unwrap()), (n * n) as f64);
        let fit = check_approx_uncorrelated(full, 2, &grid).unwrap();
        assert!(fit.bounded && fit.fitted_constant < 0.02);
        assert!(fit.variance_gap.iter().all(|p| p.1 == 0.0));

        let border = |n: usize| DeFinettiMeasure::new(Arc::new(CurieWeiss::new(0.5).unwrap()), n as f64);
        let fit = check_approx_uncorrelated(border, 2, &grid).unwrap();
        assert!(fit.bounded, "{fit:?}");
        assert!((fit.normalized.last().unwrap().1 - 1.0).abs() < 0.01);

        let critical = |n: usize| DeFinettiMeasure::new(Arc::new(CurieWeiss::new(1.0).unwrap()), n as f64);
        let fit = check_approx_uncorrelated(critical, 2, &grid).unwrap();
        assert!(!fit.bounded, "{fit:?}");
        let xs: Vec<f64> = fit.normalized.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = fit.normalized.iter().map(|p| p.1).collect();
        assert!((loglog_slope(&xs[2..], &ys[2..]) - 0.5).abs() < 0.05);

        assert!(check_approx_uncorrelated(full, 0, &grid).is_err());
        assert!(check_approx_uncorrelated(full, 2, &[10, 5, 20]).is_err());
    }
}
