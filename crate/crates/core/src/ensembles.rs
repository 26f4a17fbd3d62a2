//! Symmetric spin matrix ensembles.
//!
//! Every ensemble fills the upper triangle (diagonal included) with spins and
//! mirrors it. Entries that share a latent parameter `t` are conditionally
//! i.i.d. with `P(+1) = (1 + t) / 2`. The latent draws come from the
//! `Latent` stream of `(seed, replica)` and the spins from its `Spins`
//! stream, so the two never interleave.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::definetti::{check_potential, CurieWeiss, DeFinettiMeasure, Potential};
use crate::error::{Error, Result};
use crate::rng::{seed_stream, Purpose, Stream};

/// Largest accepted matrix dimension.
pub const MAX_DIMENSION: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    /// One latent `t` with scale `N^2` shared by all entries.
    FullCw,
    /// Independent latent `t_k` for every diagonal `{(i, i + k)}`.
    DiagonalCw,
    /// One latent `t` from `exp(-N^alpha F / 2)` for a general potential.
    Generalized,
    /// Independent fair spins.
    Iid,
}

impl EnsembleKind {
    pub fn tag(self) -> &'static str {
        match self {
            EnsembleKind::FullCw => "full_cw",
            EnsembleKind::DiagonalCw => "diagonal_cw",
            EnsembleKind::Generalized => "generalized",
            EnsembleKind::Iid => "iid",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_cw" => Ok(EnsembleKind::FullCw),
            "diagonal_cw" => Ok(EnsembleKind::DiagonalCw),
            "generalized" => Ok(EnsembleKind::Generalized),
            "iid" => Ok(EnsembleKind::Iid),
            other => Err(Error::Config(format!("unknown ensemble kind {other:?}"))),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Mixing law on a diagonal of length `N - k` in the diagonal ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalLaw {
    /// The first `N - k` coordinates of an `N`-spin Curie-Weiss vector:
    /// scale `N` on every diagonal.
    #[default]
    Marginal,
    /// A Curie-Weiss vector of its own length: scale `N - k`.
    OwnLength,
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub n: usize,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub potential: Option<Arc<dyn Potential>>,
    pub seed: u64,
    pub replica_index: u64,
    pub diagonal_law: DiagonalLaw,
}

impl EnsembleConfig {
    fn base(kind: EnsembleKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            beta: None,
            alpha: None,
            potential: None,
            seed,
            replica_index: 0,
            diagonal_law: DiagonalLaw::Marginal,
        }
    }

    pub fn full_cw(n: usize, beta: f64, seed: u64) -> Self {
        Self { beta: Some(beta), ..Self::base(EnsembleKind::FullCw, n, seed) }
    }

    pub fn diagonal_cw(n: usize, beta: f64, seed: u64) -> Self {
        Self { beta: Some(beta), ..Self::base(EnsembleKind::DiagonalCw, n, seed) }
    }

    pub fn generalized(n: usize, alpha: f64, potential: Arc<dyn Potential>, seed: u64) -> Self {
        Self {
            alpha: Some(alpha),
            potential: Some(potential),
            ..Self::base(EnsembleKind::Generalized, n, seed)
        }
    }

    /// The generalized ensemble with the Curie-Weiss potential at `beta`.
    pub fn generalized_cw(n: usize, alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        let mut cfg = Self::generalized(n, alpha, Arc::new(CurieWeiss::new(beta)?), seed);
        cfg.beta = Some(beta);
        Ok(cfg)
    }

    pub fn iid(n: usize, seed: u64) -> Self {
        Self::base(EnsembleKind::Iid, n, seed)
    }

    pub fn with_replica(mut self, replica_index: u64) -> Self {
        self.replica_index = replica_index;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_diagonal_law(mut self, law: DiagonalLaw) -> Self {
        self.diagonal_law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_DIMENSION {
            return Err(Error::Config(format!(
                "N must lie in 1..={MAX_DIMENSION}, got {}",
                self.n
            )));
        }
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if x.is_finite() && x > 0.0 => Ok(x),
            Some(x) => Err(Error::Config(format!("{name} must be positive, got {x}"))),
            None => Err(Error::Config(format!("{} ensemble needs {name}", self.kind))),
        };
        match self.kind {
            EnsembleKind::FullCw | EnsembleKind::DiagonalCw => {
                positive("beta", self.beta)?;
            }
            EnsembleKind::Generalized => {
                positive("alpha", self.alpha)?;
                let p = self
                    .potential
                    .as_ref()
                    .ok_or_else(|| Error::Config("generalized ensemble needs a potential".into()))?;
                if !p.is_even() {
                    return Err(Error::Precondition(format!("potential {} is not even", p.label())));
                }
                check_potential(p.as_ref())?;
            }
            EnsembleKind::Iid => {}
        }
        Ok(())
    }

    /// Scale of the shared mixing measure: `N^2` for the full ensemble,
    /// `N^alpha` for the generalized one.
    pub fn mixing_scale(&self) -> Option<f64> {
        let n = self.n as f64;
        match self.kind {
            EnsembleKind::FullCw => Some(n * n),
            EnsembleKind::Generalized => {
                let alpha = self.alpha?;
                // integer exponents go through powi so alpha = 2 reproduces
                // the full ensemble bit for bit
                if alpha.fract() == 0.0 && alpha.abs() < 64.0 {
                    Some(n.powi(alpha as i32))
                } else {
                    Some(n.powf(alpha))
                }
            }
            EnsembleKind::DiagonalCw => Some(n),
            EnsembleKind::Iid => None,
        }
    }

    /// The de Finetti measure shared by all entries. The iid ensemble maps to
    /// the point mass at 0; the diagonal ensemble has no single shared
    /// measure.
    pub fn shared_measure(&self) -> Result<DeFinettiMeasure> {
        self.validate()?;
        match self.kind {
            EnsembleKind::FullCw => {
                DeFinettiMeasure::new(Arc::new(CurieWeiss::new(self.beta.unwrap())?), self.mixing_scale().unwrap())
            }
            EnsembleKind::Generalized => {
                DeFinettiMeasure::new(self.potential.clone().unwrap(), self.mixing_scale().unwrap())
            }
            EnsembleKind::Iid => DeFinettiMeasure::point_mass(0.0),
            EnsembleKind::DiagonalCw => Err(Error::UnsupportedEnsemble(
                "diagonal_cw entries on different diagonals have independent latent parameters".into(),
            )),
        }
    }
}

/// Latent mixing parameters recorded with a sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    None,
    Single(f64),
    PerDiagonal(Vec<f64>),
}

impl Latent {
    pub fn single(&self) -> Option<f64> {
        match self {
            Latent::Single(t) => Some(*t),
            _ => None,
        }
    }
}

/// A symmetric `N x N` matrix with entries in `{-1, +1}`, row-major.
#[derive(Debug, Clone)]
pub struct SpinMatrix {
    n: usize,
    entries: Vec<i8>,
    latent: Latent,
    config: Option<EnsembleConfig>,
}

impl SpinMatrix {
    /// Wraps an explicit row-major matrix, checking symmetry and the spin
    /// support.
    pub fn from_entries(n: usize, entries: Vec<i8>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Domain(format!("need {n}x{n} entries, got {}", entries.len())));
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if v != 1 && v != -1 {
                    return Err(Error::Domain(format!("entry ({i}, {j}) = {v} is not a spin")));
                }
                if v != entries[j * n + i] {
                    return Err(Error::Domain(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, entries, latent: Latent::None, config: None })
    }

    /// The all-ones matrix `E_N`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::from_entries(n, vec![1; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[i8] {
        &self.entries
    }

    pub fn latent(&self) -> &Latent {
        &self.latent
    }

    pub fn config(&self) -> Option<&EnsembleConfig> {
        self.config.as_ref()
    }

    /// `X / N^gamma`.
    pub fn scale(&self, gamma: f64) -> Result<ScaledMatrix<'_>> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be non-negative, got {gamma}")));
        }
        Ok(ScaledMatrix { source: self, gamma })
    }

    /// Fraction of `+1` entries in the upper triangle, diagonal included.
    pub fn upper_plus_fraction(&self) -> f64 {
        let n = self.n;
        let plus: usize = (0..n).map(|i| (i..n).filter(|&j| self.get(i, j) == 1).count()).sum();
        plus as f64 / (n * (n + 1) / 2) as f64
    }

    /// Plain-text dump: a header `N kind beta alpha seed replica latent_t`
    /// followed by `N` rows of space-separated spins. Missing fields are `-`;
    /// per-diagonal latents are comma-separated.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
        let (kind, beta, alpha, seed, replica) = match &self.config {
            Some(c) => (
                c.kind.tag().to_string(),
                opt(c.beta),
                opt(c.alpha),
                c.seed.to_string(),
                c.replica_index.to_string(),
            ),
            None => ("explicit".into(), "-".into(), "-".into(), "-".into(), "-".into()),
        };
        let latent = match &self.latent {
            Latent::None => "-".to_string(),
            Latent::Single(t) => t.to_string(),
            Latent::PerDiagonal(ts) => ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
        };
        writeln!(w, "{} {kind} {beta} {alpha} {seed} {replica} {latent}", self.n)?;
        for row in self.entries.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// A view `X / N^gamma` of a spin matrix.
#[derive(Debug, Clone, Copy)]
pub struct ScaledMatrix<'a> {
    source: &'a SpinMatrix,
    gamma: f64,
}

impl<'a> ScaledMatrix<'a> {
    pub fn source(&self) -> &'a SpinMatrix {
        self.source
    }

    pub fn exponent(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.source.n
    }

    /// `N^-gamma`.
    pub fn factor(&self) -> f64 {
        (self.source.n as f64).powf(-self.gamma)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.source.get(i, j) as f64 * self.factor()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let c = self.factor();
        let n = self.source.n;
        DMatrix::from_fn(n, n, |i, j| self.source.get(i, j) as f64 * c)
    }

    pub fn trace(&self) -> f64 {
        let n = self.source.n;
        (0..n).map(|i| self.source.get(i, i) as f64).sum::<f64>() * self.factor()
    }

    /// `sum_ij A(i, j)^2`, which is `N^(2 - 2 gamma)` for spin entries.
    pub fn frobenius_sq(&self) -> f64 {
        let c = self.factor();
        self.source.entries.len() as f64 * c * c
    }
}

/// The random streams consumed by one sample.
pub struct Streams {
    pub latent: Stream,
    pub spins: Stream,
}

impl Streams {
    pub fn for_replica(seed: u64, replica: u64) -> Self {
        Self {
            latent: seed_stream(seed, replica, Purpose::Latent),
            spins: seed_stream(seed, replica, Purpose::Spins),
        }
    }
}

#[derive(Debug, Clone)]
enum Mixing {
    None,
    Shared(DeFinettiMeasure),
    PerDiagonal(Vec<DeFinettiMeasure>),
}

/// A validated configuration with its mixing measures normalized once, for
/// drawing many replicas.
#[derive(Debug, Clone)]
pub struct Sampler {
    cfg: EnsembleConfig,
    mixing: Mixing,
}

impl Sampler {
    pub fn new(cfg: &EnsembleConfig) -> Result<Self> {
        cfg.validate()?;
        let mixing = match cfg.kind {
            EnsembleKind::Iid => Mixing::None,
            EnsembleKind::FullCw | EnsembleKind::Generalized => Mixing::Shared(cfg.shared_measure()?),
            EnsembleKind::DiagonalCw => {
                let potential: Arc<dyn Potential> = Arc::new(CurieWeiss::new(cfg.beta.unwrap())?);
                match cfg.diagonal_law {
                    DiagonalLaw::Marginal => {
                        Mixing::Shared(DeFinettiMeasure::new(potential, cfg.n as f64)?)
                    }
                    DiagonalLaw::OwnLength => Mixing::PerDiagonal(
                        (0..cfg.n)
                            .map(|k| DeFinettiMeasure::new(potential.clone(), (cfg.n - k) as f64))
                            .collect::<Result<_>>()?,
                    ),
                }
            }
        };
        Ok(Self { cfg: cfg.clone(), mixing })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.cfg
    }

    /// The measure shared by every entry, if any.
    pub fn shared_measure(&self) -> Option<&DeFinettiMeasure> {
        match (&self.mixing, self.cfg.kind) {
            (Mixing::Shared(m), EnsembleKind::FullCw | EnsembleKind::Generalized) => Some(m),
            _ => None,
        }
    }

    /// Replica `r` drawn from the streams of `(seed, r)`.
    pub fn sample_replica(&self, replica: u64) -> SpinMatrix {
        let mut streams = Streams::for_replica(self.cfg.seed, replica);
        let mut m = self.sample_with(&mut streams);
        if let Some(c) = m.config.as_mut() {
            c.replica_index = replica;
        }
        m
    }

    /// The replica named in the configuration.
    pub fn sample(&self) -> SpinMatrix {
        self.sample_replica(self.cfg.replica_index)
    }

    pub fn sample_with(&self, streams: &mut Streams) -> SpinMatrix {
        let n = self.cfg.n;
        let mut entries = vec![0i8; n * n];
        let latent = match &self.mixing {
            Mixing::None => {
                fill_upper(&mut entries, n, 0.0, &mut streams.spins);
                Latent::None
            }
            Mixing::Shared(m) if self.cfg.kind != EnsembleKind::DiagonalCw => {
                let t = m.sample_t(&mut streams.latent);
                fill_upper(&mut entries, n, t, &mut streams.spins);
                Latent::Single(t)
            }
            Mixing::Shared(m) => {
                let ts = (0..n).map(|_| m.sample_t(&mut streams.latent)).collect::<Vec<_>>();
                fill_diagonals(&mut entries, n, &ts, &mut streams.spins);
                Latent::PerDiagonal(ts)
            }
            Mixing::PerDiagonal(ms) => {
                let ts = ms.iter().map(|m| m.sample_t(&mut streams.latent)).collect::<Vec<_>>();
                fill_diagonals(&mut entries, n, &ts, &mut streams.spins);
                Latent::PerDiagonal(ts)
            }
        };
        SpinMatrix { n, entries, latent, config: Some(self.cfg.clone()) }
    }
}

#[inline]
fn spin<R: Rng + ?Sized>(p_plus: f64, rng: &mut R) -> i8 {
    if rng.random::<f64>() < p_plus {
        1
    } else {
        -1
    }
}

fn fill_upper<R: Rng + ?Sized>(entries: &mut [i8], n: usize, t: f64, rng: &mut R) {
    let p = 0.5 * (1.0 + t);
    for i in 0..n {
        for j in i..n {
            let s = spin(p, rng);
            entries[i * n + j] = s;
            entries[j * n + i] = s;
        }
    }
}

fn fill_diagonals<R: Rng + ?Sized>(entries: &mut [i8], n: usize, ts: &[f64], rng: &mut R) {
    for (k, &t) in ts.iter().enumerate() {
        let p = 0.5 * (1.0 + t);
        for i in 0..n - k {
            let s = spin(p, rng);
            entries[i * n + i + k] = s;
            entries[(i + k) * n + i] = s;
        }
    }
}

fn check_kind(cfg: &EnsembleConfig, kind: EnsembleKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!("expected a {kind} configuration, got {}", cfg.kind)));
    }
    Ok(())
}

pub fn sample_full_cw(cfg: &EnsembleConfig, streams: &mut Streams) -> Result<SpinMatrix> {
    check_kind(cfg, EnsembleKind::FullCw)?;
    Ok(Sampler::new(cfg)?.sample_with(streams))
}

pub fn sample_diagonal_cw(cfg: &EnsembleConfig, streams: &mut Streams) -> Result<SpinMatrix> {
    check_kind(cfg, EnsembleKind::DiagonalCw)?;
    Ok(Sampler::new(cfg)?.sample_with(streams))
}

pub fn sample_generalized(cfg: &EnsembleConfig, streams: &mut Streams) -> Result<SpinMatrix> {
    check_kind(cfg, EnsembleKind::Generalized)?;
    Ok(Sampler::new(cfg)?.sample_with(streams))
}

pub fn sample_iid(cfg: &EnsembleConfig, streams: &mut Streams) -> Result<SpinMatrix> {
    check_kind(cfg, EnsembleKind::Iid)?;
    Ok(Sampler::new(cfg)?.sample_with(streams))
}

/// One draw for `(cfg.seed, cfg.replica_index)`, dispatched on the kind.
pub fn sample(cfg: &EnsembleConfig) -> Result<SpinMatrix> {
    Ok(Sampler::new(cfg)?.sample())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::FnPotential;
    use proptest::prelude::*;

    fn assert_spin_symmetric(m: &SpinMatrix) {
        let n = m.n();
        for i in 0..n {
            for j in 0..n {
                assert!(m.get(i, j) == 1 || m.get(i, j) == -1);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn validation() {
        assert!(matches!(EnsembleConfig::iid(0, 1).validate(), Err(Error::Config(_))));
        assert!(matches!(EnsembleConfig::iid(5000, 1).validate(), Err(Error::Config(_))));
        assert!(EnsembleConfig::full_cw(10, -1.0, 1).validate().is_err());
        let mut c = EnsembleConfig::full_cw(10, 0.5, 1);
        c.beta = None;
        assert!(c.validate().is_err());
        let skew: Arc<dyn Potential> = Arc::new(FnPotential::new("skew", false, |t: f64| t + t.atanh().powi(2)));
        assert!(matches!(
            EnsembleConfig::generalized(10, 1.0, skew, 1).validate(),
            Err(Error::Precondition(_))
        ));
        assert!("full_cw".parse::<EnsembleKind>().is_ok());
        assert!("wigner".parse::<EnsembleKind>().is_err());
    }

    #[test]
    fn deterministic_per_replica() {
        let cfg = EnsembleConfig::full_cw(40, 1.5, 9).with_replica(3);
        let a = sample(&cfg).unwrap();
        let b = sample(&cfg).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert_eq!(a.latent(), b.latent());
        let c = sample(&cfg.clone().with_replica(4)).unwrap();
        assert_ne!(a.entries(), c.entries());
    }

    #[test]
    fn generalized_alpha_two_is_full_ensemble() {
        let full = EnsembleConfig::full_cw(30, 0.7, 21);
        let gen = EnsembleConfig::generalized_cw(30, 2.0, 0.7, 21).unwrap();
        for r in 0..5 {
            let a = sample(&full.clone().with_replica(r)).unwrap();
            let b = sample(&gen.clone().with_replica(r)).unwrap();
            assert_eq!(a.entries(), b.entries());
            assert_eq!(a.latent(), b.latent());
        }
    }

    #[test]
    fn full_cw_follows_latent() {
        let sampler = Sampler::new(&EnsembleConfig::full_cw(100, 2.0, 4)).unwrap();
        for r in 0..10 {
            let m = sampler.sample_replica(r);
            assert_spin_symmetric(&m);
            let t = m.latent().single().unwrap();
            assert!(t.abs() < 1.0);
            assert!((m.upper_plus_fraction() - 0.5 * (1.0 + t)).abs() < 0.02);
        }
    }

    #[test]
    fn fair_coins_have_small_mean() {
        let m = sample(&EnsembleConfig::iid(500, 2)).unwrap();
        assert_spin_symmetric(&m);
        let count = (500 * 501 / 2) as f64;
        let mean = 2.0 * m.upper_plus_fraction() - 1.0;
        assert!(mean.abs() < 3.0 / count.sqrt());
        assert_eq!(m.latent(), &Latent::None);
    }

    #[test]
    fn conditional_halves_agree() {
        let n = 200;
        let sampler = Sampler::new(&EnsembleConfig::full_cw(n, 1.5, 8)).unwrap();
        for r in 0..5 {
            let m = sampler.sample_replica(r);
            let upper: Vec<f64> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| m.get(i, j) as f64).collect();
            let (a, b) = upper.split_at(upper.len() / 2);
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!((mean(a) - mean(b)).abs() < 6.0 / ((n * n) as f64 / 2.0).sqrt());
        }
    }

    #[test]
    fn diagonal_ensemble_shapes() {
        let m = sample(&EnsembleConfig::diagonal_cw(50, 0.5, 3)).unwrap();
        assert_spin_symmetric(&m);
        match m.latent() {
            Latent::PerDiagonal(ts) => {
                assert_eq!(ts.len(), 50);
                assert!(ts.iter().all(|t| t.abs() < 1.0));
            }
            other => panic!("{other:?}"),
        }
        let one = sample(&EnsembleConfig::diagonal_cw(1, 0.5, 3)).unwrap();
        assert_eq!(one.n(), 1);
        let own = EnsembleConfig::diagonal_cw(20, 0.5, 3).with_diagonal_law(DiagonalLaw::OwnLength);
        assert_spin_symmetric(&sample(&own).unwrap());
        assert!(matches!(
            EnsembleConfig::diagonal_cw(20, 0.5, 3).shared_measure(),
            Err(Error::UnsupportedEnsemble(_))
        ));
    }

    #[test]
    fn diagonals_are_uncorrelated() {
        // X(0,1) lives on diagonal 1 and X(0,2) on diagonal 2
        let sampler = Sampler::new(&EnsembleConfig::diagonal_cw(6, 1.5, 12)).unwrap();
        let reps = 1000;
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
        for r in 0..reps {
            let m = sampler.sample_replica(r);
            let (x, y) = (m.get(0, 1) as f64, m.get(0, 2) as f64);
            sx += x;
            sy += y;
            sxy += x * y;
        }
        let n = reps as f64;
        let cov = sxy / n - sx / n * sy / n;
        let corr = cov / ((1.0 - (sx / n).powi(2)) * (1.0 - (sy / n).powi(2))).sqrt();
        assert!(corr.abs() < 0.1, "{corr}");
    }

    #[test]
    fn scaling_views() {
        let m = SpinMatrix::ones(4).unwrap();
        let id = m.scale(0.0).unwrap();
        assert_eq!(id.get(1, 2), 1.0);
        let half = m.scale(0.5).unwrap();
        assert!((0..4).all(|i| (0..4).all(|j| half.get(i, j).abs() == 0.5)));
        assert_eq!(half.frobenius_sq(), 4.0);
        let b = m.scale(1.0).unwrap();
        assert_eq!(b.get(0, 0), 0.25);
        assert!(m.scale(-1.0).is_err());
        assert!(SpinMatrix::from_entries(2, vec![1, -1, 1, 1]).is_err());
        assert!(SpinMatrix::from_entries(2, vec![1, 0, 0, 1]).is_err());
    }

    #[test]
    fn dump_format() {
        let m = sample(&EnsembleConfig::full_cw(3, 0.5, 1)).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let head: Vec<&str> = lines[0].split(' ').collect();
        assert_eq!(&head[..6], &["3", "full_cw", "0.5", "-", "1", "0"]);
        assert!(head[6].parse::<f64>().is_ok());
        assert!(lines[1..].iter().all(|l| l.split(' ').count() == 3));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn every_sample_is_a_symmetric_spin_matrix(
            n in 1usize..24,
            beta in 0.1f64..3.0,
            seed in any::<u64>(),
            kind in 0usize..4,
        ) {
            let cfg = match kind {
                0 => EnsembleConfig::full_cw(n, beta, seed),
                1 => EnsembleConfig::diagonal_cw(n, beta, seed),
                2 => EnsembleConfig::generalized_cw(n, 1.0, beta, seed).unwrap(),
                _ => EnsembleConfig::iid(n, seed),
            };
            let m = sample(&cfg).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(m.get(i, j) == 1 || m.get(i, j) == -1);
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
    }
}
