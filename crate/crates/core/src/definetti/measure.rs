//! Mixing measures on (-1, 1).
//!
//! All density work happens in the rapidity `y = artanh(t)`. With that
//! substitution `dt / (1 - t^2) = dy`, so the measure has density
//! proportional to `exp(-S F(tanh y) / 2)` on the real line and the endpoint
//! singularities disappear. Log-densities are always shifted by their
//! maximum before exponentiation.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::potential::Potential;
use crate::quadrature::{integrate, rule};
use crate::error::{Error, Result};

/// Nominal number of nodes in the inverse-CDF table.
pub const CDF_TABLE_NODES: usize = 4096;

/// Tails are cut where the log-density has dropped this far below its peak
/// (e^-46 ≈ 1e-20).
const TAIL_DROP: f64 = 46.0;
/// Interpolated inverse-CDF intervals whose midpoint error exceeds this are
/// sampled by rejection instead.
const INTERP_TOL: f64 = 1e-6;
const SCAN_HALF_WIDTH: f64 = 40.0;
const SCAN_STEP: f64 = 1.0 / 64.0;
const MAX_RAPIDITY: f64 = 700.0;
const MAX_PANEL_WIDTH: f64 = 0.5;
const MAX_DEPTH: u32 = 12;
/// Panel split tolerance relative to the total mass.
const REL_TOL: f64 = 1e-14;

/// An unnormalized mixing density `exp(-S F(t) / 2) / (1 - t^2)`.
#[derive(Clone)]
pub struct MixingDensity {
    potential: Arc<dyn Potential>,
    scale: f64,
}

impl fmt::Debug for MixingDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixingDensity")
            .field("potential", &self.potential.label())
            .field("scale", &self.scale)
            .finish()
    }
}

impl MixingDensity {
    pub fn new(potential: Arc<dyn Potential>, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { potential, scale })
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `-S F(t) / 2 - ln(1 - t^2)`.
    pub fn log_density_unnormalized(&self, t: f64) -> Result<f64> {
        if !(t.abs() < 1.0) {
            return Err(Error::Domain(format!("t must lie in (-1, 1), got {t}")));
        }
        Ok(-0.5 * self.scale * self.potential.value(t) - (-t * t).ln_1p())
    }

    fn log_density_rapidity(&self, y: f64) -> f64 {
        let v = -0.5 * self.scale * self.potential.value_at_rapidity(y);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Integrates the density and builds the sampling table.
    pub fn normalize(self) -> Result<DeFinettiMeasure> {
        let table = DensityTable::build(&self)?;
        Ok(DeFinettiMeasure {
            repr: Repr::Density(Box::new(Density { density: self, table })),
        })
    }
}

/// A probability measure on [-1, 1] mixing the two-point laws `P_t`.
#[derive(Debug, Clone)]
pub struct DeFinettiMeasure {
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    PointMass(f64),
    Density(Box<Density>),
}

#[derive(Debug, Clone)]
struct Density {
    density: MixingDensity,
    table: DensityTable,
}

impl DeFinettiMeasure {
    /// `exp(-S F / 2) / (1 - t^2)`, normalized.
    pub fn new(potential: Arc<dyn Potential>, scale: f64) -> Result<Self> {
        MixingDensity::new(potential, scale)?.normalize()
    }

    /// The Dirac measure at `t0`. At `t0 = 0` this is the independent
    /// fair-coin baseline.
    pub fn point_mass(t0: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&t0) {
            return Err(Error::Domain(format!("point mass must lie in [-1, 1], got {t0}")));
        }
        Ok(Self { repr: Repr::PointMass(t0) })
    }

    pub fn potential(&self) -> Option<&Arc<dyn Potential>> {
        match &self.repr {
            Repr::Density(d) => Some(&d.density.potential),
            Repr::PointMass(_) => None,
        }
    }

    pub fn scale(&self) -> Option<f64> {
        match &self.repr {
            Repr::Density(d) => Some(d.density.scale),
            Repr::PointMass(_) => None,
        }
    }

    /// `ln Z` with `Z = ∫ exp(-S F(t)/2) dt / (1 - t^2)`.
    pub fn log_normalizer(&self) -> Option<f64> {
        match &self.repr {
            Repr::Density(d) => Some(d.table.log_z),
            Repr::PointMass(_) => None,
        }
    }

    pub fn is_even(&self) -> bool {
        match &self.repr {
            Repr::Density(d) => d.density.potential.is_even(),
            Repr::PointMass(t0) => *t0 == 0.0,
        }
    }

    pub fn label(&self) -> String {
        match &self.repr {
            Repr::Density(d) => format!("{}@S={}", d.density.potential.label(), d.density.scale),
            Repr::PointMass(t0) => format!("delta({t0})"),
        }
    }

    pub fn log_density_unnormalized(&self, t: f64) -> Result<f64> {
        match &self.repr {
            Repr::Density(d) => d.density.log_density_unnormalized(t),
            Repr::PointMass(_) => Err(Error::Domain("a point mass has no density".into())),
        }
    }

    /// `∫ t^K dμ`; zero without quadrature for odd `K` under an even potential.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if k % 2 == 1 && self.is_even() {
            return 0.0;
        }
        match &self.repr {
            Repr::PointMass(t0) => t0.powi(k as i32),
            Repr::Density(d) => d.table.expect(|t| t.powi(k as i32)),
        }
    }

    /// `∫ |t| dμ`.
    pub fn abs_moment(&self) -> f64 {
        match &self.repr {
            Repr::PointMass(t0) => t0.abs(),
            Repr::Density(d) => d.table.expect(f64::abs),
        }
    }

    /// `μ([-1, t])`.
    pub fn cdf(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::PointMass(t0) => {
                if t >= *t0 {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Density(d) => {
                if t <= -1.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    d.table.cdf_rapidity(&d.density, t.atanh())
                }
            }
        }
    }

    /// `μ([a, b])`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    /// The inverse-CDF table as `(t, CDF(t))` pairs.
    pub fn cdf_table(&self) -> Vec<(f64, f64)> {
        match &self.repr {
            Repr::PointMass(t0) => vec![(*t0, 1.0)],
            Repr::Density(d) => {
                // far tails collapse onto t = ±1 in floating point; keep the
                // largest CDF value per distinct t
                let mut out: Vec<(f64, f64)> = Vec::with_capacity(d.table.ys.len());
                for (y, &c) in d.table.ys.iter().zip(&d.table.cs) {
                    let t = y.tanh();
                    match out.last_mut() {
                        Some(last) if last.0 == t => last.1 = c,
                        _ => out.push((t, c)),
                    }
                }
                out
            }
        }
    }

    /// `ln Z` recomputed with every quadrature panel split in two.
    pub fn refined_log_normalizer(&self) -> Option<f64> {
        match &self.repr {
            Repr::PointMass(_) => None,
            Repr::Density(d) => {
                let peak = d.table.peak;
                let f = |y: f64| (d.density.log_density_rapidity(y) - peak).exp();
                let z: f64 = d
                    .table
                    .panels
                    .iter()
                    .map(|&(a, b)| {
                        let m = 0.5 * (a + b);
                        integrate(f, a, m) + integrate(f, m, b)
                    })
                    .sum();
                Some(z.ln() + peak)
            }
        }
    }

    /// One inverse-CDF draw of the latent parameter, in (-1, 1) for
    /// densities.
    pub fn sample_t<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.repr {
            Repr::PointMass(t0) => *t0,
            Repr::Density(d) => {
                let y = d.table.sample_rapidity(&d.density, rng);
                let t = y.tanh();
                // tanh saturates beyond |y| ~ 19
                t.clamp(-ONE_BELOW, ONE_BELOW)
            }
        }
    }
}

const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

/// Quadrature nodes, panel layout and inverse-CDF table of a density, all in
/// the rapidity variable.
#[derive(Debug, Clone)]
struct DensityTable {
    /// Maximum of the log-density; every exponent is shifted by it.
    peak: f64,
    log_z: f64,
    /// Leaf quadrature panels, ordered.
    panels: Vec<(f64, f64)>,
    /// Flattened quadrature: tanh(node) and normalized weight.
    node_t: Vec<f64>,
    node_w: Vec<f64>,
    /// Normalizing constant of the shifted density.
    z_shifted: f64,
    /// Inverse-CDF table.
    ys: Vec<f64>,
    cs: Vec<f64>,
    slopes: Vec<f64>,
    /// Per interval: `Some(log envelope)` when it is sampled by rejection.
    rejection: Vec<Option<f64>>,
}

impl DensityTable {
    fn build(dens: &MixingDensity) -> Result<Self> {
        let ld = |y: f64| dens.log_density_rapidity(y);
        let modes = locate_modes(dens)?;
        let peak = modes.iter().map(|&y| ld(y)).fold(f64::NEG_INFINITY, f64::max);
        let widths: Vec<f64> = modes.iter().map(|&y| local_width(&ld, y)).collect();

        let lo = tail_edge(&ld, modes[0], -1.0, widths[0], peak)?;
        let hi = tail_edge(&ld, *modes.last().unwrap(), 1.0, *widths.last().unwrap(), peak)?;

        let mut breaks = vec![lo, hi];
        for (&m, &w) in modes.iter().zip(&widths) {
            breaks.push(m);
            let mut k = 1.0;
            while k * w < hi - lo {
                breaks.push(m - k * w);
                breaks.push(m + k * w);
                k *= 2.0;
            }
        }
        breaks.retain(|&b| b >= lo && b <= hi);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let mut coarse = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((b - a) / MAX_PANEL_WIDTH).ceil().max(1.0) as usize;
            for i in 0..pieces {
                let pa = a + (b - a) * i as f64 / pieces as f64;
                let pb = if i + 1 == pieces { b } else { a + (b - a) * (i + 1) as f64 / pieces as f64 };
                coarse.push((pa, pb));
            }
        }

        let f = |y: f64| (ld(y) - peak).exp();
        let estimate: f64 = coarse.iter().map(|&(a, b)| integrate(f, a, b)).sum();
        if !(estimate.is_finite() && estimate > 0.0) {
            return Err(Error::Integrability(format!(
                "{}: density integral estimate {estimate}",
                dens.potential.label()
            )));
        }
        let tol = REL_TOL * estimate;
        let mut panels = Vec::new();
        for &(a, b) in &coarse {
            refine(&f, a, b, integrate(f, a, b), tol, 0, &mut panels);
        }

        let r = rule();
        let mut node_t = Vec::with_capacity(panels.len() * r.nodes.len());
        let mut node_w = Vec::with_capacity(node_t.capacity());
        let mut panel_mass = Vec::with_capacity(panels.len());
        for &(a, b) in &panels {
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let mut mass = 0.0;
            for (&x, &w) in r.nodes.iter().zip(&r.weights) {
                let y = mid + half * x;
                let wy = w * half * f(y);
                node_t.push(y.tanh());
                node_w.push(wy);
                mass += wy;
            }
            panel_mass.push(mass);
        }
        let z_shifted: f64 = panel_mass.iter().sum();
        if !(z_shifted.is_finite() && z_shifted > 0.0) {
            return Err(Error::Integrability(format!(
                "{}: normalizer {z_shifted}",
                dens.potential.label()
            )));
        }
        node_w.iter_mut().for_each(|w| *w /= z_shifted);
        let log_z = z_shifted.ln() + peak;

        // Inverse-CDF nodes: every panel is cut into pieces carrying at most
        // about 1/CDF_TABLE_NODES of the mass.
        let mut ys = vec![panels[0].0];
        let mut masses = Vec::new();
        for (&(a, b), &m) in panels.iter().zip(&panel_mass) {
            let pieces = ((CDF_TABLE_NODES as f64) * m / z_shifted).ceil().max(1.0) as usize;
            let mut left = a;
            for i in 1..=pieces {
                let right = if i == pieces { b } else { a + (b - a) * i as f64 / pieces as f64 };
                masses.push(integrate(f, left, right));
                ys.push(right);
                left = right;
            }
        }
        let total: f64 = masses.iter().sum();
        let mut cs = Vec::with_capacity(ys.len());
        let mut acc = 0.0;
        cs.push(0.0);
        for m in &masses {
            acc += m;
            cs.push(acc / total);
        }
        *cs.last_mut().unwrap() = 1.0;
        // keep the table strictly increasing in both coordinates
        let mut keep_y = vec![ys[0]];
        let mut keep_c = vec![0.0];
        for (&y, &c) in ys.iter().zip(&cs).skip(1) {
            if c > *keep_c.last().unwrap() {
                keep_y.push(y);
                keep_c.push(c);
            } else if c == 1.0 {
                *keep_y.last_mut().unwrap() = y;
            }
        }
        let (ys, cs) = (keep_y, keep_c);
        let slopes = pchip_slopes(&cs, &ys);

        let mut table = DensityTable {
            peak,
            log_z,
            panels,
            node_t,
            node_w,
            z_shifted: total,
            ys,
            cs,
            slopes,
            rejection: Vec::new(),
        };
        table.rejection = (0..table.ys.len() - 1)
            .map(|j| {
                let c_mid = 0.5 * (table.cs[j] + table.cs[j + 1]);
                let y_mid = table.interpolate(j, c_mid);
                let exact = table.cs[j] + integrate(f, table.ys[j], y_mid) / table.z_shifted;
                if (exact - c_mid).abs() > INTERP_TOL {
                    let (a, b) = (table.ys[j], table.ys[j + 1]);
                    let env = (0..=32)
                        .map(|i| ld(a + (b - a) * i as f64 / 32.0))
                        .fold(f64::NEG_INFINITY, f64::max);
                    Some(env + 0.5)
                } else {
                    None
                }
            })
            .collect();
        Ok(table)
    }

    fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.node_t.iter().zip(&self.node_w).map(|(&t, &w)| w * g(t)).sum()
    }

    fn cdf_rapidity(&self, dens: &MixingDensity, y: f64) -> f64 {
        if y <= self.ys[0] {
            return 0.0;
        }
        if y >= *self.ys.last().unwrap() {
            return 1.0;
        }
        let j = self.ys.partition_point(|&v| v <= y) - 1;
        let peak = self.peak;
        let f = |x: f64| (dens.log_density_rapidity(x) - peak).exp();
        (self.cs[j] + integrate(f, self.ys[j], y) / self.z_shifted).min(1.0)
    }

    /// Monotone cubic Hermite interpolation of `y(C)` on interval `j`.
    fn interpolate(&self, j: usize, c: f64) -> f64 {
        let (c0, c1) = (self.cs[j], self.cs[j + 1]);
        let (y0, y1) = (self.ys[j], self.ys[j + 1]);
        let h = c1 - c0;
        let s = (c - c0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y = h00 * y0 + h10 * h * self.slopes[j] + h01 * y1 + h11 * h * self.slopes[j + 1];
        y.clamp(y0, y1)
    }

    fn sample_rapidity<R: Rng + ?Sized>(&self, dens: &MixingDensity, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = (self.cs.partition_point(|&c| c <= u) - 1).min(self.cs.len() - 2);
        match self.rejection[j] {
            None => self.interpolate(j, u),
            Some(env) => {
                let (a, b) = (self.ys[j], self.ys[j + 1]);
                loop {
                    let y = a + (b - a) * rng.random::<f64>();
                    let accept: f64 = rng.random();
                    if accept.ln() <= dens.log_density_rapidity(y) - env {
                        return y;
                    }
                }
            }
        }
    }
}

fn refine(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    out: &mut Vec<(f64, f64)>,
) {
    let m = 0.5 * (a + b);
    let left = integrate(f, a, m);
    let right = integrate(f, m, b);
    if (left + right - whole).abs() <= tol || depth >= MAX_DEPTH {
        out.push((a, m));
        out.push((m, b));
    } else {
        refine(f, a, m, left, tol, depth + 1, out);
        refine(f, m, b, right, tol, depth + 1, out);
    }
}

/// Local maxima of the log-density in rapidity, refined by golden section.
/// Returned sorted; always non-empty on success.
fn locate_modes(dens: &MixingDensity) -> Result<Vec<f64>> {
    let ld = |y: f64| dens.log_density_rapidity(y);
    let even = dens.potential.is_even();
    let n = (SCAN_HALF_WIDTH / SCAN_STEP).round() as i64;
    let start = if even { 0 } else { -n };
    let grid: Vec<(f64, f64)> = (start..=n)
        .map(|i| {
            let y = i as f64 * SCAN_STEP;
            (y, ld(y))
        })
        .collect();
    let best = grid.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::Integrability(format!(
            "{}: log-density is nowhere finite",
            dens.potential.label()
        )));
    }
    let mut modes = Vec::new();
    for i in 0..grid.len() {
        let v = grid[i].1;
        if v < best - 2.0 * TAIL_DROP {
            continue;
        }
        let left = if i == 0 {
            if even { grid[1].1 } else { f64::NEG_INFINITY }
        } else {
            grid[i - 1].1
        };
        let right = if i + 1 == grid.len() { f64::NEG_INFINITY } else { grid[i + 1].1 };
        if v >= left && v > right {
            if i + 1 == grid.len() || (!even && i == 0) {
                return Err(Error::Integrability(format!(
                    "{}: mass escapes towards |t| = 1",
                    dens.potential.label()
                )));
            }
            let y = grid[i].0;
            let refined = if even && i == 0 {
                0.0
            } else {
                golden_max(&ld, y - SCAN_STEP, y + SCAN_STEP)
            };
            modes.push(refined);
        }
    }
    if modes.is_empty() {
        return Err(Error::Integrability(format!(
            "{}: no interior maximum of the density",
            dens.potential.label()
        )));
    }
    if even {
        let mirrored: Vec<f64> = modes.iter().filter(|&&y| y > 0.0).map(|&y| -y).collect();
        modes.extend(mirrored);
    }
    if modes.len() > 64 {
        return Err(Error::Integrability(format!(
            "{}: {} local maxima, density looks flat",
            dens.potential.label(),
            modes.len()
        )));
    }
    modes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(modes)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Distance from a mode at which the log-density has dropped by 1/2 (one
/// standard deviation for a Gaussian), smaller side.
fn local_width(ld: &impl Fn(f64) -> f64, mode: f64) -> f64 {
    let top = ld(mode);
    let side = |dir: f64| {
        let mut hi = 1e-9;
        while top - ld(mode + dir * hi) < 0.5 {
            hi *= 2.0;
            if hi > SCAN_HALF_WIDTH {
                return SCAN_HALF_WIDTH;
            }
        }
        let mut lo = hi / 2.0;
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if top - ld(mode + dir * mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    side(-1.0).min(side(1.0))
}

/// Walks outward from the outermost mode until the log-density is
/// `TAIL_DROP` below the peak.
fn tail_edge(ld: &impl Fn(f64) -> f64, mode: f64, dir: f64, width: f64, peak: f64) -> Result<f64> {
    let below = |y: f64| !(ld(y) >= peak - TAIL_DROP);
    let mut step = width;
    let mut inside = mode;
    loop {
        let y = mode + dir * step;
        if y.abs() > MAX_RAPIDITY {
            return Err(Error::Integrability(format!(
                "log-density still within {TAIL_DROP} of its peak at rapidity {y}"
            )));
        }
        if below(y) {
            let (mut a, mut b) = (inside, y);
            for _ in 0..30 {
                let m = 0.5 * (a + b);
                if below(m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Ok(b);
        }
        inside = y;
        step *= 2.0;
    }
}

/// Fritsch-Carlson slopes for a monotone cubic through `(x, y)`.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = delta[0];
        d[1] = delta[0];
        return d;
    }
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::potential::{CurieWeiss, FnPotential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cw(beta: f64, scale: f64) -> DeFinettiMeasure {
        DeFinettiMeasure::new(Arc::new(CurieWeiss::new(beta).unwrap()), scale).unwrap()
    }

    #[test]
    fn log_density_examples() {
        let zero = MixingDensity::new(Arc::new(FnPotential::new("zero", true, |_| 0.0)), 1.0).unwrap();
        assert_eq!(zero.log_density_unnormalized(0.0).unwrap(), 0.0);

        let d = MixingDensity::new(Arc::new(CurieWeiss::new(0.5).unwrap()), 100.0).unwrap();
        assert_eq!(d.log_density_unnormalized(0.0).unwrap(), 0.0);
        // mpmath: -50 F_{1/2}(0.3) - ln(0.91)
        let v = d.log_density_unnormalized(0.3).unwrap();
        assert!((v - (-4.770_393_885_571_785)).abs() < 1e-12, "{v}");

        assert!(matches!(d.log_density_unnormalized(1.0), Err(Error::Domain(_))));
        assert!(matches!(d.log_density_unnormalized(-1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn flat_potential_is_not_integrable() {
        let zero = MixingDensity::new(Arc::new(FnPotential::new("zero", true, |_| 0.0)), 1.0).unwrap();
        assert!(matches!(zero.normalize(), Err(Error::Integrability(_))));
    }

    #[test]
    fn rejects_bad_scale() {
        let p: Arc<dyn Potential> = Arc::new(CurieWeiss::new(0.5).unwrap());
        assert!(MixingDensity::new(p.clone(), 0.0).is_err());
        assert!(MixingDensity::new(p, f64::INFINITY).is_err());
    }

    #[test]
    fn table_is_strictly_monotone() {
        for (beta, s) in [(0.5, 1e4), (2.0, 1e4), (1.0, 1e3), (0.5, 1.0), (5.0, 1.0)] {
            let m = cw(beta, s);
            let table = m.cdf_table();
            assert!(table.len() > 1000, "beta={beta}: only {} nodes", table.len());
            assert!(table.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1), "beta={beta} S={s}");
            assert!(table[0].1 < 1e-9, "{:?}", table[0]);
            assert!((table.last().unwrap().1 - 1.0).abs() < 1e-9);
            assert!(m.cdf(-1.0 + 1e-300) < 1e-9 && m.cdf(1.0 - 1e-16) > 1.0 - 1e-9);
        }
    }

    #[test]
    fn moments_match_mpmath() {
        // mpmath quadrature at 40 digits
        let m = cw(0.5, 1e4);
        let k2 = 9.997_001_565_491_152e-5;
        let k4 = 2.997_202_786_767_038e-8;
        assert!((m.moment(2) / k2 - 1.0).abs() < 1e-10);
        assert!((m.moment(4) / k4 - 1.0).abs() < 1e-10);
        assert_eq!(m.moment(3), 0.0);
        assert_eq!(m.moment(0), 1.0);

        let b2 = cw(2.0, 1e6);
        assert!((b2.moment(2) / 0.916_813_533_742_001_5 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn self_convergence() {
        for (beta, s) in [(0.5, 1e4), (2.0, 1e4), (1.0, 1e6), (1.5, 100.0)] {
            let m = cw(beta, s);
            let a = m.log_normalizer().unwrap();
            let b = m.refined_log_normalizer().unwrap();
            assert!((a - b).abs() < 1e-9, "beta={beta}: {a} vs {b}");
        }
    }

    #[test]
    fn concentration_with_scale() {
        let mut last = 0.0;
        for s in [1e2, 1e4, 1e6] {
            let mass = cw(0.5, s).mass_between(-0.1, 0.1);
            assert!(mass >= last);
            last = mass;
        }
        assert!(last > 1.0 - 1e-12);
    }

    #[test]
    fn cdf_is_consistent_with_moments() {
        let m = cw(0.8, 50.0);
        // E|t| = ∫_0^1 P(|t| > s) ds by the tail-sum formula
        let tail = |s: f64| 1.0 - m.mass_between(-s, s);
        let n = 4000;
        let h = 1.0 / n as f64;
        let mut acc = 0.5 * (tail(0.0) + tail(1.0 - 1e-15));
        for i in 1..n {
            acc += tail(i as f64 * h);
        }
        acc *= h;
        assert!((acc - m.abs_moment()).abs() < 1e-6, "{acc} vs {}", m.abs_moment());
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = cw(2.0, 1e4);
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..10).map(|_| m.sample_t(&mut r)).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(3);
            (0..10).map(|_| m.sample_t(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    fn sample_ks(m: &DeFinettiMeasure, n: usize, seed: u64) -> (f64, Vec<f64>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut xs: Vec<f64> = (0..n).map(|_| m.sample_t(&mut r)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let nf = n as f64;
        let ks = xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
            let f = m.cdf(x);
            acc.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf)
        });
        (ks, xs)
    }

    #[test]
    fn sampling_matches_cdf() {
        for (beta, s) in [(0.5, 1e4), (2.0, 1e4), (5.0, 1.0)] {
            let m = cw(beta, s);
            let (ks, xs) = sample_ks(&m, 100_000, 17);
            assert!(ks < 0.01, "beta={beta}: KS {ks}");
            assert!(xs.iter().all(|t| t.abs() < 1.0));
        }
    }

    #[test]
    fn bimodal_signs_are_balanced() {
        let (_, xs) = sample_ks(&cw(2.0, 1e4), 10_000, 5);
        let pos = xs.iter().filter(|&&t| t > 0.0).count() as f64 / xs.len() as f64;
        assert!((pos - 0.5).abs() < 0.02, "{pos}");
    }

    #[test]
    fn high_temperature_draws_are_small() {
        let (_, xs) = sample_ks(&cw(0.5, 1e4), 10_000, 6);
        let inside = xs.iter().filter(|&&t| t.abs() < 0.05).count() as f64 / xs.len() as f64;
        assert!(inside > 0.99, "{inside}");
    }

    #[test]
    fn abs_moment_asymptotics() {
        // mpmath: 7.978836964309814e-4; the Gaussian limit is sqrt(2/pi) 1e-3
        let m = cw(0.5, 1e6);
        assert!((m.abs_moment() / 7.978_836_964_309_814e-4 - 1.0).abs() < 1e-10);
        let b2 = cw(2.0, 1e6).abs_moment();
        assert!((b2 - 0.957_504_024_077_268_7).abs() < 1e-3, "{b2}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn even_moments_decrease(beta in 0.1f64..4.0, log_s in 0.0f64..6.0) {
            let m = cw(beta, 10f64.powf(log_s));
            let mut last = 1.0;
            for k in 1..=10u32 {
                let v = m.moment(2 * k);
                proptest::prop_assert!(v <= last * (1.0 + 1e-12) && v >= 0.0);
                proptest::prop_assert_eq!(m.moment(2 * k - 1), 0.0);
                last = v;
            }
        }
    }

    #[test]
    fn point_mass() {
        let d = DeFinettiMeasure::point_mass(0.0).unwrap();
        assert!(d.is_even());
        assert_eq!(d.moment(0), 1.0);
        assert_eq!(d.moment(2), 0.0);
        assert_eq!(d.moment(3), 0.0);
        let d = DeFinettiMeasure::point_mass(0.5).unwrap();
        assert_eq!(d.moment(3), 0.125);
        assert!(DeFinettiMeasure::point_mass(1.5).is_err());
    }
}
