//! Moment-method combinatorics.
//!
//! An index tuple `(i_1, ..., i_k)` is read as the closed walk
//! `i_1 -> i_2 -> ... -> i_k -> i_1`. Each step traverses the unordered pair
//! `{i_m, i_{m+1}}`, which is also the single random variable behind the
//! symmetric entries `X(i, j) = X(j, i)`. For spin entries
//! `X^2 = 1`, so the expectation of the walk's product only depends on how
//! many pairs are traversed an odd number of times.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::definetti::DeFinettiMeasure;
use crate::ensembles::EnsembleConfig;
use crate::error::{Error, Result};
use crate::spectral::catalan;

/// Largest circuit length for class enumeration (Bell(10) = 115975 classes).
pub const MAX_CLASS_LENGTH: usize = 10;
/// Largest `N^k` for raw tuple enumeration.
pub const MAX_RAW_TUPLES: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTuple {
    values: Vec<usize>,
    n: usize,
}

impl IndexTuple {
    /// `values` are 1-based and must lie in `1..=n`.
    pub fn new(values: Vec<usize>, n: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("an index tuple needs k >= 1".into()));
        }
        if let Some(v) = values.iter().find(|&&v| v == 0 || v > n) {
            return Err(Error::Domain(format!("index {v} outside 1..={n}")));
        }
        Ok(Self { values, n })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// First-occurrence relabeling.
    pub fn canonical(&self) -> Vec<usize> {
        canonicalize(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitStats {
    pub k: usize,
    /// Distinct vertices.
    pub rho: usize,
    /// Pairs traversed once, loops included.
    pub sigma_simple: usize,
    /// Non-loop pairs traversed once.
    pub sigma_simple_proper: usize,
    /// Traversal count of every unordered pair `(min, max)`.
    pub multiplicities: BTreeMap<(usize, usize), u32>,
    pub odd_edge_count: usize,
    /// Distinct loop pairs `{v, v}`.
    pub loop_count: usize,
    /// Steps that traverse a loop.
    pub loop_traversals: usize,
}

pub fn circuit_stats(t: &IndexTuple) -> CircuitStats {
    stats_of(&t.values)
}

fn stats_of(values: &[usize]) -> CircuitStats {
    let k = values.len();
    let mut multiplicities = BTreeMap::new();
    for m in 0..k {
        let (a, b) = (values[m], values[(m + 1) % k]);
        *multiplicities.entry((a.min(b), a.max(b))).or_insert(0u32) += 1;
    }
    let mut vertices: Vec<usize> = values.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    let mut stats = CircuitStats {
        k,
        rho: vertices.len(),
        sigma_simple: 0,
        sigma_simple_proper: 0,
        multiplicities,
        odd_edge_count: 0,
        loop_count: 0,
        loop_traversals: 0,
    };
    for (&(a, b), &nu) in &stats.multiplicities {
        let is_loop = a == b;
        if nu == 1 {
            stats.sigma_simple += 1;
            if !is_loop {
                stats.sigma_simple_proper += 1;
            }
        }
        if nu % 2 == 1 {
            stats.odd_edge_count += 1;
        }
        if is_loop {
            stats.loop_count += 1;
            stats.loop_traversals += nu as usize;
        }
    }
    stats
}

fn canonicalize(values: &[usize]) -> Vec<usize> {
    let mut map: Vec<(usize, usize)> = Vec::new();
    values
        .iter()
        .map(|&v| match map.iter().find(|(from, _)| *from == v) {
            Some(&(_, to)) => to,
            None => {
                let to = map.len() + 1;
                map.push((v, to));
                to
            }
        })
        .collect()
}

/// `N (N - 1) ... (N - r + 1)`, exactly.
pub fn falling_factorial(n: u64, r: usize) -> u128 {
    (0..r as u64).map(|i| n.saturating_sub(i) as u128).product()
}

/// One equivalence class of index tuples under relabeling of vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitClass {
    pub canonical: Vec<usize>,
    pub rho: usize,
    pub sigma_simple: usize,
    pub sigma_simple_proper: usize,
    pub odd_edge_count: usize,
    pub loop_count: usize,
    pub loop_traversals: usize,
}

impl CircuitClass {
    pub fn k(&self) -> usize {
        self.canonical.len()
    }

    /// Number of tuples over `1..=N` in this class.
    pub fn count_at(&self, n: u64) -> u128 {
        falling_factorial(n, self.rho)
    }
}

/// All classes of length `k` in lexicographic order of their canonical
/// sequences (restricted growth strings).
pub fn enumerate_classes(k: usize) -> Result<Vec<CircuitClass>> {
    if k == 0 {
        return Err(Error::Domain("circuits need k >= 1".into()));
    }
    if k > MAX_CLASS_LENGTH {
        return Err(Error::Resource(format!(
            "class enumeration is limited to k <= {MAX_CLASS_LENGTH}, got {k}"
        )));
    }
    let mut out = Vec::new();
    let mut seq = vec![1usize; k];
    let mut max_prefix = vec![1usize; k];
    loop {
        let s = stats_of(&seq);
        out.push(CircuitClass {
            canonical: seq.clone(),
            rho: s.rho,
            sigma_simple: s.sigma_simple,
            sigma_simple_proper: s.sigma_simple_proper,
            odd_edge_count: s.odd_edge_count,
            loop_count: s.loop_count,
            loop_traversals: s.loop_traversals,
        });
        // next restricted growth string: bump the last position that can grow
        let mut pos = k;
        while pos > 1 {
            pos -= 1;
            if seq[pos] <= max_prefix[pos - 1] {
                seq[pos] += 1;
                max_prefix[pos] = max_prefix[pos - 1].max(seq[pos]);
                for j in pos + 1..k {
                    seq[j] = 1;
                    max_prefix[j] = max_prefix[pos];
                }
                break;
            }
            if pos == 1 {
                return Ok(out);
            }
        }
        if k == 1 {
            return Ok(out);
        }
    }
}

/// `(rho, odd_edge_count, number of classes)` for every length, computed
/// once.
fn class_profile(k: usize) -> Result<&'static [(usize, usize, u64)]> {
    static PROFILES: [OnceLock<Vec<(usize, usize, u64)>>; MAX_CLASS_LENGTH + 1] =
        [const { OnceLock::new() }; MAX_CLASS_LENGTH + 1];
    if k == 0 || k > MAX_CLASS_LENGTH {
        enumerate_classes(k)?;
    }
    Ok(PROFILES[k].get_or_init(|| {
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for c in enumerate_classes(k).expect("k checked above") {
            *counts.entry((c.rho, c.odd_edge_count)).or_insert(0) += 1;
        }
        counts.into_iter().map(|((r, o), c)| (r, o, c)).collect()
    }))
}

/// `E[(1/N) tr (X / N^gamma)^k]` for spin matrices whose entries are
/// conditionally i.i.d. given one latent `t ~ m`:
/// `N^(-1 - k gamma) sum_classes N^(falling rho) ∫ t^odd dm`.
pub fn exact_trace_moment(m: &DeFinettiMeasure, n: usize, k: usize, gamma: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("N must be positive".into()));
    }
    let profile = class_profile(k)?;
    let moments: Vec<f64> = (0..=k).map(|j| m.moment(j as u32)).collect();
    let sum: f64 = profile
        .iter()
        .map(|&(rho, odd, count)| count as f64 * falling_factorial(n as u64, rho) as f64 * moments[odd])
        .sum();
    Ok(sum * (n as f64).powf(-1.0 - k as f64 * gamma))
}

/// [`exact_trace_moment`] for the shared measure of an ensemble
/// configuration. The diagonal ensemble has no shared latent parameter and
/// is rejected.
pub fn exact_trace_moment_for(cfg: &EnsembleConfig, k: usize, gamma: f64) -> Result<f64> {
    let m = cfg.shared_measure()?;
    exact_trace_moment(&m, cfg.n, k, gamma)
}

fn check_raw_budget(n: usize, len: usize) -> Result<()> {
    let total = (n as f64).powi(len as i32);
    if total > MAX_RAW_TUPLES {
        return Err(Error::Resource(format!(
            "raw enumeration of {n}^{len} tuples exceeds {MAX_RAW_TUPLES:e}"
        )));
    }
    Ok(())
}

/// Visits every tuple in `{1..=n}^len` in lexicographic order.
fn for_each_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    let mut t = vec![1usize; len];
    loop {
        f(&t);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if t[pos] < n {
                t[pos] += 1;
                break;
            }
            t[pos] = 1;
        }
    }
}

/// [`exact_trace_moment`] by summing over all `N^k` tuples.
pub fn brute_force_trace_moment(m: &DeFinettiMeasure, n: usize, k: usize, gamma: f64) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("N and k must be positive".into()));
    }
    check_raw_budget(n, k)?;
    let moments: Vec<f64> = (0..=k).map(|j| m.moment(j as u32)).collect();
    let mut sum = 0.0;
    for_each_tuple(n, k, |t| sum += moments[stats_of(t).odd_edge_count]);
    Ok(sum * (n as f64).powf(-1.0 - k as f64 * gamma))
}

fn odd_pairs_of_two(a: &[usize], b: &[usize]) -> usize {
    let mut mult: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for w in [a, b] {
        let k = w.len();
        for m in 0..k {
            let (x, y) = (w[m], w[(m + 1) % k]);
            *mult.entry((x.min(y), x.max(y))).or_insert(0) += 1;
        }
    }
    mult.values().filter(|&&v| v % 2 == 1).count()
}

/// `E[((1/N) tr (X / N^gamma)^k)^2]` by enumerating all pairs of circuits.
/// Feasible only for tiny `N` and `k`.
pub fn exact_trace_second_moment(m: &DeFinettiMeasure, n: usize, k: usize, gamma: f64) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("N and k must be positive".into()));
    }
    check_raw_budget(n, 2 * k)?;
    let moments: Vec<f64> = (0..=2 * k).map(|j| m.moment(j as u32)).collect();
    let mut sum = 0.0;
    for_each_tuple(n, 2 * k, |t| {
        let (a, b) = t.split_at(k);
        sum += moments[odd_pairs_of_two(a, b)];
    });
    Ok(sum * (n as f64).powf(-2.0 - 2.0 * k as f64 * gamma))
}

/// Doubled planar trees: `C_{k/2} N (N - 1) ... (N - k/2)`, the number of
/// tuples with `rho = k/2 + 1` and no simple edge.
pub fn doubled_tree_count(k: usize, n: u64) -> Result<u128> {
    if k % 2 == 1 {
        return Err(Error::Domain(format!("k must be even, got {k}")));
    }
    Ok(catalan((k / 2) as u32)? as u128 * falling_factorial(n, k / 2 + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundViolation {
    pub canonical: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphBoundReport {
    pub k_max: usize,
    pub classes_checked: usize,
    /// Classes where the simple-edge bound had a non-trivial `t`.
    pub bound_cases: usize,
    /// Classes attaining `rho - sigma/2 = k/2 + 1`.
    pub equality_cases: usize,
    pub violations: Vec<BoundViolation>,
}

impl GraphBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every class of length `k <= k_max`:
///
/// * after deleting loops, `r = rho` vertices and `k'` remaining steps, every
///   integer `t >= 1` with `r > k'/2 + t` forces at least `2t + 1` simple
///   proper edges;
/// * `rho - sigma_simple / 2 <= k/2 + 1`, with equality exactly when
///   `rho = k/2 + 1` and `sigma_simple = 0`.
pub fn verify_simple_edge_bound(k_max: usize) -> Result<GraphBoundReport> {
    if k_max > MAX_CLASS_LENGTH {
        return Err(Error::Resource(format!(
            "graph check is limited to k <= {MAX_CLASS_LENGTH}, got {k_max}"
        )));
    }
    let mut report = GraphBoundReport { k_max, ..Default::default() };
    for k in 1..=k_max {
        for c in enumerate_classes(k)? {
            report.classes_checked += 1;
            check_class(&c, &mut report);
        }
    }
    Ok(report)
}

fn check_class(c: &CircuitClass, report: &mut GraphBoundReport) {
    let mut fail = |reason: String| {
        report.violations.push(BoundViolation { canonical: c.canonical.clone(), reason });
    };
    let k = c.k();
    // doubled quantities keep everything in integers: 2r > k' + 2t
    let r2 = 2 * c.rho;
    let k_proper = k - c.loop_traversals;
    if r2 > k_proper + 2 {
        report.bound_cases += 1;
        let t_max = (r2 - k_proper - 1) / 2;
        if c.sigma_simple_proper < 2 * t_max + 1 {
            fail(format!(
                "r={} k'={k_proper}: t={t_max} needs {} simple proper edges, found {}",
                c.rho,
                2 * t_max + 1,
                c.sigma_simple_proper
            ));
        }
    }
    // 2 rho - sigma <= k + 2
    let lhs = 2 * c.rho as i64 - c.sigma_simple as i64;
    let rhs = k as i64 + 2;
    if lhs > rhs {
        fail(format!("rho - sigma/2 = {}/2 exceeds k/2 + 1", lhs));
    }
    let equality = lhs == rhs;
    let tree = 2 * c.rho == k + 2 && c.sigma_simple == 0;
    if equality {
        report.equality_cases += 1;
    }
    if equality != tree {
        fail(format!("equality {equality} but doubled-tree shape {tree}"));
    }
}
