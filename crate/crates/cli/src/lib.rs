//! Batch experiment runner: reads an [`ExperimentSpec`], runs one task over
//! its replicas and dimensions, and writes `summary.json` plus task CSVs.
//!
//! Every replica `r` draws from the streams of `(seed, r)`, and results are
//! reduced in replica order, so output does not depend on the thread count.

mod error;
mod spec;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use cwrmt::circuits::{enumerate_classes, exact_trace_moment_for, verify_simple_edge_bound};
use cwrmt::correlations::{correlation_report, normalized_trace_power, McEstimate};
use cwrmt::definetti::{curie_weiss_potential, find_minimum, laplace_moment_asymptotic, magnetization, DeFinettiMeasure};
use cwrmt::ensembles::{EnsembleKind, Sampler};
use cwrmt::spectral::{self, identity_check, semicircle_moment, SpectralSummary};

pub use error::{CliError, CliResult};
pub use spec::{EnsembleSpec, ExperimentSpec, Histogram, Task, Tolerances};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "CWRMT_THREADS";

/// One tolerance comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub threads: usize,
}

/// Everything written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub spec: ExperimentSpec,
    /// Per-replica records (spectral tasks) or per-cell rows (others).
    pub replicas: Vec<Value>,
    pub aggregates: Vec<Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Lines for the console.
    pub messages: Vec<String>,
    pub timings: Timings,
}

impl RunReport {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

#[derive(Default)]
struct Outcome {
    replicas: Vec<Value>,
    aggregates: Vec<Value>,
    checks: Vec<Check>,
    messages: Vec<String>,
}

/// Runs `spec` on a pool sized by `CWRMT_THREADS` (all cores when unset).
pub fn run(spec: &ExperimentSpec) -> CliResult<RunReport> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?,
        ),
        Err(_) => None,
    };
    run_with_threads(spec, threads)
}

/// Runs `spec` on a pool of `threads` workers.
pub fn run_with_threads(spec: &ExperimentSpec, threads: Option<usize>) -> CliResult<RunReport> {
    spec.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    fs::create_dir_all(&spec.output_dir).map_err(|e| io_err(&spec.output_dir, e))?;
    let outcome = pool.install(|| dispatch(spec))?;
    let passed = outcome.checks.iter().all(|c| c.passed);
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        replicas: outcome.replicas,
        aggregates: outcome.aggregates,
        checks: outcome.checks,
        passed,
        messages: outcome.messages,
        timings: Timings {
            total_seconds: start.elapsed().as_secs_f64(),
            threads: pool.current_num_threads(),
        },
    };
    let path = spec.output_dir.join("summary.json");
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| io_err(&path, std::io::Error::other(e)))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
    Ok(report)
}

fn dispatch(spec: &ExperimentSpec) -> CliResult<Outcome> {
    match spec.task {
        Task::Esd => run_esd(spec),
        Task::Moments => run_moments(spec),
        Task::Norm => run_norm(spec),
        Task::Correlations => run_correlations(spec),
        Task::Oracle => run_oracle(spec),
        Task::Graphcheck => run_graphcheck(spec),
        Task::Laplace => run_laplace(spec),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: &[&str]) -> CliResult<Self> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let mut t = Self { path, writer };
        t.row(header.iter().map(|s| s.to_string()))?;
        Ok(t)
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> CliResult<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.writer.write_record(&fields).map_err(|e| csv_err(&self.path, e))
    }

    fn finish(mut self) -> CliResult<()> {
        self.writer.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn csv_err(path: &Path, source: csv::Error) -> CliError {
    CliError::Csv { path: path.display().to_string(), source }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for a single value.
fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn stderr(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

struct Spectrum {
    replica: u64,
    latent: Option<f64>,
    summary: SpectralSummary,
    trace_residual: f64,
    frobenius_residual: f64,
}

/// Samples replicas `0..count` at dimension `n`, eigensolves `X / N^gamma`
/// and records the identity residuals.
fn spectra(spec: &ExperimentSpec, n: usize, gamma: f64, k_max: u32) -> CliResult<Vec<Spectrum>> {
    let cfg = spec.ensemble.config(n, spec.seed)?;
    let sampler = Sampler::new(&cfg)?;
    let out: Vec<CliResult<Spectrum>> = (0..spec.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let m = sampler.sample_replica(r);
            let a = m.scale(gamma)?;
            let eigs = spectral::eigenvalues(&a)?;
            let check = identity_check(&a, &eigs);
            Ok(Spectrum {
                replica: r,
                latent: m.latent().single(),
                summary: SpectralSummary::from_eigenvalues(eigs, k_max, gamma)?,
                trace_residual: check.trace,
                frobenius_residual: check.frobenius,
            })
        })
        .collect();
    out.into_iter().collect()
}

fn replica_record(n: usize, s: &Spectrum) -> Value {
    json!({
        "n": n,
        "replica": s.replica,
        "latent_t": s.latent,
        "ks_to_semicircle": s.summary.ks_to_semicircle,
        "operator_norm": s.summary.operator_norm,
        "moments": s.summary.moments,
        "trace_residual": s.trace_residual,
        "frobenius_residual": s.frobenius_residual,
    })
}

fn identity_checks(spectra: &[Spectrum], n: usize, tol: f64, checks: &mut Vec<Check>) {
    let worst_trace = spectra.iter().map(|s| s.trace_residual).fold(0.0, f64::max);
    let worst_fro = spectra.iter().map(|s| s.frobenius_residual).fold(0.0, f64::max);
    checks.push(Check::at_most(format!("N={n} trace identity residual"), worst_trace, tol));
    checks.push(Check::at_most(format!("N={n} frobenius identity residual"), worst_fro, tol));
}

fn ks_threshold(spec: &ExperimentSpec) -> CliResult<f64> {
    Ok(match spec.tolerances.ks_max {
        Some(v) => v,
        None if spec.ensemble.kind()? == EnsembleKind::DiagonalCw => 0.06,
        None => 0.05,
    })
}

fn run_esd(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let k_max = (spec.k_max as u32).max(4);
    let ks_max = ks_threshold(spec)?;
    let h = &spec.histogram;
    let mut out = Outcome::default();
    let mut eig_csv = Table::create(&spec.output_dir, "eigenvalues.csv", &["n", "replica", "index", "lambda"])?;
    let mut hist_csv = Table::create(
        &spec.output_dir,
        "hist.csv",
        &["n", "bin_left", "bin_right", "empirical_density", "semicircle_density"],
    )?;
    for n in spec.grid() {
        let spectra = spectra(spec, n, spec.gamma, k_max)?;
        let mut pooled = Vec::with_capacity(n * spectra.len());
        for s in &spectra {
            for (i, l) in s.summary.eigenvalues.iter().enumerate() {
                eig_csv.row([n.to_string(), s.replica.to_string(), (i + 1).to_string(), l.to_string()])?;
            }
            pooled.extend_from_slice(&s.summary.eigenvalues);
            out.replicas.push(replica_record(n, s));
        }
        for b in spectral::histogram(&pooled, h.lo, h.hi, h.width)? {
            hist_csv.row([
                n.to_string(),
                b.left.to_string(),
                b.right.to_string(),
                b.empirical_density.to_string(),
                b.semicircle_density.to_string(),
            ])?;
        }
        let ks: Vec<f64> = spectra.iter().map(|s| s.summary.ks_to_semicircle).collect();
        let m2: Vec<f64> = spectra.iter().map(|s| s.summary.esd_moment(2)).collect();
        let m4: Vec<f64> = spectra.iter().map(|s| s.summary.esd_moment(4)).collect();
        out.aggregates.push(json!({
            "n": n,
            "ks_mean": mean(&ks),
            "ks_stderr": stderr(&ks),
            "m2_mean": mean(&m2),
            "m4_mean": mean(&m4),
            "m4_stderr": stderr(&m4),
        }));
        out.checks.push(Check::below(format!("N={n} mean KS to semicircle"), mean(&ks), ks_max));
        if spec.gamma == 0.5 {
            let dev = m2.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            out.checks.push(Check::at_most(format!("N={n} max |m2 - 1|"), dev, tol.m2_tol));
            out.checks.push(Check::at_most(
                format!("N={n} |mean m4 - 2| within [{}, {}]", tol.m4_range[0], tol.m4_range[1]),
                (mean(&m4) - 2.0).abs(),
                (2.0 - tol.m4_range[0]).min(tol.m4_range[1] - 2.0),
            ));
        }
        identity_checks(&spectra, n, tol.identity_tol, &mut out.checks);
        out.messages.push(format!("N={n}: mean KS {:.4} over {} replicas", mean(&ks), spectra.len()));
    }
    eig_csv.finish()?;
    hist_csv.finish()?;
    Ok(out)
}

fn run_moments(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let k_max = spec.k_max as u32;
    let mut out = Outcome::default();
    let mut csv = Table::create(
        &spec.output_dir,
        "moments.csv",
        &["n", "k", "mean", "stderr", "variance", "semicircle"],
    )?;
    let mut fourth_variances = Vec::new();
    for n in spec.grid() {
        let spectra = spectra(spec, n, spec.gamma, k_max.max(4))?;
        for s in &spectra {
            out.replicas.push(replica_record(n, s));
        }
        for k in 1..=k_max.max(4) {
            let xs: Vec<f64> = spectra.iter().map(|s| s.summary.esd_moment(k)).collect();
            let reference = semicircle_moment(k);
            if k <= k_max {
                csv.row([
                    n.to_string(),
                    k.to_string(),
                    mean(&xs).to_string(),
                    stderr(&xs).to_string(),
                    variance(&xs).to_string(),
                    reference.to_string(),
                ])?;
            }
            out.aggregates.push(json!({
                "n": n,
                "k": k,
                "mean": mean(&xs),
                "stderr": stderr(&xs),
                "variance": variance(&xs),
                "semicircle": reference,
            }));
            if k == 4 {
                fourth_variances.push((n, variance(&xs)));
            }
        }
        identity_checks(&spectra, n, tol.identity_tol, &mut out.checks);
    }
    csv.finish()?;
    let &(n_last, v_last) = fourth_variances.last().expect("grid is non-empty");
    out.checks.push(Check::below(
        format!("N={n_last} replicate variance of (1/N) tr A^4"),
        v_last,
        tol.variance_max,
    ));
    for w in fourth_variances.windows(2) {
        let ((n0, v0), (n1, v1)) = (w[0], w[1]);
        out.checks.push(Check::below(format!("variance of (1/N) tr A^4 decreases from N={n0} to N={n1}"), v1, v0));
    }
    for (n, v) in &fourth_variances {
        out.messages.push(format!("N={n}: variance of (1/N) tr A^4 {v:.3e}"));
    }
    Ok(out)
}

fn run_norm(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let kind = spec.ensemble.kind()?;
    let mut out = Outcome::default();
    let mut csv = Table::create(&spec.output_dir, "norms.csv", &["n", "replica", "latent_t", "norm_a", "norm_b"])?;
    let m_beta = spec.ensemble.beta.map(magnetization);
    let mut last_mean_b = None;
    for n in spec.grid() {
        let spectra = spectra(spec, n, 0.5, 2)?;
        let root = (n as f64).sqrt();
        let mut a_norms = Vec::new();
        let mut b_norms = Vec::new();
        for s in &spectra {
            let a = s.summary.operator_norm;
            let b = a / root;
            csv.row([n.to_string(), s.replica.to_string(), opt(s.latent), a.to_string(), b.to_string()])?;
            a_norms.push(a);
            b_norms.push(b);
            out.replicas.push(json!({
                "n": n,
                "replica": s.replica,
                "latent_t": s.latent,
                "norm_a": a,
                "norm_b": b,
            }));
        }
        out.aggregates.push(json!({
            "n": n,
            "norm_a_mean": mean(&a_norms),
            "norm_a_stderr": stderr(&a_norms),
            "norm_b_mean": mean(&b_norms),
            "norm_b_stderr": stderr(&b_norms),
            "magnetization": m_beta,
        }));
        identity_checks(&spectra, n, tol.identity_tol, &mut out.checks);
        out.messages.push(format!(
            "N={n}: mean ||A|| {:.4}, mean ||B|| {:.4}",
            mean(&a_norms),
            mean(&b_norms)
        ));
        last_mean_b = Some((n, mean(&b_norms)));
    }
    csv.finish()?;
    // Per-diagonal latent signs decouple the diagonals, so m(beta) is not
    // the limit there.
    let (n, b) = last_mean_b.expect("grid is non-empty");
    match (kind, m_beta) {
        (EnsembleKind::DiagonalCw, _) => {}
        (_, Some(m)) if m > 0.0 => out.checks.push(Check::at_most(
            format!("N={n} |mean ||B|| - m(beta)|"),
            (b - m).abs(),
            tol.low_temp_norm_tol,
        )),
        _ => out
            .checks
            .push(Check::below(format!("N={n} mean ||B||"), b, tol.high_temp_norm_max)),
    }
    Ok(out)
}

fn run_correlations(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let mut out = Outcome::default();
    let mut csv = Table::create(
        &spec.output_dir,
        "correlations.csv",
        &["n", "label", "k", "scale", "exact", "asymptotic", "mc_estimate", "mc_stderr"],
    )?;
    for n in spec.grid() {
        let cfg = spec.ensemble.config(n, spec.seed)?;
        for k in 1..=spec.k_max as u32 {
            let replicas = (n > k as usize).then_some(spec.replicas);
            let r = correlation_report(&cfg, k, replicas)?;
            csv.row([
                n.to_string(),
                r.label.clone(),
                k.to_string(),
                r.scale.to_string(),
                r.exact.to_string(),
                opt(r.asymptotic),
                opt(r.mc_estimate),
                opt(r.mc_stderr),
            ])?;
            if let (Some(est), Some(se)) = (r.mc_estimate, r.mc_stderr) {
                let mc = McEstimate { estimate: est, stderr: se, samples: spec.replicas };
                out.checks.push(Check::at_most(
                    format!("N={n} K={k} Monte Carlo z-score"),
                    mc.z_score(r.exact),
                    tol.mc_sigmas,
                ));
            }
            out.aggregates.push(json!({
                "n": n,
                "label": r.label,
                "k": k,
                "scale": r.scale,
                "exact": r.exact,
                "asymptotic": r.asymptotic,
                "mc_estimate": r.mc_estimate,
                "mc_stderr": r.mc_stderr,
            }));
        }
    }
    csv.finish()?;
    Ok(out)
}

/// Absolute slack for cells whose Monte Carlo spread is zero, such as odd
/// moments that vanish identically up to roundoff.
const ORACLE_ROUNDOFF: f64 = 1e-12;

fn run_oracle(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let k_max = spec.k_max as u32;
    let mut out = Outcome::default();
    let mut csv = Table::create(
        &spec.output_dir,
        "oracle.csv",
        &["n", "k", "exact", "mc_estimate", "mc_stderr", "z"],
    )?;
    for n in spec.grid() {
        let cfg = spec.ensemble.config(n, spec.seed)?;
        let sampler = Sampler::new(&cfg)?;
        let rows: Vec<CliResult<Vec<f64>>> = (0..spec.replicas as u64)
            .into_par_iter()
            .map(|r| {
                let m = sampler.sample_replica(r);
                if n <= 64 {
                    (1..=k_max).map(|k| Ok(normalized_trace_power(&m, k, spec.gamma)?)).collect()
                } else {
                    let e = spectral::eigenvalues(&m.scale(spec.gamma)?)?;
                    let s = SpectralSummary::from_eigenvalues(e, k_max, spec.gamma)?;
                    Ok(s.moments)
                }
            })
            .collect();
        let rows: Vec<Vec<f64>> = rows.into_iter().collect::<CliResult<_>>()?;
        for (r, row) in rows.iter().enumerate() {
            out.replicas.push(json!({ "n": n, "replica": r, "trace_moments": row }));
        }
        for k in 1..=k_max {
            let xs: Vec<f64> = rows.iter().map(|row| row[k as usize - 1]).collect();
            let mc = McEstimate::from_samples(&xs);
            let exact = exact_trace_moment_for(&cfg, k as usize, spec.gamma)?;
            let z = if (mc.estimate - exact).abs() <= ORACLE_ROUNDOFF { 0.0 } else { mc.z_score(exact) };
            csv.row([
                n.to_string(),
                k.to_string(),
                exact.to_string(),
                mc.estimate.to_string(),
                mc.stderr.to_string(),
                z.to_string(),
            ])?;
            out.aggregates.push(json!({
                "n": n,
                "k": k,
                "exact": exact,
                "mc_estimate": mc.estimate,
                "mc_stderr": mc.stderr,
                "z": z,
            }));
            out.checks.push(Check::at_most(format!("N={n} k={k} oracle z-score"), z, tol.mc_sigmas));
        }
    }
    csv.finish()?;
    Ok(out)
}

fn run_graphcheck(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let report = verify_simple_edge_bound(spec.k_max)?;
    let mut out = Outcome::default();
    let mut csv = Table::create(
        &spec.output_dir,
        "classes.csv",
        &["k", "canonical", "rho", "sigma_simple", "sigma_simple_proper", "odd_edge_count"],
    )?;
    for k in 1..=spec.k_max {
        for c in enumerate_classes(k)? {
            let canonical: Vec<String> = c.canonical.iter().map(|v| v.to_string()).collect();
            csv.row([
                k.to_string(),
                canonical.join(" "),
                c.rho.to_string(),
                c.sigma_simple.to_string(),
                c.sigma_simple_proper.to_string(),
                c.odd_edge_count.to_string(),
            ])?;
        }
    }
    csv.finish()?;
    for v in &report.violations {
        out.replicas.push(json!({ "canonical": v.canonical, "reason": v.reason }));
    }
    out.aggregates.push(json!({
        "k_max": report.k_max,
        "classes_checked": report.classes_checked,
        "bound_cases": report.bound_cases,
        "equality_cases": report.equality_cases,
        "violations": report.violations.len(),
    }));
    out.checks.push(Check::at_most("graph bound violations", report.violations.len() as f64, 0.0));
    out.messages.push(format!("classes checked: {}", report.classes_checked));
    out.messages.push(format!("violations: {}", report.violations.len()));
    Ok(out)
}

fn run_laplace(spec: &ExperimentSpec) -> CliResult<Outcome> {
    let tol = &spec.tolerances;
    let beta = spec.ensemble.beta.expect("validated");
    let potential = curie_weiss_potential(beta)?;
    let expansion = find_minimum(potential.as_ref())?;
    let mut out = Outcome::default();
    let mut csv = Table::create(&spec.output_dir, "laplace.csv", &["scale", "k", "exact", "asymptotic", "ratio"])?;
    let measures: Vec<CliResult<DeFinettiMeasure>> = spec
        .scales
        .par_iter()
        .map(|&s| Ok(DeFinettiMeasure::new(potential.clone(), s)?))
        .collect();
    let measures: Vec<DeFinettiMeasure> = measures.into_iter().collect::<CliResult<_>>()?;
    let largest = spec.scales.iter().copied().fold(f64::MIN, f64::max);
    for (&s, m) in spec.scales.iter().zip(&measures) {
        for k in 1..=spec.k_max as u32 {
            let exact = m.moment(k);
            let asymptotic = laplace_moment_asymptotic(&expansion, k, s)?;
            let ratio = (asymptotic != 0.0).then(|| exact / asymptotic);
            csv.row([s.to_string(), k.to_string(), exact.to_string(), asymptotic.to_string(), opt(ratio)])?;
            out.aggregates.push(json!({
                "scale": s,
                "k": k,
                "exact": exact,
                "asymptotic": asymptotic,
                "ratio": ratio,
            }));
            if s == largest {
                if let Some(r) = ratio {
                    out.checks.push(Check::at_most(
                        format!("S={s} K={k} |exact / asymptotic - 1|"),
                        (r - 1.0).abs(),
                        tol.laplace_rel,
                    ));
                }
            }
        }
    }
    csv.finish()?;
    out.messages.push(format!(
        "minimum at a={} with order {} and coefficient {}",
        expansion.a, expansion.nu, expansion.p
    ));
    Ok(out)
}
