//! Minimum location and Laplace-method asymptotics for mixing measures.

use super::potential::Potential;
use crate::error::{Error, Result};

/// Separates quadratic from quartic minima.
pub const CURVATURE_THRESHOLD: f64 = 1e-8;

const SCAN_MAX_RAPIDITY: f64 = 20.0;
const SCAN_STEP: f64 = 1.0 / 256.0;

/// Local data at the minimum of a potential on `[0, 1)`:
/// `F(t) ≈ F(a) + P |t - a|^nu` and `1 / (1 - t^2) ≈ Q |t - a|^(lambda - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceExpansion {
    pub a: f64,
    pub p: f64,
    pub nu: u32,
    pub lambda: f64,
    pub q: f64,
    pub f_at_a: f64,
}

impl LaplaceExpansion {
    fn validate(&self) -> Result<()> {
        let shape_ok = match self.nu {
            2 => true,
            4 => self.a == 0.0,
            _ => false,
        };
        if !shape_ok || !(self.p > 0.0) || !(0.0..1.0).contains(&self.a) {
            return Err(Error::Classification(format!("unsupported expansion {self:?}")));
        }
        Ok(())
    }
}

/// Finds the minimum of `F` on `[0, 1)` by a scan in rapidity, golden-section
/// refinement and a final bisection on the sign of `F'`, then classifies its
/// order.
pub fn find_minimum(p: &dyn Potential) -> Result<LaplaceExpansion> {
    let g = |y: f64| p.value_at_rapidity(y);
    let n = (SCAN_MAX_RAPIDITY / SCAN_STEP) as usize;
    let mut best = (0usize, g(0.0));
    for i in 1..=n {
        let v = g(i as f64 * SCAN_STEP);
        if v < best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Classification(format!("{}: potential not finite", p.label())));
    }
    if best.0 == n {
        return Err(Error::Classification(format!(
            "{}: minimum at the boundary t -> 1",
            p.label()
        )));
    }

    let a = if best.0 == 0 {
        0.0
    } else {
        let y0 = best.0 as f64 * SCAN_STEP;
        let y = golden_min(&g, (y0 - SCAN_STEP).max(0.0), y0 + SCAN_STEP);
        polish_root(p, y)
    };

    let f2 = p.second_derivative(a);
    let (nu, coeff) = if f2.abs() > CURVATURE_THRESHOLD {
        if f2 < 0.0 {
            return Err(Error::Classification(format!(
                "{}: F''({a}) = {f2} < 0 at the scanned minimum",
                p.label()
            )));
        }
        (2, f2 / 2.0)
    } else {
        let f4 = p.fourth_derivative(a);
        if a != 0.0 || !(f4 > CURVATURE_THRESHOLD) {
            return Err(Error::Classification(format!(
                "{}: degenerate minimum at {a} (F'' = {f2}, F'''' = {f4})",
                p.label()
            )));
        }
        (4, f4 / 24.0)
    };

    Ok(LaplaceExpansion {
        a,
        p: coeff,
        nu,
        lambda: 1.0,
        q: 1.0 / (1.0 - a * a),
        f_at_a: p.value(a),
    })
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Golden section only resolves the minimizer to about `sqrt(eps)`; bisect
/// on the sign of `F'` in a bracket around it.
fn polish_root(p: &dyn Potential, y: f64) -> f64 {
    let mut lo = (y - 1e-3).max(0.0).tanh();
    let mut hi = (y + 1e-3).tanh();
    let (dlo, dhi) = (p.first_derivative(lo), p.first_derivative(hi));
    if !(dlo < 0.0 && dhi > 0.0) {
        return y.tanh();
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.first_derivative(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The positive solution of `tanh(beta m) = m`, or 0 for `beta <= 1`.
pub fn magnetization(beta: f64) -> f64 {
    if !(beta > 1.0) {
        return 0.0;
    }
    let h = |t: f64| (beta * t).tanh() - t;
    let (mut lo, mut hi) = (1e-8, 1.0 - 1e-15);
    // h > 0 just above 0 and h < 0 near 1
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if h(lo).abs() < h(hi).abs() {
        lo
    } else {
        hi
    }
}

fn double_factorial(n: i64) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Leading-order value of `∫ t^K dμ` for the measure `exp(-S F / 2)` with an
/// even potential whose minimum on `[0, 1)` is described by `exp`.
pub fn laplace_moment_asymptotic(exp: &LaplaceExpansion, k: u32, scale: f64) -> Result<f64> {
    exp.validate()?;
    if exp.a > 0.0 {
        // two symmetric minima at ±a carry half the mass each
        let a = exp.a.powi(k as i32);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        return Ok(0.5 * (a + sign * a));
    }
    if k % 2 == 1 {
        return Ok(0.0);
    }
    let sp = scale * exp.p;
    Ok(match exp.nu {
        2 => double_factorial(k as i64 - 1) * sp.powf(-(k as f64) / 2.0),
        _ => {
            let kf = k as f64;
            let c = libm::tgamma((kf + 1.0) / 4.0) / libm::tgamma(0.25) * 2f64.powf(kf / 4.0);
            c * sp.powf(-kf / 4.0)
        }
    })
}

/// Leading-order value of `∫ |t| dμ` at a quadratic minimum at 0.
pub fn laplace_abs_moment_asymptotic(exp: &LaplaceExpansion, scale: f64) -> Result<f64> {
    exp.validate()?;
    if exp.nu != 2 || exp.a != 0.0 {
        return Err(Error::Classification(
            "absolute moment asymptotics need a quadratic minimum at 0".into(),
        ));
    }
    Ok((2.0 / std::f64::consts::PI).sqrt() * (scale * exp.p).powf(-0.5))
}

/// Leading-order value of the one-sided integral
/// `∫_a^{a+δ} exp(-S F(t) / 2) Q (t - a)^(lambda - 1) dt`.
pub fn laplace_integral(exp: &LaplaceExpansion, scale: f64) -> Result<f64> {
    exp.validate()?;
    let nu = exp.nu as f64;
    let r = exp.lambda / nu;
    Ok(exp.q / nu * libm::tgamma(r) * (exp.p * scale / 2.0).powf(-r) * (-scale * exp.f_at_a / 2.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::definetti::potential::{CurieWeiss, FnPotential};

    #[test]
    fn quadratic_minimum_at_zero() {
        let e = find_minimum(&CurieWeiss::new(0.5).unwrap()).unwrap();
        assert_eq!(e.a, 0.0);
        assert_eq!(e.nu, 2);
        assert!((e.p - 1.0).abs() < 1e-12);
        assert_eq!(e.q, 1.0);
    }

    #[test]
    fn quartic_minimum_at_critical_beta() {
        let e = find_minimum(&CurieWeiss::new(1.0).unwrap()).unwrap();
        assert_eq!(e.a, 0.0);
        assert_eq!(e.nu, 4);
        assert!((e.p - 1.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn symmetric_minima_in_low_temperature() {
        for beta in [1.1, 1.5, 2.0, 5.0] {
            let cw = CurieWeiss::new(beta).unwrap();
            let e = find_minimum(&cw).unwrap();
            assert_eq!(e.nu, 2);
            assert!((e.a - magnetization(beta)).abs() < 1e-12, "beta={beta}: {} vs {}", e.a, magnetization(beta));
            assert!((e.p - cw.second_derivative(e.a) / 2.0).abs() < 1e-8 * e.p);
        }
    }

    #[test]
    fn rejects_degenerate_and_boundary_minima() {
        let sixth = FnPotential::new("t^6", true, |t: f64| t.powi(6) + t.atanh().powi(8));
        assert!(matches!(find_minimum(&sixth), Err(Error::Classification(_))));
        let falling = FnPotential::new("falling", true, |t: f64| -t * t);
        assert!(matches!(find_minimum(&falling), Err(Error::Classification(_))));
    }

    #[test]
    fn magnetization_oracle() {
        // mpmath findroot at 40 digits
        let cases = [
            (1.1, 0.502_940_574_944_641_6),
            (1.5, 0.858_559_636_640_110_4),
            (2.0, 0.957_504_024_077_268_7),
            (5.0, 0.999_909_121_715_232_6),
        ];
        let mut last = 0.0;
        for (beta, want) in cases {
            let m = magnetization(beta);
            assert!(((beta * m).tanh() - m).abs() < 1e-12);
            assert!((m - want).abs() < 1e-12, "beta={beta}: {m}");
            assert!(m > last);
            last = m;
        }
        assert_eq!(magnetization(0.5), 0.0);
        assert_eq!(magnetization(1.0), 0.0);
    }

    #[test]
    fn asymptotic_moments() {
        let e = find_minimum(&CurieWeiss::new(0.5).unwrap()).unwrap();
        assert!((laplace_moment_asymptotic(&e, 2, 1e6).unwrap() - 1e-6).abs() < 1e-18);
        assert!((laplace_moment_asymptotic(&e, 4, 1e6).unwrap() - 3e-12).abs() < 1e-24);
        assert_eq!(laplace_moment_asymptotic(&e, 3, 1e6).unwrap(), 0.0);
        assert_eq!(laplace_moment_asymptotic(&e, 0, 1e6).unwrap(), 1.0);

        let e2 = find_minimum(&CurieWeiss::new(2.0).unwrap()).unwrap();
        let m = magnetization(2.0);
        assert!((laplace_moment_asymptotic(&e2, 2, 1e6).unwrap() - m * m).abs() < 1e-12);
        assert_eq!(laplace_moment_asymptotic(&e2, 3, 1e6).unwrap(), 0.0);

        // quartic constant: Γ(3/4)/Γ(1/4)·√2·(S/6)^(-1/2)
        let e1 = find_minimum(&CurieWeiss::new(1.0).unwrap()).unwrap();
        let got = laplace_moment_asymptotic(&e1, 2, 1e6).unwrap();
        assert!((got / 0.001_170_828_66 - 1.0).abs() < 1e-6, "{got}");

        let bad = LaplaceExpansion { nu: 3, ..e };
        assert!(laplace_moment_asymptotic(&bad, 2, 1.0).is_err());
    }

    #[test]
    fn laplace_integral_gaussian() {
        // ∫_0^∞ exp(-S t^2 / 2) dt = sqrt(pi / (2 S))
        let e = LaplaceExpansion { a: 0.0, p: 1.0, nu: 2, lambda: 1.0, q: 1.0, f_at_a: 0.0 };
        let s = 50.0;
        let want = (std::f64::consts::PI / (2.0 * s)).sqrt();
        assert!((laplace_integral(&e, s).unwrap() - want).abs() < 1e-14);
        let abs = laplace_abs_moment_asymptotic(&e, 1e6).unwrap();
        assert!((abs - 7.978_845_608e-4).abs() < 1e-12);
    }
}
