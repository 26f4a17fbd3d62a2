use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A potential `F: (-1, 1) -> R` driving a mixing density proportional to
/// `exp(-S F(t) / 2) / (1 - t^2)`.
///
/// Derivatives default to Richardson-extrapolated central differences; the
/// Curie-Weiss potential overrides them with closed forms.
pub trait Potential: Send + Sync + fmt::Debug {
    fn value(&self, t: f64) -> f64;

    /// `F(tanh y)`. Implementations with a closed form in the rapidity `y`
    /// should override this so that tails beyond `|y| ~ 19` (where `tanh`
    /// rounds to one) stay finite.
    fn value_at_rapidity(&self, y: f64) -> f64 {
        self.value(y.tanh())
    }

    fn first_derivative(&self, t: f64) -> f64 {
        fd_first(|x| self.value(x), t, self.fd_step())
    }

    fn second_derivative(&self, t: f64) -> f64 {
        fd_second(|x| self.value(x), t, self.fd_step())
    }

    fn fourth_derivative(&self, t: f64) -> f64 {
        fd_fourth(|x| self.value(x), t, self.fd_step())
    }

    /// Step used by the finite-difference fallbacks.
    fn fd_step(&self) -> f64 {
        1e-2
    }

    fn is_even(&self) -> bool;

    fn label(&self) -> String;
}

// Central differences with one Richardson step, so the truncation error is
// O(h^4) rather than O(h^2).

fn fd_first(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn fd_second(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let d = |h: f64| (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn fd_fourth(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let h = 4.0 * h;
    let d = |h: f64| {
        (f(t + 2.0 * h) - 4.0 * f(t + h) + 6.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / h.powi(4)
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// `F_beta(t) = (1/beta) artanh(t)^2 + ln(1 - t^2)`, the potential whose
/// mixture reproduces the Curie-Weiss law at inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurieWeiss {
    beta: f64,
}

impl CurieWeiss {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `ln cosh y` without overflow.
pub(crate) fn ln_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Potential for CurieWeiss {
    fn value(&self, t: f64) -> f64 {
        let y = t.atanh();
        y * y / self.beta + (1.0 - t * t).ln()
    }

    // ln(1 - tanh^2 y) = -2 ln cosh y
    fn value_at_rapidity(&self, y: f64) -> f64 {
        y * y / self.beta - 2.0 * ln_cosh(y)
    }

    fn first_derivative(&self, t: f64) -> f64 {
        let s = 1.0 - t * t;
        2.0 * (t.atanh() - self.beta * t) / (self.beta * s)
    }

    fn second_derivative(&self, t: f64) -> f64 {
        let b = self.beta;
        let s = 1.0 - t * t;
        2.0 * (1.0 - b * (1.0 + t * t) + 2.0 * t * t.atanh()) / (b * s * s)
    }

    fn fourth_derivative(&self, t: f64) -> f64 {
        let b = self.beta;
        let y = t.atanh();
        let t2 = t * t;
        let s = 1.0 - t2;
        let num = 12.0 * t2 * t * y + 12.0 * t * y + 18.0 * t2 + 4.0
            - 3.0 * b * (t2 * t2 + 6.0 * t2 + 1.0);
        4.0 * num / (b * s.powi(4))
    }

    fn is_even(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        format!("curie_weiss(beta={})", self.beta)
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A potential given by a closure. Derivatives not supplied explicitly are
/// taken by finite differences with step `h`.
#[derive(Clone)]
pub struct FnPotential {
    value: RealFn,
    first: Option<RealFn>,
    second: Option<RealFn>,
    fourth: Option<RealFn>,
    even: bool,
    h: f64,
    label: String,
}

impl FnPotential {
    pub fn new<F>(label: impl Into<String>, even: bool, value: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            first: None,
            second: None,
            fourth: None,
            even,
            h: 1e-2,
            label: label.into(),
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_first<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.first = Some(Arc::new(f));
        self
    }

    pub fn with_second<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.second = Some(Arc::new(f));
        self
    }

    pub fn with_fourth<F: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, f: F) -> Self {
        self.fourth = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential")
            .field("label", &self.label)
            .field("even", &self.even)
            .field("h", &self.h)
            .finish()
    }
}

impl Potential for FnPotential {
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    fn first_derivative(&self, t: f64) -> f64 {
        match &self.first {
            Some(f) => f(t),
            None => fd_first(|x| self.value(x), t, self.h),
        }
    }

    fn second_derivative(&self, t: f64) -> f64 {
        match &self.second {
            Some(f) => f(t),
            None => fd_second(|x| self.value(x), t, self.h),
        }
    }

    fn fourth_derivative(&self, t: f64) -> f64 {
        match &self.fourth {
            Some(f) => f(t),
            None => fd_fourth(|x| self.value(x), t, self.h),
        }
    }

    fn fd_step(&self) -> f64 {
        self.h
    }

    fn is_even(&self) -> bool {
        self.even
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

pub fn curie_weiss_potential(beta: f64) -> Result<Arc<dyn Potential>> {
    Ok(Arc::new(CurieWeiss::new(beta)?))
}

/// Probes the structural assumptions on a potential: finite inside the
/// interval, still growing at `t = ±(1 - 1e-6)`, and symmetric when it
/// claims to be even.
pub fn check_potential(p: &dyn Potential) -> Result<()> {
    for i in 1..200 {
        let t = -0.995 + 0.01 * i as f64;
        let v = p.value(t);
        if !v.is_finite() {
            return Err(Error::Domain(format!("{}: F({t}) = {v} is not finite", p.label())));
        }
        if p.is_even() && (v - p.value(-t)).abs() > 1e-12 * v.abs().max(1.0) {
            return Err(Error::Domain(format!(
                "{}: claims evenness but F({t}) != F(-{t})",
                p.label()
            )));
        }
    }
    for sign in [1.0, -1.0] {
        let near = p.value(sign * (1.0 - 1e-3));
        let edge = p.value(sign * (1.0 - 1e-6));
        if !(edge > near) {
            return Err(Error::Domain(format!(
                "{}: F does not grow towards t = {sign}: {near} then {edge}",
                p.label()
            )));
        }
    }
    Ok(())
}
