//! Central-difference verification of derivatives.

use serde::Serialize;

use super::ScalarField;
use crate::error::{Error, Result};

/// Discrepancy between an exact and a finite-difference vector.
///
/// `relative` is norm-wise: `max|exact - fd| / max|fd|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorStat {
    pub absolute: f64,
    pub relative: f64,
}

impl ErrorStat {
    pub fn between(exact: &[f64], approx: &[f64]) -> Self {
        let absolute = exact
            .iter()
            .zip(approx)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = approx.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let relative = if absolute == 0.0 {
            0.0
        } else {
            absolute / scale.max(1e-300)
        };
        ErrorStat { absolute, relative }
    }

    /// Keeps the worse of two statistics, component-wise.
    pub fn worst(self, other: ErrorStat) -> Self {
        ErrorStat {
            absolute: self.absolute.max(other.absolute),
            relative: self.relative.max(other.relative),
        }
    }
}

/// A `relu`/`abs` argument close enough to zero that a stencil crosses it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KinkSite {
    pub location: String,
    pub argument: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DerivativeReport {
    pub gradient: ErrorStat,
    pub hessian: ErrorStat,
    pub param_gradient: Option<ErrorStat>,
    pub kinks: Vec<KinkSite>,
}

impl DerivativeReport {
    pub fn non_differentiable(&self) -> bool {
        !self.kinks.is_empty()
    }

    pub fn max_relative(&self) -> f64 {
        let p = self.param_gradient.map_or(0.0, |s| s.relative);
        self.gradient.relative.max(self.hessian.relative).max(p)
    }

    pub fn merge(mut self, other: DerivativeReport) -> Self {
        self.gradient = self.gradient.worst(other.gradient);
        self.hessian = self.hessian.worst(other.hessian);
        self.param_gradient = match (self.param_gradient, other.param_gradient) {
            (Some(a), Some(b)) => Some(a.worst(b)),
            (a, b) => a.or(b),
        };
        self.kinks.extend(other.kinks);
        self
    }
}

fn validate_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::config(format!("finite-difference step {h} outside (0, 1e-2]")));
    }
    Ok(())
}

/// Compares the model's gradient and Hessian at `x` against central
/// differences of its value with step `h`.
pub fn check_derivatives<F: ScalarField + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<DerivativeReport> {
    validate_step(h)?;
    let d = f.dim();
    super::check_len(d, x)?;
    let exact = f.bundle(x)?;

    let mut probe = x.to_vec();
    let mut eval_shifted = |shifts: &[(usize, f64)]| -> Result<f64> {
        probe.copy_from_slice(x);
        for &(axis, delta) in shifts {
            probe[axis] += delta;
        }
        f.value(&probe)
    };

    let f0 = f.value(x)?;
    let mut fd_grad = vec![0.0; d];
    let mut fd_hess = vec![0.0; d * d];
    for i in 0..d {
        let fp = eval_shifted(&[(i, h)])?;
        let fm = eval_shifted(&[(i, -h)])?;
        fd_grad[i] = (fp - fm) / (2.0 * h);
        fd_hess[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..d {
            let fpp = eval_shifted(&[(i, h), (j, h)])?;
            let fpm = eval_shifted(&[(i, h), (j, -h)])?;
            let fmp = eval_shifted(&[(i, -h), (j, h)])?;
            let fmm = eval_shifted(&[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            fd_hess[i * d + j] = v;
            fd_hess[j * d + i] = v;
        }
    }

    Ok(DerivativeReport {
        gradient: ErrorStat::between(&exact.gradient, &fd_grad),
        hessian: ErrorStat::between(&exact.hessian, &fd_hess),
        param_gradient: None,
        kinks: f.kink_sites(x, h)?,
    })
}

/// Compares an exact parameter gradient against central differences of
/// `loss`, perturbing each coordinate of `theta` by `±h`.
pub fn check_param_gradient<L>(mut loss: L, theta: &[f64], exact: &[f64], h: f64) -> Result<ErrorStat>
where
    L: FnMut(&[f64]) -> Result<f64>,
{
    validate_step(h)?;
    if exact.len() != theta.len() {
        return Err(Error::structure("gradient length differs from parameter count"));
    }
    let mut probe = theta.to_vec();
    let mut fd = vec![0.0; theta.len()];
    for k in 0..theta.len() {
        probe[k] = theta[k] + h;
        let lp = loss(&probe)?;
        probe[k] = theta[k] - h;
        let lm = loss(&probe)?;
        probe[k] = theta[k];
        fd[k] = (lp - lm) / (2.0 * h);
    }
    Ok(ErrorStat::between(exact, &fd))
}
