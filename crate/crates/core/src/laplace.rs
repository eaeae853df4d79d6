//! Numerical inversion of Laplace transforms: fixed Talbot contour with an
//! Euler-summed Bromwich fallback.

use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{MecError, Result};

/// Node count of the primary Talbot evaluation.
pub const TALBOT_NODES: usize = 32;
/// Node count of the self-consistency Talbot evaluation.
pub const TALBOT_CHECK_NODES: usize = 24;
/// Largest tolerated disagreement between the two Talbot evaluations.
pub const TALBOT_AGREEMENT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMethod {
    Talbot,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    pub method: InversionMethod,
    /// |Talbot(M) − Talbot(M')| observed before choosing the method.
    pub talbot_spread: f64,
}

/// Fixed Talbot inversion with `m` nodes.
pub fn talbot<F: Fn(Complex64) -> Complex64>(f: F, t: f64, m: usize) -> f64 {
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut acc = 0.5 * f(Complex64::new(r, 0.0)).re * (r * t).exp();
    for k in 1..m {
        let theta = k as f64 * PI / mf;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * f(s) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    acc * r / mf
}

/// Euler-summed trapezoidal rule on the Bromwich line (Abate–Whitt).
pub fn euler<F: Fn(Complex64) -> Complex64>(f: F, t: f64) -> f64 {
    const A: f64 = 25.0;
    const N: usize = 20;
    const M: usize = 12;
    let h = PI / t;
    let u = (A / 2.0).exp() / t;
    let x = A / (2.0 * t);
    let mut partial = [0.0; N + M + 1];
    let mut sum = 0.5 * f(Complex64::new(x, 0.0)).re;
    partial[0] = sum;
    for (k, slot) in partial.iter_mut().enumerate().skip(1) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * f(Complex64::new(x, k as f64 * h)).re;
        *slot = sum;
    }
    let mut binom = 1.0;
    let mut avg = 0.0;
    for j in 0..=M {
        avg += binom * partial[N + j];
        binom *= (M - j) as f64 / (j + 1) as f64;
    }
    u * avg / (1u64 << M) as f64
}

/// Inverts `f` at `t > 0`: Talbot when two node counts agree, Euler otherwise.
pub fn invert<F: Fn(Complex64) -> Complex64>(f: F, t: f64) -> Result<Inversion> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(MecError::Domain { what: "laplace invert", value: t });
    }
    let a = talbot(&f, t, TALBOT_NODES);
    let b = talbot(&f, t, TALBOT_CHECK_NODES);
    let spread = (a - b).abs();
    if a.is_finite() && spread <= TALBOT_AGREEMENT {
        return Ok(Inversion { value: a, method: InversionMethod::Talbot, talbot_spread: spread });
    }
    let e = euler(&f, t);
    if !e.is_finite() {
        return Err(MecError::Numerical(alloc::format!(
            "Laplace inversion failed at t={t}: Talbot spread {spread:e}, Euler non-finite"
        )));
    }
    Ok(Inversion { value: e, method: InversionMethod::Euler, talbot_spread: spread })
}
