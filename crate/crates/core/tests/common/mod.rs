//! Independent numerical oracles for the test suites.

#![allow(dead_code)]

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Simpson over consecutive panels, for long or oscillatory ranges.
pub fn simpson_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize, tol: f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels).map(|j| simpson(f, a + j as f64 * h, a + (j + 1) as f64 * h, tol / panels as f64)).sum()
}

pub const EULER: f64 = 0.577_215_664_901_532_9;

/// Si(x) = ∫₀ˣ sin t / t dt.
pub fn si_oracle(x: f64) -> f64 {
    let f = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
    simpson_panels(&f, 0.0, x, (x.ceil() as usize).max(1) * 4, 1e-14)
}

/// Ci(x) = 𝐂 + ln x + ∫₀ˣ (cos t − 1)/t dt.
pub fn ci_oracle(x: f64) -> f64 {
    let f = |t: f64| if t == 0.0 { 0.0 } else { (t.cos() - 1.0) / t };
    EULER + x.ln() + simpson_panels(&f, 0.0, x, (x.ceil() as usize).max(1) * 4, 1e-14)
}
