use crate::error::{Error, Result};

/// Adaptive Simpson integration on a finite interval.
///
/// Recursion halts when the Richardson error estimate drops below the
/// per-interval tolerance shareapportioned by interval length.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::invalid_input(format!(
            "integration interval [{a}, {b}] must be finite and ordered"
        )));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut worst: f64 = 0.0;
    let value = simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60, &mut worst);
    if !value.is_finite() {
        return Err(Error::Integration {
            detail: "non-finite integrand encountered".to_string(),
            achieved: f64::INFINITY,
        });
    }
    if worst > tol.max(1e-15) {
        return Err(Error::Integration {
            detail: "adaptive quadrature stalled before reaching tolerance".to_string(),
            achieved: worst,
        });
    }
    Ok(value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = (left + right - whole) / 15.0;
    if depth == 0 || err.abs() <= tol {
        if depth == 0 {
            *worst = worst.max(err.abs());
        }
        return left + right + err;
    }
    let half_tol = 0.5 * tol;
    simpson_rec(f, a, m, fa, flm, fm, left, half_tol, depth - 1, worst)
        + simpson_rec(f, m, b, fm, frm, fb, right, half_tol, depth - 1, worst)
}
