//! Numerical oracles independent of the closed forms under test: adaptive
//! Simpson quadrature (1D, and nested for double integrals) and central
//! finite differences.

/// Adaptive Simpson integration of `f` over [a, b] to absolute tolerance
/// `tol`, with Richardson correction at acceptance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    adapt(&mut f, a, m, b, fa, fm, fb, whole, tol, 48)
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (fl, fr) = (f(lm), f(rm));
    let left = simpson(fa, fl, fm, a, m);
    let right = simpson(fm, fr, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adapt(f, a, lm, m, fa, fl, fm, left, 0.5 * tol, depth - 1)
            + adapt(f, m, rm, b, fm, fr, fb, right, 0.5 * tol, depth - 1)
    }
}

/// ∫∫ f(x, y) dy dx over [ax,bx] × [ay,by]; the inner integral runs one
/// decade tighter than the outer so its error stays subdominant.
pub fn integrate2<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    tol: f64,
) -> f64 {
    integrate(|x| integrate(|y| f(x, y), ay, by, 0.1 * tol), ax, bx, tol)
}

/// N(x; mean, var) density.
pub fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Central finite difference (f(x+h) − f(x−h)) / 2h.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// |a − b| / max(|b|, floor): relative error with an absolute floor for
/// near-zero references.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_known_1d_integrals_tightly() {
        // ∫₀^π sin = 2
        let s = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert!((s - 2.0).abs() < 1e-11, "{s}");
        // standard normal mass
        let m = integrate(|x| gauss_pdf(x, 0.0, 1.0), -10.0, 10.0, 1e-12);
        assert!((m - 1.0).abs() < 1e-11, "{m}");
        // a sharply peaked integrand: N(0, 0.0025) mass
        let p = integrate(|x| gauss_pdf(x, 0.3, 0.0025), -2.0, 2.0, 1e-12);
        assert!((p - 1.0).abs() < 1e-10, "{p}");
    }

    #[test]
    fn integrates_a_separable_double_integral() {
        // (∫₀¹ x dx)·(∫₀² y² dy) = 0.5 · 8/3
        let v = integrate2(|x, y| x * y * y, 0.0, 1.0, 0.0, 2.0, 1e-12);
        assert!((v - 4.0 / 3.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn central_difference_hits_a_known_derivative() {
        let d = central_diff(|x| x * x * x, 2.0, 1e-6);
        assert!((d - 12.0).abs() < 1e-7);
    }
}
