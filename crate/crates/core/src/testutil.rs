//! Quadrature oracles for tests. Deliberately independent of the grid
//! convolution code they check.

/// Adaptive Simpson integration of `f` on [a, b].
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// ∫_a^b ∫_0^{outer_x} g(x, y) dy dx by nested adaptive Simpson.
pub fn triangle_integral(g: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, upper: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    let inner = |x: f64| adaptive_simpson(&|y| g(x, y), 0.0, upper(x), tol * 0.1);
    adaptive_simpson(&inner, a, b, tol)
}
