//! Real roots of low-degree polynomials via companion-matrix eigenvalues.

use nalgebra::DMatrix;

/// Complex roots whose imaginary part is below `IMAG_TOLERANCE * (1 + |re|)`
/// are accepted as real. Eigenvalues of an exact double root split by about
/// `sqrt(eps)`, so the window has to be wider than that.
pub const IMAG_TOLERANCE: f64 = 1e-6;

/// Evaluates a polynomial given by ascending coefficients.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn eval_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Real roots of `sum coeffs[i] x^i`, in ascending order.
///
/// Leading coefficients that are negligible relative to the largest one are
/// dropped, so a nominal quartic whose top term cancels is solved as a cubic.
/// Each accepted root gets a few Newton steps on the original polynomial.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Vec::new();
    }
    let mut degree = coeffs.len() - 1;
    while degree > 0 && coeffs[degree].abs() <= 1e-14 * scale {
        degree -= 1;
    }
    if degree == 0 {
        return Vec::new();
    }
    let poly = &coeffs[..=degree];

    // Zero roots are deflated so the companion matrix stays well scaled.
    let mut low = 0;
    while low < degree && poly[low] == 0.0 {
        low += 1;
    }
    let mut roots = Vec::with_capacity(degree);
    if low > 0 {
        roots.push(0.0);
    }
    let reduced = &poly[low..];
    let n = reduced.len() - 1;
    if n == 1 {
        roots.push(-reduced[0] / reduced[1]);
    } else if n > 1 {
        let lead = reduced[n];
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -reduced[i] / lead;
        }
        for z in companion.complex_eigenvalues().iter() {
            if z.im.abs() < IMAG_TOLERANCE * (1.0 + z.re.abs()) {
                roots.push(polish(poly, z.re));
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

/// Real roots of `c2 y² + c1 y + c0`, without cancellation.
pub fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    if c2 == 0.0 {
        return if c1 == 0.0 { Vec::new() } else { vec![-c0 / c1] };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let t = -0.5 * (c1 + c1.signum() * disc.sqrt());
    if t == 0.0 {
        return vec![0.0];
    }
    let mut r = vec![t / c2, c0 / t];
    r.sort_by(|a, b| a.total_cmp(b));
    r
}

fn polish(coeffs: &[f64], mut x: f64) -> f64 {
    let mut best = eval(coeffs, x).abs();
    for _ in 0..3 {
        let (p, dp) = eval_with_derivative(coeffs, x);
        if dp == 0.0 || !dp.is_finite() {
            break;
        }
        let next = x - p / dp;
        let r = eval(coeffs, next).abs();
        if !(r < best) {
            break;
        }
        best = r;
        x = next;
    }
    x
}
