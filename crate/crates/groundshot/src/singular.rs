//! The exact blow-up solution of the pure-power radial equation
//! v'' + (N-1)/r v' + A^2 v^q = 0, used as a comparison barrier for
//! large-amplitude tails.

use crate::math;

/// C(N, q) = (m (N - 2 - m))^(1/(q-1)) with m = 2/(q-1), the coefficient
/// making C r^(-m) an exact solution when A = 1. Needs q > N/(N-2) so the
/// product under the root is positive.
pub fn blowup_coefficient(n: u32, q: f64) -> f64 {
    assert!(n >= 3 && q > 1.0);
    let m = 2.0 / (q - 1.0);
    let product = m * (n as f64 - 2.0 - m);
    assert!(product > 0.0, "need q > N/(N-2) for a real coefficient");
    math::powf(product, 1.0 / (q - 1.0))
}

/// v_A(r) = C(N, q) A^(-2/(q-1)) r^(-2/(q-1)).
pub fn singular_solution(n: u32, q: f64, amplitude_sq: f64, r: f64) -> f64 {
    assert!(amplitude_sq > 0.0 && r > 0.0);
    let m = 2.0 / (q - 1.0);
    blowup_coefficient(n, q) * math::powf(amplitude_sq, -1.0 / (q - 1.0)) * math::powf(r, -m)
}

/// Residual of v_A in the pure-power equation, from the analytic
/// derivatives; zero up to rounding.
pub fn singular_residual(n: u32, q: f64, amplitude_sq: f64, r: f64) -> f64 {
    let m = 2.0 / (q - 1.0);
    let v = singular_solution(n, q, amplitude_sq, r);
    let v1 = -m * v / r;
    let v2 = m * (m + 1.0) * v / (r * r);
    v2 + (n as f64 - 1.0) / r * v1 + amplitude_sq * math::powf(v, q)
}
