//! Small float helpers on top of `libm` (the crate is no_std).

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// `|x|^e` for positive exponents; `powf` with the sign stripped.
#[inline]
pub(crate) fn pow_abs(x: f64, e: f64) -> f64 {
    libm::pow(abs(x), e)
}

#[inline]
pub(crate) fn powf(x: f64, e: f64) -> f64 {
    libm::pow(x, e)
}

/// Integer power by repeated multiplication; exponents here are tiny (the
/// space dimension), so this beats `pow` on both accuracy and speed.
#[inline]
pub(crate) fn powi(x: f64, mut k: u32) -> f64 {
    let mut base = x;
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

#[inline]
pub(crate) fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Used as the independent cross-check for closed-form primitives.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        let delta = left + right - whole;
        if depth == 0 || abs(delta) <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powi_matches_pow() {
        for &x in &[0.3, 1.7, 9.25] {
            for k in 0..8u32 {
                let exact = libm::pow(x, k as f64);
                assert!((powi(x, k) - exact).abs() <= 1e-13 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn simpson_integrates_polynomials_and_sine() {
        let got = adaptive_simpson(&|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-13);
        assert!((got - 0.0).abs() < 1e-12);
        let got = adaptive_simpson(&|x| libm::sin(x), 0.0, core::f64::consts::PI, 1e-13);
        assert!((got - 2.0).abs() < 1e-11);
    }
}
