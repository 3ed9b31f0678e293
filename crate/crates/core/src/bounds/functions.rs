//! The one-level contraction `f` and its companion `g(ε) = 4ε f(1/ε)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `f(r) = γ - sqrt(γ² - 1/2)` with `γ = (3 + r/2)/4`, evaluated as
/// `(1/2) / (γ + sqrt(γ² - 1/2))` to avoid cancellation for large `r`.
///
/// `f(0) = 1/2`, `f` is strictly decreasing, and `r f(r) → 2`. `f(∞) = 0`.
pub fn f(r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(invalid(format!("f needs r >= 0, got {r}")));
    }
    Ok(f_unchecked(r))
}

pub(crate) fn f_unchecked(r: f64) -> f64 {
    if r.is_infinite() {
        return 0.0;
    }
    let gamma = 0.25 * (3.0 + 0.5 * r);
    0.5 / (gamma * (1.0 + (1.0 - 0.5 / (gamma * gamma)).sqrt()))
}

/// `ξ = f(1/ε)` written directly in `ε`, which stays accurate as `ε → 0`
/// (where `ξ ≈ 2ε`) and as `ε → ∞` (where `ξ → 1/2`).
pub fn xi_from_eps(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    if eps.is_infinite() {
        return 0.5;
    }
    let b = 0.75 * eps + 0.125;
    let disc = eps * eps / 16.0 + 3.0 * eps / 16.0 + 1.0 / 64.0;
    debug_assert!((b * b - 0.5 * eps * eps - disc).abs() <= 1e-12 * b * b);
    0.5 * eps / (b + disc.sqrt())
}

/// `g(ε) = 4 ε f(1/ε)`.
pub fn g(eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid(format!("g needs eps > 0, got {eps}")));
    }
    Ok(4.0 * eps * xi_from_eps(eps))
}

/// `g(ε)/ε²`, which decreases from 8 at `ε = 0`.
pub fn g_ratio(eps: f64) -> f64 {
    if eps == 0.0 {
        return 8.0;
    }
    4.0 * xi_from_eps(eps) / eps
}

/// Thresholds below which `g` is sandwiched between quadratics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smallness {
    /// Largest `c` with `7ε² <= g(ε)` for all `0 < ε <= c`.
    pub c7: f64,
    /// Largest `c` with `g(ε) <= 9ε²` for all `0 < ε <= c`; infinite because `g(ε)/ε² < 8`.
    pub c9: f64,
}

/// Locates where `g(ε)/ε²` crosses `level` by bracketing and bisection.
/// Returns `∞` when the ratio never reaches `level` (it starts at 8 and decreases).
fn crossing(level: f64) -> f64 {
    if level >= 8.0 {
        return f64::INFINITY;
    }
    let mut hi = 1e-12;
    while g_ratio(hi) > level {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_ratio(mid) >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn smallness_constants() -> Smallness {
    Smallness { c7: crossing(7.0), c9: crossing(9.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn f_textbook(r: f64) -> f64 {
        let gamma = 0.25 * (3.0 + 0.5 * r);
        gamma - (gamma * gamma - 0.5).sqrt()
    }

    #[test]
    fn f_examples() {
        assert_eq!(f(0.0).unwrap(), 0.5);
        assert_relative_eq!(f(4.0).unwrap(), (5.0 - 17f64.sqrt()) / 4.0, max_relative = 1e-15);
        let r = 1e6;
        assert!((1.99..2.01).contains(&(r * f(r).unwrap())));
        assert!(f(-1.0).is_err());
        assert_eq!(f(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn g_examples() {
        let e = 1e-4;
        assert!((7.9..8.1).contains(&(g(e).unwrap() / (e * e))));
        assert_relative_eq!(g(1.0).unwrap(), (7.0 - 17f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert!(g(0.0).is_err());
    }

    #[test]
    fn f_decreasing_and_bounded_on_grid() {
        let grid: Vec<f64> = (0..=4000).map(|i| 10f64.powf(-8.0 + i as f64 * 0.004)).collect();
        let mut prev = f(0.0).unwrap();
        for &r in &grid {
            let v = f(r).unwrap();
            assert!(v > 0.0 && v <= 0.5);
            assert!(v < prev, "f not decreasing at {r}");
            assert!(v < 2.0 / r);
            prev = v;
        }
    }

    #[test]
    fn g_increasing_on_grid() {
        let grid: Vec<f64> = (0..=5000).map(|i| 10f64.powf(-8.0 + i as f64 * 0.002)).collect();
        for w in grid.windows(2) {
            assert!(g(w[1]).unwrap() > g(w[0]).unwrap(), "g not increasing at {}", w[0]);
        }
    }

    #[test]
    fn smallness_matches_closed_form() {
        let s = smallness_constants();
        // g(ε)/ε² = 7 reduces to ε² - (6/7)ε + 1/49 = 0.
        assert_relative_eq!(s.c7, (3.0 - 2.0 * 2f64.sqrt()) / 7.0, max_relative = 1e-12);
        assert!(s.c9.is_infinite());
        assert!(g_ratio(s.c7 * 0.999) >= 7.0 && g_ratio(s.c7 * 1.001) < 7.0);
    }

    proptest! {
        #[test]
        fn eps_form_matches_textbook(r in 1e-3f64..1e3) {
            let a = f_textbook(r);
            prop_assert!((xi_from_eps(1.0 / r) - a).abs() < 1e-13);
            prop_assert!((f(r).unwrap() - a).abs() < 1e-13);
        }

        #[test]
        fn g_below_eight_eps_squared(eps in 1e-12f64..1e6) {
            let v = g(eps).unwrap();
            prop_assert!(v > 0.0 && v < 8.0 * eps * eps);
        }
    }
}
