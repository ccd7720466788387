//! Numerical helpers shared by the bound and decoder modules: Gaussian tail,
//! log-domain accumulation, and exact binomials.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::f64::consts::{LN_2, PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian tail probability Q(x) = P(Z > x).
pub fn q_function(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - q_function(-x);
    }
    if x <= 8.0 {
        0.5 * libm::erfc(x / SQRT_2)
    } else {
        ln_q_function(x).exp()
    }
}

/// Natural log of Q(x), finite far beyond the point where Q(x) underflows.
pub fn ln_q_function(x: f64) -> f64 {
    if x <= 8.0 {
        return q_function(x).ln();
    }
    // Q(x) = phi(x) * R(x), R the Mills ratio evaluated by its continued
    // fraction 1/(x + 1/(x + 2/(x + 3/(x + ...)))) with modified Lentz.
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -0.5 * x * x - LN_SQRT_2PI - f.ln()
}

/// Jacobian logarithm ln(e^a + e^b), exact to rounding.
#[inline]
pub fn max_star(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Accumulates terms given by their natural logarithms and returns the log of
/// their sum. Terms are added largest first with Neumaier compensation.
#[derive(Debug, Default, Clone)]
pub struct LogSum {
    terms: Vec<f64>,
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ln_term: f64) {
        if ln_term > f64::NEG_INFINITY {
            self.terms.push(ln_term);
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// ln of the accumulated sum; `-inf` when empty.
    pub fn ln_total(&self) -> f64 {
        let mut sorted = self.terms.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let Some(&top) = sorted.first() else {
            return f64::NEG_INFINITY;
        };
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for t in sorted {
            let v = (t - top).exp();
            let s = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - s) + v;
            } else {
                comp += (v - s) + sum;
            }
            sum = s;
        }
        top + (sum + comp).ln()
    }
}

/// Exact binomial coefficient C(n, k).
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// ln C(n, k) via log-gamma; `-inf` when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Natural log of an arbitrary-precision integer; `-inf` for zero.
pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        if let Some(v) = x.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
    top.ln() + shift as f64 * LN_2
}

/// Composite adaptive Simpson quadrature on [a, b] to a relative tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
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
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    // Seed with 64 panels so sharply peaked integrands are not missed.
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut coarse = Vec::with_capacity(panels);
    let mut total_est = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
        let s = h / 6.0 * (f0 + 4.0 * fm + f1);
        total_est += s.abs();
        coarse.push((x0, x1, f0, fm, f1, s));
    }
    let tol = (rel_tol * total_est).max(f64::MIN_POSITIVE);
    coarse
        .into_iter()
        .map(|(x0, x1, f0, fm, f1, s)| recurse(f, x0, x1, f0, fm, f1, s, tol / panels as f64, 40))
        .sum()
}

/// Craig's representation Q(x) = (1/pi) * int_0^{pi/2} exp(-x^2 / (2 sin^2 t)) dt,
/// exposed for cross-checks of the closed-form tail.
pub fn q_function_craig(x: f64) -> f64 {
    let f = |t: f64| {
        let s = t.sin();
        if s <= 0.0 {
            0.0
        } else {
            (-x * x / (2.0 * s * s)).exp()
        }
    };
    adaptive_simpson(&f, 0.0, PI / 2.0, 1e-13) / PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_at_zero_is_half() {
        assert_eq!(q_function(0.0), 0.5);
    }

    #[test]
    fn q_symmetry() {
        for &x in &[0.1, 1.0, 2.5] {
            assert!((q_function(x) + q_function(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_q_continuous_across_branch() {
        let below = ln_q_function(8.0);
        let above = ln_q_function(8.0 + 1e-9);
        assert!((below - above).abs() < 1e-6);
        // Mills-ratio branch against erfc where both are representable.
        let direct = (0.5 * libm::erfc(10.0 / SQRT_2)).ln();
        assert!((ln_q_function(10.0) - direct).abs() < 1e-12 * direct.abs());
    }

    #[test]
    fn ln_q_far_tail_is_finite() {
        let v = ln_q_function(60.0);
        assert!(v.is_finite());
        assert!(v < -1800.0);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 3), BigUint::from(56u32));
        assert_eq!(binomial(4, 5), BigUint::zero());
        assert_eq!(binomial(0, 0), BigUint::one());
        let big = binomial(1000, 26);
        assert!((ln_biguint(&big) - ln_binomial(1000, 26)).abs() < 1e-9);
    }

    #[test]
    fn log_sum_matches_direct() {
        let mut acc = LogSum::new();
        for v in [1.0f64, 2.0, 3.0, 1e-20] {
            acc.push(v.ln());
        }
        assert!((acc.ln_total().exp() - 6.0).abs() < 1e-14);
        assert_eq!(LogSum::new().ln_total(), f64::NEG_INFINITY);
    }

    #[test]
    fn max_star_exact() {
        let v = max_star(1.0, 2.0);
        assert!((v - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-15);
        assert_eq!(max_star(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn craig_matches_erfc() {
        for &x in &[0.5, 2.0, 4.462, 7.0] {
            let a = q_function(x);
            let b = q_function_craig(x);
            assert!(((a - b) / a).abs() < 1e-11, "x={x} {a} {b}");
        }
    }
}
