//! Polynomial root finding restricted to the unit interval.

use crate::Scalar;

/// Real roots of `a t^2 + b t + c` (any of the coefficients may vanish), ascending.
/// Returns the roots and how many are valid.
pub fn solve_quadratic<S: Scalar>(a: S, b: S, c: S) -> ([S; 2], usize) {
    let zero = S::zero();
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == zero {
        return ([zero; 2], 0);
    }
    if a.abs() <= scale * S::epsilon() * S::lit(16.0) {
        if b.abs() <= scale * S::epsilon() * S::lit(16.0) {
            return ([zero; 2], 0);
        }
        return ([-c / b, zero], 1);
    }
    let disc = b * b - S::lit(4.0) * a * c;
    if disc < zero {
        return ([zero; 2], 0);
    }
    if disc == zero {
        return ([-b / (a + a), zero], 1);
    }
    // Numerically stable form: avoid cancellation between -b and sqrt(disc).
    let sq = disc.sqrt();
    let q = if b >= zero {
        -(b + sq) / S::lit(2.0)
    } else {
        -(b - sq) / S::lit(2.0)
    };
    let r0 = q / a;
    let r1 = if q != zero { c / q } else { -r0 };
    if r0 <= r1 {
        ([r0, r1], 2)
    } else {
        ([r1, r0], 2)
    }
}

#[inline]
fn horner3<S: Scalar>(c: &[S; 4], t: S) -> S {
    ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
}

#[inline]
fn horner3_deriv<S: Scalar>(c: &[S; 4], t: S) -> S {
    (S::lit(3.0) * c[3] * t + S::lit(2.0) * c[2]) * t + c[1]
}

/// Safeguarded Newton on a bracket where the cubic is monotone and changes sign.
fn bracketed_root<S: Scalar>(c: &[S; 4], mut lo: S, mut hi: S, f_lo: S) -> S {
    let two = S::lit(2.0);
    let rising = f_lo < S::zero();
    let mut t = (lo + hi) / two;
    for _ in 0..64 {
        let f = horner3(c, t);
        if f == S::zero() {
            return t;
        }
        if (f < S::zero()) == rising {
            lo = t;
        } else {
            hi = t;
        }
        let d = horner3_deriv(c, t);
        let mut next = if d != S::zero() { t - f / d } else { (lo + hi) / two };
        if !(next > lo && next < hi) {
            next = (lo + hi) / two;
        }
        if (next - t).abs() <= S::epsilon() * (S::one() + t.abs()) {
            return next;
        }
        t = next;
        if hi - lo <= S::epsilon() * two {
            break;
        }
    }
    t
}

/// Parameters in `[0,1]` where the cubic `c[3] t^3 + c[2] t^2 + c[1] t + c[0]`
/// crosses zero from negative to positive. For the derivative of a squared
/// distance these are exactly the interior local minima.
pub fn rising_roots_unit<S: Scalar>(c: &[S; 4]) -> ([S; 2], usize) {
    let zero = S::zero();
    let one = S::one();
    let mut knots = [zero; 4];
    let mut n = 0;
    knots[n] = zero;
    n += 1;
    let (crit, nc) = solve_quadratic(S::lit(3.0) * c[3], S::lit(2.0) * c[2], c[1]);
    for &t in &crit[..nc] {
        if t > zero && t < one {
            knots[n] = t;
            n += 1;
        }
    }
    knots[n] = one;
    n += 1;

    let mut out = [zero; 2];
    let mut count = 0;
    for w in 0..n - 1 {
        let (lo, hi) = (knots[w], knots[w + 1]);
        let f_lo = horner3(c, lo);
        let f_hi = horner3(c, hi);
        if f_lo < zero && f_hi >= zero && count < 2 {
            out[count] = if f_hi == zero { hi } else { bracketed_root(c, lo, hi, f_lo) };
            count += 1;
        }
    }
    (out, count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        let (r, n) = solve_quadratic(1.0f64, -3.0, 2.0);
        assert_eq!(n, 2);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 2.0).abs() < 1e-15);
        let (r, n) = solve_quadratic(0.0, 2.0, -1.0);
        assert_eq!((n, r[0]), (1, 0.5));
        assert_eq!(solve_quadratic(1.0, 0.0, 1.0).1, 0);
        assert_eq!(solve_quadratic(0.0, 0.0, 1.0).1, 0);
    }

    #[test]
    fn quadratic_no_cancellation() {
        let (r, n) = solve_quadratic(1.0f64, -1e8, 1.0);
        assert_eq!(n, 2);
        assert!((r[0] - 1e-8).abs() / 1e-8 < 1e-12);
    }

    #[test]
    fn rising_cubic_roots() {
        // (t - 0.25)(t - 0.5)(t - 0.75): rising at 0.25 and 0.75
        let c = [-0.09375f64, 0.6875, -1.5, 1.0];
        let (r, n) = rising_roots_unit(&c);
        assert_eq!(n, 2);
        assert!((r[0] - 0.25).abs() < 1e-14);
        assert!((r[1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn degenerate_cubic_is_linear() {
        let c = [-0.3f64, 1.0, 0.0, 0.0];
        let (r, n) = rising_roots_unit(&c);
        assert_eq!(n, 1);
        assert!((r[0] - 0.3).abs() < 1e-15);
    }
}
