//! Bracketed scalar root finding.

use crate::real::{lit, Real};

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` differ in sign, located by
/// Illinois-modified regula falsi with a bisection fallback until the bracket
/// is narrower than `tol`.
pub fn bracketed_root<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: T) -> T {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == T::zero() {
        return a;
    }
    if fb == T::zero() {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "root not bracketed");
    let mut side = 0i8;
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 400 {
        iters += 1;
        let mut m = (a * fb - b * fa) / (fb - fa);
        // every third iteration bisects to guarantee progress
        if iters % 3 == 0 || !(m > a.min(b) && m < a.max(b)) {
            m = (a + b) / lit(2.0);
        }
        let fm = f(m);
        if fm == T::zero() {
            return m;
        }
        if fm.signum() == fb.signum() {
            b = m;
            fb = fm;
            if side == 1 {
                fa = fa / lit(2.0);
            }
            side = 1;
        } else {
            a = m;
            fa = fm;
            if side == -1 {
                fb = fb / lit(2.0);
            }
            side = -1;
        }
    }
    (a + b) / lit(2.0)
}

/// Boundary of a predicate along a line: `inside(a) != inside(b)` on entry and
/// the returned bracket `(x_in_a_side, x_in_b_side)` is narrower than `tol`.
pub fn bisect_predicate<T: Real>(mut pred: impl FnMut(T) -> bool, a: T, b: T, tol: T) -> (T, T) {
    let (mut a, mut b) = (a, b);
    let side_a = pred(a);
    debug_assert!(side_a != pred(b), "predicate does not change across the bracket");
    for _ in 0..2000 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = a + (b - a) / lit(2.0);
        if m == a || m == b {
            break;
        }
        if pred(m) == side_a {
            a = m;
        } else {
            b = m;
        }
    }
    (a, b)
}
