//! Scalar numerical routines shared by the solvers: golden-section
//! minimization, bracketed bisection, and adaptive Simpson quadrature.

use alloc::vec::Vec;

/// `(3 - sqrt(5)) / 2`, the golden-section interior fraction.
const INV_PHI_SQ: f64 = 0.381_966_011_250_105_1;

/// Minimizes a unimodal `f` on `[lo, hi]` until the bracket is narrower than `xtol`.
///
/// Returns the abscissa of the smallest value seen.
pub fn golden_section<F>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut x1 = lo + INV_PHI_SQ * (hi - lo);
    let mut x2 = hi - INV_PHI_SQ * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // 200 iterations shrink any finite bracket below f64 resolution.
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + INV_PHI_SQ * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - INV_PHI_SQ * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Bracket produced by [`bisect`]: `lo` keeps the sign of `f(lo)` at entry,
/// `hi` the sign of `f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bisection on `[lo, hi]` for a sign change of `f`, for exactly `iters` halvings
/// (or until the bracket stops shrinking in floating point).
///
/// Returns `None` when `f(lo)` and `f(hi)` have the same strict sign.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> Option<Bracket>
where
    F: Fn(f64) -> f64,
{
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(Bracket { lo, hi: lo });
    }
    if fhi == 0.0 {
        return Some(Bracket { lo: hi, hi });
    }
    if (flo < 0.0) == (fhi < 0.0) {
        return None;
    }
    let lo_negative = flo < 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(Bracket { lo: mid, hi: mid });
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(Bracket { lo, hi })
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
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
    if depth == 0 || libm::fabs(delta) <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
///
/// The interval is first cut into 16 equal panels so narrow features are not
/// skipped by the initial 3-point estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    const PANELS: usize = 16;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        total += simpson_step(&f, lo, hi, flo, fm, fhi, whole, tol / PANELS as f64, 40);
    }
    total
}

/// Integral over `[a, b]` split at every breakpoint strictly inside the interval.
///
/// Kinks of the integrand should be passed as breakpoints; Simpson is then
/// applied to smooth pieces only.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for &c in cuts.iter().chain(core::iter::once(&b)) {
        total += integrate(&f, lo, c, tol);
        lo = c;
    }
    total
}
