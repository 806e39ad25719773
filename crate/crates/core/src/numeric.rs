//! Scalar search routines shared by the diagram and ring modules.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximiser of a unimodal function on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol`.
pub(crate) fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    // 300 iterations shrink any finite bracket below float resolution
    for _ in 0..300 {
        if hi - lo <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // prefer an endpoint if the maximum sits on the boundary
    [lo, mid, hi]
        .into_iter()
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

/// Bisection for `g(x) = target` where `g` is nondecreasing on `[lo, hi]`.
///
/// Returns the midpoint of the final bracket, which is narrower than `tol`.
pub(crate) fn bisect_nondecreasing<F: Fn(f64) -> f64>(
    g: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection for `g(x) = target` where `g` is nonincreasing on `[lo, hi]`.
pub(crate) fn bisect_nonincreasing<F: Fn(f64) -> f64>(
    g: F,
    target: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> f64 {
    bisect_nondecreasing(|x| -g(x), -target, lo, hi, tol)
}
