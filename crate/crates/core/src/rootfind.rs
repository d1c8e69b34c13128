//! Derivative-free one-dimensional solvers.

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub fx: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `x_tol` and `|f(mid)| <= f_tol`
/// (or `f(mid)` is exactly 0). The caller guarantees opposite signs at the
/// endpoints; only the sign at `lo` is used to orient the search.
pub fn bisect<T, E, F>(mut f: F, lo: T, hi: T, x_tol: T, f_tol: T, max_iter: usize) -> Result<Root<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let (mut lo, mut hi) = (lo, hi);
    let lo_positive = f(lo)? > T::zero();
    let half = T::lit(0.5);
    let mut mid = (lo + hi) * half;
    let mut fmid = f(mid)?;
    for it in 1..=max_iter {
        if fmid == T::zero() || (hi - lo <= x_tol && fmid.abs() <= f_tol) {
            return Ok(Root {
                x: mid,
                fx: fmid,
                iterations: it,
                converged: true,
            });
        }
        if (fmid > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = (lo + hi) * half;
        fmid = f(mid)?;
    }
    Ok(Root {
        x: mid,
        fx: fmid,
        iterations: max_iter,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub x: T,
    pub fx: T,
    pub iterations: usize,
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`,
/// narrowed until the bracket is shorter than `x_tol`.
pub fn golden_section_max<T, E, F>(mut f: F, a: T, b: T, x_tol: T) -> Result<Maximum<T>, E>
where
    T: Real,
    F: FnMut(T) -> Result<T, E>,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let (mut a, mut b) = (a, b);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iterations = 0;
    while (b - a).abs() > x_tol && iterations < 500 {
        iterations += 1;
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
    Ok(Maximum { x, fx, iterations })
}

/// `n` points from `lo` to `hi` inclusive, evenly spaced in log scale.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (la, lb) = (lo.ln(), hi.ln());
            let last = T::from_usize(n - 1).expect("usize fits");
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (la + (lb - la) * T::from_usize(i).expect("usize fits") / last).exp()
                    }
                })
                .collect()
        }
    }
}

/// Indices `i` in `1..len-1` where `values[i]` strictly exceeds both neighbours.
pub fn interior_local_maxima<T: Real>(values: &[T]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}
