//! Scalar and small-vector helpers for a `no_std` build.
//!
//! `core` has no float transcendentals, so the handful we need are routed
//! through `libm`. The vector helpers operate on `&[f64]` slices so callers
//! can work with flattened point storage without allocating.

use alloc::vec::Vec;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline]
pub fn powf(x: f64, p: f64) -> f64 {
    libm::pow(x, p)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

/// `2^k` for integer `k`, exact in IEEE arithmetic.
#[inline]
pub fn exp2i(k: i32) -> f64 {
    libm::exp2(k as f64)
}

/// `|x - y|^p` between two points, with fast paths for the common exponents.
#[inline]
pub fn dist_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        dist(a, b)
    } else if p == 2.0 {
        dist_sq(a, b)
    } else {
        powf(dist(a, b), p)
    }
}

/// `x^p` for nonnegative `x`, with fast paths for the common exponents.
#[inline]
pub fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        powf(x, p)
    }
}

/// `x^(1/p)` with fast paths for the common exponents.
#[inline]
pub fn root_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        sqrt(x)
    } else {
        powf(x, 1.0 / p)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// Euclidean distance between two points given as slices.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    sqrt(s)
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + t * b`, elementwise.
pub fn add_scaled(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
///
/// Runs a fixed number of interval reductions and returns `(argmin, min)`
/// evaluated at the final interval midpoint.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Nelder–Mead simplex minimization over `R^k`, seeded at `x0` with the given
/// initial simplex scale. Deterministic; returns `(argmin, min)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    max_iters: usize,
) -> (Vec<f64>, f64) {
    let k = x0.len();
    if k == 0 {
        let v = f(x0);
        return (Vec::new(), v);
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    let v0 = f(x0);
    simplex.push((x0.to_vec(), v0));
    for i in 0..k {
        let mut xi = x0.to_vec();
        xi[i] += scale;
        let vi = f(&xi);
        simplex.push((xi, vi));
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[k].1;
        if abs(worst - best) <= 1e-14 * (1.0 + abs(best)) {
            break;
        }
        // Centroid of all but the worst vertex.
        let mut cen = alloc::vec![0.0; k];
        for (x, _) in simplex.iter().take(k) {
            for (c, xi) in cen.iter_mut().zip(x) {
                *c += xi / k as f64;
            }
        }
        let xw = simplex[k].0.clone();
        let refl = add_scaled(&cen, alpha, &sub(&cen, &xw));
        let fr = f(&refl);
        if fr < simplex[0].1 {
            let exp = add_scaled(&cen, gamma, &sub(&cen, &xw));
            let fe = f(&exp);
            simplex[k] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (refl, fr);
        } else {
            let con = add_scaled(&cen, -rho, &sub(&cen, &xw));
            let fc = f(&con);
            if fc < simplex[k].1 {
                simplex[k] = (con, fc);
            } else {
                let x0v = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let shr: Vec<f64> =
                        item.0.iter().zip(&x0v).map(|(x, b)| b + sigma * (x - b)).collect();
                    let fs = f(&shr);
                    *item = (shr, fs);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
    simplex.swap_remove(0)
}
