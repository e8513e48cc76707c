//! Weighted total-least-squares plane fitting via principal components.

use alloc::vec::Vec;

use super::{AffinePlane, GeometryError};
use crate::measure::DiscreteMeasure;

/// Cyclic Jacobi eigendecomposition of a symmetric `d × d` matrix given in
/// row-major order. Returns `(eigenvalues, eigenvectors)` sorted by
/// descending eigenvalue; eigenvectors are rows of the returned matrix.
pub(crate) fn jacobi_symmetric(matrix: &[f64], d: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a: Vec<f64> = matrix.to_vec();
    let mut v = alloc::vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let norm: f64 = a.iter().map(|x| x * x).sum();
    let tol = 1e-28 * norm.max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..d)
            .flat_map(|p| (p + 1..d).map(move |q| (p, q)))
            .map(|(p, q)| a[p * d + q] * a[p * d + q])
            .sum();
        if off <= tol {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + crate::math::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + crate::math::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / crate::math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| (a[j * d + j], (0..d).map(|i| v[i * d + j]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    let eigvals = pairs.iter().map(|p| p.0).collect();
    let eigvecs = pairs.into_iter().map(|p| p.1).collect();
    (eigvals, eigvecs)
}

/// Mass-weighted centroid and covariance spectrum of a measure.
///
/// Returns `(centroid, eigenvalues desc, eigenvectors)`; `None` on an empty
/// or massless measure.
pub(crate) fn weighted_pca(measure: &DiscreteMeasure) -> Option<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let d = measure.dim();
    let mass = measure.total_mass();
    if measure.is_empty() || mass <= 0.0 {
        return None;
    }
    let mut centroid = alloc::vec![0.0; d];
    for (x, w) in measure.iter() {
        for (ci, xi) in centroid.iter_mut().zip(x) {
            *ci += w * xi;
        }
    }
    for ci in centroid.iter_mut() {
        *ci /= mass;
    }
    let mut cov = alloc::vec![0.0; d * d];
    for (x, w) in measure.iter() {
        for i in 0..d {
            let di = x[i] - centroid[i];
            for j in i..d {
                cov[i * d + j] += w * di * (x[j] - centroid[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i * d + j] = cov[j * d + i];
        }
    }
    for c in cov.iter_mut() {
        *c /= mass;
    }
    let (eigvals, eigvecs) = jacobi_symmetric(&cov, d);
    Some((centroid, eigvals, eigvecs))
}

/// The `n`-plane through the mass-weighted centroid spanned by the top `n`
/// principal directions — the exact minimizer of `Σᵢ wᵢ dist(xᵢ, L)²` over
/// all affine `n`-planes.
///
/// Fails with `Degenerate` when the weighted covariance has rank below `n`
/// (all mass on an affine subspace of dimension `< n`), in which case the
/// minimizing plane is not determined by the data.
pub fn fit_plane_pca(measure: &DiscreteMeasure, n: usize) -> Result<AffinePlane, GeometryError> {
    let d = measure.dim();
    assert!(n >= 1 && n < d, "plane dimension must satisfy 1 <= n < d");
    let (centroid, eigvals, eigvecs) =
        weighted_pca(measure).ok_or(GeometryError::Degenerate)?;
    let trace: f64 = eigvals.iter().sum();
    if !(eigvals[n - 1] > 1e-12 * trace.max(f64::MIN_POSITIVE)) {
        return Err(GeometryError::Degenerate);
    }
    AffinePlane::new(centroid, &eigvecs[..n])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let (vals, vecs) = jacobi_symmetric(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        // Leading eigenvector is (1,1)/√2 up to sign.
        assert!((vecs[0][0].abs() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((vecs[0][0] - vecs[0][1]).abs() < 1e-12);
    }

    #[test]
    fn jacobi_residuals_vanish_on_random_symmetric_matrix() {
        let d = 4;
        // Deterministic pseudo-random symmetric matrix.
        let mut m = vec![0.0; d * d];
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..d {
            for j in i..d {
                let x = next();
                m[i * d + j] = x;
                m[j * d + i] = x;
            }
        }
        let (vals, vecs) = jacobi_symmetric(&m, d);
        for (lambda, vrow) in vals.iter().zip(&vecs) {
            for i in 0..d {
                let mut av = 0.0;
                for j in 0..d {
                    av += m[i * d + j] * vrow[j];
                }
                assert!((av - lambda * vrow[i]).abs() < 1e-10);
            }
        }
        // Eigenvectors are orthonormal.
        for a in 0..d {
            for b in 0..d {
                let dot = crate::math::dot(&vecs[a], &vecs[b]);
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fit_recovers_exact_line() {
        // Points on y = 2x + 1 with uneven weights.
        let pts: Vec<Vec<f64>> =
            (0..7).map(|k| vec![k as f64, 2.0 * k as f64 + 1.0]).collect();
        let w = vec![1.0, 3.0, 0.5, 2.0, 1.0, 1.0, 4.0];
        let m = DiscreteMeasure::new(2, &pts, &w).unwrap();
        let plane = fit_plane_pca(&m, 1).unwrap();
        for (x, _) in m.iter() {
            assert!(plane.dist(x) < 1e-10);
        }
    }

    #[test]
    fn fit_recovers_plane_in_three_dims() {
        let mut pts = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                pts.push(vec![i as f64, j as f64, 0.25 * i as f64 - 0.5 * j as f64]);
            }
        }
        let w = vec![1.0; pts.len()];
        let m = DiscreteMeasure::new(3, &pts, &w).unwrap();
        let plane = fit_plane_pca(&m, 2).unwrap();
        for (x, _) in m.iter() {
            assert!(plane.dist(x) < 1e-10);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let m = DiscreteMeasure::new(2, &[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 2.0]).unwrap();
        assert!(matches!(fit_plane_pca(&m, 1), Err(GeometryError::Degenerate)));
    }

    #[test]
    fn collinear_points_are_degenerate_for_a_two_plane() {
        let pts: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64, 0.0, 0.0]).collect();
        let m = DiscreteMeasure::new(3, &pts, &[1.0; 5]).unwrap();
        assert!(fit_plane_pca(&m, 1).is_ok());
        assert!(matches!(fit_plane_pca(&m, 2), Err(GeometryError::Degenerate)));
    }
}
