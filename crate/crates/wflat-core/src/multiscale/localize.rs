//! Localization diagnostics: does transport cost restrict to a bump?
//!
//! For measures that are close in transport distance, the mass each atom
//! moves should be short-range, so cutting both measures down by a bump and
//! rebalancing should cost no more than a constant multiple of the original
//! distance. [`good_set`] identifies the atoms whose displacement respects
//! the local Whitney scale, [`localized_trim`] rebalances the bump-weighted
//! measure onto those atoms, and [`localization_ratio`] measures the
//! localized-to-global cost ratio directly.

use alloc::vec::Vec;

use super::MultiscaleError;
use crate::geometry::{standard_bump, Ball, Cube, WhitneyDecomposition};
use crate::math;
use crate::measure::{DiscreteMeasure, ScalarField};
use crate::transport::{self, TransportPlan};

/// Atoms of `nu` whose transport displacement respects the Whitney scale.
///
/// The plan (an optimal coupling from `nu` to `mu`) is collapsed to a map
/// `T` by barycentric projection. An atom `x` qualifies when it lies in the
/// interior of `region`, its displacement `|x − Tx|` is at most the side of
/// its Whitney cube, and — whenever `Tx` also lands inside `region` — at
/// most the side of the Whitney cube of `Tx` as well. Atoms outside the
/// region are excluded, not errors. Indices come back sorted.
pub fn good_set(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    region: &Cube,
    decomp: &WhitneyDecomposition,
) -> Vec<usize> {
    let map = transport::barycentric_map(plan, nu, mu);
    let mut out = Vec::new();
    for i in 0..nu.len() {
        let x = nu.point(i);
        if !region.contains(x) {
            continue;
        }
        let Ok(qx) = decomp.lookup(x) else {
            continue;
        };
        let t = map.target(i);
        let disp = math::dist(x, t);
        if disp > qx.side() {
            continue;
        }
        if region.contains(t) {
            if let Ok(qt) = decomp.lookup(t) {
                if disp > qt.side() {
                    continue;
                }
            }
        }
        out.push(i);
    }
    out
}

/// The rebalanced restriction of `phi·nu` to the atom set `good`: every kept
/// atom's weight is scaled by `a = (phi nu)(everything) / (phi nu)(good)` so
/// the total mass is preserved. Fails with `ZeroMass` when the good set
/// carries no bump mass.
pub fn localized_trim(
    nu: &DiscreteMeasure,
    phi: &ScalarField,
    good: &[usize],
) -> Result<DiscreteMeasure, MultiscaleError> {
    let total: f64 = (0..nu.len()).map(|i| nu.weight(i) * phi.eval(nu.point(i))).sum();
    let on_good: f64 = good.iter().map(|&i| nu.weight(i) * phi.eval(nu.point(i))).sum();
    if on_good <= 0.0 {
        return Err(MultiscaleError::ZeroMass);
    }
    let a = total / on_good;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &i in good {
        let w = a * (nu.weight(i) * phi.eval(nu.point(i)));
        if w > 0.0 {
            points.push(nu.point(i).to_vec());
            weights.push(w);
        }
    }
    Ok(DiscreteMeasure::new(nu.dim(), &points, &weights)?)
}

/// Global and bump-localized transport cost between two measures.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationRecord {
    /// Transport exponent used for both costs.
    pub p: f64,
    /// `W_p` between the probability-normalized measures.
    pub w2: f64,
    /// `W_p` between the bump restrictions, the second rescaled by `a`.
    pub localized_w2: f64,
    /// Mass-matching factor `(phi mu)(everything) / (phi nu)(everything)`.
    pub a: f64,
    /// `localized_w2 / w2`; zero when the numerator vanishes, infinite when
    /// only the denominator does.
    pub ratio: f64,
}

/// Compares the transport cost of the bump restrictions against the global
/// cost, after normalizing both measures to unit mass.
///
/// The interesting quantity is the implied constant: localization holds when
/// `ratio` stays bounded over a family of comparable measure pairs.
pub fn localization_ratio(
    p: f64,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    ball: &Ball,
) -> Result<LocalizationRecord, MultiscaleError> {
    if mu.total_mass() <= 0.0 || nu.total_mass() <= 0.0 {
        return Err(MultiscaleError::ZeroMass);
    }
    let mu = mu.normalized();
    let nu = nu.normalized();
    let phi = standard_bump(ball).as_field();
    let phimu = mu.reweight(&phi)?;
    let phinu = nu.reweight(&phi)?;
    let mass_mu = phimu.total_mass();
    let mass_nu = phinu.total_mass();
    if mass_mu <= 0.0 || mass_nu <= 0.0 {
        return Err(MultiscaleError::ZeroMass);
    }
    let a = mass_mu / mass_nu;
    let w2 = transport::wasserstein(p, &mu, &nu)?.cost;
    let localized_w2 = transport::wasserstein(p, &phimu, &phinu.scaled(a))?.cost;
    let ratio = if localized_w2 == 0.0 {
        0.0
    } else if w2 == 0.0 {
        f64::INFINITY
    } else {
        localized_w2 / w2
    };
    Ok(LocalizationRecord { p, w2, localized_w2, a, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid_measure(n: usize, shift: f64) -> DiscreteMeasure {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(vec![
                    (i as f64 + 0.5) / n as f64 + shift,
                    (j as f64 + 0.5) / n as f64 + shift,
                ]);
            }
        }
        DiscreteMeasure::new(2, &pts, &vec![1.0 / (n * n) as f64; n * n]).unwrap()
    }

    #[test]
    fn identity_plan_keeps_every_interior_atom() {
        let mu = grid_measure(4, 0.0);
        let plan = transport::wasserstein(2.0, &mu, &mu).unwrap();
        let region = Cube::new(vec![0.0, 0.0], 1.0);
        let decomp = WhitneyDecomposition::new(region.clone());
        let good = good_set(&mu, &mu, &plan, &region, &decomp);
        assert_eq!(good, (0..mu.len()).collect::<Vec<_>>());
    }

    #[test]
    fn far_flung_atom_is_excluded() {
        // One atom stays put; the other is hauled across the cube, far
        // beyond its Whitney scale.
        let nu =
            DiscreteMeasure::new(2, &[vec![0.25, 0.5], vec![0.6, 0.1]], &[0.5, 0.5]).unwrap();
        let mu =
            DiscreteMeasure::new(2, &[vec![0.25, 0.5], vec![0.9, 0.9]], &[0.5, 0.5]).unwrap();
        let plan = transport::wasserstein(2.0, &nu, &mu).unwrap();
        let region = Cube::new(vec![0.0, 0.0], 1.0);
        let decomp = WhitneyDecomposition::new(region.clone());
        let good = good_set(&mu, &nu, &plan, &region, &decomp);
        assert_eq!(good, vec![0]);
    }

    #[test]
    fn trim_with_full_good_set_is_the_identity_reweight() {
        let nu = grid_measure(3, 0.0);
        let phi = ScalarField::constant(1.0);
        let all: Vec<usize> = (0..nu.len()).collect();
        let trimmed = localized_trim(&nu, &phi, &all).unwrap();
        assert_eq!(trimmed.len(), nu.len());
        assert!((trimmed.total_mass() - nu.total_mass()).abs() <= 1e-12);
    }

    #[test]
    fn trim_doubles_weights_when_half_the_mass_survives() {
        let nu = DiscreteMeasure::new(
            1,
            &[vec![0.1], vec![0.2], vec![0.3], vec![0.4]],
            &[0.25; 4],
        )
        .unwrap();
        let phi = ScalarField::constant(1.0);
        let trimmed = localized_trim(&nu, &phi, &[0, 1]).unwrap();
        assert_eq!(trimmed.len(), 2);
        assert_eq!(trimmed.weight(0), 0.5);
        assert_eq!(trimmed.weight(1), 0.5);
        assert!((trimmed.total_mass() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn trim_preserves_bump_mass_on_partial_sets() {
        let nu = grid_measure(5, 0.0);
        let ball = Ball::new(vec![0.5, 0.5], 0.2);
        let phi = standard_bump(&ball).as_field();
        let total: f64 =
            (0..nu.len()).map(|i| nu.weight(i) * phi.eval(nu.point(i))).sum();
        let near: Vec<usize> =
            (0..nu.len()).filter(|&i| phi.eval(nu.point(i)) > 0.5).collect();
        assert!(!near.is_empty() && near.len() < nu.len());
        let trimmed = localized_trim(&nu, &phi, &near).unwrap();
        assert!((trimmed.total_mass() - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn trim_rejects_good_sets_without_bump_mass() {
        let nu = grid_measure(3, 0.0);
        let ball = Ball::new(vec![0.5, 0.5], 0.05);
        let phi = standard_bump(&ball).as_field();
        // Corner atoms sit outside the bump's support.
        let err = localized_trim(&nu, &phi, &[0]).unwrap_err();
        assert_eq!(err, MultiscaleError::ZeroMass);
    }

    #[test]
    fn identical_measures_have_zero_ratio_and_unit_factor() {
        let mu = grid_measure(4, 0.0);
        let ball = Ball::new(vec![0.5, 0.5], 0.3);
        let rec = localization_ratio(2.0, &mu, &mu, &ball).unwrap();
        assert_eq!(rec.a, 1.0);
        assert_eq!(rec.w2, 0.0);
        assert_eq!(rec.localized_w2, 0.0);
        assert_eq!(rec.ratio, 0.0);
    }

    #[test]
    fn translated_grid_has_finite_positive_ratio() {
        let mu = grid_measure(6, 0.0);
        let nu = grid_measure(6, 0.01);
        let ball = Ball::new(vec![0.5, 0.5], 0.25);
        for p in [1.0, 2.0] {
            let rec = localization_ratio(p, &mu, &nu, &ball).unwrap();
            assert!(rec.w2 > 0.0);
            assert!(rec.localized_w2 > 0.0);
            assert!(rec.ratio.is_finite() && rec.ratio > 0.0);
            assert!((rec.a - 1.0).abs() < 0.5, "matching factor {}", rec.a);
        }
    }

    #[test]
    fn distant_ball_reports_zero_mass() {
        let mu = grid_measure(3, 0.0);
        let ball = Ball::new(vec![5.0, 5.0], 0.1);
        let err = localization_ratio(2.0, &mu, &mu, &ball).unwrap_err();
        assert_eq!(err, MultiscaleError::ZeroMass);
    }
}
