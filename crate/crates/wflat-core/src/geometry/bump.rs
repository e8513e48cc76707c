//! Cutoff functions used to localize measures to balls and cubes.

use alloc::boxed::Box;

use super::{Ball, Cube};
use crate::math;
use crate::measure::ScalarField;

/// The radial cutoff adapted to a ball `B(x, r)`:
///
/// ```text
/// φ(y) = ψ(|y − x| / r),   ψ(t) = 1        for t ≤ 2,
///                          ψ(t) = (3 − t)²  for 2 < t < 3,
///                          ψ(t) = 0        for t ≥ 3.
/// ```
///
/// It is 1 on `2B`, vanishes outside `3B`, and is Lipschitz with constant
/// `2/r`. On the transition annulus `2B \ 3B` the profile equals
/// `dist(y, ∂3B)² / r²` exactly, which is the two-sided comparison the
/// flatness estimates rely on.
#[derive(Debug, Clone)]
pub struct BumpFunction {
    ball: Ball,
}

impl BumpFunction {
    pub fn new(ball: Ball) -> Self {
        Self { ball }
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let t = math::dist(y, &self.ball.center) / self.ball.radius;
        if t <= 2.0 {
            1.0
        } else if t < 3.0 {
            let s = 3.0 - t;
            s * s
        } else {
            0.0
        }
    }

    /// Lipschitz constant of the profile: `2/r`.
    pub fn lipschitz(&self) -> f64 {
        2.0 / self.ball.radius
    }

    /// Wraps the bump as a reusable scalar field.
    pub fn as_field(&self) -> ScalarField {
        let ball = self.ball.clone();
        let lip = self.lipschitz();
        ScalarField::with_lipschitz(
            Box::new(move |y: &[f64]| {
                let t = math::dist(y, &ball.center) / ball.radius;
                if t <= 2.0 {
                    1.0
                } else if t < 3.0 {
                    let s = 3.0 - t;
                    s * s
                } else {
                    0.0
                }
            }),
            lip,
        )
    }
}

/// The standard cutoff for `B`: 1 on `2B`, quadratic decay, 0 outside `3B`.
pub fn standard_bump(ball: &Ball) -> BumpFunction {
    BumpFunction::new(ball.clone())
}

/// A cutoff adapted to a cube `R`, built from the interior boundary distance:
///
/// ```text
/// φ_R(x) = min(ρ, dist(x, ∂R))² / ρ²  inside R,  0 outside,  ρ = ℓ(R)/4.
/// ```
///
/// It is 1 on the central half cube, vanishes off `R`, and is Lipschitz with
/// constant `2/ρ = 8/ℓ(R)`.
pub fn cube_bump(cube: &Cube) -> ScalarField {
    let cube = cube.clone();
    let rho = cube.side() / 4.0;
    let lip = 2.0 / rho;
    ScalarField::with_lipschitz(
        Box::new(move |x: &[f64]| {
            let d = cube.boundary_dist_inside(x);
            if d <= 0.0 {
                return 0.0;
            }
            let t = d.min(rho) / rho;
            t * t
        }),
        lip,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn bump_plateau_transition_and_support() {
        let b = standard_bump(&Ball::new(vec![0.0, 0.0], 2.0));
        assert_eq!(b.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(b.eval(&[4.0, 0.0]), 1.0); // |y| = 2r
        assert!((b.eval(&[5.0, 0.0]) - 0.25).abs() < 1e-15); // ψ(2.5) = 0.25
        assert_eq!(b.eval(&[6.0, 0.0]), 0.0);
        assert_eq!(b.eval(&[100.0, 0.0]), 0.0);
    }

    #[test]
    fn bump_matches_squared_boundary_distance_on_annulus() {
        // On 3B \ 2B the profile equals dist(y, ∂3B)²/r² exactly.
        let ball = Ball::new(vec![1.0], 0.5);
        let b = standard_bump(&ball);
        for k in 1..10 {
            let t = 2.0 + k as f64 / 10.0;
            let y = [ball.center[0] + t * ball.radius];
            let dist_to_sphere = 3.0 * ball.radius - t * ball.radius;
            let expected = (dist_to_sphere / ball.radius) * (dist_to_sphere / ball.radius);
            assert!((b.eval(&y) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn bump_respects_its_lipschitz_constant() {
        let ball = Ball::new(vec![0.0], 1.0);
        let b = standard_bump(&ball);
        let mut worst: f64 = 0.0;
        for k in 0..600 {
            let x = [k as f64 * 0.01];
            let y = [k as f64 * 0.01 + 0.01];
            worst = worst.max((b.eval(&x) - b.eval(&y)).abs() / 0.01);
        }
        assert!(worst <= b.lipschitz() + 1e-9);
    }

    #[test]
    fn cube_bump_levels() {
        let r = Cube::new(vec![0.0, 0.0], 4.0);
        let phi = cube_bump(&r);
        assert_eq!(phi.eval(&[2.0, 2.0]), 1.0); // center: dist 2 ≥ ρ = 1
        assert_eq!(phi.eval(&[1.0, 2.0]), 1.0); // on the half-cube edge
        assert!((phi.eval(&[0.5, 2.0]) - 0.25).abs() < 1e-15);
        assert_eq!(phi.eval(&[0.0, 2.0]), 0.0); // boundary
        assert_eq!(phi.eval(&[-1.0, 2.0]), 0.0); // outside
        assert_eq!(phi.lipschitz_bound(), Some(2.0));
    }
}
