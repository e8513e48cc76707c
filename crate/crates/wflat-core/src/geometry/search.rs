//! Best-plane search over affine `n`-planes: a dense angle/offset grid with
//! golden-section polish for lines in the plane, and Nelder–Mead over a
//! tangent chart in general codimension.

use alloc::vec::Vec;

use super::{AffinePlane, Ball};
use crate::math;

/// Budget knobs for the plane search.
#[derive(Debug, Clone)]
pub struct PlaneSearch {
    /// Direction grid resolution for `(n, d) = (1, 2)`.
    pub angle_count: usize,
    /// Offset grid resolution across the ball for `(n, d) = (1, 2)`.
    pub offset_count: usize,
    /// Alternating golden-section polish rounds after the grid.
    pub polish_rounds: usize,
    /// Iterations per golden-section pass.
    pub polish_iters: usize,
    /// Nelder–Mead iteration budget in general codimension.
    pub nm_iters: usize,
}

impl PlaneSearch {
    /// Dense search for reference-quality values on single instances.
    pub fn exhaustive() -> Self {
        Self { angle_count: 180, offset_count: 21, polish_rounds: 2, polish_iters: 40, nm_iters: 400 }
    }

    /// Trimmed search for scans that evaluate thousands of balls.
    pub fn lean() -> Self {
        Self { angle_count: 24, offset_count: 7, polish_rounds: 1, polish_iters: 24, nm_iters: 120 }
    }

    /// Seed-and-polish only: no grid pass. The right budget when every
    /// evaluation is itself an exact transport solve.
    pub fn seeded() -> Self {
        Self { angle_count: 0, offset_count: 0, polish_rounds: 1, polish_iters: 12, nm_iters: 48 }
    }
}

fn line_through(center: &[f64], theta: f64, offset: f64) -> AffinePlane {
    let (s, c) = (math::sin(theta), math::cos(theta));
    let base = alloc::vec![center[0] - offset * s, center[1] + offset * c];
    AffinePlane::new(base, &[alloc::vec![c, s]]).expect("unit direction")
}

/// Recovers `(θ ∈ [0, π), signed offset)` of a line relative to a center.
fn line_params(plane: &AffinePlane, center: &[f64]) -> (f64, f64) {
    let e = &plane.frame()[0];
    let mut theta = math::atan2(e[1], e[0]);
    if theta < 0.0 {
        theta += core::f64::consts::PI;
    }
    let (s, c) = (math::sin(theta), math::cos(theta));
    let w = math::sub(plane.base(), center);
    (theta, -w[0] * s + w[1] * c)
}

/// Builds a plane from chart coordinates around a seed: each frame vector is
/// tilted into the complement, the basepoint slides along the complement.
fn plane_from_chart(
    seed: &AffinePlane,
    comp: &[Vec<f64>],
    params: &[f64],
    radius: f64,
) -> Option<AffinePlane> {
    let n = seed.n();
    let m = comp.len();
    let mut dirs = Vec::with_capacity(n);
    for (i, e) in seed.frame().iter().enumerate() {
        let mut v = e.clone();
        for (j, f) in comp.iter().enumerate() {
            let t = params[i * m + j];
            for (vi, fi) in v.iter_mut().zip(f) {
                *vi += t * fi;
            }
        }
        dirs.push(v);
    }
    let mut base = seed.base().to_vec();
    for (j, f) in comp.iter().enumerate() {
        let o = params[n * m + j] * radius;
        for (bi, fi) in base.iter_mut().zip(f) {
            *bi += o * fi;
        }
    }
    AffinePlane::new(base, &dirs).ok()
}

/// Minimizes `eval` over affine `n`-planes near the ball.
///
/// Seeds are always evaluated as-is (clamped into the ball when `clamp` is
/// set, which keeps `dist(center, L) ≤ 0.999 r`). For lines in the plane a
/// full angle/offset grid plus golden-section polish runs; in general
/// codimension a Nelder–Mead descent explores a tilt/translation chart
/// around the best seed. Returns the best plane with its value.
pub fn search_planes(
    ball: &Ball,
    n: usize,
    seeds: &[AffinePlane],
    cfg: &PlaneSearch,
    clamp: bool,
    eval: &mut dyn FnMut(&AffinePlane) -> f64,
) -> (AffinePlane, f64) {
    let d = ball.dim();
    assert!(n >= 1 && n < d, "plane dimension must satisfy 1 <= n < d");
    let slack = 0.999;
    let fix = |p: &AffinePlane| if clamp { p.clamped_to_ball(ball, slack) } else { p.clone() };

    let mut best_plane = fix(&AffinePlane::axis_aligned(ball.center.clone(), n));
    let mut best_value = eval(&best_plane);
    let consider = |plane: AffinePlane, value: f64, best_plane: &mut AffinePlane, best_value: &mut f64| {
        if value < *best_value {
            *best_plane = plane;
            *best_value = value;
        }
    };
    for seed in seeds {
        let p = fix(seed);
        let v = eval(&p);
        consider(p, v, &mut best_plane, &mut best_value);
    }

    if n == 1 && d == 2 {
        let span = if clamp { slack } else { 1.0 };
        let max_off = span * ball.radius;
        // With zero grid counts the search degrades to seed + polish, which is
        // the right budget when each evaluation is itself an exact transport
        // solve.
        let (mut d_theta, mut d_off) = (core::f64::consts::PI / 8.0, max_off / 4.0);
        if cfg.angle_count > 0 && cfg.offset_count > 0 {
            let (na, no) = (cfg.angle_count, cfg.offset_count.max(2));
            for ia in 0..na {
                let theta = core::f64::consts::PI * ia as f64 / na as f64;
                for io in 0..no {
                    let off = max_off * (2.0 * io as f64 / (no - 1) as f64 - 1.0);
                    let p = line_through(&ball.center, theta, off);
                    let v = eval(&p);
                    consider(p, v, &mut best_plane, &mut best_value);
                }
            }
            d_theta = core::f64::consts::PI / na as f64;
            d_off = 2.0 * max_off / (no - 1) as f64;
        }
        for _ in 0..cfg.polish_rounds {
            let (theta0, off0) = line_params(&best_plane, &ball.center);
            let (theta1, _) = math::golden_section(
                &mut |t| eval(&line_through(&ball.center, t, off0)),
                theta0 - d_theta,
                theta0 + d_theta,
                cfg.polish_iters,
            );
            let (off1, v1) = math::golden_section(
                &mut |o: f64| {
                    let o = o.clamp(-max_off, max_off);
                    eval(&line_through(&ball.center, theta1, o))
                },
                (off0 - d_off).max(-max_off),
                (off0 + d_off).min(max_off),
                cfg.polish_iters,
            );
            let p = line_through(&ball.center, theta1, off1.clamp(-max_off, max_off));
            consider(p, v1, &mut best_plane, &mut best_value);
        }
        // Axis-wise golden descent can stall on objectives with kinks whose
        // descent direction couples angle and offset (sup-type objectives do
        // this): the stall point is minimal along each axis separately while
        // the joint minimum sits down a diagonal valley. A short Nelder–Mead
        // pass in the normalized (angle, offset) chart follows such valleys.
        if cfg.nm_iters > 0 {
            let (theta0, off0) = line_params(&best_plane, &ball.center);
            let mut objective = |q: &[f64]| {
                let off = (off0 + q[1] * d_off).clamp(-max_off, max_off);
                eval(&line_through(&ball.center, theta0 + q[0] * d_theta, off))
            };
            let (q, _) = math::nelder_mead(&mut objective, &[0.0, 0.0], 0.5, cfg.nm_iters);
            let off = (off0 + q[1] * d_off).clamp(-max_off, max_off);
            let p = line_through(&ball.center, theta0 + q[0] * d_theta, off);
            let v = eval(&p);
            consider(p, v, &mut best_plane, &mut best_value);
        }
    } else if cfg.nm_iters > 0 {
        let seed = best_plane.clone();
        let comp = seed.complement_basis();
        let chart_dim = n * comp.len() + comp.len();
        let x0 = alloc::vec![0.0; chart_dim];
        let radius = ball.radius;
        let mut objective = |params: &[f64]| match plane_from_chart(&seed, &comp, params, radius) {
            Some(p) => eval(&fix(&p)),
            None => f64::INFINITY,
        };
        let (xs, _) = math::nelder_mead(&mut objective, &x0, 0.2, cfg.nm_iters);
        if let Some(p) = plane_from_chart(&seed, &comp, &xs, radius) {
            let p = fix(&p);
            let v = eval(&p);
            consider(p, v, &mut best_plane, &mut best_value);
        }
    }
    (best_plane, best_value)
}
