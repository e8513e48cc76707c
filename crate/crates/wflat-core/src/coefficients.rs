//! Flatness coefficients of a measure at a ball.
//!
//! Three families, all normalized to be scale invariant:
//!
//! * `alpha_p` — exact transport cost between the bump-localized measure and
//!   a density-matched discretized plane, minimized over planes.
//! * `alpha_dist` — a boundary-anchored Lipschitz-dual distance between the
//!   raw measure and a plane density, minimized over densities and planes.
//! * `beta_p` / `beta_inf` / `b_beta_inf` — one-sided and bilateral
//!   projection distances to the best plane.
//!
//! Every report carries the witness plane, the normalization constant that
//! matched the plane density, and the sampling spacing, so downstream checks
//! can re-evaluate the exact same configuration.

use alloc::vec::Vec;

use crate::geometry::{
    sample_plane_measure, search_planes, standard_bump, weighted_pca, AffinePlane, Ball,
    BumpFunction, GeometryError, PlaneSearch,
};
use crate::math;
use crate::measure::{DiscreteMeasure, MeasureError};
use crate::transport::{self, TransportError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoefficientError {
    #[error("EmptyBall: the ball contains no support mass")]
    EmptyBall,
    #[error("ZeroMass: bump-weighted plane mass vanished")]
    ZeroMass,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    Alpha,
    AlphaDist,
    Beta,
    BetaInf,
    BilateralBetaInf,
}

impl CoefficientKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientKind::Alpha => "alpha",
            CoefficientKind::AlphaDist => "alpha_dist",
            CoefficientKind::Beta => "beta",
            CoefficientKind::BetaInf => "beta_inf",
            CoefficientKind::BilateralBetaInf => "b_beta_inf",
        }
    }
}

/// The outcome of one coefficient evaluation.
#[derive(Debug, Clone)]
pub struct CoefficientReport {
    pub kind: CoefficientKind,
    /// Cost exponent; `f64::INFINITY` for the sup-based kinds.
    pub p: f64,
    pub ball: Ball,
    /// The normalized coefficient value.
    pub value: f64,
    /// The minimizing plane found by the search.
    pub witness_plane: AffinePlane,
    /// Density matching constant at the witness: `c_{B,L}` for alpha, the
    /// plane density `a` for the distance variant, 1 for the beta kinds.
    pub normalization: f64,
    /// Raw cost at the witness before radius powers (0 for the beta kinds).
    pub transport_cost: f64,
    /// Plane sampling spacing (0 where no plane is sampled).
    pub spacing: f64,
}

/// Search configuration for the transport-based coefficients.
#[derive(Debug, Clone)]
pub struct AlphaConfig {
    /// Dimension of the approximating planes.
    pub n: usize,
    /// Plane search budget. Each candidate costs an exact transport solve,
    /// so the default skips the grid and polishes from a fitted seed.
    pub search: PlaneSearch,
    /// Plane sampling spacing; `None` picks [`default_spacing`].
    pub spacing: Option<f64>,
    /// Compare probability-normalized measures instead of matched masses
    /// (and normalize by `r` alone). Ignored by [`alpha_dist`].
    pub normalized: bool,
}

impl AlphaConfig {
    pub fn new(n: usize) -> Self {
        Self { n, search: PlaneSearch::seeded(), spacing: None, normalized: false }
    }

    fn spacing_for(&self, ball: &Ball) -> f64 {
        self.spacing.unwrap_or_else(|| default_spacing(self.n, ball.radius))
    }
}

/// Default plane sampling spacing: `r/200` for lines, `r/64` above.
pub fn default_spacing(n: usize, radius: f64) -> f64 {
    if n == 1 {
        radius / 200.0
    } else {
        radius / 64.0
    }
}

fn has_mass_in_ball(mu: &DiscreteMeasure, ball: &Ball) -> bool {
    mu.iter().any(|(x, w)| w > 0.0 && ball.contains(x))
}

/// Fits the best `n`-plane through a measure's centroid, padding with
/// arbitrary orthonormal directions when the point cloud is lower-rank.
fn pca_seed(mu: &DiscreteMeasure, n: usize) -> Option<AffinePlane> {
    let (centroid, _, eigvecs) = weighted_pca(mu)?;
    let dirs: Vec<Vec<f64>> = eigvecs.into_iter().take(n).collect();
    AffinePlane::new(centroid, &dirs).ok()
}

/// Density matching constant `c_{B,L}`: bump-weighted measure mass over
/// bump-weighted sampled plane mass.
pub fn c_b_l(
    mu: &DiscreteMeasure,
    ball: &Ball,
    plane: &AffinePlane,
    spacing: f64,
) -> Result<f64, CoefficientError> {
    let bump = standard_bump(ball);
    let num: f64 = mu.iter().map(|(x, w)| w * bump.eval(x)).sum();
    let lhat = sample_plane_measure(plane, ball, spacing)?;
    let den: f64 = lhat.iter().map(|(y, w)| w * bump.eval(y)).sum();
    if den <= 0.0 {
        return Err(CoefficientError::ZeroMass);
    }
    Ok(num / den)
}

/// Exact transport cost against the matched plane density at one fixed
/// plane. Returns `(W_p cost, c_{B,L})`; with `normalized` both sides are
/// rescaled to probability measures first (the constant is still reported).
pub fn alpha_transport_at(
    p: f64,
    mu: &DiscreteMeasure,
    ball: &Ball,
    plane: &AffinePlane,
    spacing: f64,
    normalized: bool,
) -> Result<(f64, f64), CoefficientError> {
    let bump = standard_bump(ball);
    let phimu = mu.reweight(&bump.as_field())?;
    if phimu.is_empty() {
        return Err(CoefficientError::EmptyBall);
    }
    alpha_cost(p, &phimu, ball, &bump, plane, spacing, normalized)
}

/// Inner transport evaluation with the localized measure precomputed.
fn alpha_cost(
    p: f64,
    phimu: &DiscreteMeasure,
    ball: &Ball,
    bump: &BumpFunction,
    plane: &AffinePlane,
    spacing: f64,
    normalized: bool,
) -> Result<(f64, f64), CoefficientError> {
    let lhat = sample_plane_measure(plane, ball, spacing)?;
    let philhat = lhat.reweight(&bump.as_field())?;
    let den = philhat.total_mass();
    if den <= 0.0 {
        return Err(CoefficientError::ZeroMass);
    }
    let c = phimu.total_mass() / den;
    let plan = if normalized {
        transport::wasserstein(p, &phimu.normalized(), &philhat.normalized())?
    } else {
        transport::wasserstein(p, phimu, &philhat.scaled(c))?
    };
    Ok((plan.cost, c))
}

/// Transport flatness coefficient: minimizes the exact `W_p` cost between
/// the bump-localized measure and the density-matched sampled plane, then
/// normalizes by `r^{1 + n/p}` (or by `r` in the probability-normalized
/// variant).
pub fn alpha_p(
    p: f64,
    mu: &DiscreteMeasure,
    ball: &Ball,
    cfg: &AlphaConfig,
) -> Result<CoefficientReport, CoefficientError> {
    assert!(p >= 1.0 && p.is_finite(), "alpha requires a finite exponent p >= 1");
    if !has_mass_in_ball(mu, ball) {
        return Err(CoefficientError::EmptyBall);
    }
    let spacing = cfg.spacing_for(ball);
    let bump = standard_bump(ball);
    let phimu = mu.reweight(&bump.as_field())?;

    let seeds: Vec<AffinePlane> = pca_seed(&phimu, cfg.n).into_iter().collect();
    let mut first_err: Option<CoefficientError> = None;
    let mut eval = |plane: &AffinePlane| -> f64 {
        match alpha_cost(p, &phimu, ball, &bump, plane, spacing, cfg.normalized) {
            Ok((w, _)) => w,
            Err(e) => {
                first_err.get_or_insert(e);
                f64::INFINITY
            }
        }
    };
    let (witness, w_cost) = search_planes(ball, cfg.n, &seeds, &cfg.search, true, &mut eval);
    if !w_cost.is_finite() {
        return Err(first_err.unwrap_or(CoefficientError::ZeroMass));
    }
    let (_, c) = alpha_cost(p, &phimu, ball, &bump, &witness, spacing, cfg.normalized)?;
    let scale = if cfg.normalized {
        ball.radius
    } else {
        math::powf(ball.radius, 1.0 + cfg.n as f64 / p)
    };
    Ok(CoefficientReport {
        kind: CoefficientKind::Alpha,
        p,
        ball: ball.clone(),
        value: w_cost / scale,
        witness_plane: witness,
        normalization: c,
        transport_cost: w_cost,
        spacing,
    })
}

/// Bump-weighted projection residual `(Σ w φ_B(x) dist(x, L)^p)^{1/p}`,
/// unnormalized. For any plan onto a target supported on `L` this is a
/// lower bound for the transport cost, exactly.
pub fn bump_projection_residual(
    p: f64,
    mu: &DiscreteMeasure,
    ball: &Ball,
    plane: &AffinePlane,
) -> f64 {
    let bump = standard_bump(ball);
    let total: f64 = mu
        .iter()
        .map(|(x, w)| w * bump.eval(x) * math::pow_p(plane.dist(x), p))
        .sum();
    math::root_p(total, p)
}

fn beta_value(p: f64, restricted: &DiscreteMeasure, ball: &Ball, plane: &AffinePlane) -> f64 {
    let r = ball.radius;
    if p.is_infinite() {
        let mut sup: f64 = 0.0;
        for (x, w) in restricted.iter() {
            if w > 0.0 {
                sup = sup.max(plane.dist(x));
            }
        }
        sup / r
    } else {
        let n = plane.n() as f64;
        let total: f64 = restricted
            .iter()
            .map(|(x, w)| w * math::pow_p(plane.dist(x) / r, p))
            .sum();
        math::root_p(total / math::powf(r, n), p)
    }
}

/// Projection flatness coefficient over the doubled ball:
/// `β_p = (r^{-n} Σ_{2B} w (dist/r)^p)^{1/p}`. For `p = 2` the weighted
/// total-least-squares plane is the exact minimizer, so no search runs.
pub fn beta_p(
    p: f64,
    mu: &DiscreteMeasure,
    ball: &Ball,
    n: usize,
    search: &PlaneSearch,
) -> Result<CoefficientReport, CoefficientError> {
    assert!(p >= 1.0, "beta requires p >= 1 (possibly infinite)");
    if !has_mass_in_ball(mu, ball) {
        return Err(CoefficientError::EmptyBall);
    }
    let double = ball.scaled(2.0);
    let restricted = mu.restrict(|x| double.contains(x));

    let (witness, value) = if p == 2.0 {
        let plane = pca_seed(&restricted, n).ok_or(CoefficientError::EmptyBall)?;
        let v = beta_value(2.0, &restricted, ball, &plane);
        (plane, v)
    } else {
        let seeds: Vec<AffinePlane> = pca_seed(&restricted, n).into_iter().collect();
        let mut eval = |plane: &AffinePlane| beta_value(p, &restricted, ball, plane);
        search_planes(ball, n, &seeds, search, false, &mut eval)
    };
    Ok(CoefficientReport {
        kind: if p.is_infinite() { CoefficientKind::BetaInf } else { CoefficientKind::Beta },
        p,
        ball: ball.clone(),
        value,
        witness_plane: witness,
        normalization: 1.0,
        transport_cost: 0.0,
        spacing: 0.0,
    })
}

/// Sup-norm projection coefficient `β_∞ = min_L sup_{2B} dist(x, L)/r`.
pub fn beta_inf(
    mu: &DiscreteMeasure,
    ball: &Ball,
    n: usize,
    search: &PlaneSearch,
) -> Result<CoefficientReport, CoefficientError> {
    beta_p(f64::INFINITY, mu, ball, n, search)
}

/// Bilateral sup coefficient: the one-sided `β_∞` term plus how far the
/// plane wanders from the support, probed on an in-plane grid over `L ∩ 2B`
/// at the given spacing.
pub fn b_beta_inf(
    mu: &DiscreteMeasure,
    ball: &Ball,
    n: usize,
    scale: f64,
    search: &PlaneSearch,
) -> Result<CoefficientReport, CoefficientError> {
    assert!(scale > 0.0, "grid spacing must be positive");
    if !has_mass_in_ball(mu, ball) {
        return Err(CoefficientError::EmptyBall);
    }
    let double = ball.scaled(2.0);
    let restricted = mu.restrict(|x| double.contains(x));
    let support: Vec<&[f64]> =
        mu.iter().filter(|(_, w)| *w > 0.0).map(|(x, _)| x).collect();
    let r = ball.radius;

    let mut eval = |plane: &AffinePlane| -> f64 {
        let one_sided = beta_value(f64::INFINITY, &restricted, ball, plane);
        let Some(grid) = plane_grid_in_ball(plane, &double, scale) else {
            return f64::INFINITY;
        };
        let mut reach: f64 = 0.0;
        for y in grid.chunks_exact(plane.dim()) {
            let d = support
                .iter()
                .map(|x| math::dist(x, y))
                .fold(f64::INFINITY, f64::min);
            reach = reach.max(d);
        }
        one_sided + reach / r
    };
    let seeds: Vec<AffinePlane> = pca_seed(&restricted, n).into_iter().collect();
    let (witness, value) = search_planes(ball, n, &seeds, search, true, &mut eval);
    Ok(CoefficientReport {
        kind: CoefficientKind::BilateralBetaInf,
        p: f64::INFINITY,
        ball: ball.clone(),
        value,
        witness_plane: witness,
        normalization: 1.0,
        transport_cost: 0.0,
        spacing: scale,
    })
}

/// Midpoint grid on `L ∩ ball` (no bump filter), flattened coordinates.
/// `None` when the plane misses the ball.
fn plane_grid_in_ball(plane: &AffinePlane, ball: &Ball, spacing: f64) -> Option<Vec<f64>> {
    let n = plane.n();
    let perp = plane.dist(&ball.center);
    if perp >= ball.radius {
        return None;
    }
    let rho = math::sqrt(ball.radius * ball.radius - perp * perp);
    let t0 = plane.project_params(&ball.center);
    let count = math::ceil(2.0 * rho / spacing - 1e-9).max(1.0) as u64;
    let mut out = Vec::new();
    let mut idx = alloc::vec![0u64; n];
    loop {
        let t: Vec<f64> = idx
            .iter()
            .zip(&t0)
            .map(|(k, c)| c - rho + (*k as f64 + 0.5) * spacing)
            .collect();
        let y = plane.point_at(&t);
        if math::dist(&y, &ball.center) <= ball.radius {
            out.extend_from_slice(&y);
        }
        let mut axis = 0;
        loop {
            if axis == n {
                break;
            }
            idx[axis] += 1;
            if idx[axis] < count {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
        if axis == n {
            break;
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Boundary-anchored Lipschitz-dual distance between two nonnegative
/// measures, both read inside the open tripled ball:
///
/// `sup { Σ f d(a − b) : |f(x) − f(y)| ≤ |x − y|, |f(x)| ≤ dist(x, ∂3B) }`.
///
/// Solved exactly as a balanced transportation problem with a virtual
/// boundary node that absorbs or emits imbalance at the boundary-distance
/// price. Atoms outside the tripled ball are dropped (any feasible `f`
/// vanishes there).
pub fn boundary_lipschitz_dist(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    ball: &Ball,
) -> Result<f64, CoefficientError> {
    assert_eq!(a.dim(), b.dim());
    let r3 = 3.0 * ball.radius;
    let c = &ball.center;
    let keep = |m: &DiscreteMeasure| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for (x, w) in m.iter() {
            if w > 0.0 && math::dist(x, c) < r3 {
                pts.push(x.to_vec());
                ws.push(w);
            }
        }
        (pts, ws)
    };
    let (pa, wa) = keep(a);
    let (pb, wb) = keep(b);
    let bdist = |x: &[f64]| (r3 - math::dist(x, c)).max(0.0);

    let (ma, mb) = (wa.iter().sum::<f64>(), wb.iter().sum::<f64>());
    if ma <= 0.0 && mb <= 0.0 {
        return Ok(0.0);
    }
    // One-sided cases collapse to pure boundary absorption.
    if mb <= 0.0 {
        return Ok(pa.iter().zip(&wa).map(|(x, w)| w * bdist(x)).sum());
    }
    if ma <= 0.0 {
        return Ok(pb.iter().zip(&wb).map(|(x, w)| w * bdist(x)).sum());
    }

    const CAP: usize = 4000;
    if pa.len() >= CAP || pb.len() >= CAP {
        return Err(CoefficientError::Transport(TransportError::TooLarge {
            size: pa.len().max(pb.len()),
            cap: CAP,
        }));
    }
    // Sources: the a-atoms plus a virtual node carrying all of b's mass.
    // Sinks: the b-atoms plus a virtual node absorbing all of a's mass.
    // Virtual arcs price teleportation at the boundary distance, and the
    // virtual-virtual arc is free, so imbalance routes optimally.
    let m = pa.len();
    let n = pb.len();
    let mut supply = wa.clone();
    supply.push(mb);
    let mut demand = wb.clone();
    demand.push(ma);
    let cost = |i: usize, j: usize| -> f64 {
        match (i < m, j < n) {
            (true, true) => math::dist(&pa[i], &pb[j]),
            (true, false) => bdist(&pa[i]),
            (false, true) => bdist(&pb[j]),
            (false, false) => 0.0,
        }
    };
    let flows = transport::simplex::solve(&supply, &demand, &cost);
    Ok(flows.iter().map(|&(i, j, f)| f * cost(i, j)).sum())
}

/// Distance-variant flatness coefficient:
/// `r^{-n-1} min_{a ≥ 0, L} dist_{3B}(μ, a · L̂)` with `L̂` the sampled
/// plane density. The inner minimization over `a` is convex and handled by
/// golden section; the outer plane search follows `cfg.search`.
pub fn alpha_dist(
    mu: &DiscreteMeasure,
    ball: &Ball,
    cfg: &AlphaConfig,
) -> Result<CoefficientReport, CoefficientError> {
    if !has_mass_in_ball(mu, ball) {
        return Err(CoefficientError::EmptyBall);
    }
    let spacing = cfg.spacing_for(ball);
    let r3 = 3.0 * ball.radius;
    let inside = mu.restrict(|x| math::dist(x, &ball.center) < r3);
    let m_in = inside.total_mass();

    let bump = standard_bump(ball);
    let phimu = mu.reweight(&bump.as_field())?;
    let seeds: Vec<AffinePlane> = pca_seed(&phimu, cfg.n).into_iter().collect();

    let mut first_err: Option<CoefficientError> = None;
    let mut best_a = 0.0f64;
    let mut best_val = f64::INFINITY;
    let mut eval = |plane: &AffinePlane| -> f64 {
        let lhat = match sample_plane_measure(plane, ball, spacing) {
            Ok(l) => l,
            Err(e) => {
                first_err.get_or_insert(CoefficientError::Geometry(e));
                return f64::INFINITY;
            }
        };
        let ml = lhat.total_mass();
        let mut g = |aa: f64| -> f64 {
            match boundary_lipschitz_dist(&inside, &lhat.scaled(aa), ball) {
                Ok(v) => v,
                Err(e) => {
                    first_err.get_or_insert(e);
                    f64::INFINITY
                }
            }
        };
        let a_hi = 3.0 * m_in / ml;
        let (a_star, v_star) = math::golden_section(&mut g, 0.0, a_hi, 40);
        let v0 = g(0.0);
        let (a_opt, v_opt) = if v0 < v_star { (0.0, v0) } else { (a_star, v_star) };
        if v_opt < best_val {
            best_val = v_opt;
            best_a = a_opt;
        }
        v_opt
    };
    let (witness, raw) = search_planes(ball, cfg.n, &seeds, &cfg.search, true, &mut eval);
    if !raw.is_finite() {
        return Err(first_err.unwrap_or(CoefficientError::ZeroMass));
    }
    let n = cfg.n as f64;
    Ok(CoefficientReport {
        kind: CoefficientKind::AlphaDist,
        p: 1.0,
        ball: ball.clone(),
        value: raw / math::powf(ball.radius, n + 1.0),
        witness_plane: witness,
        normalization: best_a,
        transport_cost: raw,
        spacing,
    })
}
