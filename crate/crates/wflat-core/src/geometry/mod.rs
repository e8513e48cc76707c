//! Balls, axis-aligned cubes, dyadic lattices, Whitney decompositions,
//! affine `n`-planes with weighted total-least-squares fitting, and the bump
//! (cutoff) functions used to localize measures.

mod bump;
mod pca;
mod search;
mod whitney;

pub use bump::{cube_bump, standard_bump, BumpFunction};
pub use pca::fit_plane_pca;
pub(crate) use pca::weighted_pca;
pub use search::{search_planes, PlaneSearch};
pub use whitney::{whitney_decompose, WhitneyCubes, WhitneyDecomposition};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("Degenerate: covariance rank below requested plane dimension")]
    Degenerate,
    #[error("NoIntersection: plane does not meet the tripled ball")]
    NoIntersection,
    #[error("OutsideDomain: point is not in the open interior of the root cube")]
    OutsideDomain,
}

/// A closed Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        assert!(center.iter().all(|c| c.is_finite()));
        Self { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The concentric ball with `factor` times the radius.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.center.clone(), self.radius * factor)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        math::dist(x, &self.center) <= self.radius
    }
}

/// An axis-aligned half-open cube `[a, a+ℓ) × … × [a, a+ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    origin: Vec<f64>,
    side: f64,
}

impl Cube {
    pub fn new(origin: Vec<f64>, side: f64) -> Self {
        assert!(side > 0.0, "cube side must be positive");
        assert!(origin.iter().all(|c| c.is_finite()));
        Self { origin, side }
    }

    /// The smallest axis-aligned cube containing the given ball.
    pub fn bounding_ball(ball: &Ball) -> Self {
        let origin = ball.center.iter().map(|c| c - ball.radius).collect();
        Self::new(origin, 2.0 * ball.radius)
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn volume(&self, dim: usize) -> f64 {
        let mut v = 1.0;
        for _ in 0..dim {
            v *= self.side;
        }
        v
    }

    pub fn center(&self) -> Vec<f64> {
        self.origin.iter().map(|a| a + 0.5 * self.side).collect()
    }

    /// Half-open membership: `aᵢ ≤ xᵢ < aᵢ + ℓ` for every coordinate.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.origin).all(|(xi, ai)| *xi >= *ai && *xi < *ai + self.side)
    }

    /// Strict interior membership: `aᵢ < xᵢ < aᵢ + ℓ`.
    pub fn interior_contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.origin).all(|(xi, ai)| *xi > *ai && *xi < *ai + self.side)
    }

    /// Distance from an interior point to the cube boundary; 0 outside.
    pub fn boundary_dist_inside(&self, x: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (xi, ai) in x.iter().zip(&self.origin) {
            d = d.min(xi - ai).min(ai + self.side - xi);
        }
        d.max(0.0)
    }

    /// The cube with the same center and `factor` times the side length.
    pub fn dilated(&self, factor: f64) -> Self {
        let shift = 0.5 * self.side * (factor - 1.0);
        let origin = self.origin.iter().map(|a| a - shift).collect();
        Self::new(origin, self.side * factor)
    }
}

/// A dyadic subcube of a root cube: `level` halvings, integer lattice index.
///
/// Coordinates derive from the root exactly (`side = root_side · 2^{-level}`),
/// so for dyadic-rational roots all corners are exact in floating point.
#[derive(Debug, Clone)]
pub struct DyadicCube {
    level: u32,
    index: Vec<u64>,
    // Root geometry is duplicated per cube; cubes are small and immutable.
    root_origin: Vec<f64>,
    root_side: f64,
}

// Equality and ordering go through finite-f64 bit patterns so cubes can key
// ordered maps; (level, index) dominates, the root disambiguates lattices.
impl PartialEq for DyadicCube {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == core::cmp::Ordering::Equal
    }
}

impl Eq for DyadicCube {}

impl PartialOrd for DyadicCube {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicCube {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.level, &self.index, self.root_side.to_bits())
            .cmp(&(other.level, &other.index, other.root_side.to_bits()))
            .then_with(|| {
                let a = self.root_origin.iter().map(|v| v.to_bits());
                let b = other.root_origin.iter().map(|v| v.to_bits());
                a.cmp(b)
            })
    }
}

impl DyadicCube {
    pub fn root(root: &Cube) -> Self {
        Self {
            level: 0,
            index: alloc::vec![0; root.dim()],
            root_origin: root.origin.clone(),
            root_side: root.side,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[u64] {
        &self.index
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn side(&self) -> f64 {
        self.root_side * math::exp2i(-(self.level as i32))
    }

    pub fn root_cube(&self) -> Cube {
        Cube::new(self.root_origin.clone(), self.root_side)
    }

    pub fn corner(&self) -> Vec<f64> {
        let s = self.side();
        self.root_origin.iter().zip(&self.index).map(|(a, k)| a + *k as f64 * s).collect()
    }

    pub fn cube(&self) -> Cube {
        Cube::new(self.corner(), self.side())
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.root_origin
            .iter()
            .zip(&self.index)
            .map(|(a, k)| a + (*k as f64 + 0.5) * s)
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.cube().contains(x)
    }

    /// `"level:k0,k1,…"` — the canonical cube identifier.
    pub fn id(&self) -> String {
        let mut s = format!("{}:", self.level);
        for (i, k) in self.index.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s += &format!("{}", k);
        }
        s
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let d = self.dim();
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0u64..(1 << d) {
            let index = self
                .index
                .iter()
                .enumerate()
                .map(|(i, k)| 2 * k + ((mask >> i) & 1))
                .collect();
            out.push(Self {
                level: self.level + 1,
                index,
                root_origin: self.root_origin.clone(),
                root_side: self.root_side,
            });
        }
        out
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        Some(Self {
            level: self.level - 1,
            index: self.index.iter().map(|k| k / 2).collect(),
            root_origin: self.root_origin.clone(),
            root_side: self.root_side,
        })
    }

    /// The level-`level` lattice cube containing `x`, if `x` is in the root.
    pub fn containing(root: &Cube, level: u32, x: &[f64]) -> Option<DyadicCube> {
        if !root.contains(x) || level > 60 {
            return None;
        }
        let cells = (1u64 << level) as f64;
        let index = x
            .iter()
            .zip(&root.origin)
            .map(|(xi, ai)| {
                let t = (xi - ai) / root.side * cells;
                (math::floor(t) as u64).min((1u64 << level) - 1)
            })
            .collect();
        Some(Self { level, index, root_origin: root.origin.clone(), root_side: root.side })
    }

    /// Whether `self ⊆ other` in the same lattice.
    pub fn is_contained_in(&self, other: &DyadicCube) -> bool {
        if other.level > self.level || self.root_origin != other.root_origin {
            return false;
        }
        let shift = self.level - other.level;
        self.index.iter().zip(&other.index).all(|(k, ko)| (k >> shift) == *ko)
    }
}

/// An affine `n`-plane in `R^d`: a basepoint and an orthonormal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePlane {
    base: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl AffinePlane {
    /// Builds a plane through `base` spanned by `directions`, which are
    /// orthonormalized; returns `Degenerate` if they are linearly dependent.
    pub fn new(base: Vec<f64>, directions: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let d = base.len();
        let mut frame: Vec<Vec<f64>> = Vec::with_capacity(directions.len());
        for dir in directions {
            assert_eq!(dir.len(), d);
            let mut v = dir.clone();
            for e in &frame {
                let t = math::dot(&v, e);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= t * ei;
                }
            }
            let norm = math::norm(&v);
            if norm <= 1e-12 * (1.0 + math::norm(dir)) {
                return Err(GeometryError::Degenerate);
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            frame.push(v);
        }
        Ok(Self { base, frame })
    }

    /// The plane spanned by the first `n` coordinate axes through `base`.
    pub fn axis_aligned(base: Vec<f64>, n: usize) -> Self {
        let d = base.len();
        assert!(n <= d);
        let mut frame = Vec::with_capacity(n);
        for i in 0..n {
            let mut e = alloc::vec![0.0; d];
            e[i] = 1.0;
            frame.push(e);
        }
        Self { base, frame }
    }

    pub fn n(&self) -> usize {
        self.frame.len()
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn frame(&self) -> &[Vec<f64>] {
        &self.frame
    }

    /// In-plane coordinates of the orthogonal projection of `x`.
    pub fn project_params(&self, x: &[f64]) -> Vec<f64> {
        let w = math::sub(x, &self.base);
        self.frame.iter().map(|e| math::dot(&w, e)).collect()
    }

    /// The point of the plane with the given in-plane coordinates.
    pub fn point_at(&self, t: &[f64]) -> Vec<f64> {
        let mut y = self.base.clone();
        for (ti, e) in t.iter().zip(&self.frame) {
            for (yi, ei) in y.iter_mut().zip(e) {
                *yi += ti * ei;
            }
        }
        y
    }

    /// Orthogonal projection of `x` onto the plane.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.point_at(&self.project_params(x))
    }

    /// Euclidean distance from `x` to the plane.
    pub fn dist(&self, x: &[f64]) -> f64 {
        let mut w = math::sub(x, &self.base);
        for e in &self.frame {
            let t = math::dot(&w, e);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= t * ei;
            }
        }
        math::norm(&w)
    }

    /// An orthonormal basis of the orthogonal complement of the frame.
    pub fn complement_basis(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut basis: Vec<Vec<f64>> = self.frame.clone();
        let mut out = Vec::with_capacity(d - self.n());
        for i in 0..d {
            let mut v = alloc::vec![0.0; d];
            v[i] = 1.0;
            for e in &basis {
                let t = math::dot(&v, e);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= t * ei;
                }
            }
            let norm = math::norm(&v);
            if norm > 1e-8 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                basis.push(v.clone());
                out.push(v);
                if out.len() == d - self.n() {
                    break;
                }
            }
        }
        debug_assert_eq!(out.len(), d - self.n());
        out
    }

    /// Translates the plane so its distance to `center` is at most `max_dist`.
    pub fn clamped_to_ball(&self, ball: &Ball, slack: f64) -> AffinePlane {
        let max_dist = ball.radius * slack;
        let mut w = math::sub(&ball.center, &self.base);
        for e in &self.frame {
            let t = math::dot(&w, e);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= t * ei;
            }
        }
        let pd = math::norm(&w);
        if pd <= max_dist {
            return self.clone();
        }
        // Move the basepoint toward the center along the perpendicular.
        let t = 1.0 - max_dist / pd;
        let base = self.base.iter().zip(&w).map(|(b, wi)| b + t * wi).collect();
        Self { base, frame: self.frame.clone() }
    }
}

/// Uniform grid discretization of `ℋⁿ` on `L ∩ 3B`: cell midpoints at the
/// given spacing, per-node weight `spacingⁿ`, keeping only nodes where the
/// standard bump of `B` is positive.
pub fn sample_plane_measure(
    plane: &AffinePlane,
    ball: &Ball,
    spacing: f64,
) -> Result<DiscreteMeasure, GeometryError> {
    assert!(spacing > 0.0, "spacing must be positive");
    let n = plane.n();
    let r3 = 3.0 * ball.radius;
    let perp = plane.dist(&ball.center);
    if perp >= r3 {
        return Err(GeometryError::NoIntersection);
    }
    // Radius of L ∩ 3B in in-plane coordinates, centered at the projection.
    let rho = math::sqrt(r3 * r3 - perp * perp);
    let t0 = plane.project_params(&ball.center);
    let cells_f = 2.0 * rho / spacing;
    let count = math::ceil(cells_f - 1e-9).max(1.0) as u64;
    let bump = standard_bump(ball);

    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut w_node = 1.0;
    for _ in 0..n {
        w_node *= spacing;
    }
    let mut idx = alloc::vec![0u64; n];
    loop {
        let t: Vec<f64> = idx
            .iter()
            .zip(&t0)
            .map(|(k, c)| c - rho + (*k as f64 + 0.5) * spacing)
            .collect();
        let y = plane.point_at(&t);
        if bump.eval(&y) > 0.0 {
            coords.extend_from_slice(&y);
            weights.push(w_node);
        }
        // Odometer increment over the n-dimensional index box.
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
    if weights.is_empty() {
        return Err(GeometryError::NoIntersection);
    }
    Ok(DiscreteMeasure::from_flat(plane.dim(), coords, weights).expect("finite grid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dyadic_children_partition_parent() {
        let root = Cube::new(vec![0.0, 0.0], 1.0);
        let top = DyadicCube::root(&root);
        let kids = top.children();
        assert_eq!(kids.len(), 4);
        let sides: f64 = kids.iter().map(|q| q.cube().volume(2)).sum();
        assert_eq!(sides, 1.0);
        // Half-open membership puts a shared corner in exactly one child.
        let probe = [0.5, 0.5];
        let owners = kids.iter().filter(|q| q.contains(&probe)).count();
        assert_eq!(owners, 1);
        for q in &kids {
            assert!(q.is_contained_in(&top));
            assert_eq!(q.parent().unwrap(), top);
        }
    }

    #[test]
    fn dyadic_ids_and_lookup() {
        let root = Cube::new(vec![0.0, 0.0], 1.0);
        let q = DyadicCube::containing(&root, 2, &[0.3, 0.8]).unwrap();
        assert_eq!(q.id(), "2:1,3");
        assert_eq!(q.side(), 0.25);
        assert!(q.contains(&[0.3, 0.8]));
    }

    #[test]
    fn plane_projection_and_distance() {
        let plane =
            AffinePlane::new(vec![0.0, 1.0], &[vec![1.0, 0.0]]).unwrap();
        assert!((plane.dist(&[5.0, 3.0]) - 2.0).abs() < 1e-14);
        assert_eq!(plane.project(&[5.0, 3.0]), vec![5.0, 1.0]);
        let comp = plane.complement_basis();
        assert_eq!(comp.len(), 1);
        assert!((crate::math::dot(&comp[0], &plane.frame()[0])).abs() < 1e-14);
    }

    #[test]
    fn plane_constructor_rejects_dependent_directions() {
        let err = AffinePlane::new(vec![0.0, 0.0], &[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(matches!(err, Err(GeometryError::Degenerate)));
    }

    #[test]
    fn plane_clamping_moves_into_ball() {
        let plane = AffinePlane::new(vec![0.0, 5.0], &[vec![1.0, 0.0]]).unwrap();
        let ball = Ball::new(vec![0.0, 0.0], 1.0);
        let clamped = plane.clamped_to_ball(&ball, 0.999);
        assert!(clamped.dist(&ball.center) <= 0.999 + 1e-12);
        // Direction is unchanged.
        assert_eq!(clamped.frame(), plane.frame());
    }

    #[test]
    fn sampled_line_through_unit_ball_has_sixty_nodes() {
        let plane = AffinePlane::axis_aligned(vec![0.0, 0.0], 1);
        let ball = Ball::new(vec![0.0, 0.0], 1.0);
        let m = sample_plane_measure(&plane, &ball, 0.1).unwrap();
        assert_eq!(m.len(), 60);
        assert!(m.weights().iter().all(|w| (*w - 0.1).abs() < 1e-15));
        // Nodes are the midpoints of the 60 cells tiling [-3, 3).
        assert!((m.point(0)[0] + 2.95).abs() < 1e-12);
        assert!((m.point(59)[0] - 2.95).abs() < 1e-12);
    }

    #[test]
    fn sampled_mass_approaches_trace_length() {
        let plane = AffinePlane::axis_aligned(vec![0.0, 0.0], 1);
        let ball = Ball::new(vec![0.0, 0.0], 1.0);
        let fine = sample_plane_measure(&plane, &ball, 1e-3).unwrap();
        assert!((fine.total_mass() - 6.0).abs() < 5e-3);
    }

    #[test]
    fn plane_missing_tripled_ball_is_rejected() {
        let plane = AffinePlane::new(vec![0.0, 4.0], &[vec![1.0, 0.0]]).unwrap();
        let ball = Ball::new(vec![0.0, 0.0], 1.0);
        assert!(matches!(
            sample_plane_measure(&plane, &ball, 0.1),
            Err(GeometryError::NoIntersection)
        ));
    }
}
