//! Finite discrete measures on `R^d` and the elementary operations every
//! other module consumes: restriction, reweighting, pushforward, and means
//! over cubes.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::geometry::Cube;

/// Relative weight threshold below which atoms are dropped after reweighting.
const REWEIGHT_DROP_REL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("NegativeWeight: weight {weight} at atom {index}")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("NonFinite: non-finite value at atom {index}")]
    NonFinite { index: usize },
    #[error("DimensionMismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A finite nonnegative measure `Σ wᵢ δ_{xᵢ}` on `R^d`.
///
/// Atoms keep their insertion order and are never deduplicated on
/// construction: transport plans and maps reference atoms by index.
/// Coordinates are stored flattened (`dim` consecutive entries per atom).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from per-atom coordinate slices and weights.
    pub fn new(dim: usize, points: &[Vec<f64>], weights: &[f64]) -> Result<Self, MeasureError> {
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MeasureError::DimensionMismatch { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
            let _ = i;
        }
        Self::from_flat(dim, coords, weights.to_vec())
    }

    /// Builds a measure from flattened coordinates (`dim` entries per atom).
    pub fn from_flat(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        assert!(dim > 0, "ambient dimension must be positive");
        if coords.len() != dim * weights.len() {
            return Err(MeasureError::DimensionMismatch { expected: dim * weights.len(), got: coords.len() });
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MeasureError::NonFinite { index: i });
            }
            if *w < 0.0 {
                return Err(MeasureError::NegativeWeight { index: i, weight: *w });
            }
        }
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(MeasureError::NonFinite { index: i / dim });
            }
        }
        Ok(Self { dim, coords, weights })
    }

    /// The empty measure in `R^d`.
    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0);
        Self { dim, coords: Vec::new(), weights: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates of atom `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flattened coordinate storage (`dim` entries per atom).
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.coords.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Pointwise multiplication of weights by `f`; atoms whose new weight
    /// falls below `1e-15 ×` the reweighted total mass are dropped.
    pub fn reweight(&self, f: &ScalarField) -> Result<Self, MeasureError> {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (i, (x, w)) in self.iter().enumerate() {
            let v = f.eval(x);
            if !v.is_finite() {
                return Err(MeasureError::NonFinite { index: i });
            }
            if v < 0.0 {
                return Err(MeasureError::NegativeWeight { index: i, weight: v });
            }
            let nw = w * v;
            if nw > 0.0 {
                coords.extend_from_slice(x);
                weights.push(nw);
            }
        }
        let total: f64 = weights.iter().sum();
        let cut = REWEIGHT_DROP_REL * total;
        let mut kc = Vec::with_capacity(coords.len());
        let mut kw = Vec::with_capacity(weights.len());
        for (chunk, w) in coords.chunks_exact(self.dim).zip(&weights) {
            if *w >= cut {
                kc.extend_from_slice(chunk);
                kw.push(*w);
            }
        }
        Ok(Self { dim: self.dim, coords: kc, weights: kw })
    }

    /// Keeps exactly the atoms satisfying the predicate.
    pub fn restrict<P: FnMut(&[f64]) -> bool>(&self, mut pred: P) -> Self {
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        for (x, w) in self.iter() {
            if pred(x) {
                coords.extend_from_slice(x);
                weights.push(w);
            }
        }
        Self { dim: self.dim, coords, weights }
    }

    /// Atoms inside the half-open cube `[a, a+ℓ)^d`.
    pub fn restrict_to_cube(&self, q: &Cube) -> Self {
        self.restrict(|x| q.contains(x))
    }

    /// Image measure under `T`: atom `(x, w)` becomes `(T(x), w)`.
    /// Coincident images are kept separate; see [`Self::merge_coincident`].
    pub fn push_forward<T: FnMut(&[f64]) -> Vec<f64>>(&self, mut map: T) -> Result<Self, MeasureError> {
        let mut coords = Vec::with_capacity(self.coords.len());
        for x in self.coords.chunks_exact(self.dim) {
            let y = map(x);
            if y.len() != self.dim {
                return Err(MeasureError::DimensionMismatch { expected: self.dim, got: y.len() });
            }
            coords.extend_from_slice(&y);
        }
        Self::from_flat(self.dim, coords, self.weights.clone())
    }

    /// Merges atoms with bitwise-equal coordinates, summing their weights.
    /// The first occurrence keeps its position in the atom order.
    pub fn merge_coincident(&self) -> Self {
        let mut coords: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut seen: Vec<usize> = Vec::new(); // indices into the output
        for (x, w) in self.iter() {
            let hit = seen
                .iter()
                .position(|&j| &coords[j * self.dim..(j + 1) * self.dim] == x);
            match hit {
                Some(pos) => weights[seen[pos]] += w,
                None => {
                    seen.push(weights.len());
                    coords.extend_from_slice(x);
                    weights.push(w);
                }
            }
        }
        Self { dim: self.dim, coords, weights }
    }

    /// `m(Q) / vol(Q)`: the mean density of the measure over a cube.
    pub fn mean_over_cube(&self, q: &Cube) -> f64 {
        assert!(q.side() > 0.0, "cube must have positive volume");
        self.mass_in_cube(q) / q.volume(self.dim)
    }

    /// Total weight of atoms inside the half-open cube.
    pub fn mass_in_cube(&self, q: &Cube) -> f64 {
        self.iter().filter(|(x, _)| q.contains(x)).map(|(_, w)| w).sum()
    }

    /// Multiplies every weight by a nonnegative factor.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite());
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Self { dim: self.dim, coords: self.coords.clone(), weights }
    }

    /// Rescales all weights so the total mass becomes 1. Panics on an empty
    /// or zero-mass measure.
    pub fn normalized(&self) -> Self {
        let total = self.total_mass();
        assert!(total > 0.0, "cannot normalize a zero-mass measure");
        let weights = self.weights.iter().map(|w| w / total).collect();
        Self { dim: self.dim, coords: self.coords.clone(), weights }
    }
}

/// A real-valued function on `R^d` with an optional Lipschitz bound.
///
/// Wraps an arbitrary evaluator so bump profiles, densities, and dual test
/// functions share one interface. Evaluation must be deterministic.
pub struct ScalarField {
    eval: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    lipschitz_bound: Option<f64>,
}

impl ScalarField {
    pub fn new<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self { eval: Box::new(f), lipschitz_bound: None }
    }

    pub fn with_lipschitz<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F, bound: f64) -> Self {
        Self { eval: Box::new(f), lipschitz_bound: Some(bound) }
    }

    pub fn constant(c: f64) -> Self {
        Self { eval: Box::new(move |_| c), lipschitz_bound: Some(0.0) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }
}

impl core::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ScalarField").field("lipschitz_bound", &self.lipschitz_bound).finish()
    }
}
