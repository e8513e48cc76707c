//! Synthetic discrete measures with known flatness behavior: Lipschitz
//! graphs, the 4-corner Cantor set, and random bounded densities on cubes.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Cube;
use crate::math;
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeneratorError {
    #[error("LipschitzViolated: secant slope {observed} exceeds declared constant {declared}")]
    LipschitzViolated { observed: f64, declared: f64 },
    #[error("TooDeep: generation {generation} exceeds the supported maximum {max}")]
    TooDeep { generation: u32, max: u32 },
}

/// Description of a weighted Lipschitz graph measure `g · area` over the
/// graph of `A : ℝⁿ → ℝ^{d−n}` sampled on a uniform grid.
pub struct GraphSpec {
    /// Domain dimension of the graph.
    pub n: usize,
    /// Ambient dimension; the profile supplies the remaining `d − n` parts.
    pub d: usize,
    /// The graph profile `A`.
    pub profile: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    /// Declared Lipschitz constant of `A`, verified on grid secants.
    pub lipschitz_constant: f64,
    /// Parameter domain (a cube in ℝⁿ).
    pub domain: Cube,
    /// Atoms per axis.
    pub resolution: usize,
    /// Surface density `g`.
    pub density: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Valid range `[g_min, g_max]` of the density.
    pub density_bounds: (f64, f64),
}

impl core::fmt::Debug for GraphSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GraphSpec")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .field("domain", &self.domain)
            .field("resolution", &self.resolution)
            .field("density_bounds", &self.density_bounds)
            .finish_non_exhaustive()
    }
}

impl GraphSpec {
    /// The flat line: `A ≡ 0`, `g ≡ 1` on `[0, 1)`, so the output is the
    /// uniform unit-mass measure on the segment.
    pub fn flat(resolution: usize) -> Self {
        Self {
            n: 1,
            d: 2,
            profile: Box::new(|_| alloc::vec![0.0]),
            lipschitz_constant: 0.0,
            domain: Cube::new(alloc::vec![0.0], 1.0),
            resolution,
            density: Box::new(|_| 1.0),
            density_bounds: (1.0, 1.0),
        }
    }

    /// A smooth wave `A(x) = (lip / 2π) · sin(2πx)` on `[0, 1)` whose slope
    /// never exceeds `lip`.
    pub fn wave(lip: f64, resolution: usize) -> Self {
        assert!(lip >= 0.0);
        Self {
            n: 1,
            d: 2,
            profile: Box::new(move |x: &[f64]| {
                let t = 2.0 * core::f64::consts::PI * x[0];
                alloc::vec![lip / (2.0 * core::f64::consts::PI) * math::sin(t)]
            }),
            lipschitz_constant: lip,
            domain: Cube::new(alloc::vec![0.0], 1.0),
            resolution,
            density: Box::new(|_| 1.0),
            density_bounds: (1.0, 1.0),
        }
    }

    /// The polyline tent `A(x) = lip · |x − ½|` on `[0, 1)`.
    pub fn tent(lip: f64, resolution: usize) -> Self {
        assert!(lip >= 0.0);
        Self {
            n: 1,
            d: 2,
            profile: Box::new(move |x: &[f64]| alloc::vec![lip * math::abs(x[0] - 0.5)]),
            lipschitz_constant: lip,
            domain: Cube::new(alloc::vec![0.0], 1.0),
            resolution,
            density: Box::new(|_| 1.0),
            density_bounds: (1.0, 1.0),
        }
    }
}

/// A generated graph measure together with the regularity constant observed
/// by the spot check.
#[derive(Debug, Clone)]
pub struct GraphSample {
    pub measure: DiscreteMeasure,
    /// Smallest `c₀` with `mass(B(x, r))/rⁿ ∈ [1/c₀, c₀]` over 50 seeded
    /// (center, radius) probes at resolved scales.
    pub ad_constant: f64,
}

fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Samples the graph measure `g · ℋⁿ` restricted to the graph of `A`.
///
/// Atoms sit at `(x, A(x))` over cell centers; each carries
/// `g(x) · cellⁿ · √(1 + Σ slopes²)` with secant slopes between adjacent
/// grid sites, so polyline profiles are handled without derivatives. The
/// declared Lipschitz constant is verified against all grid secants, and a
/// seeded spot check measures the mass-to-`rⁿ` ratio on 50 balls.
pub fn gen_graph(spec: &GraphSpec) -> Result<GraphSample, GeneratorError> {
    let n = spec.n;
    let m = spec.d - n;
    assert!(n >= 1 && m >= 1, "graph needs 1 <= n < d");
    assert_eq!(spec.domain.dim(), n);
    assert!(spec.resolution >= 2, "need at least two atoms per axis");
    let res = spec.resolution;
    let h = spec.domain.side() / res as f64;
    let total: usize = res.pow(n as u32);

    // Evaluate the profile on the whole grid first.
    let mut sites: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut idx = alloc::vec![0usize; n];
    for _ in 0..total {
        let x: Vec<f64> = idx
            .iter()
            .zip(spec.domain.origin())
            .map(|(k, a)| a + (*k as f64 + 0.5) * h)
            .collect();
        let a = (spec.profile)(&x);
        assert_eq!(a.len(), m, "profile must produce d - n coordinates");
        sites.push(x);
        values.push(a);
        let mut axis = 0;
        while axis < n {
            idx[axis] += 1;
            if idx[axis] < res {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
    let stride = |axis: usize| res.pow(axis as u32);

    // Secant slopes between adjacent sites both verify the declared
    // Lipschitz constant and feed the area factor.
    let slope = |i: usize, axis: usize| -> f64 {
        let k = (i / stride(axis)) % res;
        let j = if k + 1 < res { i + stride(axis) } else { i - stride(axis) };
        math::dist(&values[i], &values[j]) / h
    };
    for i in 0..total {
        for axis in 0..n {
            let s = slope(i, axis);
            if s > spec.lipschitz_constant * (1.0 + 1e-9) + 1e-15 {
                return Err(GeneratorError::LipschitzViolated {
                    observed: s,
                    declared: spec.lipschitz_constant,
                });
            }
        }
    }

    let mut coords = Vec::with_capacity(total * spec.d);
    let mut weights = Vec::with_capacity(total);
    let cell = math::powf(h, n as f64);
    let (g_min, g_max) = spec.density_bounds;
    assert!(g_min > 0.0 && g_min <= g_max);
    for i in 0..total {
        let g = (spec.density)(&sites[i]);
        assert!(
            (g_min - 1e-12..=g_max + 1e-12).contains(&g),
            "density sample outside declared bounds"
        );
        let slopes_sq: f64 = (0..n).map(|a| slope(i, a) * slope(i, a)).sum();
        let area = math::sqrt(1.0 + slopes_sq);
        coords.extend_from_slice(&sites[i]);
        coords.extend_from_slice(&values[i]);
        weights.push(g * cell * area);
    }
    let measure = DiscreteMeasure::from_flat(spec.d, coords, weights).expect("finite grid");

    // Regularity spot check at resolved scales.
    let mut rng = ChaCha8Rng::seed_from_u64(0xAD5EED);
    let r_min = 8.0 * h;
    let r_max = spec.domain.side() / 2.0;
    let mut c0: f64 = 1.0;
    if r_min < r_max {
        for _ in 0..50 {
            let center = measure.point((uniform01(&mut rng) * total as f64) as usize % total).to_vec();
            let r = r_min * math::powf(r_max / r_min, uniform01(&mut rng));
            let mass: f64 = measure
                .iter()
                .filter(|(x, _)| math::dist(x, &center) <= r)
                .map(|(_, w)| w)
                .sum();
            let ratio = mass / math::powf(r, n as f64);
            c0 = c0.max(ratio).max(1.0 / ratio);
        }
    }
    Ok(GraphSample { measure, ad_constant: c0 })
}

/// The 4-corner Cantor measure at a given generation: each square splits
/// into its 4 quarter-side corner squares; atoms sit at the cell centers
/// with weight `4^{-k}`. Coordinates are built from integers and scaled by
/// a single power of two, so atoms land on the `4^{-k}` lattice exactly.
pub fn gen_cantor(generation: u32) -> Result<DiscreteMeasure, GeneratorError> {
    const MAX: u32 = 8;
    if generation > MAX {
        return Err(GeneratorError::TooDeep { generation, max: MAX });
    }
    let k = generation;
    let mut corners: Vec<(u64, u64)> = alloc::vec![(0, 0)];
    for _ in 0..k {
        let mut next = Vec::with_capacity(corners.len() * 4);
        for (cx, cy) in corners {
            for off in [(0u64, 0u64), (3, 0), (0, 3), (3, 3)] {
                next.push((4 * cx + off.0, 4 * cy + off.1));
            }
        }
        corners = next;
    }
    // Cell side 4^{-k}; center = corner + half cell = (2c + 1) / 2·4^k.
    let denom = 2.0 * math::powf(4.0, k as f64);
    let weight = 1.0 / math::powf(4.0, k as f64);
    let mut coords = Vec::with_capacity(corners.len() * 2);
    for (cx, cy) in &corners {
        coords.push((2 * cx + 1) as f64 / denom);
        coords.push((2 * cy + 1) as f64 / denom);
    }
    let weights = alloc::vec![weight; corners.len()];
    Ok(DiscreteMeasure::from_flat(2, coords, weights).expect("finite lattice"))
}

/// Grid discretization of a random bounded density on a cube: cell centers,
/// weight = cell volume × a uniform draw from `[low, high]`. Deterministic
/// per seed.
pub fn gen_density_cube(
    cube: &Cube,
    bounds: (f64, f64),
    resolution: usize,
    seed: u64,
) -> DiscreteMeasure {
    let (low, high) = bounds;
    assert!(0.0 < low && low <= high, "need 0 < low <= high");
    assert!(resolution >= 1);
    let d = cube.dim();
    let res = resolution;
    let h = cube.side() / res as f64;
    let cell = math::powf(h, d as f64);
    let total = res.pow(d as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(total * d);
    let mut weights = Vec::with_capacity(total);
    let mut idx = alloc::vec![0usize; d];
    for _ in 0..total {
        for (k, a) in idx.iter().zip(cube.origin()) {
            coords.push(a + (*k as f64 + 0.5) * h);
        }
        weights.push(cell * (low + (high - low) * uniform01(&mut rng)));
        let mut axis = 0;
        while axis < d {
            idx[axis] += 1;
            if idx[axis] < res {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
    DiscreteMeasure::from_flat(d, coords, weights).expect("finite grid")
}

/// Multiplies each weight by an independent uniform draw from
/// `[1 − rel, 1 + rel]`; positions are untouched. Deterministic per seed.
pub fn perturb_weights(measure: &DiscreteMeasure, rel: f64, seed: u64) -> DiscreteMeasure {
    assert!((0.0..1.0).contains(&rel));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = measure
        .weights()
        .iter()
        .map(|w| w * (1.0 - rel + 2.0 * rel * uniform01(&mut rng)))
        .collect();
    DiscreteMeasure::from_flat(measure.dim(), measure.coords().to_vec(), weights)
        .expect("perturbed weights stay positive")
}
