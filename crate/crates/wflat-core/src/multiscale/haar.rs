//! Martingale (Haar) differences on dyadic grids.
//!
//! [`GridFunction`] stores one value per finest-level cell. All aggregates
//! are computed hierarchically — a cube's sum folds its children's sums in a
//! fixed order, and means divide by the cell count, a power of two. Division
//! by a power of two and doubling are exact in binary floating point, so on
//! grids whose values are integers (or dyadic rationals of bounded size) the
//! difference operators satisfy orthogonality and reconstruction *exactly*,
//! not just to rounding.

use alloc::vec::Vec;

use super::{DyadicTree, MultiscaleError};
use crate::geometry::{Cube, DyadicCube};
use crate::math;
use crate::measure::DiscreteMeasure;

/// A piecewise-constant function on the level-`level` dyadic grid of `root`.
///
/// Values are stored axis-0-fastest: the cell with integer coordinates
/// `(k_0, …, k_{d-1})` lives at flat index `k_0 + s·k_1 + s²·k_2 + …` where
/// `s = 2^level` is the per-axis cell count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    root: Cube,
    level: u32,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(root: Cube, level: u32, values: Vec<f64>) -> Self {
        let d = root.dim();
        assert!(level as usize * d <= 40, "grid has too many cells");
        let cells = 1usize << (level as usize * d);
        assert_eq!(values.len(), cells, "value count must match the grid");
        Self { root, level, values }
    }

    pub fn constant(root: Cube, level: u32, value: f64) -> Self {
        let d = root.dim();
        let cells = 1usize << (level as usize * d);
        Self::new(root, level, alloc::vec![value; cells])
    }

    /// Samples `f` at every cell center.
    pub fn from_fn<F>(root: Cube, level: u32, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> f64,
    {
        let d = root.dim();
        let cells = 1usize << (level as usize * d);
        let mut values = Vec::with_capacity(cells);
        let mut scratch = alloc::vec![0.0; d];
        for flat in 0..cells {
            cell_center(&root, level, flat, &mut scratch);
            values.push(f(&scratch));
        }
        Self::new(root, level, values)
    }

    pub fn root(&self) -> &Cube {
        &self.root
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn per_axis(&self) -> usize {
        1usize << self.level
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        let h = self.root.side() / self.per_axis() as f64;
        (0..self.dim()).fold(1.0, |acc, _| acc * h)
    }

    /// Sum of the cell values inside `q`, folded child by child so that the
    /// grouping is identical at every scale.
    pub fn cell_sum(&self, q: &DyadicCube) -> f64 {
        self.check_cube(q);
        self.sum_rec(q)
    }

    fn sum_rec(&self, q: &DyadicCube) -> f64 {
        if q.level() == self.level {
            return self.values[self.flat_of(q)];
        }
        q.children().iter().map(|p| self.sum_rec(p)).sum()
    }

    /// Mean of the function over `q`: the hierarchical sum divided by the
    /// cell count, a power of two.
    pub fn mean_over(&self, q: &DyadicCube) -> f64 {
        self.check_cube(q);
        let shift = (self.level - q.level()) as usize * self.dim();
        self.sum_rec(q) / (1u64 << shift) as f64
    }

    /// Mean over the whole root cube.
    pub fn mean(&self) -> f64 {
        self.mean_over(&DyadicCube::root(&self.root))
    }

    /// L² inner product with the Lebesgue cell volume as reference.
    pub fn inner(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.root, other.root, "grids must share a root");
        assert_eq!(self.level, other.level, "grids must share a level");
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot * self.cell_volume()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn plus(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn minus(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.root, other.root, "grids must share a root");
        assert_eq!(self.level, other.level, "grids must share a level");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridFunction { root: self.root.clone(), level: self.level, values }
    }

    fn check_cube(&self, q: &DyadicCube) {
        assert_eq!(q.root_cube(), self.root, "cube from a different lattice");
        assert!(q.level() <= self.level, "cube finer than the grid");
    }

    fn flat_of(&self, q: &DyadicCube) -> usize {
        let s = self.per_axis();
        q.index().iter().rev().fold(0usize, |acc, &k| acc * s + k as usize)
    }

    /// Calls `f` with the flat index of every grid cell inside `q`.
    fn for_each_cell_in(&self, q: &DyadicCube, mut f: impl FnMut(usize)) {
        self.check_cube(q);
        let d = self.dim();
        let shift = self.level - q.level();
        let span = 1usize << shift;
        let base: Vec<usize> = q.index().iter().map(|&k| (k as usize) << shift).collect();
        let mut off = alloc::vec![0usize; d];
        loop {
            let mut flat = 0usize;
            for a in (0..d).rev() {
                flat = flat * self.per_axis() + base[a] + off[a];
            }
            f(flat);
            let mut a = 0;
            while a < d {
                off[a] += 1;
                if off[a] < span {
                    break;
                }
                off[a] = 0;
                a += 1;
            }
            if a == d {
                break;
            }
        }
    }
}

fn cell_center(root: &Cube, level: u32, flat: usize, out: &mut [f64]) {
    let s = 1usize << level;
    let h = root.side() / s as f64;
    let mut rest = flat;
    for (a, o) in out.iter_mut().enumerate() {
        let k = rest % s;
        rest /= s;
        *o = root.origin()[a] + (k as f64 + 0.5) * h;
    }
}

/// The martingale difference of `g` at `q`: on each child `P` the value
/// `mean_P(g) − mean_Q(g)`, and zero outside `q`.
pub fn haar_delta(g: &GridFunction, q: &DyadicCube) -> GridFunction {
    assert!(q.level() < g.level(), "children of q must be grid-resolvable");
    let mq = g.mean_over(q);
    let mut values = alloc::vec![0.0; g.values().len()];
    for p in q.children() {
        let v = g.mean_over(&p) - mq;
        g.for_each_cell_in(&p, |flat| values[flat] = v);
    }
    GridFunction::new(g.root().clone(), g.level(), values)
}

/// The sigma-weighted difference of `tau` at `q`: for each child `P` of `q`
/// the constant `tau(P)/sigma(P) − tau(Q)/sigma(Q)` (zero outside `q`),
/// reported per child.
pub fn delta_sigma(
    sigma: &DiscreteMeasure,
    tau: &DiscreteMeasure,
    q: &DyadicCube,
) -> Result<Vec<(DyadicCube, f64)>, MultiscaleError> {
    let sq = sigma.mass_in_cube(&q.cube());
    if sq <= 0.0 {
        return Err(MultiscaleError::ZeroSigmaMass);
    }
    let ratio_q = tau.mass_in_cube(&q.cube()) / sq;
    let mut out = Vec::new();
    for p in q.children() {
        let sp = sigma.mass_in_cube(&p.cube());
        if sp <= 0.0 {
            return Err(MultiscaleError::ZeroSigmaMass);
        }
        let v = tau.mass_in_cube(&p.cube()) / sp - ratio_q;
        out.push((p, v));
    }
    Ok(out)
}

/// The energy functional controlling `W_2(sigma, tau)²` on a stopping-time
/// tree. With `R` the root, `ℓ` the side length, `m_Q` the mean density
/// `mass/volume`, and `Δ_Q` the Lebesgue-reference martingale difference of a
/// measure's density, this returns
///
/// ```text
///   Σ_{Q member} (1/m_Q sigma) ‖Δ_Q(sigma−tau)‖² ℓ(Q)^{2−a} ℓ(R)^a
/// + Σ_{Q member} ((m_Q sigma − m_Q tau)² / (m_Q sigma)³) ‖Δ_Q sigma‖² ℓ(Q)^{2−a} ℓ(R)^a
/// + Σ_{Q stopping} ℓ(Q)² tau(Q)
/// ```
///
/// where `a = alpha_exp` and `‖·‖²` is the Lebesgue L² norm of the
/// piecewise-constant difference. Requires the two measures to share their
/// root mass and to be `delta`-comparable on every member, with `delta`
/// taken from the tree.
pub fn key_lemma_rhs(
    sigma: &DiscreteMeasure,
    tau: &DiscreteMeasure,
    tree: &DyadicTree,
    alpha_exp: f64,
) -> Result<f64, MultiscaleError> {
    let dim = sigma.dim();
    let root_cube = tree.root().cube();
    let sigma_root = sigma.mass_in_cube(&root_cube);
    let tau_root = tau.mass_in_cube(&root_cube);
    let scale_ref = sigma_root.abs().max(tau_root.abs()).max(1e-300);
    if (sigma_root - tau_root).abs() > 1e-9 * scale_ref {
        return Err(MultiscaleError::MassMismatch { sigma: sigma_root, tau: tau_root });
    }
    let delta = tree.delta();
    let side_r = tree.root().side();
    let mut total = 0.0;
    for q in tree.members() {
        let cube = q.cube();
        let sq = sigma.mass_in_cube(&cube);
        if sq <= 0.0 {
            return Err(MultiscaleError::ZeroSigmaMass);
        }
        let tq = tau.mass_in_cube(&cube);
        let ratio = tq / sq;
        if ratio < delta * (1.0 - 1e-12) || ratio > (1.0 + 1e-12) / delta {
            return Err(MultiscaleError::ComparabilityViolated { id: q.id(), ratio, delta });
        }
        let vol_q = cube.volume(dim);
        let mean_sigma = sq / vol_q;
        let mean_tau = tq / vol_q;
        let mut diff_norm = 0.0;
        let mut sigma_norm = 0.0;
        for p in q.children() {
            let pc = p.cube();
            let vol_p = pc.volume(dim);
            let sp = sigma.mass_in_cube(&pc);
            let tp = tau.mass_in_cube(&pc);
            let d_diff = (sp - tp) / vol_p - (sq - tq) / vol_q;
            let d_sigma = sp / vol_p - mean_sigma;
            diff_norm += d_diff * d_diff * vol_p;
            sigma_norm += d_sigma * d_sigma * vol_p;
        }
        let weight =
            math::powf(q.side(), 2.0 - alpha_exp) * math::powf(side_r, alpha_exp);
        let mean_gap = mean_sigma - mean_tau;
        total += diff_norm / mean_sigma * weight;
        total += mean_gap * mean_gap / (mean_sigma * mean_sigma * mean_sigma)
            * sigma_norm
            * weight;
    }
    for q in tree.stopping() {
        let tq = tau.mass_in_cube(&q.cube());
        total += q.side() * q.side() * tq;
    }
    Ok(total)
}
