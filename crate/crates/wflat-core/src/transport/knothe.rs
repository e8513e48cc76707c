//! The Knothe–Rosenblatt rearrangement between grid densities on a cube.
//!
//! Source and target live on a common uniform grid; within each cell mass
//! is spread uniformly, so all conditional CDFs are piecewise linear and
//! their inverses are single-valued (flat stretches resolve to the left
//! endpoint). The map is triangular: coordinate `j` is the monotone
//! rearrangement of the conditional distribution given the first `j − 1`
//! source coordinates, matched against the target conditional given where
//! those coordinates landed.

use alloc::vec::Vec;

use super::{TransportError, TransportMap};
use crate::geometry::Cube;
use crate::math;
use crate::measure::{DiscreteMeasure, ScalarField};

/// The triangular rearrangement map `U` with `U#σ₀ = (1 + h)σ₀`.
#[derive(Debug, Clone)]
pub struct KnotheMap {
    cube: Cube,
    dim: usize,
    res: usize,
    /// Source cell masses, flat-indexed with axis 0 fastest.
    source: Vec<f64>,
    /// Target cell masses `(1 + h) · source`, same layout.
    target: Vec<f64>,
}

impl KnotheMap {
    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    pub fn target_cell_masses(&self) -> &[f64] {
        &self.target
    }

    fn cell_width(&self) -> f64 {
        self.cube.side() / self.res as f64
    }

    fn flat(&self, cells: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for c in cells {
            idx += c * stride;
            stride *= self.res;
        }
        idx
    }

    /// Marginal of `grid` along `axis`, conditioned on the cells in
    /// `prefix` (axes before `axis`), summed over the axes after it.
    fn cond_marginal(&self, grid: &[f64], axis: usize, prefix: &[usize]) -> Vec<f64> {
        debug_assert_eq!(prefix.len(), axis);
        let res = self.res;
        let mut base = 0;
        let mut stride = 1;
        for &c in prefix {
            base += c * stride;
            stride *= res;
        }
        let axis_stride = stride;
        let tail_axes = self.dim - axis - 1;
        let tail_count = res.pow(tail_axes as u32);
        let mut out = alloc::vec![0.0; res];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            for t in 0..tail_count {
                let mut idx = base + c * axis_stride;
                let mut tt = t;
                let mut st = axis_stride * res;
                for _ in 0..tail_axes {
                    idx += (tt % res) * st;
                    st *= res;
                    tt /= res;
                }
                sum += grid[idx];
            }
            *slot = sum;
        }
        out
    }

    /// Applies the rearrangement to a point of the cube.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let h = self.cell_width();
        let res = self.res;
        let mut u = alloc::vec![0.0; self.dim];
        let mut src_cells: Vec<usize> = Vec::with_capacity(self.dim);
        let mut tgt_cells: Vec<usize> = Vec::with_capacity(self.dim);
        for axis in 0..self.dim {
            let origin = self.cube.origin()[axis];
            let s_cond = self.cond_marginal(&self.source, axis, &src_cells);
            let t_cond = self.cond_marginal(&self.target, axis, &tgt_cells);
            let s_total: f64 = s_cond.iter().sum();
            let t_total: f64 = t_cond.iter().sum();
            assert!(s_total > 0.0, "source grid must be strictly positive");

            let ci = (math::floor((x[axis] - origin) / h) as i64).clamp(0, res as i64 - 1) as usize;
            let below: f64 = s_cond[..ci].iter().sum();
            let frac = ((x[axis] - (origin + ci as f64 * h)) / h).clamp(0.0, 1.0);
            let quantile = (below + frac * s_cond[ci]) / s_total;

            // Invert the target conditional CDF at the same quantile; flat
            // stretches (mass-free cells) resolve to their left endpoint.
            let want = (quantile * t_total).min(t_total);
            let mut acc = 0.0;
            let mut landing = res - 1;
            let mut inner = 1.0;
            for (c, &tc) in t_cond.iter().enumerate() {
                if acc + tc >= want || c == res - 1 {
                    landing = c;
                    inner = if tc > 0.0 { ((want - acc) / tc).clamp(0.0, 1.0) } else { 0.0 };
                    break;
                }
                acc += tc;
            }
            u[axis] = origin + (landing as f64 + inner) * h;
            src_cells.push(ci);
            tgt_cells.push(landing);
        }
        u
    }

    /// Evaluates the map on every atom of an aligned source measure.
    pub fn transport_map(&self, source: &DiscreteMeasure) -> TransportMap {
        let mut targets = Vec::with_capacity(source.len() * self.dim);
        for (x, _) in source.iter() {
            targets.extend(self.apply(x));
        }
        TransportMap::new(self.dim, targets)
    }

    /// Exact per-cell masses of `U#σ₀` (cell mass spread uniformly), via
    /// recursive overlap of normalized conditional CDF intervals. By
    /// construction these telescope to the target cell masses; comparing
    /// the two verifies the rearrangement end to end.
    pub fn pushforward_cell_masses(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.target.len()];
        let total: f64 = self.source.iter().sum();
        let mut src_cells = Vec::with_capacity(self.dim);
        let mut tgt_cells = Vec::with_capacity(self.dim);
        self.route(0, &mut src_cells, &mut tgt_cells, total, &mut out);
        out
    }

    fn route(
        &self,
        axis: usize,
        src_cells: &mut Vec<usize>,
        tgt_cells: &mut Vec<usize>,
        mass: f64,
        out: &mut [f64],
    ) {
        if axis == self.dim {
            out[self.flat(tgt_cells)] += mass;
            return;
        }
        let s_cond = self.cond_marginal(&self.source, axis, src_cells);
        let t_cond = self.cond_marginal(&self.target, axis, tgt_cells);
        let s_total: f64 = s_cond.iter().sum();
        let t_total: f64 = t_cond.iter().sum();
        // Normalized CDF breakpoints on both sides.
        let breaks = |cond: &[f64], total: f64| -> Vec<f64> {
            let mut b = Vec::with_capacity(cond.len() + 1);
            let mut acc = 0.0;
            b.push(0.0);
            for w in cond {
                acc += w / total;
                b.push(acc);
            }
            b
        };
        let sb = breaks(&s_cond, s_total);
        let tb = breaks(&t_cond, t_total);
        for is in 0..self.res {
            for it in 0..self.res {
                let lo = sb[is].max(tb[it]);
                let hi = sb[is + 1].min(tb[it + 1]);
                if hi > lo {
                    src_cells.push(is);
                    tgt_cells.push(it);
                    self.route(axis + 1, src_cells, tgt_cells, mass * (hi - lo), out);
                    src_cells.pop();
                    tgt_cells.pop();
                }
            }
        }
    }
}

/// Builds the Knothe–Rosenblatt map carrying `σ₀` to `(1 + h)σ₀` on the
/// grid inferred from `σ₀`'s atoms (cell centers of a uniform lattice over
/// the cube, strictly positive weights).
pub fn knothe_map(
    cube: &Cube,
    sigma0: &DiscreteMeasure,
    h: &ScalarField,
) -> Result<KnotheMap, TransportError> {
    let dim = cube.dim();
    assert_eq!(sigma0.dim(), dim);
    assert!(!sigma0.is_empty(), "grid measure required");
    let len = sigma0.len();
    let res = math::round(math::powf(len as f64, 1.0 / dim as f64)) as usize;
    assert_eq!(res.pow(dim as u32), len, "grid measure required: atom count must be res^dim");
    let hcell = cube.side() / res as f64;

    let mut source = alloc::vec![0.0; len];
    let mut target = alloc::vec![0.0; len];
    let mut hmax: f64 = 0.0;
    let mut mean = 0.0;
    for (x, w) in sigma0.iter() {
        assert!(w > 0.0, "grid measure required: weights must be strictly positive");
        let mut flat = 0;
        let mut stride = 1;
        for (xi, oi) in x.iter().zip(cube.origin()) {
            let c = (math::floor((xi - oi) / hcell) as i64).clamp(0, res as i64 - 1) as usize;
            let center = oi + (c as f64 + 0.5) * hcell;
            assert!(
                math::abs(xi - center) <= 1e-6 * hcell,
                "grid measure required: atoms must sit at cell centers"
            );
            flat += c * stride;
            stride *= res;
        }
        assert!(source[flat] == 0.0, "grid measure required: duplicate cell");
        let hv = h.eval(x);
        hmax = hmax.max(math::abs(hv));
        mean += w * hv;
        source[flat] = w;
        target[flat] = w * (1.0 + hv);
    }
    if hmax > 1.0 + 1e-12 {
        return Err(TransportError::HTooLarge { max: hmax });
    }
    if math::abs(mean) > 1e-9 * sigma0.total_mass() {
        return Err(TransportError::MeanNotZero { mean });
    }
    Ok(KnotheMap { cube: cube.clone(), dim, res, source, target })
}
