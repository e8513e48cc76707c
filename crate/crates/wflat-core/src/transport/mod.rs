//! Exact discrete optimal transport: W_p plans via the transportation
//! simplex, an independent brute-force oracle, the Kantorovich dual lower
//! bound for W₁, and the Knothe–Rosenblatt rearrangement.

mod brute;
mod knothe;
pub(crate) mod simplex;

pub use brute::brute_force_wasserstein;
pub use knothe::{knothe_map, KnotheMap};

use alloc::vec::Vec;

use crate::math;
use crate::measure::{DiscreteMeasure, ScalarField};

/// Relative tolerance for mass balance between transported measures.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error("MassMismatch: source mass {source_mass} and target mass {target_mass} differ beyond 1e-9 relative")]
    MassMismatch { source_mass: f64, target_mass: f64 },
    #[error("EmptyMeasure: transport requires non-empty measures")]
    EmptyMeasure,
    #[error("TooLarge: support size {size} exceeds the cap {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("NotLipschitz: observed slope {observed} exceeds 1 between support points")]
    NotLipschitz { observed: f64 },
    #[error("MeanNotZero: mean of h against the base measure is {mean}, not zero")]
    MeanNotZero { mean: f64 },
    #[error("HTooLarge: |h| reaches {max} > 1 on the grid")]
    HTooLarge { max: f64 },
}

/// An optimal coupling between two discrete measures.
///
/// `pairs` holds `(source index, target index, mass)` with nonnegative
/// masses whose row sums reproduce the source weights and column sums the
/// target weights (to 1e-9 relative). `cost` is the p-th root of
/// `Σ mass · |x − y|^p` — unnormalized, so measures of total mass M yield
/// mass-M costs.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub p: f64,
    pub cost: f64,
    pub pairs: Vec<(usize, usize, f64)>,
    pub source_mass: f64,
    pub target_mass: f64,
}

impl TransportPlan {
    /// Recomputes `Σ mass · |x − y|^p` from the pairs.
    pub fn cost_pth_power(&self, a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
        self.pairs
            .iter()
            .map(|&(i, j, m)| m * math::dist_pow(a.point(i), b.point(j), self.p))
            .sum()
    }

    /// Mass sent out of each source atom.
    pub fn row_sums(&self, source_len: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; source_len];
        for &(i, _, m) in &self.pairs {
            out[i] += m;
        }
        out
    }

    /// Mass received by each target atom.
    pub fn col_sums(&self, target_len: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; target_len];
        for &(_, j, m) in &self.pairs {
            out[j] += m;
        }
        out
    }
}

/// A pointwise transport assignment: each source atom is sent to one point.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap {
    dim: usize,
    targets: Vec<f64>,
}

impl TransportMap {
    pub fn new(dim: usize, targets: Vec<f64>) -> Self {
        assert_eq!(targets.len() % dim.max(1), 0);
        Self { dim, targets }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.dim..(i + 1) * self.dim]
    }

    /// The image measure: source weights at the assigned target points.
    pub fn push(&self, source: &DiscreteMeasure) -> DiscreteMeasure {
        assert_eq!(source.len(), self.len(), "map not defined on this measure");
        DiscreteMeasure::from_flat(self.dim, self.targets.clone(), source.weights().to_vec())
            .expect("map targets are finite")
    }
}

/// Displacement summary of a transport map against its source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementStats {
    /// `sup |Ux − x|` over source atoms.
    pub max: f64,
    /// `(Σ w |Ux − x|²)^{1/2}`.
    pub l2: f64,
}

/// Measures how far a map moves the atoms of its source.
pub fn displacement_stats(map: &TransportMap, source: &DiscreteMeasure) -> DisplacementStats {
    assert_eq!(source.len(), map.len(), "map not defined on this measure");
    let mut max: f64 = 0.0;
    let mut sq = 0.0;
    for (i, (x, w)) in source.iter().enumerate() {
        let d = math::dist(x, map.target(i));
        max = max.max(d);
        sq += w * d * d;
    }
    DisplacementStats { max, l2: math::sqrt(sq) }
}

fn check_balance(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<(f64, f64), TransportError> {
    if a.is_empty() || b.is_empty() {
        return Err(TransportError::EmptyMeasure);
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > MASS_TOLERANCE * ma.max(mb) {
        return Err(TransportError::MassMismatch { source_mass: ma, target_mass: mb });
    }
    Ok((ma, mb))
}

/// Exact W_p between equal-mass discrete measures.
///
/// Solves the transportation problem on the complete bipartite support
/// graph with costs `|x − y|^p` and returns an optimal plan; `cost` holds
/// `(Σ mass·|x−y|^p)^{1/p}`. Dense formulation, refused above 4,000 atoms
/// per side.
pub fn wasserstein(
    p: f64,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> Result<TransportPlan, TransportError> {
    assert!(p >= 1.0, "cost exponent must satisfy p >= 1");
    assert_eq!(a.dim(), b.dim(), "measures must share an ambient dimension");
    const CAP: usize = 4000;
    if a.len() > CAP || b.len() > CAP {
        return Err(TransportError::TooLarge { size: a.len().max(b.len()), cap: CAP });
    }
    let (ma, mb) = check_balance(a, b)?;

    // Drop zero-weight atoms; they carry no mass and would degenerate the
    // basis. Plan indices refer to the original atoms.
    let src: Vec<usize> = (0..a.len()).filter(|&i| a.weight(i) > 0.0).collect();
    let snk: Vec<usize> = (0..b.len()).filter(|&j| b.weight(j) > 0.0).collect();
    if src.is_empty() || snk.is_empty() {
        // Balanced, so both sides are massless: the empty plan is optimal.
        return Ok(TransportPlan { p, cost: 0.0, pairs: Vec::new(), source_mass: ma, target_mass: mb });
    }

    let supply: Vec<f64> = src.iter().map(|&i| a.weight(i)).collect();
    // Rescale demands so the instance balances exactly; the factor is within
    // 1e-9 of 1 by the balance check.
    let scale = ma / mb;
    let demand: Vec<f64> = snk.iter().map(|&j| b.weight(j) * scale).collect();
    let cost = |si: usize, tj: usize| math::dist_pow(a.point(src[si]), b.point(snk[tj]), p);

    let flows = simplex::solve(&supply, &demand, &cost);
    let mut pairs = Vec::with_capacity(flows.len());
    let mut total = 0.0;
    for (si, tj, m) in flows {
        if m > 0.0 {
            total += m * cost(si, tj);
            pairs.push((src[si], snk[tj], m));
        }
    }
    Ok(TransportPlan { p, cost: math::root_p(total, p), pairs, source_mass: ma, target_mass: mb })
}

/// Kantorovich dual lower bound for W₁: `|∫f da − ∫f db|` for a 1-Lipschitz
/// test function. The Lipschitz property is verified pairwise on the union
/// of supports; `NotLipschitz` reports the worst observed slope.
pub fn w1_dual_lower_bound(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    f: &ScalarField,
) -> Result<f64, TransportError> {
    assert_eq!(a.dim(), b.dim());
    let points: Vec<&[f64]> = a.iter().map(|(x, _)| x).chain(b.iter().map(|(x, _)| x)).collect();
    let values: Vec<f64> = points.iter().map(|x| f.eval(x)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = math::dist(points[i], points[j]);
            let df = math::abs(values[i] - values[j]);
            if df > d * (1.0 + 1e-9) + 1e-15 {
                worst = worst.max(if d > 0.0 { df / d } else { f64::INFINITY });
            }
        }
    }
    if worst > 0.0 {
        return Err(TransportError::NotLipschitz { observed: worst });
    }
    let ia: f64 = a.iter().zip(&values).map(|((_, w), v)| w * v).sum();
    let ib: f64 = b.iter().zip(values[a.len()..].iter()).map(|((_, w), v)| w * v).sum();
    Ok(math::abs(ia - ib))
}

/// Collapses a plan to a map by barycentric projection: each source atom is
/// sent to the mass-weighted mean of its targets. Atoms that move no mass
/// stay put.
pub fn barycentric_map(
    plan: &TransportPlan,
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
) -> TransportMap {
    let d = source.dim();
    let mut sums = alloc::vec![0.0; source.len() * d];
    let mut mass = alloc::vec![0.0; source.len()];
    for &(i, j, m) in &plan.pairs {
        mass[i] += m;
        for (s, y) in sums[i * d..(i + 1) * d].iter_mut().zip(target.point(j)) {
            *s += m * y;
        }
    }
    let mut targets = Vec::with_capacity(source.len() * d);
    for i in 0..source.len() {
        if mass[i] > 0.0 {
            targets.extend(sums[i * d..(i + 1) * d].iter().map(|s| s / mass[i]));
        } else {
            targets.extend_from_slice(source.point(i));
        }
    }
    TransportMap::new(d, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::boxed::Box;
    use alloc::vec;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        let pts: Vec<Vec<f64>> = points.iter().map(|x| vec![*x]).collect();
        DiscreteMeasure::new(1, &pts, weights).unwrap()
    }

    #[test]
    fn identical_measures_have_zero_cost_and_diagonal_plan() {
        let a = m1(&[0.0, 1.0, 2.5], &[0.2, 0.3, 0.5]);
        let plan = wasserstein(2.0, &a, &a).unwrap();
        assert_eq!(plan.cost, 0.0);
        let rows = plan.row_sums(3);
        let cols = plan.col_sums(3);
        for i in 0..3 {
            assert!((rows[i] - a.weight(i)).abs() < 1e-12);
            assert!((cols[i] - a.weight(i)).abs() < 1e-12);
        }
        assert!(plan.pairs.iter().all(|&(i, j, _)| i == j));
    }

    #[test]
    fn single_pair_is_the_euclidean_distance() {
        let a = DiscreteMeasure::new(2, &[vec![0.0, 0.0]], &[1.0]).unwrap();
        let b = DiscreteMeasure::new(2, &[vec![3.0, 4.0]], &[1.0]).unwrap();
        let plan = wasserstein(2.0, &a, &b).unwrap();
        assert!((plan.cost - 5.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_matching_wins_on_shifted_triple() {
        let w = [1.0 / 3.0; 3];
        let a = m1(&[0.0, 1.0, 2.0], &w);
        let b = m1(&[0.5, 1.5, 2.5], &w);
        let plan = wasserstein(2.0, &a, &b).unwrap();
        assert!((plan.cost - 0.5).abs() < 1e-12);
        // The optimal coupling is the order-preserving one.
        for &(i, j, m) in &plan.pairs {
            if m > 1e-15 {
                assert_eq!(i, j);
            }
        }
    }

    #[test]
    fn split_atom_has_unit_cost() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[-1.0, 1.0], &[0.5, 0.5]);
        let plan = wasserstein(2.0, &a, &b).unwrap();
        assert!((plan.cost - 1.0).abs() < 1e-12);
        assert_eq!(plan.pairs.len(), 2);
    }

    #[test]
    fn mass_two_pair_keeps_unnormalized_cost() {
        let a = m1(&[0.0, 1.0], &[1.0, 1.0]);
        let b = m1(&[2.0, 3.0], &[1.0, 1.0]);
        let plan = wasserstein(1.0, &a, &b).unwrap();
        assert!((plan.cost - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mass_mismatch_and_empty_inputs_are_rejected() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[1.0], &[2.0]);
        assert!(matches!(
            wasserstein(2.0, &a, &b),
            Err(TransportError::MassMismatch { .. })
        ));
        let empty = DiscreteMeasure::empty(1);
        assert!(matches!(wasserstein(2.0, &a, &empty), Err(TransportError::EmptyMeasure)));
    }

    #[test]
    fn plan_cost_is_recomputable_from_pairs() {
        let a = m1(&[0.0, 0.7, 1.9, 3.1], &[0.4, 0.1, 0.3, 0.2]);
        let b = m1(&[0.2, 1.1, 2.8], &[0.5, 0.25, 0.25]);
        for p in [1.0, 2.0] {
            let plan = wasserstein(p, &a, &b).unwrap();
            let direct = plan.cost_pth_power(&a, &b);
            let from_cost = math::powf(plan.cost, p);
            assert!((direct - from_cost).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn dual_bound_matches_w1_for_the_optimal_potential() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[1.0], &[1.0]);
        let f = ScalarField::new(Box::new(|x: &[f64]| x[0]));
        let lb = w1_dual_lower_bound(&a, &b, &f).unwrap();
        assert!((lb - 1.0).abs() < 1e-12);
        let constant = ScalarField::constant(3.0);
        assert_eq!(w1_dual_lower_bound(&a, &b, &constant).unwrap(), 0.0);
    }

    #[test]
    fn dual_bound_rejects_steep_functions() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[1.0], &[1.0]);
        let f = ScalarField::new(Box::new(|x: &[f64]| 2.0 * x[0]));
        assert!(matches!(
            w1_dual_lower_bound(&a, &b, &f),
            Err(TransportError::NotLipschitz { .. })
        ));
    }

    #[test]
    fn dual_bound_stays_below_w1_on_a_random_quadruple() {
        let a = m1(&[0.1, 0.5, 1.3, 2.0], &[0.3, 0.2, 0.25, 0.25]);
        let b = m1(&[0.0, 0.9, 1.6, 2.2], &[0.25, 0.25, 0.25, 0.25]);
        let f = ScalarField::new(Box::new(|x: &[f64]| math::abs(x[0] - 0.7)));
        let lb = w1_dual_lower_bound(&a, &b, &f).unwrap();
        let w1 = wasserstein(1.0, &a, &b).unwrap().cost;
        assert!(lb <= w1 + 1e-9);
    }

    #[test]
    fn displacement_stats_for_identity_and_translation() {
        let src = DiscreteMeasure::new(2, &[vec![0.0, 0.0], vec![1.0, 1.0]], &[1.0, 3.0]).unwrap();
        let id = TransportMap::new(2, src.coords().to_vec());
        let stats = displacement_stats(&id, &src);
        assert_eq!(stats.max, 0.0);
        assert_eq!(stats.l2, 0.0);

        let shifted: Vec<f64> = src.coords().iter().enumerate()
            .map(|(k, c)| if k % 2 == 0 { c + 3.0 } else { c + 4.0 })
            .collect();
        let tr = TransportMap::new(2, shifted);
        let stats = displacement_stats(&tr, &src);
        assert!((stats.max - 5.0).abs() < 1e-12);
        assert!((stats.l2 - 5.0 * 2.0).abs() < 1e-12); // 5·√mass, mass 4
    }

    #[test]
    fn barycentric_map_averages_split_targets() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[-1.0, 1.0], &[0.5, 0.5]);
        let plan = wasserstein(2.0, &a, &b).unwrap();
        let map = barycentric_map(&plan, &a, &b);
        assert!(math::abs(map.target(0)[0]) < 1e-12);
    }

    #[test]
    fn pushing_a_map_transfers_weights() {
        let src = m1(&[0.0, 1.0], &[0.25, 0.75]);
        let map = TransportMap::new(1, vec![10.0, 20.0]);
        let img = map.push(&src);
        assert_eq!(img.point(0), &[10.0]);
        assert_eq!(img.weight(1), 0.75);
    }
}
