//! Independent optimal-transport oracle for tiny instances.
//!
//! Enumerates every basic feasible solution of the transportation polytope
//! — one per spanning tree of the complete bipartite support graph — and
//! keeps the cheapest feasible one. Shares no code with the simplex solver,
//! so agreement between the two is meaningful evidence of correctness.

use alloc::vec::Vec;

use super::{check_balance, TransportError};
use crate::math;
use crate::measure::DiscreteMeasure;

const CAP: usize = 6;

/// Union-find without path compression so choices can be undone exactly.
struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: alloc::vec![1; n] }
    }

    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Joins two components; returns the attached root for later undo, or
    /// `None` if the edge would close a cycle.
    fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (small, big) = if self.size[ra] <= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        Some(small)
    }

    fn undo(&mut self, attached: usize) {
        let big = self.parent[attached];
        self.parent[attached] = attached;
        self.size[big] -= self.size[attached];
    }
}

/// Solves the unique flow on a spanning tree by leaf elimination; returns
/// the cost, or `None` when some flow is negative (infeasible vertex).
fn tree_cost(
    edges: &[(usize, usize)],
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
    feas_tol: f64,
) -> Option<f64> {
    let (m, n) = (supply.len(), demand.len());
    let total = m + n;
    let mut adj: Vec<Vec<usize>> = alloc::vec![Vec::new(); total];
    for (e, &(i, j)) in edges.iter().enumerate() {
        adj[i].push(e);
        adj[m + j].push(e);
    }
    let mut bal: Vec<f64> = supply.iter().chain(demand.iter()).copied().collect();
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut used = alloc::vec![false; edges.len()];
    let mut stack: Vec<usize> = (0..total).filter(|&k| degree[k] == 1).collect();
    let mut total_cost = 0.0;
    let mut resolved = 0;
    while let Some(node) = stack.pop() {
        let Some(&e) = adj[node].iter().find(|&&e| !used[e]) else { continue };
        let (i, j) = edges[e];
        let f = bal[node];
        if f < -feas_tol {
            return None;
        }
        let other = if node == i { m + j } else { i };
        bal[other] -= f;
        used[e] = true;
        total_cost += f.max(0.0) * cost[i * n + j];
        degree[node] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
        resolved += 1;
    }
    debug_assert_eq!(resolved, edges.len());
    Some(total_cost)
}

/// Minimum assignment cost over all permutations (Heap's algorithm), valid
/// when both sides carry `k` atoms of identical weight.
fn permutation_min(k: usize, w: f64, cost: &[f64]) -> f64 {
    let mut perm: Vec<usize> = (0..k).collect();
    let mut c = alloc::vec![0usize; k];
    let eval = |perm: &[usize]| -> f64 {
        perm.iter().enumerate().map(|(i, &j)| w * cost[i * k + j]).sum()
    };
    let mut best = eval(&perm);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

struct Search<'a> {
    m: usize,
    n: usize,
    need: usize,
    supply: &'a [f64],
    demand: &'a [f64],
    cost: &'a [f64],
    feas_tol: f64,
    best: f64,
}

impl Search<'_> {
    fn dfs(&mut self, e: usize, chosen: &mut Vec<(usize, usize)>, dsu: &mut Dsu) {
        if chosen.len() == self.need {
            if let Some(c) = tree_cost(chosen, self.supply, self.demand, self.cost, self.feas_tol) {
                self.best = self.best.min(c);
            }
            return;
        }
        let remaining = self.m * self.n - e;
        if remaining == 0 || chosen.len() + remaining < self.need {
            return;
        }
        let (i, j) = (e / self.n, e % self.n);
        if let Some(attached) = dsu.union(i, self.m + j) {
            chosen.push((i, j));
            self.dfs(e + 1, chosen, dsu);
            chosen.pop();
            dsu.undo(attached);
        }
        self.dfs(e + 1, chosen, dsu);
    }
}

/// Exhaustive minimum W_p cost for supports of at most six atoms per side.
///
/// Equal-size, equal-weight instances reduce to an assignment problem and
/// are enumerated over permutations; otherwise every spanning tree of the
/// bipartite graph is visited via depth-first edge selection with a
/// union-find acyclicity filter. Returns `(Σ mass · |x−y|^p)^{1/p}`.
pub fn brute_force_wasserstein(
    p: f64,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
) -> Result<f64, TransportError> {
    assert!(p >= 1.0, "cost exponent must satisfy p >= 1");
    assert_eq!(a.dim(), b.dim(), "measures must share an ambient dimension");
    if a.len() > CAP || b.len() > CAP {
        return Err(TransportError::TooLarge { size: a.len().max(b.len()), cap: CAP });
    }
    let (ma, mb) = check_balance(a, b)?;

    let src: Vec<usize> = (0..a.len()).filter(|&i| a.weight(i) > 0.0).collect();
    let snk: Vec<usize> = (0..b.len()).filter(|&j| b.weight(j) > 0.0).collect();
    if src.is_empty() || snk.is_empty() {
        return Ok(0.0);
    }
    let supply: Vec<f64> = src.iter().map(|&i| a.weight(i)).collect();
    let scale = ma / mb;
    let demand: Vec<f64> = snk.iter().map(|&j| b.weight(j) * scale).collect();
    let (m, n) = (supply.len(), demand.len());
    let mut cost = alloc::vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cost[i * n + j] = math::dist_pow(a.point(src[i]), b.point(snk[j]), p);
        }
    }

    let uniform = m == n
        && supply
            .iter()
            .chain(&demand)
            .all(|w| (w - supply[0]).abs() <= 1e-12 * supply[0]);
    if uniform {
        return Ok(math::root_p(permutation_min(m, supply[0], &cost), p));
    }

    // Depth-first over edges in index order: each spanning tree corresponds
    // to exactly one take/skip decision path.
    let mut search = Search {
        m,
        n,
        need: m + n - 1,
        supply: &supply,
        demand: &demand,
        cost: &cost,
        feas_tol: 1e-12 * ma,
        best: f64::INFINITY,
    };
    let mut dsu = Dsu::new(m + n);
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(search.need);
    search.dfs(0, &mut chosen, &mut dsu);
    debug_assert!(search.best.is_finite(), "a balanced instance always has a feasible vertex");
    Ok(math::root_p(search.best, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::wasserstein;
    use alloc::vec;

    fn m1(points: &[f64], weights: &[f64]) -> DiscreteMeasure {
        let pts: Vec<Vec<f64>> = points.iter().map(|x| vec![*x]).collect();
        DiscreteMeasure::new(1, &pts, weights).unwrap()
    }

    #[test]
    fn identical_measures_cost_nothing() {
        let a = m1(&[0.0, 2.0, 5.0], &[1.0, 2.0, 0.5]);
        assert_eq!(brute_force_wasserstein(2.0, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn two_by_two_shift_keeps_raw_mass_cost() {
        let a = m1(&[0.0, 1.0], &[1.0, 1.0]);
        let b = m1(&[2.0, 3.0], &[1.0, 1.0]);
        assert!((brute_force_wasserstein(1.0, &a, &b).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rational_weight_instance_matches_the_solver() {
        let a = m1(&[0.0, 1.0, 3.0], &[0.5, 0.25, 0.25]);
        let b = m1(&[0.5, 2.0, 2.5], &[0.125, 0.375, 0.5]);
        for p in [1.0, 2.0] {
            let oracle = brute_force_wasserstein(p, &a, &b).unwrap();
            let solver = wasserstein(p, &a, &b).unwrap().cost;
            assert!(
                (oracle - solver).abs() <= 1e-9 * oracle.max(1e-30),
                "p={p}: oracle {oracle} vs solver {solver}"
            );
        }
    }

    #[test]
    fn mixed_sizes_match_the_solver() {
        let a = m1(&[-1.0, 0.3, 0.9, 2.4], &[0.2, 0.4, 0.1, 0.3]);
        let b = m1(&[0.0, 1.5], &[0.45, 0.55]);
        for p in [1.0, 2.0] {
            let oracle = brute_force_wasserstein(p, &a, &b).unwrap();
            let solver = wasserstein(p, &a, &b).unwrap().cost;
            assert!((oracle - solver).abs() <= 1e-9 * oracle.max(1e-30));
        }
    }

    #[test]
    fn oversized_supports_are_refused() {
        let pts: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64]).collect();
        let a = DiscreteMeasure::new(1, &pts, &[1.0; 7]).unwrap();
        assert!(matches!(
            brute_force_wasserstein(1.0, &a, &a),
            Err(TransportError::TooLarge { size: 7, cap: 6 })
        ));
    }

    #[test]
    fn split_atom_forced_coupling() {
        let a = m1(&[0.0], &[1.0]);
        let b = m1(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!((brute_force_wasserstein(2.0, &a, &b).unwrap() - 1.0).abs() < 1e-12);
    }
}
