//! Multiscale machinery over dyadic lattices.
//!
//! * [`DyadicTree`] — a finite tree of dyadic cubes with a sibling-complete
//!   stopping frontier, built by [`build_tree`] from a depth cap and a
//!   stopping predicate such as [`comparability_stop`].
//! * [`haar_delta`] / [`delta_sigma`] / [`key_lemma_rhs`] — martingale
//!   difference operators and the energy functional they control.
//! * [`good_set`] / [`localized_trim`] / [`localization_ratio`] — diagnostics
//!   for how well transport cost localizes to a bump.
//! * [`carleson_scan`] — per-cube flatness coefficients and their normalized
//!   dyadic sums, the discrete stand-in for a Carleson-measure condition.

mod haar;
mod localize;

pub use haar::{delta_sigma, haar_delta, key_lemma_rhs, GridFunction};
pub use localize::{good_set, localization_ratio, localized_trim, LocalizationRecord};

use alloc::string::String;
use alloc::vec::Vec;

use crate::coefficients::{alpha_p, beta_p, AlphaConfig};
use crate::geometry::{Ball, DyadicCube, PlaneSearch};
use crate::math;
use crate::measure::{DiscreteMeasure, MeasureError};
use crate::transport::TransportError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MultiscaleError {
    #[error("MassMismatch: root masses differ (sigma {sigma}, tau {tau})")]
    MassMismatch { sigma: f64, tau: f64 },
    #[error("ComparabilityViolated: cube {id} has tau/sigma ratio {ratio}, allowed [{delta}, 1/{delta}]")]
    ComparabilityViolated { id: String, ratio: f64, delta: f64 },
    #[error("ZeroSigmaMass: sigma vanishes on a cube that must carry mass")]
    ZeroSigmaMass,
    #[error("ZeroMass: a measure that must have positive mass vanishes")]
    ZeroMass,
    #[error("InvalidTree: cube {id}: {reason}")]
    InvalidTree { id: String, reason: &'static str },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Default comparability threshold for stopping rules.
pub const DEFAULT_DELTA: f64 = 0.25;

/// A finite dyadic tree: member cubes plus a stopping frontier.
///
/// Invariants (checked by [`DyadicTree::validate`], guaranteed by
/// [`build_tree`]):
///
/// * the root is a member and every member lies in the root's lattice;
/// * members are ancestor-closed — the parent of a non-root member is a
///   member;
/// * stopping cubes are children of members, are never members themselves,
///   and arrive in complete sibling sets.
///
/// `delta` records the comparability threshold the tree was built with; it is
/// carried here so consumers such as [`key_lemma_rhs`] can re-check the
/// hypothesis they rely on.
#[derive(Debug, Clone)]
pub struct DyadicTree {
    root: DyadicCube,
    members: Vec<DyadicCube>,
    stopping: Vec<DyadicCube>,
    delta: f64,
}

impl DyadicTree {
    /// Assembles a tree from explicit member and stopping sets, validating
    /// the invariants. Input order is irrelevant; duplicates are dropped.
    pub fn from_parts(
        root: DyadicCube,
        mut members: Vec<DyadicCube>,
        mut stopping: Vec<DyadicCube>,
        delta: f64,
    ) -> Result<Self, MultiscaleError> {
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        members.sort();
        members.dedup();
        stopping.sort();
        stopping.dedup();
        let tree = Self { root, members, stopping, delta };
        tree.validate()?;
        Ok(tree)
    }

    pub fn root(&self) -> &DyadicCube {
        &self.root
    }

    /// Member cubes in lattice order (coarse to fine); includes the root.
    pub fn members(&self) -> &[DyadicCube] {
        &self.members
    }

    /// Stopping cubes in lattice order.
    pub fn stopping(&self) -> &[DyadicCube] {
        &self.stopping
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Returns a copy carrying a different comparability threshold.
    pub fn with_delta(mut self, delta: f64) -> Self {
        assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
        self.delta = delta;
        self
    }

    pub fn is_member(&self, q: &DyadicCube) -> bool {
        self.members.binary_search(q).is_ok()
    }

    pub fn is_stopping(&self, q: &DyadicCube) -> bool {
        self.stopping.binary_search(q).is_ok()
    }

    /// Checks the tree invariants by direct set membership tests.
    pub fn validate(&self) -> Result<(), MultiscaleError> {
        let fail = |q: &DyadicCube, reason: &'static str| {
            Err(MultiscaleError::InvalidTree { id: q.id(), reason })
        };
        if !self.is_member(&self.root) {
            return fail(&self.root, "root is not a member");
        }
        for q in &self.members {
            if !q.is_contained_in(&self.root) {
                return fail(q, "member lies outside the root");
            }
            if q != &self.root {
                match q.parent() {
                    Some(p) if self.is_member(&p) => {}
                    _ => return fail(q, "member's parent is not a member"),
                }
            }
        }
        for q in &self.stopping {
            if self.is_member(q) {
                return fail(q, "cube is both member and stopping");
            }
            let parent = match q.parent() {
                Some(p) if q.is_contained_in(&self.root) => p,
                _ => return fail(q, "stopping cube lies outside the root"),
            };
            if !self.is_member(&parent) {
                return fail(q, "stopping cube's parent is not a member");
            }
            for sib in parent.children() {
                if !self.is_stopping(&sib) {
                    return fail(&sib, "sibling of a stopping cube is not stopping");
                }
            }
        }
        Ok(())
    }
}

/// Grows a tree downward from `root`, at most `depth` levels deep.
///
/// Children of a member are inspected as a sibling block: if any of them
/// fires `stop`, or they sit at the depth cap, the whole block becomes
/// stopping; otherwise all become members and the descent continues. The
/// root is always a member, so `depth == 0` stops at the root's children.
pub fn build_tree<F>(root: &DyadicCube, depth: u32, mut stop: F) -> DyadicTree
where
    F: FnMut(&DyadicCube) -> bool,
{
    let mut members = alloc::vec![root.clone()];
    let mut stopping = Vec::new();
    let mut frontier = alloc::vec![root.clone()];
    while let Some(q) = frontier.pop() {
        let rel = q.level() - root.level();
        let children = q.children();
        let cut = rel + 1 >= depth || children.iter().any(&mut stop);
        if cut {
            stopping.extend(children);
        } else {
            for child in children {
                members.push(child.clone());
                frontier.push(child);
            }
        }
    }
    members.sort();
    stopping.sort();
    DyadicTree { root: root.clone(), members, stopping, delta: DEFAULT_DELTA }
}

/// The canonical stopping predicate: fires where `tau` and `sigma` stop
/// being `delta`-comparable (or `sigma` carries no mass at all).
pub fn comparability_stop<'a>(
    sigma: &'a DiscreteMeasure,
    tau: &'a DiscreteMeasure,
    delta: f64,
) -> impl FnMut(&DyadicCube) -> bool + 'a {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    move |q| {
        let cube = q.cube();
        let s = sigma.mass_in_cube(&cube);
        let t = tau.mass_in_cube(&cube);
        s <= 0.0 || t < delta * s || t > s / delta
    }
}

/// Per-cube evaluation budget for [`carleson_scan`].
#[derive(Debug, Clone)]
pub struct ScanConfig {
    /// Transport exponent for the alpha coefficient.
    pub p: f64,
    /// Dimension of the approximating planes.
    pub n: usize,
    /// Plane sampling spacing as a fraction of each ball's radius.
    pub spacing_ratio: f64,
    /// Plane search budget; the default is seed-and-polish only, since every
    /// candidate plane costs an exact transport solve.
    pub search: PlaneSearch,
}

impl ScanConfig {
    pub fn new(n: usize) -> Self {
        let search = PlaneSearch {
            angle_count: 0,
            offset_count: 0,
            polish_rounds: 1,
            polish_iters: 8,
            nm_iters: 32,
        };
        Self { p: 2.0, n, spacing_ratio: 1.0 / 64.0, search }
    }
}

/// One scanned cube: its ball's coefficients and the mass it holds.
#[derive(Debug, Clone)]
pub struct CubeRecord {
    pub cube: DyadicCube,
    /// `alpha_p` of the cube's ball, or `0.0` when skipped.
    pub alpha: f64,
    /// `beta_2` of the same ball, or `0.0` when skipped.
    pub beta2: f64,
    /// Mass of the measure inside the cube.
    pub mass: f64,
    /// Set when the cube was too degenerate to evaluate (too few support
    /// atoms, collapsed radius, or a failed solve); skipped cubes still
    /// appear in sums, contributing zero.
    pub skipped: bool,
}

/// Scan output: records in lattice order plus, for every record `R`, the
/// normalized sum `S(R) = Σ_{Q ⊆ R} alpha(Q)² m(Q) / m(R)`.
#[derive(Debug, Clone)]
pub struct ScanReport {
    pub p: f64,
    pub depth_lo: u32,
    pub depth_hi: u32,
    pub records: Vec<CubeRecord>,
    /// `sums[i]` is the Carleson sum rooted at `records[i]`.
    pub sums: Vec<f64>,
    /// Number of records with `skipped` set.
    pub skipped: usize,
}

/// Enumerates the dyadic cubes of `root` holding support mass, together with
/// the indices of the atoms they contain, for relative levels in
/// `depth_lo ..= depth_hi`. Output is in lattice order.
pub fn scan_cubes(
    mu: &DiscreteMeasure,
    root: &DyadicCube,
    depth_lo: u32,
    depth_hi: u32,
) -> Vec<(DyadicCube, Vec<usize>)> {
    assert!(depth_lo <= depth_hi, "empty depth range");
    let base: Vec<usize> = (0..mu.len())
        .filter(|&i| mu.weight(i) > 0.0 && root.contains(mu.point(i)))
        .collect();
    let mut out = Vec::new();
    if !base.is_empty() {
        descend(mu, root.clone(), base, depth_lo, depth_hi, root.level(), &mut out);
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn descend(
    mu: &DiscreteMeasure,
    q: DyadicCube,
    atoms: Vec<usize>,
    depth_lo: u32,
    depth_hi: u32,
    root_level: u32,
    out: &mut Vec<(DyadicCube, Vec<usize>)>,
) {
    let rel = q.level() - root_level;
    if rel < depth_hi {
        for child in q.children() {
            let sub: Vec<usize> =
                atoms.iter().copied().filter(|&i| child.contains(mu.point(i))).collect();
            if !sub.is_empty() {
                descend(mu, child, sub, depth_lo, depth_hi, root_level, out);
            }
        }
    }
    if rel >= depth_lo {
        out.push((q, atoms));
    }
}

/// Evaluates one cube: builds the smallest ball centered at the support atom
/// nearest the cube center that contains the cube's support, then computes
/// `alpha_p` and `beta_2` of that ball against the full measure.
pub fn evaluate_cube(
    mu: &DiscreteMeasure,
    cube: &DyadicCube,
    atoms: &[usize],
    cfg: &ScanConfig,
) -> CubeRecord {
    let mass: f64 = atoms.iter().map(|&i| mu.weight(i)).sum();
    let skip = |mass| CubeRecord {
        cube: cube.clone(),
        alpha: 0.0,
        beta2: 0.0,
        mass,
        skipped: true,
    };
    if atoms.len() < cfg.n + 2 {
        return skip(mass);
    }
    let z = cube.center();
    let nearest = atoms
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let da = math::dist(mu.point(a), &z);
            let db = math::dist(mu.point(b), &z);
            da.partial_cmp(&db).expect("finite atom coordinates")
        })
        .expect("nonempty atom set");
    let center = mu.point(nearest).to_vec();
    let radius = atoms
        .iter()
        .map(|&i| math::dist(mu.point(i), &center))
        .fold(0.0f64, f64::max);
    if radius <= 1e-12 * cube.side() {
        return skip(mass);
    }
    let ball = Ball::new(center, radius);
    let mut acfg = AlphaConfig::new(cfg.n);
    acfg.search = cfg.search.clone();
    acfg.spacing = Some(cfg.spacing_ratio * radius);
    let alpha = match alpha_p(cfg.p, mu, &ball, &acfg) {
        Ok(report) => report.value,
        Err(_) => return skip(mass),
    };
    let beta2 = match beta_p(2.0, mu, &ball, cfg.n, &cfg.search) {
        Ok(report) => report.value,
        Err(_) => return skip(mass),
    };
    CubeRecord { cube: cube.clone(), alpha, beta2, mass, skipped: false }
}

/// The normalized dyadic sum rooted at `records[at]`, recomputed from the
/// per-cube records alone.
pub fn carleson_sum(records: &[CubeRecord], at: usize) -> f64 {
    let root = &records[at];
    if root.mass <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for r in records {
        if r.cube.is_contained_in(&root.cube) {
            total += r.alpha * r.alpha * r.mass;
        }
    }
    total / root.mass
}

/// Sorts records into lattice order and attaches the per-root sums.
pub fn assemble_report(
    p: f64,
    depth_lo: u32,
    depth_hi: u32,
    mut records: Vec<CubeRecord>,
) -> ScanReport {
    records.sort_by(|a, b| a.cube.cmp(&b.cube));
    let sums = (0..records.len()).map(|i| carleson_sum(&records, i)).collect();
    let skipped = records.iter().filter(|r| r.skipped).count();
    ScanReport { p, depth_lo, depth_hi, records, sums, skipped }
}

/// Scans every mass-bearing dyadic cube of `root` in the given relative depth
/// range and reports per-cube coefficients plus normalized Carleson sums.
///
/// Cube evaluations are independent; this entry point runs them serially, and
/// callers wanting concurrency can run [`evaluate_cube`] over
/// [`scan_cubes`] themselves and finish with [`assemble_report`], which makes
/// the output order (and hence the bytes) run-to-run identical.
pub fn carleson_scan(
    mu: &DiscreteMeasure,
    root: &DyadicCube,
    depth_lo: u32,
    depth_hi: u32,
    cfg: &ScanConfig,
) -> ScanReport {
    let cubes = scan_cubes(mu, root, depth_lo, depth_hi);
    let records =
        cubes.iter().map(|(q, atoms)| evaluate_cube(mu, q, atoms, cfg)).collect();
    assemble_report(cfg.p, depth_lo, depth_hi, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;
    use alloc::vec;

    fn unit_root(d: usize) -> DyadicCube {
        DyadicCube::root(&Cube::new(vec![0.0; d], 1.0))
    }

    fn line_measure(count: usize) -> DiscreteMeasure {
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|i| vec![(i as f64 + 0.5) / count as f64, 0.5])
            .collect();
        DiscreteMeasure::new(2, &pts, &vec![1.0 / count as f64; count]).unwrap()
    }

    #[test]
    fn uniform_cut_builds_two_member_levels() {
        let root = unit_root(1);
        let tree = build_tree(&root, 2, |_| false);
        assert_eq!(tree.members().len(), 3);
        assert_eq!(tree.stopping().len(), 4);
        assert!(tree.stopping().iter().all(|q| q.level() == 2));
        tree.validate().unwrap();
    }

    #[test]
    fn stop_at_children_leaves_only_the_root() {
        let root = unit_root(2);
        let tree = build_tree(&root, 5, |_| true);
        assert_eq!(tree.members(), &[root.clone()]);
        assert_eq!(tree.stopping().len(), 4);
        tree.validate().unwrap();
    }

    #[test]
    fn depth_zero_cuts_immediately() {
        let root = unit_root(1);
        let tree = build_tree(&root, 0, |_| false);
        assert_eq!(tree.members().len(), 1);
        assert_eq!(tree.stopping().len(), 2);
        tree.validate().unwrap();
    }

    #[test]
    fn comparable_measures_never_fire_before_the_cut() {
        let mu = line_measure(16);
        let root = unit_root(2);
        let mut stop = comparability_stop(&mu, &mu, 0.25);
        for q in root.children() {
            // Empty cubes fire; cubes where both masses agree do not.
            let empty = mu.mass_in_cube(&q.cube()) <= 0.0;
            assert_eq!(stop(&q), empty);
        }
    }

    #[test]
    fn validate_rejects_incomplete_siblings() {
        let root = unit_root(1);
        let kids = root.children();
        let err = DyadicTree::from_parts(
            root.clone(),
            vec![root.clone()],
            vec![kids[0].clone()],
            0.25,
        )
        .unwrap_err();
        assert!(matches!(err, MultiscaleError::InvalidTree { .. }));
    }

    #[test]
    fn validate_rejects_orphan_members_and_overlap() {
        let root = unit_root(1);
        let kids = root.children();
        let grandkid = kids[0].children()[0].clone();
        let orphan = DyadicTree::from_parts(
            root.clone(),
            vec![root.clone(), grandkid],
            vec![],
            0.25,
        );
        assert!(matches!(orphan, Err(MultiscaleError::InvalidTree { .. })));

        let overlap = DyadicTree::from_parts(
            root.clone(),
            vec![root.clone(), kids[0].clone(), kids[1].clone()],
            kids,
            0.25,
        );
        assert!(matches!(overlap, Err(MultiscaleError::InvalidTree { .. })));
    }

    #[test]
    fn scan_cubes_prunes_empty_branches() {
        let mu = line_measure(8);
        let root = unit_root(2);
        let cubes = scan_cubes(&mu, &root, 0, 1);
        // Root plus the two level-1 cubes straddling the line y = 1/2.
        assert_eq!(cubes.len(), 3);
        assert_eq!(cubes[0].0, root);
        assert_eq!(cubes[0].1.len(), 8);
        for (q, atoms) in &cubes[1..] {
            assert_eq!(q.level(), 1);
            assert_eq!(atoms.len(), 4);
        }
    }

    #[test]
    fn flat_line_scan_sums_are_recomputable() {
        let mu = line_measure(8);
        let root = unit_root(2);
        let mut cfg = ScanConfig::new(1);
        cfg.spacing_ratio = 1.0 / 16.0;
        let report = carleson_scan(&mu, &root, 0, 2, &cfg);
        // 1 root + 2 level-1 cubes + 4 level-2 cubes hold mass; the level-2
        // cubes hold two atoms each, below the n + 2 floor.
        assert_eq!(report.records.len(), 7);
        assert_eq!(report.skipped, 4);
        for (i, r) in report.records.iter().enumerate() {
            if i > 0 {
                assert!(report.records[i - 1].cube < r.cube);
            }
            let recomputed = carleson_sum(&report.records, i);
            assert!((report.sums[i] - recomputed).abs() <= 1e-12);
            if !r.skipped {
                // Collinear support: the projection coefficient is exact
                // zero, while alpha stays finite (the segment ends inside
                // the comparison window, so it need not be small).
                assert!(r.alpha.is_finite() && r.alpha >= 0.0);
                assert!(r.beta2 < 1e-9, "flat line beta2 = {}", r.beta2);
            }
        }
        // The root sum collects the evaluated cubes' alpha terms.
        assert!(report.sums[0] > 0.0);
    }
}
