//! Whitney decomposition of the open interior of a cube: maximal dyadic
//! subcubes `Q` whose dilates `5Q` stay strictly inside.

use alloc::vec::Vec;

use super::{Cube, DyadicCube, GeometryError};

/// Lazy Whitney decomposition of `int R` into maximal dyadic cubes `Q` with
/// `5Q ⊂ int R` (closed dilate inside the open interior).
///
/// Membership is inherited by descendants, so the maximal cube containing a
/// point is the first qualifying cube on the descent from the root; `lookup`
/// exploits that and never materializes the family.
#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    root: Cube,
}

/// The result of an exhaustive enumeration to a depth cap: the maximal
/// qualified cubes found, plus the unqualified depth-cap cubes that cover
/// the remaining collar along the boundary. Together they tile the root.
#[derive(Debug, Clone)]
pub struct WhitneyCubes {
    pub qualified: Vec<DyadicCube>,
    pub remainder: Vec<DyadicCube>,
}

impl WhitneyDecomposition {
    pub fn new(root: Cube) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Cube {
        &self.root
    }

    /// Whether the closed dilate `5Q` lies in the open interior of the root.
    pub fn qualifies(&self, q: &DyadicCube) -> bool {
        let side = q.side();
        let corner = q.corner();
        corner.iter().zip(self.root.origin()).all(|(c, a)| {
            c - 2.0 * side > *a && c + 3.0 * side < *a + self.root.side()
        })
    }

    /// The unique maximal Whitney cube containing `x`.
    ///
    /// `x` must lie in the open interior of the root; points on (or
    /// numerically indistinguishable from) the boundary are rejected with
    /// `OutsideDomain`, since their Whitney cubes shrink below resolution.
    pub fn lookup(&self, x: &[f64]) -> Result<DyadicCube, GeometryError> {
        if !self.root.interior_contains(x) {
            return Err(GeometryError::OutsideDomain);
        }
        for level in 0..=60 {
            let q = DyadicCube::containing(&self.root, level, x)
                .ok_or(GeometryError::OutsideDomain)?;
            if self.qualifies(&q) {
                return Ok(q);
            }
        }
        Err(GeometryError::OutsideDomain)
    }

    /// Enumerates the family to a depth cap. Qualified cubes are maximal
    /// (their parents fail the dilate test); remainder cubes are the
    /// depth-cap cubes still hugging the boundary.
    pub fn enumerate(&self, max_level: u32) -> WhitneyCubes {
        let mut out = WhitneyCubes { qualified: Vec::new(), remainder: Vec::new() };
        self.collect(DyadicCube::root(&self.root), max_level, &mut out);
        out
    }

    fn collect(&self, q: DyadicCube, max_level: u32, out: &mut WhitneyCubes) {
        if self.qualifies(&q) {
            out.qualified.push(q);
        } else if q.level() >= max_level {
            out.remainder.push(q);
        } else {
            for child in q.children() {
                self.collect(child, max_level, out);
            }
        }
    }
}

/// Convenience wrapper: enumerate the Whitney family of `root` to a depth cap.
pub fn whitney_decompose(root: &Cube, max_level: u32) -> WhitneyCubes {
    WhitneyDecomposition::new(root.clone()).enumerate(max_level)
}
