//! In-memory model of nested multiresolution grid data.
//!
//! A dataset is a stack of refinement levels over the unit domain [0,1]^3.
//! Level 0 is coarsest; each level refines the cell size by `refine_by`.
//! Every level holds one or more rectangular grids of uniform cells,
//! positioned by a global start index in that level's index space.

mod bundle;
mod ops;
pub mod sample;
mod synth;

pub use bundle::{load_amr, save_amr};
pub use ops::{child_mask, covering_grid, ghost_zones, sample_amr};
pub use synth::{synth_amr, FieldKind, SynthSpec};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Half-open box in a level's integer index space.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub(crate) struct IndexBox {
    pub lo: [u64; 3],
    pub hi: [u64; 3],
}

impl IndexBox {
    pub fn new(lo: [u64; 3], hi: [u64; 3]) -> Self {
        IndexBox { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.hi[a] <= self.lo[a])
    }

    pub fn contains(&self, idx: [u64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &IndexBox) -> IndexBox {
        let mut out = IndexBox::new([0; 3], [0; 3]);
        for a in 0..3 {
            out.lo[a] = self.lo[a].max(other.lo[a]);
            out.hi[a] = self.hi[a].min(other.hi[a]).max(out.lo[a]);
        }
        out
    }

    pub fn overlaps(&self, other: &IndexBox) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn union_hull(&self, other: &IndexBox) -> IndexBox {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = out.lo[a].min(other.lo[a]);
            out.hi[a] = out.hi[a].max(other.hi[a]);
        }
        out
    }

    /// `self` minus `other`, as up to six disjoint boxes.
    pub fn subtract(&self, other: &IndexBox) -> Vec<IndexBox> {
        let cut = self.intersect(other);
        if cut.is_empty() {
            return vec![*self];
        }
        let mut rest = Vec::new();
        let mut core = *self;
        for a in 0..3 {
            if core.lo[a] < cut.lo[a] {
                let mut below = core;
                below.hi[a] = cut.lo[a];
                rest.push(below);
                core.lo[a] = cut.lo[a];
            }
            if cut.hi[a] < core.hi[a] {
                let mut above = core;
                above.lo[a] = cut.hi[a];
                rest.push(above);
                core.hi[a] = cut.hi[a];
            }
        }
        rest
    }
}

/// Removes `cover` from every box in `boxes`.
pub(crate) fn subtract_all(boxes: Vec<IndexBox>, cover: &IndexBox) -> Vec<IndexBox> {
    boxes
        .into_iter()
        .flat_map(|b| b.subtract(cover))
        .collect()
}

/// A rectangular block of uniform cells at one refinement level.
#[derive(Clone, Debug, PartialEq)]
pub struct AMRGrid<T> {
    pub level: usize,
    /// Global cell index of the grid's low corner, in this level's resolution.
    pub start_index: [u32; 3],
    /// Cells per axis.
    pub dims: [u32; 3],
    /// Cell values, x-fastest ordering.
    pub cells: Vec<T>,
}

impl<T: Scalar> AMRGrid<T> {
    pub fn cell_count(&self) -> usize {
        self.dims[0] as usize * self.dims[1] as usize * self.dims[2] as usize
    }

    #[inline]
    pub fn cell(&self, local: [u32; 3]) -> T {
        let i = (local[2] as usize * self.dims[1] as usize + local[1] as usize)
            * self.dims[0] as usize
            + local[0] as usize;
        self.cells[i]
    }

    pub(crate) fn extent(&self) -> IndexBox {
        IndexBox::new(
            [
                self.start_index[0] as u64,
                self.start_index[1] as u64,
                self.start_index[2] as u64,
            ],
            [
                self.start_index[0] as u64 + self.dims[0] as u64,
                self.start_index[1] as u64 + self.dims[1] as u64,
                self.start_index[2] as u64 + self.dims[2] as u64,
            ],
        )
    }

    /// Value at a global index, which must lie inside the grid.
    #[inline]
    pub(crate) fn value_at_global(&self, idx: [u64; 3]) -> T {
        self.cell([
            (idx[0] - self.start_index[0] as u64) as u32,
            (idx[1] - self.start_index[1] as u64) as u32,
            (idx[2] - self.start_index[2] as u64) as u32,
        ])
    }
}

/// A full hierarchy of nested uniform grids.
#[derive(Clone, Debug, PartialEq)]
pub struct AMRDataset<T> {
    /// Level-0 cells per axis.
    pub domain_dimensions: [u32; 3],
    /// Resolution multiplier between consecutive levels.
    pub refine_by: u32,
    /// Grids per level, index 0 = coarsest.
    pub levels: Vec<Vec<AMRGrid<T>>>,
    pub periodic: [bool; 3],
    pub field_name: String,
}

impl<T: Scalar> AMRDataset<T> {
    pub fn max_level(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    /// Cells per axis at `level` (cubic domains only, so one number).
    pub fn resolution(&self, level: usize) -> Result<u64> {
        let factor = (self.refine_by as u64)
            .checked_pow(level as u32)
            .ok_or_else(|| {
                Error::Validation(format!("resolution overflow at level {level}"))
            })?;
        (self.domain_dimensions[0] as u64)
            .checked_mul(factor)
            .ok_or_else(|| Error::Validation(format!("resolution overflow at level {level}")))
    }

    pub fn grids(&self, level: usize) -> &[AMRGrid<T>] {
        &self.levels[level]
    }

    /// Checks every structural invariant, naming the offending level and
    /// grid in the error. Runs on every load and after generation.
    pub fn validate(&self) -> Result<()> {
        if self.refine_by < 2 {
            return Err(Error::Validation(format!(
                "refine_by must be >= 2, got {}",
                self.refine_by
            )));
        }
        let dd = self.domain_dimensions;
        if dd.iter().any(|&d| d == 0) {
            return Err(Error::Validation(
                "domain_dimensions components must be >= 1".into(),
            ));
        }
        if dd[0] != dd[1] || dd[0] != dd[2] {
            return Err(Error::Validation(format!(
                "domain_dimensions {dd:?} are unequal; non-cubic voxels are unsupported"
            )));
        }
        if self.levels.is_empty() {
            return Err(Error::Validation("dataset has no levels".into()));
        }

        for (level, grids) in self.levels.iter().enumerate() {
            let res = self.resolution(level)?;
            if grids.is_empty() {
                return Err(Error::Validation(format!("level {level} has no grids")));
            }
            for (gi, grid) in grids.iter().enumerate() {
                if grid.level != level {
                    return Err(Error::Validation(format!(
                        "grid {gi} at level {level} is tagged level {}",
                        grid.level
                    )));
                }
                if grid.dims.iter().any(|&d| d == 0) {
                    return Err(Error::Validation(format!(
                        "grid {gi} at level {level} has a zero dimension"
                    )));
                }
                for a in 0..3 {
                    let end = grid.start_index[a] as u64 + grid.dims[a] as u64;
                    if end > res {
                        return Err(Error::Validation(format!(
                            "grid {gi} at level {level} extends to {end} on axis {a}, \
                             past the level resolution {res}"
                        )));
                    }
                }
                if grid.cells.len() != grid.cell_count() {
                    return Err(Error::Validation(format!(
                        "grid {gi} at level {level} holds {} cells, expected {}",
                        grid.cells.len(),
                        grid.cell_count()
                    )));
                }
                if grid.cells.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Validation(format!(
                        "grid {gi} at level {level} contains non-finite cell values"
                    )));
                }
            }

            // pairwise disjoint in index space
            for i in 0..grids.len() {
                for j in i + 1..grids.len() {
                    if grids[i].extent().overlaps(&grids[j].extent()) {
                        return Err(Error::Validation(format!(
                            "overlapping grids at level {level} (grids {i} and {j})"
                        )));
                    }
                }
            }
        }

        // proper nesting: each child grid's extent, divided by refine_by,
        // must lie inside the union of the parent level's extents
        let rb = self.refine_by as u64;
        for level in 1..self.levels.len() {
            for (gi, grid) in self.levels[level].iter().enumerate() {
                let e = grid.extent();
                let parent_box = IndexBox::new(
                    [e.lo[0] / rb, e.lo[1] / rb, e.lo[2] / rb],
                    [
                        e.hi[0].div_ceil(rb),
                        e.hi[1].div_ceil(rb),
                        e.hi[2].div_ceil(rb),
                    ],
                );
                let mut uncovered = vec![parent_box];
                for parent in &self.levels[level - 1] {
                    uncovered = subtract_all(uncovered, &parent.extent());
                    if uncovered.is_empty() {
                        break;
                    }
                }
                if !uncovered.is_empty() {
                    return Err(Error::Validation(format!(
                        "nesting violation: grid {gi} at level {level} is not contained \
                         in the union of level {} grids",
                        level - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// World center of a cell given by its global index at `level`.
    pub fn cell_center(&self, level: usize, idx: [u64; 3]) -> [f64; 3] {
        let res = self
            .resolution(level)
            .expect("resolution fits u64 for valid datasets") as f64;
        [
            (idx[0] as f64 + 0.5) / res,
            (idx[1] as f64 + 0.5) / res,
            (idx[2] as f64 + 0.5) / res,
        ]
    }

    /// The grid at `level` covering `idx`, if any. Grids are scanned in list
    /// order, which fixes the tie-break for abutting faces.
    pub(crate) fn grid_covering(&self, level: usize, idx: [u64; 3]) -> Option<&AMRGrid<T>> {
        self.levels[level].iter().find(|g| g.extent().contains(idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_grid(level: usize, start: [u32; 3], dims: [u32; 3], value: f32) -> AMRGrid<f32> {
        let n = dims[0] as usize * dims[1] as usize * dims[2] as usize;
        AMRGrid {
            level,
            start_index: start,
            dims,
            cells: vec![value; n],
        }
    }

    #[test]
    fn subtract_splits_into_disjoint_boxes() {
        let outer = IndexBox::new([0, 0, 0], [4, 4, 4]);
        let inner = IndexBox::new([1, 1, 1], [3, 3, 3]);
        let parts = outer.subtract(&inner);
        let total: u64 = parts
            .iter()
            .map(|b| (0..3).map(|a| b.hi[a] - b.lo[a]).product::<u64>())
            .sum();
        assert_eq!(total, 64 - 8);
        for (i, a) in parts.iter().enumerate() {
            assert!(!a.overlaps(&inner));
            for b in &parts[i + 1..] {
                assert!(!a.overlaps(b));
            }
        }
    }

    #[test]
    fn overlapping_grids_are_rejected() {
        let ds = AMRDataset {
            domain_dimensions: [8, 8, 8],
            refine_by: 2,
            levels: vec![vec![
                flat_grid(0, [0, 0, 0], [4, 8, 8], 1.0),
                flat_grid(0, [3, 0, 0], [5, 8, 8], 1.0),
            ]],
            periodic: [false; 3],
            field_name: "density".into(),
        };
        let err = ds.validate().unwrap_err();
        assert!(
            err.to_string().contains("overlapping grids at level 0"),
            "{err}"
        );
    }

    #[test]
    fn nesting_violation_is_rejected() {
        let ds = AMRDataset {
            domain_dimensions: [8, 8, 8],
            refine_by: 2,
            levels: vec![
                vec![flat_grid(0, [0, 0, 0], [4, 4, 4], 1.0)],
                // child [8,16) maps to parent cells [4,8) which are uncovered
                vec![flat_grid(1, [8, 8, 8], [8, 8, 8], 1.0)],
            ],
            periodic: [false; 3],
            field_name: "density".into(),
        };
        let err = ds.validate().unwrap_err();
        assert!(err.to_string().contains("nesting violation"), "{err}");
    }

    #[test]
    fn abutting_parents_jointly_cover_a_child() {
        let ds = AMRDataset {
            domain_dimensions: [8, 8, 8],
            refine_by: 2,
            levels: vec![
                vec![
                    flat_grid(0, [0, 0, 0], [4, 8, 8], 1.0),
                    flat_grid(0, [4, 0, 0], [4, 8, 8], 1.0),
                ],
                // spans the seam between the two parents
                vec![flat_grid(1, [6, 6, 6], [4, 4, 4], 1.0)],
            ],
            periodic: [false; 3],
            field_name: "density".into(),
        };
        ds.validate().unwrap();
    }

    #[test]
    fn non_cubic_domain_is_rejected() {
        let ds = AMRDataset {
            domain_dimensions: [8, 4, 8],
            refine_by: 2,
            levels: vec![vec![flat_grid(0, [0, 0, 0], [8, 4, 8], 1.0)]],
            periodic: [false; 3],
            field_name: "density".into(),
        };
        let err = ds.validate().unwrap_err();
        assert!(err.to_string().contains("non-cubic"), "{err}");
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let mut grid = flat_grid(0, [0, 0, 0], [2, 2, 2], 1.0);
        grid.cells[3] = f32::NAN;
        let ds = AMRDataset {
            domain_dimensions: [2, 2, 2],
            refine_by: 2,
            levels: vec![vec![grid]],
            periodic: [false; 3],
            field_name: "density".into(),
        };
        assert!(ds.validate().is_err());
    }
}
