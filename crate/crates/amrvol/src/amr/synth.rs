//! Synthetic dataset generation.
//!
//! Generates nested hierarchies by evaluating an analytic field at cell
//! centers and refining wherever the value exceeds a per-level threshold,
//! so conversion and rendering can be exercised without external data.

use std::collections::HashSet;

use super::{AMRDataset, AMRGrid, IndexBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Analytic scalar field over the unit domain.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    Constant(f64),
    /// Value equals the x coordinate; trilinear interpolation reproduces it
    /// exactly, which makes it the workhorse for interpolation checks.
    LinearX,
    /// exp(-|p - center|^2 / (2 width^2)), peaking at 1.
    Gaussian { center: [f64; 3], width: f64 },
}

impl FieldKind {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        match self {
            FieldKind::Constant(c) => *c,
            FieldKind::LinearX => p[0],
            FieldKind::Gaussian { center, width } => {
                let r2 = (p[0] - center[0]).powi(2)
                    + (p[1] - center[1]).powi(2)
                    + (p[2] - center[2]).powi(2);
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }
}

/// Recipe for a generated dataset.
#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub domain_dimensions: [u32; 3],
    pub refine_by: u32,
    pub max_level: usize,
    pub field: FieldKind,
    /// Refinement threshold per level: level L+1 covers the level-L cells
    /// whose value exceeds `thresholds[L]`. Strictly increasing.
    pub thresholds: Vec<f64>,
    /// Cells of padding added around each flagged region.
    pub pad: u32,
    pub field_name: String,
    pub periodic: [bool; 3],
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let dd = self.domain_dimensions;
        if dd.iter().any(|&d| d == 0) || dd[0] != dd[1] || dd[0] != dd[2] {
            return Err(Error::Validation(format!(
                "domain_dimensions must be equal and >= 1 per axis, got {dd:?}"
            )));
        }
        if self.refine_by < 2 {
            return Err(Error::Validation("refine_by must be >= 2".into()));
        }
        if self.thresholds.len() < self.max_level {
            return Err(Error::Validation(format!(
                "need {} thresholds for max_level {}, got {}",
                self.max_level,
                self.max_level,
                self.thresholds.len()
            )));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluates `f` at the cell centers of one grid.
pub(crate) fn eval_grid<T: Scalar>(
    level: usize,
    start: [u32; 3],
    dims: [u32; 3],
    res: u64,
    f: &impl Fn([f64; 3]) -> f64,
) -> AMRGrid<T> {
    let mut cells =
        Vec::with_capacity(dims[0] as usize * dims[1] as usize * dims[2] as usize);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let center = [
                    (start[0] as f64 + x as f64 + 0.5) / res as f64,
                    (start[1] as f64 + y as f64 + 0.5) / res as f64,
                    (start[2] as f64 + z as f64 + 0.5) / res as f64,
                ];
                cells.push(T::from_f64(f(center)));
            }
        }
    }
    AMRGrid {
        level,
        start_index: start,
        dims,
        cells,
    }
}

/// Generates a dataset from a [`SynthSpec`].
///
/// Level 0 is one grid covering the whole domain. Each finer level covers the
/// parent cells whose value exceeds that level's threshold: the flagged cells
/// are grouped into connected components (6-connectivity), each component is
/// rectangularized to its bounding box, boxes grow by `pad` cells and merge
/// while any pair overlaps, and the result is clipped against the parent
/// grids so nesting holds. A threshold that flags nothing truncates the
/// hierarchy there; that is not an error.
pub fn synth_amr<T: Scalar>(spec: &SynthSpec) -> Result<AMRDataset<T>> {
    spec.validate()?;
    let field = |p: [f64; 3]| spec.field.eval(p);

    let mut ds = AMRDataset::<T> {
        domain_dimensions: spec.domain_dimensions,
        refine_by: spec.refine_by,
        levels: Vec::new(),
        periodic: spec.periodic,
        field_name: spec.field_name.clone(),
    };
    let dd = spec.domain_dimensions;
    ds.levels.push(vec![eval_grid(0, [0, 0, 0], dd, dd[0] as u64, &field)]);

    let rb = spec.refine_by as u64;
    for level in 0..spec.max_level {
        let res = ds.resolution(level)?;
        let threshold = spec.thresholds[level];

        let mut flags: HashSet<[u64; 3]> = HashSet::new();
        for grid in &ds.levels[level] {
            for z in 0..grid.dims[2] as u64 {
                for y in 0..grid.dims[1] as u64 {
                    for x in 0..grid.dims[0] as u64 {
                        if grid.cell([x as u32, y as u32, z as u32]).as_f64() > threshold {
                            flags.insert([
                                grid.start_index[0] as u64 + x,
                                grid.start_index[1] as u64 + y,
                                grid.start_index[2] as u64 + z,
                            ]);
                        }
                    }
                }
            }
        }
        if flags.is_empty() {
            break;
        }

        let mut boxes = component_boxes(&flags);
        for b in &mut boxes {
            for a in 0..3 {
                b.lo[a] = b.lo[a].saturating_sub(spec.pad as u64);
                b.hi[a] = (b.hi[a] + spec.pad as u64).min(res);
            }
        }
        merge_overlapping(&mut boxes);

        let child_res = ds.resolution(level + 1)?;
        let mut grids = Vec::new();
        for b in &boxes {
            for parent in &ds.levels[level] {
                let clip = b.intersect(&parent.extent());
                if clip.is_empty() {
                    continue;
                }
                let start = narrow_triple(
                    [clip.lo[0] * rb, clip.lo[1] * rb, clip.lo[2] * rb],
                    level + 1,
                )?;
                let dims = narrow_triple(
                    [
                        (clip.hi[0] - clip.lo[0]) * rb,
                        (clip.hi[1] - clip.lo[1]) * rb,
                        (clip.hi[2] - clip.lo[2]) * rb,
                    ],
                    level + 1,
                )?;
                grids.push(eval_grid(level + 1, start, dims, child_res, &field));
            }
        }
        ds.levels.push(grids);
    }

    ds.validate()?;
    Ok(ds)
}

fn narrow_triple(v: [u64; 3], level: usize) -> Result<[u32; 3]> {
    let mut out = [0u32; 3];
    for a in 0..3 {
        out[a] = u32::try_from(v[a]).map_err(|_| {
            Error::Capacity(format!(
                "grid indices at level {level} exceed 32-bit index space"
            ))
        })?;
    }
    Ok(out)
}

/// Bounding box per 6-connected component of the flag set.
fn component_boxes(flags: &HashSet<[u64; 3]>) -> Vec<IndexBox> {
    let mut seen: HashSet<[u64; 3]> = HashSet::with_capacity(flags.len());
    let mut boxes = Vec::new();
    let mut queue = Vec::new();
    for &seed in flags {
        if seen.contains(&seed) {
            continue;
        }
        let mut b = IndexBox::new(seed, [seed[0] + 1, seed[1] + 1, seed[2] + 1]);
        queue.push(seed);
        seen.insert(seed);
        while let Some(cell) = queue.pop() {
            for a in 0..3 {
                for step in [-1i64, 1] {
                    let n = cell[a] as i64 + step;
                    if n < 0 {
                        continue;
                    }
                    let mut next = cell;
                    next[a] = n as u64;
                    if flags.contains(&next) && seen.insert(next) {
                        queue.push(next);
                    }
                }
            }
            b.lo = [
                b.lo[0].min(cell[0]),
                b.lo[1].min(cell[1]),
                b.lo[2].min(cell[2]),
            ];
            b.hi = [
                b.hi[0].max(cell[0] + 1),
                b.hi[1].max(cell[1] + 1),
                b.hi[2].max(cell[2] + 1),
            ];
        }
        boxes.push(b);
    }
    // Deterministic output regardless of hash order.
    boxes.sort_by_key(|b| (b.lo[2], b.lo[1], b.lo[0], b.hi[2], b.hi[1], b.hi[0]));
    boxes
}

/// Replaces overlapping boxes by their hull until all are pairwise disjoint.
fn merge_overlapping(boxes: &mut Vec<IndexBox>) {
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].overlaps(&boxes[j]) {
                    let hull = boxes[i].union_hull(&boxes[j]);
                    boxes[i] = hull;
                    boxes.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec(field: FieldKind, max_level: usize, thresholds: Vec<f64>) -> SynthSpec {
        SynthSpec {
            domain_dimensions: [8, 8, 8],
            refine_by: 2,
            max_level,
            field,
            thresholds,
            pad: 0,
            field_name: "density".into(),
            periodic: [false; 3],
        }
    }

    #[test]
    fn constant_field_single_level() {
        let spec = base_spec(FieldKind::Constant(5.0), 0, vec![]);
        let ds: AMRDataset<f32> = synth_amr(&spec).unwrap();
        assert_eq!(ds.max_level(), 0);
        assert_eq!(ds.levels[0].len(), 1);
        assert!(ds.levels[0][0].cells.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn linear_field_cell_center_arithmetic() {
        let spec = base_spec(FieldKind::LinearX, 0, vec![]);
        let ds: AMRDataset<f64> = synth_amr(&spec).unwrap();
        assert_eq!(ds.levels[0][0].cell([3, 0, 0]), 3.5 / 8.0);
    }

    #[test]
    fn gaussian_produces_nested_valid_hierarchy() {
        let spec = SynthSpec {
            pad: 1,
            ..base_spec(
                FieldKind::Gaussian {
                    center: [0.5; 3],
                    width: 0.1,
                },
                3,
                vec![0.05, 0.3, 0.7],
            )
        };
        let ds: AMRDataset<f32> = synth_amr(&spec).unwrap();
        ds.validate().unwrap();
        assert!(ds.max_level() >= 1, "thresholds should flag something");
        // concentric: each level's grids sit strictly inside the domain core
        for level in 1..=ds.max_level() {
            assert!(!ds.levels[level].is_empty());
        }
    }

    #[test]
    fn unreachable_threshold_truncates_hierarchy() {
        let spec = base_spec(FieldKind::Constant(1.0), 2, vec![5.0, 6.0]);
        let ds: AMRDataset<f32> = synth_amr(&spec).unwrap();
        assert_eq!(ds.max_level(), 0);
    }

    #[test]
    fn non_increasing_thresholds_rejected() {
        let spec = base_spec(FieldKind::LinearX, 2, vec![0.5, 0.5]);
        assert!(synth_amr::<f32>(&spec).is_err());
    }

    #[test]
    fn two_separated_blobs_get_separate_grids() {
        // A field with two disjoint hot spots along x.
        let spec = SynthSpec {
            domain_dimensions: [16, 16, 16],
            refine_by: 2,
            max_level: 1,
            field: FieldKind::Gaussian {
                center: [0.25, 0.5, 0.5],
                width: 0.05,
            },
            thresholds: vec![0.5],
            pad: 0,
            field_name: "density".into(),
            periodic: [false; 3],
        };
        let ds: AMRDataset<f32> = synth_amr(&spec).unwrap();
        assert_eq!(ds.max_level(), 1);
        // single blob -> a single rectangular grid
        assert_eq!(ds.levels[1].len(), 1);
    }

    #[test]
    fn component_boxes_split_disconnected_sets() {
        let mut flags = HashSet::new();
        flags.insert([0, 0, 0]);
        flags.insert([1, 0, 0]);
        flags.insert([5, 5, 5]);
        let boxes = component_boxes(&flags);
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0], IndexBox::new([0, 0, 0], [2, 1, 1]));
        assert_eq!(boxes[1], IndexBox::new([5, 5, 5], [6, 6, 6]));
    }

    #[test]
    fn overlapping_padded_boxes_merge() {
        let mut boxes = vec![
            IndexBox::new([0, 0, 0], [3, 3, 3]),
            IndexBox::new([2, 2, 2], [5, 5, 5]),
            IndexBox::new([10, 10, 10], [11, 11, 11]),
        ];
        merge_overlapping(&mut boxes);
        assert_eq!(boxes.len(), 2);
        assert!(boxes.contains(&IndexBox::new([0, 0, 0], [5, 5, 5])));
    }
}
