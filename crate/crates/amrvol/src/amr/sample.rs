//! Hand-checkable sample datasets.

use super::synth::{eval_grid, FieldKind};
use super::AMRDataset;
use crate::scalar::Scalar;

/// A nested dataset over an 8^3 domain with refine_by 2 and one grid per
/// level, with values `f(level, world_center)`.
pub fn nested<T: Scalar>(
    layout: &[([u32; 3], [u32; 3])],
    f: impl Fn(usize, [f64; 3]) -> f64,
) -> AMRDataset<T> {
    let ds = AMRDataset {
        domain_dimensions: [8, 8, 8],
        refine_by: 2,
        levels: layout
            .iter()
            .enumerate()
            .map(|(level, &(start, dims))| {
                vec![eval_grid(level, start, dims, 8 << level, &|c| f(level, c))]
            })
            .collect(),
        periodic: [false; 3],
        field_name: "density".into(),
    };
    debug_assert!(ds.validate().is_ok());
    ds
}

/// Canonical three-level layout: 8^3 domain, one full-domain grid at level 0,
/// an 8^3 grid at level-1 start (4,4,4) (world [0.25, 0.75]^3), and an 8^3
/// grid at level-2 start (12,12,12) (world [0.375, 0.625]^3). Every nesting
/// and containment question about it is checkable by hand.
pub fn three_level<T: Scalar>(field: &FieldKind) -> AMRDataset<T> {
    three_level_values(|_, center| field.eval(center))
}

/// The canonical three-level layout with custom per-cell values.
pub fn three_level_values<T: Scalar>(f: impl Fn(usize, [f64; 3]) -> f64) -> AMRDataset<T> {
    nested(
        &[
            ([0, 0, 0], [8, 8, 8]),
            ([4, 4, 4], [8, 8, 8]),
            ([12, 12, 12], [8, 8, 8]),
        ],
        f,
    )
}
