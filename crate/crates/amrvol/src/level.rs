//! Conversion of a dataset into per-level (data, mask) volume pairs.
//!
//! Each refinement level becomes two sparse volumes sharing one voxel size:
//! the field data padded with ghost zones, and the unpadded child mask. Both
//! are shifted so that cell `g` of every level lands at world center
//! `(g + 1/2) * v - V0` per axis, where `v` is the level's voxel size and
//! `V0` the level-0 voxel size: the data volume is translated by
//! `-v/2 - V0` (its ghost pad puts interior cell `g` at volume index
//! `g + 1`) and the mask volume by `+v/2 - V0`. With those shifts all levels
//! overlay exactly and the mask cut lines coincide with data cell bounds.

use std::path::{Path, PathBuf};

use crate::amr::{child_mask, ghost_zones, AMRDataset};
use crate::error::{Error, Result};
use crate::math::Aabb;
use crate::scalar::Scalar;
use crate::sparse::{write_svol, SparseVolume};

/// Smallest voxel size the f64 world transform can usefully represent.
const MIN_VOXEL_SIZE: f64 = 1e-12;

/// Options for the conversion pipeline.
///
/// The three `with_*` toggles reproduce the intermediate stages of the
/// pipeline (naive import, mask only, mask + ghost, ...) for comparison
/// renders; production builds leave them all on.
#[derive(Clone, Debug)]
pub struct BuildConfig {
    /// Field to convert; must match the dataset's field when set.
    pub field: Option<String>,
    pub min_level: usize,
    /// Finest level to convert; defaults to the dataset's finest. The finest
    /// converted level gets an all-ones mask, as if it were the finest data.
    pub max_level: Option<usize>,
    /// Multiplier on the voxel size. The default maps the domain to one
    /// world unit; a power-of-two scale enlarges it without changing any
    /// stored value or activity bit.
    pub scale: f64,
    pub with_mask: bool,
    pub with_ghost: bool,
    pub with_shift: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            field: None,
            min_level: 0,
            max_level: None,
            scale: 1.0,
            with_mask: true,
            with_ghost: true,
            with_shift: true,
        }
    }
}

impl BuildConfig {
    fn validate<T: Scalar>(&self, ds: &AMRDataset<T>) -> Result<usize> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Validation(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if let Some(field) = &self.field {
            if field != &ds.field_name {
                return Err(Error::Validation(format!(
                    "unknown field {field:?}; dataset holds {:?}",
                    ds.field_name
                )));
            }
        }
        let max = self.max_level.unwrap_or(ds.max_level()).min(ds.max_level());
        if self.min_level > max {
            return Err(Error::Validation(format!(
                "min_level {} exceeds max_level {max}",
                self.min_level
            )));
        }
        Ok(max)
    }
}

/// One converted level: ghost-padded data and its unpadded mask.
#[derive(Clone, Debug)]
pub struct LevelVolumePair<T> {
    pub level: usize,
    pub data: SparseVolume<T>,
    pub mask: SparseVolume<T>,
    pub voxel_size: f64,
    pub level0_voxel_size: f64,
}

impl<T: Scalar> LevelVolumePair<T> {
    /// Wraps a standalone volume for rendering without a mask (the uniform
    /// baseline). The mask volume is empty; render with the mask sampling
    /// mode off.
    pub fn dense(volume: SparseVolume<T>) -> Self {
        let v = volume.voxel_size();
        let mask = SparseVolume::new("mask", v);
        LevelVolumePair {
            level: 0,
            data: volume,
            mask,
            voxel_size: v,
            level0_voxel_size: v,
        }
    }

    /// Reassembles a pair from volumes read back from an SVOL file.
    pub fn from_volumes(
        level: usize,
        data: SparseVolume<T>,
        mask: SparseVolume<T>,
        level0_voxel_size: f64,
    ) -> Self {
        let voxel_size = data.voxel_size();
        LevelVolumePair {
            level,
            data,
            mask,
            voxel_size,
            level0_voxel_size,
        }
    }

    /// World box covered by either volume's active voxels.
    pub fn world_bounds(&self) -> Option<Aabb> {
        match (self.data.world_bounds(), self.mask.world_bounds()) {
            (Some(a), Some(b)) => Some(a.union(&b)),
            (a, b) => a.or(b),
        }
    }
}

/// Voxel size of `level`: `scale / (domain_dimensions.x * refine_by^level)`.
pub fn voxel_size<T: Scalar>(ds: &AMRDataset<T>, level: usize, scale: f64) -> Result<f64> {
    let res = ds.resolution(level)?;
    let v = scale / res as f64;
    if v < MIN_VOXEL_SIZE {
        return Err(Error::Precision { level, size: v });
    }
    Ok(v)
}

/// Converts one level into its (data, mask) volume pair.
pub fn build_level<T: Scalar>(
    ds: &AMRDataset<T>,
    level: usize,
    cfg: &BuildConfig,
) -> Result<LevelVolumePair<T>> {
    let effective_max = cfg.validate(ds)?;
    if level > ds.max_level() || ds.levels[level].is_empty() {
        return Err(Error::Validation(format!("level {level} has no grids")));
    }
    let v = voxel_size(ds, level, cfg.scale)?;
    let v0 = voxel_size(ds, 0, cfg.scale)?;

    let mut data = SparseVolume::<T>::new(ds.field_name.clone(), v);
    let mut mask = SparseVolume::<T>::new("mask", v);
    if cfg.with_shift {
        data.set_translation([-v / 2.0 - v0; 3]);
        mask.set_translation([v / 2.0 - v0; 3]);
    }

    for grid in &ds.levels[level] {
        let origin = volume_origin(grid.start_index)?;

        let mask_cells = if cfg.with_mask && level < effective_max {
            child_mask(ds, level, grid)
        } else {
            vec![T::one(); grid.cell_count()]
        };
        mask.copy_from_array(&mask_cells, grid.dims, origin);

        if cfg.with_ghost {
            let padded = ghost_zones(ds, grid, 1)?;
            let dims = [grid.dims[0] + 2, grid.dims[1] + 2, grid.dims[2] + 2];
            data.copy_from_array(&padded, dims, origin);
        } else {
            data.copy_from_array(&grid.cells, grid.dims, origin);
        }
    }

    Ok(LevelVolumePair {
        level,
        data,
        mask,
        voxel_size: v,
        level0_voxel_size: v0,
    })
}

fn volume_origin(start: [u32; 3]) -> Result<[i32; 3]> {
    let mut out = [0i32; 3];
    for a in 0..3 {
        out[a] = i32::try_from(start[a]).map_err(|_| {
            Error::Capacity(format!("start index {} exceeds volume index space", start[a]))
        })?;
    }
    Ok(out)
}

/// Builds every level in the configured range.
pub fn build_all<T: Scalar>(
    ds: &AMRDataset<T>,
    cfg: &BuildConfig,
) -> Result<Vec<LevelVolumePair<T>>> {
    let effective_max = cfg.validate(ds)?;
    (cfg.min_level..=effective_max)
        .map(|level| build_level(ds, level, cfg))
        .collect()
}

/// Converts the dataset and writes one `level{L}.svol` file per level, each
/// holding the data grid then the mask grid. Returns the paths in level
/// order.
pub fn convert_dataset<T: Scalar>(
    ds: &AMRDataset<T>,
    cfg: &BuildConfig,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    ds.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pairs = build_all(ds, cfg)?;
    let mut paths = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let path = out_dir.join(format!("level{}.svol", pair.level));
        write_svol(&path, &[pair.data.clone(), pair.mask.clone()])?;
        paths.push(path);
    }
    Ok(paths)
}

/// Result of an alignment sweep over built pairs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentReport {
    pub max_deviation: f64,
    pub samples_checked: usize,
}

/// Checks that data cell `g` and mask cell `g` coincide at world center
/// `(g + 1/2) v - V0` on a sample of global indices per level. Deviations
/// beyond 1e-12 are an error naming the level and index.
pub fn verify_alignment<T: Scalar>(pairs: &[LevelVolumePair<T>]) -> Result<AlignmentReport> {
    if pairs.is_empty() {
        return Err(Error::Validation("no level pairs to verify".into()));
    }
    const TOLERANCE: f64 = 1e-12;
    let mut max_deviation = 0.0f64;
    let mut samples_checked = 0;

    for pair in pairs {
        let v = pair.voxel_size;
        let v0 = pair.level0_voxel_size;
        let Some((lo, hi)) = pair.mask.active_bounds() else {
            continue;
        };
        for &index in &sample_indices(lo, hi) {
            let g = index.map(|i| i as i64);
            let expected = g.map(|i| (i as f64 + 0.5) * v - v0);
            // interior data cell g sits at volume index g + 1
            let data_center = pair.data.index_to_world([
                g[0] + 1,
                g[1] + 1,
                g[2] + 1,
            ]);
            let mask_center = pair.mask.index_to_world(g);
            let mut deviation = 0.0f64;
            for a in 0..3 {
                deviation = deviation
                    .max((data_center.axis(a) - mask_center.axis(a)).abs())
                    .max((data_center.axis(a) - expected[a]).abs())
                    .max((mask_center.axis(a) - expected[a]).abs());
            }
            max_deviation = max_deviation.max(deviation);
            samples_checked += 1;
            if deviation > TOLERANCE {
                return Err(Error::Misaligned {
                    level: pair.level,
                    index: g,
                    deviation,
                });
            }
        }
    }
    Ok(AlignmentReport {
        max_deviation,
        samples_checked,
    })
}

fn sample_indices(lo: [i32; 3], hi: [i32; 3]) -> Vec<[i32; 3]> {
    let mut out = Vec::with_capacity(9);
    for corner in 0..8 {
        out.push([
            if corner & 1 == 0 { lo[0] } else { hi[0] },
            if corner & 2 == 0 { lo[1] } else { hi[1] },
            if corner & 4 == 0 { lo[2] } else { hi[2] },
        ]);
    }
    out.push([
        lo[0] + (hi[0] - lo[0]) / 2,
        lo[1] + (hi[1] - lo[1]) / 2,
        lo[2] + (hi[2] - lo[2]) / 2,
    ]);
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::sample::three_level;
    use crate::amr::{synth_amr, FieldKind, SynthSpec};
    use crate::sparse::active_stats;
    use tempfile::tempdir;

    fn constant_three_level() -> AMRDataset<f32> {
        three_level(&FieldKind::Constant(1.0))
    }

    #[test]
    fn voxel_size_formula() {
        let ds = constant_three_level();
        assert_eq!(voxel_size(&ds, 0, 1.0).unwrap(), 0.125);
        assert_eq!(voxel_size(&ds, 2, 1.0).unwrap(), 0.03125);
    }

    #[test]
    fn deep_levels_hit_precision_error() {
        let ds = constant_three_level();
        match voxel_size(&ds, 45, 1.0) {
            Err(Error::Precision { level: 45, .. }) => {}
            other => panic!("expected precision error, got {other:?}"),
        }
    }

    #[test]
    fn level1_translations_match_shift_formulas() {
        let ds = constant_three_level();
        let pair = build_level(&ds, 1, &BuildConfig::default()).unwrap();
        assert_eq!(pair.voxel_size, 0.0625);
        assert_eq!(pair.data.translation(), [-0.15625; 3]);
        assert_eq!(pair.mask.translation(), [-0.09375; 3]);
    }

    #[test]
    fn level0_voxel_counts() {
        let ds = constant_three_level();
        let pair = build_level(&ds, 0, &BuildConfig::default()).unwrap();
        assert_eq!(pair.data.active_voxel_count(), 1000);
        assert_eq!(pair.mask.active_voxel_count(), 512);
    }

    #[test]
    fn mask_volume_matches_child_mask() {
        let ds = constant_three_level();
        let pair = build_level(&ds, 0, &BuildConfig::default()).unwrap();
        let mask = child_mask(&ds, 0, &ds.levels[0][0]);
        let mut i = 0;
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    assert_eq!(pair.mask.value_at([x, y, z]), mask[i]);
                    i += 1;
                }
            }
        }
    }

    #[test]
    fn data_extent_exceeds_mask_extent_by_one_voxel_per_face() {
        let ds = constant_three_level();
        for level in 0..=2 {
            let pair = build_level(&ds, level, &BuildConfig::default()).unwrap();
            let (dlo, dhi) = pair.data.active_bounds().unwrap();
            let (mlo, mhi) = pair.mask.active_bounds().unwrap();
            for a in 0..3 {
                // data volume index g+1 holds mask cell g, so the pad shows
                // up as equal lo and hi+2 in raw volume indices
                assert_eq!(dlo[a], mlo[a]);
                assert_eq!(dhi[a], mhi[a] + 2);
            }
        }
    }

    #[test]
    fn interior_preserved_bit_exactly() {
        let ds = three_level::<f32>(&FieldKind::Gaussian {
            center: [0.4, 0.5, 0.6],
            width: 0.2,
        });
        let pair = build_level(&ds, 1, &BuildConfig::default()).unwrap();
        let grid = &ds.levels[1][0];
        for z in 0..8u32 {
            for y in 0..8u32 {
                for x in 0..8u32 {
                    let g = [
                        grid.start_index[0] + x,
                        grid.start_index[1] + y,
                        grid.start_index[2] + z,
                    ];
                    let got = pair.data.value_at([
                        g[0] as i32 + 1,
                        g[1] as i32 + 1,
                        g[2] as i32 + 1,
                    ]);
                    assert_eq!(got.to_bits(), grid.cell([x, y, z]).to_bits());
                }
            }
        }
    }

    #[test]
    fn convert_writes_one_file_per_level() {
        let dir = tempdir().unwrap();
        let ds = constant_three_level();
        let paths = convert_dataset(&ds, &BuildConfig::default(), dir.path()).unwrap();
        assert_eq!(
            paths,
            vec![
                dir.path().join("level0.svol"),
                dir.path().join("level1.svol"),
                dir.path().join("level2.svol"),
            ]
        );
        for path in &paths {
            let grids: Vec<SparseVolume<f32>> = crate::sparse::read_svol(path).unwrap();
            assert_eq!(grids.len(), 2);
            assert_eq!(grids[0].name, "density");
            assert_eq!(grids[1].name, "mask");
        }
    }

    #[test]
    fn multires_serialization_beats_dense_covering_grid() {
        let dir = tempdir().unwrap();
        let ds = constant_three_level();
        let paths = convert_dataset(&ds, &BuildConfig::default(), dir.path()).unwrap();
        let total: u64 = paths
            .iter()
            .map(|p| std::fs::metadata(p).unwrap().len())
            .sum();
        let dense_bytes = 32u64 * 32 * 32 * 4;
        assert!(
            total < dense_bytes,
            "multires {total} bytes vs dense {dense_bytes}"
        );
    }

    #[test]
    fn alignment_holds_by_construction() {
        let ds = constant_three_level();
        let pairs = build_all(&ds, &BuildConfig::default()).unwrap();
        let report = verify_alignment(&pairs).unwrap();
        assert!(report.max_deviation < 1e-12, "{report:?}");
        assert!(report.samples_checked >= 9 * 3);
    }

    #[test]
    fn unshifted_build_fails_alignment() {
        let ds = constant_three_level();
        let cfg = BuildConfig {
            with_shift: false,
            ..BuildConfig::default()
        };
        let pairs = build_all(&ds, &cfg).unwrap();
        match verify_alignment(&pairs) {
            Err(Error::Misaligned { .. }) => {}
            other => panic!("expected misalignment, got {other:?}"),
        }
    }

    #[test]
    fn single_level_is_trivially_aligned() {
        let spec = SynthSpec {
            domain_dimensions: [8, 8, 8],
            refine_by: 2,
            max_level: 0,
            field: FieldKind::Constant(2.0),
            thresholds: vec![],
            pad: 0,
            field_name: "density".into(),
            periodic: [false; 3],
        };
        let ds: AMRDataset<f32> = synth_amr(&spec).unwrap();
        let pairs = build_all(&ds, &BuildConfig::default()).unwrap();
        verify_alignment(&pairs).unwrap();
    }

    #[test]
    fn masks_are_all_ones_when_disabled_or_finest() {
        let ds = constant_three_level();
        let cfg = BuildConfig {
            with_mask: false,
            ..BuildConfig::default()
        };
        let pair = build_level(&ds, 0, &cfg).unwrap();
        assert_eq!(pair.mask.active_voxel_count(), 512);
        for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    assert_eq!(pair.mask.value_at([x, y, z]), 1.0);
                }
            }
        }
        // clipping max_level re-masks the new finest level as all ones
        let cfg = BuildConfig {
            max_level: Some(1),
            ..BuildConfig::default()
        };
        let pair = build_level(&ds, 1, &cfg).unwrap();
        let (lo, hi) = pair.mask.active_bounds().unwrap();
        assert_eq!((lo, hi), ([4, 4, 4], [11, 11, 11]));
        for z in 4..12 {
            for y in 4..12 {
                for x in 4..12 {
                    assert_eq!(pair.mask.value_at([x, y, z]), 1.0);
                }
            }
        }
    }

    #[test]
    fn scale_multiplies_transforms_but_not_payloads() {
        let ds = three_level::<f32>(&FieldKind::Gaussian {
            center: [0.5; 3],
            width: 0.15,
        });
        let base = build_all(&ds, &BuildConfig::default()).unwrap();
        let scaled_cfg = BuildConfig {
            scale: 16.0,
            ..BuildConfig::default()
        };
        let scaled = build_all(&ds, &scaled_cfg).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            assert_eq!(b.voxel_size, a.voxel_size * 16.0);
            assert_eq!(b.level0_voxel_size, a.level0_voxel_size * 16.0);
            for axis in 0..3 {
                assert_eq!(b.data.translation()[axis], a.data.translation()[axis] * 16.0);
                assert_eq!(b.mask.translation()[axis], a.mask.translation()[axis] * 16.0);
            }
            // payloads identical bit for bit
            assert_eq!(a.data.active_voxel_count(), b.data.active_voxel_count());
            let stats_a = active_stats(&[a.data.clone(), a.mask.clone()]);
            let stats_b = active_stats(&[b.data.clone(), b.mask.clone()]);
            assert_eq!(stats_a, stats_b);
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let ds = constant_three_level();
        let cfg = BuildConfig {
            field: Some("pressure".into()),
            ..BuildConfig::default()
        };
        assert!(matches!(
            build_level(&ds, 0, &cfg),
            Err(Error::Validation(_))
        ));
    }
}
