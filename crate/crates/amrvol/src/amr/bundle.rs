//! AMRI ingestion bundles.
//!
//! A bundle is a directory holding `index.json` plus one raw binary blob per
//! grid: 32-bit IEEE-754 little-endian floats, x-fastest ordering, no header.
//! The index lists the domain shape and, per grid, its level, start index,
//! dims, and blob file name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AMRDataset, AMRGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Serialize, Deserialize)]
struct BundleIndex {
    domain_dimensions: [u32; 3],
    refine_by: u32,
    field_name: String,
    periodic: [bool; 3],
    grids: Vec<GridEntry>,
}

#[derive(Serialize, Deserialize)]
struct GridEntry {
    level: usize,
    start_index: [u32; 3],
    dims: [u32; 3],
    blob: String,
}

/// Loads and validates a bundle. Validation always runs; a dataset that
/// parses but violates an invariant is rejected.
pub fn load_amr<T: Scalar>(path: impl AsRef<Path>) -> Result<AMRDataset<T>> {
    let dir = path.as_ref();
    let index_path = dir.join("index.json");
    let text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let index: BundleIndex = serde_json::from_str(&text)
        .map_err(|e| Error::format(0, format!("index.json: {e}")))?;

    let max_level = index
        .grids
        .iter()
        .map(|g| g.level)
        .max()
        .ok_or_else(|| Error::Validation("bundle lists no grids".into()))?;

    let mut levels: Vec<Vec<AMRGrid<T>>> = (0..=max_level).map(|_| Vec::new()).collect();
    for (gi, entry) in index.grids.iter().enumerate() {
        let blob_path = dir.join(&entry.blob);
        let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let cell_count =
            entry.dims[0] as usize * entry.dims[1] as usize * entry.dims[2] as usize;
        if bytes.len() != cell_count * 4 {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: format!(
                    "blob length mismatch for grid {gi} ({}): expected {} bytes, got {}",
                    entry.blob,
                    cell_count * 4,
                    bytes.len()
                ),
            });
        }
        let cells = bytes
            .chunks_exact(4)
            .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        levels[entry.level].push(AMRGrid {
            level: entry.level,
            start_index: entry.start_index,
            dims: entry.dims,
            cells,
        });
    }

    let ds = AMRDataset {
        domain_dimensions: index.domain_dimensions,
        refine_by: index.refine_by,
        levels,
        periodic: index.periodic,
        field_name: index.field_name,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset as a bundle directory. Values are stored as f32; wider
/// scalars are rounded.
pub fn save_amr<T: Scalar>(ds: &AMRDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    ds.validate()?;
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut grids = Vec::new();
    for (level, level_grids) in ds.levels.iter().enumerate() {
        for (gi, grid) in level_grids.iter().enumerate() {
            let blob = format!("level{level}_grid{gi}.f32");
            let mut bytes = Vec::with_capacity(grid.cells.len() * 4);
            for v in &grid.cells {
                bytes.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
            let blob_path = dir.join(&blob);
            fs::write(&blob_path, bytes).map_err(|e| Error::io(&blob_path, e))?;
            grids.push(GridEntry {
                level,
                start_index: grid.start_index,
                dims: grid.dims,
                blob,
            });
        }
    }

    let index = BundleIndex {
        domain_dimensions: ds.domain_dimensions,
        refine_by: ds.refine_by,
        field_name: ds.field_name.clone(),
        periodic: ds.periodic,
        grids,
    };
    let index_path = dir.join("index.json");
    let text = serde_json::to_string_pretty(&index).expect("index serializes");
    fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))
}
