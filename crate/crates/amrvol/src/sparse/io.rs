//! SVOL file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "SVOL" | u32 version = 1 | u32 grid count
//! per grid:
//!   u16 name length | name bytes (UTF-8)
//!   f64 voxel_size | f64 x3 translation | f32 background | u64 leaf count
//!   per leaf:
//!     i32 x3 origin | 64-byte activity bitmask | 512 x f32 values
//! ```
//!
//! The activity bitmask is x-fastest within the 8x8x8 leaf, bit `i` living in
//! byte `i / 8` at position `i % 8`. Values are stored as f32; reading into a
//! wider scalar widens exactly, writing from a wider scalar rounds.

use std::fs;
use std::path::Path;

use super::{Leaf, SparseVolume, LEAF_VOXELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SVOL";
const VERSION: u32 = 1;

const FILE_HEADER_BYTES: u64 = 12;
const LEAF_BYTES: u64 = 12 + 64 + 512 * 4;

/// Exact counts for a set of volumes, as defined by the file format.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ActiveStats {
    pub active_voxels: u64,
    pub leaves: u64,
    pub serialized_bytes: u64,
}

/// Counts active voxels, leaves, and the exact serialized size of the file
/// `write_svol` would produce for `volumes`.
pub fn active_stats<T: Scalar>(volumes: &[SparseVolume<T>]) -> ActiveStats {
    let mut stats = ActiveStats {
        active_voxels: 0,
        leaves: 0,
        serialized_bytes: FILE_HEADER_BYTES,
    };
    for vol in volumes {
        stats.active_voxels += vol.active_voxel_count();
        stats.leaves += vol.leaf_count();
        stats.serialized_bytes +=
            2 + vol.name.len() as u64 + 8 + 24 + 4 + 8 + vol.leaf_count() * LEAF_BYTES;
    }
    stats
}

/// Writes the volumes to one SVOL file, preserving order.
pub fn write_svol<T: Scalar>(path: impl AsRef<Path>, volumes: &[SparseVolume<T>]) -> Result<()> {
    let path = path.as_ref();
    if volumes.is_empty() {
        return Err(Error::Validation(
            "refusing to write an SVOL file with zero grids".into(),
        ));
    }
    let stats = active_stats(volumes);
    let mut buf = Vec::with_capacity(stats.serialized_bytes as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(volumes.len() as u32).to_le_bytes());
    for vol in volumes {
        let name = vol.name.as_bytes();
        assert!(name.len() <= u16::MAX as usize, "grid name too long");
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&vol.voxel_size().to_le_bytes());
        for t in vol.translation() {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        buf.extend_from_slice(&(vol.background.as_f64() as f32).to_le_bytes());
        buf.extend_from_slice(&vol.leaf_count().to_le_bytes());
        for (origin, leaf) in vol.leaves() {
            for o in origin {
                buf.extend_from_slice(&o.to_le_bytes());
            }
            for word in leaf.mask {
                buf.extend_from_slice(&word.to_le_bytes());
            }
            for value in leaf.values.iter() {
                buf.extend_from_slice(&(value.as_f64() as f32).to_le_bytes());
            }
        }
    }
    debug_assert_eq!(buf.len() as u64, stats.serialized_bytes);
    fs::write(path, &buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::format(
                self.offset as u64,
                format!(
                    "unexpected end of file: need {n} bytes, {} remain",
                    self.bytes.len() - self.offset
                ),
            ));
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads every grid from an SVOL file, preserving order.
pub fn read_svol<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<SparseVolume<T>>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        bytes: &bytes,
        offset: 0,
    };

    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"SVOL\"", String::from_utf8_lossy(magic)),
        ));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let grid_count = cur.u32()?;

    let mut volumes = Vec::with_capacity(grid_count as usize);
    for _ in 0..grid_count {
        let name_offset = cur.offset as u64;
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::format(name_offset, "grid name is not UTF-8".to_string()))?
            .to_string();
        let voxel_size_offset = cur.offset as u64;
        let voxel_size = cur.f64()?;
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::format(
                voxel_size_offset,
                format!("voxel size {voxel_size} is not positive and finite"),
            ));
        }
        let translation = [cur.f64()?, cur.f64()?, cur.f64()?];
        let background = cur.f32()?;
        let leaf_count = cur.u64()?;

        let mut vol = SparseVolume::<T>::new(name, voxel_size);
        vol.set_translation(translation);
        vol.background = T::from_f64(background as f64);
        for _ in 0..leaf_count {
            let origin = [cur.i32()?, cur.i32()?, cur.i32()?];
            let mut mask = [0u64; 8];
            for word in &mut mask {
                *word = cur.u64()?;
            }
            let raw = cur.take(LEAF_VOXELS * 4)?;
            let mut values = Box::new([T::zero(); LEAF_VOXELS]);
            for (i, chunk) in raw.chunks_exact(4).enumerate() {
                values[i] = T::from_f64(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
            vol.insert_leaf(origin, Leaf { values, mask });
        }
        volumes.push(vol);
    }
    if cur.offset != bytes.len() {
        return Err(Error::format(
            cur.offset as u64,
            format!("{} trailing bytes after last grid", bytes.len() - cur.offset),
        ));
    }
    Ok(volumes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_volume(name: &str) -> SparseVolume<f32> {
        let mut vol = SparseVolume::new(name, 0.0625);
        vol.set_translation([-0.15625, -0.15625, -0.15625]);
        let arr: Vec<f32> = (0..27).map(|i| i as f32 * 0.371).collect();
        vol.copy_from_array(&arr, [3, 3, 3], [4, 4, 4]);
        vol.set_value([-5, 0, 19], f32::MIN_POSITIVE);
        vol
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("two.svol");
        let vols = vec![sample_volume("density"), sample_volume("mask")];
        write_svol(&path, &vols).unwrap();
        let back: Vec<SparseVolume<f32>> = read_svol(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].name, "density");
        assert_eq!(back[1].name, "mask");
        assert_eq!(back, vols);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.svol");
        std::fs::write(&path, b"XVOL\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = read_svol::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_reports_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.svol");
        write_svol(&path, &[sample_volume("density")]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(100);
        std::fs::write(&path, &bytes).unwrap();
        let err = read_svol::<f32>(&path).unwrap_err();
        match err {
            Error::Format { offset, .. } => assert!(offset <= 100),
            other => panic!("expected format error, got {other}"),
        }
    }

    #[test]
    fn stats_match_file_size_on_disk() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("stats.svol");
        let vols = vec![sample_volume("density")];
        write_svol(&path, &vols).unwrap();
        let stats = active_stats(&vols);
        assert_eq!(stats.serialized_bytes, std::fs::metadata(&path).unwrap().len());
        assert_eq!(stats.active_voxels, 28);
        assert_eq!(stats.leaves, vols[0].leaf_count());
    }

    #[test]
    fn empty_volume_stats() {
        let vols = vec![SparseVolume::<f32>::new("empty", 1.0)];
        let stats = active_stats(&vols);
        assert_eq!(stats.active_voxels, 0);
        assert_eq!(stats.leaves, 0);
        // file header plus the grid header for one empty grid
        assert_eq!(stats.serialized_bytes, 12 + 2 + 5 + 8 + 24 + 4 + 8);
    }

    #[test]
    fn dense_cube_counts() {
        let mut vol = SparseVolume::<f32>::new("dense", 1.0);
        vol.copy_from_array(&vec![1.0; 32 * 32 * 32], [32, 32, 32], [0, 0, 0]);
        assert_eq!(vol.active_voxel_count(), 32_768);
        assert_eq!(vol.leaf_count(), 64);
    }
}
