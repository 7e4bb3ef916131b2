//! Sparse tiled scalar volumes.
//!
//! A [`SparseVolume`] stores voxels in 8x8x8 leaf tiles allocated on demand,
//! each with a 512-bit activity mask. Inactive voxels read as the background
//! value. The stored value lives at the voxel *center*: index `i` maps to
//! world `i * voxel_size + translation` per axis, and voxel `i` owns the
//! half-open world interval `[(i - 1/2)v + t, (i + 1/2)v + t)`.

mod io;

pub use io::{active_stats, read_svol, write_svol, ActiveStats};

use std::collections::BTreeMap;

use crate::scalar::Scalar;
use crate::math::{Aabb, Vec3};

pub const LEAF_DIM: i32 = 8;
pub const LEAF_VOXELS: usize = 512;

/// One 8x8x8 tile of voxels plus its activity bits.
///
/// Bit order is x-fastest: voxel (x,y,z) is bit `x + 8y + 64z`, stored
/// little-endian across the eight mask words.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaf<T> {
    pub values: Box<[T; LEAF_VOXELS]>,
    pub mask: [u64; 8],
}

impl<T: Scalar> Leaf<T> {
    fn new(background: T) -> Self {
        Leaf {
            values: Box::new([background; LEAF_VOXELS]),
            mask: [0; 8],
        }
    }

    #[inline]
    fn bit(offset: usize) -> (usize, u64) {
        (offset >> 6, 1u64 << (offset & 63))
    }

    #[inline]
    pub fn is_active(&self, offset: usize) -> bool {
        let (word, bit) = Self::bit(offset);
        self.mask[word] & bit != 0
    }

    #[inline]
    fn activate(&mut self, offset: usize, value: T) {
        let (word, bit) = Self::bit(offset);
        self.mask[word] |= bit;
        self.values[offset] = value;
    }

    pub fn active_count(&self) -> u64 {
        self.mask.iter().map(|w| w.count_ones() as u64).sum()
    }
}

/// Sparse scalar grid with a world transform.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVolume<T> {
    pub name: String,
    pub background: T,
    voxel_size: f64,
    translation: [f64; 3],
    leaves: BTreeMap<[i32; 3], Leaf<T>>,
}

#[inline]
fn leaf_origin(index: [i32; 3]) -> [i32; 3] {
    // Arithmetic shift gives floor division for negative indices.
    [
        (index[0] >> 3) << 3,
        (index[1] >> 3) << 3,
        (index[2] >> 3) << 3,
    ]
}

#[inline]
fn leaf_offset(index: [i32; 3]) -> usize {
    let x = (index[0] & 7) as usize;
    let y = (index[1] & 7) as usize;
    let z = (index[2] & 7) as usize;
    x + 8 * y + 64 * z
}

impl<T: Scalar> SparseVolume<T> {
    pub fn new(name: impl Into<String>, voxel_size: f64) -> Self {
        assert!(voxel_size > 0.0, "voxel size must be positive");
        SparseVolume {
            name: name.into(),
            background: T::zero(),
            voxel_size,
            translation: [0.0; 3],
            leaves: BTreeMap::new(),
        }
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn set_translation(&mut self, t: [f64; 3]) {
        self.translation = t;
    }

    pub fn set_voxel_size(&mut self, v: f64) {
        assert!(v > 0.0, "voxel size must be positive");
        self.voxel_size = v;
    }

    pub fn leaf_count(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn active_voxel_count(&self) -> u64 {
        self.leaves.values().map(Leaf::active_count).sum()
    }

    pub(crate) fn leaves(&self) -> impl Iterator<Item = (&[i32; 3], &Leaf<T>)> {
        self.leaves.iter()
    }

    pub(crate) fn insert_leaf(&mut self, origin: [i32; 3], leaf: Leaf<T>) {
        self.leaves.insert(origin, leaf);
    }

    /// World center of the voxel at `index`.
    pub fn index_to_world(&self, index: [i64; 3]) -> Vec3 {
        Vec3::new(
            index[0] as f64 * self.voxel_size + self.translation[0],
            index[1] as f64 * self.voxel_size + self.translation[1],
            index[2] as f64 * self.voxel_size + self.translation[2],
        )
    }

    /// Index of the voxel whose half-open world interval contains `p`.
    pub fn containing_index(&self, p: Vec3) -> [i32; 3] {
        let mut out = [0i32; 3];
        for axis in 0..3 {
            let q = (p.axis(axis) - self.translation[axis]) / self.voxel_size + 0.5;
            out[axis] = q.floor().clamp(i32::MIN as f64, i32::MAX as f64) as i32;
        }
        out
    }

    /// Stored value at `index`, or the background for inactive voxels.
    pub fn value_at(&self, index: [i32; 3]) -> T {
        match self.leaves.get(&leaf_origin(index)) {
            Some(leaf) => {
                let offset = leaf_offset(index);
                if leaf.is_active(offset) {
                    leaf.values[offset]
                } else {
                    self.background
                }
            }
            None => self.background,
        }
    }

    pub fn is_active(&self, index: [i32; 3]) -> bool {
        self.leaves
            .get(&leaf_origin(index))
            .is_some_and(|leaf| leaf.is_active(leaf_offset(index)))
    }

    /// Writes one voxel and marks it active.
    pub fn set_value(&mut self, index: [i32; 3], value: T) {
        let background = self.background;
        let leaf = self
            .leaves
            .entry(leaf_origin(index))
            .or_insert_with(|| Leaf::new(background));
        leaf.activate(leaf_offset(index), value);
    }

    /// Copies a dense x-fastest array into the volume at `origin`, marking
    /// every written voxel active. Overlapping writes overwrite.
    pub fn copy_from_array(&mut self, arr: &[T], dims: [u32; 3], origin: [i32; 3]) {
        let expected = dims[0] as usize * dims[1] as usize * dims[2] as usize;
        assert_eq!(arr.len(), expected, "array length must match dims");
        let background = self.background;

        // Walk the leaf tiles covered by the write region and fill each one
        // in a single pass rather than doing a map lookup per voxel.
        let lo = origin;
        let hi = [
            origin[0] + dims[0] as i32,
            origin[1] + dims[1] as i32,
            origin[2] + dims[2] as i32,
        ];
        let leaf_lo = leaf_origin(lo);
        let mut lz = leaf_lo[2];
        while lz < hi[2] {
            let mut ly = leaf_lo[1];
            while ly < hi[1] {
                let mut lx = leaf_lo[0];
                while lx < hi[0] {
                    let leaf = self
                        .leaves
                        .entry([lx, ly, lz])
                        .or_insert_with(|| Leaf::new(background));
                    let x0 = lo[0].max(lx);
                    let x1 = hi[0].min(lx + LEAF_DIM);
                    let y0 = lo[1].max(ly);
                    let y1 = hi[1].min(ly + LEAF_DIM);
                    let z0 = lo[2].max(lz);
                    let z1 = hi[2].min(lz + LEAF_DIM);
                    for z in z0..z1 {
                        for y in y0..y1 {
                            let src_row = ((z - lo[2]) as usize * dims[1] as usize
                                + (y - lo[1]) as usize)
                                * dims[0] as usize;
                            for x in x0..x1 {
                                let src = src_row + (x - lo[0]) as usize;
                                leaf.activate(leaf_offset([x, y, z]), arr[src]);
                            }
                        }
                    }
                    lx += LEAF_DIM;
                }
                ly += LEAF_DIM;
            }
            lz += LEAF_DIM;
        }
    }

    /// Uninterpolated read at the voxel containing `p`.
    pub fn index_sample(&self, p: Vec3) -> T {
        self.value_at(self.containing_index(p))
    }

    /// Trilinear interpolation among the eight voxel centers surrounding `p`.
    /// Inactive voxels contribute the background, so values fall off toward
    /// the background at the edge of the active region.
    pub fn trilinear_sample(&self, p: Vec3) -> f64 {
        let mut base = [0i32; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let q = (p.axis(axis) - self.translation[axis]) / self.voxel_size;
            let f = q.floor();
            base[axis] = f.clamp(i32::MIN as f64, (i32::MAX - 1) as f64) as i32;
            frac[axis] = q - f;
        }
        let mut corners = [0f64; 8];
        for (c, corner) in corners.iter_mut().enumerate() {
            let idx = [
                base[0] + (c & 1) as i32,
                base[1] + ((c >> 1) & 1) as i32,
                base[2] + ((c >> 2) & 1) as i32,
            ];
            *corner = self.value_at(idx).as_f64();
        }
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let x00 = lerp(corners[0], corners[1], frac[0]);
        let x10 = lerp(corners[2], corners[3], frac[0]);
        let x01 = lerp(corners[4], corners[5], frac[0]);
        let x11 = lerp(corners[6], corners[7], frac[0]);
        let y0 = lerp(x00, x10, frac[1]);
        let y1 = lerp(x01, x11, frac[1]);
        lerp(y0, y1, frac[2])
    }

    /// Min/max of the active voxel values, or None for an empty volume.
    pub fn active_value_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for (_, leaf) in &self.leaves {
            for offset in 0..LEAF_VOXELS {
                if !leaf.is_active(offset) {
                    continue;
                }
                let v = leaf.values[offset].as_f64();
                range = Some(match range {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        range
    }

    /// Min/max active voxel indices, or None for an empty volume.
    pub fn active_bounds(&self) -> Option<([i32; 3], [i32; 3])> {
        let mut bounds: Option<([i32; 3], [i32; 3])> = None;
        for (origin, leaf) in &self.leaves {
            for offset in 0..LEAF_VOXELS {
                if !leaf.is_active(offset) {
                    continue;
                }
                let idx = [
                    origin[0] + (offset & 7) as i32,
                    origin[1] + ((offset >> 3) & 7) as i32,
                    origin[2] + (offset >> 6) as i32,
                ];
                bounds = Some(match bounds {
                    None => (idx, idx),
                    Some((mut lo, mut hi)) => {
                        for a in 0..3 {
                            lo[a] = lo[a].min(idx[a]);
                            hi[a] = hi[a].max(idx[a]);
                        }
                        (lo, hi)
                    }
                });
            }
        }
        bounds
    }

    /// World-space box spanned by the active voxels' half-open intervals.
    pub fn world_bounds(&self) -> Option<Aabb> {
        let (lo, hi) = self.active_bounds()?;
        let v = self.voxel_size;
        let t = self.translation;
        Some(Aabb::new(
            Vec3::new(
                (lo[0] as f64 - 0.5) * v + t[0],
                (lo[1] as f64 - 0.5) * v + t[1],
                (lo[2] as f64 - 0.5) * v + t[2],
            ),
            Vec3::new(
                (hi[0] as f64 + 0.5) * v + t[0],
                (hi[1] as f64 + 0.5) * v + t[1],
                (hi[2] as f64 + 0.5) * v + t[2],
            ),
        ))
    }
}
