//! Per-grid and whole-dataset field operations: child masks, ghost zones,
//! dense resampling, and point sampling.

use super::{AMRDataset, AMRGrid, IndexBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Marks each cell of `grid` with 1.0 where no finer-level grid covers it
/// and 0.0 where one does. A cell counts as covered only when all
/// `refine_by`^3 of its child indices fall inside some finer grid; the
/// children may be split across several grids.
pub fn child_mask<T: Scalar>(ds: &AMRDataset<T>, level: usize, grid: &AMRGrid<T>) -> Vec<T> {
    debug_assert_eq!(grid.level, level);
    let mut mask = vec![T::one(); grid.cell_count()];
    if level + 1 >= ds.levels.len() {
        return mask;
    }
    let rb = ds.refine_by as u64;
    let children: Vec<IndexBox> = ds.levels[level + 1].iter().map(|g| g.extent()).collect();

    let mut out = 0;
    for z in 0..grid.dims[2] as u64 {
        for y in 0..grid.dims[1] as u64 {
            for x in 0..grid.dims[0] as u64 {
                let g = [
                    grid.start_index[0] as u64 + x,
                    grid.start_index[1] as u64 + y,
                    grid.start_index[2] as u64 + z,
                ];
                let child_box =
                    IndexBox::new([g[0] * rb, g[1] * rb, g[2] * rb], [
                        (g[0] + 1) * rb,
                        (g[1] + 1) * rb,
                        (g[2] + 1) * rb,
                    ]);
                if is_covered(&child_box, &children) {
                    mask[out] = T::zero();
                }
                out += 1;
            }
        }
    }
    mask
}

fn is_covered(child_box: &IndexBox, children: &[IndexBox]) -> bool {
    // Fast path: one grid swallows the whole box.
    if children
        .iter()
        .any(|c| c.intersect(child_box) == *child_box)
    {
        return true;
    }
    // Otherwise coverage may be split across grids.
    let mut uncovered = vec![*child_box];
    for c in children {
        uncovered = super::subtract_all(uncovered, c);
        if uncovered.is_empty() {
            return true;
        }
    }
    false
}

/// Returns `grid`'s cells padded by `n` ghost cells per face
/// (dims + 2n per axis). Only n = 1 is supported.
///
/// Each ghost cell takes the value of the same-level cell at its index when
/// one exists. Otherwise it is filled by trilinear interpolation of the
/// parent level's cell-centered values at the ghost center, recursing to
/// coarser levels until covered. Ghost indices wrap on periodic axes and
/// clamp to the domain boundary cell elsewhere.
pub fn ghost_zones<T: Scalar>(
    ds: &AMRDataset<T>,
    grid: &AMRGrid<T>,
    n: u32,
) -> Result<Vec<T>> {
    if n != 1 {
        return Err(Error::Unsupported(format!(
            "ghost zone width {n} is not supported; only 1 is"
        )));
    }
    let level = grid.level;
    let res = ds.resolution(level)? as i64;
    let out_dims = [grid.dims[0] + 2, grid.dims[1] + 2, grid.dims[2] + 2];
    let mut out =
        vec![T::zero(); out_dims[0] as usize * out_dims[1] as usize * out_dims[2] as usize];

    let mut write = 0;
    for z in 0..out_dims[2] as i64 {
        for y in 0..out_dims[1] as i64 {
            for x in 0..out_dims[0] as i64 {
                let interior = x >= 1
                    && x <= grid.dims[0] as i64
                    && y >= 1
                    && y <= grid.dims[1] as i64
                    && z >= 1
                    && z <= grid.dims[2] as i64;
                out[write] = if interior {
                    grid.cell([(x - 1) as u32, (y - 1) as u32, (z - 1) as u32])
                } else {
                    let gi = [
                        grid.start_index[0] as i64 + x - 1,
                        grid.start_index[1] as i64 + y - 1,
                        grid.start_index[2] as i64 + z - 1,
                    ];
                    let li = resolve_index(gi, res, ds.periodic);
                    ghost_value(ds, level, li)
                };
                write += 1;
            }
        }
    }
    Ok(out)
}

/// Wraps periodic axes and clamps the rest into [0, res).
fn resolve_index(idx: [i64; 3], res: i64, periodic: [bool; 3]) -> [u64; 3] {
    let mut out = [0u64; 3];
    for a in 0..3 {
        out[a] = if periodic[a] {
            idx[a].rem_euclid(res) as u64
        } else {
            idx[a].clamp(0, res - 1) as u64
        };
    }
    out
}

fn ghost_value<T: Scalar>(ds: &AMRDataset<T>, level: usize, idx: [u64; 3]) -> T {
    if let Some(g) = ds.grid_covering(level, idx) {
        return g.value_at_global(idx);
    }
    if level == 0 {
        // Uncovered at the coarsest level: nothing to interpolate from.
        return T::zero();
    }
    let center = ds.cell_center(level, idx);
    T::from_f64(coarse_sample(ds, level - 1, center))
}

/// Trilinear interpolation of cell-centered values at `level`, cascading
/// uncovered stencil cells to coarser levels at their own centers.
fn coarse_sample<T: Scalar>(ds: &AMRDataset<T>, level: usize, p: [f64; 3]) -> f64 {
    let res = ds
        .resolution(level)
        .expect("valid dataset resolutions fit u64") as i64;
    let mut base = [0i64; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let q = p[a] * res as f64 - 0.5;
        let f = q.floor();
        base[a] = f as i64;
        frac[a] = q - f;
    }
    let mut corners = [0f64; 8];
    for (c, corner) in corners.iter_mut().enumerate() {
        let raw = [
            base[0] + (c & 1) as i64,
            base[1] + ((c >> 1) & 1) as i64,
            base[2] + ((c >> 2) & 1) as i64,
        ];
        let idx = resolve_index(raw, res, ds.periodic);
        *corner = cascading_cell_value(ds, level, idx);
    }
    trilerp(&corners, frac)
}

fn cascading_cell_value<T: Scalar>(ds: &AMRDataset<T>, level: usize, idx: [u64; 3]) -> f64 {
    if let Some(g) = ds.grid_covering(level, idx) {
        return g.value_at_global(idx).as_f64();
    }
    if level == 0 {
        return 0.0;
    }
    coarse_sample(ds, level - 1, ds.cell_center(level, idx))
}

fn trilerp(corners: &[f64; 8], frac: [f64; 3]) -> f64 {
    let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
    let x00 = lerp(corners[0], corners[1], frac[0]);
    let x10 = lerp(corners[2], corners[3], frac[0]);
    let x01 = lerp(corners[4], corners[5], frac[0]);
    let x11 = lerp(corners[6], corners[7], frac[0]);
    let y0 = lerp(x00, x10, frac[1]);
    let y1 = lerp(x01, x11, frac[1]);
    lerp(y0, y1, frac[2])
}

/// Resamples the whole hierarchy onto a dense array at `level`'s resolution
/// (x-fastest). Each cell takes the value of the finest grid at or below
/// `level` covering it; coarser values replicate into their children
/// (zeroth-order fill).
pub fn covering_grid<T: Scalar>(ds: &AMRDataset<T>, level: usize) -> Result<Vec<T>> {
    if level > ds.max_level() {
        return Err(Error::Validation(format!(
            "covering grid level {level} exceeds max level {}",
            ds.max_level()
        )));
    }
    let res = ds.resolution(level)?;
    let cells = res
        .checked_mul(res)
        .and_then(|c| c.checked_mul(res))
        .filter(|&c| c <= usize::MAX as u64 / std::mem::size_of::<T>() as u64)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "covering grid at level {level} ({res}^3 cells) exceeds addressable size"
            ))
        })? as usize;

    let mut out = vec![T::zero(); cells];
    let rb = ds.refine_by as u64;
    for src_level in 0..=level {
        let block = rb.pow((level - src_level) as u32);
        for grid in &ds.levels[src_level] {
            for z in 0..grid.dims[2] as u64 {
                for y in 0..grid.dims[1] as u64 {
                    for x in 0..grid.dims[0] as u64 {
                        let value = grid.cell([x as u32, y as u32, z as u32]);
                        let ox = (grid.start_index[0] as u64 + x) * block;
                        let oy = (grid.start_index[1] as u64 + y) * block;
                        let oz = (grid.start_index[2] as u64 + z) * block;
                        for bz in 0..block {
                            for by in 0..block {
                                let row = ((oz + bz) * res + oy + by) * res + ox;
                                out[row as usize..(row + block) as usize].fill(value);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Samples the field at a world point by trilinear interpolation within the
/// finest grid whose index extent contains it (clamped at grid edges).
/// Points covered by no grid at all read 0.
pub fn sample_amr<T: Scalar>(ds: &AMRDataset<T>, p: [f64; 3]) -> Result<f64> {
    if p.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
        return Err(Error::OutsideDomain(p[0], p[1], p[2]));
    }
    for level in (0..ds.levels.len()).rev() {
        let res = ds.resolution(level)?;
        let idx = [
            ((p[0] * res as f64) as u64).min(res - 1),
            ((p[1] * res as f64) as u64).min(res - 1),
            ((p[2] * res as f64) as u64).min(res - 1),
        ];
        if let Some(grid) = ds.grid_covering(level, idx) {
            return Ok(grid_trilinear(grid, res, p));
        }
    }
    Ok(0.0)
}

/// Clamped trilinear interpolation of one grid's cell-centered values.
fn grid_trilinear<T: Scalar>(grid: &AMRGrid<T>, res: u64, p: [f64; 3]) -> f64 {
    let mut base = [0u32; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        // local cell-center coordinate within the grid
        let q = p[a] * res as f64 - grid.start_index[a] as f64 - 0.5;
        if grid.dims[a] == 1 {
            base[a] = 0;
            frac[a] = 0.0;
            continue;
        }
        let clamped = q.clamp(0.0, (grid.dims[a] - 1) as f64);
        let f = clamped.floor().min((grid.dims[a] - 2) as f64);
        base[a] = f as u32;
        frac[a] = clamped - f;
    }
    let mut corners = [0f64; 8];
    for (c, corner) in corners.iter_mut().enumerate() {
        let local = [
            base[0] + (c & 1) as u32,
            base[1] + ((c >> 1) & 1) as u32,
            base[2] + ((c >> 2) & 1) as u32,
        ];
        *corner = grid.cell(local).as_f64();
    }
    trilerp(&corners, frac)
}
