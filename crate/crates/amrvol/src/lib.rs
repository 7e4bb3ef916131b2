//! Converts nested multiresolution (AMR) scalar-field data into per-level
//! sparse volumes with child masks, ghost zones, and alignment transforms,
//! and renders them seam-free with an emission-absorption raymarcher whose
//! shader samples masks by uninterpolated cell index.
//!
//! The pipeline runs in five stages:
//!
//! 1. represent each refinement level as one sparse uniform volume,
//! 2. export a mask per level marking where finer data exists,
//! 3. pad each data grid with one ghost voxel so edge interpolation does
//!    not fall off to the background,
//! 4. shift data and mask volumes so all levels align in world space,
//! 5. sample masks by cell index (not interpolated) in the shader so exactly
//!    one level renders at any point.
//!
//! Stored field values are generic over [`Scalar`] (f32 or f64); world-space
//! transforms are always f64. The `Float*` aliases below fix the f32 storage
//! used by the file formats.

pub mod amr;
pub mod bench;
pub mod error;
pub mod level;
pub mod math;
pub mod render;
pub mod scalar;
pub mod sparse;

pub use amr::{
    child_mask, covering_grid, ghost_zones, load_amr, sample_amr, save_amr, synth_amr,
    AMRDataset, AMRGrid, FieldKind, SynthSpec,
};
pub use bench::{run_benchmark, BenchOptions, BenchReport};
pub use error::{Error, Result};
pub use level::{
    build_all, build_level, convert_dataset, verify_alignment, voxel_size, AlignmentReport,
    BuildConfig, LevelVolumePair,
};
pub use math::{Aabb, Vec3};
pub use render::{
    generate_ray, image_diff, read_pfm, read_ppm, render_image, shade_sample, write_image,
    Camera, DiffStats, Image, ImageFormat, MaskMode, RenderSettings, ShaderConfig,
    TransferFunction,
};
pub use scalar::Scalar;
pub use sparse::{active_stats, read_svol, write_svol, ActiveStats, SparseVolume};

/// f32-valued dataset, the storage type of AMRI bundles.
pub type FloatDataset = AMRDataset<f32>;
/// f32-valued grid.
pub type FloatGrid = AMRGrid<f32>;
/// f32-valued sparse volume, the storage type of SVOL files.
pub type FloatVolume = SparseVolume<f32>;
/// f32-valued level pair as produced by the conversion pipeline.
pub type FloatLevelPair = LevelVolumePair<f32>;
/// f64-valued sparse volume for double-precision scratch work.
pub type DoubleVolume = SparseVolume<f64>;
