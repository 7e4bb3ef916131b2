//! Uniform-grid vs multiresolution comparison harness.
//!
//! Builds both representations of a dataset, renders each from an outside
//! and an inside camera through the same raymarcher, and reports exact voxel
//! and byte counts plus wall-clock timings. The uniform baseline is a single
//! dense volume with masks disabled, so timing differences isolate the data
//! representation rather than the renderer.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::amr::{covering_grid, AMRDataset};
use crate::error::{Error, Result};
use crate::level::{build_all, voxel_size, BuildConfig, LevelVolumePair};
use crate::math::Vec3;
use crate::render::{render_image, Camera, Image, ImageFormat, MaskMode, RenderSettings, ShaderConfig};
use crate::scalar::Scalar;
use crate::sparse::{active_stats, read_svol, write_svol, SparseVolume};

/// Benchmark knobs beyond the conversion config itself.
#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub build: BuildConfig,
    /// Level of the dense covering grid; defaults to the dataset's finest.
    pub uniform_level: Option<usize>,
    /// Timing repeats to average (counts never vary across repeats).
    pub repeats: usize,
    /// Ceiling on the dense side's payload; beyond it the uniform
    /// representation is reported infeasible rather than built.
    pub max_uniform_bytes: u64,
    pub image_format: ImageFormat,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            build: BuildConfig::default(),
            uniform_level: None,
            repeats: 3,
            max_uniform_bytes: 1 << 30,
            image_format: ImageFormat::Ppm,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentationReport {
    pub representation: String,
    pub active_data_voxels: u64,
    pub active_mask_voxels: u64,
    pub serialized_bytes: u64,
    pub load_ms: f64,
    pub render_outside_ms: f64,
    pub render_inside_ms: f64,
    /// Process peak resident set after this phase, when the platform
    /// exposes it. A process-wide high-water mark, so later phases include
    /// earlier ones.
    pub peak_rss_bytes: Option<u64>,
    pub image_outside: PathBuf,
    pub image_inside: PathBuf,
}

/// uniform / multiresolution, computed only when both sides exist.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BenchRatios {
    pub voxel_reduction: f64,
    pub byte_reduction: f64,
    pub load_time: f64,
    pub render_outside: f64,
    pub render_inside: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Environment {
    pub threads: usize,
    pub dt: f64,
    pub width: u32,
    pub height: u32,
    pub repeats: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub multiresolution: RepresentationReport,
    pub uniform: Option<RepresentationReport>,
    /// Why the uniform side is missing, when it is.
    pub uniform_infeasible: Option<String>,
    pub ratios: Option<BenchRatios>,
    pub environment: Environment,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("representation,metric,value,unit\n");
        let mut push = |rep: &str, metric: &str, value: String, unit: &str| {
            out.push_str(&format!("{rep},{metric},{value},{unit}\n"));
        };
        for rep in std::iter::once(&self.multiresolution).chain(self.uniform.iter()) {
            let name = rep.representation.as_str();
            push(name, "active_data_voxels", rep.active_data_voxels.to_string(), "voxels");
            push(name, "active_mask_voxels", rep.active_mask_voxels.to_string(), "voxels");
            push(name, "serialized_bytes", rep.serialized_bytes.to_string(), "bytes");
            push(name, "load_time", format!("{:.3}", rep.load_ms), "ms");
            push(name, "render_time_outside", format!("{:.3}", rep.render_outside_ms), "ms");
            push(name, "render_time_inside", format!("{:.3}", rep.render_inside_ms), "ms");
            if let Some(rss) = rep.peak_rss_bytes {
                push(name, "peak_rss", rss.to_string(), "bytes");
            }
        }
        if let Some(r) = &self.ratios {
            push("uniform/multiresolution", "voxel_reduction", format!("{:.3}", r.voxel_reduction), "ratio");
            push("uniform/multiresolution", "byte_reduction", format!("{:.3}", r.byte_reduction), "ratio");
            push("uniform/multiresolution", "load_time", format!("{:.3}", r.load_time), "ratio");
            push("uniform/multiresolution", "render_outside", format!("{:.3}", r.render_outside), "ratio");
            push("uniform/multiresolution", "render_inside", format!("{:.3}", r.render_inside), "ratio");
        }
        out
    }
}

/// Peak resident set size in bytes, read from the platform when possible.
pub fn peak_rss_bytes() -> Option<u64> {
    #[cfg(target_os = "linux")]
    {
        let status = std::fs::read_to_string("/proc/self/status").ok()?;
        for line in status.lines() {
            if let Some(rest) = line.strip_prefix("VmHWM:") {
                let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
                return Some(kb * 1024);
            }
        }
        None
    }
    #[cfg(not(target_os = "linux"))]
    {
        None
    }
}

fn average_ms<R>(repeats: usize, mut f: impl FnMut() -> Result<R>) -> Result<(R, f64)> {
    let repeats = repeats.max(1);
    let mut total = 0.0;
    let mut last = None;
    for _ in 0..repeats {
        let start = Instant::now();
        last = Some(f()?);
        total += start.elapsed().as_secs_f64() * 1e3;
    }
    Ok((last.unwrap(), total / repeats as f64))
}

fn image_ext(format: ImageFormat) -> &'static str {
    match format {
        ImageFormat::Ppm => "ppm",
        ImageFormat::Pfm => "pfm",
    }
}

/// Runs the full comparison and writes images, `bench.json`, and `bench.csv`
/// into `out_dir`.
pub fn run_benchmark<T: Scalar>(
    ds: &AMRDataset<T>,
    opts: &BenchOptions,
    cam_outside: &Camera,
    cam_inside: &Camera,
    shader: &ShaderConfig,
    settings: &RenderSettings,
    out_dir: impl AsRef<Path>,
) -> Result<BenchReport> {
    ds.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    // --- multiresolution side (first, so its RSS mark is unpolluted) ---
    let pairs = build_all(ds, &opts.build)?;
    let mut level_paths = Vec::new();
    let mut serialized_bytes = 0u64;
    for pair in &pairs {
        let path = out_dir.join(format!("level{}.svol", pair.level));
        write_svol(&path, &[pair.data.clone(), pair.mask.clone()])?;
        serialized_bytes += std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        level_paths.push(path);
    }
    let data_stats = active_stats(&pairs.iter().map(|p| p.data.clone()).collect::<Vec<_>>());
    let mask_stats = active_stats(&pairs.iter().map(|p| p.mask.clone()).collect::<Vec<_>>());

    let v0 = voxel_size(ds, 0, opts.build.scale)?;
    let (loaded_pairs, load_ms) = average_ms(opts.repeats, || {
        let mut loaded = Vec::with_capacity(level_paths.len());
        for (pair, path) in pairs.iter().zip(&level_paths) {
            let mut grids: Vec<SparseVolume<T>> = read_svol(path)?;
            if grids.len() != 2 {
                return Err(Error::Validation(format!(
                    "{}: expected data+mask grids, found {}",
                    path.display(),
                    grids.len()
                )));
            }
            let mask = grids.pop().unwrap();
            let data = grids.pop().unwrap();
            loaded.push(LevelVolumePair::from_volumes(pair.level, data, mask, v0));
        }
        Ok(loaded)
    })?;

    let multires = render_side(
        "multiresolution",
        loaded_pairs,
        shader.clone(),
        cam_outside,
        cam_inside,
        settings,
        opts,
        out_dir,
        data_stats.active_voxels,
        mask_stats.active_voxels,
        serialized_bytes,
        load_ms,
    )?;

    // --- uniform side ---
    let uniform_level = opts.uniform_level.unwrap_or(ds.max_level());
    let (uniform, infeasible) =
        match build_uniform(ds, opts, uniform_level, cam_outside, cam_inside, shader, settings, out_dir) {
            Ok(rep) => (Some(rep), None),
            Err(Error::Capacity(msg)) => (None, Some(msg)),
            Err(other) => return Err(other),
        };

    let ratios = uniform.as_ref().map(|u| BenchRatios {
        voxel_reduction: u.active_data_voxels as f64 / multires.active_data_voxels as f64,
        byte_reduction: u.serialized_bytes as f64 / multires.serialized_bytes as f64,
        load_time: u.load_ms / multires.load_ms,
        render_outside: u.render_outside_ms / multires.render_outside_ms,
        render_inside: u.render_inside_ms / multires.render_inside_ms,
    });

    let report = BenchReport {
        multiresolution: multires,
        uniform,
        uniform_infeasible: infeasible,
        ratios,
        environment: Environment {
            threads: settings.threads.max(1),
            dt: settings.dt,
            width: cam_outside.width,
            height: cam_outside.height,
            repeats: opts.repeats.max(1),
        },
    };

    let json_path = out_dir.join("bench.json");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = out_dir.join("bench.csv");
    std::fs::write(&csv_path, report.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn build_uniform<T: Scalar>(
    ds: &AMRDataset<T>,
    opts: &BenchOptions,
    uniform_level: usize,
    cam_outside: &Camera,
    cam_inside: &Camera,
    shader: &ShaderConfig,
    settings: &RenderSettings,
    out_dir: &Path,
) -> Result<RepresentationReport> {
    let res = ds.resolution(uniform_level)?;
    let payload = res
        .checked_mul(res)
        .and_then(|v| v.checked_mul(res))
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Capacity("uniform payload size overflows".into()))?;
    if payload > opts.max_uniform_bytes {
        return Err(Error::Capacity(format!(
            "uniform level {uniform_level} needs {payload} bytes, over the {} byte cap",
            opts.max_uniform_bytes
        )));
    }

    let arr = covering_grid(ds, uniform_level)?;
    let v = voxel_size(ds, uniform_level, opts.build.scale)?;
    let v0 = voxel_size(ds, 0, opts.build.scale)?;
    let mut vol = SparseVolume::<T>::new(ds.field_name.clone(), v);
    // same world placement as the multiresolution masks
    vol.set_translation([v / 2.0 - v0; 3]);
    vol.copy_from_array(&arr, [res as u32, res as u32, res as u32], [0, 0, 0]);
    drop(arr);

    let stats = active_stats(std::slice::from_ref(&vol));
    let path = out_dir.join("uniform.svol");
    write_svol(&path, std::slice::from_ref(&vol))?;
    let serialized_bytes = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
    drop(vol);

    let (loaded, load_ms) = average_ms(opts.repeats, || {
        let mut grids: Vec<SparseVolume<T>> = read_svol(&path)?;
        Ok(grids.pop().expect("uniform file holds one grid"))
    })?;

    let mut uniform_shader = shader.clone();
    uniform_shader.mask_mode = MaskMode::Off;
    render_side(
        "uniform",
        vec![LevelVolumePair::dense(loaded)],
        uniform_shader,
        cam_outside,
        cam_inside,
        settings,
        opts,
        out_dir,
        stats.active_voxels,
        0,
        serialized_bytes,
        load_ms,
    )
}

#[allow(clippy::too_many_arguments)]
fn render_side<T: Scalar>(
    name: &str,
    pairs: Vec<LevelVolumePair<T>>,
    shader: ShaderConfig,
    cam_outside: &Camera,
    cam_inside: &Camera,
    settings: &RenderSettings,
    opts: &BenchOptions,
    out_dir: &Path,
    active_data_voxels: u64,
    active_mask_voxels: u64,
    serialized_bytes: u64,
    load_ms: f64,
) -> Result<RepresentationReport> {
    let ext = image_ext(opts.image_format);
    let outside_path = out_dir.join(format!("{name}_outside.{ext}"));
    let inside_path = out_dir.join(format!("{name}_inside.{ext}"));

    let (outside_img, render_outside_ms): (Image, f64) = average_ms(opts.repeats, || {
        render_image(&pairs, &shader, cam_outside, settings)
    })?;
    let (inside_img, render_inside_ms): (Image, f64) = average_ms(opts.repeats, || {
        render_image(&pairs, &shader, cam_inside, settings)
    })?;
    crate::render::write_image(&outside_img, &outside_path, opts.image_format)?;
    crate::render::write_image(&inside_img, &inside_path, opts.image_format)?;

    Ok(RepresentationReport {
        representation: name.to_string(),
        active_data_voxels,
        active_mask_voxels,
        serialized_bytes,
        load_ms,
        render_outside_ms,
        render_inside_ms,
        peak_rss_bytes: peak_rss_bytes(),
        image_outside: outside_path,
        image_inside: inside_path,
    })
}

/// Deterministic outside/inside camera pair for a dataset: the outside
/// camera frames the whole shifted domain, the inside camera sits within the
/// domain looking at the center of the finest region.
pub fn default_cameras<T: Scalar>(
    ds: &AMRDataset<T>,
    scale: f64,
    width: u32,
    height: u32,
) -> Result<(Camera, Camera)> {
    let v0 = voxel_size(ds, 0, scale)?;
    let center = Vec3::splat(scale * 0.5 - v0);

    let finest = ds.max_level();
    let v_f = voxel_size(ds, finest, scale)?;
    let mut lo = [u64::MAX; 3];
    let mut hi = [0u64; 3];
    for grid in &ds.levels[finest] {
        let e = grid.extent();
        for a in 0..3 {
            lo[a] = lo[a].min(e.lo[a]);
            hi[a] = hi[a].max(e.hi[a]);
        }
    }
    let finest_center = Vec3::new(
        (lo[0] + hi[0]) as f64 * 0.5 * v_f - v0,
        (lo[1] + hi[1]) as f64 * 0.5 * v_f - v0,
        (lo[2] + hi[2]) as f64 * 0.5 * v_f - v0,
    );

    let outside = Camera {
        position: center - Vec3::new(0.0, 0.0, 1.75 * scale),
        look_at: center,
        up: Vec3::new(0.0, 1.0, 0.0),
        vfov: 40.0,
        width,
        height,
    };
    let inside = Camera {
        position: finest_center - Vec3::new(0.0, 0.0, 0.3 * scale),
        look_at: finest_center,
        up: Vec3::new(0.0, 1.0, 0.0),
        vfov: 60.0,
        width,
        height,
    };
    Ok((outside, inside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amr::sample::three_level;
    use crate::amr::FieldKind;
    use crate::render::TransferFunction;
    use tempfile::tempdir;

    fn quick_settings() -> RenderSettings {
        RenderSettings {
            dt: 1.0 / 64.0,
            threads: 1,
            ..RenderSettings::default()
        }
    }

    fn shader() -> ShaderConfig {
        ShaderConfig::new(TransferFunction::grayscale(0.0, 1.0).unwrap())
    }

    #[test]
    fn three_level_counts_and_reduction() {
        let dir = tempdir().unwrap();
        let ds = three_level::<f32>(&FieldKind::Constant(1.0));
        let opts = BenchOptions {
            repeats: 1,
            ..BenchOptions::default()
        };
        let (outside, inside) = default_cameras(&ds, 1.0, 32, 32).unwrap();
        let report = run_benchmark(
            &ds,
            &opts,
            &outside,
            &inside,
            &shader(),
            &quick_settings(),
            dir.path(),
        )
        .unwrap();

        assert_eq!(report.multiresolution.active_data_voxels, 3000);
        let uniform = report.uniform.as_ref().unwrap();
        assert_eq!(uniform.active_data_voxels, 32_768);
        let ratios = report.ratios.unwrap();
        assert!(ratios.voxel_reduction > 10.0, "{}", ratios.voxel_reduction);
        assert!(
            uniform.serialized_bytes > report.multiresolution.serialized_bytes,
            "uniform {} vs multires {}",
            uniform.serialized_bytes,
            report.multiresolution.serialized_bytes
        );
        assert!(dir.path().join("bench.json").exists());
        assert!(dir.path().join("bench.csv").exists());
        assert!(dir.path().join("multiresolution_outside.ppm").exists());
        assert!(dir.path().join("uniform_inside.ppm").exists());
    }

    #[test]
    fn counts_are_repeat_invariant() {
        let dir1 = tempdir().unwrap();
        let dir3 = tempdir().unwrap();
        let ds = three_level::<f32>(&FieldKind::Constant(1.0));
        let (outside, inside) = default_cameras(&ds, 1.0, 16, 16).unwrap();
        let run = |repeats: usize, dir: &std::path::Path| {
            run_benchmark(
                &ds,
                &BenchOptions {
                    repeats,
                    ..BenchOptions::default()
                },
                &outside,
                &inside,
                &shader(),
                &quick_settings(),
                dir,
            )
            .unwrap()
        };
        let a = run(1, dir1.path());
        let b = run(3, dir3.path());
        assert_eq!(
            a.multiresolution.active_data_voxels,
            b.multiresolution.active_data_voxels
        );
        assert_eq!(
            a.multiresolution.serialized_bytes,
            b.multiresolution.serialized_bytes
        );
        assert_eq!(
            a.uniform.unwrap().serialized_bytes,
            b.uniform.unwrap().serialized_bytes
        );
    }

    #[test]
    fn infeasible_uniform_side_yields_partial_report() {
        let dir = tempdir().unwrap();
        let ds = three_level::<f32>(&FieldKind::Constant(1.0));
        let opts = BenchOptions {
            repeats: 1,
            max_uniform_bytes: 1024,
            ..BenchOptions::default()
        };
        let (outside, inside) = default_cameras(&ds, 1.0, 16, 16).unwrap();
        let report = run_benchmark(
            &ds,
            &opts,
            &outside,
            &inside,
            &shader(),
            &quick_settings(),
            dir.path(),
        )
        .unwrap();
        assert!(report.uniform.is_none());
        assert!(report.ratios.is_none());
        assert!(report.uniform_infeasible.unwrap().contains("cap"));
    }

    #[test]
    fn multires_never_exceeds_uniform_voxels() {
        let ds = three_level::<f32>(&FieldKind::Gaussian {
            center: [0.5; 3],
            width: 0.12,
        });
        let pairs = build_all(&ds, &BuildConfig::default()).unwrap();
        let data_total: u64 = pairs.iter().map(|p| p.data.active_voxel_count()).sum();
        let res = ds.resolution(ds.max_level()).unwrap();
        assert!(data_total <= res * res * res);
    }
}
