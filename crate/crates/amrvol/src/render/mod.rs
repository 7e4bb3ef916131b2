//! Emission-absorption raymarching over level volume pairs.
//!
//! Each ray marches front to back through the union of the levels' bounding
//! boxes with a fixed step. At every sample the shader combines all levels:
//! the data volumes are read with trilinear interpolation, the masks by
//! uninterpolated cell index (by default), and each level contributes its
//! masked opacity. With masks built by the conversion pipeline exactly one
//! level survives at any point, which is what removes level-boundary seams.

mod image;
mod transfer;

pub use image::{image_diff, read_pfm, read_ppm, write_image, DiffStats, Image, ImageFormat};
pub use transfer::{MaskMode, ShaderConfig, TransferFunction};

use crate::error::{Error, Result};
use crate::level::LevelVolumePair;
use crate::math::{Aabb, Vec3};
use crate::scalar::Scalar;

/// Pinhole camera.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite() || !self.look_at.is_finite() || !self.up.is_finite() {
            return Err(Error::Validation("camera contains non-finite values".into()));
        }
        let view = self.look_at - self.position;
        if view.length() == 0.0 {
            return Err(Error::Validation(
                "camera position and look_at coincide".into(),
            ));
        }
        if view.cross(self.up).length() < 1e-12 * view.length() * self.up.length().max(1e-300) {
            return Err(Error::Validation(
                "camera up vector is parallel to the view direction".into(),
            ));
        }
        if !(self.vfov > 0.0 && self.vfov < 180.0) {
            return Err(Error::Validation(format!(
                "vfov must lie in (0, 180) degrees, got {}",
                self.vfov
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("image dimensions must be nonzero".into()));
        }
        Ok(())
    }
}

/// Fixed-step march parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderSettings {
    /// Sample spacing along each ray, in world units.
    pub dt: f64,
    pub max_steps: usize,
    pub background: [f32; 3],
    /// Worker threads over disjoint row bands; 1 gives the bit-reproducible
    /// reference ordering (per-pixel results are identical either way).
    pub threads: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            dt: 1.0 / 256.0,
            max_steps: 100_000,
            background: [0.0; 3],
            threads: 1,
        }
    }
}

impl RenderSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Validation(format!(
                "--dt must be positive and finite, got {}",
                self.dt
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Validation("max_steps must be >= 1".into()));
        }
        if self.background.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Validation(
                "background color must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Ray through the image plane at pixel coordinates (px, py), which include
/// any sub-pixel offset (the renderer samples pixel centers at +0.5).
/// Returns the camera origin and a unit direction.
pub fn generate_ray(cam: &Camera, px: f64, py: f64) -> (Vec3, Vec3) {
    let forward = (cam.look_at - cam.position).normalized();
    let right = forward.cross(cam.up).normalized();
    let up = right.cross(forward);
    let half_h = (cam.vfov.to_radians() / 2.0).tan();
    let half_w = half_h * cam.width as f64 / cam.height as f64;
    let sx = 2.0 * px / cam.width as f64 - 1.0;
    let sy = 1.0 - 2.0 * py / cam.height as f64;
    let dir = forward + right * (sx * half_w) + up * (sy * half_h);
    (cam.position, dir.normalized())
}

/// Extinction and emission at one world point, combined over all levels.
///
/// Per level: `u` is the trilinear data sample and `m` the mask sample
/// (mode-dependent); the level contributes `m * opacity(u)` to the
/// extinction sum. Emission is the opacity-weighted average of the levels'
/// colors, so when the masks partition space it is exactly the selected
/// level's color.
pub fn shade_sample<T: Scalar>(
    levels: &[LevelVolumePair<T>],
    shader: &ShaderConfig,
    p: Vec3,
) -> (f64, [f64; 3]) {
    let mut weight_sum = 0.0f64;
    let mut color_sum = [0.0f64; 3];
    for pair in levels {
        // A pair with no mask payload (the dense baseline) is implicitly
        // all ones.
        let m = if pair.mask.leaf_count() == 0 {
            1.0
        } else {
            match shader.mask_mode {
                MaskMode::Index => pair.mask.index_sample(p).as_f64(),
                MaskMode::Interpolated => pair.mask.trilinear_sample(p),
                MaskMode::Off => 1.0,
            }
        };
        if m == 0.0 {
            continue;
        }
        let u = pair.data.trilinear_sample(p);
        let (opacity, color) = shader.transfer.eval(u);
        let w = m * opacity;
        weight_sum += w;
        for c in 0..3 {
            color_sum[c] += w * color[c] * shader.emission_scale;
        }
    }
    let sigma = weight_sum * shader.extinction_scale;
    let denom = weight_sum.max(1e-12);
    (
        sigma,
        [
            color_sum[0] / denom,
            color_sum[1] / denom,
            color_sum[2] / denom,
        ],
    )
}

/// Renders the levels front to back.
///
/// Per pixel: intersect the ray with the union of the level bounding boxes,
/// then march with step `dt` sampling interval midpoints. Each sample
/// composites `a = 1 - exp(-sigma * dt)` with early exit once transmittance
/// drops below 1e-4; the remaining transmittance letterboxes the background.
/// Identical inputs produce bit-identical images for any thread count.
pub fn render_image<T: Scalar>(
    levels: &[LevelVolumePair<T>],
    shader: &ShaderConfig,
    cam: &Camera,
    settings: &RenderSettings,
) -> Result<Image> {
    cam.validate()?;
    settings.validate()?;
    shader.validate()?;

    let boxes: Vec<Aabb> = levels.iter().filter_map(|p| p.world_bounds()).collect();
    if let Some(union_box) = boxes
        .iter()
        .copied()
        .reduce(|a, b| a.union(&b))
    {
        let ext = union_box.extent();
        let max_extent = ext.x.max(ext.y).max(ext.z);
        if settings.dt > max_extent {
            return Err(Error::Validation(format!(
                "--dt {} exceeds the domain extent {max_extent}",
                settings.dt
            )));
        }
    }

    let mut img = Image::new(cam.width, cam.height);
    let width = cam.width;
    let height = cam.height;
    let threads = settings.threads.max(1).min(height.max(1) as usize);

    let render_rows = |rows: &mut [[f32; 3]], row0: u32| {
        for (dy, row) in rows.chunks_exact_mut(width as usize).enumerate() {
            let y = row0 + dy as u32;
            for (x, out) in row.iter_mut().enumerate() {
                let (origin, dir) = generate_ray(cam, x as f64 + 0.5, y as f64 + 0.5);
                *out = trace(&boxes, levels, shader, settings, origin, dir);
            }
        }
    };

    if threads == 1 {
        render_rows(img.pixels_mut(), 0);
    } else {
        let band_rows = (height as usize).div_ceil(threads);
        let bands: Vec<&mut [[f32; 3]]> =
            img.pixels_mut().chunks_mut(band_rows * width as usize).collect();
        std::thread::scope(|scope| {
            for (i, band) in bands.into_iter().enumerate() {
                let render_rows = &render_rows;
                scope.spawn(move || render_rows(band, (i * band_rows) as u32));
            }
        });
    }
    Ok(img)
}

fn trace<T: Scalar>(
    boxes: &[Aabb],
    levels: &[LevelVolumePair<T>],
    shader: &ShaderConfig,
    settings: &RenderSettings,
    origin: Vec3,
    dir: Vec3,
) -> [f32; 3] {
    let mut t0 = f64::INFINITY;
    let mut t1 = f64::NEG_INFINITY;
    for b in boxes {
        if let Some((near, far)) = b.intersect_ray(origin, dir) {
            t0 = t0.min(near);
            t1 = t1.max(far);
        }
    }
    if t0 >= t1 {
        return settings.background;
    }

    let dt = settings.dt;
    let steps = (((t1 - t0) / dt).ceil() as usize).min(settings.max_steps);
    let mut transmittance = 1.0f64;
    let mut accum = [0.0f64; 3];
    for k in 0..steps {
        let t = t0 + (k as f64 + 0.5) * dt;
        let p = origin + dir * t;
        // Samples between disjoint level boxes cost only this test.
        if !boxes.iter().any(|b| b.contains(p)) {
            continue;
        }
        let (sigma, color) = shade_sample(levels, shader, p);
        if sigma <= 0.0 {
            continue;
        }
        let a = 1.0 - (-sigma * dt).exp();
        for c in 0..3 {
            accum[c] += transmittance * a * color[c];
        }
        transmittance *= 1.0 - a;
        if transmittance < 1e-4 {
            break;
        }
    }
    [
        (accum[0] + transmittance * settings.background[0] as f64) as f32,
        (accum[1] + transmittance * settings.background[1] as f64) as f32,
        (accum[2] + transmittance * settings.background[2] as f64) as f32,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVolume;

    fn look_down_z(width: u32, height: u32) -> Camera {
        Camera {
            position: Vec3::new(0.5, 0.5, -2.0),
            look_at: Vec3::new(0.5, 0.5, 0.5),
            up: Vec3::new(0.0, 1.0, 0.0),
            vfov: 35.0,
            width,
            height,
        }
    }

    fn unit_slab(value: f32) -> LevelVolumePair<f32> {
        // 8^3 active voxels spanning exactly [0,1)^3
        let mut vol = SparseVolume::new("density", 0.125);
        vol.set_translation([0.0625; 3]);
        vol.copy_from_array(&vec![value; 512], [8, 8, 8], [0, 0, 0]);
        LevelVolumePair::dense(vol)
    }

    fn flat_shader(opacity: f64, extinction: f64) -> ShaderConfig {
        let tf = TransferFunction::new(
            [0.0, 1.0],
            vec![(0.0, opacity)],
            vec![(0.0, [1.0; 3])],
        )
        .unwrap();
        ShaderConfig {
            transfer: tf,
            extinction_scale: extinction,
            emission_scale: 1.0,
            mask_mode: MaskMode::Off,
        }
    }

    #[test]
    fn center_ray_points_down_the_view_axis() {
        let cam = look_down_z(64, 64);
        let (origin, dir) = generate_ray(&cam, 32.0, 32.0);
        assert_eq!(origin, cam.position);
        assert!((dir.x).abs() < 1e-15);
        assert!((dir.y).abs() < 1e-15);
        assert!((dir.z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn corner_rays_are_symmetric_about_the_axis() {
        let cam = look_down_z(64, 48);
        let (_, d00) = generate_ray(&cam, 0.0, 0.0);
        let (_, d11) = generate_ray(&cam, 64.0, 48.0);
        let sum = d00 + d11;
        let forward = Vec3::new(0.0, 0.0, 1.0);
        assert!(sum.cross(forward).length() < 1e-12);
        let (_, d01) = generate_ray(&cam, 0.0, 48.0);
        let (_, d10) = generate_ray(&cam, 64.0, 0.0);
        assert!((d01 + d10).cross(forward).length() < 1e-12);
    }

    #[test]
    fn tiny_vfov_collapses_toward_the_axis() {
        let mut cam = look_down_z(64, 64);
        cam.vfov = 1e-4;
        let (_, corner) = generate_ray(&cam, 0.0, 0.0);
        assert!(corner.dot(Vec3::new(0.0, 0.0, 1.0)) > 1.0 - 1e-9);
    }

    #[test]
    fn all_masks_zero_shade_to_nothing() {
        let mut pair = unit_slab(1.0);
        // activate an all-zero mask over the same region
        pair.mask = SparseVolume::new("mask", 0.125);
        pair.mask.set_translation([0.0625; 3]);
        pair.mask.copy_from_array(&vec![0.0f32; 512], [8, 8, 8], [0, 0, 0]);
        let mut shader = flat_shader(1.0, 3.0);
        shader.mask_mode = MaskMode::Index;
        let (sigma, _) = shade_sample(&[pair], &shader, Vec3::splat(0.5));
        assert_eq!(sigma, 0.0);
    }

    #[test]
    fn masked_opacity_times_extinction() {
        let pair = unit_slab(1.0);
        let shader = flat_shader(0.5, 2.0);
        let (sigma, color) = shade_sample(&[pair], &shader, Vec3::splat(0.5));
        assert!((sigma - 1.0).abs() < 1e-12);
        assert!((color[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn transparent_volume_renders_background() {
        let pair = unit_slab(1.0);
        let shader = flat_shader(0.0, 1.0);
        let settings = RenderSettings {
            dt: 1.0 / 64.0,
            background: [0.125, 0.25, 0.5],
            ..RenderSettings::default()
        };
        let img = render_image(&[pair], &shader, &look_down_z(16, 16), &settings).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(img.pixel(x, y), [0.125, 0.25, 0.5]);
            }
        }
    }

    #[test]
    fn rays_missing_every_box_keep_background() {
        let pair = unit_slab(1.0);
        let shader = flat_shader(1.0, 5.0);
        let mut cam = look_down_z(8, 8);
        cam.look_at = Vec3::new(0.5, 0.5, -3.0); // looking away from the slab
        let settings = RenderSettings {
            dt: 1.0 / 64.0,
            background: [1.0, 0.0, 0.0],
            ..RenderSettings::default()
        };
        let img = render_image(&[pair], &shader, &cam, &settings).unwrap();
        assert_eq!(img.pixel(4, 4), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_optical_depth_matches_the_closed_form() {
        let pair = unit_slab(1.0);
        let shader = flat_shader(1.0, 1.0);
        let settings = RenderSettings {
            dt: 1e-3,
            ..RenderSettings::default()
        };
        let img = render_image(&[pair], &shader, &look_down_z(9, 9), &settings).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        let got = img.pixel(4, 4)[0] as f64;
        assert!((got - want).abs() < 0.01, "got {got}, want {want}");
    }

    #[test]
    fn thread_count_does_not_change_pixels() {
        let pair = unit_slab(0.7);
        let shader = flat_shader(0.8, 2.5);
        let single = RenderSettings {
            dt: 1.0 / 128.0,
            threads: 1,
            ..RenderSettings::default()
        };
        let multi = RenderSettings {
            threads: 5,
            ..single.clone()
        };
        let cam = look_down_z(33, 17);
        let a = render_image(&[pair.clone()], &shader, &cam, &single).unwrap();
        let b = render_image(&[pair], &shader, &cam, &multi).unwrap();
        for (pa, pb) in a.pixels().iter().zip(b.pixels()) {
            for c in 0..3 {
                assert_eq!(pa[c].to_bits(), pb[c].to_bits());
            }
        }
    }

    #[test]
    fn oversized_dt_is_rejected_by_name() {
        let pair = unit_slab(1.0);
        let shader = flat_shader(1.0, 1.0);
        let settings = RenderSettings {
            dt: 50.0,
            ..RenderSettings::default()
        };
        let err = render_image(&[pair], &shader, &look_down_z(4, 4), &settings).unwrap_err();
        assert!(err.to_string().contains("--dt"), "{err}");
    }

    #[test]
    fn camera_validation_catches_degenerate_setups() {
        let mut cam = look_down_z(8, 8);
        cam.look_at = cam.position;
        assert!(cam.validate().is_err());
        let mut cam = look_down_z(8, 8);
        cam.up = Vec3::new(0.0, 0.0, 2.0); // parallel to the view direction
        assert!(cam.validate().is_err());
        let mut cam = look_down_z(8, 8);
        cam.vfov = 180.0;
        assert!(cam.validate().is_err());
    }
}
