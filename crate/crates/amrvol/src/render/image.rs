//! Float frame buffer and image file IO.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// RGB float image, row-major from the top-left corner.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pixels: Vec<[f32; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        Image {
            width,
            height,
            pixels: vec![[0.0; 3]; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[f32; 3]>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize);
        Image {
            width,
            height,
            pixels,
        }
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = rgb;
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.pixels
    }
}

/// Output encoding for [`write_image`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// 8-bit binary PPM (P6), values clamped to [0,1] and rounded, gamma 1.0.
    Ppm,
    /// 32-bit float PFM, little-endian (scale -1.0); round-trips bit-exactly.
    Pfm,
}

/// Elementwise absolute difference statistics over all channel samples.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DiffStats {
    pub max_abs: f64,
    pub mean_abs: f64,
}

pub fn image_diff(a: &Image, b: &Image) -> Result<DiffStats> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Validation(format!(
            "image dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let mut max_abs = 0.0f64;
    let mut sum = 0.0f64;
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        for c in 0..3 {
            let d = (pa[c] as f64 - pb[c] as f64).abs();
            max_abs = max_abs.max(d);
            sum += d;
        }
    }
    Ok(DiffStats {
        max_abs,
        mean_abs: sum / (3.0 * a.pixels.len() as f64),
    })
}

pub fn write_image(img: &Image, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(img),
        ImageFormat::Pfm => encode_pfm(img),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 3);
    for px in &img.pixels {
        for c in 0..3 {
            out.push((px[c].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

fn encode_pfm(img: &Image) -> Vec<u8> {
    let mut out = format!("PF\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 12);
    // PFM scanlines run bottom to top.
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            for c in img.pixel(x, y) {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, rest) = header_token(&bytes, 0)?;
    if magic != b"PF" {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"PF\"", String::from_utf8_lossy(magic)),
        ));
    }
    let (w_tok, rest2) = header_token(&bytes, rest)?;
    let (h_tok, rest3) = header_token(&bytes, rest2)?;
    let (scale_tok, mut data_start) = header_token(&bytes, rest3)?;
    let width: u32 = parse_token(w_tok, rest)?;
    let height: u32 = parse_token(h_tok, rest2)?;
    let scale: f64 = parse_token(scale_tok, rest3)?;
    let little_endian = scale < 0.0;

    let need = width as usize * height as usize * 12;
    if bytes.len() - data_start < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "unexpected end of file: need {need} payload bytes, have {}",
                bytes.len() - data_start
            ),
        ));
    }
    let mut img = Image::new(width, height);
    for y in (0..height).rev() {
        for x in 0..width {
            let mut px = [0f32; 3];
            for channel in &mut px {
                let raw: [u8; 4] = bytes[data_start..data_start + 4].try_into().unwrap();
                *channel = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                data_start += 4;
            }
            img.set_pixel(x, y, px);
        }
    }
    Ok(img)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, rest) = header_token(&bytes, 0)?;
    if magic != b"P6" {
        return Err(Error::format(
            0,
            format!("bad magic {:?}, expected \"P6\"", String::from_utf8_lossy(magic)),
        ));
    }
    let (w_tok, rest2) = header_token(&bytes, rest)?;
    let (h_tok, rest3) = header_token(&bytes, rest2)?;
    let (max_tok, data_start) = header_token(&bytes, rest3)?;
    let width: u32 = parse_token(w_tok, rest)?;
    let height: u32 = parse_token(h_tok, rest2)?;
    let maxval: u32 = parse_token(max_tok, rest3)?;
    if maxval != 255 {
        return Err(Error::format(
            rest3 as u64,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    let need = width as usize * height as usize * 3;
    if bytes.len() - data_start < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "unexpected end of file: need {need} payload bytes, have {}",
                bytes.len() - data_start
            ),
        ));
    }
    let pixels = bytes[data_start..data_start + need]
        .chunks_exact(3)
        .map(|c| {
            [
                c[0] as f32 / 255.0,
                c[1] as f32 / 255.0,
                c[2] as f32 / 255.0,
            ]
        })
        .collect();
    Ok(Image::from_pixels(width, height, pixels))
}

/// Next whitespace-delimited header token starting at `from`, skipping `#`
/// comments. Returns the token and the offset one separator past its end.
fn header_token(bytes: &[u8], mut from: usize) -> Result<(&[u8], usize)> {
    loop {
        while from < bytes.len() && bytes[from].is_ascii_whitespace() {
            from += 1;
        }
        if from < bytes.len() && bytes[from] == b'#' {
            while from < bytes.len() && bytes[from] != b'\n' {
                from += 1;
            }
            continue;
        }
        break;
    }
    let start = from;
    while from < bytes.len() && !bytes[from].is_ascii_whitespace() {
        from += 1;
    }
    if start == from {
        return Err(Error::format(start as u64, "missing header token".to_string()));
    }
    // exactly one separator byte follows each token
    Ok((&bytes[start..from], (from + 1).min(bytes.len())))
}

fn parse_token<T: std::str::FromStr>(token: &[u8], offset: usize) -> Result<T> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            Error::format(
                offset as u64,
                format!("malformed header token {:?}", String::from_utf8_lossy(token)),
            )
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn gradient(width: u32, height: u32) -> Image {
        let mut img = Image::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set_pixel(
                    x,
                    y,
                    [
                        x as f32 / width as f32,
                        y as f32 / height as f32,
                        0.25,
                    ],
                );
            }
        }
        img
    }

    #[test]
    fn diff_of_identical_images_is_zero() {
        let img = gradient(8, 6);
        let d = image_diff(&img, &img).unwrap();
        assert_eq!(d.max_abs, 0.0);
        assert_eq!(d.mean_abs, 0.0);
    }

    #[test]
    fn diff_localizes_a_single_channel_change() {
        let a = gradient(4, 4);
        let mut b = a.clone();
        let mut px = b.pixel(1, 2);
        px[0] += 0.5;
        b.set_pixel(1, 2, px);
        let d = image_diff(&a, &b).unwrap();
        assert!((d.max_abs - 0.5).abs() < 1e-7);
        assert!((d.mean_abs - 0.5 / (3.0 * 16.0)).abs() < 1e-9);
        // symmetric in its arguments
        assert_eq!(image_diff(&b, &a).unwrap(), d);
    }

    #[test]
    fn diff_rejects_mismatched_dimensions() {
        assert!(image_diff(&gradient(4, 4), &gradient(5, 4)).is_err());
    }

    #[test]
    fn pfm_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.pfm");
        let img = gradient(7, 5);
        write_image(&img, &path, ImageFormat::Pfm).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.width, 7);
        assert_eq!(back.height, 5);
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            for c in 0..3 {
                assert_eq!(a[c].to_bits(), b[c].to_bits());
            }
        }
    }

    #[test]
    fn ppm_clamps_out_of_range_values() {
        let mut img = Image::new(1, 1);
        img.set_pixel(0, 0, [1.5, -0.25, 0.5]);
        let bytes = encode_ppm(&img);
        let payload = &bytes[bytes.len() - 3..];
        assert_eq!(payload, &[255, 0, 128]);
    }

    #[test]
    fn ppm_payload_is_exactly_3_bytes_per_pixel() {
        let img = gradient(2, 2);
        let bytes = encode_ppm(&img);
        let header_len = b"P6\n2 2\n255\n".len();
        assert_eq!(bytes.len() - header_len, 12);
    }

    #[test]
    fn ppm_round_trip_quantizes_to_8_bits() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let img = gradient(6, 3);
        write_image(&img, &path, ImageFormat::Ppm).unwrap();
        let back = read_ppm(&path).unwrap();
        let d = image_diff(&img, &back).unwrap();
        assert!(d.max_abs <= 0.5 / 255.0 + 1e-6, "{d:?}");
    }

    #[test]
    fn truncated_pfm_reports_offset() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.pfm");
        let img = gradient(4, 4);
        write_image(&img, &path, ImageFormat::Pfm).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_pfm(&path), Err(Error::Format { .. })));
    }
}
