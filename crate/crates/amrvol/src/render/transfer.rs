//! Transfer functions and shader configuration.

use crate::error::{Error, Result};

/// How the shader reads mask volumes.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum MaskMode {
    /// Uninterpolated read at the cell containing the sample, so a mask is
    /// exactly 0 or 1 throughout each voxel. The default.
    #[default]
    Index,
    /// Trilinear read; reproduces the soft borders masks are meant to avoid.
    Interpolated,
    /// Ignore masks entirely (every level renders wherever it has data).
    Off,
}

/// Piecewise-linear map from a data range to opacity and color.
///
/// Control points are positioned on the normalized value axis [0,1];
/// evaluation clamps outside the domain and outside the control range.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    domain: [f64; 2],
    opacity: Vec<(f64, f64)>,
    color: Vec<(f64, [f64; 3])>,
}

impl TransferFunction {
    pub fn new(
        domain: [f64; 2],
        opacity: Vec<(f64, f64)>,
        color: Vec<(f64, [f64; 3])>,
    ) -> Result<Self> {
        if !(domain[0] < domain[1]) || !domain[0].is_finite() || !domain[1].is_finite() {
            return Err(Error::Validation(format!(
                "transfer domain must satisfy vmin < vmax, got {domain:?}"
            )));
        }
        if opacity.is_empty() || color.is_empty() {
            return Err(Error::Validation(
                "transfer function needs at least one opacity and one color point".into(),
            ));
        }
        if opacity.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation(
                "opacity control points must be strictly increasing".into(),
            ));
        }
        if color.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Validation(
                "color control points must be strictly increasing".into(),
            ));
        }
        let positions_ok = opacity
            .iter()
            .map(|p| p.0)
            .chain(color.iter().map(|p| p.0))
            .all(|x| (0.0..=1.0).contains(&x));
        if !positions_ok {
            return Err(Error::Validation(
                "control point positions must lie in [0, 1]".into(),
            ));
        }
        if opacity.iter().any(|&(_, o)| !(0.0..=1.0).contains(&o)) {
            return Err(Error::Validation("opacity values must lie in [0, 1]".into()));
        }
        if color
            .iter()
            .any(|(_, c)| c.iter().any(|&v| !(0.0..=1.0).contains(&v)))
        {
            return Err(Error::Validation("color components must lie in [0, 1]".into()));
        }
        Ok(TransferFunction {
            domain,
            opacity,
            color,
        })
    }

    /// Linear grayscale over `[vmin, vmax]`: lowest value transparent black,
    /// highest opaque white.
    pub fn grayscale(vmin: f64, vmax: f64) -> Result<Self> {
        TransferFunction::new(
            [vmin, vmax],
            vec![(0.0, 0.0), (1.0, 1.0)],
            vec![(0.0, [0.0; 3]), (1.0, [1.0; 3])],
        )
    }

    /// Fully opaque constant-white map, useful for hard-edged test renders.
    pub fn opaque_white(vmin: f64, vmax: f64) -> Result<Self> {
        TransferFunction::new(
            [vmin, vmax],
            vec![(0.0, 1.0)],
            vec![(0.0, [1.0; 3])],
        )
    }

    pub fn domain(&self) -> [f64; 2] {
        self.domain
    }

    fn normalize(&self, value: f64) -> f64 {
        ((value - self.domain[0]) / (self.domain[1] - self.domain[0])).clamp(0.0, 1.0)
    }

    pub fn opacity_at(&self, value: f64) -> f64 {
        let u = self.normalize(value);
        sample_ramp(&self.opacity, u, |&o| o, |a, b, t| a + (b - a) * t)
    }

    pub fn color_at(&self, value: f64) -> [f64; 3] {
        let u = self.normalize(value);
        sample_ramp(
            &self.color,
            u,
            |&c| c,
            |a, b, t| {
                [
                    a[0] + (b[0] - a[0]) * t,
                    a[1] + (b[1] - a[1]) * t,
                    a[2] + (b[2] - a[2]) * t,
                ]
            },
        )
    }

    pub fn eval(&self, value: f64) -> (f64, [f64; 3]) {
        (self.opacity_at(value), self.color_at(value))
    }

    /// Parses ramp text: one `value opacity r g b` line per control point,
    /// values normalized to [0,1] and strictly increasing. Blank lines and
    /// `#` comments are skipped.
    pub fn parse_ramp(text: &str, domain: [f64; 2]) -> Result<Self> {
        let mut opacity = Vec::new();
        let mut color = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Validation(format!(
                            "ramp line {}: {tok:?} is not a number",
                            lineno + 1
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            if fields.len() != 5 {
                return Err(Error::Validation(format!(
                    "ramp line {}: expected `value opacity r g b`, got {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            opacity.push((fields[0], fields[1]));
            color.push((fields[0], [fields[2], fields[3], fields[4]]));
        }
        TransferFunction::new(domain, opacity, color)
    }
}

fn sample_ramp<V, O>(
    points: &[(f64, V)],
    u: f64,
    value: impl Fn(&V) -> O,
    lerp: impl Fn(O, O, f64) -> O,
) -> O {
    if u <= points[0].0 {
        return value(&points[0].1);
    }
    if u >= points[points.len() - 1].0 {
        return value(&points[points.len() - 1].1);
    }
    let seg = points.windows(2).find(|w| u <= w[1].0).unwrap();
    let t = (u - seg[0].0) / (seg[1].0 - seg[0].0);
    lerp(value(&seg[0].1), value(&seg[1].1), t)
}

/// Everything the raymarcher needs to turn a field sample into extinction
/// and emission.
#[derive(Clone, Debug)]
pub struct ShaderConfig {
    pub transfer: TransferFunction,
    /// Extinction per world unit at opacity 1.
    pub extinction_scale: f64,
    pub emission_scale: f64,
    pub mask_mode: MaskMode,
}

impl ShaderConfig {
    pub fn new(transfer: TransferFunction) -> Self {
        ShaderConfig {
            transfer,
            extinction_scale: 1.0,
            emission_scale: 1.0,
            mask_mode: MaskMode::Index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extinction_scale >= 0.0) || !self.extinction_scale.is_finite() {
            return Err(Error::Validation(format!(
                "extinction scale must be finite and >= 0, got {}",
                self.extinction_scale
            )));
        }
        if !(self.emission_scale >= 0.0) || !self.emission_scale.is_finite() {
            return Err(Error::Validation(format!(
                "emission scale must be finite and >= 0, got {}",
                self.emission_scale
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_is_linear_and_clamped() {
        let tf = TransferFunction::grayscale(0.0, 2.0).unwrap();
        assert_eq!(tf.opacity_at(1.0), 0.5);
        assert_eq!(tf.opacity_at(-5.0), 0.0);
        assert_eq!(tf.opacity_at(9.0), 1.0);
        assert_eq!(tf.color_at(2.0), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn ramp_segments_interpolate_piecewise() {
        let tf = TransferFunction::new(
            [0.0, 1.0],
            vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.25)],
            vec![(0.0, [0.0, 0.0, 1.0]), (1.0, [1.0, 0.0, 0.0])],
        )
        .unwrap();
        assert_eq!(tf.opacity_at(0.25), 0.5);
        assert_eq!(tf.opacity_at(0.75), 0.625);
        assert_eq!(tf.color_at(0.5), [0.5, 0.0, 0.5]);
    }

    #[test]
    fn non_monotone_positions_rejected() {
        assert!(TransferFunction::new(
            [0.0, 1.0],
            vec![(0.5, 0.0), (0.5, 1.0)],
            vec![(0.0, [0.0; 3])],
        )
        .is_err());
    }

    #[test]
    fn ramp_file_parses_comments_and_values() {
        let text = "\
# value opacity r g b
0.0  0.0  0.0 0.0 0.0
0.5  0.8  1.0 0.5 0.0  # warm midpoint
1.0  1.0  1.0 1.0 1.0
";
        let tf = TransferFunction::parse_ramp(text, [0.0, 10.0]).unwrap();
        assert_eq!(tf.opacity_at(5.0), 0.8);
        assert_eq!(tf.color_at(5.0), [1.0, 0.5, 0.0]);
    }

    #[test]
    fn ramp_file_rejects_wrong_arity() {
        assert!(TransferFunction::parse_ramp("0 0 0\n", [0.0, 1.0]).is_err());
    }
}
