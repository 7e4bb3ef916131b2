//! World-space vectors and boxes.
//!
//! All world coordinates are f64; see [`crate::scalar::Scalar`] for the
//! stored field value type.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point or direction in world space.
#[derive(Copy, Clone, Debug, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.length()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box in world space.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x < self.max.x
            && p.y >= self.min.y
            && p.y < self.max.y
            && p.z >= self.min.z
            && p.z < self.max.z
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: Vec3::new(
                self.min.x.min(other.min.x),
                self.min.y.min(other.min.y),
                self.min.z.min(other.min.z),
            ),
            max: Vec3::new(
                self.max.x.max(other.max.x),
                self.max.y.max(other.max.y),
                self.max.z.max(other.max.z),
            ),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    /// Slab test. Returns the entry/exit distances along the ray, clipped to
    /// `t >= 0`, or None when the ray misses.
    pub fn intersect_ray(&self, origin: Vec3, dir: Vec3) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = f64::INFINITY;
        for axis in 0..3 {
            let o = origin.axis(axis);
            let d = dir.axis(axis);
            let lo = self.min.axis(axis);
            let hi = self.max.axis(axis);
            if d == 0.0 {
                if o < lo || o >= hi {
                    return None;
                }
            } else {
                let inv = 1.0 / d;
                let (near, far) = if inv >= 0.0 {
                    ((lo - o) * inv, (hi - o) * inv)
                } else {
                    ((hi - o) * inv, (lo - o) * inv)
                };
                t0 = t0.max(near);
                t1 = t1.min(far);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_hits_unit_box() {
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        let (t0, t1) = b
            .intersect_ray(Vec3::new(0.5, 0.5, -1.0), Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!(t0, 1.0);
        assert_eq!(t1, 2.0);
    }

    #[test]
    fn slab_misses() {
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        assert!(b
            .intersect_ray(Vec3::new(2.0, 2.0, -1.0), Vec3::new(0.0, 0.0, 1.0))
            .is_none());
    }

    #[test]
    fn ray_starting_inside_clips_entry_to_zero() {
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        let (t0, t1) = b
            .intersect_ray(Vec3::splat(0.5), Vec3::new(0.0, 0.0, 1.0))
            .unwrap();
        assert_eq!(t0, 0.0);
        assert_eq!(t1, 0.5);
    }
}
