use core::ops::{Add, Mul, Sub};

use crate::math;

/// Point or direction in metres, room coordinates (z up).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn horizontal(self) -> Point3 {
        Point3::new(self.x, self.y, 0.0)
    }

    pub fn normalized(self) -> Point3 {
        let n = self.norm();
        self * (1.0 / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Axis-aligned room, `[0, x] × [0, y] × [0, z]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoomBox {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl RoomBox {
    pub fn contains(&self, p: Point3) -> bool {
        const SLACK: f64 = 1e-9;
        p.x >= -SLACK
            && p.x <= self.x + SLACK
            && p.y >= -SLACK
            && p.y <= self.y + SLACK
            && p.z >= -SLACK
            && p.z <= self.z + SLACK
    }
}

/// Angle between a unit normal and the direction from `from` to `to`, in
/// radians on `[0, π]`.
pub fn angle_from_normal(normal: Point3, from: Point3, to: Point3) -> f64 {
    let d = to - from;
    let n = d.norm();
    if n == 0.0 {
        return 0.0;
    }
    math::acos((normal.dot(d) / n).clamp(-1.0, 1.0))
}
