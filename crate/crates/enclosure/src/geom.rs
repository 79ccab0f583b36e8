//! Small 2D vector and geometry helpers shared across the crate.

use serde::{Deserialize, Serialize};

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Counterclockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    /// 2D cross product (z component of the 3D cross product).
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Unit vector at angle `theta` from the positive x axis.
    pub fn unit(theta: f64) -> Vec2 {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        self.scale(rhs)
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Support function of the rectangle: `sup_{x in R} x . omega`.
    pub fn support(&self, omega: Vec2) -> f64 {
        let hx = if omega.x >= 0.0 { self.x1 } else { self.x0 };
        let hy = if omega.y >= 0.0 { self.y1 } else { self.y0 };
        hx * omega.x + hy * omega.y
    }

    /// Signed distance from `p` to the boundary; negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let dx = (self.x0 - p.x).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(p.y - self.y1);
        if dx <= 0.0 && dy <= 0.0 {
            dx.max(dy)
        } else {
            let ox = dx.max(0.0);
            let oy = dy.max(0.0);
            (ox * ox + oy * oy).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perp_is_ccw_rotation() {
        let v = Vec2::new(1.0, 0.0);
        let p = v.perp();
        assert_eq!(p, Vec2::new(0.0, 1.0));
        assert!(v.dot(p).abs() < 1e-15);
        assert!(v.cross(p) > 0.0);
    }

    #[test]
    fn rect_support_matches_corners() {
        let r = Rect::new(-1.0, 1.0, -1.0, 1.0);
        let w = Vec2::unit(std::f64::consts::FRAC_PI_4);
        assert!((r.support(w) - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((r.support(Vec2::new(1.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((r.support(Vec2::new(-1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rect_signed_distance() {
        let r = Rect::new(0.0, 2.0, 0.0, 2.0);
        assert!((r.signed_distance(Vec2::new(1.0, 1.0)) + 1.0).abs() < 1e-15);
        assert!((r.signed_distance(Vec2::new(3.0, 1.0)) - 1.0).abs() < 1e-15);
    }
}
