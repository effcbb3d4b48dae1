//! Small fixed-size linear algebra generic over a scalar type.
//!
//! Everything on the differentiable path (body kinematics, signed distances,
//! refinement losses) is written against [`Real`] so the same code runs on
//! plain `f64` and on the reverse-mode [`crate::autodiff::Var`].

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Scalar operations needed by the geometry and loss code.
pub trait Real:
    Copy
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    /// Branch-selecting max: the derivative follows the larger argument.
    fn max(self, other: Self) -> Self {
        if self.val() >= other.val() {
            self
        } else {
            other
        }
    }

    fn min(self, other: Self) -> Self {
        if self.val() <= other.val() {
            self
        } else {
            other
        }
    }

    fn abs(self) -> Self {
        if self.val() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn lift(v: Vec3<f64>) -> Self {
        Self::new(T::cst(v.x), T::cst(v.y), T::cst(v.z))
    }

    pub fn val(&self) -> Vec3<f64> {
        Vec3::new(self.x.val(), self.y.val(), self.z.val())
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    /// Euclidean norm; the derivative at the origin is taken as zero.
    pub fn norm(&self) -> T {
        let sq = self.norm_squared();
        if sq.val() > 0.0 {
            sq.sqrt()
        } else {
            T::zero()
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn max_elem(&self) -> T {
        self.x.max(self.y).max(self.z)
    }
}

impl Vec3<f64> {
    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, o: &Self) -> f64 {
        (*self - *o).norm()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T = f64> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn from_cols(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn col(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn lift(a: &Mat3<f64>) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = T::cst(a.m[i][j]);
            }
        }
        Self { m }
    }

    pub fn val(&self) -> Mat3<f64> {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[i][j].val();
            }
        }
        Mat3 { m }
    }

    pub fn transpose(&self) -> Self {
        let mut m = self.m;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[j][i];
            }
        }
        Self { m }
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let r = |i: usize| self.m[i][0] * v.x + self.m[i][1] * v.y + self.m[i][2] * v.z;
        Vec3::new(r(0), r(1), r(2))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Rodrigues formula. Near zero angle a second-order expansion keeps the
    /// derivative finite.
    pub fn from_axis_angle(w: &Vec3<T>) -> Self {
        let theta_sq = w.norm_squared();
        let (a, b) = if theta_sq.val() < 1e-12 {
            (T::one() - theta_sq / T::cst(6.0), T::cst(0.5) - theta_sq / T::cst(24.0))
        } else {
            let theta = theta_sq.sqrt();
            (theta.sin() / theta, (T::one() - theta.cos()) / theta_sq)
        };
        let k = Self {
            m: [[T::zero(), -w.z, w.y], [w.z, T::zero(), -w.x], [-w.y, w.x, T::zero()]],
        };
        let k2 = k.mul_mat(&k);
        let mut m = Self::identity().m;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = *e + a * k.m[i][j] + b * k2.m[i][j];
            }
        }
        Self { m }
    }
}

impl Mat3<f64> {
    /// Rotation from roll/pitch/yaw (applied as Rz(yaw)·Ry(pitch)·Rx(roll)).
    pub fn from_euler(rpy: [f64; 3]) -> Self {
        let (sr, cr) = rpy[0].sin_cos();
        let (sp, cp) = rpy[1].sin_cos();
        let (sy, cy) = rpy[2].sin_cos();
        Self {
            m: [
                [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
                [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
                [-sp, cp * sr, cp * cr],
            ],
        }
    }

    /// Inverse of [`Mat3::from_euler`] for proper rotations.
    pub fn to_euler(&self) -> [f64; 3] {
        let m = &self.m;
        let pitch = (-m[2][0]).clamp(-1.0, 1.0).asin();
        if m[2][0].abs() < 1.0 - 1e-12 {
            [m[2][1].atan2(m[2][2]), pitch, m[1][0].atan2(m[0][0])]
        } else {
            [0.0, pitch, (-m[0][1]).atan2(m[1][1])]
        }
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_euler([0.0, 0.0, angle])
    }

    /// Orthonormal with determinant +1, within `tol`.
    pub fn is_rotation(&self, tol: f64) -> bool {
        let p = self.mul_mat(&self.transpose());
        let id = Mat3::<f64>::identity();
        (0..3).all(|i| (0..3).all(|j| (p.m[i][j] - id.m[i][j]).abs() <= tol))
            && (self.determinant() - 1.0).abs() <= tol
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        for (i, v) in p.to_array().iter().enumerate() {
            self.min[i] = self.min[i].min(*v);
            self.max[i] = self.max[i].max(*v);
        }
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        for i in 0..3 {
            b.min[i] = b.min[i].min(o.min[i]);
            b.max[i] = b.max[i].max(o.max[i]);
        }
        b
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn dilate(&self, margin: f64) -> Aabb {
        let mut b = *self;
        for i in 0..3 {
            b.min[i] -= margin;
            b.max[i] += margin;
        }
        b
    }

    /// Euclidean gap between two boxes; zero when they overlap or touch.
    pub fn gap(&self, o: &Aabb) -> f64 {
        let mut sq = 0.0;
        for i in 0..3 {
            let d = (o.min[i] - self.max[i]).max(self.min[i] - o.max[i]).max(0.0);
            sq += d * d;
        }
        sq.sqrt()
    }

    pub fn distance_to_point(&self, p: &Vec3) -> f64 {
        let mut sq = 0.0;
        for (i, v) in p.to_array().iter().enumerate() {
            let d = (self.min[i] - v).max(v - self.max[i]).max(0.0);
            sq += d * d;
        }
        sq.sqrt()
    }

    /// Area of the overlap of the two boxes' xy-footprints.
    pub fn footprint_overlap(&self, o: &Aabb) -> f64 {
        let dx = (self.max[0].min(o.max[0]) - self.min[0].max(o.min[0])).max(0.0);
        let dy = (self.max[1].min(o.max[1]) - self.min[1].max(o.min[1])).max(0.0);
        dx * dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_round_trip() {
        let r = Mat3::from_euler([0.3, -0.4, 1.2]);
        assert!(r.is_rotation(1e-12));
        let back = Mat3::from_euler(r.to_euler());
        assert!(back.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn axis_angle_matches_euler_about_z() {
        let a = Mat3::from_axis_angle(&Vec3::new(0.0, 0.0, 0.7));
        assert!(a.max_abs_diff(&Mat3::rot_z(0.7)) < 1e-12);
        let small = Mat3::from_axis_angle(&Vec3::new(1e-8, 0.0, 0.0));
        assert!(small.is_rotation(1e-12));
    }

    #[test]
    fn aabb_gap() {
        let a = Aabb { min: [0.0; 3], max: [1.0; 3] };
        let b = Aabb { min: [1.3, 0.0, 0.0], max: [2.0, 1.0, 1.0] };
        assert!((a.gap(&b) - 0.3).abs() < 1e-12);
        assert_eq!(a.gap(&a), 0.0);
    }
}
