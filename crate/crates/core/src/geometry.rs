//! Exact planar points and the few predicates the simulator needs.

use core::fmt;
use core::ops::{Add, Sub};

use crate::error::{Result, SimError};
use crate::rat::Rat;

/// A point in the plane with exact rational coordinates. Ordered
/// lexicographically by `(x, y)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point2 {
    pub x: Rat,
    pub y: Rat,
}

impl Point2 {
    pub fn new(x: Rat, y: Rat) -> Self {
        Point2 { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Point2::new(Rat::from_int(x), Rat::from_int(y))
    }

    pub fn scale(&self, k: &Rat) -> Point2 {
        Point2::new(&self.x * k, &self.y * k)
    }

    pub fn dot(&self, other: &Point2) -> Rat {
        &self.x * &other.x + &self.y * &other.y
    }

    pub fn cross(&self, other: &Point2) -> Rat {
        &self.x * &other.y - &self.y * &other.x
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(&self) -> Point2 {
        Point2::new(-&self.y, self.x.clone())
    }

    pub fn norm2(&self) -> Rat {
        self.dot(self)
    }

    pub fn dist2(&self, other: &Point2) -> Rat {
        (self - other).norm2()
    }

    /// Euclidean distance, when it is rational.
    pub fn dist(&self, other: &Point2) -> Result<Rat> {
        self.dist2(other).sqrt_exact().ok_or(SimError::IrrationalLength)
    }

    /// `self + frac * (to - self)`.
    pub fn lerp(&self, to: &Point2, frac: &Rat) -> Point2 {
        self + &(to - self).scale(frac)
    }
}

impl Add<&Point2> for &Point2 {
    type Output = Point2;
    fn add(self, rhs: &Point2) -> Point2 {
        Point2::new(&self.x + &rhs.x, &self.y + &rhs.y)
    }
}

impl Sub<&Point2> for &Point2 {
    type Output = Point2;
    fn sub(self, rhs: &Point2) -> Point2 {
        Point2::new(&self.x - &rhs.x, &self.y - &rhs.y)
    }
}

impl fmt::Debug for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Orthogonal projection of `p` onto the line through `a` and `b`, written
/// as the parameter `s` with `projection = a + s (b - a)`.
pub fn projection_parameter(a: &Point2, b: &Point2, p: &Point2) -> Result<Rat> {
    let dir = b - a;
    let len2 = dir.norm2();
    if len2.is_zero() {
        return Err(SimError::DegenerateLine);
    }
    Ok((p - a).dot(&dir) / len2)
}

/// Orthogonal projection of `p` onto the line through `a` and `b`.
pub fn project_onto_line(a: &Point2, b: &Point2, p: &Point2) -> Result<Point2> {
    let s = projection_parameter(a, b, p)?;
    Ok(a.lerp(b, &s))
}

/// True when every point lies on one line (vacuously for fewer than three).
pub fn collinear(points: &[Point2]) -> bool {
    let Some(base) = points.first() else {
        return true;
    };
    let Some(far) = points.iter().find(|p| *p != base) else {
        return true;
    };
    let dir = far - base;
    points.iter().all(|p| (p - base).cross(&dir).is_zero())
}
