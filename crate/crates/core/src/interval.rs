use core::ops::Add;

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    /// Distance from `x` to the interval, zero inside.
    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Image under `x -> w * x`, oriented by the sign of `w`.
    pub fn scale(self, w: f64) -> Self {
        if w >= 0.0 {
            Interval::new(w * self.lo, w * self.hi)
        } else {
            Interval::new(w * self.hi, w * self.lo)
        }
    }

    pub fn relu(self) -> Self {
        Interval::new(self.lo.max(0.0), self.hi.max(0.0))
    }

    /// Image under `x -> |x - target|`.
    pub fn abs_dev(self, target: f64) -> Self {
        let lo = self.lo - target;
        let hi = self.hi - target;
        if lo >= 0.0 {
            Interval::new(lo, hi)
        } else if hi <= 0.0 {
            Interval::new(-hi, -lo)
        } else {
            Interval::new(0.0, (-lo).max(hi))
        }
    }

    pub fn intersect(self, other: Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo && self.hi <= other.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;

    fn add(self, rhs: f64) -> Interval {
        Interval::new(self.lo + rhs, self.hi + rhs)
    }
}
