use std::fmt;

use crate::error::{Axis, TensorError};

/// Extents of a dense 5-D tensor: (batch N, channels C, time T, height H, width W).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape(pub [usize; 5]);

impl Shape {
    pub fn new(n: usize, c: usize, t: usize, h: usize, w: usize) -> Shape {
        Shape([n, c, t, h, w])
    }

    /// A 1x1x1x1x1 scalar shape.
    pub fn scalar() -> Shape {
        Shape([1; 5])
    }

    pub fn dims(&self) -> [usize; 5] {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0[0]
    }

    pub fn c(&self) -> usize {
        self.0[1]
    }

    pub fn t(&self) -> usize {
        self.0[2]
    }

    pub fn h(&self) -> usize {
        self.0[3]
    }

    pub fn w(&self) -> usize {
        self.0[4]
    }

    pub fn extent(&self, axis: Axis) -> usize {
        self.0[axis.index()]
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.0 == [1; 5]
    }

    /// Row-major strides, innermost axis last.
    pub fn strides(&self) -> [usize; 5] {
        let d = self.0;
        let sw = 1;
        let sh = d[4];
        let st = d[3] * sh;
        let sc = d[2] * st;
        let sn = d[1] * sc;
        [sn, sc, st, sh, sw]
    }

    /// Flat offset of a coordinate.
    pub fn offset(&self, n: usize, c: usize, t: usize, h: usize, w: usize) -> usize {
        let s = self.strides();
        n * s[0] + c * s[1] + t * s[2] + h * s[3] + w * s[4]
    }

    /// Validates every extent is at least one.
    pub fn validate(&self) -> Result<(), TensorError> {
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                return Err(TensorError::InvalidGeometry(format!(
                    "zero extent on {} axis of shape {}",
                    Axis::from_index(i),
                    self
                )));
            }
        }
        Ok(())
    }

    /// Result shape of broadcasting two operands together. Each axis must be
    /// equal or have extent 1 on one side.
    pub fn broadcast_with(&self, other: &Shape) -> Result<Shape, TensorError> {
        let mut out = [0usize; 5];
        for i in 0..5 {
            let (a, b) = (self.0[i], other.0[i]);
            out[i] = if a == b || b == 1 {
                a
            } else if a == 1 {
                b
            } else {
                return Err(TensorError::DimMismatch {
                    axis: Axis::from_index(i),
                    expected: a,
                    got: b,
                });
            };
        }
        Ok(Shape(out))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.0;
        write!(f, "{}x{}x{}x{}x{}", d[0], d[1], d[2], d[3], d[4])
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_match_row_major_order() {
        let s = Shape::new(2, 3, 4, 5, 6);
        assert_eq!(s.strides(), [360, 120, 30, 6, 1]);
        assert_eq!(s.offset(1, 2, 3, 4, 5), 360 + 240 + 90 + 24 + 5);
        assert_eq!(s.len(), 720);
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(Shape::new(1, 0, 1, 1, 1).validate().is_err());
        assert!(Shape::new(1, 1, 1, 1, 1).validate().is_ok());
    }

    #[test]
    fn broadcast_rules() {
        let a = Shape::new(2, 4, 3, 5, 5);
        let b = Shape::new(2, 4, 1, 1, 1);
        assert_eq!(a.broadcast_with(&b).unwrap(), a);
        assert_eq!(b.broadcast_with(&a).unwrap(), a);
        let c = Shape::new(2, 3, 3, 5, 5);
        assert!(a.broadcast_with(&c).is_err());
    }
}
