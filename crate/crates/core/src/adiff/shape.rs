use std::fmt;

/// Per-lane layout of a node value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dims {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Dims {
    pub fn len(self) -> usize {
        match self {
            Dims::Scalar => 1,
            Dims::Vector(n) => n,
            Dims::Matrix(m, n) => m * n,
        }
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, Dims::Scalar)
    }
}

/// Shape of a graph node.
///
/// Batched nodes carry one value block per evaluation point; the batch size
/// itself is fixed only when a graph is evaluated, so a single graph serves
/// any number of points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batched: bool,
    pub dims: Dims,
}

impl Shape {
    pub const SCALAR: Shape = Shape { batched: false, dims: Dims::Scalar };
    pub const BATCH: Shape = Shape { batched: true, dims: Dims::Scalar };

    pub fn new(batched: bool, dims: Dims) -> Self {
        Shape { batched, dims }
    }

    pub fn batch_vec(n: usize) -> Self {
        Shape { batched: true, dims: Dims::Vector(n) }
    }

    pub fn vector(n: usize) -> Self {
        Shape { batched: false, dims: Dims::Vector(n) }
    }

    pub fn matrix(m: usize, n: usize) -> Self {
        Shape { batched: false, dims: Dims::Matrix(m, n) }
    }

    pub fn inner_len(self) -> usize {
        self.dims.len()
    }

    /// Number of stored values for a given evaluation batch size.
    pub fn numel(self, batch: usize) -> usize {
        self.lanes(batch) * self.inner_len()
    }

    pub fn lanes(self, batch: usize) -> usize {
        if self.batched {
            batch
        } else {
            1
        }
    }

    /// Shape produced by an elementwise binary op over `self` and `other`.
    pub fn broadcast(self, other: Shape) -> Option<Shape> {
        let dims = if self.dims == other.dims {
            self.dims
        } else if self.dims.is_scalar() {
            other.dims
        } else if other.dims.is_scalar() {
            self.dims
        } else {
            return None;
        };
        Some(Shape { batched: self.batched || other.batched, dims })
    }

    /// True when `self` can be summed down to `target`.
    pub fn reduces_to(self, target: Shape) -> bool {
        (self.batched || !target.batched) && (target.dims == self.dims || target.dims.is_scalar())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = if self.batched { "B" } else { "" };
        match (self.batched, self.dims) {
            (false, Dims::Scalar) => write!(f, "[]"),
            (true, Dims::Scalar) => write!(f, "[B]"),
            (_, Dims::Vector(n)) if self.batched => write!(f, "[{b}, {n}]"),
            (_, Dims::Vector(n)) => write!(f, "[{n}]"),
            (_, Dims::Matrix(m, n)) if self.batched => write!(f, "[{b}, {m}, {n}]"),
            (_, Dims::Matrix(m, n)) => write!(f, "[{m}, {n}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_rules() {
        let bv = Shape::batch_vec(3);
        assert_eq!(bv.broadcast(Shape::SCALAR), Some(bv));
        assert_eq!(Shape::BATCH.broadcast(Shape::vector(3)), Some(bv));
        assert_eq!(Shape::vector(2).broadcast(Shape::vector(3)), None);
        assert!(bv.reduces_to(Shape::SCALAR));
        assert!(!Shape::vector(3).reduces_to(Shape::BATCH));
    }

    #[test]
    fn display() {
        assert_eq!(Shape::batch_vec(3).to_string(), "[B, 3]");
        assert_eq!(Shape::matrix(2, 4).to_string(), "[2, 4]");
    }
}
