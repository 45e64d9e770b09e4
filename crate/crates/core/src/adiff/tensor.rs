use super::shape::{Dims, Shape};

/// Dense value of a node: `lanes × inner` numbers stored lane-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub data: Vec<f64>,
    /// `Some(B)` for batched values.
    pub batch: Option<usize>,
    pub dims: Dims,
}

impl Tensor {
    pub fn scalar(v: f64) -> Self {
        Tensor { data: vec![v], batch: None, dims: Dims::Scalar }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor { data, batch: None, dims: Dims::Vector(n) }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Tensor { data, batch: None, dims: Dims::Matrix(rows, cols) }
    }

    pub fn batch_scalar(data: Vec<f64>) -> Self {
        let b = data.len();
        Tensor { data, batch: Some(b), dims: Dims::Scalar }
    }

    /// Batched `n`-vectors from flat lane-major data.
    pub fn batch_vec(n: usize, data: Vec<f64>) -> Self {
        assert!(n > 0 && data.len() % n == 0, "batch_vec data length");
        let b = data.len() / n;
        Tensor { data, batch: Some(b), dims: Dims::Vector(n) }
    }

    pub fn from_points(points: &[[f64; 3]]) -> Self {
        let data = points.iter().flat_map(|p| p.iter().copied()).collect();
        Tensor { data, batch: Some(points.len()), dims: Dims::Vector(3) }
    }

    pub fn zeros(shape: Shape, batch: usize) -> Self {
        Tensor {
            data: vec![0.0; shape.numel(batch)],
            batch: shape.batched.then_some(batch),
            dims: shape.dims,
        }
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.batch.is_some(), self.dims)
    }

    pub fn lanes(&self) -> usize {
        self.batch.unwrap_or(1)
    }

    pub fn inner_len(&self) -> usize {
        self.dims.len()
    }

    /// Component `k` of every lane.
    pub fn column(&self, k: usize) -> Vec<f64> {
        let n = self.inner_len();
        assert!(k < n);
        self.data.iter().skip(k).step_by(n).copied().collect()
    }

    /// Single value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a non-singleton tensor");
        self.data[0]
    }

    pub fn lane(&self, i: usize) -> &[f64] {
        let n = self.inner_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
