use crate::error::{invalid, Error, Result};

/// One real value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One `dim`-vector per vertex, stored vertex-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return invalid("vector field needs at least one component");
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: data.len() % dim });
        }
        Ok(Self { dim, data })
    }

    pub fn zeros(vertex_count: usize, dim: usize) -> Self {
        Self { dim, data: vec![0.0; vertex_count * dim] }
    }

    pub fn from_fn(vertex_count: usize, dim: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(vertex_count * dim);
        for i in 0..vertex_count {
            let row = f(i);
            assert_eq!(row.len(), dim, "row {i} has the wrong length");
            data.extend(row);
        }
        Self { dim, data }
    }

    /// Builds a field from per-component vertex arrays.
    pub fn from_components(components: &[Vec<f64>]) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return invalid("no components");
        }
        let n = components[0].len();
        if components.iter().any(|c| c.len() != n) {
            return invalid("components differ in length");
        }
        Ok(Self::from_fn(n, dim, |i| components.iter().map(|c| c[i]).collect()))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.dim).copied().collect()
    }

    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|c| self.component(c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Appends zero components so that the field lives in `R^new_dim`.
    pub fn zero_padded(&self, new_dim: usize) -> Self {
        assert!(new_dim >= self.dim);
        Self::from_fn(self.vertex_count(), new_dim, |i| {
            let mut row = self.row(i).to_vec();
            row.resize(new_dim, 0.0);
            row
        })
    }

    pub fn row_norms(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
