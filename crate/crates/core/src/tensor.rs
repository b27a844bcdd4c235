use crate::error::TensorError;

/// Dense row-major tensor of finite `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Validates that every dimension is positive, the element count matches,
    /// and every value is finite. An empty shape denotes a scalar.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroDim(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                shape,
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFinite { index, value });
        }
        Ok(Tensor { shape, data })
    }

    /// Rank-1 tensor over `data`.
    pub fn from_vec(data: Vec<f32>) -> Result<Self, TensorError> {
        Tensor::new(vec![data.len()], data)
    }

    /// Callers guarantee the invariants checked by [`Tensor::new`].
    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn matrix_dims(&self) -> Result<(usize, usize), TensorError> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(TensorError::Rank {
                expected: 2,
                shape: self.shape.clone(),
            }),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.shape.last().copied().unwrap_or(1);
        &self.data[i * cols..(i + 1) * cols]
    }

    /// Multiplies every element by `k`.
    pub fn scaled(&self, k: f32) -> Result<Tensor, TensorError> {
        Tensor::new(
            self.shape.clone(),
            self.data.iter().map(|v| v * k).collect(),
        )
    }
}

/// `a · bᵀ` for `a: (n, k)` and `b: (p, k)`, accumulated in `f64` in index order.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Vec<f64>, TensorError> {
    let (n, k) = a.matrix_dims()?;
    let (p, k2) = b.matrix_dims()?;
    if k != k2 {
        return Err(TensorError::ShapeMismatch {
            left: a.shape.clone(),
            right: b.shape.clone(),
        });
    }
    Ok(matmul_nt_f64(&widen(a.data()), &widen(b.data()), n, p, k))
}

pub(crate) fn widen(data: &[f32]) -> Vec<f64> {
    data.iter().map(|&v| v as f64).collect()
}

pub(crate) fn matmul_nt_f64(a: &[f64], b: &[f64], n: usize, p: usize, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * p);
    for i in 0..n {
        let ra = &a[i * k..(i + 1) * k];
        for j in 0..p {
            let rb = &b[j * k..(j + 1) * k];
            out.push(ra.iter().zip(rb).fold(0.0, |acc, (x, y)| acc + x * y));
        }
    }
    out
}
