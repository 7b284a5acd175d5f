use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// Row-major dense tensor. Matrices are `[rows, cols]`, vectors `[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::ShapeMismatch {
                expected: shape.to_vec(),
                found: vec![data.len()],
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Entries drawn from U[-scale, scale].
    pub fn uniform<R: Rng>(shape: &[usize], scale: f64, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-scale, scale);
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| dist.sample(rng)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    fn expect_cols(&self, n: usize) -> Result<(), NnError> {
        if self.shape.len() != 2 || self.cols() != n {
            return Err(NnError::ShapeMismatch {
                expected: vec![self.shape.first().copied().unwrap_or(0), n],
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    /// `self · x` for a matrix `self`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.expect_cols(x.len())?;
        Ok((0..self.rows())
            .map(|r| super::dot(self.row(r), x))
            .collect())
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[f64]) -> Result<Vec<f64>, NnError> {
        if self.shape.len() != 2 || self.rows() != y.len() {
            return Err(NnError::ShapeMismatch {
                expected: vec![y.len(), self.cols()],
                found: self.shape.clone(),
            });
        }
        let mut out = vec![0.0; self.cols()];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                axpy(&mut out, yr, self.row(r));
            }
        }
        Ok(out)
    }

    /// `self += scale · a ⊗ b`.
    pub fn add_outer(&mut self, scale: f64, a: &[f64], b: &[f64]) -> Result<(), NnError> {
        if self.rows() != a.len() {
            return Err(NnError::ShapeMismatch {
                expected: vec![a.len(), b.len()],
                found: self.shape.clone(),
            });
        }
        self.expect_cols(b.len())?;
        for (r, &ar) in a.iter().enumerate() {
            if ar != 0.0 {
                axpy(self.row_mut(r), scale * ar, b);
            }
        }
        Ok(())
    }

    /// `self += scale · other`, elementwise.
    pub fn add_scaled(&mut self, scale: f64, other: &Tensor) -> Result<(), NnError> {
        if self.shape != other.shape {
            return Err(NnError::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        axpy(&mut self.data, scale, &other.data);
        Ok(())
    }
}

/// `y += a · x`
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let m = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0]).unwrap(), vec![5.0, 7.0, 9.0]);
        assert!(m.matvec(&[1.0]).is_err());
    }

    #[test]
    fn outer_update() {
        let mut m = Tensor::zeros(&[2, 2]);
        m.add_outer(2.0, &[1.0, 3.0], &[1.0, -1.0]).unwrap();
        assert_eq!(m.data(), &[2.0, -2.0, 6.0, -6.0]);
    }

    #[test]
    fn shape_checked() {
        assert!(Tensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
    }
}
