//! Dense linear algebra over a prime field.

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    n: usize,
    data: Vec<FieldElement>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<FieldElement>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!("row of length {} in a {n}x{n} matrix", row.len())));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.data[r * self.n + c]
    }

    pub fn mul_vec(&self, field: &PrimeField, v: &[FieldElement]) -> Vec<FieldElement> {
        (0..self.n).map(|r| field.dot(&self.data[r * self.n..(r + 1) * self.n], v)).collect()
    }

    /// Gauss-Jordan inverse; pivots on the first nonzero entry of each column.
    pub fn inverse(&self, field: &PrimeField) -> Result<Matrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = vec![FieldElement::ZERO; n * n];
        for i in 0..n {
            inv[i * n + i] = FieldElement::ONE;
        }
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a[r * n + col].is_zero()).ok_or(Error::SingularSystem)?;
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                    inv.swap(pivot * n + c, col * n + c);
                }
            }
            let scale = field.inv(a[col * n + col])?;
            for c in 0..n {
                a[col * n + c] = field.mul(a[col * n + c], scale);
                inv[col * n + c] = field.mul(inv[col * n + c], scale);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor.is_zero() {
                    continue;
                }
                for c in 0..n {
                    a[r * n + c] = field.sub(a[r * n + c], field.mul(factor, a[col * n + c]));
                    inv[r * n + c] = field.sub(inv[r * n + c], field.mul(factor, inv[col * n + c]));
                }
            }
        }
        Ok(Matrix { n, data: inv })
    }
}
