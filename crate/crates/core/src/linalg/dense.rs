//! Plain-data form of complex matrices used in JSON files.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix stored row-major as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl DenseMatrix {
    pub fn from_complex(m: &DMatrix<Complex64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_complex(&self) -> Result<DMatrix<Complex64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "dense matrix declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            Complex64::new(re, im)
        }))
    }
}

impl From<DMatrix<Complex64>> for DenseMatrix {
    fn from(m: DMatrix<Complex64>) -> Self {
        Self::from_complex(&m)
    }
}

impl TryFrom<DenseMatrix> for DMatrix<Complex64> {
    type Error = Error;

    fn try_from(d: DenseMatrix) -> Result<Self> {
        d.to_complex()
    }
}

/// Serde adapter for lists of complex matrices stored as [`DenseMatrix`].
pub(crate) mod vec_serde {
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::DenseMatrix;

    pub fn serialize<S: Serializer>(v: &[DMatrix<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let dense: Vec<DenseMatrix> = v.iter().map(DenseMatrix::from_complex).collect();
        dense.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<Complex64>>, D::Error> {
        let dense = Vec::<DenseMatrix>::deserialize(d)?;
        dense
            .iter()
            .map(|m| m.to_complex().map_err(serde::de::Error::custom))
            .collect()
    }
}
