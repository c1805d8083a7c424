//! Dense complex Hermitian linear algebra.

pub mod channel;
pub mod dense;
pub mod density;
pub mod hermitian;
pub mod maps;
pub mod ops;
pub mod random;

pub use channel::{apply_channel, KrausChannel};
pub use dense::DenseMatrix;
pub use density::DensityMatrix;
pub use hermitian::{
    eigh, matrix_exp, matrix_log_on_support, positive_part, trace_plus, CMatrix, Eigh,
    HermitianMatrix,
};
pub use maps::LinearMap;
pub use ops::{partial_trace, partial_transpose, tensor, Subsystem};
