//! Invertible network of affine coupling layers.
//!
//! Each layer leaves one half of the coordinates untouched and applies an
//! element-wise scale and shift to the other half, both computed from the
//! untouched half by small feed-forward nets. Parities alternate so every
//! coordinate is transformed by consecutive layers. The stack is exactly
//! invertible and trained with hand-written reverse-mode gradients.

mod format;
mod gradcheck;
mod layer;
mod model;
mod net;
mod train;

pub use format::{inn_dtype, load_inn, read_inn, save_inn, write_inn, INN_MAGIC, INN_VERSION};
pub use gradcheck::{compare_gradients, grad_check, numeric_gradients, GradCheckReport};
pub use layer::{CouplingLayer, Parity, IDENTITY_HIDDEN_GAIN};
pub use model::{random_inn, random_inn_with, GradientBundle, InnModel, LayerGrad, RandomInnSpec};
pub use net::{Dense, Mlp};
pub use train::{fit_inn, Adam, EpochStats, FitOutcome, TrainConfig};

use nalgebra::{DMatrix, RealField};

use crate::embedding::Dtype;
use crate::numerics::Matrix;

/// Floating-point element type of an [`InnModel`].
pub trait Real: RealField + Copy + Send + Sync + 'static {
    const DTYPE: Dtype;
    const WIDTH: usize;

    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;

    /// `c = alpha * op(a) * op(b) + beta * c` on raw strided buffers.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    );
}

impl Real for f32 {
    const DTYPE: Dtype = Dtype::F32;
    const WIDTH: usize = 4;

    fn of(x: f64) -> Self {
        x as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    ) {
        // SAFETY: `matmul` checks every buffer against its shape and strides.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta,
                c.0.as_mut_ptr(), c.1, c.2,
            )
        }
    }
}

impl Real for f64 {
    const DTYPE: Dtype = Dtype::F64;
    const WIDTH: usize = 8;

    fn of(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    ) {
        // SAFETY: `matmul` checks every buffer against its shape and strides.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta,
                c.0.as_mut_ptr(), c.1, c.2,
            )
        }
    }
}

/// `op(a) * op(b)` where `op` optionally transposes, without materialising
/// the transpose.
pub(crate) fn matmul<T: Real>(a: &DMatrix<T>, trans_a: bool, b: &DMatrix<T>, trans_b: bool) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let (m, k) = if trans_a { (ac, ar) } else { (ar, ac) };
    let (k2, n) = if trans_b { (bc, br) } else { (br, bc) };
    assert_eq!(k, k2, "matmul inner dimensions differ");
    let mut c = DMatrix::<T>::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // column-major: element (i, j) lives at i + j * nrows
    let strides = |rows: usize, t: bool| -> (isize, isize) {
        if t {
            (rows as isize, 1)
        } else {
            (1, rows as isize)
        }
    };
    let (ars, acs) = strides(ar, trans_a);
    let (brs, bcs) = strides(br, trans_b);
    T::gemm(
        m,
        k,
        n,
        T::one(),
        (a.as_slice(), ars, acs),
        (b.as_slice(), brs, bcs),
        T::zero(),
        (c.as_mut_slice(), 1, m as isize),
    );
    c
}

pub(crate) fn to_real<T: Real>(m: &Matrix) -> DMatrix<T> {
    m.map(T::of)
}

pub fn to_f64<T: Real>(m: &DMatrix<T>) -> Matrix {
    m.map(|v| v.to_f64())
}
