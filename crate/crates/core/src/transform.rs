//! Orthonormal DCT-II / DCT-III pair matching the cosine matrix.
//!
//! `dct_forward(V) = P^T V / sqrt(s)` and `dct_inverse(Z) = P Z / sqrt(s)`,
//! applied column by column, where `P[i][j] = P_j(c_i)` at the `s` cosine
//! nodes. The fast path reorders each column (even samples ascending, odd
//! samples descending), runs one complex FFT of length `s` and rotates by a
//! quarter-sample twiddle. Any length is supported by the FFT planner.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rustfft::{Fft, FftPlanner};

use crate::basis::nodes;
use crate::error::{Error, Result};
use crate::tableau::{cosine_matrix, SpectralFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMode {
    /// Dense multiplication by the scaled cosine matrix.
    Reference,
    /// FFT-based `O(s log s)` path.
    #[default]
    Fast,
}

#[derive(Clone)]
struct FftPath {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / (2s))`
    twiddle: Vec<Complex<f64>>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

/// Precomputed tables and scratch space for length-`s` transforms.
///
/// Applies take `&mut self`; use one plan per thread.
#[derive(Clone)]
pub struct TransformPlan {
    s: usize,
    mode: TransformMode,
    /// `P / sqrt(s)`, reference mode only.
    dense: Option<DMatrix<f64>>,
    fft: Option<FftPath>,
}

impl fmt::Debug for TransformPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformPlan")
            .field("s", &self.s)
            .field("mode", &self.mode)
            .finish()
    }
}

impl TransformPlan {
    pub fn new(s: usize, mode: TransformMode) -> Result<Self> {
        if s == 0 {
            return Err(Error::ZeroStages);
        }
        let (dense, fft) = match mode {
            TransformMode::Reference => {
                let n = nodes(s)?;
                (Some(cosine_matrix(&n, s) / (s as f64).sqrt()), None)
            }
            TransformMode::Fast => {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(s);
                let inverse = planner.plan_fft_inverse(s);
                let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
                let twiddle = (0..s)
                    .map(|k| Complex::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2 * s) as f64))
                    .collect();
                let path = FftPath {
                    forward,
                    inverse,
                    twiddle,
                    buf: vec![Complex::new(0.0, 0.0); s],
                    scratch: vec![Complex::new(0.0, 0.0); scratch_len],
                };
                (None, Some(path))
            }
        };
        Ok(TransformPlan { s, mode, dense, fft })
    }

    pub fn len(&self) -> usize {
        self.s
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode(&self) -> TransformMode {
        self.mode
    }

    fn check_rows(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.s {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", self.s),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(())
    }

    /// Orthonormal DCT-II of every column: `P^T V / sqrt(s)`.
    pub fn dct_forward(&mut self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(v)?;
        if let Some(dense) = &self.dense {
            return Ok(dense.tr_mul(v));
        }
        let mut out = v.clone();
        for mut col in out.column_iter_mut() {
            self.forward_column(col.as_mut_slice());
        }
        Ok(out)
    }

    /// Orthonormal DCT-III of every column: `P Z / sqrt(s)`.
    pub fn dct_inverse(&mut self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(z)?;
        if let Some(dense) = &self.dense {
            return Ok(dense * z);
        }
        let mut out = z.clone();
        for mut col in out.column_iter_mut() {
            self.inverse_column(col.as_mut_slice());
        }
        Ok(out)
    }

    /// `A W = dct_inverse(X dct_forward(W))` with `X` applied sparsely.
    pub fn apply_butcher(&mut self, x: &SpectralFactor, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.is_extended() || x.s() != self.s {
            return Err(Error::ShapeMismatch {
                expected: format!("square spectral factor of order {}", self.s),
                got: format!("{}x{}", x.rows(), x.s()),
            });
        }
        let z = self.dct_forward(w)?;
        let xz = x.apply(&z)?;
        self.dct_inverse(&xz)
    }

    fn forward_column(&mut self, col: &mut [f64]) {
        let s = self.s;
        let path = self.fft.as_mut().expect("fast plan");
        let half = s.div_ceil(2);
        for n in 0..half {
            path.buf[n] = Complex::new(col[2 * n], 0.0);
        }
        for n in 0..s / 2 {
            path.buf[s - 1 - n] = Complex::new(col[2 * n + 1], 0.0);
        }
        path.forward.process_with_scratch(&mut path.buf, &mut path.scratch);
        let w0 = 1.0 / (s as f64).sqrt();
        let wk = SQRT_2 * w0;
        for (k, out) in col.iter_mut().enumerate() {
            let y = (path.twiddle[k] * path.buf[k]).re;
            *out = if k == 0 { w0 * y } else { wk * y };
        }
    }

    fn inverse_column(&mut self, col: &mut [f64]) {
        let s = self.s;
        let path = self.fft.as_mut().expect("fast plan");
        let sf = s as f64;
        // Unnormalised DCT-II coefficients y_k of the sequence we want back.
        let y = |k: usize| -> f64 {
            if k == 0 {
                sf.sqrt() * col[0]
            } else if k < s {
                (sf / 2.0).sqrt() * col[k]
            } else {
                0.0
            }
        };
        for k in 0..s {
            let v = Complex::new(y(k), -y(s - k));
            path.buf[k] = path.twiddle[k].conj() * v;
        }
        path.inverse.process_with_scratch(&mut path.buf, &mut path.scratch);
        let inv = 1.0 / sf;
        let half = s.div_ceil(2);
        for n in 0..half {
            col[2 * n] = path.buf[n].re * inv;
        }
        for n in 0..s / 2 {
            col[2 * n + 1] = path.buf[s - 1 - n].re * inv;
        }
    }
}
