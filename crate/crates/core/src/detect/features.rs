use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ldpc::DecodeResult;

/// Sequence feature: three rows of `2L` reals holding, in order, the start
/// sequence, the combined window and the tail sequence, each as
/// `[real parts | imaginary parts]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureY1 {
    len: usize,
    data: Vec<f64>,
}

impl FeatureY1 {
    pub const ROWS: usize = 3;

    /// Window length `L`; each row has `2L` entries.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cols(&self) -> usize {
        2 * self.len
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols()..(r + 1) * self.cols()]
    }

    /// Row-major values, `3 * 2L` of them.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn from_flat(len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * 2 * len {
            return Err(Error::shape("Y1", 6 * len, data.len()));
        }
        Ok(FeatureY1 { len, data })
    }
}

pub fn build_y1(window_hat: &[Complex64], x_pre: &[f64], x_tail: &[f64]) -> Result<FeatureY1> {
    let len = x_pre.len();
    for actual in [window_hat.len(), x_tail.len()] {
        if actual != len {
            return Err(Error::LengthMismatch { expected: len, actual });
        }
    }
    let mut data = Vec::with_capacity(6 * len);
    let real_row = |data: &mut Vec<f64>, x: &[f64]| {
        data.extend_from_slice(x);
        data.extend(std::iter::repeat_n(0.0, x.len()));
    };
    real_row(&mut data, x_pre);
    data.extend(window_hat.iter().map(|c| c.re));
    data.extend(window_hat.iter().map(|c| c.im));
    real_row(&mut data, x_tail);
    Ok(FeatureY1 { len, data })
}

/// Decoder feature: `i_max` rows of per-iteration LLRs followed by one row of
/// the convergence flag.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureY2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Source for [`build_y2`].
#[derive(Debug, Clone, Copy)]
pub enum Y2Input<'a> {
    /// Start detection: every LLR entry carries the window's correlation
    /// score and the flag row is zero.
    Start { correlation: f64, i_max: usize, len: usize },
    /// Tail detection on a decoded block.
    Tail { decode: &'a DecodeResult, i_max: usize },
}

impl FeatureY2 {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The trailing convergence-flag row.
    pub fn flag_row(&self) -> &[f64] {
        self.row(self.rows - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("Y2", rows * cols, data.len()));
        }
        Ok(FeatureY2 { rows, cols, data })
    }
}

pub fn build_y2(input: Y2Input<'_>) -> Result<FeatureY2> {
    match input {
        Y2Input::Start {
            correlation,
            i_max,
            len,
        } => {
            let mut data = vec![correlation; i_max * len];
            data.extend(std::iter::repeat_n(0.0, len));
            Ok(FeatureY2 {
                rows: i_max + 1,
                cols: len,
                data,
            })
        }
        Y2Input::Tail { decode, i_max } => {
            if decode.iterations() != i_max {
                return Err(Error::shape("decoder trajectory rows", i_max, decode.iterations()));
            }
            let mut data = decode.llr_trajectory.clone();
            let flag = if decode.converged { 1.0 } else { 0.0 };
            data.extend(std::iter::repeat_n(flag, decode.n));
            Ok(FeatureY2 {
                rows: i_max + 1,
                cols: decode.n,
                data,
            })
        }
    }
}
