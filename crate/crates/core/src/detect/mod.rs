//! Boundary detection: the GLRT correlator, the two network features and
//! CNN inference, and threshold classification.

mod cnn;
mod features;
mod glrt;

use std::sync::Arc;

use num_complex::Complex64;

pub use cnn::{
    cnn_forward, CnnWeights, Layer, CONV_FILTERS, CONV_H, CONV_OUT, CONV_W, LAYERS, Y1_COLS, Y2_COLS, Y2_ROWS,
};
pub use features::{build_y1, build_y2, FeatureY1, FeatureY2, Y2Input};
pub use glrt::glrt_statistic;

use crate::error::Result;
use crate::ldpc::DecodeResult;

/// Probabilities of the start label `A` and the tail label `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub p_a: f64,
    pub p_b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub start: f64,
    pub tail: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { start: 0.5, tail: 0.5 }
    }
}

/// Label pair `[A, B]`; the labels are not mutually exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelPair {
    pub start: bool,
    pub tail: bool,
}

pub fn classify(scores: DetectionScores, threshold_a: f64, threshold_b: f64) -> LabelPair {
    LabelPair {
        start: scores.p_a >= threshold_a,
        tail: scores.p_b >= threshold_b,
    }
}

/// Window classes used for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowClass {
    /// Noise or non-informative samples.
    H0,
    /// Start sequence.
    H1,
    /// Tail sequence.
    H2,
    /// Codeword.
    H3,
    /// Start sequence overlapping a tail sequence.
    H4,
}

impl WindowClass {
    pub const ALL: [WindowClass; 5] = [Self::H0, Self::H1, Self::H2, Self::H3, Self::H4];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(usize::from(id)).copied()
    }

    pub fn labels(self) -> LabelPair {
        let (start, tail) = match self {
            Self::H0 | Self::H3 => (false, false),
            Self::H1 => (true, false),
            Self::H2 => (false, true),
            Self::H4 => (true, true),
        };
        LabelPair { start, tail }
    }
}

/// Boundary detector used by the receiver.
#[derive(Debug, Clone)]
pub enum Detector {
    Glrt,
    Cnn(Arc<CnnWeights>),
}

impl Detector {
    /// Start-label score of a combined window.
    pub fn start_score(&self, x_hat: &[Complex64], x_pre: &[f64], x_tail: &[f64], i_max: usize) -> Result<f64> {
        let corr = glrt_statistic(x_hat, x_pre);
        match self {
            Detector::Glrt => Ok(corr),
            Detector::Cnn(w) => {
                let y1 = build_y1(x_hat, x_pre, x_tail)?;
                let y2 = build_y2(Y2Input::Start {
                    correlation: corr,
                    i_max,
                    len: x_tail.len(),
                })?;
                Ok(cnn_forward(w, &y1, &y2)?.p_a)
            }
        }
    }

    /// Tail-label score of a combined block. The GLRT ignores `decode`; the
    /// network requires it.
    pub fn tail_score(
        &self,
        x_hat: &[Complex64],
        x_pre: &[f64],
        x_tail: &[f64],
        decode: Option<&DecodeResult>,
        i_max: usize,
    ) -> Result<f64> {
        match self {
            Detector::Glrt => Ok(glrt_statistic(x_hat, x_tail)),
            Detector::Cnn(w) => {
                let decode = decode.expect("network tail detection needs the block's decoder output");
                let y1 = build_y1(x_hat, x_pre, x_tail)?;
                let y2 = build_y2(Y2Input::Tail { decode, i_max })?;
                Ok(cnn_forward(w, &y1, &y2)?.p_b)
            }
        }
    }

    /// Whether [`tail_score`](Self::tail_score) consumes the decoder output.
    pub fn uses_decoder(&self) -> bool {
        matches!(self, Detector::Cnn(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        let s = |p_a, p_b| DetectionScores { p_a, p_b };
        let l = classify(s(0.9, 0.1), 0.5, 0.5);
        assert_eq!(l, WindowClass::H1.labels());
        assert_eq!(classify(s(0.9, 0.9), 0.5, 0.5), WindowClass::H4.labels());
        assert_eq!(
            classify(s(0.5, 0.49), 0.5, 0.5),
            LabelPair {
                start: true,
                tail: false
            }
        );
        assert_eq!(
            classify(s(0.3, 0.3), 0.0, 0.0),
            LabelPair {
                start: true,
                tail: true
            }
        );
        assert_eq!(
            classify(s(0.99, 0.99), 1.0, 1.0),
            LabelPair {
                start: false,
                tail: false
            }
        );
    }

    #[test]
    fn class_ids() {
        for c in WindowClass::ALL {
            assert_eq!(WindowClass::from_id(c.id()), Some(c));
        }
        assert_eq!(WindowClass::from_id(5), None);
        assert_eq!(
            WindowClass::H2.labels(),
            LabelPair {
                start: false,
                tail: true
            }
        );
    }
}
