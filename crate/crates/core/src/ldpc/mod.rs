//! Binary LDPC code: parity-check matrix, systematic encoder and the
//! normalized min-sum decoder.

mod decoder;
mod encoder;
mod matrix;

pub use decoder::{DecodeResult, NmsDecoder, DEFAULT_ALPHA, MESSAGE_CLIP};
pub use encoder::Encoder;
pub use matrix::ParityCheckMatrix;

use crate::error::Result;

/// Free-function form of [`Encoder::encode`].
pub fn encode(info: &[u8], encoder: &Encoder) -> Result<Vec<u8>> {
    encoder.encode(info)
}

/// Free-function form of [`ParityCheckMatrix::syndrome`].
pub fn syndrome(bits: &[u8], h: &ParityCheckMatrix) -> Result<Vec<u8>> {
    h.syndrome(bits)
}
