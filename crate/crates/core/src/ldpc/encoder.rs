use std::sync::Arc;

use super::ParityCheckMatrix;
use crate::error::{Error, Result};

/// Systematic encoder derived from the parity-check matrix by Gaussian
/// elimination.
///
/// Pivots are taken from the rightmost columns first, so for a code whose
/// right half of `H` is invertible the information bits occupy positions
/// `0..k` and the parity bits follow.
#[derive(Debug, Clone)]
pub struct Encoder {
    h: Arc<ParityCheckMatrix>,
    info_positions: Vec<usize>,
    /// `(parity position, mask over info bits)`.
    parity_equations: Vec<(usize, Vec<u64>)>,
}

impl Encoder {
    pub fn new(h: Arc<ParityCheckMatrix>) -> Self {
        let n = h.n();
        let mut m = h.dense_rows();
        let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
        let mut next_row = 0;
        for col in (0..n).rev() {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (next_row..m.len()).find(|&r| m[r][w] & b != 0) else {
                continue;
            };
            m.swap(next_row, p);
            let pivot = m[next_row].clone();
            for (r, row) in m.iter_mut().enumerate() {
                if r != next_row && row[w] & b != 0 {
                    row.iter_mut().zip(&pivot).for_each(|(x, y)| *x ^= y);
                }
            }
            pivots.push((next_row, col));
            next_row += 1;
        }

        let mut is_pivot = vec![false; n];
        for &(_, c) in &pivots {
            is_pivot[c] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let info_words = info_positions.len().div_ceil(64);
        let mut parity_equations: Vec<(usize, Vec<u64>)> = pivots
            .iter()
            .map(|&(r, col)| {
                let mut mask = vec![0u64; info_words];
                for (i, &c) in info_positions.iter().enumerate() {
                    if m[r][c / 64] >> (c % 64) & 1 == 1 {
                        mask[i / 64] |= 1 << (i % 64);
                    }
                }
                (col, mask)
            })
            .collect();
        parity_equations.sort_by_key(|(c, _)| *c);

        Encoder {
            h,
            info_positions,
            parity_equations,
        }
    }

    pub fn code(&self) -> &ParityCheckMatrix {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    /// Codeword positions that carry the information bits, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::LengthMismatch {
                expected: self.k(),
                actual: info.len(),
            });
        }
        let mut packed = vec![0u64; self.k().div_ceil(64)];
        for (i, &b) in info.iter().enumerate() {
            packed[i / 64] |= u64::from(b & 1) << (i % 64);
        }
        let mut cw = vec![0u8; self.n()];
        for (&pos, &b) in self.info_positions.iter().zip(info) {
            cw[pos] = b & 1;
        }
        for (pos, mask) in &self.parity_equations {
            let ones: u32 = mask.iter().zip(&packed).map(|(m, p)| (m & p).count_ones()).sum();
            cw[*pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Reads the information bits back out of a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Result<Vec<u8>> {
        if codeword.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                actual: codeword.len(),
            });
        }
        Ok(self.info_positions.iter().map(|&p| codeword[p]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn encoder() -> Encoder {
        Encoder::new(Arc::new(ParityCheckMatrix::ccsds_tc128()))
    }

    #[test]
    fn dimensions() {
        let enc = encoder();
        assert_eq!((enc.n(), enc.k()), (128, 64));
        assert_eq!(enc.info_positions(), &(0..64).collect::<Vec<_>>()[..]);
        assert_eq!(enc.encode(&[1; 64]).unwrap().len(), 128);
    }

    #[test]
    fn zero_info_gives_zero_codeword() {
        assert_eq!(encoder().encode(&[0; 64]).unwrap(), vec![0; 128]);
    }

    #[test]
    fn random_codewords_have_zero_syndrome() {
        let enc = encoder();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let cw = enc.encode(&info).unwrap();
            // Independent check straight from the row lists.
            for row in enc.code().rows() {
                assert_eq!(row.iter().map(|&c| cw[c] as u32).sum::<u32>() % 2, 0);
            }
            assert_eq!(enc.extract_info(&cw).unwrap(), info);
        }
    }

    #[test]
    fn single_bit_flips_are_detected() {
        let enc = encoder();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
        let cw = enc.encode(&info).unwrap();
        for i in 0..128 {
            let mut bad = cw.clone();
            bad[i] ^= 1;
            assert!(enc.code().syndrome(&bad).unwrap().contains(&1), "flip at {i}");
        }
    }

    #[test]
    fn length_mismatch() {
        let enc = encoder();
        assert!(matches!(
            enc.encode(&[0; 63]),
            Err(Error::LengthMismatch {
                expected: 64,
                actual: 63
            })
        ));
        assert!(enc.extract_info(&[0; 64]).is_err());
    }
}
