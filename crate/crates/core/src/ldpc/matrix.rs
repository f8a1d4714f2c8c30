use std::fmt::Write as _;

use crate::error::{Error, Result};

const TC128_TEXT: &str = include_str!("../../data/ccsds_tc_128_64.txt");

/// Sparse binary parity-check matrix stored as per-row column lists.
///
/// Text format: first line `n k`, then one line per check listing the
/// 0-based column indices of its nonzero entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    k: usize,
    rows: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix and checks that its GF(2) rank equals `n - k`.
    pub fn new(n: usize, k: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        if k >= n {
            return Err(Error::ParityCheck(format!("k = {k} must be below n = {n}")));
        }
        let mut rows = rows;
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::ParityCheck(format!("row {i} repeats a column")));
            }
            if let Some(&c) = row.last() {
                if c >= n {
                    return Err(Error::ParityCheck(format!("row {i} references column {c} >= n = {n}")));
                }
            }
        }
        let h = ParityCheckMatrix { n, k, rows };
        let rank = h.rank();
        if rank != n - k {
            return Err(Error::ParityCheck(format!(
                "GF(2) rank {rank} differs from n - k = {}",
                n - k
            )));
        }
        Ok(h)
    }

    /// The (128, 64) telecommand code shipped in `data/`.
    pub fn ccsds_tc128() -> Self {
        Self::from_text(TC128_TEXT).expect("bundled parity-check matrix is valid")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::format("parity-check", "empty file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format("parity-check", format!("header: {e}")))?;
        let [n, k] = dims[..] else {
            return Err(Error::format("parity-check", "header must be `n k`"));
        };
        let rows = lines
            .enumerate()
            .map(|(i, l)| {
                l.split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<Vec<usize>, _>>()
                    .map_err(|e| Error::format("parity-check", format!("row {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, k, rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.k);
        for row in &self.rows {
            let mut first = true;
            for c in row {
                if !first {
                    out.push(' ');
                }
                let _ = write!(out, "{c}");
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_checks(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// `H * bits` over GF(2).
    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: bits.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)))
            .collect())
    }

    /// True when every check is satisfied. Panics on a length mismatch.
    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        assert_eq!(bits.len(), self.n);
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 0)
    }

    /// Dense rows packed into 64-bit words.
    pub(crate) fn dense_rows(&self) -> Vec<Vec<u64>> {
        let words = self.n.div_ceil(64);
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0u64; words];
                for &c in row {
                    dense[c / 64] ^= 1 << (c % 64);
                }
                dense
            })
            .collect()
    }

    fn rank(&self) -> usize {
        let mut m = self.dense_rows();
        let mut rank = 0;
        for col in 0..self.n {
            let (w, b) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..m.len()).find(|&r| m[r][w] & b != 0) else {
                continue;
            };
            m.swap(rank, p);
            let pivot = m[rank].clone();
            for (r, row) in m.iter_mut().enumerate() {
                if r != rank && row[w] & b != 0 {
                    row.iter_mut().zip(&pivot).for_each(|(x, y)| *x ^= y);
                }
            }
            rank += 1;
        }
        rank
    }
}
