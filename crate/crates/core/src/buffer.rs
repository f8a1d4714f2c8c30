use num_complex::Complex64;

/// Multi-antenna sample matrix, `antennas` rows of `len` complex samples,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBuffer {
    antennas: usize,
    len: usize,
    data: Vec<Complex64>,
}

impl ReceivedBuffer {
    pub fn zeros(antennas: usize, len: usize) -> Self {
        ReceivedBuffer {
            antennas,
            len,
            data: vec![Complex64::new(0.0, 0.0); antennas * len],
        }
    }

    /// Builds a buffer from per-antenna rows of equal length.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let antennas = rows.len();
        let len = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == len), "ragged rows");
        ReceivedBuffer {
            antennas,
            len,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.len..(r + 1) * self.len]
    }

    pub fn get(&self, r: usize, t: usize) -> Complex64 {
        self.data[r * self.len + t]
    }

    pub fn column(&self, t: usize) -> Vec<Complex64> {
        (0..self.antennas).map(|r| self.get(r, t)).collect()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Adds `h[r] * x[t]` at samples `start..start + x.len()` of every row.
    pub fn add_signal(&mut self, start: usize, h: &[Complex64], x: &[f64]) {
        assert_eq!(h.len(), self.antennas);
        assert!(start + x.len() <= self.len, "signal overruns buffer");
        for (r, &hr) in h.iter().enumerate() {
            let row = &mut self.row_mut(r)[start..start + x.len()];
            for (s, &xt) in row.iter_mut().zip(x) {
                *s += hr * xt;
            }
        }
    }

    /// Subtracts `h[r] * x[t]`; the inverse of [`add_signal`](Self::add_signal).
    pub fn subtract_signal(&mut self, start: usize, h: &[Complex64], x: &[f64]) {
        assert_eq!(h.len(), self.antennas);
        assert!(start + x.len() <= self.len, "signal overruns buffer");
        for (r, &hr) in h.iter().enumerate() {
            let row = &mut self.row_mut(r)[start..start + x.len()];
            for (s, &xt) in row.iter_mut().zip(x) {
                *s -= hr * xt;
            }
        }
    }

    /// Total energy over samples `start..end` of all rows.
    pub fn energy(&self, start: usize, end: usize) -> f64 {
        (0..self.antennas)
            .map(|r| self.row(r)[start..end].iter().map(|s| s.norm_sqr()).sum::<f64>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|s| s.re.is_finite() && s.im.is_finite())
    }

    /// Element-wise sum of two equally shaped buffers.
    pub fn add(&mut self, other: &ReceivedBuffer) {
        assert_eq!((self.antennas, self.len), (other.antennas, other.len));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}
