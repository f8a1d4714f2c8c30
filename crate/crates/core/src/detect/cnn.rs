//! Inference for the two-branch multi-label network.
//!
//! Branch 1 convolves the sequence feature `Y1` (3 x 256) with eight 2 x 7
//! filters (stride 1, no padding) and flattens the 8 x 2 x 250 result
//! channel-first. Branch 2 flattens the decoder feature `Y2` (21 x 128). Each
//! branch runs two dense ReLU layers (130, 65); the concatenation
//! `[branch 1 | branch 2]` runs dense ReLU layers of 130 and 65 units and a
//! final 2-unit dense layer with a sigmoid per output.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use super::features::{FeatureY1, FeatureY2};
use super::DetectionScores;
use crate::error::{Error, Result};

pub const Y1_COLS: usize = 256;
pub const Y2_ROWS: usize = 21;
pub const Y2_COLS: usize = 128;
pub const CONV_FILTERS: usize = 8;
pub const CONV_H: usize = 2;
pub const CONV_W: usize = 7;
const CONV_OUT_H: usize = FeatureY1::ROWS - CONV_H + 1;
const CONV_OUT_W: usize = Y1_COLS - CONV_W + 1;
pub const CONV_OUT: usize = CONV_FILTERS * CONV_OUT_H * CONV_OUT_W;

/// Layer names and `(rows, cols)` shapes in file order. Dense layers store
/// `out x in` matrices; the convolution stores one flattened 2 x 7 kernel per
/// row.
pub const LAYERS: [(&str, usize, usize); 8] = [
    ("conv", CONV_FILTERS, CONV_H * CONV_W),
    ("b1_fc1", 130, CONV_OUT),
    ("b1_fc2", 65, 130),
    ("b2_fc1", 130, Y2_ROWS * Y2_COLS),
    ("b2_fc2", 65, 130),
    ("m_fc1", 130, 130),
    ("m_fc2", 65, 130),
    ("out", 2, 65),
];

const MAGIC: &[u8; 8] = b"GFRACNN1";
const KIND: &str = "weights";

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Layer {
    fn dense(&self, input: &[f64], relu: bool, out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.cols);
        out.clear();
        out.extend(self.weights.chunks_exact(self.cols).zip(&self.bias).map(|(row, &b)| {
            let z = row.iter().zip(input).map(|(&w, &x)| f64::from(w) * x).sum::<f64>() + f64::from(b);
            if relu {
                z.max(0.0)
            } else {
                z
            }
        }));
    }
}

/// Network parameters, one [`Layer`] per entry of [`LAYERS`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnWeights {
    layers: Vec<Layer>,
}

impl CnnWeights {
    /// Checks names, shapes and finiteness against [`LAYERS`].
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() != LAYERS.len() {
            return Err(Error::shape("layer count", LAYERS.len(), layers.len()));
        }
        for (layer, &(name, rows, cols)) in layers.iter().zip(&LAYERS) {
            if layer.name != name {
                return Err(Error::shape("layer name", name, &layer.name));
            }
            if (layer.rows, layer.cols) != (rows, cols) {
                return Err(Error::shape(
                    name,
                    format!("{rows}x{cols}"),
                    format!("{}x{}", layer.rows, layer.cols),
                ));
            }
            if layer.weights.len() != rows * cols || layer.bias.len() != rows {
                return Err(Error::shape(
                    name,
                    rows * cols + rows,
                    layer.weights.len() + layer.bias.len(),
                ));
            }
            if !layer.weights.iter().chain(&layer.bias).all(|v| v.is_finite()) {
                return Err(Error::format(KIND, format!("layer `{name}` has non-finite values")));
            }
        }
        Ok(CnnWeights { layers })
    }

    /// Uniform Glorot-style initialization, for tests and smoke runs.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let layers = LAYERS
            .iter()
            .map(|&(name, rows, cols)| {
                let limit = (6.0 / (cols + rows) as f64).sqrt() as f32;
                Layer {
                    name: name.to_string(),
                    rows,
                    cols,
                    weights: (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect(),
                    bias: (0..rows).map(|_| rng.random_range(-0.1..0.1)).collect(),
                }
            })
            .collect();
        CnnWeights { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format(KIND, "bad magic"));
        }
        let count = read_u32(&mut r)? as usize;
        if count != LAYERS.len() {
            return Err(Error::shape("layer count", LAYERS.len(), count));
        }
        let mut headers = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            if name_len > 64 {
                return Err(Error::format(KIND, "layer name too long"));
            }
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::format(KIND, "layer name is not UTF-8"))?;
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            headers.push((name, rows, cols));
        }
        for ((name, rows, cols), &(ename, erows, ecols)) in headers.iter().zip(&LAYERS) {
            if name != ename || (*rows, *cols) != (erows, ecols) {
                return Err(Error::shape(
                    "weights manifest",
                    format!("{ename} {erows}x{ecols}"),
                    format!("{name} {rows}x{cols}"),
                ));
            }
        }
        let mut layers = Vec::with_capacity(count);
        for (name, rows, cols) in headers {
            let weights = read_f32s(&mut r, rows * cols)?;
            let bias = read_f32s(&mut r, rows)?;
            layers.push(Layer {
                name,
                rows,
                cols,
                weights,
                bias,
            });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::format(KIND, "trailing bytes after last layer"));
        }
        CnnWeights::new(layers)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.name.len() as u32).to_le_bytes())?;
            w.write_all(l.name.as_bytes())?;
            w.write_all(&(l.rows as u32).to_le_bytes())?;
            w.write_all(&(l.cols as u32).to_le_bytes())?;
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn layer(&self, i: usize) -> &Layer {
        &self.layers[i]
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(KIND, "truncated file"),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    read_exact(r, &mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // Keep the score strictly inside (0, 1) even when it saturates.
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Forward pass, returning the start and tail probabilities.
pub fn cnn_forward(weights: &CnnWeights, y1: &FeatureY1, y2: &FeatureY2) -> Result<DetectionScores> {
    if y1.cols() != Y1_COLS {
        return Err(Error::shape("Y1 columns", Y1_COLS, y1.cols()));
    }
    if (y2.rows(), y2.cols()) != (Y2_ROWS, Y2_COLS) {
        return Err(Error::shape(
            "Y2",
            format!("{Y2_ROWS}x{Y2_COLS}"),
            format!("{}x{}", y2.rows(), y2.cols()),
        ));
    }

    let conv = weights.layer(0);
    let x = y1.as_slice();
    let mut feat = Vec::with_capacity(CONV_OUT);
    for (kernel, &b) in conv.weights.chunks_exact(CONV_H * CONV_W).zip(&conv.bias) {
        for i in 0..CONV_OUT_H {
            for j in 0..CONV_OUT_W {
                let mut z = f64::from(b);
                for a in 0..CONV_H {
                    let row = &x[(i + a) * Y1_COLS + j..(i + a) * Y1_COLS + j + CONV_W];
                    let k = &kernel[a * CONV_W..(a + 1) * CONV_W];
                    z += k.iter().zip(row).map(|(&w, &v)| f64::from(w) * v).sum::<f64>();
                }
                feat.push(z.max(0.0));
            }
        }
    }

    let mut h1 = Vec::new();
    let mut b1 = Vec::new();
    weights.layer(1).dense(&feat, true, &mut h1);
    weights.layer(2).dense(&h1, true, &mut b1);

    let mut h2 = Vec::new();
    let mut b2 = Vec::new();
    weights.layer(3).dense(y2.as_slice(), true, &mut h2);
    weights.layer(4).dense(&h2, true, &mut b2);

    b1.extend_from_slice(&b2);
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    let mut logits = Vec::new();
    weights.layer(5).dense(&b1, true, &mut m1);
    weights.layer(6).dense(&m1, true, &mut m2);
    weights.layer(7).dense(&m2, false, &mut logits);

    Ok(DetectionScores {
        p_a: sigmoid(logits[0]),
        p_b: sigmoid(logits[1]),
    })
}
