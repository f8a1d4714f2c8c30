//! Training records and their binary file format.
//!
//! Layout, little-endian: the magic `GFRADS01`, a `u32` record count, a
//! `u32` float count per record, then the records as `f32` values in the
//! order Y1, Y2, label A, label B, class id.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::config::SimConfig;
use crate::detect::{LabelPair, WindowClass};
use crate::error::{Error, Result};

use super::windows::{ClassCounts, WindowSample, WindowSampler};

const MAGIC: &[u8; 8] = b"GFRADS01";
const KIND: &str = "dataset";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub y1: Vec<f32>,
    pub y2: Vec<f32>,
    pub labels: LabelPair,
    pub class: WindowClass,
}

impl DatasetRecord {
    pub fn from_sample(sample: &WindowSample, x_pre: &[f64], x_tail: &[f64], i_max: usize) -> Result<Self> {
        let (y1, y2) = sample.features(x_pre, x_tail, i_max)?;
        Ok(DatasetRecord {
            y1: y1.as_slice().iter().map(|&v| v as f32).collect(),
            y2: y2.as_slice().iter().map(|&v| v as f32).collect(),
            labels: sample.class.labels(),
            class: sample.class,
        })
    }

    pub fn width(&self) -> usize {
        self.y1.len() + self.y2.len() + 3
    }
}

/// Writes `records`, which must all share one width.
pub fn write_dataset<W: Write>(mut w: W, records: &[DatasetRecord]) -> Result<()> {
    let width = records.first().map_or(0, DatasetRecord::width);
    let (y1_len, y2_len) = records.first().map_or((0, 0), |r| (r.y1.len(), r.y2.len()));
    w.write_all(MAGIC)?;
    w.write_all(&(records.len() as u32).to_le_bytes())?;
    w.write_all(&(width as u32).to_le_bytes())?;
    for r in records {
        if (r.y1.len(), r.y2.len()) != (y1_len, y2_len) {
            return Err(Error::shape("dataset record", width, r.width()));
        }
        let tail = [
            f32::from(u8::from(r.labels.start)),
            f32::from(u8::from(r.labels.tail)),
            f32::from(r.class.id()),
        ];
        for v in r.y1.iter().chain(&r.y2).chain(&tail) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a dataset whose records split as `y1_len` then `y2_len` features.
pub fn read_dataset<R: Read>(mut r: R, y1_len: usize, y2_len: usize) -> Result<Vec<DatasetRecord>> {
    let mut header = [0u8; 16];
    read_exact(&mut r, &mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::format(KIND, "bad magic"));
    }
    let count = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
    let width = u32::from_le_bytes(header[12..16].try_into().expect("4 bytes")) as usize;
    if count > 0 && width != y1_len + y2_len + 3 {
        return Err(Error::shape("dataset record width", y1_len + y2_len + 3, width));
    }
    let mut bytes = vec![0u8; 4 * width];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        read_exact(&mut r, &mut bytes)?;
        let v: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let flag = |x: f32| match x {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(Error::format(KIND, format!("label value {x}"))),
        };
        let labels = LabelPair {
            start: flag(v[width - 3])?,
            tail: flag(v[width - 2])?,
        };
        let id = v[width - 1];
        let class = (id.fract() == 0.0 && (0.0..=255.0).contains(&id))
            .then(|| WindowClass::from_id(id as u8))
            .flatten()
            .ok_or_else(|| Error::format(KIND, format!("class id {id}")))?;
        if class.labels() != labels {
            return Err(Error::format(KIND, format!("labels disagree with class {class:?}")));
        }
        out.push(DatasetRecord {
            y1: v[..y1_len].to_vec(),
            y2: v[y1_len..y1_len + y2_len].to_vec(),
            labels,
            class,
        });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::format(KIND, "trailing bytes after last record"));
    }
    Ok(out)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(KIND, "truncated file"),
        _ => Error::Io(e),
    })
}

/// Samples `counts` windows from buffers of `buffer_len` symbols and writes
/// them to `path`. Returns the number of records.
pub fn export_dataset<R: Rng + ?Sized>(
    cfg: &SimConfig,
    counts: &ClassCounts,
    buffer_len: usize,
    path: impl AsRef<Path>,
    rng: &mut R,
) -> Result<usize> {
    let mut sampler = WindowSampler::new(cfg, buffer_len)?;
    let samples = sampler.collect(counts, rng)?;
    let codec = sampler.codec();
    let records = samples
        .iter()
        .map(|s| DatasetRecord::from_sample(s, codec.x_pre(), codec.x_tail(), cfg.frame.i_max))
        .collect::<Result<Vec<_>>>()?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(&mut w, &records)?;
    w.flush()?;
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;
    use crate::detect::{Y1_COLS, Y2_COLS, Y2_ROWS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const Y1: usize = 3 * Y1_COLS;
    const Y2: usize = Y2_ROWS * Y2_COLS;

    fn record(class: WindowClass, seed: f32) -> DatasetRecord {
        DatasetRecord {
            y1: (0..Y1).map(|i| i as f32 * seed).collect(),
            y2: (0..Y2).map(|i| -(i as f32) / seed).collect(),
            labels: class.labels(),
            class,
        }
    }

    #[test]
    fn round_trip_and_width() {
        let recs: Vec<_> = WindowClass::ALL
            .iter()
            .map(|&c| record(c, 0.5 + c.id() as f32))
            .collect();
        assert_eq!(recs[0].width(), 3459);
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &recs).unwrap();
        assert_eq!(bytes.len(), 16 + 5 * 4 * 3459);
        assert_eq!(&bytes[..8], b"GFRADS01");
        assert_eq!(read_dataset(&bytes[..], Y1, Y2).unwrap(), recs);
        let h4 = &bytes[16 + 4 * 4 * 3459..];
        let tail: Vec<f32> = h4[4 * 3456..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(tail, [1.0, 1.0, 4.0]);
    }

    #[test]
    fn rejects_malformed_files() {
        let recs = vec![record(WindowClass::H1, 1.0)];
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &recs).unwrap();
        assert!(read_dataset(&bytes[..bytes.len() - 1], Y1, Y2).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_dataset(&extra[..], Y1, Y2).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(read_dataset(&magic[..], Y1, Y2).is_err());
        assert!(read_dataset(&bytes[..], Y1 + 1, Y2).is_err());
        let mut label = bytes.clone();
        let at = 16 + 4 * (Y1 + Y2);
        label[at..at + 4].copy_from_slice(&0.0f32.to_le_bytes());
        assert!(read_dataset(&label[..], Y1, Y2).is_err());

        let mixed = vec![
            record(WindowClass::H1, 1.0),
            DatasetRecord {
                y1: vec![0.0; 3],
                ..record(WindowClass::H2, 1.0)
            },
        ];
        assert!(write_dataset(Vec::new(), &mixed).is_err());
    }

    #[test]
    fn export_writes_requested_counts() {
        let cfg = default_config().with_lambda(1e-2).unwrap();
        let path = std::env::temp_dir().join(format!("gfra-ds-{}.bin", std::process::id()));
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let counts = ClassCounts([3, 2, 2, 2, 1]);
        let n = export_dataset(&cfg, &counts, 20_000, &path, &mut rng).unwrap();
        let recs = read_dataset(std::fs::File::open(&path).unwrap(), Y1, Y2).unwrap();
        std::fs::remove_file(&path).unwrap();
        assert_eq!((n, recs.len()), (10, 10));
        let mut got = ClassCounts::default();
        for r in &recs {
            got[r.class] += 1;
            assert_eq!(r.labels, r.class.labels());
            assert!(r.y1.iter().chain(&r.y2).all(|v| v.is_finite()));
        }
        assert_eq!(got, counts);
    }
}
