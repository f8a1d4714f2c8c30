//! Operation counts for one forward pass of the detection network.
//!
//! Real additions and multiplications count one FLOP each; the output
//! sigmoid and threshold count four per label.

use crate::detect::{CONV_FILTERS, CONV_H, CONV_W, Y1_COLS, Y2_COLS, Y2_ROWS};

/// Layer sizes of the two-branch network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnArchitecture {
    pub y1_rows: usize,
    pub y1_cols: usize,
    pub conv_filters: usize,
    pub conv_h: usize,
    pub conv_w: usize,
    pub conv_channels: usize,
    pub y2_len: usize,
    /// Hidden widths after the convolution.
    pub branch1: Vec<usize>,
    /// Hidden widths on the decoder feature.
    pub branch2: Vec<usize>,
    /// Hidden widths after concatenating both branches.
    pub merge: Vec<usize>,
    pub outputs: usize,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        CnnArchitecture {
            y1_rows: 3,
            y1_cols: Y1_COLS,
            conv_filters: CONV_FILTERS,
            conv_h: CONV_H,
            conv_w: CONV_W,
            conv_channels: 1,
            y2_len: Y2_ROWS * Y2_COLS,
            branch1: vec![130, 65],
            branch2: vec![130, 65],
            merge: vec![130, 65],
            outputs: 2,
        }
    }
}

impl CnnArchitecture {
    /// Positions per filter of the valid, unit-stride convolution.
    pub fn conv_output_shape(&self) -> usize {
        (self.y1_rows - self.conv_h + 1) * (self.y1_cols - self.conv_w + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopRow {
    pub layer: String,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopReport {
    pub rows: Vec<FlopRow>,
    pub total: u64,
}

/// Multiply-accumulate over every output position plus one ReLU each.
pub fn conv_flops(filters: usize, filter_size: usize, channels: usize, output_shape: usize) -> u64 {
    let (n, f, g, d) = (filters as u64, filter_size as u64, channels as u64, output_shape as u64);
    2 * n * f * g * d + n * d
}

pub fn dense_flops(inputs: usize, outputs: usize) -> u64 {
    2 * inputs as u64 * outputs as u64 + outputs as u64
}

pub fn output_flops(labels: usize) -> u64 {
    4 * labels as u64
}

pub fn cnn_flops(arch: &CnnArchitecture) -> FlopReport {
    let mut rows = Vec::new();
    let d = arch.conv_output_shape();
    rows.push(FlopRow {
        layer: format!("conv {}@{}x{}", arch.conv_filters, arch.conv_h, arch.conv_w),
        flops: conv_flops(arch.conv_filters, arch.conv_h * arch.conv_w, arch.conv_channels, d),
    });
    let mut dense_chain = |prefix: &str, mut width: usize, hidden: &[usize]| {
        for &out in hidden {
            rows.push(FlopRow {
                layer: format!("{prefix} fc {width}->{out}"),
                flops: dense_flops(width, out),
            });
            width = out;
        }
        width
    };
    let b1 = dense_chain("y1", arch.conv_filters * d, &arch.branch1);
    let b2 = dense_chain("y2", arch.y2_len, &arch.branch2);
    let merged = dense_chain("merge", b1 + b2, &arch.merge);
    rows.push(FlopRow {
        layer: format!("out fc {merged}->{}", arch.outputs),
        flops: dense_flops(merged, arch.outputs),
    });
    rows.push(FlopRow {
        layer: "sigmoid+threshold".into(),
        flops: output_flops(arch.outputs),
    });
    let total = rows.iter().map(|r| r.flops).sum();
    FlopReport { rows, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rows() {
        let r = cnn_flops(&CnnArchitecture::default());
        let flops: Vec<u64> = r.rows.iter().map(|r| r.flops).collect();
        assert_eq!(
            flops,
            [116_000, 1_040_130, 16_965, 699_010, 16_965, 33_930, 16_965, 262, 8]
        );
        assert_eq!(r.total, flops.iter().sum::<u64>());
        assert_eq!(r.total, 1_940_235);
    }

    #[test]
    fn conv_split() {
        assert_eq!(conv_flops(8, 14, 1, 500) - 8 * 500, 112_000);
        assert_eq!(CnnArchitecture::default().conv_output_shape(), 500);
    }

    #[test]
    fn scales_with_widths() {
        let small = CnnArchitecture {
            branch1: vec![10],
            branch2: vec![10],
            merge: vec![],
            ..Default::default()
        };
        let r = cnn_flops(&small);
        assert_eq!(r.rows.len(), 5);
        assert_eq!(r.rows[3].flops, dense_flops(20, 2));
    }
}
