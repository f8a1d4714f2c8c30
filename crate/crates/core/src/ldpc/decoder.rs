//! Normalized min-sum decoder with a flooding schedule.
//!
//! The decoder always runs the requested number of iterations and records
//! the posterior LLRs after each one; the trajectory feeds the tail detector,
//! which needs decoder states taken at a fixed iteration count.

use super::ParityCheckMatrix;

/// Default check-message normalization.
pub const DEFAULT_ALPHA: f64 = 0.75;
/// Magnitude bound on channel LLRs and on every exchanged message.
pub const MESSAGE_CLIP: f64 = 30.0;

/// Output of one decoding run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Row `t` holds the posterior LLRs (channel plus extrinsic) after
    /// iteration `t + 1`; `i_max` rows of `n` values, row-major.
    pub llr_trajectory: Vec<f64>,
    pub n: usize,
    /// Syndrome of the final hard decision is zero.
    pub converged: bool,
    /// Final hard decision, LLR `< 0` maps to bit 1.
    pub hard_bits: Vec<u8>,
}

impl DecodeResult {
    pub fn iterations(&self) -> usize {
        self.llr_trajectory.len() / self.n
    }

    pub fn trajectory_row(&self, t: usize) -> &[f64] {
        &self.llr_trajectory[t * self.n..(t + 1) * self.n]
    }
}

#[inline]
fn hard(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// Min-sum decoder with scaled check messages.
///
/// Holds its own scratch buffers; use one instance per worker.
#[derive(Debug, Clone)]
pub struct NmsDecoder {
    n: usize,
    alpha: f64,
    clip: f64,
    /// Edge ranges per check, into `edge_var`.
    check_ptr: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edges incident to each variable.
    var_edges: Vec<Vec<usize>>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    rows: Vec<Vec<usize>>,
}

impl NmsDecoder {
    /// `alpha` must lie in `(0, 1]`.
    pub fn new(h: &ParityCheckMatrix, alpha: f64) -> Self {
        assert!(
            alpha > 0.0 && alpha <= 1.0,
            "normalization factor {alpha} outside (0, 1]"
        );
        let mut check_ptr = vec![0];
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); h.n()];
        for row in h.rows() {
            for &v in row {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_ptr.push(edge_var.len());
        }
        let edges = edge_var.len();
        NmsDecoder {
            n: h.n(),
            alpha,
            clip: MESSAGE_CLIP,
            check_ptr,
            edge_var,
            var_edges,
            v2c: vec![0.0; edges],
            c2v: vec![0.0; edges],
            rows: h.rows().to_vec(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Runs exactly `i_max` iterations on the channel LLRs.
    ///
    /// Non-finite inputs are clamped to the message range; NaN is read as 0.
    pub fn decode(&mut self, channel_llrs: &[f64], i_max: usize) -> DecodeResult {
        assert_eq!(channel_llrs.len(), self.n, "channel LLR length");
        assert!(i_max >= 1);
        let clip = self.clip;
        let llr_in: Vec<f64> = channel_llrs
            .iter()
            .map(|&x| if x.is_nan() { 0.0 } else { x.clamp(-clip, clip) })
            .collect();
        for (e, &v) in self.edge_var.iter().enumerate() {
            self.v2c[e] = llr_in[v];
        }

        let mut trajectory = Vec::with_capacity(i_max * self.n);
        let mut posterior = vec![0.0; self.n];
        for _ in 0..i_max {
            self.check_update();
            for (v, edges) in self.var_edges.iter().enumerate() {
                posterior[v] = llr_in[v] + edges.iter().map(|&e| self.c2v[e]).sum::<f64>();
                for &e in edges {
                    self.v2c[e] = (posterior[v] - self.c2v[e]).clamp(-clip, clip);
                }
            }
            trajectory.extend_from_slice(&posterior);
        }

        let hard_bits: Vec<u8> = posterior.iter().map(|&l| hard(l)).collect();
        let converged = self
            .rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &c| acc ^ hard_bits[c]) == 0);
        DecodeResult {
            llr_trajectory: trajectory,
            n: self.n,
            converged,
            hard_bits,
        }
    }

    fn check_update(&mut self) {
        for c in 0..self.check_ptr.len() - 1 {
            let range = self.check_ptr[c]..self.check_ptr[c + 1];
            let mut min1 = f64::INFINITY;
            let mut min2 = f64::INFINITY;
            let mut argmin = usize::MAX;
            let mut negative = false;
            for e in range.clone() {
                let m = self.v2c[e];
                negative ^= m < 0.0;
                let a = m.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    argmin = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for e in range {
                let mag = if e == argmin { min2 } else { min1 };
                let sign_neg = negative ^ (self.v2c[e] < 0.0);
                let msg = (self.alpha * mag).min(self.clip);
                self.c2v[e] = if sign_neg { -msg } else { msg };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::Encoder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn setup() -> (Encoder, NmsDecoder) {
        let h = Arc::new(ParityCheckMatrix::ccsds_tc128());
        let dec = NmsDecoder::new(&h, DEFAULT_ALPHA);
        (Encoder::new(h), dec)
    }

    fn bpsk_llrs(cw: &[u8], mag: f64) -> Vec<f64> {
        cw.iter().map(|&b| if b == 0 { mag } else { -mag }).collect()
    }

    /// Sum-product reference decoder (tanh rule), used only as an oracle.
    #[allow(clippy::needless_range_loop)]
    fn sum_product(h: &ParityCheckMatrix, llrs: &[f64], iters: usize) -> Vec<u8> {
        let rows = h.rows();
        let mut v2c: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| llrs[v]).collect()).collect();
        let mut c2v: Vec<Vec<f64>> = rows.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut post = llrs.to_vec();
        for _ in 0..iters {
            for (ci, row) in rows.iter().enumerate() {
                for j in 0..row.len() {
                    let prod: f64 = (0..row.len())
                        .filter(|&i| i != j)
                        .map(|i| (v2c[ci][i] / 2.0).tanh())
                        .product();
                    let p = prod.clamp(-0.999_999_999_999, 0.999_999_999_999);
                    c2v[ci][j] = 2.0 * p.atanh();
                }
            }
            post = llrs.to_vec();
            for (ci, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    post[v] += c2v[ci][j];
                }
            }
            for (ci, row) in rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    v2c[ci][j] = post[v] - c2v[ci][j];
                }
            }
        }
        post.iter().map(|&l| u8::from(l < 0.0)).collect()
    }

    #[test]
    fn consistent_input_converges_with_full_trajectory() {
        let (_, mut dec) = setup();
        let res = dec.decode(&[20.0; 128], 20);
        assert!(res.converged);
        assert_eq!(res.iterations(), 20);
        assert_eq!(res.llr_trajectory.len(), 20 * 128);
        assert_eq!(res.hard_bits, vec![0; 128]);
        // Already consistent after the first iteration.
        assert!(res.trajectory_row(0).iter().all(|&l| l > 0.0));
    }

    #[test]
    fn three_flips_match_sum_product_oracle() {
        let (enc, mut dec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let cw = enc.encode(&info).unwrap();
            let mut llrs = bpsk_llrs(&cw, 10.0);
            for idx in rand::seq::index::sample(&mut rng, 128, 3) {
                llrs[idx] = -llrs[idx];
            }
            let oracle = sum_product(enc.code(), &llrs, 20);
            assert_eq!(oracle, cw, "oracle failed to correct");
            let res = dec.decode(&llrs, 20);
            assert!(res.converged);
            assert_eq!(res.hard_bits, cw);
        }
    }

    #[test]
    fn high_snr_identity() {
        let (enc, mut dec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut ok = 0;
        for _ in 0..1000 {
            let info: Vec<u8> = (0..64).map(|_| rng.random_range(0..2)).collect();
            let cw = enc.encode(&info).unwrap();
            let mag = rng.random_range(8.0..20.0);
            let mut llrs = bpsk_llrs(&cw, mag);
            let flips = rng.random_range(0..=2);
            for idx in rand::seq::index::sample(&mut rng, 128, flips) {
                llrs[idx] = -llrs[idx];
            }
            let res = dec.decode(&llrs, 20);
            ok += usize::from(res.hard_bits == cw);
        }
        assert!(ok >= 990, "{ok} / 1000");
    }

    #[test]
    fn gaussian_noise_does_not_converge() {
        let (_, mut dec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 1000;
        let converged = (0..trials)
            .filter(|_| {
                let llrs: Vec<f64> = (0..128).map(|_| rng.sample(StandardNormal)).collect();
                dec.decode(&llrs, 20).converged
            })
            .count();
        assert!((converged as f64) < 0.01 * trials as f64, "{converged}");
    }

    #[test]
    fn converged_flag_matches_syndrome() {
        let (enc, mut dec) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let llrs: Vec<f64> = (0..128)
                .map(|_| 3.0 + 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let res = dec.decode(&llrs, 5);
            let zero = enc.code().syndrome(&res.hard_bits).unwrap().iter().all(|&s| s == 0);
            assert_eq!(res.converged, zero);
        }
    }

    #[test]
    fn zero_llr_decides_bit_zero() {
        let (_, mut dec) = setup();
        let res = dec.decode(&[0.0; 128], 3);
        assert!(res.llr_trajectory.iter().all(|&l| l == 0.0));
        assert_eq!(res.hard_bits, vec![0; 128]);
        assert!(res.converged);
    }

    #[test]
    fn saturating_inputs() {
        let (_, mut dec) = setup();
        let mut llrs = vec![f64::INFINITY; 128];
        llrs[5] = f64::NEG_INFINITY;
        llrs[9] = f64::NAN;
        let res = dec.decode(&llrs, 4);
        assert!(res.llr_trajectory.iter().all(|l| l.is_finite()));
        assert!(res.converged);
        assert_eq!(res.hard_bits, vec![0; 128]);
    }
}
