//! Successive-interference-cancellation receiver.
//!
//! Each round scans the buffer for start sequences, decodes every candidate
//! block by block until a tail is detected, and then subtracts the
//! reconstructed waveforms of all successfully decoded units. Rounds repeat
//! on the cleaned buffer until one produces no success.

use std::collections::HashSet;

use num_complex::Complex64;

use crate::buffer::ReceivedBuffer;
use crate::config::{FrameConfig, SimConfig};
use crate::detect::{Detector, Thresholds};
use crate::error::{Error, Result};
use crate::ldpc::{NmsDecoder, DEFAULT_ALPHA};
use crate::traffic::CommandUnitCodec;

/// Default cap on SIC rounds per superframe.
pub const DEFAULT_MAX_ROUNDS: usize = 10;

/// Least-squares channel estimate from the `x_pre.len()` samples starting at
/// `start`.
pub fn estimate_channel(buffer: &ReceivedBuffer, start: usize, x_pre: &[f64]) -> Vec<Complex64> {
    let energy: f64 = x_pre.iter().map(|x| x * x).sum();
    (0..buffer.antennas())
        .map(|r| {
            let seg = &buffer.row(r)[start..start + x_pre.len()];
            seg.iter().zip(x_pre).map(|(s, &x)| s * x).sum::<Complex64>() / energy
        })
        .collect()
}

/// `h_hat^H r / |h_hat|^2` for one received column.
pub fn mrc_combine(h_hat: &[Complex64], column: &[Complex64]) -> Result<Complex64> {
    let norm2: f64 = h_hat.iter().map(|h| h.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::ZeroChannelEstimate);
    }
    Ok(h_hat.iter().zip(column).map(|(h, r)| h.conj() * r).sum::<Complex64>() / norm2)
}

/// MRC estimates for samples `start..start + len`.
pub fn mrc_block(buffer: &ReceivedBuffer, h_hat: &[Complex64], start: usize, len: usize) -> Result<Vec<Complex64>> {
    let norm2: f64 = h_hat.iter().map(|h| h.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(Error::ZeroChannelEstimate);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    for (r, h) in h_hat.iter().enumerate() {
        let hc = h.conj() / norm2;
        for (o, s) in out.iter_mut().zip(&buffer.row(r)[start..start + len]) {
            *o += hc * s;
        }
    }
    Ok(out)
}

/// Bit LLR of one combined symbol, `2 Re(x) / noise_scale`, where
/// `noise_scale = sigma_w2 / |h_hat|^2` is the post-combining noise
/// variance. Positive values favor bit 0.
pub fn llr_map(symbol_estimate: Complex64, noise_scale: f64) -> f64 {
    2.0 * symbol_estimate.re / noise_scale
}

/// A start-sequence detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub tau: usize,
    pub score: f64,
}

/// Why block-wise decoding of a candidate stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TailDetected,
    /// No tail within `iota_max + 1` blocks.
    MaxLengthReached,
    /// The unit runs past the buffer or the channel estimate is zero.
    Failure,
}

/// Decoder outcome of one codeword block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub converged: bool,
    pub info: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedUnit {
    pub tau_hat: usize,
    /// Codeword blocks before the tail (blocks examined for other
    /// terminations).
    pub iota_hat: usize,
    pub blocks: Vec<BlockOutcome>,
    pub h_hat: Vec<Complex64>,
    pub termination: Termination,
    /// Start score of the candidate.
    pub score: f64,
    /// SIC round (0-based) that produced the unit.
    pub round: usize,
}

impl DecodedUnit {
    /// Info bits of every pre-tail block, `iota_hat * k` of them.
    pub fn bits(&self) -> Vec<u8> {
        self.blocks.iter().flat_map(|b| b.info.iter().copied()).collect()
    }

    pub fn all_converged(&self) -> bool {
        self.blocks.iter().all(|b| b.converged)
    }

    /// Tail found after at least one block, every block decoded.
    pub fn is_success(&self) -> bool {
        self.termination == Termination::TailDetected && self.iota_hat >= 1 && self.all_converged()
    }
}

/// The full receiver chain for one detector configuration.
#[derive(Debug, Clone)]
pub struct Receiver {
    frame: FrameConfig,
    codec: CommandUnitCodec,
    decoder: NmsDecoder,
    detector: Detector,
    thresholds: Thresholds,
    sigma_w2: f64,
    max_rounds: usize,
}

impl Receiver {
    /// Requires equal start, codeword and tail lengths.
    pub fn new(cfg: &SimConfig, detector: Detector, thresholds: Thresholds) -> Result<Self> {
        let frame = cfg.frame;
        if frame.l_pre != frame.l_code || frame.l_tail != frame.l_code {
            return Err(Error::invalid("L_pre", "receiver needs L_pre = L_code = L_tail"));
        }
        let codec = CommandUnitCodec::new(&frame)?;
        let decoder = NmsDecoder::new(codec.encoder().code(), DEFAULT_ALPHA);
        Ok(Receiver {
            frame,
            codec,
            decoder,
            detector,
            thresholds,
            sigma_w2: cfg.radio.sigma_w2,
            max_rounds: DEFAULT_MAX_ROUNDS,
        })
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        self.max_rounds = max_rounds;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.decoder = NmsDecoder::new(self.codec.encoder().code(), alpha);
        self
    }

    pub fn codec(&self) -> &CommandUnitCodec {
        &self.codec
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    /// Start score of every window position `0..=len - L_pre`.
    pub fn window_scores(&self, buffer: &ReceivedBuffer) -> Result<Vec<f64>> {
        match &self.detector {
            Detector::Glrt => Ok(glrt_scan(buffer, self.codec.x_pre())),
            det => {
                let l = self.frame.l_pre;
                if buffer.len() < l {
                    return Ok(Vec::new());
                }
                (0..=buffer.len() - l)
                    .map(|tau| {
                        let h = estimate_channel(buffer, tau, self.codec.x_pre());
                        match mrc_block(buffer, &h, tau, l) {
                            Ok(x_hat) => {
                                det.start_score(&x_hat, self.codec.x_pre(), self.codec.x_tail(), self.frame.i_max)
                            }
                            Err(Error::ZeroChannelEstimate) => Ok(0.0),
                            Err(e) => Err(e),
                        }
                    })
                    .collect()
            }
        }
    }

    /// Windows scoring at least the start threshold, thinned so that no two
    /// candidates lie within `L_pre / 2` of each other; strongest first.
    pub fn scan_starts(&self, buffer: &ReceivedBuffer) -> Result<Vec<Candidate>> {
        let scores = self.window_scores(buffer)?;
        Ok(suppress(&scores, self.thresholds.start, self.frame.l_pre / 2))
    }

    /// Channel estimation, then block-wise combining, decoding and tail
    /// detection from `tau_hat`. Reads only samples inside
    /// `[tau_hat, tau_hat + L_pre + (iota_max + 1) L_code)`.
    pub fn decode_unit(&mut self, buffer: &ReceivedBuffer, tau_hat: usize, score: f64) -> Result<DecodedUnit> {
        let f = self.frame;
        let mut unit = DecodedUnit {
            tau_hat,
            iota_hat: 0,
            blocks: Vec::new(),
            h_hat: Vec::new(),
            termination: Termination::Failure,
            score,
            round: 0,
        };
        if tau_hat + f.l_pre > buffer.len() {
            return Ok(unit);
        }
        unit.h_hat = estimate_channel(buffer, tau_hat, self.codec.x_pre());
        let norm2: f64 = unit.h_hat.iter().map(|h| h.norm_sqr()).sum();
        if norm2 == 0.0 {
            return Ok(unit);
        }
        let noise_scale = if self.sigma_w2 > 0.0 {
            self.sigma_w2 / norm2
        } else {
            f64::MIN_POSITIVE
        };

        for b in 1..=f.iota_max + 1 {
            let start = tau_hat + f.l_pre + (b - 1) * f.l_code;
            if start + f.l_code > buffer.len() {
                unit.termination = Termination::Failure;
                return Ok(unit);
            }
            let x_hat = mrc_block(buffer, &unit.h_hat, start, f.l_code)?;
            let decode = if self.detector.uses_decoder() {
                Some(self.decode_block(&x_hat, noise_scale))
            } else {
                None
            };
            let tail = self.detector.tail_score(
                &x_hat,
                self.codec.x_pre(),
                self.codec.x_tail(),
                decode.as_ref(),
                f.i_max,
            )? >= self.thresholds.tail;
            if tail {
                unit.termination = Termination::TailDetected;
                return Ok(unit);
            }
            if b == f.iota_max + 1 {
                unit.termination = Termination::MaxLengthReached;
                return Ok(unit);
            }
            let decode = match decode {
                Some(d) => d,
                None => self.decode_block(&x_hat, noise_scale),
            };
            unit.blocks.push(BlockOutcome {
                converged: decode.converged,
                info: self.codec.encoder().extract_info(&decode.hard_bits)?,
            });
            unit.iota_hat = b;
        }
        unreachable!("loop returns at block iota_max + 1")
    }

    fn decode_block(&mut self, x_hat: &[Complex64], noise_scale: f64) -> crate::ldpc::DecodeResult {
        let llrs: Vec<f64> = x_hat.iter().map(|&x| llr_map(x, noise_scale)).collect();
        self.decoder.decode(&llrs, self.frame.i_max)
    }

    /// Subtracts `h_hat` times the rebuilt start sequence, every converged
    /// codeword and the tail. Units that did not end on a tail are ignored.
    pub fn sic_subtract(&self, buffer: &mut ReceivedBuffer, unit: &DecodedUnit) -> Result<()> {
        if unit.termination != Termination::TailDetected {
            return Ok(());
        }
        let f = &self.frame;
        buffer.subtract_signal(unit.tau_hat, &unit.h_hat, self.codec.x_pre());
        for (j, block) in unit.blocks.iter().enumerate() {
            if block.converged {
                let x = self.codec.codeword_symbols(&block.info)?;
                buffer.subtract_signal(unit.tau_hat + f.l_pre + j * f.l_code, &unit.h_hat, &x);
            }
        }
        buffer.subtract_signal(
            unit.tau_hat + f.tail_offset(unit.iota_hat),
            &unit.h_hat,
            self.codec.x_tail(),
        );
        Ok(())
    }

    /// Runs SIC rounds on a copy of `buffer`. Returns every successful unit,
    /// one per distinct payload, in the order found.
    pub fn run_superframe(&mut self, buffer: &ReceivedBuffer) -> Result<Vec<DecodedUnit>> {
        let mut buf = buffer.clone();
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut out = Vec::new();
        for round in 0..self.max_rounds {
            let candidates = self.scan_starts(&buf)?;
            let mut successes = Vec::new();
            for c in candidates {
                let mut unit = self.decode_unit(&buf, c.tau, c.score)?;
                if unit.is_success() {
                    unit.round = round;
                    successes.push(unit);
                }
            }
            if successes.is_empty() {
                break;
            }
            for unit in successes {
                self.sic_subtract(&mut buf, &unit)?;
                if seen.insert(unit.bits()) {
                    out.push(unit);
                }
            }
        }
        Ok(out)
    }
}

/// GLRT score of every window, using per-window least-squares estimates and
/// MRC. With `h = c / |x|^2` for the window correlation `c` and sample
/// covariance `S = sum r r^H`, the combined-window score reduces to
/// `|x|^4 |h|^4 / (L h^H S h)`.
pub fn glrt_scan(buffer: &ReceivedBuffer, x_pre: &[f64]) -> Vec<f64> {
    let l = x_pre.len();
    let t = buffer.len();
    if t < l {
        return Vec::new();
    }
    let n_win = t - l + 1;
    let ant = buffer.antennas();
    let x_energy: f64 = x_pre.iter().map(|x| x * x).sum();

    let mut corr = vec![Complex64::new(0.0, 0.0); ant * n_win];
    for r in 0..ant {
        let row = buffer.row(r);
        for (tau, c) in corr[r * n_win..(r + 1) * n_win].iter_mut().enumerate() {
            let seg = &row[tau..tau + l];
            let (mut re, mut im) = (0.0, 0.0);
            for (s, &x) in seg.iter().zip(x_pre) {
                re += s.re * x;
                im += s.im * x;
            }
            *c = Complex64::new(re, im);
        }
    }

    // Window covariances from per-chunk running sums of the upper triangle
    // of r r^H. With chunks of length L, a window is the backward sum from
    // its first sample to the end of its chunk plus the forward sum from the
    // next chunk start to its last sample; nothing is subtracted, so quiet
    // windows next to strong ones keep full precision.
    let pairs: Vec<(usize, usize)> = (0..ant).flat_map(|a| (a..ant).map(move |b| (a, b))).collect();
    let np = pairs.len();
    let outer = |s: usize, p: usize| {
        let (a, b) = pairs[p];
        buffer.get(a, s) * buffer.get(b, s).conj()
    };
    let mut fwd = vec![Complex64::new(0.0, 0.0); t * np];
    let mut bwd = vec![Complex64::new(0.0, 0.0); t * np];
    for chunk_start in (0..t).step_by(l) {
        let chunk_end = (chunk_start + l).min(t);
        for p in 0..np {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in chunk_start..chunk_end {
                acc += outer(s, p);
                fwd[s * np + p] = acc;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for s in (chunk_start..chunk_end).rev() {
                acc += outer(s, p);
                bwd[s * np + p] = acc;
            }
        }
    }

    let mut h = vec![Complex64::new(0.0, 0.0); ant];
    (0..n_win)
        .map(|tau| {
            let mut hn2 = 0.0;
            for r in 0..ant {
                h[r] = corr[r * n_win + tau] / x_energy;
                hn2 += h[r].norm_sqr();
            }
            if hn2 == 0.0 {
                return 0.0;
            }
            let mut quad = 0.0;
            for (p, &(a, b)) in pairs.iter().enumerate() {
                let mut s = bwd[tau * np + p];
                if tau % l != 0 {
                    s += fwd[(tau + l - 1) * np + p];
                }
                let term = h[a].conj() * s * h[b];
                quad += if a == b { term.re } else { 2.0 * term.re };
            }
            if quad <= 0.0 {
                return 0.0;
            }
            (x_energy * x_energy * hn2 * hn2 / (l as f64 * quad)).min(1.0)
        })
        .collect()
}

/// Greedy non-maximum suppression over windows scoring at least `threshold`.
fn suppress(scores: &[f64], threshold: f64, radius: usize) -> Vec<Candidate> {
    let mut above: Vec<Candidate> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= threshold)
        .map(|(tau, &score)| Candidate { tau, score })
        .collect();
    above.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.tau.cmp(&b.tau)));
    let mut taken: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for c in above {
        let lo = taken.partition_point(|&t| t + radius < c.tau);
        if taken.get(lo).is_some_and(|&t| t <= c.tau + radius) {
            continue;
        }
        taken.insert(lo, c.tau);
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;
    use crate::detect::glrt_statistic;
    use crate::traffic::{draw_activation, synthesize, synthesize_clean, Scenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cgauss<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
        let s = (var / 2.0).sqrt();
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * s,
            rng.sample::<f64, _>(StandardNormal) * s,
        )
    }

    fn noiseless() -> SimConfig {
        default_config().with_noise(0.0).unwrap()
    }

    #[test]
    fn estimate_and_mrc_identities() {
        let cfg = default_config();
        let codec = CommandUnitCodec::new(&cfg.frame).unwrap();
        let x = codec.x_pre();
        let h = vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.5, 0.1),
            Complex64::new(-0.3, 0.0),
            Complex64::new(0.0, 0.7),
        ];
        let mut buf = ReceivedBuffer::zeros(4, 300);
        buf.add_signal(40, &h, x);
        let h_hat = estimate_channel(&buf, 40, x);
        for (a, b) in h_hat.iter().zip(&h) {
            assert!((a - b).norm() < 1e-14);
        }
        let zero = estimate_channel(&buf, 200, &x[..64]);
        assert!(zero.iter().all(|z| z.norm() == 0.0));

        for t in [40, 77, 167] {
            let y = mrc_combine(&h, &buf.column(t)).unwrap();
            assert!((y - x[t - 40]).norm() < 1e-15);
        }
        let theta = 0.9;
        let rot: Vec<Complex64> = h.iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect();
        let y0 = mrc_combine(&h, &buf.column(50)).unwrap();
        let y1 = mrc_combine(&rot, &buf.column(50)).unwrap();
        assert!((y1 - y0 * Complex64::from_polar(1.0, -theta)).norm() < 1e-14);
        assert!(matches!(
            mrc_combine(&[Complex64::new(0.0, 0.0); 4], &buf.column(0)),
            Err(Error::ZeroChannelEstimate)
        ));
        let block = mrc_block(&buf, &h, 40, 128).unwrap();
        assert!(block.iter().zip(x).all(|(a, &b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn estimate_is_unbiased_with_expected_variance() {
        let x = crate::traffic::start_sequence();
        let h = [Complex64::new(0.8, -0.2), Complex64::new(-0.1, 0.4)];
        let s2 = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 10_000;
        let mut sum = [Complex64::new(0.0, 0.0); 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let mut buf = ReceivedBuffer::zeros(2, 128);
            buf.add_signal(0, &h, &x);
            buf.as_mut_slice().iter_mut().for_each(|v| *v += cgauss(&mut rng, s2));
            let e = estimate_channel(&buf, 0, &x);
            for r in 0..2 {
                sum[r] += e[r];
                sq[r] += (e[r] - h[r]).norm_sqr();
            }
        }
        let var = s2 / 128.0;
        for r in 0..2 {
            let mean = sum[r] / n as f64;
            let se = (var / 2.0 / n as f64).sqrt();
            assert!((mean.re - h[r].re).abs() < 3.0 * se && (mean.im - h[r].im).abs() < 3.0 * se);
            assert!((sq[r] / n as f64 / var - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn mrc_snr_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h: Vec<Complex64> = (0..4).map(|_| cgauss(&mut rng, 1.0)).collect();
        let s2 = 0.2;
        let n = 10_000;
        let err: f64 = (0..n)
            .map(|_| {
                let col: Vec<Complex64> = h.iter().map(|hr| hr + cgauss(&mut rng, s2)).collect();
                (mrc_combine(&h, &col).unwrap() - 1.0).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        // Post-combining SNR is |h|^2 / sigma_w2, the sum of per-antenna SNRs.
        let norm2: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        assert!((1.0 / err / (norm2 / s2) - 1.0).abs() < 0.05);
    }

    #[test]
    fn llr_sign_and_scale() {
        assert!(llr_map(Complex64::new(0.3, -5.0), 0.1) > 0.0);
        assert_eq!(llr_map(Complex64::new(0.0, 2.0), 0.1), 0.0);
        let a = llr_map(Complex64::new(-0.4, 0.0), 0.2);
        let b = llr_map(Complex64::new(-0.4, 0.0), 0.4);
        assert!((a - 2.0 * b).abs() < 1e-15 && a < 0.0);
        // 4 Re |h|^2 / (2 sigma_w2) with |h|^2 = 2, sigma_w2 = 0.5.
        assert!((llr_map(Complex64::new(0.25, 0.0), 0.5 / 2.0) - 4.0 * 0.25 * 2.0 / 1.0).abs() < 1e-15);
    }

    #[test]
    fn fast_scan_matches_direct_statistic() {
        let cfg = default_config()
            .with_lambda(4e-3)
            .unwrap()
            .with_superframe(9500)
            .unwrap();
        let codec = CommandUnitCodec::new(&cfg.frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s = crate::traffic::generate_scenario(&cfg, &mut rng);
        let mut buf = synthesize(&s, &codec, &cfg.radio, &mut rng).unwrap();
        buf.as_mut_slice()[..200]
            .iter_mut()
            .for_each(|v| *v = Complex64::new(0.0, 0.0));
        let fast = glrt_scan(&buf, codec.x_pre());
        assert_eq!(fast.len(), 9500 - 127);
        let mut checked = 0;
        for tau in (0..fast.len())
            .step_by(37)
            .chain(s.truth().starts.iter().map(|m| m.time))
        {
            let h = estimate_channel(&buf, tau, codec.x_pre());
            let direct = match mrc_block(&buf, &h, tau, 128) {
                Ok(x_hat) => glrt_statistic(&x_hat, codec.x_pre()),
                Err(_) => 0.0,
            };
            assert!(
                (fast[tau] - direct).abs() < 1e-9,
                "tau {tau}: {} vs {direct}",
                fast[tau]
            );
            checked += 1;
        }
        assert!(checked > 250);
    }

    #[test]
    fn suppression_keeps_strongest() {
        let mut scores = vec![0.0; 400];
        scores[100] = 0.9;
        scores[130] = 0.95;
        scores[164] = 0.8;
        scores[195] = 0.7;
        scores[300] = 0.4;
        let c = suppress(&scores, 0.5, 64);
        assert_eq!(c.iter().map(|c| c.tau).collect::<Vec<_>>(), vec![130, 195]);
        assert!(suppress(&scores, 0.99, 64).is_empty());
    }

    #[test]
    fn noiseless_single_unit_is_recovered_once() {
        let cfg = noiseless();
        let mut rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for iota in 1..=5 {
            let mut act = draw_activation(300, &cfg, &mut rng);
            act = crate::traffic::draw_activation_with_iota(act.tau, iota, &cfg.radio, &cfg.frame, &mut rng);
            let s = Scenario::new(cfg.frame, vec![act.clone()]).unwrap();
            let buf = synthesize_clean(&s, rx.codec(), 4).unwrap();

            let starts: Vec<usize> = (0..2).map(|r| act.replica_start(r, &cfg.frame)).collect();
            let cands = rx.scan_starts(&buf).unwrap();
            let mut found: Vec<usize> = cands.iter().map(|c| c.tau).collect();
            found.sort_unstable();
            assert_eq!(found, starts);

            let unit = rx.decode_unit(&buf, starts[0], 1.0).unwrap();
            assert_eq!(unit.termination, Termination::TailDetected);
            assert_eq!(unit.iota_hat, iota);
            assert_eq!(unit.bits(), act.payload);

            let units = rx.run_superframe(&buf).unwrap();
            assert_eq!(units.len(), 1);
            assert_eq!(units[0].bits(), act.payload);
        }
    }

    #[test]
    fn sic_residual_is_exactly_zero() {
        let cfg = noiseless();
        let rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let act = draw_activation(10, &cfg, &mut rng);
        let s = Scenario::new(cfg.frame, vec![act.clone()]).unwrap();
        let mut buf = synthesize_clean(&s, rx.codec(), 4).unwrap();
        for r in 0..2 {
            let unit = DecodedUnit {
                tau_hat: act.replica_start(r, &cfg.frame),
                iota_hat: act.iota,
                blocks: (0..act.iota)
                    .map(|j| BlockOutcome {
                        converged: true,
                        info: act.codeword_info(j, 64).to_vec(),
                    })
                    .collect(),
                h_hat: act.replicas[r].channel.clone(),
                termination: Termination::TailDetected,
                score: 1.0,
                round: 0,
            };
            rx.sic_subtract(&mut buf, &unit).unwrap();
        }
        assert!(buf.as_slice().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn truncated_subtraction_leaves_trailing_segment() {
        let cfg = noiseless();
        let rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let act = crate::traffic::draw_activation_with_iota(0, 4, &cfg.radio, &cfg.frame, &mut rng);
        let mut single = act.clone();
        single.replicas.truncate(1);
        let f = FrameConfig { n_rep: 1, ..cfg.frame };
        let s = Scenario::new(f, vec![single.clone()]).unwrap();
        let clean = synthesize_clean(&s, rx.codec(), 4).unwrap();
        let start = single.replica_start(0, &f);
        // Pretend the receiver stopped after two blocks.
        let unit = DecodedUnit {
            tau_hat: start,
            iota_hat: 2,
            blocks: (0..2)
                .map(|j| BlockOutcome {
                    converged: true,
                    info: single.codeword_info(j, 64).to_vec(),
                })
                .collect(),
            h_hat: single.replicas[0].channel.clone(),
            termination: Termination::TailDetected,
            score: 1.0,
            round: 0,
        };
        let mut buf = clean.clone();
        rx.sic_subtract(&mut buf, &unit).unwrap();
        let x_tail = rx.codec().x_tail();
        let blk2 = start + 128 + 2 * 128;
        for r in 0..4 {
            let h = single.replicas[0].channel[r];
            // Blocks before the false tail are cancelled.
            assert!(buf.row(r)[start..blk2].iter().all(|v| v.norm() == 0.0));
            // The false tail block keeps the codeword and loses a tail image.
            for (t, &x) in x_tail.iter().enumerate() {
                let expected = clean.get(r, blk2 + t) - h * x;
                assert!((buf.get(r, blk2 + t) - expected).norm() < 1e-18);
            }
            assert_eq!(&buf.row(r)[blk2 + 128..], &clean.row(r)[blk2 + 128..]);
        }
    }

    #[test]
    fn noise_candidates_fail() {
        let cfg = default_config();
        let mut rx = Receiver::new(&cfg, Detector::Glrt, Thresholds { start: 0.0, tail: 0.5 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let mut buf = ReceivedBuffer::zeros(4, 2000);
        crate::channel::apply_awgn(&mut buf, cfg.radio.sigma_w2, &mut rng);
        let failures = (0..100)
            .map(|i| rx.decode_unit(&buf, i * 7, 0.0).unwrap())
            .filter(|u| !u.is_success())
            .count();
        assert_eq!(failures, 100);
    }

    #[test]
    fn reads_stay_inside_unit_span() {
        let cfg = noiseless();
        let mut rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let act = crate::traffic::draw_activation_with_iota(0, 2, &cfg.radio, &cfg.frame, &mut rng);
        let s = Scenario::new(cfg.frame, vec![act.clone()]).unwrap();
        let mut buf = synthesize_clean(&s, rx.codec(), 4).unwrap();
        let tau = act.replica_start(0, &cfg.frame);
        let reference = rx.decode_unit(&buf, tau, 1.0).unwrap();
        let span_end = tau + 128 + 6 * 128;
        for r in 0..4 {
            let row = buf.row_mut(r);
            let n = row.len();
            row[..tau]
                .iter_mut()
                .for_each(|v| *v = Complex64::new(f64::NAN, f64::NAN));
            row[span_end.min(n)..]
                .iter_mut()
                .for_each(|v| *v = Complex64::new(f64::NAN, f64::NAN));
        }
        assert_eq!(rx.decode_unit(&buf, tau, 1.0).unwrap(), reference);
    }

    #[test]
    fn unit_past_buffer_end_fails() {
        let cfg = noiseless();
        let mut rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let buf = ReceivedBuffer::zeros(4, 300);
        let u = rx.decode_unit(&buf, 250, 1.0).unwrap();
        assert_eq!(u.termination, Termination::Failure);
        assert!(!u.is_success());
    }

    #[test]
    fn empty_buffer_yields_nothing() {
        let cfg = default_config();
        let mut rx = Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).unwrap();
        let buf = ReceivedBuffer::zeros(4, cfg.frame.t_sf);
        assert!(rx.run_superframe(&buf).unwrap().is_empty());
    }

    #[test]
    fn rejects_unequal_block_lengths() {
        let mut cfg = default_config();
        cfg.frame.l_tail = 64;
        assert!(Receiver::new(&cfg, Detector::Glrt, Thresholds::default()).is_err());
    }
}
