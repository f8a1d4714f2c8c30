//! Labeled detection windows cut from synthesized superframes.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::config::SimConfig;
use crate::detect::{build_y1, build_y2, cnn_forward, glrt_statistic, DetectionScores, Detector, WindowClass, Y2Input};
use crate::detect::{FeatureY1, FeatureY2};
use crate::error::{Error, Result};
use crate::ldpc::{DecodeResult, NmsDecoder, DEFAULT_ALPHA};
use crate::receiver::{estimate_channel, llr_map, mrc_block};
use crate::traffic::{draw_activation, generate_scenario, synthesize, CommandUnitCodec, ReceivedBuffer, Scenario};

/// Buffer length used when cutting training windows.
pub const DATASET_BUFFER_LEN: usize = 100_000;

/// Requested number of windows per class, indexed by [`WindowClass`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts(pub [usize; 5]);

impl ClassCounts {
    /// `n` windows of H0 to H3 and `n / 2` of H4.
    pub fn balanced(n: usize) -> Self {
        ClassCounts([n, n, n, n, n / 2])
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl Index<WindowClass> for ClassCounts {
    type Output = usize;
    fn index(&self, c: WindowClass) -> &usize {
        &self.0[usize::from(c.id())]
    }
}

impl IndexMut<WindowClass> for ClassCounts {
    fn index_mut(&mut self, c: WindowClass) -> &mut usize {
        &mut self.0[usize::from(c.id())]
    }
}

/// What the receiver would be doing when it sees the window.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowMode {
    /// Scanning for a start; the channel is estimated on the window itself.
    Start,
    /// Inside a unit; the channel comes from the unit's start and the block
    /// has been decoded.
    Tail(DecodeResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub class: WindowClass,
    /// MRC-combined window.
    pub x_hat: Vec<Complex64>,
    pub mode: WindowMode,
}

impl WindowSample {
    pub fn features(&self, x_pre: &[f64], x_tail: &[f64], i_max: usize) -> Result<(FeatureY1, FeatureY2)> {
        let y1 = build_y1(&self.x_hat, x_pre, x_tail)?;
        let y2 = match &self.mode {
            WindowMode::Start => build_y2(Y2Input::Start {
                correlation: glrt_statistic(&self.x_hat, x_pre),
                i_max,
                len: x_tail.len(),
            })?,
            WindowMode::Tail(decode) => build_y2(Y2Input::Tail { decode, i_max })?,
        };
        Ok((y1, y2))
    }

    /// Both label scores. The GLRT correlates the window with each sequence.
    pub fn scores(&self, detector: &Detector, x_pre: &[f64], x_tail: &[f64], i_max: usize) -> Result<DetectionScores> {
        match detector {
            Detector::Glrt => Ok(DetectionScores {
                p_a: glrt_statistic(&self.x_hat, x_pre),
                p_b: glrt_statistic(&self.x_hat, x_tail),
            }),
            Detector::Cnn(w) => {
                let (y1, y2) = self.features(x_pre, x_tail, i_max)?;
                cnn_forward(w, &y1, &y2)
            }
        }
    }
}

/// Draws labeled windows from fresh superframes.
pub struct WindowSampler {
    cfg: SimConfig,
    codec: CommandUnitCodec,
    decoder: NmsDecoder,
    per_buffer: usize,
}

impl WindowSampler {
    /// Sampler over buffers of `buffer_len` symbols, traffic as in `cfg`.
    pub fn new(cfg: &SimConfig, buffer_len: usize) -> Result<Self> {
        let cfg = cfg.with_superframe(buffer_len)?;
        let codec = CommandUnitCodec::new(&cfg.frame)?;
        let decoder = NmsDecoder::new(codec.encoder().code(), DEFAULT_ALPHA);
        Ok(WindowSampler {
            cfg,
            codec,
            decoder,
            per_buffer: 250,
        })
    }

    /// Caps the windows of one class taken from a single buffer.
    pub fn with_per_buffer(mut self, per_buffer: usize) -> Self {
        self.per_buffer = per_buffer.max(1);
        self
    }

    pub fn codec(&self) -> &CommandUnitCodec {
        &self.codec
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Exactly `counts` windows, grouped by class in buffer order. A buffer
    /// without activations gets one injected so that every class stays
    /// reachable at low rates.
    pub fn collect<R: Rng + ?Sized>(&mut self, counts: &ClassCounts, rng: &mut R) -> Result<Vec<WindowSample>> {
        let mut remaining = *counts;
        let mut out = Vec::with_capacity(counts.total());
        let mut stalled = 0;
        while remaining.total() > 0 {
            let before = remaining.total();
            let (scenario, planted) = self.draw_buffer_scenario(remaining[WindowClass::H4], rng)?;
            let buffer = synthesize(&scenario, &self.codec, &self.cfg.radio, rng)?;
            for class in WindowClass::ALL {
                let take = remaining[class].min(self.per_buffer);
                for _ in 0..take {
                    let sample = match class {
                        WindowClass::H4 => match planted.choose(rng) {
                            Some(&(a, r)) => {
                                let start = scenario.activations()[a].replica_start(r, scenario.frame());
                                let tail = scenario.activations()[a].replica_tail(r, scenario.frame());
                                Some(self.tail_window(&buffer, start, tail, class))
                            }
                            None => None,
                        },
                        _ => self.sample_class(class, &scenario, &buffer, rng),
                    };
                    if let Some(s) = sample {
                        out.push(s);
                        remaining[class] -= 1;
                    }
                }
            }
            stalled = if remaining.total() == before { stalled + 1 } else { 0 };
            if stalled >= 20 {
                return Err(Error::invalid(
                    "counts",
                    "window classes unreachable with this configuration",
                ));
            }
        }
        Ok(out)
    }

    /// Traffic for one buffer plus up to `h4` activations whose start lands
    /// exactly on the tail of an existing replica. Returns the scenario and
    /// the `(activation, replica)` pairs whose tails were overlapped.
    fn draw_buffer_scenario<R: Rng + ?Sized>(&self, h4: usize, rng: &mut R) -> Result<(Scenario, Vec<(usize, usize)>)> {
        let cfg = &self.cfg;
        let frame = cfg.frame;
        let mut acts = generate_scenario(cfg, rng).activations().to_vec();
        if acts.is_empty() {
            acts.push(draw_activation(rng.random_range(0..cfg.t_act()), cfg, rng));
        }
        let base = acts.len();
        let mut planted = Vec::new();
        for _ in 0..h4.min(self.per_buffer) {
            let a = rng.random_range(0..base);
            let r = rng.random_range(0..frame.n_rep);
            let target = acts[a].replica_tail(r, &frame);
            let mut new = draw_activation(0, cfg, rng);
            let nr = rng.random_range(0..frame.n_rep);
            let lead = (new.replicas[nr].slot - 1) * frame.l_max();
            // tau = target - lead - offset must lie in [0, T_act).
            let hi = target.checked_sub(lead).map(|v| v.min(frame.max_offset(new.iota)));
            let lo = (target + 1).saturating_sub(lead + cfg.t_act());
            let Some(hi) = hi.filter(|&hi| lo <= hi) else {
                continue;
            };
            let offset = rng.random_range(lo..=hi);
            new.replicas[nr].offset = offset;
            new.tau = target - lead - offset;
            acts.push(new);
            planted.push((a, r));
        }
        Ok((Scenario::new(frame, acts)?, planted))
    }

    fn sample_class<R: Rng + ?Sized>(
        &mut self,
        class: WindowClass,
        scenario: &Scenario,
        buffer: &ReceivedBuffer,
        rng: &mut R,
    ) -> Option<WindowSample> {
        let frame = *scenario.frame();
        let acts = scenario.activations();
        if class == WindowClass::H0 {
            return self.noise_window(scenario, buffer, rng);
        }
        let act = acts.choose(rng)?;
        let r = rng.random_range(0..act.replicas.len());
        let start = act.replica_start(r, &frame);
        match class {
            WindowClass::H1 => Some(self.start_window(buffer, start, class)),
            WindowClass::H2 => Some(self.tail_window(buffer, start, act.replica_tail(r, &frame), class)),
            WindowClass::H3 => {
                let j = rng.random_range(0..act.iota);
                Some(self.tail_window(buffer, start, start + frame.l_pre + j * frame.l_code, class))
            }
            WindowClass::H0 | WindowClass::H4 => unreachable!("handled by the caller"),
        }
    }

    /// A window touching no replica, or failing that, one at least `L / 4`
    /// away from every block boundary.
    fn noise_window<R: Rng + ?Sized>(
        &self,
        scenario: &Scenario,
        buffer: &ReceivedBuffer,
        rng: &mut R,
    ) -> Option<WindowSample> {
        let frame = *scenario.frame();
        let l = frame.l_pre;
        let mut spans = Vec::new();
        let mut boundaries = Vec::new();
        for act in scenario.activations() {
            for r in 0..act.replicas.len() {
                let s = act.replica_start(r, &frame);
                spans.push((s, s + act.unit_len(&frame)));
                boundaries.extend(
                    (0..=act.iota + 1).map(|b| s + b.min(1) * frame.l_pre + b.saturating_sub(1) * frame.l_code),
                );
            }
        }
        let last = buffer.len().checked_sub(l)?;
        let quiet = |t: usize| spans.iter().all(|&(s, e)| t + l <= s || t >= e);
        let misaligned = |t: usize| boundaries.iter().all(|&b| t.abs_diff(b) >= l / 4);
        for accept in [&quiet as &dyn Fn(usize) -> bool, &misaligned] {
            for _ in 0..200 {
                let t = rng.random_range(0..=last);
                if accept(t) {
                    return Some(self.start_window(buffer, t, WindowClass::H0));
                }
            }
        }
        None
    }

    fn start_window(&self, buffer: &ReceivedBuffer, t: usize, class: WindowClass) -> WindowSample {
        let h = estimate_channel(buffer, t, self.codec.x_pre());
        WindowSample {
            class,
            x_hat: combine(buffer, &h, t, self.cfg.frame.l_pre),
            mode: WindowMode::Start,
        }
    }

    fn tail_window(
        &mut self,
        buffer: &ReceivedBuffer,
        unit_start: usize,
        t: usize,
        class: WindowClass,
    ) -> WindowSample {
        let l = self.cfg.frame.l_code;
        let h = estimate_channel(buffer, unit_start, self.codec.x_pre());
        let norm2: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        let sigma_w2 = self.cfg.radio.sigma_w2;
        let scale = if sigma_w2 > 0.0 && norm2 > 0.0 {
            sigma_w2 / norm2
        } else {
            f64::MIN_POSITIVE
        };
        let x_hat = combine(buffer, &h, t, l);
        let llrs: Vec<f64> = x_hat.iter().map(|&x| llr_map(x, scale)).collect();
        let decode = self.decoder.decode(&llrs, self.cfg.frame.i_max);
        WindowSample {
            class,
            x_hat,
            mode: WindowMode::Tail(decode),
        }
    }
}

/// MRC block, all zeros when the estimate vanishes.
fn combine(buffer: &ReceivedBuffer, h: &[Complex64], t: usize, len: usize) -> Vec<Complex64> {
    mrc_block(buffer, h, t, len).unwrap_or_else(|_| vec![Complex64::new(0.0, 0.0); len])
}
