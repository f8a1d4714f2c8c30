//! Superframe traffic: Poisson device activations with replica placement,
//! command-unit waveforms, and synthesis of the received buffer.

mod record;
mod sequences;

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub use record::{dump_scenario, load_scenario};
pub use sequences::{bpsk, hex_to_bits, start_sequence, tail_sequence, START_HEX, TAIL_HEX};

pub use crate::buffer::ReceivedBuffer;
use crate::channel::{apply_awgn, draw_channel, ChannelRealization, LinkBudget};
use crate::config::{FrameConfig, RadioConfig, SimConfig};
use crate::error::{Error, Result};
use crate::ldpc::{Encoder, ParityCheckMatrix};

/// Placement and channel of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    /// Slot index, 1-based.
    pub slot: usize,
    /// Offset inside the slot.
    pub offset: usize,
    pub channel: ChannelRealization,
}

/// One device activation and its `N_rep` replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub tau: usize,
    pub iota: usize,
    /// `iota * k` information bits.
    pub payload: Vec<u8>,
    pub replicas: Vec<Replica>,
    pub budget: LinkBudget,
}

impl Activation {
    /// First symbol of replica `r`.
    pub fn replica_start(&self, r: usize, frame: &FrameConfig) -> usize {
        let rep = &self.replicas[r];
        self.tau + (rep.slot - 1) * frame.l_max() + rep.offset
    }

    /// First symbol of replica `r`'s tail sequence.
    pub fn replica_tail(&self, r: usize, frame: &FrameConfig) -> usize {
        self.replica_start(r, frame) + frame.tail_offset(self.iota)
    }

    pub fn unit_len(&self, frame: &FrameConfig) -> usize {
        frame.unit_len(self.iota)
    }

    /// Info bits of codeword `j` (0-based).
    pub fn codeword_info(&self, j: usize, k: usize) -> &[u8] {
        &self.payload[j * k..(j + 1) * k]
    }
}

/// A labelled instant in the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Marker {
    pub time: usize,
    pub activation: usize,
    pub replica: usize,
}

/// Start and tail positions of every replica, sorted by time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub starts: Vec<Marker>,
    pub tails: Vec<Marker>,
}

impl GroundTruth {
    fn build(frame: &FrameConfig, activations: &[Activation]) -> Self {
        let mut truth = GroundTruth::default();
        for (a, act) in activations.iter().enumerate() {
            for r in 0..act.replicas.len() {
                let m = |time| Marker {
                    time,
                    activation: a,
                    replica: r,
                };
                truth.starts.push(m(act.replica_start(r, frame)));
                truth.tails.push(m(act.replica_tail(r, frame)));
            }
        }
        truth.starts.sort_unstable();
        truth.tails.sort_unstable();
        truth
    }

    pub fn is_start(&self, t: usize) -> bool {
        Self::find(&self.starts, t).is_some()
    }

    pub fn is_tail(&self, t: usize) -> bool {
        Self::find(&self.tails, t).is_some()
    }

    /// Replicas starting at `t`.
    pub fn starts_at(&self, t: usize) -> impl Iterator<Item = &Marker> {
        Self::range(&self.starts, t)
    }

    fn find(list: &[Marker], t: usize) -> Option<usize> {
        let i = list.partition_point(|m| m.time < t);
        (i < list.len() && list[i].time == t).then_some(i)
    }

    fn range(list: &[Marker], t: usize) -> impl Iterator<Item = &Marker> {
        let i = list.partition_point(|m| m.time < t);
        list[i..].iter().take_while(move |m| m.time == t)
    }
}

/// One superframe of activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    frame: FrameConfig,
    activations: Vec<Activation>,
    truth: GroundTruth,
}

impl Scenario {
    /// Checks every placement invariant and indexes the ground truth.
    pub fn new(frame: FrameConfig, activations: Vec<Activation>) -> Result<Self> {
        let l_max = frame.l_max();
        let t_vf = frame.n_slot * l_max;
        if frame.t_sf < t_vf {
            return Err(Error::invalid("T_SF", "superframe shorter than one virtual frame"));
        }
        let t_act = frame.t_sf - t_vf + 1;
        for act in &activations {
            if act.tau >= t_act {
                return Err(Error::invalid("tau", format!("{} outside [0, {}]", act.tau, t_act - 1)));
            }
            if act.iota < 1 || act.iota > frame.iota_max {
                return Err(Error::invalid(
                    "iota",
                    format!("{} outside [1, {}]", act.iota, frame.iota_max),
                ));
            }
            if act.payload.len() != act.iota * frame.k {
                return Err(Error::LengthMismatch {
                    expected: act.iota * frame.k,
                    actual: act.payload.len(),
                });
            }
            if act.replicas.len() != frame.n_rep {
                return Err(Error::invalid(
                    "N_rep",
                    format!("activation has {} replicas", act.replicas.len()),
                ));
            }
            let mut slots: Vec<usize> = act.replicas.iter().map(|r| r.slot).collect();
            slots.sort_unstable();
            if slots.windows(2).any(|w| w[0] == w[1]) || slots.iter().any(|&s| s < 1 || s > frame.n_slot) {
                return Err(Error::invalid(
                    "slot",
                    format!("replica slots {slots:?} not distinct in [1, N_slot]"),
                ));
            }
            if act.replicas.iter().any(|r| r.offset > frame.max_offset(act.iota)) {
                return Err(Error::invalid("offset", "replica overruns its slot"));
            }
        }
        let truth = GroundTruth::build(&frame, &activations);
        Ok(Scenario {
            frame,
            activations,
            truth,
        })
    }

    pub fn empty(frame: FrameConfig) -> Self {
        Scenario {
            frame,
            activations: Vec::new(),
            truth: GroundTruth::default(),
        }
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Union of two scenarios over the same frame.
    pub fn merged(&self, other: &Scenario) -> Result<Scenario> {
        assert_eq!(self.frame, other.frame, "merging scenarios of different frames");
        let mut acts = self.activations.clone();
        acts.extend(other.activations.iter().cloned());
        Scenario::new(self.frame, acts)
    }
}

/// Maps payloads to command-unit waveforms.
#[derive(Debug, Clone)]
pub struct CommandUnitCodec {
    frame: FrameConfig,
    encoder: Encoder,
    x_pre: Vec<f64>,
    x_tail: Vec<f64>,
}

impl CommandUnitCodec {
    /// The bundled (128, 64) code with the standard start and tail sequences.
    pub fn new(frame: &FrameConfig) -> Result<Self> {
        Self::with_parts(
            frame,
            Arc::new(ParityCheckMatrix::ccsds_tc128()),
            start_sequence(),
            tail_sequence(),
        )
    }

    pub fn with_parts(
        frame: &FrameConfig,
        code: Arc<ParityCheckMatrix>,
        x_pre: Vec<f64>,
        x_tail: Vec<f64>,
    ) -> Result<Self> {
        if code.n() != frame.l_code || code.k() != frame.k {
            return Err(Error::invalid(
                "L_code",
                format!(
                    "code is ({}, {}) but frame expects ({}, {})",
                    code.n(),
                    code.k(),
                    frame.l_code,
                    frame.k
                ),
            ));
        }
        if x_pre.len() != frame.l_pre {
            return Err(Error::invalid(
                "L_pre",
                format!("start sequence has {} symbols", x_pre.len()),
            ));
        }
        if x_tail.len() != frame.l_tail {
            return Err(Error::invalid(
                "L_tail",
                format!("tail sequence has {} symbols", x_tail.len()),
            ));
        }
        Ok(CommandUnitCodec {
            frame: *frame,
            encoder: Encoder::new(code),
            x_pre,
            x_tail,
        })
    }

    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn x_pre(&self) -> &[f64] {
        &self.x_pre
    }

    pub fn x_tail(&self) -> &[f64] {
        &self.x_tail
    }

    /// BPSK image of the codeword carrying `info`.
    pub fn codeword_symbols(&self, info: &[u8]) -> Result<Vec<f64>> {
        Ok(bpsk(&self.encoder.encode(info)?))
    }

    /// `[x_pre | codewords | x_tail]` for a payload of whole codewords.
    pub fn waveform(&self, payload: &[u8]) -> Result<Vec<f64>> {
        let k = self.frame.k;
        if payload.is_empty() || !payload.len().is_multiple_of(k) {
            return Err(Error::LengthMismatch {
                expected: k * payload.len().div_ceil(k).max(1),
                actual: payload.len(),
            });
        }
        let iota = payload.len() / k;
        let mut x = Vec::with_capacity(self.frame.unit_len(iota));
        x.extend_from_slice(&self.x_pre);
        for info in payload.chunks(k) {
            x.extend(self.codeword_symbols(info)?);
        }
        x.extend_from_slice(&self.x_tail);
        Ok(x)
    }
}

/// Waveform of one activation.
pub fn waveform(activation: &Activation, codec: &CommandUnitCodec) -> Result<Vec<f64>> {
    codec.waveform(&activation.payload)
}

/// Draws one superframe: `Poisson(lambda)` activations at every admissible
/// start time, each with uniform codeword count, distinct slots, uniform
/// offsets, uniform payload bits and fresh channel draws.
pub fn generate_scenario<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Scenario {
    let frame = cfg.frame;
    let lambda = cfg.traffic.lambda;
    let mut activations = Vec::new();
    if lambda > 0.0 {
        let poisson = Poisson::new(lambda).expect("lambda validated finite and positive");
        for tau in 0..cfg.t_act() {
            let m = poisson.sample(rng) as usize;
            for _ in 0..m {
                activations.push(draw_activation(tau, cfg, rng));
            }
        }
    }
    let truth = GroundTruth::build(&frame, &activations);
    Scenario {
        frame,
        activations,
        truth,
    }
}

/// Draws one activation at time `tau`.
pub fn draw_activation<R: Rng + ?Sized>(tau: usize, cfg: &SimConfig, rng: &mut R) -> Activation {
    let frame = &cfg.frame;
    let iota = rng.random_range(1..=frame.iota_max);
    draw_activation_with_iota(tau, iota, &cfg.radio, frame, rng)
}

pub(crate) fn draw_activation_with_iota<R: Rng + ?Sized>(
    tau: usize,
    iota: usize,
    radio: &RadioConfig,
    frame: &FrameConfig,
    rng: &mut R,
) -> Activation {
    let mut slots: Vec<usize> = index::sample(rng, frame.n_slot, frame.n_rep)
        .into_iter()
        .map(|s| s + 1)
        .collect();
    slots.sort_unstable();
    let max_offset = frame.max_offset(iota);
    let offsets: Vec<usize> = slots.iter().map(|_| rng.random_range(0..=max_offset)).collect();
    let payload: Vec<u8> = (0..iota * frame.k).map(|_| rng.random_range(0..2u8)).collect();
    let budget = LinkBudget::draw(radio, rng);
    let replicas = slots
        .into_iter()
        .zip(offsets)
        .map(|(slot, offset)| Replica {
            slot,
            offset,
            channel: draw_channel(&budget, radio.antennas, rng),
        })
        .collect();
    Activation {
        tau,
        iota,
        payload,
        replicas,
        budget,
    }
}

/// Noiseless superposition of every replica.
pub fn synthesize_clean(scenario: &Scenario, codec: &CommandUnitCodec, antennas: usize) -> Result<ReceivedBuffer> {
    let frame = scenario.frame();
    let mut buf = ReceivedBuffer::zeros(antennas, frame.t_sf);
    for act in scenario.activations() {
        let x = waveform(act, codec)?;
        for (r, rep) in act.replicas.iter().enumerate() {
            if rep.channel.len() != antennas {
                return Err(Error::LengthMismatch {
                    expected: antennas,
                    actual: rep.channel.len(),
                });
            }
            buf.add_signal(act.replica_start(r, frame), &rep.channel, &x);
        }
    }
    Ok(buf)
}

/// Received buffer: superposed replicas plus `CN(0, sigma_w2)` noise.
pub fn synthesize<R: Rng + ?Sized>(
    scenario: &Scenario,
    codec: &CommandUnitCodec,
    radio: &RadioConfig,
    rng: &mut R,
) -> Result<ReceivedBuffer> {
    let mut buf = synthesize_clean(scenario, codec, radio.antennas)?;
    apply_awgn(&mut buf, radio.sigma_w2, rng);
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(lambda: f64) -> SimConfig {
        default_config().with_lambda(lambda).unwrap()
    }

    #[test]
    fn zero_rate_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = generate_scenario(&cfg(0.0), &mut rng);
        assert!(s.activations().is_empty());
        let codec = CommandUnitCodec::new(s.frame()).unwrap();
        let buf = synthesize(&s, &codec, &cfg(0.0).with_noise(0.0).unwrap().radio, &mut rng).unwrap();
        assert!(buf.as_slice().iter().all(|x| *x == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn mean_activation_count() {
        let c = cfg(2e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 1000;
        let counts: Vec<f64> = (0..n)
            .map(|_| generate_scenario(&c, &mut rng).activations().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let expected = 2e-3 * 1041.0;
        let se = (expected / n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn placement_invariants() {
        let c = cfg(1e-2);
        let f = c.frame;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = generate_scenario(&c, &mut rng);
        assert!(!s.activations().is_empty());
        for act in s.activations() {
            assert!(act.tau < c.t_act());
            assert!((1..=5).contains(&act.iota));
            for (r, rep) in act.replicas.iter().enumerate() {
                let start = act.replica_start(r, &f);
                let end = start + act.unit_len(&f) - 1;
                assert!(end < act.tau + rep.slot * f.l_max());
                assert!(end < f.t_sf);
                assert_eq!(rep.channel.len(), 4);
            }
            if act.iota == 5 {
                assert!(act.replicas.iter().all(|r| r.offset == 0));
            }
        }
        assert_eq!(s.truth().starts.len(), 2 * s.activations().len());
        assert_eq!(s.truth().tails.len(), 2 * s.activations().len());
        // Rebuilding through the checked constructor accepts the draw.
        assert_eq!(Scenario::new(f, s.activations().to_vec()).unwrap(), s);
    }

    #[test]
    fn waveform_layout() {
        let c = cfg(1e-3);
        let codec = CommandUnitCodec::new(&c.frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let act = draw_activation_with_iota(0, 1, &c.radio, &c.frame, &mut rng);
        let x = waveform(&act, &codec).unwrap();
        assert_eq!(x.len(), 384);
        assert_eq!(&x[..128], &start_sequence()[..]);
        assert_eq!(&x[256..], &tail_sequence()[..]);
        assert!(codec
            .encoder()
            .code()
            .is_codeword(&x[128..256].iter().map(|&s| u8::from(s < 0.0)).collect::<Vec<_>>()));
        assert!(codec.waveform(&[0; 63]).is_err());
        assert!(codec.waveform(&[]).is_err());
    }

    #[test]
    fn single_replica_is_placed_verbatim() {
        let c = cfg(1e-3).with_noise(0.0).unwrap();
        let f = c.frame;
        let codec = CommandUnitCodec::new(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let act = draw_activation_with_iota(17, 2, &c.radio, &f, &mut rng);
        let s = Scenario::new(f, vec![act.clone()]).unwrap();
        let buf = synthesize(&s, &codec, &c.radio, &mut rng).unwrap();
        let x = waveform(&act, &codec).unwrap();
        let mut expected = ReceivedBuffer::zeros(4, f.t_sf);
        for (r, rep) in act.replicas.iter().enumerate() {
            let start = act.replica_start(r, &f);
            for ant in 0..4 {
                for (t, &xt) in x.iter().enumerate() {
                    expected.row_mut(ant)[start + t] = rep.channel[ant] * xt;
                }
            }
        }
        assert_eq!(buf, expected);
    }

    #[test]
    fn superposition_is_additive() {
        let c = cfg(3e-3).with_noise(0.0).unwrap();
        let codec = CommandUnitCodec::new(&c.frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = generate_scenario(&c, &mut rng);
        let b = generate_scenario(&c, &mut rng);
        let mut sum = synthesize_clean(&a, &codec, 4).unwrap();
        sum.add(&synthesize_clean(&b, &codec, 4).unwrap());
        let merged = synthesize_clean(&a.merged(&b).unwrap(), &codec, 4).unwrap();
        for (x, y) in sum.as_slice().iter().zip(merged.as_slice()) {
            assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn deterministic_replay() {
        let c = cfg(5e-3);
        let codec = CommandUnitCodec::new(&c.frame).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let s = generate_scenario(&c, &mut rng);
            let b = synthesize(&s, &codec, &c.radio, &mut rng).unwrap();
            (s, b)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn constructor_rejects_bad_placements() {
        let c = cfg(1e-3);
        let f = c.frame;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let good = draw_activation_with_iota(0, 3, &c.radio, &f, &mut rng);
        let mut bad = good.clone();
        bad.tau = c.t_act();
        assert!(Scenario::new(f, vec![bad]).is_err());
        let mut bad = good.clone();
        bad.replicas[1].slot = bad.replicas[0].slot;
        assert!(Scenario::new(f, vec![bad]).is_err());
        let mut bad = good.clone();
        bad.replicas[0].offset = f.max_offset(3) + 1;
        assert!(Scenario::new(f, vec![bad]).is_err());
        let mut bad = good;
        bad.payload.pop();
        assert!(Scenario::new(f, vec![bad]).is_err());
    }
}
