use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SimConfig;
use crate::detect::{Detector, Thresholds};
use crate::error::Result;
use crate::receiver::{DecodedUnit, Receiver};
use crate::traffic::{draw_activation, generate_scenario, synthesize, CommandUnitCodec, Scenario};

/// How activations are drawn for each superframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrafficModel {
    /// Poisson activations at the configured rate.
    Poisson,
    /// Exactly one activation at a uniform start time.
    SingleUnit,
}

/// Packet counts of a campaign point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlrRecord {
    pub lambda: f64,
    pub superframes: u64,
    pub n_tx: u64,
    /// Lost packets for which some replica start produced a wrong payload.
    pub n_err: u64,
    /// Lost packets with no decoded unit at any replica start.
    pub n_miss: u64,
}

impl PlrRecord {
    /// `(N_err + N_miss) / N_tx`; zero before any transmission.
    pub fn plr(&self) -> f64 {
        if self.n_tx == 0 {
            0.0
        } else {
            (self.n_err + self.n_miss) as f64 / self.n_tx as f64
        }
    }

    pub fn recovered(&self) -> u64 {
        self.n_tx - self.n_err - self.n_miss
    }

    /// Binomial standard error of the loss ratio.
    pub fn std_err(&self) -> f64 {
        if self.n_tx == 0 {
            return 0.0;
        }
        let p = self.plr();
        (p * (1.0 - p) / self.n_tx as f64).sqrt()
    }

    fn absorb(&mut self, o: &PlrRecord) {
        self.superframes += o.superframes;
        self.n_tx += o.n_tx;
        self.n_err += o.n_err;
        self.n_miss += o.n_miss;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlrSettings {
    /// Superframes are drawn until at least this many packets were sent.
    pub packets: u64,
    pub traffic: TrafficModel,
    pub seed: u64,
    /// Hard stop, useful at rates where superframes are mostly empty.
    pub max_superframes: u64,
}

impl Default for PlrSettings {
    fn default() -> Self {
        PlrSettings {
            packets: 20_000,
            traffic: TrafficModel::Poisson,
            seed: 0,
            max_superframes: u64::MAX,
        }
    }
}

/// Generator for superframe `index`, independent of every other index.
pub fn superframe_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the activations of one superframe.
pub fn draw_scenario<R: Rng + ?Sized>(cfg: &SimConfig, model: TrafficModel, rng: &mut R) -> Result<Scenario> {
    match model {
        TrafficModel::Poisson => Ok(generate_scenario(cfg, rng)),
        TrafficModel::SingleUnit => {
            let tau = rng.random_range(0..cfg.t_act());
            Scenario::new(cfg.frame, vec![draw_activation(tau, cfg, rng)])
        }
    }
}

/// Scores the receiver output of one superframe against its ground truth.
pub fn score_superframe(scenario: &Scenario, decoded: &[DecodedUnit]) -> PlrRecord {
    let frame = scenario.frame();
    let mut rec = PlrRecord {
        superframes: 1,
        ..Default::default()
    };
    for act in scenario.activations() {
        rec.n_tx += 1;
        if decoded.iter().any(|u| u.bits() == act.payload) {
            continue;
        }
        let starts: Vec<usize> = (0..act.replicas.len()).map(|r| act.replica_start(r, frame)).collect();
        if decoded.iter().any(|u| starts.contains(&u.tau_hat)) {
            rec.n_err += 1;
        } else {
            rec.n_miss += 1;
        }
    }
    rec
}

/// Simulates, receives and scores one superframe.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &SimConfig,
    codec: &CommandUnitCodec,
    receiver: &mut Receiver,
    model: TrafficModel,
    rng: &mut R,
) -> Result<PlrRecord> {
    let scenario = draw_scenario(cfg, model, rng)?;
    let buffer = synthesize(&scenario, codec, &cfg.radio, rng)?;
    let decoded = receiver.run_superframe(&buffer)?;
    Ok(score_superframe(&scenario, &decoded))
}

/// Loss ratio at one arrival rate.
pub fn plr_point(
    cfg: &SimConfig,
    detector: &Detector,
    thresholds: Thresholds,
    settings: &PlrSettings,
) -> Result<PlrRecord> {
    assert!(settings.packets >= 1);
    let codec = CommandUnitCodec::new(&cfg.frame)?;
    let mut receiver = Receiver::new(cfg, detector.clone(), thresholds)?;
    let mut total = PlrRecord {
        lambda: cfg.traffic.lambda,
        ..Default::default()
    };
    let mut index = 0;
    while total.n_tx < settings.packets && index < settings.max_superframes {
        let mut rng = superframe_rng(settings.seed, index);
        total.absorb(&run_trial(cfg, &codec, &mut receiver, settings.traffic, &mut rng)?);
        index += 1;
    }
    Ok(total)
}

/// One [`plr_point`] per rate, each with its own seed stream.
pub fn plr_campaign(
    cfg: &SimConfig,
    detector: &Detector,
    thresholds: Thresholds,
    lambdas: &[f64],
    settings: &PlrSettings,
) -> Result<Vec<PlrRecord>> {
    lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let point = PlrSettings {
                seed: settings.seed.wrapping_add(i as u64),
                ..*settings
            };
            plr_point(&cfg.with_lambda(lambda)?, detector, thresholds, &point)
        })
        .collect()
}

pub fn write_plr_csv<W: Write>(mut w: W, records: &[PlrRecord]) -> std::io::Result<()> {
    writeln!(w, "lambda,superframes,n_tx,n_err,n_miss,plr,std_err")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.lambda,
            r.superframes,
            r.n_tx,
            r.n_err,
            r.n_miss,
            r.plr(),
            r.std_err()
        )?;
    }
    Ok(())
}
