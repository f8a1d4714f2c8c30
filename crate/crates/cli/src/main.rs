//! Command-line front end for the simulator, receiver and analysis tools.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gfra::analysis::{cnn_flops, mc_tail_confusion, tail_confusion_prob, CnnArchitecture, VictimReplica};
use gfra::detect::{CnnWeights, Detector, Thresholds};
use gfra::harness::{
    export_dataset, plr_campaign, roc_campaign, score_superframe, superframe_rng, threshold_grid, write_plr_csv,
    write_roc_csv, ClassCounts, PlrSettings, TrafficModel, DATASET_BUFFER_LEN,
};
use gfra::receiver::Receiver;
use gfra::traffic::{dump_scenario, synthesize, CommandUnitCodec};
use gfra::SimConfig;

#[derive(Parser)]
#[command(version, about = "Grant-free random access link-level simulator")]
struct Cli {
    /// `key = value` file overriding the default parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and receive one superframe, printing a trace.
    Simulate(SimulateArgs),
    /// Packet loss ratio over a grid of arrival rates.
    Plr(PlrArgs),
    /// Detection ROC on sampled windows.
    Roc(RocArgs),
    /// Closed-form tail-confusion probability next to its simulation.
    ConfusionProb(ConfusionArgs),
    /// Write labeled training windows.
    ExportDataset(DatasetArgs),
    /// Per-layer operation count of the detection network.
    Flops,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorKind {
    Glrt,
    Cnn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Traffic {
    Poisson,
    Single,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, value_enum, default_value_t = DetectorKind::Glrt)]
    detector: DetectorKind,
    /// Network weights, required with `--detector cnn`.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    start_threshold: f64,
    #[arg(long, default_value_t = 0.5)]
    tail_threshold: f64,
}

impl DetectorArgs {
    fn detector(&self) -> Result<Detector> {
        match (self.detector, &self.weights) {
            (DetectorKind::Glrt, _) => Ok(Detector::Glrt),
            (DetectorKind::Cnn, Some(path)) => {
                let w = CnnWeights::load(path).with_context(|| format!("loading {}", path.display()))?;
                Ok(Detector::Cnn(Arc::new(w)))
            }
            (DetectorKind::Cnn, None) => bail!("--detector cnn needs --weights"),
        }
    }

    fn thresholds(&self) -> Thresholds {
        Thresholds {
            start: self.start_threshold,
            tail: self.tail_threshold,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the drawn scenario here.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct PlrArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    /// Comma-separated arrival rates per symbol.
    #[arg(long, value_delimiter = ',', default_values_t = [2.5e-4, 5e-4, 7.5e-4, 1e-3, 2.5e-3])]
    lambda_grid: Vec<f64>,
    /// Transmitted packets per rate.
    #[arg(long, default_value_t = 20_000)]
    packets: u64,
    #[arg(long, value_enum, default_value_t = Traffic::Poisson)]
    traffic: Traffic,
    /// Superframe length, overriding the configuration.
    #[arg(long)]
    superframe: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output, stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RocArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Windows per class for H0 to H3; H4 gets half.
    #[arg(long, default_value_t = 2_000)]
    per_class: usize,
    #[arg(long, default_value_t = DATASET_BUFFER_LEN)]
    buffer_len: usize,
    /// Threshold grid resolution.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConfusionArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3, 1e-2])]
    lambda_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 5])]
    iota_v: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    tau_v: usize,
    /// Victim slot, 1-based.
    #[arg(long, default_value_t = 5)]
    slot: usize,
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Simulation trials per point; zero skips the simulation.
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Windows of H0, H1, H2, H3 and H4.
    #[arg(long, value_delimiter = ',', num_args = 5, default_values_t = [20_000, 20_000, 20_000, 20_000, 10_000])]
    counts: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long, default_value_t = DATASET_BUFFER_LEN)]
    buffer_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_kv_str(&text)?
        }
        None => gfra::config::default_config(),
    };
    let timer = Instant::now();
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, a)?,
        Command::Plr(a) => plr(&cfg, a)?,
        Command::Roc(a) => roc(&cfg, a)?,
        Command::ConfusionProb(a) => confusion(&cfg, a)?,
        Command::ExportDataset(a) => dataset(&cfg, a)?,
        Command::Flops => flops(io::stdout().lock())?,
    }
    eprintln!("elapsed {:.3?}", timer.elapsed());
    Ok(())
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(cfg: &SimConfig, a: SimulateArgs) -> Result<()> {
    let cfg = match a.lambda {
        Some(l) => cfg.with_lambda(l)?,
        None => *cfg,
    };
    let codec = CommandUnitCodec::new(&cfg.frame)?;
    let mut rng = superframe_rng(a.seed, 0);
    let scenario = gfra::harness::draw_scenario(&cfg, TrafficModel::Poisson, &mut rng)?;
    let buffer = synthesize(&scenario, &codec, &cfg.radio, &mut rng)?;
    if let Some(path) = &a.dump {
        std::fs::write(path, dump_scenario(&scenario))?;
    }
    println!("activations {}", scenario.activations().len());
    for (i, act) in scenario.activations().iter().enumerate() {
        let starts: Vec<usize> = (0..act.replicas.len())
            .map(|r| act.replica_start(r, &cfg.frame))
            .collect();
        println!(
            "  #{i}: tau {} iota {} d {:.2} m  p_rx {:.1} dBm  starts {starts:?}",
            act.tau,
            act.iota,
            act.budget.d,
            gfra::config::watts_to_dbm(act.budget.p_rx)
        );
    }
    let mut rx = Receiver::new(&cfg, a.detector.detector()?, a.detector.thresholds())?;
    let decoded = rx.run_superframe(&buffer)?;
    println!("decoded {}", decoded.len());
    for u in &decoded {
        let owner = scenario.activations().iter().position(|act| act.payload == u.bits());
        println!(
            "  round {} tau {} iota {} score {:.3} -> {}",
            u.round,
            u.tau_hat,
            u.iota_hat,
            u.score,
            owner.map_or("no match".to_string(), |i| format!("#{i}"))
        );
    }
    let r = score_superframe(&scenario, &decoded);
    println!(
        "n_tx {} n_err {} n_miss {} plr {:.4}",
        r.n_tx,
        r.n_err,
        r.n_miss,
        r.plr()
    );
    Ok(())
}

fn plr(cfg: &SimConfig, a: PlrArgs) -> Result<()> {
    let cfg = match a.superframe {
        Some(t) => cfg.with_superframe(t)?,
        None => *cfg,
    };
    let settings = PlrSettings {
        packets: a.packets.max(1),
        traffic: match a.traffic {
            Traffic::Poisson => TrafficModel::Poisson,
            Traffic::Single => TrafficModel::SingleUnit,
        },
        seed: a.seed,
        ..Default::default()
    };
    let records = plr_campaign(
        &cfg,
        &a.detector.detector()?,
        a.detector.thresholds(),
        &a.lambda_grid,
        &settings,
    )?;
    write_plr_csv(output(&a.out)?, &records)?;
    Ok(())
}

fn roc(cfg: &SimConfig, a: RocArgs) -> Result<()> {
    let cfg = cfg.with_lambda(a.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = roc_campaign(
        &cfg,
        &a.detector.detector()?,
        &ClassCounts::balanced(a.per_class),
        a.buffer_len,
        &threshold_grid(a.steps),
        &mut rng,
    )?;
    write_roc_csv(output(&a.out)?, &report)?;
    Ok(())
}

fn confusion(cfg: &SimConfig, a: ConfusionArgs) -> Result<()> {
    let mut out = output(&a.out)?;
    writeln!(out, "lambda,iota_v,closed_form,mc_estimate,mc_stderr")?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for &iota_v in &a.iota_v {
        let victim = VictimReplica {
            tau_v: a.tau_v,
            iota_v,
            slot: a.slot,
            offset: a.offset,
        };
        for &lambda in &a.lambda_grid {
            let closed = tail_confusion_prob(&victim, &cfg.frame, lambda);
            if a.trials == 0 {
                writeln!(out, "{lambda},{iota_v},{closed},,")?;
            } else {
                let mc = mc_tail_confusion(&victim, &cfg.frame, lambda, a.trials, &mut rng);
                writeln!(out, "{lambda},{iota_v},{closed},{},{}", mc.value, mc.std_err)?;
            }
        }
    }
    Ok(())
}

fn dataset(cfg: &SimConfig, a: DatasetArgs) -> Result<()> {
    let counts: [usize; 5] = a.counts.as_slice().try_into().context("--counts takes five values")?;
    let cfg = cfg.with_lambda(a.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let n = export_dataset(&cfg, &ClassCounts(counts), a.buffer_len, &a.out, &mut rng)?;
    eprintln!("wrote {n} records to {}", a.out.display());
    Ok(())
}

fn flops(mut out: impl Write) -> Result<()> {
    let report = cnn_flops(&CnnArchitecture::default());
    writeln!(out, "layer,flops")?;
    for r in &report.rows {
        writeln!(out, "{},{}", r.layer, r.flops)?;
    }
    writeln!(out, "total,{}", report.total)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grids_and_counts_parse() {
        let cli = Cli::try_parse_from(["gfra", "plr", "--lambda-grid", "1e-3,2e-3", "--packets", "10"]).unwrap();
        let Command::Plr(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.lambda_grid, vec![1e-3, 2e-3]);
        assert_eq!(a.packets, 10);
        assert!(Cli::try_parse_from(["gfra", "export-dataset", "--counts", "1,2,3"]).is_err());
    }
}
