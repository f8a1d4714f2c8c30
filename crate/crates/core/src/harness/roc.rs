use std::io::Write;

use rand::Rng;

use crate::config::SimConfig;
use crate::detect::Detector;
use crate::error::Result;

use super::metrics::{confusion_metrics, ConfusionCounts};
use super::windows::{ClassCounts, WindowSampler};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub false_alarm: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// One point per threshold, sorted by false-alarm rate then recall.
    pub points: Vec<RocPoint>,
    /// `points` with recall replaced by its running maximum.
    pub envelope: Vec<RocPoint>,
}

impl RocCurve {
    /// Largest envelope recall at false-alarm rate at most `f`.
    pub fn recall_at(&self, f: f64) -> Option<f64> {
        self.envelope
            .iter()
            .filter(|p| p.false_alarm <= f)
            .map(|p| p.recall)
            .reduce(f64::max)
    }
}

/// `n + 1` evenly spaced thresholds from 0 to 1.
pub fn threshold_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Sweeps `thresholds` over `(truth, score)` pairs; a window is declared
/// positive when its score reaches the threshold. Returns `None` when one
/// of the two classes is empty.
pub fn roc_curve(scored: &[(bool, f64)], thresholds: &[f64]) -> Option<RocCurve> {
    let mut points = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut c = ConfusionCounts::default();
        for &(truth, score) in scored {
            c.record(truth, score >= threshold);
        }
        let m = confusion_metrics(&c);
        points.push(RocPoint {
            threshold,
            false_alarm: m.false_alarm?,
            recall: m.recall?,
        });
    }
    points.sort_by(|a, b| {
        a.false_alarm
            .total_cmp(&b.false_alarm)
            .then(a.recall.total_cmp(&b.recall))
            .then(b.threshold.total_cmp(&a.threshold))
    });
    let mut best = f64::NEG_INFINITY;
    let envelope = points
        .iter()
        .map(|p| {
            best = best.max(p.recall);
            RocPoint { recall: best, ..*p }
        })
        .collect();
    Some(RocCurve { points, envelope })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub lambda: f64,
    pub start: RocCurve,
    pub tail: RocCurve,
}

/// Scores freshly sampled windows with `detector` and sweeps both labels.
/// Positives for the start label are H1 and H4, for the tail label H2 and
/// H4; every other class counts as negative.
pub fn roc_campaign<R: Rng + ?Sized>(
    cfg: &SimConfig,
    detector: &Detector,
    counts: &ClassCounts,
    buffer_len: usize,
    thresholds: &[f64],
    rng: &mut R,
) -> Result<RocReport> {
    let mut sampler = WindowSampler::new(cfg, buffer_len)?;
    let windows = sampler.collect(counts, rng)?;
    let codec = sampler.codec();
    let mut start = Vec::with_capacity(windows.len());
    let mut tail = Vec::with_capacity(windows.len());
    for w in &windows {
        let s = w.scores(detector, codec.x_pre(), codec.x_tail(), cfg.frame.i_max)?;
        let labels = w.class.labels();
        start.push((labels.start, s.p_a));
        tail.push((labels.tail, s.p_b));
    }
    let missing = || crate::error::Error::invalid("counts", "each label needs positive and negative windows");
    Ok(RocReport {
        lambda: cfg.traffic.lambda,
        start: roc_curve(&start, thresholds).ok_or_else(missing)?,
        tail: roc_curve(&tail, thresholds).ok_or_else(missing)?,
    })
}

pub fn write_roc_csv<W: Write>(mut w: W, report: &RocReport) -> std::io::Result<()> {
    writeln!(w, "lambda,label,threshold,false_alarm,recall,envelope_recall")?;
    for (label, curve) in [("start", &report.start), ("tail", &report.tail)] {
        for (p, e) in curve.points.iter().zip(&curve.envelope) {
            writeln!(
                w,
                "{},{label},{},{},{},{}",
                report.lambda, p.threshold, p.false_alarm, p.recall, e.recall
            )?;
        }
    }
    Ok(())
}
