//! Experiment drivers: loss-ratio and ROC campaigns, confusion metrics and
//! the training dataset export.

mod dataset;
mod metrics;
mod plr;
mod roc;
mod windows;

pub use dataset::{export_dataset, read_dataset, write_dataset, DatasetRecord};
pub use metrics::{confusion_metrics, ConfusionCounts, ConfusionMetrics};
pub use plr::{
    draw_scenario, plr_campaign, plr_point, run_trial, score_superframe, superframe_rng, write_plr_csv, PlrRecord,
    PlrSettings, TrafficModel,
};
pub use roc::{roc_campaign, roc_curve, threshold_grid, write_roc_csv, RocCurve, RocPoint, RocReport};
pub use windows::{ClassCounts, WindowMode, WindowSample, WindowSampler, DATASET_BUFFER_LEN};
