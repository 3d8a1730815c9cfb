//! Detection-quality metrics: greedy box matching, distance- and IoU-based
//! average precision, true-positive error statistics, the composite NDS
//! score, and relative mAP degradation for robustness reports.
//!
//! All functions are pure; dataset-level sweeps fan matching out per frame
//! and reduce in a fixed frame order, so results never depend on thread
//! scheduling.

mod ap;
mod matching;
mod score;
mod summary;
mod tp;

pub use ap::{average_precision, dataset_average_precision, dataset_pr_curve, mean_ap, PrCurve};
pub use matching::{match_boxes, MatchConfig, MatchFamily, MatchSet};
pub use score::{delta_map, nds, nds3, round_to_tenth};
pub use summary::{evaluate, ClassAp, EvalFrame, EvalSummary};
pub use tp::{aligned_size_iou, tp_errors, TpErrors};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid metric config: {0}")]
    InvalidConfig(String),
    #[error("no class has a defined average precision")]
    AllUndefined,
    #[error("baseline mAP must be positive, got {0}")]
    NonPositiveBaseline(f64),
}
