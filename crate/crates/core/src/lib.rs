//! Ranking and evaluation engine for detection-based person search.
//!
//! Gallery detections are scored against a probe with a visual similarity
//! that is attenuated by the detector's confidence (objectness) and by how
//! much more the detection resembles another person in the probe's frame
//! than the probe itself (repulsion). The crate also provides the evaluation
//! protocol (IoU matching, CMC, mAP, detection AP), dataset file formats,
//! seeded gallery sampling, a synthetic benchmark generator and brute-force
//! oracles for cross-checking.

// `!(x >= t)` rejects NaN along with small values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod ranking;
pub mod rng;
pub mod similarity;
pub mod synth;
pub mod types;

pub use dataset::{
    build_probe_context, build_probe_context_filtered, load_dataset, sample_gallery_subset, save_dataset, Dataset,
    DatasetPaths, GallerySubset,
};
pub use error::{Error, Result};
pub use eval::{
    average_precision, cmc_at_k, evaluate_detection, evaluate_search, match_ranked_list, DetectionReport, EvalReport,
    GroundTruth, DEFAULT_IOU_THRESHOLD,
};
pub use geometry::{iou, l2_normalize};
pub use ranking::{rank_gallery, truncate_top_k, RankedEntry, RankedList};
pub use similarity::{
    objectness_term, or_score, or_score_matrix, repulsion_term, visual_similarity, ScoreBreakdown, ScoringMode,
};
pub use synth::{generate, SynthConfig};
pub use types::{BBox, Embedding, Frame, GalleryItem, GtBox, ProbeContext};
