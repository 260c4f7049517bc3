//! Multiple-instance anomaly scoring over temporal segments.

pub mod features;
pub mod graph;
pub mod net;

pub use features::{
    builtin_features, load_bags, load_features, write_bags, parse_features, segment_video, video_features, SegmentFeatures,
    DEFAULT_SEGMENTS, FEATURE_DIM,
};
pub use graph::{compare_graphs, read_scores_csv, render_svg, score_video, spearman};
pub use net::{
    mil_ranking_loss, score_forward, train_mil, Bag, LossHistory, MilParams, MilWeights, Polarity,
    ScoreSeries,
};
