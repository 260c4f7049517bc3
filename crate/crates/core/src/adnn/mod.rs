//! Arithmetic distribution network: distribution layers with hand-written
//! adjoints, a small classifier head, deterministic training and frame-level
//! inference.

pub mod classifier;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod predict;
pub mod train;

pub use classifier::{cross_entropy, softmax2, Classifier, Probs};
pub use gradcheck::{grad_check, GradCheckLayer};
pub use layers::{
    product_layer_backward, product_layer_forward, sum_layer_backward, sum_layer_forward,
    DistKernel, GradBundle, LayerKind,
};
pub use model::{adnn_forward, classifier_forward, AdnnConfig, AdnnModel};
pub use predict::{predict_mask, InferencePlan};
pub use train::{train, TrainConfig};
