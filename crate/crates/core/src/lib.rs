//! Background subtraction with arithmetic distribution networks, motion-based
//! video trimming and multiple-instance anomaly scoring.

pub mod adnn;
pub mod error;
pub mod frame_io;
pub mod histogram;
pub mod mask;
pub mod mil;
pub mod pipeline;
pub mod refine;
pub mod synth;
pub mod trim;

pub use error::{Error, Result};
pub use frame_io::{load_sequence, Frame, FrameSequence, FrameSource, MemorySequence, SequenceStats};
pub use histogram::{Histogram, TemporalWindow};
pub use mask::BinaryMask;
