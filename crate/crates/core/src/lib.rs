//! RIS-based RF sensing toolkit.
//!
//! Models the measurement channel of a reconfigurable-intelligent-surface
//! sensing link, optimizes the frame-configuration matrix by minimizing
//! the averaged mutual coherence of the measurement matrix, and trains a
//! softmax decision network for posture recognition on synthetically
//! generated sparse scenes.
//!
//! The pipeline, end to end:
//!
//! 1. [`geometry`] lays out the RIS, antennas, and the discretized space
//!    of interest.
//! 2. [`ris`] holds element states and the K-frame configuration matrix
//!    with its per-group simplex constraints.
//! 3. [`channel`] builds the sensing dictionary `A` and synthesizes
//!    noisy measurements `y = h_d P_t + P_t T A eta + noise`.
//! 4. [`coherence`] scores a configuration through `Gamma = T A` and
//!    recovers sparse scenes with orthogonal matching pursuit.
//! 5. [`fcao`] optimizes the configuration matrix frame by frame
//!    (pattern search + augmented Lagrangian).
//! 6. [`recognizer`] trains and evaluates the decision network under a
//!    misclassification cost model.
//! 7. [`scenes`] generates labeled posture datasets.
//! 8. [`artifact`] persists every artifact as hashed, reproducible text.
//!
//! With the default `parallel` feature the data-parallel kernels
//! (dictionary assembly, pairwise coherences, dataset synthesis) run on
//! rayon; disabling it falls back to sequential loops with bit-identical
//! outputs.

pub mod artifact;
pub mod channel;
pub mod coherence;
pub mod error;
pub mod fcao;
pub mod geometry;
mod par;
pub mod recognizer;
pub mod ris;
pub mod scenes;

pub use error::{Error, Result};
