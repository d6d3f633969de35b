//! RGB-to-hyperspectral reconstruction at desk scale.
//!
//! The crate covers the full pipeline: hypercube I/O and band handling,
//! ROI masking and mean-spectrum extraction, a small reverse-mode autodiff
//! engine, four toy reconstruction networks (EDSR, HRNet, MST++ and
//! Restormer style), their training loop, reconstruction and classification
//! metrics, imbalanced ensemble classification, and a synthetic egg phantom
//! generator.

pub mod autodiff;
pub mod classify;
pub mod dataset;
pub mod hypercube;
pub mod metrics;
pub mod models;
pub mod phantom;
pub mod provenance;
pub mod segmentation;
pub mod training;
