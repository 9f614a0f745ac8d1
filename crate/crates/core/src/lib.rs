//! Short-horizon lightning nowcasting from multi-channel satellite rasters.
//!
//! The pipeline turns pairs of past frames into a motion-extrapolated
//! prediction of the current frame, keeps the absolute prediction error as
//! the signal, summarizes it with sliding-window filters into per-tile
//! feature vectors, and trains classifiers on whether lightning strikes a
//! tile within a 15-minute window.

pub mod eval;
pub mod features;
pub mod flow;
pub mod ingest;
pub mod models;
pub mod raster;
pub mod sampling;
pub mod synth;
