//! Stochastic viewport-sequence sampling over equirectangular panoramas and
//! scanpath comparison metrics.
//!
//! * [`sphere`]: coordinates, gnomonic projection, neighbour candidates.
//! * [`erp`]: panorama loading, viewport rendering, patch split, entropy.
//! * [`rps`]: the recursive probability sampler.
//! * [`metrics`]: LEV / DTW / REC and the baseline protocol.
//! * [`report`]: density grids, heatmaps, per-sequence scoring.
//! * [`io`]: file formats.
//! * [`cli`]: the `panoview` command.

pub mod cli;
pub mod erp;
pub mod error;
pub mod io;
pub mod metrics;
pub mod report;
pub mod rps;
pub mod sphere;

pub use error::{Error, Result};
