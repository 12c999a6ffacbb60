//! Density of generated viewport centers over the region grid, per-sequence
//! scoring and the averaged panorama score.

use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::erp::{gray_entropy, ErpImage};
use crate::error::{Error, Result};
use crate::metrics::{region_token, GRID_COLS, GRID_ROWS, REGION_COUNT};
use crate::rps::{Generator, RpsConfig, ViewportSequence};

/// Viewport-center counts per grid region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Default for DensityGrid {
    fn default() -> Self {
        Self {
            counts: vec![0; REGION_COUNT],
            total: 0,
        }
    }
}

impl DensityGrid {
    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * GRID_COLS + col]
    }
}

pub fn accumulate_density(sequences: &[ViewportSequence]) -> DensityGrid {
    let mut grid = DensityGrid::default();
    for c in sequences.iter().flat_map(|s| s.centers.iter()) {
        grid.counts[region_token(*c)] += 1;
        grid.total += 1;
    }
    grid
}

/// Cell brightness, linear in count with the densest cell at 255.
pub fn cell_brightness(grid: &DensityGrid) -> Vec<u8> {
    let max = grid.max();
    grid.counts
        .iter()
        .map(|&c| {
            if max == 0 {
                0
            } else {
                (255.0 * c as f64 / max as f64).round() as u8
            }
        })
        .collect()
}

/// Renders the grid as a grayscale image of 6 x 12 square cells of
/// `cell_px` pixels, laid out like the panorama (north up, west left).
pub fn heatmap_image(grid: &DensityGrid, cell_px: u32) -> GrayImage {
    let cell_px = cell_px.max(1);
    let levels = cell_brightness(grid);
    GrayImage::from_fn(
        GRID_COLS as u32 * cell_px,
        GRID_ROWS as u32 * cell_px,
        |x, y| {
            let (row, col) = ((y / cell_px) as usize, (x / cell_px) as usize);
            Luma([levels[row * GRID_COLS + col]])
        },
    )
}

pub fn render_heatmap(grid: &DensityGrid, path: impl AsRef<Path>, cell_px: u32) -> Result<()> {
    let path = path.as_ref();
    heatmap_image(grid, cell_px)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(e) => Error::io(path, e),
            source => Error::Encode {
                path: path.to_path_buf(),
                source,
            },
        })
}

/// Score of one generated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SequenceScore {
    pub sequence_id: usize,
    pub value: f64,
}

/// Scores one viewport sequence of a panorama.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    fn score(&self, img: &ErpImage, seq: &ViewportSequence) -> Result<f64>;
}

/// Mean gray-level entropy of the sequence's viewports.
///
/// A demonstration scorer: it reflects texture content, not perceived
/// quality.
#[derive(Debug, Clone)]
pub struct EntropyScorer {
    pub cfg: RpsConfig,
}

impl EntropyScorer {
    pub fn new(cfg: RpsConfig) -> Self {
        Self { cfg }
    }
}

impl Scorer for EntropyScorer {
    fn name(&self) -> &str {
        "entropy"
    }

    fn score(&self, img: &ErpImage, seq: &ViewportSequence) -> Result<f64> {
        if seq.centers.is_empty() {
            return Err(Error::EmptyInput);
        }
        let generator = Generator::new(img, self.cfg.clone())?;
        let mut total = 0.0;
        for c in &seq.centers {
            total += gray_entropy(&generator.viewport(*c)?.to_gray())?;
        }
        Ok(total / seq.centers.len() as f64)
    }
}

/// Arithmetic mean of the per-sequence scores.
pub fn aggregate_quality(scores: &[SequenceScore]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(scores.iter().map(|s| s.value).sum::<f64>() / scores.len() as f64)
}

pub fn score_sequences(
    scorer: &dyn Scorer,
    img: &ErpImage,
    sequences: &[ViewportSequence],
) -> Result<Vec<SequenceScore>> {
    sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let value = scorer.score(img, s)?;
            if !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "scorer produced {value} for sequence {i}"
                )));
            }
            Ok(SequenceScore {
                sequence_id: i,
                value,
            })
        })
        .collect()
}

/// Per-panorama summary written by the `score` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualityReport {
    pub image: String,
    pub scorer: String,
    pub final_score: f64,
    pub per_sequence: Vec<SequenceScore>,
    pub density: Vec<u64>,
}
