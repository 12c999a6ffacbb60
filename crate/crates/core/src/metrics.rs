//! Scanpath similarity: edit distance over region tokens, dynamic time
//! warping on great-circle cost, and cross-recurrence, plus the pairwise
//! averaging protocol and human/random baselines.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rps::{sequence_rng, ViewportSequence};
use crate::sphere::{great_circle_deg, SphereCoord};

/// Latitude bands of the region grid, 15 degrees each.
pub const GRID_ROWS: usize = 12;
/// Longitude bands of the region grid, 60 degrees each.
pub const GRID_COLS: usize = 6;
pub const REGION_COUNT: usize = GRID_ROWS * GRID_COLS;

/// Default recurrence threshold in degrees (one latitude band).
pub const DEFAULT_REC_THRESHOLD: f64 = 15.0;

/// Region of the 12 x 6 grid containing `p`, row-major from the north-west
/// corner.
pub fn region_token(p: SphereCoord) -> usize {
    let row = ((90.0 - p.lat()) / 15.0)
        .floor()
        .clamp(0.0, (GRID_ROWS - 1) as f64) as usize;
    let col = ((p.lon() + 180.0) / 60.0)
        .floor()
        .clamp(0.0, (GRID_COLS - 1) as f64) as usize;
    row * GRID_COLS + col
}

/// An ordered, non-empty list of gaze or viewport centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scanpath {
    pub label: String,
    pub points: Vec<SphereCoord>,
}

impl Scanpath {
    pub fn new(label: impl Into<String>, points: Vec<SphereCoord>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyScanpath);
        }
        Ok(Self {
            label: label.into(),
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tokens(&self) -> Vec<usize> {
        self.points.iter().copied().map(region_token).collect()
    }

    /// Keeps `count` points at equal index intervals:
    /// `round(k (L - 1) / (count - 1))` for `k = 0..count`.
    pub fn subsample(&self, count: usize) -> Scanpath {
        let len = self.points.len();
        let points = match count {
            0 => return self.clone(),
            1 => vec![self.points[0]],
            _ => (0..count)
                .map(|k| {
                    let idx = (k as f64 * (len - 1) as f64 / (count - 1) as f64).round() as usize;
                    self.points[idx.min(len - 1)]
                })
                .collect(),
        };
        Scanpath {
            label: self.label.clone(),
            points,
        }
    }
}

impl From<&ViewportSequence> for Scanpath {
    fn from(seq: &ViewportSequence) -> Self {
        Scanpath {
            label: format!("seq{}", seq.stream),
            points: seq.centers.clone(),
        }
    }
}

/// Unit-cost edit distance between two token strings.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between the region-token strings of two paths.
pub fn lev(a: &Scanpath, b: &Scanpath) -> f64 {
    edit_distance(&a.tokens(), &b.tokens()) as f64
}

/// Unconstrained DTW over a custom local cost.
pub fn dtw_by<T, F: Fn(&T, &T) -> f64>(a: &[T], b: &[T], cost: F) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![f64::INFINITY; m];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j - 1].min(prev[j]).min(cur[j - 1]),
            };
            cur[j] = best + cost(x, y);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// DTW with great-circle degrees as the local cost.
pub fn dtw(a: &Scanpath, b: &Scanpath) -> f64 {
    dtw_by(&a.points, &b.points, |x, y| great_circle_deg(*x, *y))
}

/// Cross-recurrence percentage.
///
/// A point recurs when some point of the other path lies strictly closer
/// than `threshold` degrees. The count is the smaller of the recurrent
/// points of `a` and of `b`, normalized by the shorter length, so the value
/// lies in `[0, 100]` and is symmetric.
pub fn rec(a: &Scanpath, b: &Scanpath, threshold: f64) -> Result<f64> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidThreshold(threshold));
    }
    let mut rows = vec![false; a.len()];
    let mut cols = vec![false; b.len()];
    for (i, p) in a.points.iter().enumerate() {
        for (j, q) in b.points.iter().enumerate() {
            if great_circle_deg(*p, *q) < threshold {
                rows[i] = true;
                cols[j] = true;
            }
        }
    }
    let count = |v: &[bool]| v.iter().filter(|x| **x).count();
    let hits = count(&rows).min(count(&cols));
    Ok(100.0 * hits as f64 / a.len().min(b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Lev,
    Dtw,
    Rec,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Lev, Metric::Dtw, Metric::Rec];

    pub fn eval(self, a: &Scanpath, b: &Scanpath, rec_threshold: f64) -> Result<f64> {
        match self {
            Metric::Lev => Ok(lev(a, b)),
            Metric::Dtw => Ok(dtw(a, b)),
            Metric::Rec => rec(a, b, rec_threshold),
        }
    }
}

/// Per-pair values of `f(pseudo[i], gt[j])`, row-major over `pseudo`.
pub fn pair_matrix(
    pseudo: &[Scanpath],
    gt: &[Scanpath],
    metric: Metric,
    rec_threshold: f64,
) -> Result<Vec<Vec<f64>>> {
    pseudo
        .iter()
        .map(|p| {
            gt.iter()
                .map(|g| metric.eval(p, g, rec_threshold))
                .collect()
        })
        .collect()
}

/// `1/(N_P N_G) * sum_i sum_j f(pseudo_i, gt_j)`.
pub fn pairwise_average(
    pseudo: &[Scanpath],
    gt: &[Scanpath],
    metric: Metric,
    rec_threshold: f64,
) -> Result<f64> {
    if pseudo.is_empty() || gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let matrix = pair_matrix(pseudo, gt, metric, rec_threshold)?;
    Ok(mean_of_matrix(&matrix))
}

fn mean_of_matrix(matrix: &[Vec<f64>]) -> f64 {
    let n: usize = matrix.iter().map(Vec::len).sum();
    matrix.iter().flatten().sum::<f64>() / n as f64
}

/// Mean of `f(gt_i, gt_j)` over ordered pairs `i != j`.
pub fn human_baseline(gt: &[Scanpath], metric: Metric, rec_threshold: f64) -> Result<f64> {
    if gt.len() < 2 {
        return Err(Error::TooFewPaths(gt.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in gt.iter().enumerate() {
        for (j, b) in gt.iter().enumerate() {
            if i != j {
                total += metric.eval(a, b, rec_threshold)?;
                pairs += 1;
            }
        }
    }
    Ok(total / pairs as f64)
}

/// Uniform point on the sphere from two 53-bit uniforms.
fn uniform_point<R: RngCore + ?Sized>(rng: &mut R) -> SphereCoord {
    let unit = |rng: &mut R| (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let lon = -180.0 + 360.0 * unit(rng);
    let lat = (2.0 * unit(rng) - 1.0).clamp(-1.0, 1.0).asin().to_degrees();
    SphereCoord::new(lat, lon).expect("finite by construction")
}

/// `count` paths of `length` points drawn uniformly on the sphere.
///
/// Path `i` draws from stream `i` of `seed`, longitude before latitude.
pub fn random_baseline(count: usize, length: usize, seed: u64) -> Result<Vec<Scanpath>> {
    if count == 0 || length == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = sequence_rng(seed, i as u64);
            Scanpath {
                label: format!("random{i}"),
                points: (0..length).map(|_| uniform_point(&mut rng)).collect(),
            }
        })
        .collect())
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricReport {
    pub method: String,
    pub lev: f64,
    pub dtw: f64,
    pub rec: f64,
    pub pair_count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_pair: Option<PerPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPair {
    pub lev: Vec<Vec<f64>>,
    pub dtw: Vec<Vec<f64>>,
    pub rec: Vec<Vec<f64>>,
}

/// Averages every metric of `pseudo` against `gt`.
pub fn compare(
    method: impl Into<String>,
    pseudo: &[Scanpath],
    gt: &[Scanpath],
    rec_threshold: f64,
    keep_pairs: bool,
) -> Result<MetricReport> {
    if pseudo.is_empty() || gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let lev_m = pair_matrix(pseudo, gt, Metric::Lev, rec_threshold)?;
    let dtw_m = pair_matrix(pseudo, gt, Metric::Dtw, rec_threshold)?;
    let rec_m = pair_matrix(pseudo, gt, Metric::Rec, rec_threshold)?;
    Ok(MetricReport {
        method: method.into(),
        lev: mean_of_matrix(&lev_m),
        dtw: mean_of_matrix(&dtw_m),
        rec: mean_of_matrix(&rec_m),
        pair_count: pseudo.len() * gt.len(),
        per_pair: keep_pairs.then_some(PerPair {
            lev: lev_m,
            dtw: dtw_m,
            rec: rec_m,
        }),
    })
}

/// Human baseline row over ordered pairs of distinct reference paths.
pub fn human_report(gt: &[Scanpath], rec_threshold: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        method: "Human Baseline".into(),
        lev: human_baseline(gt, Metric::Lev, rec_threshold)?,
        dtw: human_baseline(gt, Metric::Dtw, rec_threshold)?,
        rec: human_baseline(gt, Metric::Rec, rec_threshold)?,
        pair_count: gt.len() * (gt.len() - 1),
        per_pair: None,
    })
}

/// The three-row comparison: random baseline, the evaluated method, and
/// the human baseline when at least two reference paths exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluationTable {
    pub rec_threshold: f64,
    pub rows: Vec<MetricReport>,
}

pub fn evaluate(
    method: &str,
    pseudo: &[Scanpath],
    gt: &[Scanpath],
    rec_threshold: f64,
    seed: u64,
) -> Result<EvaluationTable> {
    if pseudo.is_empty() || gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let length = pseudo.iter().map(Scanpath::len).max().unwrap_or(1);
    let random = random_baseline(pseudo.len(), length, seed)?;
    let mut rows = vec![
        compare("Random Baseline", &random, gt, rec_threshold, false)?,
        compare(method, pseudo, gt, rec_threshold, false)?,
    ];
    match human_report(gt, rec_threshold) {
        Ok(row) => rows.push(row),
        Err(Error::TooFewPaths(n)) => {
            log::warn!("human baseline omitted: {n} reference path(s), need at least 2");
        }
        Err(e) => return Err(e),
    }
    Ok(EvaluationTable {
        rec_threshold,
        rows,
    })
}
