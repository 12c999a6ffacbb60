//! Recursive probability sampling of viewport sequences.
//!
//! Each step renders the viewport at the current center, splits it into a
//! 3x3 patch grid and scores the eight transition directions twice:
//!
//! * a content prior favouring the equator, with inhibition of return on
//!   the direction pointing back at the previous center;
//! * a detail term, the softmax of the gray-level entropy of each
//!   direction's neighbour patch.
//!
//! The two are multiplied, scaled by `beta`, passed through a softmax and
//! the next center is drawn from the result.
//!
//! # Random streams
//!
//! Sequence `i` of a run seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` with its stream set to `i` (see
//! [`sequence_rng`]). A draw takes one `u64`, keeps its top 53 bits as a
//! uniform `u` in `[0, 1)` and returns the first index whose cumulative
//! probability exceeds `u`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::erp::{entropy_of, ErpImage, GrayPatch, PatchGrid, Viewport, ViewportProjector};
use crate::error::{Error, Result};
use crate::sphere::{
    great_circle_deg, neighbor_coords, Direction, FieldOfView, SphereCoord, TransitionStep,
};

/// Sampling parameters. Defaults reproduce the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpsConfig {
    /// Number of sequences.
    pub n: usize,
    /// Viewports per sequence.
    pub m: usize,
    pub step: TransitionStep,
    pub fov: FieldOfView,
    /// Square viewport side in pixels.
    pub size: u32,
    /// Inhibition-of-return factor on the back-pointing direction.
    pub gamma: f64,
    /// Scale applied to the combined probabilities before the final softmax.
    pub beta: f64,
    /// Std of the equator prior over latitude normalized to [-1, 1].
    pub sigma: f64,
    pub seed: u64,
}

impl Default for RpsConfig {
    fn default() -> Self {
        Self {
            n: 3,
            m: 5,
            step: TransitionStep::default(),
            fov: FieldOfView::default(),
            size: 224,
            gamma: 0.7,
            beta: 100.0,
            sigma: 0.2,
            seed: 0,
        }
    }
}

impl RpsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.size == 0 || !self.size.is_multiple_of(4) {
            return Err(Error::IndivisibleSize {
                width: self.size,
                height: self.size,
            });
        }
        TransitionStep::new(self.step.dlat, self.step.dlon)?;
        FieldOfView::new(self.fov.horizontal, self.fov.vertical)?;
        Ok(())
    }
}

/// A distribution over the eight transition directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionProbs([f64; 8]);

impl DirectionProbs {
    pub const UNIFORM: DirectionProbs = DirectionProbs([0.125; 8]);

    /// Accepts nonnegative values summing to one within 1e-9.
    pub fn new(values: [f64; 8]) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if values.iter().any(|v| v.is_nan() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "not a distribution: {values:?}"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64; 8] {
        &self.0
    }

    pub fn get(&self, d: Direction) -> f64 {
        self.0[d.index()]
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; 8]) -> DirectionProbs {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.map(|l| (l - max).exp());
    let sum: f64 = exps.iter().sum();
    DirectionProbs(exps.map(|e| e / sum))
}

/// Unnormalized equator-prior weight `exp(-(lat/90)^2 / (2 sigma^2))` of
/// each candidate.
pub fn equator_bias_weights(coords: &[SphereCoord; 8], sigma: f64) -> [f64; 8] {
    equator_log_weights(coords, sigma).map(f64::exp)
}

fn equator_log_weights(coords: &[SphereCoord; 8], sigma: f64) -> [f64; 8] {
    coords.map(|c| {
        let z = c.lat() / 90.0;
        -z * z / (2.0 * sigma * sigma)
    })
}

/// The equator prior normalized over the eight candidates: a softmax over
/// the Gaussian log-weights.
pub fn equator_bias_prob(coords: &[SphereCoord; 8], sigma: f64) -> DirectionProbs {
    softmax(&equator_log_weights(coords, sigma))
}

/// Index of the candidate nearest the previous center, lowest index on ties.
pub fn back_pointing_index(coords: &[SphereCoord; 8], previous: SphereCoord) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in coords.iter().enumerate() {
        let d = great_circle_deg(*c, previous);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Content-guided probabilities: the equator prior with the back-pointing
/// direction (if any) scaled by `gamma`, renormalized.
pub fn csp(
    coords: &[SphereCoord; 8],
    back: Option<usize>,
    gamma: f64,
    sigma: f64,
) -> DirectionProbs {
    let mut logits = equator_log_weights(coords, sigma);
    if let Some(z) = back {
        logits[z] += gamma.ln();
    }
    softmax(&logits)
}

/// Detail-guided probabilities: softmax of the neighbour patch entropies in
/// bits. The central patch does not take part.
pub fn dsp(patches: &PatchGrid) -> DirectionProbs {
    dsp_from_neighbors(&patches.neighbors)
}

fn dsp_from_neighbors(neighbors: &[GrayPatch; 8]) -> DirectionProbs {
    softmax(
        &neighbors
            .each_ref()
            .map(|p| entropy_of(&p.data).unwrap_or(0.0)),
    )
}

/// `softmax(beta * p_dsp * p_csp)`, elementwise.
pub fn combine(p_csp: &DirectionProbs, p_dsp: &DirectionProbs, beta: f64) -> DirectionProbs {
    let mut logits = [0.0; 8];
    for (i, l) in logits.iter_mut().enumerate() {
        *l = p_dsp.0[i] * p_csp.0[i] * beta;
    }
    softmax(&logits)
}

/// Draws an index from a categorical distribution with one `u64` from `rng`.
pub fn sample_index<R: RngCore + ?Sized>(probs: &DirectionProbs, rng: &mut R) -> usize {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.0.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

pub fn combine_and_select<R: RngCore + ?Sized>(
    p_csp: &DirectionProbs,
    p_dsp: &DirectionProbs,
    beta: f64,
    rng: &mut R,
) -> usize {
    sample_index(&combine(p_csp, p_dsp, beta), rng)
}

/// Random stream for sequence `index` of a run seeded with `seed`.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One generated sequence of viewport centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportSequence {
    pub start: SphereCoord,
    pub centers: Vec<SphereCoord>,
    /// Direction index taken after each center but the last.
    pub chosen: Vec<usize>,
    #[serde(skip)]
    pub seed: u64,
    #[serde(skip)]
    pub stream: u64,
}

impl ViewportSequence {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Checks that every center follows from its predecessor by the recorded
    /// direction.
    pub fn is_consistent(&self, step: TransitionStep) -> bool {
        if self.centers.first() != Some(&self.start) || self.chosen.len() + 1 != self.centers.len()
        {
            return false;
        }
        self.chosen.iter().enumerate().all(|(t, &idx)| {
            idx < 8 && neighbor_coords(self.centers[t], step)[idx] == self.centers[t + 1]
        })
    }
}

/// Upper bound on memoized detail terms per generator.
const DSP_CACHE_LIMIT: usize = 1 << 16;

/// Runs the sampler over one panorama, caching viewport projectors by
/// center latitude and detail terms by center.
pub struct Generator<'a> {
    img: &'a ErpImage,
    cfg: RpsConfig,
    projectors: Mutex<HashMap<u64, Arc<ViewportProjector>>>,
    dsp_cache: Mutex<HashMap<(u64, u64), DirectionProbs>>,
}

impl<'a> Generator<'a> {
    pub fn new(img: &'a ErpImage, cfg: RpsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            img,
            cfg,
            projectors: Mutex::new(HashMap::new()),
            dsp_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &RpsConfig {
        &self.cfg
    }

    fn projector(&self, lat: f64) -> Result<Arc<ViewportProjector>> {
        let key = lat.to_bits();
        if let Some(p) = self.projectors.lock().unwrap().get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(ViewportProjector::for_image(
            self.img,
            lat,
            self.cfg.fov,
            self.cfg.size,
            self.cfg.size,
        )?);
        self.projectors
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&p));
        Ok(p)
    }

    /// Renders the viewport centered at `center`.
    pub fn viewport(&self, center: SphereCoord) -> Result<Viewport> {
        self.projector(center.lat())?.render(self.img, center.lon())
    }

    /// Detail term of the viewport at `center`.
    fn detail(&self, center: SphereCoord) -> Result<DirectionProbs> {
        let key = (center.lat().to_bits(), center.lon().to_bits());
        if let Some(p) = self.dsp_cache.lock().unwrap().get(&key) {
            return Ok(*p);
        }
        let p = dsp(&crate::erp::split_patches(&self.viewport(center)?)?);
        let mut cache = self.dsp_cache.lock().unwrap();
        if cache.len() < DSP_CACHE_LIMIT {
            cache.insert(key, p);
        }
        Ok(p)
    }

    /// Probabilities for the step leaving `center`.
    pub fn step_distribution(
        &self,
        center: SphereCoord,
        previous: Option<SphereCoord>,
    ) -> Result<(DirectionProbs, DirectionProbs, DirectionProbs)> {
        let p_dsp = self.detail(center)?;
        let coords = neighbor_coords(center, self.cfg.step);
        let back = previous.map(|p| back_pointing_index(&coords, p));
        let p_csp = csp(&coords, back, self.cfg.gamma, self.cfg.sigma);
        let p_final = combine(&p_csp, &p_dsp, self.cfg.beta);
        Ok((p_csp, p_dsp, p_final))
    }

    pub fn sequence<R: RngCore + ?Sized>(
        &self,
        start: SphereCoord,
        rng: &mut R,
    ) -> Result<ViewportSequence> {
        let mut centers = Vec::with_capacity(self.cfg.m);
        let mut chosen = Vec::with_capacity(self.cfg.m.saturating_sub(1));
        let mut current = start;
        let mut previous = None;
        centers.push(current);
        for _ in 1..self.cfg.m {
            let (_, _, p_final) = self.step_distribution(current, previous)?;
            let idx = sample_index(&p_final, rng);
            let next = neighbor_coords(current, self.cfg.step)[idx];
            chosen.push(idx);
            previous = Some(current);
            current = next;
            centers.push(current);
        }
        Ok(ViewportSequence {
            start,
            centers,
            chosen,
            seed: 0,
            stream: 0,
        })
    }

    /// Sequence `i` starts at `starts[i]` and draws from
    /// `sequence_rng(cfg.seed, i)`.
    pub fn all(&self, starts: &[SphereCoord]) -> Result<Vec<ViewportSequence>> {
        starts
            .par_iter()
            .enumerate()
            .map(|(i, &start)| {
                let mut rng = sequence_rng(self.cfg.seed, i as u64);
                let mut seq = self.sequence(start, &mut rng)?;
                seq.seed = self.cfg.seed;
                seq.stream = i as u64;
                Ok(seq)
            })
            .collect()
    }
}

pub fn generate_sequence<R: RngCore + ?Sized>(
    img: &ErpImage,
    start: SphereCoord,
    cfg: &RpsConfig,
    rng: &mut R,
) -> Result<ViewportSequence> {
    let mut seq = Generator::new(img, cfg.clone())?.sequence(start, rng)?;
    seq.seed = cfg.seed;
    Ok(seq)
}

pub fn generate_all(
    img: &ErpImage,
    starts: &[SphereCoord],
    cfg: &RpsConfig,
) -> Result<Vec<ViewportSequence>> {
    Generator::new(img, cfg.clone())?.all(starts)
}

/// `cfg.n` copies of `start`.
pub fn uniform_starts(cfg: &RpsConfig, start: SphereCoord) -> Vec<SphereCoord> {
    vec![start; cfg.n]
}
