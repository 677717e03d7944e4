//! HMM event recognition over tracks, and the joint lattice that chooses the
//! track and the state sequence together.
//!
//! The joint objective over detections `j_t` and states `k_t` is
//!
//! ```text
//! sum_t f(b_t) + h(k_t, b_t)  +  sum_{t>=2} g(b_{t-1}, b_t) + a(k_{t-1}, k_t)  +  init(k_1)
//! ```
//!
//! and its Viterbi lattice has one node per (detection, state) pair. The
//! inner maximization is factored so that the coherency `g` is evaluated once
//! per detection pair and never per state pair, which also lets the `g` table
//! be shared by every event model run on the same frames ([`GCache`]).

use rayon::prelude::*;

use crate::detection::{FrameDetections, ScoredBox};
use crate::error::{Error, Result};
use crate::tracking::{self, check_trackable, track_from_indices, CoherencyParams, Track};

/// Length of the per-detection feature vector: normalized center x and y,
/// log width and log height.
pub const FEATURES: usize = 4;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Frame dimensions used to normalize box centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSize {
    pub width: f64,
    pub height: f64,
}

impl Default for FrameSize {
    fn default() -> Self {
        FrameSize {
            width: 1280.0,
            height: 720.0,
        }
    }
}

impl FrameSize {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite() {
            Ok(FrameSize { width, height })
        } else {
            Err(Error::InvalidParameter(format!(
                "frame size must be positive, got {width}x{height}"
            )))
        }
    }
}

/// Static features of a detection: `(cx / W, cy / H, ln w, ln h)`.
pub fn box_features(b: &ScoredBox, frame: FrameSize) -> [f64; FEATURES] {
    [b.cx / frame.width, b.cy / frame.height, b.w.ln(), b.h.ln()]
}

/// Emission distribution of one HMM state.
#[derive(Debug, Clone, PartialEq)]
pub enum StateEmission {
    /// Diagonal Gaussian over [`box_features`].
    Gaussian {
        mean: [f64; FEATURES],
        var: [f64; FEATURES],
    },
    /// The same log-probability for every detection.
    Constant(f64),
}

impl StateEmission {
    pub fn logprob(&self, features: &[f64; FEATURES]) -> f64 {
        match self {
            StateEmission::Gaussian { mean, var } => {
                let mut lp = 0.0;
                for i in 0..FEATURES {
                    let d = features[i] - mean[i];
                    lp -= 0.5 * (LN_2PI + var[i].ln()) + d * d / (2.0 * var[i]);
                }
                lp
            }
            StateEmission::Constant(c) => *c,
        }
    }
}

/// Event model: `K` states with log initial, log transition and per-state
/// emission distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    name: String,
    log_init: Vec<f64>,
    /// Row-major `K x K`; row is the source state.
    log_trans: Vec<f64>,
    emissions: Vec<StateEmission>,
}

const STOCHASTIC_TOL: f64 = 1e-6;

fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl HmmModel {
    pub fn new(
        name: impl Into<String>,
        log_init: Vec<f64>,
        log_trans: Vec<Vec<f64>>,
        emissions: Vec<StateEmission>,
    ) -> Result<Self> {
        let name = name.into();
        let k = emissions.len();
        if k == 0 {
            return Err(Error::InvalidModel(format!("model '{name}' has no states")));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidModel(format!(
                "model name '{name}' must be non-empty without whitespace"
            )));
        }
        if log_init.len() != k || log_trans.len() != k || log_trans.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidModel(format!(
                "model '{name}': init and transition sizes must match {k} states"
            )));
        }
        let check_row = |row: &[f64], what: &str| -> Result<()> {
            if row.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::InvalidModel(format!("model '{name}': {what} has NaN or +inf")));
            }
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            if (total - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidModel(format!(
                    "model '{name}': {what} sums to {total}, expected 1"
                )));
            }
            Ok(())
        };
        check_row(&log_init, "initial distribution")?;
        for (i, row) in log_trans.iter().enumerate() {
            check_row(row, &format!("transition row {i}"))?;
        }
        for (i, e) in emissions.iter().enumerate() {
            match e {
                StateEmission::Gaussian { mean, var } => {
                    if var.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                        return Err(Error::InvalidModel(format!(
                            "model '{name}': state {i} variances must be positive"
                        )));
                    }
                    if mean.iter().any(|m| !m.is_finite()) {
                        return Err(Error::InvalidModel(format!(
                            "model '{name}': state {i} mean must be finite"
                        )));
                    }
                }
                StateEmission::Constant(c) => {
                    if !c.is_finite() {
                        return Err(Error::InvalidModel(format!(
                            "model '{name}': state {i} constant emission must be finite"
                        )));
                    }
                }
            }
        }
        Ok(HmmModel {
            name,
            log_init,
            log_trans: log_trans.into_iter().flatten().collect(),
            emissions,
        })
    }

    /// Model with a uniform initial distribution.
    pub fn with_uniform_init(
        name: impl Into<String>,
        log_trans: Vec<Vec<f64>>,
        emissions: Vec<StateEmission>,
    ) -> Result<Self> {
        let k = emissions.len().max(1);
        Self::new(name, vec![-(k as f64).ln(); k], log_trans, emissions)
    }

    /// Single state emitting every detection with the same log-probability.
    pub fn constant(name: impl Into<String>, log_emission: f64) -> Result<Self> {
        Self::new(
            name,
            vec![0.0],
            vec![vec![0.0]],
            vec![StateEmission::Constant(log_emission)],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> usize {
        self.emissions.len()
    }

    pub fn log_init(&self) -> &[f64] {
        &self.log_init
    }

    /// Log-probability of moving from state `from` to state `to`.
    pub fn log_trans(&self, from: usize, to: usize) -> f64 {
        self.log_trans[from * self.states() + to]
    }

    pub fn log_trans_row(&self, from: usize) -> &[f64] {
        let k = self.states();
        &self.log_trans[from * k..(from + 1) * k]
    }

    pub fn emissions(&self) -> &[StateEmission] {
        &self.emissions
    }

    fn emission_row(&self, b: &ScoredBox, frame: FrameSize) -> Vec<f64> {
        let feats = box_features(b, frame);
        self.emissions.iter().map(|e| e.logprob(&feats)).collect()
    }
}

/// Log-probability of state `k` (0-based) emitting detection `b`.
pub fn emission_logprob(model: &HmmModel, k: usize, b: &ScoredBox, frame: FrameSize) -> f64 {
    model.emissions[k].logprob(&box_features(b, frame))
}

/// Log-likelihood of the detections along a fixed track, summed over all
/// state sequences (forward algorithm in the log domain).
pub fn forward_log_likelihood(model: &HmmModel, track: &[ScoredBox], frame: FrameSize) -> f64 {
    let Some(first) = track.first() else {
        return 0.0;
    };
    let k = model.states();
    let mut alpha: Vec<f64> = model
        .emission_row(first, frame)
        .iter()
        .zip(&model.log_init)
        .map(|(h, i)| i + h)
        .collect();
    let mut next = vec![0.0; k];
    for b in &track[1..] {
        let h = model.emission_row(b, frame);
        for (to, n) in next.iter_mut().enumerate() {
            let incoming = (0..k).map(|from| alpha[from] + model.log_trans(from, to));
            *n = h[to] + log_sum_exp(incoming);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    log_sum_exp(alpha.iter().copied())
}

/// Most probable state sequence along a fixed track and its log score.
/// Ties go to the smaller state index, latest frame first.
pub fn map_states(model: &HmmModel, track: &[ScoredBox], frame: FrameSize) -> (Vec<usize>, f64) {
    let Some(first) = track.first() else {
        return (Vec::new(), 0.0);
    };
    let k = model.states();
    let mut delta: Vec<f64> = model
        .emission_row(first, frame)
        .iter()
        .zip(&model.log_init)
        .map(|(h, i)| i + h)
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(track.len());
    for b in &track[1..] {
        let h = model.emission_row(b, frame);
        let mut next = vec![0.0; k];
        let mut bp = vec![0; k];
        for to in 0..k {
            let mut best = f64::NEG_INFINITY;
            for (from, &d) in delta.iter().enumerate() {
                let v = model.log_trans(from, to) + d;
                if v > best {
                    best = v;
                    bp[to] = from;
                }
            }
            next[to] = h[to] + best;
        }
        delta = next;
        back.push(bp);
    }
    let mut state = 0;
    for (i, &d) in delta.iter().enumerate() {
        if d > delta[state] {
            state = i;
        }
    }
    let score = delta[state];
    let mut states = vec![0; track.len()];
    for t in (0..track.len()).rev() {
        states[t] = state;
        if t > 0 {
            state = back[t - 1][state];
        }
    }
    (states, score)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointParams {
    pub coherency: CoherencyParams,
    pub frame_size: FrameSize,
}

/// The joint objective split into its sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub a: f64,
    pub init: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.f + self.g + self.h + self.a + self.init
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub track: Track,
    pub states: Vec<usize>,
    pub objective: f64,
    pub event: String,
    pub terms: ObjectiveTerms,
}

/// Recomputes every term of the joint objective for a given track and state
/// sequence over detection boxes.
pub fn joint_terms(boxes: &[ScoredBox], states: &[usize], model: &HmmModel, params: &JointParams) -> ObjectiveTerms {
    let mut terms = ObjectiveTerms::default();
    for (t, (b, &k)) in boxes.iter().zip(states).enumerate() {
        terms.f += b.score;
        terms.h += emission_logprob(model, k, b, params.frame_size);
        if t == 0 {
            terms.init = model.log_init[k];
        } else {
            terms.g += tracking::coherency(&boxes[t - 1], b, &params.coherency);
            terms.a += model.log_trans(states[t - 1], k);
        }
    }
    terms
}

/// Coherency values for every adjacent-frame detection pair, computed once
/// and shared by all event models run on the same frames.
#[derive(Debug, Clone)]
pub struct GCache {
    /// Entry `t - 1` holds `g(b^{t-1}_{j'}, b^t_j)` at `j' * J_t + j`.
    tables: Vec<Vec<f64>>,
    evaluations: usize,
}

impl GCache {
    pub fn build(frames: &[FrameDetections], params: &CoherencyParams) -> Result<Self> {
        check_trackable(frames)?;
        let mut evaluations = 0;
        let tables = frames
            .windows(2)
            .map(|w| {
                let (prev, cur) = (w[0].boxes(), w[1].boxes());
                evaluations += prev.len() * cur.len();
                prev.iter()
                    .flat_map(|p| cur.iter().map(move |b| tracking::coherency(p, b, params)))
                    .collect()
            })
            .collect();
        Ok(GCache { tables, evaluations })
    }

    /// Number of `g` evaluations performed to fill the cache.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn table(&self, t: usize) -> &[f64] {
        &self.tables[t - 1]
    }
}

fn finish_joint(
    frames: &[FrameDetections],
    indices: Vec<usize>,
    states: Vec<usize>,
    objective: f64,
    model: &HmmModel,
    params: &JointParams,
) -> Result<JointResult> {
    let track = track_from_indices(frames, &indices, &params.coherency)?;
    let terms = joint_terms(&track.picks, &states, model, params);
    Ok(JointResult {
        track,
        states,
        objective,
        event: model.name.clone(),
        terms,
    })
}

fn emission_table(frame: &FrameDetections, model: &HmmModel, size: FrameSize) -> Vec<Vec<f64>> {
    frame
        .boxes()
        .iter()
        .map(|b| {
            let fh = model.emission_row(b, size);
            fh.into_iter().map(|h| b.score + h).collect()
        })
        .collect()
}

/// Joint track and state sequence maximizing the combined objective.
pub fn joint_track_event(frames: &[FrameDetections], model: &HmmModel, params: &JointParams) -> Result<JointResult> {
    let cache = GCache::build(frames, &params.coherency)?;
    joint_track_event_cached(frames, model, params, &cache)
}

/// [`joint_track_event`] against a prebuilt [`GCache`] for `frames`.
pub fn joint_track_event_cached(
    frames: &[FrameDetections],
    model: &HmmModel,
    params: &JointParams,
    cache: &GCache,
) -> Result<JointResult> {
    check_trackable(frames)?;
    if cache.tables.len() + 1 != frames.len() {
        return Err(Error::DimensionMismatch("g cache built for other frames".into()));
    }
    let k = model.states();

    // delta[j * K + k]
    let fh0 = emission_table(&frames[0], model, params.frame_size);
    let mut delta: Vec<f64> = fh0
        .iter()
        .flat_map(|row| row.iter().zip(&model.log_init).map(|(v, i)| v + i))
        .collect();
    let mut back: Vec<Vec<(usize, usize)>> = Vec::with_capacity(frames.len());

    for t in 1..frames.len() {
        let jp_count = frames[t - 1].len();
        let j_count = frames[t].len();
        let g = cache.table(t);

        // Best predecessor state for each (previous detection, current state).
        let mut m = vec![f64::NEG_INFINITY; jp_count * k];
        let mut m_arg = vec![0usize; jp_count * k];
        for jp in 0..jp_count {
            for to in 0..k {
                let cell = jp * k + to;
                for from in 0..k {
                    let v = model.log_trans(from, to) + delta[jp * k + from];
                    if v > m[cell] {
                        m[cell] = v;
                        m_arg[cell] = from;
                    }
                }
            }
        }

        let fh = emission_table(&frames[t], model, params.frame_size);
        let mut next = vec![0.0; j_count * k];
        let mut bp = vec![(0, 0); j_count * k];
        for j in 0..j_count {
            for to in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = (0, 0);
                for jp in 0..jp_count {
                    let v = g[jp * j_count + j] + m[jp * k + to];
                    if v > best {
                        best = v;
                        arg = (jp, m_arg[jp * k + to]);
                    }
                }
                next[j * k + to] = fh[j][to] + best;
                bp[j * k + to] = arg;
            }
        }
        delta = next;
        back.push(bp);
    }

    let (indices, states, objective) = backtrack_joint(&delta, &back, k, frames.len());
    finish_joint(frames, indices, states, objective, model, params)
}

fn backtrack_joint(delta: &[f64], back: &[Vec<(usize, usize)>], k: usize, len: usize) -> (Vec<usize>, Vec<usize>, f64) {
    let mut node = 0;
    for (i, &d) in delta.iter().enumerate() {
        if d > delta[node] {
            node = i;
        }
    }
    let objective = delta[node];
    let (mut j, mut s) = (node / k, node % k);
    let mut indices = vec![0; len];
    let mut states = vec![0; len];
    for t in (0..len).rev() {
        indices[t] = j;
        states[t] = s;
        if t > 0 {
            (j, s) = back[t - 1][j * k + s];
        }
    }
    (indices, states, objective)
}

/// The same lattice with the unfactored inner maximization over
/// (previous detection, previous state) pairs, calling `g` for every pair.
/// Returns the result and the number of `g` evaluations.
pub fn joint_track_event_unfactored(
    frames: &[FrameDetections],
    model: &HmmModel,
    params: &JointParams,
) -> Result<(JointResult, usize)> {
    check_trackable(frames)?;
    let k = model.states();
    let mut g_evals = 0;

    let fh0 = emission_table(&frames[0], model, params.frame_size);
    let mut delta: Vec<f64> = fh0
        .iter()
        .flat_map(|row| row.iter().zip(&model.log_init).map(|(v, i)| v + i))
        .collect();
    let mut back: Vec<Vec<(usize, usize)>> = Vec::with_capacity(frames.len());

    for t in 1..frames.len() {
        let prev = frames[t - 1].boxes();
        let cur = frames[t].boxes();
        let fh = emission_table(&frames[t], model, params.frame_size);
        let mut next = vec![0.0; cur.len() * k];
        let mut bp = vec![(0, 0); cur.len() * k];
        for (j, b) in cur.iter().enumerate() {
            for to in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = (0, 0);
                for (jp, p) in prev.iter().enumerate() {
                    for from in 0..k {
                        let g = tracking::coherency(p, b, &params.coherency);
                        g_evals += 1;
                        let v = g + (model.log_trans(from, to) + delta[jp * k + from]);
                        if v > best {
                            best = v;
                            arg = (jp, from);
                        }
                    }
                }
                next[j * k + to] = fh[j][to] + best;
                bp[j * k + to] = arg;
            }
        }
        delta = next;
        back.push(bp);
    }

    let (indices, states, objective) = backtrack_joint(&delta, &back, k, frames.len());
    Ok((
        finish_joint(frames, indices, states, objective, model, params)?,
        g_evals,
    ))
}

fn rank_by_score<T>(items: &mut [T], score: impl Fn(&T) -> f64, name: impl Fn(&T) -> &str) {
    items.sort_by(|a, b| score(b).total_cmp(&score(a)).then_with(|| name(a).cmp(name(b))));
}

/// Joint results for several event models, best first. The `g` table is
/// built once and shared by all models.
#[derive(Debug, Clone)]
pub struct MultiModelRun {
    pub results: Vec<JointResult>,
    pub g_evaluations: usize,
}

pub fn joint_multi_model(
    frames: &[FrameDetections],
    models: &[HmmModel],
    params: &JointParams,
) -> Result<MultiModelRun> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let cache = GCache::build(frames, &params.coherency)?;
    let mut results = models
        .par_iter()
        .map(|m| joint_track_event_cached(frames, m, params, &cache))
        .collect::<Result<Vec<_>>>()?;
    rank_by_score(&mut results, |r| r.objective, |r| &r.event);
    Ok(MultiModelRun {
        results,
        g_evaluations: cache.evaluations(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifyMode {
    /// Forward likelihood of a fixed track.
    MlOnFixedTrack,
    /// MAP state-sequence score of a fixed track.
    MapOnFixedTrack,
    /// Joint track and state optimization.
    Joint,
}

impl std::str::FromStr for ClassifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(ClassifyMode::MlOnFixedTrack),
            "map" => Ok(ClassifyMode::MapOnFixedTrack),
            "joint" => Ok(ClassifyMode::Joint),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// What to classify: an already fixed track, or raw per-frame detections.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    Track(&'a [ScoredBox]),
    Frames(&'a [FrameDetections]),
}

/// Ranks event labels by score, best first; ties go to the alphabetically
/// smaller name.
///
/// The fixed-track modes track raw frames first with plain Viterbi
/// tracking. Joint mode over a fixed track treats each pick as its frame's
/// only detection.
pub fn classify(
    evidence: Evidence<'_>,
    models: &[HmmModel],
    mode: ClassifyMode,
    params: &JointParams,
) -> Result<Vec<(String, f64)>> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let mut ranked: Vec<(String, f64)> = match mode {
        ClassifyMode::MlOnFixedTrack | ClassifyMode::MapOnFixedTrack => {
            let owned;
            let track: &[ScoredBox] = match evidence {
                Evidence::Track(t) => t,
                Evidence::Frames(frames) => {
                    owned = tracking::viterbi_track(frames, &params.coherency)?.picks;
                    &owned
                }
            };
            if track.is_empty() {
                return Err(Error::NoFrames);
            }
            models
                .iter()
                .map(|m| {
                    let score = match mode {
                        ClassifyMode::MlOnFixedTrack => forward_log_likelihood(m, track, params.frame_size),
                        _ => map_states(m, track, params.frame_size).1,
                    };
                    (m.name.clone(), score)
                })
                .collect()
        }
        ClassifyMode::Joint => {
            let owned;
            let frames: &[FrameDetections] = match evidence {
                Evidence::Frames(f) => f,
                Evidence::Track(t) => {
                    owned = t
                        .iter()
                        .map(|b| FrameDetections::new(b.frame, vec![*b]))
                        .collect::<Result<Vec<_>>>()?;
                    &owned
                }
            };
            joint_multi_model(frames, models, params)?
                .results
                .into_iter()
                .map(|r| (r.event, r.objective))
                .collect()
        }
    };
    rank_by_score(&mut ranked, |r| r.1, |r| &r.0);
    Ok(ranked)
}
