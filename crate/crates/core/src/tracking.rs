//! Detection-based tracking: pick one detection per frame maximizing
//!
//! ```text
//! sum_t f(b_t) + sum_{t>=2} g(b_{t-1}, b_t)
//! ```
//!
//! with a Viterbi pass over the per-frame candidate sets, `O(T J^2)`.

use crate::detection::{forward_project, FrameDetections, MotionModel, ScoredBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GForm {
    /// Negative Euclidean distance between centers.
    #[default]
    NegEuclidean,
    /// Negative squared Euclidean distance, the form the distance transform
    /// can accelerate.
    NegSquaredEuclidean,
}

impl std::str::FromStr for GForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "neg-euclidean" => Ok(GForm::NegEuclidean),
            "squared" | "squared-euclidean" | "neg-squared-euclidean" => Ok(GForm::NegSquaredEuclidean),
            other => Err(Error::InvalidParameter(format!("unknown g form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoherencyParams {
    pub motion: MotionModel,
    pub g_form: GForm,
}

/// Temporal coherency of two detections in adjacent frames: the negative
/// (squared) distance between `next`'s center and `prev`'s center projected
/// one frame forward.
pub fn coherency_g(prev: &ScoredBox, next: &ScoredBox, params: &CoherencyParams) -> Result<f64> {
    if next.frame != prev.frame + 1 {
        return Err(Error::FrameMismatch {
            expected: prev.frame + 1,
            found: next.frame,
        });
    }
    Ok(coherency(prev, next, params))
}

pub(crate) fn coherency(prev: &ScoredBox, next: &ScoredBox, params: &CoherencyParams) -> f64 {
    let p = forward_project(prev, params.motion);
    let dx = next.cx - p.cx;
    let dy = next.cy - p.cy;
    let d2 = dx * dx + dy * dy;
    match params.g_form {
        GForm::NegEuclidean => -d2.sqrt(),
        GForm::NegSquaredEuclidean => -d2,
    }
}

/// Per-frame contribution to a track's objective. `g` is zero in the first
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTerms {
    pub f: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub picks: Vec<ScoredBox>,
    /// Index of each pick within its frame's candidate list.
    pub indices: Vec<usize>,
    pub objective: f64,
    pub terms: Vec<FrameTerms>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.picks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.picks.is_empty()
    }

    pub fn f_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.f).sum()
    }

    pub fn g_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.g).sum()
    }
}

/// Checks that `frames` is a non-empty run of consecutive frame indices.
pub(crate) fn check_contiguous(frames: &[FrameDetections]) -> Result<()> {
    let first = frames.first().ok_or(Error::NoFrames)?.frame;
    for (t, f) in frames.iter().enumerate() {
        if f.frame != first + t {
            return Err(Error::FrameMismatch {
                expected: first + t,
                found: f.frame,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_trackable(frames: &[FrameDetections]) -> Result<()> {
    check_contiguous(frames)?;
    if let Some(f) = frames.iter().find(|f| f.is_empty()) {
        return Err(Error::EmptyFrame { frame: f.frame });
    }
    Ok(())
}

/// Builds the [`Track`] for a given choice of one detection per frame, with
/// its objective recomputed term by term.
pub fn track_from_indices(frames: &[FrameDetections], indices: &[usize], params: &CoherencyParams) -> Result<Track> {
    check_contiguous(frames)?;
    if indices.len() != frames.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices for {} frames",
            indices.len(),
            frames.len()
        )));
    }
    let mut picks = Vec::with_capacity(frames.len());
    for (f, &j) in frames.iter().zip(indices) {
        let b = f
            .boxes()
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("frame {} has no detection {j}", f.frame)))?;
        picks.push(*b);
    }
    let terms: Vec<FrameTerms> = picks
        .iter()
        .enumerate()
        .map(|(t, b)| FrameTerms {
            f: b.score,
            g: if t == 0 {
                0.0
            } else {
                coherency(&picks[t - 1], b, params)
            },
        })
        .collect();
    let objective = terms.iter().map(|t| t.f + t.g).sum();
    Ok(Track {
        picks,
        indices: indices.to_vec(),
        objective,
        terms,
    })
}

/// Optimal track over `frames`. Among equal-objective tracks the one with
/// the smaller detection index at the latest differing frame wins.
pub fn viterbi_track(frames: &[FrameDetections], params: &CoherencyParams) -> Result<Track> {
    check_trackable(frames)?;

    let mut delta: Vec<f64> = frames[0].boxes().iter().map(|b| b.score).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(frames.len());
    back.push(Vec::new());

    for t in 1..frames.len() {
        let prev = frames[t - 1].boxes();
        let cur = frames[t].boxes();
        let mut next_delta = Vec::with_capacity(cur.len());
        let mut bp = Vec::with_capacity(cur.len());
        for b in cur {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (jp, p) in prev.iter().enumerate() {
                let v = coherency(p, b, params) + delta[jp];
                if v > best {
                    best = v;
                    arg = jp;
                }
            }
            next_delta.push(b.score + best);
            bp.push(arg);
        }
        delta = next_delta;
        back.push(bp);
    }

    let (mut j, mut objective) = (0, f64::NEG_INFINITY);
    for (i, &d) in delta.iter().enumerate() {
        if d > objective {
            objective = d;
            j = i;
        }
    }
    let mut indices = vec![0; frames.len()];
    for t in (0..frames.len()).rev() {
        indices[t] = j;
        if t > 0 {
            j = back[t][j];
        }
    }
    let mut track = track_from_indices(frames, &indices, params)?;
    track.objective = objective;
    Ok(track)
}

/// Adds forward-projected copies of the previous frame's detections to every
/// frame after the first. When the previous frame had no raw detections its
/// projected copies are carried forward instead, so gaps longer than one
/// frame are bridged. Projected boxes keep their score minus `penalty`.
pub fn augment_with_projections(
    frames: &[FrameDetections],
    motion: MotionModel,
    penalty: f64,
) -> Result<Vec<FrameDetections>> {
    check_contiguous(frames)?;
    motion.validate()?;
    let mut out: Vec<FrameDetections> = Vec::with_capacity(frames.len());
    let mut carried: Vec<ScoredBox> = Vec::new();
    for (t, f) in frames.iter().enumerate() {
        let mut boxes = f.boxes().to_vec();
        if t > 0 {
            let prev = &frames[t - 1];
            let sources: &[ScoredBox] = if prev.is_empty() { &carried } else { prev.boxes() };
            let projected: Vec<ScoredBox> = sources
                .iter()
                .map(|b| ScoredBox {
                    score: b.score - penalty,
                    projected: true,
                    ..forward_project(b, motion)
                })
                .collect();
            boxes.extend_from_slice(&projected);
            carried = projected;
        }
        out.push(FrameDetections::new(f.frame, boxes)?);
    }
    Ok(out)
}

/// [`viterbi_track`] over detections augmented with forward projections of
/// the previous frame's detections. With `project` off this is exactly
/// [`viterbi_track`]. Returned indices refer to the augmented candidate
/// lists, in which projected boxes follow the raw ones.
pub fn viterbi_track_augmented(
    frames: &[FrameDetections],
    params: &CoherencyParams,
    project: bool,
    projection_penalty: f64,
) -> Result<Track> {
    if !project {
        return viterbi_track(frames, params);
    }
    if !projection_penalty.is_finite() {
        return Err(Error::InvalidParameter("projection penalty must be finite".into()));
    }
    let augmented = augment_with_projections(frames, params.motion, projection_penalty)?;
    viterbi_track(&augmented, params)
}

/// Baseline that picks the best-scoring detection in each frame.
pub fn greedy_track(frames: &[FrameDetections], params: &CoherencyParams) -> Result<Track> {
    check_trackable(frames)?;
    let indices: Vec<usize> = frames.iter().map(|f| f.best().map(|(i, _)| i).unwrap_or(0)).collect();
    track_from_indices(frames, &indices, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(frame: usize, cx: f64, cy: f64, score: f64) -> ScoredBox {
        ScoredBox::new(frame, cx, cy, 4.0, 4.0, score).unwrap()
    }

    fn fd(frame: usize, boxes: Vec<ScoredBox>) -> FrameDetections {
        FrameDetections::new(frame, boxes).unwrap()
    }

    #[test]
    fn coherency_examples() {
        let p = CoherencyParams::default();
        let a = bx(0, 0.0, 0.0, 0.0);
        assert_eq!(coherency_g(&a, &bx(1, 0.0, 0.0, 0.0), &p).unwrap(), 0.0);
        assert_eq!(coherency_g(&a, &bx(1, 3.0, 4.0, 0.0), &p).unwrap(), -5.0);
        let sq = CoherencyParams {
            g_form: GForm::NegSquaredEuclidean,
            ..p
        };
        assert_eq!(coherency_g(&a, &bx(1, 3.0, 4.0, 0.0), &sq).unwrap(), -25.0);
        let cv = CoherencyParams {
            motion: MotionModel::ConstantVelocity { vx: 3.0, vy: 4.0 },
            ..p
        };
        assert_eq!(coherency_g(&a, &bx(1, 3.0, 4.0, 0.0), &cv).unwrap(), 0.0);
        assert!(coherency_g(&a, &bx(2, 0.0, 0.0, 0.0), &p).is_err());
    }

    #[test]
    fn single_frame_picks_best() {
        let frames = vec![fd(
            0,
            vec![bx(0, 0.0, 0.0, 1.0), bx(0, 5.0, 0.0, 7.0), bx(0, 9.0, 0.0, 3.0)],
        )];
        let t = viterbi_track(&frames, &CoherencyParams::default()).unwrap();
        assert_eq!(t.indices, vec![1]);
        assert_eq!(t.objective, 7.0);
    }

    #[test]
    fn forced_two_frame_track() {
        let frames = vec![fd(0, vec![bx(0, 0.0, 0.0, 1.5)]), fd(1, vec![bx(1, 3.0, 4.0, 2.0)])];
        let t = viterbi_track(&frames, &CoherencyParams::default()).unwrap();
        assert_eq!(t.objective, 1.5 + 2.0 - 5.0);
        assert_eq!(t.terms[1].g, -5.0);
    }

    #[test]
    fn coherency_overrides_score() {
        // The high-scoring outlier in frame 1 is 100 px away.
        let frames = vec![
            fd(0, vec![bx(0, 0.0, 0.0, 1.0)]),
            fd(1, vec![bx(1, 100.0, 0.0, 5.0), bx(1, 1.0, 0.0, 0.5)]),
            fd(2, vec![bx(2, 2.0, 0.0, 1.0)]),
        ];
        let p = CoherencyParams::default();
        let t = viterbi_track(&frames, &p).unwrap();
        assert_eq!(t.indices, vec![0, 1, 0]);
        let g = greedy_track(&frames, &p).unwrap();
        assert_eq!(g.indices, vec![0, 0, 0]);
        assert!(t.objective >= g.objective);
    }

    #[test]
    fn empty_frame_is_infeasible() {
        let frames = vec![fd(0, vec![bx(0, 0.0, 0.0, 1.0)]), FrameDetections::empty(1)];
        let err = viterbi_track(&frames, &CoherencyParams::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyFrame { frame: 1 }));
        assert_eq!(err.to_string(), "frame 1 has no detections");
        assert!(matches!(
            viterbi_track(&[], &CoherencyParams::default()),
            Err(Error::NoFrames)
        ));
    }

    #[test]
    fn non_contiguous_frames_rejected() {
        let frames = vec![fd(0, vec![bx(0, 0.0, 0.0, 1.0)]), fd(2, vec![bx(2, 0.0, 0.0, 1.0)])];
        assert!(matches!(
            viterbi_track(&frames, &CoherencyParams::default()),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn projection_bridges_missing_frame() {
        let params = CoherencyParams {
            motion: MotionModel::ConstantVelocity { vx: 2.0, vy: 0.0 },
            g_form: GForm::NegEuclidean,
        };
        let frames = vec![
            fd(0, vec![bx(0, 0.0, 0.0, 1.0)]),
            FrameDetections::empty(1),
            fd(2, vec![bx(2, 5.0, 0.0, 2.5)]),
        ];
        assert!(viterbi_track(&frames, &params).is_err());
        let t = viterbi_track_augmented(&frames, &params, true, 0.0).unwrap();
        assert!(t.picks[1].projected);
        assert_eq!((t.picks[1].frame, t.picks[1].cx), (1, 2.0));
        assert!(!t.picks[2].projected);
        // Recompute from picks: f = 1 + 1 + 2.5, g = 0 + 0 - (5 - 4).
        let expect = 1.0 + 1.0 + 2.5 + 0.0 - (5.0 - 4.0);
        assert!((t.objective - expect).abs() < 1e-12);
        assert!((t.f_sum() + t.g_sum() - t.objective).abs() < 1e-12);
    }

    #[test]
    fn projection_chains_across_long_gaps() {
        let frames = vec![
            fd(0, vec![bx(0, 0.0, 0.0, 1.0)]),
            FrameDetections::empty(1),
            FrameDetections::empty(2),
            fd(3, vec![bx(3, 0.0, 0.0, 1.0)]),
        ];
        let t = viterbi_track_augmented(&frames, &CoherencyParams::default(), true, 0.25).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.picks[1].projected && t.picks[2].projected);
        assert_eq!(t.picks[2].score, 0.5);
    }

    #[test]
    fn projection_needs_a_first_detection() {
        let frames = vec![FrameDetections::empty(0), fd(1, vec![bx(1, 0.0, 0.0, 1.0)])];
        assert!(matches!(
            viterbi_track_augmented(&frames, &CoherencyParams::default(), true, 0.0),
            Err(Error::EmptyFrame { frame: 0 })
        ));
    }

    #[test]
    fn projection_off_is_plain_tracking() {
        let frames = vec![
            fd(0, vec![bx(0, 0.0, 0.0, 1.0), bx(0, 3.0, 1.0, 0.2)]),
            fd(1, vec![bx(1, 1.0, 0.0, 0.3), bx(1, 9.0, 9.0, 2.0)]),
        ];
        let p = CoherencyParams::default();
        assert_eq!(
            viterbi_track_augmented(&frames, &p, false, 0.0).unwrap(),
            viterbi_track(&frames, &p).unwrap()
        );
    }
}
