//! Shared detection types plus the detection-source plumbing that feeds the
//! trackers: forward projection, per-source score normalization, pooling and
//! top-k pruning.

use crate::error::{Error, Result};

/// One candidate detection: an axis-aligned box given by center and size,
/// with a log-domain detection score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
    pub source_id: u32,
    /// Set on boxes synthesized by forward projection rather than emitted by
    /// a detection source.
    pub projected: bool,
}

impl ScoredBox {
    pub fn new(frame: usize, cx: f64, cy: f64, w: f64, h: f64, score: f64) -> Result<Self> {
        let b = ScoredBox {
            frame,
            cx,
            cy,
            w,
            h,
            score,
            source_id: 0,
            projected: false,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_source(mut self, source_id: u32) -> Self {
        self.source_id = source_id;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0 && self.w.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "size must be positive and finite, got {}x{}",
                self.w, self.h
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidBox("center must be finite".into()));
        }
        if !self.score.is_finite() {
            return Err(Error::InvalidBox("score must be finite".into()));
        }
        Ok(())
    }

    /// Corners as `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }
}

/// All candidate detections of one frame. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameDetections {
    pub frame: usize,
    boxes: Vec<ScoredBox>,
}

impl FrameDetections {
    pub fn new(frame: usize, boxes: Vec<ScoredBox>) -> Result<Self> {
        for b in &boxes {
            if b.frame != frame {
                return Err(Error::FrameMismatch {
                    expected: frame,
                    found: b.frame,
                });
            }
            b.validate()?;
        }
        Ok(FrameDetections { frame, boxes })
    }

    pub fn empty(frame: usize) -> Self {
        FrameDetections {
            frame,
            boxes: Vec::new(),
        }
    }

    pub fn boxes(&self) -> &[ScoredBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn into_boxes(self) -> Vec<ScoredBox> {
        self.boxes
    }

    /// Highest-scoring box, first one on ties.
    pub fn best(&self) -> Option<(usize, &ScoredBox)> {
        let mut best: Option<(usize, &ScoredBox)> = None;
        for (i, b) in self.boxes.iter().enumerate() {
            if best.is_none_or(|(_, cur)| b.score > cur.score) {
                best = Some((i, b));
            }
        }
        best
    }
}

/// Stand-in for optical-flow forward projection of a box into the next frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MotionModel {
    #[default]
    Identity,
    /// Displacement in pixels per frame.
    ConstantVelocity { vx: f64, vy: f64 },
}

impl MotionModel {
    pub fn displacement(&self) -> (f64, f64) {
        match *self {
            MotionModel::Identity => (0.0, 0.0),
            MotionModel::ConstantVelocity { vx, vy } => (vx, vy),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (vx, vy) = self.displacement();
        if vx.is_finite() && vy.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter("velocity must be finite".into()))
        }
    }
}

/// Moves a box one frame forward under `model`; score and size are kept.
pub fn forward_project(b: &ScoredBox, model: MotionModel) -> ScoredBox {
    let (dx, dy) = model.displacement();
    ScoredBox {
        frame: b.frame + 1,
        cx: b.cx + dx,
        cy: b.cy + dy,
        ..*b
    }
}

const OTSU_BINS: usize = 64;

/// Bipartition threshold of `scores` maximizing between-class variance.
///
/// Scores are binned into 64 equal-width bins over `[min, max]` and every bin
/// boundary is tried as a cut. Ties go to the lowest cut. When all scores are
/// equal the common value is returned.
pub fn otsu_threshold(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::NoScores);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("scores must be finite".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(lo);
    }

    let width = (hi - lo) / OTSU_BINS as f64;
    let mut hist = [0usize; OTSU_BINS];
    for &s in scores {
        let bin = (((s - lo) / width) as usize).min(OTSU_BINS - 1);
        hist[bin] += 1;
    }
    let center = |i: usize| lo + (i as f64 + 0.5) * width;

    let total = scores.len() as f64;
    let sum_total: f64 = hist.iter().enumerate().map(|(i, &c)| c as f64 * center(i)).sum();

    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    let mut best_var = f64::NEG_INFINITY;
    let mut best_cut = 0;
    for (i, &count) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += count as f64;
        sum0 += count as f64 * center(i);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_total - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_cut = i;
        }
    }
    Ok(lo + (best_cut + 1) as f64 * width)
}

/// Per-source score offset: the smaller of the Otsu bipartition threshold of
/// `scores` and `trained_threshold + epsilon`.
pub fn otsu_offset(scores: &[f64], trained_threshold: f64, epsilon: f64) -> Result<f64> {
    let otsu = otsu_threshold(scores)?;
    Ok(otsu.min(trained_threshold + epsilon))
}

/// Score of the top detection in each non-empty frame, the histogram input
/// for [`otsu_offset`].
pub fn top_scores_per_frame(frames: &[FrameDetections]) -> Vec<f64> {
    frames.iter().filter_map(|f| f.best().map(|(_, b)| b.score)).collect()
}

/// Union of several sources' detections for one frame, each box's score
/// reduced by its source's offset. Source order, then within-source order.
pub fn pool_detections(frame: usize, sources: &[(FrameDetections, f64)]) -> Result<FrameDetections> {
    let mut boxes = Vec::with_capacity(sources.iter().map(|(d, _)| d.len()).sum());
    for (dets, offset) in sources {
        if dets.frame != frame {
            return Err(Error::FrameMismatch {
                expected: frame,
                found: dets.frame,
            });
        }
        boxes.extend(dets.boxes().iter().map(|b| ScoredBox {
            score: b.score - offset,
            ..*b
        }));
    }
    FrameDetections::new(frame, boxes)
}

/// The `k` best boxes in descending score order; equal scores keep their
/// original order.
pub fn top_k(dets: &FrameDetections, k: usize) -> Result<FrameDetections> {
    if k == 0 {
        return Err(Error::InvalidParameter("top-k must be at least 1".into()));
    }
    let mut boxes = dets.boxes.clone();
    boxes.sort_by(|a, b| b.score.total_cmp(&a.score));
    boxes.truncate(k);
    Ok(FrameDetections {
        frame: dets.frame,
        boxes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(frame: usize, cx: f64, cy: f64, score: f64) -> ScoredBox {
        ScoredBox::new(frame, cx, cy, 10.0, 20.0, score).unwrap()
    }

    fn frame(t: usize, scores: &[f64]) -> FrameDetections {
        FrameDetections::new(
            t,
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| bx(t, i as f64, 0.0, s))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(ScoredBox::new(0, 0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(ScoredBox::new(0, 0.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(ScoredBox::new(0, 0.0, 0.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(FrameDetections::new(1, vec![bx(0, 0.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn projection() {
        let b = bx(3, 10.0, 10.0, 1.5);
        let p = forward_project(&b, MotionModel::Identity);
        assert_eq!((p.frame, p.cx, p.cy, p.score), (4, 10.0, 10.0, 1.5));

        let v = MotionModel::ConstantVelocity { vx: 2.0, vy: -1.0 };
        let p = forward_project(&b, v);
        assert_eq!((p.cx, p.cy), (12.0, 9.0));
        let p2 = forward_project(&p, v);
        assert_eq!((p2.frame, p2.cx, p2.cy), (5, 14.0, 8.0));
    }

    #[test]
    fn otsu_separates_two_clusters() {
        let t = otsu_offset(&[0.0, 0.0, 0.0, 10.0, 10.0, 10.0], 1e300, 1.0).unwrap();
        assert!(t > 0.0 && t <= 10.0);
        // Lowest of the tied cuts is the first bin boundary.
        assert_eq!(t, 10.0 / 64.0);
    }

    #[test]
    fn otsu_degenerate_and_trained_side() {
        assert_eq!(otsu_offset(&[5.0, 5.0, 5.0], 4.0, 0.5).unwrap(), 4.5);
        assert_eq!(otsu_threshold(&[5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(otsu_offset(&[1.0, 2.0], 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(otsu_offset(&[], 0.0, 1.0), Err(Error::NoScores)));
    }

    #[test]
    fn pooling() {
        let a = frame(2, &[5.0]);
        let b = frame(2, &[5.0]);
        let pooled = pool_detections(2, &[(a.clone(), 1.0), (b, 2.0)]).unwrap();
        let scores: Vec<f64> = pooled.boxes().iter().map(|b| b.score).collect();
        assert_eq!(scores, vec![4.0, 3.0]);

        assert_eq!(pool_detections(2, &[(a.clone(), 0.0)]).unwrap(), a);
        assert!(pool_detections(2, &[]).unwrap().is_empty());
        assert!(pool_detections(3, &[(a, 0.0)]).is_err());
    }

    #[test]
    fn top_k_orders_and_breaks_ties_by_index() {
        let d = frame(0, &[3.0, 1.0, 4.0]);
        let top = top_k(&d, 2).unwrap();
        let s: Vec<f64> = top.boxes().iter().map(|b| b.score).collect();
        assert_eq!(s, vec![4.0, 3.0]);

        let d = frame(0, &[2.0, 2.0, 2.0]);
        let top = top_k(&d, 2).unwrap();
        let xs: Vec<f64> = top.boxes().iter().map(|b| b.cx).collect();
        assert_eq!(xs, vec![0.0, 1.0]);

        let d = frame(0, &[1.0, 5.0, 2.0, 4.0, 3.0]);
        assert_eq!(top_k(&d, 5).unwrap().len(), 5);
        assert_eq!(top_k(&d, 9).unwrap().len(), 5);
        assert!(top_k(&d, 0).is_err());
    }
}
