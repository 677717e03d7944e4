//! Simultaneous detection and tracking over dense score prisms.
//!
//! Every cell `(x, y, s)` of a frame's prism is a candidate detection, and the
//! coherency between cells of adjacent frames is the negative scaled squared
//! distance
//!
//! ```text
//! d = (pi(s) x - pi(s') x')^2 + (pi(s) y - pi(s') y')^2 + alpha (s - s')^2
//! ```
//!
//! Once all scale levels share one coordinate grid (see
//! [`resample_to_reference`]) the inner maximization of the Viterbi update is
//! a 3-D max distance transform, so a frame costs `O(X Y S)` instead of
//! `O((X Y S)^2)`.

use crate::detection::{FrameDetections, ScoredBox};
use crate::error::{Error, Result};
use crate::gdt::{Grid3D, Transform3D, IMPOSSIBLE};

/// Per-level factor mapping level coordinates to frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleMap(Vec<f64>);

impl ScaleMap {
    pub fn new(factors: Vec<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("scale map is empty".into()));
        }
        if factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "scale factors must be positive and finite, got {factors:?}"
            )));
        }
        Ok(ScaleMap(factors))
    }

    pub fn uniform(levels: usize) -> Self {
        ScaleMap(vec![1.0; levels.max(1)])
    }

    pub fn factors(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factor(&self, s: usize) -> f64 {
        self.0[s]
    }

    /// The common factor when every level uses the same one.
    pub fn common_factor(&self) -> Option<f64> {
        let first = self.0[0];
        self.0.iter().all(|&f| f == first).then_some(first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub s: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize, s: usize) -> Self {
        Cell { x, y, s }
    }
}

/// Dense detection scores of one frame over position and scale.
///
/// A cell `(x, y, s)` is centered at `stride * pi(s) * (x, y)` in frame pixels
/// and its box has size `box_sizes[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPrism {
    pub frame: usize,
    grid: Grid3D,
    scale_map: ScaleMap,
    stride: f64,
    alpha: f64,
    box_sizes: Vec<(f64, f64)>,
}

impl DetectionPrism {
    pub fn new(
        frame: usize,
        grid: Grid3D,
        scale_map: ScaleMap,
        stride: f64,
        alpha: f64,
        box_sizes: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let levels = grid.dims()[2];
        if scale_map.len() != levels {
            return Err(Error::DimensionMismatch(format!(
                "prism has {levels} levels but {} scale factors",
                scale_map.len()
            )));
        }
        if box_sizes.len() != levels {
            return Err(Error::DimensionMismatch(format!(
                "prism has {levels} levels but {} box sizes",
                box_sizes.len()
            )));
        }
        if box_sizes
            .iter()
            .any(|&(w, h)| !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()))
        {
            return Err(Error::InvalidParameter("box sizes must be positive".into()));
        }
        if !(stride.is_finite() && stride > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stride must be positive, got {stride}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        if grid.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("prism scores must be finite".into()));
        }
        Ok(DetectionPrism {
            frame,
            grid,
            scale_map,
            stride,
            alpha,
            box_sizes,
        })
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    pub fn scale_map(&self) -> &ScaleMap {
        &self.scale_map
    }

    pub fn stride(&self) -> f64 {
        self.stride
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn box_sizes(&self) -> &[(f64, f64)] {
        &self.box_sizes
    }

    pub fn score(&self, c: Cell) -> f64 {
        self.grid.get(c.x, c.y, c.s)
    }

    pub fn cell(&self, index: usize) -> Cell {
        let (x, y, s) = self.grid.coords(index);
        Cell { x, y, s }
    }

    pub fn index(&self, c: Cell) -> usize {
        self.grid.index(c.x, c.y, c.s)
    }

    /// Frame-pixel center of a cell.
    pub fn center(&self, c: Cell) -> (f64, f64) {
        let k = self.stride * self.scale_map.factor(c.s);
        (k * c.x as f64, k * c.y as f64)
    }

    /// The detection a cell stands for.
    pub fn realize(&self, c: Cell) -> ScoredBox {
        let (cx, cy) = self.center(c);
        let (w, h) = self.box_sizes[c.s];
        ScoredBox {
            frame: self.frame,
            cx,
            cy,
            w,
            h,
            score: self.score(c),
            source_id: 0,
            projected: false,
        }
    }

    /// True when two prisms can share one lattice: same shape, scale map,
    /// stride and box sizes.
    pub fn same_layout(&self, other: &DetectionPrism) -> bool {
        self.dims() == other.dims()
            && self.scale_map == other.scale_map
            && self.stride == other.stride
            && self.box_sizes == other.box_sizes
    }
}

/// Scaled squared distance between cells `a` and `b` of prisms sharing
/// `scale_map`.
pub fn prism_distance(a: Cell, b: Cell, scale_map: &ScaleMap, alpha: f64) -> f64 {
    let (pa, pb) = (scale_map.factor(a.s), scale_map.factor(b.s));
    let dx = pa * a.x as f64 - pb * b.x as f64;
    let dy = pa * a.y as f64 - pb * b.y as f64;
    let ds = a.s as f64 - b.s as f64;
    dx * dx + dy * dy + alpha * ds * ds
}

/// Resamples every level of `prism` onto one frame-pixel grid with spacing
/// `reference_stride`, nearest neighbor on scores. Output cells that fall
/// more than half a level cell outside a level's extent are
/// [`IMPOSSIBLE`]. All output scale factors are 1; scale is still
/// distinguished by the s axis.
pub fn resample_to_reference(prism: &DetectionPrism, reference_stride: f64) -> Result<DetectionPrism> {
    if !(reference_stride.is_finite() && reference_stride > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "reference stride must be positive, got {reference_stride}"
        )));
    }
    let [nx, ny, ns] = prism.dims();
    let max_step = (0..ns)
        .map(|s| prism.stride * prism.scale_map.factor(s))
        .fold(0.0, f64::max);
    let out_len = |n: usize| ((max_step * (n - 1) as f64) / reference_stride + 1e-9).floor() as usize + 1;
    let (ox, oy) = (out_len(nx), out_len(ny));

    let mut out = Grid3D::filled([ox, oy, ns], IMPOSSIBLE)?;
    for s in 0..ns {
        let step = prism.stride * prism.scale_map.factor(s);
        let nearest = |p: usize, n: usize| -> Option<usize> {
            let i = (p as f64 * reference_stride / step).round();
            (i >= 0.0 && i <= (n - 1) as f64).then_some(i as usize)
        };
        for x in 0..ox {
            let Some(sx) = nearest(x, nx) else { continue };
            for y in 0..oy {
                let Some(sy) = nearest(y, ny) else { continue };
                out.set(x, y, s, prism.grid.get(sx, sy, s));
            }
        }
    }
    DetectionPrism::new(
        prism.frame,
        out,
        ScaleMap::uniform(ns),
        reference_stride,
        prism.alpha,
        prism.box_sizes.clone(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismTrack {
    pub cells: Vec<Cell>,
    pub objective: f64,
    pub boxes: Vec<ScoredBox>,
    /// Detection score of each chosen cell.
    pub f_terms: Vec<f64>,
    /// Coherency into each chosen cell, zero for the first frame.
    pub g_terms: Vec<f64>,
}

impl PrismTrack {
    pub fn f_sum(&self) -> f64 {
        self.f_terms.iter().sum()
    }

    pub fn g_sum(&self) -> f64 {
        self.g_terms.iter().sum()
    }
}

pub(crate) fn check_prisms(prisms: &[DetectionPrism]) -> Result<()> {
    let first = prisms.first().ok_or(Error::NoFrames)?;
    for (t, p) in prisms.iter().enumerate() {
        if !p.same_layout(first) {
            return Err(Error::DimensionMismatch(format!(
                "prism {t} does not share the layout of prism 0"
            )));
        }
        if p.frame != first.frame + t {
            return Err(Error::FrameMismatch {
                expected: first.frame + t,
                found: p.frame,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )))
    }
}

/// Distance-transform weights `(pi^2, pi^2, alpha)` for a prism sequence.
/// Needs a uniform scale map, otherwise the distance is not separable.
pub(crate) fn gdt_weights(prism: &DetectionPrism, alpha: f64) -> Result<[f64; 3]> {
    let c = prism.scale_map.common_factor().ok_or_else(|| {
        Error::DimensionMismatch("scale map is not uniform; resample the prisms to a reference grid first".into())
    })?;
    Ok([c * c, c * c, alpha])
}

/// Builds the [`PrismTrack`] for given cells, recomputing every term.
pub fn prism_track_from_cells(prisms: &[DetectionPrism], cells: &[Cell], alpha: f64) -> Result<PrismTrack> {
    check_prisms(prisms)?;
    if cells.len() != prisms.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} cells for {} prisms",
            cells.len(),
            prisms.len()
        )));
    }
    let [nx, ny, ns] = prisms[0].dims();
    if cells.iter().any(|c| c.x >= nx || c.y >= ny || c.s >= ns) {
        return Err(Error::DimensionMismatch("cell outside the prism".into()));
    }
    let map = &prisms[0].scale_map;
    let f_terms: Vec<f64> = prisms.iter().zip(cells).map(|(p, &c)| p.score(c)).collect();
    let g_terms: Vec<f64> = (0..cells.len())
        .map(|t| {
            if t == 0 {
                0.0
            } else {
                -prism_distance(cells[t - 1], cells[t], map, alpha)
            }
        })
        .collect();
    let objective = f_terms.iter().sum::<f64>() + g_terms.iter().sum::<f64>();
    Ok(PrismTrack {
        cells: cells.to_vec(),
        objective,
        boxes: prisms.iter().zip(cells).map(|(p, &c)| p.realize(c)).collect(),
        f_terms,
        g_terms,
    })
}

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

fn backtrack(last: usize, back: &[Vec<usize>]) -> Vec<usize> {
    let mut path = vec![0; back.len() + 1];
    let mut i = last;
    path[back.len()] = i;
    for t in (0..back.len()).rev() {
        i = back[t][i];
        path[t] = i;
    }
    path
}

/// Best track through a sequence of prisms, one distance transform per
/// frame transition. The prisms must share one layout with a uniform scale
/// map.
pub fn track_prisms(prisms: &[DetectionPrism], alpha: f64) -> Result<PrismTrack> {
    check_prisms(prisms)?;
    check_alpha(alpha)?;
    let weights = gdt_weights(&prisms[0], alpha)?;
    let dims = prisms[0].dims();
    let n = prisms[0].grid.len();

    let mut gdt = Transform3D::new(dims, weights);
    let mut delta = prisms[0].grid.values().to_vec();
    let mut transformed = vec![0.0; n];
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(prisms.len().saturating_sub(1));

    for p in &prisms[1..] {
        let mut arg = vec![0; n];
        gdt.run(&delta, &mut transformed, &mut arg);
        for ((d, &f), &m) in delta.iter_mut().zip(p.grid.values()).zip(&transformed) {
            *d = f + m;
        }
        back.push(arg);
    }

    let (last, objective) = argmax(&delta);
    let cells: Vec<Cell> = backtrack(last, &back).into_iter().map(|i| prisms[0].cell(i)).collect();
    let mut track = prism_track_from_cells(prisms, &cells, alpha)?;
    track.objective = objective;
    Ok(track)
}

/// Reference engine: the same objective with the inner maximization done by
/// scanning every cell pair, `O((X Y S)^2)` per frame. Works for any scale
/// map.
pub fn track_prisms_quadratic(prisms: &[DetectionPrism], alpha: f64) -> Result<PrismTrack> {
    check_prisms(prisms)?;
    check_alpha(alpha)?;
    let first = &prisms[0];
    let n = first.grid.len();
    let map = &first.scale_map;

    // Frame coordinates of every cell, hoisted out of the pair loop.
    let coords: Vec<(f64, f64, f64)> = (0..n)
        .map(|i| {
            let c = first.cell(i);
            let k = map.factor(c.s);
            (k * c.x as f64, k * c.y as f64, c.s as f64)
        })
        .collect();

    let mut delta = first.grid.values().to_vec();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(prisms.len().saturating_sub(1));
    for p in &prisms[1..] {
        let mut next = vec![0.0; n];
        let mut arg = vec![0; n];
        for (q, &(qx, qy, qs)) in coords.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_p = 0;
            for (src, &(px, py, ps)) in coords.iter().enumerate() {
                let (dx, dy, ds) = (px - qx, py - qy, ps - qs);
                let v = delta[src] - (dx * dx + dy * dy + alpha * ds * ds);
                if v > best {
                    best = v;
                    best_p = src;
                }
            }
            next[q] = p.grid.values()[q] + best;
            arg[q] = best_p;
        }
        delta = next;
        back.push(arg);
    }
    let (last, objective) = argmax(&delta);
    let cells: Vec<Cell> = backtrack(last, &back).into_iter().map(|i| first.cell(i)).collect();
    let mut track = prism_track_from_cells(prisms, &cells, alpha)?;
    track.objective = objective;
    Ok(track)
}

/// Per-frame argmax cell of each prism, the detector-only baseline.
pub fn argmax_cells(prisms: &[DetectionPrism]) -> Vec<Cell> {
    prisms.iter().map(|p| p.cell(argmax(p.grid.values()).0)).collect()
}

/// What a thresholded detector would emit from a prism: cells that are local
/// maxima over their 3x3x3 neighborhood with score at least `threshold`,
/// best `max_count` first.
pub fn extract_detections(prism: &DetectionPrism, threshold: f64, max_count: usize) -> FrameDetections {
    let [nx, ny, ns] = prism.dims();
    let g = &prism.grid;
    let mut found: Vec<ScoredBox> = Vec::new();
    for i in 0..g.len() {
        let v = g.values()[i];
        if v < threshold {
            continue;
        }
        let (x, y, s) = g.coords(i);
        let mut is_peak = true;
        'scan: for ax in x.saturating_sub(1)..=(x + 1).min(nx - 1) {
            for ay in y.saturating_sub(1)..=(y + 1).min(ny - 1) {
                for as_ in s.saturating_sub(1)..=(s + 1).min(ns - 1) {
                    if g.get(ax, ay, as_) > v {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
        }
        if is_peak {
            found.push(prism.realize(Cell { x, y, s }));
        }
    }
    found.sort_by(|a, b| b.score.total_cmp(&a.score));
    found.truncate(max_count);
    FrameDetections::new(prism.frame, found).expect("realized boxes are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prism(frame: usize, dims: [usize; 3], values: Vec<f64>, map: Vec<f64>) -> DetectionPrism {
        let ns = dims[2];
        DetectionPrism::new(
            frame,
            Grid3D::new(dims, values, [0.0; 3]).unwrap(),
            ScaleMap::new(map).unwrap(),
            1.0,
            1.0,
            vec![(10.0, 20.0); ns],
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        let map = ScaleMap::new(vec![1.0, 2.0]).unwrap();
        let c = Cell::new(2, 5, 1);
        assert_eq!(prism_distance(c, c, &map, 3.0), 0.0);
        assert_eq!(prism_distance(Cell::new(3, 0, 0), Cell::new(3, 0, 1), &map, 0.0), 9.0);
        assert_eq!(prism_distance(Cell::new(3, 0, 0), Cell::new(3, 0, 1), &map, 2.0), 11.0);
    }

    #[test]
    fn invalid_prisms_rejected() {
        let grid = Grid3D::filled([2, 2, 2], 0.0).unwrap();
        let map = ScaleMap::uniform(2);
        assert!(DetectionPrism::new(0, grid.clone(), ScaleMap::uniform(3), 1.0, 1.0, vec![(1.0, 1.0); 2]).is_err());
        assert!(DetectionPrism::new(0, grid.clone(), map.clone(), 0.0, 1.0, vec![(1.0, 1.0); 2]).is_err());
        assert!(DetectionPrism::new(0, grid.clone(), map.clone(), 1.0, -1.0, vec![(1.0, 1.0); 2]).is_err());
        assert!(DetectionPrism::new(0, grid, map, 1.0, 1.0, vec![(1.0, 1.0); 1]).is_err());
        assert!(ScaleMap::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn resample_identity_on_reference_grid() {
        let vals: Vec<f64> = (0..18).map(|i| i as f64).collect();
        let p = prism(0, [3, 3, 2], vals, vec![1.0, 1.0]);
        let r = resample_to_reference(&p, 1.0).unwrap();
        assert_eq!(r.grid(), p.grid());
        assert!(resample_to_reference(&p, 0.0).is_err());
    }

    #[test]
    fn resample_scales_coarse_levels() {
        let mut vals = vec![0.0; 8];
        let mut g = Grid3D::new([4, 1, 2], vals.clone(), [0.0; 3]).unwrap();
        g.set(3, 0, 1, 5.0);
        vals.copy_from_slice(g.values());
        let p = prism(0, [4, 1, 2], vals, vec![1.0, 2.0]);
        let r = resample_to_reference(&p, 1.0).unwrap();
        assert_eq!(r.dims(), [7, 1, 2]);
        assert_eq!(r.grid().get(6, 0, 1), 5.0);
        assert_eq!(r.center(Cell::new(6, 0, 1)), p.center(Cell::new(3, 0, 1)));
        // Level 0 only covers x <= 3 in frame pixels.
        assert_eq!(r.grid().get(5, 0, 0), IMPOSSIBLE);
        assert_eq!(r.scale_map().factors(), &[1.0, 1.0]);
    }

    #[test]
    fn single_frame_is_global_argmax() {
        let mut vals = vec![0.0; 16];
        vals[11] = 3.0;
        let p = prism(0, [2, 4, 2], vals, vec![1.0, 1.0]);
        let t = track_prisms(std::slice::from_ref(&p), 1.0).unwrap();
        assert_eq!(t.cells, vec![p.cell(11)]);
        assert_eq!(t.objective, 3.0);
    }

    #[test]
    fn non_uniform_scale_map_needs_resampling() {
        let p = prism(0, [2, 2, 2], vec![0.0; 8], vec![1.0, 2.0]);
        assert!(matches!(
            track_prisms(std::slice::from_ref(&p), 1.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(track_prisms_quadratic(&[p], 1.0).is_ok());
    }

    #[test]
    fn layout_mismatch_rejected() {
        let a = prism(0, [2, 2, 1], vec![0.0; 4], vec![1.0]);
        let b = prism(1, [2, 3, 1], vec![0.0; 6], vec![1.0]);
        assert!(track_prisms(&[a.clone(), b], 1.0).is_err());
        let c = prism(2, [2, 2, 1], vec![0.0; 4], vec![1.0]);
        assert!(matches!(track_prisms(&[a, c], 1.0), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn extracts_local_peaks_above_threshold() {
        let mut g = Grid3D::filled([5, 5, 1], 0.0).unwrap();
        g.set(1, 1, 0, 2.0);
        g.set(3, 3, 0, 1.0);
        g.set(3, 4, 0, 0.5);
        let p = DetectionPrism::new(4, g, ScaleMap::uniform(1), 8.0, 1.0, vec![(16.0, 32.0)]).unwrap();
        let d = extract_detections(&p, 0.75, 10);
        assert_eq!(d.len(), 2);
        assert_eq!((d.boxes()[0].cx, d.boxes()[0].cy, d.boxes()[0].score), (8.0, 8.0, 2.0));
        assert_eq!(d.boxes()[1].cx, 24.0);
        assert_eq!(extract_detections(&p, 0.75, 1).len(), 1);
        assert_eq!(d.frame, 4);
    }
}
