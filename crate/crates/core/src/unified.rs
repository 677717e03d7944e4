//! Detection, tracking and event recognition in one lattice.
//!
//! Nodes are `(cell, state)` pairs of a prism sequence. Per frame and per
//! previous state the maximization over previous cells is one distance
//! transform; the maximization over previous states is an explicit `K x K`
//! loop.

use rayon::prelude::*;

use crate::detection::ScoredBox;
use crate::error::{Error, Result};
use crate::events::{box_features, FrameSize, HmmModel, ObjectiveTerms};
use crate::gdt::Transform3D;
use crate::pyramid::{check_alpha, check_prisms, gdt_weights, prism_distance, Cell, DetectionPrism};

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedResult {
    pub event: String,
    pub cells: Vec<Cell>,
    pub states: Vec<usize>,
    pub boxes: Vec<ScoredBox>,
    pub objective: f64,
    pub terms: ObjectiveTerms,
    /// Running objective along the chosen path, one entry per frame.
    pub cumulative: Vec<f64>,
}

impl UnifiedResult {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Validated prism sequence with the model-independent parts of the lattice
/// precomputed: distance-transform weights and per-cell box features.
#[derive(Debug, Clone)]
pub struct PreparedPrisms<'a> {
    prisms: &'a [DetectionPrism],
    alpha: f64,
    weights: [f64; 3],
    features: Vec<[f64; 4]>,
}

impl<'a> PreparedPrisms<'a> {
    pub fn new(prisms: &'a [DetectionPrism], alpha: f64, frame_size: FrameSize) -> Result<Self> {
        check_prisms(prisms)?;
        check_alpha(alpha)?;
        let weights = gdt_weights(&prisms[0], alpha)?;
        let first = &prisms[0];
        // Cell geometry is shared by every frame, so features are too.
        let features = (0..first.grid().len())
            .map(|i| box_features(&first.realize(first.cell(i)), frame_size))
            .collect();
        Ok(PreparedPrisms {
            prisms,
            alpha,
            weights,
            features,
        })
    }

    fn emissions(&self, model: &HmmModel) -> Vec<Vec<f64>> {
        model
            .emissions()
            .iter()
            .map(|e| self.features.iter().map(|f| e.logprob(f)).collect())
            .collect()
    }
}

/// Best joint (cell, state) path through `prisms` under `model`.
pub fn detect_track_recognize(
    prisms: &[DetectionPrism],
    model: &HmmModel,
    alpha: f64,
    frame_size: FrameSize,
) -> Result<UnifiedResult> {
    let prepared = PreparedPrisms::new(prisms, alpha, frame_size)?;
    run_prepared(&prepared, model)
}

/// One [`UnifiedResult`] per model, best first; ties go to the smaller name.
pub fn recognize_all(
    prisms: &[DetectionPrism],
    models: &[HmmModel],
    alpha: f64,
    frame_size: FrameSize,
) -> Result<Vec<UnifiedResult>> {
    if models.is_empty() {
        return Err(Error::NoModels);
    }
    let prepared = PreparedPrisms::new(prisms, alpha, frame_size)?;
    let mut results = models
        .iter()
        .map(|m| run_prepared(&prepared, m))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| b.objective.total_cmp(&a.objective).then_with(|| a.event.cmp(&b.event)));
    Ok(results)
}

/// Runs the lattice for one model over prepared prisms.
pub fn run_prepared(prepared: &PreparedPrisms<'_>, model: &HmmModel) -> Result<UnifiedResult> {
    let prisms = prepared.prisms;
    let k = model.states();
    let dims = prisms[0].dims();
    let n = prisms[0].grid().len();
    let h = prepared.emissions(model);

    // delta[state][cell]
    let f0 = prisms[0].grid().values();
    let mut delta: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            let init = model.log_init()[s];
            (0..n).map(|c| f0[c] + h[s][c] + init).collect()
        })
        .collect();
    // back[t - 1][cell * K + state] = (previous cell, previous state)
    let mut back: Vec<Vec<(usize, usize)>> = Vec::with_capacity(prisms.len().saturating_sub(1));

    for p in &prisms[1..] {
        let transformed: Vec<(Vec<f64>, Vec<usize>)> = delta
            .par_iter()
            .map_init(
                || Transform3D::new(dims, prepared.weights),
                |gdt, d| {
                    let mut out = vec![0.0; n];
                    let mut arg = vec![0; n];
                    gdt.run(d, &mut out, &mut arg);
                    (out, arg)
                },
            )
            .collect();

        let f = p.grid().values();
        let mut next = vec![vec![0.0; n]; k];
        let mut bp = vec![(0, 0); n * k];
        for c in 0..n {
            for to in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut from_best = 0;
                for (from, (m, _)) in transformed.iter().enumerate() {
                    let v = model.log_trans(from, to) + m[c];
                    if v > best {
                        best = v;
                        from_best = from;
                    }
                }
                next[to][c] = f[c] + h[to][c] + best;
                bp[c * k + to] = (transformed[from_best].1[c], from_best);
            }
        }
        delta = next;
        back.push(bp);
    }

    let (mut cell, mut state, mut objective) = (0, 0, f64::NEG_INFINITY);
    for c in 0..n {
        for (s, d) in delta.iter().enumerate() {
            if d[c] > objective {
                (cell, state, objective) = (c, s, d[c]);
            }
        }
    }
    let t_len = prisms.len();
    let mut cells = vec![Cell::new(0, 0, 0); t_len];
    let mut states = vec![0; t_len];
    for t in (0..t_len).rev() {
        cells[t] = prisms[0].cell(cell);
        states[t] = state;
        if t > 0 {
            (cell, state) = back[t - 1][cell * k + state];
        }
    }
    let mut result = unified_from_path(prepared, model, &cells, &states)?;
    result.objective = objective;
    Ok(result)
}

/// Builds the [`UnifiedResult`] for a given path, recomputing every term
/// from the cells and states alone.
pub fn unified_from_path(
    prepared: &PreparedPrisms<'_>,
    model: &HmmModel,
    cells: &[Cell],
    states: &[usize],
) -> Result<UnifiedResult> {
    let prisms = prepared.prisms;
    if cells.len() != prisms.len() || states.len() != prisms.len() {
        return Err(Error::DimensionMismatch(format!(
            "path of {} cells and {} states for {} prisms",
            cells.len(),
            states.len(),
            prisms.len()
        )));
    }
    let [nx, ny, ns] = prisms[0].dims();
    if cells.iter().any(|c| c.x >= nx || c.y >= ny || c.s >= ns) {
        return Err(Error::DimensionMismatch("cell outside the prism".into()));
    }
    if states.iter().any(|&s| s >= model.states()) {
        return Err(Error::DimensionMismatch("state outside the model".into()));
    }
    let map = prisms[0].scale_map();
    let mut terms = ObjectiveTerms::default();
    let mut cumulative = Vec::with_capacity(cells.len());
    let mut boxes = Vec::with_capacity(cells.len());
    for (t, (p, (&c, &s))) in prisms.iter().zip(cells.iter().zip(states)).enumerate() {
        let b = p.realize(c);
        terms.f += b.score;
        terms.h += model.emissions()[s].logprob(&prepared.features[p.index(c)]);
        if t == 0 {
            terms.init = model.log_init()[s];
        } else {
            terms.g -= prism_distance(cells[t - 1], c, map, prepared.alpha);
            terms.a += model.log_trans(states[t - 1], s);
        }
        cumulative.push(terms.total());
        boxes.push(b);
    }
    Ok(UnifiedResult {
        event: model.name().to_string(),
        cells: cells.to_vec(),
        states: states.to_vec(),
        boxes,
        objective: terms.total(),
        terms,
        cumulative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{map_states, StateEmission};
    use crate::gdt::Grid3D;
    use crate::pyramid::{track_prisms, ScaleMap};

    fn prism(frame: usize, dims: [usize; 3], values: Vec<f64>) -> DetectionPrism {
        let grid = Grid3D::new(dims, values, [1.0; 3]).unwrap();
        let sizes = (0..dims[2]).map(|s| (10.0 + s as f64, 20.0)).collect();
        DetectionPrism::new(frame, grid, ScaleMap::uniform(dims[2]), 4.0, 1.0, sizes).unwrap()
    }

    fn bump_sequence() -> Vec<DetectionPrism> {
        (0..4)
            .map(|t| {
                let mut v = vec![0.0; 5 * 3 * 2];
                v[((t % 5) * 3 + 1) * 2] = 10.0;
                v[(4 * 3 + 2) * 2 + 1] = 3.0;
                prism(t, [5, 3, 2], v)
            })
            .collect()
    }

    #[test]
    fn single_state_zero_emission_matches_track_prisms() {
        let prisms = bump_sequence();
        let m = HmmModel::constant("flat", 0.0).unwrap();
        let u = detect_track_recognize(&prisms, &m, 0.5, FrameSize::default()).unwrap();
        let t = track_prisms(&prisms, 0.5).unwrap();
        assert_eq!(u.cells, t.cells);
        assert_eq!(u.objective, t.objective);
        assert_eq!(u.states, vec![0; 4]);
    }

    #[test]
    fn constant_emission_shifts_objective() {
        let prisms = bump_sequence();
        let m = HmmModel::constant("flat", -2.0).unwrap();
        let u = detect_track_recognize(&prisms, &m, 0.5, FrameSize::default()).unwrap();
        let t = track_prisms(&prisms, 0.5).unwrap();
        assert_eq!(u.cells, t.cells);
        assert!((u.objective - (t.objective - 8.0)).abs() < 1e-9);
        assert!((u.terms.total() - u.objective).abs() < 1e-9);
        assert_eq!(*u.cumulative.last().unwrap(), u.terms.total());
    }

    #[test]
    fn single_cell_prisms_match_map_states() {
        let size = FrameSize::new(100.0, 100.0).unwrap();
        let prisms: Vec<_> = (0..5).map(|t| prism(t, [1, 1, 1], vec![t as f64 * 0.3])).collect();
        let half = 0.5f64.ln();
        let m = HmmModel::new(
            "two",
            vec![0.9f64.ln(), 0.1f64.ln()],
            vec![vec![0.7f64.ln(), 0.3f64.ln()], vec![half, half]],
            vec![
                StateEmission::Gaussian {
                    mean: [0.5, 0.0, 2.3, 3.0],
                    var: [1.0; 4],
                },
                StateEmission::Gaussian {
                    mean: [0.0, 0.0, 2.3, 3.0],
                    var: [0.1; 4],
                },
            ],
        )
        .unwrap();
        let u = detect_track_recognize(&prisms, &m, 1.0, size).unwrap();
        let (states, score) = map_states(&m, &u.boxes, size);
        assert_eq!(u.states, states);
        let f: f64 = prisms.iter().map(|p| p.grid().values()[0]).sum();
        assert!((u.objective - (score + f)).abs() < 1e-9);
    }

    #[test]
    fn recognize_all_ranks_and_matches_single_calls() {
        let prisms = bump_sequence();
        let a = HmmModel::constant("a", -1.0).unwrap();
        let b = HmmModel::constant("b", -0.5).unwrap();
        let all = recognize_all(&prisms, &[a.clone(), b.clone(), a.clone()], 1.0, FrameSize::default()).unwrap();
        assert_eq!(all[0].event, "b");
        assert_eq!(all[1], all[2]);
        let single = detect_track_recognize(&prisms, &a, 1.0, FrameSize::default()).unwrap();
        assert_eq!(all[1], single);
        assert!(matches!(
            recognize_all(&prisms, &[], 1.0, FrameSize::default()),
            Err(Error::NoModels)
        ));
    }

    #[test]
    fn rejects_mismatched_layouts() {
        let mut prisms = bump_sequence();
        prisms[2] = prism(2, [5, 3, 1], vec![0.0; 15]);
        let m = HmmModel::constant("flat", 0.0).unwrap();
        assert!(matches!(
            detect_track_recognize(&prisms, &m, 1.0, FrameSize::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
