//! Brute-force oracles and random instance generators shared by the
//! integration tests and the acceptance binary.
//!
//! Every oracle enumerates the whole search space and recomputes each term
//! from raw fields; none of them call the library's objective code.

#![allow(dead_code)]

use lattice_fusion::detection::{FrameDetections, ScoredBox};
use lattice_fusion::eval::{overlap, AnnotationSet};
use lattice_fusion::events::{FrameSize, HmmModel, StateEmission};
use lattice_fusion::gdt::Grid3D;
use lattice_fusion::pyramid::{DetectionPrism, ScaleMap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

pub const FRAME: FrameSize = FrameSize {
    width: 10.0,
    height: 10.0,
};

/// `t_len` frames with 1..=`j_max` detections each.
pub fn random_frames(rng: &mut ChaCha8Rng, t_len: usize, j_max: usize) -> Vec<FrameDetections> {
    (0..t_len)
        .map(|t| {
            let j = rng.random_range(1..=j_max);
            let boxes = (0..j)
                .map(|_| {
                    ScoredBox::new(
                        t,
                        rng.random_range(0.0..10.0),
                        rng.random_range(0.0..10.0),
                        rng.random_range(0.5..2.0),
                        rng.random_range(0.5..2.0),
                        rng.random_range(-1.0..3.0),
                    )
                    .unwrap()
                })
                .collect();
            FrameDetections::new(t, boxes).unwrap()
        })
        .collect()
}

fn random_log_distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| (v / total).ln()).collect()
}

/// Random `k`-state model with Gaussian emissions suited to [`FRAME`].
pub fn random_model(rng: &mut ChaCha8Rng, name: &str, k: usize) -> HmmModel {
    let init = random_log_distribution(rng, k);
    let trans = (0..k).map(|_| random_log_distribution(rng, k)).collect();
    let emissions = (0..k)
        .map(|_| StateEmission::Gaussian {
            mean: [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(-0.7..0.7),
                rng.random_range(-0.7..0.7),
            ],
            var: [
                rng.random_range(0.05..1.0),
                rng.random_range(0.05..1.0),
                rng.random_range(0.05..1.0),
                rng.random_range(0.05..1.0),
            ],
        })
        .collect();
    HmmModel::new(name, init, trans, emissions).unwrap()
}

/// Random prisms of shape `dims` with a uniform scale map.
pub fn random_prisms(rng: &mut ChaCha8Rng, dims: [usize; 3], t_len: usize) -> Vec<DetectionPrism> {
    let n = dims.iter().product();
    let stride = rng.random_range(0.5..3.0);
    let sizes: Vec<(f64, f64)> = (0..dims[2])
        .map(|_| (rng.random_range(0.5..2.5), rng.random_range(0.5..2.5)))
        .collect();
    (0..t_len)
        .map(|t| {
            let values = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let grid = Grid3D::new(dims, values, [1.0; 3]).unwrap();
            DetectionPrism::new(t, grid, ScaleMap::uniform(dims[2]), stride, 1.0, sizes.clone()).unwrap()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// distance transforms
// ---------------------------------------------------------------------------

pub fn brute_gdt_1d(values: &[f64], weight: f64) -> Vec<f64> {
    (0..values.len())
        .map(|q| {
            values
                .iter()
                .enumerate()
                .map(|(p, v)| v - weight * (p as f64 - q as f64).powi(2))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn brute_gdt_3d(dims: [usize; 3], values: &[f64], weights: [f64; 3]) -> Vec<f64> {
    let coord = |i: usize| cell_coords(dims, i);
    (0..values.len())
        .map(|q| {
            let (qx, qy, qs) = coord(q);
            (0..values.len())
                .map(|p| {
                    let (px, py, ps) = coord(p);
                    let d = weights[0] * (px as f64 - qx as f64).powi(2)
                        + weights[1] * (py as f64 - qy as f64).powi(2)
                        + weights[2] * (ps as f64 - qs as f64).powi(2);
                    values[p] - d
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// tracking
// ---------------------------------------------------------------------------

/// Coherency between detections of adjacent frames, recomputed from
/// centers: the negative (squared) distance after a constant displacement.
pub fn oracle_g(prev: &ScoredBox, next: &ScoredBox, velocity: (f64, f64), squared: bool) -> f64 {
    let dx = next.cx - (prev.cx + velocity.0);
    let dy = next.cy - (prev.cy + velocity.1);
    let d2 = dx * dx + dy * dy;
    if squared {
        -d2
    } else {
        -d2.sqrt()
    }
}

/// Calls `visit` with every index tuple choosing one of `sizes[t]` options
/// per position.
pub fn for_each_path(sizes: &[usize], mut visit: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut path = vec![0; sizes.len()];
    loop {
        visit(&path);
        let mut t = sizes.len();
        loop {
            if t == 0 {
                return;
            }
            t -= 1;
            path[t] += 1;
            if path[t] < sizes[t] {
                break;
            }
            path[t] = 0;
        }
    }
}

pub fn brute_track(frames: &[FrameDetections], velocity: (f64, f64), squared: bool) -> f64 {
    let sizes: Vec<usize> = frames.iter().map(|f| f.len()).collect();
    let mut best = f64::NEG_INFINITY;
    for_each_path(&sizes, |path| {
        let mut v = 0.0;
        for t in 0..path.len() {
            let b = &frames[t].boxes()[path[t]];
            v += b.score;
            if t > 0 {
                v += oracle_g(&frames[t - 1].boxes()[path[t - 1]], b, velocity, squared);
            }
        }
        best = best.max(v);
    });
    best
}

// ---------------------------------------------------------------------------
// prisms
// ---------------------------------------------------------------------------

pub fn cell_coords(dims: [usize; 3], i: usize) -> (usize, usize, usize) {
    let [_, ny, ns] = dims;
    (i / (ny * ns), (i / ns) % ny, i % ns)
}

fn oracle_prism_g(p: &DetectionPrism, a: usize, b: usize, alpha: f64) -> f64 {
    let dims = p.dims();
    let (ax, ay, as_) = cell_coords(dims, a);
    let (bx, by, bs) = cell_coords(dims, b);
    let (fa, fb) = (p.scale_map().factor(as_), p.scale_map().factor(bs));
    let dx = fa * ax as f64 - fb * bx as f64;
    let dy = fa * ay as f64 - fb * by as f64;
    let ds = as_ as f64 - bs as f64;
    -(dx * dx + dy * dy + alpha * ds * ds)
}

/// Best prism-track objective over every cell path.
pub fn brute_prism_track(prisms: &[DetectionPrism], alpha: f64) -> f64 {
    let n = prisms[0].grid().len();
    let sizes = vec![n; prisms.len()];
    let mut best = f64::NEG_INFINITY;
    for_each_path(&sizes, |path| {
        let mut v = 0.0;
        for t in 0..path.len() {
            v += prisms[t].grid().values()[path[t]];
            if t > 0 {
                v += oracle_prism_g(&prisms[0], path[t - 1], path[t], alpha);
            }
        }
        best = best.max(v);
    });
    best
}

// ---------------------------------------------------------------------------
// event models
// ---------------------------------------------------------------------------

pub fn oracle_emission(e: &StateEmission, cx: f64, cy: f64, w: f64, h: f64, frame: FrameSize) -> f64 {
    match e {
        StateEmission::Constant(c) => *c,
        StateEmission::Gaussian { mean, var } => {
            let x = [cx / frame.width, cy / frame.height, w.ln(), h.ln()];
            (0..4)
                .map(|i| {
                    let d = x[i] - mean[i];
                    -0.5 * (2.0 * std::f64::consts::PI * var[i]).ln() - d * d / (2.0 * var[i])
                })
                .sum()
        }
    }
}

fn oracle_box_emission(m: &HmmModel, k: usize, b: &ScoredBox, frame: FrameSize) -> f64 {
    oracle_emission(&m.emissions()[k], b.cx, b.cy, b.w, b.h, frame)
}

/// Score of one state sequence along a fixed track.
pub fn state_path_score(m: &HmmModel, track: &[ScoredBox], states: &[usize], frame: FrameSize) -> f64 {
    let mut v = m.log_init()[states[0]];
    for t in 0..track.len() {
        v += oracle_box_emission(m, states[t], &track[t], frame);
        if t > 0 {
            v += m.log_trans(states[t - 1], states[t]);
        }
    }
    v
}

/// `(log sum, max)` over every state sequence.
pub fn brute_hmm(m: &HmmModel, track: &[ScoredBox], frame: FrameSize) -> (f64, f64) {
    let sizes = vec![m.states(); track.len()];
    let mut scores = Vec::new();
    for_each_path(&sizes, |states| scores.push(state_path_score(m, track, states, frame)));
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    (total, max)
}

/// Best joint objective over every (detection, state) path.
pub fn brute_joint(
    frames: &[FrameDetections],
    m: &HmmModel,
    velocity: (f64, f64),
    squared: bool,
    frame: FrameSize,
) -> f64 {
    let k = m.states();
    let sizes: Vec<usize> = frames.iter().map(|f| f.len() * k).collect();
    let mut best = f64::NEG_INFINITY;
    for_each_path(&sizes, |path| {
        let mut v = 0.0;
        for t in 0..path.len() {
            let (j, s) = (path[t] / k, path[t] % k);
            let b = &frames[t].boxes()[j];
            v += b.score + oracle_box_emission(m, s, b, frame);
            if t == 0 {
                v += m.log_init()[s];
            } else {
                let (jp, sp) = (path[t - 1] / k, path[t - 1] % k);
                v += oracle_g(&frames[t - 1].boxes()[jp], b, velocity, squared) + m.log_trans(sp, s);
            }
        }
        best = best.max(v);
    });
    best
}

/// Best unified objective over every (cell, state) path, by depth-first
/// enumeration with prefix sums.
pub fn brute_unified(prisms: &[DetectionPrism], m: &HmmModel, alpha: f64, frame: FrameSize) -> f64 {
    let p0 = &prisms[0];
    let dims = p0.dims();
    let n = p0.grid().len();
    let k = m.states();
    let stride = p0.stride();
    let h: Vec<Vec<f64>> = (0..n)
        .map(|c| {
            let (x, y, s) = cell_coords(dims, c);
            let f = stride * p0.scale_map().factor(s);
            let (w, hh) = p0.box_sizes()[s];
            (0..k)
                .map(|st| oracle_emission(&m.emissions()[st], f * x as f64, f * y as f64, w, hh, frame))
                .collect()
        })
        .collect();
    let g: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| oracle_prism_g(p0, a, b, alpha)).collect())
        .collect();

    #[allow(clippy::too_many_arguments)]
    fn rec(
        t: usize,
        prev: (usize, usize),
        acc: f64,
        prisms: &[DetectionPrism],
        m: &HmmModel,
        h: &[Vec<f64>],
        g: &[Vec<f64>],
        best: &mut f64,
    ) {
        if t == prisms.len() {
            *best = best.max(acc);
            return;
        }
        let f = prisms[t].grid().values();
        for c in 0..h.len() {
            for s in 0..m.states() {
                let v = acc + f[c] + h[c][s] + g[prev.0][c] + m.log_trans(prev.1, s);
                rec(t + 1, (c, s), v, prisms, m, h, g, best);
            }
        }
    }

    let mut best = f64::NEG_INFINITY;
    let f0 = p0.grid().values();
    for c in 0..n {
        for s in 0..k {
            rec(
                1,
                (c, s),
                f0[c] + h[c][s] + m.log_init()[s],
                prisms,
                m,
                &h,
                &g,
                &mut best,
            );
        }
    }
    best
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/// Every bijection between equal-size track lists, scored by the pooled
/// frame-weighted mean.
pub fn brute_best_mean(u: &AnnotationSet, v: &AnnotationSet) -> Option<f64> {
    let (tu, tv) = (u.tracks(), v.tracks());
    let n = tu.len();
    let mut best: Option<f64> = None;
    let sizes = vec![n; n];
    for_each_path(&sizes, |perm| {
        let mut seen = vec![false; n];
        if perm.iter().any(|&j| std::mem::replace(&mut seen[j], true)) {
            return;
        }
        let mut all = Vec::new();
        for (i, &j) in perm.iter().enumerate() {
            for (f, a) in &tu[i].boxes {
                if let Some(b) = tv[j].boxes.get(f) {
                    all.push(overlap(a, b).unwrap());
                }
            }
        }
        if !all.is_empty() {
            let m = all.iter().sum::<f64>() / all.len() as f64;
            best = Some(best.map_or(m, |b: f64| b.max(m)));
        }
    });
    best
}
