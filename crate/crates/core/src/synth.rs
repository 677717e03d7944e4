//! Seeded synthetic scenarios: a ground-truth box trajectory, noisy
//! detections around it, score prisms with a bump on the true cell, and a
//! few hand-written event models.
//!
//! All randomness comes from ChaCha8 seeded with [`Scenario::seed`];
//! detections use stream 0 and prisms stream 1.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::detection::{FrameDetections, ScoredBox};
use crate::error::{Error, Result};
use crate::events::{FrameSize, HmmModel, StateEmission};
use crate::gdt::Grid3D;
use crate::pyramid::{Cell, DetectionPrism, ScaleMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Mean number of false positives per frame.
    pub fp_rate: f64,
    /// Probability that the true box is missed in a frame.
    pub dropout: f64,
    /// Standard deviation of the true box center jitter, in pixels.
    pub jitter: f64,
    /// Mean and standard deviation of true-box scores.
    pub true_score: (f64, f64),
    /// Mean and standard deviation of false-positive scores.
    pub fp_score: (f64, f64),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            fp_rate: 2.0,
            dropout: 0.1,
            jitter: 2.0,
            true_score: (2.0, 0.25),
            fp_score: (0.0, 0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrismSpec {
    /// Pixels between adjacent cells.
    pub stride: f64,
    pub levels: usize,
    /// Box size ratio between adjacent levels.
    pub level_ratio: f64,
    /// Standard deviation of a bump, in cells.
    pub bump_width: f64,
    pub bump_amplitude: f64,
    /// Distractor bumps per frame, placed uniformly at random.
    pub distractors: usize,
    pub distractor_amplitude: f64,
    /// Standard deviation of the per-cell noise floor.
    pub noise: f64,
    /// Factor on the true bump in frames where the object drops out.
    pub attenuation: f64,
}

impl Default for PrismSpec {
    fn default() -> Self {
        PrismSpec {
            stride: 16.0,
            levels: 3,
            level_ratio: 1.25,
            bump_width: 1.0,
            bump_amplitude: 2.0,
            distractors: 2,
            distractor_amplitude: 1.5,
            noise: 0.1,
            attenuation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub frame_size: FrameSize,
    /// True box per frame; its length is the number of frames.
    pub truth: Vec<ScoredBox>,
    pub noise: NoiseSpec,
    pub prism: PrismSpec,
}

impl Scenario {
    /// Box of size `size` moving from `start` by `velocity` pixels per frame.
    pub fn linear(
        seed: u64,
        frame_size: FrameSize,
        frames: usize,
        start: (f64, f64),
        velocity: (f64, f64),
        size: (f64, f64),
    ) -> Result<Self> {
        let truth = (0..frames)
            .map(|t| {
                let k = t as f64;
                ScoredBox::new(
                    t,
                    start.0 + k * velocity.0,
                    start.1 + k * velocity.1,
                    size.0,
                    size.1,
                    0.0,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let sc = Scenario {
            seed,
            frame_size,
            truth,
            noise: NoiseSpec::default(),
            prism: PrismSpec::default(),
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn frames(&self) -> usize {
        self.truth.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.noise;
        let p = &self.prism;
        let prob = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        prob(n.dropout, "dropout")?;
        prob(p.attenuation, "attenuation")?;
        let non_negative = [
            (n.fp_rate, "fp_rate"),
            (n.jitter, "jitter"),
            (n.true_score.1, "true score deviation"),
            (n.fp_score.1, "false-positive score deviation"),
            (p.noise, "noise"),
        ];
        for (v, name) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        let positive = [
            (p.stride, "stride"),
            (p.level_ratio, "level_ratio"),
            (p.bump_width, "bump_width"),
        ];
        for (v, name) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if p.levels == 0 {
            return Err(Error::InvalidParameter("levels must be at least 1".into()));
        }
        for (t, b) in self.truth.iter().enumerate() {
            if b.frame != t {
                return Err(Error::FrameMismatch {
                    expected: t,
                    found: b.frame,
                });
            }
            b.validate()?;
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn normal(mean: f64, std: f64) -> Normal<f64> {
    Normal::new(mean, std).expect("validated deviation")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionScenario {
    pub frames: Vec<FrameDetections>,
    pub truth: Vec<ScoredBox>,
    /// Frames whose true box was not emitted.
    pub dropped: Vec<bool>,
}

/// Noisy per-frame detections. The true box, when emitted, comes first and
/// carries `source_id` 1; false positives carry 0.
pub fn gen_detections(sc: &Scenario) -> Result<DetectionScenario> {
    sc.validate()?;
    let n = &sc.noise;
    let mut rng = sc.rng(0);
    let true_score = normal(n.true_score.0, n.true_score.1);
    let fp_score = normal(n.fp_score.0, n.fp_score.1);
    let jitter = normal(0.0, n.jitter);
    let fp_count = (n.fp_rate > 0.0).then(|| Poisson::new(n.fp_rate).expect("validated rate"));

    let mut frames = Vec::with_capacity(sc.frames());
    let mut dropped = Vec::with_capacity(sc.frames());
    for truth in &sc.truth {
        let t = truth.frame;
        let mut boxes = Vec::new();
        let drop = rng.random::<f64>() < n.dropout;
        if !drop {
            let (mut cx, mut cy) = (truth.cx, truth.cy);
            if n.jitter > 0.0 {
                cx += jitter.sample(&mut rng);
                cy += jitter.sample(&mut rng);
            }
            let score = true_score.sample(&mut rng);
            boxes.push(ScoredBox::new(t, cx, cy, truth.w, truth.h, score)?.with_source(1));
        }
        let count = fp_count.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..count {
            let cx = rng.random::<f64>() * sc.frame_size.width;
            let cy = rng.random::<f64>() * sc.frame_size.height;
            let score = fp_score.sample(&mut rng);
            boxes.push(ScoredBox::new(t, cx, cy, truth.w, truth.h, score)?);
        }
        frames.push(FrameDetections::new(t, boxes)?);
        dropped.push(drop);
    }
    Ok(DetectionScenario {
        frames,
        truth: sc.truth.clone(),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismScenario {
    pub prisms: Vec<DetectionPrism>,
    /// Cell nearest the true box in each frame.
    pub truth_cells: Vec<Cell>,
    pub truth: Vec<ScoredBox>,
    /// Frames whose true bump was attenuated.
    pub dropped: Vec<bool>,
}

/// Grid layout of a scenario's prisms: dimensions and per-level box sizes.
/// Level `levels / 2` holds the first true box's size.
pub fn prism_layout(sc: &Scenario) -> ([usize; 3], Vec<(f64, f64)>) {
    let p = &sc.prism;
    let nx = (sc.frame_size.width / p.stride).floor() as usize + 1;
    let ny = (sc.frame_size.height / p.stride).floor() as usize + 1;
    let (w0, h0) = sc.truth.first().map_or((1.0, 1.0), |b| (b.w, b.h));
    let mid = (p.levels / 2) as i32;
    let sizes = (0..p.levels as i32)
        .map(|s| {
            let k = p.level_ratio.powi(s - mid);
            (w0 * k, h0 * k)
        })
        .collect();
    ([nx, ny, p.levels], sizes)
}

fn nearest_cell(b: &ScoredBox, dims: [usize; 3], stride: f64, sizes: &[(f64, f64)]) -> Cell {
    let clamp = |v: f64, n: usize| (v / stride).round().clamp(0.0, (n - 1) as f64) as usize;
    let mut s = 0;
    let mut best = f64::INFINITY;
    for (i, &(w, h)) in sizes.iter().enumerate() {
        let d = (b.w / w).ln().powi(2) + (b.h / h).ln().powi(2);
        if d < best {
            best = d;
            s = i;
        }
    }
    Cell::new(clamp(b.cx, dims[0]), clamp(b.cy, dims[1]), s)
}

fn add_bump(values: &mut [f64], dims: [usize; 3], at: Cell, amplitude: f64, width: f64) {
    let [nx, ny, ns] = dims;
    let inv = 1.0 / (2.0 * width * width);
    for x in 0..nx {
        let dx = x as f64 - at.x as f64;
        for y in 0..ny {
            let dy = y as f64 - at.y as f64;
            for s in 0..ns {
                let ds = s as f64 - at.s as f64;
                values[(x * ny + y) * ns + s] += amplitude * (-(dx * dx + dy * dy + ds * ds) * inv).exp();
            }
        }
    }
}

/// Score prisms with a bump on the true cell, random distractor bumps and
/// a Gaussian noise floor. In dropout frames the true bump is scaled by
/// [`PrismSpec::attenuation`].
pub fn gen_prisms(sc: &Scenario) -> Result<PrismScenario> {
    sc.validate()?;
    let p = &sc.prism;
    let (dims, sizes) = prism_layout(sc);
    let [nx, ny, ns] = dims;
    let n = nx * ny * ns;
    let mut rng = sc.rng(1);
    let floor = normal(0.0, p.noise);

    let mut prisms = Vec::with_capacity(sc.frames());
    let mut truth_cells = Vec::with_capacity(sc.frames());
    let mut dropped = Vec::with_capacity(sc.frames());
    for truth in &sc.truth {
        let drop = rng.random::<f64>() < sc.noise.dropout;
        let cell = nearest_cell(truth, dims, p.stride, &sizes);
        let mut values = vec![0.0; n];
        if p.noise > 0.0 {
            for v in values.iter_mut() {
                *v = floor.sample(&mut rng);
            }
        }
        let amplitude = if drop {
            p.bump_amplitude * p.attenuation
        } else {
            p.bump_amplitude
        };
        add_bump(&mut values, dims, cell, amplitude, p.bump_width);
        for _ in 0..p.distractors {
            let at = Cell::new(
                rng.random_range(0..nx),
                rng.random_range(0..ny),
                rng.random_range(0..ns),
            );
            add_bump(&mut values, dims, at, p.distractor_amplitude, p.bump_width);
        }
        let grid = Grid3D::new(dims, values, [1.0, 1.0, 1.0])?;
        prisms.push(DetectionPrism::new(
            truth.frame,
            grid,
            ScaleMap::uniform(ns),
            p.stride,
            1.0,
            sizes.clone(),
        )?);
        truth_cells.push(cell);
        dropped.push(drop);
    }
    Ok(PrismScenario {
        prisms,
        truth_cells,
        truth: sc.truth.clone(),
        dropped,
    })
}

const SIZE_MEAN: (f64, f64) = (4.158_883_083_359_671_7, 4.852_030_263_919_617); // ln 64, ln 128
const X_VAR: f64 = 0.02;
const Y_VAR: f64 = 0.25;
const SIZE_VAR: f64 = 1.0;

fn state_at(x: f64) -> StateEmission {
    StateEmission::Gaussian {
        mean: [x, 0.5, SIZE_MEAN.0, SIZE_MEAN.1],
        var: [X_VAR, Y_VAR, SIZE_VAR, SIZE_VAR],
    }
}

fn ln_rows(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter().map(|r| r.into_iter().map(f64::ln).collect()).collect()
}

/// Hand-written event models over normalized box features:
/// `translate-right`, `stationary` and `approach-then-carry`.
pub fn fixture_models() -> Vec<HmmModel> {
    let xs = [0.2, 0.5, 0.8];
    let emissions: Vec<StateEmission> = xs.iter().map(|&x| state_at(x)).collect();

    let translate = HmmModel::new(
        "translate-right",
        vec![0.9f64.ln(), 0.05f64.ln(), 0.05f64.ln()],
        ln_rows(vec![
            vec![0.8, 0.19, 0.01],
            vec![0.01, 0.8, 0.19],
            vec![0.01, 0.01, 0.98],
        ]),
        emissions.clone(),
    );
    let stay = 0.998;
    let jump = (1.0 - stay) / 2.0;
    let stationary = HmmModel::with_uniform_init(
        "stationary",
        ln_rows(vec![
            vec![stay, jump, jump],
            vec![jump, stay, jump],
            vec![jump, jump, stay],
        ]),
        emissions,
    );
    let carry = HmmModel::new(
        "approach-then-carry",
        vec![0.8f64.ln(), 0.1f64.ln(), 0.1f64.ln()],
        ln_rows(vec![
            vec![0.7, 0.29, 0.01],
            vec![0.05, 0.6, 0.35],
            vec![0.01, 0.04, 0.95],
        ]),
        vec![state_at(0.3), state_at(0.45), state_at(0.7)],
    );
    [translate, stationary, carry]
        .into_iter()
        .map(|m| m.expect("fixture models are valid"))
        .collect()
}

/// Looks up a fixture model by name.
pub fn fixture_model(name: &str) -> Option<HmmModel> {
    fixture_models().into_iter().find(|m| m.name() == name)
}
