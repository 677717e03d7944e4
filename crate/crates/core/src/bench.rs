//! Runtime scaling of prism tracking: the distance-transform engine against
//! the all-pairs engine over a ladder of cell counts.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gdt::Grid3D;
use crate::pyramid::{track_prisms, track_prisms_quadratic, DetectionPrism, PrismTrack, ScaleMap};

pub const DEFAULT_LADDER: [usize; 4] = [2048, 4096, 8192, 16384];
const LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Cell counts to time; each must be a multiple of 4.
    pub ladder: Vec<usize>,
    pub frames: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Timed samples per engine and size; the minimum is reported.
    pub samples: usize,
    /// Skip the all-pairs engine above this many cells.
    pub quadratic_limit: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ladder: DEFAULT_LADDER.to_vec(),
            frames: 2,
            alpha: 1.0,
            seed: 0,
            samples: 7,
            quadratic_limit: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub cells: usize,
    pub dims: [usize; 3],
    pub linear: Duration,
    pub quadratic: Option<Duration>,
    /// Time ratio to the previous row, when there is one.
    pub linear_ratio: Option<f64>,
    pub quadratic_ratio: Option<f64>,
    /// Whether both engines reached the same objective; `None` when the
    /// all-pairs engine was skipped.
    pub objectives_match: Option<bool>,
}

/// Prism shape `[X, Y, 4]` with `X >= Y` and `X * Y * 4 = cells`.
pub fn dims_for_cells(cells: usize) -> Result<[usize; 3]> {
    if cells == 0 || !cells.is_multiple_of(LEVELS) {
        return Err(Error::InvalidParameter(format!(
            "cell count {cells} must be a positive multiple of {LEVELS}"
        )));
    }
    let plane = cells / LEVELS;
    let mut x = (plane as f64).sqrt().ceil() as usize;
    while !plane.is_multiple_of(x) {
        x += 1;
    }
    Ok([x, plane / x, LEVELS])
}

/// Random uniform-score prisms of shape `dims`.
pub fn random_prisms(dims: [usize; 3], frames: usize, seed: u64) -> Result<Vec<DetectionPrism>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    (0..frames)
        .map(|t| {
            let values = (0..n).map(|_| rng.random_range(0.0..4.0)).collect();
            let grid = Grid3D::new(dims, values, [1.0; 3])?;
            let sizes = (0..dims[2])
                .map(|s| (16.0 * (s + 1) as f64, 32.0 * (s + 1) as f64))
                .collect();
            DetectionPrism::new(t, grid, ScaleMap::uniform(dims[2]), 1.0, 1.0, sizes)
        })
        .collect()
}

/// Each size cycles through distinct inputs covering at least this many
/// cells per frame, so that timed calls do not replay one input.
const POOL_CELLS: usize = 1 << 16;

type Engine = fn(&[DetectionPrism], f64) -> Result<PrismTrack>;

fn cycling<'a>(pool: &'a [Vec<DetectionPrism>], engine: Engine, alpha: f64) -> Box<dyn FnMut() + 'a> {
    let mut next = 0;
    Box::new(move || {
        std::hint::black_box(engine(&pool[next], alpha).ok());
        next = (next + 1) % pool.len();
    })
}

const MIN_SAMPLE: Duration = Duration::from_millis(5);

/// Calls per sample so that one sample lasts at least [`MIN_SAMPLE`].
fn calibrate(run: &mut dyn FnMut()) -> u32 {
    let start = Instant::now();
    run();
    let once = start.elapsed();
    if once >= MIN_SAMPLE {
        1
    } else {
        (MIN_SAMPLE.as_nanos() / once.as_nanos().max(1)) as u32 + 1
    }
}

/// Minimum per-call time of every job. Samples are taken round-robin across
/// the jobs so that a slow stretch of the machine hits every size alike.
fn time_interleaved(samples: usize, jobs: &mut [Box<dyn FnMut() + '_>]) -> Vec<Duration> {
    let reps: Vec<u32> = jobs.iter_mut().map(|j| calibrate(j.as_mut())).collect();
    let mut best = vec![Duration::MAX; jobs.len()];
    for _ in 0..samples.max(1) {
        for ((job, &r), b) in jobs.iter_mut().zip(&reps).zip(best.iter_mut()) {
            let start = Instant::now();
            for _ in 0..r {
                job();
            }
            *b = (*b).min(start.elapsed() / r);
        }
    }
    best
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.frames < 2 {
        return Err(Error::InvalidParameter("bench needs at least 2 frames".into()));
    }
    let mut inputs = Vec::with_capacity(cfg.ladder.len());
    for (i, &cells) in cfg.ladder.iter().enumerate() {
        let dims = dims_for_cells(cells)?;
        let pool = (POOL_CELLS / cells).max(1);
        let seeds = (0..pool).map(|j| cfg.seed ^ ((i as u64) << 32 | j as u64));
        let pool: Vec<Vec<DetectionPrism>> = seeds
            .map(|seed| random_prisms(dims, cfg.frames, seed))
            .collect::<Result<_>>()?;
        let fast = track_prisms(&pool[0], cfg.alpha)?.objective;
        let slow = if cells <= cfg.quadratic_limit {
            Some(track_prisms_quadratic(&pool[0], cfg.alpha)?.objective)
        } else {
            None
        };
        inputs.push((cells, dims, pool, fast, slow));
    }

    let alpha = cfg.alpha;
    let mut jobs: Vec<_> = inputs
        .iter()
        .map(|(.., pool, _, _)| cycling(pool, track_prisms, alpha))
        .collect();
    let linear = time_interleaved(cfg.samples, &mut jobs);
    let mut jobs: Vec<_> = inputs
        .iter()
        .filter(|(.., slow)| slow.is_some())
        .map(|(.., pool, _, _)| cycling(pool, track_prisms_quadratic, alpha))
        .collect();
    let mut quadratic = time_interleaved(cfg.samples, &mut jobs).into_iter();

    let mut rows: Vec<BenchRow> = Vec::with_capacity(inputs.len());
    for (&(cells, dims, _, fast, slow), linear) in inputs.iter().zip(linear) {
        let quadratic = slow.map(|_| quadratic.next().expect("one timing per quadratic job"));
        let prev = rows.last();
        let ratio = |a: Duration, b: Duration| a.as_secs_f64() / b.as_secs_f64();
        rows.push(BenchRow {
            cells,
            dims,
            linear,
            quadratic,
            linear_ratio: prev.map(|p| ratio(linear, p.linear)),
            quadratic_ratio: prev.and_then(|p| Some(ratio(quadratic?, p.quadratic?))),
            objectives_match: slow.map(|s| close(fast, s)),
        });
    }
    Ok(rows)
}

fn opt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
}

/// Aligned text table of a bench run.
pub fn render_report(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:>8}  {:>12}  {:>12}  {:>12}  {:>8}  {:>8}  {:>6}\n",
        "N", "dims", "t_quadratic", "t_linear", "r_quad", "r_lin", "match"
    );
    for r in rows {
        let dims = format!("{}x{}x{}", r.dims[0], r.dims[1], r.dims[2]);
        let quad = r
            .quadratic
            .map_or_else(|| "skipped".to_string(), |d| format!("{:.6}", d.as_secs_f64()));
        let ok = match r.objectives_match {
            Some(true) => "yes",
            Some(false) => "NO",
            None => "n/a",
        };
        let _ = writeln!(
            out,
            "{:>8}  {:>12}  {:>12}  {:>12.6}  {:>8}  {:>8}  {:>6}",
            r.cells,
            dims,
            quad,
            r.linear.as_secs_f64(),
            opt_ratio(r.quadratic_ratio),
            opt_ratio(r.linear_ratio),
            ok
        );
    }
    out
}

/// Plot data: one `N engine seconds` line per measurement.
pub fn plot_data(rows: &[BenchRow]) -> String {
    let mut out = String::from("# N engine seconds\n");
    for r in rows {
        let _ = writeln!(out, "{} linear {}", r.cells, r.linear.as_secs_f64());
        if let Some(q) = r.quadratic {
            let _ = writeln!(out, "{} quadratic {}", r.cells, q.as_secs_f64());
        }
    }
    out
}
