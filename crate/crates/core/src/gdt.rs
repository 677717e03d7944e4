//! Generalized distance transform under a (weighted) squared Euclidean
//! distance, in the max domain:
//!
//! ```text
//! D(q) = max_p  values[p] - w * (p - q)^2
//! ```
//!
//! The 1-D transform is the lower envelope of parabolas run on the negated
//! values, which is linear in the number of points. The 3-D transform is three
//! sequential 1-D passes, one per axis, so it is linear in the cell count.

use crate::error::{Error, Result};

/// Score of a cell that no track may pass through. Finite so that the
/// parabola intersections stay finite.
pub const IMPOSSIBLE: f64 = -1e30;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    pub values: Vec<f64>,
    pub weight: f64,
}

/// Reusable buffers for the 1-D envelope.
#[derive(Debug, Default, Clone)]
struct Envelope {
    /// Locations of the parabolas on the envelope.
    roots: Vec<usize>,
    /// Boundaries between consecutive envelope parabolas.
    bounds: Vec<f64>,
}

impl Envelope {
    fn run(&mut self, values: &[f64], weight: f64, out: &mut [f64], arg: &mut [usize]) {
        let n = values.len();
        debug_assert!(n >= 1 && out.len() == n && arg.len() == n);
        debug_assert!(weight >= 0.0);

        if weight == 0.0 {
            let mut best = 0;
            for p in 1..n {
                if values[p] > values[best] {
                    best = p;
                }
            }
            out.fill(values[best]);
            arg.fill(best);
            return;
        }

        self.roots.clear();
        self.bounds.clear();
        self.roots.push(0);
        self.bounds.push(f64::NEG_INFINITY);
        self.bounds.push(f64::INFINITY);

        // Intersection of the (min-form) parabolas rooted at p < q.
        let intersect = |p: usize, q: usize| -> f64 {
            let (pf, qf) = (p as f64, q as f64);
            ((values[p] - values[q]) / weight + qf * qf - pf * pf) / (2.0 * (qf - pf))
        };

        for q in 1..n {
            let mut s = intersect(*self.roots.last().unwrap(), q);
            while s <= self.bounds[self.roots.len() - 1] {
                self.roots.pop();
                self.bounds.pop();
                s = intersect(*self.roots.last().unwrap(), q);
            }
            let k = self.roots.len();
            self.roots.push(q);
            self.bounds[k] = s;
            self.bounds.push(f64::INFINITY);
        }

        let mut k = 0;
        for q in 0..n {
            while self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.roots[k];
            let d = q as f64 - p as f64;
            out[q] = values[p] - weight * d * d;
            arg[q] = p;
        }
    }
}

/// Max-domain 1-D transform. Returns the transformed values and, per output
/// position, the maximizing input position.
pub fn envelope_1d(grid: &Grid1D) -> (Vec<f64>, Vec<usize>) {
    let n = grid.values.len();
    let mut out = vec![0.0; n];
    let mut arg = vec![0; n];
    if n > 0 {
        Envelope::default().run(&grid.values, grid.weight, &mut out, &mut arg);
    }
    (out, arg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    S,
}

/// Dense `X x Y x S` grid, row-major: the linear index of `(x, y, s)` is
/// `(x * Y + y) * S + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3D {
    dims: [usize; 3],
    values: Vec<f64>,
    /// Quadratic coefficients for the x, y and s axes.
    pub weights: [f64; 3],
}

impl Grid3D {
    pub fn new(dims: [usize; 3], values: Vec<f64>, weights: [f64; 3]) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if n == 0 {
            return Err(Error::DimensionMismatch(format!("empty grid {dims:?}")));
        }
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "grid {dims:?} needs {n} values, got {}",
                values.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and non-negative, got {weights:?}"
            )));
        }
        Ok(Grid3D { dims, values, weights })
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Result<Self> {
        Self::new(dims, vec![value; dims.iter().product()], [0.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn index(&self, x: usize, y: usize, s: usize) -> usize {
        (x * self.dims[1] + y) * self.dims[2] + s
    }

    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let [_, ny, ns] = self.dims;
        (index / (ny * ns), (index / ns) % ny, index % ns)
    }

    pub fn get(&self, x: usize, y: usize, s: usize) -> f64 {
        self.values[self.index(x, y, s)]
    }

    pub fn set(&mut self, x: usize, y: usize, s: usize, v: f64) {
        let i = self.index(x, y, s);
        self.values[i] = v;
    }
}

/// Adjacent lines processed together; one cache line of `f64`.
const LANES: usize = 8;

/// Three-pass transform over a fixed grid shape, reusing its buffers across
/// calls.
#[derive(Debug, Clone)]
pub struct Transform3D {
    dims: [usize; 3],
    weights: [f64; 3],
    order: [Axis; 3],
    envelope: Envelope,
    // Tiles of up to LANES lines, one line after another.
    tile_in: Vec<f64>,
    tile_out: Vec<f64>,
    tile_src: Vec<usize>,
    tile_arg: Vec<usize>,
}

impl Transform3D {
    pub fn new(dims: [usize; 3], weights: [f64; 3]) -> Self {
        Self::with_order(dims, weights, [Axis::S, Axis::Y, Axis::X])
    }

    pub fn with_order(dims: [usize; 3], weights: [f64; 3], order: [Axis; 3]) -> Self {
        let tile = LANES * dims.iter().copied().max().unwrap_or(0);
        Transform3D {
            dims,
            weights,
            order,
            envelope: Envelope::default(),
            tile_in: vec![0.0; tile],
            tile_out: vec![0.0; tile],
            tile_src: vec![0; tile],
            tile_arg: vec![0; tile],
        }
    }

    /// Writes the transform of `values` into `out` and the maximizing source
    /// cell of every cell into `arg`.
    pub fn run(&mut self, values: &[f64], out: &mut [f64], arg: &mut [usize]) {
        let n: usize = self.dims.iter().product();
        assert!(values.len() == n && out.len() == n && arg.len() == n);

        if self.order[2] != Axis::X {
            init(values, out, arg, 0);
            for axis in self.order {
                self.pass(axis, out, arg);
            }
            return;
        }
        // The y and s passes never leave an x-slab, so both run on one slab
        // while it is still in cache.
        let slab = self.dims[1] * self.dims[2];
        for (i, ((v, o), a)) in values
            .chunks(slab)
            .zip(out.chunks_mut(slab))
            .zip(arg.chunks_mut(slab))
            .enumerate()
        {
            init(v, o, a, i * slab);
            self.pass(self.order[0], o, a);
            self.pass(self.order[1], o, a);
        }
        self.pass(Axis::X, out, arg);
    }

    fn pass(&mut self, axis: Axis, values: &mut [f64], arg: &mut [usize]) {
        let [nx, ny, ns] = self.dims;
        let (axis_idx, len, stride) = match axis {
            Axis::X => (0, nx, ny * ns),
            Axis::Y => (1, ny, ns),
            Axis::S => (2, ns, 1),
        };
        let weight = self.weights[axis_idx];
        if len == 1 {
            return;
        }

        // Line starts are the cells whose coordinate along `axis` is 0; within
        // a block they are `stride` consecutive cells, so a tile row is
        // contiguous in memory. Lines are disjoint and each is read in full
        // before it is written.
        let block = stride * len;
        for base in (0..values.len()).step_by(block) {
            let mut first = base;
            while first < base + stride {
                let lanes = LANES.min(base + stride - first);
                for i in 0..len {
                    let row = first + i * stride;
                    for j in 0..lanes {
                        self.tile_in[j * len + i] = values[row + j];
                        self.tile_src[j * len + i] = arg[row + j];
                    }
                }
                for j in 0..lanes {
                    let line = j * len..(j + 1) * len;
                    self.envelope.run(
                        &self.tile_in[line.clone()],
                        weight,
                        &mut self.tile_out[line.clone()],
                        &mut self.tile_arg[line],
                    );
                }
                for i in 0..len {
                    let row = first + i * stride;
                    for j in 0..lanes {
                        values[row + j] = self.tile_out[j * len + i];
                        arg[row + j] = self.tile_src[j * len + self.tile_arg[j * len + i]];
                    }
                }
                first += lanes;
            }
        }
    }
}

fn init(values: &[f64], out: &mut [f64], arg: &mut [usize], offset: usize) {
    out.copy_from_slice(values);
    for (i, a) in arg.iter_mut().enumerate() {
        *a = offset + i;
    }
}

/// Max-domain 3-D transform of `grid` under its per-axis weights. Returns the
/// transformed grid and the maximizing source cell of every cell.
///
/// Passes run over s, then y, then x; the last pass fixes the most
/// significant coordinate, so exact ties resolve per axis toward smaller
/// coordinates, x first.
pub fn transform_3d(grid: &Grid3D) -> (Grid3D, Vec<usize>) {
    transform_3d_ordered(grid, [Axis::S, Axis::Y, Axis::X])
}

/// As [`transform_3d`] with an explicit pass order.
pub fn transform_3d_ordered(grid: &Grid3D, order: [Axis; 3]) -> (Grid3D, Vec<usize>) {
    let mut out = vec![0.0; grid.len()];
    let mut arg = vec![0; grid.len()];
    Transform3D::with_order(grid.dims, grid.weights, order).run(&grid.values, &mut out, &mut arg);
    (
        Grid3D {
            dims: grid.dims,
            values: out,
            weights: grid.weights,
        },
        arg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_1d(values: &[f64], w: f64) -> Vec<f64> {
        (0..values.len())
            .map(|q| {
                values
                    .iter()
                    .enumerate()
                    .map(|(p, v)| v - w * ((p as f64 - q as f64).powi(2)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn flat_and_zero_weight() {
        let (d, _) = envelope_1d(&Grid1D {
            values: vec![0.0; 7],
            weight: 3.0,
        });
        assert!(d.iter().all(|&v| v == 0.0));

        let (d, a) = envelope_1d(&Grid1D {
            values: vec![1.0, 4.0, -2.0, 4.0],
            weight: 0.0,
        });
        assert_eq!(d, vec![4.0; 4]);
        assert_eq!(a, vec![1; 4]);
    }

    #[test]
    fn single_point() {
        let (d, a) = envelope_1d(&Grid1D {
            values: vec![2.5],
            weight: 1.0,
        });
        assert_eq!((d, a), (vec![2.5], vec![0]));
    }

    #[test]
    fn fixed_instance_matches_brute_force() {
        let values = [3.0, -1.0, 0.5, 7.0, 2.0, 2.0, -4.0, 6.5];
        let (d, a) = envelope_1d(&Grid1D {
            values: values.to_vec(),
            weight: 1.0,
        });
        let expect = brute_1d(&values, 1.0);
        for q in 0..values.len() {
            assert!((d[q] - expect[q]).abs() < 1e-12);
            let p = a[q];
            let via_arg = values[p] - (p as f64 - q as f64).powi(2);
            assert!((via_arg - d[q]).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_cells_stay_impossible() {
        let values = [IMPOSSIBLE, IMPOSSIBLE, 1.0, IMPOSSIBLE];
        let (d, a) = envelope_1d(&Grid1D {
            values: values.to_vec(),
            weight: 0.5,
        });
        assert_eq!(a, vec![2; 4]);
        assert_eq!(d, vec![-1.0, 0.5, 1.0, 0.5]);

        let (d, _) = envelope_1d(&Grid1D {
            values: vec![IMPOSSIBLE; 5],
            weight: 1.0,
        });
        assert!(d.iter().all(|&v| v <= IMPOSSIBLE / 2.0));
    }

    #[test]
    fn grid_indexing_round_trips() {
        let g = Grid3D::filled([3, 4, 2], 0.0).unwrap();
        for i in 0..g.len() {
            let (x, y, s) = g.coords(i);
            assert_eq!(g.index(x, y, s), i);
        }
        assert!(Grid3D::new([2, 2, 2], vec![0.0; 7], [1.0; 3]).is_err());
        assert!(Grid3D::new([2, 2, 2], vec![0.0; 8], [1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn single_cell_and_zero_weights() {
        let g = Grid3D::new([1, 1, 1], vec![4.0], [1.0; 3]).unwrap();
        let (t, a) = transform_3d(&g);
        assert_eq!((t.values(), a.as_slice()), (&[4.0][..], &[0][..]));

        let vals: Vec<f64> = (0..24).map(|i| ((i * 7) % 11) as f64).collect();
        let g = Grid3D::new([2, 3, 4], vals, [0.0; 3]).unwrap();
        let (t, a) = transform_3d(&g);
        assert!(t.values().iter().all(|&v| v == 10.0));
        // Smallest linear index holding the maximum.
        let first = g.values().iter().position(|&v| v == 10.0).unwrap();
        assert!(a.iter().all(|&i| i == first));
    }
}
