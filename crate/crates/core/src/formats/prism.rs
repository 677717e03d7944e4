//! Prism file: a sequence of prisms, each written as
//!
//! ```text
//! prism <frame> <X> <Y> <S> <stride> <alpha>
//! scales <pi_0> ... <pi_{S-1}>
//! sizes <w_0> <h_0> ... <w_{S-1}> <h_{S-1}>
//! ```
//!
//! followed by `X * Y` lines of `S` scores each, in `(x, y)` row-major order.

use std::fmt::Write as _;

use super::{at_line, body, header, join, Line};
use crate::error::{Error, Result};
use crate::gdt::Grid3D;
use crate::pyramid::{DetectionPrism, ScaleMap};

pub const KIND: &str = "prism";

pub fn format_prisms(prisms: &[DetectionPrism]) -> String {
    let mut out = header(KIND);
    out.push('\n');
    for p in prisms {
        let [nx, ny, ns] = p.dims();
        let _ = writeln!(out, "prism {} {nx} {ny} {ns} {} {}", p.frame, p.stride(), p.alpha());
        let _ = writeln!(out, "scales {}", join(p.scale_map().factors()));
        let sizes = p.box_sizes().iter().flat_map(|&(w, h)| [w, h]);
        let _ = writeln!(out, "sizes {}", join(sizes));
        for row in p.grid().values().chunks(ns) {
            let _ = writeln!(out, "{}", join(row));
        }
    }
    out
}

pub fn parse_prisms(text: &str) -> Result<Vec<DetectionPrism>> {
    let lines: Vec<Line<'_>> = body(text, KIND)?.into_iter().filter(|l| !l.is_comment()).collect();
    let mut it = lines.iter();
    let mut prisms = Vec::new();
    while let Some(head) = it.next() {
        let mut f = head.fields();
        f.keyword("prism")?;
        let frame = f.parse("frame")?;
        let nx: usize = f.parse("X")?;
        let ny: usize = f.parse("Y")?;
        let ns: usize = f.parse("S")?;
        let stride = f.parse("stride")?;
        let alpha = f.parse("alpha")?;
        f.finish()?;

        let mut next = |what: &str| {
            it.next()
                .ok_or_else(|| Error::parse(head.number, format!("prism at frame {frame} is missing its {what}")))
        };
        let scales_line = next("scales")?;
        let mut f = scales_line.fields();
        f.keyword("scales")?;
        let factors = f.f64s(ns, "scale factor")?;
        f.finish()?;

        let sizes_line = next("sizes")?;
        let mut f = sizes_line.fields();
        f.keyword("sizes")?;
        let flat = f.f64s(2 * ns, "box size")?;
        f.finish()?;
        let sizes = flat.chunks(2).map(|c| (c[0], c[1])).collect();

        let mut values = Vec::with_capacity(nx * ny * ns);
        for _ in 0..nx * ny {
            let row = next("scores")?;
            let mut f = row.fields();
            values.extend(f.f64s(ns, "score")?);
            f.finish()?;
        }
        let scale_map = at_line(scales_line.number, ScaleMap::new(factors))?;
        let grid = at_line(head.number, Grid3D::new([nx, ny, ns], values, [1.0; 3]))?;
        prisms.push(at_line(
            head.number,
            DetectionPrism::new(frame, grid, scale_map, stride, alpha, sizes),
        )?);
    }
    Ok(prisms)
}
