//! Unified result file: `#event <name>` and `#objective <value>` lines, then
//! one `frame x y s k cx cy w h cumulative` record per frame.

use std::fmt::Write as _;

use super::{body, header};
use crate::error::{Error, Result};
use crate::unified::UnifiedResult;

pub const KIND: &str = "unified";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnifiedRecord {
    pub frame: usize,
    pub x: usize,
    pub y: usize,
    pub s: usize,
    pub k: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedFile {
    pub event: String,
    pub objective: f64,
    pub records: Vec<UnifiedRecord>,
}

impl From<&UnifiedResult> for UnifiedFile {
    fn from(r: &UnifiedResult) -> Self {
        let records = r
            .cells
            .iter()
            .zip(&r.states)
            .zip(r.boxes.iter().zip(&r.cumulative))
            .map(|((c, &k), (b, &cumulative))| UnifiedRecord {
                frame: b.frame,
                x: c.x,
                y: c.y,
                s: c.s,
                k,
                cx: b.cx,
                cy: b.cy,
                w: b.w,
                h: b.h,
                cumulative,
            })
            .collect();
        UnifiedFile {
            event: r.event.clone(),
            objective: r.objective,
            records,
        }
    }
}

pub fn format_unified(file: &UnifiedFile) -> String {
    let mut out = header(KIND);
    out.push('\n');
    let _ = writeln!(out, "#event {}", file.event);
    let _ = writeln!(out, "#objective {}", file.objective);
    for r in &file.records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            r.frame, r.x, r.y, r.s, r.k, r.cx, r.cy, r.w, r.h, r.cumulative
        );
    }
    out
}

pub fn parse_unified(text: &str) -> Result<UnifiedFile> {
    let mut event = None;
    let mut objective = None;
    let mut records = Vec::new();
    for line in body(text, KIND)? {
        if let Some(mut f) = line.meta("event") {
            event = Some(f.str("event")?.to_string());
            f.finish()?;
        } else if let Some(mut f) = line.meta("objective") {
            objective = Some(f.parse("objective")?);
            f.finish()?;
        } else if !line.is_comment() {
            let mut f = line.fields();
            records.push(UnifiedRecord {
                frame: f.parse("frame")?,
                x: f.parse("x")?,
                y: f.parse("y")?,
                s: f.parse("s")?,
                k: f.parse("k")?,
                cx: f.parse("cx")?,
                cy: f.parse("cy")?,
                w: f.parse("w")?,
                h: f.parse("h")?,
                cumulative: f.parse("cumulative")?,
            });
            f.finish()?;
        }
    }
    Ok(UnifiedFile {
        event: event.ok_or_else(|| Error::parse(1, "missing '#event' line"))?,
        objective: objective.ok_or_else(|| Error::parse(1, "missing '#objective' line"))?,
        records,
    })
}
