//! Annotation file: `video track label frame x1 y1 x2 y2` per box. A record
//! with eight coordinates instead of four is a quadrilateral, stored as its
//! bounding rectangle.

use std::fmt::Write as _;

use super::{at_line, body, header};
use crate::error::{Error, Result};
use crate::eval::{AnnotationSet, Rect};

pub const KIND: &str = "annot";

/// One [`AnnotationSet`] per video, in order of first appearance.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationSet>> {
    let mut sets: Vec<AnnotationSet> = Vec::new();
    for line in body(text, KIND)? {
        if line.is_comment() {
            continue;
        }
        let mut f = line.fields();
        let video = f.str("video")?;
        let track = f.str("track")?;
        let label = f.str("label")?;
        let frame: usize = f.parse("frame")?;
        let coords = f.rest();
        let values = coords
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::parse(line.number, format!("bad coordinate '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rect = match values.len() {
            4 => at_line(line.number, Rect::new(values[0], values[1], values[2], values[3]))?,
            8 => {
                let points: Vec<(f64, f64)> = values.chunks(2).map(|p| (p[0], p[1])).collect();
                at_line(line.number, Rect::bounding(&points))?
            }
            n => {
                return Err(Error::parse(
                    line.number,
                    format!("expected 4 or 8 coordinates, found {n}"),
                ));
            }
        };
        let pos = match sets.iter().position(|s| s.video == video) {
            Some(p) => p,
            None => {
                sets.push(AnnotationSet::new(video));
                sets.len() - 1
            }
        };
        at_line(line.number, sets[pos].insert(track, label, frame, rect))?;
    }
    Ok(sets)
}

pub fn format_annotations(sets: &[AnnotationSet]) -> String {
    let mut out = header(KIND);
    out.push('\n');
    for s in sets {
        for t in s.tracks() {
            for (frame, r) in &t.boxes {
                let _ = writeln!(
                    out,
                    "{} {} {} {frame} {} {} {} {}",
                    s.video, t.id, t.label, r.x1, r.y1, r.x2, r.y2
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_groups_by_video() {
        let text = "#lattice-fusion/annot/v1\n\
                    v1 a person 0 0 0 2 2\n\
                    v2 a car 0 0 0 1 1\n\
                    v1 a person 1 0 0 1 0 1 1 0 1\n";
        let sets = parse_annotations(text).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].tracks()[0].boxes.len(), 2);
        assert_eq!(parse_annotations(&format_annotations(&sets)).unwrap(), sets);
        let dup = "#lattice-fusion/annot/v1\nv a person 0 0 0 1 1\nv a person 0 0 0 1 1\n";
        assert!(matches!(parse_annotations(dup), Err(Error::Parse { line: 3, .. })));
    }
}
