//! Detections file: one `frame cx cy w h score source_id` record per
//! detection. A `#frames first count` line fixes the frame range so that
//! frames without detections survive a round trip; without it the range
//! spans the first to the last recorded frame.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{at_line, body, header};
use crate::detection::{FrameDetections, ScoredBox};
use crate::error::{Error, Result};

pub const KIND: &str = "detections";

pub fn format_detections(frames: &[FrameDetections]) -> String {
    let mut out = header(KIND);
    out.push('\n');
    let first = frames.first().map_or(0, |f| f.frame);
    let _ = writeln!(out, "#frames {first} {}", frames.len());
    for f in frames {
        for b in f.boxes() {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {} {}",
                b.frame, b.cx, b.cy, b.w, b.h, b.score, b.source_id
            );
        }
    }
    out
}

pub fn parse_detections(text: &str) -> Result<Vec<FrameDetections>> {
    let mut range: Option<(usize, usize)> = None;
    let mut by_frame: BTreeMap<usize, Vec<ScoredBox>> = BTreeMap::new();
    let mut first_line: BTreeMap<usize, usize> = BTreeMap::new();
    for line in body(text, KIND)? {
        if let Some(mut f) = line.meta("frames") {
            let first = f.parse("first")?;
            let count = f.parse("count")?;
            f.finish()?;
            range = Some((first, count));
            continue;
        }
        if line.is_comment() {
            continue;
        }
        let mut f = line.fields();
        let frame: usize = f.parse("frame")?;
        let cx = f.parse("cx")?;
        let cy = f.parse("cy")?;
        let w = f.parse("w")?;
        let h = f.parse("h")?;
        let score = f.parse("score")?;
        let source: u32 = f.parse("source_id")?;
        f.finish()?;
        let b = at_line(line.number, ScoredBox::new(frame, cx, cy, w, h, score))?.with_source(source);
        by_frame.entry(frame).or_default().push(b);
        first_line.entry(frame).or_insert(line.number);
    }
    let (first, count) = match range {
        Some(r) => r,
        None => match (by_frame.keys().next(), by_frame.keys().next_back()) {
            (Some(&lo), Some(&hi)) => (lo, hi - lo + 1),
            _ => (0, 0),
        },
    };
    if let Some((&frame, &line)) = first_line.iter().find(|(&f, _)| f < first || f >= first + count) {
        return Err(Error::parse(
            line,
            format!("frame {frame} outside the declared range {first}..{}", first + count),
        ));
    }
    (first..first + count)
        .map(|t| FrameDetections::new(t, by_frame.remove(&t).unwrap_or_default()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_empty_frames() {
        let b = ScoredBox::new(3, 1.5, 2.0, 3.0, 4.0, 0.1 + 0.2).unwrap().with_source(7);
        let frames = vec![
            FrameDetections::new(2, vec![]).unwrap(),
            FrameDetections::new(3, vec![b]).unwrap(),
            FrameDetections::empty(4),
        ];
        let text = format_detections(&frames);
        assert_eq!(parse_detections(&text).unwrap(), frames);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "#lattice-fusion/detections/v1\n0 1 1 1 1 0 0\n0 1 1 -1 1 0 0\n";
        assert!(matches!(parse_detections(text), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(
            parse_detections("0 1 1 1 1 0 0"),
            Err(Error::Parse { line: 1, .. })
        ));
        let short = "#lattice-fusion/detections/v1\n0 1 1 1 1 0\n";
        assert!(matches!(parse_detections(short), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn range_from_records() {
        let text = "#lattice-fusion/detections/v1\n1 0 0 1 1 0 0\n3 0 0 1 1 0 0\n";
        let frames = parse_detections(text).unwrap();
        assert_eq!(
            frames.iter().map(|f| (f.frame, f.len())).collect::<Vec<_>>(),
            vec![(1, 1), (2, 0), (3, 1)]
        );
    }
}
