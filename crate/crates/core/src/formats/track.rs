//! Track file: one `frame cx cy w h chosen_index projected` record per
//! frame. `chosen_index` is the detection index within its frame, or the
//! linear cell index for prism tracks; `projected` is 0 or 1.

use std::fmt::Write as _;

use super::{body, header};
use crate::error::{Error, Result};
use crate::pyramid::{DetectionPrism, PrismTrack};
use crate::tracking::Track;

pub const KIND: &str = "track";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub index: usize,
    pub projected: bool,
}

pub fn track_records(track: &Track) -> Vec<TrackRecord> {
    track
        .picks
        .iter()
        .zip(&track.indices)
        .map(|(b, &index)| TrackRecord {
            frame: b.frame,
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            index,
            projected: b.projected,
        })
        .collect()
}

pub fn prism_track_records(track: &PrismTrack, prisms: &[DetectionPrism]) -> Vec<TrackRecord> {
    track
        .boxes
        .iter()
        .zip(&track.cells)
        .zip(prisms)
        .map(|((b, &c), p)| TrackRecord {
            frame: b.frame,
            cx: b.cx,
            cy: b.cy,
            w: b.w,
            h: b.h,
            index: p.index(c),
            projected: false,
        })
        .collect()
}

pub fn format_track(records: &[TrackRecord]) -> String {
    let mut out = header(KIND);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.frame,
            r.cx,
            r.cy,
            r.w,
            r.h,
            r.index,
            u8::from(r.projected)
        );
    }
    out
}

pub fn parse_track(text: &str) -> Result<Vec<TrackRecord>> {
    body(text, KIND)?
        .into_iter()
        .filter(|l| !l.is_comment())
        .map(|line| {
            let mut f = line.fields();
            let r = TrackRecord {
                frame: f.parse("frame")?,
                cx: f.parse("cx")?,
                cy: f.parse("cy")?,
                w: f.parse("w")?,
                h: f.parse("h")?,
                index: f.parse("chosen_index")?,
                projected: match f.str("projected")? {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::parse(
                            line.number,
                            format!("projected flag must be 0 or 1, got '{other}'"),
                        ))
                    }
                },
            };
            f.finish()?;
            Ok(r)
        })
        .collect()
}
