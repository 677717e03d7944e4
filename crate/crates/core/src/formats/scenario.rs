//! Scenario file: `key value...` lines for every [`Scenario`] field and one
//! `truth <frame> <cx> <cy> <w> <h>` line per frame. Missing keys take
//! their defaults.

use std::fmt::Write as _;

use super::{at_line, body, header};
use crate::detection::ScoredBox;
use crate::error::{Error, Result};
use crate::events::FrameSize;
use crate::synth::{NoiseSpec, PrismSpec, Scenario};

pub const KIND: &str = "scenario";

pub fn format_scenario(sc: &Scenario) -> String {
    let n = &sc.noise;
    let p = &sc.prism;
    let mut out = header(KIND);
    out.push('\n');
    let _ = writeln!(out, "seed {}", sc.seed);
    let _ = writeln!(out, "frame_size {} {}", sc.frame_size.width, sc.frame_size.height);
    let _ = writeln!(out, "fp_rate {}", n.fp_rate);
    let _ = writeln!(out, "dropout {}", n.dropout);
    let _ = writeln!(out, "jitter {}", n.jitter);
    let _ = writeln!(out, "true_score {} {}", n.true_score.0, n.true_score.1);
    let _ = writeln!(out, "fp_score {} {}", n.fp_score.0, n.fp_score.1);
    let _ = writeln!(out, "stride {}", p.stride);
    let _ = writeln!(out, "levels {}", p.levels);
    let _ = writeln!(out, "level_ratio {}", p.level_ratio);
    let _ = writeln!(out, "bump_width {}", p.bump_width);
    let _ = writeln!(out, "bump_amplitude {}", p.bump_amplitude);
    let _ = writeln!(out, "distractors {}", p.distractors);
    let _ = writeln!(out, "distractor_amplitude {}", p.distractor_amplitude);
    let _ = writeln!(out, "noise {}", p.noise);
    let _ = writeln!(out, "attenuation {}", p.attenuation);
    for b in &sc.truth {
        let _ = writeln!(out, "truth {} {} {} {} {}", b.frame, b.cx, b.cy, b.w, b.h);
    }
    out
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut sc = Scenario {
        seed: 0,
        frame_size: FrameSize::default(),
        truth: Vec::new(),
        noise: NoiseSpec::default(),
        prism: PrismSpec::default(),
    };
    for line in body(text, KIND)? {
        if line.is_comment() {
            continue;
        }
        let mut f = line.fields();
        let key = f.str("key")?;
        match key {
            "seed" => sc.seed = f.parse(key)?,
            "frame_size" => {
                let (w, h) = (f.parse("width")?, f.parse("height")?);
                sc.frame_size = at_line(line.number, FrameSize::new(w, h))?;
            }
            "fp_rate" => sc.noise.fp_rate = f.parse(key)?,
            "dropout" => sc.noise.dropout = f.parse(key)?,
            "jitter" => sc.noise.jitter = f.parse(key)?,
            "true_score" => sc.noise.true_score = (f.parse("mean")?, f.parse("deviation")?),
            "fp_score" => sc.noise.fp_score = (f.parse("mean")?, f.parse("deviation")?),
            "stride" => sc.prism.stride = f.parse(key)?,
            "levels" => sc.prism.levels = f.parse(key)?,
            "level_ratio" => sc.prism.level_ratio = f.parse(key)?,
            "bump_width" => sc.prism.bump_width = f.parse(key)?,
            "bump_amplitude" => sc.prism.bump_amplitude = f.parse(key)?,
            "distractors" => sc.prism.distractors = f.parse(key)?,
            "distractor_amplitude" => sc.prism.distractor_amplitude = f.parse(key)?,
            "noise" => sc.prism.noise = f.parse(key)?,
            "attenuation" => sc.prism.attenuation = f.parse(key)?,
            "truth" => {
                let frame = f.parse("frame")?;
                let (cx, cy, w, h) = (f.parse("cx")?, f.parse("cy")?, f.parse("w")?, f.parse("h")?);
                sc.truth
                    .push(at_line(line.number, ScoredBox::new(frame, cx, cy, w, h, 0.0))?);
            }
            other => return Err(Error::parse(line.number, format!("unknown key '{other}'"))),
        }
        f.finish()?;
    }
    at_line(1, sc.validate())?;
    Ok(sc)
}
