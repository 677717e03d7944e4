//! Agreement between two sets of track annotations of the same videos.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::detection::ScoredBox;
use crate::error::{Error, Result};

/// Default cap on the track count of the larger side of a comparison.
pub const DEFAULT_PERMUTATION_CAP: usize = 8;

/// Axis-aligned rectangle given by its corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Rect {
    /// Rectangle from two corners in any order.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox("rectangle corners must be finite".into()));
        }
        Ok(Rect {
            x1: x1.min(x2),
            y1: y1.min(y2),
            x2: x1.max(x2),
            y2: y1.max(y2),
        })
    }

    /// Axis-aligned bounding rectangle of a set of points, e.g. the corners
    /// of an annotated quadrilateral.
    pub fn bounding(points: &[(f64, f64)]) -> Result<Self> {
        let (&(x0, y0), rest) = points
            .split_first()
            .ok_or_else(|| Error::InvalidBox("no points to bound".into()))?;
        let (mut lo, mut hi) = ((x0, y0), (x0, y0));
        for &(x, y) in rest {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        Rect::new(lo.0, lo.1, hi.0, hi.1)
    }

    pub fn from_box(b: &ScoredBox) -> Self {
        let (x1, y1, x2, y2) = b.corners();
        Rect { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Intersection over union of two rectangles.
pub fn overlap(a: &Rect, b: &Rect) -> Result<f64> {
    if !(a.area() > 0.0 && b.area() > 0.0) {
        return Err(Error::InvalidBox("overlap of a zero-area rectangle".into()));
    }
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    Ok(inter / (a.area() + b.area() - inter))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    Person,
    Nonperson,
}

impl Class {
    /// `person` and `human` (any case) are people; every other label is not.
    pub fn from_label(label: &str) -> Class {
        match label.to_ascii_lowercase().as_str() {
            "person" | "human" => Class::Person,
            _ => Class::Nonperson,
        }
    }
}

impl std::str::FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "person" => Ok(Class::Person),
            "nonperson" => Ok(Class::Nonperson),
            other => Err(Error::InvalidParameter(format!("unknown class '{other}'"))),
        }
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Class::Person => "person",
            Class::Nonperson => "nonperson",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedTrack {
    pub id: String,
    pub label: String,
    pub boxes: BTreeMap<usize, Rect>,
}

impl AnnotatedTrack {
    pub fn class(&self) -> Class {
        Class::from_label(&self.label)
    }
}

/// One team's tracks for one video, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub video: String,
    tracks: Vec<AnnotatedTrack>,
}

impl AnnotationSet {
    pub fn new(video: impl Into<String>) -> Self {
        AnnotationSet {
            video: video.into(),
            tracks: Vec::new(),
        }
    }

    /// Adds one box. A track's label is fixed by its first box.
    pub fn insert(&mut self, track: &str, label: &str, frame: usize, rect: Rect) -> Result<()> {
        let pos = match self.tracks.iter().position(|t| t.id == track) {
            Some(p) => p,
            None => {
                self.tracks.push(AnnotatedTrack {
                    id: track.to_string(),
                    label: label.to_string(),
                    boxes: BTreeMap::new(),
                });
                self.tracks.len() - 1
            }
        };
        let t = &mut self.tracks[pos];
        if t.label != label {
            return Err(Error::InvalidParameter(format!(
                "track '{track}' relabelled from '{}' to '{label}'",
                t.label
            )));
        }
        if t.boxes.insert(frame, rect).is_some() {
            return Err(Error::InvalidParameter(format!(
                "track '{track}' has two boxes in frame {frame}"
            )));
        }
        Ok(())
    }

    pub fn tracks(&self) -> &[AnnotatedTrack] {
        &self.tracks
    }

    pub fn tracks_of(&self, class: Class) -> Vec<&AnnotatedTrack> {
        self.tracks.iter().filter(|t| t.class() == class).collect()
    }
}

/// Overlaps of two tracks on the frames both annotate, in frame order.
pub fn shared_overlaps(a: &AnnotatedTrack, b: &AnnotatedTrack) -> Result<Vec<f64>> {
    a.boxes
        .iter()
        .filter_map(|(f, ra)| b.boxes.get(f).map(|rb| overlap(ra, rb)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationResult {
    /// Matched `(u track index, v track index)` pairs, indexing the
    /// class-filtered track lists.
    pub mapping: Vec<(usize, usize)>,
    /// Every overlap under the mapping.
    pub overlaps: Vec<f64>,
    /// Mean of `overlaps`; `None` without shared frames.
    pub mean: Option<f64>,
}

/// Calls `visit` with every injective map from `0..small` into `0..large`,
/// in lexicographic order.
fn for_each_injection(small: usize, large: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(
        pos: usize,
        large: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        small: usize,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if pos == small {
            visit(cur);
            return;
        }
        for i in 0..large {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(pos + 1, large, used, cur, small, visit);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(
        0,
        large,
        &mut vec![false; large],
        &mut Vec::with_capacity(small),
        small,
        visit,
    );
}

/// Best mapping between the `class` tracks of `u` and `v`, searching every
/// injective map from the smaller side into the larger.
///
/// Mappings with no shared frame rank below every mapping with one; ties
/// keep the first mapping in enumeration order.
pub fn best_permutation(u: &AnnotationSet, v: &AnnotationSet, class: Class, cap: usize) -> Result<PermutationResult> {
    let tu = u.tracks_of(class);
    let tv = v.tracks_of(class);
    let larger = tu.len().max(tv.len());
    if larger > cap {
        return Err(Error::PermutationSpaceTooLarge { tracks: larger, cap });
    }
    // pair_overlaps[i][j]: overlaps of u track i with v track j.
    let pair_overlaps = tu
        .iter()
        .map(|a| tv.iter().map(|b| shared_overlaps(a, b)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let u_small = tu.len() <= tv.len();
    let (small, large) = if u_small {
        (tu.len(), tv.len())
    } else {
        (tv.len(), tu.len())
    };

    // Mapping and its mean overlap.
    type Candidate = (Vec<(usize, usize)>, Option<f64>);
    let mut best: Option<Candidate> = None;
    for_each_injection(small, large, &mut |rho| {
        let mapping: Vec<(usize, usize)> = rho
            .iter()
            .enumerate()
            .map(|(i, &j)| if u_small { (i, j) } else { (j, i) })
            .collect();
        let (sum, count) = mapping.iter().fold((0.0, 0), |(s, c), &(i, j)| {
            let o = &pair_overlaps[i][j];
            (s + o.iter().sum::<f64>(), c + o.len())
        });
        let mean = (count > 0).then(|| sum / count as f64);
        let better = match (&best, mean) {
            (None, _) => true,
            (Some((_, None)), Some(_)) => true,
            (Some((_, Some(b))), Some(m)) => m > *b,
            _ => false,
        };
        if better {
            best = Some((mapping, mean));
        }
    });

    let (mapping, mean) = best.unwrap_or_default();
    let overlaps = mapping
        .iter()
        .flat_map(|&(i, j)| pair_overlaps[i][j].iter().copied())
        .collect();
    Ok(PermutationResult {
        mapping,
        overlaps,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoAgreement {
    pub video: String,
    pub permutation: PermutationResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementReport {
    pub videos: Vec<VideoAgreement>,
    /// Mean over every per-frame overlap in the corpus.
    pub mean: f64,
    /// Population standard deviation of the same overlaps.
    pub std: f64,
    /// Number of videos compared.
    pub n: usize,
    /// Number of overlaps pooled.
    pub overlaps: usize,
}

/// Pools per-frame overlaps under each video's best mapping.
pub fn corpus_agreement(pairs: &[(AnnotationSet, AnnotationSet)], class: Class, cap: usize) -> Result<AgreementReport> {
    let videos = pairs
        .par_iter()
        .map(|(u, v)| {
            if u.video != v.video {
                return Err(Error::InvalidParameter(format!(
                    "comparing video '{}' with '{}'",
                    u.video, v.video
                )));
            }
            Ok(VideoAgreement {
                video: u.video.clone(),
                permutation: best_permutation(u, v, class, cap)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled: Vec<f64> = videos
        .iter()
        .flat_map(|v| v.permutation.overlaps.iter().copied())
        .collect();
    if pooled.is_empty() {
        return Err(Error::NoSharedFrames);
    }
    let count = pooled.len() as f64;
    let mean = pooled.iter().sum::<f64>() / count;
    let var = pooled.iter().map(|o| (o - mean) * (o - mean)).sum::<f64>() / count;
    Ok(AgreementReport {
        n: videos.len(),
        videos,
        mean,
        std: var.sqrt(),
        overlaps: pooled.len(),
    })
}

/// Aligned text table with one `(N, mean, std)` row per named comparison.
pub fn render_table(rows: &[(String, &AgreementReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(10);
    let mut out = format!("{:<width$}  {:>5}  {:>8}  {:>8}\n", "comparison", "N", "mu", "sigma");
    for (name, r) in rows {
        let _ = writeln!(out, "{name:<width$}  {:>5}  {:>8.4}  {:>8.4}", r.n, r.mean, r.std);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64, y: f64) -> Rect {
        Rect::new(x, y, x + 1.0, y + 1.0).unwrap()
    }

    #[test]
    fn overlap_cases() {
        assert_eq!(overlap(&unit(0.0, 0.0), &unit(0.0, 0.0)).unwrap(), 1.0);
        assert_eq!(overlap(&unit(0.0, 0.0), &unit(3.0, 0.0)).unwrap(), 0.0);
        assert!((overlap(&unit(0.0, 0.0), &unit(0.5, 0.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let flat = Rect::new(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(overlap(&flat, &unit(0.0, 0.0)).is_err());
    }

    #[test]
    fn bounding_of_quadrilateral() {
        let r = Rect::bounding(&[(1.0, 2.0), (3.0, 1.0), (2.5, 4.0), (0.5, 3.0)]).unwrap();
        assert_eq!(
            r,
            Rect {
                x1: 0.5,
                y1: 1.0,
                x2: 3.0,
                y2: 4.0
            }
        );
    }

    #[test]
    fn class_rule() {
        assert_eq!(Class::from_label("Human"), Class::Person);
        assert_eq!(Class::from_label("person"), Class::Person);
        assert_eq!(Class::from_label("car"), Class::Nonperson);
    }

    #[test]
    fn duplicate_frame_rejected() {
        let mut s = AnnotationSet::new("v");
        s.insert("a", "person", 0, unit(0.0, 0.0)).unwrap();
        assert!(s.insert("a", "person", 0, unit(1.0, 0.0)).is_err());
        assert!(s.insert("a", "car", 1, unit(1.0, 0.0)).is_err());
    }

    #[test]
    fn two_by_two_picks_the_better_pairing() {
        let mut u = AnnotationSet::new("v");
        let mut v = AnnotationSet::new("v");
        for f in 0..4 {
            u.insert("p", "person", f, unit(0.0, 0.0)).unwrap();
            u.insert("q", "person", f, unit(10.0, 0.0)).unwrap();
            v.insert("a", "person", f, unit(10.0, 0.0)).unwrap();
            v.insert("b", "person", f, unit(0.0, 0.0)).unwrap();
        }
        let r = best_permutation(&u, &v, Class::Person, 8).unwrap();
        assert_eq!(r.mapping, vec![(0, 1), (1, 0)]);
        assert_eq!(r.mean, Some(1.0));
    }

    #[test]
    fn disjoint_frames_give_no_mean() {
        let mut u = AnnotationSet::new("v");
        let mut v = AnnotationSet::new("v");
        u.insert("p", "person", 0, unit(0.0, 0.0)).unwrap();
        v.insert("p", "person", 5, unit(0.0, 0.0)).unwrap();
        let r = best_permutation(&u, &v, Class::Person, 8).unwrap();
        assert_eq!(r.mean, None);
        assert!(matches!(
            corpus_agreement(&[(u, v)], Class::Person, 8),
            Err(Error::NoSharedFrames)
        ));
    }

    #[test]
    fn cap_enforced() {
        let mut u = AnnotationSet::new("v");
        for i in 0..3 {
            u.insert(&i.to_string(), "person", 0, unit(0.0, 0.0)).unwrap();
        }
        let v = AnnotationSet::new("v");
        assert!(matches!(
            best_permutation(&u, &v, Class::Person, 2),
            Err(Error::PermutationSpaceTooLarge { tracks: 3, cap: 2 })
        ));
    }

    #[test]
    fn population_std() {
        let mut u = AnnotationSet::new("v");
        let mut v = AnnotationSet::new("v");
        u.insert("p", "person", 0, unit(0.0, 0.0)).unwrap();
        u.insert("p", "person", 1, unit(0.0, 0.0)).unwrap();
        v.insert("p", "person", 0, unit(0.0, 0.0)).unwrap();
        v.insert("p", "person", 1, unit(5.0, 0.0)).unwrap();
        let r = corpus_agreement(&[(u, v)], Class::Person, 8).unwrap();
        assert_eq!((r.mean, r.std, r.n, r.overlaps), (0.5, 0.5, 1, 2));
        assert!(render_table(&[("a-b".into(), &r)]).contains("0.5000"));
    }
}
