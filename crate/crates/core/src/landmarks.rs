//! Fingertips, inter-finger valleys and mirrored valleys on the normalized contour.
//!
//! All searches run over the contour arc that starts at A (bottom-left end of
//! the reference line), climbs clockwise over the fingers and ends at B. Along
//! that arc the distance from R rises to a maximum at every fingertip and
//! falls to a minimum at every valley.

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Point};
use crate::normalize::{HandType, NormalizedHand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Finger {
    Thumb = 0,
    Index = 1,
    Middle = 2,
    Ring = 3,
    Little = 4,
}

impl Finger {
    pub const ALL: [Finger; 5] = [Finger::Thumb, Finger::Index, Finger::Middle, Finger::Ring, Finger::Little];

    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Little => "little",
        }
    }
}

/// Landmark names in output order: 5 tips, 4 valleys, 3 mirrored valleys.
pub const LANDMARK_NAMES: [&str; 12] = [
    "tip_thumb",
    "tip_index",
    "tip_middle",
    "tip_ring",
    "tip_little",
    "valley_thumb_index",
    "valley_index_middle",
    "valley_middle_ring",
    "valley_ring_little",
    "mvalley_thumb_outer",
    "mvalley_index_outer",
    "mvalley_little_outer",
];

/// Twelve landmarks in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkSet {
    /// thumb, index, middle, ring, little
    pub tips: [Point; 5],
    /// thumb-index, index-middle, middle-ring, ring-little
    pub valleys: [Point; 4],
    /// thumb outer, index outer (thumb side), little outer
    pub mirrored_valleys: [Point; 3],
}

impl LandmarkSet {
    pub fn points(&self) -> [Point; 12] {
        let mut out = [Point::new(0, 0); 12];
        out[..5].copy_from_slice(&self.tips);
        out[5..9].copy_from_slice(&self.valleys);
        out[9..].copy_from_slice(&self.mirrored_valleys);
        out
    }

    pub fn tip(&self, f: Finger) -> Point {
        self.tips[f as usize]
    }

    /// The two valley points bounding a finger's base.
    pub fn finger_valleys(&self, f: Finger) -> (Point, Point) {
        let v = &self.valleys;
        let m = &self.mirrored_valleys;
        match f {
            Finger::Thumb => (v[0], m[0]),
            Finger::Index => (m[1], v[1]),
            Finger::Middle => (v[1], v[2]),
            Finger::Ring => (v[2], v[3]),
            Finger::Little => (v[3], m[2]),
        }
    }

    /// `name row col`, one landmark per line.
    pub fn to_text(&self) -> String {
        LANDMARK_NAMES
            .iter()
            .zip(self.points())
            .map(|(n, p)| format!("{n} {} {}\n", p.row, p.col))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkConfig {
    /// Minimum rise or fall of distance-from-R, in pixels, separating a tip from a valley.
    pub prominence: f64,
    /// A valley is the centre of the arc run within this many pixels of the
    /// minimum distance from R; 0 takes the first exact minimum.
    pub valley_plateau: f64,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        LandmarkConfig { prominence: 8.0, valley_plateau: 2.0 }
    }
}

/// The A-to-B contour arc with squared distances from R.
#[derive(Debug, Clone)]
pub struct HandArc {
    pub points: Vec<Point>,
    pub dist2: Vec<i64>,
}

impl HandArc {
    pub fn new(hand: &NormalizedHand) -> Result<HandArc> {
        let contour = &hand.contour;
        let n = contour.len();
        let ia = contour
            .position(hand.line.a())
            .ok_or_else(|| Error::MalformedContour("reference point A is not on the contour".into()))?;
        let ib = contour
            .position(hand.line.b())
            .ok_or_else(|| Error::MalformedContour("reference point B is not on the contour".into()))?;
        let len = (ib + n - ia) % n + 1;
        let points: Vec<Point> = (0..len).map(|k| contour.points()[(ia + k) % n]).collect();
        let dist2 = points.iter().map(|p| p.dist2(hand.reference)).collect();
        Ok(HandArc { points, dist2 })
    }

    fn dist(&self, i: usize) -> f64 {
        (self.dist2[i] as f64).sqrt()
    }

    fn argmax(&self, range: std::ops::Range<usize>) -> Option<usize> {
        range.reduce(|best, i| if self.dist2[i] > self.dist2[best] { i } else { best })
    }

    fn argmin(&self, range: std::ops::Range<usize>) -> Option<usize> {
        range.reduce(|best, i| if self.dist2[i] < self.dist2[best] { i } else { best })
    }

    fn index_of(&self, p: Point) -> Option<usize> {
        self.points.iter().position(|&q| q == p)
    }

    /// Distance maxima separated by falls of at least `prominence` on both sides.
    pub fn peaks(&self, prominence: f64) -> Vec<usize> {
        let n = self.points.len();
        let mut peaks = Vec::new();
        let mut seeking_max = true;
        let mut cand = 0usize;
        for i in 1..n {
            if seeking_max {
                if self.dist2[i] > self.dist2[cand] {
                    cand = i;
                } else if self.dist(cand) - self.dist(i) >= prominence {
                    peaks.push(cand);
                    seeking_max = false;
                    cand = i;
                }
            } else if self.dist2[i] < self.dist2[cand] {
                cand = i;
            } else if self.dist(i) - self.dist(cand) >= prominence {
                seeking_max = true;
                cand = i;
            }
        }
        peaks
    }

    /// Prunes the least prominent peaks until `keep` remain.
    fn prune(&self, mut peaks: Vec<usize>, keep: usize) -> Vec<usize> {
        while peaks.len() > keep {
            let n = self.points.len();
            let prominence = |k: usize| -> i64 {
                let lo = if k == 0 { 0 } else { peaks[k - 1] };
                let hi = if k + 1 == peaks.len() { n } else { peaks[k + 1] + 1 };
                let left = self.argmin(lo..peaks[k]).map_or(0, |i| self.dist2[i]);
                let right = self.argmin(peaks[k] + 1..hi).map_or(0, |i| self.dist2[i]);
                self.dist2[peaks[k]] - left.max(right)
            };
            let weakest = (0..peaks.len()).min_by_key(|&k| prominence(k)).expect("non-empty");
            peaks.remove(weakest);
        }
        peaks
    }
}

/// Arc positions of the tips in finger order (thumb..little).
fn tip_indices(hand: &NormalizedHand, arc: &HandArc, config: &LandmarkConfig) -> Result<[usize; 5]> {
    let found = arc.peaks(config.prominence);
    if found.len() < 5 {
        return Err(Error::FingersTouching(found.len()));
    }
    let peaks = arc.prune(found, 5);
    let farthest = arc.argmax(0..arc.points.len()).expect("non-empty arc");
    if peaks[2] != farthest {
        return Err(Error::MalformedContour(
            "the farthest contour point from R is not the middle of five fingertips".into(),
        ));
    }
    let mut idx = [peaks[0], peaks[1], peaks[2], peaks[3], peaks[4]];
    if hand.hand_type == HandType::Right {
        idx.reverse();
    }
    Ok(idx)
}

/// Five fingertips ordered thumb, index, middle, ring, little.
pub fn locate_tips(hand: &NormalizedHand, config: &LandmarkConfig) -> Result<[Point; 5]> {
    let arc = HandArc::new(hand)?;
    let idx = tip_indices(hand, &arc, config)?;
    Ok(idx.map(|i| arc.points[i]))
}

fn arc_positions(arc: &HandArc, pts: &[Point]) -> Result<Vec<usize>> {
    pts.iter()
        .map(|&p| {
            arc.index_of(p)
                .ok_or_else(|| Error::MalformedContour(format!("landmark ({}, {}) is not on the contour arc", p.row, p.col)))
        })
        .collect()
}

/// Valley strictly between arc positions `a < b`.
fn valley_between(arc: &HandArc, a: usize, b: usize, plateau: f64) -> Option<usize> {
    let m = arc.argmin(a + 1..b)?;
    let limit = arc.dist(m) + plateau;
    let (mut lo, mut hi) = (m, m);
    while lo > a + 1 && arc.dist(lo - 1) <= limit {
        lo -= 1;
    }
    while hi + 1 < b && arc.dist(hi + 1) <= limit {
        hi += 1;
    }
    // An even run has two centres; the nearer to R does not depend on the walk direction.
    let (c0, c1) = ((lo + hi) / 2, (lo + hi).div_ceil(2));
    Some(if arc.dist2[c1] < arc.dist2[c0] { c1 } else { c0 })
}

fn valleys_on(arc: &HandArc, tip_idx: &[usize], plateau: f64) -> Result<[usize; 4]> {
    let mut out = [0usize; 4];
    for k in 0..4 {
        let (a, b) = (tip_idx[k].min(tip_idx[k + 1]), tip_idx[k].max(tip_idx[k + 1]));
        out[k] = valley_between(arc, a, b, plateau).ok_or_else(|| {
            Error::MalformedContour(format!(
                "no contour between the {} and {} tips",
                Finger::ALL[k].name(),
                Finger::ALL[k + 1].name()
            ))
        })?;
    }
    Ok(out)
}

/// Four valleys: minimum distance from R on the arc between adjacent tips,
/// centred on the near-minimal run (see [`LandmarkConfig::valley_plateau`]).
pub fn locate_valleys(hand: &NormalizedHand, tips: &[Point; 5], config: &LandmarkConfig) -> Result<[Point; 4]> {
    let arc = HandArc::new(hand)?;
    let tip_idx = arc_positions(&arc, tips)?;
    Ok(valleys_on(&arc, &tip_idx, config.valley_plateau)?.map(|i| arc.points[i]))
}

fn mirrored_on(arc: &HandArc, tip: usize, valley: usize) -> Result<usize> {
    let target = arc.points[tip].dist2(arc.points[valley]);
    let n = arc.points.len() as isize;
    let step: isize = if valley > tip { -1 } else { 1 };
    let mut i = tip as isize;
    loop {
        i += step;
        if i < 0 || i >= n {
            return Err(Error::MalformedContour(
                "mirrored valley walk left the contour before reaching the valley distance".into(),
            ));
        }
        if arc.points[tip].dist2(arc.points[i as usize]) >= target {
            return Ok(i as usize);
        }
    }
}

/// Mirrored valleys for thumb, index and little finger: the first contour
/// point, walking from the tip away from the known valley, whose distance
/// from the tip reaches the tip-to-valley distance.
pub fn mirror_valleys(hand: &NormalizedHand, tips: &[Point; 5], valleys: &[Point; 4]) -> Result<[Point; 3]> {
    let arc = HandArc::new(hand)?;
    let t = arc_positions(&arc, tips)?;
    let v = arc_positions(&arc, valleys)?;
    let pairs = [(t[0], v[0]), (t[1], v[1]), (t[4], v[3])];
    let mut out = [Point::new(0, 0); 3];
    for (k, (tip, valley)) in pairs.into_iter().enumerate() {
        out[k] = arc.points[mirrored_on(&arc, tip, valley)?];
    }
    Ok(out)
}

/// All twelve landmarks.
pub fn extract_landmarks(hand: &NormalizedHand, config: &LandmarkConfig) -> Result<LandmarkSet> {
    let arc = HandArc::new(hand)?;
    let t = tip_indices(hand, &arc, config)?;
    let v = valleys_on(&arc, &t, config.valley_plateau)?;
    let m = [
        mirrored_on(&arc, t[0], v[0])?,
        mirrored_on(&arc, t[1], v[1])?,
        mirrored_on(&arc, t[4], v[3])?,
    ];
    Ok(LandmarkSet {
        tips: t.map(|i| arc.points[i]),
        valleys: v.map(|i| arc.points[i]),
        mirrored_valleys: m.map(|i| arc.points[i]),
    })
}

/// Mask with contour and 3x3 landmark markers burned in.
pub fn annotate(hand: &NormalizedHand, marks: &LandmarkSet) -> GrayImage {
    let mut img = hand.mask.to_gray();
    for v in 0..img.height() {
        for c in 0..img.width() {
            if img.get(v, c) == 255 {
                img.set(v, c, 96);
            }
        }
    }
    for p in hand.contour.points() {
        img.set(p.row as usize, p.col as usize, 160);
    }
    let (w, h) = (img.width() as i32, img.height() as i32);
    for p in marks.points().into_iter().chain([hand.reference]) {
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (r, c) = (p.row + dr, p.col + dc);
                if r >= 0 && c >= 0 && r < h && c < w {
                    img.set(r as usize, c as usize, 255);
                }
            }
        }
    }
    img
}
