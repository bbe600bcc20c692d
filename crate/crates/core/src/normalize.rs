//! Canonical pose: fingers up, wrist cut at the reference line AB, fixed
//! 200x300 raster, and left/right hand determination.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::{
    binarize, largest_component, median_filter, otsu_threshold, sobel_contour, BinaryImage, Contour,
    GrayImage, Point, Polarity,
};

pub const NORMALIZED_WIDTH: usize = 200;
pub const NORMALIZED_HEIGHT: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HandType {
    Left,
    Right,
}

impl HandType {
    pub fn opposite(self) -> HandType {
        match self {
            HandType::Left => HandType::Right,
            HandType::Right => HandType::Left,
        }
    }
}

impl fmt::Display for HandType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HandType::Left => "left",
            HandType::Right => "right",
        })
    }
}

impl FromStr for HandType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(HandType::Left),
            "right" | "r" => Ok(HandType::Right),
            other => Err(Error::Format(format!("unknown hand type {other:?}"))),
        }
    }
}

/// Horizontal reference line AB near the wrist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceLine {
    pub row: i32,
    pub a_col: i32,
    pub b_col: i32,
}

impl ReferenceLine {
    pub fn a(&self) -> Point {
        Point::new(self.row, self.a_col)
    }

    pub fn b(&self) -> Point {
        Point::new(self.row, self.b_col)
    }

    /// Midpoint R, column rounded half up.
    pub fn midpoint(&self) -> Point {
        Point::new(self.row, (self.a_col + self.b_col + 1).div_euclid(2))
    }

    pub fn length(&self) -> f64 {
        (self.b_col - self.a_col) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeConfig {
    pub median_window: usize,
    pub polarity: Polarity,
    /// Guillotine offset above the lowest foreground row, as a fraction of component height.
    pub guillotine_fraction: f64,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        NormalizeConfig {
            median_window: 3,
            polarity: Polarity::BrightForeground,
            guillotine_fraction: 0.10,
        }
    }
}

/// A silhouette in canonical pose at 200x300.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedHand {
    pub mask: BinaryImage,
    pub contour: Contour,
    pub reference: Point,
    pub line: ReferenceLine,
    pub hand_type: HandType,
}

impl NormalizedHand {
    /// Builds the hand from an already canonical mask whose lowest row is the reference line.
    pub fn from_mask(mask: BinaryImage) -> Result<NormalizedHand> {
        let (_, _, bottom, _) = mask.bounding_box().ok_or(Error::NoHand)?;
        let line = line_at_row(&mask, bottom as i32)?;
        let reference = line.midpoint();
        let contour = sobel_contour(&mask)?;
        let hand_type = detect_hand_type(&mask, reference)?;
        Ok(NormalizedHand { mask, contour, reference, line, hand_type })
    }

    /// `key=value` sidecar with integer `row,col` coordinates.
    pub fn sidecar(&self) -> String {
        let a = self.line.a();
        let b = self.line.b();
        format!(
            "hand_type={}\nR={},{}\nA={},{}\nB={},{}\n",
            self.hand_type, self.reference.row, self.reference.col, a.row, a.col, b.row, b.col
        )
    }
}

fn count_runs(row: &[u8]) -> usize {
    let mut runs = 0;
    let mut prev = 0u8;
    for &v in row {
        if v == 1 && prev == 0 {
            runs += 1;
        }
        prev = v;
    }
    runs
}

/// Fingers-up score of a mask: horizontal foreground runs in the upper half of
/// the bounding box minus those in the lower half. Separated fingers make the
/// finger side rich in runs while palm and wrist give one run per row.
fn upright_score(mask: &BinaryImage) -> Option<(bool, i64)> {
    let (top, left, bottom, right) = mask.bounding_box()?;
    let h = bottom - top + 1;
    let w = right - left + 1;
    let half = h / 2;
    let runs = |r: usize| count_runs(&mask.pixels()[r * mask.width() + left..=r * mask.width() + right]) as i64;
    let upper: i64 = (top..top + half).map(runs).sum();
    let lower: i64 = (bottom + 1 - half..=bottom).map(runs).sum();
    Some((h >= w, upper - lower))
}

/// Rotates by the multiple of 90 degrees that makes the bounding box at least
/// as tall as wide and puts the fingers at the top. Returns the rotated mask
/// and the number of clockwise quarter turns applied.
pub fn orient_upright(mask: &BinaryImage) -> Result<(BinaryImage, u32)> {
    let mut best: Option<(u32, i64, BinaryImage)> = None;
    for k in 0..4 {
        let rotated = mask.rotate_cw(k);
        let (tall, score) = upright_score(&rotated).ok_or(Error::NoHand)?;
        if tall && score > 0 && best.as_ref().is_none_or(|(_, s, _)| score > *s) {
            best = Some((k, score, rotated));
        }
    }
    best.map(|(k, _, m)| (m, k)).ok_or(Error::AmbiguousOrientation)
}

fn line_at_row(mask: &BinaryImage, row: i32) -> Result<ReferenceLine> {
    let w = mask.width();
    let r = row as usize;
    let cols = &mask.pixels()[r * w..(r + 1) * w];
    let a = cols.iter().position(|&v| v == 1);
    let b = cols.iter().rposition(|&v| v == 1);
    match (a, b) {
        (Some(a), Some(b)) => Ok(ReferenceLine { row, a_col: a as i32, b_col: b as i32 }),
        _ => Err(Error::MalformedSilhouette(format!("reference row {row} has no foreground"))),
    }
}

/// Places the reference line `round(fraction * height)` rows above the lowest
/// foreground row, erases everything below it and returns the line, its
/// midpoint R and the guillotined mask.
pub fn place_reference(mask: &BinaryImage, fraction: f64) -> Result<(ReferenceLine, Point, BinaryImage)> {
    let (top, _, bottom, _) = mask.bounding_box().ok_or(Error::NoHand)?;
    let height = (bottom - top + 1) as f64;
    let offset = (fraction * height).round() as usize;
    let row = bottom.checked_sub(offset).filter(|&r| r >= top).ok_or_else(|| {
        Error::MalformedSilhouette(format!("guillotine offset {offset} exceeds the silhouette"))
    })?;
    let line = line_at_row(mask, row as i32)?;
    let mut cut = mask.clone();
    for r in row + 1..mask.height() {
        for c in 0..mask.width() {
            cut.set(r, c, 0);
        }
    }
    Ok((line, line.midpoint(), cut))
}

/// Leftmost (LM) and rightmost (RM) foreground pixels strictly above `row`.
/// Column ties go to the lowest pixel.
pub fn lateral_extremes(mask: &BinaryImage, row: i32) -> Option<(Point, Point)> {
    let mut lm: Option<Point> = None;
    let mut rm: Option<Point> = None;
    for r in 0..(row.max(0) as usize).min(mask.height()) {
        for c in 0..mask.width() {
            if mask.get(r, c) == 0 {
                continue;
            }
            let p = Point::new(r as i32, c as i32);
            if lm.is_none_or(|q| p.col < q.col || (p.col == q.col && p.row > q.row)) {
                lm = Some(p);
            }
            if rm.is_none_or(|q| p.col > q.col || (p.col == q.col && p.row > q.row)) {
                rm = Some(p);
            }
        }
    }
    lm.zip(rm)
}

/// Left iff the leftmost extreme lies below the rightmost one (the thumb sits lower
/// than the little finger).
pub fn detect_hand_type(mask: &BinaryImage, reference: Point) -> Result<HandType> {
    let (lm, rm) = lateral_extremes(mask, reference.row).ok_or(Error::NoHand)?;
    match lm.row.cmp(&rm.row) {
        std::cmp::Ordering::Greater => Ok(HandType::Left),
        std::cmp::Ordering::Less => Ok(HandType::Right),
        std::cmp::Ordering::Equal => Err(Error::AmbiguousHandType(lm.row)),
    }
}

/// Mask stages of normalization before the final contour pass.
pub fn segment(raw: &GrayImage, config: &NormalizeConfig) -> Result<BinaryImage> {
    let filtered = median_filter(raw, config.median_window)?;
    let t = match otsu_threshold(&filtered) {
        Ok(t) => t,
        Err(Error::DegenerateHistogram(_)) => return Err(Error::NoHand),
        Err(e) => return Err(e),
    };
    largest_component(&binarize(&filtered, t, config.polarity))
}

/// Full normalization of a raw scan.
pub fn normalize(raw: &GrayImage, config: &NormalizeConfig) -> Result<NormalizedHand> {
    let mask = segment(raw, config)?;
    let (upright, _) = orient_upright(&mask)?;
    let (_, _, cut) = place_reference(&upright, config.guillotine_fraction)?;
    let (top, left, bottom, right) = cut.bounding_box().ok_or(Error::NoHand)?;
    let resized = cut
        .crop(top, left, bottom, right)
        .resize_nearest(NORMALIZED_WIDTH, NORMALIZED_HEIGHT);
    NormalizedHand::from_mask(largest_component(&resized)?)
}
