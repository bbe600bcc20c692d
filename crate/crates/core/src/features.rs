//! The 26-element geometric feature vector.
//!
//! Order (1-based as in the dump format):
//! - f1..f5: finger lengths, thumb..little
//! - f6..f15: finger widths at 1/3 then 2/3 of the length, thumb..little
//! - f16..f20: finger baseline widths, thumb..little
//! - f21, f22: upper and lower palm width
//! - f23..f26: palm-line midpoint to baseline midpoints of index..little

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, Point, PointF};
use crate::landmarks::{extract_landmarks, Finger, LandmarkConfig, LandmarkSet};
use crate::normalize::{HandType, NormalizedHand};

pub const FEATURE_COUNT: usize = 26;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_COUNT {
            return Err(Error::FeatureDimension { expected: FEATURE_COUNT, got: values.len() });
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Comma-separated values with 6 decimals.
    pub fn to_csv_fields(&self) -> String {
        self.0.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
    }

    /// The values a stored row would read back as: each rounded through its
    /// 6-decimal text form. A probe quantized this way scores exactly 0
    /// against a stored copy of itself.
    pub fn quantized(&self) -> FeatureVector {
        FeatureVector(self.0.iter().map(|v| format!("{v:.6}").parse().expect("formatted f64 parses")).collect())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Segment joining a finger's two valley points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub a: PointF,
    pub b: PointF,
}

impl Baseline {
    pub fn width(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn midpoint(&self) -> PointF {
        self.a.midpoint(self.b)
    }
}

pub fn finger_baseline(a: impl Into<PointF>, b: impl Into<PointF>) -> Result<Baseline> {
    let (a, b) = (a.into(), b.into());
    if a == b {
        return Err(Error::DegenerateFinger(format!(
            "coincident valley points at ({}, {})",
            a.row, a.col
        )));
    }
    Ok(Baseline { a, b })
}

/// Distance from the tip to the baseline midpoint. The tip must not lie below the midpoint.
pub fn finger_length(tip: impl Into<PointF>, baseline: &Baseline) -> Result<f64> {
    let tip = tip.into();
    let mid = baseline.midpoint();
    if tip.row > mid.row {
        return Err(Error::DegenerateFinger(format!(
            "tip row {} lies below baseline midpoint row {}",
            tip.row, mid.row
        )));
    }
    Ok(tip.dist(mid))
}

fn inside(mask: &BinaryImage, p: PointF) -> bool {
    mask.is_fg((p.row + 0.5).floor() as i32, (p.col + 0.5).floor() as i32)
}

/// Distance from `origin` along `dir` (unit) to the first silhouette boundary.
fn march_to_boundary(mask: &BinaryImage, origin: PointF, dir: (f64, f64)) -> f64 {
    const STEP: f64 = 0.25;
    let limit = (mask.width() + mask.height()) as f64;
    let at = |t: f64| PointF::new(origin.row + t * dir.0, origin.col + t * dir.1);
    let mut t = 0.0;
    while t < limit && inside(mask, at(t + STEP)) {
        t += STEP;
    }
    let (mut lo, mut hi) = (t, t + STEP);
    for _ in 0..30 {
        let mid = (lo + hi) / 2.0;
        if inside(mask, at(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

/// Width across the finger at `fraction` of its axis, measured from the
/// baseline midpoint toward the tip, perpendicular to the axis between the
/// nearest boundary crossings on each side.
pub fn finger_width_at(mask: &BinaryImage, tip: impl Into<PointF>, baseline: &Baseline, fraction: f64) -> Result<f64> {
    let tip = tip.into();
    let mid = baseline.midpoint();
    let len = tip.dist(mid);
    if len == 0.0 {
        return Err(Error::DegenerateFinger("tip coincides with baseline midpoint".into()));
    }
    let p = mid.lerp(tip, fraction);
    if !inside(mask, p) {
        return Err(Error::FingerOcclusion(format!(
            "axis point ({:.1}, {:.1}) lies outside the silhouette",
            p.row, p.col
        )));
    }
    let axis = ((tip.row - mid.row) / len, (tip.col - mid.col) / len);
    let perp = (-axis.1, axis.0);
    let plus = march_to_boundary(mask, p, perp);
    let minus = march_to_boundary(mask, p, (-perp.0, -perp.1));
    Ok(plus + minus)
}

/// Upper palm width (thumb-outer to little-outer mirrored valley) and lower
/// palm width (reference line AB).
pub fn palm_widths(hand: &NormalizedHand, marks: &LandmarkSet) -> (f64, f64) {
    let upper = PointF::from(marks.mirrored_valleys[0]).dist(marks.mirrored_valleys[2].into());
    (upper, hand.line.length())
}

/// Distances from the upper palm line's midpoint to the baseline midpoints of
/// index, middle, ring and little finger.
pub fn palm_baseline_distances(marks: &LandmarkSet) -> Result<[f64; 4]> {
    let palm_mid = PointF::from(marks.mirrored_valleys[0]).midpoint(marks.mirrored_valleys[2].into());
    let mut out = [0.0; 4];
    for (k, f) in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little].into_iter().enumerate() {
        let (a, b) = marks.finger_valleys(f);
        out[k] = palm_mid.dist(finger_baseline(a, b)?.midpoint());
    }
    Ok(out)
}

/// Features from already located landmarks.
pub fn features_from_landmarks(hand: &NormalizedHand, marks: &LandmarkSet) -> Result<FeatureVector> {
    let mut lengths = [0.0; 5];
    let mut widths = [0.0; 10];
    let mut bases = [0.0; 5];
    for f in Finger::ALL {
        let i = f as usize;
        let (a, b) = marks.finger_valleys(f);
        let base = finger_baseline(a, b)?;
        let tip: Point = marks.tip(f);
        lengths[i] = finger_length(tip, &base)?;
        widths[2 * i] = finger_width_at(&hand.mask, tip, &base, 1.0 / 3.0)?;
        widths[2 * i + 1] = finger_width_at(&hand.mask, tip, &base, 2.0 / 3.0)?;
        bases[i] = base.width();
    }
    let (upper, lower) = palm_widths(hand, marks);
    let dists = palm_baseline_distances(marks)?;
    let mut v = Vec::with_capacity(FEATURE_COUNT);
    v.extend_from_slice(&lengths);
    v.extend_from_slice(&widths);
    v.extend_from_slice(&bases);
    v.push(upper);
    v.push(lower);
    v.extend_from_slice(&dists);
    FeatureVector::new(v)
}

/// Landmarks and features of a normalized hand.
pub fn extract_features(hand: &NormalizedHand, config: &LandmarkConfig) -> Result<FeatureVector> {
    let marks = extract_landmarks(hand, config)?;
    features_from_landmarks(hand, &marks)
}

/// One dump line: `subject_id,hand_type,f1,...,f26`.
pub fn format_feature_row(subject: &str, hand: HandType, features: &FeatureVector) -> String {
    format!("{subject},{hand},{}", features.to_csv_fields())
}

/// Parses a dump line written by [`format_feature_row`].
pub fn parse_feature_row(line: &str) -> Result<(String, HandType, FeatureVector)> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    if fields.len() != FEATURE_COUNT + 2 {
        return Err(Error::FeatureDimension { expected: FEATURE_COUNT, got: fields.len().saturating_sub(2) });
    }
    let subject = fields[0].trim();
    if subject.is_empty() {
        return Err(Error::Format("empty subject id".into()));
    }
    let hand: HandType = fields[1].parse()?;
    let values = fields[2..]
        .iter()
        .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad feature value {f:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("non-finite feature value".into()));
    }
    Ok((subject.to_string(), hand, FeatureVector::new(values)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantized_matches_stored_row() {
        let fv = FeatureVector::new((0..FEATURE_COUNT).map(|k| 1.0 / (k as f64 + 3.0) + 100.0).collect()).unwrap();
        let (_, _, back) = parse_feature_row(&format_feature_row("a", HandType::Left, &fv)).unwrap();
        assert_eq!(fv.quantized(), back);
        assert_ne!(fv, back);
    }

    #[test]
    fn horizontal_baseline() {
        let b = finger_baseline(Point::new(250, 40), Point::new(250, 60)).unwrap();
        assert_eq!(b.width(), 20.0);
        assert_eq!(b.midpoint(), PointF::new(250.0, 50.0));
    }

    #[test]
    fn coincident_valleys_are_degenerate() {
        let p = Point::new(3, 3);
        assert!(matches!(finger_baseline(p, p), Err(Error::DegenerateFinger(_))));
    }

    #[test]
    fn vertical_length() {
        let b = finger_baseline(Point::new(200, 40), Point::new(200, 60)).unwrap();
        assert_eq!(finger_length(Point::new(100, 50), &b).unwrap(), 100.0);
        assert!(matches!(finger_length(Point::new(210, 50), &b), Err(Error::DegenerateFinger(_))));
    }

    fn bar_mask(left: usize, right: usize) -> BinaryImage {
        let mut m = BinaryImage::empty(60, 120).unwrap();
        for r in 10..110 {
            for c in left..=right {
                m.set(r, c, 1);
            }
        }
        m
    }

    #[test]
    fn width_of_rectangular_finger() {
        // 15 pixel columns wide.
        let m = bar_mask(20, 34);
        let b = finger_baseline(Point::new(105, 20), Point::new(105, 34)).unwrap();
        for frac in [1.0 / 3.0, 2.0 / 3.0] {
            let w = finger_width_at(&m, Point::new(15, 27), &b, frac).unwrap();
            assert!((w - 15.0).abs() < 0.01, "width {w}");
        }
    }

    #[test]
    fn width_outside_is_occlusion() {
        let m = bar_mask(20, 34);
        let b = finger_baseline(Point::new(105, 40), Point::new(105, 50)).unwrap();
        assert!(matches!(
            finger_width_at(&m, Point::new(15, 45), &b, 0.5),
            Err(Error::FingerOcclusion(_))
        ));
    }

    #[test]
    fn palm_distances_zero_when_colocated() {
        // Every baseline midpoint sits on the palm-line midpoint (10, 10).
        let (lo, hi) = (Point::new(10, 9), Point::new(10, 11));
        let set = LandmarkSet { tips: [lo; 5], valleys: [hi, lo, hi, lo], mirrored_valleys: [lo, hi, hi] };
        assert_eq!(palm_baseline_distances(&set).unwrap(), [0.0; 4]);
    }

    #[test]
    fn dump_row_roundtrip() {
        let fv = FeatureVector::new((0..26).map(|i| i as f64 * 1.5 + 0.1234567).collect()).unwrap();
        let line = format_feature_row("s01", HandType::Left, &fv);
        assert!(line.starts_with("s01,left,0.123457,1.623457,"));
        let (id, hand, back) = parse_feature_row(&line).unwrap();
        assert_eq!((id.as_str(), hand), ("s01", HandType::Left));
        for (a, b) in back.iter().zip(fv.iter()) {
            assert!((a - b).abs() <= 5e-7);
        }
        assert!(parse_feature_row("s01,left,1,2").is_err());
        assert!(parse_feature_row(&line.replace("left", "both")).is_err());
    }

    #[test]
    fn feature_vector_length_checked() {
        assert!(FeatureVector::new(vec![0.0; 26]).is_ok());
        assert_eq!(
            FeatureVector::new(vec![0.0; 25]),
            Err(Error::FeatureDimension { expected: 26, got: 25 })
        );
    }
}
