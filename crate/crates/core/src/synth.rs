//! Parametric synthetic hands with analytic ground truth.
//!
//! A hand is a vector outline in design units (about one normalized pixel
//! each): a tapered palm with a wrist stub, four fingers on a slightly arched
//! knuckle line joined by semicircular webs, and a thumb attached low on the
//! side. The outline is filled at pixel centers, noised, rotated by the pose
//! and placed on a dark canvas. Ground truth applies the landmark definitions
//! to the exact outline after mapping it into normalized coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::imaging::{BinaryImage, GrayImage, Point, PointF};
use crate::landmarks::{Finger, LandmarkSet, LANDMARK_NAMES};
use crate::normalize::{HandType, NORMALIZED_HEIGHT, NORMALIZED_WIDTH};

/// Canvas pixels per design unit.
pub const RENDER_SCALE: f64 = 1.5;
pub const BACKGROUND_LEVEL: f64 = 20.0;
pub const HAND_LEVEL: f64 = 235.0;
/// Smallest allowed distance between neighbouring fingers, design units.
pub const MIN_FINGER_GAP: f64 = 4.0;

const GUILLOTINE_FRACTION: f64 = 0.10;
/// Knuckle-line height offsets (downward) for thumb..little; the thumb entry is unused.
const KNUCKLE_DROP: [f64; 5] = [0.0, 4.0, 0.0, 4.0, 14.0];
const CAP_SEGMENTS: usize = 64;
const WEB_SEGMENTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerSpec {
    /// Base-line centre to the apex of the tip cap.
    pub length: f64,
    pub base_width: f64,
    pub tip_width: f64,
    /// Clockwise lean from vertical for a right hand, degrees.
    pub splay_deg: f64,
}

/// Quarter-turn rotation applied to the rendered upright hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pose {
    Up,
    Cw90,
    Cw180,
    Cw270,
}

impl Pose {
    pub const ALL: [Pose; 4] = [Pose::Up, Pose::Cw90, Pose::Cw180, Pose::Cw270];

    pub fn quarter_turns(self) -> u32 {
        self as u32
    }

    pub fn degrees(self) -> u32 {
        90 * self.quarter_turns()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandSpec {
    pub hand_type: HandType,
    /// Thumb, index, middle, ring, little.
    pub fingers: [FingerSpec; 5],
    /// Knuckle-line span from the little finger's outer base corner to the index finger's outer one.
    pub palm_breadth: f64,
    pub wrist_breadth: f64,
    pub pose: Pose,
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Standard deviation of the additive intensity noise, at most 10.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for HandSpec {
    fn default() -> Self {
        let f = |length, base_width, tip_width, splay_deg| FingerSpec { length, base_width, tip_width, splay_deg };
        HandSpec {
            hand_type: HandType::Right,
            fingers: [
                f(72.0, 30.0, 22.0, 50.0),
                f(92.0, 22.0, 17.0, 6.0),
                f(108.0, 23.0, 18.0, 0.0),
                f(94.0, 22.0, 17.0, -6.0),
                f(70.0, 19.0, 15.0, -16.0),
            ],
            palm_breadth: 106.0,
            wrist_breadth: 80.0,
            pose: Pose::Up,
            canvas_width: 383,
            canvas_height: 526,
            noise_sigma: 4.0,
            seed: 0,
        }
    }
}

impl HandSpec {
    /// The same hand with the opposite hand type.
    pub fn mirrored(&self) -> HandSpec {
        HandSpec { hand_type: self.hand_type.opposite(), ..self.clone() }
    }

    /// Gap between neighbouring finger bases on the knuckle line.
    pub fn knuckle_gap(&self) -> f64 {
        let bases: f64 = self.fingers[1..].iter().map(|f| f.base_width).sum();
        (self.palm_breadth - bases) / 3.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        for (f, s) in Finger::ALL.iter().zip(&self.fingers) {
            let name = f.name();
            let values = [s.length, s.base_width, s.tip_width, s.splay_deg];
            if values.iter().any(|v| !v.is_finite()) {
                return bad(format!("{name}: non-finite parameter"));
            }
            if !(40.0..=140.0).contains(&s.length) {
                return bad(format!("{name}: length {} outside 40..=140", s.length));
            }
            if s.tip_width <= 0.0 || s.base_width <= 0.0 {
                return bad(format!("{name}: widths must be positive"));
            }
            if s.tip_width > s.base_width {
                return bad(format!("{name}: tip width {} exceeds base width {}", s.tip_width, s.base_width));
            }
            if s.length <= s.tip_width {
                return bad(format!("{name}: length {} does not exceed tip width", s.length));
            }
            if s.splay_deg.abs() >= 80.0 {
                return bad(format!("{name}: splay {} out of range", s.splay_deg));
            }
        }
        if !(self.palm_breadth.is_finite() && self.wrist_breadth.is_finite()) || self.wrist_breadth <= 0.0 {
            return bad("palm and wrist breadth must be positive".into());
        }
        if self.wrist_breadth > self.palm_breadth {
            return bad("wrist broader than the palm".into());
        }
        if self.knuckle_gap() < MIN_FINGER_GAP {
            return bad(format!(
                "palm breadth {} leaves finger gaps of {:.2}",
                self.palm_breadth,
                self.knuckle_gap()
            ));
        }
        if !(0.0..=10.0).contains(&self.noise_sigma) {
            return bad(format!("noise sigma {} outside 0..=10", self.noise_sigma));
        }
        let outline = Outline::design(self);
        for k in 0..4 {
            let gap = outline.finger_distance(Finger::ALL[k], Finger::ALL[k + 1]);
            if gap < MIN_FINGER_GAP {
                return bad(format!(
                    "{} and {} come within {gap:.2} of each other",
                    Finger::ALL[k].name(),
                    Finger::ALL[k + 1].name()
                ));
            }
        }
        let placed = Placement::new(self, &outline);
        let (w, h) = (self.canvas_width as f64, self.canvas_height as f64);
        if outline.points.iter().map(|&p| placed.to_canvas(p)).any(|p| p.row < 1.0 || p.col < 1.0 || p.row > h - 2.0 || p.col > w - 2.0) {
            return bad(format!("hand does not fit a {}x{} canvas", self.canvas_width, self.canvas_height));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Palm,
    Web,
    Finger(usize),
}

/// Closed outline in (x, y) design coordinates, y downward, stored as
/// `PointF { row: y, col: x }`.
#[derive(Debug, Clone)]
struct Outline {
    points: Vec<PointF>,
    parts: Vec<Part>,
}

fn add(p: PointF, d: (f64, f64), s: f64) -> PointF {
    PointF::new(p.row + s * d.0, p.col + s * d.1)
}

impl Outline {
    fn push(&mut self, p: PointF, part: Part) {
        self.points.push(p);
        self.parts.push(part);
    }

    fn push_finger(&mut self, index: usize, base: PointF, spec: &FingerSpec) {
        let phi = spec.splay_deg.to_radians();
        // (row, col) directions: u along the finger, n across it toward the thumb side.
        let u = (-phi.cos(), phi.sin());
        let n = (phi.sin(), phi.cos());
        let r = spec.tip_width / 2.0;
        let centre = add(base, u, spec.length - r);
        self.push(add(base, n, -spec.base_width / 2.0), Part::Finger(index));
        for s in 0..=CAP_SEGMENTS {
            let a = std::f64::consts::PI * s as f64 / CAP_SEGMENTS as f64;
            let p = add(add(centre, n, -r * a.cos()), u, r * a.sin());
            self.push(p, Part::Finger(index));
        }
        self.push(add(base, n, spec.base_width / 2.0), Part::Finger(index));
    }

    /// Semicircle from the last point to `q`, bulging downward.
    fn push_web(&mut self, q: PointF) {
        let p = *self.points.last().expect("web follows a finger");
        let m = p.midpoint(q);
        let rho = p.dist(q) / 2.0;
        let e1 = ((p.row - m.row) / rho, (p.col - m.col) / rho);
        let e2 = if e1.1 < 0.0 { (-e1.1, e1.0) } else { (e1.1, -e1.0) };
        for s in 1..WEB_SEGMENTS {
            let a = std::f64::consts::PI * s as f64 / WEB_SEGMENTS as f64;
            self.push(add(add(m, e1, rho * a.cos()), e2, rho * a.sin()), Part::Web);
        }
    }

    /// Right-hand outline, mirrored for left hands. Points run from the
    /// wrist's bottom-left corner up the little-finger side, over the
    /// fingers, down the thumb side and along the wrist back to the start.
    fn design(spec: &HandSpec) -> Outline {
        let p = spec.palm_breadth;
        let palm_height = 1.1 * p;
        let wrist_length = 0.45 * p;
        let thumb_drop = 0.45 * p;
        let gap = spec.knuckle_gap();
        let half_wrist = spec.wrist_breadth / 2.0;

        let mut o = Outline { points: Vec::new(), parts: Vec::new() };
        o.push(PointF::new(palm_height + wrist_length, -half_wrist), Part::Palm);
        o.push(PointF::new(palm_height, -half_wrist), Part::Palm);

        let mut x = -p / 2.0;
        for (k, f) in [4usize, 3, 2, 1].into_iter().enumerate() {
            let s = &spec.fingers[f];
            let phi = s.splay_deg.to_radians();
            // Base centre such that the outer-left base corner lands on x.
            let left_corner_offset = -s.base_width / 2.0 * phi.cos();
            let base = PointF::new(KNUCKLE_DROP[f], x - left_corner_offset);
            if k > 0 {
                let corner = add(base, (phi.sin(), phi.cos()), -s.base_width / 2.0);
                o.push_web(corner);
            }
            o.push_finger(f, base, s);
            x = o.points.last().expect("finger pushed").col + gap;
        }

        let index_corner = *o.points.last().expect("index pushed");
        let thumb = &spec.fingers[0];
        let phi = thumb.splay_deg.to_radians();
        let n = (phi.sin(), phi.cos());
        let inner = PointF::new(index_corner.row + thumb_drop, index_corner.col);
        o.push_finger(0, add(inner, n, thumb.base_width / 2.0), thumb);

        o.push(PointF::new(palm_height, half_wrist), Part::Palm);
        o.push(PointF::new(palm_height + wrist_length, half_wrist), Part::Palm);

        if spec.hand_type == HandType::Left {
            for q in &mut o.points {
                q.col = -q.col;
            }
        }
        o
    }

    fn finger_range(&self, f: Finger) -> std::ops::Range<usize> {
        let first = self.parts.iter().position(|&p| p == Part::Finger(f as usize)).expect("finger present");
        let last = self.parts.iter().rposition(|&p| p == Part::Finger(f as usize)).expect("finger present");
        first..last + 1
    }

    fn finger_distance(&self, a: Finger, b: Finger) -> f64 {
        let (ra, rb) = (self.finger_range(a), self.finger_range(b));
        let mut best = f64::INFINITY;
        for i in ra.start..ra.end - 1 {
            for j in rb.start..rb.end - 1 {
                best = best.min(segment_distance(self.points[i], self.points[i + 1], self.points[j], self.points[j + 1]));
            }
        }
        best
    }
}

fn point_segment(p: PointF, a: PointF, b: PointF) -> (f64, PointF) {
    let d = (b.row - a.row, b.col - a.col);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.row - a.row) * d.0 + (p.col - a.col) * d.1) / len2).clamp(0.0, 1.0)
    };
    let q = add(a, d, t);
    (p.dist(q), q)
}

fn cross(o: PointF, a: PointF, b: PointF) -> f64 {
    (a.col - o.col) * (b.row - o.row) - (a.row - o.row) * (b.col - o.col)
}

fn segment_distance(a: PointF, b: PointF, c: PointF, d: PointF) -> f64 {
    let d1 = cross(a, b, c);
    let d2 = cross(a, b, d);
    let d3 = cross(c, d, a);
    let d4 = cross(c, d, b);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    [point_segment(a, c, d).0, point_segment(b, c, d).0, point_segment(c, a, b).0, point_segment(d, a, b).0]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Design-to-canvas mapping, symmetric under left/right mirroring.
#[derive(Debug, Clone, Copy)]
struct Placement {
    row_offset: f64,
    col_offset: f64,
}

impl Placement {
    fn new(spec: &HandSpec, outline: &Outline) -> Placement {
        let (mut lo, mut hi) = (PointF::new(f64::INFINITY, f64::INFINITY), PointF::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in &outline.points {
            lo = PointF::new(lo.row.min(p.row), lo.col.min(p.col));
            hi = PointF::new(hi.row.max(p.row), hi.col.max(p.col));
        }
        let mid = lo.midpoint(hi);
        Placement {
            row_offset: (spec.canvas_height as f64 - 1.0) / 2.0 - RENDER_SCALE * mid.row,
            col_offset: (spec.canvas_width as f64 - 1.0) / 2.0 - RENDER_SCALE * mid.col,
        }
    }

    fn to_canvas(self, p: PointF) -> PointF {
        PointF::new(RENDER_SCALE * p.row + self.row_offset, RENDER_SCALE * p.col + self.col_offset)
    }
}

/// Even-odd fill sampling each pixel at its centre.
fn fill_polygon(points: &[PointF], width: usize, height: usize) -> BinaryImage {
    let mut mask = BinaryImage::empty(width, height).expect("canvas is non-empty");
    let n = points.len();
    let mut xs = Vec::new();
    for r in 0..height {
        let y = r as f64;
        xs.clear();
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            if (a.row <= y && y < b.row) || (b.row <= y && y < a.row) {
                xs.push(a.col + (y - a.row) / (b.row - a.row) * (b.col - a.col));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let c0 = pair[0].ceil().max(0.0) as usize;
            let c1 = (pair[1].ceil() as i64).clamp(0, width as i64) as usize;
            for c in c0..c1 {
                mask.set(r, c, 1);
            }
        }
    }
    mask
}

/// Exact landmarks and features in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub hand_type: HandType,
    pub reference: PointF,
    pub a: PointF,
    pub b: PointF,
    /// Thumb..little.
    pub tips: [PointF; 5],
    /// Thumb-index, index-middle, middle-ring, ring-little.
    pub valleys: [PointF; 4],
    /// Thumb outer, index outer, little outer.
    pub mirrored_valleys: [PointF; 3],
    pub features: FeatureVector,
    /// Silhouette outline mapped into normalized coordinates.
    pub outline: Vec<PointF>,
}

impl GroundTruth {
    pub fn points(&self) -> [PointF; 12] {
        let mut out = [PointF::new(0.0, 0.0); 12];
        out[..5].copy_from_slice(&self.tips);
        out[5..9].copy_from_slice(&self.valleys);
        out[9..].copy_from_slice(&self.mirrored_valleys);
        out
    }

    /// Landmarks rounded to pixels.
    pub fn landmarks(&self) -> LandmarkSet {
        let r = |p: &PointF| Point::new(p.row.round() as i32, p.col.round() as i32);
        LandmarkSet {
            tips: self.tips.each_ref().map(r),
            valleys: self.valleys.each_ref().map(r),
            mirrored_valleys: self.mirrored_valleys.each_ref().map(r),
        }
    }

    /// `key=value` sidecar: hand type, reference points, twelve landmarks and 26 features.
    pub fn sidecar(&self) -> String {
        let mut s = format!("hand_type={}\n", self.hand_type);
        let pt = |p: PointF| format!("{:.3},{:.3}", p.row, p.col);
        s.push_str(&format!("R={}\nA={}\nB={}\n", pt(self.reference), pt(self.a), pt(self.b)));
        for (name, p) in LANDMARK_NAMES.iter().zip(self.points()) {
            s.push_str(&format!("{name}={}\n", pt(p)));
        }
        for (k, v) in self.features.iter().enumerate() {
            s.push_str(&format!("f{}={v:.6}\n", k + 1));
        }
        s
    }
}

/// Raster geometry of the upright clean rendering after guillotining.
#[derive(Debug, Clone, Copy)]
struct CropFrame {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
    a_col: usize,
    b_col: usize,
}

impl CropFrame {
    fn of(mask: &BinaryImage) -> Result<CropFrame> {
        let (top, _, bottom, _) = mask.bounding_box().ok_or(Error::InvalidSpec("empty rendering".into()))?;
        let cut = bottom - (GUILLOTINE_FRACTION * (bottom - top + 1) as f64).round() as usize;
        let (mut left, mut right) = (usize::MAX, 0);
        for r in top..=cut {
            for c in 0..mask.width() {
                if mask.get(r, c) == 1 {
                    left = left.min(c);
                    right = right.max(c);
                }
            }
        }
        let row = &mask.pixels()[cut * mask.width()..(cut + 1) * mask.width()];
        let a_col = row.iter().position(|&v| v == 1).ok_or(Error::InvalidSpec("empty cut row".into()))?;
        let b_col = row.iter().rposition(|&v| v == 1).expect("row has foreground");
        Ok(CropFrame { top, left, height: cut - top + 1, width: right - left + 1, a_col, b_col })
    }

    fn to_normalized(self, p: PointF) -> PointF {
        PointF::new(
            (p.row - self.top as f64 + 0.5) * NORMALIZED_HEIGHT as f64 / self.height as f64 - 0.5,
            (p.col - self.left as f64 + 0.5) * NORMALIZED_WIDTH as f64 / self.width as f64 - 0.5,
        )
    }
}

/// Closest point to `r` on the polyline between vertices `i` and `j`.
fn closest_between(poly: &[PointF], i: usize, j: usize, r: PointF) -> PointF {
    let (lo, hi) = (i.min(j), i.max(j));
    (lo..hi)
        .map(|k| point_segment(r, poly[k], poly[k + 1]))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("tips are distinct vertices")
        .1
}

/// First point walking from vertex `from` in direction `step` whose distance
/// from that vertex reaches `d`.
fn first_crossing(poly: &[PointF], from: usize, step: isize, d: f64) -> Result<PointF> {
    let o = poly[from];
    let mut k = from as isize;
    loop {
        let next = k + step;
        if next < 0 || next as usize >= poly.len() {
            return Err(Error::InvalidSpec("mirrored valley walk left the outline".into()));
        }
        let (p, q) = (poly[k as usize], poly[next as usize]);
        if o.dist(q) >= d {
            // Solve |p + t (q - p) - o| = d for the smallest t in [0, 1].
            let dv = (q.row - p.row, q.col - p.col);
            let w = (p.row - o.row, p.col - o.col);
            let a = dv.0 * dv.0 + dv.1 * dv.1;
            let b = 2.0 * (w.0 * dv.0 + w.1 * dv.1);
            let c = w.0 * w.0 + w.1 * w.1 - d * d;
            let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
            let t = [(-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a)]
                .into_iter()
                .filter(|t| (-1e-12..=1.0 + 1e-12).contains(t))
                .fold(f64::INFINITY, f64::min);
            let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 1.0 };
            return Ok(add(p, dv, t));
        }
        k = next;
    }
}

/// Width of the outline across `p` along the unit direction `e`, between
/// the nearest crossings on either side.
fn chord_width(poly: &[PointF], p: PointF, e: (f64, f64)) -> Result<f64> {
    let (mut plus, mut minus) = (f64::INFINITY, f64::INFINITY);
    let n = poly.len();
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let d = (b.row - a.row, b.col - a.col);
        // p + s e = a + t d
        let det = e.0 * (-d.1) - e.1 * (-d.0);
        if det.abs() < 1e-12 {
            continue;
        }
        let rhs = (a.row - p.row, a.col - p.col);
        let s = (rhs.0 * (-d.1) - rhs.1 * (-d.0)) / det;
        let t = (e.0 * rhs.1 - e.1 * rhs.0) / det;
        if (0.0..1.0).contains(&t) {
            if s >= 0.0 {
                plus = plus.min(s);
            } else {
                minus = minus.min(-s);
            }
        }
    }
    if plus.is_finite() && minus.is_finite() {
        Ok(plus + minus)
    } else {
        Err(Error::InvalidSpec("finger axis point lies outside the outline".into()))
    }
}

fn truth(spec: &HandSpec, outline: &Outline, frame: &CropFrame, placed: &Placement) -> Result<GroundTruth> {
    let poly: Vec<PointF> = outline.points.iter().map(|&p| frame.to_normalized(placed.to_canvas(p))).collect();
    let row = (NORMALIZED_HEIGHT - 1) as f64;
    let a = PointF::new(row, frame.to_normalized(PointF::new(0.0, frame.a_col as f64)).col);
    let b = PointF::new(row, frame.to_normalized(PointF::new(0.0, frame.b_col as f64)).col);
    let reference = a.midpoint(b);

    let mut tip_idx = [0usize; 5];
    for f in Finger::ALL {
        tip_idx[f as usize] = outline
            .finger_range(f)
            .max_by(|&i, &j| poly[i].dist(reference).total_cmp(&poly[j].dist(reference)))
            .expect("finger has vertices");
    }
    let tips = tip_idx.map(|i| poly[i]);
    let valleys: [PointF; 4] = std::array::from_fn(|k| closest_between(&poly, tip_idx[k], tip_idx[k + 1], reference));
    let step_away = |tip: usize, neighbour: usize| if neighbour > tip { -1 } else { 1 };
    let mirrored = [
        first_crossing(&poly, tip_idx[0], step_away(tip_idx[0], tip_idx[1]), tips[0].dist(valleys[0]))?,
        first_crossing(&poly, tip_idx[1], step_away(tip_idx[1], tip_idx[2]), tips[1].dist(valleys[1]))?,
        first_crossing(&poly, tip_idx[4], step_away(tip_idx[4], tip_idx[3]), tips[4].dist(valleys[3]))?,
    ];

    let marks = FloatMarks { valleys, mirrored };
    let mut v = Vec::with_capacity(FEATURE_COUNT);
    for f in Finger::ALL {
        let (p, q) = marks.finger_valleys(f);
        v.push(tips[f as usize].dist(p.midpoint(q)));
    }
    for f in Finger::ALL {
        let (p, q) = marks.finger_valleys(f);
        let mid = p.midpoint(q);
        let tip = tips[f as usize];
        let len = tip.dist(mid);
        let axis = ((tip.row - mid.row) / len, (tip.col - mid.col) / len);
        for frac in [1.0 / 3.0, 2.0 / 3.0] {
            v.push(chord_width(&poly, mid.lerp(tip, frac), (-axis.1, axis.0))?);
        }
    }
    for f in Finger::ALL {
        let (p, q) = marks.finger_valleys(f);
        v.push(p.dist(q));
    }
    v.push(mirrored[0].dist(mirrored[2]));
    v.push(b.col - a.col);
    let palm_mid = mirrored[0].midpoint(mirrored[2]);
    for f in [Finger::Index, Finger::Middle, Finger::Ring, Finger::Little] {
        let (p, q) = marks.finger_valleys(f);
        v.push(palm_mid.dist(p.midpoint(q)));
    }

    Ok(GroundTruth {
        hand_type: spec.hand_type,
        reference,
        a,
        b,
        tips,
        valleys,
        mirrored_valleys: mirrored,
        features: FeatureVector::new(v)?,
        outline: poly,
    })
}

struct FloatMarks {
    valleys: [PointF; 4],
    mirrored: [PointF; 3],
}

impl FloatMarks {
    fn finger_valleys(&self, f: Finger) -> (PointF, PointF) {
        let (v, m) = (&self.valleys, &self.mirrored);
        match f {
            Finger::Thumb => (v[0], m[0]),
            Finger::Index => (m[1], v[1]),
            Finger::Middle => (v[1], v[2]),
            Finger::Ring => (v[2], v[3]),
            Finger::Little => (v[3], m[2]),
        }
    }
}

/// Noise-free upright silhouette on the canvas.
pub fn render_mask(spec: &HandSpec) -> Result<BinaryImage> {
    spec.validate()?;
    let outline = Outline::design(spec);
    let placed = Placement::new(spec, &outline);
    let canvas: Vec<PointF> = outline.points.iter().map(|&p| placed.to_canvas(p)).collect();
    Ok(fill_polygon(&canvas, spec.canvas_width, spec.canvas_height))
}

/// Renders the hand and computes its ground truth.
pub fn generate(spec: &HandSpec) -> Result<(GrayImage, GroundTruth)> {
    spec.validate()?;
    let outline = Outline::design(spec);
    let placed = Placement::new(spec, &outline);
    let canvas: Vec<PointF> = outline.points.iter().map(|&p| placed.to_canvas(p)).collect();
    let mask = fill_polygon(&canvas, spec.canvas_width, spec.canvas_height);
    let frame = CropFrame::of(&mask)?;
    let gt = truth(spec, &outline, &frame, &placed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let pixels = mask
        .pixels()
        .iter()
        .map(|&v| {
            let base = if v == 1 { HAND_LEVEL } else { BACKGROUND_LEVEL };
            let n = if spec.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (base + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    let upright = GrayImage::new(spec.canvas_width, spec.canvas_height, pixels)?;
    Ok((upright.rotate_cw(spec.pose.quarter_turns()), gt))
}

/// One image of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMember {
    pub subject: String,
    pub image_index: usize,
    pub spec: HandSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Grouped by subject in id order, images in index order.
    pub members: Vec<PopulationMember>,
    /// Set when the inter-subject gap does not exceed twice the per-image noise.
    pub warning: Option<String>,
}

impl Population {
    pub fn subjects(&self) -> usize {
        self.members.iter().filter(|m| m.image_index == 0).count()
    }

    /// Renders every member on demand.
    pub fn images(&self) -> impl Iterator<Item = (&PopulationMember, Result<(GrayImage, GroundTruth)>)> {
        self.members.iter().map(|m| (m, generate(&m.spec)))
    }
}

/// Share of left-hand subjects in generated populations.
pub const LEFT_HAND_SHARE: f64 = 157.0 / 253.0;

/// Inclusive sampling ranges per finger: length, base width, tip width, splay.
const FINGER_RANGES: [[(f64, f64); 4]; 5] = [
    [(62.0, 80.0), (26.0, 32.0), (19.0, 23.0), (46.0, 54.0)],
    [(84.0, 96.0), (19.0, 23.0), (15.0, 17.5), (4.0, 8.0)],
    [(104.0, 120.0), (20.0, 24.0), (16.0, 18.5), (-1.0, 1.0)],
    [(84.0, 96.0), (19.0, 23.0), (15.0, 17.5), (-8.0, -4.0)],
    [(62.0, 78.0), (16.0, 20.0), (13.0, 15.0), (-18.0, -14.0)],
];
const GAP_RANGE: (f64, f64) = (6.0, 10.0);
const WRIST_RANGE: (f64, f64) = (0.70, 0.82);

/// Length-type parameters: five lengths, five base widths, five tip widths,
/// palm breadth, wrist breadth.
fn shape_params(spec: &HandSpec) -> [f64; 17] {
    let mut out = [0.0; 17];
    for (k, f) in spec.fingers.iter().enumerate() {
        out[k] = f.length;
        out[5 + k] = f.base_width;
        out[10 + k] = f.tip_width;
    }
    out[15] = spec.palm_breadth;
    out[16] = spec.wrist_breadth;
    out
}

fn with_shape_params(spec: &HandSpec, p: &[f64; 17]) -> HandSpec {
    let mut s = spec.clone();
    for k in 0..5 {
        s.fingers[k].length = p[k];
        s.fingers[k].base_width = p[5 + k];
        s.fingers[k].tip_width = p[10 + k];
    }
    s.palm_breadth = p[15];
    s.wrist_breadth = p[16];
    s
}

/// Middle finger clearly longest, so every hand keeps the middle tip farthest from the wrist.
fn plausible(spec: &HandSpec) -> bool {
    let f = &spec.fingers;
    spec.validate().is_ok() && f[2].length >= f[1].length.max(f[3].length) + 6.0
}

fn draw_base(rng: &mut ChaCha8Rng, hand_type: HandType) -> HandSpec {
    let mut spec = HandSpec { hand_type, ..HandSpec::default() };
    for (f, ranges) in spec.fingers.iter_mut().zip(FINGER_RANGES) {
        let [len, base, tip, splay] = ranges.map(|(lo, hi)| rng.random_range(lo..=hi));
        *f = FingerSpec { length: len, base_width: base, tip_width: tip.min(base), splay_deg: splay };
    }
    let bases: f64 = spec.fingers[1..].iter().map(|f| f.base_width).sum();
    spec.palm_breadth = bases + 3.0 * rng.random_range(GAP_RANGE.0..=GAP_RANGE.1);
    spec.wrist_breadth = spec.palm_breadth * rng.random_range(WRIST_RANGE.0..=WRIST_RANGE.1);
    spec
}

fn l1(a: &[f64; 17], b: &[f64; 17]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Draws `subjects` base hands at least `inter_gap` apart (L1 over the
/// length-type parameters) and `images_per_subject` perturbed images of
/// each, every length-type parameter moved by at most `intra_noise`. Hand
/// types mix left and right in the 157:96 proportion. Pose and intensity
/// noise are drawn once per subject, so zero noise repeats the same image.
pub fn generate_population(
    subjects: usize,
    images_per_subject: usize,
    intra_noise: f64,
    inter_gap: f64,
    seed: u64,
) -> Result<Population> {
    if subjects == 0 || images_per_subject == 0 {
        return Err(Error::Parameter("subject and image counts must be positive".into()));
    }
    if !(intra_noise >= 0.0 && inter_gap >= 0.0) {
        return Err(Error::Parameter("noise and gap must be non-negative".into()));
    }
    let warning = (inter_gap <= 2.0 * intra_noise).then(|| {
        format!("inter-subject gap {inter_gap} does not exceed twice the intra-subject noise {intra_noise}")
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = subjects.to_string().len().max(3);
    let mut bases: Vec<(HandSpec, [f64; 17])> = Vec::with_capacity(subjects);
    let mut members = Vec::with_capacity(subjects * images_per_subject);
    for s in 0..subjects {
        let left = ((s + 1) as f64 * LEFT_HAND_SHARE).floor() > (s as f64 * LEFT_HAND_SHARE).floor();
        let hand_type = if left { HandType::Left } else { HandType::Right };
        let mut attempts = 0;
        let base = loop {
            attempts += 1;
            if attempts > 100_000 {
                return Err(Error::InvalidSpec(format!(
                    "cannot place subject {s} at gap {inter_gap} from the others"
                )));
            }
            let cand = draw_base(&mut rng, hand_type);
            if !plausible(&cand) {
                continue;
            }
            let p = shape_params(&cand);
            if bases.iter().all(|(_, q)| l1(&p, q) >= inter_gap) {
                break (cand, p);
            }
        };
        let subject = format!("s{s:0width$}");
        let pose = Pose::ALL[rng.random_range(0..4)];
        let image_seed: u64 = rng.random();
        for image_index in 0..images_per_subject {
            let spec = loop {
                let mut p = base.1;
                if intra_noise > 0.0 {
                    for v in &mut p {
                        *v += rng.random_range(-intra_noise..=intra_noise);
                    }
                }
                let mut spec = with_shape_params(&base.0, &p);
                spec.pose = pose;
                spec.seed = image_seed;
                if plausible(&spec) {
                    break spec;
                }
            };
            members.push(PopulationMember { subject: subject.clone(), image_index, spec });
        }
        bases.push(base);
    }
    Ok(Population { members, warning })
}
