//! Raster primitives: grayscale/binary images, thresholding, median filtering,
//! connected components and boundary tracing.
//!
//! All images are row-major. Coordinates are `(row, col)` with row 0 at the top.

use crate::error::{Error, Result};

/// Integer pixel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub row: i32,
    pub col: i32,
}

impl Point {
    pub const fn new(row: i32, col: i32) -> Self {
        Point { row, col }
    }

    /// Squared Euclidean distance, exact on integer coordinates.
    pub fn dist2(self, other: Point) -> i64 {
        let dr = (self.row - other.row) as i64;
        let dc = (self.col - other.col) as i64;
        dr * dr + dc * dc
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.dist2(other) as f64).sqrt()
    }

    pub fn is_8_adjacent(self, other: Point) -> bool {
        self != other && (self.row - other.row).abs() <= 1 && (self.col - other.col).abs() <= 1
    }
}

/// Real-valued coordinate in the same `(row, col)` frame as [`Point`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointF {
    pub row: f64,
    pub col: f64,
}

impl PointF {
    pub const fn new(row: f64, col: f64) -> Self {
        PointF { row, col }
    }

    pub fn dist(self, other: PointF) -> f64 {
        (self.row - other.row).hypot(self.col - other.col)
    }

    pub fn midpoint(self, other: PointF) -> PointF {
        PointF::new((self.row + other.row) / 2.0, (self.col + other.col) / 2.0)
    }

    /// `self + t * (other - self)`
    pub fn lerp(self, other: PointF, t: f64) -> PointF {
        PointF::new(
            self.row + t * (other.row - self.row),
            self.col + t * (other.col - self.col),
        )
    }
}

impl From<Point> for PointF {
    fn from(p: Point) -> Self {
        PointF::new(p.row as f64, p.col as f64)
    }
}

/// 8-bit RGB raster, interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RgbImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

macro_rules! raster_common {
    ($ty:ident) => {
        impl $ty {
            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn pixels(&self) -> &[u8] {
                &self.pixels
            }

            pub fn get(&self, row: usize, col: usize) -> u8 {
                self.pixels[row * self.width + col]
            }

            /// Value at a signed coordinate, `None` outside the raster.
            pub fn get_checked(&self, row: i32, col: i32) -> Option<u8> {
                if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
                    None
                } else {
                    Some(self.pixels[row as usize * self.width + col as usize])
                }
            }

            pub fn set(&mut self, row: usize, col: usize, v: u8) {
                self.pixels[row * self.width + col] = v;
            }

            /// Rotate clockwise by `quarter_turns * 90` degrees.
            pub fn rotate_cw(&self, quarter_turns: u32) -> Self {
                let (w, h, p) = rotate_plane(self.width, self.height, &self.pixels, quarter_turns);
                $ty { width: w, height: h, pixels: p }
            }

            /// Mirror left-right.
            pub fn mirror(&self) -> Self {
                let mut pixels = Vec::with_capacity(self.pixels.len());
                for row in self.pixels.chunks(self.width) {
                    pixels.extend(row.iter().rev());
                }
                $ty { width: self.width, height: self.height, pixels }
            }

            /// Copy of the inclusive rectangle `[top..=bottom] x [left..=right]`.
            pub fn crop(&self, top: usize, left: usize, bottom: usize, right: usize) -> Self {
                let width = right - left + 1;
                let height = bottom - top + 1;
                let mut pixels = Vec::with_capacity(width * height);
                for r in top..=bottom {
                    pixels.extend_from_slice(&self.pixels[r * self.width + left..=r * self.width + right]);
                }
                $ty { width, height, pixels }
            }

            /// Nearest-neighbour resampling to `width x height`.
            ///
            /// Output pixel `(r, c)` takes the source pixel containing the
            /// output pixel's centre, `(r + 0.5) * h / height` and
            /// `(c + 0.5) * w / width`. A centre falling exactly on a source
            /// pixel boundary takes the pixel nearer the image centre, so
            /// resizing commutes with mirroring.
            pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
                let src_cols: Vec<usize> = (0..width).map(|c| nearest_source(c, self.width, width)).collect();
                let mut pixels = Vec::with_capacity(width * height);
                for r in 0..height {
                    let sr = nearest_source(r, self.height, height);
                    let row = &self.pixels[sr * self.width..(sr + 1) * self.width];
                    pixels.extend(src_cols.iter().map(|&sc| row[sc]));
                }
                $ty { width, height, pixels }
            }
        }
    };
}

/// Source index sampled by output index `i` when resizing `src` samples to `dst`.
fn nearest_source(i: usize, src: usize, dst: usize) -> usize {
    if 2 * i < dst {
        ((2 * i + 1) * src) / (2 * dst)
    } else {
        src - 1 - ((2 * (dst - 1 - i) + 1) * src) / (2 * dst)
    }
}

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

raster_common!(GrayImage);

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("zero-sized image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }
}

/// Binary raster: 0 = background, 1 = hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

raster_common!(BinaryImage);

impl BinaryImage {
    /// Builds a mask; any nonzero value counts as foreground.
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("zero-sized image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        let pixels = pixels.into_iter().map(|v| (v != 0) as u8).collect();
        Ok(BinaryImage { width, height, pixels })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        BinaryImage::new(width, height, vec![0; width * height])
    }

    pub fn is_fg(&self, row: i32, col: i32) -> bool {
        self.get_checked(row, col) == Some(1)
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v == 1).count()
    }

    /// Inclusive bounding box `(top, left, bottom, right)` of the foreground.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) == 1 {
                    bbox = Some(match bbox {
                        None => (r, c, r, c),
                        Some((t, l, b, rt)) => (t.min(r), l.min(c), b.max(r), rt.max(c)),
                    });
                }
            }
        }
        bbox
    }

    /// Foreground as a 0/255 grayscale image, for dumps.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| v * 255).collect(),
        }
    }
}

fn rotate_plane<T: Copy>(w: usize, h: usize, src: &[T], quarter_turns: u32) -> (usize, usize, Vec<T>) {
    match quarter_turns % 4 {
        0 => (w, h, src.to_vec()),
        1 => {
            // (r, c) -> (c, h - 1 - r)
            let mut out = Vec::with_capacity(src.len());
            for r in 0..w {
                for c in 0..h {
                    out.push(src[(h - 1 - c) * w + r]);
                }
            }
            (h, w, out)
        }
        2 => (w, h, src.iter().rev().copied().collect()),
        _ => {
            // (r, c) -> (w - 1 - c, r)
            let mut out = Vec::with_capacity(src.len());
            for r in 0..w {
                for c in 0..h {
                    out.push(src[c * w + (w - 1 - r)]);
                }
            }
            (h, w, out)
        }
    }
}

/// Luminance conversion with weights 0.299 / 0.587 / 0.114, rounded.
pub fn to_grayscale(image: &RgbImage) -> Result<GrayImage> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::Dimension(format!(
            "zero-sized image {}x{}",
            image.width, image.height
        )));
    }
    // Integer form of round(0.299 R + 0.587 G + 0.114 B).
    let pixels = image
        .pixels
        .iter()
        .map(|&[r, g, b]| {
            let y = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
            ((y + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage::new(image.width, image.height, pixels)
}

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in &img.pixels {
        hist[v as usize] += 1;
    }
    hist
}

/// Otsu's threshold: the level `t` maximizing between-class variance when
/// classes are `<= t` and `> t`. Ties go to the smallest `t`.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8> {
    let hist = histogram(img);
    let n: u64 = hist.iter().sum();
    let total: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();

    let mut best: Option<(u8, f64)> = None;
    let mut w0 = 0u64;
    let mut s0 = 0u64;
    for (t, &h) in hist.iter().enumerate() {
        w0 += h;
        s0 += t as u64 * h;
        if w0 == 0 || w0 == n {
            continue;
        }
        // N^2 * sigma_b^2 = (S w0 - N s0)^2 / (w0 (N - w0))
        let diff = total as i128 * w0 as i128 - n as i128 * s0 as i128;
        let num = diff as f64 * diff as f64;
        let den = w0 as f64 * (n - w0) as f64;
        let var = num / den;
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((t as u8, var));
        }
    }
    match best {
        Some((t, _)) => Ok(t),
        None => Err(Error::DegenerateHistogram(img.pixels[0])),
    }
}

/// Which side of the threshold is the hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// Bright hand on a dark background: intensity `> t` is foreground.
    #[default]
    BrightForeground,
    /// Dark hand on a bright background: intensity `<= t` is foreground.
    DarkForeground,
}

pub fn binarize(img: &GrayImage, t: u8, polarity: Polarity) -> BinaryImage {
    let pixels = img
        .pixels
        .iter()
        .map(|&v| match polarity {
            Polarity::BrightForeground => (v > t) as u8,
            Polarity::DarkForeground => (v <= t) as u8,
        })
        .collect();
    BinaryImage { width: img.width, height: img.height, pixels }
}

/// Median over a `window x window` neighbourhood with coordinates clamped at the border.
pub fn median_filter(img: &GrayImage, window: usize) -> Result<GrayImage> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "median window must be odd and >= 3, got {window}"
        )));
    }
    if window == 3 {
        return Ok(median3(img));
    }
    Ok(median_select(img, window))
}

fn median_select(img: &GrayImage, window: usize) -> GrayImage {
    let half = (window / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);
    let mut out = Vec::with_capacity(img.pixels.len());
    let mut buf = Vec::with_capacity(window * window);
    let mid = window * window / 2;
    for r in 0..h {
        for c in 0..w {
            buf.clear();
            for dr in -half..=half {
                let rr = (r + dr).clamp(0, h - 1) as usize;
                let row = &img.pixels[rr * img.width..(rr + 1) * img.width];
                for dc in -half..=half {
                    buf.push(row[(c + dc).clamp(0, w - 1) as usize]);
                }
            }
            let (_, m, _) = buf.select_nth_unstable(mid);
            out.push(*m);
        }
    }
    GrayImage { width: img.width, height: img.height, pixels: out }
}

#[inline]
fn sort3(a: u8, b: u8, c: u8) -> (u8, u8, u8) {
    let (lo, hi) = (a.min(b), a.max(b));
    (lo.min(c), hi.min(c).max(lo), hi.max(c))
}

#[inline]
fn med3(a: u8, b: u8, c: u8) -> u8 {
    sort3(a, b, c).1
}

/// 3x3 median with clamped borders. Each vertical triple is sorted once; the
/// window median is then the median of the largest low, the middle median
/// and the smallest high of its three columns.
fn median3(img: &GrayImage) -> GrayImage {
    let (w, h) = (img.width, img.height);
    let mut out = Vec::with_capacity(img.pixels.len());
    let (mut lo, mut md, mut hi) = (vec![0u8; w], vec![0u8; w], vec![0u8; w]);
    for r in 0..h {
        let row = |rr: usize| &img.pixels[rr * w..(rr + 1) * w];
        let (up, mid, down) = (row(r.saturating_sub(1)), row(r), row((r + 1).min(h - 1)));
        for c in 0..w {
            (lo[c], md[c], hi[c]) = sort3(up[c], mid[c], down[c]);
        }
        for c in 0..w {
            let (a, b) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let l = lo[a].max(lo[c]).max(lo[b]);
            let m = med3(md[a], md[c], md[b]);
            let u = hi[a].min(hi[c]).min(hi[b]);
            out.push(med3(l, m, u));
        }
    }
    GrayImage { width: w, height: h, pixels: out }
}

/// Offsets of the 8-neighbourhood, clockwise on screen starting at west.
const NEIGHBORS_CW: [(i32, i32); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

/// Labels 8-connected foreground components in raster discovery order.
/// Returns the label map (0 = background) and each component's pixel count.
pub fn label_components(img: &BinaryImage) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (img.width as i32, img.height as i32);
    let mut labels = vec![0u32; img.pixels.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..img.pixels.len() {
        if img.pixels[start] == 0 || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        let mut size = 0usize;
        labels[start] = label;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            size += 1;
            let (r, c) = ((idx / img.width) as i32, (idx % img.width) as i32);
            for (dr, dc) in NEIGHBORS_CW {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h || nc >= w {
                    continue;
                }
                let n = nr as usize * img.width + nc as usize;
                if img.pixels[n] == 1 && labels[n] == 0 {
                    labels[n] = label;
                    stack.push(n);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest 8-connected component. Ties go to the component
/// containing the topmost-leftmost pixel, i.e. the first one discovered.
pub fn largest_component(img: &BinaryImage) -> Result<BinaryImage> {
    let (labels, sizes) = label_components(img);
    let mut best: Option<(u32, usize)> = None;
    for (i, &s) in sizes.iter().enumerate() {
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i as u32 + 1, s));
        }
    }
    let (keep, _) = best.ok_or(Error::NoHand)?;
    let pixels = labels.iter().map(|&l| (l == keep) as u8).collect();
    Ok(BinaryImage { width: img.width, height: img.height, pixels })
}

/// Squared Sobel gradient magnitude at one pixel, out-of-range pixels counting as background.
pub fn sobel_at(img: &BinaryImage, r: i32, c: i32) -> u32 {
    let px = |r: i32, c: i32| -> i32 { img.get_checked(r, c).unwrap_or(0) as i32 };
    let gx = (px(r - 1, c + 1) + 2 * px(r, c + 1) + px(r + 1, c + 1))
        - (px(r - 1, c - 1) + 2 * px(r, c - 1) + px(r + 1, c - 1));
    let gy = (px(r + 1, c - 1) + 2 * px(r + 1, c) + px(r + 1, c + 1))
        - (px(r - 1, c - 1) + 2 * px(r - 1, c) + px(r - 1, c + 1));
    (gx * gx + gy * gy) as u32
}

/// Squared Sobel gradient magnitude of the whole mask, row-major.
pub fn sobel_magnitude(img: &BinaryImage) -> Vec<u32> {
    let (w, h) = (img.width as i32, img.height as i32);
    (0..h).flat_map(|r| (0..w).map(move |c| sobel_at(img, r, c))).collect()
}

/// Closed boundary of a silhouette, clockwise on screen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    points: Vec<Point>,
}

impl Contour {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, p: Point) -> Option<usize> {
        self.points.iter().position(|&q| q == p)
    }

    /// Twice the signed shoelace area; positive means clockwise on screen (rows grow downward).
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let a = self.points[i];
                let b = self.points[(i + 1) % n];
                a.col as i64 * b.row as i64 - b.col as i64 * a.row as i64
            })
            .sum()
    }
}

/// Outer boundary of the silhouette's edge pixels (nonzero Sobel response),
/// ordered by a clockwise Moore-neighbour walk from the topmost-leftmost pixel.
pub fn sobel_contour(img: &BinaryImage) -> Result<Contour> {
    let start_idx = img.pixels.iter().position(|&v| v == 1).ok_or(Error::NoHand)?;
    let start = Point::new((start_idx / img.width) as i32, (start_idx % img.width) as i32);
    if sobel_at(img, start.row, start.col) == 0 {
        return Err(Error::MalformedSilhouette("start pixel has no edge response".into()));
    }

    let step = |p: Point, d: usize| Point::new(p.row + NEIGHBORS_CW[d].0, p.col + NEIGHBORS_CW[d].1);
    let dir_of = |from: Point, to: Point| -> usize {
        let d = (to.row - from.row, to.col - from.col);
        NEIGHBORS_CW.iter().position(|&n| n == d).expect("8-adjacent")
    };

    // Backtrack starts at the west neighbour, which is background by construction.
    let next_from = |cur: Point, back: usize| -> Option<(Point, usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let cand = step(cur, d);
            if img.is_fg(cand.row, cand.col) {
                let prev = step(cur, (d + 7) % 8);
                return Some((cand, dir_of(cand, prev)));
            }
        }
        None
    };

    let Some(first) = next_from(start, 0) else {
        return Err(Error::MalformedSilhouette("isolated foreground pixel".into()));
    };
    let mut points = vec![start];
    let mut cur = first;
    let limit = 4 * img.pixels.len() + 8;
    // Jacob's stopping criterion: stop on re-entering the start with the same first move.
    loop {
        if cur.0 == start {
            let again = next_from(start, cur.1).expect("start has a neighbour");
            if again.0 == first.0 {
                break;
            }
        }
        points.push(cur.0);
        if points.len() > limit {
            return Err(Error::MalformedSilhouette("boundary walk does not close".into()));
        }
        cur = next_from(cur.0, cur.1).expect("walk stays on the component");
    }
    if points.len() < 8 {
        return Err(Error::MalformedSilhouette(format!(
            "boundary of {} points is too short",
            points.len()
        )));
    }
    Ok(Contour { points })
}
