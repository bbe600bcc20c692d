//! Image primitives checked against brute-force oracles on random inputs.

use std::collections::{HashSet, VecDeque};

use handgeom::imaging::*;
use proptest::prelude::*;

fn gray(w: usize, h: usize, px: Vec<u8>) -> GrayImage {
    GrayImage::new(w, h, px).unwrap()
}

fn arb_gray(max: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| prop::collection::vec(any::<u8>(), w * h).prop_map(move |px| gray(w, h, px)))
}

fn arb_mask(max: usize) -> impl Strategy<Value = BinaryImage> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(prop::bool::weighted(0.55), w * h)
            .prop_map(move |px| BinaryImage::new(w, h, px.into_iter().map(u8::from).collect()).unwrap())
    })
}

/// Otsu by exhaustive search with exact rational comparison of
/// `(S w0 - N s0)^2 / (w0 (N - w0))`; ties go to the smallest threshold.
fn otsu_oracle(img: &GrayImage) -> Option<u8> {
    let px = img.pixels();
    let n = px.len() as i128;
    let s: i128 = px.iter().map(|&v| v as i128).sum();
    let mut best: Option<(u8, u128, u128)> = None;
    for t in 0..=255u8 {
        let w0 = px.iter().filter(|&&v| v <= t).count() as i128;
        if w0 == 0 || w0 == n {
            continue;
        }
        let s0: i128 = px.iter().filter(|&&v| v <= t).map(|&v| v as i128).sum();
        let diff = (s * w0 - n * s0).unsigned_abs();
        let num = diff * diff;
        let den = (w0 * (n - w0)) as u128;
        if best.is_none_or(|(_, bn, bd)| num * bd > bn * den) {
            best = Some((t, num, den));
        }
    }
    best.map(|(t, _, _)| t)
}

fn median_oracle(img: &GrayImage, window: usize) -> Vec<u8> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let half = (window / 2) as i64;
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let mut v = Vec::new();
            for dr in -half..=half {
                for dc in -half..=half {
                    let rr = (r + dr).clamp(0, h - 1) as usize;
                    let cc = (c + dc).clamp(0, w - 1) as usize;
                    v.push(img.get(rr, cc));
                }
            }
            v.sort_unstable();
            out.push(v[v.len() / 2]);
        }
    }
    out
}

/// Breadth-first flood fill over 8-neighbours; components in raster order of discovery.
fn components_oracle(mask: &BinaryImage) -> Vec<HashSet<(usize, usize)>> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut comps = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) == 0 || seen[r * w + c] {
                continue;
            }
            let mut comp = HashSet::new();
            let mut queue = VecDeque::from([(r, c)]);
            seen[r * w + c] = true;
            while let Some((pr, pc)) = queue.pop_front() {
                comp.insert((pr, pc));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        let (nr, nc) = (pr as i64 + dr, pc as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if mask.get(nr, nc) == 1 && !seen[nr * w + nc] {
                            seen[nr * w + nc] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            comps.push(comp);
        }
    }
    comps
}

fn fg_set(mask: &BinaryImage) -> HashSet<(usize, usize)> {
    (0..mask.height())
        .flat_map(|r| (0..mask.width()).map(move |c| (r, c)))
        .filter(|&(r, c)| mask.get(r, c) == 1)
        .collect()
}

/// Fills background pockets not 4-connected to the image border.
fn fill_holes(mask: &BinaryImage) -> BinaryImage {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for r in 0..h {
        for c in 0..w {
            if (r == 0 || c == 0 || r == h - 1 || c == w - 1) && mask.get(r, c) == 0 {
                outside[r * w + c] = true;
                queue.push_back((r, c));
            }
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (nr, nc) = (r as i64 + dr, c as i64 + dc);
            if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                continue;
            }
            let (nr, nc) = (nr as usize, nc as usize);
            if mask.get(nr, nc) == 0 && !outside[nr * w + nc] {
                outside[nr * w + nc] = true;
                queue.push_back((nr, nc));
            }
        }
    }
    let px = (0..w * h).map(|i| u8::from(!outside[i])).collect();
    BinaryImage::new(w, h, px).unwrap()
}

/// Foreground pixels with a 4-neighbour in the background or off the image.
fn boundary_oracle(mask: &BinaryImage) -> HashSet<Point> {
    let mut out = HashSet::new();
    for r in 0..mask.height() as i32 {
        for c in 0..mask.width() as i32 {
            if !mask.is_fg(r, c) {
                continue;
            }
            if [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(dr, dc)| !mask.is_fg(r + dr, c + dc)) {
                out.insert(Point::new(r, c));
            }
        }
    }
    out
}

fn sobel_oracle(mask: &BinaryImage, r: i32, c: i32) -> i64 {
    let kx = [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]];
    let ky = [[-1, -2, -1], [0, 0, 0], [1, 2, 1]];
    let (mut gx, mut gy) = (0i64, 0i64);
    for i in 0..3 {
        for j in 0..3 {
            let v = mask.is_fg(r + i as i32 - 1, c + j as i32 - 1) as i64;
            gx += kx[i][j] * v;
            gy += ky[i][j] * v;
        }
    }
    gx * gx + gy * gy
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn otsu_matches_exhaustive_search(img in arb_gray(12)) {
        match otsu_oracle(&img) {
            Some(t) => prop_assert_eq!(otsu_threshold(&img).unwrap(), t),
            None => prop_assert!(otsu_threshold(&img).is_err()),
        }
    }

    #[test]
    fn otsu_on_few_levels(levels in prop::collection::vec(0u8..4, 2..60)) {
        // Heavy ties: only four distinct grey values.
        let px: Vec<u8> = levels.iter().map(|&l| l * 60 + 10).collect();
        let img = gray(px.len(), 1, px);
        match otsu_oracle(&img) {
            Some(t) => prop_assert_eq!(otsu_threshold(&img).unwrap(), t),
            None => prop_assert!(otsu_threshold(&img).is_err()),
        }
    }

    #[test]
    fn median_matches_sorting(img in arb_gray(14), window in prop::sample::select(vec![3usize, 5, 7])) {
        let filtered = median_filter(&img, window).unwrap();
        prop_assert_eq!(filtered.pixels(), &median_oracle(&img, window)[..]);
    }

    #[test]
    fn labels_match_flood_fill(mask in arb_mask(16)) {
        let comps = components_oracle(&mask);
        let (labels, sizes) = label_components(&mask);
        prop_assert_eq!(sizes.len(), comps.len());
        for (k, comp) in comps.iter().enumerate() {
            prop_assert_eq!(sizes[k], comp.len());
            for &(r, c) in comp {
                prop_assert_eq!(labels[r * mask.width() + c], k as u32 + 1);
            }
        }
    }

    #[test]
    fn largest_component_matches_flood_fill(mask in arb_mask(16)) {
        let comps = components_oracle(&mask);
        match largest_component(&mask) {
            Ok(kept) => {
                let max = comps.iter().map(|c| c.len()).max().unwrap();
                // Ties go to the component discovered first in raster order.
                let expected = comps.iter().find(|c| c.len() == max).unwrap();
                prop_assert_eq!(&fg_set(&kept), expected);
            }
            Err(_) => prop_assert!(comps.is_empty()),
        }
    }

    #[test]
    fn contour_is_the_outer_boundary(mask in arb_mask(14)) {
        let Ok(blob) = largest_component(&mask) else { return Ok(()) };
        let blob = fill_holes(&blob);
        let Ok(contour) = sobel_contour(&blob) else {
            // Only tiny silhouettes are rejected.
            prop_assert!(boundary_oracle(&blob).len() < 8);
            return Ok(());
        };
        let traced: HashSet<Point> = contour.points().iter().copied().collect();
        prop_assert_eq!(&traced, &boundary_oracle(&blob));
        let pts = contour.points();
        for i in 0..pts.len() {
            prop_assert!(pts[i].is_8_adjacent(pts[(i + 1) % pts.len()]));
        }
        let top_left = blob.pixels().iter().position(|&v| v == 1).unwrap();
        prop_assert_eq!(pts[0], Point::new((top_left / blob.width()) as i32, (top_left % blob.width()) as i32));
    }

    #[test]
    fn ellipse_contour_has_edge_response(a in 3.0f64..20.0, b in 3.0f64..20.0, theta in 0.0f64..3.2) {
        // Symmetric neighbourhoods cancel the kernel on ragged masks, so this is
        // checked on convex blobs only.
        let n = 45;
        let mut m = BinaryImage::empty(n, n).unwrap();
        let (sn, cs) = theta.sin_cos();
        for r in 0..n {
            for c in 0..n {
                let (y, x) = (r as f64 - 22.0, c as f64 - 22.0);
                let (u, v) = (x * cs + y * sn, -x * sn + y * cs);
                if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                    m.set(r, c, 1);
                }
            }
        }
        let contour = sobel_contour(&m).unwrap();
        let traced: HashSet<Point> = contour.points().iter().copied().collect();
        prop_assert_eq!(&traced, &boundary_oracle(&m));
        for p in contour.points() {
            prop_assert!(sobel_oracle(&m, p.row, p.col) > 0);
        }
    }

    #[test]
    fn sobel_matches_kernel(mask in arb_mask(10)) {
        let mag = sobel_magnitude(&mask);
        for r in 0..mask.height() {
            for c in 0..mask.width() {
                prop_assert_eq!(mag[r * mask.width() + c] as i64, sobel_oracle(&mask, r as i32, c as i32));
            }
        }
    }
}

#[test]
fn contour_of_large_disc_is_clockwise() {
    let n = 41;
    let mut m = BinaryImage::empty(n, n).unwrap();
    for r in 0..n {
        for c in 0..n {
            let (dr, dc) = (r as f64 - 20.0, c as f64 - 20.0);
            if dr * dr + dc * dc <= 15.0 * 15.0 {
                m.set(r, c, 1);
            }
        }
    }
    let contour = sobel_contour(&m).unwrap();
    assert!(contour.signed_area2() > 0);
    let traced: HashSet<Point> = contour.points().iter().copied().collect();
    assert_eq!(traced, boundary_oracle(&m));
}
