//! Independent oracles and fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};

use pallor_core::edges::{FrangiParams, RidgePolarity};
use pallor_core::mask::RegionMask;
use pallor_core::raster::{Grid, PlaneImage, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(w: usize, h: usize, seed: u64) -> PlaneImage {
    let mut r = rng(seed);
    PlaneImage::from_fn(w, h, |_, _| r.random_range(0.0..1.0)).unwrap()
}

fn clamped(g: &Grid, x: isize, y: isize) -> f64 {
    let cx = x.max(0).min(g.width as isize - 1) as usize;
    let cy = y.max(0).min(g.height as isize - 1) as usize;
    g.data[cy * g.width + cx]
}

const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const KY: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// Brute-force 3×3 correlation with replicate borders: magnitude and direction in `[0, 2π)`.
pub fn sobel_oracle(g: &Grid) -> (Vec<f64>, Vec<f64>) {
    let mut mag = Vec::with_capacity(g.data.len());
    let mut dir = Vec::with_capacity(g.data.len());
    for y in 0..g.height as isize {
        for x in 0..g.width as isize {
            let (mut gx, mut gy) = (0.0, 0.0);
            for (r, (kx_row, ky_row)) in KX.iter().zip(&KY).enumerate() {
                for c in 0..3 {
                    let v = clamped(g, x + c as isize - 1, y + r as isize - 1);
                    gx += kx_row[c] * v;
                    gy += ky_row[c] * v;
                }
            }
            let m = (gx * gx + gy * gy).sqrt();
            mag.push(m);
            dir.push(if m == 0.0 { 0.0 } else { gy.atan2(gx).rem_euclid(TAU) });
        }
    }
    (mag, dir)
}

/// Distance between two angles on the circle.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % TAU;
    d.min(TAU - d)
}

/// Frangi response from a direct 2-D Gaussian convolution, a finite-difference Hessian and
/// closed-form eigenvalues.
pub fn frangi_oracle(g: &Grid, params: &FrangiParams) -> Vec<f64> {
    let (w, h) = (g.width, g.height);
    let mut best = vec![0.0f64; w * h];
    for &sigma in &params.scales {
        let r = (3.0 * sigma).ceil().max(1.0) as isize;
        let mut kernel = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                kernel.push((dx, dy, (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp()));
            }
        }
        let total: f64 = kernel.iter().map(|k| k.2).sum();
        let mut smooth = Grid {
            width: w,
            height: h,
            data: vec![0.0; w * h],
        };
        for y in 0..h as isize {
            for x in 0..w as isize {
                smooth.data[y as usize * w + x as usize] =
                    kernel.iter().map(|&(dx, dy, k)| k * clamped(g, x + dx, y + dy)).sum::<f64>() / total;
            }
        }
        for y in 0..h as isize {
            for x in 0..w as isize {
                let f = |dx: isize, dy: isize| clamped(&smooth, x + dx, y + dy);
                let hxx = f(1, 0) - 2.0 * f(0, 0) + f(-1, 0);
                let hyy = f(0, 1) - 2.0 * f(0, 0) + f(0, -1);
                let hxy = (f(1, 1) - f(-1, 1) - f(1, -1) + f(-1, -1)) / 4.0;
                let (hxx, hyy, hxy) = (hxx * sigma * sigma, hyy * sigma * sigma, hxy * sigma * sigma);
                let root = ((hxx - hyy).powi(2) + 4.0 * hxy * hxy).sqrt();
                let (a, b) = ((hxx + hyy + root) / 2.0, (hxx + hyy - root) / 2.0);
                let (small, large) = if a.abs() > b.abs() { (b, a) } else { (a, b) };
                let keep = match params.polarity {
                    RidgePolarity::Dark => large > 0.0,
                    RidgePolarity::Bright => large < 0.0,
                };
                let v = if keep {
                    let rb2 = (small / large).powi(2);
                    let s2 = small * small + large * large;
                    (-rb2 / (2.0 * params.beta * params.beta)).exp()
                        * (1.0 - (-s2 / (2.0 * params.c * params.c)).exp())
                } else {
                    0.0
                };
                let i = y as usize * w + x as usize;
                best[i] = best[i].max(v);
            }
        }
    }
    best
}

/// Ridge and blob test images: `i` picks orientation, width, polarity and whether a blob is added.
pub fn ridge_blob_plane(i: usize) -> (PlaneImage, RidgePolarity) {
    let (w, h) = (36, 32);
    let angle = i as f64 * PI / 7.0;
    let width = 1.0 + (i % 3) as f64;
    let dark = i % 2 == 0;
    let (ca, sa) = (angle.cos(), angle.sin());
    let plane = PlaneImage::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - 17.5, y as f64 - 15.5);
        let d = dx * sa - dy * ca;
        let mut v = 0.5 * (-(d * d) / (2.0 * width * width)).exp();
        if i % 4 == 3 {
            let (bx, by) = (x as f64 - 8.0, y as f64 - 24.0);
            v += 0.4 * (-(bx * bx + by * by) / 8.0).exp();
        }
        if dark {
            0.9 - v
        } else {
            0.1 + v
        }
    })
    .unwrap();
    (plane, if dark { RidgePolarity::Dark } else { RidgePolarity::Bright })
}

/// Multi-basin plane: a few Gaussian pits, quantized so that plateaus and equal levels occur.
pub fn basin_plane(seed: u64) -> (PlaneImage, RegionMask, usize) {
    let mut r = rng(1000 + seed);
    let (w, h) = (40 + (seed as usize % 3) * 4, 36);
    let pits: Vec<(f64, f64, f64, f64)> = (0..2 + seed as usize % 4)
        .map(|_| {
            (
                r.random_range(4.0..w as f64 - 4.0),
                r.random_range(4.0..h as f64 - 4.0),
                r.random_range(0.3..0.7),
                r.random_range(3.0..7.0),
            )
        })
        .collect();
    let levels = [16.0, 32.0, 64.0][seed as usize % 3];
    let plane = PlaneImage::from_fn(w, h, |x, y| {
        let v: f64 = pits
            .iter()
            .map(|&(cx, cy, depth, s)| {
                let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                depth * (-d2 / (2.0 * s * s)).exp()
            })
            .sum();
        ((1.0 - v).clamp(0.0, 1.0) * levels).round() / levels
    })
    .unwrap();
    let mask = if seed % 2 == 0 {
        RegionMask::full(w, h)
    } else {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        RegionMask::from_fn(w, h, |x, y| {
            ((x as f64 - cx) / (w as f64 * 0.48)).powi(2) + ((y as f64 - cy) / (h as f64 * 0.48)).powi(2) <= 1.0
        })
    };
    let radius = [1, 2, 3, 5][seed as usize % 4];
    (plane, mask, radius)
}

fn neighbors8(i: usize, w: usize, h: usize) -> Vec<usize> {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    let mut out = Vec::with_capacity(8);
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (nx, ny) = (x + dx, y + dy);
            if (dx, dy) != (0, 0) && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                out.push(ny as usize * w + nx as usize);
            }
        }
    }
    out
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Watershed oracle: morphological gradient by direct disk enumeration, minima by union-find
/// over equal-valued plateaus, flooding by repeated linear scans for the lowest
/// `(level, arrival)` pixel.
pub fn watershed_oracle(plane: &PlaneImage, mask: &RegionMask, radius: usize) -> Vec<u32> {
    let (w, h) = plane.dims();
    let n = w * h;
    let masked: Vec<f64> = (0..n).map(|i| if mask.bits()[i] { plane.data()[i] } else { 0.0 }).collect();
    let r = radius as isize;
    let relief: Vec<f64> = (0..n)
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let mut vals = Vec::new();
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if dx * dx + dy * dy <= r * r && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        vals.push(masked[ny as usize * w + nx as usize]);
                    }
                }
            }
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            hi - lo
        })
        .collect();
    let inside = |i: usize| mask.bits()[i];
    let mut parent: Vec<usize> = (0..n).collect();
    for i in (0..n).filter(|&i| inside(i)) {
        for j in neighbors8(i, w, h) {
            if inside(j) && relief[j] == relief[i] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut lower = vec![false; n];
    for i in (0..n).filter(|&i| inside(i)) {
        if neighbors8(i, w, h).into_iter().any(|j| inside(j) && relief[j] < relief[i]) {
            lower[roots[i]] = true;
        }
    }
    let mut labels = vec![0u32; n];
    let mut next = 0;
    let mut root_label = vec![0u32; n];
    for i in (0..n).filter(|&i| inside(i)) {
        let root = roots[i];
        if lower[root] {
            continue;
        }
        if root_label[root] == 0 {
            next += 1;
            root_label[root] = next;
        }
        labels[i] = root_label[root];
    }
    let mut queue: Vec<(f64, usize, usize)> = Vec::new();
    let mut arrivals = 0;
    for i in 0..n {
        if labels[i] != 0 {
            queue.push((relief[i], arrivals, i));
            arrivals += 1;
        }
    }
    while !queue.is_empty() {
        let mut k = 0;
        for (q, e) in queue.iter().enumerate() {
            if (e.0, e.1) < (queue[k].0, queue[k].1) {
                k = q;
            }
        }
        let (_, _, i) = queue.swap_remove(k);
        for j in neighbors8(i, w, h) {
            if inside(j) && labels[j] == 0 {
                labels[j] = labels[i];
                queue.push((relief[j], arrivals, j));
                arrivals += 1;
            }
        }
    }
    labels
}

/// Labeling as a set of pixel sets, ignoring label values; 0 is background.
pub fn partition(labels: &[u32]) -> BTreeSet<Vec<usize>> {
    let max = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut groups = vec![Vec::new(); max + 1];
    for (i, &l) in labels.iter().enumerate() {
        groups[l as usize].push(i);
    }
    groups.into_iter().skip(1).filter(|g| !g.is_empty()).collect()
}

/// AUC as the fraction of correctly ordered positive/negative pairs, ties counting half.
pub fn pair_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Hand-built 10×10 eye fixture: a colored gradient image with sclera on the upper rows and
/// conjunctiva on the lower rows, plus a small iris.
pub fn fixture_10x10() -> (RasterImage, RegionMask, RegionMask, RegionMask) {
    let img = RasterImage::from_fn(10, 10, |x, y| {
        let (fx, fy) = (x as f64 / 9.0, y as f64 / 9.0);
        [0.2 + 0.7 * fy, 0.1 + 0.5 * fx * fy, 0.9 - 0.6 * fx]
    })
    .unwrap();
    let iris = RegionMask::from_fn(10, 10, |x, y| (4..7).contains(&x) && (1..4).contains(&y));
    let sclera = RegionMask::from_fn(10, 10, |x, y| y < 5 && !((4..7).contains(&x) && (1..4).contains(&y)));
    let conjunctiva = RegionMask::from_fn(10, 10, |x, y| y >= 6 && (x + y) % 5 != 0);
    (img, iris, sclera, conjunctiva)
}

/// Max, mean and population variance by direct enumeration of `(x, y)` in raster order.
pub fn enumerate_stats(values: &Grid, region: &RegionMask) -> [f64; 3] {
    let mut picked = Vec::new();
    for y in 0..region.height() {
        for x in 0..region.width() {
            if region.get(x, y) {
                picked.push(values.data[y * values.width + x]);
            }
        }
    }
    let n = picked.len() as f64;
    let max = picked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = picked.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == min {
        return [max, max, 0.0];
    }
    let mean = picked.iter().sum::<f64>() / n;
    let variance = picked.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    [max, mean, variance]
}
