//! Disk structuring elements, grayscale and binary morphology, Otsu thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::RegionMask;
use crate::raster::Grid;

/// Disk-shaped structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    radius: usize,
}

impl StructuringElement {
    pub fn disk(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::InvalidConfig("structuring element radius must be >= 1".into()));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Offsets `(dx, dy)` with `dx² + dy² ≤ r²`.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    out.push((dx, dy));
                }
            }
        }
        out
    }
}

fn in_bounds(x: isize, y: isize, w: usize, h: usize) -> bool {
    x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h
}

/// Grayscale dilation minus erosion; out-of-image pixels are ignored.
pub fn morphological_gradient(grid: &Grid, se: StructuringElement) -> Grid {
    let offsets = se.offsets();
    let (w, h) = grid.dims();
    let mut out = Grid::zeros(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x + dx, y + dy);
                if in_bounds(nx, ny, w, h) {
                    let v = grid.get(nx as usize, ny as usize);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            out.data[y as usize * w + x as usize] = hi - lo;
        }
    }
    out
}

/// Binary dilation; pixels outside the image count as background.
pub fn dilate(mask: &RegionMask, se: StructuringElement) -> RegionMask {
    let offsets = se.offsets();
    let (w, h) = mask.dims();
    RegionMask::from_fn(w, h, |x, y| {
        offsets.iter().any(|&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            in_bounds(nx, ny, w, h) && mask.get(nx as usize, ny as usize)
        })
    })
}

/// Binary erosion; pixels outside the image count as foreground.
pub fn erode(mask: &RegionMask, se: StructuringElement) -> RegionMask {
    let offsets = se.offsets();
    let (w, h) = mask.dims();
    RegionMask::from_fn(w, h, |x, y| {
        offsets.iter().all(|&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            !in_bounds(nx, ny, w, h) || mask.get(nx as usize, ny as usize)
        })
    })
}

pub fn close(mask: &RegionMask, se: StructuringElement) -> RegionMask {
    erode(&dilate(mask, se), se)
}

/// 3×3 dilation.
pub fn dilate_square(mask: &RegionMask) -> RegionMask {
    let (w, h) = mask.dims();
    RegionMask::from_fn(w, h, |x, y| {
        (-1..=1).any(|dy: isize| {
            (-1..=1).any(|dx: isize| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                in_bounds(nx, ny, w, h) && mask.get(nx as usize, ny as usize)
            })
        })
    })
}

/// Set pixels with at least one in-image 8-neighbor outside the mask.
pub fn inner_boundary(mask: &RegionMask) -> RegionMask {
    let (w, h) = mask.dims();
    RegionMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && (-1..=1).any(|dy: isize| {
                (-1..=1).any(|dx: isize| {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    in_bounds(nx, ny, w, h) && !mask.get(nx as usize, ny as usize)
                })
            })
    })
}

/// Fills background components that do not touch the image border.
pub fn fill_holes(mask: &RegionMask) -> RegionMask {
    let (w, h) = mask.dims();
    let mut outside = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) && !mask.get(x, y) {
                let i = y * w + x;
                if !outside[i] {
                    outside[i] = true;
                    stack.push(i);
                }
            }
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if in_bounds(nx, ny, w, h) {
                let j = ny as usize * w + nx as usize;
                if !outside[j] && !mask.contains_index(j) {
                    outside[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    RegionMask::from_bits(w, h, outside.into_iter().map(|o| !o).collect()).expect("same dimensions")
}

/// Otsu threshold over `values` (256 bins on `[0, 1]`). `None` when the values are constant.
/// Foreground is `value > threshold`.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    const BINS: usize = 256;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if values.is_empty() || hi - lo <= 0.0 {
        return None;
    }
    let bin_of = |v: f64| (((v.clamp(0.0, 1.0)) * BINS as f64) as usize).min(BINS - 1);
    let mut hist = [0usize; BINS];
    for &v in values {
        hist[bin_of(v)] += 1;
    }
    let total = values.len() as f64;
    let center = |b: usize| (b as f64 + 0.5) / BINS as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(b, &c)| c as f64 * center(b)).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (b, &count) in hist.iter().enumerate().take(BINS - 1) {
        w0 += count as f64;
        sum0 += count as f64 * center(b);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, b);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        // All samples share one bin; split at the midpoint of the observed range.
        return Some(0.5 * (lo + hi));
    }
    Some((best.1 + 1) as f64 / BINS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_offsets() {
        assert_eq!(StructuringElement::disk(1).unwrap().offsets().len(), 5);
        assert_eq!(StructuringElement::disk(5).unwrap().offsets().len(), 81);
        assert!(StructuringElement::disk(0).is_err());
    }

    #[test]
    fn fill_holes_closes_ring() {
        let ring = RegionMask::from_fn(9, 9, |x, y| {
            let d = (x as i32 - 4).pow(2) + (y as i32 - 4).pow(2);
            (4..=12).contains(&d)
        });
        let filled = fill_holes(&ring);
        assert!(filled.get(4, 4));
        assert!(!filled.get(0, 0));
    }

    #[test]
    fn otsu_splits_bimodal() {
        let mut v = vec![0.2; 50];
        v.extend(vec![0.8; 30]);
        let t = otsu_threshold(&v).unwrap();
        assert!(t > 0.2 && t < 0.8, "{t}");
        assert_eq!(otsu_threshold(&[0.3; 10]), None);
    }

    #[test]
    fn gradient_of_step() {
        let g = Grid::new(9, 1, (0..9).map(|x| if x < 4 { 0.0 } else { 1.0 }).collect()).unwrap();
        let m = morphological_gradient(&g, StructuringElement::disk(1).unwrap());
        assert_eq!(m.data, vec![0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
