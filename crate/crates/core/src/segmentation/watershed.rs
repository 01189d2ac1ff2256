//! Marker-based (Meyer) watershed flooding over the morphological gradient.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::mask::RegionMask;
use crate::raster::{Grid, PlaneImage};

use super::components::{RegionLabeling, NEIGHBORS_8};
use super::morphology::{morphological_gradient, StructuringElement};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    level: f64,
    seq: u64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.level
            .total_cmp(&other.level)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbors(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    NEIGHBORS_8.into_iter().filter_map(move |(dx, dy)| {
        let (nx, ny) = (x + dx, y + dy);
        (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h).then(|| ny as usize * w + nx as usize)
    })
}

/// Regional minima of `relief` inside `mask`: 8-connected equal-valued plateaus with no
/// strictly lower masked neighbor. Labels are assigned in raster order starting at 1.
pub fn regional_minima(relief: &Grid, mask: &RegionMask) -> Vec<u32> {
    let (w, h) = relief.dims();
    let n = w * h;
    let mut labels = vec![0u32; n];
    let mut visited = vec![false; n];
    let mut next = 0u32;
    for start in 0..n {
        if !mask.contains_index(start) || visited[start] {
            continue;
        }
        let level = relief.data[start];
        let mut plateau = vec![start];
        visited[start] = true;
        let mut is_minimum = true;
        let mut cursor = 0;
        while cursor < plateau.len() {
            let i = plateau[cursor];
            cursor += 1;
            for j in neighbors(i, w, h) {
                if !mask.contains_index(j) {
                    continue;
                }
                let v = relief.data[j];
                if v < level {
                    is_minimum = false;
                } else if v == level && !visited[j] {
                    visited[j] = true;
                    plateau.push(j);
                }
            }
        }
        if is_minimum {
            next += 1;
            for i in plateau {
                labels[i] = next;
            }
        }
    }
    labels
}

/// Floods `relief` from labeled markers inside `mask`.
///
/// Pixels are popped in increasing `(level, insertion order)`; each unlabeled masked neighbor
/// takes the label of the pixel that reached it first, so every masked pixel ends up labeled.
pub fn flood_from_markers(relief: &Grid, mask: &RegionMask, markers: &[u32]) -> Vec<u32> {
    let (w, h) = relief.dims();
    let mut labels = markers.to_vec();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 {
            heap.push(Reverse(Entry {
                level: relief.data[i],
                seq,
                index: i,
            }));
            seq += 1;
        }
    }
    while let Some(Reverse(Entry { index, .. })) = heap.pop() {
        let label = labels[index];
        for j in neighbors(index, w, h) {
            if mask.contains_index(j) && labels[j] == 0 {
                labels[j] = label;
                heap.push(Reverse(Entry {
                    level: relief.data[j],
                    seq,
                    index: j,
                }));
                seq += 1;
            }
        }
    }
    labels
}

/// Masked plane `plane ∘ mask` (zero outside the mask).
pub fn masked_plane(plane: &PlaneImage, mask: &RegionMask) -> Result<Grid> {
    if plane.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: plane.dims(),
            actual: mask.dims(),
        });
    }
    let data = plane
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| if m { v } else { 0.0 })
        .collect();
    Grid::new(plane.width(), plane.height(), data)
}

/// Watershed of the masked plane: disk-SE morphological gradient, regional-minimum markers,
/// priority flooding. Every masked pixel gets exactly one label; unmasked pixels are 0.
pub fn watershed_segment(plane: &PlaneImage, mask: &RegionMask, se: StructuringElement) -> Result<RegionLabeling> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let relief = morphological_gradient(&masked_plane(plane, mask)?, se);
    let markers = regional_minima(&relief, mask);
    let labels = flood_from_markers(&relief, mask, &markers);
    Ok(RegionLabeling::from_raw(plane.width(), plane.height(), labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(r: usize) -> StructuringElement {
        StructuringElement::disk(r).unwrap()
    }

    #[test]
    fn constant_plane_is_one_region() {
        let p = PlaneImage::from_fn(20, 15, |_, _| 0.4).unwrap();
        let mask = RegionMask::from_fn(20, 15, |x, y| (3..17).contains(&x) && (2..13).contains(&y));
        let l = watershed_segment(&p, &RegionMask::full(20, 15), disk(5)).unwrap();
        assert_eq!(l.region_count(), 1);
        let l = watershed_segment(&p, &mask, disk(5)).unwrap();
        assert_eq!(l.region_count(), 1);
        assert_eq!(l.region_areas(), vec![mask.pixel_count()]);
    }

    #[test]
    fn two_pits_give_two_regions() {
        let (c1, c2) = ((14.0, 15.0), (30.0, 15.0));
        let dist = |x: usize, y: usize, c: (f64, f64)| ((x as f64 - c.0).powi(2) + (y as f64 - c.1).powi(2)).sqrt();
        let near = |x, y| dist(x, y, c1).min(dist(x, y, c2));
        // Flat-bottomed pits inside a mask hugging both of them.
        let p = PlaneImage::from_fn(50, 30, |x, y| if near(x, y) <= 7.0 { 0.2 } else { 0.8 }).unwrap();
        let mask = RegionMask::from_fn(50, 30, |x, y| near(x, y) <= 9.0);
        let l = watershed_segment(&p, &mask, disk(2)).unwrap();
        assert_eq!(l.region_count(), 2);
        assert_ne!(l.get(14, 15), l.get(30, 15));
        assert!(l.get(14, 15) > 0 && l.get(30, 15) > 0);
        assert_eq!(l.region_areas().iter().sum::<usize>(), mask.pixel_count());
    }

    #[test]
    fn empty_mask_is_rejected() {
        let p = PlaneImage::from_fn(5, 5, |_, _| 0.4).unwrap();
        assert!(matches!(
            watershed_segment(&p, &RegionMask::empty(5, 5), disk(1)),
            Err(Error::EmptyMask)
        ));
    }
}
