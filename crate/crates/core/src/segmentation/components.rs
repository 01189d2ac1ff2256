//! 8-connected component labeling and ellipse-equivalent shape statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::RegionMask;
use crate::raster::PlaneImage;

pub(crate) const NEIGHBORS_8: [(isize, isize); 8] =
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Integer label grid; 0 is background, regions are numbered `1..=region_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    region_count: usize,
}

impl RegionLabeling {
    pub(crate) fn from_raw(width: usize, height: usize, labels: Vec<u32>) -> Self {
        let region_count = labels.iter().copied().max().unwrap_or(0) as usize;
        debug_assert!({
            let mut seen = vec![false; region_count + 1];
            labels.iter().for_each(|&l| seen[l as usize] = true);
            seen[1..].iter().all(|&s| s)
        });
        Self {
            width,
            height,
            labels,
            region_count,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn region(&self, label: u32) -> RegionMask {
        RegionMask::from_bits(self.width, self.height, self.labels.iter().map(|&l| l == label).collect())
            .expect("labeling dimensions are valid")
    }

    pub fn regions(&self) -> Vec<RegionMask> {
        (1..=self.region_count as u32).map(|l| self.region(l)).collect()
    }

    pub fn region_areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.region_count + 1];
        self.labels.iter().for_each(|&l| areas[l as usize] += 1);
        areas.remove(0);
        areas
    }

    /// Pixel sets of every region, sorted; equal across labelings that differ only by a permutation.
    pub fn canonical_partition(&self) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); self.region_count];
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                sets[l as usize - 1].push(i);
            }
        }
        sets.sort();
        sets
    }
}

/// 8-connected components of the mask, labeled in raster order of first appearance.
pub fn connected_components(mask: &RegionMask) -> RegionLabeling {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.contains_index(start) || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in NEIGHBORS_8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.contains_index(j) && labels[j] == 0 {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    RegionLabeling::from_raw(w, h, labels)
}

/// Largest 8-connected component (first in raster order on ties), or `None` for an empty mask.
pub fn largest_component(mask: &RegionMask) -> Option<RegionMask> {
    let labeling = connected_components(mask);
    let areas = labeling.region_areas();
    let (best, _) = areas
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, usize)>, (i, &a)| match acc {
            Some((_, best_a)) if best_a >= a => acc,
            _ => Some((i, a)),
        })?;
    Some(labeling.region(best as u32 + 1))
}

/// 8-connected components of `{p < threshold}` with area strictly greater than `min_area`.
pub fn threshold_dark_regions(plane: &PlaneImage, threshold: f64, min_area: usize) -> Vec<RegionMask> {
    dark_regions_within(plane, threshold, min_area, None)
}

pub(crate) fn dark_regions_within(
    plane: &PlaneImage,
    threshold: f64,
    min_area: usize,
    within: Option<&RegionMask>,
) -> Vec<RegionMask> {
    let (w, h) = plane.dims();
    let dark = RegionMask::from_bits(
        w,
        h,
        plane
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v < threshold && within.is_none_or(|m| m.contains_index(i)))
            .collect(),
    )
    .expect("plane dimensions are valid");
    let labeling = connected_components(&dark);
    labeling
        .region_areas()
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > min_area)
        .map(|(i, _)| labeling.region(i as u32 + 1))
        .collect()
}

/// Ellipse-equivalent region geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    /// Full major axis length in pixels.
    pub major_axis: f64,
    /// Full minor axis length in pixels, floored at one pixel.
    pub minor_axis: f64,
    pub area: usize,
    pub centroid: (f64, f64),
}

impl ShapeStats {
    pub fn elongation(&self) -> f64 {
        self.major_axis / self.minor_axis
    }
}

/// Axes of the ellipse with the region's second central moments (`4·sqrt(eigenvalue)`).
pub fn shape_stats(region: &RegionMask) -> Result<ShapeStats> {
    let w = region.width();
    let pts: Vec<(f64, f64)> = region.indices().map(|i| ((i % w) as f64, (i / w) as f64)).collect();
    if pts.is_empty() {
        return Err(Error::EmptyRegion("shape statistics of an empty region".into()));
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - cx) * (x - cx);
        syy += (y - cy) * (y - cy);
        sxy += (x - cx) * (y - cy);
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let half_trace = 0.5 * (sxx + syy);
    let disc = (0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy).sqrt();
    let major = (4.0 * (half_trace + disc).max(0.0).sqrt()).max(1.0);
    let minor = (4.0 * (half_trace - disc).max(0.0).sqrt()).max(1.0);
    Ok(ShapeStats {
        major_axis: major,
        minor_axis: minor,
        area: pts.len(),
        centroid: (cx, cy),
    })
}
