//! Region-of-interest extraction for eye (iris, sclera, conjunctiva) and tongue (inner, outer).

mod components;
mod morphology;
mod watershed;

pub use components::{
    connected_components, largest_component, shape_stats, threshold_dark_regions, RegionLabeling, ShapeStats,
};
pub use morphology::{
    close, dilate, dilate_square, erode, fill_holes, inner_boundary, morphological_gradient, otsu_threshold,
    StructuringElement,
};
pub use watershed::{flood_from_markers, masked_plane, regional_minima, watershed_segment};

use serde::{Deserialize, Serialize};

use crate::edges::sobel_gradient_grid;
use crate::error::{Error, Result};
use crate::mask::{EdgeMap, RegionMask};
use crate::raster::{hsv, to_plane, PlaneId, RasterImage};
use crate::site::Site;

/// Tunable constants of the segmentation stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    /// Red-plane level below which pixels are iris candidates.
    pub iris_threshold: f64,
    /// Candidate regions must be strictly larger than this many pixels.
    pub iris_min_area: usize,
    pub watershed_radius: usize,
    pub closing_radius: usize,
    /// Width of the band around the foreground boundary searched for tongue edges.
    pub tongue_band: usize,
    pub edge_fraction: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            iris_threshold: 0.1,
            iris_min_area: 100,
            watershed_radius: 5,
            closing_radius: 3,
            tongue_band: 5,
            edge_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EyeRois {
    pub iris: RegionMask,
    pub sclera: RegionMask,
    pub conjunctiva: RegionMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TongueRois {
    pub inner: RegionMask,
    pub outer: RegionMask,
}

/// Segmented regions of either site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteRois {
    Eye(EyeRois),
    Tongue(TongueRois),
}

impl SiteRois {
    pub fn site(&self) -> Site {
        match self {
            SiteRois::Eye(_) => Site::Eye,
            SiteRois::Tongue(_) => Site::Tongue,
        }
    }

    /// The two feature-bearing regions in schema order (sclera, conjunctiva) or (inner, outer).
    pub fn feature_regions(&self) -> [(&'static str, &RegionMask); 2] {
        match self {
            SiteRois::Eye(r) => [("sclera", &r.sclera), ("conjunctiva", &r.conjunctiva)],
            SiteRois::Tongue(r) => [("inner", &r.inner), ("outer", &r.outer)],
        }
    }

    /// Every named mask, for dumping.
    pub fn named_masks(&self) -> Vec<(&'static str, &RegionMask)> {
        match self {
            SiteRois::Eye(r) => vec![("iris", &r.iris), ("sclera", &r.sclera), ("conjunctiva", &r.conjunctiva)],
            SiteRois::Tongue(r) => vec![("inner", &r.inner), ("outer", &r.outer)],
        }
    }
}

/// Foreground mask `g`: Otsu on the value plane (eye) or saturation×value (tongue), largest
/// component, closing, hole filling.
pub fn detect_foreground_mask(img: &RasterImage, site: Site, params: &SegmentationParams) -> Result<RegionMask> {
    let (w, h) = img.dims();
    let score: Vec<f64> = img
        .data()
        .chunks_exact(3)
        .map(|p| {
            let [_, s, v] = hsv([p[0], p[1], p[2]]);
            match site {
                Site::Eye => v,
                Site::Tongue => s * v,
            }
        })
        .collect();
    let threshold = otsu_threshold(&score).ok_or(Error::EmptyMask)?;
    let raw = RegionMask::from_bits(w, h, score.iter().map(|&v| v > threshold).collect())?;
    let largest = largest_component(&raw).ok_or(Error::EmptyMask)?;
    let closed = close(&largest, StructuringElement::disk(params.closing_radius)?);
    let g = fill_holes(&closed);
    if g.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(g)
}

/// Dark region with the largest major/minor axis ratio among red-plane candidates inside `g`.
fn select_iris(img: &RasterImage, g: &RegionMask, params: &SegmentationParams) -> Result<RegionMask> {
    let red = to_plane(img, PlaneId::Red);
    let candidates = components::dark_regions_within(&red, params.iris_threshold, params.iris_min_area, Some(g));
    let mut best: Option<(f64, RegionMask)> = None;
    for region in candidates {
        let ratio = shape_stats(&region)?.elongation();
        if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
            best = Some((ratio, region));
        }
    }
    best.map(|(_, r)| r).ok_or(Error::IrisNotFound)
}

fn check_mask(img: &RasterImage, g: &RegionMask) -> Result<()> {
    if img.dims() != g.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: g.dims(),
        });
    }
    if g.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Union of the labeled regions (restricted to `allowed`) that touch `probe`.
fn regions_touching(labels: &RegionLabeling, allowed: &RegionMask, probe: &RegionMask) -> RegionMask {
    let mut hit = vec![false; labels.region_count() + 1];
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 && allowed.contains_index(i) && probe.contains_index(i) {
            hit[l as usize] = true;
        }
    }
    RegionMask::from_bits(
        labels.width(),
        labels.height(),
        labels
            .labels()
            .iter()
            .enumerate()
            .map(|(i, &l)| l != 0 && hit[l as usize] && allowed.contains_index(i))
            .collect(),
    )
    .expect("labeling dimensions are valid")
}

/// Iris by elongation of dark regions, sclera as the watershed regions meeting the iris
/// edge, conjunctiva as the remainder of `g`.
pub fn segment_eye(img: &RasterImage, g: &RegionMask, params: &SegmentationParams) -> Result<EyeRois> {
    check_mask(img, g)?;
    let iris = select_iris(img, g, params)?;
    let green = to_plane(img, PlaneId::Green);
    let basins = watershed_segment(&green, g, StructuringElement::disk(params.watershed_radius)?)?;
    let iris_edge = dilate_square(&inner_boundary(&iris));
    let outside_iris = g.difference(&iris)?;
    let sclera = regions_touching(&basins, &outside_iris, &iris_edge);
    let conjunctiva = g.difference(&iris)?.difference(&sclera)?;
    Ok(EyeRois {
        iris,
        sclera,
        conjunctiva,
    })
}

/// Sobel edge pixels of the masked green plane within `band` pixels of the boundary of `g`.
pub fn tongue_edge_map(img: &RasterImage, g: &RegionMask, params: &SegmentationParams) -> Result<EdgeMap> {
    check_mask(img, g)?;
    let green = to_plane(img, PlaneId::Green);
    let masked = masked_plane(&green, g)?;
    let field = sobel_gradient_grid(&masked)?;
    let band = dilate(&inner_boundary(g), StructuringElement::disk(params.tongue_band)?);
    let max = band
        .indices()
        .map(|i| field.magnitude.data[i])
        .fold(0.0, f64::max);
    let (w, h) = g.dims();
    if max <= 0.0 {
        return Ok(RegionMask::empty(w, h));
    }
    let cut = params.edge_fraction * max;
    RegionMask::from_bits(
        w,
        h,
        (0..w * h)
            .map(|i| band.contains_index(i) && field.magnitude.data[i] >= cut)
            .collect(),
    )
}

/// Watershed regions meeting the outer tongue edge form the outer ROI; the rest of `g` is inner.
pub fn segment_tongue(img: &RasterImage, g: &RegionMask, params: &SegmentationParams) -> Result<TongueRois> {
    check_mask(img, g)?;
    let green = to_plane(img, PlaneId::Green);
    let basins = watershed_segment(&green, g, StructuringElement::disk(params.watershed_radius)?)?;
    let edges = tongue_edge_map(img, g, params)?;
    let outer = regions_touching(&basins, g, &edges);
    let inner = g.difference(&outer)?;
    Ok(TongueRois { inner, outer })
}

pub fn segment_site(img: &RasterImage, site: Site, g: &RegionMask, params: &SegmentationParams) -> Result<SiteRois> {
    Ok(match site {
        Site::Eye => SiteRois::Eye(segment_eye(img, g, params)?),
        Site::Tongue => SiteRois::Tongue(segment_tongue(img, g, params)?),
    })
}
