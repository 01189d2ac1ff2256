//! Per-image processing: load, resize, foreground, ROIs, M1/M2 features; batch extraction
//! over a manifest.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edges::FrangiParams;
use crate::error::{Error, Result};
use crate::features::{
    extract_m1_features, extrapolate_m2_planes, m2_feature_vector, m2_plane_features, FeatureSchema, FeatureTable,
    FeatureVector,
};
use crate::manifest::DatasetManifest;
use crate::mask::RegionMask;
use crate::raster::{load_raster, resize_bilinear, RasterImage, WORKING_SIZE};
use crate::segmentation::{detect_foreground_mask, segment_site, SegmentationParams, SiteRois};
use crate::site::Site;

/// Which feature model to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureModel {
    /// ROI statistics (54 features).
    M1,
    /// Whole-foreground statistics of the 36 extrapolated planes (108 features).
    M2,
}

impl FeatureModel {
    pub fn name(self) -> &'static str {
        match self {
            FeatureModel::M1 => "m1",
            FeatureModel::M2 => "m2",
        }
    }

    pub fn schema(self, site: Site) -> FeatureSchema {
        match self {
            FeatureModel::M1 => FeatureSchema::m1(site),
            FeatureModel::M2 => FeatureSchema::m2(),
        }
    }
}

impl fmt::Display for FeatureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(FeatureModel::M1),
            "m2" => Ok(FeatureModel::M2),
            other => Err(Error::InvalidConfig(format!("unknown feature model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub segmentation: SegmentationParams,
    pub frangi: FrangiParams,
}

/// Loads an image and brings it to the 125×125 working size.
pub fn prepare_image(path: &Path) -> Result<RasterImage> {
    let img = load_raster(path)?;
    if img.dims() == (WORKING_SIZE, WORKING_SIZE) {
        Ok(img)
    } else {
        resize_bilinear(&img, (WORKING_SIZE, WORKING_SIZE))
    }
}

/// Loads a mask and resamples it to the working size.
pub fn prepare_mask(path: &Path) -> Result<RegionMask> {
    let m = RegionMask::load_png(path)?;
    if m.dims() == (WORKING_SIZE, WORKING_SIZE) {
        Ok(m)
    } else {
        m.resize_nearest(WORKING_SIZE, WORKING_SIZE)
    }
}

/// Foreground mask `g`, or the supplied override when it matches the image.
pub fn foreground(img: &RasterImage, site: Site, mask: Option<&RegionMask>, config: &PipelineConfig) -> Result<RegionMask> {
    match mask {
        Some(m) if m.dims() != img.dims() => Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: m.dims(),
        }),
        Some(m) if m.is_empty() => Err(Error::EmptyMask),
        Some(m) => Ok(m.clone()),
        None => detect_foreground_mask(img, site, &config.segmentation),
    }
}

/// `g` and the site's ROIs, with errors tagged by stage.
pub fn segment_image(
    img: &RasterImage,
    site: Site,
    mask: Option<&RegionMask>,
    config: &PipelineConfig,
    image_id: &str,
) -> Result<(RegionMask, SiteRois)> {
    let g = foreground(img, site, mask, config).map_err(|e| e.at_stage(image_id, "foreground"))?;
    let rois = segment_site(img, site, &g, &config.segmentation).map_err(|e| e.at_stage(image_id, "segmentation"))?;
    Ok((g, rois))
}

pub fn m1_vector(
    img: &RasterImage,
    site: Site,
    mask: Option<&RegionMask>,
    config: &PipelineConfig,
    image_id: &str,
) -> Result<FeatureVector> {
    let (_, rois) = segment_image(img, site, mask, config, image_id)?;
    extract_m1_features(img, &rois, &config.frangi, image_id).map_err(|e| e.at_stage(image_id, "m1 features"))
}

pub fn m2_vector(
    img: &RasterImage,
    site: Site,
    mask: Option<&RegionMask>,
    config: &PipelineConfig,
    image_id: &str,
) -> Result<FeatureVector> {
    let g = foreground(img, site, mask, config).map_err(|e| e.at_stage(image_id, "foreground"))?;
    let planes = extrapolate_m2_planes(img, &config.frangi).map_err(|e| e.at_stage(image_id, "m2 planes"))?;
    let per_plane = m2_plane_features(&planes, &g).map_err(|e| e.at_stage(image_id, "m2 features"))?;
    Ok(m2_feature_vector(&per_plane, site, image_id))
}

pub fn image_vector(
    img: &RasterImage,
    site: Site,
    mask: Option<&RegionMask>,
    model: FeatureModel,
    config: &PipelineConfig,
    image_id: &str,
) -> Result<FeatureVector> {
    match model {
        FeatureModel::M1 => m1_vector(img, site, mask, config, image_id),
        FeatureModel::M2 => m2_vector(img, site, mask, config, image_id),
    }
}

/// An image left out of a feature table, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub image_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchFeatures {
    pub table: FeatureTable,
    pub excluded: Vec<Exclusion>,
}

/// True for failures that only rule an image out of model M1.
fn m1_only_failure(e: &Error) -> bool {
    match e {
        Error::Stage { stage, source, .. } => {
            matches!(*stage, "segmentation" | "m1 features")
                && matches!(**source, Error::IrisNotFound | Error::EmptyRegion(_) | Error::EmptyMask)
        }
        _ => false,
    }
}

/// Features for every manifest row, in manifest order. Images whose ROIs cannot be found are
/// logged and excluded from M1; any other failure aborts with the image and stage named.
pub fn extract_manifest_features(
    manifest: &DatasetManifest,
    model: FeatureModel,
    config: &PipelineConfig,
) -> Result<BatchFeatures> {
    let results: Vec<Result<std::result::Result<FeatureVector, Exclusion>>> = manifest
        .rows
        .par_iter()
        .map(|row| {
            let id = row.image_id();
            let img = prepare_image(&row.image_path).map_err(|e| e.at_stage(&id, "load"))?;
            let mask = match &row.mask_path {
                Some(p) => Some(prepare_mask(p).map_err(|e| e.at_stage(&id, "mask load"))?),
                None => None,
            };
            match image_vector(&img, manifest.site, mask.as_ref(), model, config, &id) {
                Ok(mut v) => {
                    v.grade = Some(row.grade);
                    Ok(Ok(v))
                }
                Err(e) if model == FeatureModel::M1 && m1_only_failure(&e) => Ok(Err(Exclusion {
                    image_id: id,
                    reason: e.to_string(),
                })),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for r in results {
        match r? {
            Ok(v) => rows.push(v),
            Err(x) => {
                warn!("excluded from {model}: {}", x.reason);
                excluded.push(x);
            }
        }
    }
    Ok(BatchFeatures {
        table: FeatureTable::new(model.schema(manifest.site), rows)?,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::Grade;
    use crate::synth::{generate_synthetic, SyntheticSpec};

    #[test]
    fn synthetic_vectors_have_schema_width() {
        let config = PipelineConfig::default();
        for site in [Site::Eye, Site::Tongue] {
            let (img, _) = generate_synthetic(&SyntheticSpec::sample(site, Grade::PALLOR, 3, 1.0).unwrap()).unwrap();
            for model in [FeatureModel::M1, FeatureModel::M2] {
                let v = image_vector(&img, site, None, model, &config, "x").unwrap();
                assert_eq!(v.values.len(), model.schema(site).len());
                assert!(v.values.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn iris_failure_is_m1_only() {
        // A uniformly bright image has no dark iris candidate, but a foreground override still
        // yields M2 features.
        let img = RasterImage::from_fn(125, 125, |x, _| if x < 60 { [0.9, 0.8, 0.8] } else { [0.2, 0.1, 0.1] }).unwrap();
        let mask = RegionMask::from_fn(125, 125, |x, _| x < 60);
        let config = PipelineConfig::default();
        let err = m1_vector(&img, Site::Eye, Some(&mask), &config, "bright").unwrap_err();
        assert!(m1_only_failure(&err), "{err}");
        assert!(err.to_string().contains("bright"));
        assert!(m2_vector(&img, Site::Eye, Some(&mask), &config, "bright").is_ok());
    }

    #[test]
    fn model_names_parse() {
        assert_eq!("M2".parse::<FeatureModel>().unwrap(), FeatureModel::M2);
        assert!("m3".parse::<FeatureModel>().is_err());
    }
}
