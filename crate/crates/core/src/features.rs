//! Region intensity statistics (model M1) and the 36 color/edge planes (model M2).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::edges::{frangi_vesselness, sobel_gradient, superimpose_edges, FrangiParams};
use crate::error::{Error, Result};
use crate::mask::RegionMask;
use crate::raster::{to_plane, Grid, PlaneId, PlaneImage, RasterImage};
use crate::segmentation::SiteRois;
use crate::site::{Grade, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Max,
    Mean,
    Variance,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Max, Statistic::Mean, Statistic::Variance];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Max => "max",
            Statistic::Mean => "mean",
            Statistic::Variance => "variance",
        }
    }
}

/// Max, mean and population variance over a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

impl RegionStats {
    pub fn as_array(&self) -> [f64; 3] {
        [self.max, self.mean, self.variance]
    }
}

pub fn region_stats(plane: &PlaneImage, region: &RegionMask) -> Result<RegionStats> {
    grid_region_stats(plane.as_grid(), region)
}

pub fn grid_region_stats(grid: &Grid, region: &RegionMask) -> Result<RegionStats> {
    if grid.dims() != region.dims() {
        return Err(Error::DimensionMismatch {
            expected: grid.dims(),
            actual: region.dims(),
        });
    }
    let (mut n, mut sum, mut max, mut min) = (0usize, 0.0, f64::NEG_INFINITY, f64::INFINITY);
    for i in region.indices() {
        let v = grid.data[i];
        n += 1;
        sum += v;
        max = max.max(v);
        min = min.min(v);
    }
    if n == 0 {
        return Err(Error::EmptyRegion("statistics over an empty region".into()));
    }
    if min == max {
        return Ok(RegionStats {
            max,
            mean: max,
            variance: 0.0,
        });
    }
    let mean = (sum / n as f64).clamp(min, max);
    let variance = region.indices().map(|i| (grid.data[i] - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(RegionStats { max, mean, variance })
}

/// The nine planes summarized per region by model M1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M1Plane {
    Color(PlaneId),
    GradientMagnitudeGreen,
    GradientDirectionGreen,
    FrangiGreen,
}

impl M1Plane {
    pub const ALL: [M1Plane; 9] = [
        M1Plane::Color(PlaneId::Red),
        M1Plane::Color(PlaneId::Green),
        M1Plane::Color(PlaneId::Blue),
        M1Plane::Color(PlaneId::Hue),
        M1Plane::Color(PlaneId::Saturation),
        M1Plane::Color(PlaneId::Intensity),
        M1Plane::GradientMagnitudeGreen,
        M1Plane::GradientDirectionGreen,
        M1Plane::FrangiGreen,
    ];

    pub fn name(self) -> String {
        match self {
            M1Plane::Color(p) => p.name().to_string(),
            M1Plane::GradientMagnitudeGreen => "gradient_magnitude_green".into(),
            M1Plane::GradientDirectionGreen => "gradient_direction_green".into(),
            M1Plane::FrangiGreen => "frangi_green".into(),
        }
    }
}

/// Edge enhancement applied to a color plane in model M2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Enhancement {
    None,
    Gradient,
    Frangi,
}

impl Enhancement {
    pub const ALL: [Enhancement; 3] = [Enhancement::None, Enhancement::Gradient, Enhancement::Frangi];

    pub fn name(self) -> &'static str {
        match self {
            Enhancement::None => "none",
            Enhancement::Gradient => "gradient",
            Enhancement::Frangi => "frangi",
        }
    }
}

/// Identity of one of the 36 extrapolated planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlaneKey {
    pub plane: PlaneId,
    pub enhancement: Enhancement,
}

impl PlaneKey {
    /// All 36 keys: raw planes first, then gradient-enhanced, then Frangi-enhanced.
    pub fn all() -> Vec<PlaneKey> {
        Enhancement::ALL
            .into_iter()
            .flat_map(|enhancement| PlaneId::ALL.into_iter().map(move |plane| PlaneKey { plane, enhancement }))
            .collect()
    }
}

impl fmt::Display for PlaneKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.plane.name(), self.enhancement.name())
    }
}

/// One feature column: `region.plane.stat`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub region: String,
    pub plane: String,
    pub statistic: Statistic,
}

impl FeatureEntry {
    pub fn name(&self) -> String {
        format!("{}.{}.{}", self.region, self.plane, self.statistic.name())
    }
}

impl FromStr for FeatureEntry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        let [region, plane, stat] = parts.as_slice() else {
            return Err(Error::SchemaMismatch(format!("column {s:?} is not region.plane.stat")));
        };
        let statistic = Statistic::ALL
            .into_iter()
            .find(|st| st.name() == *stat)
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown statistic in {s:?}")))?;
        Ok(FeatureEntry {
            region: region.to_string(),
            plane: plane.to_string(),
            statistic,
        })
    }
}

/// Ordered feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub entries: Vec<FeatureEntry>,
}

impl FeatureSchema {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self> {
        let mut names: Vec<String> = entries.iter().map(FeatureEntry::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::SchemaMismatch("duplicate schema entries".into()));
        }
        Ok(Self { entries })
    }

    /// 54 entries: two ROIs × nine planes × three statistics.
    pub fn m1(site: Site) -> Self {
        let entries = site
            .roi_names()
            .into_iter()
            .flat_map(|region| {
                M1Plane::ALL.into_iter().flat_map(move |plane| {
                    Statistic::ALL.into_iter().map(move |statistic| FeatureEntry {
                        region: region.to_string(),
                        plane: plane.name(),
                        statistic,
                    })
                })
            })
            .collect();
        Self { entries }
    }

    /// 108 entries: the three statistics over `g` for each of the 36 planes.
    pub fn m2() -> Self {
        let entries = PlaneKey::all()
            .into_iter()
            .flat_map(|key| {
                Statistic::ALL.into_iter().map(move |statistic| FeatureEntry {
                    region: "g".into(),
                    plane: key.to_string(),
                    statistic,
                })
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(FeatureEntry::name).collect()
    }

    /// Hex SHA-256 of the newline-joined column names.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.names().join("\n").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> FeatureSchema {
        FeatureSchema {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }
}

/// Feature values for one image, aligned with a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub image_id: String,
    pub site: Site,
    pub grade: Option<Grade>,
    pub values: Vec<f64>,
}

/// M1 features: for each ROI, max/mean/variance of the nine M1 planes (54 values).
pub fn extract_m1_features(
    img: &RasterImage,
    rois: &SiteRois,
    frangi: &FrangiParams,
    image_id: &str,
) -> Result<FeatureVector> {
    let regions = rois.feature_regions();
    for (name, mask) in regions {
        if mask.is_empty() {
            return Err(Error::EmptyRegion(format!("{name} ROI is empty")));
        }
    }
    let green = to_plane(img, PlaneId::Green);
    let gradient = sobel_gradient(&green)?;
    let vesselness = frangi_vesselness(&green, frangi)?;
    let mut grids: Vec<Grid> = Vec::with_capacity(9);
    for plane in M1Plane::ALL {
        grids.push(match plane {
            M1Plane::Color(id) => to_plane(img, id).into_grid(),
            M1Plane::GradientMagnitudeGreen => gradient.magnitude.clone(),
            M1Plane::GradientDirectionGreen => gradient.direction.clone(),
            M1Plane::FrangiGreen => vesselness.response.clone(),
        });
    }
    let mut values = Vec::with_capacity(54);
    for (_, mask) in regions {
        for grid in &grids {
            values.extend(grid_region_stats(grid, mask)?.as_array());
        }
    }
    Ok(FeatureVector {
        image_id: image_id.to_string(),
        site: rois.site(),
        grade: None,
        values,
    })
}

/// The 36 planes of model M2 in [`PlaneKey::all`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatedPlaneSet {
    pub planes: Vec<(PlaneKey, PlaneImage)>,
}

impl ExtrapolatedPlaneSet {
    pub fn get(&self, key: PlaneKey) -> Option<&PlaneImage> {
        self.planes.iter().find(|(k, _)| *k == key).map(|(_, p)| p)
    }
}

/// Raw color planes plus each plane with its own Sobel magnitude and its own Frangi
/// response superimposed.
pub fn extrapolate_m2_planes(img: &RasterImage, frangi: &FrangiParams) -> Result<ExtrapolatedPlaneSet> {
    let raw: Vec<PlaneImage> = PlaneId::ALL.iter().map(|&p| to_plane(img, p)).collect();
    let mut planes = Vec::with_capacity(36);
    for enhancement in Enhancement::ALL {
        for (id, plane) in PlaneId::ALL.into_iter().zip(&raw) {
            let out = match enhancement {
                Enhancement::None => plane.clone(),
                Enhancement::Gradient => superimpose_edges(plane, &sobel_gradient(plane)?.magnitude)?,
                Enhancement::Frangi => superimpose_edges(plane, &frangi_vesselness(plane, frangi)?.response)?,
            };
            planes.push((PlaneKey { plane: id, enhancement }, out));
        }
    }
    Ok(ExtrapolatedPlaneSet { planes })
}

/// Per-plane (max, mean, variance) over the foreground mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFeatures {
    pub key: PlaneKey,
    pub values: [f64; 3],
}

pub fn m2_plane_features(set: &ExtrapolatedPlaneSet, g: &RegionMask) -> Result<Vec<PlaneFeatures>> {
    if g.is_empty() {
        return Err(Error::EmptyMask);
    }
    set.planes
        .iter()
        .map(|(key, plane)| {
            Ok(PlaneFeatures {
                key: *key,
                values: region_stats(plane, g)?.as_array(),
            })
        })
        .collect()
}

/// Concatenates the 36 per-plane triples into one vector aligned with [`FeatureSchema::m2`].
pub fn m2_feature_vector(per_plane: &[PlaneFeatures], site: Site, image_id: &str) -> FeatureVector {
    FeatureVector {
        image_id: image_id.to_string(),
        site,
        grade: None,
        values: per_plane.iter().flat_map(|p| p.values).collect(),
    }
}

/// Feature vectors sharing one schema, with CSV import/export.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureVector>,
}

const TRAILING_COLUMNS: [&str; 3] = ["image_id", "site", "grade"];

impl FeatureTable {
    pub fn new(schema: FeatureSchema, rows: Vec<FeatureVector>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.values.len() != schema.len()) {
            return Err(Error::SchemaMismatch(format!(
                "{} has {} values, schema has {}",
                bad.image_id,
                bad.values.len(),
                schema.len()
            )));
        }
        Ok(Self { schema, rows })
    }

    /// Header is the schema names followed by `image_id,site,grade`; one row per image.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.schema.names();
        header.extend(TRAILING_COLUMNS.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record: Vec<String> = row.values.iter().map(|v| format!("{v:?}")).collect();
            record.push(row.image_id.clone());
            record.push(row.site.to_string());
            record.push(row.grade.map(|g| g.to_string()).unwrap_or_default());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let n = header.len();
        if n < 3 || header[n - 3..] != TRAILING_COLUMNS {
            return Err(Error::SchemaMismatch("feature CSV must end with image_id,site,grade".into()));
        }
        let entries = header[..n - 3]
            .iter()
            .map(|h| h.parse())
            .collect::<Result<Vec<FeatureEntry>>>()?;
        let schema = FeatureSchema::new(entries)?;
        let mut rows = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let bad = |reason: String| Error::MalformedRow { line: line + 2, reason };
            let values = (0..n - 3)
                .map(|i| record[i].parse::<f64>().map_err(|e| bad(e.to_string())))
                .collect::<Result<Vec<f64>>>()?;
            let grade = match record[n - 1].trim() {
                "" => None,
                g => Some(g.parse().map_err(|e: Error| bad(e.to_string()))?),
            };
            rows.push(FeatureVector {
                image_id: record[n - 3].to_string(),
                site: record[n - 2].parse().map_err(|e: Error| bad(e.to_string()))?,
                grade,
                values,
            });
        }
        Self::new(schema, rows)
    }
}
