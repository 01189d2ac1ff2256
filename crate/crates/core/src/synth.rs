//! Deterministic synthetic eye and tongue images with ground-truth ROI masks.
//!
//! Stands in for an annotated corpus: geometry and colors are drawn from a seeded RNG and the
//! class signal lives in conjunctiva redness (eye) or inner-tongue redness (tongue), with a
//! distractor lesion for grade 2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::RegionMask;
use crate::raster::{RasterImage, WORKING_SIZE};
use crate::site::{Grade, Site};

const SKIN: [f64; 3] = [0.55, 0.38, 0.30];
const IRIS: [f64; 3] = [0.06, 0.05, 0.05];
const PALLID_TISSUE: [f64; 3] = [0.92, 0.78, 0.76];
const RED_TISSUE: [f64; 3] = [0.78, 0.26, 0.32];
const LESION: [f64; 3] = [0.86, 0.80, 0.25];
const MOUTH: [f64; 3] = [0.15, 0.12, 0.12];

/// Redness of the graded tissue for each grade at full contrast.
const GRADE_REDNESS: [f64; 3] = [0.92, 0.22, 0.70];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.level(x, y) <= 1.0
    }

    /// Normalized squared radius: 1 on the boundary.
    pub fn level(&self, x: f64, y: f64) -> f64 {
        let dx = (x - self.center.0) / self.axes.0;
        let dy = (y - self.center.1) / self.axes.1;
        dx * dx + dy * dy
    }

    fn shrink(&self, by: f64) -> Ellipse {
        Ellipse {
            center: self.center,
            axes: (self.axes.0 - by, self.axes.1 - by),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeGeometry {
    pub eye: Ellipse,
    pub iris: Ellipse,
    /// Outer ellipse of the lower-lid crescent; the conjunctiva is its part below the eye.
    pub lid: Ellipse,
    pub sclera_brightness: f64,
    pub conjunctiva_redness: f64,
    /// Distractor blob (center, radius) inside the conjunctiva.
    pub lesion: Option<((f64, f64), f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TongueGeometry {
    pub tongue: Ellipse,
    pub rim_width: f64,
    pub inner_redness: f64,
    pub rim_texture: f64,
    pub lesion: Option<((f64, f64), f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    Eye(EyeGeometry),
    Tongue(TongueGeometry),
}

/// Full description of one synthetic image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub site: Site,
    pub grade: Grade,
    pub seed: u64,
    pub geometry: Geometry,
}

/// Ground-truth masks; `rois` uses the same names as segmentation output.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub foreground: RegionMask,
    pub rois: Vec<(&'static str, RegionMask)>,
}

impl GroundTruth {
    pub fn roi(&self, name: &str) -> Option<&RegionMask> {
        self.rois.iter().find(|(n, _)| *n == name).map(|(_, m)| m)
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn tissue(redness: f64) -> [f64; 3] {
    lerp3(PALLID_TISSUE, RED_TISSUE, redness)
}

impl SyntheticSpec {
    /// Draws jittered geometry and colors for `(site, grade, seed)`.
    ///
    /// `contrast` in `[0, 1]` scales how far the per-grade redness sits from the neutral midpoint
    /// and how saturated the grade-2 lesion is.
    pub fn sample(site: Site, grade: Grade, seed: u64, contrast: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&contrast) {
            return Err(Error::InvalidSpec(format!("contrast {contrast} outside [0,1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000_0000 ^ ((grade.value() as u64) << 40));
        let mid = 0.55;
        let redness = (mid + (GRADE_REDNESS[grade.index()] - mid) * contrast + rng.random_range(-0.05..0.05))
            .clamp(0.0, 1.0);
        let lesion_radius = 4.0 + 1.5 * contrast;
        let geometry = match site {
            Site::Eye => {
                let center = (62.0 + rng.random_range(-4.0..4.0), 52.0 + rng.random_range(-3.0..3.0));
                let eye = Ellipse {
                    center,
                    axes: (rng.random_range(44.0..50.0), rng.random_range(26.0..30.0)),
                };
                let iris = Ellipse {
                    center: (center.0 + rng.random_range(-6.0..6.0), center.1 - 6.0),
                    axes: (rng.random_range(11.0..14.0), rng.random_range(14.0..16.0)),
                };
                let lid = Ellipse {
                    center: (center.0, center.1 + 6.0),
                    axes: (eye.axes.0 * 0.92, eye.axes.1 + 14.0),
                };
                let lesion = (grade == Grade::ABNORMAL).then(|| {
                    let lx = center.0 + rng.random_range(-12.0..12.0);
                    ((lx, center.1 + eye.axes.1 + 9.0), lesion_radius)
                });
                Geometry::Eye(EyeGeometry {
                    eye,
                    iris,
                    lid,
                    sclera_brightness: rng.random_range(0.9..0.97),
                    conjunctiva_redness: redness,
                    lesion,
                })
            }
            Site::Tongue => {
                let center = (62.0 + rng.random_range(-3.0..3.0), 60.0 + rng.random_range(-3.0..3.0));
                let tongue = Ellipse {
                    center,
                    axes: (rng.random_range(40.0..46.0), rng.random_range(44.0..50.0)),
                };
                let lesion = (grade == Grade::ABNORMAL).then(|| {
                    (
                        (center.0 + rng.random_range(-10.0..10.0), center.1 + rng.random_range(-10.0..10.0)),
                        lesion_radius,
                    )
                });
                Geometry::Tongue(TongueGeometry {
                    tongue,
                    rim_width: rng.random_range(13.0..15.0),
                    inner_redness: redness,
                    rim_texture: 0.03,
                    lesion,
                })
            }
        };
        let spec = SyntheticSpec {
            site,
            grade,
            seed,
            geometry,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        let positive = |e: &Ellipse| e.axes.0 > 0.0 && e.axes.1 > 0.0;
        match (&self.geometry, self.site) {
            (Geometry::Eye(g), Site::Eye) => {
                if !(0.0..=1.0).contains(&g.conjunctiva_redness) || !(0.0..=1.0).contains(&g.sclera_brightness) {
                    return bad("eye colors must lie in [0,1]");
                }
                if !positive(&g.eye) || !positive(&g.iris) || !positive(&g.lid) {
                    return bad("ellipse axes must be positive");
                }
                let bottom = (g.iris.center.0, g.iris.center.1 + g.iris.axes.1);
                if !g.eye.contains(g.iris.center.0, g.iris.center.1) || !g.eye.contains(bottom.0, bottom.1) {
                    return bad("iris must lie inside the eye");
                }
            }
            (Geometry::Tongue(g), Site::Tongue) => {
                if !(0.0..=1.0).contains(&g.inner_redness) || !(0.0..=0.2).contains(&g.rim_texture) {
                    return bad("tongue colors out of range");
                }
                if !positive(&g.tongue) || g.rim_width <= 0.0 || g.rim_width >= g.tongue.axes.0.min(g.tongue.axes.1) {
                    return bad("tongue geometry is degenerate");
                }
            }
            _ => return bad("geometry does not match site"),
        }
        Ok(())
    }
}

fn quantize(rgb: [f64; 3]) -> [f64; 3] {
    rgb.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

fn in_disk(x: f64, y: f64, disk: Option<((f64, f64), f64)>) -> bool {
    disk.is_some_and(|((cx, cy), r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
}

/// Renders a 125×125 image (8-bit quantized) and its ground-truth masks.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(RasterImage, GroundTruth)> {
    spec.validate()?;
    let n = WORKING_SIZE;
    match &spec.geometry {
        Geometry::Eye(g) => {
            let sclera_rgb = [g.sclera_brightness, g.sclera_brightness - 0.02, g.sclera_brightness - 0.05];
            let conj_rgb = tissue(g.conjunctiva_redness);
            let mut fg = RegionMask::empty(n, n);
            let mut iris = RegionMask::empty(n, n);
            let mut sclera = RegionMask::empty(n, n);
            let mut conj = RegionMask::empty(n, n);
            let img = RasterImage::from_fn(n, n, |x, y| {
                let (px, py) = (x as f64, y as f64);
                let rgb = if g.eye.contains(px, py) {
                    fg.set(x, y, true);
                    if g.iris.contains(px, py) {
                        iris.set(x, y, true);
                        IRIS
                    } else {
                        sclera.set(x, y, true);
                        sclera_rgb
                    }
                } else if g.lid.contains(px, py) && py > g.eye.center.1 {
                    fg.set(x, y, true);
                    conj.set(x, y, true);
                    if in_disk(px, py, g.lesion) {
                        LESION
                    } else {
                        conj_rgb
                    }
                } else {
                    SKIN
                };
                quantize(rgb)
            })?;
            Ok((
                img,
                GroundTruth {
                    foreground: fg,
                    rois: vec![("iris", iris), ("sclera", sclera), ("conjunctiva", conj)],
                },
            ))
        }
        Geometry::Tongue(g) => {
            let inner_rgb = tissue(g.inner_redness);
            let rim_rgb = [inner_rgb[0] * 0.92, inner_rgb[1] - 0.18, inner_rgb[2] - 0.14];
            let phase = (spec.seed % 628) as f64 / 100.0;
            let core = g.tongue.shrink(g.rim_width);
            let mut fg = RegionMask::empty(n, n);
            let mut inner = RegionMask::empty(n, n);
            let mut outer = RegionMask::empty(n, n);
            let img = RasterImage::from_fn(n, n, |x, y| {
                let (px, py) = (x as f64, y as f64);
                let rgb = if core.contains(px, py) {
                    fg.set(x, y, true);
                    inner.set(x, y, true);
                    if in_disk(px, py, g.lesion) {
                        LESION
                    } else {
                        inner_rgb
                    }
                } else if g.tongue.contains(px, py) {
                    fg.set(x, y, true);
                    outer.set(x, y, true);
                    let theta = (py - g.tongue.center.1).atan2(px - g.tongue.center.0);
                    let t = g.rim_texture * (8.0 * theta + phase).sin();
                    [rim_rgb[0] + t, rim_rgb[1] + t, rim_rgb[2] + t]
                } else {
                    MOUTH
                };
                quantize(rgb)
            })?;
            Ok((
                img,
                GroundTruth {
                    foreground: fg,
                    rois: vec![("inner", inner), ("outer", outer)],
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{to_plane, PlaneId};

    #[test]
    fn deterministic_per_seed() {
        for site in [Site::Eye, Site::Tongue] {
            let a = generate_synthetic(&SyntheticSpec::sample(site, Grade::PALLOR, 9, 1.0).unwrap()).unwrap();
            let b = generate_synthetic(&SyntheticSpec::sample(site, Grade::PALLOR, 9, 1.0).unwrap()).unwrap();
            assert_eq!(a.0, b.0);
            assert_eq!(a.1, b.1);
            let c = generate_synthetic(&SyntheticSpec::sample(site, Grade::PALLOR, 10, 1.0).unwrap()).unwrap();
            assert_ne!(a.0, c.0);
        }
    }

    #[test]
    fn normal_conjunctiva_is_redder_than_pallid() {
        let redness = |grade| {
            let (img, gt) = generate_synthetic(&SyntheticSpec::sample(Site::Eye, grade, 3, 1.0).unwrap()).unwrap();
            let a = to_plane(&img, PlaneId::AColor);
            let conj = gt.roi("conjunctiva").unwrap();
            conj.indices().map(|i| a.data()[i]).sum::<f64>() / conj.pixel_count() as f64
        };
        assert!(redness(Grade::NORMAL) > redness(Grade::PALLOR));
    }

    #[test]
    fn masks_are_disjoint_and_cover_foreground() {
        for site in [Site::Eye, Site::Tongue] {
            for grade in Grade::ALL {
                let (_, gt) = generate_synthetic(&SyntheticSpec::sample(site, grade, 1, 1.0).unwrap()).unwrap();
                let mut union = RegionMask::empty(WORKING_SIZE, WORKING_SIZE);
                for (i, (_, a)) in gt.rois.iter().enumerate() {
                    assert!(!a.is_empty());
                    for (_, b) in &gt.rois[i + 1..] {
                        assert!(!a.intersects(b));
                    }
                    union = union.union(a).unwrap();
                }
                assert_eq!(union, gt.foreground);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SyntheticSpec::sample(Site::Eye, Grade::NORMAL, 0, 1.5).is_err());
        let mut spec = SyntheticSpec::sample(Site::Eye, Grade::NORMAL, 0, 1.0).unwrap();
        spec.site = Site::Tongue;
        assert!(matches!(generate_synthetic(&spec), Err(Error::InvalidSpec(_))));
    }
}
