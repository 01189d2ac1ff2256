mod support;

use pallor_core::edges::{frangi_vesselness, sobel_gradient, FrangiParams};
use pallor_core::features::{extract_m1_features, extrapolate_m2_planes, FeatureSchema, M1Plane, PlaneKey};
use pallor_core::raster::{to_plane, Grid, PlaneId};
use pallor_core::segmentation::{EyeRois, SiteRois};
use pallor_core::synth::{generate_synthetic, SyntheticSpec};
use pallor_core::{Grade, Site};
use support::{enumerate_stats, fixture_10x10};

#[test]
fn fixture_matches_enumeration_oracle() {
    let (img, iris, sclera, conjunctiva) = fixture_10x10();
    let rois = SiteRois::Eye(EyeRois {
        iris,
        sclera: sclera.clone(),
        conjunctiva: conjunctiva.clone(),
    });
    let frangi = FrangiParams::default();
    let v = extract_m1_features(&img, &rois, &frangi, "fixture").unwrap();
    assert_eq!(v.values.len(), 54);

    let green = to_plane(&img, PlaneId::Green);
    let gradient = sobel_gradient(&green).unwrap();
    let vessel = frangi_vesselness(&green, &frangi).unwrap().response;
    let per_pixel = |id: PlaneId| Grid {
        width: 10,
        height: 10,
        data: (0..100).map(|i| id.transform(img.pixel(i % 10, i / 10))).collect(),
    };
    let mut want = Vec::new();
    for region in [&sclera, &conjunctiva] {
        for plane in M1Plane::ALL {
            let grid = match plane {
                M1Plane::Color(id) => per_pixel(id),
                M1Plane::GradientMagnitudeGreen => gradient.magnitude.clone(),
                M1Plane::GradientDirectionGreen => gradient.direction.clone(),
                M1Plane::FrangiGreen => vessel.clone(),
            };
            want.extend(enumerate_stats(&grid, region));
        }
    }
    assert_eq!(v.values, want);
    assert_eq!(FeatureSchema::m1(Site::Eye).len(), 54);
}

#[test]
fn feature_counts_on_generator_images() {
    let config = pallor_core::pipeline::PipelineConfig::default();
    for site in [Site::Eye, Site::Tongue] {
        for seed in 0..6 {
            let grade = Grade::new((seed % 3) as u8).unwrap();
            let (img, _) = generate_synthetic(&SyntheticSpec::sample(site, grade, seed, 1.0).unwrap()).unwrap();
            let m1 = pallor_core::pipeline::m1_vector(&img, site, None, &config, "x").unwrap();
            assert_eq!(m1.values.len(), 54);
            let planes = extrapolate_m2_planes(&img, &config.frangi).unwrap();
            let present = PlaneKey::all().into_iter().filter(|k| planes.get(*k).is_some()).count();
            assert_eq!(present, 36);
            let m2 = pallor_core::pipeline::m2_vector(&img, site, None, &config, "x").unwrap();
            assert_eq!(m2.values.len(), 108);
        }
    }
    assert_eq!(PlaneKey::all().len(), 36);
}
