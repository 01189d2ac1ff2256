//! Python bindings for the pallor screening pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pallor_core::archive::ModelArchive;
use pallor_core::evaluation::{self, ConfusionMatrix};
use pallor_core::mask::RegionMask;
use pallor_core::models::{self, ModelFamily, ModelSpec, RankingMethod, TrainingSet};
use pallor_core::pipeline::{self, FeatureModel, PipelineConfig};
use pallor_core::raster::RasterImage;
use pallor_core::synth::{generate_synthetic, SyntheticSpec};
use pallor_core::{Error, Grade, Site};

create_exception!(pallor, PallorError, PyValueError);

fn err(e: Error) -> PyErr {
    PallorError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// An RGB image with channels in [0, 1].
#[pyclass(name = "Image", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage(RasterImage);

#[pymethods]
impl PyImage {
    /// Row-major `[r, g, b, r, g, b, ...]` floats.
    #[new]
    fn new(width: usize, height: usize, data: Vec<f64>) -> PyResult<Self> {
        RasterImage::new(width, height, data).map(Self).map_err(err)
    }

    /// Loads an image resized to the 125×125 working size.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pipeline::prepare_image(&path).map(Self).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn pixel(&self, x: usize, y: usize) -> PyResult<(f64, f64, f64)> {
        if x >= self.0.width() || y >= self.0.height() {
            return Err(PallorError::new_err(format!("pixel ({x}, {y}) out of bounds")));
        }
        let [r, g, b] = self.0.pixel(x, y);
        Ok((r, g, b))
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_png(&path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

/// A binary region mask.
#[pyclass(name = "Mask", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMask(RegionMask);

#[pymethods]
impl PyMask {
    #[new]
    fn new(width: usize, height: usize, bits: Vec<bool>) -> PyResult<Self> {
        RegionMask::from_bits(width, height, bits).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        pipeline::prepare_mask(&path).map(Self).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    fn pixel_count(&self) -> usize {
        self.0.pixel_count()
    }

    fn to_list(&self) -> Vec<bool> {
        self.0.bits().to_vec()
    }

    fn save_png(&self, path: PathBuf) -> PyResult<()> {
        self.0.save_png(&path).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Mask({}x{}, {} px)", self.0.width(), self.0.height(), self.0.pixel_count())
    }
}

/// Foreground `g` and the site's ROIs, keyed by name.
#[pyfunction]
#[pyo3(signature = (image, site, mask=None))]
fn segment(image: &PyImage, site: &str, mask: Option<&PyMask>) -> PyResult<BTreeMap<String, PyMask>> {
    let site: Site = parse(site)?;
    let (g, rois) =
        pipeline::segment_image(&image.0, site, mask.map(|m| &m.0), &PipelineConfig::default(), "image").map_err(err)?;
    let mut out: BTreeMap<String, PyMask> =
        rois.named_masks().into_iter().map(|(n, m)| (n.to_string(), PyMask(m.clone()))).collect();
    out.insert("g".into(), PyMask(g));
    Ok(out)
}

/// Feature names and values of one image under model "m1" or "m2".
#[pyfunction]
#[pyo3(signature = (image, site, model="m1", mask=None))]
fn extract_features(image: &PyImage, site: &str, model: &str, mask: Option<&PyMask>) -> PyResult<(Vec<String>, Vec<f64>)> {
    let site: Site = parse(site)?;
    let model: FeatureModel = parse(model)?;
    let v = pipeline::image_vector(&image.0, site, mask.map(|m| &m.0), model, &PipelineConfig::default(), "image")
        .map_err(err)?;
    Ok((model.schema(site).names(), v.values))
}

/// A generator image and its ground-truth masks ("g" plus the ROIs).
#[pyfunction]
#[pyo3(signature = (site, grade, seed, contrast=1.0))]
fn synthesize(site: &str, grade: u8, seed: u64, contrast: f64) -> PyResult<(PyImage, BTreeMap<String, PyMask>)> {
    let site: Site = parse(site)?;
    let grade = Grade::new(grade).map_err(err)?;
    let spec = SyntheticSpec::sample(site, grade, seed, contrast).map_err(err)?;
    let (img, truth) = generate_synthetic(&spec).map_err(err)?;
    let mut masks: BTreeMap<String, PyMask> =
        truth.rois.into_iter().map(|(n, m)| (n.to_string(), PyMask(m))).collect();
    masks.insert("g".into(), PyMask(truth.foreground));
    Ok((PyImage(img), masks))
}

/// Feature order (best first) and scores under "f_score", "mutual_info" or "chi_squared".
#[pyfunction]
#[pyo3(signature = (samples, labels, method="f_score"))]
fn rank_features(samples: Vec<Vec<f64>>, labels: Vec<bool>, method: &str) -> PyResult<(Vec<usize>, Vec<f64>)> {
    let method: RankingMethod = parse(method)?;
    let data = TrainingSet::from_rows(samples, labels).map_err(err)?;
    let ranked = method.rank(&data).map_err(err)?;
    Ok((ranked.order, ranked.scores))
}

/// A trained binary classifier.
#[pyclass(name = "Model", frozen)]
struct PyModel(models::TrainedModel);

#[pymethods]
impl PyModel {
    #[getter]
    fn spec(&self) -> String {
        self.0.spec.to_string()
    }

    /// `(label, score)` for one row.
    fn predict(&self, row: Vec<f64>) -> PyResult<(bool, f64)> {
        let p = self.0.predict_values(&row).map_err(err)?;
        Ok((p.label, p.score))
    }

    fn __repr__(&self) -> String {
        format!("Model({})", self.0.spec)
    }
}

#[pyfunction]
#[pyo3(signature = (family, samples, labels, params, seed=0))]
fn train_model(
    family: &str,
    samples: Vec<Vec<f64>>,
    labels: Vec<bool>,
    params: BTreeMap<String, f64>,
    seed: u64,
) -> PyResult<PyModel> {
    let family: ModelFamily = parse(family)?;
    let pairs: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let spec = ModelSpec::new(family, &pairs, seed).map_err(err)?;
    let data = TrainingSet::from_rows(samples, labels).map_err(err)?;
    models::train(&spec, &data).map(PyModel).map_err(err)
}

/// Precision, recall, accuracy and the undefined flags.
#[pyfunction]
fn compute_metrics(tp: usize, fp: usize, tn: usize, fn_: usize) -> PyResult<BTreeMap<&'static str, f64>> {
    let m = evaluation::compute_metrics(&ConfusionMatrix::new(tp, fp, tn, fn_)).map_err(err)?;
    Ok(BTreeMap::from([
        ("precision", m.precision),
        ("recall", m.recall),
        ("accuracy", m.accuracy),
        ("precision_undefined", f64::from(u8::from(m.precision_undefined))),
        ("recall_undefined", f64::from(u8::from(m.recall_undefined))),
    ]))
}

#[pyfunction]
fn compute_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::compute_auc(&scores, &labels).map_err(err)
}

/// Fold index of every sample.
#[pyfunction]
#[pyo3(signature = (labels, k, seed=0))]
fn stratified_folds(labels: Vec<i64>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    evaluation::make_stratified_folds(&labels, k, seed).map(|p| p.assignments).map_err(err)
}

/// A saved two-step cascade.
#[pyclass(name = "Archive", frozen)]
struct PyArchive(ModelArchive);

#[pymethods]
impl PyArchive {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ModelArchive::load(&path).map(Self).map_err(err)
    }

    #[getter]
    fn site(&self) -> String {
        self.0.site.to_string()
    }

    #[getter]
    fn feature_model(&self) -> String {
        self.0.feature_model.to_string()
    }

    #[getter]
    fn hierarchy(&self) -> String {
        self.0.plan.to_string()
    }

    /// `(grades, step1_score, step2_score or None)` for one feature vector.
    fn predict_values(&self, values: Vec<f64>) -> PyResult<(Vec<u8>, f64, Option<f64>)> {
        let p = self.0.predict_values(&values).map_err(err)?;
        Ok((p.grades.iter().map(|g| g.value()).collect(), p.step1.score, p.step2.map(|s| s.score)))
    }

    #[pyo3(signature = (image, mask=None))]
    fn predict_image(&self, image: &PyImage, mask: Option<&PyMask>) -> PyResult<(Vec<u8>, f64, Option<f64>)> {
        let a = &self.0;
        let v = pipeline::image_vector(&image.0, a.site, mask.map(|m| &m.0), a.feature_model, &a.pipeline, "image")
            .map_err(err)?;
        self.predict_values(v.values)
    }
}

#[pymodule]
fn pallor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PallorError", m.py().get_type::<PallorError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyArchive>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(rank_features, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(compute_auc, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_folds, m)?)?;
    Ok(())
}
