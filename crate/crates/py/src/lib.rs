//! Python module `hatc`: images, feature extraction, the three stream
//! formats, model loading and the retrieval metrics.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use hatc::codec::QualityFactor;
use hatc::container::{demux, mux, LayerSizes};
use hatc::corpus::CorpusConfig;
use hatc::entropy::ModelSet;
use hatc::eval::RankedList;
use hatc::pipeline::{self, EncodeConfig, Method, DEFAULT_THRESHOLD};

create_exception!(hatc, HatcError, PyException);

fn err(e: hatc::Error) -> PyErr {
    HatcError::new_err(e.to_string())
}

#[pyclass(name = "Image", module = "hatc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyImage(hatc::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: u32, height: u32, samples: Vec<u8>) -> PyResult<Self> {
        hatc::Image::new(width, height, samples).map(PyImage).map_err(err)
    }

    #[staticmethod]
    fn read_pgm(path: PathBuf) -> PyResult<Self> {
        hatc::Image::read_pgm(path).map(PyImage).map_err(err)
    }

    fn write_pgm(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_pgm(path).map_err(err)
    }

    #[getter]
    fn width(&self) -> u32 {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }

    /// Row-major 8-bit samples.
    fn samples<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.0.samples())
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.width(), self.0.height())
    }
}

#[pyclass(name = "FeatureSet", module = "hatc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyFeatureSet(hatc::FeatureSet);

#[pymethods]
impl PyFeatureSet {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `(x, y, scale, orientation, response)` per keypoint, positions in pixels.
    fn keypoints(&self) -> Vec<(f64, f64, f32, f32, f32)> {
        self.0
            .keypoints
            .iter()
            .map(|k| (k.x as f64 / 4.0, k.y as f64 / 4.0, k.scale, k.orientation, k.response))
            .collect()
    }

    fn descriptors<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.0
            .descriptors
            .iter()
            .map(|d| PyBytes::new(py, &d.to_bytes()))
            .collect()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        hatc::FeatureSet::from_bytes(data).map(PyFeatureSet).map_err(err)
    }
}

#[pyclass(name = "Models", module = "hatc", frozen)]
struct PyModels(ModelSet);

#[pymethods]
impl PyModels {
    /// Loads a model file or every model in a directory.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ModelSet::load(path).map(PyModels).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.models().len()
    }
}

#[pyclass(name = "Decoded", module = "hatc", frozen, get_all)]
struct PyDecoded {
    method: String,
    image: Option<PyImage>,
    features: PyFeatureSet,
    header_bytes: usize,
    image_bytes: usize,
    location_bytes: usize,
    enhancement_bytes: usize,
    total_bytes: usize,
}

impl PyDecoded {
    fn new(method: Method, image: Option<hatc::Image>, features: hatc::FeatureSet, rate: LayerSizes) -> Self {
        PyDecoded {
            method: method.to_string(),
            image: image.map(PyImage),
            features: PyFeatureSet(features),
            header_bytes: rate.header,
            image_bytes: rate.image,
            location_bytes: rate.location,
            enhancement_bytes: rate.enhancement,
            total_bytes: rate.total(),
        }
    }
}

#[pyfunction]
#[pyo3(signature = (image, threshold = DEFAULT_THRESHOLD))]
fn extract(image: &PyImage, threshold: u32) -> PyResult<PyFeatureSet> {
    hatc::extract(&image.0, threshold).map(PyFeatureSet).map_err(err)
}

/// Encodes an image into a stream; `method` is "cta", "atc" or "hatc".
#[pyfunction]
#[pyo3(signature = (image, method, q = 50, threshold = DEFAULT_THRESHOLD, z = 50, scale_bits = 8, models = None))]
#[allow(clippy::too_many_arguments)]
fn encode<'py>(
    py: Python<'py>,
    image: &PyImage,
    method: &str,
    q: u32,
    threshold: u32,
    z: usize,
    scale_bits: u8,
    models: Option<&PyModels>,
) -> PyResult<Bound<'py, PyBytes>> {
    let config = EncodeConfig {
        method: method.parse().map_err(err)?,
        quality: QualityFactor::new(q).map_err(err)?,
        threshold,
        refine_count: z,
        scale_bits,
    };
    let empty = ModelSet::default();
    let models = models.map_or(&empty, |m| &m.0);
    let img = image.0.clone();
    let bytes = py
        .detach(|| pipeline::encode(&img, &config, models).and_then(|e| mux(&e.stream)))
        .map_err(err)?;
    Ok(PyBytes::new(py, &bytes))
}

#[pyfunction]
#[pyo3(signature = (data, models = None, threshold = DEFAULT_THRESHOLD))]
fn decode(py: Python<'_>, data: &[u8], models: Option<&PyModels>, threshold: u32) -> PyResult<PyDecoded> {
    let empty = ModelSet::default();
    let models = models.map_or(&empty, |m| &m.0);
    let data = data.to_vec();
    py.detach(|| {
        let stream = demux(&data)?;
        let method = pipeline::stream_method(&stream)?;
        let d = pipeline::decode(&stream, models, threshold)?;
        Ok(PyDecoded::new(method, d.image, d.features, d.rate))
    })
    .map_err(err)
}

/// Trains residual models at each quality plus an intra model.
#[pyfunction]
#[pyo3(signature = (images, qualities, threshold = DEFAULT_THRESHOLD, scale_bits = 8))]
fn train(
    py: Python<'_>,
    images: Vec<PyRef<'_, PyImage>>,
    qualities: Vec<u32>,
    threshold: u32,
    scale_bits: u8,
) -> PyResult<PyModels> {
    let images: Vec<hatc::Image> = images.iter().map(|i| i.0.clone()).collect();
    py.detach(|| {
        let mut models = Vec::new();
        for q in qualities {
            models.push(hatc::train::train_residual(&images, QualityFactor::new(q)?, threshold, scale_bits)?.0);
        }
        models.push(hatc::train::train_intra(&images, threshold)?.0);
        Ok(PyModels(ModelSet::new(models)))
    })
    .map_err(err)
}

/// Writes the synthetic corpus and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out, seed = 1, objects = 20, views = 5, queries = 1, train_images = 40, width = 320, height = 240))]
#[allow(clippy::too_many_arguments)]
fn synth_corpus(
    py: Python<'_>,
    out: PathBuf,
    seed: u64,
    objects: usize,
    views: usize,
    queries: usize,
    train_images: usize,
    width: u32,
    height: u32,
) -> PyResult<PathBuf> {
    let config = CorpusConfig {
        objects,
        db_views: views,
        queries_per_object: queries,
        training_images: train_images,
        width,
        height,
        seed,
    };
    py.detach(|| hatc::corpus::write_corpus(&out, &config)).map_err(err)
}

#[pyfunction]
fn psnr(a: &PyImage, b: &PyImage) -> PyResult<f64> {
    hatc::codec::psnr(&a.0, &b.0).map_err(err)
}

#[pyfunction]
fn location_rate(count: u64, width: u32, height: u32, scale_bits: u8) -> u64 {
    hatc::location::location_rate(count, width, height, scale_bits)
}

/// Average precision of a ranked id list against a set of relevant ids.
#[pyfunction]
fn average_precision(ranked: Vec<usize>, relevant: BTreeSet<usize>) -> PyResult<f64> {
    let list = RankedList {
        query_id: 0,
        entries: ranked,
    };
    hatc::eval::average_precision(&list, &relevant).map_err(err)
}

#[pyfunction]
fn hamming(a: &[u8], b: &[u8]) -> PyResult<u32> {
    if a.len() != b.len() {
        return Err(HatcError::new_err(format!(
            "descriptor lengths differ: {} and {} bytes",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum())
}

#[pymodule]
#[pyo3(name = "hatc")]
fn hatc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HatcError", m.py().get_type::<HatcError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PyFeatureSet>()?;
    m.add_class::<PyModels>()?;
    m.add_class::<PyDecoded>()?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(location_rate, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(hamming, m)?)?;
    Ok(())
}
