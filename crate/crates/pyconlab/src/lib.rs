//! Python bindings for the content-network privacy lab.
//!
//! Build with `cargo build -p pyconlab`, then import the produced cdylib as
//! `pyconlab` (rename/copy `libpyconlab.so` to `pyconlab.so` somewhere on
//! `sys.path`; `python/smoke_test.py` at the repository root does exactly
//! that). The surface mirrors the Rust API: names, signed objects and links,
//! membership filters, the cover codec, and the scenario harness.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use conlab::attacks::{classify, TimingCalibration};
use conlab::bloomfwd;
use conlab::covermix;
use conlab::harness;
use conlab::names;
use conlab::provenance;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hierarchical content name, e.g. `/video/a`.
#[pyclass(name = "Name")]
#[derive(Clone)]
struct PyName {
    inner: names::Name,
}

#[pymethods]
impl PyName {
    /// Parses the canonical slash-separated form.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyName> {
        Ok(PyName { inner: names::parse_name(text).map_err(value_err)? })
    }

    /// Name with `component` appended.
    fn child(&self, component: &str) -> PyResult<PyName> {
        Ok(PyName { inner: self.inner.child(component.as_bytes()).map_err(value_err)? })
    }

    fn component_count(&self) -> usize {
        self.inner.components().len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Name({:?})", self.inner.to_string())
    }

    fn __eq__(&self, other: &PyName) -> bool {
        self.inner == other.inner
    }

    fn __hash__(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.inner.hash(&mut h);
        h.finish()
    }
}

/// Signing identity: an Ed25519 key pair plus the publisher id derived from
/// the public key.
#[pyclass(name = "KeyPair")]
struct PyKeyPair {
    inner: provenance::KeyPair,
}

#[pymethods]
impl PyKeyPair {
    /// Deterministic throwaway identity for the given seed.
    #[staticmethod]
    fn ephemeral(seed: u64) -> PyKeyPair {
        PyKeyPair { inner: provenance::make_ephemeral_identity(seed) }
    }

    #[getter]
    fn public<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.public)
    }

    #[getter]
    fn publisher_id(&self) -> String {
        self.inner.id.to_hex()
    }
}

/// Named, signed unit of content.
#[pyclass(name = "ContentObject")]
#[derive(Clone)]
struct PyContentObject {
    inner: names::ContentObject,
}

#[pymethods]
impl PyContentObject {
    #[getter]
    fn name(&self) -> PyName {
        PyName { inner: self.inner.name.clone() }
    }

    #[getter]
    fn payload<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.payload)
    }

    #[getter]
    fn signature<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.signature)
    }

    #[getter]
    fn signer(&self) -> String {
        self.inner.signer.to_hex()
    }

    /// Copy with different payload bytes (signature left untouched — the
    /// result must fail verification).
    fn with_payload(&self, payload: Vec<u8>) -> PyContentObject {
        let mut inner = self.inner.clone();
        inner.payload = payload;
        PyContentObject { inner }
    }

    fn __repr__(&self) -> String {
        format!("ContentObject({:?}, {} bytes)", self.inner.name.to_string(),
                self.inner.payload.len())
    }
}

/// Signed pointer vouching for one exact object under another name.
#[pyclass(name = "SignedLink")]
struct PySignedLink {
    inner: provenance::SignedLink,
}

#[pymethods]
impl PySignedLink {
    #[getter]
    fn link_name(&self) -> PyName {
        PyName { inner: self.inner.link_name.clone() }
    }

    #[getter]
    fn target_name(&self) -> PyName {
        PyName { inner: self.inner.target_name.clone() }
    }

    #[getter]
    fn target_digest<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.target_digest)
    }
}

/// Signs `payload` under `name` with `key`.
#[pyfunction]
fn sign_object(name: &PyName, payload: Vec<u8>, key: &PyKeyPair) -> PyContentObject {
    PyContentObject { inner: provenance::sign_object(&name.inner, &payload, &key.inner) }
}

/// Checks the object's signature against a public key.
#[pyfunction]
fn verify_object(object: &PyContentObject, public: Vec<u8>) -> PyResult<bool> {
    provenance::verify_object(&object.inner, &public).map_err(value_err)
}

/// Signs a link from `link_name` to exactly `target`.
#[pyfunction]
fn make_link(link_name: &PyName, target: &PyContentObject, key: &PyKeyPair) -> PySignedLink {
    PySignedLink { inner: provenance::make_link(&link_name.inner, &target.inner, &key.inner) }
}

/// Whether `target` is the object the link vouches for, under an intact
/// signature.
#[pyfunction]
fn verify_link_target(link: &PySignedLink, target: &PyContentObject) -> bool {
    provenance::verify_link_target(&link.inner, &target.inner)
}

/// Labels a measured round trip against a timing calibration. Returns
/// `cached_at_closest`, `cached_upstream(h)`, `not_cached`, or `anomalous`.
#[pyfunction]
fn classify_rtt(rtt_cached: u64, rtt_server: u64, epsilon: u64, per_hop_rtt: u64,
                rtt: u64) -> String {
    let cal = TimingCalibration { rtt_cached, rtt_server, epsilon, per_hop_rtt };
    classify(&cal, rtt).to_string()
}

/// Fixed-width membership filter over opaque elements.
#[pyclass(name = "BloomFilter")]
struct PyBloomFilter {
    inner: bloomfwd::BloomFilter,
}

#[pymethods]
impl PyBloomFilter {
    #[new]
    fn new(m: u64, h: u32, seed: u64) -> PyBloomFilter {
        PyBloomFilter { inner: bloomfwd::BloomFilter::new(bloomfwd::BloomParams { m, h, seed }) }
    }

    fn insert(&mut self, element: Vec<u8>) {
        self.inner.insert(&element);
    }

    fn contains(&self, element: Vec<u8>) -> bool {
        self.inner.contains(&element)
    }

    fn inserted(&self) -> u64 {
        self.inner.inserted()
    }
}

/// Analytic false-positive rate (1 − e^(−hn/m))^h of an (m, h) filter
/// holding n elements.
#[pyfunction]
fn fp_estimate(m: u64, h: u32, n: u64) -> f64 {
    bloomfwd::fp_estimate(m, h, n)
}

/// The filter element a name contributes (its canonical bytes).
#[pyfunction]
fn name_element(name: &PyName) -> Vec<u8> {
    bloomfwd::name_element(&name.inner)
}

/// A published cover-mixed encoding, decodable back to the content.
#[pyclass(name = "CoverEncoding")]
struct PyCoverEncoding {
    inner: covermix::CoverEncoding,
}

#[pymethods]
impl PyCoverEncoding {
    #[getter]
    fn alpha(&self) -> usize {
        self.inner.params.alpha
    }

    #[getter]
    fn beta(&self) -> usize {
        self.inner.params.beta
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.params.k
    }

    /// Published codewords as (subset, payload) pairs.
    fn codewords<'py>(&self, py: Python<'py>) -> Vec<(Vec<u32>, Bound<'py, PyBytes>)> {
        self.inner
            .codewords
            .iter()
            .map(|cw| (cw.subset.clone(), PyBytes::new(py, &cw.payload)))
            .collect()
    }

    /// Opaque publication names, one per codeword.
    fn codeword_names(&self) -> Vec<String> {
        self.inner.codewords.iter().map(|cw| cw.name.to_string()).collect()
    }

    /// Public cover blocks.
    fn covers<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyBytes>> {
        self.inner.covers.iter().map(|c| PyBytes::new(py, c)).collect()
    }

    /// Reconstructs the original content from the stored codewords.
    fn decode<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let content = covermix::decode(&self.inner.codewords, &self.inner.covers,
                                       &self.inner.meta)
            .map_err(value_err)?;
        Ok(PyBytes::new(py, &content))
    }
}

/// Splits `content` into blocks, mixes in `beta` covers, and publishes every
/// k-subset XOR codeword.
#[pyfunction]
fn covermix_encode(content: Vec<u8>, beta: usize, k: usize, block_size: usize,
                   seed: u64) -> PyResult<PyCoverEncoding> {
    Ok(PyCoverEncoding {
        inner: covermix::encode_content(&content, beta, k, block_size, seed)
            .map_err(value_err)?,
    })
}

/// Zipf(s) ranks over a `catalog`-item universe, seeded.
#[pyfunction]
fn workload_zipf(catalog: usize, exponent: f64, requests: usize, seed: u64) -> Vec<usize> {
    harness::workload_zipf(catalog, exponent, requests, seed)
}

/// Runs a scenario text and returns its event trace as CSV.
#[pyfunction]
#[pyo3(signature = (text, seed=None))]
fn run_scenario_csv(text: &str, seed: Option<u64>) -> PyResult<String> {
    let sc = harness::parse_scenario(text).map_err(value_err)?;
    let seed = harness::resolve_seed(sc.base_config.seed, seed).map_err(value_err)?;
    let run = harness::run_scenario(&sc, seed).map_err(value_err)?;
    Ok(run.sim.trace_csv())
}

/// Runs a scenario text and returns its aggregate metrics as a list of
/// (metric, value) rows in fixed order.
#[pyfunction]
#[pyo3(signature = (text, seed=None))]
fn run_scenario_metrics(text: &str, seed: Option<u64>) -> PyResult<Vec<(String, String)>> {
    let sc = harness::parse_scenario(text).map_err(value_err)?;
    let seed = harness::resolve_seed(sc.base_config.seed, seed).map_err(value_err)?;
    let run = harness::run_scenario(&sc, seed).map_err(value_err)?;
    Ok(run.metrics.rows().into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Runs the scenario's declared attack and returns the report CSV.
#[pyfunction]
#[pyo3(signature = (text, seed=None))]
fn run_attack_csv(text: &str, seed: Option<u64>) -> PyResult<String> {
    let sc = harness::parse_scenario(text).map_err(value_err)?;
    let seed = harness::resolve_seed(sc.base_config.seed, seed).map_err(value_err)?;
    harness::run_attack(&sc, seed).map_err(value_err)
}

/// Re-runs a scenario once per defense (comma-separated, colon arguments;
/// a `none` baseline always leads) and returns the comparison CSV.
#[pyfunction]
#[pyo3(signature = (text, defenses, seed=None))]
fn compare_defenses_csv(text: &str, defenses: &str, seed: Option<u64>) -> PyResult<String> {
    let sc = harness::parse_scenario(text).map_err(value_err)?;
    let seed = harness::resolve_seed(sc.base_config.seed, seed).map_err(value_err)?;
    let list = harness::parse_defense_list(defenses).map_err(value_err)?;
    harness::compare_defenses(&sc, &list, seed).map_err(value_err)
}

#[pymodule]
fn pyconlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyName>()?;
    m.add_class::<PyKeyPair>()?;
    m.add_class::<PyContentObject>()?;
    m.add_class::<PySignedLink>()?;
    m.add_class::<PyBloomFilter>()?;
    m.add_class::<PyCoverEncoding>()?;
    m.add_function(wrap_pyfunction!(sign_object, m)?)?;
    m.add_function(wrap_pyfunction!(verify_object, m)?)?;
    m.add_function(wrap_pyfunction!(make_link, m)?)?;
    m.add_function(wrap_pyfunction!(verify_link_target, m)?)?;
    m.add_function(wrap_pyfunction!(classify_rtt, m)?)?;
    m.add_function(wrap_pyfunction!(fp_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(name_element, m)?)?;
    m.add_function(wrap_pyfunction!(covermix_encode, m)?)?;
    m.add_function(wrap_pyfunction!(workload_zipf, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_csv, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_attack_csv, m)?)?;
    m.add_function(wrap_pyfunction!(compare_defenses_csv, m)?)?;
    Ok(())
}
