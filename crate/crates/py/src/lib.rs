use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use diffc::codec::{self, ScoreModel};
use diffc::gaussian_rd::{self, Variant};
use diffc::harness::{self, SuiteConfig, TheoremId};
use diffc::rng::{labelled, StreamKey};
use diffc::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Spectrum", frozen)]
struct PySpectrum(gaussian_rd::Spectrum);

#[pymethods]
impl PySpectrum {
    #[new]
    fn new(lambdas: Vec<f64>) -> PyResult<Self> {
        gaussian_rd::Spectrum::new(lambdas).map(PySpectrum).map_err(err)
    }

    #[staticmethod]
    fn power_law(dim: usize, exponent: f64) -> PyResult<Self> {
        gaussian_rd::Spectrum::power_law(dim, exponent).map(PySpectrum).map_err(err)
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.lambdas().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.dim()
    }
}

#[pyclass(name = "RDPoint", frozen, get_all)]
struct PyRDPoint {
    /// Total bits, `None` when unbounded.
    rate_bits: Option<f64>,
    rate_bpd: Option<f64>,
    distortion: f64,
    snr_db: f64,
}

#[pymethods]
impl PyRDPoint {
    fn __repr__(&self) -> String {
        format!("RDPoint(rate_bpd={:?}, distortion={}, snr_db={})", self.rate_bpd, self.distortion, self.snr_db)
    }
}

impl From<gaussian_rd::RDPoint> for PyRDPoint {
    fn from(p: gaussian_rd::RDPoint) -> Self {
        PyRDPoint {
            rate_bits: p.rate.bits(),
            rate_bpd: p.rate_bpd(),
            distortion: p.distortion,
            snr_db: p.snr_db,
        }
    }
}

/// Returns `(theta, per_component)`.
#[pyfunction]
fn waterfill(spectrum: &PySpectrum, total_distortion: f64) -> PyResult<(f64, Vec<f64>)> {
    let s = gaussian_rd::waterfill(&spectrum.0, total_distortion).map_err(err)?;
    Ok((s.theta, s.per_component))
}

#[pyfunction]
fn gaussian_rdf(spectrum: &PySpectrum, total_distortion: f64) -> PyResult<f64> {
    gaussian_rd::gaussian_rdf(&spectrum.0, total_distortion).map_err(err)
}

/// One point of a named curve (`DiffC-A`, `diffc_f_star`, `P-A`, ...) at a σ or θ control value.
#[pyfunction]
fn rd_point(spectrum: &PySpectrum, variant: &str, control: f64) -> PyResult<PyRDPoint> {
    let v = Variant::parse(variant).map_err(err)?;
    v.point(&spectrum.0, control).map(Into::into).map_err(err)
}

/// Returns `(control, point)` for the variant at `rate_bpd`.
#[pyfunction]
fn point_at_rate(spectrum: &PySpectrum, variant: &str, rate_bpd: f64) -> PyResult<(f64, PyRDPoint)> {
    let v = Variant::parse(variant).map_err(err)?;
    let (c, p) = gaussian_rd::point_at_rate(&spectrum.0, v, rate_bpd).map_err(err)?;
    Ok((c, p.into()))
}

#[pyfunction]
fn chunk_overhead(total_kl_bits: f64, chunk_bits: f64) -> PyResult<f64> {
    codec::chunk_overhead(total_kl_bits, chunk_bits).map_err(err)
}

#[pyclass(name = "Source", frozen)]
struct PySource(codec::AnalyticSource);

#[pymethods]
impl PySource {
    #[staticmethod]
    fn gaussian(spectrum: &PySpectrum) -> PyResult<Self> {
        codec::AnalyticSource::gaussian(&spectrum.0, None).map(PySource).map_err(err)
    }

    #[staticmethod]
    fn symmetric_pair(mu: f64, var: f64) -> PyResult<Self> {
        codec::AnalyticSource::symmetric_pair(mu, var).map(PySource).map_err(err)
    }

    #[staticmethod]
    fn mixture(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> PyResult<Self> {
        codec::AnalyticSource::mixture(weights, means, vars, None).map(PySource).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.0.log_density(&x))
    }

    /// Score of `Y = X + ηU` at `y`.
    fn score_ve(&self, y: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
        self.check(&y)?;
        let mut out = vec![0.0; y.len()];
        self.0.score_ve(&y, eta, &mut out);
        Ok(out)
    }

    fn posterior_mean_ve(&self, y: Vec<f64>, eta: f64) -> PyResult<Vec<f64>> {
        self.check(&y)?;
        let mut out = vec![0.0; y.len()];
        self.0.posterior_mean_ve(&y, eta, &mut out);
        Ok(out)
    }

    fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = labelled(seed, "python/sample");
        (0..n)
            .map(|_| {
                let mut x = vec![0.0; self.0.dim()];
                self.0.sample(&mut rng, &mut x);
                x
            })
            .collect()
    }
}

impl PySource {
    fn check(&self, v: &[f64]) -> PyResult<()> {
        if v.len() == self.0.dim() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("expected {} values, got {}", self.0.dim(), v.len())))
        }
    }
}

#[pyclass(name = "Schedule", frozen)]
struct PySchedule(codec::DiffusionSchedule);

#[pymethods]
impl PySchedule {
    #[new]
    #[pyo3(signature = (preset = "cosine", steps = codec::DEFAULT_STEPS))]
    fn new(preset: &str, steps: usize) -> PyResult<Self> {
        let p = codec::SchedulePreset::parse(preset).map_err(err)?;
        codec::DiffusionSchedule::new(p, steps).map(PySchedule).map_err(err)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.0.steps()
    }

    fn sigma(&self, t: usize) -> PyResult<f64> {
        self.0.sigma(t).map_err(err)
    }

    fn nearest_step(&self, sigma: f64) -> usize {
        self.0.nearest_step(sigma)
    }
}

/// Returns `(bitstream, total_kl_bits, ledger_csv)`.
#[pyfunction]
#[pyo3(signature = (x, source, schedule, t_stop, seed, chunk_bits = codec::DEFAULT_CHUNK_BITS))]
fn encode<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    source: &PySource,
    schedule: &PySchedule,
    t_stop: usize,
    seed: u64,
    chunk_bits: u32,
) -> PyResult<(Bound<'py, PyBytes>, f64, String)> {
    let enc = codec::encode(&x, &source.0, &schedule.0, t_stop, chunk_bits, StreamKey::from_seed(seed)).map_err(err)?;
    let bytes = enc.bitstream.to_bytes().map_err(err)?;
    let mut csv = Vec::new();
    enc.ledger.write_csv(&mut csv).map_err(err)?;
    Ok((PyBytes::new(py, &bytes), enc.ledger.total_kl_bits(), String::from_utf8_lossy(&csv).into_owned()))
}

/// Decodes to `z` (`recon="z"`), the flow reconstruction, or an ancestral draw (needs `seed`).
#[pyfunction]
#[pyo3(signature = (data, source, recon = "flow", seed = None))]
fn decode(data: &[u8], source: &PySource, recon: &str, seed: Option<u64>) -> PyResult<Vec<f64>> {
    let bs = codec::Bitstream::from_bytes(data).map_err(err)?;
    let schedule = codec::DiffusionSchedule::new(bs.preset, bs.steps as usize).map_err(err)?;
    let z = codec::decode_to_z(&bs, &source.0, &schedule).map_err(err)?;
    let t = bs.t_stop as usize;
    match recon {
        "z" => Ok(z),
        "flow" => codec::reconstruct_flow(&z, &source.0, &schedule, t, codec::DEFAULT_ODE_STEPS).map_err(err),
        "ancestral" => {
            let seed = seed.ok_or_else(|| PyValueError::new_err("ancestral decoding needs a seed"))?;
            let mut rng = labelled(seed, "decode/ancestral");
            codec::reconstruct_ancestral(&z, &source.0, &schedule, t, &mut rng).map_err(err)
        }
        other => Err(PyValueError::new_err(format!("unknown reconstruction {other:?}"))),
    }
}

/// Returns `(g_per_dim, std_error_per_dim)`.
#[pyfunction]
fn estimate_g(source: &PySource, sigma: f64, n: usize, seed: u64) -> PyResult<(f64, f64)> {
    let g = harness::estimate_g_at(&source.0, sigma, n, seed).map_err(err)?;
    Ok((g.per_dim(), g.std_error / g.dim as f64))
}

/// Runs checks and returns `(all_pass, report_lines)` with lines in report-file form.
#[pyfunction]
#[pyo3(signature = (theorem, seed, samples = None))]
fn verify(py: Python<'_>, theorem: &str, seed: u64, samples: Option<usize>) -> PyResult<(bool, Vec<String>)> {
    let ids = TheoremId::parse(theorem).map_err(err)?;
    let mut config = SuiteConfig::new(seed);
    config.samples = samples;
    let reports = py.detach(|| harness::run_suite(&config, &ids)).map_err(err)?;
    let lines = reports.iter().flat_map(|r| r.assertions.iter().map(|a| a.csv_line())).collect();
    Ok((reports.iter().all(|r| r.pass()), lines))
}

#[pymodule]
#[pyo3(name = "diffc")]
fn diffc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyRDPoint>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_rdf, m)?)?;
    m.add_function(wrap_pyfunction!(rd_point, m)?)?;
    m.add_function(wrap_pyfunction!(point_at_rate, m)?)?;
    m.add_function(wrap_pyfunction!(chunk_overhead, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_g, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
