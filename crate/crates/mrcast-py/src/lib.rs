//! Python bindings: the core distribution types, the shared random stream,
//! single-stage and two-stage sampling, the exact oracles, the analytical
//! bounds, and full scenario runs returning JSON reports.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mrcast::dist;
use mrcast::error::Error;
use mrcast::protocol::Scheme;
use mrcast::randomness;
use mrcast::scenario;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A finite distribution over named symbols.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Pmf {
    inner: dist::Pmf,
}

#[pymethods]
impl Pmf {
    #[new]
    fn new(symbols: Vec<String>, masses: Vec<f64>) -> PyResult<Self> {
        let alphabet = dist::Alphabet::new(symbols).map_err(err)?;
        Ok(Pmf {
            inner: dist::Pmf::new(alphabet, masses).map_err(err)?,
        })
    }

    fn symbols(&self) -> Vec<String> {
        self.inner.alphabet().symbols().to_vec()
    }

    fn masses(&self) -> Vec<f64> {
        self.inner.mass().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Pmf({:?}, {:?})",
            self.inner.alphabet().symbols(),
            self.inner.mass()
        )
    }
}

/// A joint distribution over two named alphabets, row-major.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct JointPmf {
    inner: dist::JointPmf,
}

#[pymethods]
impl JointPmf {
    #[new]
    fn new(side1: Vec<String>, side2: Vec<String>, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let a1 = dist::Alphabet::new(side1).map_err(err)?;
        let a2 = dist::Alphabet::new(side2).map_err(err)?;
        Ok(JointPmf {
            inner: dist::JointPmf::new(a1, a2, rows).map_err(err)?,
        })
    }

    fn marginals(&self) -> (Pmf, Pmf) {
        let (m1, m2) = self.inner.marginals();
        (Pmf { inner: m1 }, Pmf { inner: m2 })
    }

    fn mutual_information(&self) -> f64 {
        dist::mutual_information(&self.inner)
    }
}

/// A block labelling of an alphabet.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Partition {
    inner: dist::Partition,
}

#[pymethods]
impl Partition {
    #[new]
    fn new(symbols: Vec<String>, labels: Vec<usize>) -> PyResult<Self> {
        let alphabet = dist::Alphabet::new(symbols).map_err(err)?;
        Ok(Partition {
            inner: dist::Partition::new(alphabet, labels).map_err(err)?,
        })
    }

    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    fn block_count(&self) -> usize {
        self.inner.block_count()
    }
}

/// The common block structure of a joint prior.
#[pyclass(frozen)]
struct GkDecomposition {
    inner: mrcast::common_info::GkDecomposition,
}

#[pymethods]
impl GkDecomposition {
    #[getter]
    fn block_count(&self) -> usize {
        self.inner.block_count
    }

    #[getter]
    fn cgk_nats(&self) -> f64 {
        self.inner.cgk_nats
    }

    #[getter]
    fn cgk_bits(&self) -> f64 {
        dist::nats_to_bits(self.inner.cgk_nats)
    }

    #[getter]
    fn p_c(&self) -> Vec<f64> {
        self.inner.p_c.mass().to_vec()
    }

    #[getter]
    fn side1_labels(&self) -> Vec<usize> {
        self.inner.partition1.labels().to_vec()
    }

    #[getter]
    fn side2_labels(&self) -> Vec<usize> {
        self.inner.partition2.labels().to_vec()
    }
}

/// Deterministic shared stream; equal (seed, label) pairs agree forever.
#[pyclass]
struct SharedStream {
    inner: randomness::SharedStream,
}

#[pymethods]
impl SharedStream {
    #[new]
    fn new(seed: u64, label: &str) -> Self {
        SharedStream {
            inner: randomness::SharedStream::derive(&randomness::StreamSeed::new(seed, label)),
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn next_unit(&mut self) -> f64 {
        self.inner.next_unit()
    }

    fn sample(&mut self, pmf: &Pmf) -> String {
        let idx = self.inner.sample_categorical(&pmf.inner);
        pmf.inner.alphabet().symbol(idx).to_string()
    }

    #[getter]
    fn position(&self) -> u64 {
        self.inner.position()
    }
}

#[pyfunction]
fn entropy(p: &Pmf) -> f64 {
    dist::entropy(&p.inner)
}

#[pyfunction]
fn kl(q: &Pmf, p: &Pmf) -> PyResult<f64> {
    dist::kl(&q.inner, &p.inner).map_err(err)
}

#[pyfunction]
fn tv(p: &Pmf, q: &Pmf) -> f64 {
    dist::tv(&p.inner, &q.inner)
}

#[pyfunction]
fn chi_square(p: &Pmf, q: &Pmf) -> PyResult<f64> {
    dist::chi_square(&p.inner, &q.inner).map_err(err)
}

#[pyfunction]
fn nats_to_bits(nats: f64) -> f64 {
    dist::nats_to_bits(nats)
}

#[pyfunction]
#[pyo3(signature = (joint, atol = 0.0))]
fn gk_decompose(joint: &JointPmf, atol: f64) -> PyResult<GkDecomposition> {
    Ok(GkDecomposition {
        inner: mrcast::common_info::gk_decompose(&joint.inner, atol).map_err(err)?,
    })
}

/// The shared proposal list both sides reconstruct from (seed, label).
#[pyfunction]
fn draw_proposals(seed: u64, label: &str, prior: &Pmf, n: usize) -> Vec<String> {
    mrcast::mrc::draw_proposals(&randomness::StreamSeed::new(seed, label), &prior.inner, n)
        .into_iter()
        .map(|idx| prior.inner.alphabet().symbol(idx).to_string())
        .collect()
}

/// One single-stage round trip: returns (transmitted index, decoded symbol,
/// bit cost).
#[pyfunction]
fn mrc_round_trip(
    seed: u64,
    label: &str,
    target: &Pmf,
    prior: &Pmf,
    n: usize,
) -> PyResult<(usize, String, f64)> {
    let stream_seed = randomness::StreamSeed::new(seed, label);
    let proposals = mrcast::mrc::draw_proposals(&stream_seed, &prior.inner, n);
    let aux = mrcast::mrc::aux_distribution(&target.inner, &prior.inner, &proposals).map_err(err)?;
    let mut idx_stream = randomness::SharedStream::derive(&stream_seed.child("m"));
    let msg = mrcast::mrc::encode_index(&mut idx_stream, &aux);
    let decoded = mrcast::mrc::decode_sample(&stream_seed, &prior.inner, &msg).map_err(err)?;
    Ok((
        msg.index,
        prior.inner.alphabet().symbol(decoded).to_string(),
        msg.bit_cost,
    ))
}

/// The K-sample estimator of `sum target(x) f(x)` over `n` proposals.
#[pyfunction]
fn mrc_estimate(
    seed: u64,
    label: &str,
    target: &Pmf,
    prior: &Pmf,
    f: Vec<f64>,
    n: usize,
    k: usize,
) -> PyResult<f64> {
    let (estimate, _) = mrcast::mrc::mrc_estimate(
        &randomness::StreamSeed::new(seed, label),
        &target.inner,
        &prior.inner,
        &f,
        n,
        k,
    )
    .map_err(err)?;
    Ok(estimate)
}

/// Exact law of the single-stage selected symbol.
#[pyfunction]
fn exact_selected_law_mrc(target: &Pmf, prior: &Pmf, n: usize) -> PyResult<Vec<f64>> {
    Ok(
        mrcast::oracles::exact_selected_distribution_mrc(&target.inner, &prior.inner, n)
            .map_err(err)?
            .pmf
            .mass()
            .to_vec(),
    )
}

/// Exact law of the two-stage selected symbol.
#[pyfunction]
fn exact_selected_law_hier(
    target: &Pmf,
    prior: &Pmf,
    partition: &Partition,
    n_c: usize,
    n_ref: Vec<usize>,
) -> PyResult<Vec<f64>> {
    Ok(mrcast::oracles::exact_selected_distribution_hier(
        &target.inner,
        &prior.inner,
        &partition.inner,
        n_c,
        &n_ref,
    )
    .map_err(err)?
    .pmf
    .mass()
    .to_vec())
}

/// Single-stage epsilon at slack `t` (nats).
#[pyfunction]
fn epsilon(target: &Pmf, prior: &Pmf, t: f64) -> PyResult<f64> {
    mrcast::bounds::epsilon_lemma1(&target.inner, &prior.inner, t).map_err(err)
}

/// Single-stage bias bound: returns (bound, confidence, vacuous).
#[pyfunction]
fn bias_bound(target: &Pmf, prior: &Pmf, f: Vec<f64>, t: f64) -> PyResult<(f64, f64, bool)> {
    let b = mrcast::bounds::bias_bound_lemma1(&f, &target.inner, &prior.inner, t).map_err(err)?;
    Ok((b.bound, b.confidence, b.vacuous))
}

/// Expected raw draws per transmission of the two-stage sampler.
#[pyfunction]
fn avg_complexity(p_c: &Pmf, q_c: &Pmf, n_c: usize, n_ref: Vec<usize>) -> PyResult<f64> {
    mrcast::bounds::avg_complexity_lemma3(&p_c.inner, &q_c.inner, n_c, &n_ref).map_err(err)
}

/// Runs a scenario from TOML text and returns the full JSON report.
#[pyfunction]
#[pyo3(signature = (toml_text, scheme = None, trials = 1, workers = 1))]
fn run_scenario_toml(
    toml_text: &str,
    scheme: Option<&str>,
    trials: usize,
    workers: usize,
) -> PyResult<String> {
    let file = scenario::parse_scenario_toml(toml_text).map_err(err)?;
    let scheme = match scheme {
        None => None,
        Some("naive") => Some(Scheme::Naive),
        Some("hierarchical") | Some("hier") => Some(Scheme::Hierarchical),
        Some("both") => Some(Scheme::Both),
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "unknown scheme {other:?}; use naive, hierarchical, or both"
            )))
        }
    };
    let body = scenario::run_trials(&file, scheme, trials, workers.max(1)).map_err(err)?;
    Ok(scenario::report_to_json(&scenario::report_file(file, body)))
}

/// Runs a scenario file from disk; see `run_scenario_toml`.
#[pyfunction]
#[pyo3(signature = (path, scheme = None, trials = 1, workers = 1))]
fn run_scenario_file(
    path: &str,
    scheme: Option<&str>,
    trials: usize,
    workers: usize,
) -> PyResult<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
    run_scenario_toml(&text, scheme, trials, workers)
}

#[pymodule]
fn mrcast_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Pmf>()?;
    m.add_class::<JointPmf>()?;
    m.add_class::<Partition>()?;
    m.add_class::<GkDecomposition>()?;
    m.add_class::<SharedStream>()?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(kl, m)?)?;
    m.add_function(wrap_pyfunction!(tv, m)?)?;
    m.add_function(wrap_pyfunction!(chi_square, m)?)?;
    m.add_function(wrap_pyfunction!(nats_to_bits, m)?)?;
    m.add_function(wrap_pyfunction!(gk_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(draw_proposals, m)?)?;
    m.add_function(wrap_pyfunction!(mrc_round_trip, m)?)?;
    m.add_function(wrap_pyfunction!(mrc_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_selected_law_mrc, m)?)?;
    m.add_function(wrap_pyfunction!(exact_selected_law_hier, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(bias_bound, m)?)?;
    m.add_function(wrap_pyfunction!(avg_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_file, m)?)?;
    Ok(())
}
