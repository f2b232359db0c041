//! Python bindings. Results come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use ::mlsbm as core;
use core::corpus::{build_network, subsample_tokens, FilterConfig, TokenizeConfig};
use core::inference::InitStrategy;
use core::linkpred::{delta_auc_ttest, welch_ttest};
use core::topics::topic_report_from_labels;
use core::{Corpus, LayerSet, McmcConfig, MultilayerNetwork, NodeType, Partition, TagMode};

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// The three-layer document network.
#[pyclass(name = "Network", frozen)]
struct PyNetwork {
    inner: MultilayerNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Tokenize a JSON-lines corpus and build the filtered network.
    #[staticmethod]
    #[pyo3(signature = (path, stem=false, min_len=1, min_outlinks=2, largest_component=true))]
    fn from_corpus(
        py: Python<'_>,
        path: PathBuf,
        stem: bool,
        min_len: usize,
        min_outlinks: usize,
        largest_component: bool,
    ) -> PyResult<Self> {
        let tokenize = TokenizeConfig { stem, min_len };
        let filters = FilterConfig {
            min_outlinks,
            largest_component,
            ..Default::default()
        };
        py.detach(|| {
            let corpus = Corpus::load(&path, &tokenize)?;
            build_network(&corpus, &filters)
        })
        .map(|(inner, _)| Self { inner })
        .map_err(err)
    }

    /// Read a network written by `save` or `mlsbm ingest`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(&path).map_err(|e| PyRuntimeError::new_err(format!("{}: {e}", path.display())))?;
        let inner = MultilayerNetwork::read_json(std::io::BufReader::new(f)).map_err(err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(&path).map_err(|e| PyRuntimeError::new_err(format!("{}: {e}", path.display())))?;
        self.inner.write_json(std::io::BufWriter::new(f), None).map_err(err)
    }

    #[getter]
    fn docs(&self) -> Vec<String> {
        self.inner.docs.clone()
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.inner.words.clone()
    }

    #[getter]
    fn tags(&self) -> Vec<String> {
        self.inner.tags.clone()
    }

    #[getter]
    fn n_hyperlinks(&self) -> usize {
        self.inner.hyperlinks.len()
    }

    #[getter]
    fn n_tokens(&self) -> u64 {
        self.inner.token_count()
    }

    /// Keep each token independently with probability `mu`.
    fn subsample_tokens(&self, py: Python<'_>, mu: f64, seed: u64) -> PyResult<Self> {
        let inner = py.detach(|| subsample_tokens(&self.inner, mu, seed)).map_err(err)?;
        Ok(Self { inner })
    }

    /// The subnetwork induced by the given document indices.
    fn restrict_docs(&self, keep: Vec<u32>) -> PyResult<Self> {
        let n = self.inner.docs.len() as u32;
        if let Some(&bad) = keep.iter().find(|&&d| d >= n) {
            return Err(PyValueError::new_err(format!(
                "document index {bad} out of range for {n} documents"
            )));
        }
        Ok(Self {
            inner: self.inner.restrict_docs(&keep),
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(docs={}, words={}, tags={}, hyperlinks={}, tokens={})",
            self.inner.docs.len(),
            self.inner.words.len(),
            self.inner.tags.len(),
            self.inner.hyperlinks.len(),
            self.inner.token_count()
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn mcmc_config(seed: u64, n_sweeps: usize, n_chains: usize, burn_in: usize, thin: usize, init: &str, beta: f64) -> PyResult<McmcConfig> {
    let init = match init {
        "agglomerative" => InitStrategy::Agglomerative,
        "singleton" => InitStrategy::Singleton,
        "random" => InitStrategy::Random,
        _ => return Err(PyValueError::new_err(format!("unknown init {init:?}"))),
    };
    let c = McmcConfig {
        seed,
        n_sweeps,
        n_chains,
        burn_in,
        thin,
        init,
        beta,
        ..Default::default()
    };
    c.validate().map_err(err)?;
    Ok(c)
}

fn labels_by_type(p: &Partition) -> Vec<(&'static str, Vec<u32>)> {
    NodeType::ALL
        .iter()
        .map(|&t| (t.as_str(), p.project(t).labels().to_vec()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

/// Minimum description length fit. Returns the fit summary with the best
/// partition as `labels` (per node type) and each chain's final partition
/// under `chain_labels`.
#[pyfunction]
#[pyo3(signature = (network, layers="H+T", tag_mode="fixed", seed=0, n_sweeps=100, n_chains=10, init="agglomerative", beta=1.0))]
#[allow(clippy::too_many_arguments)]
fn fit<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    layers: &str,
    tag_mode: &str,
    seed: u64,
    n_sweeps: usize,
    n_chains: usize,
    init: &str,
    beta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let layers: LayerSet = parse(layers)?;
    let tag_mode: TagMode = parse(tag_mode)?;
    let config = mcmc_config(seed, n_sweeps, n_chains, 0, 1, init, beta)?;
    let fit = py
        .detach(|| core::fit_mdl(&network.inner, layers, tag_mode, &config))
        .map_err(err)?;
    let out = to_py(py, &fit)?;
    let labels: std::collections::BTreeMap<_, _> = labels_by_type(&fit.partition).into_iter().collect();
    out.set_item("labels", to_py(py, &labels)?)?;
    let chains: Vec<std::collections::BTreeMap<_, _>> = fit
        .chain_partitions
        .iter()
        .map(|p| labels_by_type(p).into_iter().collect())
        .collect();
    out.set_item("chain_labels", to_py(py, &chains)?)?;
    Ok(out)
}

/// Thinned posterior samples: a list of dicts with `labels`, `dl`, `chain`
/// and `sweep`.
#[pyfunction]
#[pyo3(signature = (network, layers="H+T", tag_mode="fixed", seed=0, n_sweeps=100, n_chains=2, burn_in=100, thin=10, beta=1.0))]
#[allow(clippy::too_many_arguments)]
fn sample_posterior<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    layers: &str,
    tag_mode: &str,
    seed: u64,
    n_sweeps: usize,
    n_chains: usize,
    burn_in: usize,
    thin: usize,
    beta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let layers: LayerSet = parse(layers)?;
    let tag_mode: TagMode = parse(tag_mode)?;
    let config = mcmc_config(seed, n_sweeps, n_chains, burn_in, thin, "agglomerative", beta)?;
    let samples = py
        .detach(|| core::sample_posterior(&network.inner, layers, tag_mode, &config))
        .map_err(err)?;
    #[derive(Serialize)]
    struct Sample {
        labels: std::collections::BTreeMap<&'static str, Vec<u32>>,
        dl: f64,
        chain: usize,
        sweep: usize,
    }
    let out: Vec<Sample> = samples
        .iter()
        .map(|s| Sample {
            labels: labels_by_type(&s.partition).into_iter().collect(),
            dl: s.dl,
            chain: s.chain_id,
            sweep: s.sweep_index,
        })
        .collect();
    to_py(py, &out)
}

/// Description length (nats) of a partition given as per-type label lists.
#[pyfunction]
#[pyo3(signature = (network, labels, layers="H+T", tag_mode="fixed"))]
fn description_length<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    labels: std::collections::HashMap<String, Vec<u32>>,
    layers: &str,
    tag_mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let layers: LayerSet = parse(layers)?;
    let tag_mode: TagMode = parse(tag_mode)?;
    let graph = std::sync::Arc::new(core::ModelGraph::from_network(&network.inner, layers, tag_mode));
    let mut all = graph.trivial_partition().labels().to_vec();
    let types = graph.node_types().to_vec();
    for (name, ls) in &labels {
        let t = NodeType::parse(name).ok_or_else(|| PyValueError::new_err(format!("unknown node type {name:?}")))?;
        let nodes: Vec<usize> = (0..types.len()).filter(|&v| types[v] == t).collect();
        if nodes.len() != ls.len() {
            return Err(PyValueError::new_err(format!(
                "{} {name} labels for {} nodes",
                ls.len(),
                nodes.len()
            )));
        }
        // Shift past the default labels and keep node types disjoint.
        let n = types.len() as u32;
        if let Some(&l) = ls.iter().find(|&&l| l >= n) {
            return Err(PyValueError::new_err(format!("{name} label {l} exceeds the node count {n}")));
        }
        for (&v, &l) in nodes.iter().zip(ls) {
            all[v] = n * (t.index() as u32 + 1) + l;
        }
    }
    let p = Partition::new(all, types).map_err(err)?;
    let state = core::BlockState::from_partition(graph, &p).map_err(err)?;
    to_py(py, &core::likelihood::description_length(&state))
}

/// Plurality-vote consensus of aligned partitions of the same nodes.
#[pyfunction]
fn consensus<'py>(py: Python<'py>, partitions: Vec<Vec<u32>>) -> PyResult<Bound<'py, PyAny>> {
    let parts: Vec<Partition> = partitions.into_iter().map(|l| Partition::of_type(l, NodeType::Doc)).collect();
    let c = py.detach(|| core::consensus(&parts)).map_err(err)?;
    let out = to_py(py, &c)?;
    out.set_item("labels", c.partition.labels().to_vec())?;
    Ok(out)
}

/// Maximum overlap under the best label bijection.
#[pyfunction]
fn max_overlap<'py>(py: Python<'py>, x: Vec<u32>, y: Vec<u32>) -> PyResult<Bound<'py, PyAny>> {
    let r = core::max_overlap(&Partition::of_type(x, NodeType::Doc), &Partition::of_type(y, NodeType::Doc)).map_err(err)?;
    to_py(py, &r)
}

/// Topics (word groups), their top words, and per-document-group mixtures.
#[pyfunction]
#[pyo3(signature = (network, doc_labels, word_labels, top_n=20))]
fn topic_report<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    doc_labels: Vec<u32>,
    word_labels: Vec<u32>,
    top_n: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = topic_report_from_labels(&network.inner, &doc_labels, &word_labels, top_n).map_err(err)?;
    to_py(py, &r)
}

/// Paired t-test on per-repeat AUC differences `a - b`.
#[pyfunction]
fn paired_ttest<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &delta_auc_ttest(&a, &b).map_err(err)?)
}

/// Welch's unequal-variance t-test of `mean(a) - mean(b)`.
#[pyfunction(name = "welch_ttest")]
fn welch<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &welch_ttest(&a, &b).map_err(err)?)
}

/// Area under the ROC curve, ties counted half.
#[pyfunction]
fn auc(positives: Vec<f64>, negatives: Vec<f64>) -> PyResult<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(PyValueError::new_err("need at least one positive and one negative score"));
    }
    Ok(core::linkpred::auc(&positives, &negatives))
}

/// Held-out hyperlink AUC for each model over shared holdouts.
#[pyfunction]
#[pyo3(signature = (network, models, holdout=0.1, repeats=20, seed=0, tag_mode="fixed", n_sweeps=100, n_chains=2, burn_in=50, thin=10))]
#[allow(clippy::too_many_arguments)]
fn evaluate_auc<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    models: Vec<String>,
    holdout: f64,
    repeats: usize,
    seed: u64,
    tag_mode: &str,
    n_sweeps: usize,
    n_chains: usize,
    burn_in: usize,
    thin: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let models = models.iter().map(|m| parse::<LayerSet>(m)).collect::<PyResult<Vec<_>>>()?;
    let config = core::LinkPredConfig {
        holdout,
        repeats,
        seed,
        tag_mode: parse(tag_mode)?,
        mcmc: mcmc_config(0, n_sweeps, n_chains, burn_in, thin, "agglomerative", 1.0)?,
    };
    let r = py.detach(|| core::evaluate_auc(&network.inner, &models, &config)).map_err(err)?;
    to_py(py, &r)
}

/// Average degrees of document subsamples and the fitted growth exponents.
#[pyfunction]
#[pyo3(signature = (network, sizes, repeats=10, seed=0, fit_min_docs=0))]
fn degree_scaling<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    sizes: Vec<usize>,
    repeats: usize,
    seed: u64,
    fit_min_docs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| core::degree_scaling(&network.inner, &sizes, repeats, seed, fit_min_docs))
        .map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
fn mlsbm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(sample_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(description_length, m)?)?;
    m.add_function(wrap_pyfunction!(consensus, m)?)?;
    m.add_function(wrap_pyfunction!(max_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(topic_report, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(welch, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_auc, m)?)?;
    m.add_function(wrap_pyfunction!(degree_scaling, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
