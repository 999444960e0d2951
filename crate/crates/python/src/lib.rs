//! Python bindings: embedding I/O, the gender direction and bias measures,
//! vocabulary classification, neighbour search, the proximity-bias network
//! metrics, the debiasing optimizer and the intrinsic evaluation suite.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;

use ran_debias::debias as rd_debias;
use ran_debias::embedding as rd_embedding;
use ran_debias::eval as rd_eval;
use ran_debias::geometry as rd_geometry;
use ran_debias::gipe as rd_gipe;
use ran_debias::kbc as rd_kbc;
use ran_debias::neighbours as rd_neighbours;

fn err(e: ran_debias::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A vocabulary plus one dense vector per word.
#[pyclass(frozen)]
struct Embedding {
    inner: rd_embedding::EmbeddingSet,
}

#[pymethods]
impl Embedding {
    /// Load the text format (`token c1 c2 ... ch` per line).
    #[staticmethod]
    #[pyo3(signature = (path, expected_dim=None))]
    fn load(path: PathBuf, expected_dim: Option<usize>) -> PyResult<Self> {
        let outcome = rd_embedding::load_embedding_file(&path, expected_dim).map_err(err)?;
        Ok(Self { inner: outcome.set })
    }

    #[pyo3(signature = (path, precision=6))]
    fn save(&self, path: PathBuf, precision: usize) -> PyResult<()> {
        rd_embedding::save_embedding_file(&self.inner, &path, precision).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn words(&self) -> Vec<String> {
        self.inner.vocab().words().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.inner.vocab().contains(token)
    }

    fn vector(&self, token: &str) -> PyResult<Vec<f64>> {
        self.inner
            .vector(token)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyKeyError::new_err(token.to_string()))
    }

    fn unit_normalized(&self) -> PyResult<Embedding> {
        Ok(Embedding {
            inner: self.inner.unit_normalized().map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Embedding({} words, dim {})", self.inner.len(), self.inner.dim())
    }
}

/// Unit vector for the feminine<->masculine axis.
#[pyclass(frozen)]
struct Direction {
    inner: rd_geometry::GenderDirection,
}

#[pymethods]
impl Direction {
    #[getter]
    fn vector(&self) -> Vec<f64> {
        self.inner.vector().to_vec()
    }

    #[getter]
    fn source_pairs(&self) -> Vec<(String, String)> {
        self.inner.source_pairs().to_vec()
    }
}

/// First principal component of the pair difference vectors. `pairs`
/// defaults to the built-in ten (female, male) pairs.
#[pyfunction]
#[pyo3(signature = (embedding, pairs=None))]
fn gender_direction(embedding: &Embedding, pairs: Option<Vec<(String, String)>>) -> PyResult<Direction> {
    let pairs = pairs.unwrap_or_else(rd_geometry::default_gender_pairs);
    Ok(Direction {
        inner: rd_geometry::GenderDirection::compute(&embedding.inner, &pairs).map_err(err)?,
    })
}

/// `|cos(w, g)|^strictness` for a token.
#[pyfunction]
#[pyo3(signature = (embedding, token, direction, strictness=1.0))]
fn direct_bias(
    embedding: &Embedding,
    token: &str,
    direction: &Direction,
    strictness: f64,
) -> PyResult<f64> {
    let params = rd_geometry::DirectBiasParams::new(strictness).map_err(err)?;
    let w = embedding.inner.require_vector(token).map_err(err)?;
    rd_geometry::direct_bias(w, &direction.inner, &params).map_err(err)
}

/// Indirect bias between two tokens; raises when undefined for the pair.
#[pyfunction]
fn indirect_bias(
    embedding: &Embedding,
    first: &str,
    second: &str,
    direction: &Direction,
) -> PyResult<f64> {
    let w = embedding.inner.require_vector(first).map_err(err)?;
    let v = embedding.inner.require_vector(second).map_err(err)?;
    rd_geometry::indirect_bias(w, v, &direction.inner).map_err(err)
}

/// Preserve/debias partition with per-token stage labels.
#[pyclass(frozen)]
struct Classification {
    inner: rd_kbc::Classification,
}

#[pymethods]
impl Classification {
    #[getter]
    fn preserve(&self) -> Vec<String> {
        let mut v: Vec<String> = self.inner.preserve().iter().cloned().collect();
        v.sort_unstable();
        v
    }

    #[getter]
    fn debias(&self) -> Vec<String> {
        let mut v: Vec<String> = self.inner.debias().iter().cloned().collect();
        v.sort_unstable();
        v
    }

    fn stage(&self, token: &str) -> PyResult<&'static str> {
        self.inner
            .stage(token)
            .map(rd_kbc::Stage::label)
            .ok_or_else(|| PyKeyError::new_err(token.to_string()))
    }

    fn stage_counts(&self) -> HashMap<&'static str, usize> {
        self.inner
            .stage_counts()
            .into_iter()
            .map(|(s, c)| (s.label(), c))
            .collect()
    }

    /// Build from explicit token lists instead of running the classifier.
    #[staticmethod]
    fn from_sets(preserve: HashSet<String>, debias: HashSet<String>) -> PyResult<Self> {
        Ok(Self {
            inner: rd_kbc::Classification::from_sets(preserve, debias).map_err(err)?,
        })
    }
}

/// Run the staged knowledge-based classifier. Each dictionary is a mapping
/// headword -> definition text.
#[pyfunction]
#[pyo3(signature = (embedding, dictionaries, stop_words=None, seed=None, names=None))]
fn classify(
    embedding: &Embedding,
    dictionaries: Vec<HashMap<String, String>>,
    stop_words: Option<HashSet<String>>,
    seed: Option<HashSet<String>>,
    names: Option<HashSet<String>>,
) -> PyResult<Classification> {
    let lists = rd_kbc::WordLists::new(
        stop_words.unwrap_or_default(),
        seed.unwrap_or_else(rd_kbc::default_seed_set),
        names.unwrap_or_default(),
    )
    .map_err(err)?;
    let dicts = dictionaries
        .into_iter()
        .enumerate()
        .map(|(i, entries)| rd_kbc::Dictionary::from_entries(format!("dict{i}"), entries))
        .collect();
    let kb = rd_kbc::KnowledgeBase::new(dicts).map_err(err)?;
    Ok(Classification {
        inner: rd_kbc::classify_vocabulary(embedding.inner.vocab(), &lists, &kb),
    })
}

/// Exact top-k cosine neighbours for each query word.
#[pyfunction]
#[pyo3(signature = (embedding, words, k=100))]
fn top_k_neighbours(
    embedding: &Embedding,
    words: Vec<String>,
    k: usize,
) -> PyResult<HashMap<String, Vec<(String, f64)>>> {
    let table = rd_neighbours::top_k_neighbours(&embedding.inner, &words, k).map_err(err)?;
    Ok(table
        .entries()
        .map(|(w, l)| (w.clone(), l.to_vec()))
        .collect())
}

/// Per-word proximity-bias report plus the embedding-level estimate.
#[pyclass(frozen)]
struct GipeReport {
    #[pyo3(get)]
    gipe: f64,
    #[pyo3(get)]
    theta_s: f64,
    #[pyo3(get)]
    epsilon: f64,
    /// token -> (eta, gamma, biased_out, in_biased, in_total)
    #[pyo3(get)]
    per_word: HashMap<String, (f64, f64, usize, usize, usize)>,
}

/// Build the bias network for `words` and compute the illicit-proximity
/// estimate. For a debiased embedding pass the original as `reference`.
#[pyfunction]
#[pyo3(signature = (embedding, words, direction, reference=None, n=100, theta_s=0.05, epsilon=1e-6))]
#[allow(clippy::too_many_arguments)]
fn gipe(
    embedding: &Embedding,
    words: Vec<String>,
    direction: &Direction,
    reference: Option<&Embedding>,
    n: usize,
    theta_s: f64,
    epsilon: f64,
) -> PyResult<GipeReport> {
    let reference_set = reference.map(|e| &e.inner).unwrap_or(&embedding.inner);
    let net = rd_gipe::BiasNetwork::build(&embedding.inner, reference_set, &words, n, &direction.inner)
        .map_err(err)?;
    let report = rd_gipe::gipe(&net, theta_s, epsilon).map_err(err)?;
    Ok(GipeReport {
        gipe: report.gipe,
        theta_s: report.theta_s,
        epsilon: report.epsilon,
        per_word: report
            .per_word
            .into_iter()
            .map(|w| {
                (
                    w.token,
                    (w.eta, w.gamma, w.biased_neighbours, w.incoming_biased, w.incoming_total),
                )
            })
            .collect(),
    })
}

/// Debiased embedding plus per-word optimization trace.
#[pyclass(frozen)]
struct DebiasOutcome {
    #[pyo3(get)]
    embedding: Py<Embedding>,
    /// token -> (initial objective, final objective, steps)
    #[pyo3(get)]
    trace: HashMap<String, (f64, f64, usize)>,
    /// token -> failure reason (vector left unchanged)
    #[pyo3(get)]
    failures: HashMap<String, String>,
}

/// Optimize every debias-set word against the weighted repulsion /
/// attraction / neutralization objective.
#[pyfunction]
#[pyo3(signature = (embedding, classification, direction, weights=(0.125, 0.75, 0.125),
                    theta_r=0.05, k=100, learning_rate=0.01, max_steps=300, tolerance=1e-8))]
#[allow(clippy::too_many_arguments)]
fn debias(
    py: Python<'_>,
    embedding: &Embedding,
    classification: &Classification,
    direction: &Direction,
    weights: (f64, f64, f64),
    theta_r: f64,
    k: usize,
    learning_rate: f64,
    max_steps: usize,
    tolerance: f64,
) -> PyResult<DebiasOutcome> {
    let cfg = rd_debias::DebiasConfig {
        weights: rd_debias::ObjectiveWeights::new(weights.0, weights.1, weights.2).map_err(err)?,
        theta_r,
        k,
        optimizer: rd_debias::OptimizerConfig {
            learning_rate,
            max_steps,
            tolerance,
            ..rd_debias::OptimizerConfig::default()
        },
    };
    let result = py
        .detach(|| rd_debias::debias_all(&embedding.inner, &classification.inner, &direction.inner, &cfg))
        .map_err(err)?;
    Ok(DebiasOutcome {
        embedding: Py::new(
            py,
            Embedding {
                inner: result.debiased,
            },
        )?,
        trace: result
            .trace
            .into_iter()
            .map(|(t, e)| (t, (e.initial_objective, e.final_objective, e.steps)))
            .collect(),
        failures: result.failures.into_iter().collect(),
    })
}

/// 3CosMul analogy: "p is to q as r is to ?".
#[pyfunction]
#[pyo3(signature = (embedding, p, q, r, eps=0.001))]
fn solve_analogy(embedding: &Embedding, p: &str, q: &str, r: &str, eps: f64) -> PyResult<String> {
    rd_eval::solve_analogy_3cosmul(&embedding.inner, p, q, r, eps).map_err(err)
}

/// Gender relational analogy percentages from an instance file:
/// (definition, stereotype, none, evaluated, skipped).
#[pyfunction]
fn sembias_eval(embedding: &Embedding, path: PathBuf) -> PyResult<(f64, f64, f64, usize, usize)> {
    let file = File::open(&path).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let instances = rd_eval::load_sembias(BufReader::new(file)).map_err(err)?;
    let s = rd_eval::sembias_eval(&embedding.inner, &instances).map_err(err)?;
    Ok((s.definition_pct, s.stereotype_pct, s.none_pct, s.evaluated, s.skipped))
}

/// Analogy accuracy over a Google- or MSR-format file:
/// (accuracy, correct, answered, skipped).
#[pyfunction]
#[pyo3(signature = (embedding, path, msr_format=false, eps=0.001))]
fn analogy_eval(
    embedding: &Embedding,
    path: PathBuf,
    msr_format: bool,
    eps: f64,
) -> PyResult<(f64, usize, usize, usize)> {
    let file = File::open(&path).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sections = if msr_format {
        rd_eval::load_msr_analogies(BufReader::new(file)).map_err(err)?
    } else {
        rd_eval::load_google_analogies(BufReader::new(file)).map_err(err)?
    };
    let report = rd_eval::analogy_accuracy(&embedding.inner, &sections, eps).map_err(err)?;
    Ok((report.accuracy, report.correct, report.answered, report.skipped))
}

/// Spearman correlation between model cosines and human ratings from an
/// `a b score` file: (rho, used, skipped).
#[pyfunction]
fn similarity_eval(embedding: &Embedding, path: PathBuf) -> PyResult<(f64, usize, usize)> {
    let file = File::open(&path).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let pairs = rd_eval::load_similarity_pairs(BufReader::new(file)).map_err(err)?;
    let report = rd_eval::similarity_spearman(&embedding.inner, &pairs).map_err(err)?;
    Ok((report.rho, report.used, report.skipped))
}

#[pymodule]
fn randebias(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Embedding>()?;
    m.add_class::<Direction>()?;
    m.add_class::<Classification>()?;
    m.add_class::<GipeReport>()?;
    m.add_class::<DebiasOutcome>()?;
    m.add_function(wrap_pyfunction!(gender_direction, m)?)?;
    m.add_function(wrap_pyfunction!(direct_bias, m)?)?;
    m.add_function(wrap_pyfunction!(indirect_bias, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(top_k_neighbours, m)?)?;
    m.add_function(wrap_pyfunction!(gipe, m)?)?;
    m.add_function(wrap_pyfunction!(debias, m)?)?;
    m.add_function(wrap_pyfunction!(solve_analogy, m)?)?;
    m.add_function(wrap_pyfunction!(sembias_eval, m)?)?;
    m.add_function(wrap_pyfunction!(analogy_eval, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_eval, m)?)?;
    m.add("DEFAULT_GENDER_PAIRS", rd_geometry::default_gender_pairs())?;
    m.add("DEFAULT_SEED_WORDS", rd_kbc::default_seed_set())?;
    Ok(())
}
