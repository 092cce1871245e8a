//! Python bindings: `import augsearch`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use augsearch_core::controller::{Controller as CoreController, ControllerConfig, ControllerMode};
use augsearch_core::corpus::{self, Context as CoreContext, Item, Lexicons as CoreLexicons};
use augsearch_core::harness::load_lexicons;
use augsearch_core::ops::OperationType;
use augsearch_core::policy::{self, Policy as CorePolicy, PolicyDocument};
use augsearch_core::reward::{self, ActivityEntityLexicon};
use augsearch_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Tagging lexicons plus the activity/entity term lists.
#[pyclass(frozen)]
struct Lexicons {
    lex: CoreLexicons,
    terms: ActivityEntityLexicon,
}

#[pymethods]
impl Lexicons {
    /// Loads a lexicon directory, or the bundled lexicons when `path` is None.
    #[new]
    #[pyo3(signature = (path=None))]
    fn new(path: Option<PathBuf>) -> PyResult<Self> {
        let (lex, terms) = load_lexicons(path.as_deref()).map_err(py_err)?;
        Ok(Lexicons { lex, terms })
    }

    fn is_activity(&self, word: &str) -> bool {
        self.terms.is_activity(word)
    }

    fn is_entity(&self, word: &str) -> bool {
        self.terms.is_entity(word)
    }
}

/// A tokenized source context.
#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct Context {
    inner: CoreContext,
}

#[pymethods]
impl Context {
    /// `(text, tag)` per item; markers have tag None.
    fn items(&self) -> Vec<(String, Option<&'static str>)> {
        self.inner
            .items()
            .iter()
            .map(|item| match item {
                Item::Word(t) => (t.surface().to_string(), Some(t.tag.as_str())),
                Item::Marker(b) => (b.marker().to_string(), None),
            })
            .collect()
    }

    fn word_count(&self) -> usize {
        self.inner.word_count()
    }

    fn detokenize(&self) -> String {
        self.inner.detokenize()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.detokenize()
    }
}

#[pyfunction]
fn tokenize(text: &str, lexicons: &Lexicons) -> Context {
    Context {
        inner: corpus::tokenize(text, &lexicons.lex),
    }
}

/// Four sub-policies of two operations each.
#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct Policy {
    inner: CorePolicy,
}

#[pymethods]
impl Policy {
    /// Parses compact text (one or four sub-policies) or a JSON document.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = policy::parse_policy_file(text).map_err(py_err)?;
        Ok(Policy { inner })
    }

    /// Builds a policy from its 24 slot indices.
    #[staticmethod]
    fn from_indices(indices: Vec<usize>) -> PyResult<Self> {
        let inner = CorePolicy::from_indices(&indices).map_err(py_err)?;
        Ok(Policy { inner })
    }

    fn encode(&self) -> Vec<usize> {
        self.inner.to_indices()
    }

    fn compact(&self) -> String {
        self.inner.to_compact()
    }

    fn table(&self) -> String {
        policy::render_table(std::slice::from_ref(&self.inner))
    }

    fn to_json(&self) -> String {
        PolicyDocument::from_policy(&self.inner).to_json()
    }

    /// `[[(op, n, p), (op, n, p)], ...]`
    fn sub_policies(&self) -> Vec<Vec<(&'static str, usize, f64)>> {
        self.inner
            .sub_policies
            .iter()
            .map(|sub| {
                sub.ops
                    .iter()
                    .map(|op| (op.op_type.mnemonic(), op.n_changes(), op.probability.value()))
                    .collect()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Policy('{}')", self.inner.to_compact())
    }
}

/// Augments corpus lines (`source<TAB>target` or bare sources). Returns the
/// augmented lines and per-operation `(drawn, fired, changes)` counts.
#[pyfunction]
fn augment<'py>(
    py: Python<'py>,
    lines: Vec<String>,
    policy: &Policy,
    lexicons: &Lexicons,
    seed: u64,
) -> PyResult<(Vec<String>, Bound<'py, PyDict>)> {
    let examples = corpus::parse_corpus(&lines.join("\n"), &lexicons.lex);
    let augmented = policy::augment_corpus(&examples, &policy.inner, &lexicons.lex, seed);
    let stats = PyDict::new(py);
    for op_type in OperationType::ALL {
        let s = augmented.stats.get(op_type);
        if s.drawn > 0 {
            stats.set_item(op_type.mnemonic(), (s.drawn, s.fired, s.changes))?;
        }
    }
    let out = augmented.examples.iter().map(|e| e.to_line()).collect();
    Ok((out, stats))
}

#[pyfunction]
fn search_space_size() -> u128 {
    policy::search_space_size()
}

#[pyfunction]
fn f1(pred: Vec<String>, gold: Vec<String>) -> f64 {
    reward::f1(&pred.into_iter().collect(), &gold.into_iter().collect())
}

#[pyfunction]
fn weighted_reward(activity_f1: f64, entity_f1: f64) -> f64 {
    reward::weighted_reward(activity_f1, entity_f1)
}

/// Macro activity/entity F1 of aligned responses, as a dict.
#[pyfunction]
fn corpus_f1<'py>(
    py: Python<'py>,
    responses: Vec<String>,
    golds: Vec<String>,
    lexicons: &Lexicons,
) -> PyResult<Bound<'py, PyDict>> {
    let report = reward::corpus_f1(&responses, &golds, &lexicons.terms).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("activity_f1", report.activity_f1)?;
    out.set_item("entity_f1", report.entity_f1)?;
    out.set_item("weighted", report.weighted)?;
    out.set_item("examples", report.examples)?;
    Ok(out)
}

/// The policy controller. Sampling is seeded per call.
#[pyclass(frozen)]
struct Controller {
    inner: CoreController,
}

#[pymethods]
impl Controller {
    #[new]
    #[pyo3(signature = (mode="agnostic", seed=0, hidden=64, embed=32))]
    fn new(mode: &str, seed: u64, hidden: usize, embed: usize) -> PyResult<Self> {
        let mode: ControllerMode = mode.parse().map_err(PyValueError::new_err)?;
        let config = ControllerConfig {
            hidden,
            embed,
            ..ControllerConfig::with_mode(mode)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = CoreController::new(config, &mut rng).map_err(py_err)?;
        Ok(Controller { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = CoreController::load(&path).map_err(py_err)?;
        Ok(Controller { inner })
    }

    fn parameter_count(&self) -> usize {
        self.inner.parameter_count()
    }

    /// Samples a policy; returns it with its log-probability.
    #[pyo3(signature = (seed, source=None))]
    fn sample(&self, seed: u64, source: Option<&Context>) -> PyResult<(Policy, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let record = self
            .inner
            .sample_policy(source.map(|c| &c.inner), &mut rng)
            .map_err(py_err)?;
        Ok((Policy { inner: record.policy }, record.sample.log_prob()))
    }

    #[pyo3(signature = (policy, source=None))]
    fn log_prob(&self, policy: &Policy, source: Option<&Context>) -> PyResult<f64> {
        self.inner
            .log_prob(&policy.inner.to_indices(), source.map(|c| &c.inner))
            .map_err(py_err)
    }
}

#[pymodule]
fn augsearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lexicons>()?;
    m.add_class::<Context>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Controller>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(augment, m)?)?;
    m.add_function(wrap_pyfunction!(search_space_size, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_reward, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_f1, m)?)?;
    Ok(())
}
