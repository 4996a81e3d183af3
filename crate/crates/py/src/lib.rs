//! Python bindings: text utilities, corpus generation and ingest, queries
//! over an index directory, working sets and the task judge.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vidseek::config::EngineConfig;
use vidseek::harness::{self, ScoringConfig, Submission, Target, TaskKind, TaskSpec};
use vidseek::ingest::Category;
use vidseek::query::{QuerySpec, ScoredResult, TextClause, VisualClause};
use vidseek::session::{ColorTag, Origin};
use vidseek::store::{self, AnnotationSource, IngestOptions};
use vidseek::synth::{self, SynthParams};

create_exception!(pyvidseek, VidseekError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    VidseekError::new_err(e.to_string())
}

fn category(name: &str) -> PyResult<Category> {
    name.parse().map_err(err)
}

/// Levenshtein distance over Unicode scalar values.
#[pyfunction]
fn edit_distance(a: &str, b: &str) -> usize {
    vidseek::edit_distance(a, b)
}

/// Case-folded tokens with surrounding punctuation removed.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    vidseek::text::tokenize(text)
}

/// Writes the deterministic synthetic corpus to `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = synth::DEFAULT_SEED))]
fn generate_corpus(out_dir: PathBuf, seed: u64) -> PyResult<()> {
    synth::generate(&SynthParams {
        seed,
        ..SynthParams::default()
    })
    .write(&out_dir)
    .map_err(err)
}

/// Builds an index directory. `annotations` is a fixture file path.
#[pyfunction]
#[pyo3(signature = (catalog_dir, out_dir, asr = None, annotations = None, tau_asr = None, thumbnails = true))]
fn ingest<'py>(
    py: Python<'py>,
    catalog_dir: PathBuf,
    out_dir: PathBuf,
    asr: Option<PathBuf>,
    annotations: Option<PathBuf>,
    tau_asr: Option<f64>,
    thumbnails: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut config = EngineConfig::default();
    if let Some(t) = tau_asr {
        config.text.asr.tau = t;
    }
    let opts = IngestOptions {
        catalog_dir,
        asr_file: asr,
        annotations: annotations.map_or(AnnotationSource::None, AnnotationSource::Fixture),
        annotation_budget: None,
        annotation_cache: None,
        config,
        out_dir,
        thumbnails,
    };
    let summary = py.detach(|| store::run_ingest(&opts)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("videos", summary.videos)?;
    d.set_item("segments", summary.segments)?;
    d.set_item("asr_words_kept", summary.asr_words_kept)?;
    d.set_item("documents", summary.documents)?;
    d.set_item("features", summary.features)?;
    d.set_item("elapsed_ms", summary.elapsed_ms)?;
    Ok(d)
}

fn ranked(results: Vec<ScoredResult>) -> Vec<(String, f64)> {
    results.into_iter().map(|r| (r.segment_id, r.score)).collect()
}

/// A loaded index directory.
#[pyclass(frozen)]
struct Corpus {
    inner: store::Corpus,
}

#[pymethods]
impl Corpus {
    #[new]
    fn new(index_dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: store::Corpus::open(&index_dir, None).map_err(err)?,
        })
    }

    #[getter]
    fn video_ids(&self) -> Vec<String> {
        self.inner.catalog.videos().iter().map(|v| v.video_id.clone()).collect()
    }

    #[getter]
    fn segment_count(&self) -> usize {
        self.inner.catalog.segments().len()
    }

    /// `(video_id, start_ms, end_ms, ordinal)` of a segment.
    fn segment(&self, segment_id: &str) -> PyResult<(String, u64, u64, u32)> {
        let s = self
            .inner
            .catalog
            .segment(segment_id)
            .ok_or_else(|| err(format!("unknown segment {segment_id:?}")))?;
        Ok((s.video_id.clone(), s.start_ms, s.end_ms, s.ordinal))
    }

    fn segments_of_video(&self, video_id: &str) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .catalog
            .segments_of_video(video_id)
            .map_err(err)?
            .iter()
            .map(|s| s.segment_id.clone())
            .collect())
    }

    #[pyo3(signature = (segment_id, radius = 1))]
    fn neighbors(&self, segment_id: &str, radius: u32) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .catalog
            .neighbors(segment_id, radius)
            .map_err(err)?
            .into_iter()
            .map(|s| s.segment_id.clone())
            .collect())
    }

    fn vocabulary(&self, category_name: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.index.vocabulary(category(category_name)?).to_vec())
    }

    /// One text clause; the same ranking as the `query` command line.
    #[pyo3(signature = (category_name, text, max_edits = None, k = 20))]
    fn search(&self, category_name: &str, text: &str, max_edits: Option<u8>, k: usize) -> PyResult<Vec<(String, f64)>> {
        let spec = QuerySpec {
            text_clauses: vec![TextClause {
                category: category(category_name)?,
                text: text.to_string(),
                max_edits,
            }],
            visual: None,
            weights: None,
            k,
        };
        self.inner.context().execute(&spec).map(ranked).map_err(err)
    }

    /// Fused query. `text` is a list of `(category, text)` pairs; `example`
    /// a segment id used as the visual probe.
    #[pyo3(signature = (text = Vec::new(), example = None, weights = None, k = 20))]
    fn query(
        &self,
        text: Vec<(String, String)>,
        example: Option<String>,
        weights: Option<Vec<f64>>,
        k: usize,
    ) -> PyResult<Vec<(String, f64, Vec<f64>)>> {
        let text_clauses = text
            .into_iter()
            .map(|(c, t)| {
                Ok(TextClause {
                    category: category(&c)?,
                    text: t,
                    max_edits: None,
                })
            })
            .collect::<PyResult<_>>()?;
        let spec = QuerySpec {
            text_clauses,
            visual: example.map(|segment_id| VisualClause::Example { segment_id }),
            weights,
            k,
        };
        let results = self.inner.context().execute(&spec).map_err(err)?;
        Ok(results
            .into_iter()
            .map(|r| (r.segment_id, r.score, r.breakdown))
            .collect())
    }
}

/// An operator's working set.
#[pyclass]
struct WorkingSet {
    inner: vidseek::WorkingSet,
}

#[pymethods]
impl WorkingSet {
    #[new]
    #[pyo3(signature = (session_id = "local"))]
    fn new(session_id: &str) -> Self {
        Self {
            inner: vidseek::WorkingSet::new(session_id),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn seed(&mut self, results: Vec<(String, f64)>) {
        let results: Vec<ScoredResult> = results.into_iter().map(|(id, s)| ScoredResult::single(id, s)).collect();
        self.inner.seed(&results);
    }

    #[pyo3(signature = (corpus, segment_id, radius = 1))]
    fn expand_neighbors(&mut self, corpus: &Corpus, segment_id: &str, radius: u32) -> PyResult<usize> {
        self.inner
            .expand_neighbors(&corpus.inner.catalog, segment_id, radius)
            .map_err(err)
    }

    fn expand_video(&mut self, corpus: &Corpus, video_id: &str) -> PyResult<usize> {
        self.inner.expand_video(&corpus.inner.catalog, video_id).map_err(err)
    }

    /// Sets one of red, orange, yellow, green, blue, purple; `None` clears.
    #[pyo3(signature = (segment_id, color = None))]
    fn tag(&mut self, segment_id: &str, color: Option<&str>) -> PyResult<()> {
        let color: Option<ColorTag> = color.map(str::parse).transpose().map_err(err)?;
        self.inner.tag(segment_id, color).map_err(err)
    }

    /// `(segment_id, score, origin, tag)` in working-set order.
    fn entries(&self) -> Vec<(String, f64, &'static str, Option<&'static str>)> {
        self.inner
            .entries()
            .iter()
            .map(|e| {
                let origin = match e.origin {
                    Origin::Query => "query",
                    Origin::Expansion => "expansion",
                };
                (
                    e.segment_id.clone(),
                    e.score,
                    origin,
                    self.inner.tag_of(&e.segment_id).map(ColorTag::as_str),
                )
            })
            .collect()
    }

    /// `(video_id, best_score, [segment_id, ...])`, best video first.
    fn grouped(&self, corpus: &Corpus) -> Vec<(String, f64, Vec<String>)> {
        self.inner
            .group_by_video(&corpus.inner.catalog)
            .groups
            .into_iter()
            .map(|g| {
                (
                    g.video_id,
                    g.best_score,
                    g.segments.into_iter().map(|s| s.segment_id).collect(),
                )
            })
            .collect()
    }
}

/// Judges one submission. `targets` are `(video_id, start_ms, end_ms)`
/// half-open ranges. Returns `(correct, score_delta)`.
#[pyfunction]
#[pyo3(signature = (kind, duration_ms, targets, video_id, position_ms, elapsed_ms, prior_wrong = 0))]
fn judge(
    kind: &str,
    duration_ms: u64,
    targets: Vec<(String, u64, u64)>,
    video_id: String,
    position_ms: u64,
    elapsed_ms: u64,
    prior_wrong: u32,
) -> PyResult<(bool, f64)> {
    let kind = match kind {
        "kis_textual" => TaskKind::KisTextual,
        "kis_visual" => TaskKind::KisVisual,
        "avs" => TaskKind::Avs,
        other => return Err(err(format!("unknown task kind {other:?}"))),
    };
    let task = TaskSpec {
        task_id: "task".into(),
        kind,
        duration_ms,
        targets: targets
            .into_iter()
            .map(|(video_id, start_ms, end_ms)| Target {
                video_id,
                start_ms,
                end_ms,
            })
            .collect(),
        hint: None,
    };
    task.validate().map_err(err)?;
    let sub = Submission {
        task_id: "task".into(),
        video_id,
        position_ms,
        elapsed_ms,
    };
    let v = ScoringConfig::default()
        .judge(&task, &sub, prior_wrong, &BTreeSet::new())
        .map_err(err)?;
    Ok((v.correct, v.score_delta))
}

/// Scores a session log against a task file; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (tasks_file, session_log, scoring_file = None))]
fn evaluate(tasks_file: PathBuf, session_log: PathBuf, scoring_file: Option<PathBuf>) -> PyResult<String> {
    let scoring = match scoring_file {
        Some(p) => ScoringConfig::load(&p).map_err(err)?,
        None => ScoringConfig::default(),
    };
    harness::evaluate_log(&tasks_file, &session_log, &scoring)
        .map(|r| r.to_json())
        .map_err(err)
}

#[pymodule]
fn pyvidseek(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VidseekError", m.py().get_type::<VidseekError>())?;
    m.add_function(wrap_pyfunction!(edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(judge, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Corpus>()?;
    m.add_class::<WorkingSet>()?;
    Ok(())
}
