//! Text and visual feature ingestion.
//!
//! Raw ASR words and keyframe annotations become [`TimedToken`]s, which are
//! thresholded per category and assigned to every segment they overlap.
//! Keyframes are summarised by a coarse colour grid.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, Catalog, CatalogError, SegmentRecord};
use crate::raster::Raster;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Asr,
    Ocr,
    Label,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Asr, Category::Ocr, Category::Label];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Asr => "asr",
            Category::Ocr => "ocr",
            Category::Label => "label",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "asr" => Ok(Category::Asr),
            "ocr" => Ok(Category::Ocr),
            "label" => Ok(Category::Label),
            other => Err(IngestError::UnknownCategory(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("token span [{start_ms}, {end_ms}) is inverted")]
    Span { start_ms: u64, end_ms: u64 },
    #[error("token is empty after normalisation")]
    EmptyToken,
    #[error("expected an asr token, found {0}")]
    NotAsr(Category),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("grid dimensions {rows}x{cols} invalid for a {width}x{height} image")]
    GridDims {
        rows: u32,
        cols: u32,
        width: u32,
        height: u32,
    },
    #[error("cannot parse grid dimensions {0:?} (expected ROWSxCOLS)")]
    GridSyntax(String),
    #[error("empty image")]
    EmptyImage,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// A recognised word or label with its time span and confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedToken {
    pub video_id: String,
    pub token: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub confidence: f64,
    pub category: Category,
}

impl TimedToken {
    /// Validates the span and confidence and normalises `raw`.
    pub fn new(
        video_id: impl Into<String>,
        raw: &str,
        start_ms: u64,
        end_ms: u64,
        confidence: f64,
        category: Category,
    ) -> Result<Self, IngestError> {
        if start_ms > end_ms {
            return Err(IngestError::Span { start_ms, end_ms });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(IngestError::Confidence(confidence));
        }
        let token = text::normalize(raw).ok_or(IngestError::EmptyToken)?;
        Ok(Self {
            video_id: video_id.into(),
            token,
            start_ms,
            end_ms,
            confidence,
            category,
        })
    }
}

/// Tokens of one category retained for one segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentDocument {
    pub segment_id: String,
    pub category: Category,
    pub tokens: Vec<String>,
}

fn check_tau(tau: f64) -> Result<(), IngestError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(IngestError::Threshold(tau))
    }
}

/// Keeps the words whose confidence is at least `tau`, in input order.
pub fn threshold_asr(words: &[TimedToken], tau: f64) -> Result<Vec<TimedToken>, IngestError> {
    if let Some(w) = words.iter().find(|w| w.category != Category::Asr) {
        return Err(IngestError::NotAsr(w.category));
    }
    threshold(words, tau)
}

/// Category-agnostic form of [`threshold_asr`].
pub fn threshold(tokens: &[TimedToken], tau: f64) -> Result<Vec<TimedToken>, IngestError> {
    check_tau(tau)?;
    Ok(tokens.iter().filter(|t| t.confidence >= tau).cloned().collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment {
    /// One document per (segment, category) that received tokens, in
    /// catalog segment order then category order.
    pub documents: Vec<SegmentDocument>,
    /// Tokens that overlapped no segment.
    pub dropped: usize,
}

/// Places every token into each segment of its video that it overlaps by at
/// least one millisecond.
pub fn assign_to_segments(tokens: &[TimedToken], catalog: &Catalog) -> Result<Assignment, IngestError> {
    let mut docs: BTreeMap<(usize, Category), Vec<String>> = BTreeMap::new();
    let mut dropped = 0;
    for t in tokens {
        let segs = catalog.segments_of_video(&t.video_id)?;
        // segments are disjoint and sorted, so end_ms is sorted too
        let first = segs.partition_point(|s| s.end_ms <= t.start_ms);
        let mut hit = false;
        for s in segs[first..].iter().take_while(|s| s.start_ms < t.end_ms) {
            if s.overlaps(t.start_ms, t.end_ms) {
                let pos = catalog.segment_position(&s.segment_id).expect("catalog segment");
                docs.entry((pos, t.category)).or_default().push(t.token.clone());
                hit = true;
            }
        }
        if !hit {
            dropped += 1;
        }
    }
    let documents = docs
        .into_iter()
        .map(|((pos, category), tokens)| SegmentDocument {
            segment_id: catalog.segments()[pos].segment_id.clone(),
            category,
            tokens,
        })
        .collect();
    Ok(Assignment { documents, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub rows: u32,
    pub cols: u32,
}

impl GridDims {
    pub const fn new(rows: u32, cols: u32) -> Self {
        Self { rows, cols }
    }

    pub fn cells(self) -> usize {
        self.rows as usize * self.cols as usize
    }
}

impl Default for GridDims {
    fn default() -> Self {
        Self::new(8, 8)
    }
}

impl fmt::Display for GridDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl FromStr for GridDims {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::GridSyntax(s.to_string());
        let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let rows: u32 = r.trim().parse().map_err(|_| bad())?;
        let cols: u32 = c.trim().parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 {
            return Err(bad());
        }
        Ok(Self::new(rows, cols))
    }
}

/// Mean colour per grid cell of one keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorGridFeature {
    pub segment_id: String,
    pub dims: GridDims,
    /// Row-major `(r, g, b)` means, channels in `[0, 1]`.
    pub grid: Vec<[f64; 3]>,
}

/// Averages pixels over an evenly partitioned grid. Remainder rows and
/// columns fall into the last cell of their axis.
pub fn extract_color_grid(image: &Raster, dims: GridDims) -> Result<Vec<[f64; 3]>, IngestError> {
    if image.is_empty() {
        return Err(IngestError::EmptyImage);
    }
    let (w, h) = (image.width(), image.height());
    if dims.rows == 0 || dims.cols == 0 || dims.rows > h || dims.cols > w {
        return Err(IngestError::GridDims {
            rows: dims.rows,
            cols: dims.cols,
            width: w,
            height: h,
        });
    }
    let cell_w = w / dims.cols;
    let cell_h = h / dims.rows;
    let col_of: Vec<usize> = (0..w).map(|x| (x / cell_w).min(dims.cols - 1) as usize).collect();

    let mut sums = vec![[0.0f64; 3]; dims.cells()];
    let mut counts = vec![0u64; dims.cells()];
    for y in 0..h {
        let row = (y / cell_h).min(dims.rows - 1) as usize;
        for x in 0..w {
            let cell = row * dims.cols as usize + col_of[x as usize];
            let p = image.pixel(x, y);
            for c in 0..3 {
                sums[cell][c] += p[c];
            }
            counts[cell] += 1;
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| s.map(|v| (v / n as f64).clamp(0.0, 1.0)))
        .collect())
}

// ---------------------------------------------------------------------------
// Keyframe annotation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub category: Category,
    pub token: String,
    pub confidence: f64,
}

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("request budget of {0} calls exhausted")]
    BudgetExhausted(usize),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid annotator response: {0}")]
    InvalidResponse(String),
    #[error("fixture {path}:{line}: {message}")]
    Fixture {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Shared request counter. Safe to use from concurrent annotation calls.
#[derive(Debug)]
pub struct RequestBudget {
    limit: Option<usize>,
    used: AtomicUsize,
}

impl RequestBudget {
    pub fn new(limit: Option<usize>) -> Self {
        Self {
            limit,
            used: AtomicUsize::new(0),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(None)
    }

    pub fn try_acquire(&self) -> Result<(), AnnotatorError> {
        match self.limit {
            None => {
                self.used.fetch_add(1, Ordering::SeqCst);
                Ok(())
            }
            Some(limit) => self
                .used
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < limit).then_some(u + 1))
                .map(|_| ())
                .map_err(|_| AnnotatorError::BudgetExhausted(limit)),
        }
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }
}

/// Where a keyframe lives: the catalog-relative reference and the resolved
/// file path.
#[derive(Debug, Clone, Copy)]
pub struct KeyframeRef<'a> {
    pub reference: &'a str,
    pub path: &'a Path,
}

/// A source of label and scene-text annotations for keyframes.
pub trait AnnotatorClient: Send + Sync {
    fn capabilities(&self) -> &[Category];

    fn annotate(&self, keyframe: KeyframeRef<'_>) -> Result<Vec<Annotation>, AnnotatorError>;
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixtureLine {
    keyframe: String,
    category: Category,
    token: String,
    confidence: f64,
}

/// Offline annotator answering from a fixture file keyed by keyframe path.
#[derive(Debug)]
pub struct MockAnnotator {
    fixture: HashMap<String, Vec<Annotation>>,
    budget: RequestBudget,
}

impl MockAnnotator {
    pub fn new(fixture: HashMap<String, Vec<Annotation>>, budget: Option<usize>) -> Self {
        Self {
            fixture,
            budget: RequestBudget::new(budget),
        }
    }

    pub fn from_fixture_file(path: &Path, budget: Option<usize>) -> Result<Self, AnnotatorError> {
        let body = std::fs::read_to_string(path).map_err(|e| AnnotatorError::Fixture {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::from_fixture_str(&body, path, budget)
    }

    pub fn from_fixture_str(body: &str, path: &Path, budget: Option<usize>) -> Result<Self, AnnotatorError> {
        let mut fixture: HashMap<String, Vec<Annotation>> = HashMap::new();
        for (i, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| AnnotatorError::Fixture {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let l: FixtureLine = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if l.category == Category::Asr {
                return Err(err("fixture entries must be ocr or label".into()));
            }
            fixture.entry(l.keyframe).or_default().push(Annotation {
                category: l.category,
                token: l.token,
                confidence: l.confidence,
            });
        }
        Ok(Self::new(fixture, budget))
    }

    pub fn calls(&self) -> usize {
        self.budget.used()
    }
}

impl AnnotatorClient for MockAnnotator {
    fn capabilities(&self) -> &[Category] {
        &[Category::Label, Category::Ocr]
    }

    fn annotate(&self, keyframe: KeyframeRef<'_>) -> Result<Vec<Annotation>, AnnotatorError> {
        self.budget.try_acquire()?;
        Ok(self.fixture.get(keyframe.reference).cloned().unwrap_or_default())
    }
}

/// HTTP annotator. POSTs the raw keyframe bytes to `endpoint` and expects a
/// JSON array of `{category, token, confidence}` objects in return.
pub struct HttpAnnotator {
    endpoint: String,
    agent: ureq::Agent,
    budget: RequestBudget,
}

impl HttpAnnotator {
    pub fn new(endpoint: impl Into<String>, budget: Option<usize>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(true)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            agent,
            budget: RequestBudget::new(budget),
        }
    }
}

impl AnnotatorClient for HttpAnnotator {
    fn capabilities(&self) -> &[Category] {
        &[Category::Label, Category::Ocr]
    }

    fn annotate(&self, keyframe: KeyframeRef<'_>) -> Result<Vec<Annotation>, AnnotatorError> {
        self.budget.try_acquire()?;
        let bytes = std::fs::read(keyframe.path)
            .map_err(|e| AnnotatorError::Transport(format!("{}: {e}", keyframe.path.display())))?;
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("content-type", "image/x-portable-pixmap")
            .header("x-keyframe", keyframe.reference)
            .send(&bytes[..])
            .map_err(|e| AnnotatorError::Transport(e.to_string()))?;
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AnnotatorError::Transport(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| AnnotatorError::InvalidResponse(e.to_string()))
    }
}

/// Annotates one segment's keyframe. Tokens span the whole segment.
pub fn annotate_keyframe(
    client: &dyn AnnotatorClient,
    segment: &SegmentRecord,
    keyframe_root: &Path,
) -> Result<Vec<TimedToken>, AnnotatorError> {
    let path = keyframe_root.join(&segment.keyframe);
    let annotations = client.annotate(KeyframeRef {
        reference: &segment.keyframe,
        path: &path,
    })?;
    annotations_to_tokens(&annotations, client.capabilities(), segment)
}

fn annotations_to_tokens(
    annotations: &[Annotation],
    capabilities: &[Category],
    segment: &SegmentRecord,
) -> Result<Vec<TimedToken>, AnnotatorError> {
    let mut out = Vec::new();
    for a in annotations {
        if a.category == Category::Asr || !capabilities.contains(&a.category) {
            return Err(AnnotatorError::InvalidResponse(format!(
                "category {} not offered by this client",
                a.category
            )));
        }
        if !(0.0..=1.0).contains(&a.confidence) {
            return Err(AnnotatorError::InvalidResponse(format!(
                "confidence {} outside [0, 1]",
                a.confidence
            )));
        }
        for tok in text::tokenize(&a.token) {
            out.push(TimedToken {
                video_id: segment.video_id.clone(),
                token: tok,
                start_ms: segment.start_ms,
                end_ms: segment.end_ms,
                confidence: a.confidence,
                category: a.category,
            });
        }
    }
    Ok(out)
}

/// One line of the annotation cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedAnnotation {
    pub segment_id: String,
    pub category: Category,
    pub token: String,
    pub confidence: f64,
}

#[derive(Debug, Default)]
pub struct AnnotationRun {
    pub tokens: Vec<TimedToken>,
    /// Every annotation obtained, cached or fresh, in catalog order.
    pub cache: Vec<CachedAnnotation>,
    pub annotated: usize,
    pub from_cache: usize,
    /// Segments left unannotated, with the reason.
    pub failures: Vec<(String, AnnotatorError)>,
}

/// Annotates all catalog segments, concurrently. Segments present in
/// `cache` are served from it without calling the client.
pub fn annotate_catalog(
    client: &dyn AnnotatorClient,
    catalog: &Catalog,
    keyframe_root: &Path,
    cache: &[CachedAnnotation],
) -> AnnotationRun {
    let mut cached: HashMap<&str, Vec<Annotation>> = HashMap::new();
    for c in cache {
        cached.entry(c.segment_id.as_str()).or_default().push(Annotation {
            category: c.category,
            token: c.token.clone(),
            confidence: c.confidence,
        });
    }

    enum Outcome {
        Cached(Vec<Annotation>),
        Fresh(Vec<Annotation>),
        Failed(AnnotatorError),
    }

    let outcomes: Vec<Outcome> = catalog
        .segments()
        .par_iter()
        .map(|s| match cached.get(s.segment_id.as_str()) {
            Some(a) => Outcome::Cached(a.clone()),
            None => {
                let path = keyframe_root.join(&s.keyframe);
                match client.annotate(KeyframeRef {
                    reference: &s.keyframe,
                    path: &path,
                }) {
                    Ok(a) => Outcome::Fresh(a),
                    Err(e) => Outcome::Failed(e),
                }
            }
        })
        .collect();

    let mut run = AnnotationRun::default();
    for (s, outcome) in catalog.segments().iter().zip(outcomes) {
        let (annotations, was_cached) = match outcome {
            Outcome::Cached(a) => (a, true),
            Outcome::Fresh(a) => (a, false),
            Outcome::Failed(e) => {
                run.failures.push((s.segment_id.clone(), e));
                continue;
            }
        };
        match annotations_to_tokens(&annotations, client.capabilities(), s) {
            Ok(tokens) => {
                run.tokens.extend(tokens);
                run.cache.extend(annotations.into_iter().map(|a| CachedAnnotation {
                    segment_id: s.segment_id.clone(),
                    category: a.category,
                    token: a.token,
                    confidence: a.confidence,
                }));
                run.annotated += 1;
                if was_cached {
                    run.from_cache += 1;
                }
            }
            Err(e) => run.failures.push((s.segment_id.clone(), e)),
        }
    }
    run
}

pub fn read_annotation_cache(path: &Path) -> Result<Vec<CachedAnnotation>, CatalogError> {
    catalog::read_jsonl(path)
}

pub fn write_annotation_cache(path: &Path, rows: &[CachedAnnotation]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("cache rows serialize"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AsrLine {
    video_id: String,
    token: String,
    start_ms: u64,
    end_ms: u64,
    confidence: f64,
}

/// Reads an ASR word file. Words that normalise to several tokens are
/// split, all sharing the word's span; words that normalise to nothing are
/// skipped.
pub fn read_asr_file(path: &Path) -> Result<Vec<TimedToken>, IngestError> {
    let lines: Vec<AsrLine> = catalog::read_jsonl(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, l) in lines.into_iter().enumerate() {
        let at = |e: IngestError| {
            IngestError::Catalog(CatalogError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        };
        if l.start_ms > l.end_ms {
            return Err(at(IngestError::Span {
                start_ms: l.start_ms,
                end_ms: l.end_ms,
            }));
        }
        if !(0.0..=1.0).contains(&l.confidence) {
            return Err(at(IngestError::Confidence(l.confidence)));
        }
        for tok in text::tokenize(&l.token) {
            out.push(TimedToken {
                video_id: l.video_id.clone(),
                token: tok,
                start_ms: l.start_ms,
                end_ms: l.end_ms,
                confidence: l.confidence,
                category: Category::Asr,
            });
        }
    }
    Ok(out)
}
