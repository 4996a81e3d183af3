//! Multi-clause query execution: text and visual clauses, late fusion,
//! per-video diversification and similarity re-ordering.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::config::EngineConfig;
use crate::fuzzy_index::{IndexError, PostingIndex};
use crate::ingest::{Category, ColorGridFeature, GridDims};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("query has no clauses")]
    NoClauses,
    #[error("query has both a sketch and an example segment")]
    TwoVisualProbes,
    #[error("{clauses} clauses but {weights} weights")]
    WeightCount { clauses: usize, weights: usize },
    #[error("weight {0} is not a finite non-negative number")]
    BadWeight(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("all ranked lists are empty")]
    AllEmpty,
    #[error("probe grid is {found} but features are {expected}")]
    DimensionMismatch { expected: GridDims, found: GridDims },
    #[error("probe grid has {found} cells, {dims} needs {expected}")]
    CellCount {
        dims: GridDims,
        expected: usize,
        found: usize,
    },
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("segment {0:?} has no colour feature")]
    MissingFeature(String),
    #[error("duplicate feature for segment {0:?}")]
    DuplicateFeature(String),
    #[error("clause {clause}: {source}")]
    Clause {
        clause: String,
        #[source]
        source: Box<QueryError>,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("feature file: {0}")]
    FeatureFile(String),
}

/// One element of a ranked list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResult {
    pub segment_id: String,
    pub score: f64,
    /// Per-clause contributions. For a single-clause list this is just the
    /// raw score; after fusion it holds each clause's normalised score.
    pub breakdown: Vec<f64>,
}

impl ScoredResult {
    pub fn single(segment_id: impl Into<String>, score: f64) -> Self {
        Self {
            segment_id: segment_id.into(),
            score,
            breakdown: vec![score],
        }
    }
}

fn sort_ranked(results: &mut [ScoredResult]) {
    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.segment_id.cmp(&b.segment_id))
    });
}

// ---------------------------------------------------------------------------
// Visual features
// ---------------------------------------------------------------------------

/// All colour-grid features of a corpus, sharing one grid shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dims: GridDims,
    features: Vec<ColorGridFeature>,
    by_id: HashMap<String, usize>,
}

impl FeatureStore {
    pub fn new(dims: GridDims, mut features: Vec<ColorGridFeature>) -> Result<Self, QueryError> {
        features.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
        let mut by_id = HashMap::with_capacity(features.len());
        for (i, f) in features.iter().enumerate() {
            if f.dims != dims {
                return Err(QueryError::DimensionMismatch {
                    expected: dims,
                    found: f.dims,
                });
            }
            check_cells(dims, &f.grid)?;
            if by_id.insert(f.segment_id.clone(), i).is_some() {
                return Err(QueryError::DuplicateFeature(f.segment_id.clone()));
            }
        }
        Ok(Self { dims, features, by_id })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn get(&self, segment_id: &str) -> Option<&ColorGridFeature> {
        self.by_id.get(segment_id).map(|&i| &self.features[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ColorGridFeature> {
        self.features.iter()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for f in &self.features {
            out.push_str(&serde_json::to_string(f).expect("features serialize"));
            out.push('\n');
        }
        out
    }

    pub fn read_jsonl(path: &Path, dims: GridDims) -> Result<Self, QueryError> {
        let rows: Vec<ColorGridFeature> =
            crate::catalog::read_jsonl(path).map_err(|e| QueryError::FeatureFile(e.to_string()))?;
        Self::new(dims, rows)
    }
}

fn check_cells(dims: GridDims, grid: &[[f64; 3]]) -> Result<(), QueryError> {
    if grid.len() != dims.cells() {
        return Err(QueryError::CellCount {
            dims,
            expected: dims.cells(),
            found: grid.len(),
        });
    }
    Ok(())
}

/// `1 / (1 + d²)` with `d²` the mean squared channel difference.
pub fn grid_similarity(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = (a.len() * 3) as f64;
    let d2: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(p, q)| (0..3).map(move |c| (p[c] - q[c]) * (p[c] - q[c])))
        .sum::<f64>()
        / n;
    1.0 / (1.0 + d2)
}

/// Top-`k` segments by colour-grid similarity to `probe`.
pub fn visual_search(
    features: &FeatureStore,
    probe_dims: GridDims,
    probe: &[[f64; 3]],
    k: usize,
) -> Result<Vec<ScoredResult>, QueryError> {
    if k == 0 {
        return Err(QueryError::ZeroK);
    }
    if probe_dims != features.dims {
        return Err(QueryError::DimensionMismatch {
            expected: features.dims,
            found: probe_dims,
        });
    }
    check_cells(probe_dims, probe)?;
    let mut out: Vec<ScoredResult> = features
        .iter()
        .map(|f| ScoredResult::single(f.segment_id.clone(), grid_similarity(probe, &f.grid)))
        .collect();
    sort_ranked(&mut out);
    out.truncate(k);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Fusion, diversification, re-ordering
// ---------------------------------------------------------------------------

fn check_weight(w: f64) -> Result<(), QueryError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(QueryError::BadWeight(w))
    }
}

/// Min-max normalises each list (constant lists map to 1.0) and sums the
/// weighted normalised scores per segment. A segment missing from a list
/// gets 0 for that clause.
pub fn fuse(lists: &[Vec<ScoredResult>], weights: &[f64]) -> Result<Vec<ScoredResult>, QueryError> {
    if lists.len() != weights.len() {
        return Err(QueryError::WeightCount {
            clauses: lists.len(),
            weights: weights.len(),
        });
    }
    for &w in weights {
        check_weight(w)?;
    }
    if lists.iter().all(|l| l.is_empty()) {
        return Err(QueryError::AllEmpty);
    }
    let n = lists.len();
    let mut fused: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (i, list) in lists.iter().enumerate() {
        let Some(first) = list.first() else { continue };
        let (lo, hi) = list.iter().fold((first.score, first.score), |(lo, hi), r| {
            (lo.min(r.score), hi.max(r.score))
        });
        let span = hi - lo;
        for r in list {
            let norm = if span > 0.0 { (r.score - lo) / span } else { 1.0 };
            fused.entry(r.segment_id.as_str()).or_insert_with(|| vec![0.0; n])[i] = norm;
        }
    }
    let mut out: Vec<ScoredResult> = fused
        .into_iter()
        .map(|(id, breakdown)| ScoredResult {
            segment_id: id.to_string(),
            score: breakdown.iter().zip(weights).map(|(b, w)| b * w).sum(),
            breakdown,
        })
        .collect();
    sort_ranked(&mut out);
    Ok(out)
}

/// Keeps at most `per_video_cap` results per video, preserving order.
/// Segments unknown to the catalog count as their own video.
pub fn diversify(ranked: &[ScoredResult], per_video_cap: usize, catalog: &Catalog) -> Vec<ScoredResult> {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    ranked
        .iter()
        .filter(|r| {
            let video = catalog
                .segment(&r.segment_id)
                .map_or(r.segment_id.as_str(), |s| s.video_id.as_str());
            let n = seen.entry(video).or_default();
            *n += 1;
            *n <= per_video_cap
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReorderCriterion {
    Color,
    Temporal,
}

impl std::str::FromStr for ReorderCriterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "color" => Ok(Self::Color),
            "temporal" => Ok(Self::Temporal),
            other => Err(format!("unknown criterion {other:?}")),
        }
    }
}

/// Re-sorts `results` by similarity to `anchor`. Colour: descending grid
/// similarity. Temporal: ascending `|start_ms - anchor.start_ms|`. Ties go to
/// the smaller segment id. Scores are left untouched.
pub fn reorder_by_similarity(
    results: &[ScoredResult],
    anchor: &str,
    criterion: ReorderCriterion,
    catalog: &Catalog,
    features: &FeatureStore,
) -> Result<Vec<ScoredResult>, QueryError> {
    let anchor_seg = catalog
        .segment(anchor)
        .ok_or_else(|| QueryError::UnknownSegment(anchor.to_string()))?;
    let mut keyed: Vec<(f64, &ScoredResult)> = match criterion {
        ReorderCriterion::Color => {
            let a = features
                .get(anchor)
                .ok_or_else(|| QueryError::MissingFeature(anchor.to_string()))?;
            results
                .iter()
                .map(|r| {
                    let f = features
                        .get(&r.segment_id)
                        .ok_or_else(|| QueryError::MissingFeature(r.segment_id.clone()))?;
                    // negate so that ascending order is most-similar first
                    Ok((-grid_similarity(&a.grid, &f.grid), r))
                })
                .collect::<Result<_, QueryError>>()?
        }
        ReorderCriterion::Temporal => results
            .iter()
            .map(|r| {
                let s = catalog
                    .segment(&r.segment_id)
                    .ok_or_else(|| QueryError::UnknownSegment(r.segment_id.clone()))?;
                Ok((s.start_ms.abs_diff(anchor_seg.start_ms) as f64, r))
            })
            .collect::<Result<_, QueryError>>()?,
    };
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.segment_id.cmp(&b.1.segment_id)));
    Ok(keyed.into_iter().map(|(_, r)| r.clone()).collect())
}

// ---------------------------------------------------------------------------
// Query specs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextClause {
    pub category: Category,
    pub text: String,
    /// Overrides the configured edit bound for this clause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_edits: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualClause {
    Sketch { dims: GridDims, grid: Vec<[f64; 3]> },
    Example { segment_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(default)]
    pub text_clauses: Vec<TextClause>,
    #[serde(default)]
    pub visual: Option<VisualClause>,
    /// One weight per clause, text clauses first then the visual clause.
    /// Defaults come from the configuration when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub k: usize,
}

impl QuerySpec {
    pub fn text(category: Category, text: impl Into<String>, k: usize) -> Self {
        Self {
            text_clauses: vec![TextClause {
                category,
                text: text.into(),
                max_edits: None,
            }],
            visual: None,
            weights: None,
            k,
        }
    }

    pub fn clause_count(&self) -> usize {
        self.text_clauses.len() + usize::from(self.visual.is_some())
    }

    pub fn clause_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.text_clauses.iter().map(|c| c.category.to_string()).collect();
        if self.visual.is_some() {
            labels.push("visual".to_string());
        }
        labels
    }

    pub fn resolved_weights(&self, config: &EngineConfig) -> Result<Vec<f64>, QueryError> {
        let n = self.clause_count();
        if n == 0 {
            return Err(QueryError::NoClauses);
        }
        let weights = match &self.weights {
            Some(w) => {
                if w.len() != n {
                    return Err(QueryError::WeightCount {
                        clauses: n,
                        weights: w.len(),
                    });
                }
                w.clone()
            }
            None => {
                let d = &config.fusion.weights_default;
                let mut w: Vec<f64> = self.text_clauses.iter().map(|c| d.text(c.category)).collect();
                if self.visual.is_some() {
                    w.push(d.visual);
                }
                w
            }
        };
        for &w in &weights {
            check_weight(w)?;
        }
        Ok(weights)
    }
}

/// Read-only corpus a query runs against.
#[derive(Clone, Copy)]
pub struct QueryContext<'a> {
    pub catalog: &'a Catalog,
    pub index: &'a PostingIndex,
    pub features: &'a FeatureStore,
    pub config: &'a EngineConfig,
}

impl QueryContext<'_> {
    fn corpus_size(&self) -> usize {
        self.catalog.segments().len().max(1)
    }

    /// Ranked list of one text clause over the whole corpus.
    pub fn run_text_clause(&self, clause: &TextClause) -> Result<Vec<ScoredResult>, QueryError> {
        let mut policy = self.config.policy(clause.category);
        if let Some(e) = clause.max_edits {
            policy.max_edits = e;
        }
        Ok(self.index.search_text(&clause.text, &policy, self.corpus_size())?)
    }

    /// Ranked list of a visual clause over the whole corpus.
    pub fn run_visual_clause(&self, clause: &VisualClause) -> Result<Vec<ScoredResult>, QueryError> {
        match clause {
            VisualClause::Sketch { dims, grid } => visual_search(self.features, *dims, grid, self.corpus_size()),
            VisualClause::Example { segment_id } => {
                if self.catalog.segment(segment_id).is_none() {
                    return Err(QueryError::UnknownSegment(segment_id.clone()));
                }
                let f = self
                    .features
                    .get(segment_id)
                    .ok_or_else(|| QueryError::MissingFeature(segment_id.clone()))?;
                visual_search(self.features, f.dims, &f.grid, self.corpus_size())
            }
        }
    }

    /// Runs every clause, fuses, diversifies and truncates to `spec.k`.
    pub fn execute(&self, spec: &QuerySpec) -> Result<Vec<ScoredResult>, QueryError> {
        if spec.k == 0 {
            return Err(QueryError::ZeroK);
        }
        if spec.clause_count() == 0 {
            return Err(QueryError::NoClauses);
        }
        let weights = spec.resolved_weights(self.config)?;

        enum Clause<'c> {
            Text(&'c TextClause),
            Visual(&'c VisualClause),
        }
        let mut clauses: Vec<Clause<'_>> = spec.text_clauses.iter().map(Clause::Text).collect();
        if let Some(v) = &spec.visual {
            clauses.push(Clause::Visual(v));
        }
        let labels = spec.clause_labels();
        let lists: Vec<Vec<ScoredResult>> = clauses
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                match c {
                    Clause::Text(t) => self.run_text_clause(t),
                    Clause::Visual(v) => self.run_visual_clause(v),
                }
                .map_err(|e| QueryError::Clause {
                    clause: format!("{i} ({})", labels[i]),
                    source: Box::new(e),
                })
            })
            .collect::<Result<_, _>>()?;

        let fused = match fuse(&lists, &weights) {
            Ok(f) => f,
            Err(QueryError::AllEmpty) => Vec::new(),
            Err(e) => return Err(e),
        };
        let mut out = diversify(&fused, self.config.diversify.per_video_cap, self.catalog);
        out.truncate(spec.k);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{SegmentRecord, VideoRecord};

    fn r(id: &str, score: f64) -> ScoredResult {
        ScoredResult::single(id, score)
    }

    fn ids(v: &[ScoredResult]) -> Vec<&str> {
        v.iter().map(|r| r.segment_id.as_str()).collect()
    }

    fn feature(id: &str, rgb: [f64; 3]) -> ColorGridFeature {
        ColorGridFeature {
            segment_id: id.into(),
            dims: GridDims::new(1, 1),
            grid: vec![rgb],
        }
    }

    fn catalog() -> Catalog {
        Catalog::from_records(
            vec![
                VideoRecord {
                    video_id: "v1".into(),
                    title: "a".into(),
                    duration_ms: 100,
                },
                VideoRecord {
                    video_id: "v2".into(),
                    title: "b".into(),
                    duration_ms: 100,
                },
            ],
            vec![
                SegmentRecord::new("v1s1", "v1", 0, 10, "k"),
                SegmentRecord::new("v1s2", "v1", 10, 20, "k"),
                SegmentRecord::new("v1s3", "v1", 30, 40, "k"),
                SegmentRecord::new("v2s1", "v2", 0, 10, "k"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn visual_self_match_and_order() {
        let store = FeatureStore::new(
            GridDims::new(1, 1),
            vec![feature("s2", [1.0; 3]), feature("s1", [0.0; 3])],
        )
        .unwrap();
        let out = visual_search(&store, GridDims::new(1, 1), &[[0.0; 3]], 10).unwrap();
        assert_eq!(ids(&out), ["s1", "s2"]);
        assert_eq!(out[0].score, 1.0);
        assert_eq!(out[1].score, 0.5);

        let err = visual_search(&store, GridDims::new(2, 1), &[[0.0; 3]; 2], 10).unwrap_err();
        assert!(matches!(err, QueryError::DimensionMismatch { .. }));
    }

    #[test]
    fn fuse_degenerate_weight_and_single_list() {
        let a = vec![r("x", 3.0), r("y", 2.0), r("z", 1.0)];
        let b = vec![r("z", 9.0), r("y", 5.0), r("x", 1.0)];
        let out = fuse(&[a.clone(), b], &[1.0, 0.0]).unwrap();
        assert_eq!(ids(&out), ids(&a));

        let out = fuse(std::slice::from_ref(&a), &[1.0]).unwrap();
        assert_eq!(ids(&out), ids(&a));
        assert_eq!(out.iter().map(|r| r.score).collect::<Vec<_>>(), [1.0, 0.5, 0.0]);
    }

    #[test]
    fn fuse_constant_list_and_missing() {
        let a = vec![r("x", 2.0), r("y", 2.0)];
        let b = vec![r("y", 4.0), r("z", 1.0)];
        let out = fuse(&[a, b], &[1.0, 1.0]).unwrap();
        // x: 1 + 0, y: 1 + 1, z: 0 + 0
        assert_eq!(ids(&out), ["y", "x", "z"]);
        assert_eq!(out[0].breakdown, vec![1.0, 1.0]);
        assert_eq!(out[1].breakdown, vec![1.0, 0.0]);
    }

    #[test]
    fn fuse_errors() {
        assert!(matches!(
            fuse(&[vec![], vec![]], &[1.0, 1.0]),
            Err(QueryError::AllEmpty)
        ));
        assert!(matches!(
            fuse(&[vec![r("x", 1.0)]], &[]),
            Err(QueryError::WeightCount { .. })
        ));
        assert!(matches!(
            fuse(&[vec![r("x", 1.0)]], &[-1.0]),
            Err(QueryError::BadWeight(_))
        ));
    }

    #[test]
    fn diversify_caps_per_video() {
        let c = catalog();
        let ranked = vec![r("v1s1", 3.0), r("v1s2", 2.0), r("v2s1", 1.0)];
        assert_eq!(ids(&diversify(&ranked, 1, &c)), ["v1s1", "v2s1"]);
        assert_eq!(diversify(&ranked, 2, &c), ranked);
    }

    #[test]
    fn reorder_temporal_ties() {
        let c = catalog();
        let store = FeatureStore::new(GridDims::new(1, 1), vec![]).unwrap();
        // v1s1 and v2s1 both start at 0, v1s2 at 10; anchor v1s2
        let results = vec![r("v2s1", 1.0), r("v1s3", 0.5), r("v1s1", 0.1), r("v1s2", 0.0)];
        let out = reorder_by_similarity(&results, "v1s2", ReorderCriterion::Temporal, &c, &store).unwrap();
        assert_eq!(ids(&out), ["v1s2", "v1s1", "v2s1", "v1s3"]);
        assert!(matches!(
            reorder_by_similarity(&results, "nope", ReorderCriterion::Temporal, &c, &store),
            Err(QueryError::UnknownSegment(_))
        ));
        assert!(matches!(
            reorder_by_similarity(&results, "v1s2", ReorderCriterion::Color, &c, &store),
            Err(QueryError::MissingFeature(_))
        ));
    }

    #[test]
    fn reorder_color_puts_anchor_first() {
        let c = catalog();
        let store = FeatureStore::new(
            GridDims::new(1, 1),
            vec![
                feature("v1s1", [0.0; 3]),
                feature("v1s2", [0.9; 3]),
                feature("v1s3", [0.5; 3]),
                feature("v2s1", [1.0; 3]),
            ],
        )
        .unwrap();
        let results = vec![r("v1s1", 1.0), r("v1s3", 0.9), r("v2s1", 0.8), r("v1s2", 0.7)];
        let out = reorder_by_similarity(&results, "v2s1", ReorderCriterion::Color, &c, &store).unwrap();
        assert_eq!(ids(&out), ["v2s1", "v1s2", "v1s3", "v1s1"]);
        // scores are carried along unchanged
        assert_eq!(out[0].score, 0.8);
    }

    #[test]
    fn spec_weights() {
        let cfg = EngineConfig::default();
        let mut spec = QuerySpec::text(Category::Asr, "boat", 5);
        assert_eq!(spec.resolved_weights(&cfg).unwrap(), vec![1.0]);
        spec.weights = Some(vec![1.0, 2.0]);
        assert!(matches!(
            spec.resolved_weights(&cfg),
            Err(QueryError::WeightCount { .. })
        ));
        spec.weights = Some(vec![f64::INFINITY]);
        assert!(matches!(spec.resolved_weights(&cfg), Err(QueryError::BadWeight(_))));
        spec.text_clauses.clear();
        spec.weights = None;
        assert!(matches!(spec.resolved_weights(&cfg), Err(QueryError::NoClauses)));
    }

    #[test]
    fn visual_clause_json_shape() {
        let v: VisualClause = serde_json::from_str(r#"{"example":{"segment_id":"s1"}}"#).unwrap();
        assert_eq!(
            v,
            VisualClause::Example {
                segment_id: "s1".into()
            }
        );
        let v: VisualClause =
            serde_json::from_str(r#"{"sketch":{"dims":{"rows":1,"cols":1},"grid":[[1,0,0]]}}"#).unwrap();
        assert!(matches!(v, VisualClause::Sketch { .. }));
    }
}
