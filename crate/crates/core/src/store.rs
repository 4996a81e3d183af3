//! Index directory layout and the batch ingest pipeline.
//!
//! ```text
//! <indexdir>/
//!   videos.jsonl, segments.jsonl   canonical catalog
//!   index.sgix                     posting index
//!   features.jsonl                 colour-grid features
//!   engine.toml                    configuration used at ingest
//!   annotations.cache.jsonl        keyframe annotations, reused on re-ingest
//!   thumbs/<hex segment id>.png    web thumbnails
//!   ingest.json                    ingest summary
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{self, Catalog, CatalogError};
use crate::config::{ConfigError, EngineConfig};
use crate::fuzzy_index::{IndexError, PostingIndex};
use crate::ingest::{
    self, AnnotatorClient, Category, ColorGridFeature, HttpAnnotator, IngestError, MockAnnotator, TimedToken,
};
use crate::query::{FeatureStore, QueryContext, QueryError};
use crate::raster::{self, RasterError};

pub const INDEX_FILE: &str = "index.sgix";
pub const FEATURES_FILE: &str = "features.jsonl";
pub const CONFIG_FILE: &str = "engine.toml";
pub const ANNOTATION_CACHE_FILE: &str = "annotations.cache.jsonl";
pub const SUMMARY_FILE: &str = "ingest.json";
pub const THUMBS_DIR: &str = "thumbs";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("keyframe of segment {segment_id:?}: {source}")]
    Keyframe {
        segment_id: String,
        #[source]
        source: RasterError,
    },
    #[error("features of segment {segment_id:?}: {source}")]
    Feature {
        segment_id: String,
        #[source]
        source: IngestError,
    },
    #[error("annotator: {0}")]
    Annotator(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("index directory inconsistent: {0}")]
    Inconsistent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// File name of a segment's thumbnail. Ids are hex-encoded so any caller
/// string maps to a safe file name.
pub fn thumbnail_name(segment_id: &str) -> String {
    format!("{}.png", hex::encode(segment_id.as_bytes()))
}

#[derive(Debug, Clone)]
pub enum AnnotationSource {
    None,
    /// Offline fixture file for the mock annotator.
    Fixture(PathBuf),
    /// HTTP annotator endpoint.
    Live(String),
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub catalog_dir: PathBuf,
    pub asr_file: Option<PathBuf>,
    pub annotations: AnnotationSource,
    pub annotation_budget: Option<usize>,
    /// Defaults to `<out_dir>/annotations.cache.jsonl`.
    pub annotation_cache: Option<PathBuf>,
    pub config: EngineConfig,
    pub out_dir: PathBuf,
    pub thumbnails: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnannotatedSegment {
    pub segment_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub videos: usize,
    pub segments: usize,
    pub asr_words: usize,
    pub asr_words_kept: usize,
    pub annotation_tokens: usize,
    pub annotation_tokens_kept: usize,
    pub annotated_segments: usize,
    pub annotations_from_cache: usize,
    pub unannotated: Vec<UnannotatedSegment>,
    pub dropped_tokens: usize,
    pub documents: usize,
    pub vocabulary: [usize; 3],
    pub features: usize,
    pub elapsed_ms: u64,
}

pub fn run_ingest(opts: &IngestOptions) -> Result<IngestSummary, StoreError> {
    let started = Instant::now();
    let cfg = &opts.config;
    cfg.validate()?;
    let catalog = catalog::load_catalog_dir(&opts.catalog_dir)?;
    fs::create_dir_all(&opts.out_dir).map_err(io_err(&opts.out_dir))?;

    // ASR words
    let words = match &opts.asr_file {
        Some(p) => ingest::read_asr_file(p)?,
        None => Vec::new(),
    };
    let kept_words = ingest::threshold_asr(&words, cfg.tau(Category::Asr))?;

    // keyframe annotations
    let cache_path = opts
        .annotation_cache
        .clone()
        .unwrap_or_else(|| opts.out_dir.join(ANNOTATION_CACHE_FILE));
    let cached = if cache_path.exists() {
        ingest::read_annotation_cache(&cache_path)?
    } else {
        Vec::new()
    };
    let client: Option<Box<dyn AnnotatorClient>> = match &opts.annotations {
        AnnotationSource::None => None,
        AnnotationSource::Fixture(p) => Some(Box::new(
            MockAnnotator::from_fixture_file(p, opts.annotation_budget)
                .map_err(|e| StoreError::Annotator(e.to_string()))?,
        )),
        AnnotationSource::Live(url) => Some(Box::new(HttpAnnotator::new(url.clone(), opts.annotation_budget))),
    };
    let (annotation_tokens, run) = match &client {
        Some(c) => {
            let run = ingest::annotate_catalog(c.as_ref(), &catalog, &opts.catalog_dir, &cached);
            ingest::write_annotation_cache(&cache_path, &run.cache).map_err(io_err(&cache_path))?;
            (run.tokens.clone(), Some(run))
        }
        None => (Vec::new(), None),
    };
    let mut kept_annotations: Vec<TimedToken> = Vec::new();
    for category in [Category::Ocr, Category::Label] {
        let of_cat: Vec<TimedToken> = annotation_tokens
            .iter()
            .filter(|t| t.category == category)
            .cloned()
            .collect();
        kept_annotations.extend(ingest::threshold(&of_cat, cfg.tau(category))?);
    }

    let mut all_tokens = kept_words.clone();
    all_tokens.extend(kept_annotations.iter().cloned());
    let assignment = ingest::assign_to_segments(&all_tokens, &catalog)?;
    let index = PostingIndex::build(&assignment.documents)?;
    index.write_to(&opts.out_dir.join(INDEX_FILE))?;

    // visual features and thumbnails
    let dims = cfg.visual.grid_dims;
    let thumbs = opts.out_dir.join(THUMBS_DIR);
    if opts.thumbnails {
        fs::create_dir_all(&thumbs).map_err(io_err(&thumbs))?;
    }
    let features: Vec<ColorGridFeature> = catalog
        .segments()
        .par_iter()
        .map(|s| {
            let image =
                raster::read_ppm(&opts.catalog_dir.join(&s.keyframe)).map_err(|source| StoreError::Keyframe {
                    segment_id: s.segment_id.clone(),
                    source,
                })?;
            let grid = ingest::extract_color_grid(&image, dims).map_err(|source| StoreError::Feature {
                segment_id: s.segment_id.clone(),
                source,
            })?;
            if opts.thumbnails {
                raster::write_png(&thumbs.join(thumbnail_name(&s.segment_id)), &image).map_err(|source| {
                    StoreError::Keyframe {
                        segment_id: s.segment_id.clone(),
                        source,
                    }
                })?;
            }
            Ok(ColorGridFeature {
                segment_id: s.segment_id.clone(),
                dims,
                grid,
            })
        })
        .collect::<Result<_, StoreError>>()?;
    let store = FeatureStore::new(dims, features)?;
    let features_path = opts.out_dir.join(FEATURES_FILE);
    fs::write(&features_path, store.to_jsonl()).map_err(io_err(&features_path))?;

    let videos_path = opts.out_dir.join(catalog::VIDEOS_FILE);
    let segments_path = opts.out_dir.join(catalog::SEGMENTS_FILE);
    catalog
        .write_to(&videos_path, &segments_path)
        .map_err(io_err(&opts.out_dir))?;
    let config_path = opts.out_dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_toml_string()).map_err(io_err(&config_path))?;

    let summary = IngestSummary {
        videos: catalog.videos().len(),
        segments: catalog.segments().len(),
        asr_words: words.len(),
        asr_words_kept: kept_words.len(),
        annotation_tokens: annotation_tokens.len(),
        annotation_tokens_kept: kept_annotations.len(),
        annotated_segments: run.as_ref().map_or(0, |r| r.annotated),
        annotations_from_cache: run.as_ref().map_or(0, |r| r.from_cache),
        unannotated: run
            .map(|r| {
                r.failures
                    .into_iter()
                    .map(|(segment_id, e)| UnannotatedSegment {
                        segment_id,
                        reason: e.to_string(),
                    })
                    .collect()
            })
            .unwrap_or_default(),
        dropped_tokens: assignment.dropped,
        documents: assignment.documents.len(),
        vocabulary: Category::ALL.map(|c| index.vocabulary(c).len()),
        features: store.len(),
        elapsed_ms: started.elapsed().as_millis() as u64,
    };
    let summary_path = opts.out_dir.join(SUMMARY_FILE);
    fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )
    .map_err(io_err(&summary_path))?;
    Ok(summary)
}

/// Everything a query needs, loaded from an index directory.
pub struct Corpus {
    pub dir: PathBuf,
    pub catalog: Catalog,
    pub index: PostingIndex,
    pub features: FeatureStore,
    pub config: EngineConfig,
}

impl Corpus {
    /// Loads and cross-checks an index directory. `config` overrides the
    /// stored configuration; its grid dims must match the stored features.
    pub fn open(dir: &Path, config: Option<EngineConfig>) -> Result<Self, StoreError> {
        let catalog = catalog::load_catalog_dir(dir)?;
        let stored = EngineConfig::load(&dir.join(CONFIG_FILE))?;
        let config = match config {
            Some(c) => {
                c.validate()?;
                if c.visual.grid_dims != stored.visual.grid_dims {
                    return Err(StoreError::Inconsistent(format!(
                        "configured grid {} differs from indexed grid {}",
                        c.visual.grid_dims, stored.visual.grid_dims
                    )));
                }
                c
            }
            None => stored,
        };
        let index = PostingIndex::read_from(&dir.join(INDEX_FILE))?;
        let features = FeatureStore::read_jsonl(&dir.join(FEATURES_FILE), config.visual.grid_dims)?;
        for id in index.segment_ids() {
            if catalog.segment(id).is_none() {
                return Err(StoreError::Inconsistent(format!(
                    "indexed segment {id:?} not in catalog"
                )));
            }
        }
        for f in features.iter() {
            if catalog.segment(&f.segment_id).is_none() {
                return Err(StoreError::Inconsistent(format!(
                    "feature for unknown segment {:?}",
                    f.segment_id
                )));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            catalog,
            index,
            features,
            config,
        })
    }

    pub fn context(&self) -> QueryContext<'_> {
        QueryContext {
            catalog: &self.catalog,
            index: &self.index,
            features: &self.features,
            config: &self.config,
        }
    }
}
