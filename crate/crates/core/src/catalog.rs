//! Videos, their segments, and temporal navigation.
//!
//! Segments are ingested from caller-supplied shot boundaries. They may leave
//! gaps but must not overlap, and ordinals are always recomputed from
//! `start_ms` order at load time.

use std::collections::HashMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate video id {0:?}")]
    DuplicateVideo(String),
    #[error("duplicate segment id {0:?}")]
    DuplicateSegment(String),
    #[error("video {0:?} has a zero duration")]
    ZeroDuration(String),
    #[error("segment {segment_id:?} references unknown video {video_id:?}")]
    DanglingSegment { segment_id: String, video_id: String },
    #[error("segment {segment_id:?} has invalid range [{start_ms}, {end_ms}) for a video of {duration_ms} ms")]
    OutOfRange {
        segment_id: String,
        start_ms: u64,
        end_ms: u64,
        duration_ms: u64,
    },
    #[error("segment {segment_id:?} overlaps preceding segment {previous:?}")]
    Overlap { segment_id: String, previous: String },
    #[error("unknown video {0:?}")]
    UnknownVideo(String),
    #[error("unknown segment {0:?}")]
    UnknownSegment(String),
    #[error("neighbor radius must be at least 1")]
    ZeroRadius,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub title: String,
    pub duration_ms: u64,
}

/// A temporal slice `[start_ms, end_ms)` of one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub video_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Keyframe path, relative to the catalog directory.
    pub keyframe: String,
    /// Recomputed on load; ignored in input files.
    #[serde(default)]
    pub ordinal: u32,
}

impl SegmentRecord {
    pub fn new(
        segment_id: impl Into<String>,
        video_id: impl Into<String>,
        start_ms: u64,
        end_ms: u64,
        keyframe: impl Into<String>,
    ) -> Self {
        Self {
            segment_id: segment_id.into(),
            video_id: video_id.into(),
            start_ms,
            end_ms,
            keyframe: keyframe.into(),
            ordinal: 0,
        }
    }

    pub fn contains(&self, position_ms: u64) -> bool {
        self.start_ms <= position_ms && position_ms < self.end_ms
    }

    /// True when `[start_ms, end_ms)` shares at least one millisecond with
    /// this segment.
    pub fn overlaps(&self, start_ms: u64, end_ms: u64) -> bool {
        start_ms < self.end_ms && self.start_ms < end_ms
    }
}

/// Immutable collection of videos and segments.
///
/// Videos are kept sorted by id, segments grouped by video and sorted by
/// `start_ms`, so two catalogs built from the same records are identical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    videos: Vec<VideoRecord>,
    segments: Vec<SegmentRecord>,
    video_segments: Vec<Range<usize>>,
    video_index: HashMap<String, usize>,
    segment_index: HashMap<String, usize>,
}

impl Catalog {
    pub fn from_records(mut videos: Vec<VideoRecord>, mut segments: Vec<SegmentRecord>) -> Result<Self, CatalogError> {
        videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
        let mut video_index = HashMap::with_capacity(videos.len());
        for (i, v) in videos.iter().enumerate() {
            if v.duration_ms == 0 {
                return Err(CatalogError::ZeroDuration(v.video_id.clone()));
            }
            if video_index.insert(v.video_id.clone(), i).is_some() {
                return Err(CatalogError::DuplicateVideo(v.video_id.clone()));
            }
        }

        let mut segment_index = HashMap::with_capacity(segments.len());
        for s in &segments {
            if segment_index.insert(s.segment_id.clone(), 0usize).is_some() {
                return Err(CatalogError::DuplicateSegment(s.segment_id.clone()));
            }
            let Some(&vi) = video_index.get(&s.video_id) else {
                return Err(CatalogError::DanglingSegment {
                    segment_id: s.segment_id.clone(),
                    video_id: s.video_id.clone(),
                });
            };
            let duration_ms = videos[vi].duration_ms;
            if s.start_ms >= s.end_ms || s.end_ms > duration_ms {
                return Err(CatalogError::OutOfRange {
                    segment_id: s.segment_id.clone(),
                    start_ms: s.start_ms,
                    end_ms: s.end_ms,
                    duration_ms,
                });
            }
        }

        segments.sort_by(|a, b| {
            video_index[&a.video_id]
                .cmp(&video_index[&b.video_id])
                .then(a.start_ms.cmp(&b.start_ms))
                .then(a.end_ms.cmp(&b.end_ms))
                .then(a.segment_id.cmp(&b.segment_id))
        });

        let mut video_segments = vec![0..0; videos.len()];
        let mut i = 0;
        while i < segments.len() {
            let vi = video_index[&segments[i].video_id];
            let begin = i;
            while i < segments.len() && segments[i].video_id == segments[begin].video_id {
                if i > begin && segments[i].start_ms < segments[i - 1].end_ms {
                    return Err(CatalogError::Overlap {
                        segment_id: segments[i].segment_id.clone(),
                        previous: segments[i - 1].segment_id.clone(),
                    });
                }
                segments[i].ordinal = (i - begin) as u32;
                i += 1;
            }
            video_segments[vi] = begin..i;
        }
        for (i, s) in segments.iter().enumerate() {
            segment_index.insert(s.segment_id.clone(), i);
        }

        Ok(Self {
            videos,
            segments,
            video_segments,
            video_index,
            segment_index,
        })
    }

    pub fn videos(&self) -> &[VideoRecord] {
        &self.videos
    }

    /// All segments, grouped by video id and in temporal order.
    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoRecord> {
        self.video_index.get(video_id).map(|&i| &self.videos[i])
    }

    pub fn segment(&self, segment_id: &str) -> Option<&SegmentRecord> {
        self.segment_index.get(segment_id).map(|&i| &self.segments[i])
    }

    /// Position of a segment in [`Catalog::segments`].
    pub fn segment_position(&self, segment_id: &str) -> Option<usize> {
        self.segment_index.get(segment_id).copied()
    }

    /// Segments of one video in ascending `start_ms`.
    pub fn segments_of_video(&self, video_id: &str) -> Result<&[SegmentRecord], CatalogError> {
        let &vi = self
            .video_index
            .get(video_id)
            .ok_or_else(|| CatalogError::UnknownVideo(video_id.to_string()))?;
        Ok(&self.segments[self.video_segments[vi].clone()])
    }

    /// Segments of the anchor's video within `radius` ordinals of the anchor,
    /// excluding the anchor itself, in temporal order.
    pub fn neighbors(&self, segment_id: &str, radius: u32) -> Result<Vec<&SegmentRecord>, CatalogError> {
        let &pos = self
            .segment_index
            .get(segment_id)
            .ok_or_else(|| CatalogError::UnknownSegment(segment_id.to_string()))?;
        if radius == 0 {
            return Err(CatalogError::ZeroRadius);
        }
        let anchor = &self.segments[pos];
        let range = self.video_segments[self.video_index[&anchor.video_id]].clone();
        let radius = radius as usize;
        let lo = pos.saturating_sub(radius).max(range.start);
        let hi = (pos + radius + 1).min(range.end);
        Ok((lo..hi).filter(|&i| i != pos).map(|i| &self.segments[i]).collect())
    }

    /// Canonical JSON-lines form of the videos table.
    pub fn videos_jsonl(&self) -> String {
        to_jsonl(&self.videos)
    }

    /// Canonical JSON-lines form of the segments table (ordinals omitted).
    pub fn segments_jsonl(&self) -> String {
        let raw: Vec<SegmentLine<'_>> = self
            .segments
            .iter()
            .map(|s| SegmentLine {
                segment_id: &s.segment_id,
                video_id: &s.video_id,
                start_ms: s.start_ms,
                end_ms: s.end_ms,
                keyframe: &s.keyframe,
            })
            .collect();
        to_jsonl(&raw)
    }

    pub fn write_to(&self, videos_file: &Path, segments_file: &Path) -> std::io::Result<()> {
        fs::write(videos_file, self.videos_jsonl())?;
        fs::write(segments_file, self.segments_jsonl())
    }
}

#[derive(Serialize)]
struct SegmentLine<'a> {
    segment_id: &'a str,
    video_id: &'a str,
    start_ms: u64,
    end_ms: u64,
    keyframe: &'a str,
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("catalog rows serialize"));
        out.push('\n');
    }
    out
}

/// Reads a JSON-lines file. Blank lines are skipped; line numbers in errors
/// are 1-based.
pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CatalogError> {
    let body = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&body, path)
}

pub(crate) fn parse_jsonl<T: for<'de> Deserialize<'de>>(body: &str, path: &Path) -> Result<Vec<T>, CatalogError> {
    let mut rows = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| CatalogError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentInput {
    segment_id: String,
    video_id: String,
    start_ms: u64,
    end_ms: u64,
    keyframe: String,
}

pub fn load_catalog(videos_file: &Path, segments_file: &Path) -> Result<Catalog, CatalogError> {
    let videos: Vec<VideoRecord> = read_jsonl(videos_file)?;
    let segments: Vec<SegmentInput> = read_jsonl(segments_file)?;
    let segments = segments
        .into_iter()
        .map(|s| SegmentRecord::new(s.segment_id, s.video_id, s.start_ms, s.end_ms, s.keyframe))
        .collect();
    Catalog::from_records(videos, segments)
}

/// Loads `videos.jsonl` and `segments.jsonl` from a directory.
pub fn load_catalog_dir(dir: &Path) -> Result<Catalog, CatalogError> {
    load_catalog(&dir.join(VIDEOS_FILE), &dir.join(SEGMENTS_FILE))
}

pub const VIDEOS_FILE: &str = "videos.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
