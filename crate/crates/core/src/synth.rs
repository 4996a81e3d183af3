//! Deterministic synthetic corpus: videos, segments, keyframes, ASR words,
//! an annotation fixture and a task list. Used by the acceptance suite and
//! for local demos.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::catalog::{SegmentRecord, VideoRecord};
use crate::harness::{Target, TaskKind, TaskSpec};
use crate::raster::{self, Raster};

pub const DEFAULT_SEED: u64 = 2018;

#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub seed: u64,
    pub videos: usize,
    pub segments_per_video: usize,
    pub words_per_video: usize,
    pub keyframe_width: u32,
    pub keyframe_height: u32,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            videos: 10,
            segments_per_video: 20,
            words_per_video: 500,
            keyframe_width: 32,
            keyframe_height: 24,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsrWord {
    pub video_id: String,
    pub token: String,
    pub start_ms: u64,
    pub end_ms: u64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureEntry {
    pub keyframe: String,
    pub category: &'static str,
    pub token: String,
    pub confidence: f64,
}

pub struct SynthCorpus {
    pub videos: Vec<VideoRecord>,
    pub segments: Vec<SegmentRecord>,
    pub keyframes: Vec<(String, Raster)>,
    pub words: Vec<AsrWord>,
    pub fixture: Vec<FixtureEntry>,
    pub tasks: Vec<TaskSpec>,
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ne", "ro", "sa", "ti", "vu", "be", "da", "fo", "gu", "ha", "je", "ki", "lu", "ma", "no", "pe",
    "qui", "ra", "se", "to", "ul", "ve", "wa", "xe", "yo", "ze", "an", "el", "or",
];

const CONCEPTS: &[&str] = &[
    "beach", "coast", "boat", "car", "tree", "building", "person", "dog", "horse", "road", "mountain", "sky", "snow",
    "river", "bridge", "train", "airplane", "kitchen", "table", "chair", "computer", "phone", "book", "flower",
    "forest", "city", "night", "crowd", "stage", "guitar", "piano", "ball", "field", "desert", "bicycle", "bus",
    "ship", "lake", "castle", "church",
];

const SIGNS: &[&str] = &[
    "exit", "hotel", "police", "taxi", "open", "closed", "sale", "news", "stop", "welcome", "bank", "cafe",
];

fn pseudo_vocabulary(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.random_range(2..=4);
        let w: String = (0..syllables).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

fn misspell(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.random_range(0..chars.len());
    let c = (b'a' + rng.random_range(0..26u8)) as char;
    match rng.random_range(0..3) {
        0 => chars[i] = c,
        1 => chars.insert(i, c),
        _ if chars.len() > 3 => {
            chars.remove(i);
        }
        _ => chars[i] = c,
    }
    chars.into_iter().collect()
}

fn keyframe(rng: &mut ChaCha8Rng, w: u32, h: u32, base: [f64; 3]) -> Raster {
    let accent = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    let (bx, by) = (rng.random_range(0..w / 2), rng.random_range(0..h / 2));
    let (bw, bh) = (rng.random_range(w / 4..=w / 2), rng.random_range(h / 4..=h / 2));
    let mut px = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let inside = x >= bx && x < bx + bw && y >= by && y < by + bh;
            let c = if inside { accent } else { base };
            let shade = 0.85 + 0.15 * (y as f64 / h as f64);
            px.push(c.map(|v| {
                let noisy = v * shade + rng.random_range(-0.03..0.03);
                // quantise as an 8-bit PPM would
                (noisy.clamp(0.0, 1.0) * 255.0).round() / 255.0
            }));
        }
    }
    Raster::from_pixels(w, h, px)
}

pub fn generate(params: &SynthParams) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let vocab = pseudo_vocabulary(&mut rng, 400);

    let mut videos = Vec::new();
    let mut segments = Vec::new();
    let mut keyframes = Vec::new();
    let mut words = Vec::new();
    let mut fixture = Vec::new();
    let mut segment_labels: Vec<Vec<&'static str>> = Vec::new();

    for v in 0..params.videos {
        let video_id = format!("v{v:02}");
        let n = params.segments_per_video;
        let duration_ms = rng.random_range(60_000..180_000u64);
        videos.push(VideoRecord {
            video_id: video_id.clone(),
            title: format!("Synthetic video {v}"),
            duration_ms,
        });

        // cut points with jitter, occasional gaps
        let step = duration_ms / n as u64;
        let mut bounds: Vec<u64> = (0..=n as u64).map(|i| i * step).collect();
        for b in bounds.iter_mut().take(n).skip(1) {
            *b = (*b as i64 + rng.random_range(-(step as i64) / 3..(step as i64) / 3)) as u64;
        }
        bounds[n] = duration_ms;
        let base = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        for s in 0..n {
            let gap = if rng.random_bool(0.1) { 200 } else { 0 };
            let start = bounds[s] + gap;
            let end = bounds[s + 1];
            let segment_id = format!("{video_id}_s{s:03}");
            let kf = format!("keyframes/{segment_id}.ppm");
            segments.push(SegmentRecord::new(&segment_id, &video_id, start, end, &kf));
            keyframes.push((
                kf.clone(),
                keyframe(&mut rng, params.keyframe_width, params.keyframe_height, base),
            ));

            let n_labels = rng.random_range(1..=3);
            let labels: Vec<&'static str> = CONCEPTS.choose_multiple(&mut rng, n_labels).copied().collect();
            for l in &labels {
                fixture.push(FixtureEntry {
                    keyframe: kf.clone(),
                    category: "label",
                    token: l.to_string(),
                    confidence: (rng.random_range(0.5..1.0f64) * 1000.0).round() / 1000.0,
                });
            }
            segment_labels.push(labels);
            if rng.random_bool(0.3) {
                fixture.push(FixtureEntry {
                    keyframe: kf,
                    category: "ocr",
                    token: SIGNS.choose(&mut rng).unwrap().to_uppercase(),
                    confidence: (rng.random_range(0.6..1.0f64) * 1000.0).round() / 1000.0,
                });
            }
        }

        // each video talks mostly about its own topic words
        let topic: Vec<&String> = vocab.choose_multiple(&mut rng, 40).collect();
        for _ in 0..params.words_per_video {
            let word = if rng.random_bool(0.7) {
                topic.choose(&mut rng).unwrap().to_string()
            } else {
                vocab.choose(&mut rng).unwrap().clone()
            };
            let start = rng.random_range(0..duration_ms);
            let end = (start + rng.random_range(150..600)).min(duration_ms);
            let (token, confidence) = if rng.random_bool(0.05) {
                (misspell(&mut rng, &word), rng.random_range(0.1..0.6))
            } else {
                (word, rng.random::<f64>().sqrt())
            };
            words.push(AsrWord {
                video_id: video_id.clone(),
                token,
                start_ms: start,
                end_ms: end,
                confidence: (confidence * 1000.0).round() / 1000.0,
            });
        }
    }
    words.sort_by(|a, b| a.video_id.cmp(&b.video_id).then(a.start_ms.cmp(&b.start_ms)));

    let tasks = make_tasks(&mut rng, &segments, &segment_labels, &words);
    SynthCorpus {
        videos,
        segments,
        keyframes,
        words,
        fixture,
        tasks,
    }
}

fn make_tasks(
    rng: &mut ChaCha8Rng,
    segments: &[SegmentRecord],
    labels: &[Vec<&'static str>],
    words: &[AsrWord],
) -> Vec<TaskSpec> {
    let mut tasks = Vec::new();
    for i in 0..4 {
        let s = segments.choose(rng).unwrap();
        let hint: Vec<&str> = words
            .iter()
            .filter(|w| w.video_id == s.video_id && s.overlaps(w.start_ms, w.end_ms) && w.confidence >= 0.5)
            .take(4)
            .map(|w| w.token.as_str())
            .collect();
        tasks.push(TaskSpec {
            task_id: format!("kis-t{i}"),
            kind: TaskKind::KisTextual,
            duration_ms: 300_000,
            targets: vec![target(s)],
            hint: Some(hint.join(" ")),
        });
    }
    for i in 0..4 {
        let s = segments.choose(rng).unwrap();
        tasks.push(TaskSpec {
            task_id: format!("kis-v{i}"),
            kind: TaskKind::KisVisual,
            duration_ms: 300_000,
            targets: vec![target(s)],
            hint: Some(s.keyframe.clone()),
        });
    }
    for i in 0..4 {
        let concept = CONCEPTS[i * 7 % CONCEPTS.len()];
        let targets: Vec<Target> = segments
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.contains(&concept))
            .map(|(s, _)| target(s))
            .collect();
        if targets.is_empty() {
            continue;
        }
        tasks.push(TaskSpec {
            task_id: format!("avs-{i}"),
            kind: TaskKind::Avs,
            duration_ms: 300_000,
            targets,
            hint: Some(format!("shots showing a {concept}")),
        });
    }
    tasks
}

fn target(s: &SegmentRecord) -> Target {
    Target {
        video_id: s.video_id.clone(),
        start_ms: s.start_ms,
        end_ms: s.end_ms,
    }
}

fn jsonl<T: Serialize>(rows: &[T]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
        .collect()
}

impl SynthCorpus {
    /// Writes the corpus:
    ///
    /// ```text
    /// <dir>/catalog/{videos,segments}.jsonl, catalog/keyframes/*.ppm
    /// <dir>/asr.jsonl  <dir>/annotations.fixture.jsonl  <dir>/tasks.jsonl
    /// ```
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let cat = dir.join("catalog");
        fs::create_dir_all(cat.join("keyframes"))?;
        fs::write(cat.join(crate::catalog::VIDEOS_FILE), jsonl(&self.videos))?;
        #[derive(Serialize)]
        struct Seg<'a> {
            segment_id: &'a str,
            video_id: &'a str,
            start_ms: u64,
            end_ms: u64,
            keyframe: &'a str,
        }
        let segs: Vec<Seg<'_>> = self
            .segments
            .iter()
            .map(|s| Seg {
                segment_id: &s.segment_id,
                video_id: &s.video_id,
                start_ms: s.start_ms,
                end_ms: s.end_ms,
                keyframe: &s.keyframe,
            })
            .collect();
        fs::write(cat.join(crate::catalog::SEGMENTS_FILE), jsonl(&segs))?;
        for (name, r) in &self.keyframes {
            raster::write_ppm(&cat.join(name), r)?;
        }
        fs::write(dir.join("asr.jsonl"), jsonl(&self.words))?;
        fs::write(dir.join("annotations.fixture.jsonl"), jsonl(&self.fixture))?;
        fs::write(dir.join("tasks.jsonl"), jsonl(&self.tasks))?;
        Ok(())
    }
}
