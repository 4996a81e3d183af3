//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the code it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use vidseek::catalog::{Catalog, SegmentRecord, VideoRecord};
use vidseek::config::EngineConfig;
use vidseek::ingest::{Category, SegmentDocument};
use vidseek::query::ScoredResult;
use vidseek::store::{self, AnnotationSource, IngestOptions};
use vidseek::synth::{self, SynthParams};

/// Full Wagner-Fischer table over chars.
pub fn dp_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in t[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}

pub fn random_token(rng: &mut ChaCha8Rng, alphabet: &[char], min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect()
}

/// Exhaustive text scoring: every (query token, vocabulary token) pair is
/// compared with the DP oracle.
pub struct TextOracle {
    /// category -> segment -> token -> tf
    tf: HashMap<Category, BTreeMap<String, HashMap<String, u32>>>,
}

impl TextOracle {
    pub fn new(docs: &[SegmentDocument]) -> Self {
        let mut tf: HashMap<Category, BTreeMap<String, HashMap<String, u32>>> = HashMap::new();
        for d in docs {
            let m = tf
                .entry(d.category)
                .or_default()
                .entry(d.segment_id.clone())
                .or_default();
            for t in &d.tokens {
                *m.entry(t.clone()).or_default() += 1;
            }
        }
        Self { tf }
    }

    pub fn n_docs(&self, category: Category) -> usize {
        self.tf.get(&category).map_or(0, |m| m.len())
    }

    pub fn df(&self, category: Category, token: &str) -> usize {
        self.tf
            .get(&category)
            .map_or(0, |m| m.values().filter(|d| d.contains_key(token)).count())
    }

    /// All matching segments with their scores, best first, ties by id.
    #[allow(clippy::too_many_arguments)]
    pub fn score(
        &self,
        category: Category,
        query_tokens: &[String],
        max_edits: usize,
        min_len: usize,
        discount: f64,
    ) -> Vec<(String, f64)> {
        let Some(docs) = self.tf.get(&category) else {
            return Vec::new();
        };
        let n = docs.len() as f64;
        let mut out = Vec::new();
        for (seg, tfs) in docs {
            let mut score = 0.0;
            let mut hit = false;
            for q in query_tokens {
                let bound = if q.chars().count() < min_len { 0 } else { max_edits };
                for (v, &tf) in tfs {
                    let d = dp_edit_distance(q, v);
                    if d <= bound {
                        let idf = (1.0 + n / self.df(category, v) as f64).ln();
                        score += tf as f64 * idf * discount.powi(d as i32);
                        hit = true;
                    }
                }
            }
            if hit {
                out.push((seg.clone(), score));
            }
        }
        sort_pairs(&mut out);
        out
    }
}

pub fn sort_pairs(v: &mut [(String, f64)]) {
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
}

/// Checks an engine ranking against an oracle ranking: same length, every
/// engine score equals the oracle's score for that segment, the score
/// sequences agree position by position, and the engine order is
/// descending with ties by ascending id. Returns a description of the first
/// disagreement.
pub fn compare_ranking(engine: &[ScoredResult], oracle: &[(String, f64)], k: usize, tol: f64) -> Result<(), String> {
    let expect = &oracle[..oracle.len().min(k)];
    if engine.len() != expect.len() {
        return Err(format!("length {} vs oracle {}", engine.len(), expect.len()));
    }
    let all: HashMap<&str, f64> = oracle.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    for (i, (e, (oid, os))) in engine.iter().zip(expect).enumerate() {
        let Some(&truth) = all.get(e.segment_id.as_str()) else {
            return Err(format!("rank {i}: {} not matched by oracle", e.segment_id));
        };
        if (truth - e.score).abs() > tol {
            return Err(format!(
                "rank {i}: {} score {} vs oracle {}",
                e.segment_id, e.score, truth
            ));
        }
        if (os - e.score).abs() > tol {
            return Err(format!(
                "rank {i}: {} ({}) vs oracle {} ({})",
                e.segment_id, e.score, oid, os
            ));
        }
        if e.segment_id != *oid && (os - truth).abs() > tol {
            return Err(format!("rank {i}: {} vs oracle {}", e.segment_id, oid));
        }
    }
    for w in engine.windows(2) {
        if w[0].score < w[1].score || (w[0].score == w[1].score && w[0].segment_id >= w[1].segment_id) {
            return Err(format!("order violated at {} / {}", w[0].segment_id, w[1].segment_id));
        }
    }
    Ok(())
}

/// Mean over pixels in each grid cell, cell bounds computed per pixel from
/// integer division, remainder into the last cell.
pub fn naive_grid(
    width: u32,
    height: u32,
    pixel: impl Fn(u32, u32) -> [f64; 3],
    rows: u32,
    cols: u32,
) -> Vec<[f64; 3]> {
    let cw = width / cols;
    let ch = height / rows;
    let mut out = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let y0 = r * ch;
            let y1 = if r == rows - 1 { height } else { y0 + ch };
            let x0 = c * cw;
            let x1 = if c == cols - 1 { width } else { x0 + cw };
            let mut sum = [0.0; 3];
            let mut n = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = pixel(x, y);
                    for k in 0..3 {
                        sum[k] += p[k];
                    }
                    n += 1.0;
                }
            }
            out.push(sum.map(|s| s / n));
        }
    }
    out
}

pub fn naive_similarity(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        for k in 0..3 {
            total += (x[k] - y[k]) * (x[k] - y[k]);
        }
    }
    1.0 / (1.0 + total / (3 * a.len()) as f64)
}

/// A catalog of `videos` videos with `per_video` contiguous 1-second
/// segments each. Ids are `v<i>` and `v<i>_s<j>`.
pub fn grid_catalog(videos: usize, per_video: usize) -> Catalog {
    let mut vs = Vec::new();
    let mut ss = Vec::new();
    for v in 0..videos {
        let vid = format!("v{v}");
        vs.push(VideoRecord {
            video_id: vid.clone(),
            title: format!("video {v}"),
            duration_ms: per_video as u64 * 1000,
        });
        for s in 0..per_video {
            ss.push(SegmentRecord::new(
                format!("{vid}_s{s:02}"),
                vid.clone(),
                s as u64 * 1000,
                (s as u64 + 1) * 1000,
                format!("k/{vid}_{s}.ppm"),
            ));
        }
    }
    Catalog::from_records(vs, ss).expect("valid catalog")
}

pub fn run_random_id(rng: &mut ChaCha8Rng, catalog: &Catalog) -> String {
    let segs = catalog.segments();
    segs[rng.random_range(0..segs.len())].segment_id.clone()
}

/// The default synthetic corpus written and ingested under `root`.
pub struct SynthFixture {
    pub source: PathBuf,
    pub index: PathBuf,
    pub ingest_ms: u64,
}

pub fn ingest_synthetic(root: &Path) -> SynthFixture {
    let source = root.join("source");
    let index = root.join("index");
    let corpus = synth::generate(&SynthParams::default());
    corpus.write(&source).expect("write corpus");
    let started = std::time::Instant::now();
    store::run_ingest(&IngestOptions {
        catalog_dir: source.join("catalog"),
        asr_file: Some(source.join("asr.jsonl")),
        annotations: AnnotationSource::Fixture(source.join("annotations.fixture.jsonl")),
        annotation_budget: None,
        annotation_cache: None,
        config: EngineConfig::default(),
        out_dir: index.clone(),
        thumbnails: true,
    })
    .expect("ingest");
    SynthFixture {
        source,
        index,
        ingest_ms: started.elapsed().as_millis() as u64,
    }
}

/// Working set kept as plain vectors and maps.
#[derive(Debug, Default, Clone)]
pub struct SessionOracle {
    pub entries: Vec<(String, f64, bool)>,
    pub tags: HashMap<String, String>,
}

impl SessionOracle {
    fn has(&self, id: &str) -> bool {
        self.entries.iter().any(|e| e.0 == id)
    }

    fn push_expansion(&mut self, id: &str) -> bool {
        if self.has(id) {
            return false;
        }
        self.entries.push((id.to_string(), 0.0, false));
        true
    }

    /// Same-video segments within `radius` positions in start order.
    fn neighbors(catalog: &Catalog, id: &str, radius: usize) -> Vec<String> {
        let anchor = catalog.segment(id).unwrap();
        let mut same: Vec<&SegmentRecord> = catalog
            .segments()
            .iter()
            .filter(|s| s.video_id == anchor.video_id)
            .collect();
        same.sort_by_key(|s| s.start_ms);
        let pos = same.iter().position(|s| s.segment_id == id).unwrap();
        same.iter()
            .enumerate()
            .filter(|(i, _)| *i != pos && i.abs_diff(pos) <= radius)
            .map(|(_, s)| s.segment_id.clone())
            .collect()
    }

    /// Applies a command; `Err(())` when the command must be rejected.
    pub fn apply(&mut self, catalog: &Catalog, cmd: &vidseek::session::Command) -> Result<usize, ()> {
        use vidseek::session::Command;
        match cmd {
            Command::Seed { results } => {
                self.entries.clear();
                for r in results {
                    if !self.has(&r.segment_id) {
                        self.entries.push((r.segment_id.clone(), r.score, true));
                    }
                }
                let keep: Vec<String> = self.entries.iter().map(|e| e.0.clone()).collect();
                self.tags.retain(|k, _| keep.contains(k));
                Ok(self.entries.len())
            }
            Command::ExpandNeighbors { segment_id, radius } => {
                if !self.has(segment_id) || *radius == 0 {
                    return Err(());
                }
                let n = Self::neighbors(catalog, segment_id, *radius as usize);
                Ok(n.iter().filter(|s| self.push_expansion(s)).count())
            }
            Command::ExpandVideo { video_id } => {
                let prefix = |id: &str| catalog.segment(id).map(|s| s.video_id.clone());
                if !self.entries.iter().any(|e| prefix(&e.0).as_deref() == Some(video_id)) {
                    return Err(());
                }
                let mut segs: Vec<&SegmentRecord> =
                    catalog.segments().iter().filter(|s| &s.video_id == video_id).collect();
                segs.sort_by_key(|s| s.start_ms);
                Ok(segs.iter().filter(|s| self.push_expansion(&s.segment_id)).count())
            }
            Command::Tag { segment_id, color } => {
                if !self.has(segment_id) {
                    return Err(());
                }
                match color {
                    Some(c) => self.tags.insert(segment_id.clone(), c.to_string()),
                    None => self.tags.remove(segment_id),
                };
                Ok(0)
            }
            _ => Ok(0),
        }
    }

    /// (segment, score, from_query, tag) in working-set order.
    pub fn grid(&self) -> Vec<(String, f64, bool, Option<String>)> {
        self.entries
            .iter()
            .map(|(id, s, q)| (id.clone(), *s, *q, self.tags.get(id).cloned()))
            .collect()
    }

    /// (video, best score, segment ids by start time), best group first.
    pub fn grouped(&self, catalog: &Catalog) -> Vec<(String, f64, Vec<String>)> {
        let mut by_video: BTreeMap<String, Vec<(u64, String, f64)>> = BTreeMap::new();
        for (id, score, _) in &self.entries {
            let s = catalog.segment(id).unwrap();
            by_video
                .entry(s.video_id.clone())
                .or_default()
                .push((s.start_ms, id.clone(), *score));
        }
        let mut out: Vec<(String, f64, Vec<String>)> = by_video
            .into_iter()
            .map(|(v, mut segs)| {
                segs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                let best = segs.iter().map(|s| s.2).fold(f64::MIN, f64::max);
                (v, best, segs.into_iter().map(|s| s.1).collect())
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out
    }
}

/// A random seed/expand/tag command against `catalog`, biased towards ids
/// already in the oracle's set so most commands are accepted.
pub fn random_command(rng: &mut ChaCha8Rng, catalog: &Catalog, current: &SessionOracle) -> vidseek::session::Command {
    use vidseek::session::{ColorTag, Command, SeedEntry};
    let member = |rng: &mut ChaCha8Rng| -> String {
        if !current.entries.is_empty() && rng.random_bool(0.8) {
            current.entries[rng.random_range(0..current.entries.len())].0.clone()
        } else {
            run_random_id(rng, catalog)
        }
    };
    match rng.random_range(0..10) {
        0 | 1 => {
            let n = rng.random_range(0..12);
            Command::Seed {
                results: (0..n)
                    .map(|_| SeedEntry {
                        segment_id: run_random_id(rng, catalog),
                        score: (rng.random_range(0..100) as f64) / 10.0,
                    })
                    .collect(),
            }
        }
        2..=4 => Command::ExpandNeighbors {
            segment_id: member(rng),
            radius: rng.random_range(0..4),
        },
        5 => {
            let id = member(rng);
            Command::ExpandVideo {
                video_id: catalog.segment(&id).unwrap().video_id.clone(),
            }
        }
        _ => Command::Tag {
            segment_id: member(rng),
            color: if rng.random_bool(0.2) {
                None
            } else {
                Some(ColorTag::PALETTE[rng.random_range(0..ColorTag::PALETTE.len())])
            },
        },
    }
}

/// Compares a working set's grid and grouped views with the oracle's.
pub fn session_matches(
    ws: &vidseek::session::WorkingSet,
    oracle: &SessionOracle,
    catalog: &Catalog,
) -> Result<(), String> {
    use vidseek::session::Origin;
    let grid: Vec<(String, f64, bool, Option<String>)> = ws
        .grid_view()
        .into_iter()
        .map(|v| {
            (
                v.segment_id,
                v.score,
                v.origin == Origin::Query,
                v.tag.map(|t| t.to_string()),
            )
        })
        .collect();
    if grid != oracle.grid() {
        return Err(format!("grid view differs:\n{grid:?}\n{:?}", oracle.grid()));
    }
    let grouped: Vec<(String, f64, Vec<String>)> = ws
        .group_by_video(catalog)
        .groups
        .into_iter()
        .map(|g| {
            (
                g.video_id,
                g.best_score,
                g.segments.into_iter().map(|s| s.segment_id).collect(),
            )
        })
        .collect();
    if grouped != oracle.grouped(catalog) {
        return Err(format!(
            "grouped view differs:\n{grouped:?}\n{:?}",
            oracle.grouped(catalog)
        ));
    }
    Ok(())
}

/// Runs `steps` random commands through both a working set and the oracle.
/// Commands the oracle rejects must be rejected by the working set too.
pub fn replay_random_session(seed: u64, steps: usize, catalog: &Catalog) -> Result<(), String> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = vidseek::session::WorkingSet::new(format!("s{seed}"));
    let mut oracle = SessionOracle::default();
    for step in 0..steps {
        let cmd = random_command(&mut rng, catalog, &oracle);
        let want = oracle.apply(catalog, &cmd);
        let got = ws.apply(catalog, &cmd);
        match (&got, &want) {
            (Ok(a), Ok(b)) if a == b => {}
            (Err(_), Err(())) => {}
            _ => return Err(format!("step {step} {cmd:?}: engine {got:?}, oracle {want:?}")),
        }
        session_matches(&ws, &oracle, catalog).map_err(|e| format!("step {step} {cmd:?}: {e}"))?;
    }
    Ok(())
}

/// Random catalog whose segment ids do not follow temporal order.
pub fn random_catalog(rng: &mut ChaCha8Rng, videos: usize, max_per_video: usize) -> Catalog {
    let mut vs = Vec::new();
    let mut ss = Vec::new();
    let mut used = std::collections::HashSet::new();
    for v in 0..videos {
        let vid = format!("vid{v}");
        let n = rng.random_range(1..=max_per_video);
        let mut t = rng.random_range(0..500u64);
        for _ in 0..n {
            let len = rng.random_range(1..3000u64);
            let id = loop {
                let id = format!("x{:04}", rng.random_range(0..10_000));
                if used.insert(id.clone()) {
                    break id;
                }
            };
            ss.push(SegmentRecord::new(id, vid.clone(), t, t + len, "k.ppm"));
            t += len + rng.random_range(0..200u64);
        }
        vs.push(VideoRecord {
            video_id: vid,
            title: String::new(),
            duration_ms: t + 1,
        });
    }
    Catalog::from_records(vs, ss).expect("valid catalog")
}

/// Minimal JSON client: returns the status and the raw body.
pub fn http(method: &str, url: &str, body: Option<&str>) -> (u16, String) {
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let mut resp = match (method, body) {
        ("GET", _) => agent.get(url).call(),
        ("POST", Some(b)) => agent.post(url).header("content-type", "application/json").send(b),
        ("POST", None) => agent.post(url).send_empty(),
        _ => panic!("unsupported method {method}"),
    }
    .expect("request");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap_or_default())
}

pub fn http_json(method: &str, url: &str, body: Option<&str>) -> (u16, serde_json::Value) {
    let (status, text) = http(method, url, body);
    (status, serde_json::from_str(&text).unwrap_or(serde_json::Value::Null))
}
