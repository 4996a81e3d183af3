//! Known-item and ad-hoc video search task judging.
//!
//! KIS tasks have a single target range and end at the first correct
//! submission. AVS tasks have one or more targets; every target found for
//! the first time earns a share of the task's points. All constants live in
//! [`ScoringConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::catalog::{self, Catalog};
use crate::session::{Command, LogRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("submission for task {submitted:?} judged against task {task:?}")]
    TaskMismatch { task: String, submitted: String },
    #[error("late submission: {elapsed_ms} ms elapsed of {duration_ms} ms")]
    Late { elapsed_ms: u64, duration_ms: u64 },
    #[error("invalid task {task_id:?}: {message}")]
    InvalidTask { task_id: String, message: String },
    #[error("invalid scoring configuration: {0}")]
    Scoring(String),
    #[error("{0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    KisTextual,
    KisVisual,
    Avs,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::KisTextual, TaskKind::KisVisual, TaskKind::Avs];

    pub fn is_kis(self) -> bool {
        matches!(self, TaskKind::KisTextual | TaskKind::KisVisual)
    }
}

/// Half-open target range `[start_ms, end_ms)` within a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub video_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Target {
    pub fn contains(&self, video_id: &str, position_ms: u64) -> bool {
        self.video_id == video_id && self.start_ms <= position_ms && position_ms < self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub kind: TaskKind,
    pub duration_ms: u64,
    pub targets: Vec<Target>,
    /// Text description (textual KIS) or keyframe reference (visual KIS).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |message: String| HarnessError::InvalidTask {
            task_id: self.task_id.clone(),
            message,
        };
        if self.duration_ms == 0 {
            return Err(bad("duration_ms must be positive".into()));
        }
        match (self.kind.is_kis(), self.targets.len()) {
            (true, 1) => {}
            (true, n) => return Err(bad(format!("KIS tasks need exactly 1 target, got {n}"))),
            (false, 0) => return Err(bad("AVS tasks need at least 1 target".into())),
            _ => {}
        }
        for t in &self.targets {
            if t.start_ms >= t.end_ms {
                return Err(bad(format!("empty target range in {}", t.video_id)));
            }
        }
        Ok(())
    }

    /// Checks that every target lies inside its video.
    pub fn validate_in(&self, catalog: &Catalog) -> Result<(), HarnessError> {
        self.validate()?;
        for t in &self.targets {
            let v = catalog.video(&t.video_id).ok_or_else(|| HarnessError::InvalidTask {
                task_id: self.task_id.clone(),
                message: format!("unknown video {:?}", t.video_id),
            })?;
            if t.end_ms > v.duration_ms {
                return Err(HarnessError::InvalidTask {
                    task_id: self.task_id.clone(),
                    message: format!("target beyond end of {}", t.video_id),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub task_id: String,
    pub video_id: String,
    pub position_ms: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    pub matched_target: Option<usize>,
    pub score_delta: f64,
    pub wrong_count_so_far: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    /// Points for a correct KIS answer at the deadline.
    pub kis_base: f64,
    /// Extra KIS points, decaying linearly from full at t=0 to none at the
    /// deadline.
    pub kis_time_bonus: f64,
    /// Points lost per prior wrong KIS submission.
    pub kis_wrong_penalty: f64,
    /// Points shared among all AVS targets.
    pub avs_total: f64,
    /// AVS credit is divided by `1 + avs_wrong_penalty * prior_wrong`.
    pub avs_wrong_penalty: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            kis_base: 50.0,
            kis_time_bonus: 50.0,
            kis_wrong_penalty: 10.0,
            avs_total: 100.0,
            avs_wrong_penalty: 0.2,
        }
    }
}

impl ScoringConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Scoring(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let s = std::fs::read_to_string(path).map_err(|e| HarnessError::Scoring(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fields = [
            ("kis_base", self.kis_base),
            ("kis_time_bonus", self.kis_time_bonus),
            ("kis_wrong_penalty", self.kis_wrong_penalty),
            ("avs_total", self.avs_total),
            ("avs_wrong_penalty", self.avs_wrong_penalty),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(HarnessError::Scoring(format!("{name} = {v}")));
            }
        }
        if self.avs_total > 100.0 {
            return Err(HarnessError::Scoring("avs_total exceeds 100".into()));
        }
        Ok(())
    }

    /// Judges one submission. `found` holds the AVS targets already credited
    /// and is ignored for KIS.
    pub fn judge(
        &self,
        task: &TaskSpec,
        sub: &Submission,
        prior_wrong: u32,
        found: &BTreeSet<usize>,
    ) -> Result<Verdict, HarnessError> {
        if sub.task_id != task.task_id {
            return Err(HarnessError::TaskMismatch {
                task: task.task_id.clone(),
                submitted: sub.task_id.clone(),
            });
        }
        if sub.elapsed_ms > task.duration_ms {
            return Err(HarnessError::Late {
                elapsed_ms: sub.elapsed_ms,
                duration_ms: task.duration_ms,
            });
        }
        let hits: Vec<usize> = task
            .targets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.contains(&sub.video_id, sub.position_ms))
            .map(|(i, _)| i)
            .collect();
        let Some(&first_hit) = hits.first() else {
            return Ok(Verdict {
                correct: false,
                matched_target: None,
                score_delta: 0.0,
                wrong_count_so_far: prior_wrong + 1,
            });
        };
        let (matched, score_delta) = if task.kind.is_kis() {
            let remaining = 1.0 - sub.elapsed_ms as f64 / task.duration_ms as f64;
            let raw = self.kis_base + self.kis_time_bonus * remaining - self.kis_wrong_penalty * prior_wrong as f64;
            (first_hit, raw.clamp(0.0, 100.0))
        } else {
            match hits.iter().find(|i| !found.contains(i)) {
                Some(&fresh) => {
                    let share = self.avs_total / task.targets.len() as f64;
                    (fresh, share / (1.0 + self.avs_wrong_penalty * prior_wrong as f64))
                }
                None => (first_hit, 0.0),
            }
        };
        Ok(Verdict {
            correct: true,
            matched_target: Some(matched),
            score_delta,
            wrong_count_so_far: prior_wrong,
        })
    }

    /// Folds [`ScoringConfig::judge`] over a task's submissions in elapsed
    /// order.
    pub fn run_task(&self, task: &TaskSpec, submissions: &[Submission]) -> TaskReport {
        let mut subs: Vec<&Submission> = submissions.iter().collect();
        subs.sort_by_key(|s| s.elapsed_ms);

        let mut report = TaskReport {
            task_id: task.task_id.clone(),
            kind: task.kind,
            score: 0.0,
            solved: false,
            wrong: 0,
            late: 0,
            rejected: 0,
            targets_found: 0,
            time_to_solve_ms: None,
        };
        let mut found = BTreeSet::new();
        for sub in subs {
            match self.judge(task, sub, report.wrong, &found) {
                Ok(v) if v.correct => {
                    report.score += v.score_delta;
                    if !report.solved {
                        report.solved = true;
                        report.time_to_solve_ms = Some(sub.elapsed_ms);
                    }
                    if let Some(i) = v.matched_target {
                        found.insert(i);
                    }
                    if task.kind.is_kis() {
                        break;
                    }
                }
                Ok(v) => report.wrong = v.wrong_count_so_far,
                Err(HarnessError::Late { .. }) => report.late += 1,
                Err(_) => report.rejected += 1,
            }
        }
        report.targets_found = found.len();
        report.score = report.score.min(100.0);
        report
    }
}

pub fn judge(task: &TaskSpec, sub: &Submission, prior_wrong: u32) -> Result<Verdict, HarnessError> {
    ScoringConfig::default().judge(task, sub, prior_wrong, &BTreeSet::new())
}

pub fn run_task(task: &TaskSpec, submissions: &[Submission]) -> TaskReport {
    ScoringConfig::default().run_task(task, submissions)
}

fn two_decimals<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    // never print "-0.00"
    let v = if *v == 0.0 { 0.0 } else { *v };
    let raw = serde_json::value::RawValue::from_string(format!("{v:.2}")).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

fn two_decimals_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => two_decimals(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task_id: String,
    pub kind: TaskKind,
    #[serde(serialize_with = "two_decimals")]
    pub score: f64,
    pub solved: bool,
    pub wrong: u32,
    pub late: u32,
    /// Submissions that could not be judged against this task.
    pub rejected: u32,
    pub targets_found: usize,
    pub time_to_solve_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindSummary {
    pub kind: TaskKind,
    pub tasks: usize,
    #[serde(serialize_with = "two_decimals")]
    pub mean_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    #[serde(serialize_with = "two_decimals_opt")]
    pub overall_mean: Option<f64>,
    pub per_kind: Vec<KindSummary>,
    pub tasks: Vec<TaskReport>,
    /// Task ids that appear in the log but not in the task list.
    pub unknown_task_ids: Vec<String>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Submissions in a session log, keyed by task id. Practice-mode records
/// (no task or no elapsed time) are skipped.
pub fn submissions_from_log(records: &[LogRecord]) -> BTreeMap<String, Vec<Submission>> {
    let mut out: BTreeMap<String, Vec<Submission>> = BTreeMap::new();
    for r in records {
        if let Command::Submit {
            task_id: Some(task_id),
            video_id,
            position_ms,
            elapsed_ms: Some(elapsed_ms),
        } = &r.command
        {
            out.entry(task_id.clone()).or_default().push(Submission {
                task_id: task_id.clone(),
                video_id: video_id.clone(),
                position_ms: *position_ms,
                elapsed_ms: *elapsed_ms,
            });
        }
    }
    out
}

/// Scores every task against the log and aggregates per kind. Tasks without
/// submissions score 0; the overall mean is taken over tasks.
pub fn evaluate(tasks: &[TaskSpec], records: &[LogRecord], scoring: &ScoringConfig) -> EvaluationReport {
    let mut subs = submissions_from_log(records);
    let reports: Vec<TaskReport> = tasks
        .iter()
        .map(|t| scoring.run_task(t, &subs.remove(&t.task_id).unwrap_or_default()))
        .collect();
    let per_kind = TaskKind::ALL
        .into_iter()
        .filter_map(|kind| {
            let scores: Vec<f64> = reports.iter().filter(|r| r.kind == kind).map(|r| r.score).collect();
            (!scores.is_empty()).then(|| KindSummary {
                kind,
                tasks: scores.len(),
                mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            })
        })
        .collect();
    let overall_mean =
        (!reports.is_empty()).then(|| reports.iter().map(|r| r.score).sum::<f64>() / reports.len() as f64);
    EvaluationReport {
        overall_mean,
        per_kind,
        tasks: reports,
        unknown_task_ids: subs.into_keys().collect(),
    }
}

pub fn read_tasks(path: &Path) -> Result<Vec<TaskSpec>, HarnessError> {
    let tasks: Vec<TaskSpec> = catalog::read_jsonl(path).map_err(|e| HarnessError::Input(e.to_string()))?;
    let mut ids = BTreeSet::new();
    for t in &tasks {
        t.validate()?;
        if !ids.insert(t.task_id.as_str()) {
            return Err(HarnessError::InvalidTask {
                task_id: t.task_id.clone(),
                message: "duplicate task id".into(),
            });
        }
    }
    Ok(tasks)
}

/// Reads the task list and the session log and scores them.
pub fn evaluate_log(
    tasks_file: &Path,
    session_log: &Path,
    scoring: &ScoringConfig,
) -> Result<EvaluationReport, HarnessError> {
    let tasks = read_tasks(tasks_file)?;
    let records = crate::session::read_log(session_log).map_err(|e| HarnessError::Input(e.to_string()))?;
    Ok(evaluate(&tasks, &records, scoring))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kis(duration_ms: u64) -> TaskSpec {
        TaskSpec {
            task_id: "t1".into(),
            kind: TaskKind::KisTextual,
            duration_ms,
            targets: vec![Target {
                video_id: "v1".into(),
                start_ms: 1000,
                end_ms: 2000,
            }],
            hint: Some("a boat".into()),
        }
    }

    fn avs(n: usize) -> TaskSpec {
        TaskSpec {
            task_id: "a1".into(),
            kind: TaskKind::Avs,
            duration_ms: 1000,
            targets: (0..n)
                .map(|i| Target {
                    video_id: format!("v{i}"),
                    start_ms: 0,
                    end_ms: 100,
                })
                .collect(),
            hint: None,
        }
    }

    fn sub(task: &str, video: &str, pos: u64, elapsed: u64) -> Submission {
        Submission {
            task_id: task.into(),
            video_id: video.into(),
            position_ms: pos,
            elapsed_ms: elapsed,
        }
    }

    #[test]
    fn kis_spot_values() {
        let t = kis(300_000);
        assert_eq!(judge(&t, &sub("t1", "v1", 1500, 0), 0).unwrap().score_delta, 100.0);
        assert_eq!(judge(&t, &sub("t1", "v1", 1500, 300_000), 0).unwrap().score_delta, 50.0);
        assert_eq!(judge(&t, &sub("t1", "v1", 1500, 150_000), 2).unwrap().score_delta, 55.0);
    }

    #[test]
    fn kis_penalty_floors_at_zero() {
        let t = kis(100);
        assert_eq!(judge(&t, &sub("t1", "v1", 1500, 100), 9).unwrap().score_delta, 0.0);
    }

    #[test]
    fn half_open_target() {
        let t = kis(100);
        assert!(judge(&t, &sub("t1", "v1", 1000, 0), 0).unwrap().correct);
        let v = judge(&t, &sub("t1", "v1", 2000, 0), 0).unwrap();
        assert!(!v.correct);
        assert_eq!(v.matched_target, None);
        assert_eq!(v.wrong_count_so_far, 1);
        assert!(!judge(&t, &sub("t1", "v2", 1500, 0), 0).unwrap().correct);
    }

    #[test]
    fn late_and_mismatch() {
        let t = kis(100);
        assert!(matches!(
            judge(&t, &sub("t1", "v1", 1500, 101), 0),
            Err(HarnessError::Late { .. })
        ));
        assert!(matches!(
            judge(&t, &sub("t2", "v1", 1500, 1), 0),
            Err(HarnessError::TaskMismatch { .. })
        ));
    }

    #[test]
    fn avs_shares_and_penalty() {
        let t = avs(4);
        let cfg = ScoringConfig::default();
        let mut found = BTreeSet::new();
        let v = cfg.judge(&t, &sub("a1", "v0", 50, 0), 0, &found).unwrap();
        assert_eq!(v.score_delta, 25.0);
        found.insert(0);
        let again = cfg.judge(&t, &sub("a1", "v0", 60, 0), 0, &found).unwrap();
        assert!(again.correct);
        assert_eq!(again.score_delta, 0.0);
        let penalised = cfg.judge(&t, &sub("a1", "v1", 60, 0), 1, &found).unwrap();
        assert!((penalised.score_delta - 25.0 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn run_task_cases() {
        let t = kis(1_000_000);
        let empty = run_task(&t, &[]);
        assert_eq!(empty.score, 0.0);
        assert!(!empty.solved);

        let r = run_task(&t, &[sub("t1", "v9", 0, 0), sub("t1", "v1", 1500, 1)]);
        assert!(r.solved);
        assert_eq!(r.wrong, 1);
        assert!((r.score - 90.0).abs() < 1e-3);
        assert_eq!(r.time_to_solve_ms, Some(1));

        // nothing after the first correct answer counts
        let r = run_task(&t, &[sub("t1", "v1", 1500, 0), sub("t1", "v9", 0, 5)]);
        assert_eq!((r.score, r.wrong), (100.0, 0));
    }

    #[test]
    fn run_task_counts_late_separately() {
        let t = kis(10);
        let r = run_task(&t, &[sub("t1", "v1", 1500, 11)]);
        assert_eq!((r.late, r.wrong, r.solved), (1, 0, false));
    }

    #[test]
    fn avs_total_capped() {
        let t = avs(3);
        let subs: Vec<_> = (0..3)
            .flat_map(|i| [sub("a1", &format!("v{i}"), 1, i), sub("a1", &format!("v{i}"), 2, i)])
            .collect();
        let r = run_task(&t, &subs);
        assert!((r.score - 100.0).abs() < 1e-9);
        assert_eq!(r.targets_found, 3);
    }

    #[test]
    fn task_validation() {
        let mut t = kis(10);
        t.validate().unwrap();
        t.targets.push(t.targets[0].clone());
        assert!(t.validate().is_err());
        assert!(avs(0).validate().is_err());
        let mut z = kis(0);
        assert!(z.validate().is_err());
        z.duration_ms = 5;
        z.targets[0].end_ms = z.targets[0].start_ms;
        assert!(z.validate().is_err());
    }

    #[test]
    fn report_formatting() {
        let report = EvaluationReport {
            overall_mean: Some(100.0 / 3.0),
            per_kind: vec![],
            tasks: vec![],
            unknown_task_ids: vec![],
        };
        let s = serde_json::to_string(&report).unwrap();
        assert_eq!(
            s,
            r#"{"overall_mean":33.33,"per_kind":[],"tasks":[],"unknown_task_ids":[]}"#
        );
    }

    #[test]
    fn singleton_and_two_kind_means() {
        let log = |task: &str, video: &str, pos: u64| LogRecord {
            ts_ms: 0,
            session_id: "s".into(),
            command: Command::Submit {
                task_id: Some(task.into()),
                video_id: video.into(),
                position_ms: pos,
                elapsed_ms: Some(0),
            },
        };
        let cfg = ScoringConfig::default();
        let r = evaluate(&[kis(100)], &[log("t1", "v1", 1500)], &cfg);
        assert_eq!(r.overall_mean, Some(100.0));
        assert_eq!(r.per_kind[0].mean_score, 100.0);

        let mut a = avs(1);
        a.task_id = "a1".into();
        let r = evaluate(&[kis(100), a], &[log("t1", "v1", 1500), log("zz", "v1", 0)], &cfg);
        assert_eq!(r.overall_mean, Some(50.0));
        assert_eq!(r.unknown_task_ids, vec!["zz".to_string()]);
    }

    #[test]
    fn scoring_config_toml() {
        let c = ScoringConfig::from_toml_str("kis_wrong_penalty = 5.0\n").unwrap();
        assert_eq!(c.kis_wrong_penalty, 5.0);
        assert_eq!(c.kis_base, 50.0);
        assert!(ScoringConfig::from_toml_str("kis_base = -1.0\n").is_err());
    }
}
