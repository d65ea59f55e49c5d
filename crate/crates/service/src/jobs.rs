//! Long-running jobs, persisted as JSON status files.

use dispute_core::control::StrategySummary;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Train,
    Campaign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub job_id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    /// Fraction of the work finished, in [0, 1].
    pub progress: f64,
    /// The trained model, or the model a campaign ran on.
    pub model_id: Option<String>,
    /// Campaign outcome; the full report is served separately.
    pub summary: Option<StrategySummary>,
    pub error: Option<String>,
    pub created_at: u64,
}

/// Job table guarded by one lock; every change is written through to disk.
pub struct JobTable {
    dir: PathBuf,
    jobs: Mutex<HashMap<String, Job>>,
}

impl JobTable {
    /// Loads persisted jobs. Jobs that were queued or running when the
    /// service stopped are marked failed with "interrupted".
    pub fn open(dir: &Path) -> io::Result<JobTable> {
        let mut jobs = HashMap::new();
        for item in fs::read_dir(dir)? {
            let path = item?.path();
            let is_status = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".json") && !n.ends_with(".report.json"));
            if !is_status {
                continue;
            }
            let Ok(mut job) = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Job>(&t).map_err(|e| e.to_string()))
            else {
                tracing::warn!("skipping unreadable job file {}", path.display());
                continue;
            };
            if !job.status.is_terminal() {
                job.status = JobStatus::Failed;
                job.error = Some("interrupted".into());
                persist(dir, &job)?;
            }
            jobs.insert(job.job_id.clone(), job);
        }
        Ok(JobTable {
            dir: dir.to_path_buf(),
            jobs: Mutex::new(jobs),
        })
    }

    pub fn get(&self, id: &str) -> Option<Job> {
        self.jobs.lock().expect("job lock").get(id).cloned()
    }

    pub fn insert(&self, job: Job) -> io::Result<()> {
        persist(&self.dir, &job)?;
        self.jobs.lock().expect("job lock").insert(job.job_id.clone(), job);
        Ok(())
    }

    /// Applies `f` to the job unless that would move its status backwards or
    /// out of a terminal state.
    pub fn update(&self, id: &str, f: impl FnOnce(&mut Job)) -> io::Result<()> {
        let mut jobs = self.jobs.lock().expect("job lock");
        let Some(job) = jobs.get_mut(id) else {
            return Ok(());
        };
        let mut next = job.clone();
        f(&mut next);
        if next.status < job.status || (job.status.is_terminal() && next.status != job.status) {
            return Ok(());
        }
        persist(&self.dir, &next)?;
        *job = next;
        Ok(())
    }

    pub fn report_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.report.json"))
    }
}

fn persist(dir: &Path, job: &Job) -> io::Result<()> {
    let path = dir.join(format!("{}.json", job.job_id));
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, serde_json::to_string_pretty(job).expect("job serializes"))?;
    fs::rename(tmp, path)
}
