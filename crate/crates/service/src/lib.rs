//! HTTP front-end over trained dispute models.
//!
//! Models, datasets and job records live under one artifact directory; the
//! in-memory registry is rebuilt from it at startup. Training and campaign
//! jobs run on a bounded worker pool.

pub mod api;
pub mod jobs;
pub mod store;

use dispute_core::control::StrategySummary;
use jobs::{JobStatus, JobTable};
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use store::Store;
use tokio::sync::Semaphore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub artifact_dir: PathBuf,
    /// Jobs allowed to run at once; at least 1.
    pub workers: usize,
    /// Directory of static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub jobs: Arc<JobTable>,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn open(artifact_dir: impl Into<PathBuf>, workers: usize) -> io::Result<AppState> {
        let store = Store::open(artifact_dir)?;
        let jobs = JobTable::open(&store.jobs_dir())?;
        Ok(AppState {
            store: Arc::new(store),
            jobs: Arc::new(jobs),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        })
    }
}

/// Result of a finished job: the model it produced or ran on, and a
/// campaign summary.
pub(crate) type JobOutput = Result<(Option<String>, Option<StrategySummary>), String>;

/// Queues `work` behind a worker permit and records its outcome.
pub(crate) fn spawn_job(state: &AppState, job_id: String, work: impl FnOnce() -> JobOutput + Send + 'static) {
    let jobs = state.jobs.clone();
    let workers = state.workers.clone();
    tokio::spawn(async move {
        let _permit = workers.acquire_owned().await.expect("worker semaphore open");
        record(&jobs, &job_id, |j| j.status = JobStatus::Running);
        let outcome = tokio::task::spawn_blocking(work)
            .await
            .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
        record(&jobs, &job_id, |j| match outcome {
            Ok((model_id, summary)) => {
                j.status = JobStatus::Done;
                j.progress = 1.0;
                j.model_id = model_id.or(j.model_id.take());
                j.summary = summary;
            }
            Err(e) => {
                j.status = JobStatus::Failed;
                j.error = Some(e);
            }
        });
    });
}

fn record(jobs: &JobTable, id: &str, f: impl FnOnce(&mut jobs::Job)) {
    if let Err(e) = jobs.update(id, f) {
        tracing::error!("persisting job {id}: {e}");
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> axum::Router {
    let app = api::routes().with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app,
    }
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> io::Result<()> {
    let state = AppState::open(&config.artifact_dir, config.workers)?;
    let app = router(state, config.static_dir.clone());
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
