//! `/v1` JSON endpoints.

use crate::jobs::{Job, JobKind, JobStatus};
use crate::store::{now_unix, valid_id, RegisteredModel};
use crate::AppState;
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dispute_core::arch_ga::GaConfig;
use dispute_core::bayes::{EvidenceConfig, HmcConfig};
use dispute_core::control::{
    campaign_csv, control_multi, control_single, ControlConfig, ControlError, Strategy, StrategySummary,
};
use dispute_core::data::{case_from_values, DataError, FieldError, Variable, VariableSchema};
use dispute_core::eval::{auc_from_scores, confusion, roc, scenario_sweep, true_rates, Verdict};
use dispute_core::mlp::Activation;
use dispute_core::model::Predictor;
use dispute_core::pipeline::{train_model, TrainMethod, TrainRecipe};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

pub fn routes() -> Router<AppState> {
    Router::new()
        .route("/v1/datasets", post(upload_dataset))
        .route("/v1/train", post(start_training))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/jobs/{id}/report", get(get_report))
        .route("/v1/models", get(list_models))
        .route("/v1/models/{id}", get(get_model))
        .route("/v1/models/{id}/predict", post(predict))
        .route("/v1/models/{id}/control/single", post(whatif_single))
        .route("/v1/models/{id}/control/multi", post(whatif_multi))
        .route("/v1/models/{id}/relevance", get(relevance))
        .route("/v1/models/{id}/scenarios", get(scenarios))
        .route("/v1/models/{id}/campaign", post(start_campaign))
        .route("/v1/models/{id}/roc", get(roc_curve))
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError {
            status,
            error: error.into(),
            fields: vec![],
        }
    }

    fn not_found(what: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} not found"))
    }

    fn invalid(error: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, error)
    }

    fn internal(error: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, error.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<DataError> for ApiError {
    fn from(e: DataError) -> Self {
        let mut err = ApiError::invalid(e.to_string());
        if let DataError::OutOfDomain { variable, .. } = &e {
            err.fields.push(FieldError {
                field: variable.name().into(),
                message: e.to_string(),
            });
        }
        err
    }
}

impl From<ControlError> for ApiError {
    fn from(e: ControlError) -> Self {
        ApiError::invalid(e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))
}

fn model(state: &AppState, id: &str) -> ApiResult<Arc<RegisteredModel>> {
    state.store.model(id).ok_or_else(|| ApiError::not_found("model"))
}

fn case(values: &BTreeMap<String, f64>) -> ApiResult<dispute_core::data::DyadYearRecord> {
    case_from_values(&VariableSchema::standard(), values).map_err(|fields| ApiError {
        status: StatusCode::UNPROCESSABLE_ENTITY,
        error: "case fails schema validation".into(),
        fields,
    })
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(ApiError::internal)
}

#[derive(Debug, Serialize)]
struct DatasetSummary {
    dataset_id: String,
    n_records: usize,
    n_disputes: usize,
    n_peace: usize,
}

async fn upload_dataset(State(state): State<AppState>, body: String) -> ApiResult<(StatusCode, Json<DatasetSummary>)> {
    let store = state.store.clone();
    let (dataset_id, ds) = blocking(move || store.put_dataset(&body)).await??;
    let (n_disputes, n_peace) = ds.class_counts();
    Ok((
        StatusCode::CREATED,
        Json(DatasetSummary {
            dataset_id,
            n_records: ds.len(),
            n_disputes,
            n_peace,
        }),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRequest {
    dataset_id: String,
    method: TrainMethod,
    #[serde(default)]
    seed: u64,
    hidden: Option<usize>,
    hidden_activation: Option<Activation>,
    output_activation: Option<Activation>,
    /// Choose the architecture by genetic search instead of `hidden`.
    #[serde(default)]
    ga_search: bool,
    ga: Option<GaConfig>,
    evidence: Option<EvidenceConfig>,
    hmc: Option<HmcConfig>,
    chains: Option<usize>,
}

impl TrainRequest {
    fn recipe(&self) -> Result<TrainRecipe, String> {
        let d = TrainRecipe::default();
        let recipe = TrainRecipe {
            method: self.method,
            hidden: self.hidden.unwrap_or(d.hidden),
            hidden_activation: self.hidden_activation.unwrap_or(d.hidden_activation),
            output_activation: self.output_activation.unwrap_or(d.output_activation),
            evidence: self.evidence.clone().unwrap_or_default(),
            hmc: self.hmc.clone().unwrap_or_default(),
            chains: self.chains.unwrap_or(d.chains),
            ga: (self.ga_search || self.ga.is_some()).then(|| self.ga.clone().unwrap_or_default()),
            seed: self.seed,
        };
        if recipe.hidden == 0 || recipe.chains == 0 {
            return Err("hidden and chains must be at least 1".into());
        }
        recipe.evidence.validate().map_err(|e| e.to_string())?;
        recipe.hmc.validate().map_err(|e| e.to_string())?;
        if let Some(ga) = &recipe.ga {
            ga.validate().map_err(|e| e.to_string())?;
        }
        Ok(recipe)
    }
}

fn new_job(kind: JobKind, model_id: Option<String>) -> Job {
    Job {
        job_id: uuid::Uuid::new_v4().to_string(),
        kind,
        status: JobStatus::Queued,
        progress: 0.0,
        model_id,
        summary: None,
        error: None,
        created_at: now_unix(),
    }
}

fn fail_now(state: &AppState, mut job: Job, message: String) -> ApiResult<(StatusCode, Json<Job>)> {
    job.status = JobStatus::Failed;
    job.error = Some(message);
    state.jobs.insert(job.clone()).map_err(ApiError::internal)?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn start_training(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Job>)> {
    let req: TrainRequest = parse_body(&body)?;
    let job = new_job(JobKind::Train, None);
    let recipe = match req.recipe() {
        Ok(r) => r,
        Err(e) => return fail_now(&state, job, format!("invalid configuration: {e}")),
    };
    let dataset = match state.store.dataset(&req.dataset_id) {
        None => return fail_now(&state, job, "dataset not found".into()),
        Some(Err(e)) => return fail_now(&state, job, e.to_string()),
        Some(Ok(ds)) => ds,
    };
    state.jobs.insert(job.clone()).map_err(ApiError::internal)?;
    let store = state.store.clone();
    let dataset_id = req.dataset_id.clone();
    crate::spawn_job(&state, job.job_id.clone(), move || {
        let artifact = train_model(&dataset, &recipe).map_err(|e| e.to_string())?;
        let entry = store.register(artifact, dataset_id).map_err(|e| e.to_string())?;
        Ok((Some(entry.model_id), None))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    state.jobs.get(&id).map(Json).ok_or_else(|| ApiError::not_found("job"))
}

async fn get_report(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = state.jobs.get(&id).ok_or_else(|| ApiError::not_found("job"))?;
    if job.kind != JobKind::Campaign || job.status != JobStatus::Done || !valid_id(&id) {
        return Err(ApiError::not_found("report"));
    }
    let text = std::fs::read_to_string(state.jobs.report_path(&id)).map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<crate::store::ModelEntry>> {
    Json(state.store.entries())
}

async fn get_model(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let m = model(&state, &id)?;
    Ok(Json(serde_json::json!({ "entry": m.entry, "artifact": m.artifact })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    case: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct PredictResponse {
    probability: f64,
    confidence: f64,
    verdict: Verdict,
    scaled_input: Vec<f64>,
}

async fn predict(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<PredictResponse>> {
    let m = model(&state, &id)?;
    let req: PredictRequest = parse_body(&body)?;
    let record = case(&req.case)?;
    blocking(move || {
        let x = m.artifact.scaled_input(&record);
        let p = m.artifact.predict(&x);
        Json(PredictResponse {
            probability: p.probability,
            confidence: p.confidence,
            verdict: Verdict::from_probability(p.probability, 0.5),
            scaled_input: x.to_vec(),
        })
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SingleRequest {
    case: BTreeMap<String, f64>,
    variable: String,
    config: Option<ControlConfig>,
}

async fn whatif_single(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let m = model(&state, &id)?;
    let req: SingleRequest = parse_body(&body)?;
    let record = case(&req.case)?;
    let variable = Variable::parse(&req.variable).ok_or_else(|| ApiError::invalid(format!("unknown variable {:?}", req.variable)))?;
    let cfg = req.config.unwrap_or_default();
    let result = blocking(move || {
        let a = &m.artifact;
        control_single(a, &a.scaling, &VariableSchema::standard(), &record, variable, &cfg)
    })
    .await??;
    Ok(Json(result).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiRequest {
    case: BTreeMap<String, f64>,
    config: Option<ControlConfig>,
}

async fn whatif_multi(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let m = model(&state, &id)?;
    let req: MultiRequest = parse_body(&body)?;
    let record = case(&req.case)?;
    let cfg = req.config.unwrap_or_default();
    let result = blocking(move || {
        let a = &m.artifact;
        control_multi(a, &a.scaling, &VariableSchema::standard(), &record, &cfg)
    })
    .await??;
    Ok(Json(result).into_response())
}

#[derive(Debug, Serialize)]
struct RelevanceRow {
    variable: String,
    alpha: f64,
    relevance: f64,
}

#[derive(Debug, Serialize)]
struct RelevanceResponse {
    model_id: String,
    /// Model inputs in input order.
    inputs: Vec<RelevanceRow>,
    /// Variable names by descending relevance.
    ranking: Vec<String>,
    shared_alphas: Vec<f64>,
}

async fn relevance(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RelevanceResponse>> {
    let m = model(&state, &id)?;
    let a = &m.artifact;
    let ard = a.ard.as_ref().ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, format!("relevance unavailable for this model kind ({})", a.kind.name()))
    })?;
    let name = |i: usize| a.schema[a.input_columns[i]].clone();
    Ok(Json(RelevanceResponse {
        model_id: id,
        inputs: (0..ard.relevance.len())
            .map(|i| RelevanceRow {
                variable: name(i),
                alpha: ard.input_alphas[i],
                relevance: ard.relevance[i],
            })
            .collect(),
        ranking: ard.ranking.iter().map(|&i| name(i)).collect(),
        shared_alphas: ard.shared_alphas.clone(),
    }))
}

async fn scenarios(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let m = model(&state, &id)?;
    let rows = blocking(move || scenario_sweep(&m.artifact, &m.artifact.scaling, &VariableSchema::standard())).await?;
    Ok(Json(rows).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CampaignRequest {
    dataset_id: String,
    strategy: String,
    config: Option<ControlConfig>,
}

async fn start_campaign(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let m = model(&state, &id)?;
    let req: CampaignRequest = parse_body(&body)?;
    let strategy = Strategy::parse(&req.strategy)
        .ok_or_else(|| ApiError::invalid(format!("strategy must be multi or a controllable variable, got {:?}", req.strategy)))?;
    let cfg = req.config.unwrap_or_default();
    let job = new_job(JobKind::Campaign, Some(id));
    if let Err(e) = cfg.validate() {
        return fail_now(&state, job, format!("invalid configuration: {e}"));
    }
    let dataset = match state.store.dataset(&req.dataset_id) {
        None => return fail_now(&state, job, "dataset not found".into()),
        Some(Err(e)) => return fail_now(&state, job, e.to_string()),
        Some(Ok(ds)) => ds,
    };
    state.jobs.insert(job.clone()).map_err(ApiError::internal)?;
    let report_path = state.jobs.report_path(&job.job_id);
    let model_id = m.entry.model_id.clone();
    crate::spawn_job(&state, job.job_id.clone(), move || {
        let a = &m.artifact;
        let report = dispute_core::control::control_campaign(a, &a.scaling, &dataset.schema, &dataset, strategy, &cfg)
            .map_err(|e| e.to_string())?;
        let json = serde_json::json!({
            "report": report,
            "csv": campaign_csv(&report, strategy),
        });
        std::fs::write(&report_path, serde_json::to_string_pretty(&json).expect("report serializes"))
            .map_err(|e| e.to_string())?;
        Ok((Some(model_id), Some(StrategySummary::from(&report))))
    });
    Ok((StatusCode::ACCEPTED, Json(job)))
}

#[derive(Debug, Deserialize)]
struct RocQuery {
    dataset: String,
    n_thresholds: Option<usize>,
}

async fn roc_curve(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RocQuery>,
) -> ApiResult<Response> {
    let m = model(&state, &id)?;
    let ds = state.store.dataset(&q.dataset).ok_or_else(|| ApiError::not_found("dataset"))??;
    let n = q.n_thresholds.unwrap_or(200);
    let dataset_id = q.dataset;
    let body = blocking(move || -> ApiResult<serde_json::Value> {
        let scores = m.artifact.scores(&ds.records);
        let labels = ds.labels();
        let bad = |e: dispute_core::eval::EvalError| ApiError::invalid(e.to_string());
        let curve = roc(&scores, &labels, n).map_err(bad)?;
        let cm = confusion(&scores, &labels, 0.5).map_err(bad)?;
        let (dispute_rate, peace_rate) = true_rates(&cm).map_err(bad)?;
        Ok(serde_json::json!({
            "model_id": m.entry.model_id,
            "dataset_id": dataset_id,
            "auc": auc_from_scores(&scores, &labels).map_err(bad)?,
            "confusion": cm,
            "true_dispute_rate": dispute_rate,
            "true_peace_rate": peace_rate,
            "points": curve.points,
        }))
    })
    .await??;
    Ok(Json(body).into_response())
}
