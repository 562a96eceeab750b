//! JSON-over-HTTP surface of the curation service.
//!
//! Every response is an envelope: `{"ok": true, "data": ...}` or
//! `{"ok": false, "error": {"code", "message", "current_revision"?}}`.
//! Export endpoints are the exception and return the raw dataset.
//!
//! Mutations need `Authorization: Bearer <token>`; tokens are issued by
//! `POST /users`. Reads accept an optional token, which identifies the
//! viewer for "own label" and "differs from mine" fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use labelcommons_core::adapter::{AdapterError, SourceAdapter};
use labelcommons_core::eval::{self, PredictionSet, Weighting};
use labelcommons_core::metrics::{self, QuadrantThresholds};
use labelcommons_core::model::{
    encode, CampaignId, Choice, EntityId, LabelValue, NotificationId, PostId, PrimaryValue,
    ThreadScope, Timestamp, UserId,
};
use labelcommons_core::{
    credential_digest, Curation, CurationError, EntityView, ExportFormat, ExportOptions,
    ExternalMapping, Member, NewCampaign, SortMode,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::ExportConfig;

#[derive(Clone)]
pub struct AppState {
    pub core: Arc<Curation>,
    pub adapter: Arc<dyn SourceAdapter>,
    /// Applied to new campaigns that do not choose their own.
    pub thresholds: QuadrantThresholds,
    pub export: ExportConfig,
}

impl AppState {
    pub fn new(core: Arc<Curation>) -> Self {
        Self {
            core,
            adapter: Arc::new(NoAdapter),
            thresholds: QuadrantThresholds::default(),
            export: ExportConfig::default(),
        }
    }
}

/// Used when no adapter is configured: unknown refs cannot be fetched.
pub struct NoAdapter;

impl SourceAdapter for NoAdapter {
    fn name(&self) -> &str {
        "none"
    }

    fn fetch(&self, _: &str) -> Result<String, AdapterError> {
        Err(AdapterError::Other(
            "no content adapter is configured".into(),
        ))
    }
}

// ---- errors ----

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub current_revision: Option<u64>,
}

/// The HTTP status for each error code. Each code maps to exactly one status.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "invalid_request" | "parse_error" => StatusCode::BAD_REQUEST,
        "auth_required" | "invalid_token" => StatusCode::UNAUTHORIZED,
        "unknown_user" | "unknown_campaign" | "unknown_entity" | "unknown_section"
        | "unknown_dimension" | "unknown_scope" | "unknown_parent" | "not_found" => {
            StatusCode::NOT_FOUND
        }
        "duplicate_user"
        | "duplicate_name"
        | "duplicate_external_ref"
        | "revision_conflict"
        | "no_primary_yet"
        | "excluded_entity" => StatusCode::CONFLICT,
        "invalid_schema"
        | "schema_mismatch"
        | "empty_topic_title"
        | "invalid_thresholds"
        | "invalid_predictions"
        | "empty_evaluation"
        | "length_mismatch"
        | "non_finite_score"
        | "score_out_of_range"
        | "degenerate_labels" => StatusCode::UNPROCESSABLE_ENTITY,
        "adapter_fetch_failed" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl ApiError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: status_for(code),
            code,
            message: message.into(),
            current_revision: None,
        }
    }

    fn auth_required() -> Self {
        Self::new("auth_required", "this request needs a bearer token")
    }

    fn internal() -> Self {
        Self::new("internal", "internal error")
    }
}

impl From<CurationError> for ApiError {
    fn from(e: CurationError) -> Self {
        let code = e.code();
        match e {
            CurationError::Storage(detail) => {
                tracing::error!(%detail, "storage failure");
                Self::new(code, "the request could not be stored")
            }
            CurationError::RevisionConflict { current } => Self {
                current_revision: Some(current),
                ..Self::new(code, e.to_string())
            },
            other => Self::new(code, other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::new("invalid_request", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::new("invalid_request", e.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(e: PathRejection) -> Self {
        Self::new("invalid_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(rev) = self.current_revision {
            error["current_revision"] = json!(rev);
        }
        (
            self.status,
            axum::Json(json!({ "ok": false, "error": error })),
        )
            .into_response()
    }
}

// ---- extractors ----

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Json<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Path<T>(T);

fn bearer(parts: &Parts) -> Result<Option<&str>, ApiError> {
    let Some(value) = parts.headers.get(AUTHORIZATION) else {
        return Ok(None);
    };
    let value = value
        .to_str()
        .map_err(|_| ApiError::new("invalid_token", "malformed authorization header"))?;
    value
        .strip_prefix("Bearer ")
        .map(|t| Some(t.trim()))
        .ok_or_else(|| ApiError::new("invalid_token", "expected a bearer token"))
}

fn resolve(state: &AppState, token: &str) -> Result<Member, ApiError> {
    state
        .core
        .member_by_credential(&credential_digest(token))
        .ok_or_else(|| ApiError::new("invalid_token", "unknown or revoked token"))
}

/// The authenticated caller. Rejects requests without a valid token.
struct Caller(UserId);

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        let token = bearer(parts)?.ok_or_else(ApiError::auth_required)?;
        Ok(Caller(resolve(state, token)?.id))
    }
}

/// The caller when a token is present.
struct Viewer(Option<UserId>);

impl FromRequestParts<AppState> for Viewer {
    type Rejection = ApiError;

    async fn from_request_parts(
        parts: &mut Parts,
        state: &AppState,
    ) -> Result<Self, Self::Rejection> {
        match bearer(parts)? {
            Some(token) => Ok(Viewer(Some(resolve(state, token)?.id))),
            None => Ok(Viewer(None)),
        }
    }
}

// ---- helpers ----

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(data: T) -> ApiResult {
    Ok(axum::Json(json!({ "ok": true, "data": data })).into_response())
}

fn created<T: Serialize>(data: T) -> ApiResult {
    Ok((
        StatusCode::CREATED,
        axum::Json(json!({ "ok": true, "data": data })),
    )
        .into_response())
}

/// Runs a core call off the async executor; journal appends may fsync.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, CurationError> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(_) => Err(ApiError::internal()),
    }
}

fn entity_in(
    core: &Curation,
    viewer: Option<&UserId>,
    c: CampaignId,
    e: EntityId,
) -> Result<EntityView, CurationError> {
    let view = core.entity_view(viewer, e)?;
    if view.entity.campaign != c {
        return Err(CurationError::UnknownEntity(e));
    }
    Ok(view)
}

#[derive(Debug, Serialize)]
pub struct PublicMember {
    pub id: UserId,
    pub display_name: String,
    pub registered_at: Timestamp,
}

impl From<Member> for PublicMember {
    fn from(m: Member) -> Self {
        Self {
            id: m.id,
            display_name: m.display_name,
            registered_at: m.registered_at,
        }
    }
}

// ---- users and notifications ----

#[derive(Deserialize)]
struct Register {
    id: UserId,
    display_name: Option<String>,
}

async fn register(State(st): State<AppState>, Json(body): Json<Register>) -> ApiResult {
    let token = uuid::Uuid::new_v4().simple().to_string();
    let digest = credential_digest(&token);
    let core = st.core.clone();
    let display = body.display_name.unwrap_or_else(|| body.id.to_string());
    let member = blocking(move || core.register_member(body.id, display, Some(digest))).await?;
    created(json!({ "user": PublicMember::from(member), "token": token }))
}

async fn me(State(st): State<AppState>, caller: Caller) -> ApiResult {
    let member = st.core.member(&caller.0).ok_or_else(ApiError::internal)?;
    ok(PublicMember::from(member))
}

#[derive(Deserialize)]
struct NotificationQuery {
    #[serde(default)]
    unread_only: bool,
}

async fn notifications(
    State(st): State<AppState>,
    caller: Caller,
    Query(q): Query<NotificationQuery>,
) -> ApiResult {
    ok(st.core.list_notifications(&caller.0, q.unread_only)?)
}

#[derive(Deserialize, Default)]
struct MarkRead {
    ids: Option<Vec<NotificationId>>,
}

async fn notifications_read(
    State(st): State<AppState>,
    caller: Caller,
    Json(body): Json<MarkRead>,
) -> ApiResult {
    let core = st.core.clone();
    let changed = blocking(move || core.mark_notifications_read(&caller.0, body.ids)).await?;
    ok(json!({ "marked": changed }))
}

// ---- campaigns ----

async fn list_campaigns(State(st): State<AppState>) -> ApiResult {
    ok(st.core.campaigns())
}

async fn create_campaign(
    State(st): State<AppState>,
    caller: Caller,
    Json(mut spec): Json<NewCampaign>,
) -> ApiResult {
    spec.thresholds.get_or_insert(st.thresholds);
    let core = st.core.clone();
    let id = blocking(move || core.create_campaign(spec, &caller.0)).await?;
    created(json!({ "campaign": id }))
}

async fn get_campaign(State(st): State<AppState>, Path(c): Path<CampaignId>) -> ApiResult {
    ok(st.core.campaign(c)?)
}

async fn set_thresholds(
    State(st): State<AppState>,
    caller: Caller,
    Path(c): Path<CampaignId>,
    Json(t): Json<QuadrantThresholds>,
) -> ApiResult {
    let core = st.core.clone();
    blocking(move || core.set_quadrant_thresholds(c, t, &caller.0)).await?;
    ok(t)
}

#[derive(Deserialize)]
struct ImportQuery {
    format: Option<ExportFormat>,
    name: Option<String>,
}

async fn import_campaign(
    State(st): State<AppState>,
    caller: Caller,
    Query(q): Query<ImportQuery>,
    body: axum::body::Bytes,
) -> ApiResult {
    let format = q.format.unwrap_or(ExportFormat::Jsonl);
    let core = st.core.clone();
    let id =
        blocking(move || core.import_campaign(&body, format, &caller.0, q.name.as_deref())).await?;
    created(json!({ "campaign": id }))
}

#[derive(Deserialize)]
struct MappedImport {
    mapping: ExternalMapping,
    data: String,
}

async fn import_mapped(
    State(st): State<AppState>,
    caller: Caller,
    Json(body): Json<MappedImport>,
) -> ApiResult {
    let core = st.core.clone();
    let id = blocking(move || core.import_mapped(body.data.as_bytes(), &body.mapping, &caller.0))
        .await?;
    created(json!({ "campaign": id }))
}

#[derive(Deserialize)]
struct TableQuery {
    sort: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn table(
    State(st): State<AppState>,
    viewer: Viewer,
    Path(c): Path<CampaignId>,
    Query(q): Query<TableQuery>,
) -> ApiResult {
    let sort = match q.sort.as_deref() {
        None => SortMode::FewestLabels,
        Some(s) => s
            .parse()
            .map_err(|e: String| ApiError::new("invalid_request", e))?,
    };
    ok(st.core.list_table(
        c,
        viewer.0.as_ref(),
        sort,
        q.page.unwrap_or(0),
        q.page_size.unwrap_or(0),
    )?)
}

async fn stats(State(st): State<AppState>, Path(c): Path<CampaignId>) -> ApiResult {
    ok(st.core.campaign_stats(c)?)
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<ExportFormat>,
    pseudonymize: Option<bool>,
}

async fn export(
    State(st): State<AppState>,
    Path(c): Path<CampaignId>,
    Query(q): Query<ExportQuery>,
) -> ApiResult {
    let format = q.format.unwrap_or(ExportFormat::Jsonl);
    let options = if q.pseudonymize.unwrap_or(st.export.pseudonymize) {
        ExportOptions::pseudonymized(st.export.salt.clone())
    } else {
        ExportOptions::default()
    };
    let bytes = st.core.export_campaign(c, format, &options)?;
    Ok(([(CONTENT_TYPE, format.content_type())], bytes).into_response())
}

#[derive(Deserialize)]
struct Evaluate {
    dimension: String,
    predictions: Vec<PredictionSet>,
    #[serde(default)]
    weighting: Weighting,
}

async fn evaluate(
    State(st): State<AppState>,
    Path(c): Path<CampaignId>,
    Json(body): Json<Evaluate>,
) -> ApiResult {
    ok(st
        .core
        .compare_models(c, &body.dimension, &body.predictions, body.weighting)?)
}

async fn datasheet(State(st): State<AppState>, Path(c): Path<CampaignId>) -> ApiResult {
    ok(st.core.datasheet(c)?)
}

#[derive(Deserialize)]
struct TextBody {
    text: String,
}

async fn edit_section(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, section)): Path<(CampaignId, String)>,
    Json(body): Json<TextBody>,
) -> ApiResult {
    let core = st.core.clone();
    let rev =
        blocking(move || core.edit_datasheet_section(c, &section, &body.text, &caller.0)).await?;
    ok(json!({ "revision": rev }))
}

async fn edit_definition(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, dimension)): Path<(CampaignId, String)>,
    Json(body): Json<TextBody>,
) -> ApiResult {
    let core = st.core.clone();
    let rev =
        blocking(move || core.edit_dimension_definition(c, &dimension, &body.text, &caller.0))
            .await?;
    ok(json!({ "revision": rev }))
}

// ---- entities ----

#[derive(Deserialize)]
struct NewEntity {
    external_ref: String,
    #[serde(default)]
    content_snapshot: String,
}

async fn add_entity(
    State(st): State<AppState>,
    caller: Caller,
    Path(c): Path<CampaignId>,
    Json(body): Json<NewEntity>,
) -> ApiResult {
    let core = st.core.clone();
    let id =
        blocking(move || core.add_entity(c, &body.external_ref, &body.content_snapshot, &caller.0))
            .await?;
    created(json!({ "entity": id }))
}

async fn entity_view(
    State(st): State<AppState>,
    viewer: Viewer,
    Path((c, e)): Path<(CampaignId, EntityId)>,
) -> ApiResult {
    ok(entity_in(&st.core, viewer.0.as_ref(), c, e)?)
}

#[derive(Deserialize)]
struct Submit {
    values: Vec<LabelValue>,
    note: Option<String>,
}

async fn submit_label(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, e)): Path<(CampaignId, EntityId)>,
    Json(body): Json<Submit>,
) -> ApiResult {
    let core = st.core.clone();
    let outcome = blocking(move || {
        entity_in(&core, None, c, e)?;
        core.submit_individual_label(&caller.0, e, &body.values, body.note)
    })
    .await?;
    ok(outcome)
}

async fn primary_form(
    State(st): State<AppState>,
    Path((c, e)): Path<(CampaignId, EntityId)>,
) -> ApiResult {
    entity_in(&st.core, None, c, e)?;
    ok(st.core.primary_edit_form(e)?)
}

#[derive(Deserialize)]
struct EditPrimary {
    values: Vec<PrimaryValue>,
    base_revision: u64,
    rationale: Option<String>,
}

async fn edit_primary(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, e)): Path<(CampaignId, EntityId)>,
    Json(body): Json<EditPrimary>,
) -> ApiResult {
    let core = st.core.clone();
    let primary = blocking(move || {
        entity_in(&core, None, c, e)?;
        core.edit_primary_label(
            &caller.0,
            e,
            &body.values,
            body.base_revision,
            body.rationale,
        )
    })
    .await?;
    ok(primary)
}

#[derive(Deserialize)]
struct Exclude {
    reason: String,
}

async fn exclude(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, e)): Path<(CampaignId, EntityId)>,
    Json(body): Json<Exclude>,
) -> ApiResult {
    let core = st.core.clone();
    let outcome = blocking(move || core.exclude_entity(c, e, &caller.0, &body.reason)).await?;
    ok(json!({ "outcome": outcome }))
}

// ---- talk ----

#[derive(Deserialize)]
struct NewPost {
    topic: String,
    body: String,
    parent: Option<PostId>,
}

async fn new_post(st: &AppState, scope: ThreadScope, user: UserId, body: NewPost) -> ApiResult {
    let core = st.core.clone();
    let id =
        blocking(move || core.post_to_thread(scope, &body.topic, &body.body, &user, body.parent))
            .await?;
    created(json!({ "post": id }))
}

async fn campaign_talk(State(st): State<AppState>, Path(c): Path<CampaignId>) -> ApiResult {
    ok(st.core.thread(ThreadScope::Campaign(c))?)
}

async fn post_campaign_talk(
    State(st): State<AppState>,
    caller: Caller,
    Path(c): Path<CampaignId>,
    Json(body): Json<NewPost>,
) -> ApiResult {
    new_post(&st, ThreadScope::Campaign(c), caller.0, body).await
}

async fn entity_talk(
    State(st): State<AppState>,
    Path((c, e)): Path<(CampaignId, EntityId)>,
) -> ApiResult {
    entity_in(&st.core, None, c, e)?;
    ok(st.core.thread(ThreadScope::Entity(e))?)
}

async fn post_entity_talk(
    State(st): State<AppState>,
    caller: Caller,
    Path((c, e)): Path<(CampaignId, EntityId)>,
    Json(body): Json<NewPost>,
) -> ApiResult {
    entity_in(&st.core, None, c, e)?;
    new_post(&st, ThreadScope::Entity(e), caller.0, body).await
}

// ---- quick label ----

#[derive(Deserialize)]
struct QuickLabel {
    campaign: CampaignId,
    external_ref: String,
    values: Vec<LabelValue>,
    note: Option<String>,
}

async fn quick_label(
    State(st): State<AppState>,
    caller: Caller,
    Json(body): Json<QuickLabel>,
) -> ApiResult {
    let core = st.core.clone();
    let adapter = st.adapter.clone();
    let outcome = blocking(move || {
        core.quick_label(
            &caller.0,
            body.campaign,
            &body.external_ref,
            &body.values,
            body.note,
            adapter.as_ref(),
        )
    })
    .await?;
    ok(outcome)
}

// ---- pure computations ----

#[derive(Deserialize)]
struct LabelsBody {
    labels: Vec<LabelValue>,
}

async fn encode_labels(Json(body): Json<LabelsBody>) -> ApiResult {
    ok(body
        .labels
        .iter()
        .map(|l| encode(l).value())
        .collect::<Vec<f64>>())
}

async fn disagreement(Json(body): Json<LabelsBody>) -> ApiResult {
    ok(metrics::disagreement(&body.labels))
}

async fn low_conf_fraction(Json(body): Json<LabelsBody>) -> ApiResult {
    ok(metrics::low_conf_fraction(&body.labels))
}

#[derive(Deserialize)]
struct QuadrantBody {
    disagreement: f64,
    low_conf_fraction: f64,
    thresholds: Option<QuadrantThresholds>,
}

async fn quadrant(State(st): State<AppState>, Json(body): Json<QuadrantBody>) -> ApiResult {
    let t = body.thresholds.unwrap_or(st.thresholds);
    t.validate()?;
    ok(metrics::quadrant(
        body.disagreement,
        body.low_conf_fraction,
        t,
    ))
}

#[derive(Deserialize)]
struct ScoresBody {
    labels: Vec<Choice>,
    scores: Vec<f64>,
}

async fn roc(Json(b): Json<ScoresBody>) -> ApiResult {
    ok(eval::roc(&b.labels, &b.scores).map_err(CurationError::from)?)
}

async fn auc(Json(b): Json<ScoresBody>) -> ApiResult {
    ok(eval::auc(&b.labels, &b.scores).map_err(CurationError::from)?)
}

async fn best_threshold(Json(b): Json<ScoresBody>) -> ApiResult {
    ok(eval::best_accuracy_threshold(&b.labels, &b.scores).map_err(CurationError::from)?)
}

async fn fallback() -> ApiError {
    ApiError::new("not_found", "no such endpoint")
}

async fn health() -> ApiResult {
    ok(BTreeMap::from([("status", "up")]))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/users", post(register))
        .route("/users/me", get(me))
        .route("/notifications", get(notifications))
        .route("/notifications/read", post(notifications_read))
        .route("/campaigns", get(list_campaigns).post(create_campaign))
        .route("/campaigns/import", post(import_campaign))
        .route("/campaigns/import-mapped", post(import_mapped))
        .route("/campaigns/{c}", get(get_campaign))
        .route("/campaigns/{c}/thresholds", put(set_thresholds))
        .route("/campaigns/{c}/table", get(table))
        .route("/campaigns/{c}/stats", get(stats))
        .route("/campaigns/{c}/export", get(export))
        .route("/campaigns/{c}/evaluate", post(evaluate))
        .route("/campaigns/{c}/datasheet", get(datasheet))
        .route("/campaigns/{c}/datasheet/{section}", put(edit_section))
        .route(
            "/campaigns/{c}/definitions/{dimension}",
            put(edit_definition),
        )
        .route(
            "/campaigns/{c}/talk",
            get(campaign_talk).post(post_campaign_talk),
        )
        .route("/campaigns/{c}/entities", post(add_entity))
        .route("/campaigns/{c}/entities/{e}", get(entity_view))
        .route("/campaigns/{c}/entities/{e}/labels", post(submit_label))
        .route(
            "/campaigns/{c}/entities/{e}/primary",
            get(primary_form).put(edit_primary),
        )
        .route("/campaigns/{c}/entities/{e}/exclude", post(exclude))
        .route(
            "/campaigns/{c}/entities/{e}/talk",
            get(entity_talk).post(post_entity_talk),
        )
        .route("/quick-label", post(quick_label))
        .route("/metrics/encode", post(encode_labels))
        .route("/metrics/disagreement", post(disagreement))
        .route("/metrics/low-conf-fraction", post(low_conf_fraction))
        .route("/metrics/quadrant", post(quadrant))
        .route("/eval/roc", post(roc))
        .route("/eval/auc", post(auc))
        .route("/eval/best-threshold", post(best_threshold))
        .fallback(fallback)
        .with_state(state)
}
