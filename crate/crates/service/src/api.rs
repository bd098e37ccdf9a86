//! `/api/v1` handlers and their wire types.
//!
//! Field names match the library types. Interval endpoints are decimal
//! strings that parse back to the exact `f64`.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{RawQuery, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::{DateTime, NaiveDate, Utc};
use covarc_core::{ActivityProfile, DataSnapshot, Flag, Interval, PersonProfile, RiskConfig, RiskError, Sex};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::SnapshotStore;

/// Seconds a client should wait before retrying while no snapshot is loaded.
pub const RETRY_AFTER_SECS: u64 = 5;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<SnapshotStore>,
    /// Service-wide defaults; requests may override fields.
    pub risk: RiskConfig,
    pub reload_token: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
    pub details: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            field: None,
            details: None,
        }
    }

    fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }

    fn details(mut self, details: serde_json::Value) -> Self {
        self.details = Some(details);
        self
    }

    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", message).field(field)
    }

    fn not_loaded() -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "snapshot_not_loaded", "no snapshot has been loaded yet")
    }
}

impl From<RiskError> for ApiError {
    fn from(e: RiskError) -> Self {
        let message = e.to_string();
        match e {
            RiskError::UnknownRegion(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_region", message).field("region"),
            RiskError::InsufficientData {
                region,
                required_from,
                required_to,
                available_from,
                available_to,
            } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", message).details(json!({
                "region": region,
                "required_from": required_from,
                "required_to": required_to,
                "available_from": available_from,
                "available_to": available_to,
            })),
            RiskError::UnknownMask { valid, .. } => ApiError::invalid("profile.mask", message).details(json!({ "valid": valid })),
            RiskError::UnknownVaccine { valid, .. } => ApiError::invalid("profile.vaccine", message).details(json!({ "valid": valid })),
            RiskError::InvalidRange { .. } => ApiError::invalid("from", message),
            RiskError::EmptyUsableRange { .. } => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_assessable_days", message),
            RiskError::InvalidConfig(_) => ApiError::invalid("config_overrides", message),
            RiskError::SeriesTooShort { .. } | RiskError::EmptyInput => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", message)
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(f) = self.field {
            error["field"] = json!(f);
        }
        if let Some(d) = self.details {
            error["details"] = d;
        }
        let mut response = (self.status, Json(json!({ "error": error }))).into_response();
        if self.status == StatusCode::SERVICE_UNAVAILABLE {
            response.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(RETRY_AFTER_SECS));
        }
        response
    }
}

fn loaded(state: &AppState) -> Result<Arc<DataSnapshot>, ApiError> {
    state.store.get().ok_or_else(ApiError::not_loaded)
}

/// Per-request changes to the service's [`RiskConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub k_indoor: Option<f64>,
    pub k_outdoor: Option<f64>,
    pub variant_smoothing_sigma_days: Option<f64>,
    pub variant_lag_days: Option<u32>,
}

impl ConfigOverrides {
    pub fn apply(&self, base: RiskConfig) -> RiskConfig {
        RiskConfig {
            k_indoor: self.k_indoor.unwrap_or(base.k_indoor),
            k_outdoor: self.k_outdoor.unwrap_or(base.k_outdoor),
            variant_smoothing_sigma_days: self.variant_smoothing_sigma_days.unwrap_or(base.variant_smoothing_sigma_days),
            variant_lag_days: self.variant_lag_days.unwrap_or(base.variant_lag_days),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskRequest {
    pub region: String,
    pub date: NaiveDate,
    pub profile: PersonProfile,
    pub activity: ActivityProfile,
    #[serde(default)]
    pub config_overrides: Option<ConfigOverrides>,
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        // malformed JSON has no meaningful path
        let field = if inner.is_syntax() || inner.is_eof() || path == "." || path == "?" {
            "body".to_string()
        } else {
            path
        };
        ApiError::invalid(field, inner.to_string())
    })
}

pub async fn risk(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let snapshot = loaded(&state)?;
    let req: RiskRequest = parse_body(&body)?;
    let config = req.config_overrides.unwrap_or_default().apply(state.risk);
    let report = covarc_core::assess(&snapshot, &req.region, req.date, &req.profile, &req.activity, &config)?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub canonical_id: String,
    pub country: String,
    pub region: Option<String>,
    pub population: u64,
    pub has_variants: bool,
    pub has_ratios: bool,
}

pub async fn regions(State(state): State<AppState>) -> Result<Json<Vec<RegionEntry>>, ApiError> {
    let snapshot = loaded(&state)?;
    // region_ids is ordered by canonical id
    let entries = snapshot
        .region_ids()
        .filter_map(|id| {
            let key = snapshot.region(id)?;
            Some(RegionEntry {
                canonical_id: key.canonical_id.clone(),
                country: key.country.clone(),
                region: key.region.clone(),
                population: snapshot.population(id)?,
                has_variants: snapshot.variants(id).is_some(),
                has_ratios: snapshot.ratios(id).is_some(),
            })
        })
        .collect();
    Ok(Json(entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDay {
    pub date: NaiveDate,
    pub infection: Interval,
    pub hospitalization: Interval,
    pub death: Interval,
    pub flags: BTreeSet<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub date: NaiveDate,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub region: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub snapshot_time: DateTime<Utc>,
    pub config: RiskConfig,
    pub days: Vec<SimulatedDay>,
    pub skipped: Vec<SkippedEntry>,
}

const SIMULATE_PARAMS: [(&str, &str); 14] = [
    ("region", "region"),
    ("from", "from"),
    ("to", "to"),
    ("age_years", "profile.age_years"),
    ("sex", "profile.sex"),
    ("chronic_illness", "profile.chronic_illness"),
    ("vaccine", "profile.vaccine"),
    ("mask", "profile.mask"),
    ("n_indoor", "activity.n_indoor"),
    ("n_outdoor", "activity.n_outdoor"),
    ("k_indoor", "config_overrides.k_indoor"),
    ("k_outdoor", "config_overrides.k_outdoor"),
    ("variant_smoothing_sigma_days", "config_overrides.variant_smoothing_sigma_days"),
    ("variant_lag_days", "config_overrides.variant_lag_days"),
];

struct Params(BTreeMap<String, String>);

impl Params {
    fn parse(raw: &str) -> Result<Self, ApiError> {
        let pairs: Vec<(String, String)> =
            serde_urlencoded::from_str(raw).map_err(|e| ApiError::invalid("query", e.to_string()))?;
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !SIMULATE_PARAMS.iter().any(|(p, _)| *p == k) {
                return Err(ApiError::invalid(k.clone(), format!("unknown query parameter '{k}'")));
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(ApiError::invalid(Self::path(&k), format!("query parameter '{k}' given more than once")));
            }
        }
        Ok(Params(map))
    }

    fn path(name: &str) -> String {
        SIMULATE_PARAMS
            .iter()
            .find(|(p, _)| *p == name)
            .map_or(name, |(_, f)| f)
            .to_string()
    }

    fn optional<T: FromStr>(&self, name: &str, expected: &str) -> Result<Option<T>, ApiError> {
        match self.0.get(name) {
            None => Ok(None),
            Some(raw) => raw
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| ApiError::invalid(Self::path(name), format!("expected {expected}, got '{raw}'"))),
        }
    }

    fn required<T: FromStr>(&self, name: &str, expected: &str) -> Result<T, ApiError> {
        self.optional(name, expected)?
            .ok_or_else(|| ApiError::invalid(Self::path(name), format!("missing query parameter '{name}'")))
    }
}

pub async fn simulate(State(state): State<AppState>, RawQuery(query): RawQuery) -> Result<Json<SimulateResponse>, ApiError> {
    let snapshot = loaded(&state)?;
    let q = Params::parse(query.as_deref().unwrap_or(""))?;
    let region: String = q.required("region", "a region id")?;
    let from: NaiveDate = q.required("from", "a YYYY-MM-DD date")?;
    let to: NaiveDate = q.required("to", "a YYYY-MM-DD date")?;
    let sex_raw: String = q.required("sex", "male or female")?;
    let sex = Sex::from_name(&sex_raw).ok_or_else(|| ApiError::invalid("profile.sex", format!("expected male or female, got '{sex_raw}'")))?;
    let profile = PersonProfile {
        age_years: q.required("age_years", "a non-negative integer")?,
        sex,
        chronic_illness: q.required("chronic_illness", "true or false")?,
        vaccine: q.required("vaccine", "a vaccine name")?,
        mask: q.required("mask", "a mask name")?,
    };
    let activity = ActivityProfile {
        n_indoor: q.required("n_indoor", "a non-negative integer")?,
        n_outdoor: q.required("n_outdoor", "a non-negative integer")?,
    };
    let overrides = ConfigOverrides {
        k_indoor: q.optional("k_indoor", "a positive number")?,
        k_outdoor: q.optional("k_outdoor", "a positive number")?,
        variant_smoothing_sigma_days: q.optional("variant_smoothing_sigma_days", "a positive number")?,
        variant_lag_days: q.optional("variant_lag_days", "a non-negative integer")?,
    };
    let config = overrides.apply(state.risk);
    let sim = covarc_core::simulate(&snapshot, &region, from, to, &profile, &activity, &config)?;
    Ok(Json(SimulateResponse {
        region: covarc_core::ingest::normalize_region_id(&region),
        from,
        to,
        snapshot_time: snapshot.snapshot_time(),
        config,
        days: sim
            .reports
            .into_iter()
            .map(|r| SimulatedDay {
                date: r.date,
                infection: r.infection,
                hospitalization: r.hospitalization,
                death: r.death,
                flags: r.flags,
            })
            .collect(),
        skipped: sim
            .skipped
            .into_iter()
            .map(|s| SkippedEntry { date: s.date, reason: s.reason })
            .collect(),
    }))
}

pub async fn healthz(State(state): State<AppState>) -> Response {
    match state.store.get() {
        Some(s) => Json(json!({
            "status": "ok",
            "snapshot_time": s.snapshot_time(),
            "regions_loaded": s.region_count(),
        }))
        .into_response(),
        None => {
            let mut r = (
                StatusCode::SERVICE_UNAVAILABLE,
                Json(json!({ "status": "unavailable", "snapshot_time": null, "regions_loaded": 0 })),
            )
                .into_response();
            r.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(RETRY_AFTER_SECS));
            r
        }
    }
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

// Constant-time over the supplied token's length.
fn token_matches(given: &str, expected: &str) -> bool {
    given.len() == expected.len() && given.bytes().zip(expected.bytes()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

pub async fn reload(State(state): State<AppState>, headers: HeaderMap) -> Result<Response, ApiError> {
    let Some(expected) = state.reload_token.as_deref() else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "reload_disabled", "no reload token is configured"));
    };
    if !bearer(&headers).is_some_and(|t| token_matches(t, expected)) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token"));
    }
    let snapshot = state
        .store
        .reload()
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string()))?;
    Ok(Json(json!({
        "status": "reloaded",
        "snapshot_time": snapshot.snapshot_time(),
        "regions_loaded": snapshot.region_count(),
        "content_hash": snapshot.content_hash(),
        "warnings": snapshot.warnings(),
    }))
    .into_response())
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// One structured log line per request.
pub async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        target: "covarc::request",
        %method,
        %path,
        status = response.status().as_u16(),
        micros = started.elapsed().as_micros() as u64,
        "request"
    );
    response
}
