//! JSON prediction service over one immutable model.
//!
//! Request bodies are parsed by hand rather than through axum's `Json`
//! extractor so that malformed input comes back as a 400 naming the
//! offending field, both for type errors (via `serde_path_to_error`) and for
//! range violations (via `GameState::validate`).

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use winprob::domain::{FieldError, GameState, SCHEMA_VERSION};
use winprob::models::{Model, ModelType, WinProbModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinProbResponse {
    pub p_home: f64,
    pub model_type: ModelType,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub base: GameState,
    pub variants: Vec<GameState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub p_home: f64,
    /// `p_home - base.p_home`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub base: WinProbResponse,
    pub variants: Vec<VariantResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RequestError {
    pub message: String,
    pub fields: Vec<FieldError>,
}

impl IntoResponse for RequestError {
    fn into_response(self) -> Response {
        (StatusCode::BAD_REQUEST, Json(serde_json::json!({ "error": self }))).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, RequestError> {
    let mut de = serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        // serde reports a missing field at its parent's path
        let missing = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(|name| if path == "." { name.to_string() } else { format!("{path}.{name}") });
        let fields = match (missing, path.as_str()) {
            (Some(field), _) => vec![FieldError::new(&field, message.clone())],
            (None, ".") => Vec::new(),
            (None, _) => vec![FieldError::new(&path, message.clone())],
        };
        RequestError { message: format!("malformed body: {message}"), fields }
    })
}

fn validated(state: GameState, prefix: &str) -> Result<GameState, RequestError> {
    state.validate().map(|_| state).map_err(|errs| RequestError {
        message: "invalid game state".into(),
        fields: errs
            .into_iter()
            .map(|f| FieldError { field: format!("{prefix}{}", f.field), message: f.message })
            .collect(),
    })
}

/// Parses and validates one `GameState` body.
pub fn parse_state(body: &[u8]) -> Result<GameState, RequestError> {
    validated(parse(body)?, "")
}

pub fn parse_whatif(body: &[u8]) -> Result<WhatIfRequest, RequestError> {
    let req: WhatIfRequest = parse(body)?;
    let base = validated(req.base, "base.")?;
    let variants = req
        .variants
        .into_iter()
        .enumerate()
        .map(|(i, v)| validated(v, &format!("variants[{i}].")))
        .collect::<Result<_, _>>()?;
    Ok(WhatIfRequest { base, variants })
}

pub fn win_prob(model: &Model, state: &GameState) -> WinProbResponse {
    WinProbResponse { p_home: model.predict(state), model_type: model.model_type() }
}

pub fn what_if(model: &Model, req: &WhatIfRequest) -> WhatIfResponse {
    let base = win_prob(model, &req.base);
    let variants = req
        .variants
        .iter()
        .map(|v| {
            let p = model.predict(v);
            VariantResult { p_home: p, delta: p - base.p_home }
        })
        .collect();
    WhatIfResponse { base, variants }
}

async fn winprob_handler(State(model): State<Arc<Model>>, body: Bytes) -> Result<Json<WinProbResponse>, RequestError> {
    let state = parse_state(&body)?;
    Ok(Json(win_prob(&model, &state)))
}

async fn whatif_handler(State(model): State<Arc<Model>>, body: Bytes) -> Result<Json<WhatIfResponse>, RequestError> {
    let req = parse_whatif(&body)?;
    Ok(Json(what_if(&model, &req)))
}

async fn health(State(model): State<Arc<Model>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model_type": model.model_type(),
        "schema_version": SCHEMA_VERSION,
    }))
}

pub fn router(model: Arc<Model>) -> Router {
    Router::new()
        .route("/v1/winprob", post(winprob_handler))
        .route("/v1/whatif", post(whatif_handler))
        .route("/v1/health", get(health))
        .with_state(model)
}

pub async fn serve(model: Model, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("{}", serde_json::json!({ "listening": listener.local_addr()?.to_string() }));
    axum::serve(listener, router(Arc::new(model))).await
}
