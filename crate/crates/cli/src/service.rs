//! JSON recommendation service: a sequent in, ranked commands or lemmas out.
//!
//! Artifacts are loaded once at startup with their fingerprints checked and
//! are never mutated afterwards, so concurrent requests share them freely and
//! identical requests get identical bodies.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use proofrec::corpus::{FieldError, SequentState};
use proofrec::encoder::EncoderParameters;
use proofrec::featurizer::{Featurizer, FeaturizerConfig};
use proofrec::retrieval::{IndexFingerprints, LemmaIndex, RankedLemma, Scorer};
use proofrec::tokenizer::Tokenizer;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::pipeline::{encode, load_command_model, load_index, load_tokenizer, Workdir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub command: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub hypotheses: Vec<Hypothesis>,
    /// Fingerprint of the command model that produced the hypotheses.
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaResponse {
    pub lemmas: Vec<RankedLemma>,
    pub scorer: Scorer,
    /// Fingerprint of the library the index was built from.
    pub library: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub tokenizer: String,
    pub command_model: String,
    pub index: IndexFingerprints,
}

/// A rejected request, reported as `{"error": {"field", "message"}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestError {
    pub status: StatusCode,
    pub field: String,
    pub message: String,
}

impl RequestError {
    fn new(status: StatusCode, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            status,
            field: field.into(),
            message: message.into(),
        }
    }

    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, field, message)
    }

    pub fn body(&self) -> Value {
        json!({ "error": { "field": self.field, "message": self.message } })
    }
}

impl From<FieldError> for RequestError {
    fn from(e: FieldError) -> Self {
        Self::invalid(e.field, e.message)
    }
}

impl IntoResponse for RequestError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

fn parse_object(body: &[u8]) -> Result<Map<String, Value>, RequestError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(RequestError::new(StatusCode::BAD_REQUEST, "body", "expected a JSON object")),
        Err(e) => Err(RequestError::new(StatusCode::BAD_REQUEST, "body", format!("invalid JSON: {e}"))),
    }
}

fn required<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value, RequestError> {
    obj.get(field)
        .filter(|v| !v.is_null())
        .ok_or_else(|| RequestError::invalid(field, "missing required field"))
}

fn positive_count(obj: &Map<String, Value>, field: &str) -> Result<usize, RequestError> {
    required(obj, field)?
        .as_u64()
        .filter(|&n| n >= 1)
        .map(|n| n as usize)
        .ok_or_else(|| RequestError::invalid(field, "expected an integer >= 1"))
}

fn history(obj: &Map<String, Value>) -> Result<Vec<String>, RequestError> {
    match obj.get("history") {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| RequestError::invalid(format!("history[{i}]"), "expected a command string"))
            })
            .collect(),
        Some(_) => Err(RequestError::invalid("history", "expected an array of command strings")),
    }
}

fn internal(e: impl std::fmt::Display) -> RequestError {
    RequestError::new(StatusCode::INTERNAL_SERVER_ERROR, "", e.to_string())
}

/// Loaded, fingerprint-checked artifacts.
pub struct Service {
    tokenizer: Tokenizer,
    featurizer: Featurizer,
    command_model: EncoderParameters,
    index: LemmaIndex,
}

impl Service {
    /// Loads every artifact from the workdir and refuses mismatched ones.
    pub fn load(work: &Workdir) -> Result<Self, CliError> {
        let tokenizer = load_tokenizer(work)?;
        let command_model = load_command_model(work, &tokenizer)?;
        let index = load_index(work, &tokenizer)?;
        if let Some(fp) = &index.fingerprints().tokenizer {
            if *fp != tokenizer.fingerprint() {
                return Err(CliError::Service(format!(
                    "lemma index was built with tokenizer {fp}, workdir has {}",
                    tokenizer.fingerprint()
                )));
            }
        }
        Ok(Self {
            tokenizer,
            featurizer: Featurizer::new(FeaturizerConfig::command())?,
            command_model,
            index,
        })
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            tokenizer: self.tokenizer.fingerprint(),
            command_model: self.command_model.fingerprint(),
            index: self.index.fingerprints().clone(),
        }
    }

    pub fn predict_command(&self, body: &[u8]) -> Result<PredictResponse, RequestError> {
        let obj = parse_object(body)?;
        let sequent = SequentState::from_json(required(&obj, "sequent")?, "sequent")?;
        let history = history(&obj)?;
        let top_n = positive_count(&obj, "top_n")?;
        let stream = self.featurizer.featurize_for_command(&sequent, &history);
        let ids = encode(&self.tokenizer, &stream, self.command_model.config.max_len);
        let ranked = self.command_model.classify_command(&ids).map_err(internal)?;
        Ok(PredictResponse {
            hypotheses: ranked
                .into_iter()
                .take(top_n)
                .map(|(command, probability)| Hypothesis { command, probability })
                .collect(),
            model: self.command_model.fingerprint(),
        })
    }

    pub fn retrieve_lemmas(&self, body: &[u8]) -> Result<LemmaResponse, RequestError> {
        let obj = parse_object(body)?;
        let sequent = SequentState::from_json(required(&obj, "sequent")?, "sequent")?;
        let top_k = positive_count(&obj, "top_k")?;
        let scorer: Scorer = required(&obj, "scorer")?
            .as_str()
            .ok_or_else(|| RequestError::invalid("scorer", "expected a scorer name"))?
            .parse()
            .map_err(|e: proofrec::retrieval::RetrievalError| RequestError::invalid("scorer", e.to_string()))?;
        if !self.index.has_scorer(scorer) {
            return Err(RequestError::invalid("scorer", format!("scorer {scorer} is not available")));
        }
        let ranked = self
            .index
            .rank_lemmas(&sequent, scorer, Some(top_k))
            .map_err(internal)?;
        Ok(LemmaResponse {
            lemmas: ranked.entries,
            scorer,
            library: self.index.fingerprints().library.clone(),
        })
    }
}

async fn health(State(service): State<Arc<Service>>) -> Json<Health> {
    Json(service.health())
}

async fn predict_command(State(service): State<Arc<Service>>, body: Bytes) -> Result<Json<PredictResponse>, RequestError> {
    service.predict_command(&body).map(Json)
}

async fn retrieve_lemmas(State(service): State<Arc<Service>>, body: Bytes) -> Result<Json<LemmaResponse>, RequestError> {
    service.retrieve_lemmas(&body).map(Json)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict-command", post(predict_command))
        .route("/retrieve-lemmas", post(retrieve_lemmas))
        .with_state(service)
}

/// Binds `host:port` (port 0 picks a free one), prints the bound address on
/// stdout and serves until the process ends.
pub async fn serve(service: Service, host: &str, port: u16) -> Result<(), CliError> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| CliError::Service(format!("cannot bind {host}:{port}: {e}")))?;
    let addr: SocketAddr = listener.local_addr().map_err(|e| CliError::Service(e.to_string()))?;
    println!("listening on http://{addr}");
    log::info!("serving on {addr}");
    axum::serve(listener, router(Arc::new(service)))
        .await
        .map_err(|e| CliError::Service(e.to_string()))
}
