//! Recorded HTTP exchanges for offline runs.
//!
//! A cassette is a JSON file holding request/response pairs. Requests are
//! matched on method, normalized URL, `Accept` header and body; credentials
//! are never written to a cassette. Bodies that are JSON documents are
//! stored inline under `"json"` so cassettes stay readable, anything else
//! goes under `"body"` as a string.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use url::Url;

use super::transport::{HttpRequest, HttpResponse, Method, Transport, TransportError};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture io error for {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("fixture format error in {path}: {message}")]
    Format { path: String, message: String },
    #[error("duplicate fixture for {0}")]
    Duplicate(String),
}

/// Matching key for a recorded request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestKey {
    pub method: Method,
    pub url: String,
    pub accept: String,
    pub body: String,
}

impl RequestKey {
    pub fn new(method: Method, url: &str, accept: Option<&str>, body: Option<&[u8]>) -> Self {
        RequestKey {
            method,
            url: normalize_url(url),
            accept: accept.map(|a| a.trim().to_ascii_lowercase()).unwrap_or_default(),
            body: body.map(canonical_body).unwrap_or_default(),
        }
    }

    pub fn of(request: &HttpRequest) -> Self {
        RequestKey::new(
            request.method,
            &request.url,
            request.header_value("accept"),
            request.body.as_deref(),
        )
    }

    /// Host of the normalized URL, if it parses.
    pub fn host(&self) -> Option<String> {
        Url::parse(&self.url).ok().and_then(|u| u.host_str().map(str::to_string))
    }
}

impl std::fmt::Display for RequestKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}", self.method, self.url)?;
        if !self.accept.is_empty() {
            write!(f, " [accept: {}]", self.accept)?;
        }
        if !self.body.is_empty() {
            write!(f, " [body: {}]", self.body)?;
        }
        Ok(())
    }
}

/// Decodes and sorts query parameters so hand-written and encoded URLs
/// compare equal.
pub fn normalize_url(raw: &str) -> String {
    let Ok(url) = Url::parse(raw.trim()) else {
        return raw.trim().to_string();
    };
    let mut out = format!("{}://{}", url.scheme(), url.host_str().unwrap_or_default());
    if let Some(port) = url.port() {
        out.push_str(&format!(":{port}"));
    }
    let path = percent_decode(url.path());
    out.push_str(&path);
    let mut pairs: Vec<(String, String)> = url.query_pairs().map(|(k, v)| (k.into_owned(), v.into_owned())).collect();
    if !pairs.is_empty() {
        pairs.sort();
        let query: Vec<String> = pairs.into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        out.push('?');
        out.push_str(&query.join("&"));
    }
    out
}

fn percent_decode(s: &str) -> String {
    url::form_urlencoded::parse(format!("p={}", s.replace('+', "%2B")).as_bytes())
        .next()
        .map(|(_, v)| v.into_owned())
        .unwrap_or_else(|| s.to_string())
}

fn canonical_body(body: &[u8]) -> String {
    match serde_json::from_slice::<Value>(body) {
        Ok(value) => sort_json(value).to_string(),
        Err(_) => String::from_utf8_lossy(body).into_owned(),
    }
}

fn sort_json(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut pairs: Vec<(String, Value)> = map.into_iter().collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(pairs.into_iter().map(|(k, v)| (k, sort_json(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_json).collect()),
        other => other,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecordedRequest {
    pub method: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecordedResponse {
    pub status: u16,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Interaction {
    pub request: RecordedRequest,
    pub response: RecordedResponse,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Cassette {
    pub interactions: Vec<Interaction>,
}

fn split_body(bytes: &[u8]) -> (Option<Value>, Option<String>) {
    if bytes.is_empty() {
        return (None, Some(String::new()));
    }
    match serde_json::from_slice::<Value>(bytes) {
        Ok(v) if v.is_object() || v.is_array() => (Some(v), None),
        _ => (None, Some(String::from_utf8_lossy(bytes).into_owned())),
    }
}

fn join_body(json: &Option<Value>, body: &Option<String>) -> Vec<u8> {
    match (json, body) {
        (Some(v), _) => v.to_string().into_bytes(),
        (None, Some(s)) => s.clone().into_bytes(),
        (None, None) => Vec::new(),
    }
}

impl Interaction {
    pub fn capture(request: &HttpRequest, response: &HttpResponse) -> Self {
        let (req_json, req_body) = match &request.body {
            Some(b) => split_body(b),
            None => (None, None),
        };
        let (json, body) = split_body(&response.body);
        Interaction {
            request: RecordedRequest {
                method: request.method.to_string(),
                url: request.url.clone(),
                accept: request.header_value("accept").map(str::to_string),
                json: req_json,
                body: req_body,
            },
            response: RecordedResponse {
                status: response.status,
                headers: response
                    .headers
                    .iter()
                    .filter(|(n, _)| n.eq_ignore_ascii_case("content-type"))
                    .map(|(n, v)| (n.to_ascii_lowercase(), v.clone()))
                    .collect(),
                json,
                body,
            },
        }
    }

    fn key(&self) -> Result<RequestKey, String> {
        let method = Method::parse(&self.request.method).ok_or_else(|| format!("unknown method {}", self.request.method))?;
        let body = match (&self.request.json, &self.request.body) {
            (None, None) => None,
            (json, body) => Some(join_body(json, body)),
        };
        Ok(RequestKey::new(
            method,
            &self.request.url,
            self.request.accept.as_deref(),
            body.as_deref(),
        ))
    }

    fn response(&self) -> HttpResponse {
        HttpResponse {
            status: self.response.status,
            headers: self.response.headers.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            body: join_body(&self.response.json, &self.response.body),
        }
    }
}

/// Deterministic playback of recorded exchanges. Never touches the
/// network; unmatched requests fail with [`TransportError::NoFixture`].
#[derive(Debug, Default)]
pub struct FixtureTransport {
    responses: HashMap<RequestKey, HttpResponse>,
    log: Mutex<Vec<RequestKey>>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        FixtureTransport::default()
    }

    /// Loads every `*.json` cassette in `dir`, in file-name order.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, FixtureError> {
        let dir = dir.as_ref();
        let io_err = |source| FixtureError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        paths.sort();
        let mut transport = FixtureTransport::new();
        for path in paths {
            transport.load_file(&path)?;
        }
        Ok(transport)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), FixtureError> {
        let text = fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cassette: Cassette = serde_json::from_str(&text).map_err(|e| FixtureError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.add_cassette(&cassette).map_err(|e| match e {
            FixtureError::Format { message, .. } => FixtureError::Format {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn add_cassette(&mut self, cassette: &Cassette) -> Result<(), FixtureError> {
        for interaction in &cassette.interactions {
            let key = interaction.key().map_err(|message| FixtureError::Format {
                path: String::new(),
                message,
            })?;
            if self.responses.contains_key(&key) {
                return Err(FixtureError::Duplicate(key.to_string()));
            }
            self.responses.insert(key, interaction.response());
        }
        Ok(())
    }

    pub fn insert(&mut self, key: RequestKey, response: HttpResponse) {
        self.responses.insert(key, response);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Every request seen so far, matched or not, in call order.
    pub fn requests(&self) -> Vec<RequestKey> {
        self.log.lock().expect("fixture log poisoned").clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().expect("fixture log poisoned").len()
    }

    /// Requests seen so far whose URL host equals `host`.
    pub fn count_host(&self, host: &str) -> usize {
        self.requests()
            .iter()
            .filter(|k| k.host().as_deref() == Some(host))
            .count()
    }

    pub fn reset_log(&self) {
        self.log.lock().expect("fixture log poisoned").clear();
    }
}

impl Transport for FixtureTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let key = RequestKey::of(request);
        self.log.lock().expect("fixture log poisoned").push(key.clone());
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| TransportError::NoFixture(key.to_string()))
    }
}

/// Passes requests to an inner transport and keeps every exchange so it
/// can be written out as a cassette.
pub struct RecordingTransport<T> {
    inner: T,
    recorded: Mutex<Vec<Interaction>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn new(inner: T) -> Self {
        RecordingTransport {
            inner,
            recorded: Mutex::new(Vec::new()),
        }
    }

    pub fn cassette(&self) -> Cassette {
        Cassette {
            interactions: self.recorded.lock().expect("recording poisoned").clone(),
        }
    }

    /// Writes the recorded exchanges, merged into any cassette already at
    /// `path`; later recordings replace earlier ones with the same key.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FixtureError> {
        let path = path.as_ref();
        let io_err = |source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut cassette = match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str::<Cassette>(&text).map_err(|e| FixtureError::Format {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Cassette::default(),
            Err(e) => return Err(io_err(e)),
        };
        for interaction in self.cassette().interactions {
            let key = interaction.key().ok();
            cassette.interactions.retain(|i| i.key().ok() != key);
            cassette.interactions.push(interaction);
        }
        let mut text = serde_json::to_string_pretty(&cassette).map_err(|e| FixtureError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        text.push('\n');
        fs::write(path, text).map_err(io_err)
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.execute(request)?;
        self.recorded
            .lock()
            .expect("recording poisoned")
            .push(Interaction::capture(request, &response));
        Ok(response)
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }
}
