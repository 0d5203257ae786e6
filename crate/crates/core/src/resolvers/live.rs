use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::redirect::Policy;

use super::transport::{HttpRequest, HttpResponse, Method, Transport, TransportError};

static LIVE_TRANSPORTS: AtomicUsize = AtomicUsize::new(0);

/// Number of live transports constructed in this process. Offline runs
/// assert this stays at zero.
pub fn live_transports_created() -> usize {
    LIVE_TRANSPORTS.load(Ordering::SeqCst)
}

pub const MAX_REDIRECTS: usize = 10;

/// Real HTTP over reqwest, following up to [`MAX_REDIRECTS`] redirects.
pub struct LiveTransport {
    client: Client,
}

impl LiveTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        LIVE_TRANSPORTS.fetch_add(1, Ordering::SeqCst);
        let client = Client::builder()
            .timeout(timeout)
            .redirect(Policy::limited(MAX_REDIRECTS))
            .user_agent(concat!("refs/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(LiveTransport { client })
    }
}

impl Transport for LiveTransport {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name, value);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout(e.to_string())
            } else if e.is_connect() {
                TransportError::Connect(e.to_string())
            } else {
                TransportError::Other(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(n, v)| v.to_str().ok().map(|v| (n.to_string(), v.to_string())))
            .collect();
        let body = response
            .bytes()
            .map_err(|e| {
                if e.is_timeout() {
                    TransportError::Timeout(e.to_string())
                } else {
                    TransportError::Other(e.to_string())
                }
            })?
            .to_vec();
        Ok(HttpResponse { status, headers, body })
    }

    fn is_live(&self) -> bool {
        true
    }
}
