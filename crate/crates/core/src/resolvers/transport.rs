//! Pluggable HTTP transport.

use std::fmt;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Get,
    Post,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Some(Method::Get),
            "POST" => Some(Method::Post),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
        }
    }

    pub fn post(url: impl Into<String>, body: Vec<u8>) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            headers: Vec::new(),
            body: Some(body),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_string(), value.into()));
        self
    }

    pub fn header_value(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        HttpResponse {
            status,
            headers: Vec::new(),
            body: body.into(),
        }
    }

    pub fn text(&self) -> Result<&str, std::str::Utf8Error> {
        std::str::from_utf8(&self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("no recorded fixture for {0}")]
    NoFixture(String),
    #[error("transport error: {0}")]
    Other(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TransportError::Timeout(_) | TransportError::Connect(_))
    }
}

/// Executes HTTP requests. Implementations must tolerate concurrent calls.
pub trait Transport: Send + Sync {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;

    /// True when requests leave the process.
    fn is_live(&self) -> bool {
        false
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).execute(request)
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).execute(request)
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn execute(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).execute(request)
    }

    fn is_live(&self) -> bool {
        (**self).is_live()
    }
}

/// Retries on 5xx responses and timeouts with exponential backoff; 4xx
/// responses are returned immediately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Extra attempts after the first one.
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            backoff_base: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (1-based): base, 2·base, 4·base…
    pub fn delay(&self, attempt: u32) -> Duration {
        self.backoff_base
            .saturating_mul(1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX))
    }
}

/// Outcome of a retried exchange.
#[derive(Debug)]
pub enum Exchange {
    Response(HttpResponse),
    /// Still failing after every retry: last status or transport error.
    Exhausted {
        attempts: u32,
        last: Result<HttpResponse, TransportError>,
    },
}

pub fn execute_with_retry(
    transport: &dyn Transport,
    request: &HttpRequest,
    policy: &RetryPolicy,
) -> Result<Exchange, TransportError> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        let outcome = transport.execute(request);
        let retryable = match &outcome {
            Ok(resp) => resp.status >= 500,
            Err(e) if e.is_retryable() => true,
            Err(e) => return Err(e.clone()),
        };
        if !retryable {
            return Ok(Exchange::Response(outcome.expect("non-retryable outcome is a response")));
        }
        if attempt > policy.max_retries {
            log::warn!("{} {} failed after {attempt} attempts", request.method, request.url);
            return Ok(Exchange::Exhausted { attempts: attempt, last: outcome });
        }
        let delay = policy.delay(attempt);
        log::debug!("retrying {} in {:?}", request.url, delay);
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Scripted {
        statuses: Vec<u16>,
        calls: AtomicU32,
    }

    impl Transport for Scripted {
        fn execute(&self, _: &HttpRequest) -> Result<HttpResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            let status = self.statuses[n.min(self.statuses.len() - 1)];
            Ok(HttpResponse::new(status, Vec::new()))
        }
    }

    fn policy(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            backoff_base: Duration::ZERO,
        }
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(1), Duration::from_secs(1));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(3), Duration::from_secs(4));
    }

    #[test]
    fn server_errors_retried_until_success() {
        let t = Scripted {
            statuses: vec![503, 502, 200],
            calls: AtomicU32::new(0),
        };
        let out = execute_with_retry(&t, &HttpRequest::get("http://x"), &policy(3)).unwrap();
        assert!(matches!(out, Exchange::Response(r) if r.status == 200));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retries_are_bounded() {
        let t = Scripted {
            statuses: vec![500],
            calls: AtomicU32::new(0),
        };
        let out = execute_with_retry(&t, &HttpRequest::get("http://x"), &policy(3)).unwrap();
        assert!(matches!(out, Exchange::Exhausted { attempts: 4, .. }));
        assert_eq!(t.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn client_errors_never_retried() {
        for status in [400, 401, 404, 406] {
            let t = Scripted {
                statuses: vec![status],
                calls: AtomicU32::new(0),
            };
            let out = execute_with_retry(&t, &HttpRequest::get("http://x"), &policy(3)).unwrap();
            assert!(matches!(out, Exchange::Response(r) if r.status == status));
            assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        }
    }
}
