//! Network clients that turn identifiers into [`BibRecord`]s.
//!
//! Two routes exist: ADS (DOI → bibcode → structured fields or BibTeX
//! export) and DOI content negotiation (CSL-JSON and BibTeX straight from
//! the DOI resolver). A CrossRef free-text search backs the keyword
//! fallback. Everything goes through a [`Transport`], so tests replay
//! recorded cassettes instead of touching the network.
//!
//! [`BibRecord`]: crate::model::BibRecord

pub mod ads;
pub mod bibtex;
pub mod crossref;
pub mod fixture;
pub mod live;
pub mod negotiation;
pub mod transport;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::identifiers::Doi;

pub use ads::{fetch_ads_export, resolve_bibcode, AdsExportFormat, BibcodeLookup};
pub use bibtex::{bibtex_to_record, BibtexError};
pub use crossref::{fetch_bibtex_by_query, UnverifiedBibtex};
pub use fixture::{FixtureTransport, RecordingTransport};
pub use live::{live_transports_created, LiveTransport};
pub use negotiation::{csl_to_record, fetch_bibtex, fetch_csl_json, CslRecord};
pub use transport::{HttpRequest, HttpResponse, Method, RetryPolicy, Transport, TransportError};

/// Environment variable holding the ADS API token.
pub const ADS_TOKEN_ENV: &str = "REFS_ADS_TOKEN";

pub const DEFAULT_ADS_BASE_URL: &str = "https://api.adsabs.harvard.edu/v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("ADS token is not configured (set {ADS_TOKEN_ENV})")]
    AuthConfig,
    #[error("ADS rejected the token (HTTP {status})")]
    Auth { status: u16 },
    #[error("{url} unavailable after {attempts} attempts: {detail}")]
    Upstream { url: String, attempts: u32, detail: String },
    #[error("unexpected HTTP {status} from {url}")]
    Status { url: String, status: u16 },
    #[error("could not decode response: {0}")]
    Decode(String),
    #[error("DOI {0} is not registered")]
    UnknownDoi(Doi),
    #[error("no metadata in the requested format for DOI {0}")]
    NoMetadataFormat(Doi),
    #[error("ADS returned no entry for bibcode {0}")]
    MissingEntry(String),
    #[error("no search results for {0:?}")]
    NoMatch(String),
    #[error("metadata for {0} has neither authors nor title")]
    UnusableMetadata(String),
    #[error("{0}")]
    Bibtex(#[from] BibtexError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// ADS client settings.
#[derive(Clone, PartialEq, Eq)]
pub struct AdsConfig {
    pub base_url: String,
    pub token: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for AdsConfig {
    fn default() -> Self {
        AdsConfig {
            base_url: DEFAULT_ADS_BASE_URL.to_string(),
            token: String::new(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            backoff_base: Duration::from_secs(1),
        }
    }
}

impl AdsConfig {
    /// Defaults plus the token from [`ADS_TOKEN_ENV`], when set.
    pub fn from_env() -> Self {
        AdsConfig {
            token: std::env::var(ADS_TOKEN_ENV).unwrap_or_default().trim().to_string(),
            ..AdsConfig::default()
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff_base: self.backoff_base,
        }
    }
}

impl fmt::Debug for AdsConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdsConfig")
            .field("base_url", &self.base_url)
            .field("token", &if self.token.is_empty() { "<unset>" } else { "<redacted>" })
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("backoff_base", &self.backoff_base)
            .finish()
    }
}

/// Sends with retries and turns exhaustion into [`ResolveError::Upstream`].
pub(crate) fn send(
    transport: &dyn Transport,
    request: &HttpRequest,
    policy: &RetryPolicy,
) -> Result<HttpResponse, ResolveError> {
    match transport::execute_with_retry(transport, request, policy)? {
        transport::Exchange::Response(response) => Ok(response),
        transport::Exchange::Exhausted { attempts, last } => Err(ResolveError::Upstream {
            url: request.url.clone(),
            attempts,
            detail: match last {
                Ok(resp) => format!("HTTP {}", resp.status),
                Err(e) => e.to_string(),
            },
        }),
    }
}

pub(crate) fn body_text(response: &HttpResponse) -> Result<&str, ResolveError> {
    response
        .text()
        .map_err(|e| ResolveError::Decode(format!("body is not UTF-8: {e}")))
}
