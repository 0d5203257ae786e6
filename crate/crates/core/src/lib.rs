//! Turns a DOI into a consistently formatted bibliographic entry.
//!
//! Metadata is resolved through the ADS bibcode route when the work is
//! indexed there, and through DOI content negotiation otherwise. Entries are
//! rendered as HTML, JSON, BibTeX and plain text, and persisted under
//! permanent global IDs with nested records, notes and per-dataset
//! cross-references.

pub mod identifiers;
pub mod model;
pub mod pipeline;
pub mod render;
pub mod resolvers;
pub mod store;

pub use identifiers::{format_bibcode, parse_bibcode, parse_doi, Bibcode, Doi, IdentifierError};
pub use model::{
    format_pages, make_author, sub_labels, AuthorName, BibRecord, GlobalId, ModelError, Pages, RefEntry,
    SourceCrossRef, SourceType,
};
pub use pipeline::{resolve_and_store, resolve_reference, PathTaken, PipelineError, ResolutionReport, StoreOutcome};
pub use render::{render, Format, RenderError, RenderedCitation};
pub use resolvers::{AdsConfig, ResolveError};
pub use store::{RefStore, StoreError};
