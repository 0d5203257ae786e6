//! Durable registry of reference entries under permanent global IDs.
//!
//! Backed by a single SQLite file. IDs come from a monotonic sequence and
//! are never handed out twice; deleting an entry leaves a tombstone.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use rusqlite::{params, Connection, OptionalExtension, Transaction};
use thiserror::Error;

use crate::identifiers::{parse_bibcode, parse_doi, Doi};
use crate::model::{AuthorName, BibRecord, GlobalId, ModelError, Pages, RefEntry, SourceCrossRef, SourceType};
use crate::render::{render_bibtex, render_html, RenderError};

pub const SCHEMA_VERSION: i64 = 1;

pub const BUNDLE_HTML: &str = "refs.html";
pub const BUNDLE_BIB: &str = "refs.bib";

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS id_sequence (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    last_id INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS entries (
    global_id INTEGER PRIMARY KEY,
    doi_key TEXT,
    deleted INTEGER NOT NULL DEFAULT 0
);
CREATE INDEX IF NOT EXISTS entries_doi_key ON entries (doi_key) WHERE deleted = 0;
CREATE TABLE IF NOT EXISTS notes (
    global_id INTEGER PRIMARY KEY REFERENCES entries (global_id),
    body TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS records (
    global_id INTEGER NOT NULL REFERENCES entries (global_id),
    position INTEGER NOT NULL,
    source_type TEXT NOT NULL,
    authors TEXT NOT NULL,
    title TEXT NOT NULL,
    journal TEXT,
    volume TEXT,
    number TEXT,
    first_page TEXT,
    last_page TEXT,
    year INTEGER,
    publisher TEXT,
    doi TEXT,
    bibcode TEXT,
    PRIMARY KEY (global_id, position)
);
CREATE TABLE IF NOT EXISTS crossrefs (
    scope TEXT NOT NULL,
    parameter TEXT NOT NULL,
    local_id INTEGER NOT NULL,
    global_id INTEGER NOT NULL REFERENCES entries (global_id),
    PRIMARY KEY (scope, parameter, local_id)
);
";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("database error: {0}")]
    Database(#[from] rusqlite::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("an entry with the same DOIs already exists with id {existing}")]
    DuplicateEntry { existing: GlobalId },
    #[error("no entry with id {}", join_ids(.0))]
    MissingEntry(Vec<u64>),
    #[error("id {0} is already allocated")]
    IdInUse(GlobalId),
    #[error("({scope}, {parameter}, {local_id}) already maps to {existing}, not {requested}")]
    CrossRefConflict {
        scope: String,
        parameter: String,
        local_id: u64,
        existing: GlobalId,
        requested: GlobalId,
    },
    #[error("invalid entry: {0}")]
    Invalid(#[from] ModelError),
    #[error("render failed: {0}")]
    Render(#[from] RenderError),
    #[error("store schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { found: i64 },
    #[error("corrupt row: {0}")]
    Corrupt(String),
    #[error("at least one id is required")]
    NoIds,
}

fn join_ids(ids: &[u64]) -> String {
    ids.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
}

/// Shared handle to a store file. Reads and writes go through one
/// connection behind a mutex, so the handle can be shared across threads.
pub struct RefStore {
    conn: Mutex<Connection>,
    path: PathBuf,
}

impl std::fmt::Debug for RefStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RefStore").field("path", &self.path).finish()
    }
}

fn doi_key(records: &[BibRecord]) -> Option<String> {
    let mut dois: Vec<&str> = records.iter().filter_map(|r| r.doi.as_ref()).map(Doi::as_str).collect();
    if dois.is_empty() {
        return None;
    }
    dois.sort_unstable();
    dois.dedup();
    Some(dois.join("\n"))
}

fn to_sql_id(value: u64) -> Result<i64, StoreError> {
    i64::try_from(value).map_err(|_| StoreError::Corrupt(format!("{value} exceeds the storable range")))
}

fn from_sql_id(value: i64) -> Result<GlobalId, StoreError> {
    u64::try_from(value)
        .ok()
        .and_then(|v| GlobalId::new(v).ok())
        .ok_or_else(|| StoreError::Corrupt(format!("invalid global id {value}")))
}

impl RefStore {
    /// Opens or creates the store at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let conn = Connection::open(&path)?;
        Self::init(conn, path)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory()?, PathBuf::from(":memory:"))
    }

    fn init(conn: Connection, path: PathBuf) -> Result<Self, StoreError> {
        conn.pragma_update(None, "foreign_keys", true)?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        let found: Option<String> = conn
            .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
            .optional()?;
        match found {
            None => {
                conn.execute(
                    "INSERT INTO meta (key, value) VALUES ('schema_version', ?1)",
                    [SCHEMA_VERSION.to_string()],
                )?;
            }
            Some(v) => {
                let version: i64 = v.parse().map_err(|_| StoreError::Corrupt(format!("schema version {v:?}")))?;
                if version != SCHEMA_VERSION {
                    return Err(StoreError::SchemaVersion { found: version });
                }
            }
        }
        conn.execute("INSERT OR IGNORE INTO id_sequence (id, last_id) VALUES (1, 0)", [])?;
        Ok(RefStore {
            conn: Mutex::new(conn),
            path,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Stores a new entry under the next free ID.
    pub fn add_entry(&self, records: Vec<BibRecord>, note: Option<String>) -> Result<GlobalId, StoreError> {
        let draft = RefEntry::draft(records, note)?;
        let key = doi_key(&draft.records);
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        if let Some(existing) = find_live_by_key(&tx, key.as_deref())? {
            return Err(StoreError::DuplicateEntry { existing });
        }
        let last: i64 = tx.query_row("SELECT last_id FROM id_sequence WHERE id = 1", [], |r| r.get(0))?;
        let id = from_sql_id(last + 1)?;
        tx.execute("UPDATE id_sequence SET last_id = ?1 WHERE id = 1", [last + 1])?;
        insert_entry(&tx, id, &draft, key.as_deref())?;
        tx.commit()?;
        log::debug!("stored entry {id}");
        Ok(id)
    }

    /// Stores an entry under its own ID, e.g. when migrating a legacy
    /// registry. The sequence moves past the imported ID.
    pub fn import_entry(&self, entry: &RefEntry) -> Result<GlobalId, StoreError> {
        let id = entry.global_id.ok_or(StoreError::Invalid(ModelError::InvalidGlobalId))?;
        let checked = RefEntry::new(id, entry.records.clone(), entry.note.clone())?;
        let key = doi_key(&checked.records);
        let sql_id = to_sql_id(id.get())?;
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let taken: bool = tx
            .query_row("SELECT 1 FROM entries WHERE global_id = ?1", [sql_id], |_| Ok(true))
            .optional()?
            .unwrap_or(false);
        if taken {
            return Err(StoreError::IdInUse(id));
        }
        if let Some(existing) = find_live_by_key(&tx, key.as_deref())? {
            return Err(StoreError::DuplicateEntry { existing });
        }
        insert_entry(&tx, id, &checked, key.as_deref())?;
        tx.execute("UPDATE id_sequence SET last_id = MAX(last_id, ?1) WHERE id = 1", [sql_id])?;
        tx.commit()?;
        Ok(id)
    }

    /// Tombstones an entry. Its ID stays allocated.
    pub fn delete_entry(&self, id: GlobalId) -> Result<(), StoreError> {
        let conn = self.lock();
        let changed = conn.execute(
            "UPDATE entries SET deleted = 1 WHERE global_id = ?1 AND deleted = 0",
            [to_sql_id(id.get())?],
        )?;
        if changed == 0 {
            return Err(StoreError::MissingEntry(vec![id.get()]));
        }
        Ok(())
    }

    /// Replaces or clears the note of a live entry.
    pub fn set_note(&self, id: GlobalId, note: Option<&str>) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let sql_id = to_sql_id(id.get())?;
        if !is_live(&tx, sql_id)? {
            return Err(StoreError::MissingEntry(vec![id.get()]));
        }
        tx.execute("DELETE FROM notes WHERE global_id = ?1", [sql_id])?;
        if let Some(body) = note {
            tx.execute("INSERT INTO notes (global_id, body) VALUES (?1, ?2)", params![sql_id, body])?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn get_entry(&self, id: GlobalId) -> Result<RefEntry, StoreError> {
        let conn = self.lock();
        let sql_id = to_sql_id(id.get())?;
        if !is_live(&conn, sql_id)? {
            return Err(StoreError::MissingEntry(vec![id.get()]));
        }
        load_entry(&conn, id)
    }

    /// Live entries ordered by ID. With a scope, only entries referenced by
    /// a cross-reference in that scope.
    pub fn list_entries(&self, scope: Option<&str>) -> Result<Vec<RefEntry>, StoreError> {
        let conn = self.lock();
        let ids: Vec<i64> = match scope {
            None => {
                let mut stmt = conn.prepare("SELECT global_id FROM entries WHERE deleted = 0 ORDER BY global_id")?;
                let rows = stmt.query_map([], |r| r.get(0))?;
                rows.collect::<Result<_, _>>()?
            }
            Some(scope) => {
                let mut stmt = conn.prepare(
                    "SELECT DISTINCT e.global_id FROM entries e JOIN crossrefs c ON c.global_id = e.global_id \
                     WHERE e.deleted = 0 AND c.scope = ?1 ORDER BY e.global_id",
                )?;
                let rows = stmt.query_map([scope], |r| r.get(0))?;
                rows.collect::<Result<_, _>>()?
            }
        };
        ids.into_iter().map(|id| load_entry(&conn, from_sql_id(id)?)).collect()
    }

    /// Highest ID ever allocated, 0 for a fresh store.
    pub fn last_allocated(&self) -> Result<u64, StoreError> {
        let conn = self.lock();
        let last: i64 = conn.query_row("SELECT last_id FROM id_sequence WHERE id = 1", [], |r| r.get(0))?;
        Ok(last as u64)
    }

    /// Live entry whose DOI set contains `doi`.
    pub fn find_by_doi(&self, doi: &Doi) -> Result<Option<GlobalId>, StoreError> {
        let conn = self.lock();
        let id: Option<i64> = conn
            .query_row(
                "SELECT r.global_id FROM records r JOIN entries e ON e.global_id = r.global_id \
                 WHERE e.deleted = 0 AND r.doi = ?1 ORDER BY r.global_id LIMIT 1",
                [doi.as_str()],
                |r| r.get(0),
            )
            .optional()?;
        id.map(from_sql_id).transpose()
    }

    /// Maps a dataset-local ID to a global one. Re-attaching the same row
    /// is a no-op; remapping an existing key is a conflict.
    pub fn attach_crossref(&self, crossref: &SourceCrossRef) -> Result<(), StoreError> {
        let mut conn = self.lock();
        let tx = conn.transaction()?;
        let global = to_sql_id(crossref.global_id.get())?;
        let local = to_sql_id(crossref.local_id)?;
        if !is_live(&tx, global)? {
            return Err(StoreError::MissingEntry(vec![crossref.global_id.get()]));
        }
        let existing: Option<i64> = tx
            .query_row(
                "SELECT global_id FROM crossrefs WHERE scope = ?1 AND parameter = ?2 AND local_id = ?3",
                params![crossref.dataset_scope, crossref.parameter, local],
                |r| r.get(0),
            )
            .optional()?;
        match existing {
            Some(current) if current == global => return Ok(()),
            Some(current) => {
                return Err(StoreError::CrossRefConflict {
                    scope: crossref.dataset_scope.clone(),
                    parameter: crossref.parameter.clone(),
                    local_id: crossref.local_id,
                    existing: from_sql_id(current)?,
                    requested: crossref.global_id,
                })
            }
            None => {}
        }
        tx.execute(
            "INSERT INTO crossrefs (scope, parameter, local_id, global_id) VALUES (?1, ?2, ?3, ?4)",
            params![crossref.dataset_scope, crossref.parameter, local, global],
        )?;
        tx.commit()?;
        Ok(())
    }

    pub fn lookup_crossref(&self, scope: &str, parameter: &str, local_id: u64) -> Result<Option<GlobalId>, StoreError> {
        let conn = self.lock();
        let id: Option<i64> = conn
            .query_row(
                "SELECT global_id FROM crossrefs WHERE scope = ?1 AND parameter = ?2 AND local_id = ?3",
                params![scope, parameter, to_sql_id(local_id)?],
                |r| r.get(0),
            )
            .optional()?;
        id.map(from_sql_id).transpose()
    }

    /// All cross-references, ordered by key.
    pub fn list_crossrefs(&self) -> Result<Vec<SourceCrossRef>, StoreError> {
        let conn = self.lock();
        let mut stmt =
            conn.prepare("SELECT scope, parameter, local_id, global_id FROM crossrefs ORDER BY scope, parameter, local_id")?;
        let rows = stmt.query_map([], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, i64>(2)?, r.get::<_, i64>(3)?))
        })?;
        let mut out = Vec::new();
        for row in rows {
            let (dataset_scope, parameter, local, global) = row?;
            out.push(SourceCrossRef {
                dataset_scope,
                parameter,
                local_id: u64::try_from(local).map_err(|_| StoreError::Corrupt(format!("local id {local}")))?,
                global_id: from_sql_id(global)?,
            });
        }
        Ok(out)
    }

    /// Writes `refs.html` and `refs.bib` for `ids` into `out_dir`, entries
    /// ordered by ID.
    pub fn export_bundle(&self, ids: &[GlobalId], out_dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), StoreError> {
        if ids.is_empty() {
            return Err(StoreError::NoIds);
        }
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let entries = {
            let conn = self.lock();
            let mut missing = Vec::new();
            for id in &ids {
                if !is_live(&conn, to_sql_id(id.get())?)? {
                    missing.push(id.get());
                }
            }
            if !missing.is_empty() {
                return Err(StoreError::MissingEntry(missing));
            }
            ids.iter().map(|id| load_entry(&conn, *id)).collect::<Result<Vec<_>, _>>()?
        };
        let html = bundle_html(&entries)?;
        let bib = entries
            .iter()
            .map(|e| render_bibtex(e).body)
            .collect::<Vec<_>>()
            .join("\n");
        let out_dir = out_dir.as_ref();
        fs::create_dir_all(out_dir)?;
        let html_path = out_dir.join(BUNDLE_HTML);
        let bib_path = out_dir.join(BUNDLE_BIB);
        fs::write(&html_path, html)?;
        fs::write(&bib_path, bib)?;
        Ok((html_path, bib_path))
    }
}

/// Full HTML document for a bibliography bundle.
pub fn bundle_html(entries: &[RefEntry]) -> Result<String, StoreError> {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>References</title>\n</head>\n<body>\n",
    );
    for entry in entries {
        out.push_str(&render_html(entry)?.body);
        out.push('\n');
    }
    out.push_str("</body>\n</html>\n");
    Ok(out)
}

fn is_live(conn: &Connection, id: i64) -> Result<bool, StoreError> {
    Ok(conn
        .query_row("SELECT 1 FROM entries WHERE global_id = ?1 AND deleted = 0", [id], |_| Ok(true))
        .optional()?
        .unwrap_or(false))
}

fn find_live_by_key(tx: &Transaction<'_>, key: Option<&str>) -> Result<Option<GlobalId>, StoreError> {
    let Some(key) = key else { return Ok(None) };
    let id: Option<i64> = tx
        .query_row(
            "SELECT global_id FROM entries WHERE deleted = 0 AND doi_key = ?1 ORDER BY global_id LIMIT 1",
            [key],
            |r| r.get(0),
        )
        .optional()?;
    id.map(from_sql_id).transpose()
}

fn insert_entry(tx: &Transaction<'_>, id: GlobalId, entry: &RefEntry, key: Option<&str>) -> Result<(), StoreError> {
    let sql_id = to_sql_id(id.get())?;
    tx.execute(
        "INSERT INTO entries (global_id, doi_key, deleted) VALUES (?1, ?2, 0)",
        params![sql_id, key],
    )?;
    if let Some(note) = &entry.note {
        tx.execute("INSERT INTO notes (global_id, body) VALUES (?1, ?2)", params![sql_id, note])?;
    }
    let mut stmt = tx.prepare(
        "INSERT INTO records (global_id, position, source_type, authors, title, journal, volume, number, \
         first_page, last_page, year, publisher, doi, bibcode) \
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11, ?12, ?13, ?14)",
    )?;
    for (position, r) in entry.records.iter().enumerate() {
        let authors = serde_json::to_string(&r.authors).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        stmt.execute(params![
            sql_id,
            position as i64,
            r.source_type.as_str(),
            authors,
            r.title,
            r.journal,
            r.volume,
            r.number,
            r.pages.as_ref().map(|p| p.first.as_str()),
            r.pages.as_ref().and_then(|p| p.last.as_deref()),
            r.year,
            r.publisher,
            r.doi.as_ref().map(Doi::as_str),
            r.bibcode.as_ref().map(|b| b.to_string()),
        ])?;
    }
    Ok(())
}

fn load_entry(conn: &Connection, id: GlobalId) -> Result<RefEntry, StoreError> {
    let sql_id = to_sql_id(id.get())?;
    let note: Option<String> = conn
        .query_row("SELECT body FROM notes WHERE global_id = ?1", [sql_id], |r| r.get(0))
        .optional()?;
    let mut stmt = conn.prepare(
        "SELECT source_type, authors, title, journal, volume, number, first_page, last_page, year, publisher, doi, bibcode \
         FROM records WHERE global_id = ?1 ORDER BY position",
    )?;
    let rows = stmt.query_map([sql_id], |r| {
        Ok(RecordRow {
            source_type: r.get(0)?,
            authors: r.get(1)?,
            title: r.get(2)?,
            journal: r.get(3)?,
            volume: r.get(4)?,
            number: r.get(5)?,
            first_page: r.get(6)?,
            last_page: r.get(7)?,
            year: r.get(8)?,
            publisher: r.get(9)?,
            doi: r.get(10)?,
            bibcode: r.get(11)?,
        })
    })?;
    let mut records = Vec::new();
    for row in rows {
        records.push(row?.into_record()?);
    }
    Ok(RefEntry::new(id, records, note)?)
}

struct RecordRow {
    source_type: String,
    authors: String,
    title: String,
    journal: Option<String>,
    volume: Option<String>,
    number: Option<String>,
    first_page: Option<String>,
    last_page: Option<String>,
    year: Option<i32>,
    publisher: Option<String>,
    doi: Option<String>,
    bibcode: Option<String>,
}

impl RecordRow {
    fn into_record(self) -> Result<BibRecord, StoreError> {
        let corrupt = |what: &str, e: &dyn std::fmt::Display| StoreError::Corrupt(format!("{what}: {e}"));
        let authors: Vec<AuthorName> = serde_json::from_str(&self.authors).map_err(|e| corrupt("authors", &e))?;
        let source_type = SourceType::from_name(&self.source_type)
            .ok_or_else(|| corrupt("source type", &self.source_type))?;
        Ok(BibRecord {
            source_type,
            authors,
            title: self.title,
            journal: self.journal,
            volume: self.volume,
            number: self.number,
            pages: self.first_page.map(|first| Pages::new(first, self.last_page)),
            year: self.year,
            publisher: self.publisher,
            doi: self.doi.map(|d| parse_doi(&d)).transpose().map_err(|e| corrupt("doi", &e))?,
            bibcode: self
                .bibcode
                .map(|b| parse_bibcode(&b))
                .transpose()
                .map_err(|e| corrupt("bibcode", &e))?,
        })
    }
}
