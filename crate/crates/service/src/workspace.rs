//! On-disk workspace: one directory holding every persistent file.
//!
//! | file              | contents                                        |
//! |-------------------|-------------------------------------------------|
//! | `keystore.json`   | key_id to {public_key, private_key, alg}        |
//! | `registry.json`   | VC registry: issuers and credential status      |
//! | `ledger.journal`  | JSON-lines ledger journal                       |
//! | `issuer.json`     | token issuer bookkeeping (jti, refresh tokens)  |
//! | `workspace.conf`  | `key = value` settings                          |
//!
//! Missing files read as empty defaults and are created on first write.
//! Whole-file writes go through a temp file and a rename; the journal is
//! append-only.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use credbench_core::crypto::{KeyPair, Keystore, KeystoreError};
use credbench_core::ledger::journal::{self, LoadedJournal};
use credbench_core::ledger::{Ledger, LedgerError};
use credbench_core::scitokens::{IssuerState, DEFAULT_ACCESS_TTL, DEFAULT_REFRESH_TTL};
use credbench_core::vcred::FileRegistry;
use thiserror::Error;

pub const KEYSTORE_FILE: &str = "keystore.json";
pub const REGISTRY_FILE: &str = "registry.json";
pub const JOURNAL_FILE: &str = "ledger.journal";
pub const ISSUER_FILE: &str = "issuer.json";
pub const CONFIG_FILE: &str = "workspace.conf";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{file}: {detail}")]
    Corrupt { file: String, detail: String },
    #[error("{file}: {source}")]
    Io { file: String, source: io::Error },
    #[error("unknown key id {0:?}")]
    UnknownKey(String),
    #[error("ledger not initialized; run `ledger init` first")]
    NoLedger,
    #[error("ledger already initialized")]
    LedgerExists,
}

impl WorkspaceError {
    fn corrupt(file: &str, detail: impl ToString) -> Self {
        WorkspaceError::Corrupt { file: file.to_string(), detail: detail.to_string() }
    }

    /// Usage problems as opposed to damaged or unreadable files.
    pub fn is_usage(&self) -> bool {
        matches!(self, WorkspaceError::UnknownKey(_) | WorkspaceError::NoLedger | WorkspaceError::LedgerExists)
    }
}

/// Settings from `workspace.conf`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkspaceConfig {
    pub issuer: String,
    pub issuer_key: Option<String>,
    pub access_ttl: u64,
    pub refresh_ttl: u64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        Self {
            issuer: "https://issuer.example".to_string(),
            issuer_key: None,
            access_ttl: DEFAULT_ACCESS_TTL,
            refresh_ttl: DEFAULT_REFRESH_TTL,
        }
    }
}

impl WorkspaceConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let number = || value.parse::<u64>().map_err(|e| format!("line {}: {key}: {e}", n + 1));
            match key {
                "issuer" => cfg.issuer = value.to_string(),
                "issuer_key" => cfg.issuer_key = Some(value.to_string()),
                "access_ttl" => cfg.access_ttl = number()?,
                "refresh_ttl" => cfg.refresh_ttl = number()?,
                other => return Err(format!("line {}: unknown setting {other:?}", n + 1)),
            }
        }
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        let mut out = format!("issuer = {}\n", self.issuer);
        if let Some(k) = &self.issuer_key {
            out.push_str(&format!("issuer_key = {k}\n"));
        }
        out.push_str(&format!("access_ttl = {}\nrefresh_ttl = {}\n", self.access_ttl, self.refresh_ttl));
        out
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    /// Opens `root`, creating the directory if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WorkspaceError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| WorkspaceError::Io { file: root.display().to_string(), source })?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    fn read_optional(&self, file: &str) -> Result<Option<Vec<u8>>, WorkspaceError> {
        match fs::read(self.path(file)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(WorkspaceError::Io { file: file.to_string(), source }),
        }
    }

    fn read_text(&self, file: &str) -> Result<Option<String>, WorkspaceError> {
        self.read_optional(file)?.map(|bytes| String::from_utf8(bytes).map_err(|e| WorkspaceError::corrupt(file, e))).transpose()
    }

    fn write_atomic(&self, file: &str, contents: &[u8]) -> Result<(), WorkspaceError> {
        let io_err = |source| WorkspaceError::Io { file: file.to_string(), source };
        let tmp = self.path(&format!(".{file}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(contents).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
        fs::rename(&tmp, self.path(file)).map_err(io_err)
    }

    pub fn config(&self) -> Result<WorkspaceConfig, WorkspaceError> {
        match self.read_text(CONFIG_FILE)? {
            Some(text) => WorkspaceConfig::parse(&text).map_err(|e| WorkspaceError::corrupt(CONFIG_FILE, e)),
            None => Ok(WorkspaceConfig::default()),
        }
    }

    pub fn save_config(&self, cfg: &WorkspaceConfig) -> Result<(), WorkspaceError> {
        self.write_atomic(CONFIG_FILE, cfg.render().as_bytes())
    }

    pub fn keystore(&self) -> Result<Keystore, WorkspaceError> {
        match self.read_text(KEYSTORE_FILE)? {
            Some(text) => Keystore::from_json(&text).map_err(|e| WorkspaceError::corrupt(KEYSTORE_FILE, e)),
            None => Ok(Keystore::default()),
        }
    }

    pub fn save_keystore(&self, keystore: &Keystore) -> Result<(), WorkspaceError> {
        self.write_atomic(KEYSTORE_FILE, keystore.to_json().as_bytes())
    }

    pub fn key(&self, key_id: &str) -> Result<KeyPair, WorkspaceError> {
        match self.keystore()?.get(key_id) {
            Ok(key) => Ok(key),
            Err(KeystoreError::UnknownKeyId(id)) => Err(WorkspaceError::UnknownKey(id)),
            Err(e) => Err(WorkspaceError::corrupt(KEYSTORE_FILE, e)),
        }
    }

    /// The registry file, checked to parse.
    pub fn registry(&self) -> Result<FileRegistry, WorkspaceError> {
        let registry = FileRegistry::new(self.path(REGISTRY_FILE));
        registry.load().map_err(|e| WorkspaceError::corrupt(REGISTRY_FILE, e))?;
        Ok(registry)
    }

    pub fn issuer_state(&self) -> Result<IssuerState, WorkspaceError> {
        match self.read_text(ISSUER_FILE)? {
            Some(text) => serde_json::from_str(&text).map_err(|e| WorkspaceError::corrupt(ISSUER_FILE, e)),
            None => Ok(IssuerState::default()),
        }
    }

    pub fn save_issuer_state(&self, state: &IssuerState) -> Result<(), WorkspaceError> {
        let text = serde_json::to_string_pretty(state).expect("issuer state serializes");
        self.write_atomic(ISSUER_FILE, text.as_bytes())
    }

    /// Loads and replays the journal, if one exists.
    pub fn ledger(&self) -> Result<Option<LoadedJournal>, WorkspaceError> {
        let Some(bytes) = self.read_optional(JOURNAL_FILE)? else {
            return Ok(None);
        };
        journal::load(&bytes).map(Some).map_err(|e: LedgerError| WorkspaceError::corrupt(JOURNAL_FILE, e))
    }

    pub fn require_ledger(&self) -> Result<LoadedJournal, WorkspaceError> {
        self.ledger()?.ok_or(WorkspaceError::NoLedger)
    }

    /// Writes a fresh journal for a newly initialized ledger.
    pub fn init_ledger(&self, ledger: &Ledger) -> Result<(), WorkspaceError> {
        if self.path(JOURNAL_FILE).exists() {
            return Err(WorkspaceError::LedgerExists);
        }
        self.write_atomic(JOURNAL_FILE, journal::encode(ledger).as_bytes())
    }

    /// Appends blocks above `loaded`'s height, first cutting any torn tail.
    pub fn append_blocks(&self, loaded: &LoadedJournal, ledger: &Ledger) -> Result<(), WorkspaceError> {
        let io_err = |source| WorkspaceError::Io { file: JOURNAL_FILE.to_string(), source };
        let path = self.path(JOURNAL_FILE);
        let file = OpenOptions::new().read(true).write(true).open(&path).map_err(io_err)?;
        if loaded.truncated_bytes > 0 {
            file.set_len(loaded.intact_len as u64).map_err(io_err)?;
        }
        let mut out = String::new();
        let bytes = fs::read(&path).map_err(io_err)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            out.push('\n');
        }
        let from = loaded.ledger.height() as usize + 1;
        for block in ledger.chain().iter().skip(from) {
            out.push_str(&journal::block_line(block));
        }
        let mut file = OpenOptions::new().append(true).open(&path).map_err(io_err)?;
        file.write_all(out.as_bytes()).map_err(io_err)?;
        file.sync_data().map_err(io_err)
    }
}
