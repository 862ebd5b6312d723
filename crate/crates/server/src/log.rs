//! Append-only interaction log with a closed action vocabulary.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const LOG_FILE: &str = "actions.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AddCondition,
    RemoveCondition,
    RetrieveSubset,
    ComputeProjection,
    ClearSelection,
    LoadCollection,
    SelectColor,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::AddCondition,
        Action::RemoveCondition,
        Action::RetrieveSubset,
        Action::ComputeProjection,
        Action::ClearSelection,
        Action::LoadCollection,
        Action::SelectColor,
    ];
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRequest {
    pub session_id: String,
    pub action: Action,
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    pub payload: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub session_id: String,
    pub action: Action,
    pub timestamp: DateTime<Utc>,
    /// Hex SHA-256 of the payload's JSON text (`null` when absent).
    pub payload_digest: String,
}

pub fn payload_digest(payload: Option<&serde_json::Value>) -> String {
    let text = serde_json::to_vec(payload.unwrap_or(&serde_json::Value::Null)).expect("JSON values serialize");
    Sha256::digest(&text).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct ActionLog {
    path: PathBuf,
    entries: Mutex<Vec<ActionLogEntry>>,
}

impl ActionLog {
    /// Opens the log file in `dir`, replaying existing entries.
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        let path = dir.join(LOG_FILE);
        let mut entries = Vec::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line) {
                    Ok(e) => entries.push(e),
                    Err(e) => tracing::warn!(error = %e, "skipping unreadable log line"),
                }
            }
        }
        Ok(ActionLog { path, entries: Mutex::new(entries) })
    }

    pub fn append(&self, req: LogRequest) -> std::io::Result<ActionLogEntry> {
        let entry = ActionLogEntry {
            session_id: req.session_id,
            action: req.action,
            timestamp: req.timestamp.unwrap_or_else(Utc::now),
            payload_digest: payload_digest(req.payload.as_ref()),
        };
        let mut entries = self.entries.lock().expect("log lock poisoned");
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        OpenOptions::new().create(true).append(true).open(&self.path)?.write_all(line.as_bytes())?;
        entries.push(entry.clone());
        Ok(entry)
    }

    /// Entries of one session in the order they were received.
    pub fn session(&self, session_id: &str) -> Vec<ActionLogEntry> {
        let entries = self.entries.lock().expect("log lock poisoned");
        entries.iter().filter(|e| e.session_id == session_id).cloned().collect()
    }
}
