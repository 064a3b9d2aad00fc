//! The `--store` snapshot: the kept records as JSON lines.

use std::io::Write;
use std::path::Path;

use vantage_core::ingest::{parse_corpus, CorpusStats};
use vantage_core::{IngestError, Store, TweetRecord};

use crate::error::ApiError;

/// Records of a snapshot file; a missing file is an empty snapshot.
pub fn read(path: &Path) -> Result<Vec<TweetRecord>, ApiError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(IngestError::Io(format!("{}: {e}", path.display())).into()),
    };
    let (records, stats) = parse_corpus(&text, None, |_| false);
    if stats.records_rejected > 0 {
        return Err(ApiError::new(
            "MALFORMED_RECORD",
            format!("{}: {} unreadable snapshot lines", path.display(), stats.records_rejected),
        ));
    }
    Ok(records)
}

pub fn load(path: Option<&Path>) -> Result<Store, ApiError> {
    let mut store = Store::new();
    if let Some(p) = path {
        store.insert_records(read(p)?)?;
    }
    Ok(store)
}

/// Appends `records` to the snapshot, creating it if needed.
pub fn append(path: &Path, records: &[TweetRecord]) -> Result<(), ApiError> {
    let io = |e: std::io::Error| ApiError::from(IngestError::Io(format!("{}: {e}", path.display())));
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    for r in records {
        writeln!(f, "{}", r.to_json_line()).map_err(io)?;
    }
    Ok(())
}

/// Parses `input`, drops records already in the snapshot, and appends the
/// rest when a snapshot path is given.
pub fn ingest(input: &Path, keywords: &[String], snapshot: Option<&Path>) -> Result<CorpusStats, ApiError> {
    let existing = match snapshot {
        Some(p) => read(p)?,
        None => Vec::new(),
    };
    let known: std::collections::HashSet<&str> = existing.iter().map(|r| r.tweet_id.as_str()).collect();
    let text = std::fs::read_to_string(input).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IngestError::FileNotFound(input.display().to_string()),
        _ => IngestError::Io(format!("{}: {e}", input.display())),
    })?;
    let kw = (!keywords.is_empty()).then_some(keywords);
    let (kept, stats) = parse_corpus(&text, kw, |id| known.contains(id));
    if kept.is_empty() {
        return Err(IngestError::EmptyCorpus.into());
    }
    if let Some(p) = snapshot {
        append(p, &kept)?;
    }
    Ok(stats)
}
