use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::IngestError;

/// One conversion: a view of an ad in `category_id` following a search for
/// `query_raw` within a session.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClickEvent {
    #[serde(rename = "session")]
    pub session_id: String,
    #[serde(rename = "ts")]
    pub timestamp: u64,
    #[serde(rename = "query")]
    pub query_raw: String,
    #[serde(rename = "ad")]
    pub ad_id: String,
    #[serde(rename = "cat")]
    pub category_id: u32,
    #[serde(rename = "bot", default)]
    pub is_bot: bool,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ParsedLog {
    pub events: Vec<ClickEvent>,
    /// Malformed lines skipped in lenient mode.
    pub skipped: usize,
}

/// Parses a JSON-lines click log. Blank lines are ignored. In strict mode the
/// first malformed line (including an empty query) aborts with its 1-based
/// line number; otherwise such lines are counted and skipped.
pub fn parse_click_log<R: BufRead>(reader: R, strict: bool) -> Result<ParsedLog, IngestError> {
    let mut out = ParsedLog::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<ClickEvent>(&line)
            .map_err(|e| e.to_string())
            .and_then(|ev| {
                if ev.query_raw.trim().is_empty() {
                    Err("empty query".to_string())
                } else {
                    Ok(ev)
                }
            });
        match parsed {
            Ok(ev) => out.events.push(ev),
            Err(reason) if strict => {
                return Err(IngestError::MalformedRecord { line: i + 1, reason })
            }
            Err(_) => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Writes events in the same JSON-lines schema `parse_click_log` reads.
pub fn write_click_log<W: Write>(mut w: W, events: &[ClickEvent]) -> std::io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut w, ev)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
