use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use serde::Serialize;

use urlflow_core::events::{parse_events, EventFormat, NewsClass, ParseSummary, RawEvent};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;

use super::{ensure_out_dir, write_file, write_store};

#[derive(Serialize)]
struct IngestSummary {
    rows: usize,
    parsed: usize,
    malformed: usize,
    unknown_community: usize,
    issues: Vec<IssueRow>,
    /// events per community per class, keyed by community name
    events: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Serialize)]
struct IssueRow {
    line: u64,
    message: String,
}

fn detect_format(path: &Path) -> Result<EventFormat, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("ndjson") | Some("jsonl") => return Ok(EventFormat::Ndjson),
        Some("csv") => return Ok(EventFormat::Csv),
        _ => {}
    }
    // Sniff: an NDJSON stream starts with an object.
    let mut file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut buf = [0u8; 256];
    let n = file
        .read(&mut buf)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let first = buf[..n].iter().find(|b| !b.is_ascii_whitespace());
    Ok(match first {
        Some(b'{') => EventFormat::Ndjson,
        _ => EventFormat::Csv,
    })
}

fn class_counts(events: &[RawEvent], config: &RunConfig) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for name in config.registry.names() {
        let per_class: BTreeMap<String, usize> = NewsClass::ALL
            .iter()
            .map(|c| (c.as_str().to_string(), 0))
            .collect();
        out.insert(name.clone(), per_class);
    }
    for ev in events {
        *out
            .get_mut(config.registry.name(ev.community))
            .unwrap()
            .get_mut(ev.news_class.as_str())
            .unwrap() += 1;
    }
    out
}

/// Parse a raw event log, normalize it, and write the event store plus an
/// ingest summary.
pub fn cmd_ingest(
    config: &RunConfig,
    config_path: &Path,
    input: &Path,
    out_dir: &Path,
) -> Result<ParseSummary, CliError> {
    let format = detect_format(input)?;
    let file = File::open(input)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
    let (events, summary) = parse_events(BufReader::new(file), format, &config.registry)
        .map_err(|e| CliError::Data(format!("{}: {e}", input.display())))?;

    ensure_out_dir(out_dir)?;
    write_store(&out_dir.join("events.csv"), config, events.clone())?;

    let json = IngestSummary {
        rows: summary.rows,
        parsed: summary.parsed,
        malformed: summary.malformed,
        unknown_community: summary.unknown_community,
        issues: summary
            .issues
            .iter()
            .map(|i| IssueRow {
                line: i.line,
                message: i.message.clone(),
            })
            .collect(),
        events: class_counts(&events, config),
    };
    write_file(
        &out_dir.join("ingest_summary.json"),
        &(serde_json::to_string_pretty(&json).expect("summary serializes") + "\n"),
    )?;
    write_manifest(out_dir, "ingest", config.seed, config_path, &[input])
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;

    eprintln!(
        "ingest: {} rows, {} events, {} malformed, {} unknown community",
        summary.rows, summary.parsed, summary.malformed, summary.unknown_community
    );
    for issue in summary.issues.iter().take(10) {
        eprintln!("  {}:{}: {}", input.display(), issue.line, issue.message);
    }
    Ok(summary)
}
