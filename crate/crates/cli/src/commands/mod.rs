mod fit;
mod influence;
mod ingest;
mod simulate;
mod temporal;

pub use fit::cmd_fit;
pub use influence::{cmd_influence, format_lambda0, format_pct, format_weight, render_report};
pub use ingest::cmd_ingest;
pub use simulate::cmd_simulate;
pub use temporal::cmd_temporal;

use std::fs;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use urlflow_core::events::{parse_events, EventFormat, RawEvent};

use crate::config::RunConfig;
use crate::error::CliError;

/// `influence` plus `temporal` into the same output directory.
pub fn cmd_report(
    config: &RunConfig,
    config_path: &Path,
    posteriors_path: &Path,
    store_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    cmd_influence(config, config_path, posteriors_path, store_path, out_dir)?;
    cmd_temporal(config, config_path, store_path, out_dir)
}

pub(crate) fn ensure_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))
}

/// Read a normalized event store (always CSV). Malformed rows in a store are
/// a data error, unlike raw ingest input.
pub(crate) fn load_store(config: &RunConfig, path: &Path) -> Result<Vec<RawEvent>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open store {}: {e}", path.display())))?;
    let (events, summary) = parse_events(
        BufReader::new(file),
        EventFormat::Csv,
        &config.registry,
    )
    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if summary.malformed > 0 || summary.unknown_community > 0 {
        let detail = summary
            .issues
            .first()
            .map(|i| format!(" (line {}: {})", i.line, i.message))
            .unwrap_or_default();
        return Err(CliError::Data(format!(
            "store {} has {} bad rows{detail}; re-run ingest",
            path.display(),
            summary.malformed + summary.unknown_community
        )));
    }
    Ok(events)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Write events as a normalized CSV store: header row, then rows sorted by
/// (url, timestamp, community, user). Duplicates are kept; reposts are
/// signal.
pub(crate) fn write_store(
    path: &Path,
    config: &RunConfig,
    mut events: Vec<RawEvent>,
) -> Result<(), CliError> {
    events.sort_by(|a, b| {
        (&a.url, a.timestamp, a.community, &a.user).cmp(&(
            &b.url,
            b.timestamp,
            b.community,
            &b.user,
        ))
    });
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    writer
        .write_record(["url", "domain", "community", "timestamp", "user", "news_class"])
        .map_err(io_err)?;
    for ev in &events {
        writer
            .write_record([
                ev.url.as_str(),
                ev.domain.as_str(),
                config.registry.name(ev.community),
                &ev.timestamp.to_string(),
                ev.user.as_deref().unwrap_or(""),
                ev.news_class.as_str(),
            ])
            .map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("cannot flush {}: {e}", path.display())))
}
