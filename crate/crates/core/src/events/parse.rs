use std::io::{BufRead, BufReader, Read};

use super::types::{CommunityRegistry, NewsClass, RawEvent};
use super::EventError;

pub const CSV_HEADER: &str = "url,domain,community,timestamp,user,news_class";

/// Wire format of an event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Ndjson,
}

/// One rejected input row.
#[derive(Debug, Clone)]
pub struct RowIssue {
    /// 1-based line number in the input (the CSV header is line 1).
    pub line: u64,
    pub message: String,
}

/// What happened during one parse: nothing is dropped silently.
#[derive(Debug, Clone, Default)]
pub struct ParseSummary {
    /// Data rows seen (header excluded).
    pub rows: usize,
    pub parsed: usize,
    pub malformed: usize,
    /// Rows naming a community absent from the registry.
    pub unknown_community: usize,
    /// Per-row diagnostics, capped at [`ParseSummary::MAX_ISSUES`].
    pub issues: Vec<RowIssue>,
}

impl ParseSummary {
    pub const MAX_ISSUES: usize = 100;

    fn push_issue(&mut self, line: u64, message: String) {
        if self.issues.len() < Self::MAX_ISSUES {
            self.issues.push(RowIssue { line, message });
        }
    }
}

/// Canonicalize a URL string: lowercase scheme and host, strip the fragment,
/// keep the query string. Strings that do not parse as absolute URLs are kept
/// verbatim (trimmed) and treated as opaque identifiers.
pub fn normalize_url(raw: &str) -> String {
    let trimmed = raw.trim();
    match url::Url::parse(trimmed) {
        Ok(mut parsed) if parsed.has_host() => {
            parsed.set_fragment(None);
            parsed.to_string()
        }
        _ => trimmed.to_string(),
    }
}

/// Parse a CSV or NDJSON event log. Well-formed rows become [`RawEvent`]s;
/// malformed rows and rows naming unregistered communities are counted in the
/// returned [`ParseSummary`] with per-line diagnostics.
pub fn parse_events<R: Read>(
    reader: R,
    format: EventFormat,
    registry: &CommunityRegistry,
) -> Result<(Vec<RawEvent>, ParseSummary), EventError> {
    if registry.is_empty() {
        return Err(EventError::EmptyRegistry);
    }
    match format {
        EventFormat::Csv => parse_csv(reader, registry),
        EventFormat::Ndjson => parse_ndjson(reader, registry),
    }
}

struct RowFields<'a> {
    url: &'a str,
    domain: &'a str,
    community: &'a str,
    timestamp: &'a str,
    user: &'a str,
    news_class: &'a str,
}

enum RowOutcome {
    Event(RawEvent),
    UnknownCommunity(String),
    Malformed(String),
}

fn decode_row(fields: &RowFields<'_>, registry: &CommunityRegistry) -> RowOutcome {
    let url = normalize_url(fields.url);
    if url.is_empty() {
        return RowOutcome::Malformed("empty url".into());
    }
    let domain = fields.domain.trim().to_lowercase();
    if domain.is_empty() {
        return RowOutcome::Malformed("empty domain".into());
    }
    let timestamp: i64 = match fields.timestamp.trim().parse() {
        Ok(t) if t >= 0 => t,
        Ok(t) => return RowOutcome::Malformed(format!("negative timestamp {t}")),
        Err(_) => {
            return RowOutcome::Malformed(format!("bad timestamp {:?}", fields.timestamp));
        }
    };
    let news_class = match NewsClass::parse(fields.news_class.trim()) {
        Some(c) => c,
        None => {
            return RowOutcome::Malformed(format!("bad news_class {:?}", fields.news_class));
        }
    };
    let community = match registry.get(fields.community.trim()) {
        Some(c) => c,
        None => return RowOutcome::UnknownCommunity(fields.community.trim().to_string()),
    };
    let user = fields.user.trim();
    let user = if user.is_empty() {
        None
    } else {
        Some(user.to_string())
    };
    RowOutcome::Event(RawEvent {
        url,
        domain,
        community,
        timestamp,
        user,
        news_class,
    })
}

fn record_outcome(
    outcome: RowOutcome,
    line: u64,
    events: &mut Vec<RawEvent>,
    summary: &mut ParseSummary,
) {
    summary.rows += 1;
    match outcome {
        RowOutcome::Event(ev) => {
            summary.parsed += 1;
            events.push(ev);
        }
        RowOutcome::UnknownCommunity(name) => {
            summary.unknown_community += 1;
            summary.push_issue(line, format!("unknown community {name:?}"));
        }
        RowOutcome::Malformed(message) => {
            summary.malformed += 1;
            summary.push_issue(line, message);
        }
    }
}

fn parse_csv<R: Read>(
    reader: R,
    registry: &CommunityRegistry,
) -> Result<(Vec<RawEvent>, ParseSummary), EventError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut events = Vec::new();
    let mut summary = ParseSummary::default();

    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        // Empty stream: no header, no rows.
        return Ok((events, summary));
    }
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    if found != expected {
        return Err(EventError::BadHeader {
            found: found.join(","),
            expected: CSV_HEADER.to_string(),
        });
    }

    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2; // header occupies line 1
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                summary.rows += 1;
                summary.malformed += 1;
                summary.push_issue(line, format!("unreadable row: {e}"));
                continue;
            }
        };
        if record.len() != 6 {
            summary.rows += 1;
            summary.malformed += 1;
            summary.push_issue(line, format!("expected 6 fields, got {}", record.len()));
            continue;
        }
        let fields = RowFields {
            url: &record[0],
            domain: &record[1],
            community: &record[2],
            timestamp: &record[3],
            user: &record[4],
            news_class: &record[5],
        };
        record_outcome(decode_row(&fields, registry), line, &mut events, &mut summary);
    }
    Ok((events, summary))
}

fn parse_ndjson<R: Read>(
    reader: R,
    registry: &CommunityRegistry,
) -> Result<(Vec<RawEvent>, ParseSummary), EventError> {
    let mut events = Vec::new();
    let mut summary = ParseSummary::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                summary.rows += 1;
                summary.malformed += 1;
                summary.push_issue(lineno, format!("bad json: {e}"));
                continue;
            }
        };
        let get = |key: &str| value.get(key).and_then(|v| v.as_str()).unwrap_or("");
        let timestamp_buf;
        let timestamp = match value.get("timestamp") {
            Some(serde_json::Value::Number(n)) => {
                timestamp_buf = n.to_string();
                timestamp_buf.as_str()
            }
            Some(serde_json::Value::String(s)) => s.as_str(),
            _ => "",
        };
        let fields = RowFields {
            url: get("url"),
            domain: get("domain"),
            community: get("community"),
            timestamp,
            user: get("user"),
            news_class: get("news_class"),
        };
        record_outcome(
            decode_row(&fields, registry),
            lineno,
            &mut events,
            &mut summary,
        );
    }
    Ok((events, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry() -> CommunityRegistry {
        CommunityRegistry::new(["twitter", "pol"]).unwrap()
    }

    #[test]
    fn csv_row_maps_fields_directly() {
        let input = format!("{CSV_HEADER}\nu1,breitbart.com,twitter,1000,alice,alternative\n");
        let (events, summary) =
            parse_events(input.as_bytes(), EventFormat::Csv, &registry()).unwrap();
        assert_eq!(summary.rows, 1);
        assert_eq!(summary.parsed, 1);
        assert_eq!(events.len(), 1);
        let e = &events[0];
        assert_eq!(e.url, "u1");
        assert_eq!(e.domain, "breitbart.com");
        assert_eq!(e.community.index(), 0);
        assert_eq!(e.timestamp, 1000);
        assert_eq!(e.user.as_deref(), Some("alice"));
        assert_eq!(e.news_class, NewsClass::Alternative);
    }

    #[test]
    fn empty_stream_yields_empty_list() {
        let (events, summary) = parse_events(&b""[..], EventFormat::Csv, &registry()).unwrap();
        assert!(events.is_empty());
        assert_eq!(summary.rows, 0);
        let (events, summary) = parse_events(&b""[..], EventFormat::Ndjson, &registry()).unwrap();
        assert!(events.is_empty());
        assert_eq!(summary.rows, 0);
    }

    #[test]
    fn unknown_community_is_counted_not_dropped_silently() {
        let input = format!("{CSV_HEADER}\nu1,d.com,myspace,5,,mainstream\n");
        let (events, summary) =
            parse_events(input.as_bytes(), EventFormat::Csv, &registry()).unwrap();
        assert!(events.is_empty());
        assert_eq!(summary.unknown_community, 1);
        assert_eq!(summary.malformed, 0);
        assert_eq!(summary.issues.len(), 1);
        assert!(summary.issues[0].message.contains("myspace"));
    }

    #[test]
    fn malformed_rows_are_counted_with_line_numbers() {
        let input = format!(
            "{CSV_HEADER}\nu1,d.com,twitter,notatime,,mainstream\nu2,d.com,twitter,-3,,mainstream\nu3,d.com,twitter,7,,news\n"
        );
        let (events, summary) =
            parse_events(input.as_bytes(), EventFormat::Csv, &registry()).unwrap();
        assert!(events.is_empty());
        assert_eq!(summary.malformed, 3);
        assert_eq!(summary.issues[0].line, 2);
        assert_eq!(summary.issues[2].line, 4);
    }

    #[test]
    fn bad_header_is_an_error() {
        let input = "url,domain,who,timestamp,user,news_class\n";
        let out = parse_events(input.as_bytes(), EventFormat::Csv, &registry());
        assert!(matches!(out, Err(EventError::BadHeader { .. })));
    }

    #[test]
    fn ndjson_rows_parse_with_numeric_or_string_timestamps() {
        let input = concat!(
            r#"{"url":"u1","domain":"d.com","community":"pol","timestamp":12,"user":"","news_class":"mainstream"}"#,
            "\n",
            r#"{"url":"u2","domain":"d.com","community":"twitter","timestamp":"34","user":"bob","news_class":"alternative"}"#,
            "\n",
            "not json\n",
        );
        let (events, summary) =
            parse_events(input.as_bytes(), EventFormat::Ndjson, &registry()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].timestamp, 12);
        assert_eq!(events[0].user, None);
        assert_eq!(events[1].timestamp, 34);
        assert_eq!(summary.malformed, 1);
    }

    #[test]
    fn url_normalization_lowercases_scheme_and_host_and_strips_fragment() {
        assert_eq!(
            normalize_url("HTTPS://Example.COM/Path?q=UP#frag"),
            "https://example.com/Path?q=UP"
        );
        // opaque identifiers pass through
        assert_eq!(normalize_url("u1"), "u1");
        assert_eq!(normalize_url("  spaced  "), "spaced");
    }
}
