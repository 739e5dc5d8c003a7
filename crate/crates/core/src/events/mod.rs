//! Event data model: communities, raw share events, per-URL series, and
//! binned count matrices, plus the ingestion and filtering pipeline that
//! produces them.

mod parse;
mod pipeline;
mod types;

pub use parse::{normalize_url, parse_events, EventFormat, ParseSummary, RowIssue};
pub use pipeline::{bin_series, drop_gap_overlapping, filter_cross_platform, group_by_url};
pub use types::{
    BinnedCounts, CommunityId, CommunityRegistry, GapInterval, GapSchedule, NewsClass, RawEvent,
    UrlSeries,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EventError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("community registry is empty")]
    EmptyRegistry,
    #[error("duplicate community name {0:?}")]
    DuplicateCommunity(String),
    #[error("unexpected header {found:?}, expected {expected:?}")]
    BadHeader { found: String, expected: String },
    #[error("url {url:?} carries both news classes")]
    ConflictingNewsClass { url: String },
    #[error("series {url:?} has no events")]
    EmptySeries { url: String },
    #[error("bin width must be positive, got {0}")]
    BadBinWidth(i64),
    #[error("gap interval for {community:?} has start {start} >= end {end}")]
    BadGapInterval {
        community: String,
        start: i64,
        end: i64,
    },
    #[error("gap intervals for {community:?} overlap")]
    OverlappingGaps { community: String },
}
