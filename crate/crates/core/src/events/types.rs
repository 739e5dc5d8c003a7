use std::collections::HashMap;
use std::fmt;

use ndarray::Array2;

use super::EventError;

/// Index of one community (a platform or sub-community) within a
/// [`CommunityRegistry`]. Indices are dense `0..K-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommunityId(pub(crate) u16);

impl CommunityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Registry mapping community names to dense indices. Names are unique and
/// case-sensitive; the index of a name is its position in the construction
/// order.
#[derive(Debug, Clone)]
pub struct CommunityRegistry {
    names: Vec<String>,
    by_name: HashMap<String, CommunityId>,
}

impl CommunityRegistry {
    pub fn new<I, S>(names: I) -> Result<Self, EventError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(EventError::EmptyRegistry);
        }
        let mut by_name = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if by_name.insert(name.clone(), CommunityId(i as u16)).is_some() {
                return Err(EventError::DuplicateCommunity(name.clone()));
            }
        }
        Ok(Self { names, by_name })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<CommunityId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: CommunityId) -> &str {
        &self.names[id.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> impl Iterator<Item = CommunityId> + '_ {
        (0..self.names.len()).map(|i| CommunityId(i as u16))
    }
}

/// Binary label of a URL's source domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NewsClass {
    Alternative,
    Mainstream,
}

impl NewsClass {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "alternative" => Some(NewsClass::Alternative),
            "mainstream" => Some(NewsClass::Mainstream),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NewsClass::Alternative => "alternative",
            NewsClass::Mainstream => "mainstream",
        }
    }

    pub const ALL: [NewsClass; 2] = [NewsClass::Alternative, NewsClass::Mainstream];
}

impl fmt::Display for NewsClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One URL share observed on one community.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEvent {
    pub url: String,
    pub domain: String,
    pub community: CommunityId,
    /// Epoch seconds, UTC. Non-negative.
    pub timestamp: i64,
    pub user: Option<String>,
    pub news_class: NewsClass,
}

/// All events for one URL, split per community. Each per-community list is
/// sorted non-decreasing; at least one list is non-empty.
#[derive(Debug, Clone)]
pub struct UrlSeries {
    pub url: String,
    pub domain: String,
    pub news_class: NewsClass,
    /// `times[k]` holds the sorted timestamps of events on community `k`.
    pub times: Vec<Vec<i64>>,
    pub t_first: i64,
    pub t_last: i64,
}

impl UrlSeries {
    pub fn total_events(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    pub fn events_in(&self, community: CommunityId) -> usize {
        self.times[community.index()].len()
    }

    pub fn duration(&self) -> i64 {
        self.t_last - self.t_first
    }
}

/// Event-count matrix for one URL: `T` time bins by `K` communities.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    counts: Array2<u32>,
    /// Bin width in seconds.
    pub delta_t: i64,
    /// Epoch seconds of the left edge of bin 0, aligned to a `delta_t`
    /// boundary.
    pub origin: i64,
}

impl BinnedCounts {
    pub fn new(counts: Array2<u32>, delta_t: i64, origin: i64) -> Result<Self, EventError> {
        if delta_t <= 0 {
            return Err(EventError::BadBinWidth(delta_t));
        }
        Ok(Self {
            counts,
            delta_t,
            origin,
        })
    }

    /// Number of time bins `T`.
    pub fn num_bins(&self) -> usize {
        self.counts.nrows()
    }

    /// Number of communities `K`.
    pub fn num_communities(&self) -> usize {
        self.counts.ncols()
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn get(&self, t: usize, k: usize) -> u32 {
        self.counts[[t, k]]
    }

    /// Total events per community (column sums).
    pub fn community_totals(&self) -> Vec<u64> {
        (0..self.num_communities())
            .map(|k| self.counts.column(k).iter().map(|&c| c as u64).sum())
            .collect()
    }

    pub fn total_events(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// A collection outage for one community: events in `[start, end)` may be
/// missing from the dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapInterval {
    pub community: CommunityId,
    pub start: i64,
    pub end: i64,
}

/// Known collection outages, non-overlapping per community.
#[derive(Debug, Clone, Default)]
pub struct GapSchedule {
    intervals: Vec<GapInterval>,
}

impl GapSchedule {
    pub fn new(
        mut intervals: Vec<GapInterval>,
        registry: &CommunityRegistry,
    ) -> Result<Self, EventError> {
        for iv in &intervals {
            if iv.start >= iv.end {
                return Err(EventError::BadGapInterval {
                    community: registry.name(iv.community).to_string(),
                    start: iv.start,
                    end: iv.end,
                });
            }
        }
        intervals.sort_by_key(|iv| (iv.community, iv.start));
        for pair in intervals.windows(2) {
            if pair[0].community == pair[1].community && pair[1].start < pair[0].end {
                return Err(EventError::OverlappingGaps {
                    community: registry.name(pair[0].community).to_string(),
                });
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[GapInterval] {
        &self.intervals
    }

    /// True if the closed span `[t_first, t_last]` intersects any gap.
    pub fn overlaps_span(&self, t_first: i64, t_last: i64) -> bool {
        self.intervals
            .iter()
            .any(|iv| t_first < iv.end && t_last >= iv.start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_assigns_dense_indices() {
        let reg = CommunityRegistry::new(["twitter", "pol", "The_Donald"]).unwrap();
        assert_eq!(reg.len(), 3);
        assert_eq!(reg.get("pol").unwrap().index(), 1);
        assert_eq!(reg.name(reg.get("The_Donald").unwrap()), "The_Donald");
        assert!(reg.get("myspace").is_none());
    }

    #[test]
    fn registry_rejects_duplicates_and_empty() {
        assert!(matches!(
            CommunityRegistry::new(["a", "a"]),
            Err(EventError::DuplicateCommunity(_))
        ));
        assert!(matches!(
            CommunityRegistry::new(Vec::<String>::new()),
            Err(EventError::EmptyRegistry)
        ));
    }

    #[test]
    fn news_class_round_trips() {
        for class in NewsClass::ALL {
            assert_eq!(NewsClass::parse(class.as_str()), Some(class));
        }
        assert_eq!(NewsClass::parse("Mainstream"), None);
    }

    #[test]
    fn gap_schedule_rejects_overlap_within_community() {
        let reg = CommunityRegistry::new(["twitter"]).unwrap();
        let c = reg.get("twitter").unwrap();
        let out = GapSchedule::new(
            vec![
                GapInterval {
                    community: c,
                    start: 0,
                    end: 10,
                },
                GapInterval {
                    community: c,
                    start: 5,
                    end: 20,
                },
            ],
            &reg,
        );
        assert!(matches!(out, Err(EventError::OverlappingGaps { .. })));
    }

    #[test]
    fn gap_overlap_uses_half_open_intervals() {
        let reg = CommunityRegistry::new(["twitter"]).unwrap();
        let c = reg.get("twitter").unwrap();
        let gaps = GapSchedule::new(
            vec![GapInterval {
                community: c,
                start: 100,
                end: 200,
            }],
            &reg,
        )
        .unwrap();
        assert!(gaps.overlaps_span(150, 300));
        assert!(gaps.overlaps_span(0, 100));
        // span ending just before the gap opens
        assert!(!gaps.overlaps_span(0, 99));
        // gap end is exclusive
        assert!(!gaps.overlaps_span(200, 300));
    }
}
