//! Descriptive temporal analytics over URL event streams: normalized daily
//! occurrence, per-user class fractions, re-post lags, inter-arrival means,
//! cross-group first-occurrence deltas, appearance-sequence tables, and
//! domain flow graphs.
//!
//! Communities are aggregated into named analysis groups (e.g. one group for
//! a platform, one for a set of sub-communities). Group order doubles as the
//! tie-break precedence when two groups see a URL in the same second.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::events::{CommunityId, CommunityRegistry, NewsClass, RawEvent, UrlSeries};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum TemporalError {
    #[error("group {0:?} names unknown community {1:?}")]
    UnknownCommunity(String, String),
    #[error("community {0:?} appears in more than one group")]
    OverlappingGroups(String),
    #[error("grouping has no groups")]
    NoGroups,
    #[error("no events selected for group {group:?}, class {class}")]
    EmptySelection { group: String, class: NewsClass },
}

/// Index of a group within a [`Grouping`].
pub type GroupId = usize;

/// Named, disjoint sets of communities. Declaration order fixes both output
/// order and the timestamp tie-break.
#[derive(Debug, Clone)]
pub struct Grouping {
    names: Vec<String>,
    members: Vec<Vec<CommunityId>>,
    group_of: Vec<Option<GroupId>>,
}

impl Grouping {
    pub fn new(
        groups: &[(String, Vec<String>)],
        registry: &CommunityRegistry,
    ) -> Result<Self, TemporalError> {
        if groups.is_empty() {
            return Err(TemporalError::NoGroups);
        }
        let mut names = Vec::new();
        let mut members = Vec::new();
        let mut group_of: Vec<Option<GroupId>> = vec![None; registry.len()];
        for (gid, (name, community_names)) in groups.iter().enumerate() {
            let mut ids = Vec::new();
            for cname in community_names {
                let id = registry.get(cname).ok_or_else(|| {
                    TemporalError::UnknownCommunity(name.clone(), cname.clone())
                })?;
                if group_of[id.index()].is_some() {
                    return Err(TemporalError::OverlappingGroups(cname.clone()));
                }
                group_of[id.index()] = Some(gid);
                ids.push(id);
            }
            names.push(name.clone());
            members.push(ids);
        }
        Ok(Self {
            names,
            members,
            group_of,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, group: GroupId) -> &str {
        &self.names[group]
    }

    pub fn members(&self, group: GroupId) -> &[CommunityId] {
        &self.members[group]
    }

    /// Group containing the community, if any; ungrouped communities are
    /// ignored by the analyses.
    pub fn group_of(&self, community: CommunityId) -> Option<GroupId> {
        self.group_of[community.index()]
    }
}

/// First appearance of one URL on each group it reached, in time order.
#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub url: String,
    pub domain: String,
    pub news_class: NewsClass,
    /// `(group, first timestamp)` sorted by timestamp, ties by group
    /// precedence. Each group appears at most once.
    pub firsts: Vec<(GroupId, i64)>,
}

/// First-occurrence records for every series with at least one event in some
/// group. Output is sorted by URL.
pub fn build_sequence_records(series: &[UrlSeries], grouping: &Grouping) -> Vec<SequenceRecord> {
    let mut records = Vec::new();
    for s in series {
        let mut firsts: Vec<(GroupId, i64)> = Vec::new();
        for group in 0..grouping.len() {
            let first = grouping
                .members(group)
                .iter()
                .filter_map(|&c| s.times[c.index()].first().copied())
                .min();
            if let Some(t) = first {
                firsts.push((group, t));
            }
        }
        if firsts.is_empty() {
            continue;
        }
        firsts.sort_by_key(|&(group, t)| (t, group));
        records.push(SequenceRecord {
            url: s.url.clone(),
            domain: s.domain.clone(),
            news_class: s.news_class,
            firsts,
        });
    }
    records.sort_by(|a, b| a.url.cmp(&b.url));
    records
}

/// Daily event counts for one group and class, each divided by the mean
/// daily count over the whole observed span (zero-count days included in the
/// mean). Days are UTC; the returned ratios average to 1 over the span.
pub fn normalized_daily_occurrence(
    events: &[RawEvent],
    grouping: &Grouping,
    group: GroupId,
    class: NewsClass,
) -> Result<Vec<(i64, f64)>, TemporalError> {
    let mut day_counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut total = 0u64;
    for ev in events {
        if ev.news_class == class && grouping.group_of(ev.community) == Some(group) {
            *day_counts.entry(ev.timestamp.div_euclid(SECONDS_PER_DAY)).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(TemporalError::EmptySelection {
            group: grouping.name(group).to_string(),
            class,
        });
    }
    let first_day = *day_counts.keys().next().unwrap();
    let last_day = *day_counts.keys().next_back().unwrap();
    let span = (last_day - first_day + 1) as f64;
    let mean = total as f64 / span;
    Ok((first_day..=last_day)
        .map(|day| {
            let count = day_counts.get(&day).copied().unwrap_or(0);
            (day, count as f64 / mean)
        })
        .collect())
}

/// Per-user fraction of posts linking alternative news, over all news posts
/// by that user (post-level, duplicates counted). Events without a user are
/// skipped; the count of skipped events is returned alongside.
pub fn user_alternative_fraction(events: &[RawEvent]) -> (Vec<(String, f64)>, usize) {
    let mut per_user: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut skipped = 0usize;
    for ev in events {
        match ev.user.as_deref() {
            Some(user) if !user.is_empty() => {
                let entry = per_user.entry(user).or_default();
                entry.1 += 1;
                if ev.news_class == NewsClass::Alternative {
                    entry.0 += 1;
                }
            }
            _ => skipped += 1,
        }
    }
    let fractions = per_user
        .into_iter()
        .map(|(user, (alt, all))| (user.to_string(), alt as f64 / all as f64))
        .collect();
    (fractions, skipped)
}

/// For each URL with two or more events in the group: the delays (seconds)
/// from its first occurrence there to each later occurrence.
pub fn repost_lags(
    events: &[RawEvent],
    grouping: &Grouping,
    group: GroupId,
) -> Vec<(String, Vec<i64>)> {
    let mut per_url: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for ev in events {
        if grouping.group_of(ev.community) == Some(group) {
            per_url.entry(&ev.url).or_default().push(ev.timestamp);
        }
    }
    per_url
        .into_iter()
        .filter(|(_, times)| times.len() >= 2)
        .map(|(url, mut times)| {
            times.sort_unstable();
            let first = times[0];
            let deltas = times[1..].iter().map(|&t| t - first).collect();
            (url.to_string(), deltas)
        })
        .collect()
}

/// For each URL with `n >= 2` events in the group: the mean gap
/// `(t_n - t_1) / (n - 1)` in seconds.
pub fn mean_interarrival(
    events: &[RawEvent],
    grouping: &Grouping,
    group: GroupId,
) -> Vec<(String, f64)> {
    let mut per_url: BTreeMap<&str, (i64, i64, usize)> = BTreeMap::new();
    for ev in events {
        if grouping.group_of(ev.community) == Some(group) {
            let entry = per_url
                .entry(&ev.url)
                .or_insert((ev.timestamp, ev.timestamp, 0));
            entry.0 = entry.0.min(ev.timestamp);
            entry.1 = entry.1.max(ev.timestamp);
            entry.2 += 1;
        }
    }
    per_url
        .into_iter()
        .filter(|(_, (_, _, n))| *n >= 2)
        .map(|(url, (t1, tn, n))| (url.to_string(), (tn - t1) as f64 / (n - 1) as f64))
        .collect()
}

/// Signed first-occurrence deltas for URLs present on both groups:
/// `t_first(b) - t_first(a)`, so positive means group `a` was earlier.
pub fn first_occurrence_delta(
    records: &[SequenceRecord],
    a: GroupId,
    b: GroupId,
) -> Vec<(String, i64)> {
    records
        .iter()
        .filter_map(|r| {
            let ta = r.firsts.iter().find(|&&(g, _)| g == a).map(|&(_, t)| t)?;
            let tb = r.firsts.iter().find(|&&(g, _)| g == b).map(|&(_, t)| t)?;
            Some((r.url.clone(), tb - ta))
        })
        .collect()
}

/// How deep to read a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceDepth {
    /// First group, then the second if any: `"R only"`, `"R→T"`.
    FirstHop,
    /// Full ordering over URLs present on every group: `"R→T→4"`.
    Full,
}

/// One row of a sequence-distribution table.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRow {
    pub news_class: NewsClass,
    pub label: String,
    pub count: u64,
    /// Percent of that class's record total at this depth.
    pub percent: f64,
}

/// Distribution of appearance sequences per class. At `FirstHop` depth every
/// record counts; at `Full` depth only URLs present on all groups count, and
/// percentages are of that restricted total.
pub fn classify_sequences(
    records: &[SequenceRecord],
    grouping: &Grouping,
    depth: SequenceDepth,
) -> Vec<SequenceRow> {
    let mut counts: BTreeMap<(NewsClass, String), u64> = BTreeMap::new();
    let mut class_totals: BTreeMap<NewsClass, u64> = BTreeMap::new();
    for r in records {
        let label = match depth {
            SequenceDepth::FirstHop => {
                let first = grouping.name(r.firsts[0].0);
                match r.firsts.get(1) {
                    Some(&(second, _)) => format!("{first}→{}", grouping.name(second)),
                    None => format!("{first} only"),
                }
            }
            SequenceDepth::Full => {
                if r.firsts.len() != grouping.len() {
                    continue;
                }
                r.firsts
                    .iter()
                    .map(|&(g, _)| grouping.name(g))
                    .collect::<Vec<_>>()
                    .join("→")
            }
        };
        *counts.entry((r.news_class, label)).or_default() += 1;
        *class_totals.entry(r.news_class).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((news_class, label), count)| SequenceRow {
            news_class,
            label,
            count,
            percent: 100.0 * count as f64 / class_totals[&news_class] as f64,
        })
        .collect()
}

/// Directed weighted edge of a [`FlowGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEdge {
    pub from: String,
    pub to: String,
    /// Number of distinct URLs inducing this edge.
    pub weight: u64,
}

/// Domain-to-group and group-to-group first-hop flow: per URL, one edge from
/// its domain to the first group it appeared on, and one from that group to
/// the second group when there is one.
#[derive(Debug, Clone, Default)]
pub struct FlowGraph {
    edges: Vec<FlowEdge>,
}

impl FlowGraph {
    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn weight(&self, from: &str, to: &str) -> Option<u64> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| e.weight)
    }

    /// Sum of domain-to-group weights, i.e. the number of records carrying a
    /// domain.
    pub fn total_domain_weight(&self, grouping: &Grouping) -> u64 {
        let group_names: Vec<&str> = (0..grouping.len()).map(|g| grouping.name(g)).collect();
        self.edges
            .iter()
            .filter(|e| !group_names.contains(&e.from.as_str()))
            .map(|e| e.weight)
            .sum()
    }

    /// Graphviz DOT rendering. Edge `penwidth` is proportional to the
    /// unique-URL weight, scaled so the heaviest edge gets width 5.
    pub fn to_dot(&self, graph_name: &str) -> String {
        let max_weight = self.edges.iter().map(|e| e.weight).max().unwrap_or(1) as f64;
        let mut out = String::new();
        let _ = writeln!(out, "digraph {graph_name} {{");
        for edge in &self.edges {
            let penwidth = 5.0 * edge.weight as f64 / max_weight;
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [weight={}, penwidth={:.2}];",
                escape_dot(&edge.from),
                escape_dot(&edge.to),
                edge.weight,
                penwidth
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Build the first-hop flow graph from sequence records.
pub fn build_flow_graph(records: &[SequenceRecord], grouping: &Grouping) -> FlowGraph {
    let mut weights: BTreeMap<(String, String), u64> = BTreeMap::new();
    for r in records {
        let first = grouping.name(r.firsts[0].0).to_string();
        *weights.entry((r.domain.clone(), first.clone())).or_default() += 1;
        if let Some(&(second, _)) = r.firsts.get(1) {
            *weights
                .entry((first, grouping.name(second).to_string()))
                .or_default() += 1;
        }
    }
    FlowGraph {
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| FlowEdge { from, to, weight })
            .collect(),
    }
}

/// Empirical CDF over the values: `(value, P(X <= value))` at each distinct
/// value, ready for two-column CSV output.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::CommunityRegistry;
    use approx::assert_relative_eq;

    fn setup() -> (CommunityRegistry, Grouping) {
        let registry =
            CommunityRegistry::new(["twitter", "pol", "The_Donald", "politics"]).unwrap();
        let grouping = Grouping::new(
            &[
                ("T".to_string(), vec!["twitter".to_string()]),
                (
                    "R".to_string(),
                    vec!["The_Donald".to_string(), "politics".to_string()],
                ),
                ("4".to_string(), vec!["pol".to_string()]),
            ],
            &registry,
        )
        .unwrap();
        (registry, grouping)
    }

    fn event(url: &str, community: &str, t: i64, class: NewsClass, user: &str) -> RawEvent {
        let (registry, _) = setup();
        RawEvent {
            url: url.into(),
            domain: format!("{}.com", url),
            community: registry.get(community).unwrap(),
            timestamp: t,
            user: if user.is_empty() {
                None
            } else {
                Some(user.into())
            },
            news_class: class,
        }
    }

    fn series_for(events: &[RawEvent]) -> Vec<UrlSeries> {
        let (registry, _) = setup();
        crate::events::group_by_url(events, &registry).unwrap()
    }

    #[test]
    fn grouping_rejects_overlap_and_unknown_names() {
        let (registry, _) = setup();
        let overlap = Grouping::new(
            &[
                ("A".to_string(), vec!["twitter".to_string()]),
                ("B".to_string(), vec!["twitter".to_string()]),
            ],
            &registry,
        );
        assert!(matches!(overlap, Err(TemporalError::OverlappingGroups(_))));
        let unknown = Grouping::new(
            &[("A".to_string(), vec!["myspace".to_string()])],
            &registry,
        );
        assert!(matches!(unknown, Err(TemporalError::UnknownCommunity(..))));
    }

    #[test]
    fn daily_ratios_match_forced_arithmetic() {
        let day = SECONDS_PER_DAY;
        let mut events = Vec::new();
        for (d, n) in [(0, 2), (1, 4), (2, 6)] {
            for i in 0..n {
                events.push(event(
                    &format!("u{d}{i}"),
                    "twitter",
                    d * day + i,
                    NewsClass::Mainstream,
                    "",
                ));
            }
        }
        let (_, grouping) = setup();
        let out =
            normalized_daily_occurrence(&events, &grouping, 0, NewsClass::Mainstream).unwrap();
        let ratios: Vec<f64> = out.iter().map(|&(_, r)| r).collect();
        assert_eq!(ratios, vec![0.5, 1.0, 1.5]);
    }

    #[test]
    fn constant_daily_counts_give_unit_ratios() {
        let day = SECONDS_PER_DAY;
        let events: Vec<RawEvent> = (0..4)
            .map(|d| event(&format!("u{d}"), "twitter", d * day, NewsClass::Mainstream, ""))
            .collect();
        let (_, grouping) = setup();
        let out =
            normalized_daily_occurrence(&events, &grouping, 0, NewsClass::Mainstream).unwrap();
        for (_, r) in out {
            assert_relative_eq!(r, 1.0);
        }
    }

    #[test]
    fn daily_occurrence_rejects_empty_selection() {
        let events = vec![event("u", "twitter", 0, NewsClass::Mainstream, "")];
        let (_, grouping) = setup();
        assert!(matches!(
            normalized_daily_occurrence(&events, &grouping, 2, NewsClass::Mainstream),
            Err(TemporalError::EmptySelection { .. })
        ));
    }

    #[test]
    fn user_fractions_count_posts() {
        let events = vec![
            event("a", "twitter", 0, NewsClass::Alternative, "alice"),
            event("b", "twitter", 1, NewsClass::Alternative, "alice"),
            event("c", "twitter", 2, NewsClass::Alternative, "alice"),
            event("d", "twitter", 3, NewsClass::Mainstream, "alice"),
            event("e", "twitter", 4, NewsClass::Mainstream, "bob"),
            event("f", "twitter", 5, NewsClass::Mainstream, ""),
        ];
        let (fractions, skipped) = user_alternative_fraction(&events);
        assert_eq!(skipped, 1);
        assert_eq!(fractions.len(), 2);
        assert_eq!(fractions[0], ("alice".to_string(), 0.75));
        assert_eq!(fractions[1], ("bob".to_string(), 0.0));
    }

    #[test]
    fn repost_lags_measure_from_first_occurrence() {
        let events = vec![
            event("u", "twitter", 100, NewsClass::Mainstream, ""),
            event("u", "twitter", 200, NewsClass::Mainstream, ""),
            event("u", "twitter", 500, NewsClass::Mainstream, ""),
            event("single", "twitter", 9, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let lags = repost_lags(&events, &grouping, 0);
        assert_eq!(lags.len(), 1);
        assert_eq!(lags[0], ("u".to_string(), vec![100, 400]));
    }

    #[test]
    fn interarrival_uses_span_over_count() {
        let events = vec![
            event("u", "twitter", 0, NewsClass::Mainstream, ""),
            event("u", "twitter", 60, NewsClass::Mainstream, ""),
            event("u", "twitter", 180, NewsClass::Mainstream, ""),
            event("v", "twitter", 0, NewsClass::Mainstream, ""),
            event("v", "twitter", 3600, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let means = mean_interarrival(&events, &grouping, 0);
        assert_eq!(means.len(), 2);
        assert_relative_eq!(means[0].1, 90.0);
        assert_relative_eq!(means[1].1, 3600.0);
    }

    #[test]
    fn first_occurrence_delta_signs_and_zero() {
        let events = vec![
            event("u", "twitter", 100, NewsClass::Mainstream, ""),
            event("u", "pol", 400, NewsClass::Mainstream, ""),
            event("v", "twitter", 50, NewsClass::Mainstream, ""),
            event("v", "pol", 50, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let records = build_sequence_records(&series_for(&events), &grouping);
        // T is group 0, 4 is group 2
        let deltas = first_occurrence_delta(&records, 0, 2);
        assert_eq!(deltas.len(), 2);
        assert_eq!(deltas[0], ("u".to_string(), 300));
        assert_eq!(deltas[1], ("v".to_string(), 0));
    }

    #[test]
    fn sequences_label_first_hop_and_full() {
        let events = vec![
            // r-only URL
            event("only", "The_Donald", 10, NewsClass::Mainstream, ""),
            // R at 50, T at 100, 4 at 200
            event("all", "politics", 50, NewsClass::Mainstream, ""),
            event("all", "twitter", 100, NewsClass::Mainstream, ""),
            event("all", "pol", 200, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let records = build_sequence_records(&series_for(&events), &grouping);

        let first_hop = classify_sequences(&records, &grouping, SequenceDepth::FirstHop);
        let labels: Vec<(&str, u64)> = first_hop
            .iter()
            .map(|r| (r.label.as_str(), r.count))
            .collect();
        assert!(labels.contains(&("R only", 1)));
        assert!(labels.contains(&("R→T", 1)));

        let full = classify_sequences(&records, &grouping, SequenceDepth::Full);
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].label, "R→T→4");
        assert_eq!(full[0].count, 1);
        assert_relative_eq!(full[0].percent, 100.0);
    }

    #[test]
    fn tied_firsts_use_group_precedence() {
        let events = vec![
            event("tie", "pol", 70, NewsClass::Mainstream, ""),
            event("tie", "twitter", 70, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let records = build_sequence_records(&series_for(&events), &grouping);
        // T (group 0) precedes 4 (group 2) at equal timestamps
        assert_eq!(records[0].firsts[0].0, 0);
        let rows = classify_sequences(&records, &grouping, SequenceDepth::FirstHop);
        assert_eq!(rows[0].label, "T→4");
    }

    #[test]
    fn flow_graph_counts_first_hops() {
        let events = vec![
            event("u", "The_Donald", 10, NewsClass::Mainstream, ""),
            event("u", "twitter", 20, NewsClass::Mainstream, ""),
            event("w", "The_Donald", 5, NewsClass::Mainstream, ""),
        ];
        let (_, grouping) = setup();
        let records = build_sequence_records(&series_for(&events), &grouping);
        let graph = build_flow_graph(&records, &grouping);
        assert_eq!(graph.weight("u.com", "R"), Some(1));
        assert_eq!(graph.weight("w.com", "R"), Some(1));
        assert_eq!(graph.weight("R", "T"), Some(1));
        assert_eq!(graph.weight("R", "4"), None);
        assert_eq!(graph.total_domain_weight(&grouping), 2);
    }

    #[test]
    fn dot_output_has_weight_and_penwidth() {
        let graph = FlowGraph {
            edges: vec![
                FlowEdge {
                    from: "d.com".into(),
                    to: "T".into(),
                    weight: 4,
                },
                FlowEdge {
                    from: "T".into(),
                    to: "R".into(),
                    weight: 2,
                },
            ],
        };
        let dot = graph.to_dot("flow");
        assert!(dot.starts_with("digraph flow {"));
        assert!(dot.contains("\"d.com\" -> \"T\" [weight=4, penwidth=5.00];"));
        assert!(dot.contains("\"T\" -> \"R\" [weight=2, penwidth=2.50];"));
        assert!(dot.trim_end().ends_with('}'));
    }

    #[test]
    fn empirical_cdf_handles_ties() {
        let cdf = empirical_cdf(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(cdf, vec![(1.0, 0.25), (2.0, 0.5), (3.0, 1.0)]);
    }
}
