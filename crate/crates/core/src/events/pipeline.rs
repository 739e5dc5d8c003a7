use std::collections::BTreeMap;
use std::collections::BTreeSet;

use ndarray::Array2;

use super::types::{BinnedCounts, CommunityId, CommunityRegistry, GapSchedule, UrlSeries};
use super::{EventError, RawEvent};

/// Split a flat event list into one [`UrlSeries`] per distinct URL, sorted by
/// URL. Every input event lands in exactly one output series.
pub fn group_by_url(
    events: &[RawEvent],
    registry: &CommunityRegistry,
) -> Result<Vec<UrlSeries>, EventError> {
    let k = registry.len();
    let mut by_url: BTreeMap<&str, UrlSeries> = BTreeMap::new();
    for ev in events {
        let series = by_url.entry(&ev.url).or_insert_with(|| UrlSeries {
            url: ev.url.clone(),
            domain: ev.domain.clone(),
            news_class: ev.news_class,
            times: vec![Vec::new(); k],
            t_first: ev.timestamp,
            t_last: ev.timestamp,
        });
        if series.news_class != ev.news_class {
            return Err(EventError::ConflictingNewsClass {
                url: ev.url.clone(),
            });
        }
        series.times[ev.community.index()].push(ev.timestamp);
        series.t_first = series.t_first.min(ev.timestamp);
        series.t_last = series.t_last.max(ev.timestamp);
        if ev.timestamp == series.t_first {
            // Earliest event decides the recorded domain; same-url rows can
            // disagree only through input noise.
            series.domain = ev.domain.clone();
        }
    }
    let mut out: Vec<UrlSeries> = by_url.into_values().collect();
    for series in &mut out {
        for list in &mut series.times {
            list.sort_unstable();
        }
    }
    Ok(out)
}

/// Keep a series iff it has at least one event in every community of
/// `required` and, when `any_of` is non-empty, at least one event in some
/// community of `any_of`. The two sets must be disjoint.
pub fn filter_cross_platform(
    series: Vec<UrlSeries>,
    required: &BTreeSet<CommunityId>,
    any_of: &BTreeSet<CommunityId>,
) -> Vec<UrlSeries> {
    assert!(
        required.is_disjoint(any_of),
        "required and any_of must be disjoint"
    );
    series
        .into_iter()
        .filter(|s| {
            required.iter().all(|&c| s.events_in(c) > 0)
                && (any_of.is_empty() || any_of.iter().any(|&c| s.events_in(c) > 0))
        })
        .collect()
}

/// Among series whose `[t_first, t_last]` span intersects any gap, drop the
/// `fraction` with the shortest duration (ties broken by URL ascending).
/// Returns `(kept, dropped)`; series disjoint from all gaps are always kept.
///
/// The number dropped is `ceil(fraction * overlapping_count)`, evaluated with
/// a small slack so that e.g. `0.1 * 10` counts as exactly 1.
pub fn drop_gap_overlapping(
    series: Vec<UrlSeries>,
    gaps: &GapSchedule,
    fraction: f64,
) -> (Vec<UrlSeries>, Vec<UrlSeries>) {
    assert!(
        (0.0..=1.0).contains(&fraction),
        "fraction must be in [0, 1]"
    );
    let mut kept = Vec::new();
    let mut overlapping = Vec::new();
    for s in series {
        if gaps.overlaps_span(s.t_first, s.t_last) {
            overlapping.push(s);
        } else {
            kept.push(s);
        }
    }
    let n_drop = ((fraction * overlapping.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_drop = n_drop.min(overlapping.len());
    overlapping.sort_by(|a, b| {
        a.duration()
            .cmp(&b.duration())
            .then_with(|| a.url.cmp(&b.url))
    });
    let rest = overlapping.split_off(n_drop);
    kept.extend(rest);
    kept.sort_by(|a, b| a.url.cmp(&b.url));
    (kept, overlapping)
}

/// Bin a series into per-community event counts at width `delta_t` seconds.
/// The origin is `t_first` truncated to a `delta_t`-aligned boundary, so
/// re-binning unions of series is associative.
pub fn bin_series(series: &UrlSeries, delta_t: i64) -> Result<BinnedCounts, EventError> {
    if delta_t <= 0 {
        return Err(EventError::BadBinWidth(delta_t));
    }
    if series.total_events() == 0 {
        return Err(EventError::EmptySeries {
            url: series.url.clone(),
        });
    }
    let origin = series.t_first.div_euclid(delta_t) * delta_t;
    let t_bins = ((series.t_last - origin).div_euclid(delta_t) + 1) as usize;
    let k = series.times.len();
    let mut counts = Array2::<u32>::zeros((t_bins, k));
    for (community, times) in series.times.iter().enumerate() {
        for &tau in times {
            let row = (tau - origin).div_euclid(delta_t) as usize;
            counts[[row, community]] += 1;
        }
    }
    BinnedCounts::new(counts, delta_t, origin)
}
