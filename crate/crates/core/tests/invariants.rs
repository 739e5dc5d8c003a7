//! Property tests for the cross-module invariants: partition and
//! conservation laws in the event pipeline, rate-matrix bounds and kernel
//! normalization in the Hawkes model, attribution completeness in the
//! sampler, and symmetry laws in the statistics.

use std::collections::BTreeSet;

use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use urlflow_core::events::{
    bin_series, drop_gap_overlapping, filter_cross_platform, group_by_url, BinnedCounts,
    CommunityRegistry, GapInterval, GapSchedule, NewsClass, RawEvent, UrlSeries,
};
use urlflow_core::gibbs::sample_parents;
use urlflow_core::hawkes::{compute_rates, impulse, HawkesParams, LagKernelGrid};
use urlflow_core::influence::{influence_percentage, ks_two_sample, WeightSampleSet};
use urlflow_core::temporal::{
    build_flow_graph, build_sequence_records, classify_sequences, first_occurrence_delta,
    normalized_daily_occurrence, Grouping, SequenceDepth,
};

const K: usize = 3;

fn registry() -> CommunityRegistry {
    CommunityRegistry::new(["twitter", "pol", "The_Donald"]).unwrap()
}

fn grouping(registry: &CommunityRegistry) -> Grouping {
    Grouping::new(
        &[
            ("T".to_string(), vec!["twitter".to_string()]),
            ("4".to_string(), vec!["pol".to_string()]),
            ("R".to_string(), vec!["The_Donald".to_string()]),
        ],
        registry,
    )
    .unwrap()
}

/// Events with the class a pure function of the URL, so grouping never hits
/// the conflicting-class error.
fn arb_events(max_len: usize) -> impl Strategy<Value = Vec<RawEvent>> {
    let reg = registry();
    prop::collection::vec(
        (0u8..10, 0usize..K, 0i64..1_000_000, prop::bool::ANY),
        1..max_len,
    )
    .prop_map(move |rows| {
        rows.into_iter()
            .map(|(url_id, community, timestamp, with_user)| RawEvent {
                url: format!("u{url_id}"),
                domain: format!("d{}.com", url_id % 3),
                community: reg.ids().nth(community).unwrap(),
                timestamp,
                user: with_user.then(|| format!("user{}", url_id % 4)),
                news_class: if url_id % 2 == 0 {
                    NewsClass::Alternative
                } else {
                    NewsClass::Mainstream
                },
            })
            .collect()
    })
}

fn arb_params() -> impl Strategy<Value = HawkesParams> {
    (
        prop::collection::vec(0.0f64..0.5, K),
        prop::collection::vec(0.0f64..0.3, K * K),
        prop::collection::vec(0.05f64..1.0, K * K * 3),
    )
        .prop_map(|(lambda0, weights, pmf_raw)| {
            let grid = LagKernelGrid::new(vec![1, 2, 5, 9]).unwrap();
            let weights = Array2::from_shape_vec((K, K), weights).unwrap();
            let mut lag_pmfs = Array3::zeros((K, K, 3));
            for s in 0..K {
                for t in 0..K {
                    let base = (s * K + t) * 3;
                    let total: f64 = pmf_raw[base..base + 3].iter().sum();
                    for b in 0..3 {
                        lag_pmfs[[s, t, b]] = pmf_raw[base + b] / total;
                    }
                }
            }
            HawkesParams::new(lambda0, weights, lag_pmfs, grid).unwrap()
        })
}

fn arb_counts(max_t: usize) -> impl Strategy<Value = BinnedCounts> {
    prop::collection::vec(prop::collection::vec(0u32..3, K), 1..max_t)
        .prop_map(|rows| {
            let t = rows.len();
            let mut arr = Array2::zeros((t, K));
            for (i, row) in rows.iter().enumerate() {
                for (k, &c) in row.iter().enumerate() {
                    arr[[i, k]] = c;
                }
            }
            BinnedCounts::new(arr, 1, 0).unwrap()
        })
}

/// The O(T^2 K^2 D) definition of the rate equation, straight from the
/// model: background plus every earlier bin's impulse at its lag.
fn naive_rates(params: &HawkesParams, counts: &BinnedCounts) -> Array2<f64> {
    let t_bins = counts.num_bins();
    let mut rates = Array2::zeros((t_bins, K));
    for t in 0..t_bins {
        for k in 0..K {
            let mut rate = params.lambda0[k];
            for t_prev in 0..t {
                for source in 0..K {
                    let s = counts.get(t_prev, source) as f64;
                    if s > 0.0 {
                        rate += s * impulse(params, source, k, (t - t_prev) as i64).unwrap();
                    }
                }
            }
            rates[[t, k]] = rate;
        }
    }
    rates
}

proptest! {
    #[test]
    fn group_by_url_partitions_events(events in arb_events(60)) {
        let reg = registry();
        let series = group_by_url(&events, &reg).unwrap();
        // every event lands in exactly one series, with multiplicity
        let total: usize = series.iter().map(UrlSeries::total_events).sum();
        prop_assert_eq!(total, events.len());
        for s in &series {
            for (k, times) in s.times.iter().enumerate() {
                let mut expected: Vec<i64> = events
                    .iter()
                    .filter(|e| e.url == s.url && e.community.index() == k)
                    .map(|e| e.timestamp)
                    .collect();
                expected.sort_unstable();
                prop_assert_eq!(times.clone(), expected);
                prop_assert!(times.windows(2).all(|w| w[0] <= w[1]));
            }
            prop_assert!(s.t_first <= s.t_last);
        }
        let urls: BTreeSet<&str> = series.iter().map(|s| s.url.as_str()).collect();
        prop_assert_eq!(urls.len(), series.len());
    }

    #[test]
    fn binning_conserves_counts(events in arb_events(60), delta_t in 1i64..5000) {
        let reg = registry();
        for series in group_by_url(&events, &reg).unwrap() {
            let binned = bin_series(&series, delta_t).unwrap();
            let totals = binned.community_totals();
            for k in 0..K {
                prop_assert_eq!(totals[k], series.times[k].len() as u64);
            }
            // spot-check placement: every event's bin index is within range
            let t_bins = binned.num_bins() as i64;
            for times in &series.times {
                for &tau in times {
                    let row = (tau - binned.origin).div_euclid(delta_t);
                    prop_assert!(row >= 0 && row < t_bins);
                }
            }
        }
    }

    #[test]
    fn filter_is_idempotent_and_monotone(events in arb_events(60)) {
        let reg = registry();
        let series = group_by_url(&events, &reg).unwrap();
        let required: BTreeSet<_> = reg.ids().take(2).collect();
        let any_of: BTreeSet<_> = reg.ids().skip(2).collect();
        let once = filter_cross_platform(series.clone(), &required, &any_of);
        let urls_once: Vec<&str> = once.iter().map(|s| s.url.as_str()).collect();
        let twice = filter_cross_platform(once.clone(), &required, &any_of);
        let urls_twice: Vec<&str> = twice.iter().map(|s| s.url.as_str()).collect();
        prop_assert_eq!(urls_once.clone(), urls_twice);

        // shrinking `required` never removes a previously kept series
        let smaller: BTreeSet<_> = reg.ids().take(1).collect();
        let relaxed = filter_cross_platform(series, &smaller, &any_of);
        let urls_relaxed: BTreeSet<&str> = relaxed.iter().map(|s| s.url.as_str()).collect();
        for url in &urls_once {
            prop_assert!(urls_relaxed.contains(url));
        }
    }

    #[test]
    fn gap_drop_never_touches_disjoint_series(
        events in arb_events(60),
        start in 0i64..500_000,
        len in 1i64..200_000,
        fraction in 0.0f64..=1.0,
    ) {
        let reg = registry();
        let gaps = GapSchedule::new(
            vec![GapInterval { community: reg.get("twitter").unwrap(), start, end: start + len }],
            &reg,
        ).unwrap();
        let series = group_by_url(&events, &reg).unwrap();
        let disjoint: BTreeSet<String> = series
            .iter()
            .filter(|s| !gaps.overlaps_span(s.t_first, s.t_last))
            .map(|s| s.url.clone())
            .collect();
        let (kept, dropped) = drop_gap_overlapping(series, &gaps, fraction);
        for s in &dropped {
            prop_assert!(!disjoint.contains(&s.url));
        }
        let kept_urls: BTreeSet<String> = kept.iter().map(|s| s.url.clone()).collect();
        for url in &disjoint {
            prop_assert!(kept_urls.contains(url));
        }
    }

    #[test]
    fn rates_match_naive_oracle_and_dominate_background(
        params in arb_params(),
        counts in arb_counts(20),
    ) {
        let rates = compute_rates(&params, &counts).unwrap();
        let oracle = naive_rates(&params, &counts);
        for t in 0..counts.num_bins() {
            for k in 0..K {
                prop_assert!((rates.get(t, k) - oracle[[t, k]]).abs() < 1e-12);
                prop_assert!(rates.get(t, k) >= params.lambda0[k]);
            }
        }
    }

    #[test]
    fn doubling_history_doubles_excitation(params in arb_params(), counts in arb_counts(20)) {
        let rates = compute_rates(&params, &counts).unwrap();
        let doubled_counts = BinnedCounts::new(
            counts.counts().mapv(|c| c * 2),
            counts.delta_t,
            counts.origin,
        ).unwrap();
        let doubled = compute_rates(&params, &doubled_counts).unwrap();
        for t in 0..counts.num_bins() {
            for k in 0..K {
                let excitation = rates.get(t, k) - params.lambda0[k];
                let excitation2 = doubled.get(t, k) - params.lambda0[k];
                prop_assert!((excitation2 - 2.0 * excitation).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impulse_sums_to_weight_over_the_window(params in arb_params()) {
        let d_max = params.grid.max_lag() as i64;
        for source in 0..K {
            for target in 0..K {
                let total: f64 = (1..=d_max)
                    .map(|d| impulse(&params, source, target, d).unwrap())
                    .sum();
                let w = params.weights[[source, target]];
                prop_assert!((total - w).abs() <= 1e-9 * w.max(1.0));
            }
        }
    }

    #[test]
    fn attribution_partitions_counts(
        params in arb_params(),
        counts in arb_counts(30),
        seed in 0u64..1000,
    ) {
        // needs positive background for occupied bins
        let mut params = params;
        for v in &mut params.lambda0 {
            *v += 0.01;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attr = sample_parents(&params, &counts, &mut rng).unwrap();
        let bg = attr.background_totals();
        let attributed = attr.attributed_totals();
        let totals = counts.community_totals();
        for k in 0..K {
            prop_assert_eq!(bg[k] + attributed[k], totals[k]);
        }
    }

    #[test]
    fn ks_statistic_bounds_and_symmetry(
        a in prop::collection::vec(-1000.0f64..1000.0, 1..40),
        b in prop::collection::vec(-1000.0f64..1000.0, 1..40),
    ) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn ks_p_value_non_increasing_in_distance(
        n in 2usize..50,
        shifts in prop::collection::vec(0usize..=50, 2),
    ) {
        // Samples of equal size n where the top r values of b are pushed
        // past a's range have D exactly r/n; compare two such r at fixed n.
        let r1 = shifts[0].min(n);
        let r2 = shifts[1].min(n);
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let sample = |r: usize| -> (Vec<f64>, Vec<f64>) {
            let a: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let b: Vec<f64> = (0..n)
                .map(|i| if i < n - r { i as f64 } else { (n + i) as f64 })
                .collect();
            (a, b)
        };
        let (a1, b1) = sample(lo);
        let (a2, b2) = sample(hi);
        let p_lo = ks_two_sample(&a1, &b1).unwrap();
        let p_hi = ks_two_sample(&a2, &b2).unwrap();
        prop_assert!((p_lo.statistic - lo as f64 / n as f64).abs() < 1e-12);
        prop_assert!((p_hi.statistic - hi as f64 / n as f64).abs() < 1e-12);
        prop_assert!(
            p_lo.p_value + 1e-9 >= p_hi.p_value,
            "p(D={}) = {} < p(D={}) = {}",
            p_lo.statistic, p_lo.p_value, p_hi.statistic, p_hi.p_value
        );
    }

    #[test]
    fn pct_is_scale_invariant(
        weights in prop::collection::vec(0.0f64..0.5, 2 * K * K),
        totals in prop::collection::vec(1u64..500, 2 * K),
    ) {
        let mut set = WeightSampleSet::new(K);
        for u in 0..2 {
            let w = Array2::from_shape_vec(
                (K, K),
                weights[u * K * K..(u + 1) * K * K].to_vec(),
            ).unwrap();
            set.add_url(NewsClass::Mainstream, &w).unwrap();
        }
        let base: Vec<Vec<u64>> = vec![
            totals[0..K].to_vec(),
            totals[K..2 * K].to_vec(),
        ];
        let scaled: Vec<Vec<u64>> = base
            .iter()
            .map(|t| t.iter().map(|&v| v * 7).collect())
            .collect();
        let p1 = influence_percentage(&set, NewsClass::Mainstream, &base).unwrap();
        let p2 = influence_percentage(&set, NewsClass::Mainstream, &scaled).unwrap();
        for (a, b) in p1.iter().zip(p2.iter()) {
            match (a, b) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9 * x.abs().max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false, "definedness changed under scaling"),
            }
        }
    }

    #[test]
    fn mean_weights_ignore_url_order(
        weights in prop::collection::vec(0.0f64..0.5, 3 * K * K),
    ) {
        let matrices: Vec<Array2<f64>> = (0..3)
            .map(|u| {
                Array2::from_shape_vec((K, K), weights[u * K * K..(u + 1) * K * K].to_vec())
                    .unwrap()
            })
            .collect();
        let mut forward = WeightSampleSet::new(K);
        let mut backward = WeightSampleSet::new(K);
        for m in &matrices {
            forward.add_url(NewsClass::Alternative, m).unwrap();
        }
        for m in matrices.iter().rev() {
            backward.add_url(NewsClass::Alternative, m).unwrap();
        }
        let a = urlflow_core::influence::mean_weight_matrix(&forward, NewsClass::Alternative)
            .unwrap();
        let b = urlflow_core::influence::mean_weight_matrix(&backward, NewsClass::Alternative)
            .unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_invariants_hold(events in arb_events(80)) {
        let reg = registry();
        let grouping = grouping(&reg);
        let series = group_by_url(&events, &reg).unwrap();
        let records = build_sequence_records(&series, &grouping);

        // sequence-table conservation: first-hop rows sum to records per class
        let rows = classify_sequences(&records, &grouping, SequenceDepth::FirstHop);
        for class in NewsClass::ALL {
            let table_total: u64 = rows
                .iter()
                .filter(|r| r.news_class == class)
                .map(|r| r.count)
                .sum();
            let expected = records.iter().filter(|r| r.news_class == class).count() as u64;
            prop_assert_eq!(table_total, expected);
        }
        let full_rows = classify_sequences(&records, &grouping, SequenceDepth::Full);
        let full_total: u64 = full_rows.iter().map(|r| r.count).sum();
        let all_groups = records
            .iter()
            .filter(|r| r.firsts.len() == grouping.len())
            .count() as u64;
        prop_assert_eq!(full_total, all_groups);

        // antisymmetry of first-occurrence deltas
        let ab = first_occurrence_delta(&records, 0, 2);
        let ba = first_occurrence_delta(&records, 2, 0);
        prop_assert_eq!(ab.len(), ba.len());
        for ((u1, d1), (u2, d2)) in ab.iter().zip(ba.iter()) {
            prop_assert_eq!(u1, u2);
            prop_assert_eq!(*d1, -*d2);
        }

        // flow graph: total domain weight equals record count
        let graph = build_flow_graph(&records, &grouping);
        prop_assert_eq!(graph.total_domain_weight(&grouping), records.len() as u64);

        // daily ratios average to 1 over the span
        for group in 0..grouping.len() {
            for class in NewsClass::ALL {
                if let Ok(rows) = normalized_daily_occurrence(&events, &grouping, group, class) {
                    let mean: f64 =
                        rows.iter().map(|&(_, r)| r).sum::<f64>() / rows.len() as f64;
                    prop_assert!((mean - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn gibbs_attribution_never_crosses_the_window() {
    // Events far apart relative to D = 8: the only admissible source of
    // cross attribution is within the window. Construct bursts inside the
    // window and isolated events outside it and check the split.
    let grid = LagKernelGrid::new(vec![1, 3, 9]).unwrap();
    let mut lag_pmfs = Array3::zeros((1, 1, 2));
    lag_pmfs[[0, 0, 0]] = 0.5;
    lag_pmfs[[0, 0, 1]] = 0.5;
    let params = HawkesParams::new(
        vec![0.05],
        Array2::from_elem((1, 1), 0.8),
        lag_pmfs,
        grid,
    )
    .unwrap();
    let mut col = vec![0u32; 200];
    col[0] = 1;
    col[3] = 1; // within window of bin 0
    col[100] = 1; // isolated
    col[150] = 1;
    col[152] = 1; // within window of bin 150
    let mut arr = Array2::zeros((200, 1));
    for (t, &c) in col.iter().enumerate() {
        arr[[t, 0]] = c;
    }
    let counts = BinnedCounts::new(arr, 1, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut max_attributed = 0;
    for _ in 0..200 {
        let attr = sample_parents(&params, &counts, &mut rng).unwrap();
        // bins 0, 100, and 150 have no candidate parent; they must be
        // background every time
        assert_eq!(attr.background[[0, 0]], 1);
        assert_eq!(attr.background[[100, 0]], 1);
        assert_eq!(attr.background[[150, 0]], 1);
        max_attributed = max_attributed.max(attr.edge_totals[[0, 0]]);
    }
    // the two in-window children can be attributed, and sometimes are
    assert!(max_attributed >= 1);
    assert!(max_attributed <= 2);
}
