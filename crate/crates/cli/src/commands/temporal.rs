use std::fmt::Write as _;
use std::path::Path;

use chrono::DateTime;

use urlflow_core::events::{group_by_url, NewsClass, RawEvent, UrlSeries};
use urlflow_core::temporal::{
    build_flow_graph, build_sequence_records, classify_sequences, empirical_cdf,
    first_occurrence_delta, mean_interarrival, normalized_daily_occurrence, repost_lags,
    user_alternative_fraction, Grouping, SequenceDepth, SequenceRecord, SECONDS_PER_DAY,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;

use super::{ensure_out_dir, load_store, write_file};

fn iso_date(epoch_day: i64) -> String {
    DateTime::from_timestamp(epoch_day * SECONDS_PER_DAY, 0)
        .map(|dt| dt.date_naive().to_string())
        .unwrap_or_else(|| epoch_day.to_string())
}

fn sequences_csv(
    records: &[SequenceRecord],
    grouping: &Grouping,
    depth: SequenceDepth,
) -> String {
    let mut out = String::from("news_class,sequence,count,percent\n");
    for row in classify_sequences(records, grouping, depth) {
        let _ = writeln!(
            out,
            "{},{},{},{:.4}",
            row.news_class, row.label, row.count, row.percent
        );
    }
    out
}

fn first_delta_tables(records: &[SequenceRecord], grouping: &Grouping) -> (String, String) {
    let class_of: std::collections::BTreeMap<&str, NewsClass> = records
        .iter()
        .map(|r| (r.url.as_str(), r.news_class))
        .collect();
    let mut counts = String::from("first,second,news_class,first_faster,second_faster,ties\n");
    let mut cdf = String::from("first,second,news_class,delta_seconds,cum_prob\n");
    for a in 0..grouping.len() {
        for b in (a + 1)..grouping.len() {
            let deltas = first_occurrence_delta(records, a, b);
            for class in NewsClass::ALL {
                let class_deltas: Vec<i64> = deltas
                    .iter()
                    .filter(|(url, _)| class_of[url.as_str()] == class)
                    .map(|&(_, d)| d)
                    .collect();
                if class_deltas.is_empty() {
                    continue;
                }
                let faster_a = class_deltas.iter().filter(|&&d| d > 0).count();
                let faster_b = class_deltas.iter().filter(|&&d| d < 0).count();
                let ties = class_deltas.iter().filter(|&&d| d == 0).count();
                let _ = writeln!(
                    counts,
                    "{},{},{},{},{},{}",
                    grouping.name(a),
                    grouping.name(b),
                    class,
                    faster_a,
                    faster_b,
                    ties
                );
                let values: Vec<f64> = class_deltas.iter().map(|&d| d as f64).collect();
                for (value, p) in empirical_cdf(&values) {
                    let _ = writeln!(
                        cdf,
                        "{},{},{},{},{:.6}",
                        grouping.name(a),
                        grouping.name(b),
                        class,
                        value,
                        p
                    );
                }
            }
        }
    }
    (counts, cdf)
}

fn split_by_class<'a>(events: &'a [RawEvent], class: NewsClass) -> Vec<RawEvent> {
    events
        .iter()
        .filter(|e| e.news_class == class)
        .cloned()
        .collect()
}

/// Run every temporal analysis over the (unfiltered) store and write the
/// table, CDF, and flow-graph outputs.
pub fn cmd_temporal(
    config: &RunConfig,
    config_path: &Path,
    store_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let grouping = config.grouping()?;
    let events = load_store(config, store_path)?;
    let series: Vec<UrlSeries> = group_by_url(&events, &config.registry)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let records = build_sequence_records(&series, &grouping);

    ensure_out_dir(out_dir)?;

    write_file(
        &out_dir.join("sequences_first_hop.csv"),
        &sequences_csv(&records, &grouping, SequenceDepth::FirstHop),
    )?;
    write_file(
        &out_dir.join("sequences_full.csv"),
        &sequences_csv(&records, &grouping, SequenceDepth::Full),
    )?;

    let (counts, delta_cdf) = first_delta_tables(&records, &grouping);
    write_file(&out_dir.join("first_delta_counts.csv"), &counts)?;
    write_file(&out_dir.join("first_delta_cdf.csv"), &delta_cdf)?;

    let mut daily = String::from("group,news_class,date,ratio\n");
    let mut repost_cdf = String::from("group,news_class,lag_seconds,cum_prob\n");
    let mut inter_cdf = String::from("group,news_class,mean_gap_seconds,cum_prob\n");
    for group in 0..grouping.len() {
        for class in NewsClass::ALL {
            if let Ok(rows) = normalized_daily_occurrence(&events, &grouping, group, class) {
                for (day, ratio) in rows {
                    let _ = writeln!(
                        daily,
                        "{},{},{},{:.6}",
                        grouping.name(group),
                        class,
                        iso_date(day),
                        ratio
                    );
                }
            }
            let class_events = split_by_class(&events, class);
            let lags: Vec<f64> = repost_lags(&class_events, &grouping, group)
                .into_iter()
                .flat_map(|(_, deltas)| deltas)
                .map(|d| d as f64)
                .collect();
            for (value, p) in empirical_cdf(&lags) {
                let _ = writeln!(
                    repost_cdf,
                    "{},{},{},{:.6}",
                    grouping.name(group),
                    class,
                    value,
                    p
                );
            }
            let gaps: Vec<f64> = mean_interarrival(&class_events, &grouping, group)
                .into_iter()
                .map(|(_, g)| g)
                .collect();
            for (value, p) in empirical_cdf(&gaps) {
                let _ = writeln!(
                    inter_cdf,
                    "{},{},{},{:.6}",
                    grouping.name(group),
                    class,
                    value,
                    p
                );
            }
        }
    }
    write_file(&out_dir.join("normalized_daily.csv"), &daily)?;
    write_file(&out_dir.join("repost_lag_cdf.csv"), &repost_cdf)?;
    write_file(&out_dir.join("interarrival_cdf.csv"), &inter_cdf)?;

    let (fractions, skipped) = user_alternative_fraction(&events);
    let mut user_csv = String::from("user,alternative_fraction\n");
    for (user, fraction) in &fractions {
        let _ = writeln!(user_csv, "{user},{fraction:.6}");
    }
    write_file(&out_dir.join("user_alt_fraction.csv"), &user_csv)?;
    let values: Vec<f64> = fractions.iter().map(|&(_, f)| f).collect();
    let mut user_cdf = String::from("alternative_fraction,cum_prob\n");
    for (value, p) in empirical_cdf(&values) {
        let _ = writeln!(user_cdf, "{value:.6},{p:.6}");
    }
    write_file(&out_dir.join("user_alt_fraction_cdf.csv"), &user_cdf)?;
    if skipped > 0 {
        eprintln!("temporal: {skipped} events without a user skipped in per-user fractions");
    }

    for class in NewsClass::ALL {
        let class_records: Vec<SequenceRecord> = records
            .iter()
            .filter(|r| r.news_class == class)
            .cloned()
            .collect();
        let graph = build_flow_graph(&class_records, &grouping);
        write_file(
            &out_dir.join(format!("flow_{class}.dot")),
            &graph.to_dot(&format!("flow_{class}")),
        )?;
    }

    write_manifest(out_dir, "temporal", config.seed, config_path, &[store_path])
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
    eprintln!(
        "temporal: {} urls, {} sequence records -> {}",
        series.len(),
        records.len(),
        out_dir.display()
    );
    Ok(())
}
