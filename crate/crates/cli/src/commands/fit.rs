use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use urlflow_core::events::{
    bin_series, drop_gap_overlapping, filter_cross_platform, group_by_url, NewsClass, UrlSeries,
};
use urlflow_core::gibbs::{derive_url_seed, fit, PosteriorSummary};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;
use crate::posteriors;

use super::{ensure_out_dir, load_store, write_file};

#[derive(Serialize)]
struct FitSummary {
    urls_in_store: usize,
    urls_after_filter: usize,
    urls_dropped_for_gaps: usize,
    fitted: usize,
    failed: Vec<FailedFit>,
    /// Table-shaped breakdown: per class, URLs with at least one event and
    /// total events, per community.
    communities: Vec<String>,
    breakdown: BTreeMap<String, ClassBreakdown>,
}

#[derive(Serialize)]
struct ClassBreakdown {
    urls: Vec<usize>,
    events: Vec<u64>,
    total_urls: usize,
    total_events: u64,
}

#[derive(Serialize)]
struct FailedFit {
    url: String,
    error: String,
}

fn breakdown(series: &[UrlSeries], k: usize) -> BTreeMap<String, ClassBreakdown> {
    let mut out = BTreeMap::new();
    for class in NewsClass::ALL {
        let mut urls = vec![0usize; k];
        let mut events = vec![0u64; k];
        let mut total_urls = 0usize;
        let mut total_events = 0u64;
        for s in series.iter().filter(|s| s.news_class == class) {
            total_urls += 1;
            for (community, times) in s.times.iter().enumerate() {
                if !times.is_empty() {
                    urls[community] += 1;
                }
                events[community] += times.len() as u64;
                total_events += times.len() as u64;
            }
        }
        out.insert(
            class.as_str().to_string(),
            ClassBreakdown {
                urls,
                events,
                total_urls,
                total_events,
            },
        );
    }
    out
}

fn log_breakdown(summary: &FitSummary) {
    eprintln!(
        "fit: {} urls in store, {} after cross-platform filter, {} dropped for gaps",
        summary.urls_in_store, summary.urls_after_filter, summary.urls_dropped_for_gaps
    );
    eprintln!("fit: URLs/events per community:");
    eprintln!("  {:>24}  {}", "", summary.communities.join("  "));
    for (class, b) in &summary.breakdown {
        let urls: Vec<String> = b.urls.iter().map(|u| u.to_string()).collect();
        let events: Vec<String> = b.events.iter().map(|e| e.to_string()).collect();
        eprintln!("  {:>12} urls    {}", class, urls.join("  "));
        eprintln!("  {:>12} events  {}", class, events.join("  "));
    }
}

/// Filter, bin, and fit every URL in the store; write `posteriors.csv`
/// (sorted by URL, byte-identical for any worker count) and a fit summary.
pub fn cmd_fit(
    config: &RunConfig,
    config_path: &Path,
    store_path: &Path,
    out_dir: &Path,
    strict: bool,
) -> Result<(), CliError> {
    let events = load_store(config, store_path)?;
    let all_series = group_by_url(&events, &config.registry)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let urls_in_store = all_series.len();

    let filtered = filter_cross_platform(all_series, &config.required, &config.any_of);
    let urls_after_filter = filtered.len();
    let (kept, dropped) = drop_gap_overlapping(filtered, &config.gaps, config.drop_fraction);
    if kept.is_empty() {
        return Err(CliError::Data(format!(
            "no URLs survive filtering ({urls_in_store} in store, {urls_after_filter} after \
             cross-platform filter, {} dropped for gaps)",
            dropped.len()
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Data(format!("cannot build worker pool: {e}")))?;
    let grid = &config.grid;
    let priors = &config.priors;
    let schedule = &config.schedule;
    let run_seed = config.seed;
    let results: Vec<(String, NewsClass, Result<PosteriorSummary, String>)> = pool.install(|| {
        use rayon::prelude::*;
        kept.par_iter()
            .map(|series| {
                let outcome = bin_series(series, config.delta_t)
                    .map_err(|e| e.to_string())
                    .and_then(|counts| {
                        fit(
                            &counts,
                            grid,
                            priors,
                            schedule,
                            derive_url_seed(run_seed, &series.url),
                        )
                        .map_err(|e| e.to_string())
                    });
                (series.url.clone(), series.news_class, outcome)
            })
            .collect()
    });

    let mut rows: Vec<(String, NewsClass, PosteriorSummary)> = Vec::new();
    let mut failed: Vec<FailedFit> = Vec::new();
    for (url, class, outcome) in results {
        match outcome {
            Ok(summary) => rows.push((url, class, summary)),
            Err(error) => {
                eprintln!("fit: {url}: {error}");
                if strict {
                    return Err(CliError::Fit(format!("fit failed for {url}: {error}")));
                }
                failed.push(FailedFit { url, error });
            }
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    failed.sort_by(|a, b| a.url.cmp(&b.url));

    ensure_out_dir(out_dir)?;
    posteriors::write(&out_dir.join("posteriors.csv"), &config.registry, &rows)?;

    let summary = FitSummary {
        urls_in_store,
        urls_after_filter,
        urls_dropped_for_gaps: dropped.len(),
        fitted: rows.len(),
        failed,
        communities: config.registry.names().to_vec(),
        breakdown: breakdown(&kept, config.registry.len()),
    };
    write_file(
        &out_dir.join("fit_summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("fit summary serializes") + "\n"),
    )?;
    write_manifest(out_dir, "fit", config.seed, config_path, &[store_path])
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
    log_breakdown(&summary);
    eprintln!(
        "fit: {} fitted, {} failed -> {}",
        summary.fitted,
        summary.failed.len(),
        out_dir.join("posteriors.csv").display()
    );
    Ok(())
}
