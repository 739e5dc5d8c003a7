use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde_json::json;

use urlflow_core::events::{
    drop_gap_overlapping, filter_cross_platform, group_by_url, NewsClass,
};
use urlflow_core::influence::{
    build_report, significance_stars, ClassSection, InfluenceReport, UrlPosterior,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;
use crate::posteriors;

use super::{ensure_out_dir, load_store, write_file};

/// Mean-weight cell format used everywhere weights are rendered.
pub fn format_weight(w: f64) -> String {
    format!("{w:.4}")
}

/// Background-rate cell format.
pub fn format_lambda0(v: f64) -> String {
    format!("{v:.6}")
}

/// Undefined percentage cells render as a dash, never as 0.
pub fn format_pct(v: Option<f64>) -> String {
    match v {
        Some(p) => format!("{p:.2}"),
        None => "—".to_string(),
    }
}

fn matrix_csv(names: &[String], cell: impl Fn(usize, usize) -> String) -> String {
    let mut out = String::from("source");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (s, name) in names.iter().enumerate() {
        out.push_str(name);
        for t in 0..names.len() {
            out.push(',');
            out.push_str(&cell(s, t));
        }
        out.push('\n');
    }
    out
}

fn long_csv(names: &[String], sections: &[(NewsClass, Vec<Vec<String>>)]) -> String {
    let mut out = String::from("source,target,class,value\n");
    for (class, cells) in sections {
        for (s, source) in names.iter().enumerate() {
            for (t, target) in names.iter().enumerate() {
                let _ = writeln!(out, "{source},{target},{class},{}", cells[s][t]);
            }
        }
    }
    out
}

fn cell_matrix(k: usize, cell: impl Fn(usize, usize) -> String) -> Vec<Vec<String>> {
    (0..k).map(|s| (0..k).map(|t| cell(s, t)).collect()).collect()
}

fn aligned_table(
    names: &[String],
    row_labels: &[String],
    cell: impl Fn(usize, usize) -> String,
) -> String {
    let label_width = row_labels.iter().map(|l| l.len()).max().unwrap_or(0).max(6);
    let col_widths: Vec<usize> = names
        .iter()
        .enumerate()
        .map(|(t, name)| {
            (0..row_labels.len())
                .map(|r| cell(r, t).len())
                .chain([name.len()])
                .max()
                .unwrap()
        })
        .collect();
    let mut out = format!("{:label_width$}", "");
    for (name, w) in names.iter().zip(&col_widths) {
        let _ = write!(out, "  {name:>w$}");
    }
    out.push('\n');
    for (r, label) in row_labels.iter().enumerate() {
        let _ = write!(out, "{label:label_width$}");
        for (t, w) in col_widths.iter().enumerate() {
            let value = cell(r, t);
            let _ = write!(out, "  {value:>w$}");
        }
        out.push('\n');
    }
    out
}

/// Human-readable report: per-community URL/event/background-rate rows per
/// class, then mean-weight, KS-significance, and percentage matrices.
pub fn render_report(report: &InfluenceReport, names: &[String]) -> String {
    let mut out = String::from("Cross-community influence report\n");
    out.push_str("================================\n\n");

    let classes: Vec<(NewsClass, &ClassSection)> = NewsClass::ALL
        .iter()
        .filter_map(|&c| report.section(c).map(|s| (c, s)))
        .collect();

    out.push_str("Totals per community\n--------------------\n");
    let mut row_labels = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (class, section) in &classes {
        row_labels.push(format!("URLs {class}"));
        rows.push(names.iter().map(|_| section.urls.to_string()).collect());
        row_labels.push(format!("Events {class}"));
        rows.push(section.events.iter().map(|e| e.to_string()).collect());
        row_labels.push(format!("Mean lambda0 {class}"));
        rows.push(section.mean_lambda0.iter().map(|&v| format_lambda0(v)).collect());
    }
    out.push_str(&aligned_table(names, &row_labels, |r, t| rows[r][t].clone()));
    out.push('\n');

    let source_labels: Vec<String> = names.to_vec();
    for (class, section) in &classes {
        let _ = writeln!(out, "Mean weights, {class} (row = source, column = target)");
        out.push_str(&aligned_table(names, &source_labels, |s, t| {
            format_weight(section.mean_weights[[s, t]])
        }));
        out.push('\n');
    }

    if let Some(ks) = &report.ks_p {
        out.push_str("KS significance of alternative vs mainstream weights (p-value)\n");
        out.push_str(&aligned_table(names, &source_labels, |s, t| {
            let p = ks[[s, t]];
            let stars = significance_stars(p);
            if stars.is_empty() {
                format!("{p:.4}")
            } else {
                format!("{p:.4} {stars}")
            }
        }));
        out.push('\n');
    }

    for (class, section) in &classes {
        let _ = writeln!(
            out,
            "Percent of {class} events on the target caused by the source"
        );
        out.push_str(&aligned_table(names, &source_labels, |s, t| {
            format_pct(section.pct[[s, t]])
        }));
        out.push('\n');
    }
    out
}

fn section_json(section: &ClassSection, k: usize) -> serde_json::Value {
    let matrix = |m: &Array2<f64>| -> Vec<Vec<f64>> {
        (0..k).map(|s| (0..k).map(|t| m[[s, t]]).collect()).collect()
    };
    let pct: Vec<Vec<Option<f64>>> = (0..k)
        .map(|s| (0..k).map(|t| section.pct[[s, t]]).collect())
        .collect();
    json!({
        "urls": section.urls,
        "events": section.events,
        "mean_lambda0": section.mean_lambda0,
        "mean_w": matrix(&section.mean_weights),
        "pct": pct,
    })
}

/// Aggregate fitted posteriors against the (identically filtered) event
/// store and write the influence outputs.
pub fn cmd_influence(
    config: &RunConfig,
    config_path: &Path,
    posteriors_path: &Path,
    store_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let k = config.registry.len();
    let rows = posteriors::read(posteriors_path, &config.registry)?;
    let events = load_store(config, store_path)?;
    let series = group_by_url(&events, &config.registry)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let filtered = filter_cross_platform(series, &config.required, &config.any_of);
    let (kept, _) = drop_gap_overlapping(filtered, &config.gaps, config.drop_fraction);
    let totals: BTreeMap<String, Vec<u64>> = kept
        .iter()
        .map(|s| {
            (
                s.url.clone(),
                s.times.iter().map(|t| t.len() as u64).collect(),
            )
        })
        .collect();

    let inputs: Vec<UrlPosterior> = rows
        .iter()
        .map(|r| UrlPosterior {
            url: r.url.clone(),
            news_class: r.news_class,
            mean_lambda0: r.mean_lambda0.clone(),
            mean_weights: r.mean_weights.clone(),
        })
        .collect();
    let report = build_report(&inputs, &totals, k).map_err(|e| CliError::Data(e.to_string()))?;

    for class in NewsClass::ALL {
        if report.section(class).is_none() {
            eprintln!("influence: no {class} URLs in posteriors; omitting that section");
        }
    }

    ensure_out_dir(out_dir)?;
    let names = config.registry.names().to_vec();

    for class in NewsClass::ALL {
        if let Some(section) = report.section(class) {
            write_file(
                &out_dir.join(format!("mean_w_{class}.csv")),
                &matrix_csv(&names, |s, t| section.mean_weights[[s, t]].to_string()),
            )?;
            write_file(
                &out_dir.join(format!("pct_{class}.csv")),
                &matrix_csv(&names, |s, t| format_pct(section.pct[[s, t]])),
            )?;
        }
    }
    if let Some(ks) = &report.ks_p {
        write_file(
            &out_dir.join("ks_p.csv"),
            &matrix_csv(&names, |s, t| ks[[s, t]].to_string()),
        )?;
    }

    let weight_sections: Vec<(NewsClass, Vec<Vec<String>>)> = NewsClass::ALL
        .iter()
        .filter_map(|&class| {
            report.section(class).map(|section| {
                (class, cell_matrix(k, |s, t| section.mean_weights[[s, t]].to_string()))
            })
        })
        .collect();
    write_file(
        &out_dir.join("heatmap_mean_w.csv"),
        &long_csv(&names, &weight_sections),
    )?;

    let pct_sections: Vec<(NewsClass, Vec<Vec<String>>)> = NewsClass::ALL
        .iter()
        .filter_map(|&class| {
            report
                .section(class)
                .map(|section| (class, cell_matrix(k, |s, t| format_pct(section.pct[[s, t]]))))
        })
        .collect();
    write_file(
        &out_dir.join("heatmap_pct.csv"),
        &long_csv(&names, &pct_sections),
    )?;

    let stars: Option<Vec<Vec<String>>> = report.ks_p.as_ref().map(|ks| {
        (0..k)
            .map(|s| {
                (0..k)
                    .map(|t| significance_stars(ks[[s, t]]).to_string())
                    .collect()
            })
            .collect()
    });
    let ks_json: Option<Vec<Vec<f64>>> = report
        .ks_p
        .as_ref()
        .map(|ks| (0..k).map(|s| (0..k).map(|t| ks[[s, t]]).collect()).collect());
    let json = json!({
        "communities": names,
        "classes": {
            "alternative": report.alternative.as_ref().map(|s| section_json(s, k)),
            "mainstream": report.mainstream.as_ref().map(|s| section_json(s, k)),
        },
        "ks_p": ks_json,
        "ks_stars": stars,
    });
    write_file(
        &out_dir.join("influence_report.json"),
        &(serde_json::to_string_pretty(&json).expect("report serializes") + "\n"),
    )?;
    write_file(&out_dir.join("report.txt"), &render_report(&report, &names))?;
    write_manifest(
        out_dir,
        "influence",
        config.seed,
        config_path,
        &[posteriors_path, store_path],
    )
    .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;
    eprintln!(
        "influence: report for {} URLs -> {}",
        rows.len(),
        out_dir.display()
    );
    Ok(())
}
