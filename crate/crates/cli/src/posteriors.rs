//! The `posteriors.csv` schema: one row per fitted URL. Column order, also
//! spelled out by the header:
//!
//! ```text
//! url, news_class, n_samples,
//! mean_lambda0:<community>              (K columns),
//! mean_w:<source>-><target>             (K*K columns, row-major by source),
//! sd_w:<source>-><target>               (K*K columns),
//! attr:<source>-><target>               (K*K columns, posterior-mean
//!                                        attributed event counts)
//! ```

use std::path::Path;

use ndarray::Array2;

use urlflow_core::events::{CommunityRegistry, NewsClass};
use urlflow_core::gibbs::PosteriorSummary;

use crate::error::CliError;

/// One parsed posteriors row.
#[derive(Debug, Clone)]
pub struct PosteriorRow {
    pub url: String,
    pub news_class: NewsClass,
    pub n_samples: usize,
    pub mean_lambda0: Vec<f64>,
    pub mean_weights: Array2<f64>,
    pub sd_weights: Array2<f64>,
    pub attributed: Array2<f64>,
}

pub fn header(registry: &CommunityRegistry) -> Vec<String> {
    let mut columns = vec![
        "url".to_string(),
        "news_class".to_string(),
        "n_samples".to_string(),
    ];
    for name in registry.names() {
        columns.push(format!("mean_lambda0:{name}"));
    }
    for prefix in ["mean_w", "sd_w", "attr"] {
        for source in registry.names() {
            for target in registry.names() {
                columns.push(format!("{prefix}:{source}->{target}"));
            }
        }
    }
    columns
}

pub fn write(
    path: &Path,
    registry: &CommunityRegistry,
    rows: &[(String, NewsClass, PosteriorSummary)],
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    writer.write_record(header(registry)).map_err(io_err)?;
    let k = registry.len();
    for (url, class, summary) in rows {
        let mut record = vec![
            url.clone(),
            class.as_str().to_string(),
            summary.n_samples.to_string(),
        ];
        for v in &summary.mean_lambda0 {
            record.push(v.to_string());
        }
        for matrix in [
            &summary.mean_weights,
            &summary.sd_weights,
            &summary.mean_edge_totals,
        ] {
            for source in 0..k {
                for target in 0..k {
                    record.push(matrix[[source, target]].to_string());
                }
            }
        }
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|e| {
        CliError::Data(format!("cannot flush {}: {e}", path.display()))
    })?;
    Ok(())
}

pub fn read(path: &Path, registry: &CommunityRegistry) -> Result<Vec<PosteriorRow>, CliError> {
    let data_err = |message: String| CliError::Data(format!("{}: {message}", path.display()));
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = header(registry);
    if found != expected {
        return Err(data_err(format!(
            "header does not match the configured communities (found {} columns, expected {})",
            found.len(),
            expected.len()
        )));
    }

    let k = registry.len();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| data_err(format!("line {line}: {e}")))?;
        let field = |idx: usize| -> &str { &record[idx] };
        let float = |idx: usize| -> Result<f64, CliError> {
            field(idx)
                .parse()
                .map_err(|_| data_err(format!("line {line}: bad float {:?}", field(idx))))
        };
        let news_class = NewsClass::parse(field(1))
            .ok_or_else(|| data_err(format!("line {line}: bad news_class {:?}", field(1))))?;
        let n_samples = field(2)
            .parse()
            .map_err(|_| data_err(format!("line {line}: bad n_samples")))?;
        let mut mean_lambda0 = Vec::with_capacity(k);
        for idx in 0..k {
            mean_lambda0.push(float(3 + idx)?);
        }
        let mut matrices = Vec::with_capacity(3);
        for block in 0..3 {
            let base = 3 + k + block * k * k;
            let mut matrix = Array2::zeros((k, k));
            for source in 0..k {
                for target in 0..k {
                    matrix[[source, target]] = float(base + source * k + target)?;
                }
            }
            matrices.push(matrix);
        }
        let attributed = matrices.pop().unwrap();
        let sd_weights = matrices.pop().unwrap();
        let mean_weights = matrices.pop().unwrap();
        rows.push(PosteriorRow {
            url: field(0).to_string(),
            news_class,
            n_samples,
            mean_lambda0,
            mean_weights,
            sd_weights,
            attributed,
        });
    }
    Ok(rows)
}
