//! Flat-file parameter bundle. A parameter directory holds four CSV files,
//! headerless, floats printed with 17 significant digits so save/load
//! round-trips are exact:
//!
//! * `lambda0.csv` - K rows, one background rate per community.
//! * `W.csv` - K rows of K values; row index is the source community,
//!   column index the target.
//! * `G.csv` - K^2 rows `source,target,mass_0,...,mass_{B-1}` in row-major
//!   (source, target) order.
//! * `grid.csv` - B+1 rows, the lag-bin edges.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};

use super::{HawkesError, HawkesParams, LagKernelGrid};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn bad(file: &Path, message: impl Into<String>) -> HawkesError {
    HawkesError::BadParamsFile {
        file: file.display().to_string(),
        message: message.into(),
    }
}

fn parse_f64(field: &str, file: &Path, line: usize) -> Result<f64, HawkesError> {
    field
        .trim()
        .parse()
        .map_err(|_| bad(file, format!("line {line}: bad float {field:?}")))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>, HawkesError> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|f| f.trim().to_string()).collect())
        .collect())
}

/// Write the four-file bundle into `dir`, creating it if needed.
pub fn save_params(dir: &Path, params: &HawkesParams) -> Result<(), HawkesError> {
    fs::create_dir_all(dir)?;
    let k = params.num_communities();
    let b = params.grid.num_bins();

    let lambda0 = params
        .lambda0
        .iter()
        .map(|&v| fmt(v))
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.join("lambda0.csv"), lambda0 + "\n")?;

    let mut w_rows = Vec::with_capacity(k);
    for source in 0..k {
        let row: Vec<String> = (0..k)
            .map(|target| fmt(params.weights[[source, target]]))
            .collect();
        w_rows.push(row.join(","));
    }
    fs::write(dir.join("W.csv"), w_rows.join("\n") + "\n")?;

    let mut g_rows = Vec::with_capacity(k * k);
    for source in 0..k {
        for target in 0..k {
            let mut row = vec![source.to_string(), target.to_string()];
            row.extend((0..b).map(|i| fmt(params.lag_pmfs[[source, target, i]])));
            g_rows.push(row.join(","));
        }
    }
    fs::write(dir.join("G.csv"), g_rows.join("\n") + "\n")?;

    let edges = params
        .grid
        .edges()
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(dir.join("grid.csv"), edges + "\n")?;
    Ok(())
}

/// Read a bundle written by [`save_params`], re-validating every invariant.
pub fn load_params(dir: &Path) -> Result<HawkesParams, HawkesError> {
    let grid_path = dir.join("grid.csv");
    let mut edges = Vec::new();
    for (i, row) in read_rows(&grid_path)?.iter().enumerate() {
        if row.len() != 1 {
            return Err(bad(&grid_path, format!("line {}: expected one field", i + 1)));
        }
        let edge: u32 = row[0]
            .parse()
            .map_err(|_| bad(&grid_path, format!("line {}: bad edge {:?}", i + 1, row[0])))?;
        edges.push(edge);
    }
    let grid = LagKernelGrid::new(edges)?;
    let b = grid.num_bins();

    let lambda0_path = dir.join("lambda0.csv");
    let mut lambda0 = Vec::new();
    for (i, row) in read_rows(&lambda0_path)?.iter().enumerate() {
        if row.len() != 1 {
            return Err(bad(
                &lambda0_path,
                format!("line {}: expected one field", i + 1),
            ));
        }
        lambda0.push(parse_f64(&row[0], &lambda0_path, i + 1)?);
    }
    let k = lambda0.len();

    let w_path = dir.join("W.csv");
    let w_rows = read_rows(&w_path)?;
    if w_rows.len() != k {
        return Err(bad(
            &w_path,
            format!("expected {k} rows, got {}", w_rows.len()),
        ));
    }
    let mut weights = Array2::zeros((k, k));
    for (source, row) in w_rows.iter().enumerate() {
        if row.len() != k {
            return Err(bad(
                &w_path,
                format!("line {}: expected {k} fields, got {}", source + 1, row.len()),
            ));
        }
        for (target, field) in row.iter().enumerate() {
            weights[[source, target]] = parse_f64(field, &w_path, source + 1)?;
        }
    }

    let g_path = dir.join("G.csv");
    let g_rows = read_rows(&g_path)?;
    if g_rows.len() != k * k {
        return Err(bad(
            &g_path,
            format!("expected {} rows, got {}", k * k, g_rows.len()),
        ));
    }
    let mut lag_pmfs = Array3::zeros((k, k, b));
    for (i, row) in g_rows.iter().enumerate() {
        if row.len() != b + 2 {
            return Err(bad(
                &g_path,
                format!("line {}: expected {} fields, got {}", i + 1, b + 2, row.len()),
            ));
        }
        let source: usize = row[0]
            .parse()
            .map_err(|_| bad(&g_path, format!("line {}: bad source key", i + 1)))?;
        let target: usize = row[1]
            .parse()
            .map_err(|_| bad(&g_path, format!("line {}: bad target key", i + 1)))?;
        if source >= k || target >= k {
            return Err(bad(&g_path, format!("line {}: key out of range", i + 1)));
        }
        for (j, field) in row[2..].iter().enumerate() {
            lag_pmfs[[source, target, j]] = parse_f64(field, &g_path, i + 1)?;
        }
    }

    HawkesParams::new(lambda0, weights, lag_pmfs, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn bundle_round_trips_bit_exact() {
        let grid = LagKernelGrid::new(vec![1, 2, 4, 8]).unwrap();
        let b = grid.num_bins();
        let k = 2;
        let mut lag_pmfs = Array3::zeros((k, k, b));
        for source in 0..k {
            for target in 0..k {
                // Awkward fractions so formatting precision actually matters.
                let raw = [1.0 / 3.0, 1.0 / 7.0, 1.0 - 1.0 / 3.0 - 1.0 / 7.0];
                let total: f64 = raw.iter().sum();
                for (i, &v) in raw.iter().enumerate() {
                    lag_pmfs[[source, target, i]] = v / total;
                }
            }
        }
        let params = HawkesParams::new(
            vec![0.1 / 3.0, 2.0 / 7.0],
            arr2(&[[0.123456789012345678, 0.2], [1.0 / 9.0, 0.0]]),
            lag_pmfs,
            grid,
        )
        .unwrap();

        let dir = std::env::temp_dir().join(format!("params-io-{}", std::process::id()));
        save_params(&dir, &params).unwrap();
        let loaded = load_params(&dir).unwrap();
        std::fs::remove_dir_all(&dir).ok();

        assert_eq!(loaded.lambda0, params.lambda0);
        assert_eq!(loaded.weights, params.weights);
        assert_eq!(loaded.lag_pmfs, params.lag_pmfs);
        assert_eq!(loaded.grid, params.grid);
    }

    #[test]
    fn load_rejects_missing_files() {
        let dir = std::env::temp_dir().join("params-io-missing");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(load_params(&dir).is_err());
    }
}
