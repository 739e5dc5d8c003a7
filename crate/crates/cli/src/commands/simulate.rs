use std::path::Path;

use serde::Serialize;

use urlflow_core::events::{NewsClass, RawEvent};
use urlflow_core::gibbs::derive_url_seed;
use urlflow_core::hawkes::{load_params, simulate, spectral_radius};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::{sha256_file, write_manifest};

use super::{ensure_out_dir, write_file, write_store};

const SIM_DOMAIN: &str = "sim.example";

#[derive(Serialize)]
struct SimManifest {
    n_urls: usize,
    t_bins: usize,
    news_class: String,
    seed: u64,
    /// True generating parameters, recorded for later scoring.
    lambda0: Vec<f64>,
    weights: Vec<Vec<f64>>,
    lag_pmfs: Vec<Vec<Vec<f64>>>,
    grid_edges: Vec<u32>,
    params_files_sha256: Vec<String>,
}

/// Draw `n_urls` independent series from a saved parameter bundle and write
/// them as an event store. URL ids are synthetic (`sim-000000`, ...); each
/// URL's generator seed derives from the run seed and its id.
pub fn cmd_simulate(
    config: &RunConfig,
    config_path: &Path,
    params_dir: &Path,
    n_urls: usize,
    t_bins: usize,
    news_class: NewsClass,
    out_dir: &Path,
) -> Result<(), CliError> {
    let params = load_params(params_dir).map_err(|e| CliError::Data(e.to_string()))?;
    if params.num_communities() != config.registry.len() {
        return Err(CliError::Config(format!(
            "params are for {} communities, config registry has {}",
            params.num_communities(),
            config.registry.len()
        )));
    }
    let rho = spectral_radius(&params.weights);
    if rho >= 1.0 {
        return Err(CliError::Data(format!(
            "weight matrix is not subcritical: spectral radius {rho:.4}"
        )));
    }

    let mut events: Vec<RawEvent> = Vec::new();
    for u in 0..n_urls {
        let url = format!("sim-{u:06}");
        let counts = simulate(&params, t_bins, derive_url_seed(config.seed, &url))
            .map_err(|e| CliError::Data(e.to_string()))?;
        for t in 0..counts.num_bins() {
            for community in config.registry.ids() {
                let c = counts.get(t, community.index());
                for _ in 0..c {
                    events.push(RawEvent {
                        url: url.clone(),
                        domain: SIM_DOMAIN.to_string(),
                        community,
                        timestamp: t as i64 * config.delta_t,
                        user: None,
                        news_class,
                    });
                }
            }
        }
    }

    ensure_out_dir(out_dir)?;
    let n_events = events.len();
    write_store(&out_dir.join("events.csv"), config, events)?;

    let k = params.num_communities();
    let b = params.grid.num_bins();
    let sim = SimManifest {
        n_urls,
        t_bins,
        news_class: news_class.as_str().to_string(),
        seed: config.seed,
        lambda0: params.lambda0.clone(),
        weights: (0..k)
            .map(|s| (0..k).map(|t| params.weights[[s, t]]).collect())
            .collect(),
        lag_pmfs: (0..k)
            .map(|s| {
                (0..k)
                    .map(|t| (0..b).map(|i| params.lag_pmfs[[s, t, i]]).collect())
                    .collect()
            })
            .collect(),
        grid_edges: params.grid.edges().to_vec(),
        params_files_sha256: ["lambda0.csv", "W.csv", "G.csv", "grid.csv"]
            .iter()
            .map(|f| sha256_file(&params_dir.join(f)))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Data(format!("cannot hash params: {e}")))?,
    };
    write_file(
        &out_dir.join("sim_manifest.json"),
        &(serde_json::to_string_pretty(&sim).expect("sim manifest serializes") + "\n"),
    )?;

    let param_files: Vec<std::path::PathBuf> = ["lambda0.csv", "W.csv", "G.csv", "grid.csv"]
        .iter()
        .map(|f| params_dir.join(f))
        .collect();
    let param_refs: Vec<&Path> = param_files.iter().map(|p| p.as_path()).collect();
    write_manifest(out_dir, "simulate", config.seed, config_path, &param_refs)
        .map_err(|e| CliError::Data(format!("cannot write manifest: {e}")))?;

    eprintln!("simulate: {n_urls} urls, {n_events} events over {t_bins} bins");
    Ok(())
}
