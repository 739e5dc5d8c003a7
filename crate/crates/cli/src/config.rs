//! Run configuration: one TOML file holding the community registry, model
//! constants, dataset filters, priors, and the sweep schedule. Everything is
//! validated on load; commands receive the typed [`RunConfig`].

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use urlflow_core::events::{
    CommunityId, CommunityRegistry, GapInterval, GapSchedule,
};
use urlflow_core::gibbs::{GibbsSchedule, Priors};
use urlflow_core::hawkes::LagKernelGrid;
use urlflow_core::temporal::Grouping;

use crate::error::CliError;

fn default_workers() -> usize {
    1
}

fn default_delta_t() -> i64 {
    60
}

fn default_max_lag_bins() -> u32 {
    720
}

fn default_lag_bin_edges() -> Vec<u32> {
    vec![1, 2, 4, 8, 16, 64, 256, 512, 721]
}

fn default_drop_fraction() -> f64 {
    0.10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_workers")]
    workers: usize,
    /// Bin width in seconds.
    #[serde(default = "default_delta_t")]
    delta_t: i64,
    /// Maximum lag, in bins, at which one event can excite another.
    #[serde(default = "default_max_lag_bins")]
    max_lag_bins: u32,
    #[serde(default = "default_lag_bin_edges")]
    lag_bin_edges: Vec<u32>,
    /// Fraction of gap-overlapping URLs to drop, shortest duration first.
    #[serde(default = "default_drop_fraction")]
    drop_fraction: f64,
    /// Community names; list position is the community index.
    communities: Vec<String>,
    #[serde(default)]
    required: Vec<String>,
    #[serde(default)]
    any_of: Vec<String>,
    #[serde(default)]
    gaps: Vec<RawGap>,
    /// Analysis groups for the temporal command; order fixes tie-breaks.
    #[serde(default)]
    groups: Vec<RawGroup>,
    #[serde(default)]
    priors: RawPriors,
    #[serde(default)]
    gibbs: RawSchedule,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGap {
    community: String,
    start: i64,
    end: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGroup {
    name: String,
    communities: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPriors {
    lambda0_shape: f64,
    lambda0_rate: f64,
    w_shape: f64,
    w_rate: f64,
    g_concentration: f64,
}

impl Default for RawPriors {
    fn default() -> Self {
        let p = Priors::default();
        Self {
            lambda0_shape: p.lambda0_shape,
            lambda0_rate: p.lambda0_rate,
            w_shape: p.w_shape,
            w_rate: p.w_rate,
            g_concentration: p.g_concentration,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSchedule {
    burn_in: usize,
    samples: usize,
    thin: usize,
}

impl Default for RawSchedule {
    fn default() -> Self {
        let s = GibbsSchedule::default();
        Self {
            burn_in: s.burn_in,
            samples: s.samples,
            thin: s.thin,
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub delta_t: i64,
    pub drop_fraction: f64,
    pub registry: CommunityRegistry,
    pub grid: LagKernelGrid,
    pub required: BTreeSet<CommunityId>,
    pub any_of: BTreeSet<CommunityId>,
    pub gaps: GapSchedule,
    pub groups: Vec<(String, Vec<String>)>,
    pub priors: Priors,
    pub schedule: GibbsSchedule,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let raw: RawConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_raw(raw).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn from_raw(raw: RawConfig) -> Result<Self, String> {
        if raw.delta_t <= 0 {
            return Err(format!("delta_t must be positive, got {}", raw.delta_t));
        }
        if !(0.0..=1.0).contains(&raw.drop_fraction) {
            return Err(format!(
                "drop_fraction must be in [0, 1], got {}",
                raw.drop_fraction
            ));
        }
        if raw.workers == 0 {
            return Err("workers must be at least 1".to_string());
        }
        let registry = CommunityRegistry::new(raw.communities).map_err(|e| e.to_string())?;

        let grid = LagKernelGrid::new(raw.lag_bin_edges).map_err(|e| e.to_string())?;
        if grid.max_lag() != raw.max_lag_bins {
            return Err(format!(
                "lag_bin_edges cover lags 1..={}, but max_lag_bins is {}",
                grid.max_lag(),
                raw.max_lag_bins
            ));
        }

        let resolve = |names: &[String], what: &str| -> Result<BTreeSet<CommunityId>, String> {
            names
                .iter()
                .map(|n| {
                    registry
                        .get(n)
                        .ok_or_else(|| format!("{what} names unknown community {n:?}"))
                })
                .collect()
        };
        let required = resolve(&raw.required, "required")?;
        let any_of = resolve(&raw.any_of, "any_of")?;
        if !required.is_disjoint(&any_of) {
            return Err("required and any_of must be disjoint".to_string());
        }

        let mut intervals = Vec::with_capacity(raw.gaps.len());
        for gap in &raw.gaps {
            let community = registry
                .get(&gap.community)
                .ok_or_else(|| format!("gap names unknown community {:?}", gap.community))?;
            intervals.push(GapInterval {
                community,
                start: gap.start,
                end: gap.end,
            });
        }
        let gaps = GapSchedule::new(intervals, &registry).map_err(|e| e.to_string())?;

        let groups: Vec<(String, Vec<String>)> = raw
            .groups
            .iter()
            .map(|g| (g.name.clone(), g.communities.clone()))
            .collect();
        if !groups.is_empty() {
            // Validates membership and disjointness now so temporal runs
            // cannot fail late.
            Grouping::new(&groups, &registry).map_err(|e| e.to_string())?;
        }

        let priors = Priors {
            lambda0_shape: raw.priors.lambda0_shape,
            lambda0_rate: raw.priors.lambda0_rate,
            w_shape: raw.priors.w_shape,
            w_rate: raw.priors.w_rate,
            g_concentration: raw.priors.g_concentration,
        };
        priors.validate().map_err(|e| e.to_string())?;
        let schedule = GibbsSchedule {
            burn_in: raw.gibbs.burn_in,
            samples: raw.gibbs.samples,
            thin: raw.gibbs.thin,
        };
        schedule.validate().map_err(|e| e.to_string())?;

        Ok(Self {
            seed: raw.seed,
            workers: raw.workers,
            delta_t: raw.delta_t,
            drop_fraction: raw.drop_fraction,
            registry,
            grid,
            required,
            any_of,
            gaps,
            groups,
            priors,
            schedule,
        })
    }

    pub fn grouping(&self) -> Result<Grouping, CliError> {
        if self.groups.is_empty() {
            return Err(CliError::Config(
                "config defines no [[groups]]; the temporal analyses need them".to_string(),
            ));
        }
        Grouping::new(&self.groups, &self.registry)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}
