//! Discrete-time multivariate Hawkes model over binned event counts.
//!
//! Time is divided into bins of fixed width; events in the same bin do not
//! interact. With `s[t][k]` the event count of community `k` in bin `t`, the
//! rate of community `k` is
//!
//! ```text
//! rate[t][k] = lambda0[k] + sum over k', d >= 1 of s[t-d][k'] * h[k'->k][d]
//! h[k'->k][d] = W[k'->k] * g[k'->k][d]
//! ```
//!
//! `W[k'->k]` is the expected number of child events caused on `k` by one
//! event on `k'`; `g` is a probability mass function over lags `1..=D`,
//! piecewise-constant on the bins of a [`LagKernelGrid`] and zero beyond `D`.
//! Observed counts are Poisson given the rate.

mod params_io;

pub use params_io::{load_params, save_params};

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::events::BinnedCounts;

#[derive(Debug, Error)]
pub enum HawkesError {
    #[error("lag grid needs at least two edges")]
    GridTooSmall,
    #[error("lag grid edges must start at 1, got {0}")]
    GridBadStart(u32),
    #[error("lag grid edges must be strictly increasing")]
    GridNotIncreasing,
    #[error("parameter dimensions disagree: {0}")]
    DimensionMismatch(String),
    #[error("negative parameter entry: {0}")]
    NegativeEntry(String),
    #[error("lag pmf for {from}->{to} sums to {sum}, expected 1")]
    PmfNotNormalized { from: usize, to: usize, sum: f64 },
    #[error("lag must be at least 1 bin, got {0}")]
    NonPositiveLag(i64),
    #[error("counts have {found} communities, model has {expected}")]
    CountsMismatch { found: usize, expected: usize },
    #[error("zero rate with {count} events at bin {t}, community {k}")]
    ZeroRateAtEvents { t: usize, k: usize, count: u32 },
    #[error("weight matrix spectral radius {rho} is not subcritical")]
    NotSubcritical { rho: f64 },
    #[error("simulation needs at least one bin")]
    EmptySimulation,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parameter file {file}: {message}")]
    BadParamsFile { file: String, message: String },
}

const PMF_TOLERANCE: f64 = 1e-9;

/// Partition of the integer lags `1..=D` into contiguous bins. `edges` holds
/// `B + 1` increasing values with `edges[0] = 1` and `edges[B] = D + 1`; lag
/// bin `b` covers lags `edges[b]..edges[b+1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LagKernelGrid {
    edges: Vec<u32>,
}

impl LagKernelGrid {
    pub fn new(edges: Vec<u32>) -> Result<Self, HawkesError> {
        if edges.len() < 2 {
            return Err(HawkesError::GridTooSmall);
        }
        if edges[0] != 1 {
            return Err(HawkesError::GridBadStart(edges[0]));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HawkesError::GridNotIncreasing);
        }
        Ok(Self { edges })
    }

    /// Logarithmically spaced 8-bin grid over a 720-bin (12 hours at one
    /// minute per bin) window.
    pub fn default_720() -> Self {
        Self::new(vec![1, 2, 4, 8, 16, 64, 256, 512, 721]).unwrap()
    }

    /// Maximum lag `D` in bins; lags beyond this contribute nothing.
    pub fn max_lag(&self) -> u32 {
        *self.edges.last().unwrap() - 1
    }

    /// Number of lag bins `B`.
    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[u32] {
        &self.edges
    }

    /// Number of integer lags in bin `b`.
    pub fn bin_width(&self, b: usize) -> u32 {
        self.edges[b + 1] - self.edges[b]
    }

    /// Lag bin containing lag `d`, or `None` when `d` is outside `1..=D`.
    pub fn bin_of(&self, d: u32) -> Option<usize> {
        if d < 1 || d > self.max_lag() {
            return None;
        }
        // partition_point: first edge index with edge > d
        Some(self.edges.partition_point(|&e| e <= d) - 1)
    }

    /// Lookup table from lag to lag bin: entry `d` is the bin of lag `d`,
    /// entry 0 is unused.
    pub(crate) fn lag_to_bin(&self) -> Vec<u16> {
        let d_max = self.max_lag() as usize;
        let mut table = vec![0u16; d_max + 1];
        for d in 1..=d_max {
            table[d] = self.bin_of(d as u32).unwrap() as u16;
        }
        table
    }
}

/// Full parameter set of a `K`-community model: background rates, the weight
/// matrix, and the per-pair lag pmfs over a shared grid.
#[derive(Debug, Clone)]
pub struct HawkesParams {
    /// Background rate per community, events per bin.
    pub lambda0: Vec<f64>,
    /// `weights[[source, target]]` = expected child events on `target` per
    /// event on `source`.
    pub weights: Array2<f64>,
    /// `lag_pmfs[[source, target, b]]` = probability mass on lag bin `b`;
    /// each source/target slice sums to 1.
    pub lag_pmfs: Array3<f64>,
    pub grid: LagKernelGrid,
}

impl HawkesParams {
    pub fn new(
        lambda0: Vec<f64>,
        weights: Array2<f64>,
        lag_pmfs: Array3<f64>,
        grid: LagKernelGrid,
    ) -> Result<Self, HawkesError> {
        let k = lambda0.len();
        let b = grid.num_bins();
        if weights.dim() != (k, k) {
            return Err(HawkesError::DimensionMismatch(format!(
                "weights are {:?}, expected ({k}, {k})",
                weights.dim()
            )));
        }
        if lag_pmfs.dim() != (k, k, b) {
            return Err(HawkesError::DimensionMismatch(format!(
                "lag pmfs are {:?}, expected ({k}, {k}, {b})",
                lag_pmfs.dim()
            )));
        }
        if let Some(bad) = lambda0.iter().find(|&&v| !(v >= 0.0)) {
            return Err(HawkesError::NegativeEntry(format!("lambda0 entry {bad}")));
        }
        if let Some(bad) = weights.iter().find(|&&v| !(v >= 0.0)) {
            return Err(HawkesError::NegativeEntry(format!("weight entry {bad}")));
        }
        if let Some(bad) = lag_pmfs.iter().find(|&&v| !(v >= 0.0)) {
            return Err(HawkesError::NegativeEntry(format!("lag pmf entry {bad}")));
        }
        for source in 0..k {
            for target in 0..k {
                let sum: f64 = (0..b).map(|i| lag_pmfs[[source, target, i]]).sum();
                if (sum - 1.0).abs() > PMF_TOLERANCE {
                    return Err(HawkesError::PmfNotNormalized {
                        from: source,
                        to: target,
                        sum,
                    });
                }
            }
        }
        Ok(Self {
            lambda0,
            weights,
            lag_pmfs,
            grid,
        })
    }

    pub fn num_communities(&self) -> usize {
        self.lambda0.len()
    }

    /// Per-lag kernel value `g[source->target][d]`: the lag bin's mass spread
    /// uniformly over its integer lags. Zero beyond the grid window.
    pub fn lag_kernel(&self, source: usize, target: usize, d: u32) -> f64 {
        match self.grid.bin_of(d) {
            Some(b) => self.lag_pmfs[[source, target, b]] / self.grid.bin_width(b) as f64,
            None => 0.0,
        }
    }
}

/// Evaluated rates, one per bin and community.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    rates: Array2<f64>,
}

impl RateMatrix {
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.rates[[t, k]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.rates
    }
}

/// Impulse response `h[source->target][lag] = W * g[lag]`: the added rate on
/// `target` at `lag` bins after one event on `source`. Zero beyond the grid's
/// maximum lag; a lag below 1 is an error.
pub fn impulse(
    params: &HawkesParams,
    source: usize,
    target: usize,
    lag: i64,
) -> Result<f64, HawkesError> {
    if lag <= 0 {
        return Err(HawkesError::NonPositiveLag(lag));
    }
    let g = if lag > params.grid.max_lag() as i64 {
        0.0
    } else {
        params.lag_kernel(source, target, lag as u32)
    };
    Ok(params.weights[[source, target]] * g)
}

fn check_counts(params: &HawkesParams, counts: &BinnedCounts) -> Result<(), HawkesError> {
    if counts.num_communities() != params.num_communities() {
        return Err(HawkesError::CountsMismatch {
            found: counts.num_communities(),
            expected: params.num_communities(),
        });
    }
    Ok(())
}

/// Evaluate the rate of every community at every bin: background plus the
/// excitation contributed by all earlier events within the lag window.
pub fn compute_rates(
    params: &HawkesParams,
    counts: &BinnedCounts,
) -> Result<RateMatrix, HawkesError> {
    check_counts(params, counts)?;
    let t_bins = counts.num_bins();
    let k = params.num_communities();
    let d_max = params.grid.max_lag() as usize;
    let lag_bin = params.grid.lag_to_bin();
    let inv_width: Vec<f64> = (0..params.grid.num_bins())
        .map(|b| 1.0 / params.grid.bin_width(b) as f64)
        .collect();

    let mut rates = Array2::<f64>::zeros((t_bins, k));
    for t in 0..t_bins {
        for k_idx in 0..k {
            rates[[t, k_idx]] = params.lambda0[k_idx];
        }
    }
    // Scatter each occupied source bin onto the bins it can excite.
    for t_src in 0..t_bins {
        for source in 0..k {
            let s = counts.get(t_src, source);
            if s == 0 {
                continue;
            }
            let s = s as f64;
            let horizon = d_max.min(t_bins - 1 - t_src);
            for d in 1..=horizon {
                let b = lag_bin[d] as usize;
                for target in 0..k {
                    let w = params.weights[[source, target]];
                    if w == 0.0 {
                        continue;
                    }
                    rates[[t_src + d, target]] +=
                        s * w * params.lag_pmfs[[source, target, b]] * inv_width[b];
                }
            }
        }
    }
    Ok(RateMatrix { rates })
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n as u64).map(|i| (i as f64).ln()).sum()
}

/// Poisson log-likelihood of the counts under the model:
/// `sum over t, k of s*ln(rate) - rate - ln(s!)`.
pub fn log_likelihood(params: &HawkesParams, counts: &BinnedCounts) -> Result<f64, HawkesError> {
    let rates = compute_rates(params, counts)?;
    let mut ll = 0.0;
    for t in 0..counts.num_bins() {
        for k in 0..counts.num_communities() {
            let rate = rates.get(t, k);
            let s = counts.get(t, k);
            if s > 0 {
                if rate <= 0.0 {
                    return Err(HawkesError::ZeroRateAtEvents { t, k, count: s });
                }
                ll += s as f64 * rate.ln() - ln_factorial(s);
            }
            ll -= rate;
        }
    }
    Ok(ll)
}

/// Largest eigenvalue modulus of a non-negative matrix (its Perron root),
/// via power iteration on the shifted matrix `W + I` to relative tolerance
/// 1e-8. The shift makes the dominant eigenvalue strictly separated so the
/// iteration converges even for periodic matrices.
pub fn spectral_radius(weights: &Array2<f64>) -> f64 {
    let k = weights.nrows();
    assert_eq!(k, weights.ncols(), "weights must be square");
    if k == 0 {
        return 0.0;
    }
    debug_assert!(weights.iter().all(|&w| w >= 0.0));

    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut rho_shifted = f64::NAN;
    for _ in 0..200_000 {
        // u = (W^T + I) v; the transpose has the same spectrum. v stays unit
        // length, so the dominant eigenvalue is the norm of u.
        let mut u = vec![0.0f64; k];
        for (i, ui) in u.iter_mut().enumerate() {
            let mut acc = v[i];
            for j in 0..k {
                acc += weights[[j, i]] * v[j];
            }
            *ui = acc;
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut u {
            *x /= norm;
        }
        let prev = rho_shifted;
        rho_shifted = norm;
        v = u;
        if (rho_shifted - prev).abs() <= 1e-8 * rho_shifted.max(1.0) {
            break;
        }
    }
    (rho_shifted - 1.0).max(0.0)
}

/// Draw a full count matrix from the generative model, bin by bin: the rate
/// at bin `t` is computed from the already-drawn history, then each
/// community's count is a Poisson draw. Deterministic given the seed; the
/// returned counts use bin units (`delta_t = 1`, `origin = 0`).
pub fn simulate(
    params: &HawkesParams,
    t_bins: usize,
    seed: u64,
) -> Result<BinnedCounts, HawkesError> {
    if t_bins == 0 {
        return Err(HawkesError::EmptySimulation);
    }
    let rho = spectral_radius(&params.weights);
    if rho >= 1.0 {
        return Err(HawkesError::NotSubcritical { rho });
    }
    let k = params.num_communities();
    let d_max = params.grid.max_lag() as usize;
    let lag_bin = params.grid.lag_to_bin();
    let inv_width: Vec<f64> = (0..params.grid.num_bins())
        .map(|b| 1.0 / params.grid.bin_width(b) as f64)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excitation = Array2::<f64>::zeros((t_bins, k));
    let mut counts = Array2::<u32>::zeros((t_bins, k));
    for t in 0..t_bins {
        for target in 0..k {
            let rate = params.lambda0[target] + excitation[[t, target]];
            let drawn: u32 = if rate > 0.0 {
                let sample: f64 = Poisson::new(rate).expect("positive rate").sample(&mut rng);
                sample as u32
            } else {
                0
            };
            counts[[t, target]] = drawn;
        }
        // Scatter this bin's events onto future rates.
        for source in 0..k {
            let s = counts[[t, source]];
            if s == 0 {
                continue;
            }
            let s = s as f64;
            let horizon = d_max.min(t_bins - 1 - t);
            for d in 1..=horizon {
                let b = lag_bin[d] as usize;
                for target in 0..k {
                    let w = params.weights[[source, target]];
                    if w == 0.0 {
                        continue;
                    }
                    excitation[[t + d, target]] +=
                        s * w * params.lag_pmfs[[source, target, b]] * inv_width[b];
                }
            }
        }
    }
    BinnedCounts::new(counts, 1, 0).map_err(|_| HawkesError::EmptySimulation)
}
