//! Aggregation of per-URL posteriors into cross-community influence
//! summaries: mean weight matrices per news class, the percentage of each
//! community's events attributable to every other community, and two-sample
//! Kolmogorov-Smirnov significance between the classes' weight
//! distributions.

use std::collections::BTreeMap;

use ndarray::Array2;
use thiserror::Error;

use crate::events::NewsClass;

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("no weights recorded for {class} pair {from}->{to}")]
    EmptyCell {
        class: NewsClass,
        from: usize,
        to: usize,
    },
    #[error("ks test requires non-empty samples")]
    EmptySample,
    #[error("weight matrix is {found}x{found}, expected {expected}x{expected}")]
    DimensionMismatch { found: usize, expected: usize },
    #[error("event totals have {found} communities, expected {expected}")]
    TotalsMismatch { found: usize, expected: usize },
    #[error("no URLs to aggregate")]
    EmptyInput,
    #[error("posteriors and event store disagree on URLs; orphaned: {}", format_orphans(.orphans))]
    KeyMismatch { orphans: Vec<String> },
}

fn format_orphans(orphans: &[String]) -> String {
    const SHOWN: usize = 10;
    if orphans.len() <= SHOWN {
        orphans.join(", ")
    } else {
        format!(
            "{}, ... ({} total)",
            orphans[..SHOWN].join(", "),
            orphans.len()
        )
    }
}

/// Per-URL posterior-mean weights collected per (source, target, class)
/// cell. Lists across cells of one class stay index-aligned by URL.
#[derive(Debug, Clone)]
pub struct WeightSampleSet {
    k: usize,
    alternative: Vec<Vec<f64>>,
    mainstream: Vec<Vec<f64>>,
}

impl WeightSampleSet {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            alternative: vec![Vec::new(); k * k],
            mainstream: vec![Vec::new(); k * k],
        }
    }

    pub fn num_communities(&self) -> usize {
        self.k
    }

    fn cells(&self, class: NewsClass) -> &Vec<Vec<f64>> {
        match class {
            NewsClass::Alternative => &self.alternative,
            NewsClass::Mainstream => &self.mainstream,
        }
    }

    /// Record one URL's posterior-mean weight matrix.
    pub fn add_url(&mut self, class: NewsClass, weights: &Array2<f64>) -> Result<(), InfluenceError> {
        if weights.dim() != (self.k, self.k) {
            return Err(InfluenceError::DimensionMismatch {
                found: weights.nrows(),
                expected: self.k,
            });
        }
        let cells = match class {
            NewsClass::Alternative => &mut self.alternative,
            NewsClass::Mainstream => &mut self.mainstream,
        };
        for source in 0..self.k {
            for target in 0..self.k {
                cells[source * self.k + target].push(weights[[source, target]]);
            }
        }
        Ok(())
    }

    pub fn cell(&self, class: NewsClass, source: usize, target: usize) -> &[f64] {
        &self.cells(class)[source * self.k + target]
    }

    pub fn url_count(&self, class: NewsClass) -> usize {
        self.cells(class)[0].len()
    }
}

/// Arithmetic mean of the per-URL weights in every cell of one class.
pub fn mean_weight_matrix(
    set: &WeightSampleSet,
    class: NewsClass,
) -> Result<Array2<f64>, InfluenceError> {
    let k = set.num_communities();
    let mut out = Array2::zeros((k, k));
    for source in 0..k {
        for target in 0..k {
            let cell = set.cell(class, source, target);
            if cell.is_empty() {
                return Err(InfluenceError::EmptyCell {
                    class,
                    from: source,
                    to: target,
                });
            }
            out[[source, target]] = cell.iter().sum::<f64>() / cell.len() as f64;
        }
    }
    Ok(out)
}

/// Percentage of events on each target community caused by each source:
/// `100 * sum_u(W[source->target, u] * events_u[source]) / sum_u events_u[target]`.
/// `event_totals[i]` must align with the i-th URL added to the set for this
/// class. Cells whose target has zero events are `None` (undefined, not 0).
pub fn influence_percentage(
    set: &WeightSampleSet,
    class: NewsClass,
    event_totals: &[Vec<u64>],
) -> Result<Array2<Option<f64>>, InfluenceError> {
    let k = set.num_communities();
    let n_urls = set.url_count(class);
    if event_totals.len() != n_urls {
        return Err(InfluenceError::TotalsMismatch {
            found: event_totals.len(),
            expected: n_urls,
        });
    }
    for totals in event_totals {
        if totals.len() != k {
            return Err(InfluenceError::TotalsMismatch {
                found: totals.len(),
                expected: k,
            });
        }
    }
    let mut out = Array2::from_elem((k, k), None);
    for target in 0..k {
        let denominator: u64 = event_totals.iter().map(|t| t[target]).sum();
        if denominator == 0 {
            continue;
        }
        for source in 0..k {
            let cell = set.cell(class, source, target);
            let numerator: f64 = cell
                .iter()
                .zip(event_totals)
                .map(|(&w, totals)| w * totals[source] as f64)
                .sum();
            out[[source, target]] = Some(100.0 * numerator / denominator as f64);
        }
    }
    Ok(out)
}

/// Result of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value at effective size `|a||b| / (|a| + |b|)`.
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution at `sqrt(t)`, given
/// `t = n_e * D^2`. Primary series for large arguments, Jacobi-dual form for
/// small ones; terms below 1e-10 are truncated.
fn kolmogorov_p(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let lambda = t.sqrt();
    let p = if lambda < 1.0 {
        // 1 - sqrt(2 pi)/lambda * sum exp(-(2j-1)^2 pi^2 / (8 lambda^2))
        let mut sum = 0.0;
        for j in 1..=1000u32 {
            let odd = (2 * j - 1) as f64;
            let term = (-odd * odd * std::f64::consts::PI.powi(2) / (8.0 * t)).exp();
            sum += term;
            if term < 1e-10 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        // 2 * sum (-1)^{j-1} exp(-2 j^2 t)
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=1000u32 {
            let term = (-2.0 * (j * j) as f64 * t).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-10 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample KS test: exact empirical-CDF supremum distance over the pooled
/// points, asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, InfluenceError> {
    if a.is_empty() || b.is_empty() {
        return Err(InfluenceError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap());

    let n = xs.len();
    let m = ys.len();
    let mut i = 0;
    let mut j = 0;
    let mut statistic = 0.0f64;
    while i < n && j < m {
        let x = xs[i].min(ys[j]);
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        statistic = statistic.max(diff);
    }

    let effective = (n * m) as f64 / (n + m) as f64;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        kolmogorov_p(effective * statistic * statistic)
    };
    Ok(KsResult { statistic, p_value })
}

/// Significance label: `**` below 0.01, `*` below 0.05, empty otherwise.
pub fn significance_stars(p: f64) -> &'static str {
    debug_assert!((0.0..=1.0).contains(&p));
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// One fitted URL, as needed for aggregation.
#[derive(Debug, Clone)]
pub struct UrlPosterior {
    pub url: String,
    pub news_class: NewsClass,
    pub mean_lambda0: Vec<f64>,
    pub mean_weights: Array2<f64>,
}

/// Aggregates for one news class.
#[derive(Debug, Clone)]
pub struct ClassSection {
    pub urls: usize,
    /// Total events per community over this class's URLs.
    pub events: Vec<u64>,
    /// Mean posterior-mean background rate per community.
    pub mean_lambda0: Vec<f64>,
    pub mean_weights: Array2<f64>,
    /// Percent of target events caused by each source; `None` where the
    /// target has no events.
    pub pct: Array2<Option<f64>>,
}

/// The full influence summary: one section per news class present, plus the
/// per-pair KS p-values between the two classes' weight distributions when
/// both are present.
#[derive(Debug, Clone)]
pub struct InfluenceReport {
    pub k: usize,
    pub alternative: Option<ClassSection>,
    pub mainstream: Option<ClassSection>,
    pub ks_p: Option<Array2<f64>>,
}

impl InfluenceReport {
    pub fn section(&self, class: NewsClass) -> Option<&ClassSection> {
        match class {
            NewsClass::Alternative => self.alternative.as_ref(),
            NewsClass::Mainstream => self.mainstream.as_ref(),
        }
    }
}

/// Assemble the report from per-URL posteriors and per-URL per-community
/// event totals. The two inputs must be keyed by exactly the same URL set.
pub fn build_report(
    posteriors: &[UrlPosterior],
    event_totals: &BTreeMap<String, Vec<u64>>,
    k: usize,
) -> Result<InfluenceReport, InfluenceError> {
    if posteriors.is_empty() {
        return Err(InfluenceError::EmptyInput);
    }
    let mut orphans: Vec<String> = Vec::new();
    for p in posteriors {
        if !event_totals.contains_key(&p.url) {
            orphans.push(p.url.clone());
        }
    }
    let posterior_urls: std::collections::BTreeSet<&str> =
        posteriors.iter().map(|p| p.url.as_str()).collect();
    for url in event_totals.keys() {
        if !posterior_urls.contains(url.as_str()) {
            orphans.push(url.clone());
        }
    }
    if !orphans.is_empty() {
        orphans.sort();
        return Err(InfluenceError::KeyMismatch { orphans });
    }

    let mut set = WeightSampleSet::new(k);
    let mut totals_by_class: BTreeMap<NewsClass, Vec<Vec<u64>>> = BTreeMap::new();
    let mut lambda0_sums: BTreeMap<NewsClass, Vec<f64>> = BTreeMap::new();
    for p in posteriors {
        if p.mean_weights.dim() != (k, k) {
            return Err(InfluenceError::DimensionMismatch {
                found: p.mean_weights.nrows(),
                expected: k,
            });
        }
        set.add_url(p.news_class, &p.mean_weights)?;
        totals_by_class
            .entry(p.news_class)
            .or_default()
            .push(event_totals[&p.url].clone());
        let sums = lambda0_sums
            .entry(p.news_class)
            .or_insert_with(|| vec![0.0; k]);
        for (i, &v) in p.mean_lambda0.iter().enumerate() {
            sums[i] += v;
        }
    }

    let mut sections: BTreeMap<NewsClass, ClassSection> = BTreeMap::new();
    for class in NewsClass::ALL {
        let urls = set.url_count(class);
        if urls == 0 {
            continue;
        }
        let class_totals = &totals_by_class[&class];
        let mut events = vec![0u64; k];
        for totals in class_totals {
            for (i, &v) in totals.iter().enumerate() {
                events[i] += v;
            }
        }
        let mean_lambda0: Vec<f64> = lambda0_sums[&class]
            .iter()
            .map(|&s| s / urls as f64)
            .collect();
        sections.insert(
            class,
            ClassSection {
                urls,
                events,
                mean_lambda0,
                mean_weights: mean_weight_matrix(&set, class)?,
                pct: influence_percentage(&set, class, class_totals)?,
            },
        );
    }

    let ks_p = if sections.len() == 2 {
        let mut p = Array2::zeros((k, k));
        for source in 0..k {
            for target in 0..k {
                let a = set.cell(NewsClass::Alternative, source, target);
                let b = set.cell(NewsClass::Mainstream, source, target);
                p[[source, target]] = ks_two_sample(a, b)?.p_value;
            }
        }
        Some(p)
    } else {
        None
    };

    Ok(InfluenceReport {
        k,
        alternative: sections.remove(&NewsClass::Alternative),
        mainstream: sections.remove(&NewsClass::Mainstream),
        ks_p,
    })
}
