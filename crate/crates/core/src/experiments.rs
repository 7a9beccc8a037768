//! Seeded experiment drivers: price distributions against dimension, their
//! evolution in time, peak growth, domain coarsening, size dependence and the
//! variance ("risk") curve.
//!
//! Replicas are aligned before pooling: each replica's prices are taken
//! relative to that replica's mean price. Once a ring with long-range links
//! orders, every node drifts with the common spin, so the absolute price
//! level is a per-replica random walk that says nothing about how prices
//! differ between nodes of one market. Peak prices are read per replica and
//! summarized by the median of their magnitudes, because the sign of the
//! dominant domain is random.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{run_ensemble, ConfigError, Execution, ReplicaTrace, SimConfig, Snapshot};
use crate::observables::{
    count_domain_walls, excess_kurtosis, find_modes, fit_loglog, peak_price, price_histogram, variance, Histogram,
    Modality, PowerLawFit, StatsError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("this experiment needs a pure ring (no long-range links), got {0} offsets")]
    NotOneDimensional(usize),
    #[error("series {label:?} abscissae are not strictly increasing")]
    UnorderedSeries { label: String },
    #[error("no sizes given")]
    NoSizes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BinWidth {
    /// Scott's rule `3.49 σ N^(-1/3)` with `N` the number of nodes in one
    /// market, so pooled and single-replica histograms share a resolution.
    Scott,
    Fixed(u64),
}

/// Histogram and mode-finding settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub bin_width: BinWidth,
    pub smooth_window: usize,
    pub prominence: f64,
}

impl Default for Estimator {
    fn default() -> Self {
        Self {
            bin_width: BinWidth::Scott,
            smooth_window: 3,
            prominence: 0.1,
        }
    }
}

impl Estimator {
    pub fn width_for(&self, prices: &[i64], market_size: usize) -> u64 {
        match self.bin_width {
            BinWidth::Fixed(w) => w.max(1),
            BinWidth::Scott => {
                let sd = variance(prices).map(f64::sqrt).unwrap_or(0.0);
                ((3.49 * sd * (market_size as f64).powf(-1.0 / 3.0)).round() as u64).max(1)
            }
        }
    }

    pub fn histogram(&self, prices: &[i64], market_size: usize) -> Result<Histogram, StatsError> {
        price_histogram(prices, self.width_for(prices, market_size))
    }

    pub fn modes(&self, h: &Histogram) -> Result<Vec<f64>, StatsError> {
        find_modes(h, self.smooth_window, self.prominence)
    }

    pub fn peak(&self, h: &Histogram) -> Result<i64, StatsError> {
        peak_price(h, self.smooth_window)
    }

    /// Number of modes in the histogram of one price sample.
    pub fn mode_count(&self, prices: &[i64], market_size: usize) -> Result<usize, StatsError> {
        Ok(self.modes(&self.histogram(prices, market_size)?)?.len())
    }
}

/// How experiments run and read their data.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Settings {
    pub estimator: Estimator,
    pub execution: Execution,
}

/// A labelled curve. Abscissae are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    /// Number of replicas aggregated into each point.
    pub replica_pool: usize,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(
        label: impl Into<String>,
        replica_pool: usize,
        points: Vec<(f64, f64)>,
    ) -> Result<Self, ExperimentError> {
        let label = label.into();
        if points
            .windows(2)
            .any(|w| w[0].0.partial_cmp(&w[1].0) != Some(std::cmp::Ordering::Less))
        {
            return Err(ExperimentError::UnorderedSeries { label });
        }
        Ok(Self {
            label,
            replica_pool,
            points,
        })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHistogram {
    pub sweep: u64,
    pub histogram: Histogram,
}

/// Output of one experiment, ready for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub name: String,
    pub config: SimConfig,
    pub series: Vec<Series>,
    pub histograms: Vec<CheckpointHistogram>,
}

impl RunRecord {
    pub fn series(&self, label: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Prices of every replica at `sweep`, each shifted by its replica's rounded
/// mean price.
pub fn centered_pool(traces: &[ReplicaTrace], sweep: u64) -> Vec<i64> {
    traces
        .iter()
        .filter_map(|t| t.at(sweep))
        .flat_map(|s| {
            let shift = mean_price(&s.prices).round() as i64;
            s.prices.iter().map(move |p| p - shift)
        })
        .collect()
}

/// Prices of every replica at `sweep`, unshifted.
pub fn raw_pool(traces: &[ReplicaTrace], sweep: u64) -> Vec<i64> {
    traces
        .iter()
        .filter_map(|t| t.at(sweep))
        .flat_map(|s| s.prices.iter().copied())
        .collect()
}

fn mean_price(prices: &[i64]) -> f64 {
    prices.iter().map(|&p| p as f64).sum::<f64>() / prices.len() as f64
}

/// Price variance within each replica, averaged over replicas. This equals
/// the pooled variance of exactly centered prices.
pub fn ensemble_risk(snapshots: &[&Snapshot]) -> Result<f64, StatsError> {
    if snapshots.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut total = 0.0;
    for s in snapshots {
        total += variance(&s.prices)?;
    }
    Ok(total / snapshots.len() as f64)
}

fn finals(traces: &[ReplicaTrace]) -> Vec<&Snapshot> {
    traces.iter().map(ReplicaTrace::last).collect()
}

fn snapshots_at(traces: &[ReplicaTrace], sweep: u64) -> Vec<&Snapshot> {
    traces.iter().filter_map(|t| t.at(sweep)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Ensures the final sweep is recorded.
fn with_final_checkpoint(config: &SimConfig) -> SimConfig {
    let mut c = config.clone();
    if c.checkpoints.last() != Some(&c.sweeps) {
        c.checkpoints.retain(|&x| x < c.sweeps);
        c.checkpoints.push(c.sweeps);
    }
    c
}

fn require_ring(config: &SimConfig) -> Result<(), ExperimentError> {
    if config.m_extra != 0 {
        return Err(ExperimentError::NotOneDimensional(config.m_extra));
    }
    Ok(())
}

/// Pooled final-time price distribution at one effective dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionPdf {
    pub d: f64,
    pub m: usize,
    pub q: f64,
    pub config: SimConfig,
    pub histogram: Histogram,
    pub modes: Vec<f64>,
    pub modality: Modality,
    /// `None` when every pooled price is equal.
    pub excess_kurtosis: Option<f64>,
    pub risk: f64,
    /// Mode count of each replica's own histogram.
    pub replica_mode_counts: Vec<usize>,
}

impl DimensionPdf {
    pub fn bimodal_replica_fraction(&self) -> f64 {
        let bimodal = self.replica_mode_counts.iter().filter(|&&c| c == 2).count();
        bimodal as f64 / self.replica_mode_counts.len() as f64
    }
}

pub fn experiment_pdf_vs_dimension(
    base: &SimConfig,
    d_values: &[f64],
    settings: &Settings,
) -> Result<Vec<DimensionPdf>, ExperimentError> {
    // reject every bad dimension before running anything
    let configs = d_values
        .iter()
        .map(|&d| Ok((d, with_final_checkpoint(&base.with_dimension(d)?))))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let est = &settings.estimator;
    configs
        .into_iter()
        .map(|(d, config)| {
            let traces = run_ensemble(&config, settings.execution)?;
            let n = config.n_nodes;
            let pooled = centered_pool(&traces, config.sweeps);
            let histogram = est.histogram(&pooled, n)?;
            let modes = est.modes(&histogram)?;
            let replica_mode_counts = finals(&traces)
                .iter()
                .map(|s| est.mode_count(&s.prices, n))
                .collect::<Result<_, _>>()?;
            Ok(DimensionPdf {
                d,
                m: config.m_extra,
                q: config.q,
                histogram,
                modality: Modality::from_mode_count(modes.len()),
                modes,
                excess_kurtosis: excess_kurtosis(&pooled).ok(),
                risk: ensemble_risk(&finals(&traces))?,
                replica_mode_counts,
                config,
            })
        })
        .collect()
}

/// Pooled histograms at every checkpoint of a pure ring, with the pooled
/// peak price and the fraction of samples in the peak bin.
pub fn experiment_pdf_evolution(config: &SimConfig, settings: &Settings) -> Result<RunRecord, ExperimentError> {
    require_ring(config)?;
    let traces = run_ensemble(config, settings.execution)?;
    let est = &settings.estimator;
    let mut histograms = Vec::new();
    let mut peaks = Vec::new();
    let mut heights = Vec::new();
    let mut widths = Vec::new();
    for &sweep in &config.checkpoints {
        let pooled = centered_pool(&traces, sweep);
        let histogram = est.histogram(&pooled, config.n_nodes)?;
        let peak = est.peak(&histogram)?;
        let k = ((peak - histogram.origin).max(0) as u64 / histogram.bin_width) as usize;
        let k = k.min(histogram.counts.len() - 1);
        let x = sweep as f64;
        peaks.push((x, peak.abs() as f64));
        heights.push((x, histogram.counts[k] as f64 / pooled.len() as f64));
        let (lo, hi) = (pooled.iter().min().unwrap(), pooled.iter().max().unwrap());
        widths.push((x, (hi - lo) as f64));
        histograms.push(CheckpointHistogram { sweep, histogram });
    }
    let r = config.replicas;
    Ok(RunRecord {
        name: "pdf_evolution".into(),
        config: config.clone(),
        series: vec![
            Series::new("peak_price", r, peaks)?,
            Series::new("peak_fraction", r, heights)?,
            Series::new("support_width", r, widths)?,
        ],
        histograms,
    })
}

fn median_abs_peak(snapshots: &[&Snapshot], est: &Estimator, n: usize) -> Result<f64, StatsError> {
    let peaks = snapshots
        .iter()
        .map(|s| Ok(est.peak(&est.histogram(&s.prices, n)?)?.abs() as f64))
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(median(&peaks))
}

/// Median over replicas of each replica's `|peak price|`, per checkpoint.
pub fn experiment_peak_vs_time(config: &SimConfig, settings: &Settings) -> Result<Series, ExperimentError> {
    require_ring(config)?;
    let traces = run_ensemble(config, settings.execution)?;
    peak_series(&traces, config, &settings.estimator)
}

fn peak_series(traces: &[ReplicaTrace], config: &SimConfig, est: &Estimator) -> Result<Series, ExperimentError> {
    let points = config
        .checkpoints
        .iter()
        .map(|&sweep| {
            Ok((
                sweep as f64,
                median_abs_peak(&snapshots_at(traces, sweep), est, config.n_nodes)?,
            ))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Series::new("peak_price", config.replicas, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDecay {
    pub series: Series,
    pub fit: PowerLawFit,
}

/// Mean domain-wall count per checkpoint and a log-log fit over the
/// checkpoints after sweep 0 whose mean count is nonzero.
pub fn experiment_domains_vs_time(config: &SimConfig, settings: &Settings) -> Result<DomainDecay, ExperimentError> {
    require_ring(config)?;
    let traces = run_ensemble(config, settings.execution)?;
    domain_decay(&traces, config)
}

fn domain_decay(traces: &[ReplicaTrace], config: &SimConfig) -> Result<DomainDecay, ExperimentError> {
    let points = config
        .checkpoints
        .iter()
        .map(|&sweep| {
            let snaps = snapshots_at(traces, sweep);
            let mut total = 0usize;
            for s in &snaps {
                total += count_domain_walls(&s.spins)?;
            }
            Ok((sweep as f64, total as f64 / snaps.len() as f64))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().filter(|&(x, y)| x > 0.0 && y > 0.0).unzip();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(DomainDecay {
        series: Series::new("domain_walls", config.replicas, points)?,
        fit,
    })
}

/// Median `|peak price|` at the final sweep for each ring size, in the order
/// given. The sweep count is shared, so time per site is fixed.
pub fn experiment_peak_vs_size(
    base: &SimConfig,
    sizes: &[usize],
    settings: &Settings,
) -> Result<Vec<(usize, f64)>, ExperimentError> {
    require_ring(base)?;
    if sizes.is_empty() {
        return Err(ExperimentError::NoSizes);
    }
    let configs: Vec<SimConfig> = sizes
        .iter()
        .map(|&n| with_final_checkpoint(&base.with_nodes(n)))
        .collect();
    for c in &configs {
        c.validate()?;
    }
    configs
        .iter()
        .map(|config| {
            let traces = run_ensemble(config, settings.execution)?;
            Ok((
                config.n_nodes,
                median_abs_peak(&finals(&traces), &settings.estimator, config.n_nodes)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionPoint {
    pub d: f64,
    pub m: usize,
    pub q: f64,
    pub risk: f64,
}

/// Final-time price variance within a market, averaged over replicas, for
/// each dimension; sorted by dimension.
pub fn experiment_risk_vs_dimension(
    base: &SimConfig,
    d_grid: &[f64],
    settings: &Settings,
) -> Result<Vec<DimensionPoint>, ExperimentError> {
    let configs = d_grid
        .iter()
        .map(|&d| Ok((d, with_final_checkpoint(&base.with_dimension(d)?))))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let mut points = configs
        .into_iter()
        .map(|(d, config)| {
            let traces = run_ensemble(&config, settings.execution)?;
            Ok(DimensionPoint {
                d,
                m: config.m_extra,
                q: config.q,
                risk: ensemble_risk(&finals(&traces))?,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    points.sort_by(|a, b| a.d.total_cmp(&b.d));
    Ok(points)
}

/// Sorts by abscissa and keeps the first of repeated abscissae.
fn ordered(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|b, a| a.0 == b.0);
    points
}

pub fn pdf_vs_dimension_records(rows: &[DimensionPdf]) -> Result<Vec<RunRecord>, ExperimentError> {
    rows.iter()
        .map(|row| {
            let r = row.config.replicas;
            let d = row.d;
            let mut summary = vec![
                Series::new("mode_count", r, vec![(d, row.modes.len() as f64)])?,
                Series::new("risk", r, vec![(d, row.risk)])?,
                Series::new("bimodal_replica_fraction", r, vec![(d, row.bimodal_replica_fraction())])?,
            ];
            if let Some(k) = row.excess_kurtosis {
                summary.push(Series::new("excess_kurtosis", r, vec![(d, k)])?);
            }
            Ok(RunRecord {
                name: format!("pdf_d{d}"),
                config: row.config.clone(),
                series: summary,
                histograms: vec![CheckpointHistogram {
                    sweep: row.config.sweeps,
                    histogram: row.histogram.clone(),
                }],
            })
        })
        .collect()
}

pub fn peak_vs_time_record(config: &SimConfig, series: Series) -> RunRecord {
    RunRecord {
        name: "peak_vs_time".into(),
        config: config.clone(),
        series: vec![series],
        histograms: Vec::new(),
    }
}

pub fn domains_record(config: &SimConfig, decay: &DomainDecay) -> Result<RunRecord, ExperimentError> {
    let fitted = decay
        .series
        .points
        .iter()
        .filter(|p| p.0 > 0.0)
        .map(|&(x, _)| (x, decay.fit.predict(x)))
        .collect();
    Ok(RunRecord {
        name: "domains_vs_time".into(),
        config: config.clone(),
        series: vec![
            decay.series.clone(),
            Series::new("power_law_fit", config.replicas, fitted)?,
            Series::new("fit_slope", config.replicas, vec![(0.0, decay.fit.slope)])?,
            Series::new("fit_r_squared", config.replicas, vec![(0.0, decay.fit.r_squared)])?,
        ],
        histograms: Vec::new(),
    })
}

pub fn peak_vs_size_record(base: &SimConfig, rows: &[(usize, f64)]) -> Result<RunRecord, ExperimentError> {
    let points = ordered(rows.iter().map(|&(n, p)| (n as f64, p)).collect());
    Ok(RunRecord {
        name: "peak_vs_size".into(),
        config: base.clone(),
        series: vec![Series::new("peak_price", base.replicas, points)?],
        histograms: Vec::new(),
    })
}

pub fn risk_record(base: &SimConfig, points: &[DimensionPoint]) -> Result<RunRecord, ExperimentError> {
    let curve = ordered(points.iter().map(|p| (p.d, p.risk)).collect());
    Ok(RunRecord {
        name: "risk_vs_dimension".into(),
        config: base.clone(),
        series: vec![Series::new("risk", base.replicas, curve)?],
        histograms: Vec::new(),
    })
}

/// Every observable of a single configuration at each checkpoint: pooled
/// histograms, mean wall count, median `|peak|` and risk.
pub fn experiment_custom(config: &SimConfig, settings: &Settings) -> Result<RunRecord, ExperimentError> {
    let traces = run_ensemble(config, settings.execution)?;
    let est = &settings.estimator;
    let r = config.replicas;
    let mut walls = Vec::new();
    let mut peaks = Vec::new();
    let mut risks = Vec::new();
    let mut histograms = Vec::new();
    for &sweep in &config.checkpoints {
        let snaps = snapshots_at(&traces, sweep);
        let x = sweep as f64;
        let mut total = 0usize;
        for s in &snaps {
            total += count_domain_walls(&s.spins).map_err(ExperimentError::from)?;
        }
        walls.push((x, total as f64 / snaps.len() as f64));
        peaks.push((x, median_abs_peak(&snaps, est, config.n_nodes)?));
        risks.push((x, ensemble_risk(&snaps)?));
        let pooled = centered_pool(&traces, sweep);
        histograms.push(CheckpointHistogram {
            sweep,
            histogram: est.histogram(&pooled, config.n_nodes)?,
        });
    }
    Ok(RunRecord {
        name: "custom".into(),
        config: config.clone(),
        series: vec![
            Series::new("domain_walls", r, walls)?,
            Series::new("peak_price", r, peaks)?,
            Series::new("risk", r, risks)?,
        ],
        histograms,
    })
}
