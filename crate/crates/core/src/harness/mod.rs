//! Experiment front end: configuration files, metric rows, precision, sweeps
//! and their CSV and plot-data output.

mod config;

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{apply_setting, config_to_string, parse_config, CONFIG_KEYS};

use crate::routing::{RoutingOutcome, Strategy};
use crate::simkernel::{run_scenario, ScenarioConfig, ScenarioReport, SimError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown sweep axis {0:?}")]
    UnknownAxis(String),
    #[error("sweep values must be non-empty and ascending")]
    UnsortedValues,
    #[error("outcome sets are not paired: {0}")]
    MismatchedRuns(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// True for errors caused by the user's configuration rather than the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Config { .. }
                | HarnessError::UnknownAxis(_)
                | HarnessError::UnsortedValues
                | HarnessError::Sim(SimError::InvalidConfig(_))
                | HarnessError::Sim(SimError::VocabularyExhausted { .. })
        )
    }
}

/// Σ|answers(candidate)| / Σ|answers(reference)| over paired outcomes; 1.0
/// when both sums are zero.
pub fn compute_precision<'a, C, R>(candidate: C, reference: R) -> Result<f64, HarnessError>
where
    C: IntoIterator<Item = &'a RoutingOutcome>,
    R: IntoIterator<Item = &'a RoutingOutcome>,
{
    let candidate: Vec<_> = candidate.into_iter().collect();
    let reference: Vec<_> = reference.into_iter().collect();
    if candidate.len() != reference.len() {
        return Err(HarnessError::MismatchedRuns(format!(
            "{} outcomes against {}",
            candidate.len(),
            reference.len()
        )));
    }
    let (mut num, mut den) = (0usize, 0usize);
    for (c, r) in candidate.iter().zip(&reference) {
        if c.query_id != r.query_id {
            return Err(HarnessError::MismatchedRuns(format!(
                "query {} paired with {}",
                c.query_id, r.query_id
            )));
        }
        num += c.answering_peers.len();
        den += r.answering_peers.len();
    }
    if den == 0 {
        if num == 0 {
            return Ok(1.0);
        }
        return Err(HarnessError::MismatchedRuns(
            "candidate answered queries the reference left unanswered".into(),
        ));
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub n_peers: usize,
    pub n_super_peers: usize,
    pub queries_per_peer: usize,
    pub strategy: Strategy,
    pub total_messages: u64,
    pub total_sim_evaluations: u64,
    pub total_tree_node_visits: u64,
    pub precision: f64,
    pub classifier_top1_accuracy: Option<f64>,
    pub candidate_hit_rate: Option<f64>,
    pub wall_clock_ms: f64,
}

pub const METRICS_HEADER: [&str; 11] = [
    "n_peers",
    "n_super_peers",
    "queries_per_peer",
    "strategy",
    "total_messages",
    "total_sim_evaluations",
    "total_tree_node_visits",
    "precision",
    "classifier_top1_accuracy",
    "candidate_hit_rate",
    "wall_clock_ms",
];

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

impl MetricsRow {
    pub fn cost(&self) -> u64 {
        self.total_messages + self.total_sim_evaluations
    }

    fn fields(&self) -> [String; 11] {
        let opt = |x: Option<f64>| x.map(fixed).unwrap_or_default();
        [
            self.n_peers.to_string(),
            self.n_super_peers.to_string(),
            self.queries_per_peer.to_string(),
            self.strategy.to_string(),
            self.total_messages.to_string(),
            self.total_sim_evaluations.to_string(),
            self.total_tree_node_visits.to_string(),
            fixed(self.precision),
            opt(self.classifier_top1_accuracy),
            opt(self.candidate_hit_rate),
            format!("{:.3}", self.wall_clock_ms),
        ]
    }
}

/// One row per strategy, in `baseline, dk, dk_bis` order.
pub fn metrics_rows(report: &ScenarioReport) -> Result<Vec<MetricsRow>, HarnessError> {
    let cfg = &report.config;
    let totals = report.totals();
    Strategy::ALL
        .into_iter()
        .map(|s| {
            let t = totals[&s];
            let precision = match s {
                Strategy::Baseline => 1.0,
                _ => compute_precision(report.outcomes(s), report.outcomes(Strategy::Baseline))?,
            };
            Ok(MetricsRow {
                n_peers: cfg.n_peers,
                n_super_peers: cfg.n_super_peers,
                queries_per_peer: cfg.queries_per_peer,
                strategy: s,
                total_messages: t.messages,
                total_sim_evaluations: t.sim_evaluations,
                total_tree_node_visits: t.tree_node_visits,
                precision,
                classifier_top1_accuracy: report.classifier.map(|c| c.top1_accuracy),
                candidate_hit_rate: report.classifier.map(|c| c.hit_rate),
                wall_clock_ms: report.wall_clock[&s].as_secs_f64() * 1000.0,
            })
        })
        .collect()
}

pub fn write_metrics_csv<W: io::Write>(writer: W, rows: &[MetricsRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    NPeers,
    NSuperPeers,
    QueriesPerPeer,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::NPeers => "n_peers",
            Axis::NSuperPeers => "n_super_peers",
            Axis::QueriesPerPeer => "queries_per_peer",
        }
    }

    pub fn apply(self, cfg: &mut ScenarioConfig, value: usize) {
        match self {
            Axis::NPeers => cfg.n_peers = value,
            Axis::NSuperPeers => cfg.n_super_peers = value,
            Axis::QueriesPerPeer => cfg.queries_per_peer = value,
        }
    }

    pub fn value(self, row: &MetricsRow) -> usize {
        match self {
            Axis::NPeers => row.n_peers,
            Axis::NSuperPeers => row.n_super_peers,
            Axis::QueriesPerPeer => row.queries_per_peer,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Axis::NPeers, Axis::NSuperPeers, Axis::QueriesPerPeer]
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| HarnessError::UnknownAxis(s.to_owned()))
    }
}

/// Runs one scenario per axis value in parallel; rows come back in axis
/// order whatever the completion order.
pub fn sweep(
    base: &ScenarioConfig,
    axis: Axis,
    values: &[usize],
) -> Result<Vec<MetricsRow>, HarnessError> {
    if values.is_empty() || values.windows(2).any(|w| w[0] > w[1]) {
        return Err(HarnessError::UnsortedValues);
    }
    let configs: Vec<ScenarioConfig> = values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, v);
            cfg
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let per_point: Vec<Result<Vec<MetricsRow>, HarnessError>> = configs
        .par_iter()
        .map(|cfg| metrics_rows(&run_scenario(cfg)?))
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Two-column blocks, one per (metric, strategy) curve, separated by two
/// blank lines so gnuplot can address them with `index`.
pub fn plot_data(axis: Axis, rows: &[MetricsRow]) -> String {
    type Metric = fn(&MetricsRow) -> f64;
    let metrics: [(&str, Metric); 3] = [
        ("cost", |r| r.cost() as f64),
        ("messages", |r| r.total_messages as f64),
        ("precision", |r| r.precision),
    ];
    let mut blocks = Vec::new();
    for (name, metric) in metrics {
        for s in Strategy::ALL {
            let mut block = format!("# {name} {s} vs {axis}\n");
            for r in rows.iter().filter(|r| r.strategy == s) {
                block.push_str(&format!("{} {}\n", axis.value(r), fixed(metric(r))));
            }
            blocks.push(block);
        }
    }
    blocks.join("\n\n")
}
