//! Discrete-event engine that drives a scenario through its phases: network
//! construction, warm-up under the baseline with logging, index induction,
//! and paired measurement of all three strategies with optional churn.

mod event;
mod generate;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use event::{Event, EventKind, EventQueue, Phase};
pub use generate::{
    generate_network, vocabulary_capacity, words_per_family, NetworkPlan, Vocabulary,
    CONCEPTS_PER_FAMILY, ROLES_PER_FAMILY,
};

use crate::dtree::{evaluate, induce, AccuracyReport, DecisionTree, TreeError};
use crate::model::{
    join_peer, remove_super_peer, ModelError, OverlayState, ReattachmentReport, SspId,
};
use crate::routing::{
    append_log, dataset_from_log, route, route_baseline, totals, LogRecord, RoutingError,
    RoutingOutcome, RoutingParams, Strategy, Totals,
};
use crate::semantics::{generate_query, Query, SemanticsError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{requested} super-peers requested but the vocabulary supports {capacity}")]
    VocabularyExhausted { requested: usize, capacity: usize },
    #[error("no group logged any query during warm-up")]
    NoTrainingData,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Every tunable of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_peers: usize,
    pub n_super_peers: usize,
    pub k_components: usize,
    pub eps_acc: f64,
    pub group_threshold: f64,
    pub relevance_fraction: f64,
    pub top_p: f64,
    /// Queries each peer submits over the whole run (N).
    pub queries_per_peer: usize,
    pub warmup_fraction: f64,
    pub churn_events: usize,
    pub hop_limit: u32,
    pub min_rows: usize,
    /// Share of each group log used for training when scoring the classifier.
    pub train_fraction: f64,
    /// Rebuild indices after every departure, dropping rows that name the
    /// departed super-peer.
    pub reinduce_after_churn: bool,
    pub ttl: u32,
    // Network generator.
    pub family_size: usize,
    pub theme_size: usize,
    pub unique_triples: usize,
    pub decorate_prob: f64,
    pub drop_prob: f64,
    pub rename_prob: f64,
    pub add_prob: f64,
    pub min_peer_triples: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_peers: 300,
            n_super_peers: 10,
            k_components: 4,
            eps_acc: 0.5,
            group_threshold: 0.6,
            relevance_fraction: 0.5,
            top_p: 0.1,
            queries_per_peer: 20,
            warmup_fraction: 0.5,
            churn_events: 0,
            hop_limit: 1,
            min_rows: 1,
            train_fraction: 0.7,
            reinduce_after_churn: false,
            ttl: 7,
            family_size: 3,
            theme_size: 10,
            unique_triples: 1,
            decorate_prob: 0.85,
            drop_prob: 0.3,
            rename_prob: 0.05,
            add_prob: 0.15,
            min_peer_triples: 2,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        for (name, v) in [
            ("n_peers", self.n_peers),
            ("n_super_peers", self.n_super_peers),
            ("k_components", self.k_components),
            ("queries_per_peer", self.queries_per_peer),
            ("min_rows", self.min_rows),
            ("family_size", self.family_size),
            ("theme_size", self.theme_size),
            ("min_peer_triples", self.min_peer_triples),
            ("hop_limit", self.hop_limit as usize),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        for (name, v) in [
            ("group_threshold", self.group_threshold),
            ("relevance_fraction", self.relevance_fraction),
            ("top_p", self.top_p),
            ("warmup_fraction", self.warmup_fraction),
            ("train_fraction", self.train_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} = {v} must lie in (0, 1]"));
            }
        }
        for (name, v) in [
            ("eps_acc", self.eps_acc),
            ("decorate_prob", self.decorate_prob),
            ("drop_prob", self.drop_prob),
            ("rename_prob", self.rename_prob),
            ("add_prob", self.add_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} must lie in [0, 1]"));
            }
        }
        if self.churn_events >= self.n_super_peers {
            return bad(format!(
                "churn_events = {} must be below n_super_peers = {}",
                self.churn_events, self.n_super_peers
            ));
        }
        Ok(())
    }

    pub fn routing_params(&self) -> RoutingParams {
        RoutingParams {
            eps_acc: self.eps_acc,
            fraction: self.relevance_fraction,
            top_p: self.top_p,
            hop_limit: self.hop_limit,
        }
    }

    pub fn total_queries(&self) -> usize {
        self.n_peers * self.queries_per_peer
    }

    pub fn warmup_queries(&self) -> usize {
        ((self.total_queries() as f64) * self.warmup_fraction).ceil() as usize
    }

    /// Independent random stream for one concern of the run.
    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Network = 1,
    Schedule = 2,
    Queries = 3,
    Churn = 4,
}

/// One measured query with its three paired outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredQuery {
    pub time: u64,
    pub query: Query,
    pub baseline: RoutingOutcome,
    pub dk: RoutingOutcome,
    pub dk_bis: RoutingOutcome,
}

impl MeasuredQuery {
    pub fn outcome(&self, strategy: Strategy) -> &RoutingOutcome {
        match strategy {
            Strategy::Baseline => &self.baseline,
            Strategy::Dk => &self.dk,
            Strategy::DkBis => &self.dk_bis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChurnEvent {
    pub time: u64,
    /// Overlay just before the departure.
    pub before: OverlayState,
    pub report: ReattachmentReport,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub warmup_queries: usize,
    pub logged_records: usize,
    pub measured: Vec<MeasuredQuery>,
    pub logs: BTreeMap<SspId, Vec<LogRecord>>,
    pub trees: BTreeMap<SspId, DecisionTree>,
    /// Held-out score of trees trained on the first part of each log.
    pub classifier: Option<AccuracyReport>,
    pub churn: Vec<ChurnEvent>,
    pub final_state: OverlayState,
    pub wall_clock: BTreeMap<Strategy, Duration>,
}

impl ScenarioReport {
    pub fn totals(&self) -> BTreeMap<Strategy, Totals> {
        let mut t = totals(
            self.measured
                .iter()
                .flat_map(|m| [&m.baseline, &m.dk, &m.dk_bis]),
        );
        for s in Strategy::ALL {
            t.entry(s).or_default();
        }
        t
    }

    pub fn outcomes(&self, strategy: Strategy) -> impl Iterator<Item = &RoutingOutcome> {
        self.measured.iter().map(move |m| m.outcome(strategy))
    }
}

/// Routes `q` with `strategy`. A group without an index cannot serve the
/// index strategies: `dk` pays the round trip to the SSP and falls back to
/// the baseline, `dk_bis` reaches the SSP and returns nothing.
fn route_measured(
    strategy: Strategy,
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
) -> Result<RoutingOutcome, RoutingError> {
    match route(strategy, state, q, params) {
        Err(RoutingError::IndexNotBuilt(_)) if strategy == Strategy::Dk => {
            let base = route_baseline(state, q, params)?;
            Ok(RoutingOutcome {
                strategy,
                messages: 3 + base.messages,
                used_fallback: true,
                ..base
            })
        }
        Err(RoutingError::IndexNotBuilt(_)) if strategy == Strategy::DkBis => Ok(RoutingOutcome {
            query_id: q.query_id.clone(),
            strategy,
            answering_peers: Default::default(),
            messages: 2,
            sim_evaluations: 0,
            tree_node_visits: 0,
            used_fallback: false,
        }),
        other => other,
    }
}

/// Held-out accuracy with each group's log split chronologically; the
/// per-group reports are merged weighted by held-out rows.
pub fn classifier_accuracy(
    logs: &BTreeMap<SspId, Vec<LogRecord>>,
    cfg: &ScenarioConfig,
) -> Result<Option<AccuracyReport>, TreeError> {
    let (mut rows, mut top1, mut hit, mut cands) = (0usize, 0.0, 0.0, 0.0);
    for log in logs.values() {
        let data = dataset_from_log(log, cfg.k_components)?;
        let (train, test) = data.split_at_fraction(cfg.train_fraction);
        if train.is_empty() || test.is_empty() {
            continue;
        }
        let tree = induce(&train, cfg.min_rows)?;
        let r = evaluate(&tree, &test, cfg.top_p)?;
        let w = r.rows as f64;
        rows += r.rows;
        top1 += r.top1_accuracy * w;
        hit += r.hit_rate * w;
        cands += r.mean_candidates * w;
    }
    if rows == 0 {
        return Ok(None);
    }
    let n = rows as f64;
    Ok(Some(AccuracyReport {
        rows,
        top1_accuracy: top1 / n,
        hit_rate: hit / n,
        mean_candidates: cands / n,
    }))
}

fn induce_group(
    state: &mut OverlayState,
    ssp: &SspId,
    cfg: &ScenarioConfig,
) -> Result<(), SimError> {
    let Some(group) = state.ssp_groups.get_mut(ssp) else {
        return Ok(());
    };
    group.index = if group.log.is_empty() {
        None
    } else {
        let data = dataset_from_log(&group.log, cfg.k_components)?;
        Some(induce(&data, cfg.min_rows)?)
    };
    Ok(())
}

/// Runs every phase of a scenario on the event queue.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport, SimError> {
    cfg.validate()?;
    let params = cfg.routing_params();
    let plan = NetworkPlan::new(cfg, &mut cfg.rng(Stream::Network))?;
    let mut state = plan.skeleton(cfg)?;
    let mut queue = EventQueue::new();

    for ad in plan.advertisements {
        queue.schedule(0, EventKind::PeerJoin(Box::new(ad)));
    }
    queue.schedule(0, EventKind::PhaseMarker(Phase::Overlay));

    // Each peer submits N queries; submission order is a seeded shuffle.
    let mut submissions: Vec<usize> = (0..cfg.n_peers)
        .flat_map(|p| std::iter::repeat_n(p, cfg.queries_per_peer))
        .collect();
    submissions.shuffle(&mut cfg.rng(Stream::Schedule));
    let total = submissions.len();
    let warmup = cfg.warmup_queries().min(total);
    let measured_count = total - warmup;

    // Ticks: joins at 0, warm-up queries from 1, then induction, then the
    // measurement phase. Each query occupies one tick.
    let warmup_start = 1;
    let induce_at = warmup_start + warmup as u64;
    let measure_start = induce_at + 1;
    queue.schedule(warmup_start, EventKind::PhaseMarker(Phase::WarmupStart));
    let peer_ids: Vec<_> = (0..cfg.n_peers)
        .map(|p| crate::model::PeerId::new(crate::model::padded("P", p, cfg.n_peers)))
        .collect();
    for (i, &p) in submissions.iter().enumerate() {
        let time = if i < warmup {
            warmup_start + i as u64
        } else {
            measure_start + (i - warmup) as u64
        };
        if i == warmup {
            queue.schedule(induce_at, EventKind::PhaseMarker(Phase::WarmupEnd));
            queue.schedule(
                measure_start,
                EventKind::PhaseMarker(Phase::MeasurementStart),
            );
        }
        queue.schedule(
            time,
            EventKind::QuerySubmit {
                peer: peer_ids[p].clone(),
                ordinal: i,
            },
        );
    }
    if warmup == total {
        queue.schedule(induce_at, EventKind::PhaseMarker(Phase::WarmupEnd));
    }
    // Departures are spread evenly through the measurement phase and fire
    // before the query sharing their tick.
    let mut pending_leaves: Vec<u64> = (1..=cfg.churn_events)
        .map(|j| measure_start + (j * measured_count / (cfg.churn_events + 1)) as u64)
        .collect();
    pending_leaves.reverse();
    queue.schedule(
        measure_start + measured_count as u64,
        EventKind::PhaseMarker(Phase::End),
    );

    let mut query_rng = cfg.rng(Stream::Queries);
    let mut churn_rng = cfg.rng(Stream::Churn);
    let mut report = ScenarioReport {
        config: cfg.clone(),
        warmup_queries: 0,
        logged_records: 0,
        measured: Vec::with_capacity(measured_count),
        logs: BTreeMap::new(),
        trees: BTreeMap::new(),
        classifier: None,
        churn: Vec::new(),
        final_state: OverlayState::new(),
        wall_clock: Strategy::ALL
            .into_iter()
            .map(|s| (s, Duration::ZERO))
            .collect(),
    };
    let mut measuring = false;

    while let Some(ev) = queue.pop() {
        match ev.kind {
            EventKind::PeerJoin(ad) => {
                join_peer(&mut state, *ad)?;
            }
            EventKind::PhaseMarker(Phase::WarmupEnd) => {
                let groups: Vec<SspId> = state.ssp_groups.keys().cloned().collect();
                if groups.iter().all(|g| state.ssp_groups[g].log.is_empty()) {
                    return Err(SimError::NoTrainingData);
                }
                report.classifier = classifier_accuracy(
                    &state
                        .ssp_groups
                        .iter()
                        .map(|(id, g)| (id.clone(), g.log.clone()))
                        .collect(),
                    cfg,
                )?;
                for g in groups {
                    queue.schedule(ev.time, EventKind::InduceIndex(g));
                }
            }
            EventKind::InduceIndex(ssp) => induce_group(&mut state, &ssp, cfg)?,
            EventKind::PhaseMarker(Phase::MeasurementStart) => measuring = true,
            EventKind::PhaseMarker(_) => {}
            EventKind::SpLeave => {
                let victim = state
                    .super_peers
                    .keys()
                    .choose(&mut churn_rng)
                    .cloned()
                    .expect("validated churn count leaves survivors");
                let before = state.clone();
                let r = remove_super_peer(&mut state, &victim)?;
                if cfg.reinduce_after_churn {
                    let gone = [
                        Some(victim.to_string()),
                        r.dissolved_group.as_ref().map(|g| g.to_string()),
                    ];
                    let groups: Vec<SspId> = state.ssp_groups.keys().cloned().collect();
                    for g in groups {
                        state
                            .ssp_groups
                            .get_mut(&g)
                            .unwrap()
                            .log
                            .retain(|rec| !gone.iter().flatten().any(|x| *x == rec.responder));
                        induce_group(&mut state, &g, cfg)?;
                    }
                }
                report.churn.push(ChurnEvent {
                    time: ev.time,
                    before,
                    report: r,
                });
            }
            EventKind::QuerySubmit { peer, ordinal } => {
                if measuring && pending_leaves.last() == Some(&ev.time) {
                    pending_leaves.pop();
                    // Re-queue the query behind the departure at the same tick.
                    queue.schedule(ev.time, EventKind::SpLeave);
                    queue.schedule(ev.time, EventKind::QuerySubmit { peer, ordinal });
                    continue;
                }
                let q = generate_query(
                    &state.peers[&peer],
                    cfg.k_components,
                    &mut query_rng,
                    format!("Q{ordinal:06}"),
                )?;
                if !measuring {
                    let outcome = route_baseline(&state, &q, &params)?;
                    let ssp = state.super_peers[&q.origin_sp].ssp_id.clone();
                    if let Some(ssp) = ssp {
                        report.logged_records += append_log(&mut state, &ssp, &q, &outcome);
                    }
                    report.warmup_queries += 1;
                    continue;
                }
                let mut run = |s: Strategy| -> Result<RoutingOutcome, RoutingError> {
                    let start = Instant::now();
                    let o = route_measured(s, &state, &q, &params);
                    *report.wall_clock.get_mut(&s).unwrap() += start.elapsed();
                    o
                };
                let baseline = run(Strategy::Baseline)?;
                let dk = run(Strategy::Dk)?;
                let dk_bis = run(Strategy::DkBis)?;
                report.measured.push(MeasuredQuery {
                    time: ev.time,
                    query: q,
                    baseline,
                    dk,
                    dk_bis,
                });
            }
        }
    }

    for (id, group) in &state.ssp_groups {
        report.logs.insert(id.clone(), group.log.clone());
        if let Some(tree) = &group.index {
            report.trees.insert(id.clone(), tree.clone());
        }
    }
    report.final_state = state;
    Ok(report)
}
