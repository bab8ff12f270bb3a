//! Query routing strategies, their cost counters and log capture.
//!
//! Counters follow one convention throughout: every hop of the query between
//! two distinct entities is one message, every answering peer sends one reply,
//! and screening a peer costs one similarity evaluation per (active query
//! component, expertise triple) pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use thiserror::Error;

use crate::dtree::{Dataset, TreeError, DEFAULT_TOP_P};
use crate::model::{OverlayState, PeerId, SspGroup, SspId, SuperPeerId};
use crate::semantics::{is_relevant, sim, Query, SemanticsError};

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("peer {0} has not joined")]
    UnknownPeer(PeerId),
    #[error("the group of {0} has no routing index")]
    IndexNotBuilt(SuperPeerId),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("log file: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Baseline,
    Dk,
    DkBis,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Baseline, Strategy::Dk, Strategy::DkBis];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Dk => "dk",
            Strategy::DkBis => "dk_bis",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

/// Tunables shared by all strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutingParams {
    /// Mapping threshold used when checking a neighbour's theme.
    pub eps_acc: f64,
    /// Share of query components a peer must hold to answer.
    pub fraction: f64,
    /// Probability cut-off for index candidates.
    pub top_p: f64,
    /// Super-peer hops the baseline may travel from the origin.
    pub hop_limit: u32,
}

impl Default for RoutingParams {
    fn default() -> Self {
        Self {
            eps_acc: 0.5,
            fraction: 0.5,
            top_p: DEFAULT_TOP_P,
            hop_limit: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingOutcome {
    pub query_id: String,
    pub strategy: Strategy,
    pub answering_peers: BTreeSet<PeerId>,
    pub messages: u64,
    pub sim_evaluations: u64,
    pub tree_node_visits: u64,
    pub used_fallback: bool,
}

impl RoutingOutcome {
    fn empty(q: &Query, strategy: Strategy) -> Self {
        Self {
            query_id: q.query_id.clone(),
            strategy,
            answering_peers: BTreeSet::new(),
            messages: 0,
            sim_evaluations: 0,
            tree_node_visits: 0,
            used_fallback: false,
        }
    }

    /// Messages plus similarity evaluations.
    pub fn cost(&self) -> u64 {
        self.messages + self.sim_evaluations
    }
}

/// One training row: the query and who answered it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub peer_id: PeerId,
    pub sp_id: SuperPeerId,
    pub components: Vec<String>,
    /// Responding SP id inside the origin group, the responder's SSP id outside.
    pub responder: String,
}

fn origin_sp(state: &OverlayState, q: &Query) -> Result<SuperPeerId, RoutingError> {
    state
        .peers
        .get(&q.origin_peer)
        .filter(|p| state.super_peers.contains_key(&p.home_sp))
        .map(|p| p.home_sp.clone())
        .ok_or_else(|| RoutingError::UnknownPeer(q.origin_peer.clone()))
}

/// Screens every member of `sp`, adding relevant peers to `out`.
fn screen(
    state: &OverlayState,
    sp: &SuperPeerId,
    q: &Query,
    fraction: f64,
    out: &mut RoutingOutcome,
) -> Result<(), RoutingError> {
    let Some(super_peer) = state.super_peers.get(sp) else {
        return Ok(());
    };
    let active = q.active_components().count() as u64;
    for pid in &super_peer.member_peers {
        let peer = &state.peers[pid];
        out.sim_evaluations += active * peer.expertise.len() as u64;
        if is_relevant(&peer.expertise, q, fraction)? {
            out.answering_peers.insert(pid.clone());
        }
    }
    Ok(())
}

/// Floods the origin domain, then every super-peer within `hop_limit` hops
/// whose theme maps at least one query component above `eps_acc`.
pub fn route_baseline(
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
) -> Result<RoutingOutcome, RoutingError> {
    let origin = origin_sp(state, q)?;
    let mut out = RoutingOutcome::empty(q, Strategy::Baseline);
    out.messages = 1;
    screen(state, &origin, q, params.fraction, &mut out)?;

    let triples = q.triples();
    let mut visited: BTreeSet<SuperPeerId> = BTreeSet::from([origin.clone()]);
    let mut frontier = vec![origin];
    for _ in 0..params.hop_limit {
        let mut next = Vec::new();
        for sp in &frontier {
            for neighbour in state.super_peers[sp].neighbours() {
                if !visited.insert(neighbour.clone()) {
                    continue;
                }
                let theme = &state.super_peers[neighbour].theme.description;
                out.sim_evaluations += (triples.len() * theme.len()) as u64;
                let mapped = triples
                    .iter()
                    .any(|c| theme.iter().any(|t| sim(c, t).value() > params.eps_acc));
                if mapped {
                    out.messages += 1;
                    screen(state, neighbour, q, params.fraction, &mut out)?;
                    next.push(neighbour.clone());
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    out.messages += out.answering_peers.len() as u64;
    Ok(out)
}

/// Result of the index path: the outcome so far and whether the index named
/// any candidate.
fn route_by_index(
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
    strategy: Strategy,
) -> Result<(RoutingOutcome, bool), RoutingError> {
    let origin = origin_sp(state, q)?;
    let group = state
        .group_of(&origin)
        .ok_or_else(|| RoutingError::IndexNotBuilt(origin.clone()))?;
    let tree = group
        .index
        .as_ref()
        .ok_or_else(|| RoutingError::IndexNotBuilt(origin.clone()))?;
    let mut out = RoutingOutcome::empty(q, strategy);
    // peer → SP, SP → SSP
    out.messages = 2;
    let (prediction, visits) = tree.predict_values(&q.components)?;
    out.tree_node_visits = visits as u64;

    let mut any = false;
    for class in prediction.candidates(params.top_p) {
        let as_sp = SuperPeerId::from(class);
        if group.member_sps.contains(&as_sp) {
            any = true;
            if as_sp != origin {
                out.messages += 1;
            }
            screen(state, &as_sp, q, params.fraction, &mut out)?;
            continue;
        }
        let as_ssp = SspId::from(class);
        if as_ssp == group.ssp_id {
            continue;
        }
        if let Some(foreign) = state.ssp_groups.get(&as_ssp) {
            any = true;
            out.messages += 1 + foreign.member_sps.len() as u64;
            for sp in &foreign.member_sps {
                screen(state, sp, q, params.fraction, &mut out)?;
            }
        }
    }
    Ok((out, any))
}

/// Routes through the origin group's index only.
pub fn route_dk_bis(
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
) -> Result<RoutingOutcome, RoutingError> {
    let (mut out, _) = route_by_index(state, q, params, Strategy::DkBis)?;
    out.messages += out.answering_peers.len() as u64;
    Ok(out)
}

/// Routes through the index; when it names no candidate or finds nobody, the
/// SSP hands the query back and the baseline runs as well.
pub fn route_dk(
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
) -> Result<RoutingOutcome, RoutingError> {
    let (mut out, any) = route_by_index(state, q, params, Strategy::Dk)?;
    if any && !out.answering_peers.is_empty() {
        out.messages += out.answering_peers.len() as u64;
        return Ok(out);
    }
    let fallback = route_baseline(state, q, params)?;
    out.used_fallback = true;
    out.messages += 1 + fallback.messages;
    out.sim_evaluations += fallback.sim_evaluations;
    out.answering_peers.extend(fallback.answering_peers);
    Ok(out)
}

pub fn route(
    strategy: Strategy,
    state: &OverlayState,
    q: &Query,
    params: &RoutingParams,
) -> Result<RoutingOutcome, RoutingError> {
    match strategy {
        Strategy::Baseline => route_baseline(state, q, params),
        Strategy::Dk => route_dk(state, q, params),
        Strategy::DkBis => route_dk_bis(state, q, params),
    }
}

/// How a responder under `sp` is named in a group's log.
pub fn responder_label(state: &OverlayState, group: &SspGroup, sp: &SuperPeerId) -> String {
    if group.member_sps.contains(sp) {
        return sp.to_string();
    }
    match state.super_peers.get(sp).and_then(|s| s.ssp_id.as_ref()) {
        Some(ssp) => ssp.to_string(),
        None => sp.to_string(),
    }
}

/// Log rows for an outcome: one per distinct home super-peer among the
/// answering peers, in ascending super-peer order.
pub fn log_records(
    state: &OverlayState,
    group: &SspGroup,
    q: &Query,
    outcome: &RoutingOutcome,
) -> Vec<LogRecord> {
    let homes: BTreeSet<&SuperPeerId> = outcome
        .answering_peers
        .iter()
        .filter_map(|p| state.peers.get(p))
        .map(|p| &p.home_sp)
        .collect();
    homes
        .into_iter()
        .map(|sp| LogRecord {
            peer_id: q.origin_peer.clone(),
            sp_id: q.origin_sp.clone(),
            components: q.components.clone(),
            responder: responder_label(state, group, sp),
        })
        .collect()
}

/// Appends the outcome's rows to the log of the group `ssp`; returns how many
/// were added.
pub fn append_log(
    state: &mut OverlayState,
    ssp: &SspId,
    q: &Query,
    outcome: &RoutingOutcome,
) -> usize {
    let Some(group) = state.ssp_groups.get(ssp) else {
        return 0;
    };
    let records = log_records(state, group, q, outcome);
    let n = records.len();
    state
        .ssp_groups
        .get_mut(ssp)
        .expect("looked up above")
        .log
        .extend(records);
    n
}

/// Training view of a log.
pub fn dataset_from_log(records: &[LogRecord], k: usize) -> Result<Dataset, TreeError> {
    let mut data = Dataset::with_arity(k);
    for r in records {
        data.push(r.components.clone(), r.responder.clone())?;
    }
    Ok(data)
}

fn csv_error(e: csv::Error) -> RoutingError {
    RoutingError::Log(e.to_string())
}

/// Writes `peer,sp,comp1..compK,responder` rows.
pub fn write_log_csv<W: io::Write>(
    writer: W,
    records: &[LogRecord],
    k: usize,
) -> Result<(), RoutingError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["peer".to_owned(), "sp".to_owned()];
    header.extend((1..=k).map(|i| format!("comp{i}")));
    header.push("responder".to_owned());
    w.write_record(&header).map_err(csv_error)?;
    for r in records {
        if r.components.len() != k {
            return Err(RoutingError::Log(format!(
                "record for {} has {} components, expected {k}",
                r.peer_id,
                r.components.len()
            )));
        }
        let mut row = vec![r.peer_id.as_str(), r.sp_id.as_str()];
        row.extend(r.components.iter().map(String::as_str));
        row.push(&r.responder);
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| RoutingError::Log(e.to_string()))
}

/// Reads a log written by [`write_log_csv`]; returns the records and K.
pub fn read_log_csv<R: io::Read>(reader: R) -> Result<(Vec<LogRecord>, usize), RoutingError> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_error)?.clone();
    let n = header.len();
    let well_formed = n >= 3
        && &header[0] == "peer"
        && &header[1] == "sp"
        && &header[n - 1] == "responder"
        && (2..n - 1).all(|i| header[i] == format!("comp{}", i - 1));
    if !well_formed {
        return Err(RoutingError::Log(
            "header must be peer,sp,comp1..compK,responder".into(),
        ));
    }
    let k = n - 3;
    let mut records = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_error)?;
        records.push(LogRecord {
            peer_id: row[0].into(),
            sp_id: row[1].into(),
            components: (2..n - 1).map(|i| row[i].to_owned()).collect(),
            responder: row[n - 1].to_owned(),
        });
    }
    Ok((records, k))
}

/// Per-strategy totals over a batch of outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Totals {
    pub queries: u64,
    pub answers: u64,
    pub messages: u64,
    pub sim_evaluations: u64,
    pub tree_node_visits: u64,
    pub fallbacks: u64,
}

impl Totals {
    pub fn add(&mut self, o: &RoutingOutcome) {
        self.queries += 1;
        self.answers += o.answering_peers.len() as u64;
        self.messages += o.messages;
        self.sim_evaluations += o.sim_evaluations;
        self.tree_node_visits += o.tree_node_visits;
        self.fallbacks += o.used_fallback as u64;
    }

    pub fn cost(&self) -> u64 {
        self.messages + self.sim_evaluations
    }
}

pub fn totals<'a>(
    outcomes: impl IntoIterator<Item = &'a RoutingOutcome>,
) -> BTreeMap<Strategy, Totals> {
    let mut out = BTreeMap::new();
    for o in outcomes {
        out.entry(o.strategy).or_insert_with(Totals::default).add(o);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtree::{induce, Dataset};
    use crate::model::{
        group_super_peers, join_peer, link_super_peers, DomainAdvertisement, Expertise, Theme,
    };

    fn exp(list: &str) -> Expertise {
        Expertise::parse_list(list).unwrap()
    }

    /// SP0 and SP1 share a vocabulary and are linked; SP2 is unrelated.
    fn fixture() -> OverlayState {
        let mut s = OverlayState::new();
        for (id, list) in [
            (
                "SP0",
                "IsA(Doctor;Employee);treats(Doctor;Patient);owns(Ward;Bed)",
            ),
            (
                "SP1",
                "IsA(Doctor;Employee);treats(Doctor;Patient);orders(Nurse;Drug)",
            ),
            ("SP2", "sells(Shop;Product);IsA(Customer;Person)"),
        ] {
            s.add_super_peer(id.into(), Theme::new(id, exp(list)))
                .unwrap();
        }
        link_super_peers(&mut s, 0.5);
        group_super_peers(&mut s, 0.99);
        for (pid, list) in [
            ("P0", "owns(Ward;Bed);IsA(Ward;Room)"),
            ("P1", "orders(Nurse;Drug);treats(Doctor;Patient)"),
            ("P2", "sells(Shop;Product)"),
        ] {
            join_peer(
                &mut s,
                DomainAdvertisement::new(pid, exp(list), "T", 0.5, 0).unwrap(),
            )
            .unwrap();
        }
        s
    }

    fn query(origin: &str, sp: &str, comps: &[&str]) -> Query {
        let mut components: Vec<String> = comps.iter().map(|c| c.to_string()).collect();
        components.resize(4, "none".into());
        Query {
            query_id: "Q0".into(),
            origin_peer: origin.into(),
            origin_sp: sp.into(),
            components,
        }
    }

    #[test]
    fn local_only_answer() {
        let s = fixture();
        let q = query("P0", "SP0", &["IsA(Ward;Room)"]);
        let o = route_baseline(&s, &q, &RoutingParams::default()).unwrap();
        assert_eq!(o.answering_peers, BTreeSet::from(["P0".into()]));
        // no neighbour theme maps IsA(Ward;Room) above 0.5
        assert_eq!(o.messages, 2);
    }

    #[test]
    fn remote_answer_costs_a_forward() {
        let s = fixture();
        let q = query(
            "P0",
            "SP0",
            &["orders(Nurse;Drug)", "treats(Doctor;Patient)"],
        );
        let o = route_baseline(&s, &q, &RoutingParams::default()).unwrap();
        assert_eq!(o.answering_peers, BTreeSet::from(["P1".into()]));
        // peer → SP0, SP0 → SP1, one reply
        assert_eq!(o.messages, 3);
        // P0 screened (2 comps × 2 triples), SP1 theme checked (2 × 3), P1 screened (2 × 2)
        assert_eq!(o.sim_evaluations, 4 + 6 + 4);
    }

    #[test]
    fn unknown_origin() {
        let s = fixture();
        let q = query("P9", "SP0", &["IsA(Ward;Room)"]);
        assert!(matches!(
            route_baseline(&s, &q, &RoutingParams::default()),
            Err(RoutingError::UnknownPeer(_))
        ));
        assert!(matches!(
            route_dk_bis(
                &s,
                &query("P0", "SP0", &["IsA(Ward;Room)"]),
                &RoutingParams::default()
            ),
            Err(RoutingError::IndexNotBuilt(_))
        ));
    }

    fn with_index(mut s: OverlayState, class: &str) -> OverlayState {
        let mut d = Dataset::with_arity(4);
        d.push(vec!["x".into(); 4], class).unwrap();
        let tree = induce(&d, 1).unwrap();
        for g in s.ssp_groups.values_mut() {
            g.index = Some(tree.clone());
        }
        s
    }

    #[test]
    fn index_naming_origin_costs_two_messages_plus_replies() {
        let s = with_index(fixture(), "SP0");
        let q = query("P0", "SP0", &["IsA(Ward;Room)"]);
        let o = route_dk_bis(&s, &q, &RoutingParams::default()).unwrap();
        assert_eq!(o.answering_peers, BTreeSet::from(["P0".into()]));
        assert_eq!(o.messages, 3);
        assert_eq!(o.tree_node_visits, 1);
        assert!(!o.used_fallback);
    }

    #[test]
    fn foreign_ssp_without_answers() {
        let s = with_index(fixture(), "SSP2");
        let q = query("P0", "SP0", &["IsA(Ward;Room)"]);
        let bis = route_dk_bis(&s, &q, &RoutingParams::default()).unwrap();
        assert!(bis.answering_peers.is_empty());
        // peer → SP, SP → SSP, SSP0 → SSP2, SSP2 → SP2
        assert_eq!(bis.messages, 4);
        let dk = route_dk(&s, &q, &RoutingParams::default()).unwrap();
        assert!(dk.used_fallback);
        let base = route_baseline(&s, &q, &RoutingParams::default()).unwrap();
        assert_eq!(dk.answering_peers, base.answering_peers);
        assert_eq!(dk.messages, bis.messages + 1 + base.messages);
    }

    #[test]
    fn log_labels_by_membership() {
        let mut s = fixture();
        // one group for SP0 and SP1, SP2 alone
        group_super_peers(&mut s, 0.3);
        let ssp = s.super_peers[&SuperPeerId::from("SP0")]
            .ssp_id
            .clone()
            .unwrap();
        let q = query("P0", "SP0", &["IsA(Ward;Room)"]);
        let outcome = RoutingOutcome {
            answering_peers: ["P0", "P1", "P2"].into_iter().map(PeerId::from).collect(),
            ..RoutingOutcome::empty(&q, Strategy::Baseline)
        };
        assert_eq!(append_log(&mut s, &ssp, &q, &outcome), 3);
        let labels: Vec<_> = s.ssp_groups[&ssp]
            .log
            .iter()
            .map(|r| r.responder.as_str())
            .collect();
        assert_eq!(labels, ["SP0", "SP1", "SSP2"]);
        let none = RoutingOutcome::empty(&q, Strategy::Baseline);
        assert_eq!(append_log(&mut s, &ssp, &q, &none), 0);
    }

    #[test]
    fn csv_round_trip_with_quotes() {
        let records = vec![LogRecord {
            peer_id: "P0".into(),
            sp_id: "SP0".into(),
            components: vec!["a\"b".into(), "x,y".into()],
            responder: "SP1".into(),
        }];
        let mut buf = Vec::new();
        write_log_csv(&mut buf, &records, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "peer,sp,comp1,comp2,responder\nP0,SP0,\"a\"\"b\",\"x,y\",SP1\n"
        );
        let (back, k) = read_log_csv(buf.as_slice()).unwrap();
        assert_eq!((back, k), (records, 2));
        assert!(read_log_csv("a,b\n".as_bytes()).is_err());
    }
}
