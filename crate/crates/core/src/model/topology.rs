use std::collections::{BTreeMap, BTreeSet};

use super::overlay::ordered;
use super::{
    CorrespondenceEntry, DomainAdvertisement, Endpoint, Expertise, ModelError, OverlayState, Peer,
    PeerId, SspGroup, SspId, SuperPeerId,
};
use crate::semantics::{coverage, expertise_similarity, map_schemas};

pub const DEFAULT_GROUP_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct JoinReport {
    pub sp_id: SuperPeerId,
    pub entries: Vec<CorrespondenceEntry>,
    pub unmapped: bool,
}

/// Picks the home super-peer for an expertise: the best coverage among
/// super-peers with at least one mapping above `eps_acc`, or the best coverage
/// overall when none qualifies. Ties go to the smallest id.
fn choose_super_peer(
    state: &OverlayState,
    expertise: &Expertise,
    eps_acc: f64,
) -> Option<JoinReport> {
    let mut best_mapped: Option<(f64, &SuperPeerId, Vec<CorrespondenceEntry>)> = None;
    let mut best_any: Option<(f64, &SuperPeerId)> = None;
    for (id, sp) in &state.super_peers {
        let score = coverage(expertise, &sp.theme.description);
        if best_any.is_none_or(|(b, _)| score > b) {
            best_any = Some((score, id));
        }
        let entries = map_schemas(expertise, &sp.theme.description, eps_acc);
        if !entries.is_empty() && best_mapped.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best_mapped = Some((score, id, entries));
        }
    }
    match best_mapped {
        Some((_, id, entries)) => Some(JoinReport {
            sp_id: id.clone(),
            entries,
            unmapped: false,
        }),
        None => best_any.map(|(_, id)| JoinReport {
            sp_id: id.clone(),
            entries: Vec::new(),
            unmapped: true,
        }),
    }
}

fn attach(state: &mut OverlayState, ad: DomainAdvertisement, report: &JoinReport) {
    let pid = ad.pid.clone();
    let sp = state
        .super_peers
        .get_mut(&report.sp_id)
        .expect("join target exists");
    sp.member_peers.insert(pid.clone());
    sp.msp_p.insert(pid.clone(), report.entries.clone());
    state.peers.insert(
        pid.clone(),
        Peer::joined(ad, report.sp_id.clone(), report.unmapped),
    );
    state.add_link(
        Endpoint::Peer(pid),
        Endpoint::SuperPeer(report.sp_id.clone()),
    );
}

/// Attaches a new peer to the super-peer whose theme best matches its
/// advertised expertise.
pub fn join_peer(
    state: &mut OverlayState,
    ad: DomainAdvertisement,
) -> Result<JoinReport, ModelError> {
    if state.super_peers.is_empty() {
        return Err(ModelError::NoSuperPeer);
    }
    if state.peers.contains_key(&ad.pid) {
        return Err(ModelError::PeerExists(ad.pid));
    }
    let report =
        choose_super_peer(state, &ad.expertise, ad.eps_acc).ok_or(ModelError::NoSuperPeer)?;
    attach(state, ad, &report);
    Ok(report)
}

/// Rebuilds MSP/SP for every pair of super-peers, together with trust and the
/// super-peer links. Entries are computed once per unordered pair, from the
/// smaller id's theme onto the larger's, and mirrored.
pub fn link_super_peers(state: &mut OverlayState, eps_acc: f64) {
    let ids: Vec<SuperPeerId> = state.super_peers.keys().cloned().collect();
    state
        .links
        .retain(|(a, b)| !matches!((a, b), (Endpoint::SuperPeer(_), Endpoint::SuperPeer(_))));
    state.trust.clear();
    for sp in state.super_peers.values_mut() {
        sp.msp_sp.clear();
    }
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let entries = map_schemas(
                &state.super_peers[a].theme.description,
                &state.super_peers[b].theme.description,
                eps_acc,
            );
            if entries.is_empty() {
                continue;
            }
            let mirrored: Vec<_> = entries.iter().map(CorrespondenceEntry::mirrored).collect();
            state
                .trust
                .insert((a.clone(), b.clone()), entries.len() as u32);
            state
                .super_peers
                .get_mut(a)
                .unwrap()
                .msp_sp
                .insert(b.clone(), entries);
            state
                .super_peers
                .get_mut(b)
                .unwrap()
                .msp_sp
                .insert(a.clone(), mirrored);
            state.add_link(
                Endpoint::SuperPeer(a.clone()),
                Endpoint::SuperPeer(b.clone()),
            );
        }
    }
}

/// Number of correspondence entries between two super-peers.
pub fn trust(state: &OverlayState, a: &SuperPeerId, b: &SuperPeerId) -> Result<u32, ModelError> {
    for id in [a, b] {
        if !state.super_peers.contains_key(id) {
            return Err(ModelError::UnknownSuperPeer(id.clone()));
        }
    }
    Ok(state
        .trust
        .get(&ordered(a.clone(), b.clone()))
        .copied()
        .unwrap_or(0))
}

/// Greedy agglomeration in ascending id order: a super-peer joins the first
/// group whose founding member's theme is at least `threshold` similar,
/// otherwise it founds a new group. Replaces any previous grouping.
pub fn group_super_peers(
    state: &mut OverlayState,
    threshold: f64,
) -> BTreeMap<SspId, BTreeSet<SuperPeerId>> {
    let mut seeds: Vec<(SspId, SuperPeerId)> = Vec::new();
    let mut partition: BTreeMap<SspId, BTreeSet<SuperPeerId>> = BTreeMap::new();
    for (id, sp) in &state.super_peers {
        let home = seeds.iter().find(|(_, seed)| {
            let seed_theme = &state.super_peers[seed].theme.description;
            expertise_similarity(seed_theme, &sp.theme.description) >= threshold
        });
        let ssp = match home {
            Some((ssp, _)) => ssp.clone(),
            None => {
                let ssp = SspId::founded_by(id);
                seeds.push((ssp.clone(), id.clone()));
                ssp
            }
        };
        partition.entry(ssp).or_default().insert(id.clone());
    }

    state
        .links
        .retain(|(a, b)| !matches!(a, Endpoint::Ssp(_)) && !matches!(b, Endpoint::Ssp(_)));
    state.ssp_groups.clear();
    for (ssp, members) in &partition {
        let mut group = SspGroup::new(ssp.clone());
        group.member_sps = members.clone();
        state.ssp_groups.insert(ssp.clone(), group);
        for sp in members {
            state.super_peers.get_mut(sp).unwrap().ssp_id = Some(ssp.clone());
            state.add_link(Endpoint::SuperPeer(sp.clone()), Endpoint::Ssp(ssp.clone()));
        }
    }
    partition
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReattachmentReport {
    pub departed: SuperPeerId,
    /// Trust between the departed super-peer and every survivor, taken before
    /// removal.
    pub trust_to_survivors: BTreeMap<SuperPeerId, u32>,
    pub target: SuperPeerId,
    pub reattached: Vec<(PeerId, JoinReport)>,
    /// Set when the departure emptied its SSP group.
    pub dissolved_group: Option<SspId>,
}

/// Removes a super-peer and moves its peers to the survivor it trusted most
/// (ties to the smallest id), re-mapping each with its original advertisement.
pub fn remove_super_peer(
    state: &mut OverlayState,
    sp: &SuperPeerId,
) -> Result<ReattachmentReport, ModelError> {
    if !state.super_peers.contains_key(sp) {
        return Err(ModelError::UnknownSuperPeer(sp.clone()));
    }
    if state.super_peers.len() == 1 {
        return Err(ModelError::CannotOrphanNetwork(sp.clone()));
    }
    let mut trust_to_survivors = BTreeMap::new();
    let mut target: Option<(u32, SuperPeerId)> = None;
    for other in state.super_peers.keys().filter(|k| *k != sp) {
        let t = trust(state, sp, other)?;
        trust_to_survivors.insert(other.clone(), t);
        if target.as_ref().is_none_or(|(best, _)| t > *best) {
            target = Some((t, other.clone()));
        }
    }
    let (_, target) = target.expect("at least one survivor");

    let departed = state.super_peers.remove(sp).expect("checked above");
    state.remove_links_touching(&Endpoint::SuperPeer(sp.clone()));
    state.trust.retain(|(a, b), _| a != sp && b != sp);
    for other in state.super_peers.values_mut() {
        other.msp_sp.remove(sp);
    }
    let mut dissolved_group = None;
    if let Some(ssp) = &departed.ssp_id {
        if let Some(group) = state.ssp_groups.get_mut(ssp) {
            group.member_sps.remove(sp);
            if group.member_sps.is_empty() {
                state.ssp_groups.remove(ssp);
                state.remove_links_touching(&Endpoint::Ssp(ssp.clone()));
                dissolved_group = Some(ssp.clone());
            }
        }
    }

    let mut reattached = Vec::new();
    for pid in &departed.member_peers {
        let peer = state.peers.remove(pid).expect("member exists");
        state.remove_links_touching(&Endpoint::Peer(pid.clone()));
        let ad = peer.advertisement;
        let entries = map_schemas(
            &ad.expertise,
            &state.super_peers[&target].theme.description,
            ad.eps_acc,
        );
        let report = JoinReport {
            sp_id: target.clone(),
            unmapped: entries.is_empty(),
            entries,
        };
        attach(state, ad, &report);
        reattached.push((pid.clone(), report));
    }

    Ok(ReattachmentReport {
        departed: sp.clone(),
        trust_to_survivors,
        target,
        reattached,
        dissolved_group,
    })
}
