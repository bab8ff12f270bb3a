use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Expertise, ExpertiseTriple, ModelError, PeerId, SspId, SuperPeerId, Theme};
use crate::dtree::DecisionTree;
use crate::routing::LogRecord;

/// `DA = (PID, EXP, T, eps_acc, TTL)`, sent by a peer when it joins.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainAdvertisement {
    pub pid: PeerId,
    pub expertise: Expertise,
    pub topic: String,
    pub eps_acc: f64,
    /// Carried for completeness; nothing in the overlay consumes it.
    pub ttl: u32,
}

impl DomainAdvertisement {
    pub fn new(
        pid: impl Into<PeerId>,
        expertise: Expertise,
        topic: impl Into<String>,
        eps_acc: f64,
        ttl: u32,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&eps_acc) {
            return Err(ModelError::BadThreshold(eps_acc));
        }
        Ok(Self {
            pid: pid.into(),
            expertise,
            topic: topic.into(),
            eps_acc,
            ttl,
        })
    }
}

/// `Map(left) = right` with the similarity that justified it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceEntry {
    pub left: ExpertiseTriple,
    pub right: ExpertiseTriple,
    pub score: f64,
}

impl CorrespondenceEntry {
    pub fn mirrored(&self) -> Self {
        Self {
            left: self.right.clone(),
            right: self.left.clone(),
            score: self.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peer {
    pub peer_id: PeerId,
    pub expertise: Expertise,
    pub home_sp: SuperPeerId,
    /// Kept so the peer can re-join after its super-peer leaves.
    pub advertisement: DomainAdvertisement,
    /// No entity pair cleared the acceptance threshold at join time.
    pub unmapped: bool,
}

impl Peer {
    pub fn joined(
        advertisement: DomainAdvertisement,
        home_sp: SuperPeerId,
        unmapped: bool,
    ) -> Self {
        Self {
            peer_id: advertisement.pid.clone(),
            expertise: advertisement.expertise.clone(),
            home_sp,
            advertisement,
            unmapped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperPeer {
    pub sp_id: SuperPeerId,
    pub theme: Theme,
    pub member_peers: BTreeSet<PeerId>,
    /// MSP/P: one row per member peer.
    pub msp_p: BTreeMap<PeerId, Vec<CorrespondenceEntry>>,
    /// MSP/SP: rows keyed by the neighbouring super-peer, `left` on this side.
    pub msp_sp: BTreeMap<SuperPeerId, Vec<CorrespondenceEntry>>,
    pub ssp_id: Option<SspId>,
}

impl SuperPeer {
    pub fn new(sp_id: SuperPeerId, theme: Theme) -> Self {
        Self {
            sp_id,
            theme,
            member_peers: BTreeSet::new(),
            msp_p: BTreeMap::new(),
            msp_sp: BTreeMap::new(),
            ssp_id: None,
        }
    }

    /// Super-peers this one holds at least one correspondence with.
    pub fn neighbours(&self) -> impl Iterator<Item = &SuperPeerId> {
        self.msp_sp
            .iter()
            .filter(|(_, entries)| !entries.is_empty())
            .map(|(id, _)| id)
    }
}

/// Super-super-peer: a group of similar super-peers plus its log and index.
#[derive(Debug, Clone, PartialEq)]
pub struct SspGroup {
    pub ssp_id: SspId,
    pub member_sps: BTreeSet<SuperPeerId>,
    pub index: Option<DecisionTree>,
    pub log: Vec<LogRecord>,
}

impl SspGroup {
    pub fn new(ssp_id: SspId) -> Self {
        Self {
            ssp_id,
            member_sps: BTreeSet::new(),
            index: None,
            log: Vec::new(),
        }
    }
}

/// One end of an overlay link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Peer(PeerId),
    SuperPeer(SuperPeerId),
    Ssp(SspId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Peer(id) => id.fmt(f),
            Endpoint::SuperPeer(id) => id.fmt(f),
            Endpoint::Ssp(id) => id.fmt(f),
        }
    }
}

/// The whole network. Every collection is ordered so that iteration, and
/// therefore every derived decision, is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlayState {
    pub peers: BTreeMap<PeerId, Peer>,
    pub super_peers: BTreeMap<SuperPeerId, SuperPeer>,
    pub ssp_groups: BTreeMap<SspId, SspGroup>,
    /// K: unordered pairs stored with the smaller endpoint first.
    pub links: BTreeSet<(Endpoint, Endpoint)>,
    /// Symmetric, keyed by the ordered pair; absent means zero.
    pub trust: BTreeMap<(SuperPeerId, SuperPeerId), u32>,
}

pub(crate) fn ordered<T: Ord>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl OverlayState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_super_peer(&mut self, sp_id: SuperPeerId, theme: Theme) -> Result<(), ModelError> {
        if self.super_peers.contains_key(&sp_id) {
            return Err(ModelError::SuperPeerExists(sp_id));
        }
        self.super_peers
            .insert(sp_id.clone(), SuperPeer::new(sp_id, theme));
        Ok(())
    }

    pub fn add_link(&mut self, a: Endpoint, b: Endpoint) {
        self.links.insert(ordered(a, b));
    }

    pub fn remove_links_touching(&mut self, endpoint: &Endpoint) {
        self.links.retain(|(a, b)| a != endpoint && b != endpoint);
    }

    /// The group that owns `sp`.
    pub fn group_of(&self, sp: &SuperPeerId) -> Option<&SspGroup> {
        let ssp = self.super_peers.get(sp)?.ssp_id.as_ref()?;
        self.ssp_groups.get(ssp)
    }

    pub fn group_of_mut(&mut self, sp: &SuperPeerId) -> Option<&mut SspGroup> {
        let ssp = self.super_peers.get(sp)?.ssp_id.clone()?;
        self.ssp_groups.get_mut(&ssp)
    }

    /// Checks every structural invariant; returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (id, peer) in &self.peers {
            let sp = self
                .super_peers
                .get(&peer.home_sp)
                .ok_or_else(|| format!("peer {id} has missing home {}", peer.home_sp))?;
            if !sp.member_peers.contains(id) {
                return Err(format!("{} does not list member {id}", sp.sp_id));
            }
        }
        let mut covered = BTreeSet::new();
        for (ssp, group) in &self.ssp_groups {
            if group.member_sps.is_empty() {
                return Err(format!("group {ssp} is empty"));
            }
            for sp in &group.member_sps {
                if !covered.insert(sp.clone()) {
                    return Err(format!("{sp} belongs to more than one group"));
                }
                match self.super_peers.get(sp) {
                    Some(s) if s.ssp_id.as_ref() == Some(ssp) => {}
                    _ => return Err(format!("{sp} disagrees about its group {ssp}")),
                }
            }
        }
        if !self.ssp_groups.is_empty() && covered.len() != self.super_peers.len() {
            return Err("groups do not cover every super-peer".into());
        }
        for (id, sp) in &self.super_peers {
            for member in &sp.member_peers {
                match self.peers.get(member) {
                    Some(p) if &p.home_sp == id => {}
                    _ => return Err(format!("{id} lists foreign member {member}")),
                }
            }
            if sp.msp_p.len() != sp.member_peers.len()
                || !sp.msp_p.keys().eq(sp.member_peers.iter())
            {
                return Err(format!("{id} has MSP/P rows out of step with members"));
            }
            for (other, entries) in &sp.msp_sp {
                let n = entries.len() as u32;
                let stored = self
                    .trust
                    .get(&ordered(id.clone(), other.clone()))
                    .copied()
                    .unwrap_or(0);
                if n != stored {
                    return Err(format!("trust({id},{other}) = {stored} but {n} entries"));
                }
            }
        }
        for (a, b) in &self.links {
            for e in [a, b] {
                let exists = match e {
                    Endpoint::Peer(p) => self.peers.contains_key(p),
                    Endpoint::SuperPeer(s) => self.super_peers.contains_key(s),
                    Endpoint::Ssp(g) => self.ssp_groups.contains_key(g),
                };
                if !exists {
                    return Err(format!("link {a}-{b} has dangling endpoint {e}"));
                }
            }
        }
        Ok(())
    }
}
