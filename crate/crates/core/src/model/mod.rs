//! Overlay data model: peers, super-peers, SSP groups, links and trust, plus
//! the procedures that build and mutate the topology.

mod ids;
mod overlay;
mod snapshot;
mod topology;
mod triple;

use thiserror::Error;

pub(crate) use ids::padded;
pub use ids::{PeerId, SspId, SuperPeerId};
pub use overlay::{
    CorrespondenceEntry, DomainAdvertisement, Endpoint, OverlayState, Peer, SspGroup, SuperPeer,
};
pub use snapshot::export_snapshot;
pub use topology::{
    group_super_peers, join_peer, link_super_peers, remove_super_peer, trust, JoinReport,
    ReattachmentReport, DEFAULT_GROUP_THRESHOLD,
};
pub use triple::{Expertise, ExpertiseTriple, Theme, ISA};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("expertise must contain at least one triple")]
    EmptyExpertise,
    #[error("acceptance threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error("no super-peer in the network")]
    NoSuperPeer,
    #[error("peer {0} already exists")]
    PeerExists(PeerId),
    #[error("super-peer {0} already exists")]
    SuperPeerExists(SuperPeerId),
    #[error("unknown super-peer {0}")]
    UnknownSuperPeer(SuperPeerId),
    #[error("removing {0} would leave the network without super-peers")]
    CannotOrphanNetwork(SuperPeerId),
}
