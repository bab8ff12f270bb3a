//! Deterministic simulator of a hybrid super-peer overlay.
//!
//! Peers publish their schema as a set of relation triples and attach to the
//! super-peer whose theme matches best. Super-peers with similar themes are
//! grouped under a super-super-peer (SSP) that logs routed queries and learns
//! a categorical decision tree mapping query components to responders. The
//! simulator compares three routing strategies on message cost, similarity
//! evaluations and answer precision:
//!
//! * `baseline` – two-level mapping search over the origin domain and its
//!   semantically linked neighbours,
//! * `dk` – index-driven routing through the SSP with baseline fallback,
//! * `dk_bis` – index-only routing, no fallback.
//!
//! Module map:
//!
//! * [`model`] – overlay data model, join protocol, SSP grouping, trust, churn.
//! * [`semantics`] – similarity, schema mapping, relevance, query generation.
//! * [`dtree`] – gain-ratio tree induction, prediction, text rendering.
//! * [`routing`] – the three strategies and log capture.
//! * [`simkernel`] – event queue, network generation, scenario phases.
//! * [`harness`] – configuration files, metrics, sweeps, CSV output.

pub mod dtree;
pub mod harness;
pub mod model;
pub mod routing;
pub mod semantics;
pub mod simkernel;

pub use dtree::{Dataset, DecisionTree, Prediction};
pub use model::{
    DomainAdvertisement, Expertise, ExpertiseTriple, OverlayState, Peer, PeerId, SspId, SuperPeer,
    SuperPeerId, Theme,
};
pub use routing::{LogRecord, RoutingOutcome, Strategy};
pub use semantics::Query;
pub use simkernel::{ScenarioConfig, ScenarioReport};
