use std::fmt::Write;

use super::OverlayState;

/// Line-oriented topology dump:
///
/// ```text
/// PEER <id> <sp> <triple>;<triple>…
/// SP <id> <ssp> <theme-triples>
/// LINK <a> <b>
/// TRUST <a> <b> <n>
/// ```
///
/// Records are grouped by kind and sorted by id; only non-zero trust is listed.
pub fn export_snapshot(state: &OverlayState) -> String {
    let mut out = String::new();
    for (id, peer) in &state.peers {
        writeln!(
            out,
            "PEER {id} {} {}",
            peer.home_sp,
            peer.expertise.canonical_list()
        )
        .unwrap();
    }
    for (id, sp) in &state.super_peers {
        let ssp = sp.ssp_id.as_ref().map_or("-", |s| s.as_str());
        writeln!(
            out,
            "SP {id} {ssp} {}",
            sp.theme.description.canonical_list()
        )
        .unwrap();
    }
    for (a, b) in &state.links {
        writeln!(out, "LINK {a} {b}").unwrap();
    }
    for ((a, b), n) in &state.trust {
        writeln!(out, "TRUST {a} {b} {n}").unwrap();
    }
    out
}
