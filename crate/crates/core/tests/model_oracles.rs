use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sspsim::model::{
    export_snapshot, group_super_peers, join_peer, remove_super_peer, trust, DomainAdvertisement,
    Expertise, ExpertiseTriple, OverlayState, Peer, SuperPeerId,
};
use sspsim::semantics::{coverage, expertise_similarity, generate_query, map_schemas, sim};
use sspsim::simkernel::{generate_network, NetworkPlan, ScenarioConfig, Stream};

const WORDS: [&str; 6] = ["Doctor", "Nurse", "Drug", "Senior", "Ward", "Lab"];
const RELATIONS: [&str; 4] = ["IsA", "treats", "worksIn", "has"];

fn random_triple(rng: &mut ChaCha8Rng) -> ExpertiseTriple {
    let rel = RELATIONS.choose(rng).unwrap();
    let src = WORDS.choose(rng).unwrap();
    let mut tgt = WORDS.choose(rng).unwrap();
    while tgt == src {
        tgt = WORDS.choose(rng).unwrap();
    }
    let decorate = |w: &str, rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.3) {
            format!("Old{w}")
        } else {
            w.to_owned()
        }
    };
    let (s, t) = (decorate(src, rng), decorate(tgt, rng));
    ExpertiseTriple::new(rel, &s, &t).unwrap()
}

fn random_expertise(rng: &mut ChaCha8Rng, n: usize) -> Expertise {
    let mut set = BTreeSet::new();
    while set.len() < n {
        set.insert(random_triple(rng));
    }
    Expertise::new(set).unwrap()
}

/// Lower-cased word set of a triple, relation words fused into one token.
fn words_of(t: &ExpertiseTriple) -> BTreeSet<String> {
    let split = |s: &str| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in s.chars() {
            if c.is_uppercase() || out.is_empty() {
                out.push(String::new());
            }
            out.last_mut().unwrap().push(c.to_ascii_lowercase());
        }
        out
    };
    let mut set: BTreeSet<String> = BTreeSet::new();
    set.insert(split(t.relation()).concat());
    set.extend(split(t.source()));
    set.extend(split(t.target()));
    set
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    a.intersection(b).count() as f64 / a.union(b).count() as f64
}

#[test]
fn similarity_matches_set_jaccard() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let (a, b) = (random_triple(&mut rng), random_triple(&mut rng));
        let want = jaccard(&words_of(&a), &words_of(&b));
        assert!((sim(&a, &b).value() - want).abs() < 1e-12, "{a} {b}");
    }
}

#[test]
fn mapping_matches_brute_force_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..200 {
        let s1 = random_expertise(&mut rng, 5);
        let s2 = random_expertise(&mut rng, 5);
        let threshold = rng.gen_range(0.0..0.9);
        let got: BTreeMap<_, _> = map_schemas(&s1, &s2, threshold)
            .into_iter()
            .map(|e| (e.left, (e.right, e.score)))
            .collect();
        for left in s1.iter() {
            let mut best: Option<(f64, &ExpertiseTriple)> = None;
            for right in s2.iter() {
                let s = jaccard(&words_of(left), &words_of(right));
                // identical triple first, then highest score, then smallest canonical form
                let key = (right == left, s, std::cmp::Reverse(right.canonical()));
                if s > threshold
                    && best.is_none_or(|(bs, br)| {
                        key > (br == left, bs, std::cmp::Reverse(br.canonical()))
                    })
                {
                    best = Some((s, right));
                }
            }
            match (best, got.get(left)) {
                (None, None) => {}
                (Some((s, r)), Some((gr, gs))) => {
                    assert_eq!(r, gr);
                    assert!((s - gs).abs() < 1e-12);
                }
                (want, have) => panic!("{left}: expected {want:?}, got {have:?}"),
            }
        }
    }
}

#[test]
fn coverage_is_a_mean_of_best_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let a = random_expertise(&mut rng, 4);
        let b = random_expertise(&mut rng, 6);
        let naive = |x: &Expertise, y: &Expertise| {
            x.iter()
                .map(|t| {
                    y.iter()
                        .map(|u| jaccard(&words_of(t), &words_of(u)))
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / x.len() as f64
        };
        assert!((coverage(&a, &b) - naive(&a, &b)).abs() < 1e-12);
        let sym = 0.5 * (naive(&a, &b) + naive(&b, &a));
        assert!((expertise_similarity(&a, &b) - sym).abs() < 1e-12);
        assert!((expertise_similarity(&a, &a) - 1.0).abs() < 1e-12);
    }
}

fn cfg(n_peers: usize, n_super_peers: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_peers,
        n_super_peers,
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn grouping_follows_greedy_seed_rule() {
    for seed in 0..10 {
        let c = cfg(10, 10, seed);
        let plan = NetworkPlan::new(&c, &mut c.rng(Stream::Network)).unwrap();
        let mut state = plan.skeleton(&c).unwrap();
        let partition = group_super_peers(&mut state, c.group_threshold);

        // recompute: walk ids in order, join the first seed that is similar enough
        let ids: Vec<&SuperPeerId> = state.super_peers.keys().collect();
        let mut seeds: Vec<&SuperPeerId> = Vec::new();
        let mut owner: BTreeMap<&SuperPeerId, &SuperPeerId> = BTreeMap::new();
        for id in &ids {
            let theme = &state.super_peers[*id].theme.description;
            let found = seeds.iter().find(|s| {
                expertise_similarity(&state.super_peers[**s].theme.description, theme)
                    >= c.group_threshold
            });
            match found {
                Some(s) => owner.insert(id, s),
                None => {
                    seeds.push(id);
                    owner.insert(id, id)
                }
            };
        }
        assert_eq!(partition.len(), seeds.len());
        for (ssp, members) in &partition {
            for m in members {
                assert_eq!(ssp.as_str(), format!("S{}", owner[m].as_str()));
            }
        }
        let union: BTreeSet<_> = partition.values().flatten().collect();
        assert_eq!(union.len(), ids.len());
    }
}

#[test]
fn trust_equals_mapping_size() {
    let c = cfg(120, 8, 11);
    let state = generate_network(&c, &mut c.rng(Stream::Network)).unwrap();
    let ids: Vec<_> = state.super_peers.keys().cloned().collect();
    for a in &ids {
        for b in &ids {
            if a == b {
                continue;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let recount = map_schemas(
                &state.super_peers[lo].theme.description,
                &state.super_peers[hi].theme.description,
                c.eps_acc,
            )
            .len() as u32;
            assert_eq!(trust(&state, a, b).unwrap(), recount);
            assert_eq!(
                state.super_peers[a].msp_sp.get(b).map_or(0, Vec::len) as u32,
                recount
            );
        }
    }
}

#[test]
fn generated_networks_hold_invariants() {
    for (n, m) in [(300, 10), (1, 1), (100, 8)] {
        let c = cfg(n, m, 42);
        let state = generate_network(&c, &mut c.rng(Stream::Network)).unwrap();
        state.check_invariants().unwrap();
        assert_eq!(state.peers.len(), n);
        assert_eq!(state.super_peers.len(), m);
        let members: usize = state
            .super_peers
            .values()
            .map(|sp| sp.member_peers.len())
            .sum();
        assert_eq!(members, n);
        for p in state.peers.values() {
            assert!(p.expertise.len() >= c.min_peer_triples.min(c.theme_size));
            assert!(state.super_peers[&p.home_sp]
                .member_peers
                .contains(&p.peer_id));
        }
    }
}

#[test]
fn same_seed_same_snapshot() {
    let c = cfg(6, 3, 42);
    let a = export_snapshot(&generate_network(&c, &mut c.rng(Stream::Network)).unwrap());
    let b = export_snapshot(&generate_network(&c, &mut c.rng(Stream::Network)).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, include_str!("golden/snapshot_6x3_seed42.txt"));
    let other = cfg(6, 3, 43);
    assert_ne!(
        a,
        export_snapshot(&generate_network(&other, &mut other.rng(Stream::Network)).unwrap())
    );
}

#[test]
fn seeded_queries_are_frozen() {
    let e = Expertise::parse_list(
        "IsA(Researcher;Employee);provides(Researcher;Publication);IsA(Doctor;Researcher)",
    )
    .unwrap();
    let ad = DomainAdvertisement::new("P0", e, "Hospital", 0.5, 0).unwrap();
    let peer = Peer::joined(ad, "SP0".into(), false);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut text = String::new();
    for i in 0..3 {
        let q = generate_query(&peer, 4, &mut rng, format!("Q{i}")).unwrap();
        text.push_str(&q.components.join(" "));
        text.push('\n');
    }
    assert_eq!(text, include_str!("golden/query_seed42.txt"));
}

#[test]
fn joining_picks_best_mapped_coverage() {
    let c = cfg(60, 5, 9);
    let plan = NetworkPlan::new(&c, &mut c.rng(Stream::Network)).unwrap();
    let mut state: OverlayState = plan.skeleton(&c).unwrap();
    for ad in plan.advertisements {
        let mut best: Option<(f64, SuperPeerId)> = None;
        for (id, sp) in &state.super_peers {
            if map_schemas(&ad.expertise, &sp.theme.description, ad.eps_acc).is_empty() {
                continue;
            }
            let score = coverage(&ad.expertise, &sp.theme.description);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, id.clone()));
            }
        }
        let report = join_peer(&mut state, ad).unwrap();
        match best {
            Some((_, id)) => assert_eq!((report.sp_id, report.unmapped), (id, false)),
            None => assert!(report.unmapped),
        }
    }
}

#[test]
fn removal_reattaches_to_most_trusted() {
    let c = cfg(80, 6, 21);
    let mut state = generate_network(&c, &mut c.rng(Stream::Network)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let ids: Vec<SuperPeerId> = state.super_peers.keys().cloned().collect();
        let sp = ids.choose(&mut rng).unwrap().clone();
        let before = state.clone();
        let orphans = before.super_peers[&sp].member_peers.clone();
        let report = remove_super_peer(&mut state, &sp).unwrap();
        let expected = ids
            .iter()
            .filter(|o| **o != sp)
            .map(|o| (before.super_peers[&sp].msp_sp.get(o).map_or(0, Vec::len), o))
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(a.1)))
            .unwrap()
            .1;
        assert_eq!(&report.target, expected);
        let moved: BTreeSet<_> = report.reattached.iter().map(|(p, _)| p.clone()).collect();
        assert_eq!(moved, orphans);
        for p in &orphans {
            assert_eq!(&state.peers[p].home_sp, expected);
        }
        state.check_invariants().unwrap();
        assert_eq!(state.peers.len(), before.peers.len());
    }
}
