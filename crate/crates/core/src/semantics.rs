//! Similarity between triples, thresholded schema mapping, relevance of a
//! peer to a query and expertise-driven query generation.
//!
//! `sim` is the Jaccard overlap of two token bags. A triple's bag holds its
//! relation name (lower-cased, word parts concatenated into one token) plus the
//! word tokens of its two concepts, split on case changes, underscores and
//! letter/digit boundaries: `IsA(SeniorResearcher;Employee)` becomes
//! `{isa, senior, researcher, employee}`.

use rand::Rng;
use thiserror::Error;

use crate::model::{CorrespondenceEntry, Expertise, ExpertiseTriple, Peer, PeerId, SuperPeerId};

/// Padding token for unused query component slots.
pub const NONE_COMPONENT: &str = "none";

/// Default number of query components.
pub const DEFAULT_COMPONENTS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SemanticsError {
    #[error("invalid triple: {0}")]
    InvalidTriple(String),
    #[error("peer {0} has an empty expertise")]
    EmptyExpertise(PeerId),
    #[error("query {0} has no components")]
    EmptyQuery(String),
    #[error("component count must be at least 1")]
    ZeroComponents,
}

/// A similarity value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Lower-cased word parts of a token.
pub fn word_tokens(token: &str) -> Vec<String> {
    let mut words = Vec::new();
    for run in token.split(|c: char| !c.is_ascii_alphanumeric()) {
        let chars: Vec<char> = run.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let next_lower = chars.get(i + 1).is_some_and(|c| c.is_ascii_lowercase());
            let boundary = (prev.is_ascii_lowercase() && cur.is_ascii_uppercase())
                || (prev.is_ascii_uppercase() && cur.is_ascii_uppercase() && next_lower)
                || (prev.is_ascii_digit() != cur.is_ascii_digit());
            if boundary {
                words.push(
                    chars[start..i]
                        .iter()
                        .collect::<String>()
                        .to_ascii_lowercase(),
                );
                start = i;
            }
        }
        if start < chars.len() {
            words.push(
                chars[start..]
                    .iter()
                    .collect::<String>()
                    .to_ascii_lowercase(),
            );
        }
    }
    words
}

/// Sorted, deduplicated token bag of a triple's parts.
pub fn token_bag(relation: &str, source: &str, target: &str) -> Vec<String> {
    let mut bag = vec![word_tokens(relation).concat()];
    bag.extend(word_tokens(source));
    bag.extend(word_tokens(target));
    bag.sort_unstable();
    bag.dedup();
    bag
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - shared;
    if union == 0 {
        return 0.0;
    }
    shared as f64 / union as f64
}

pub fn sim(a: &ExpertiseTriple, b: &ExpertiseTriple) -> SimilarityScore {
    if a == b {
        return SimilarityScore(1.0);
    }
    SimilarityScore(jaccard(a.token_bag(), b.token_bag()))
}

/// [`sim`] over canonical text forms.
pub fn sim_canonical(a: &str, b: &str) -> Result<SimilarityScore, SemanticsError> {
    let parse = |s: &str| {
        s.parse::<ExpertiseTriple>()
            .map_err(|_| SemanticsError::InvalidTriple(s.to_owned()))
    };
    Ok(sim(&parse(a)?, &parse(b)?))
}

/// For each triple of `s1`, the best-scoring triple of `s2` strictly above
/// `threshold`. The triple itself wins when `s2` holds it; otherwise equal
/// best scores resolve to the canonically smallest `s2` triple, which falls
/// out of iterating `s2` in canonical order. Bags ignore direction, so
/// `r(A;B)` and `r(B;A)` both score 1 against either.
pub fn map_schemas(s1: &Expertise, s2: &Expertise, threshold: f64) -> Vec<CorrespondenceEntry> {
    s1.iter()
        .filter_map(|left| {
            if s2.contains(left) && threshold < 1.0 {
                return Some(CorrespondenceEntry {
                    left: left.clone(),
                    right: left.clone(),
                    score: 1.0,
                });
            }
            let mut best: Option<(&ExpertiseTriple, f64)> = None;
            for right in s2 {
                let score = sim(left, right).value();
                if score > threshold && best.is_none_or(|(_, b)| score > b) {
                    best = Some((right, score));
                }
            }
            best.map(|(right, score)| CorrespondenceEntry {
                left: left.clone(),
                right: right.clone(),
                score,
            })
        })
        .collect()
}

/// Mean over `from` of the best similarity found in `onto`.
pub fn coverage(from: &Expertise, onto: &Expertise) -> f64 {
    let total: f64 = from
        .iter()
        .map(|a| onto.iter().map(|b| sim(a, b).value()).fold(0.0, f64::max))
        .sum();
    total / from.len() as f64
}

/// Symmetric set similarity: the mean of both coverages.
pub fn expertise_similarity(a: &Expertise, b: &Expertise) -> f64 {
    0.5 * (coverage(a, b) + coverage(b, a))
}

/// A query: `k` component tokens drawn from the origin peer's expertise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub origin_peer: PeerId,
    pub origin_sp: SuperPeerId,
    pub components: Vec<String>,
}

impl Query {
    pub fn arity(&self) -> usize {
        self.components.len()
    }

    /// Components other than the `none` padding.
    pub fn active_components(&self) -> impl Iterator<Item = &str> {
        self.components
            .iter()
            .map(String::as_str)
            .filter(|c| *c != NONE_COMPONENT)
    }

    /// Active components parsed back into triples.
    pub fn triples(&self) -> Vec<ExpertiseTriple> {
        self.active_components()
            .filter_map(|c| c.parse().ok())
            .collect()
    }
}

/// Samples `min(k, |expertise|)` distinct triples without replacement and pads
/// the rest with `none`.
pub fn generate_query<R: Rng + ?Sized>(
    peer: &Peer,
    k: usize,
    rng: &mut R,
    query_id: impl Into<String>,
) -> Result<Query, SemanticsError> {
    if k == 0 {
        return Err(SemanticsError::ZeroComponents);
    }
    let triples: Vec<&ExpertiseTriple> = peer.expertise.iter().collect();
    if triples.is_empty() {
        return Err(SemanticsError::EmptyExpertise(peer.peer_id.clone()));
    }
    let amount = k.min(triples.len());
    let mut components: Vec<String> = rand::seq::index::sample(rng, triples.len(), amount)
        .into_iter()
        .map(|i| triples[i].canonical().to_owned())
        .collect();
    components.resize(k, NONE_COMPONENT.to_owned());
    Ok(Query {
        query_id: query_id.into(),
        origin_peer: peer.peer_id.clone(),
        origin_sp: peer.home_sp.clone(),
        components,
    })
}

/// True when the peer holds at least `fraction` of the active components.
pub fn is_relevant(
    expertise: &Expertise,
    q: &Query,
    fraction: f64,
) -> Result<bool, SemanticsError> {
    let (mut active, mut present) = (0usize, 0usize);
    for c in q.active_components() {
        active += 1;
        if expertise.contains_token(c) {
            present += 1;
        }
    }
    if active == 0 {
        return Err(SemanticsError::EmptyQuery(q.query_id.clone()));
    }
    Ok(present as f64 / active as f64 >= fraction - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DomainAdvertisement;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> ExpertiseTriple {
        s.parse().unwrap()
    }

    fn peer_with(list: &str) -> Peer {
        let expertise = Expertise::parse_list(list).unwrap();
        Peer::joined(
            DomainAdvertisement::new("P1", expertise, "T0", 0.5, 0).unwrap(),
            "SP0".into(),
            false,
        )
    }

    #[test]
    fn word_splitting() {
        assert_eq!(word_tokens("SeniorResearcher"), ["senior", "researcher"]);
        assert_eq!(word_tokens("HTTPServer"), ["http", "server"]);
        assert_eq!(word_tokens("ward_12b"), ["ward", "12", "b"]);
        assert_eq!(word_tokens("IsA"), ["is", "a"]);
        assert_eq!(
            token_bag("IsA", "Doctor", "Researcher"),
            ["doctor", "isa", "researcher"]
        );
    }

    #[test]
    fn sim_anchor_cases() {
        let x = t("IsA(Researcher;Employee)");
        assert_eq!(sim(&x, &x).value(), 1.0);
        let disjoint = sim(
            &t("IsA(Doctor;Researcher)"),
            &t("Role:teaches(Course;Student)"),
        );
        assert_eq!(disjoint.value(), 0.0);
        // {isa, researcher, employee} vs {isa, senior, researcher, employee}: 3 / 4
        let partial = sim(&x, &t("IsA(SeniorResearcher;Employee)"));
        assert_eq!(partial.value(), 0.75);
    }

    #[test]
    fn sim_canonical_rejects_garbage() {
        assert!(matches!(
            sim_canonical("IsA(a;b)", "broken"),
            Err(SemanticsError::InvalidTriple(_))
        ));
        assert_eq!(sim_canonical("IsA(a;b)", "IsA(a;b)").unwrap().value(), 1.0);
    }

    #[test]
    fn map_identical_and_disjoint() {
        let s = Expertise::parse_list("IsA(A;B);owns(A;C);IsA(C;D)").unwrap();
        let entries = map_schemas(&s, &s, 0.5);
        assert_eq!(entries.len(), 3);
        for e in &entries {
            assert_eq!(e.left, e.right);
            assert_eq!(e.score, 1.0);
        }
        let other = Expertise::parse_list("teaches(Course;Student)").unwrap();
        assert!(map_schemas(&s, &other, 0.5).is_empty());
    }

    #[test]
    fn map_tie_breaks_on_canonical_order() {
        let s1 = Expertise::parse_list("r(A;B)").unwrap();
        // both score 3/4 against r(A;B)
        let s2 = Expertise::parse_list("r(A;BZeta);r(AAlpha;B)").unwrap();
        let entries = map_schemas(&s1, &s2, 0.5);
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].right.canonical(), "r(A;BZeta)");
    }

    #[test]
    fn query_from_single_triple_is_padded() {
        let peer = peer_with("IsA(Researcher;Employee)");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = generate_query(&peer, 4, &mut rng, "Q1").unwrap();
        assert_eq!(
            q.components,
            ["IsA(Researcher;Employee)", "none", "none", "none"]
        );
        assert_eq!(q.origin_sp.as_str(), "SP0");
        assert!(matches!(
            generate_query(&peer, 0, &mut rng, "Q2"),
            Err(SemanticsError::ZeroComponents)
        ));
    }

    #[test]
    fn query_components_distinct() {
        let peer = peer_with("IsA(A;B);IsA(B;C);r(A;C);r(C;D);s(D;E);s(E;A)");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..50 {
            let q = generate_query(&peer, 4, &mut rng, format!("Q{i}")).unwrap();
            let mut seen = q.components.clone();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 4);
            assert!(q
                .components
                .iter()
                .all(|c| peer.expertise.contains_token(c)));
        }
    }

    #[test]
    fn relevance_arithmetic() {
        let peer = peer_with("IsA(A;B);IsA(B;C);r(A;C);r(C;D)");
        let q = Query {
            query_id: "Q".into(),
            origin_peer: "P9".into(),
            origin_sp: "SP0".into(),
            components: vec![
                "IsA(A;B)".into(),
                "r(C;D)".into(),
                "x(Y;Z)".into(),
                "x(Z;W)".into(),
            ],
        };
        assert!(is_relevant(&peer.expertise, &q, 0.5).unwrap());
        assert!(!is_relevant(&peer.expertise, &q, 0.6).unwrap());
        let stranger = peer_with("k(M;N)");
        assert!(!is_relevant(&stranger.expertise, &q, 0.01).unwrap());
        let empty = Query {
            components: vec!["none".into(); 4],
            ..q
        };
        assert!(matches!(
            is_relevant(&peer.expertise, &empty, 0.5),
            Err(SemanticsError::EmptyQuery(_))
        ));
    }

    #[test]
    fn origin_is_relevant_to_own_query() {
        let peer = peer_with("IsA(A;B);IsA(B;C);r(A;C);r(C;D);s(D;E)");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = generate_query(&peer, 4, &mut rng, "Q").unwrap();
        for f in [0.1, 0.5, 0.99, 1.0] {
            assert!(is_relevant(&peer.expertise, &q, f).unwrap());
        }
    }

    fn arb_triple() -> impl Strategy<Value = ExpertiseTriple> {
        let word = prop::sample::select(vec![
            "Doctor", "Nurse", "Ward", "Senior", "Patient", "Bed", "Drug", "Dose",
        ]);
        let rel = prop::sample::select(vec!["IsA", "treats", "has_part", "owns"]);
        (rel, word.clone(), word.clone(), word.clone(), any::<bool>()).prop_map(
            |(r, a, b, c, compound)| {
                let source = if compound {
                    format!("{a}{c}")
                } else {
                    a.to_owned()
                };
                ExpertiseTriple::new(r, &source, b).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn sim_symmetric_and_bounded(a in arb_triple(), b in arb_triple()) {
            let ab = sim(&a, &b).value();
            prop_assert_eq!(ab, sim(&b, &a).value());
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(sim(&a, &a).value(), 1.0);
        }

        #[test]
        fn self_mapping_is_identity(ts in prop::collection::vec(arb_triple(), 1..8), th in 0.0..0.999f64) {
            let s = Expertise::new(ts).unwrap();
            let entries = map_schemas(&s, &s, th);
            prop_assert_eq!(entries.len(), s.len());
            for e in entries {
                prop_assert_eq!(&e.left, &e.right);
                prop_assert_eq!(e.score, 1.0);
            }
        }

        #[test]
        fn relevance_monotone(ts in prop::collection::vec(arb_triple(), 1..8),
                              qs in prop::collection::vec(arb_triple(), 1..5),
                              f1 in 0.01..1.0f64, f2 in 0.01..1.0f64) {
            let e = Expertise::new(ts).unwrap();
            let q = Query {
                query_id: "Q".into(),
                origin_peer: "P".into(),
                origin_sp: "SP".into(),
                components: qs.iter().map(|t| t.canonical().to_owned()).collect(),
            };
            let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
            if is_relevant(&e, &q, hi).unwrap() {
                prop_assert!(is_relevant(&e, &q, lo).unwrap());
            }
        }
    }
}
