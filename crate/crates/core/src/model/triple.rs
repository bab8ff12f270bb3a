use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use super::ModelError;
use crate::semantics::token_bag;

/// Reserved relation name for specialisation links.
pub const ISA: &str = "IsA";

/// One relation instance `relation(source;target)`.
///
/// The canonical text form and the normalised token bag are computed once on
/// construction; ordering, equality and hashing go through the canonical form.
#[derive(Debug, Clone)]
pub struct ExpertiseTriple {
    relation: String,
    source: String,
    target: String,
    canonical: String,
    bag: Vec<String>,
}

fn valid_token(token: &str) -> bool {
    !token.is_empty()
        && token.chars().any(|c| c.is_ascii_alphanumeric())
        && token
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':'))
}

impl ExpertiseTriple {
    pub fn new(relation: &str, source: &str, target: &str) -> Result<Self, ModelError> {
        for token in [relation, source, target] {
            if !valid_token(token) {
                return Err(ModelError::InvalidTriple(format!(
                    "{relation}({source};{target})"
                )));
            }
        }
        let canonical = format!("{relation}({source};{target})");
        let bag = token_bag(relation, source, target);
        Ok(Self {
            relation: relation.to_owned(),
            source: source.to_owned(),
            target: target.to_owned(),
            canonical,
            bag,
        })
    }

    pub fn isa(source: &str, target: &str) -> Result<Self, ModelError> {
        Self::new(ISA, source, target)
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    /// `relation(source;target)`, also used as a query component token.
    pub fn canonical(&self) -> &str {
        &self.canonical
    }

    /// Sorted, deduplicated normalised tokens.
    pub fn token_bag(&self) -> &[String] {
        &self.bag
    }
}

impl FromStr for ExpertiseTriple {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidTriple(s.to_owned());
        let (relation, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let (source, target) = inner.split_once(';').ok_or_else(bad)?;
        Self::new(relation, source, target).map_err(|_| bad())
    }
}

impl fmt::Display for ExpertiseTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical)
    }
}

impl PartialEq for ExpertiseTriple {
    fn eq(&self, other: &Self) -> bool {
        self.canonical == other.canonical
    }
}

impl Eq for ExpertiseTriple {}

impl Hash for ExpertiseTriple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.canonical.hash(state);
    }
}

impl PartialOrd for ExpertiseTriple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExpertiseTriple {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical)
    }
}

/// A non-empty set of triples: a peer schema or a theme description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expertise {
    triples: BTreeMap<String, ExpertiseTriple>,
}

impl Expertise {
    /// Duplicates collapse; an empty input is rejected.
    pub fn new(triples: impl IntoIterator<Item = ExpertiseTriple>) -> Result<Self, ModelError> {
        let triples: BTreeMap<_, _> = triples
            .into_iter()
            .map(|t| (t.canonical.clone(), t))
            .collect();
        if triples.is_empty() {
            return Err(ModelError::EmptyExpertise);
        }
        Ok(Self { triples })
    }

    /// Parses `a(b;c);d(e;f)…`, the form used in snapshot files.
    pub fn parse_list(text: &str) -> Result<Self, ModelError> {
        let mut triples = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let end = rest
                .find(')')
                .ok_or_else(|| ModelError::InvalidTriple(rest.to_owned()))?;
            triples.push(rest[..=end].parse()?);
            rest = rest[end + 1..]
                .strip_prefix(';')
                .unwrap_or(&rest[end + 1..]);
        }
        Self::new(triples)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in canonical-form order.
    pub fn iter(&self) -> impl Iterator<Item = &ExpertiseTriple> {
        self.triples.values()
    }

    pub fn contains(&self, triple: &ExpertiseTriple) -> bool {
        self.triples.contains_key(triple.canonical())
    }

    /// Membership test by canonical component token.
    pub fn contains_token(&self, token: &str) -> bool {
        self.triples.contains_key(token)
    }

    pub fn canonical_list(&self) -> String {
        self.triples
            .keys()
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl<'a> IntoIterator for &'a Expertise {
    type Item = &'a ExpertiseTriple;
    type IntoIter = std::collections::btree_map::Values<'a, String, ExpertiseTriple>;

    fn into_iter(self) -> Self::IntoIter {
        self.triples.values()
    }
}

/// Interest domain published by a super-peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theme {
    pub theme_id: String,
    pub description: Expertise,
}

impl Theme {
    pub fn new(theme_id: impl Into<String>, description: Expertise) -> Self {
        Self {
            theme_id: theme_id.into(),
            description,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_form() {
        let t = ExpertiseTriple::isa("Researcher", "Employee").unwrap();
        assert_eq!(t.canonical(), "IsA(Researcher;Employee)");
        assert_eq!(t.to_string().parse::<ExpertiseTriple>().unwrap(), t);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ExpertiseTriple::new("", "a", "b").is_err());
        assert!(ExpertiseTriple::new("r", "a b", "c").is_err());
        assert!(ExpertiseTriple::new("r", "a;b", "c").is_err());
        assert!(ExpertiseTriple::new("r", "__", "c").is_err());
        assert!("IsA(Researcher Employee)"
            .parse::<ExpertiseTriple>()
            .is_err());
        assert!("IsA(Researcher;Employee"
            .parse::<ExpertiseTriple>()
            .is_err());
        assert!("IsA".parse::<ExpertiseTriple>().is_err());
    }

    #[test]
    fn expertise_dedups_and_rejects_empty() {
        let t = ExpertiseTriple::isa("A", "B").unwrap();
        let e = Expertise::new([t.clone(), t.clone()]).unwrap();
        assert_eq!(e.len(), 1);
        assert!(matches!(
            Expertise::new(Vec::new()),
            Err(ModelError::EmptyExpertise)
        ));
    }

    #[test]
    fn list_round_trip() {
        let e = Expertise::parse_list(
            "IsA(Researcher;Employee);provides(Researcher;Publication);IsA(Doctor;Researcher)",
        )
        .unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(Expertise::parse_list(&e.canonical_list()).unwrap(), e);
    }

    fn token() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9_.:-]{0,10}"
    }

    proptest! {
        #[test]
        fn text_form_round_trips(r in token(), s in token(), t in token()) {
            let triple = ExpertiseTriple::new(&r, &s, &t).unwrap();
            let back: ExpertiseTriple = triple.canonical().parse().unwrap();
            prop_assert_eq!(back.relation(), r.as_str());
            prop_assert_eq!(back.source(), s.as_str());
            prop_assert_eq!(back.target(), t.as_str());
        }
    }
}
