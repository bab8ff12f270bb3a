//! Synthetic networks.
//!
//! Super-peers are split into families. A family owns a private set of
//! pseudo-word concepts and role names, and a template of relation triples.
//! Each theme in the family restates the whole template, decorating most
//! triples with the theme's own modifier word (`owns(Ward;Bed)` becomes
//! `owns(KiloWard;Bed)`), and adds a few triples of its own. Peers copy one
//! theme and perturb it by dropping, renaming and borrowing triples.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ScenarioConfig, SimError};
use crate::model::{
    group_super_peers, join_peer, link_super_peers, padded, DomainAdvertisement, Expertise,
    ExpertiseTriple, OverlayState, SuperPeerId, Theme, ISA,
};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Concept words owned by each family.
pub const CONCEPTS_PER_FAMILY: usize = 8;
/// Role names owned by each family.
pub const ROLES_PER_FAMILY: usize = 4;
const ISA_PROBABILITY: f64 = 0.3;

/// Every distinct two-syllable word, shuffled.
pub struct Vocabulary {
    words: Vec<String>,
    next: usize,
}

impl Vocabulary {
    pub fn size() -> usize {
        (CONSONANTS.len() * VOWELS.len()).pow(2)
    }

    pub fn shuffled<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let syllables: Vec<String> = CONSONANTS
            .iter()
            .flat_map(|&c| {
                VOWELS
                    .iter()
                    .map(move |&v| format!("{}{}", c as char, v as char))
            })
            .collect();
        let mut words: Vec<String> = syllables
            .iter()
            .flat_map(|a| syllables.iter().map(move |b| format!("{a}{b}")))
            .collect();
        words.shuffle(rng);
        Self { words, next: 0 }
    }

    fn take(&mut self) -> String {
        let w = self.words[self.next].clone();
        self.next += 1;
        w
    }

    fn concept(&mut self) -> String {
        capitalize(&self.take())
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_ascii_uppercase().to_string() + chars.as_str(),
        None => String::new(),
    }
}

/// Words one family consumes.
pub fn words_per_family(family_size: usize) -> usize {
    CONCEPTS_PER_FAMILY + ROLES_PER_FAMILY + family_size
}

/// Largest number of super-peers the vocabulary can give distinct themes.
pub fn vocabulary_capacity(family_size: usize) -> usize {
    Vocabulary::size() / words_per_family(family_size) * family_size
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TemplateTriple {
    relation: usize,
    source: usize,
    target: usize,
}

struct Family {
    concepts: Vec<String>,
    roles: Vec<String>,
    template: Vec<TemplateTriple>,
    /// Super-peer indices, in family order.
    members: Vec<usize>,
}

impl Family {
    fn relation(&self, t: &TemplateTriple) -> &str {
        if t.relation == usize::MAX {
            ISA
        } else {
            &self.roles[t.relation]
        }
    }
}

/// A theme, plus which template triple each of its triples restates.
struct ThemePlan {
    family: usize,
    triples: Vec<(ExpertiseTriple, Option<usize>)>,
}

/// Super-peer themes and peer advertisements, ready to be joined.
pub struct NetworkPlan {
    pub themes: Vec<(SuperPeerId, Theme)>,
    pub advertisements: Vec<DomainAdvertisement>,
}

fn triple(rel: &str, src: &str, tgt: &str) -> ExpertiseTriple {
    ExpertiseTriple::new(rel, src, tgt).expect("generated tokens are well formed")
}

fn random_template<R: Rng + ?Sized>(
    rng: &mut R,
    theme_size: usize,
) -> Result<Vec<TemplateTriple>, SimError> {
    let max = CONCEPTS_PER_FAMILY * (CONCEPTS_PER_FAMILY - 1) * (ROLES_PER_FAMILY + 1);
    if theme_size > max {
        return Err(SimError::InvalidConfig(format!(
            "theme_size {theme_size} exceeds the {max} distinct triples a family can form"
        )));
    }
    let mut template: Vec<TemplateTriple> = Vec::with_capacity(theme_size);
    while template.len() < theme_size {
        let relation = if rng.gen_bool(ISA_PROBABILITY) {
            usize::MAX
        } else {
            rng.gen_range(0..ROLES_PER_FAMILY)
        };
        let source = rng.gen_range(0..CONCEPTS_PER_FAMILY);
        let target = rng.gen_range(0..CONCEPTS_PER_FAMILY);
        let t = TemplateTriple {
            relation,
            source,
            target,
        };
        if source != target && !template.contains(&t) {
            template.push(t);
        }
    }
    Ok(template)
}

fn decorated(modifier: &str, concept: &str) -> String {
    format!("{}{concept}", capitalize(modifier))
}

impl NetworkPlan {
    pub fn new<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Self, SimError> {
        let n_sp = cfg.n_super_peers;
        let capacity = vocabulary_capacity(cfg.family_size);
        if n_sp > capacity {
            return Err(SimError::VocabularyExhausted {
                requested: n_sp,
                capacity,
            });
        }
        let mut vocabulary = Vocabulary::shuffled(rng);
        let mut order: Vec<usize> = (0..n_sp).collect();
        order.shuffle(rng);

        let mut families = Vec::new();
        let mut modifiers = vec![String::new(); n_sp];
        for chunk in order.chunks(cfg.family_size) {
            let concepts = (0..CONCEPTS_PER_FAMILY)
                .map(|_| vocabulary.concept())
                .collect();
            let roles = (0..ROLES_PER_FAMILY).map(|_| vocabulary.take()).collect();
            for &sp in chunk {
                modifiers[sp] = vocabulary.take();
            }
            families.push(Family {
                concepts,
                roles,
                template: random_template(rng, cfg.theme_size)?,
                members: chunk.to_vec(),
            });
        }

        let mut plans: Vec<Option<ThemePlan>> = (0..n_sp).map(|_| None).collect();
        for (f, family) in families.iter().enumerate() {
            for &sp in &family.members {
                plans[sp] = Some(theme_plan(cfg, rng, f, family, &modifiers[sp]));
            }
        }
        let plans: Vec<ThemePlan> = plans
            .into_iter()
            .map(|p| p.expect("every SP planned"))
            .collect();

        let themes = plans
            .iter()
            .enumerate()
            .map(|(i, plan)| {
                let id = SuperPeerId::new(padded("SP", i, n_sp));
                let expertise =
                    Expertise::new(plan.triples.iter().map(|(t, _)| t.clone())).expect("non-empty");
                (id, Theme::new(padded("T", i, n_sp), expertise))
            })
            .collect::<Vec<_>>();

        let mut renamed = 0usize;
        let mut advertisements = Vec::with_capacity(cfg.n_peers);
        for p in 0..cfg.n_peers {
            let home = rng.gen_range(0..n_sp);
            let expertise = peer_expertise(cfg, rng, &plans, &families, home, &mut renamed);
            let ad = DomainAdvertisement::new(
                padded("P", p, cfg.n_peers),
                expertise,
                themes[home].1.theme_id.clone(),
                cfg.eps_acc,
                cfg.ttl,
            )?;
            advertisements.push(ad);
        }
        Ok(Self {
            themes,
            advertisements,
        })
    }

    /// Overlay with super-peers only, linked and grouped.
    pub fn skeleton(&self, cfg: &ScenarioConfig) -> Result<OverlayState, SimError> {
        let mut state = OverlayState::new();
        for (id, theme) in &self.themes {
            state.add_super_peer(id.clone(), theme.clone())?;
        }
        link_super_peers(&mut state, cfg.eps_acc);
        group_super_peers(&mut state, cfg.group_threshold);
        Ok(state)
    }
}

fn theme_plan<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
    family_index: usize,
    family: &Family,
    modifier: &str,
) -> ThemePlan {
    let mut triples: Vec<(ExpertiseTriple, Option<usize>)> = Vec::new();
    for (i, t) in family.template.iter().enumerate() {
        let rel = family.relation(t);
        let (mut src, mut tgt) = (
            family.concepts[t.source].clone(),
            family.concepts[t.target].clone(),
        );
        if rng.gen_bool(cfg.decorate_prob) {
            if rng.gen_bool(0.5) {
                src = decorated(modifier, &src);
            } else {
                tgt = decorated(modifier, &tgt);
            }
        }
        triples.push((triple(rel, &src, &tgt), Some(i)));
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < cfg.unique_triples && attempts < 1000 {
        attempts += 1;
        let rel = if rng.gen_bool(ISA_PROBABILITY) {
            ISA.to_owned()
        } else {
            family.roles[rng.gen_range(0..ROLES_PER_FAMILY)].clone()
        };
        let a = rng.gen_range(0..CONCEPTS_PER_FAMILY);
        let b = rng.gen_range(0..CONCEPTS_PER_FAMILY);
        if a == b {
            continue;
        }
        let t = triple(
            &rel,
            &decorated(modifier, &family.concepts[a]),
            &family.concepts[b],
        );
        if triples.iter().all(|(x, _)| x.token_bag() != t.token_bag()) {
            triples.push((t, None));
            added += 1;
        }
    }
    ThemePlan {
        family: family_index,
        triples,
    }
}

fn rename<R: Rng + ?Sized>(rng: &mut R, t: &ExpertiseTriple, serial: usize) -> ExpertiseTriple {
    if rng.gen_bool(0.5) {
        triple(t.relation(), &format!("{}{serial}", t.source()), t.target())
    } else {
        triple(t.relation(), t.source(), &format!("{}{serial}", t.target()))
    }
}

fn peer_expertise<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
    plans: &[ThemePlan],
    families: &[Family],
    home: usize,
    renamed: &mut usize,
) -> Expertise {
    let plan = &plans[home];
    let mut kept: Vec<bool> = plan
        .triples
        .iter()
        .map(|_| !rng.gen_bool(cfg.drop_prob))
        .collect();
    let floor = cfg.min_peer_triples.min(plan.triples.len());
    let mut dropped: Vec<usize> = (0..kept.len()).filter(|&i| !kept[i]).collect();
    dropped.shuffle(rng);
    while kept.iter().filter(|&&k| k).count() < floor {
        kept[dropped.pop().expect("enough dropped triples")] = true;
    }
    let mut triples: Vec<ExpertiseTriple> = Vec::new();
    for (i, (t, _)) in plan.triples.iter().enumerate() {
        if !kept[i] {
            continue;
        }
        if rng.gen_bool(cfg.rename_prob) {
            *renamed += 1;
            triples.push(rename(rng, t, *renamed));
        } else {
            triples.push(t.clone());
        }
    }
    // Borrow a sibling theme's version of some template triple.
    let siblings: Vec<usize> = families[plan.family]
        .members
        .iter()
        .copied()
        .filter(|&m| m != home)
        .collect();
    if !siblings.is_empty() && rng.gen_bool(cfg.add_prob) {
        let sibling = &plans[siblings[rng.gen_range(0..siblings.len())]];
        let restated: Vec<&ExpertiseTriple> = sibling
            .triples
            .iter()
            .filter(|(_, origin)| origin.is_some())
            .map(|(t, _)| t)
            .collect();
        triples.push(restated[rng.gen_range(0..restated.len())].clone());
    }
    Expertise::new(triples).expect("at least one triple kept")
}

/// Builds the full overlay for `cfg`: themes, linked and grouped super-peers,
/// and every peer joined in id order.
pub fn generate_network<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<OverlayState, SimError> {
    cfg.validate()?;
    let plan = NetworkPlan::new(cfg, rng)?;
    let mut state = plan.skeleton(cfg)?;
    for ad in plan.advertisements {
        join_peer(&mut state, ad)?;
    }
    Ok(state)
}
