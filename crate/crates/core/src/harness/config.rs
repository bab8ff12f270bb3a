//! `key = value` configuration files. Blank lines and `#` comments are
//! ignored; every key names a [`ScenarioConfig`] field.

use std::fmt::Display;
use std::str::FromStr;

use super::HarnessError;
use crate::simkernel::ScenarioConfig;

pub const CONFIG_KEYS: [&str; 24] = [
    "seed",
    "n_peers",
    "n_super_peers",
    "k_components",
    "eps_acc",
    "group_threshold",
    "relevance_fraction",
    "top_p",
    "queries_per_peer",
    "warmup_fraction",
    "churn_events",
    "hop_limit",
    "min_rows",
    "train_fraction",
    "reinduce_after_churn",
    "ttl",
    "family_size",
    "theme_size",
    "unique_triples",
    "decorate_prob",
    "drop_prob",
    "rename_prob",
    "add_prob",
    "min_peer_triples",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse {value:?}: {e}"))
}

/// Sets one field by name.
pub fn apply_setting(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "seed" => cfg.seed = parse(key, value)?,
        "n_peers" => cfg.n_peers = parse(key, value)?,
        "n_super_peers" => cfg.n_super_peers = parse(key, value)?,
        "k_components" => cfg.k_components = parse(key, value)?,
        "eps_acc" => cfg.eps_acc = parse(key, value)?,
        "group_threshold" => cfg.group_threshold = parse(key, value)?,
        "relevance_fraction" => cfg.relevance_fraction = parse(key, value)?,
        "top_p" => cfg.top_p = parse(key, value)?,
        "queries_per_peer" => cfg.queries_per_peer = parse(key, value)?,
        "warmup_fraction" => cfg.warmup_fraction = parse(key, value)?,
        "churn_events" => cfg.churn_events = parse(key, value)?,
        "hop_limit" => cfg.hop_limit = parse(key, value)?,
        "min_rows" => cfg.min_rows = parse(key, value)?,
        "train_fraction" => cfg.train_fraction = parse(key, value)?,
        "reinduce_after_churn" => cfg.reinduce_after_churn = parse(key, value)?,
        "ttl" => cfg.ttl = parse(key, value)?,
        "family_size" => cfg.family_size = parse(key, value)?,
        "theme_size" => cfg.theme_size = parse(key, value)?,
        "unique_triples" => cfg.unique_triples = parse(key, value)?,
        "decorate_prob" => cfg.decorate_prob = parse(key, value)?,
        "drop_prob" => cfg.drop_prob = parse(key, value)?,
        "rename_prob" => cfg.rename_prob = parse(key, value)?,
        "add_prob" => cfg.add_prob = parse(key, value)?,
        "min_peer_triples" => cfg.min_peer_triples = parse(key, value)?,
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Parses a configuration file over the defaults and validates the result.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = ScenarioConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Config {
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        apply_setting(&mut cfg, key.trim(), value.trim()).map_err(err)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every field as a config file that [`parse_config`] reads back unchanged.
pub fn config_to_string(cfg: &ScenarioConfig) -> String {
    let c = cfg;
    let pairs: [(&str, String); 24] = [
        ("seed", c.seed.to_string()),
        ("n_peers", c.n_peers.to_string()),
        ("n_super_peers", c.n_super_peers.to_string()),
        ("k_components", c.k_components.to_string()),
        ("eps_acc", c.eps_acc.to_string()),
        ("group_threshold", c.group_threshold.to_string()),
        ("relevance_fraction", c.relevance_fraction.to_string()),
        ("top_p", c.top_p.to_string()),
        ("queries_per_peer", c.queries_per_peer.to_string()),
        ("warmup_fraction", c.warmup_fraction.to_string()),
        ("churn_events", c.churn_events.to_string()),
        ("hop_limit", c.hop_limit.to_string()),
        ("min_rows", c.min_rows.to_string()),
        ("train_fraction", c.train_fraction.to_string()),
        ("reinduce_after_churn", c.reinduce_after_churn.to_string()),
        ("ttl", c.ttl.to_string()),
        ("family_size", c.family_size.to_string()),
        ("theme_size", c.theme_size.to_string()),
        ("unique_triples", c.unique_triples.to_string()),
        ("decorate_prob", c.decorate_prob.to_string()),
        ("drop_prob", c.drop_prob.to_string()),
        ("rename_prob", c.rename_prob.to_string()),
        ("add_prob", c.add_prob.to_string()),
        ("min_peer_triples", c.min_peer_triples.to_string()),
    ];
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
