//! Categorical decision trees over query components.
//!
//! Induction follows C4.5 without pruning: nodes split on the unused attribute
//! with the highest gain ratio, one branch per observed value, and every split
//! carries an extra leaf for values never seen in training. Prediction returns
//! the full class distribution of the reached leaf, so the caller can take
//! every class above a probability cut-off as a candidate responder.

mod induce;
mod render;

use std::collections::BTreeMap;

use indexmap::IndexMap;
use thiserror::Error;

pub use induce::{entropy, gain_ratio, induce, information_gain};
pub use render::{parse_tree, render, UNATTRIBUTED_CLASS};

use crate::semantics::Query;

/// Class label → row count.
pub type Histogram = BTreeMap<String, usize>;

/// Default probability cut-off for candidate classes.
pub const DEFAULT_TOP_P: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no rows to learn from")]
    EmptyData,
    #[error("attribute index {0} out of range")]
    BadAttribute(usize),
    #[error("query has {got} components, tree expects {expected}")]
    BadQuery { expected: usize, got: usize },
    #[error("row has {got} values, dataset expects {expected}")]
    BadRow { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// `componentW1`, …, `componentWk`.
pub fn default_attribute_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("componentW{i}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub values: Vec<String>,
    pub class: String,
}

/// Training or evaluation rows with a fixed attribute list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub attribute_names: Vec<String>,
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(attribute_names: Vec<String>) -> Self {
        Self {
            attribute_names,
            rows: Vec::new(),
        }
    }

    pub fn with_arity(k: usize) -> Self {
        Self::new(default_attribute_names(k))
    }

    pub fn arity(&self) -> usize {
        self.attribute_names.len()
    }

    pub fn push(&mut self, values: Vec<String>, class: impl Into<String>) -> Result<(), TreeError> {
        if values.len() != self.arity() {
            return Err(TreeError::BadRow {
                expected: self.arity(),
                got: values.len(),
            });
        }
        self.rows.push(Row {
            values,
            class: class.into(),
        });
        Ok(())
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// First `ceil(len * fraction)` rows and the remainder, order preserved.
    pub fn split_at_fraction(&self, fraction: f64) -> (Dataset, Dataset) {
        let cut = ((self.len() as f64) * fraction).ceil() as usize;
        let cut = cut.min(self.len());
        let make = |rows: &[Row]| Dataset {
            attribute_names: self.attribute_names.clone(),
            rows: rows.to_vec(),
        };
        (make(&self.rows[..cut]), make(&self.rows[cut..]))
    }

    pub fn class_histogram(&self) -> Histogram {
        let mut h = Histogram::new();
        for r in &self.rows {
            *h.entry(r.class.clone()).or_default() += 1;
        }
        h
    }
}

/// A labelled class distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leaf {
    pub label: String,
    pub histogram: Histogram,
}

impl Leaf {
    /// Leaf labelled with the majority class; ties go to the smaller token.
    pub fn from_histogram(histogram: Histogram) -> Self {
        let mut label = String::new();
        let mut best = 0usize;
        for (class, &n) in &histogram {
            if n > best {
                best = n;
                label = class.clone();
            }
        }
        Self { label, histogram }
    }

    pub fn total(&self) -> usize {
        self.histogram.values().sum()
    }

    /// Rows whose class differs from the label.
    pub fn misclassified(&self) -> usize {
        self.total() - self.histogram.get(&self.label).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub attribute: usize,
    /// Branches in rendering order (ascending value for induced trees).
    pub children: IndexMap<String, Node>,
    /// Taken for values with no branch; holds the parent's distribution.
    pub unseen: Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Leaf(Leaf),
    Split(Split),
}

impl Node {
    /// Merged histogram of every trained leaf below this node.
    pub fn aggregate_histogram(&self) -> Histogram {
        let mut out = Histogram::new();
        self.for_each_leaf(&mut |leaf| {
            for (c, n) in &leaf.histogram {
                *out.entry(c.clone()).or_default() += n;
            }
        });
        out
    }

    /// Visits trained leaves; `unseen` leaves are skipped.
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&Leaf)) {
        match self {
            Node::Leaf(leaf) => f(leaf),
            Node::Split(split) => split.children.values().for_each(|c| c.for_each_leaf(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    pub attribute_names: Vec<String>,
    pub root: Node,
}

/// Classes ranked by probability, then by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranked: Vec<(String, f64)>,
}

impl Prediction {
    pub fn from_histogram(histogram: &Histogram) -> Self {
        let total: usize = histogram.values().sum();
        let mut ranked: Vec<(String, f64)> = histogram
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(c, &n)| (c.clone(), n as f64 / total as f64))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self { ranked }
    }

    pub fn top(&self) -> Option<&str> {
        self.ranked.first().map(|(c, _)| c.as_str())
    }

    /// Classes with probability at least `top_p`.
    pub fn candidates(&self, top_p: f64) -> impl Iterator<Item = &str> {
        self.ranked
            .iter()
            .filter(move |(_, p)| *p >= top_p)
            .map(|(c, _)| c.as_str())
    }
}

impl DecisionTree {
    pub fn arity(&self) -> usize {
        self.attribute_names.len()
    }

    /// Descends by attribute values; returns the prediction and the number
    /// of nodes visited.
    pub fn predict_values(&self, values: &[String]) -> Result<(Prediction, usize), TreeError> {
        if values.len() != self.arity() {
            return Err(TreeError::BadQuery {
                expected: self.arity(),
                got: values.len(),
            });
        }
        let mut node = &self.root;
        let mut visits = 1;
        loop {
            match node {
                Node::Leaf(leaf) => {
                    return Ok((Prediction::from_histogram(&leaf.histogram), visits))
                }
                Node::Split(split) => {
                    visits += 1;
                    match split.children.get(&values[split.attribute]) {
                        Some(child) => node = child,
                        None => {
                            return Ok((
                                Prediction::from_histogram(&split.unseen.histogram),
                                visits,
                            ))
                        }
                    }
                }
            }
        }
    }

    pub fn predict(&self, q: &Query) -> Result<Prediction, TreeError> {
        self.predict_values(&q.components).map(|(p, _)| p)
    }

    pub fn leaf_count(&self) -> usize {
        let mut n = 0;
        self.root.for_each_leaf(&mut |_| n += 1);
        n
    }

    /// Total rows held by trained leaves.
    pub fn training_rows(&self) -> usize {
        let mut n = 0;
        self.root.for_each_leaf(&mut |l| n += l.total());
        n
    }

    /// Longest attribute path in the tree, and whether any attribute repeats
    /// on a root-to-leaf path.
    pub fn path_stats(&self) -> (usize, bool) {
        fn walk(node: &Node, used: &mut Vec<usize>, depth: &mut usize, repeat: &mut bool) {
            if let Node::Split(s) = node {
                if used.contains(&s.attribute) {
                    *repeat = true;
                }
                used.push(s.attribute);
                *depth = (*depth).max(used.len());
                for c in s.children.values() {
                    walk(c, used, depth, repeat);
                }
                used.pop();
            }
        }
        let (mut depth, mut repeat) = (0, false);
        walk(&self.root, &mut Vec::new(), &mut depth, &mut repeat);
        (depth, repeat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub rows: usize,
    pub top1_accuracy: f64,
    pub hit_rate: f64,
    pub mean_candidates: f64,
}

/// Scores a tree on held-out rows.
pub fn evaluate(
    tree: &DecisionTree,
    holdout: &Dataset,
    top_p: f64,
) -> Result<AccuracyReport, TreeError> {
    if holdout.is_empty() {
        return Err(TreeError::EmptyData);
    }
    let (mut top1, mut hits, mut candidates) = (0usize, 0usize, 0usize);
    for row in holdout.rows() {
        let (p, _) = tree.predict_values(&row.values)?;
        if p.top() == Some(row.class.as_str()) {
            top1 += 1;
        }
        let cands: Vec<&str> = p.candidates(top_p).collect();
        if cands.contains(&row.class.as_str()) {
            hits += 1;
        }
        candidates += cands.len();
    }
    let n = holdout.len() as f64;
    Ok(AccuracyReport {
        rows: holdout.len(),
        top1_accuracy: top1 as f64 / n,
        hit_rate: hits as f64 / n,
        mean_candidates: candidates as f64 / n,
    })
}
