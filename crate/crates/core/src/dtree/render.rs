//! Text form of a tree, one line per node:
//!
//! ```text
//! componentW1 = a
//! | componentW2 = b: SP0 (26.0/11.0)
//! | componentW2 = c: SP3 (12.0)
//! componentW1 = d: SSP17 (40.0)
//! ```
//!
//! A leaf prints its label, its row count and, when non-zero, the number of
//! rows it misclassifies. `unseen` leaves are not printed; parsing rebuilds
//! them from the branches below each split.

use std::fmt::Write;

use indexmap::IndexMap;

use super::{DecisionTree, Histogram, Leaf, Node, Split, TreeError};

/// Class that absorbs the misclassified rows of a parsed leaf, whose true
/// classes the text does not record.
pub const UNATTRIBUTED_CLASS: &str = "?";

fn leaf_suffix(out: &mut String, leaf: &Leaf) {
    let m = leaf.misclassified();
    if m == 0 {
        writeln!(out, ": {} ({}.0)", leaf.label, leaf.total()).unwrap();
    } else {
        writeln!(out, ": {} ({}.0/{m}.0)", leaf.label, leaf.total()).unwrap();
    }
}

fn render_split(out: &mut String, names: &[String], split: &Split, depth: usize) {
    let name = &names[split.attribute];
    for (value, child) in &split.children {
        for _ in 0..depth {
            out.push_str("| ");
        }
        write!(out, "{name} = {value}").unwrap();
        match child {
            Node::Leaf(leaf) => leaf_suffix(out, leaf),
            Node::Split(inner) => {
                out.push('\n');
                render_split(out, names, inner, depth + 1);
            }
        }
    }
}

pub fn render(tree: &DecisionTree) -> String {
    let mut out = String::new();
    match &tree.root {
        Node::Leaf(leaf) => leaf_suffix(&mut out, leaf),
        Node::Split(split) => render_split(&mut out, &tree.attribute_names, split, 0),
    }
    out
}

struct Line<'a> {
    number: usize,
    depth: usize,
    attribute: &'a str,
    value: &'a str,
    leaf: Option<Leaf>,
}

fn parse_error(line: usize, message: impl Into<String>) -> TreeError {
    TreeError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_count(text: &str, line: usize) -> Result<usize, TreeError> {
    let x: f64 = text
        .parse()
        .map_err(|_| parse_error(line, format!("bad count {text:?}")))?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(parse_error(
            line,
            format!("count {text} is not a whole number"),
        ));
    }
    Ok(x as usize)
}

/// `label (n.0)` or `label (n.0/m.0)`.
fn parse_leaf(text: &str, line: usize) -> Result<Leaf, TreeError> {
    let (label, counts) = text
        .split_once(" (")
        .ok_or_else(|| parse_error(line, "leaf without counts"))?;
    let counts = counts
        .strip_suffix(')')
        .ok_or_else(|| parse_error(line, "unterminated counts"))?;
    let (n, m) = match counts.split_once('/') {
        Some((n, m)) => (parse_count(n, line)?, parse_count(m, line)?),
        None => (parse_count(counts, line)?, 0),
    };
    if m > n || label.is_empty() {
        return Err(parse_error(line, "inconsistent leaf"));
    }
    let mut histogram = Histogram::new();
    histogram.insert(label.to_owned(), n - m);
    if m > 0 {
        histogram.insert(UNATTRIBUTED_CLASS.to_owned(), m);
    }
    Ok(Leaf {
        label: label.to_owned(),
        histogram,
    })
}

fn parse_line(raw: &str, number: usize) -> Result<Line<'_>, TreeError> {
    let mut depth = 0;
    let mut rest = raw;
    while let Some(r) = rest.strip_prefix("| ") {
        depth += 1;
        rest = r;
    }
    let (attribute, rule) = rest
        .split_once(" = ")
        .ok_or_else(|| parse_error(number, "expected `attribute = value`"))?;
    let (value, leaf) = match rule.rsplit_once(": ") {
        Some((value, leaf)) => (value, Some(parse_leaf(leaf, number)?)),
        None => (rule, None),
    };
    if value.is_empty() || value.contains(char::is_whitespace) {
        return Err(parse_error(number, format!("bad value {value:?}")));
    }
    Ok(Line {
        number,
        depth,
        attribute,
        value,
        leaf,
    })
}

fn build<'a>(
    lines: &[Line<'a>],
    pos: &mut usize,
    depth: usize,
) -> Result<(&'a str, Split), TreeError> {
    let attribute = lines[*pos].attribute;
    let mut children = IndexMap::new();
    while *pos < lines.len() && lines[*pos].depth == depth {
        let line = &lines[*pos];
        if line.attribute != attribute {
            return Err(parse_error(
                line.number,
                format!(
                    "sibling tests {} but the branch tests {attribute}",
                    line.attribute
                ),
            ));
        }
        *pos += 1;
        let child = match &line.leaf {
            Some(leaf) => Node::Leaf(leaf.clone()),
            None => {
                if *pos >= lines.len() || lines[*pos].depth != depth + 1 {
                    return Err(parse_error(line.number, "inner node without children"));
                }
                let (name, inner) = build(lines, pos, depth + 1)?;
                Node::Split(Split {
                    attribute: attribute_slot(name, line.number)?,
                    ..inner
                })
            }
        };
        if children.insert(line.value.to_owned(), child).is_some() {
            return Err(parse_error(
                line.number,
                format!("duplicate branch {}", line.value),
            ));
        }
    }
    if *pos < lines.len() && lines[*pos].depth > depth {
        return Err(parse_error(lines[*pos].number, "unexpected indentation"));
    }
    let mut split = Split {
        attribute: 0,
        children,
        unseen: Leaf::from_histogram(Histogram::new()),
    };
    split.unseen = Leaf::from_histogram(Node::Split(split.clone()).aggregate_histogram());
    Ok((attribute, split))
}

/// Attribute names end in their 1-based position: `componentW3` is slot 2.
fn attribute_slot(name: &str, line: usize) -> Result<usize, TreeError> {
    let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    name[name.len() - digits..]
        .parse::<usize>()
        .ok()
        .filter(|&n| n >= 1)
        .map(|n| n - 1)
        .ok_or_else(|| parse_error(line, format!("attribute {name} has no position suffix")))
}

fn attribute_prefix(name: &str) -> &str {
    name.trim_end_matches(|c: char| c.is_ascii_digit())
}

/// Parses the rendered form back into a tree. The attribute list is
/// `<prefix>1 … <prefix>k` with `k` the largest position seen, or `arity`
/// when given and larger.
pub fn parse_tree(text: &str, arity: Option<usize>) -> Result<DecisionTree, TreeError> {
    let raw: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    if raw.is_empty() {
        return Err(TreeError::EmptyData);
    }
    if let [(number, only)] = raw.as_slice() {
        if let Some(rest) = only.strip_prefix(": ") {
            let k = arity.unwrap_or(0);
            return Ok(DecisionTree {
                attribute_names: super::default_attribute_names(k),
                root: Node::Leaf(parse_leaf(rest, *number)?),
            });
        }
    }
    let lines = raw
        .iter()
        .map(|(n, l)| parse_line(l, *n))
        .collect::<Result<Vec<_>, _>>()?;
    if lines[0].depth != 0 {
        return Err(parse_error(
            lines[0].number,
            "first line must be at depth 0",
        ));
    }
    let prefix = attribute_prefix(lines[0].attribute);
    let mut k = arity.unwrap_or(0);
    for line in &lines {
        if attribute_prefix(line.attribute) != prefix {
            return Err(parse_error(line.number, "mixed attribute naming"));
        }
        k = k.max(attribute_slot(line.attribute, line.number)? + 1);
    }
    let mut pos = 0;
    let (name, split) = build(&lines, &mut pos, 0)?;
    if pos != lines.len() {
        return Err(parse_error(lines[pos].number, "trailing lines"));
    }
    Ok(DecisionTree {
        attribute_names: (1..=k).map(|i| format!("{prefix}{i}")).collect(),
        root: Node::Split(Split {
            attribute: attribute_slot(name, lines[0].number)?,
            ..split
        }),
    })
}
