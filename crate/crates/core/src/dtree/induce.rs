use std::collections::BTreeMap;

use indexmap::IndexMap;

use super::{Dataset, DecisionTree, Histogram, Leaf, Node, Split, TreeError};

const TIE_EPS: f64 = 1e-12;

fn entropy_of<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let counts: Vec<usize> = counts.into_iter().filter(|&n| n > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Shannon entropy in bits of a class histogram.
pub fn entropy(class_counts: &Histogram) -> Result<f64, TreeError> {
    if class_counts.values().sum::<usize>() == 0 {
        return Err(TreeError::EmptyData);
    }
    Ok(entropy_of(class_counts.values().copied()))
}

/// Per-value class counts of one attribute over a row subset.
struct Partition<'a> {
    parent: BTreeMap<&'a str, usize>,
    by_value: BTreeMap<&'a str, BTreeMap<&'a str, usize>>,
    rows: usize,
}

impl<'a> Partition<'a> {
    fn new(data: &'a Dataset, rows: &[usize], attribute: usize) -> Self {
        let mut parent = BTreeMap::new();
        let mut by_value: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
        for &i in rows {
            let row = &data.rows()[i];
            *parent.entry(row.class.as_str()).or_default() += 1;
            *by_value
                .entry(row.values[attribute].as_str())
                .or_default()
                .entry(row.class.as_str())
                .or_default() += 1;
        }
        Self {
            parent,
            by_value,
            rows: rows.len(),
        }
    }

    fn gain(&self) -> f64 {
        let n = self.rows as f64;
        let remainder: f64 = self
            .by_value
            .values()
            .map(|h| {
                let size: usize = h.values().sum();
                size as f64 / n * entropy_of(h.values().copied())
            })
            .sum();
        entropy_of(self.parent.values().copied()) - remainder
    }

    fn split_info(&self) -> f64 {
        entropy_of(self.by_value.values().map(|h| h.values().sum()))
    }

    fn gain_ratio(&self) -> f64 {
        let si = self.split_info();
        if si <= TIE_EPS {
            return 0.0;
        }
        self.gain() / si
    }
}

fn check(data: &Dataset, attribute: usize) -> Result<Vec<usize>, TreeError> {
    if attribute >= data.arity() {
        return Err(TreeError::BadAttribute(attribute));
    }
    if data.is_empty() {
        return Err(TreeError::EmptyData);
    }
    Ok((0..data.len()).collect())
}

/// Information gain of splitting the whole dataset on `attribute`.
pub fn information_gain(data: &Dataset, attribute: usize) -> Result<f64, TreeError> {
    let rows = check(data, attribute)?;
    Ok(Partition::new(data, &rows, attribute).gain())
}

/// Gain divided by split information; 0 when the attribute takes a single
/// value on the data.
pub fn gain_ratio(data: &Dataset, attribute: usize) -> Result<f64, TreeError> {
    let rows = check(data, attribute)?;
    Ok(Partition::new(data, &rows, attribute).gain_ratio())
}

fn histogram_of(data: &Dataset, rows: &[usize]) -> Histogram {
    let mut h = Histogram::new();
    for &i in rows {
        *h.entry(data.rows()[i].class.clone()).or_default() += 1;
    }
    h
}

fn grow(data: &Dataset, rows: &[usize], used: &mut [bool], min_rows: usize) -> Node {
    let histogram = histogram_of(data, rows);
    if histogram.len() <= 1 || rows.len() < min_rows {
        return Node::Leaf(Leaf::from_histogram(histogram));
    }
    let mut best: Option<(usize, f64)> = None;
    for attribute in (0..data.arity()).filter(|&a| !used[a]) {
        let partition = Partition::new(data, rows, attribute);
        let ratio = partition.gain_ratio();
        debug_assert!({
            let g = partition.gain();
            g >= -1e-9 && g <= entropy_of(partition.parent.values().copied()) + 1e-9
        });
        if ratio > TIE_EPS && best.is_none_or(|(_, b)| ratio > b + TIE_EPS) {
            best = Some((attribute, ratio));
        }
    }
    let Some((attribute, _)) = best else {
        return Node::Leaf(Leaf::from_histogram(histogram));
    };

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in rows {
        groups
            .entry(data.rows()[i].values[attribute].as_str())
            .or_default()
            .push(i);
    }
    used[attribute] = true;
    let children: IndexMap<String, Node> = groups
        .into_iter()
        .map(|(value, subset)| (value.to_owned(), grow(data, &subset, used, min_rows)))
        .collect();
    used[attribute] = false;
    Node::Split(Split {
        attribute,
        children,
        unseen: Leaf::from_histogram(histogram),
    })
}

/// Grows a tree until every node is pure, has no attribute with positive gain
/// ratio left, or holds fewer than `min_rows` rows. No pruning.
pub fn induce(data: &Dataset, min_rows: usize) -> Result<DecisionTree, TreeError> {
    if data.is_empty() {
        return Err(TreeError::EmptyData);
    }
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut used = vec![false; data.arity()];
    Ok(DecisionTree {
        attribute_names: data.attribute_names.clone(),
        root: grow(data, &rows, &mut used, min_rows.max(1)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[(&[&str], &str)]) -> Dataset {
        let mut d = Dataset::with_arity(rows[0].0.len());
        for (values, class) in rows {
            d.push(values.iter().map(|v| v.to_string()).collect(), *class)
                .unwrap();
        }
        d
    }

    #[test]
    fn entropy_basics() {
        let h = |p: &[(&str, usize)]| -> Histogram {
            p.iter().map(|(c, n)| (c.to_string(), *n)).collect()
        };
        assert_eq!(entropy(&h(&[("A", 7)])).unwrap(), 0.0);
        assert_eq!(entropy(&h(&[("A", 3), ("B", 3)])).unwrap(), 1.0);
        assert_eq!(entropy(&Histogram::new()), Err(TreeError::EmptyData));
        assert_eq!(entropy(&h(&[("A", 0)])), Err(TreeError::EmptyData));
    }

    #[test]
    fn single_valued_attribute_has_zero_ratio() {
        let d = dataset(&[(&["x", "a"], "P"), (&["x", "b"], "Q"), (&["x", "a"], "P")]);
        assert_eq!(gain_ratio(&d, 0).unwrap(), 0.0);
        assert!(gain_ratio(&d, 1).unwrap() > 0.0);
        assert_eq!(gain_ratio(&d, 2), Err(TreeError::BadAttribute(2)));
    }

    #[test]
    fn perfect_split_ratio_equals_entropy() {
        let d = dataset(&[
            (&["a", "m"], "P"),
            (&["a", "n"], "P"),
            (&["b", "m"], "Q"),
            (&["b", "n"], "Q"),
        ]);
        let h = entropy(&d.class_histogram()).unwrap();
        assert_eq!(information_gain(&d, 0).unwrap(), h);
        assert_eq!(gain_ratio(&d, 0).unwrap(), h / 1.0);
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let d = dataset(&[(&["a", "b"], "SP0"), (&["c", "d"], "SP0")]);
        let t = induce(&d, 1).unwrap();
        match &t.root {
            Node::Leaf(l) => {
                assert_eq!(l.label, "SP0");
                assert_eq!(l.misclassified(), 0);
            }
            other => panic!("expected leaf, got {other:?}"),
        }
        assert_eq!(
            induce(&Dataset::with_arity(2), 1),
            Err(TreeError::EmptyData)
        );
    }

    #[test]
    fn first_component_determines_class() {
        let d = dataset(&[
            (&["k", "x", "p"], "SP0"),
            (&["k", "y", "q"], "SP0"),
            (&["m", "x", "q"], "SP3"),
            (&["m", "y", "p"], "SP3"),
            (&["n", "x", "p"], "SSP17"),
        ]);
        let t = induce(&d, 1).unwrap();
        let Node::Split(root) = &t.root else {
            panic!("expected split")
        };
        assert_eq!(root.attribute, 0);
        assert_eq!(root.children.keys().collect::<Vec<_>>(), ["k", "m", "n"]);
        for child in root.children.values() {
            match child {
                Node::Leaf(l) => assert_eq!(l.misclassified(), 0),
                _ => panic!("children should be pure leaves"),
            }
        }
        assert_eq!(root.unseen.histogram, d.class_histogram());
        assert_eq!(t.training_rows(), d.len());
    }

    #[test]
    fn unseen_values_fall_back_to_parent_distribution() {
        let d = dataset(&[(&["a"], "X"), (&["a"], "X"), (&["b"], "Y")]);
        let t = induce(&d, 1).unwrap();
        let (p, visits) = t.predict_values(&["zzz".into()]).unwrap();
        assert_eq!(p.top(), Some("X"));
        assert!((p.ranked[0].1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(visits, 2);
    }

    #[test]
    fn min_rows_stops_growth() {
        let d = dataset(&[(&["a"], "X"), (&["b"], "Y")]);
        assert!(matches!(induce(&d, 3).unwrap().root, Node::Leaf(_)));
        assert!(matches!(induce(&d, 1).unwrap().root, Node::Split(_)));
    }

    #[test]
    fn equal_ratios_prefer_lower_index() {
        let d = dataset(&[(&["a", "a"], "X"), (&["b", "b"], "Y")]);
        let Node::Split(root) = induce(&d, 1).unwrap().root else {
            panic!()
        };
        assert_eq!(root.attribute, 0);
    }
}
