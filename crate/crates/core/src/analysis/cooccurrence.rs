use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const DEFAULT_PRUNE_THRESHOLD: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub tag: String,
    pub degree: usize,
    /// Stimuli on which the tag is visible.
    pub frequency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub threshold: usize,
}

/// Tags are nodes; an edge's weight counts the stimuli where both tags are
/// visible. Edges lighter than `threshold` are dropped, then isolated nodes.
pub fn cooccurrence_graph(tag_sets: &[BTreeSet<String>], threshold: usize) -> CooccurrenceGraph {
    let mut weights: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for set in tag_sets {
        let tags: Vec<&str> = set.iter().map(String::as_str).collect();
        for (i, a) in tags.iter().enumerate() {
            *freq.entry(a).or_default() += 1;
            for b in &tags[i + 1..] {
                *weights.entry((a, b)).or_default() += 1;
            }
        }
    }
    let edges: Vec<Edge> = weights
        .into_iter()
        .filter(|&(_, w)| w >= threshold)
        .map(|((a, b), weight)| Edge {
            a: a.to_string(),
            b: b.to_string(),
            weight,
        })
        .collect();
    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &edges {
        *degree.entry(&e.a).or_default() += 1;
        *degree.entry(&e.b).or_default() += 1;
    }
    let nodes = degree
        .into_iter()
        .map(|(t, d)| Node {
            tag: t.to_string(),
            degree: d,
            frequency: freq[t],
        })
        .collect();
    CooccurrenceGraph {
        nodes,
        edges,
        threshold,
    }
}

impl CooccurrenceGraph {
    pub fn edges_csv(&self) -> String {
        let mut s = String::from("source,target,weight\n");
        for e in &self.edges {
            s.push_str(&format!("{},{},{}\n", e.a, e.b, e.weight));
        }
        s
    }

    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("id,degree,frequency\n");
        for n in &self.nodes {
            s.push_str(&format!("{},{},{}\n", n.tag, n.degree, n.frequency));
        }
        s
    }
}
