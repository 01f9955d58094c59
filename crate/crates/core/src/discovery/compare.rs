use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedDag};

/// One true edge and what discovery made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeComparison {
    pub from: String,
    pub to: String,
    pub true_weight: f64,
    /// Weight found in either direction; 0 when missing.
    pub found_weight: f64,
    pub reversed: bool,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphComparison {
    pub true_edges: Vec<EdgeComparison>,
    /// Found edges with no counterpart (in either direction) in the truth.
    pub spurious: Vec<Edge>,
}

impl GraphComparison {
    pub fn missing_count(&self) -> usize {
        self.true_edges.iter().filter(|e| e.missing).count()
    }

    pub fn reversed_count(&self) -> usize {
        self.true_edges.iter().filter(|e| e.reversed).count()
    }

    pub fn is_exact(&self) -> bool {
        self.spurious.is_empty() && self.true_edges.iter().all(|e| !e.missing && !e.reversed)
    }

    /// Largest absolute spurious weight (0 when none).
    pub fn max_spurious(&self) -> f64 {
        self.spurious.iter().fold(0.0, |m, e| m.max(e.weight.abs()))
    }

    /// Aligned text, reversed effects marked with `*`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>8} {:>8}", "effect", "true", "found");
        for e in &self.true_edges {
            let found = if e.missing { "-".to_string() } else { format!("{:.2}", e.found_weight) };
            let mark = if e.reversed { "*" } else { "" };
            let _ = writeln!(out, "{:<14} {:>8.2} {:>8}{mark}", format!("{} -> {}", e.from, e.to), e.true_weight, found);
        }
        for e in &self.spurious {
            let _ = writeln!(out, "{:<14} {:>8.2} {:>8.2}", format!("{} -> {}", e.from, e.to), 0.0, e.weight);
        }
        out
    }
}

pub fn compare_graphs(found: &WeightedDag, truth: &WeightedDag) -> Result<GraphComparison> {
    let mut a: Vec<&String> = found.nodes().iter().collect();
    let mut b: Vec<&String> = truth.nodes().iter().collect();
    a.sort();
    b.sort();
    if a != b {
        return Err(Error::Graph("graphs are over different node sets".into()));
    }
    let true_edges = truth
        .edges()
        .iter()
        .map(|t| {
            let (found_weight, reversed, missing) = match (found.weight(&t.from, &t.to), found.weight(&t.to, &t.from)) {
                (Some(w), _) => (w, false, false),
                (None, Some(w)) => (w, true, false),
                (None, None) => (0.0, false, true),
            };
            EdgeComparison {
                from: t.from.clone(),
                to: t.to.clone(),
                true_weight: t.weight,
                found_weight,
                reversed,
                missing,
            }
        })
        .collect();
    let spurious = found
        .edges()
        .iter()
        .filter(|e| truth.weight(&e.from, &e.to).is_none() && truth.weight(&e.to, &e.from).is_none())
        .cloned()
        .collect();
    Ok(GraphComparison { true_edges, spurious })
}
