//! Weighted directed acyclic graphs, shared by causal discovery (as the
//! connection-strength matrix) and the causal generator (as wiring).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::ScmSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default = "unit_weight")]
    pub weight: f64,
}

impl Edge {
    pub fn new(from: &str, to: &str, weight: f64) -> Self {
        Edge { from: from.to_string(), to: to.to_string(), weight }
    }
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedDag {
    nodes: Vec<String>,
    edges: Vec<Edge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDag {
    nodes: Vec<String>,
    edges: Vec<Edge>,
}

impl<'de> Deserialize<'de> for WeightedDag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDag::deserialize(d)?;
        WeightedDag::new(raw.nodes, raw.edges).map_err(serde::de::Error::custom)
    }
}

impl WeightedDag {
    pub fn new(nodes: Vec<String>, edges: Vec<Edge>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::Graph(format!("duplicate node `{n}`")));
            }
        }
        for (i, e) in edges.iter().enumerate() {
            if !nodes.contains(&e.from) || !nodes.contains(&e.to) {
                return Err(Error::Graph(format!("edge {} -> {} uses an unknown node", e.from, e.to)));
            }
            if e.from == e.to {
                return Err(Error::Graph(format!("self-loop on `{}`", e.from)));
            }
            if !e.weight.is_finite() {
                return Err(Error::Graph(format!("non-finite weight on {} -> {}", e.from, e.to)));
            }
            if edges[..i].iter().any(|o| o.from == e.from && o.to == e.to) {
                return Err(Error::Graph(format!("duplicate edge {} -> {}", e.from, e.to)));
            }
        }
        let dag = WeightedDag { nodes, edges };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn empty(nodes: Vec<String>) -> Result<Self> {
        WeightedDag::new(nodes, Vec::new())
    }

    /// Builds a graph from `b[to][from]` entries with `|b| >= threshold`.
    pub fn from_matrix(nodes: &[String], b: &Array2<f64>, threshold: f64) -> Result<Self> {
        let k = nodes.len();
        if b.dim() != (k, k) {
            return Err(Error::Shape("adjacency matrix does not match node count".into()));
        }
        let mut edges = Vec::new();
        for from in 0..k {
            for to in 0..k {
                let w = b[[to, from]];
                if from != to && w != 0.0 && w.abs() >= threshold {
                    edges.push(Edge { from: nodes[from].clone(), to: nodes[to].clone(), weight: w });
                }
            }
        }
        WeightedDag::new(nodes.to_vec(), edges)
    }

    /// Contemporaneous structure of a structural model, weighted by coefficient.
    pub fn from_scm(spec: &ScmSpec) -> Result<Self> {
        let vars = spec.variables();
        let mut edges = Vec::new();
        for v in vars {
            for t in spec.equation(v).unwrap_or(&[]).iter().filter(|t| t.lag == 0) {
                edges.push(Edge { from: t.parent.clone(), to: v.clone(), weight: t.coef });
            }
        }
        WeightedDag::new(vars.to_vec(), edges)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn weight(&self, from: &str, to: &str) -> Option<f64> {
        self.edges.iter().find(|e| e.from == from && e.to == to).map(|e| e.weight)
    }

    /// Parent indices of node `i`, in node order.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        let name = &self.nodes[i];
        let mut ps: Vec<usize> =
            self.edges.iter().filter(|e| &e.to == name).map(|e| self.index_of(&e.from).unwrap()).collect();
        ps.sort_unstable();
        ps
    }

    /// `b[to][from] = weight`.
    pub fn adjacency(&self) -> Array2<f64> {
        let k = self.nodes.len();
        let mut b = Array2::zeros((k, k));
        for e in &self.edges {
            b[[self.index_of(&e.to).unwrap(), self.index_of(&e.from).unwrap()]] = e.weight;
        }
        b
    }

    /// Kahn's algorithm; ties resolve in node order.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let k = self.nodes.len();
        let mut indeg = vec![0usize; k];
        let idx = |n: &str| self.nodes.iter().position(|x| x == n).unwrap();
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (idx(&e.from), idx(&e.to))).collect();
        for &(_, t) in &pairs {
            indeg[t] += 1;
        }
        let mut done = vec![false; k];
        let mut order = Vec::with_capacity(k);
        while order.len() < k {
            let Some(i) = (0..k).find(|&i| !done[i] && indeg[i] == 0) else {
                let stuck: Vec<&str> = (0..k).filter(|&i| !done[i]).map(|i| self.nodes[i].as_str()).collect();
                return Err(Error::Graph(format!("cycle among {stuck:?}")));
            };
            done[i] = true;
            order.push(i);
            for &(f, t) in &pairs {
                if f == i {
                    indeg[t] -= 1;
                }
            }
        }
        Ok(order)
    }

    /// All nodes reachable from `i` along directed edges (excluding `i`).
    pub fn descendants(&self, i: usize) -> Vec<usize> {
        let k = self.nodes.len();
        let mut seen = vec![false; k];
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            for (c, s) in seen.iter_mut().enumerate() {
                if !*s && self.parents(c).contains(&v) {
                    *s = true;
                    stack.push(c);
                }
            }
        }
        (0..k).filter(|&c| seen[c] && c != i).collect()
    }

    /// Same structure, every weight set to 1.
    pub fn unweighted(&self) -> Self {
        let edges = self.edges.iter().map(|e| Edge { weight: 1.0, ..e.clone() }).collect();
        WeightedDag { nodes: self.nodes.clone(), edges }
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{model_a, NoiseDist};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rejects_cycles() {
        let edges = vec![
            Edge { from: "a".into(), to: "b".into(), weight: 1.0 },
            Edge { from: "b".into(), to: "a".into(), weight: 1.0 },
        ];
        assert!(WeightedDag::new(names(&["a", "b"]), edges).is_err());
    }

    #[test]
    fn model_a_graph_and_order() {
        let g = WeightedDag::from_scm(&model_a(NoiseDist::gaussian(0.0, 0.5)).unwrap()).unwrap();
        assert_eq!(g.edges().len(), 5);
        let order: Vec<&str> = g.topological_order().unwrap().iter().map(|&i| g.nodes()[i].as_str()).collect();
        assert_eq!(&order[..2], &["z1", "z2"]);
        assert_eq!(order[4], "y");
        let d: Vec<&str> = g.descendants(g.index_of("z1").unwrap()).iter().map(|&i| g.nodes()[i].as_str()).collect();
        assert_eq!(d, vec!["y", "x1"]);
    }

    #[test]
    fn json_round_trip() {
        let g = WeightedDag::from_scm(&model_a(NoiseDist::uniform(-1.0, 1.0)).unwrap()).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: WeightedDag = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
        assert!(serde_json::from_str::<WeightedDag>(r#"{"nodes":["a"],"edges":[{"from":"a","to":"a"}]}"#).is_err());
    }

    #[test]
    fn adjacency_matrix_round_trip() {
        let g = WeightedDag::from_scm(&model_a(NoiseDist::uniform(-1.0, 1.0)).unwrap()).unwrap();
        let back = WeightedDag::from_matrix(g.nodes(), &g.adjacency(), 0.1).unwrap();
        assert_eq!(back.adjacency(), g.adjacency());
    }
}
