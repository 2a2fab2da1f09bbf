//! Meta-path enumeration and per-path feature construction.
//!
//! A meta-path is a node-type sequence anchored at Text, following the five
//! schema edges. Its feature matrix is the chain of row-normalized adjacency
//! matrices applied to the terminal type's features. The chain is associated
//! right-to-left so every intermediate is `(nodes x feature_dim)`; a naive
//! dense left-to-right oracle is kept alongside for verification.

use std::fmt;

use rayon::prelude::*;

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::hin::{EdgeType, HeteroGraph, NodeType};

/// A schema-valid node-type sequence starting at Text.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetaPath {
    nodes: Vec<NodeType>,
    edges: Vec<EdgeType>,
}

impl MetaPath {
    /// The 0-hop path "T".
    pub fn anchor() -> Self {
        Self {
            nodes: vec![NodeType::Text],
            edges: Vec::new(),
        }
    }

    /// Parse a canonical name such as "TUTETE".
    pub fn parse(name: &str) -> Result<Self> {
        let mut nodes = Vec::with_capacity(name.len());
        for c in name.chars() {
            let node = NodeType::from_code(c).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown node-type code {c:?} in {name:?}"))
            })?;
            nodes.push(node);
        }
        if nodes.first() != Some(&NodeType::Text) {
            return Err(Error::InvalidArgument(format!(
                "meta-path {name:?} must start at T"
            )));
        }
        let mut edges = Vec::with_capacity(nodes.len().saturating_sub(1));
        for pair in nodes.windows(2) {
            let edge = EdgeType::between(pair[0], pair[1]).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "no edge type {}{} in schema (path {name:?})",
                    pair[0].code(),
                    pair[1].code()
                ))
            })?;
            edges.push(edge);
        }
        Ok(Self { nodes, edges })
    }

    fn extend(&self, next: NodeType) -> Option<Self> {
        let edge = EdgeType::between(*self.nodes.last().unwrap(), next)?;
        let mut nodes = self.nodes.clone();
        let mut edges = self.edges.clone();
        nodes.push(next);
        edges.push(edge);
        Some(Self { nodes, edges })
    }

    /// Number of hops (= edges).
    pub fn hops(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeType] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeType] {
        &self.edges
    }

    pub fn terminal(&self) -> NodeType {
        *self.nodes.last().unwrap()
    }

    pub fn canonical_name(&self) -> String {
        self.nodes.iter().map(|n| n.code()).collect()
    }
}

impl fmt::Display for MetaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_name())
    }
}

/// The enumerated search space, ordered by (hops, canonical name). The
/// position of a path in this list is the index used by the importance
/// vector everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaPathCatalog {
    paths: Vec<MetaPath>,
}

impl MetaPathCatalog {
    /// Every path anchored at Text with at most `max_hops` edges, including
    /// the 0-hop "T".
    pub fn enumerate(max_hops: usize) -> Self {
        let mut paths = Vec::new();
        let mut frontier = vec![MetaPath::anchor()];
        paths.push(MetaPath::anchor());
        for _ in 0..max_hops {
            let mut next_frontier = Vec::new();
            for path in &frontier {
                for node in [NodeType::Text, NodeType::User, NodeType::Entity] {
                    if let Some(extended) = path.extend(node) {
                        paths.push(extended.clone());
                        next_frontier.push(extended);
                    }
                }
            }
            frontier = next_frontier;
        }
        paths.sort_by_key(|p| (p.hops(), p.canonical_name()));
        Self { paths }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn get(&self, index: usize) -> &MetaPath {
        &self.paths[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &MetaPath> {
        self.paths.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.paths.iter().position(|p| p.canonical_name() == name)
    }

    /// Plain-text export: one canonical name per line, in catalog order.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for path in &self.paths {
            out.push_str(&path.canonical_name());
            out.push('\n');
        }
        out
    }
}

/// Per-path dense feature matrices, aligned with a catalog's order.
#[derive(Clone, Debug)]
pub struct MetaPathFeatureSet {
    features: Vec<Mat>,
    terminals: Vec<NodeType>,
}

impl MetaPathFeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, index: usize) -> &Mat {
        &self.features[index]
    }

    pub fn terminal(&self, index: usize) -> NodeType {
        self.terminals[index]
    }

    pub fn num_texts(&self) -> usize {
        self.features.first().map_or(0, Mat::rows)
    }

    /// Replace one path's matrix; test hook for masking-locality checks.
    pub fn set_feature(&mut self, index: usize, mat: Mat) {
        assert_eq!(mat.rows(), self.features[index].rows());
        assert_eq!(mat.cols(), self.features[index].cols());
        self.features[index] = mat;
    }
}

fn check_path_against_graph(graph: &HeteroGraph, path: &MetaPath) -> Result<()> {
    for edge in path.edges() {
        let adj = graph.adjacency(*edge);
        let (src, dst) = edge.endpoints();
        if adj.rows() != graph.node_count(src) || adj.cols() != graph.node_count(dst) {
            return Err(Error::Dimension(format!(
                "adjacency {edge:?} is {}x{}, graph has {} {src:?} and {} {dst:?} nodes",
                adj.rows(),
                adj.cols(),
                graph.node_count(src),
                graph.node_count(dst),
            )));
        }
    }
    Ok(())
}

/// Chain product for one path: adjacencies applied right-to-left to the
/// terminal features. The 0-hop path returns the Text features unchanged.
pub fn construct_features(graph: &HeteroGraph, path: &MetaPath) -> Result<Mat> {
    check_path_against_graph(graph, path)?;
    let mut acc = graph.features(path.terminal()).clone();
    for edge in path.edges().iter().rev() {
        acc = graph.adjacency(*edge).mul_dense(&acc);
    }
    Ok(acc)
}

/// Features for every path in the catalog. Paths are independent, so they
/// are computed in parallel; each result lands in its own slot and the
/// output is bitwise independent of the degree of parallelism.
pub fn construct_all(graph: &HeteroGraph, catalog: &MetaPathCatalog) -> Result<MetaPathFeatureSet> {
    let features: Result<Vec<Mat>> = catalog
        .paths
        .par_iter()
        .map(|path| construct_features(graph, path))
        .collect();
    Ok(MetaPathFeatureSet {
        features: features?,
        terminals: catalog.paths.iter().map(MetaPath::terminal).collect(),
    })
}

/// Verification oracle: the same product evaluated naively, dense and
/// left-to-right. Shares nothing with `construct_features` beyond the graph
/// accessors. Intended for tests on small graphs.
pub fn dense_oracle(graph: &HeteroGraph, path: &MetaPath) -> Result<Mat> {
    check_path_against_graph(graph, path)?;
    let terminal_features = graph.features(path.terminal());
    let mut acc: Option<Mat> = None;
    for edge in path.edges() {
        let dense = graph.adjacency(*edge).to_dense();
        acc = Some(match acc {
            None => dense,
            Some(m) => m.matmul(&dense),
        });
    }
    Ok(match acc {
        None => terminal_features.clone(),
        Some(m) => m.matmul(terminal_features),
    })
}
