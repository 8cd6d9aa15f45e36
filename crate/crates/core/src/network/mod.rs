//! Weighted, directed, multilayer contact networks.
//!
//! Every layer keeps its arcs twice: a row-compressed index answering "whom
//! does node `i` influence" and a column-compressed index answering "who
//! influences node `i`". Both describe the same arc multiset.

mod edgelist;
mod generate;

use std::fmt;
use std::sync::Arc;

pub use edgelist::{
    load_edge_list, parse_edge_list, parse_labeled_edge_list, write_edge_list, NodeLabels,
};
pub use generate::{generate, geometric_radius_for_degree, GeneratorKind};

/// Dense 0-based node identifier as stored in the adjacency arrays.
pub type NodeId = u32;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    InvalidArc { line: usize, msg: String },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("arc weight {0} is not strictly positive and finite")]
    BadWeight(f64),
    #[error("node {node} out of range for a network of {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("layer {layer} has {found} nodes, expected {expected}")]
    NodeCountMismatch {
        layer: usize,
        found: usize,
        expected: usize,
    },
    #[error("a multilayer network needs at least one layer")]
    NoLayers,
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("network has more than {} nodes", NodeId::MAX)]
    TooLarge,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One compressed adjacency direction: `offsets` has `n + 1` entries and
/// `targets[offsets[i]..offsets[i + 1]]` lists the neighbors of `i` in
/// strictly increasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct Compressed {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<f64>,
}

impl Compressed {
    /// Builds from `(row, col, weight)` triples that are already merged, so
    /// every `(row, col)` pair appears at most once.
    fn from_sorted_unique(n: usize, mut arcs: Vec<(NodeId, NodeId, f64)>) -> Self {
        arcs.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut offsets = vec![0usize; n + 1];
        for &(r, _, _) in &arcs {
            offsets[r as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.iter().map(|a| a.1).collect();
        let weights = arcs.iter().map(|a| a.2).collect();
        Self {
            offsets,
            targets,
            weights,
        }
    }

    /// Transposes this index, yielding the other direction.
    fn transpose(&self) -> Self {
        let n = self.offsets.len() - 1;
        let mut offsets = vec![0usize; n + 1];
        for &t in &self.targets {
            offsets[t as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0 as NodeId; self.targets.len()];
        let mut weights = vec![0.0; self.weights.len()];
        // Rows are visited in increasing order, so each transposed row comes
        // out sorted without a second pass.
        for row in 0..n {
            for k in self.offsets[row]..self.offsets[row + 1] {
                let col = self.targets[k] as usize;
                let slot = cursor[col];
                targets[slot] = row as NodeId;
                weights[slot] = self.weights[k];
                cursor[col] += 1;
            }
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> (&[NodeId], &[f64]) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        (&self.targets[a..b], &self.weights[a..b])
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A borrowed adjacency row, iterable as `(neighbor, weight)` pairs.
#[derive(Clone, Copy, Debug)]
pub struct Neighbors<'a> {
    pub ids: &'a [NodeId],
    pub weights: &'a [f64],
}

impl<'a> Neighbors<'a> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.ids
            .iter()
            .zip(self.weights)
            .map(|(&j, &w)| (j as usize, w))
    }

    pub fn to_vec(&self) -> Vec<(usize, f64)> {
        self.iter().collect()
    }
}

/// A single weighted directed layer stored in both CSR and CSC form.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGraph {
    node_count: usize,
    out_index: Compressed,
    in_index: Compressed,
}

impl LayerGraph {
    /// Builds a layer from arcs `(src, dst, weight)`.
    ///
    /// Duplicate arcs are merged by summing their weights. Self-loops and
    /// non-positive or non-finite weights are rejected.
    pub fn from_arcs<I>(node_count: usize, arcs: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if node_count > NodeId::MAX as usize {
            return Err(NetworkError::TooLarge);
        }
        let mut raw = Vec::new();
        for (s, d, w) in arcs {
            check_arc(node_count, s, d, w)?;
            raw.push((s as NodeId, d as NodeId, w));
        }
        raw.sort_by_key(|&(s, d, _)| (s, d));
        let mut merged: Vec<(NodeId, NodeId, f64)> = Vec::with_capacity(raw.len());
        for (s, d, w) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == s && last.1 == d => last.2 += w,
                _ => merged.push((s, d, w)),
            }
        }
        let out_index = Compressed::from_sorted_unique(node_count, merged);
        let in_index = out_index.transpose();
        Ok(Self {
            node_count,
            out_index,
            in_index,
        })
    }

    /// Builds a symmetric layer: each pair `(a, b, w)` yields arcs `a→b` and `b→a`.
    pub fn from_undirected<I>(node_count: usize, edges: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        Self::from_arcs(
            node_count,
            edges
                .into_iter()
                .flat_map(|(a, b, w)| [(a, b, w), (b, a, w)]),
        )
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arc_count(&self) -> usize {
        self.out_index.targets.len()
    }

    /// Nodes that `node` influences: every `j` with an arc `node→j`.
    pub fn out_neighbors(&self, node: usize) -> Result<Neighbors<'_>, NetworkError> {
        self.check_node(node)?;
        Ok(self.out_row(node))
    }

    /// Potential inducers of `node`: every `j` with an arc `j→node`.
    pub fn in_weights(&self, node: usize) -> Result<Neighbors<'_>, NetworkError> {
        self.check_node(node)?;
        Ok(self.in_row(node))
    }

    #[inline]
    pub(crate) fn out_row(&self, node: usize) -> Neighbors<'_> {
        let (ids, weights) = self.out_index.row(node);
        Neighbors { ids, weights }
    }

    #[inline]
    pub(crate) fn in_row(&self, node: usize) -> Neighbors<'_> {
        let (ids, weights) = self.in_index.row(node);
        Neighbors { ids, weights }
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_index.offsets[node + 1] - self.out_index.offsets[node]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.in_index.offsets[node + 1] - self.in_index.offsets[node]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count)
            .map(|i| self.out_degree(i).max(self.in_degree(i)))
            .max()
            .unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.node_count == 0 {
            0.0
        } else {
            self.arc_count() as f64 / self.node_count as f64
        }
    }

    pub fn out_index(&self) -> &Compressed {
        &self.out_index
    }

    pub fn in_index(&self) -> &Compressed {
        &self.in_index
    }

    /// True when every arc `i→j` has a reverse arc `j→i` of equal weight.
    pub fn is_symmetric(&self) -> bool {
        self.out_index == self.in_index
    }

    /// Iterates all arcs as `(src, dst, weight)` in row-major order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count).flat_map(move |i| self.out_row(i).iter().map(move |(j, w)| (i, j, w)))
    }

    /// Same topology with every weight replaced by `f(src, dst, weight)`.
    /// Symmetric pairs should receive symmetric weights if symmetry matters.
    pub fn reweighted<F>(&self, mut f: F) -> Result<Self, NetworkError>
    where
        F: FnMut(usize, usize, f64) -> f64,
    {
        let arcs: Vec<_> = self.arcs().map(|(i, j, w)| (i, j, f(i, j, w))).collect();
        Self::from_arcs(self.node_count, arcs)
    }

    /// Copy of this layer padded with isolated nodes up to `node_count`.
    pub fn with_node_count(&self, node_count: usize) -> Result<Self, NetworkError> {
        if node_count < self.node_count {
            return Err(NetworkError::NodeCountMismatch {
                layer: 0,
                found: self.node_count,
                expected: node_count,
            });
        }
        Self::from_arcs(node_count, self.arcs())
    }

    fn check_node(&self, node: usize) -> Result<(), NetworkError> {
        if node >= self.node_count {
            Err(NetworkError::NodeOutOfRange {
                node,
                nodes: self.node_count,
            })
        } else {
            Ok(())
        }
    }
}

fn check_arc(n: usize, s: usize, d: usize, w: f64) -> Result<(), NetworkError> {
    for node in [s, d] {
        if node >= n {
            return Err(NetworkError::NodeOutOfRange { node, nodes: n });
        }
    }
    if s == d {
        return Err(NetworkError::SelfLoop(s));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(NetworkError::BadWeight(w));
    }
    Ok(())
}

/// `L` layers over one shared node set. Layers are reference counted so the
/// same topology can back several mechanism layers without copying.
#[derive(Clone, Debug)]
pub struct MultilayerNetwork {
    node_count: usize,
    layers: Vec<Arc<LayerGraph>>,
    max_degree: usize,
}

impl MultilayerNetwork {
    pub fn new<I>(layers: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator,
        I::Item: Into<Arc<LayerGraph>>,
    {
        let layers: Vec<Arc<LayerGraph>> = layers.into_iter().map(Into::into).collect();
        let first = layers.first().ok_or(NetworkError::NoLayers)?;
        let node_count = first.node_count();
        for (idx, layer) in layers.iter().enumerate() {
            if layer.node_count() != node_count {
                return Err(NetworkError::NodeCountMismatch {
                    layer: idx,
                    found: layer.node_count(),
                    expected: node_count,
                });
            }
        }
        let max_degree = layers.iter().map(|l| l.max_degree()).max().unwrap_or(0);
        Ok(Self {
            node_count,
            layers,
            max_degree,
        })
    }

    /// Single-layer convenience constructor.
    pub fn single(layer: LayerGraph) -> Self {
        Self::new([layer]).expect("one layer is always consistent")
    }

    /// Pads every layer to the largest node count among them, then builds.
    pub fn aligned(layers: Vec<LayerGraph>) -> Result<Self, NetworkError> {
        let n = layers
            .iter()
            .map(LayerGraph::node_count)
            .max()
            .ok_or(NetworkError::NoLayers)?;
        let padded = layers
            .into_iter()
            .map(|l| {
                if l.node_count() == n {
                    Ok(l)
                } else {
                    l.with_node_count(n)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(padded)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &LayerGraph {
        &self.layers[l]
    }

    pub fn layers(&self) -> &[Arc<LayerGraph>] {
        &self.layers
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Mean out-degree averaged over layers.
    pub fn mean_degree(&self) -> f64 {
        self.layers.iter().map(|l| l.mean_degree()).sum::<f64>() / self.layers.len() as f64
    }
}

impl fmt::Display for MultilayerNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} nodes, {} layer(s), arcs per layer [",
            self.node_count,
            self.layers.len()
        )?;
        for (i, l) in self.layers.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", l.arc_count())?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star() -> LayerGraph {
        LayerGraph::from_arcs(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap()
    }

    #[test]
    fn star_out_neighbors() {
        let g = star();
        assert_eq!(
            g.out_neighbors(0).unwrap().to_vec(),
            vec![(1, 1.0), (2, 1.0), (3, 1.0)]
        );
        assert!(g.out_neighbors(1).unwrap().is_empty());
    }

    #[test]
    fn path_lookups() {
        let g = LayerGraph::from_arcs(3, [(0, 1, 0.5), (1, 2, 0.25)]).unwrap();
        assert_eq!(g.out_neighbors(1).unwrap().to_vec(), vec![(2, 0.25)]);
        assert_eq!(g.in_weights(2).unwrap().to_vec(), vec![(1, 0.25)]);
        assert!(g.in_weights(0).unwrap().is_empty());
    }

    #[test]
    fn undirected_triangle_in_weights() {
        let g = LayerGraph::from_undirected(3, [(0, 1, 2.5), (1, 2, 2.5), (0, 2, 2.5)]).unwrap();
        assert_eq!(g.in_weights(0).unwrap().to_vec(), vec![(1, 2.5), (2, 2.5)]);
        assert_eq!(g.arc_count(), 6);
        assert!(g.is_symmetric());
    }

    #[test]
    fn out_of_range_lookups_fail() {
        let g = star();
        assert!(matches!(
            g.out_neighbors(4),
            Err(NetworkError::NodeOutOfRange { node: 4, nodes: 4 })
        ));
        assert!(g.in_weights(9).is_err());
    }

    #[test]
    fn rejects_bad_arcs() {
        assert!(matches!(
            LayerGraph::from_arcs(2, [(1, 1, 1.0)]),
            Err(NetworkError::SelfLoop(1))
        ));
        for w in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                LayerGraph::from_arcs(2, [(0, 1, w)]),
                Err(NetworkError::BadWeight(_))
            ));
        }
    }

    #[test]
    fn duplicate_arcs_merge_by_sum() {
        let g = LayerGraph::from_arcs(2, [(0, 1, 2.0), (0, 1, 3.0)]).unwrap();
        assert_eq!(g.arc_count(), 1);
        assert_eq!(g.out_neighbors(0).unwrap().to_vec(), vec![(1, 5.0)]);
    }

    #[test]
    fn layer_node_counts_must_agree() {
        let a = LayerGraph::from_arcs(3, [(0, 1, 1.0)]).unwrap();
        let b = LayerGraph::from_arcs(4, [(0, 3, 1.0)]).unwrap();
        assert!(matches!(
            MultilayerNetwork::new([a.clone(), b.clone()]),
            Err(NetworkError::NodeCountMismatch { layer: 1, .. })
        ));
        let net = MultilayerNetwork::aligned(vec![a, b]).unwrap();
        assert_eq!(net.node_count(), 4);
        assert_eq!(net.layer(0).node_count(), 4);
        assert!(MultilayerNetwork::new(Vec::<LayerGraph>::new()).is_err());
    }

    fn arb_layer() -> impl Strategy<Value = LayerGraph> {
        (2usize..30).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..120).prop_map(move |arcs| {
                LayerGraph::from_arcs(n, arcs.into_iter().filter(|(a, b, _)| a != b)).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn csr_csc_round_trip(g in arb_layer()) {
            prop_assert_eq!(g.in_index().transpose(), g.out_index().clone());
            prop_assert_eq!(g.out_index().transpose(), g.in_index().clone());
        }

        #[test]
        fn in_and_out_lists_agree(g in arb_layer()) {
            let n = g.node_count();
            let mut out_total = 0;
            let mut in_total = 0;
            for i in 0..n {
                out_total += g.out_degree(i);
                in_total += g.in_degree(i);
                for (j, w) in g.out_neighbors(i).unwrap().iter() {
                    prop_assert!(g.in_weights(j).unwrap().iter().any(|(s, ws)| s == i && ws == w));
                }
                let row = g.out_neighbors(i).unwrap();
                prop_assert!(row.ids.windows(2).all(|p| p[0] < p[1]));
            }
            prop_assert_eq!(out_total, g.arc_count());
            prop_assert_eq!(in_total, g.arc_count());
        }
    }
}
