//! Partitions and the block-level sufficient statistics the likelihood needs.
//!
//! [`ModelGraph`] is the read-only view of whichever layers a model uses;
//! [`BlockState`] pairs it with a partition and keeps per-layer group edge
//! counts `e_rs`, group degree sums and group sizes up to date as nodes move.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::corpus::MultilayerNetwork;
use crate::error::{Error, Result};
use crate::likelihood::{LayerSet, TagMode};
use crate::special::{ln_double_factorial_even, ln_factorial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Doc,
    Word,
    Tag,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::Doc, NodeType::Word, NodeType::Tag];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Doc => "doc",
            NodeType::Word => "word",
            NodeType::Tag => "tag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "doc" | "document" => Some(NodeType::Doc),
            "word" => Some(NodeType::Word),
            "tag" => Some(NodeType::Tag),
            _ => None,
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Typed assignment of nodes to groups. No group mixes node types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<u32>,
    types: Vec<NodeType>,
}

impl Partition {
    pub fn new(labels: Vec<u32>, types: Vec<NodeType>) -> Result<Self> {
        if labels.len() != types.len() {
            return Err(Error::InvalidArgument(format!("{} labels for {} nodes", labels.len(), types.len())));
        }
        let mut owner: FxHashMap<u32, NodeType> = FxHashMap::default();
        for (i, (&l, &t)) in labels.iter().zip(&types).enumerate() {
            match owner.get(&l) {
                Some(&g) if g != t => {
                    return Err(Error::TypeMismatch {
                        node: i,
                        node_type: t,
                        group: l,
                        group_type: g,
                    })
                }
                _ => {
                    owner.insert(l, t);
                }
            }
        }
        Ok(Self { labels, types })
    }

    /// Single-type partition, e.g. documents only.
    pub fn of_type(labels: Vec<u32>, node_type: NodeType) -> Self {
        let types = vec![node_type; labels.len()];
        Self { labels, types }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn types(&self) -> &[NodeType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Relabel groups to `0..B` in order of first appearance.
    pub fn compacted(&self) -> Self {
        let mut map: FxHashMap<u32, u32> = FxHashMap::default();
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let next = map.len() as u32;
                *map.entry(l).or_insert(next)
            })
            .collect();
        Self {
            labels,
            types: self.types.clone(),
        }
    }

    pub fn n_groups(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn n_groups_of(&self, t: NodeType) -> usize {
        let mut seen: Vec<u32> = self
            .labels
            .iter()
            .zip(&self.types)
            .filter(|(_, &ty)| ty == t)
            .map(|(&l, _)| l)
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Restrict to the nodes of one type, compacting labels.
    pub fn project(&self, t: NodeType) -> Self {
        let labels: Vec<u32> = self
            .labels
            .iter()
            .zip(&self.types)
            .filter(|(_, &ty)| ty == t)
            .map(|(&l, _)| l)
            .collect();
        Self::of_type(labels, t).compacted()
    }

    /// Group sizes per node type, keyed by label.
    pub fn group_sizes(&self) -> FxHashMap<u32, (NodeType, u64)> {
        let mut sizes: FxHashMap<u32, (NodeType, u64)> = FxHashMap::default();
        for (&l, &t) in self.labels.iter().zip(&self.types) {
            sizes.entry(l).or_insert((t, 0)).1 += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    /// Directed multigraph, degree-corrected on in- and out-degrees.
    Directed,
    /// Undirected multigraph; self-loops allowed, counted twice in degrees.
    Undirected,
    /// Undirected multigraph between two distinct node types.
    Bipartite,
}

/// One layer's adjacency over the global node index space.
#[derive(Debug, Clone)]
pub struct LayerGraph {
    pub name: String,
    pub kind: LayerKind,
    /// Endpoint node types. Equal for directed/undirected layers.
    pub types: [NodeType; 2],
    pub(crate) out_adj: Vec<Vec<(u32, u32)>>,
    /// Directed layers only.
    pub(crate) in_adj: Vec<Vec<(u32, u32)>>,
    /// `A_ii`: directed counts loops once, undirected twice.
    pub(crate) self_loop: Vec<u32>,
    pub(crate) deg_out: Vec<u64>,
    pub(crate) deg_in: Vec<u64>,
    pub(crate) n_edges: u64,
    /// Partition-independent part of `ln P(A | k, e, b)`.
    pub(crate) ln_const: f64,
}

impl LayerGraph {
    /// `edges` are `(u, v, multiplicity)`; undirected edges listed once.
    pub fn new(name: impl Into<String>, kind: LayerKind, types: [NodeType; 2], n_nodes: usize, edges: &[(u32, u32, u32)]) -> Self {
        let mut merged: Vec<(u32, u32, u32)> = edges
            .iter()
            .filter(|e| e.2 > 0)
            .map(|&(u, v, m)| match kind {
                LayerKind::Directed => (u, v, m),
                _ => (u.min(v), u.max(v), m),
            })
            .collect();
        merged.sort_unstable();
        let mut agg: Vec<(u32, u32, u32)> = Vec::with_capacity(merged.len());
        for (u, v, m) in merged {
            match agg.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += m,
                _ => agg.push((u, v, m)),
            }
        }

        let mut out_adj = vec![Vec::new(); n_nodes];
        let mut in_adj = vec![Vec::new(); if kind == LayerKind::Directed { n_nodes } else { 0 }];
        let mut self_loop = vec![0u32; n_nodes];
        let mut deg_out = vec![0u64; n_nodes];
        let mut deg_in = vec![0u64; if kind == LayerKind::Directed { n_nodes } else { 0 }];
        let mut n_edges = 0u64;
        let mut ln_adj = 0.0;
        for &(u, v, m) in &agg {
            n_edges += m as u64;
            let (ui, vi) = (u as usize, v as usize);
            match kind {
                LayerKind::Directed => {
                    ln_adj += ln_factorial(m as u64);
                    deg_out[ui] += m as u64;
                    deg_in[vi] += m as u64;
                    if u == v {
                        self_loop[ui] += m;
                    } else {
                        out_adj[ui].push((v, m));
                        in_adj[vi].push((u, m));
                    }
                }
                LayerKind::Undirected | LayerKind::Bipartite => {
                    if u == v {
                        assert!(kind == LayerKind::Undirected, "self-loop in bipartite layer");
                        self_loop[ui] += 2 * m;
                        deg_out[ui] += 2 * m as u64;
                        ln_adj += ln_double_factorial_even(2 * m as u64);
                    } else {
                        ln_adj += ln_factorial(m as u64);
                        out_adj[ui].push((v, m));
                        out_adj[vi].push((u, m));
                        deg_out[ui] += m as u64;
                        deg_out[vi] += m as u64;
                    }
                }
            }
        }
        let ln_deg: f64 = deg_out.iter().chain(&deg_in).map(|&k| ln_factorial(k)).sum();
        Self {
            name: name.into(),
            kind,
            types,
            out_adj,
            in_adj,
            self_loop,
            deg_out,
            deg_in,
            n_edges,
            ln_const: ln_deg - ln_adj,
        }
    }

    pub fn n_edges(&self) -> u64 {
        self.n_edges
    }

    #[inline]
    pub fn has_type(&self, t: NodeType) -> bool {
        self.types[0] == t || self.types[1] == t
    }

    /// Total degree (out + in for directed layers).
    #[inline]
    pub fn degree(&self, v: usize) -> u64 {
        match self.kind {
            LayerKind::Directed => self.deg_out[v] + self.deg_in[v],
            _ => self.deg_out[v],
        }
    }

    /// Every neighbor of `v` with multiplicity, self-loops excluded. Directed
    /// layers yield out-neighbors then in-neighbors.
    pub(crate) fn neighbors(&self, v: usize) -> impl Iterator<Item = (u32, u32)> + '_ {
        let ins: &[(u32, u32)] = if self.kind == LayerKind::Directed { &self.in_adj[v] } else { &[] };
        self.out_adj[v].iter().chain(ins.iter()).copied()
    }
}

/// The layers a model uses, over the network's global node indices.
#[derive(Debug, Clone)]
pub struct ModelGraph {
    pub(crate) node_types: Vec<NodeType>,
    pub(crate) layers: Vec<LayerGraph>,
    pub(crate) pinned: Vec<bool>,
    pub(crate) type_counts: [u64; 3],
    /// Types touched by some layer.
    pub(crate) active: [bool; 3],
    /// Types whose nodes are all pinned; their prior term is dropped.
    pub(crate) pinned_types: [bool; 3],
}

impl ModelGraph {
    pub fn new(node_types: Vec<NodeType>, layers: Vec<LayerGraph>, pinned: Vec<bool>) -> Self {
        assert_eq!(node_types.len(), pinned.len());
        let mut type_counts = [0u64; 3];
        for t in &node_types {
            type_counts[t.index()] += 1;
        }
        let mut active = [false; 3];
        for l in &layers {
            active[l.types[0].index()] = true;
            active[l.types[1].index()] = true;
        }
        let mut pinned_types = [false; 3];
        for t in NodeType::ALL {
            let nodes = node_types.iter().zip(&pinned).filter(|(&ty, _)| ty == t);
            let mut any = false;
            let mut all = true;
            for (_, &p) in nodes {
                any = true;
                all &= p;
            }
            pinned_types[t.index()] = any && all;
        }
        Self {
            node_types,
            layers,
            pinned,
            type_counts,
            active,
            pinned_types,
        }
    }

    /// Model over the chosen layers of a document network.
    pub fn from_network(net: &MultilayerNetwork, layers: LayerSet, tag_mode: TagMode) -> Self {
        let n = net.n_nodes();
        let mut out = Vec::new();
        if layers.hyperlink {
            let edges: Vec<_> = net.hyperlinks.iter().map(|&(u, v)| (u, v, 1)).collect();
            out.push(LayerGraph::new("H", LayerKind::Directed, [NodeType::Doc; 2], n, &edges));
        }
        if layers.text {
            let edges: Vec<_> = net.text.iter().map(|&(d, w, c)| (d, net.word_node(w) as u32, c)).collect();
            out.push(LayerGraph::new(
                "T",
                LayerKind::Bipartite,
                [NodeType::Doc, NodeType::Word],
                n,
                &edges,
            ));
        }
        if layers.metadata {
            let edges: Vec<_> = net.metadata.iter().map(|&(d, t)| (d, net.tag_node(t) as u32, 1)).collect();
            out.push(LayerGraph::new(
                "M",
                LayerKind::Bipartite,
                [NodeType::Doc, NodeType::Tag],
                n,
                &edges,
            ));
        }
        let types = net.node_types();
        let pinned = types
            .iter()
            .map(|&t| layers.metadata && t == NodeType::Tag && tag_mode == TagMode::Fixed)
            .collect();
        Self::new(types, out, pinned)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn node_type(&self, v: usize) -> NodeType {
        self.node_types[v]
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn is_active(&self, t: NodeType) -> bool {
        self.active[t.index()]
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pinned[v]
    }

    /// Whether the type's partition is free (active and not pinned).
    pub fn is_free_type(&self, t: NodeType) -> bool {
        self.active[t.index()] && !self.pinned_types[t.index()]
    }

    /// Nodes that the sampler may move.
    pub fn movable_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&v| !self.pinned[v] && self.active[self.node_types[v].index()])
            .collect()
    }

    /// Total degree of `v` over all layers.
    pub fn degree(&self, v: usize) -> u64 {
        self.layers.iter().map(|l| l.degree(v)).sum()
    }

    /// Every active node alone; inactive types lumped into one group each.
    pub fn singleton_partition(&self) -> Partition {
        let n = self.n_nodes();
        let mut labels = vec![0u32; n];
        let mut lump: [Option<u32>; 3] = [None; 3];
        for v in 0..n {
            let t = self.node_types[v];
            labels[v] = if self.active[t.index()] {
                v as u32
            } else {
                *lump[t.index()].get_or_insert(v as u32)
            };
        }
        Partition {
            labels,
            types: self.node_types.clone(),
        }
    }

    /// One group per free type, singletons for pinned nodes.
    pub fn trivial_partition(&self) -> Partition {
        let n = self.n_nodes();
        let mut labels = vec![0u32; n];
        let mut first: [Option<u32>; 3] = [None; 3];
        for v in 0..n {
            let t = self.node_types[v];
            labels[v] = if self.pinned[v] {
                v as u32
            } else {
                *first[t.index()].get_or_insert(v as u32)
            };
        }
        Partition {
            labels,
            types: self.node_types.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerStats {
    /// Directed: `e[r][s]` edges r -> s. Undirected: symmetric, diagonal doubled.
    pub(crate) e: Vec<FxHashMap<u32, u64>>,
    /// Directed only: `e_in[s][r] = e[r][s]`.
    pub(crate) e_in: Vec<FxHashMap<u32, u64>>,
    pub(crate) deg_out: Vec<u64>,
    pub(crate) deg_in: Vec<u64>,
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Scratch {
    pub(crate) counts_out: Vec<u64>,
    pub(crate) counts_in: Vec<u64>,
    pub(crate) touched_out: Vec<u32>,
    pub(crate) touched_in: Vec<u32>,
    pub(crate) entries: Vec<((u32, u32), i64)>,
}

/// Partition plus incrementally maintained block statistics.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub(crate) graph: Arc<ModelGraph>,
    pub(crate) b: Vec<u32>,
    pub(crate) sizes: Vec<u64>,
    pub(crate) group_type: Vec<Option<NodeType>>,
    pub(crate) members: Vec<Vec<u32>>,
    pub(crate) member_pos: Vec<u32>,
    pub(crate) free: Vec<u32>,
    pub(crate) n_groups: [u64; 3],
    /// Occupied labels per node type, in no particular order.
    pub(crate) occupied: [Vec<u32>; 3],
    pub(crate) occ_pos: Vec<u32>,
    pub(crate) stats: Vec<LayerStats>,
    pub(crate) scratch: RefCell<Scratch>,
}

impl BlockState {
    /// Tally block statistics by full traversal.
    ///
    /// Labels are kept as given when they fit below the node count, so a
    /// state rebuilt from another state's partition is directly comparable.
    pub fn from_partition(graph: Arc<ModelGraph>, partition: &Partition) -> Result<Self> {
        let n = graph.n_nodes();
        if partition.len() < n {
            return Err(Error::UncoveredNode(partition.len()));
        }
        if partition.len() > n {
            return Err(Error::NodeSetMismatch(partition.len(), n));
        }
        if partition.types() != graph.node_types() {
            return Err(Error::InvalidArgument("partition node types differ from the model's".into()));
        }
        let partition = if partition.labels().iter().all(|&l| (l as usize) < n) {
            partition.clone()
        } else {
            partition.compacted()
        };
        let b = partition.labels;

        let mut sizes = vec![0u64; n];
        let mut group_type = vec![None; n];
        let mut members = vec![Vec::new(); n];
        let mut member_pos = vec![0u32; n];
        for (v, &r) in b.iter().enumerate() {
            sizes[r as usize] += 1;
            group_type[r as usize] = Some(graph.node_types[v]);
            member_pos[v] = members[r as usize].len() as u32;
            members[r as usize].push(v as u32);
        }
        for v in 0..n {
            if graph.pinned[v] && sizes[b[v] as usize] != 1 {
                return Err(Error::InvalidArgument(format!("pinned node {v} must be alone in its group")));
            }
        }
        let mut n_groups = [0u64; 3];
        let mut free = Vec::new();
        let mut occupied: [Vec<u32>; 3] = Default::default();
        let mut occ_pos = vec![0u32; n];
        for r in (0..n).rev() {
            match group_type[r] {
                Some(t) => n_groups[t.index()] += 1,
                None => free.push(r as u32),
            }
        }
        for r in 0..n {
            if let Some(t) = group_type[r] {
                occ_pos[r] = occupied[t.index()].len() as u32;
                occupied[t.index()].push(r as u32);
            }
        }

        let stats = graph
            .layers
            .iter()
            .map(|layer| {
                let directed = layer.kind == LayerKind::Directed;
                let mut st = LayerStats {
                    e: vec![FxHashMap::default(); n],
                    e_in: vec![FxHashMap::default(); if directed { n } else { 0 }],
                    deg_out: vec![0; n],
                    deg_in: vec![0; if directed { n } else { 0 }],
                };
                for u in 0..n {
                    let r = b[u];
                    for &(v, m) in &layer.out_adj[u] {
                        let s = b[v as usize];
                        *st.e[r as usize].entry(s).or_default() += m as u64;
                        if directed {
                            *st.e_in[s as usize].entry(r).or_default() += m as u64;
                        }
                    }
                    let l = layer.self_loop[u] as u64;
                    if l > 0 {
                        *st.e[r as usize].entry(r).or_default() += l;
                        if directed {
                            *st.e_in[r as usize].entry(r).or_default() += l;
                        }
                    }
                    st.deg_out[r as usize] += layer.deg_out[u];
                    if directed {
                        st.deg_in[r as usize] += layer.deg_in[u];
                    }
                }
                st
            })
            .collect();

        Ok(Self {
            graph,
            b,
            sizes,
            group_type,
            members,
            member_pos,
            free,
            n_groups,
            occupied,
            occ_pos,
            stats,
            scratch: RefCell::new(Scratch::default()),
        })
    }

    /// Convenience: build the model graph and tally in one step.
    pub fn from_network(net: &MultilayerNetwork, partition: &Partition, layers: LayerSet, tag_mode: TagMode) -> Result<Self> {
        let graph = Arc::new(ModelGraph::from_network(net, layers, tag_mode));
        Self::from_partition(graph, partition)
    }

    pub fn graph(&self) -> &Arc<ModelGraph> {
        &self.graph
    }

    pub fn n_nodes(&self) -> usize {
        self.b.len()
    }

    #[inline]
    pub fn group_of(&self, v: usize) -> u32 {
        self.b[v]
    }

    #[inline]
    pub fn group_size(&self, r: u32) -> u64 {
        self.sizes[r as usize]
    }

    pub fn group_type(&self, r: u32) -> Option<NodeType> {
        self.group_type[r as usize]
    }

    pub fn members(&self, r: u32) -> &[u32] {
        &self.members[r as usize]
    }

    /// Number of occupied groups holding nodes of type `t`.
    pub fn n_groups(&self, t: NodeType) -> u64 {
        self.n_groups[t.index()]
    }

    /// Occupied group labels of type `t`, ascending.
    pub fn groups_of(&self, t: NodeType) -> Vec<u32> {
        (0..self.sizes.len() as u32)
            .filter(|&r| self.group_type[r as usize] == Some(t))
            .collect()
    }

    /// Occupied labels of type `t` in internal (unsorted) order.
    pub fn occupied_groups(&self, t: NodeType) -> &[u32] {
        &self.occupied[t.index()]
    }

    /// Some currently empty label, if any.
    pub fn empty_group(&self) -> Option<u32> {
        self.free.last().copied()
    }

    /// Edge count between groups in layer `layer` (directed: `r -> s`).
    pub fn edge_count(&self, layer: usize, r: u32, s: u32) -> u64 {
        self.stats[layer].e[r as usize].get(&s).copied().unwrap_or(0)
    }

    pub fn partition(&self) -> Partition {
        Partition {
            labels: self.b.clone(),
            types: self.graph.node_types.clone(),
        }
    }

    pub(crate) fn check_move(&self, v: usize, s: u32) -> Result<()> {
        if s as usize >= self.sizes.len() {
            return Err(Error::InvalidArgument(format!("group label {s} out of range")));
        }
        let t = self.graph.node_types[v];
        match self.group_type[s as usize] {
            Some(g) if g != t => Err(Error::TypeMismatch {
                node: v,
                node_type: t,
                group: s,
                group_type: g,
            }),
            _ => Ok(()),
        }
    }

    /// Move `v` into group `target`, updating every tally in O(degree(v)).
    pub fn move_node(&mut self, v: usize, target: u32) -> Result<()> {
        self.check_move(v, target)?;
        let r = self.b[v];
        if r == target {
            return Ok(());
        }
        if self.graph.pinned[v] {
            return Err(Error::InvalidArgument(format!("node {v} is pinned")));
        }
        self.apply_move(v, target);
        Ok(())
    }

    pub(crate) fn apply_move(&mut self, v: usize, s: u32) {
        let r = self.b[v];
        debug_assert_ne!(r, s);
        let graph = Arc::clone(&self.graph);
        let t = graph.node_types[v];
        for (layer, st) in graph.layers.iter().zip(self.stats.iter_mut()) {
            if !layer.has_type(t) {
                continue;
            }
            match layer.kind {
                LayerKind::Directed => {
                    for &(u, m) in &layer.out_adj[v] {
                        let g = self.b[u as usize];
                        let m = m as u64;
                        sub(&mut st.e[r as usize], g, m);
                        add(&mut st.e[s as usize], g, m);
                        sub(&mut st.e_in[g as usize], r, m);
                        add(&mut st.e_in[g as usize], s, m);
                    }
                    for &(u, m) in &layer.in_adj[v] {
                        let g = self.b[u as usize];
                        let m = m as u64;
                        sub(&mut st.e[g as usize], r, m);
                        add(&mut st.e[g as usize], s, m);
                        sub(&mut st.e_in[r as usize], g, m);
                        add(&mut st.e_in[s as usize], g, m);
                    }
                    let l = layer.self_loop[v] as u64;
                    if l > 0 {
                        sub(&mut st.e[r as usize], r, l);
                        add(&mut st.e[s as usize], s, l);
                        sub(&mut st.e_in[r as usize], r, l);
                        add(&mut st.e_in[s as usize], s, l);
                    }
                    st.deg_out[r as usize] -= layer.deg_out[v];
                    st.deg_out[s as usize] += layer.deg_out[v];
                    st.deg_in[r as usize] -= layer.deg_in[v];
                    st.deg_in[s as usize] += layer.deg_in[v];
                }
                LayerKind::Undirected | LayerKind::Bipartite => {
                    for &(u, m) in &layer.out_adj[v] {
                        let g = self.b[u as usize];
                        let m = m as u64;
                        // Row r/s entries, then the mirrored column entries.
                        sub(&mut st.e[r as usize], g, m);
                        sub(&mut st.e[g as usize], r, m);
                        let g2 = if u as usize == v { s } else { g };
                        add(&mut st.e[s as usize], g2, m);
                        add(&mut st.e[g2 as usize], s, m);
                    }
                    let l = layer.self_loop[v] as u64;
                    if l > 0 {
                        sub(&mut st.e[r as usize], r, l);
                        add(&mut st.e[s as usize], s, l);
                    }
                    st.deg_out[r as usize] -= layer.deg_out[v];
                    st.deg_out[s as usize] += layer.deg_out[v];
                }
            }
        }

        // Membership bookkeeping.
        let pos = self.member_pos[v] as usize;
        let list = &mut self.members[r as usize];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos];
            self.member_pos[moved as usize] = pos as u32;
        }
        self.member_pos[v] = self.members[s as usize].len() as u32;
        self.members[s as usize].push(v as u32);

        self.b[v] = s;
        self.sizes[r as usize] -= 1;
        if self.sizes[r as usize] == 0 {
            self.group_type[r as usize] = None;
            self.n_groups[t.index()] -= 1;
            self.free.push(r);
            let occ = &mut self.occupied[t.index()];
            let pos = self.occ_pos[r as usize] as usize;
            occ.swap_remove(pos);
            if pos < occ.len() {
                self.occ_pos[occ[pos] as usize] = pos as u32;
            }
        }
        if self.sizes[s as usize] == 0 {
            self.group_type[s as usize] = Some(t);
            self.n_groups[t.index()] += 1;
            if let Some(i) = self.free.iter().rposition(|&x| x == s) {
                self.free.swap_remove(i);
            }
            self.occ_pos[s as usize] = self.occupied[t.index()].len() as u32;
            self.occupied[t.index()].push(s);
        }
        self.sizes[s as usize] += 1;
        debug_assert!(self.type_pure(), "type purity violated moving node {v}");
    }

    /// Move every member of `r` into `s`.
    pub fn merge_groups(&mut self, r: u32, s: u32) -> Result<()> {
        if r == s {
            return Ok(());
        }
        let members = self.members[r as usize].clone();
        for v in members {
            self.move_node(v as usize, s)?;
        }
        Ok(())
    }

    fn type_pure(&self) -> bool {
        self.b
            .iter()
            .enumerate()
            .all(|(v, &r)| self.group_type[r as usize] == Some(self.graph.node_types[v]))
    }

    /// Whether the tallies equal those of another state exactly.
    pub fn same_tallies(&self, other: &BlockState) -> bool {
        self.b == other.b
            && self.sizes == other.sizes
            && self.group_type == other.group_type
            && self.n_groups == other.n_groups
            && {
                let sorted = |s: &Self| {
                    s.occupied.clone().map(|mut v| {
                        v.sort_unstable();
                        v
                    })
                };
                sorted(self) == sorted(other)
            }
            && self.stats == other.stats
    }
}

#[inline]
fn add(map: &mut FxHashMap<u32, u64>, k: u32, m: u64) {
    *map.entry(k).or_default() += m;
}

#[inline]
fn sub(map: &mut FxHashMap<u32, u64>, k: u32, m: u64) {
    let slot = map.get_mut(&k).expect("edge count underflow");
    *slot -= m;
    if *slot == 0 {
        map.remove(&k);
    }
}
