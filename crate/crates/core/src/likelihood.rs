//! Marginal likelihood of each layer, the partition prior, and the
//! description length `DL = -ln P(A_H, A_T, A_M, b)` (in nats).
//!
//! Each layer uses the microcanonical degree-corrected block model with the
//! node propensities and block rates integrated out:
//!
//! `ln P(A|b) = ln P(A|k,e,b) + ln P(k|e,b) + ln P(e|b)`
//!
//! with uniform priors over degree sequences within each group and over
//! block edge-count matrices. Layers multiply, so their log-terms add.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BlockState, LayerGraph, LayerKind, LayerStats, NodeType, Partition};
use crate::special::{ln_binomial, ln_double_factorial_even, ln_factorial, ln_multiset};

/// Which layers enter the joint likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerSet {
    pub hyperlink: bool,
    pub text: bool,
    pub metadata: bool,
}

impl LayerSet {
    pub const H: Self = Self::new(true, false, false);
    pub const T: Self = Self::new(false, true, false);
    pub const M: Self = Self::new(false, false, true);
    pub const HM: Self = Self::new(true, false, true);
    pub const HT: Self = Self::new(true, true, false);
    pub const HTM: Self = Self::new(true, true, true);

    /// The six model classes compared in the description-length table.
    pub const MODEL_CLASSES: [Self; 6] = [Self::H, Self::T, Self::M, Self::HM, Self::HT, Self::HTM];

    pub const fn new(hyperlink: bool, text: bool, metadata: bool) -> Self {
        Self { hyperlink, text, metadata }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hyperlink || self.text || self.metadata)
    }

    /// Model-class name: `H`, `T`, `M`, `H+M`, `H+T`, `H+T+M` (or `T+M`).
    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.hyperlink {
            parts.push("H");
        }
        if self.text {
            parts.push("T");
        }
        if self.metadata {
            parts.push("M");
        }
        parts.join("+")
    }
}

impl fmt::Display for LayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for LayerSet {
    type Err = Error;

    /// Accepts `h,t,m`, `H+T`, `hyperlink,text` and similar.
    fn from_str(s: &str) -> Result<Self> {
        let mut set = LayerSet::new(false, false, false);
        for part in s.split([',', '+', ' ']).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "h" | "hyperlink" | "hyperlinks" => set.hyperlink = true,
                "t" | "text" => set.text = true,
                "m" | "metadata" | "tags" => set.metadata = true,
                other => return Err(Error::InvalidArgument(format!("unknown layer {other:?}"))),
            }
        }
        if set.is_empty() {
            return Err(Error::InvalidArgument("at least one layer must be active".into()));
        }
        Ok(set)
    }
}

impl Serialize for TagMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            TagMode::Fixed => "fixed",
            TagMode::Inferred => "inferred",
        })
    }
}

impl<'de> Deserialize<'de> for TagMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for TagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(TagMode::Fixed),
            "inferred" => Ok(TagMode::Inferred),
            other => Err(Error::InvalidArgument(format!("unknown tag mode {other:?}"))),
        }
    }
}

/// How metadata tags are grouped when the M layer is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagMode {
    /// Every tag pinned in its own group.
    #[default]
    Fixed,
    Inferred,
}

/// Description length split into its additive parts, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionLength {
    pub layers: BTreeMap<String, f64>,
    pub prior: f64,
    pub total: f64,
}

/// Outcome of an MDL fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    #[serde(skip)]
    pub partition: Partition,
    /// Final partition of every chain, compacted, in chain order.
    #[serde(skip)]
    pub chain_partitions: Vec<Partition>,
    pub dl_total: f64,
    pub dl_per_layer: BTreeMap<String, f64>,
    pub dl_prior: f64,
    #[serde(rename = "B")]
    pub groups: BTreeMap<String, u64>,
    pub seed: u64,
    pub sweeps: usize,
    pub chains: usize,
    /// Final DL of every chain; mean, std and minimum give the table columns.
    pub chain_dls: Vec<f64>,
    pub dl_mean: f64,
    pub dl_std: f64,
    /// Not serialized, so that fit outputs are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl FitResult {
    pub fn dl_bits(&self) -> f64 {
        self.dl_total / std::f64::consts::LN_2
    }
}

#[inline]
fn pair_count(layer: &LayerGraph, n_groups: &[u64; 3]) -> u64 {
    let a = n_groups[layer.types[0].index()];
    let b = n_groups[layer.types[1].index()];
    match layer.kind {
        LayerKind::Directed => a * a,
        LayerKind::Undirected => a * (a + 1) / 2,
        LayerKind::Bipartite => a * b,
    }
}

#[inline]
fn directed_group_term(n: u64, d_out: u64, d_in: u64) -> f64 {
    -ln_factorial(d_out) - ln_factorial(d_in) - ln_multiset(n, d_out) - ln_multiset(n, d_in)
}

#[inline]
fn undirected_group_term(n: u64, d: u64) -> f64 {
    -ln_factorial(d) - ln_multiset(n, d)
}

#[inline]
fn entry_term(kind: LayerKind, r: u32, s: u32, e: u64) -> f64 {
    if kind != LayerKind::Directed && r == s {
        ln_double_factorial_even(e)
    } else {
        ln_factorial(e)
    }
}

/// `ln P(A_layer | b)` from the tallies of `state`.
pub fn layer_log_marginal(state: &BlockState, layer: usize) -> f64 {
    let lg = &state.graph.layers[layer];
    let st = &state.stats[layer];
    let mut lp = lg.ln_const;
    for (r, row) in st.e.iter().enumerate() {
        for (&s, &c) in row {
            match lg.kind {
                LayerKind::Directed => lp += ln_factorial(c),
                _ if s as usize > r => lp += ln_factorial(c),
                _ if s as usize == r => lp += ln_double_factorial_even(c),
                _ => {}
            }
        }
    }
    for (r, gt) in state.group_type.iter().enumerate() {
        let Some(t) = gt else { continue };
        if !lg.has_type(*t) {
            continue;
        }
        let n = state.sizes[r];
        lp += match lg.kind {
            LayerKind::Directed => directed_group_term(n, st.deg_out[r], st.deg_in[r]),
            _ => undirected_group_term(n, st.deg_out[r]),
        };
    }
    lp - ln_multiset(pair_count(lg, &state.n_groups), lg.n_edges)
}

/// `ln P(b)` for one node type: uniform over the number of groups, the
/// group-size histogram, and assignments given sizes.
fn type_log_prior(sizes: impl Iterator<Item = u64>, n: u64, b: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let s: f64 = sizes.map(ln_factorial).sum();
    s - ln_factorial(n) - ln_binomial(n - 1, b - 1) - (n as f64).ln()
}

/// `ln P(b)`, summed independently over the node types present.
pub fn partition_log_prior(partition: &Partition) -> f64 {
    let sizes = partition.group_sizes();
    NodeType::ALL
        .iter()
        .map(|&t| {
            let of_t: Vec<u64> = sizes.values().filter(|(ty, _)| *ty == t).map(|&(_, n)| n).collect();
            let n: u64 = of_t.iter().sum();
            type_log_prior(of_t.iter().copied(), n, of_t.len() as u64)
        })
        .sum()
}

/// Prior over the free node types of a state's model (pinned and inactive
/// types contribute nothing).
pub fn state_log_prior(state: &BlockState) -> f64 {
    let g = &state.graph;
    NodeType::ALL
        .iter()
        .filter(|&&t| g.is_free_type(t))
        .map(|&t| {
            let sizes = state
                .group_type
                .iter()
                .zip(&state.sizes)
                .filter(|(gt, _)| **gt == Some(t))
                .map(|(_, &n)| n);
            type_log_prior(sizes, g.type_counts[t.index()], state.n_groups[t.index()])
        })
        .sum()
}

/// `Σ_layers ln P(A_l | b) + ln P(b)`, i.e. `-DL`.
pub fn joint_log_posterior_numerator(state: &BlockState) -> f64 {
    (0..state.graph.layers.len()).map(|l| layer_log_marginal(state, l)).sum::<f64>() + state_log_prior(state)
}

pub fn description_length(state: &BlockState) -> DescriptionLength {
    let layers: BTreeMap<String, f64> = state
        .graph
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| (l.name.clone(), -layer_log_marginal(state, i)))
        .collect();
    let prior = -state_log_prior(state);
    let total = layers.values().sum::<f64>() + prior;
    DescriptionLength { layers, prior, total }
}

/// Change in DL from moving `node` into `target`, without applying it.
pub fn dl_delta_move(state: &BlockState, node: usize, target: u32) -> Result<f64> {
    state.check_move(node, target)?;
    if state.b[node] != target && state.graph.is_pinned(node) {
        return Err(Error::InvalidArgument(format!("node {node} is pinned")));
    }
    Ok(move_delta(state, node, target))
}

/// Unchecked [`dl_delta_move`].
pub(crate) fn move_delta(state: &BlockState, v: usize, s: u32) -> f64 {
    let r = state.b[v];
    if r == s {
        return 0.0;
    }
    let t = state.graph.node_types[v];
    let mut guard = state.scratch.borrow_mut();
    let sc = &mut *guard;
    let cap = state.b.len();
    if sc.counts_out.len() < cap {
        sc.counts_out.resize(cap, 0);
        sc.counts_in.resize(cap, 0);
    }
    let b = &state.b;
    transfer_delta(state, t, r, s, 1, &mut sc.entries, |lg, _st, entries| match lg.kind {
        LayerKind::Directed => {
            for &(u, m) in &lg.out_adj[v] {
                let g = b[u as usize];
                if sc.counts_out[g as usize] == 0 {
                    sc.touched_out.push(g);
                }
                sc.counts_out[g as usize] += m as u64;
            }
            for &(u, m) in &lg.in_adj[v] {
                let g = b[u as usize];
                if sc.counts_in[g as usize] == 0 {
                    sc.touched_in.push(g);
                }
                sc.counts_in[g as usize] += m as u64;
            }
            for g in sc.touched_out.drain(..) {
                let c = std::mem::take(&mut sc.counts_out[g as usize]) as i64;
                entries.push(((r, g), -c));
                entries.push(((s, g), c));
            }
            for g in sc.touched_in.drain(..) {
                let c = std::mem::take(&mut sc.counts_in[g as usize]) as i64;
                entries.push(((g, r), -c));
                entries.push(((g, s), c));
            }
            let l = lg.self_loop[v] as i64;
            if l > 0 {
                entries.push(((r, r), -l));
                entries.push(((s, s), l));
            }
            (lg.deg_out[v], lg.deg_in[v])
        }
        LayerKind::Undirected | LayerKind::Bipartite => {
            for &(u, m) in &lg.out_adj[v] {
                let g = b[u as usize];
                if sc.counts_out[g as usize] == 0 {
                    sc.touched_out.push(g);
                }
                sc.counts_out[g as usize] += m as u64;
            }
            for g in sc.touched_out.drain(..) {
                let c = std::mem::take(&mut sc.counts_out[g as usize]) as i64;
                if g == r {
                    entries.push(((r, r), -2 * c));
                } else {
                    entries.push((sym(r, g), -c));
                }
                if g == s {
                    entries.push(((s, s), 2 * c));
                } else {
                    entries.push((sym(s, g), c));
                }
            }
            let l = lg.self_loop[v] as i64;
            if l > 0 {
                entries.push(((r, r), -l));
                entries.push(((s, s), l));
            }
            (lg.deg_out[v], 0)
        }
    })
}

/// Change in DL from merging group `r` into group `s` (same node type).
pub fn dl_delta_merge(state: &BlockState, r: u32, s: u32) -> Result<f64> {
    let (tr, ts) = (state.group_type(r), state.group_type(s));
    let (Some(t), Some(u)) = (tr, ts) else {
        return Err(Error::InvalidArgument("merge of an empty group".into()));
    };
    if t != u {
        return Err(Error::TypeMismatch {
            node: state.members(r)[0] as usize,
            node_type: t,
            group: s,
            group_type: u,
        });
    }
    if r == s {
        return Ok(0.0);
    }
    if state
        .members(r)
        .iter()
        .chain(state.members(s))
        .any(|&v| state.graph.is_pinned(v as usize))
    {
        return Err(Error::InvalidArgument("cannot merge pinned groups".into()));
    }
    let mut entries = std::mem::take(&mut state.scratch.borrow_mut().entries);
    let d = transfer_delta(state, t, r, s, state.sizes[r as usize], &mut entries, |lg, st, entries| {
        match lg.kind {
            LayerKind::Directed => {
                for (&g, &c) in &st.e[r as usize] {
                    let c = c as i64;
                    let g2 = if g == r { s } else { g };
                    entries.push(((r, g), -c));
                    entries.push(((s, g2), c));
                }
                for (&g, &c) in &st.e_in[r as usize] {
                    if g == r {
                        continue;
                    }
                    let c = c as i64;
                    entries.push(((g, r), -c));
                    entries.push(((g, s), c));
                }
                (st.deg_out[r as usize], st.deg_in[r as usize])
            }
            LayerKind::Undirected | LayerKind::Bipartite => {
                for (&g, &c) in &st.e[r as usize] {
                    let c = c as i64;
                    if g == r {
                        entries.push(((r, r), -c));
                        entries.push(((s, s), c));
                    } else if g == s {
                        entries.push((sym(r, s), -c));
                        entries.push(((s, s), 2 * c));
                    } else {
                        entries.push((sym(r, g), -c));
                        entries.push((sym(s, g), c));
                    }
                }
                (st.deg_out[r as usize], 0)
            }
        }
    });
    state.scratch.borrow_mut().entries = entries;
    Ok(d)
}

#[inline]
fn sym(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Shared evaluator: `dn` nodes carrying the degrees reported by
/// `fill_layer` move from `r` to `s`; `fill_layer` also lists the edge-count
/// changes, which are aggregated here before the factorial terms are taken.
fn transfer_delta<F>(
    state: &BlockState,
    t: NodeType,
    r: u32,
    s: u32,
    dn: u64,
    entries: &mut Vec<((u32, u32), i64)>,
    mut fill_layer: F,
) -> f64
where
    F: FnMut(&LayerGraph, &LayerStats, &mut Vec<((u32, u32), i64)>) -> (u64, u64),
{
    let g = &state.graph;
    let (n_r, n_s) = (state.sizes[r as usize], state.sizes[s as usize]);
    let mut groups_after = state.n_groups;
    if n_r == dn {
        groups_after[t.index()] -= 1;
    }
    if n_s == 0 {
        groups_after[t.index()] += 1;
    }
    let b_changed = groups_after != state.n_groups;

    let mut dlp = 0.0;
    for (lg, st) in g.layers.iter().zip(&state.stats) {
        if !lg.has_type(t) {
            continue;
        }
        entries.clear();
        let (k_out, k_in) = fill_layer(lg, st, entries);
        entries.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < entries.len() {
            let key = entries[i].0;
            let mut d = 0i64;
            while i < entries.len() && entries[i].0 == key {
                d += entries[i].1;
                i += 1;
            }
            if d == 0 {
                continue;
            }
            let old = st.e[key.0 as usize].get(&key.1).copied().unwrap_or(0);
            let new = (old as i64 + d) as u64;
            dlp += entry_term(lg.kind, key.0, key.1, new) - entry_term(lg.kind, key.0, key.1, old);
        }

        let (ri, si) = (r as usize, s as usize);
        match lg.kind {
            LayerKind::Directed => {
                let (ro, rin) = (st.deg_out[ri], st.deg_in[ri]);
                let (so, sin) = (st.deg_out[si], st.deg_in[si]);
                dlp += directed_group_term(n_r - dn, ro - k_out, rin - k_in) + directed_group_term(n_s + dn, so + k_out, sin + k_in)
                    - directed_group_term(n_r, ro, rin)
                    - directed_group_term(n_s, so, sin);
            }
            _ => {
                let (rd, sd) = (st.deg_out[ri], st.deg_out[si]);
                dlp += undirected_group_term(n_r - dn, rd - k_out) + undirected_group_term(n_s + dn, sd + k_out)
                    - undirected_group_term(n_r, rd)
                    - undirected_group_term(n_s, sd);
            }
        }
        if b_changed {
            dlp += ln_multiset(pair_count(lg, &state.n_groups), lg.n_edges) - ln_multiset(pair_count(lg, &groups_after), lg.n_edges);
        }
    }

    if g.is_free_type(t) {
        dlp += ln_factorial(n_r - dn) + ln_factorial(n_s + dn) - ln_factorial(n_r) - ln_factorial(n_s);
        if b_changed {
            let n = g.type_counts[t.index()];
            dlp += ln_binomial(n - 1, state.n_groups[t.index()] - 1) - ln_binomial(n - 1, groups_after[t.index()] - 1);
        }
    }
    -dlp
}

/// Change in DL from adding one edge `u -> v` (or `u -- v`) to `layer`,
/// holding the partition fixed. Only the data term changes.
pub fn dl_delta_add_edge(state: &BlockState, layer: usize, u: usize, v: usize) -> f64 {
    let lg = &state.graph.layers[layer];
    let st = &state.stats[layer];
    let (r, s) = (state.b[u], state.b[v]);
    let mut dlp = 0.0;

    let a_uv = if u == v {
        lg.self_loop[u] as u64
    } else {
        lg.out_adj[u].iter().find(|e| e.0 as usize == v).map_or(0, |e| e.1 as u64)
    };

    match lg.kind {
        LayerKind::Directed => {
            // ln k_u^+! and ln k_v^-! each gain a factor; ln A_uv! too.
            dlp += ((lg.deg_out[u] + 1) as f64).ln() + ((lg.deg_in[v] + 1) as f64).ln();
            dlp -= ((a_uv + 1) as f64).ln();
            let e = st.e[r as usize].get(&s).copied().unwrap_or(0);
            dlp += ((e + 1) as f64).ln();
            let (nr, ns) = (state.sizes[r as usize], state.sizes[s as usize]);
            let (ro, rin) = (st.deg_out[r as usize], st.deg_in[r as usize]);
            if r == s {
                dlp += directed_group_term(nr, ro + 1, rin + 1) - directed_group_term(nr, ro, rin);
            } else {
                let (so, sin) = (st.deg_out[s as usize], st.deg_in[s as usize]);
                dlp += directed_group_term(nr, ro + 1, rin) - directed_group_term(nr, ro, rin);
                dlp += directed_group_term(ns, so, sin + 1) - directed_group_term(ns, so, sin);
            }
        }
        LayerKind::Undirected | LayerKind::Bipartite => {
            if u == v {
                let k = lg.deg_out[u];
                dlp += ln_factorial(k + 2) - ln_factorial(k);
                dlp -= ln_double_factorial_even(a_uv + 2) - ln_double_factorial_even(a_uv);
                let e = st.e[r as usize].get(&r).copied().unwrap_or(0);
                dlp += ln_double_factorial_even(e + 2) - ln_double_factorial_even(e);
            } else {
                dlp += ((lg.deg_out[u] + 1) as f64).ln() + ((lg.deg_out[v] + 1) as f64).ln();
                dlp -= ((a_uv + 1) as f64).ln();
                let e = st.e[r as usize].get(&s).copied().unwrap_or(0);
                dlp += if r == s {
                    ln_double_factorial_even(e + 2) - ln_double_factorial_even(e)
                } else {
                    ((e + 1) as f64).ln()
                };
            }
            let nr = state.sizes[r as usize];
            let rd = st.deg_out[r as usize];
            if r == s {
                dlp += undirected_group_term(nr, rd + 2) - undirected_group_term(nr, rd);
            } else {
                let ns = state.sizes[s as usize];
                let sd = st.deg_out[s as usize];
                dlp += undirected_group_term(nr, rd + 1) - undirected_group_term(nr, rd);
                dlp += undirected_group_term(ns, sd + 1) - undirected_group_term(ns, sd);
            }
        }
    }
    let pairs = pair_count(lg, &state.n_groups);
    dlp -= ln_multiset(pairs, lg.n_edges + 1) - ln_multiset(pairs, lg.n_edges);
    -dlp
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::graph::ModelGraph;

    #[test]
    fn layer_set_names_and_parsing() {
        assert_eq!(LayerSet::HTM.name(), "H+T+M");
        assert_eq!(LayerSet::HM.name(), "H+M");
        assert_eq!("h,t".parse::<LayerSet>().unwrap(), LayerSet::HT);
        assert_eq!("H+T+M".parse::<LayerSet>().unwrap(), LayerSet::HTM);
        assert_eq!("text".parse::<LayerSet>().unwrap(), LayerSet::T);
        assert!("".parse::<LayerSet>().is_err());
        assert!("x".parse::<LayerSet>().is_err());
    }

    #[test]
    fn prior_single_node_is_zero() {
        let p = Partition::of_type(vec![0], NodeType::Doc);
        assert_eq!(partition_log_prior(&p), 0.0);
    }

    #[test]
    fn prior_three_nodes_one_group() {
        let p = Partition::of_type(vec![4, 4, 4], NodeType::Doc);
        assert!((partition_log_prior(&p) + 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn prior_adds_over_types() {
        let p = Partition::new(
            vec![0, 0, 0, 1, 2],
            vec![NodeType::Doc, NodeType::Doc, NodeType::Doc, NodeType::Word, NodeType::Word],
        )
        .unwrap();
        let docs = Partition::of_type(vec![0, 0, 0], NodeType::Doc);
        let words = Partition::of_type(vec![1, 2], NodeType::Word);
        let sum = partition_log_prior(&docs) + partition_log_prior(&words);
        assert!((partition_log_prior(&p) - sum).abs() < 1e-12);
    }

    #[test]
    fn empty_layer_contributes_nothing() {
        let types = vec![NodeType::Doc; 4];
        let l = LayerGraph::new("H", LayerKind::Directed, [NodeType::Doc; 2], 4, &[]);
        let g = Arc::new(ModelGraph::new(types, vec![l], vec![false; 4]));
        let st = BlockState::from_partition(g.clone(), &g.singleton_partition()).unwrap();
        assert_eq!(layer_log_marginal(&st, 0), 0.0);
    }

    fn random_model(seed: u64, n_doc: usize, n_word: usize) -> Arc<ModelGraph> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n_doc + n_word;
        let types: Vec<NodeType> = (0..n).map(|i| if i < n_doc { NodeType::Doc } else { NodeType::Word }).collect();
        let h: Vec<_> = (0..3 * n_doc)
            .map(|_| (rng.random_range(0..n_doc as u32), rng.random_range(0..n_doc as u32), 1))
            .filter(|e| e.0 != e.1)
            .collect();
        let t: Vec<_> = (0..4 * n_word)
            .map(|_| {
                (
                    rng.random_range(0..n_doc as u32),
                    rng.random_range(n_doc as u32..n as u32),
                    rng.random_range(1..3),
                )
            })
            .collect();
        let u: Vec<_> = (0..2 * n_doc)
            .map(|_| (rng.random_range(0..n_doc as u32), rng.random_range(0..n_doc as u32), 1))
            .collect();
        Arc::new(ModelGraph::new(
            types,
            vec![
                LayerGraph::new("H", LayerKind::Directed, [NodeType::Doc; 2], n, &h),
                LayerGraph::new("T", LayerKind::Bipartite, [NodeType::Doc, NodeType::Word], n, &t),
                LayerGraph::new("U", LayerKind::Undirected, [NodeType::Doc; 2], n, &u),
            ],
            vec![false; n],
        ))
    }

    fn random_partition(g: &ModelGraph, rng: &mut ChaCha8Rng, k: u32) -> Partition {
        let n = g.n_nodes() as u32;
        let labels = (0..n)
            .map(|v| {
                let base = if g.node_type(v as usize) == NodeType::Doc { 0 } else { n / 2 };
                base + rng.random_range(0..k)
            })
            .collect();
        Partition::new(labels, g.node_types().to_vec()).unwrap()
    }

    #[test]
    fn move_delta_matches_recomputation() {
        let g = random_model(3, 8, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = BlockState::from_partition(g.clone(), &random_partition(&g, &mut rng, 3)).unwrap();
        for _ in 0..300 {
            let v = rng.random_range(0..g.n_nodes());
            let ty = g.node_type(v);
            let cands: Vec<u32> = (0..g.n_nodes() as u32)
                .filter(|&r| st.group_type(r).is_none_or(|t| t == ty))
                .collect();
            let s = cands[rng.random_range(0..cands.len())];
            let before = description_length(&st).total;
            let d = dl_delta_move(&st, v, s).unwrap();
            st.move_node(v, s).unwrap();
            let after = description_length(&st).total;
            assert!(
                (after - before - d).abs() <= 1e-9 * before.abs().max(1.0),
                "{d} vs {}",
                after - before
            );
        }
    }

    #[test]
    fn noop_move_delta_is_zero() {
        let g = random_model(4, 5, 5);
        let st = BlockState::from_partition(g.clone(), &g.singleton_partition()).unwrap();
        assert_eq!(dl_delta_move(&st, 2, st.group_of(2)).unwrap(), 0.0);
    }

    #[test]
    fn merge_delta_matches_recomputation() {
        let g = random_model(9, 9, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let st = BlockState::from_partition(g.clone(), &random_partition(&g, &mut rng, 4)).unwrap();
            let ty = if rng.random_bool(0.5) { NodeType::Doc } else { NodeType::Word };
            let groups = st.groups_of(ty);
            if groups.len() < 2 {
                continue;
            }
            let (r, s) = (groups[0], groups[1]);
            let d = dl_delta_merge(&st, r, s).unwrap();
            let before = description_length(&st).total;
            let mut merged = st.clone();
            merged.merge_groups(r, s).unwrap();
            let after = description_length(&merged).total;
            assert!((after - before - d).abs() <= 1e-9 * before.abs(), "{d} vs {}", after - before);
        }
    }

    #[test]
    fn add_edge_delta_matches_rebuild() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 7;
        let types = vec![NodeType::Doc; n];
        let base: Vec<(u32, u32, u32)> = vec![(0, 1, 1), (1, 2, 2), (2, 0, 1), (3, 4, 1), (5, 6, 1), (6, 6, 1)];
        for kind in [LayerKind::Directed, LayerKind::Undirected] {
            for _ in 0..40 {
                let (u, v) = (rng.random_range(0..n as u32), rng.random_range(0..n as u32));
                let labels: Vec<u32> = (0..n as u32).map(|_| rng.random_range(0..3)).collect();
                let p = Partition::of_type(labels, NodeType::Doc);
                let g0 = Arc::new(ModelGraph::new(
                    types.clone(),
                    vec![LayerGraph::new("X", kind, [NodeType::Doc; 2], n, &base)],
                    vec![false; n],
                ));
                let mut plus = base.clone();
                plus.push((u, v, 1));
                let g1 = Arc::new(ModelGraph::new(
                    types.clone(),
                    vec![LayerGraph::new("X", kind, [NodeType::Doc; 2], n, &plus)],
                    vec![false; n],
                ));
                let s0 = BlockState::from_partition(g0, &p).unwrap();
                let s1 = BlockState::from_partition(g1, &p).unwrap();
                let expect = -layer_log_marginal(&s1, 0) + layer_log_marginal(&s0, 0);
                let got = dl_delta_add_edge(&s0, 0, u as usize, v as usize);
                assert!((got - expect).abs() < 1e-9, "{kind:?} {u}->{v}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn relabeling_leaves_dl_unchanged() {
        let g = random_model(8, 6, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_partition(&g, &mut rng, 3);
        let permuted: Vec<u32> = p.labels().iter().map(|&l| (l * 7 + 3) % 100).collect();
        let q = Partition::new(permuted, p.types().to_vec()).unwrap();
        let a = description_length(&BlockState::from_partition(g.clone(), &p).unwrap()).total;
        let b = description_length(&BlockState::from_partition(g, &q).unwrap()).total;
        assert!((a - b).abs() < 1e-9 * a.abs());
    }

    #[test]
    fn joint_is_sum_of_layers_and_prior() {
        let g = random_model(12, 6, 5);
        let st = BlockState::from_partition(g.clone(), &g.trivial_partition()).unwrap();
        let dl = description_length(&st);
        let sum: f64 = (0..3).map(|l| layer_log_marginal(&st, l)).sum::<f64>() + state_log_prior(&st);
        assert_eq!(joint_log_posterior_numerator(&st), sum);
        assert!((dl.total + sum).abs() < 1e-9 * sum.abs());
    }
}
