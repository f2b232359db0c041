//! MDL fitting and posterior sampling of partitions.
//!
//! Each chain owns a [`BlockState`] and runs Metropolis-Hastings sweeps of
//! single-node moves plus merge-split moves. A node's target group is drawn
//! by picking a random neighbor `u` and then, with probability
//! `εB/(e_t + εB)`, a uniform group, otherwise the far end of a random edge
//! of `u`'s group `t`. A small fraction of proposals open a new group, which
//! keeps the chain ergodic over type-pure partitions.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::MultilayerNetwork;
use crate::error::{Error, Result};
use crate::graph::{BlockState, LayerKind, ModelGraph, NodeType, Partition};
use crate::likelihood::{description_length, dl_delta_merge, move_delta, FitResult, LayerSet, TagMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Multilevel merging down from singletons.
    #[default]
    Agglomerative,
    /// Uniform labels among `random_init_groups` groups per type.
    Random,
    Singleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub seed: u64,
    pub n_sweeps: usize,
    pub n_chains: usize,
    pub init: InitStrategy,
    /// Smoothing toward a uniform group in the neighbor-based proposal.
    pub epsilon: f64,
    /// Inverse temperature; `inf` accepts only strict improvements.
    pub beta: f64,
    pub merge_split: bool,
    /// Merge-split attempts per sweep.
    pub merge_split_attempts: usize,
    /// Probability that a single-node proposal opens a new group.
    pub new_group_prob: f64,
    /// Sweeps discarded before recording samples.
    pub burn_in: usize,
    /// Record every `thin`-th sweep.
    pub thin: usize,
    /// Upper bound on the greedy passes that finish a fit.
    pub greedy_passes: usize,
    pub random_init_groups: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_sweeps: 100,
            n_chains: 10,
            init: InitStrategy::Agglomerative,
            epsilon: 1.0,
            beta: 1.0,
            merge_split: true,
            merge_split_attempts: 10,
            new_group_prob: 0.01,
            burn_in: 100,
            thin: 10,
            greedy_passes: 20,
            random_init_groups: 10,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.n_sweeps == 0 {
            return bad("n_sweeps must be at least 1");
        }
        if self.n_chains == 0 {
            return bad("n_chains must be at least 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return bad("beta must be positive");
        }
        if !(self.new_group_prob > 0.0 && self.new_group_prob < 1.0) {
            return bad("new_group_prob must lie in (0, 1)");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.init == InitStrategy::Random && self.random_init_groups == 0 {
            return bad("random_init_groups must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub partition: Partition,
    pub dl: f64,
    pub chain_id: usize,
    pub sweep_index: usize,
}

/// Best partition over `config.n_chains` independent chains.
pub fn fit_mdl(network: &MultilayerNetwork, layers: LayerSet, tag_mode: TagMode, config: &McmcConfig) -> Result<FitResult> {
    let graph = Arc::new(ModelGraph::from_network(network, layers, tag_mode));
    fit_model(graph, &layers.name(), config)
}

/// [`fit_mdl`] over an already assembled model graph.
pub fn fit_model(graph: Arc<ModelGraph>, model: &str, config: &McmcConfig) -> Result<FitResult> {
    config.validate()?;
    check_nonempty(&graph)?;
    let start = Instant::now();
    let runs: Vec<(Vec<u32>, f64)> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain = Chain::new(Arc::clone(&graph), config, c);
            for _ in 0..config.n_sweeps {
                chain.sweep(config.beta);
            }
            chain.restore_best();
            chain.greedy(config.greedy_passes);
            chain.refresh_dl();
            (chain.state.b.clone(), chain.dl)
        })
        .collect();

    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one chain");
    let partition = Partition::new(runs[best].0.clone(), graph.node_types().to_vec())?.compacted();
    let state = BlockState::from_partition(Arc::clone(&graph), &partition)?;
    let dl = description_length(&state);

    let chain_partitions = runs
        .iter()
        .map(|r| Ok(Partition::new(r.0.clone(), graph.node_types().to_vec())?.compacted()))
        .collect::<Result<Vec<_>>>()?;
    let chain_dls: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (dl_mean, dl_std) = mean_std(&chain_dls);
    let groups = NodeType::ALL
        .iter()
        .filter(|&&t| graph.is_active(t))
        .map(|&t| (t.as_str().to_owned(), state.n_groups(t)))
        .collect();
    Ok(FitResult {
        model: model.to_owned(),
        partition,
        chain_partitions,
        dl_total: dl.total,
        dl_per_layer: dl.layers,
        dl_prior: dl.prior,
        groups,
        seed: config.seed,
        sweeps: config.n_sweeps,
        chains: config.n_chains,
        chain_dls,
        dl_mean,
        dl_std,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Thinned posterior samples from every chain, chain by chain.
pub fn sample_posterior(
    network: &MultilayerNetwork,
    layers: LayerSet,
    tag_mode: TagMode,
    config: &McmcConfig,
) -> Result<Vec<PosteriorSample>> {
    let graph = Arc::new(ModelGraph::from_network(network, layers, tag_mode));
    sample_model(graph, config)
}

pub fn sample_model(graph: Arc<ModelGraph>, config: &McmcConfig) -> Result<Vec<PosteriorSample>> {
    config.validate()?;
    check_nonempty(&graph)?;
    let per_chain: Vec<Vec<PosteriorSample>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain = Chain::new(Arc::clone(&graph), config, c);
            for _ in 0..config.burn_in {
                chain.sweep(config.beta);
            }
            let mut out = Vec::with_capacity(config.n_sweeps / config.thin);
            for s in 0..config.n_sweeps {
                chain.sweep(config.beta);
                if (s + 1) % config.thin == 0 {
                    out.push(PosteriorSample {
                        partition: chain.state.partition().compacted(),
                        dl: chain.dl,
                        chain_id: c,
                        sweep_index: s,
                    });
                }
            }
            out
        })
        .collect();
    Ok(per_chain.into_iter().flatten().collect())
}

fn check_nonempty(graph: &ModelGraph) -> Result<()> {
    if graph.n_nodes() == 0 || graph.layers().iter().all(|l| l.n_edges() == 0) {
        return Err(Error::EmptyNetwork);
    }
    Ok(())
}

/// Independent seed for sub-task `stream` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Sum of neighbor multiplicities of `v` over all layers, self-loops excluded.
fn neighbor_weight(graph: &ModelGraph, v: usize) -> u64 {
    graph.layers().iter().flat_map(|l| l.neighbors(v)).map(|(_, m)| m as u64).sum()
}

/// Edges between groups `t` and `s` in either direction, as seen from `t`.
#[inline]
fn group_link(state: &BlockState, layer: usize, t: u32, s: u32) -> u64 {
    let st = &state.stats[layer];
    let out = st.e[t as usize].get(&s).copied().unwrap_or(0);
    if state.graph.layers[layer].kind == LayerKind::Directed {
        out + st.e_in[t as usize].get(&s).copied().unwrap_or(0)
    } else {
        out
    }
}

#[inline]
fn group_degree(state: &BlockState, layer: usize, t: u32) -> u64 {
    let st = &state.stats[layer];
    if state.graph.layers[layer].kind == LayerKind::Directed {
        st.deg_out[t as usize] + st.deg_in[t as usize]
    } else {
        st.deg_out[t as usize]
    }
}

/// Draw an occupied group for `v` from the neighbor-based proposal.
fn propose_regular(state: &BlockState, v: usize, k_v: u64, eps: f64, rng: &mut ChaCha8Rng) -> u32 {
    let t = state.graph.node_types[v];
    let groups = state.occupied_groups(t);
    if k_v == 0 {
        return groups[rng.random_range(0..groups.len())];
    }
    let mut x = rng.random_range(0..k_v);
    let mut pick = None;
    'outer: for (li, layer) in state.graph.layers.iter().enumerate() {
        for (u, m) in layer.neighbors(v) {
            if x < m as u64 {
                pick = Some((li, u));
                break 'outer;
            }
            x -= m as u64;
        }
    }
    let (li, u) = pick.expect("neighbor weight matches adjacency");
    let tg = state.b[u as usize];
    let e_t = group_degree(state, li, tg);
    let b_t = groups.len() as f64;
    if rng.random::<f64>() * (e_t as f64 + eps * b_t) < eps * b_t {
        return groups[rng.random_range(0..groups.len())];
    }
    let st = &state.stats[li];
    let mut y = rng.random_range(0..e_t);
    for (&s, &c) in &st.e[tg as usize] {
        if y < c {
            return s;
        }
        y -= c;
    }
    for (&s, &c) in &st.e_in[tg as usize] {
        if y < c {
            return s;
        }
        y -= c;
    }
    unreachable!("group degree matches edge counts")
}

/// Probability that [`propose_regular`] yields `s` for `v` in `state`.
fn regular_prob(state: &BlockState, v: usize, s: u32, k_v: u64, eps: f64) -> f64 {
    let t = state.graph.node_types[v];
    let b_t = state.n_groups(t) as f64;
    if k_v == 0 {
        return 1.0 / b_t;
    }
    let mut p = 0.0;
    for (li, layer) in state.graph.layers.iter().enumerate() {
        for (u, m) in layer.neighbors(v) {
            let tg = state.b[u as usize];
            let num = group_link(state, li, tg, s) as f64 + eps;
            let den = group_degree(state, li, tg) as f64 + eps * b_t;
            p += m as f64 * num / den;
        }
    }
    p / k_v as f64
}

/// Probability of proposing to move `v` into `s` (new group if `s` is empty).
#[cfg(test)]
pub(crate) fn move_proposal_prob(state: &BlockState, v: usize, s: u32, eps: f64, new_group: f64) -> f64 {
    if state.sizes[s as usize] == 0 {
        if state.sizes[state.b[v] as usize] == 1 {
            0.0
        } else {
            new_group
        }
    } else {
        let k_v = neighbor_weight(&state.graph, v);
        (1.0 - new_group) * regular_prob(state, v, s, k_v, eps)
    }
}

pub(crate) struct Chain {
    pub(crate) state: BlockState,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) dl: f64,
    movable: Vec<usize>,
    by_type: [Vec<usize>; 3],
    k: Vec<u64>,
    best_b: Vec<u32>,
    best_dl: f64,
    eps: f64,
    new_group: f64,
    ms_attempts: usize,
}

impl Chain {
    pub(crate) fn new(graph: Arc<ModelGraph>, config: &McmcConfig, chain: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(chain as u64);
        let init = match config.init {
            InitStrategy::Random => random_partition(&graph, config.random_init_groups, &mut rng),
            _ => graph.singleton_partition(),
        };
        let state = BlockState::from_partition(Arc::clone(&graph), &init).expect("initial partition is valid");
        let movable = graph.movable_nodes();
        let mut by_type: [Vec<usize>; 3] = Default::default();
        for &v in &movable {
            by_type[graph.node_type(v).index()].push(v);
        }
        let k = (0..graph.n_nodes()).map(|v| neighbor_weight(&graph, v)).collect();
        let dl = description_length(&state).total;
        let mut chain = Self {
            best_b: state.b.clone(),
            best_dl: dl,
            state,
            rng,
            dl,
            movable,
            by_type,
            k,
            eps: config.epsilon,
            new_group: config.new_group_prob,
            ms_attempts: if config.merge_split { config.merge_split_attempts } else { 0 },
        };
        if config.init == InitStrategy::Agglomerative {
            chain.agglomerate();
        }
        chain.refresh_dl();
        chain.best_b.clone_from(&chain.state.b);
        chain.best_dl = chain.dl;
        chain
    }

    pub(crate) fn refresh_dl(&mut self) {
        self.dl = description_length(&self.state).total;
    }

    fn note_best(&mut self) {
        if self.dl < self.best_dl {
            self.best_dl = self.dl;
            self.best_b.clone_from(&self.state.b);
        }
    }

    pub(crate) fn restore_best(&mut self) {
        if self.best_dl < self.dl {
            let p = Partition::new(self.best_b.clone(), self.state.graph.node_types().to_vec()).expect("recorded partition is valid");
            self.state = BlockState::from_partition(Arc::clone(&self.state.graph), &p).expect("valid");
            self.refresh_dl();
        }
    }

    /// One proposal per movable node in random order, then merge-split moves.
    pub(crate) fn sweep(&mut self, beta: f64) {
        let mut order = std::mem::take(&mut self.movable);
        order.shuffle(&mut self.rng);
        for &v in &order {
            self.node_step(v, beta);
        }
        self.movable = order;
        for _ in 0..self.ms_attempts {
            self.merge_split(beta);
        }
        self.refresh_dl();
        self.note_best();
    }

    pub(crate) fn node_step(&mut self, v: usize, beta: f64) {
        let r = self.state.b[v];
        let d = self.new_group;
        let (s, q_fwd) = if self.rng.random::<f64>() < d {
            if self.state.sizes[r as usize] == 1 {
                return;
            }
            (self.state.empty_group().expect("a free label exists"), d)
        } else {
            let s = propose_regular(&self.state, v, self.k[v], self.eps, &mut self.rng);
            if s == r {
                return;
            }
            (s, (1.0 - d) * regular_prob(&self.state, v, s, self.k[v], self.eps))
        };
        let delta = move_delta(&self.state, v, s);
        if beta.is_infinite() {
            if delta < 0.0 {
                self.state.apply_move(v, s);
                self.dl += delta;
            }
            return;
        }
        let r_emptied = self.state.sizes[r as usize] == 1;
        self.state.apply_move(v, s);
        let q_rev = if r_emptied {
            d
        } else {
            (1.0 - d) * regular_prob(&self.state, v, r, self.k[v], self.eps)
        };
        let log_a = -beta * delta + q_rev.ln() - q_fwd.ln();
        if log_a >= 0.0 || self.rng.random::<f64>() < log_a.exp() {
            self.dl += delta;
            self.note_best();
        } else {
            self.state.apply_move(v, r);
        }
    }

    /// Sequentially allocated merge-split move on a random same-type pair.
    pub(crate) fn merge_split(&mut self, beta: f64) {
        if self.movable.len() < 2 {
            return;
        }
        let i = self.movable[self.rng.random_range(0..self.movable.len())];
        let pool = &self.by_type[self.state.graph.node_type(i).index()];
        if pool.len() < 2 {
            return;
        }
        let j = loop {
            let j = pool[self.rng.random_range(0..pool.len())];
            if j != i {
                break j;
            }
        };
        let (ci, cj) = (self.state.b[i], self.state.b[j]);
        if ci == cj {
            self.split(i, j, ci, beta);
        } else {
            self.merge(i, j, ci, cj, beta);
        }
    }

    fn split(&mut self, i: usize, j: usize, c: u32, beta: f64) {
        let mut others: Vec<u32> = self
            .state
            .members(c)
            .iter()
            .copied()
            .filter(|&k| k as usize != i && k as usize != j)
            .collect();
        others.shuffle(&mut self.rng);
        let c_new = self.state.empty_group().expect("group has two members");
        let mut delta = move_delta(&self.state, i, c_new);
        self.state.apply_move(i, c_new);
        let mut log_q = 0.0;
        for k in others {
            let dk = move_delta(&self.state, k as usize, c_new);
            // p(new) = 1 / (1 + e^dk)
            if self.rng.random::<f64>() * (1.0 + dk.exp()) < 1.0 {
                self.state.apply_move(k as usize, c_new);
                delta += dk;
                log_q -= softplus(dk);
            } else {
                log_q -= softplus(-dk);
            }
        }
        let accept = if beta.is_infinite() {
            delta < 0.0
        } else {
            let log_a = -beta * delta - log_q;
            log_a >= 0.0 || self.rng.random::<f64>() < log_a.exp()
        };
        if accept {
            self.dl += delta;
            self.note_best();
        } else {
            self.move_all(c_new, c);
        }
    }

    fn merge(&mut self, i: usize, j: usize, ci: u32, cj: u32, beta: f64) {
        let delta = dl_delta_merge(&self.state, ci, cj).expect("same-type unpinned groups");
        if beta.is_infinite() {
            if delta < 0.0 {
                self.move_all(ci, cj);
                self.dl += delta;
            }
            return;
        }
        let side_i: Vec<u32> = self.state.members(ci).to_vec();
        let mut others: Vec<u32> = side_i
            .iter()
            .chain(self.state.members(cj))
            .copied()
            .filter(|&k| k as usize != i && k as usize != j)
            .collect();
        others.shuffle(&mut self.rng);
        let mut on_i = vec![false; self.state.n_nodes()];
        for &k in &side_i {
            on_i[k as usize] = true;
        }

        // Replay the split that would undo this merge to get its probability.
        self.move_all(ci, cj);
        let c_new = self.state.empty_group().expect("merged group has two members");
        self.state.apply_move(i, c_new);
        let mut log_q = 0.0;
        for k in others {
            let dk = move_delta(&self.state, k as usize, c_new);
            if on_i[k as usize] {
                self.state.apply_move(k as usize, c_new);
                log_q -= softplus(dk);
            } else {
                log_q -= softplus(-dk);
            }
        }
        let log_a = -beta * delta + log_q;
        if log_a >= 0.0 || self.rng.random::<f64>() < log_a.exp() {
            self.move_all(c_new, cj);
            self.dl += delta;
            self.note_best();
        }
    }

    fn move_all(&mut self, from: u32, to: u32) {
        while let Some(&k) = self.state.members(from).last() {
            self.state.apply_move(k as usize, to);
        }
    }

    /// Candidate target groups for `v`: all same-type groups when few, else
    /// a handful drawn from the proposal. A new group is always offered.
    fn candidates(&mut self, v: usize, out: &mut Vec<u32>, allow_new: bool) {
        out.clear();
        let t = self.state.graph.node_type(v);
        let groups = self.state.occupied_groups(t);
        if groups.len() <= 64 {
            out.extend_from_slice(groups);
        } else {
            for _ in 0..20 {
                out.push(propose_regular(&self.state, v, self.k[v], self.eps, &mut self.rng));
            }
            out.sort_unstable();
            out.dedup();
        }
        if allow_new && self.state.sizes[self.state.b[v] as usize] > 1 {
            out.push(self.state.empty_group().expect("free label"));
        }
    }

    /// Move every node to its best candidate group while that strictly lowers
    /// the description length.
    pub(crate) fn greedy(&mut self, max_passes: usize) {
        self.greedy_moves(max_passes, true);
    }

    fn greedy_moves(&mut self, max_passes: usize, allow_new: bool) {
        let tol = 1e-10;
        let mut cands = Vec::new();
        for _ in 0..max_passes {
            let mut improved = false;
            let mut order = std::mem::take(&mut self.movable);
            order.shuffle(&mut self.rng);
            for &v in &order {
                self.candidates(v, &mut cands, allow_new);
                let r = self.state.b[v];
                let mut best = (-tol, r);
                for &s in &cands {
                    if s == r {
                        continue;
                    }
                    let d = move_delta(&self.state, v, s);
                    if d < best.0 {
                        best = (d, s);
                    }
                }
                if best.1 != r {
                    self.state.apply_move(v, best.1);
                    self.dl += best.0;
                    improved = true;
                }
            }
            self.movable = order;
            if !improved {
                break;
            }
        }
    }

    /// Multilevel agglomeration: shrink every free type's group count by a
    /// constant factor using the cheapest merges (even uphill ones), polish
    /// each level greedily, and keep the level with the lowest DL.
    fn agglomerate(&mut self) {
        let graph = Arc::clone(&self.state.graph);
        self.refresh_dl();
        let mut best = (self.dl, self.state.b.clone());
        loop {
            let mut merged_any = false;
            for t in NodeType::ALL {
                if !graph.is_free_type(t) {
                    continue;
                }
                let mut groups = self.state.occupied_groups(t).to_vec();
                let b_t = groups.len();
                if b_t <= 1 {
                    continue;
                }
                let goal = ((b_t as f64 / 1.3).floor() as usize).clamp(1, b_t - 1);
                let n_merge = b_t - goal;
                groups.sort_unstable();
                let few = b_t <= 64;
                let mut merges: Vec<(f64, u32, u32)> = Vec::with_capacity(b_t);
                let mut targets = Vec::new();
                for &r in &groups {
                    targets.clear();
                    if few {
                        targets.extend(groups.iter().copied().filter(|&s| s != r));
                    } else {
                        let members = self.state.members(r);
                        for _ in 0..10 {
                            let v = members[self.rng.random_range(0..members.len())] as usize;
                            let s = propose_regular(&self.state, v, self.k[v], self.eps, &mut self.rng);
                            if s != r {
                                targets.push(s);
                            }
                        }
                        if targets.is_empty() {
                            let s = groups[self.rng.random_range(0..b_t)];
                            if s != r {
                                targets.push(s);
                            }
                        }
                        targets.sort_unstable();
                        targets.dedup();
                    }
                    let best_merge = targets
                        .iter()
                        .map(|&s| (dl_delta_merge(&self.state, r, s).expect("valid merge"), s))
                        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    if let Some((d, s)) = best_merge {
                        merges.push((d, r, s));
                    }
                }
                merges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                let mut gone = vec![false; self.state.n_nodes()];
                let mut done = 0;
                for (_, r, s) in merges {
                    if done == n_merge {
                        break;
                    }
                    if gone[r as usize] || gone[s as usize] {
                        continue;
                    }
                    self.move_all(r, s);
                    gone[r as usize] = true;
                    done += 1;
                }
                merged_any |= done > 0;
            }
            if !merged_any {
                break;
            }
            self.greedy_moves(2, false);
            self.refresh_dl();
            if self.dl < best.0 {
                best = (self.dl, self.state.b.clone());
            }
        }
        if best.0 < self.dl {
            let p = Partition::new(best.1, graph.node_types().to_vec()).expect("recorded partition is valid");
            self.state = BlockState::from_partition(graph, &p).expect("valid");
            self.refresh_dl();
        }
    }
}

fn random_partition(graph: &ModelGraph, k: usize, rng: &mut ChaCha8Rng) -> Partition {
    let n = graph.n_nodes();
    let base = graph.singleton_partition();
    let labels = (0..n)
        .map(|v| {
            let t = graph.node_type(v);
            if graph.is_pinned(v) || !graph.is_active(t) {
                base.labels()[v]
            } else {
                (n + t.index() * k + rng.random_range(0..k)) as u32
            }
        })
        .collect();
    Partition::new(labels, graph.node_types().to_vec())
        .expect("labels are type-disjoint")
        .compacted()
}
