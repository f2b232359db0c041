use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::graph::NodeType;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Documents, word types and tags with the hyperlink (H), text (T) and
/// metadata (M) layers between them.
///
/// Nodes share one global index space: documents first, then words, then
/// tags. Edge lists are kept sorted so two networks built from the same
/// input compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultilayerNetwork {
    pub docs: Vec<String>,
    pub words: Vec<String>,
    pub tags: Vec<String>,
    /// Directed `(source doc, target doc)`, unique, no self-loops.
    pub hyperlinks: Vec<(u32, u32)>,
    /// `(doc, word, token count)`, count > 0, unique `(doc, word)`.
    pub text: Vec<(u32, u32, u32)>,
    /// `(doc, tag)`, unique.
    pub metadata: Vec<(u32, u32)>,
}

/// On-disk wrapper carrying the format version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub format: String,
    pub version: u32,
    pub network: MultilayerNetwork,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<BuildReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub min_outlinks: usize,
    pub largest_component: bool,
    /// Sort word and tag registries lexicographically.
    pub canonical_order: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_outlinks: 2,
            largest_component: true,
            canonical_order: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub documents_in: usize,
    pub dropped_few_outlinks: usize,
    pub dropped_outside_component: usize,
    pub documents_out: usize,
    pub words_out: usize,
    pub tags_out: usize,
    pub hyperlinks: usize,
    pub tokens: usize,
    pub tag_edges: usize,
    pub dangling_links: usize,
}

impl MultilayerNetwork {
    /// Assemble a network from parts, normalizing edge order.
    pub fn from_parts(
        docs: Vec<String>,
        words: Vec<String>,
        tags: Vec<String>,
        mut hyperlinks: Vec<(u32, u32)>,
        text: Vec<(u32, u32, u32)>,
        mut metadata: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let (nd, nw, nt) = (docs.len() as u32, words.len() as u32, tags.len() as u32);
        hyperlinks.retain(|&(u, v)| u != v);
        hyperlinks.sort_unstable();
        hyperlinks.dedup();
        if hyperlinks.iter().any(|&(u, v)| u >= nd || v >= nd) {
            return Err(Error::InvalidArgument("hyperlink endpoint out of range".into()));
        }
        let mut counts: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for (d, w, c) in text {
            if d >= nd || w >= nw {
                return Err(Error::InvalidArgument("text edge endpoint out of range".into()));
            }
            if c > 0 {
                *counts.entry((d, w)).or_default() += c;
            }
        }
        metadata.sort_unstable();
        metadata.dedup();
        if metadata.iter().any(|&(d, t)| d >= nd || t >= nt) {
            return Err(Error::InvalidArgument("tag edge endpoint out of range".into()));
        }
        Ok(Self {
            docs,
            words,
            tags,
            hyperlinks,
            text: counts.into_iter().map(|((d, w), c)| (d, w, c)).collect(),
            metadata,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.docs.len() + self.words.len() + self.tags.len()
    }

    pub fn token_count(&self) -> u64 {
        self.text.iter().map(|&(_, _, c)| c as u64).sum()
    }

    pub fn word_node(&self, w: u32) -> usize {
        self.docs.len() + w as usize
    }

    pub fn tag_node(&self, t: u32) -> usize {
        self.docs.len() + self.words.len() + t as usize
    }

    pub fn node_type(&self, node: usize) -> NodeType {
        if node < self.docs.len() {
            NodeType::Doc
        } else if node < self.docs.len() + self.words.len() {
            NodeType::Word
        } else {
            NodeType::Tag
        }
    }

    pub fn node_types(&self) -> Vec<NodeType> {
        (0..self.n_nodes()).map(|i| self.node_type(i)).collect()
    }

    pub fn node_name(&self, node: usize) -> &str {
        let (nd, nw) = (self.docs.len(), self.words.len());
        if node < nd {
            &self.docs[node]
        } else if node < nd + nw {
            &self.words[node - nd]
        } else {
            &self.tags[node - nd - nw]
        }
    }

    pub fn has_hyperlink(&self, u: u32, v: u32) -> bool {
        self.hyperlinks.binary_search(&(u, v)).is_ok()
    }

    /// Keep only the listed documents (in the given order), dropping words and
    /// tags left without edges.
    pub fn restrict_docs(&self, keep: &[u32]) -> Self {
        let mut remap = vec![u32::MAX; self.docs.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let docs = keep.iter().map(|&d| self.docs[d as usize].clone()).collect();
        let hyperlinks = self
            .hyperlinks
            .iter()
            .filter_map(|&(u, v)| {
                let (a, b) = (remap[u as usize], remap[v as usize]);
                (a != u32::MAX && b != u32::MAX).then_some((a, b))
            })
            .collect();
        let text: Vec<_> = self
            .text
            .iter()
            .filter_map(|&(d, w, c)| {
                let a = remap[d as usize];
                (a != u32::MAX).then_some((a, w, c))
            })
            .collect();
        let metadata: Vec<_> = self
            .metadata
            .iter()
            .filter_map(|&(d, t)| {
                let a = remap[d as usize];
                (a != u32::MAX).then_some((a, t))
            })
            .collect();
        let (words, text) = prune_words(&self.words, text);
        let (tags, metadata) = prune_tags(&self.tags, metadata);
        Self::from_parts(docs, words, tags, hyperlinks, text, metadata).expect("restriction preserves index validity")
    }

    pub fn write_json<W: Write>(&self, writer: W, report: Option<&BuildReport>) -> Result<()> {
        let file = NetworkFile {
            format: "mlsbm-network".into(),
            version: NETWORK_FORMAT_VERSION,
            network: self.clone(),
            report: report.cloned(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let file: NetworkFile = serde_json::from_reader(reader)?;
        if file.version != NETWORK_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported network format version {}",
                file.version
            )));
        }
        let n = file.network;
        // Re-normalize so hand-edited files still satisfy the invariants.
        Self::from_parts(n.docs, n.words, n.tags, n.hyperlinks, n.text, n.metadata)
    }
}

fn prune_words(words: &[String], text: Vec<(u32, u32, u32)>) -> (Vec<String>, Vec<(u32, u32, u32)>) {
    let mut used = vec![false; words.len()];
    for &(_, w, _) in &text {
        used[w as usize] = true;
    }
    let (names, remap) = compact_registry(words, &used);
    let text = text.into_iter().map(|(d, w, c)| (d, remap[w as usize], c)).collect();
    (names, text)
}

fn prune_tags(tags: &[String], metadata: Vec<(u32, u32)>) -> (Vec<String>, Vec<(u32, u32)>) {
    let mut used = vec![false; tags.len()];
    for &(_, t) in &metadata {
        used[t as usize] = true;
    }
    let (names, remap) = compact_registry(tags, &used);
    let metadata = metadata.into_iter().map(|(d, t)| (d, remap[t as usize])).collect();
    (names, metadata)
}

fn compact_registry(names: &[String], used: &[bool]) -> (Vec<String>, Vec<u32>) {
    let mut remap = vec![u32::MAX; names.len()];
    let mut out = Vec::new();
    for (i, name) in names.iter().enumerate() {
        if used[i] {
            remap[i] = out.len() as u32;
            out.push(name.clone());
        }
    }
    (out, remap)
}

/// Sort a registry lexicographically, returning old-index -> new-index.
fn sort_registry(names: Vec<String>) -> (Vec<String>, Vec<u32>) {
    let mut order: Vec<u32> = (0..names.len() as u32).collect();
    order.sort_by(|&a, &b| names[a as usize].cmp(&names[b as usize]));
    let mut remap = vec![0u32; names.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    let sorted = order.iter().map(|&o| names[o as usize].clone()).collect();
    (sorted, remap)
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a as usize] < self.size[b as usize] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
    }
}

/// Build the three-layer network.
///
/// Steps, in order: drop documents with fewer than `min_outlinks` resolved
/// hyperlinks; keep the largest weakly connected component of the surviving
/// hyperlink graph; rebuild the text and metadata layers over the remaining
/// documents, pruning words and tags without edges.
pub fn build_network(corpus: &Corpus, filters: &FilterConfig) -> Result<(MultilayerNetwork, BuildReport)> {
    let n = corpus.documents.len();
    let mut report = BuildReport {
        documents_in: n,
        dangling_links: corpus.report.dangling_links,
        ..Default::default()
    };

    let mut alive: Vec<bool> = corpus.documents.iter().map(|d| d.outlinks.len() >= filters.min_outlinks).collect();
    report.dropped_few_outlinks = alive.iter().filter(|a| !**a).count();

    if filters.largest_component {
        let mut ds = DisjointSet::new(n);
        for (i, d) in corpus.documents.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            for &j in &d.outlinks {
                if alive[j as usize] {
                    ds.union(i as u32, j);
                }
            }
        }
        // Ties go to the component holding the lowest-index document.
        let mut best: Option<(u32, u32)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            let root = ds.find(i as u32);
            let size = ds.size[root as usize];
            if best.is_none_or(|(_, s)| size > s) {
                best = Some((root, size));
            }
        }
        if let Some((root, _)) = best {
            for i in 0..n {
                if alive[i] && ds.find(i as u32) != root {
                    alive[i] = false;
                    report.dropped_outside_component += 1;
                }
            }
        }
    }

    let keep: Vec<u32> = (0..n as u32).filter(|&i| alive[i as usize]).collect();
    if keep.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let mut remap = vec![u32::MAX; n];
    for (new, &old) in keep.iter().enumerate() {
        remap[old as usize] = new as u32;
    }

    let docs: Vec<String> = keep.iter().map(|&i| corpus.documents[i as usize].doc_id.clone()).collect();
    let mut hyperlinks = Vec::new();
    let mut text = Vec::new();
    let mut metadata = Vec::new();
    let mut word_counts: BTreeMap<u32, u32> = BTreeMap::new();
    for (new, &old) in keep.iter().enumerate() {
        let d = &corpus.documents[old as usize];
        for &j in &d.outlinks {
            if remap[j as usize] != u32::MAX {
                hyperlinks.push((new as u32, remap[j as usize]));
            }
        }
        word_counts.clear();
        for &w in &d.tokens {
            *word_counts.entry(w).or_default() += 1;
        }
        text.extend(word_counts.iter().map(|(&w, &c)| (new as u32, w, c)));
        metadata.extend(d.tags.iter().map(|&t| (new as u32, t)));
    }

    let (mut words, mut text) = prune_words(&corpus.vocabulary, text);
    let (mut tags, mut metadata) = prune_tags(&corpus.tag_set, metadata);
    if filters.canonical_order {
        let (w, wmap) = sort_registry(words);
        words = w;
        for e in &mut text {
            e.1 = wmap[e.1 as usize];
        }
        let (t, tmap) = sort_registry(tags);
        tags = t;
        for e in &mut metadata {
            e.1 = tmap[e.1 as usize];
        }
    }

    let net = MultilayerNetwork::from_parts(docs, words, tags, hyperlinks, text, metadata)?;
    report.documents_out = net.n_docs();
    report.words_out = net.n_words();
    report.tags_out = net.n_tags();
    report.hyperlinks = net.hyperlinks.len();
    report.tokens = net.token_count() as usize;
    report.tag_edges = net.metadata.len();
    Ok((net, report))
}

/// `round(mu * total)` with halves rounded up.
pub(crate) fn retained_count(mu: f64, total: u64) -> u64 {
    ((mu * total as f64 + 0.5).floor() as u64).min(total)
}

/// Keep a uniformly random subset of exactly `round(mu * M)` word tokens.
///
/// Hyperlinks and tags are untouched; word types left without tokens are
/// removed from the registry.
pub fn subsample_tokens(network: &MultilayerNetwork, mu: f64, seed: u64) -> Result<MultilayerNetwork> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("mu = {mu} outside [0, 1]")));
    }
    let total = network.token_count();
    let keep = retained_count(mu, total);
    if keep == total {
        return Ok(network.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, total as usize, keep as usize).into_vec();
    picked.sort_unstable();

    // Walk the token stream (edges in order, each repeated `count` times)
    // alongside the sorted picks.
    let mut text = Vec::new();
    let mut offset = 0usize;
    let mut p = 0usize;
    for &(d, w, c) in &network.text {
        let end = offset + c as usize;
        let start_p = p;
        while p < picked.len() && picked[p] < end {
            p += 1;
        }
        if p > start_p {
            text.push((d, w, (p - start_p) as u32));
        }
        offset = end;
    }
    let (words, text) = prune_words(&network.words, text);
    MultilayerNetwork::from_parts(
        network.docs.clone(),
        words,
        network.tags.clone(),
        network.hyperlinks.clone(),
        text,
        network.metadata.clone(),
    )
}

#[cfg(test)]
mod tests {
    use std::collections::VecDeque;

    use proptest::prelude::*;

    use super::*;
    use crate::corpus::{RawDocument, TokenizeConfig};

    fn corpus(docs: &[(&str, &str, &[&str], &[&str])]) -> Corpus {
        let raw = docs
            .iter()
            .map(|(id, text, links, tags)| RawDocument {
                id: id.to_string(),
                text: Some(text.to_string()),
                tokens: None,
                links: links.iter().map(|s| s.to_string()).collect(),
                tags: tags.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        Corpus::from_raw(raw, &TokenizeConfig::default()).unwrap()
    }

    #[test]
    fn complete_digraph_survives() {
        let c = corpus(&[
            ("a", "x y", &["b", "c"], &["t"]),
            ("b", "y", &["a", "c"], &["t"]),
            ("c", "z z", &["a", "b"], &["u"]),
        ]);
        let (net, report) = build_network(&c, &FilterConfig::default()).unwrap();
        assert_eq!(net.n_docs(), 3);
        assert_eq!(net.hyperlinks.len(), 6);
        assert_eq!(net.token_count(), 5);
        assert_eq!(net.text.iter().find(|e| e.1 == 2).unwrap().2, 2);
        assert_eq!(report.dropped_few_outlinks, 0);
        assert_eq!(net.words, ["x", "y", "z"]);
    }

    #[test]
    fn drops_sparse_docs_and_prunes_words() {
        let c = corpus(&[
            ("a", "x", &["b", "c"], &[]),
            ("b", "x", &["a", "c"], &[]),
            ("c", "x", &["a", "b"], &[]),
            ("d", "only here", &["a"], &["lonely"]),
        ]);
        let (net, report) = build_network(&c, &FilterConfig::default()).unwrap();
        assert_eq!(net.n_docs(), 3);
        assert_eq!(report.dropped_few_outlinks, 1);
        assert_eq!(net.words, ["x"]);
        assert!(net.tags.is_empty());
    }

    #[test]
    fn empty_network_error() {
        let c = corpus(&[("a", "x", &[], &[])]);
        assert!(matches!(build_network(&c, &FilterConfig::default()), Err(Error::EmptyNetwork)));
    }

    /// Brute-force BFS component labeling over the undirected hyperlink graph.
    fn components_bfs(n: usize, edges: &[(usize, usize)], alive: &[bool]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            if alive[u] && alive[v] {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut seen = vec![false; n];
        let mut comps = Vec::new();
        for s in 0..n {
            if !alive[s] || seen[s] {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    #[test]
    fn planted_island_is_removed() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        // Docs 0..40 form the mainland, 40..50 an island.
        let mut links: Vec<Vec<String>> = vec![Vec::new(); n];
        let mut edges = Vec::new();
        for (u, out) in links.iter_mut().enumerate() {
            let (lo, hi) = if u < 40 { (0, 40) } else { (40, 50) };
            while out.len() < 3 {
                let v = rng.random_range(lo..hi);
                let name = format!("d{v}");
                if v != u && !out.contains(&name) {
                    out.push(name);
                    edges.push((u, v));
                }
            }
        }
        let raw = (0..n)
            .map(|i| RawDocument {
                id: format!("d{i}"),
                text: Some(format!("w{} common", i % 7)),
                tokens: None,
                links: links[i].clone(),
                tags: vec![],
            })
            .collect();
        let c = Corpus::from_raw(raw, &TokenizeConfig::default()).unwrap();
        let (net, report) = build_network(&c, &FilterConfig::default()).unwrap();

        let comps = components_bfs(n, &edges, &vec![true; n]);
        let largest = comps.iter().max_by_key(|c| c.len()).unwrap();
        let mut expected: Vec<String> = largest.iter().map(|i| format!("d{i}")).collect();
        expected.sort();
        let mut got = net.docs.clone();
        got.sort();
        assert_eq!(got, expected);
        assert_eq!(report.dropped_outside_component, 10);
    }

    #[test]
    fn json_round_trip() {
        let c = corpus(&[
            ("a", "x y", &["b", "c"], &["t"]),
            ("b", "y y q", &["a", "c"], &["t"]),
            ("c", "z", &["a", "b"], &["u"]),
        ]);
        let (net, report) = build_network(&c, &FilterConfig::default()).unwrap();
        let mut buf = Vec::new();
        net.write_json(&mut buf, Some(&report)).unwrap();
        let back = MultilayerNetwork::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    fn toy_network() -> MultilayerNetwork {
        MultilayerNetwork::from_parts(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into(), "z".into()],
            vec!["t".into()],
            vec![(0, 1), (1, 2), (2, 0)],
            vec![(0, 0, 5), (0, 1, 2), (1, 1, 4), (2, 2, 1), (2, 0, 3)],
            vec![(0, 0), (1, 0), (2, 0)],
        )
        .unwrap()
    }

    #[test]
    fn subsample_identity_and_empty() {
        let net = toy_network();
        assert_eq!(subsample_tokens(&net, 1.0, 3).unwrap(), net);
        let none = subsample_tokens(&net, 0.0, 3).unwrap();
        assert_eq!(none.token_count(), 0);
        assert!(none.words.is_empty());
        assert_eq!(none.hyperlinks, net.hyperlinks);
        assert_eq!(none.metadata, net.metadata);
        assert!(subsample_tokens(&net, 1.5, 0).is_err());
    }

    #[test]
    fn retained_count_rounds_half_up() {
        assert_eq!(retained_count(0.5, 155_093), 77_547);
        assert_eq!(retained_count(0.5, 4), 2);
        assert_eq!(retained_count(0.0, 10), 0);
        assert_eq!(retained_count(1.0, 10), 10);
    }

    proptest! {
        #[test]
        fn subsample_keeps_exact_count(mu in 0.0f64..=1.0, seed in 0u64..1000) {
            let net = toy_network();
            let sub = subsample_tokens(&net, mu, seed).unwrap();
            prop_assert_eq!(sub.token_count(), retained_count(mu, net.token_count()));
            // Every retained (doc, word) count is bounded by the original.
            for &(d, w, c) in &sub.text {
                let name = &sub.words[w as usize];
                let ow = net.words.iter().position(|x| x == name).unwrap() as u32;
                let orig = net.text.iter().find(|e| e.0 == d && e.1 == ow).unwrap().2;
                prop_assert!(c <= orig);
            }
        }

        #[test]
        fn raising_min_outlinks_never_adds_docs(
            links in proptest::collection::vec(proptest::collection::vec(0usize..12, 0..6), 12),
            k in 0usize..5,
        ) {
            let raw: Vec<RawDocument> = links
                .iter()
                .enumerate()
                .map(|(i, l)| RawDocument {
                    id: format!("d{i}"),
                    text: Some("w".into()),
                    tokens: None,
                    links: l.iter().map(|j| format!("d{j}")).collect(),
                    tags: vec![],
                })
                .collect();
            let c = Corpus::from_raw(raw, &TokenizeConfig::default()).unwrap();
            let count = |m: usize| {
                let f = FilterConfig { min_outlinks: m, largest_component: false, canonical_order: true };
                build_network(&c, &f).map(|(n, _)| n.n_docs()).unwrap_or(0)
            };
            prop_assert!(count(k + 1) <= count(k));
        }
    }
}
