//! Synthetic networks with known structure, for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::MultilayerNetwork;
use crate::error::{Error, Result};

/// How the planted text blocks relate to the planted hyperlink blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextPlanting {
    /// Document `i` uses the vocabulary of its hyperlink block.
    Consistent,
    /// Text blocks cut across hyperlink blocks (`i mod B`).
    Conflicting,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n_docs: usize,
    pub n_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub words_per_block: usize,
    pub tokens_per_doc: usize,
    /// Zipf exponent of word frequencies within a block.
    pub zipf_exponent: f64,
    pub text: TextPlanting,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            n_docs: 40,
            n_blocks: 2,
            p_in: 0.4,
            p_out: 0.02,
            words_per_block: 30,
            tokens_per_doc: 60,
            zipf_exponent: 1.0,
            text: TextPlanting::Consistent,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Planted {
    pub network: MultilayerNetwork,
    /// Hyperlink block of each document.
    pub doc_blocks: Vec<u32>,
    /// Text block of each document.
    pub text_blocks: Vec<u32>,
}

/// Directed planted-partition hyperlinks plus a Zipfian text layer whose
/// vocabulary is split into disjoint per-block word sets.
pub fn planted(cfg: &PlantedConfig, seed: u64) -> Result<Planted> {
    if cfg.n_blocks == 0 || cfg.n_docs < cfg.n_blocks {
        return Err(Error::InvalidArgument("need at least one document per block".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nd = cfg.n_docs;
    let doc_blocks: Vec<u32> = (0..nd).map(|i| (i * cfg.n_blocks / nd) as u32).collect();
    let text_blocks: Vec<u32> = match cfg.text {
        TextPlanting::Consistent => doc_blocks.clone(),
        TextPlanting::Conflicting => (0..nd).map(|i| (i % cfg.n_blocks) as u32).collect(),
    };

    let mut hyperlinks = Vec::new();
    for u in 0..nd {
        for v in 0..nd {
            if u == v {
                continue;
            }
            let p = if doc_blocks[u] == doc_blocks[v] { cfg.p_in } else { cfg.p_out };
            if rng.random_bool(p) {
                hyperlinks.push((u as u32, v as u32));
            }
        }
    }

    let mut text = Vec::new();
    if cfg.words_per_block > 0 && cfg.tokens_per_doc > 0 {
        let zipf = Zipf::new(cfg.words_per_block as f64, cfg.zipf_exponent).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for d in 0..nd {
            let base = text_blocks[d] as usize * cfg.words_per_block;
            for _ in 0..cfg.tokens_per_doc {
                let rank = zipf.sample(&mut rng) as usize - 1;
                text.push((d as u32, (base + rank) as u32, 1));
            }
        }
    }
    let n_words = cfg.n_blocks * cfg.words_per_block;
    let network = assemble(nd, n_words, 0, hyperlinks, text, Vec::new())?;
    Ok(Planted {
        network,
        doc_blocks,
        text_blocks,
    })
}

/// Small random three-layer network: each ordered document pair linked with
/// probability `p_link`, each document drawing 1..=4 tokens and one tag.
pub fn random_multilayer(n_docs: usize, n_words: usize, n_tags: usize, p_link: f64, seed: u64) -> Result<MultilayerNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hyperlinks = Vec::new();
    for u in 0..n_docs as u32 {
        for v in 0..n_docs as u32 {
            if u != v && rng.random_bool(p_link) {
                hyperlinks.push((u, v));
            }
        }
    }
    let mut text = Vec::new();
    if n_words > 0 {
        for d in 0..n_docs as u32 {
            for _ in 0..rng.random_range(1..=4) {
                text.push((d, rng.random_range(0..n_words as u32), 1));
            }
        }
    }
    let mut metadata = Vec::new();
    if n_tags > 0 {
        for d in 0..n_docs as u32 {
            metadata.push((d, rng.random_range(0..n_tags as u32)));
        }
    }
    assemble(n_docs, n_words, n_tags, hyperlinks, text, metadata)
}

/// Documents of `tokens_per_doc` tokens drawn from one unbounded Zipf law
/// with exponent `1/beta`, so that vocabulary grows as `V ~ M^beta`. Each
/// document carries one tag out of `n_tags` and links to the next document.
pub fn zipf_corpus(n_docs: usize, tokens_per_doc: usize, beta: f64, n_tags: usize, seed: u64) -> Result<MultilayerNetwork> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("Heaps exponent {beta} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(1e9, 1.0 / beta).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut text = Vec::with_capacity(n_docs * tokens_per_doc);
    let mut ids = rustc_hash::FxHashMap::default();
    for d in 0..n_docs as u32 {
        for _ in 0..tokens_per_doc {
            let rank = zipf.sample(&mut rng) as u64;
            let next = ids.len() as u32;
            let w = *ids.entry(rank).or_insert(next);
            text.push((d, w, 1));
        }
    }
    let hyperlinks = (0..n_docs as u32).map(|d| (d, (d + 1) % n_docs as u32)).collect();
    let metadata = if n_tags > 0 {
        (0..n_docs as u32).map(|d| (d, rng.random_range(0..n_tags as u32))).collect()
    } else {
        Vec::new()
    };
    assemble(n_docs, ids.len(), n_tags, hyperlinks, text, metadata)
}

/// Build a network, dropping word types and tags that received no edges.
fn assemble(
    n_docs: usize,
    n_words: usize,
    n_tags: usize,
    hyperlinks: Vec<(u32, u32)>,
    mut text: Vec<(u32, u32, u32)>,
    mut metadata: Vec<(u32, u32)>,
) -> Result<MultilayerNetwork> {
    let words = compact(n_words, text.iter_mut().map(|e| &mut e.1), "w");
    let tags = compact(n_tags, metadata.iter_mut().map(|e| &mut e.1), "tag");
    let docs = (0..n_docs).map(|d| format!("d{d}")).collect();
    MultilayerNetwork::from_parts(docs, words, tags, hyperlinks, text, metadata)
}

fn compact<'a>(n: usize, ids: impl Iterator<Item = &'a mut u32>, prefix: &str) -> Vec<String> {
    let mut remap = vec![u32::MAX; n];
    let mut names = Vec::new();
    for id in ids {
        let slot = &mut remap[*id as usize];
        if *slot == u32::MAX {
            *slot = names.len() as u32;
            names.push(format!("{prefix}{id}"));
        }
        *id = *slot;
    }
    names
}
