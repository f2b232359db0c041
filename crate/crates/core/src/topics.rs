//! Word groups read as topics: top words, per-document-group mixture
//! proportions and their normalized over- or under-representation.

use serde::{Deserialize, Serialize};

use crate::corpus::MultilayerNetwork;
use crate::error::{Error, Result};
use crate::graph::{NodeType, Partition};

/// Mixture proportions derived from a `B_D × T` token count matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixture {
    /// `counts[i][t]`: tokens of topic `t` in documents of group `i`.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts.
    pub f: Vec<Vec<f64>>,
    /// Share of topic `t` among all tokens.
    pub mean_f: Vec<f64>,
    /// `(f - <f>) / <f>`.
    pub tau: Vec<Vec<f64>>,
}

impl TopicMixture {
    /// A document group without tokens gets `f = <f>`, hence `τ = 0`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let t = counts.first().map_or(0, Vec::len);
        if t == 0 || counts.iter().any(|r| r.len() != t) {
            return Err(Error::InvalidArgument("count matrix must be rectangular and non-empty".into()));
        }
        let total: u64 = counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::MissingTextLayer);
        }
        let mean_f: Vec<f64> = (0..t)
            .map(|k| counts.iter().map(|r| r[k]).sum::<u64>() as f64 / total as f64)
            .collect();
        let f: Vec<Vec<f64>> = counts
            .iter()
            .map(|r| {
                let n: u64 = r.iter().sum();
                if n == 0 {
                    mean_f.clone()
                } else {
                    r.iter().map(|&c| c as f64 / n as f64).collect()
                }
            })
            .collect();
        let tau = f
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&mean_f)
                    .map(|(x, m)| if *m > 0.0 { (x - m) / m } else { 0.0 })
                    .collect()
            })
            .collect();
        Ok(Self { counts, f, mean_f, tau })
    }

    pub fn n_doc_groups(&self) -> usize {
        self.counts.len()
    }

    pub fn n_topics(&self) -> usize {
        self.mean_f.len()
    }

    /// Topics holding at least `min_share` of every document group's tokens.
    pub fn uniform_topics(&self, min_share: f64) -> Vec<usize> {
        (0..self.n_topics()).filter(|&t| self.f.iter().all(|r| r[t] >= min_share)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topic {
    pub id: usize,
    pub n_words: usize,
    pub n_tokens: u64,
    /// `(word, tokens)` by decreasing count, ties alphabetical.
    pub top_words: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topics: Vec<Topic>,
    pub doc_group_sizes: Vec<usize>,
    pub mixture: TopicMixture,
    pub flags: Vec<Vec<Representation>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Over,
    Under,
    Neutral,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Over => "over",
            Self::Under => "under",
            Self::Neutral => "neutral",
        }
    }
}

pub const DEFAULT_THRESHOLD: f64 = 0.2;

pub fn flag_representation(tau: &[Vec<f64>], threshold: f64) -> Vec<Vec<Representation>> {
    tau.iter()
        .map(|r| {
            r.iter()
                .map(|&x| {
                    if x >= threshold {
                        Representation::Over
                    } else if x <= -threshold {
                        Representation::Under
                    } else {
                        Representation::Neutral
                    }
                })
                .collect()
        })
        .collect()
}

/// Topic report for a partition covering at least the documents and words
/// of `network`; tag labels, if present, are ignored.
pub fn topic_report(network: &MultilayerNetwork, partition: &Partition, top_n: usize) -> Result<TopicReport> {
    let docs = partition.project(NodeType::Doc);
    let words = partition.project(NodeType::Word);
    topic_report_from_labels(network, docs.labels(), words.labels(), top_n)
}

/// Topic report from separate document and word labelings, e.g. a
/// document consensus combined with the word groups of one fit.
pub fn topic_report_from_labels(network: &MultilayerNetwork, doc_labels: &[u32], word_labels: &[u32], top_n: usize) -> Result<TopicReport> {
    if network.text.is_empty() || network.n_words() == 0 {
        return Err(Error::MissingTextLayer);
    }
    if doc_labels.len() != network.n_docs() {
        return Err(Error::NodeSetMismatch(doc_labels.len(), network.n_docs()));
    }
    if word_labels.len() != network.n_words() {
        return Err(Error::NodeSetMismatch(word_labels.len(), network.n_words()));
    }
    let docs = Partition::of_type(doc_labels.to_vec(), NodeType::Doc).compacted();
    let words = Partition::of_type(word_labels.to_vec(), NodeType::Word).compacted();
    let (bd, t) = (docs.n_groups(), words.n_groups());

    let mut counts = vec![vec![0u64; t]; bd];
    let mut word_tokens = vec![0u64; network.n_words()];
    for &(d, w, m) in &network.text {
        counts[docs.labels()[d as usize] as usize][words.labels()[w as usize] as usize] += m as u64;
        word_tokens[w as usize] += m as u64;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); t];
    for (w, &l) in words.labels().iter().enumerate() {
        members[l as usize].push(w);
    }
    let topics = members
        .into_iter()
        .enumerate()
        .map(|(id, mut ws)| {
            ws.sort_by(|&a, &b| {
                word_tokens[b]
                    .cmp(&word_tokens[a])
                    .then_with(|| network.words[a].cmp(&network.words[b]))
            });
            Topic {
                id,
                n_words: ws.len(),
                n_tokens: ws.iter().map(|&w| word_tokens[w]).sum(),
                top_words: ws.iter().take(top_n).map(|&w| (network.words[w].clone(), word_tokens[w])).collect(),
            }
        })
        .collect();

    let mut doc_group_sizes = vec![0usize; bd];
    for &l in docs.labels() {
        doc_group_sizes[l as usize] += 1;
    }
    let mixture = TopicMixture::from_counts(counts)?;
    let flags = flag_representation(&mixture.tau, DEFAULT_THRESHOLD);
    Ok(TopicReport {
        topics,
        doc_group_sizes,
        mixture,
        flags,
    })
}
