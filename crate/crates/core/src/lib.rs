//! Multilayer degree-corrected stochastic block models over documents,
//! words and tags.
//!
//! A corpus of linked, tagged documents becomes three layers over one node
//! index space: directed hyperlinks between documents (H), a bipartite
//! document-word multigraph of token counts (T), and a bipartite
//! document-tag graph (M). Partitions are fitted by minimizing the
//! description length or sampled from the posterior.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod special;

pub mod consensus;
pub mod corpus;
pub mod graph;
pub mod inference;
pub mod likelihood;
pub mod linkpred;
pub mod scaling;
pub mod synth;
pub mod topics;

pub use consensus::{consensus, max_overlap, ConsensusResult, OverlapResult};
pub use corpus::{Corpus, MultilayerNetwork};
pub use error::{Error, Result};
pub use graph::{BlockState, ModelGraph, NodeType, Partition};
pub use inference::{derive_seed, fit_mdl, sample_posterior, McmcConfig, PosteriorSample};
pub use likelihood::{FitResult, LayerSet, TagMode};
pub use linkpred::{evaluate_auc, LinkPredConfig, LinkPredictionReport};
pub use scaling::{degree_scaling, mu_sweep, ScalingReport};
pub use topics::{topic_report, TopicReport};
