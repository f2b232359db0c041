//! Missing-link prediction on the hyperlink layer and AUC-based model
//! comparison.
//!
//! A candidate edge's predictive weight is the posterior average of
//! `P(A ∪ δA | b) / P(A | b)`; the weights of a candidate set, normalized
//! to sum to one, are its λ scores.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::MultilayerNetwork;
use crate::error::{Error, Result};
use crate::graph::{BlockState, ModelGraph, Partition};
use crate::inference::{derive_seed, mean_std, sample_model, McmcConfig};
use crate::likelihood::{dl_delta_add_edge, LayerSet, TagMode};
use crate::special::log_sum_exp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkPredConfig {
    /// Fraction of hyperlinks removed per repeat.
    pub holdout: f64,
    pub repeats: usize,
    pub seed: u64,
    pub tag_mode: TagMode,
    /// Posterior sampling used to score each repeat.
    pub mcmc: McmcConfig,
}

impl Default for LinkPredConfig {
    fn default() -> Self {
        Self {
            holdout: 0.1,
            repeats: 20,
            seed: 0,
            tag_mode: TagMode::Fixed,
            mcmc: McmcConfig {
                n_chains: 2,
                burn_in: 50,
                n_sweeps: 100,
                thin: 10,
                ..Default::default()
            },
        }
    }
}

/// Observed network with a set of removed hyperlinks and sampled non-links.
#[derive(Debug, Clone)]
pub struct EdgeHoldout {
    pub observed: MultilayerNetwork,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
    pub fraction: f64,
    pub seed: u64,
}

/// Remove `round(fraction * E)` random hyperlinks and draw as many ordered
/// document pairs that are not linked in the full network.
pub fn make_holdout(network: &MultilayerNetwork, fraction: f64, seed: u64) -> Result<EdgeHoldout> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("holdout fraction {fraction} outside [0, 1)")));
    }
    let e = network.hyperlinks.len();
    let k = ((fraction * e as f64) + 0.5).floor() as usize;
    if k == 0 || k >= e {
        return Err(Error::EmptyHoldout);
    }
    let nd = network.n_docs() as u64;
    let absent = nd * (nd - 1) - e as u64;
    if (absent as usize) < k {
        return Err(Error::InvalidArgument("too few absent document pairs for negatives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, e, k).into_vec();
    picked.sort_unstable();
    let positives: Vec<(u32, u32)> = picked.iter().map(|&i| network.hyperlinks[i]).collect();

    let mut seen = FxHashSet::default();
    let mut negatives = Vec::with_capacity(k);
    while negatives.len() < k {
        let u = rng.random_range(0..nd as u32);
        let v = rng.random_range(0..nd as u32);
        if u == v || network.has_hyperlink(u, v) || !seen.insert((u, v)) {
            continue;
        }
        negatives.push((u, v));
    }

    let mut observed = network.clone();
    let removed: FxHashSet<(u32, u32)> = positives.iter().copied().collect();
    observed.hyperlinks.retain(|e| !removed.contains(e));
    debug_assert!(positives.iter().all(|&(u, v)| !observed.has_hyperlink(u, v)));
    Ok(EdgeHoldout {
        observed,
        positives,
        negatives,
        fraction,
        seed,
    })
}

/// Per-candidate scores from a set of posterior partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    /// `ln` of the posterior-averaged likelihood ratio.
    pub log_weight: Vec<f64>,
    /// Normalized weights; they sum to one.
    pub lambda: Vec<f64>,
}

/// Score candidate hyperlinks against partitions sampled on `graph`, whose
/// first layer must be the hyperlink layer.
pub fn score_with_samples(graph: &Arc<ModelGraph>, samples: &[Partition], candidates: &[(u32, u32)]) -> Result<CandidateScores> {
    if graph.layers().first().is_none_or(|l| l.name != "H") {
        return Err(Error::InvalidArgument("link prediction needs the hyperlink layer".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no posterior samples".into()));
    }
    let h = &graph.layers()[0];
    for &(u, v) in candidates {
        if u == v {
            return Err(Error::InvalidArgument(format!("self-loop candidate {u}")));
        }
        if h.out_adj[u as usize].iter().any(|e| e.0 == v) {
            return Err(Error::CandidateAlreadyPresent(u as usize, v as usize));
        }
    }
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|p| {
            let state = BlockState::from_partition(Arc::clone(graph), p)?;
            Ok(candidates
                .iter()
                .map(|&(u, v)| -dl_delta_add_edge(&state, 0, u as usize, v as usize))
                .collect())
        })
        .collect::<Result<_>>()?;
    let ln_s = (samples.len() as f64).ln();
    let log_weight: Vec<f64> = (0..candidates.len())
        .map(|c| {
            let xs: Vec<f64> = per_sample.iter().map(|s| s[c]).collect();
            log_sum_exp(&xs) - ln_s
        })
        .collect();
    let z = log_sum_exp(&log_weight);
    let lambda = log_weight.iter().map(|w| (w - z).exp()).collect();
    Ok(CandidateScores { log_weight, lambda })
}

/// Sample the posterior on the observed network and score `candidates`.
pub fn score_candidate_edges(
    observed: &MultilayerNetwork,
    layers: LayerSet,
    tag_mode: TagMode,
    candidates: &[(u32, u32)],
    mcmc: &McmcConfig,
) -> Result<CandidateScores> {
    if !layers.hyperlink {
        return Err(Error::InvalidArgument("link prediction needs the hyperlink layer".into()));
    }
    let graph = Arc::new(ModelGraph::from_network(observed, layers, tag_mode));
    let samples: Vec<Partition> = sample_model(Arc::clone(&graph), mcmc)?.into_iter().map(|s| s.partition).collect();
    score_with_samples(&graph, &samples, candidates)
}

/// Probability that a random positive outranks a random negative, ties ½.
pub fn auc(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        rank_sum += avg_rank * all[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    (rank_sum - np * (np + 1.0) / 2.0) / (np * nn)
}

/// ROC points `(false positive rate, true positive rate)` from the highest
/// threshold down, tied scores stepping together.
pub fn roc_curve(positives: &[f64], negatives: &[f64]) -> Vec<(f64, f64)> {
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            j += 1;
        }
        points.push((fp / nn, tp / np));
        i = j;
    }
    points
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    /// Against the alternative that the mean difference is positive.
    pub p_one_sided: f64,
    pub mean_diff: f64,
    /// Zero spread: `t` is ±∞ by the sign of the mean (0 for a zero mean).
    pub degenerate: bool,
}

fn t_result(mean: f64, se: f64, df: f64) -> TTest {
    if se == 0.0 || !se.is_finite() {
        let (t, p2, p1) = if mean > 0.0 {
            (f64::INFINITY, 0.0, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 0.0, 1.0)
        } else {
            (0.0, 1.0, 1.0)
        };
        return TTest {
            t,
            df,
            p_two_sided: p2,
            p_one_sided: p1,
            mean_diff: mean,
            degenerate: true,
        };
    }
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    TTest {
        t,
        df,
        p_two_sided: (2.0 * dist.sf(t.abs())).min(1.0),
        p_one_sided: dist.sf(t),
        mean_diff: mean,
        degenerate: false,
    }
}

/// Paired test on `ΔAUC = a - b`: `t = <Δ> / (σ_Δ / √n)` with `n - 1` degrees
/// of freedom.
pub fn delta_auc_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("paired AUC lists differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired AUCs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&d);
    let n = d.len() as f64;
    Ok(t_result(mean, sd / n.sqrt(), n - 1.0))
}

/// Welch's unequal-variance two-sample test of `mean(a) - mean(b)`.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("need at least two AUCs per model".into()));
    }
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sa * sa / na, sb * sb / nb);
    let se = (va + vb).sqrt();
    let df = if se > 0.0 {
        (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0))
    } else {
        na + nb - 2.0
    };
    Ok(t_result(ma - mb, se, df))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAuc {
    pub model: String,
    pub aucs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// ROC points of the first repeat.
    pub roc: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model: String,
    pub baseline: String,
    pub paired: TTest,
    pub welch: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionReport {
    pub holdout: f64,
    pub repeats: usize,
    pub seed: u64,
    pub models: Vec<ModelAuc>,
    /// Every model after the first against the first.
    pub comparisons: Vec<Comparison>,
}

type AucWithRoc = (f64, Vec<(f64, f64)>);

/// Hold out hyperlinks `repeats` times and score every model on the same
/// holdouts, so AUCs are paired across models.
pub fn evaluate_auc(network: &MultilayerNetwork, models: &[LayerSet], config: &LinkPredConfig) -> Result<LinkPredictionReport> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }
    if let Some(m) = models.iter().find(|m| !m.hyperlink) {
        return Err(Error::InvalidArgument(format!("model {m} lacks the hyperlink layer")));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    config.mcmc.validate()?;
    let per_repeat: Vec<Vec<AucWithRoc>> = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let holdout = make_holdout(network, config.holdout, derive_seed(config.seed, r as u64))?;
            let candidates: Vec<(u32, u32)> = holdout.positives.iter().chain(&holdout.negatives).copied().collect();
            let np = holdout.positives.len();
            models
                .iter()
                .enumerate()
                .map(|(mi, &layers)| {
                    let mcmc = McmcConfig {
                        seed: derive_seed(config.seed, ((r as u64) << 8) | (mi as u64 + 1)),
                        ..config.mcmc.clone()
                    };
                    let scores = score_candidate_edges(&holdout.observed, layers, config.tag_mode, &candidates, &mcmc)?;
                    let (pos, neg) = scores.log_weight.split_at(np);
                    Ok((auc(pos, neg), if r == 0 { roc_curve(pos, neg) } else { Vec::new() }))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let model_aucs: Vec<ModelAuc> = models
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let aucs: Vec<f64> = per_repeat.iter().map(|r| r[mi].0).collect();
            let (mean, std) = mean_std(&aucs);
            ModelAuc {
                model: m.name(),
                aucs,
                mean,
                std,
                roc: per_repeat[0][mi].1.clone(),
            }
        })
        .collect();
    let mut comparisons = Vec::new();
    if config.repeats >= 2 {
        for m in &model_aucs[1..] {
            comparisons.push(Comparison {
                model: m.model.clone(),
                baseline: model_aucs[0].model.clone(),
                paired: delta_auc_ttest(&m.aucs, &model_aucs[0].aucs)?,
                welch: welch_ttest(&m.aucs, &model_aucs[0].aucs)?,
            });
        }
    }
    Ok(LinkPredictionReport {
        holdout: config.holdout,
        repeats: config.repeats,
        seed: config.seed,
        models: model_aucs,
        comparisons,
    })
}
