//! Layer density diagnostics: how average degrees grow with the number of
//! documents, the type-token (Heaps) exponent, and how strongly the text
//! layer pulls document partitions away from the hyperlink-only ones.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{consensus, max_overlap};
use crate::corpus::{subsample_tokens, MultilayerNetwork};
use crate::error::{Error, Result};
use crate::graph::{NodeType, Partition};
use crate::inference::{derive_seed, fit_mdl, mean_std, McmcConfig};
use crate::likelihood::{LayerSet, TagMode};

/// Degree series, in output order.
pub const SERIES: [&str; 5] = ["doc-H", "doc-T", "word-T", "doc-M", "tag-M"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares line through `(ln x, ln y)`; points with a non-positive
/// coordinate are skipped.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return Err(Error::InvalidArgument("power-law fit needs two positive points".into()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("power-law fit needs two distinct x values".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: (my - slope * mx).exp(),
        r_squared,
        n_points: pts.len(),
    })
}

/// Node and edge counts of one document sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSizes {
    pub n_docs: usize,
    pub n_words: usize,
    pub n_tags: usize,
    pub hyperlinks: usize,
    pub tokens: u64,
    pub tag_edges: usize,
}

impl LayerSizes {
    pub fn of(net: &MultilayerNetwork) -> Self {
        Self {
            n_docs: net.n_docs(),
            n_words: net.n_words(),
            n_tags: net.n_tags(),
            hyperlinks: net.hyperlinks.len(),
            tokens: net.token_count(),
            tag_edges: net.metadata.len(),
        }
    }

    /// Edges over nodes for each entry of [`SERIES`]; empty node sets give 0.
    pub fn average_degrees(&self) -> [f64; 5] {
        let ratio = |e: f64, n: usize| if n == 0 { 0.0 } else { e / n as f64 };
        [
            ratio(self.hyperlinks as f64, self.n_docs),
            ratio(self.tokens as f64, self.n_docs),
            ratio(self.tokens as f64, self.n_words),
            ratio(self.tag_edges as f64, self.n_docs),
            ratio(self.tag_edges as f64, self.n_tags),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n_docs: usize,
    /// Series name to `(mean, std)` over repeats.
    pub degrees: BTreeMap<String, (f64, f64)>,
    pub samples: Vec<LayerSizes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// Smallest sample size used in the exponent fits.
    pub fit_min_docs: usize,
    /// `<k_V> ~ n_D^γ`.
    pub gamma: PowerLawFit,
    /// `V ~ M^β`.
    pub beta: PowerLawFit,
    pub gamma_pred: f64,
    /// Names of exponents outside `(0, 1)`.
    pub out_of_range: Vec<String>,
}

/// Average degrees of every node class over `repeats` uniform document
/// samples per size, with exponents fitted on sizes `>= fit_min_docs`.
pub fn degree_scaling(
    network: &MultilayerNetwork,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    fit_min_docs: usize,
) -> Result<ScalingReport> {
    let nd = network.n_docs();
    if let Some(&s) = sizes.iter().find(|&&s| s > nd) {
        return Err(Error::SampleTooLarge {
            requested: s,
            available: nd,
        });
    }
    if sizes.is_empty() || repeats == 0 || sizes.contains(&0) {
        return Err(Error::InvalidArgument("need positive sample sizes and repeats".into()));
    }
    let mut sizes = sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();

    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..repeats).map(move |r| (s, r))).collect();
    let samples: Vec<LayerSizes> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(s, _))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let mut keep: Vec<u32> = rand::seq::index::sample(&mut rng, nd, s).into_iter().map(|d| d as u32).collect();
            keep.sort_unstable();
            LayerSizes::of(&network.restrict_docs(&keep))
        })
        .collect();

    let points: Vec<ScalingPoint> = sizes
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let group = samples[k * repeats..(k + 1) * repeats].to_vec();
            let per: Vec<[f64; 5]> = group.iter().map(LayerSizes::average_degrees).collect();
            let degrees = SERIES
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let xs: Vec<f64> = per.iter().map(|d| d[j]).collect();
                    (name.to_string(), mean_std(&xs))
                })
                .collect();
            ScalingPoint {
                n_docs: s,
                degrees,
                samples: group,
            }
        })
        .collect();

    let fit_points: Vec<&ScalingPoint> = points.iter().filter(|p| p.n_docs >= fit_min_docs).collect();
    let gamma = fit_power_law(
        &fit_points.iter().map(|p| p.n_docs as f64).collect::<Vec<_>>(),
        &fit_points.iter().map(|p| p.degrees["word-T"].0).collect::<Vec<_>>(),
    )?;
    let mv: Vec<&LayerSizes> = fit_points.iter().flat_map(|p| &p.samples).collect();
    let beta = fit_power_law(
        &mv.iter().map(|s| s.tokens as f64).collect::<Vec<_>>(),
        &mv.iter().map(|s| s.n_words as f64).collect::<Vec<_>>(),
    )?;
    let mut out_of_range = Vec::new();
    for (name, fit) in [("gamma", gamma), ("beta", beta)] {
        if !(fit.exponent > 0.0 && fit.exponent < 1.0) {
            out_of_range.push(name.to_string());
        }
    }
    Ok(ScalingReport {
        points,
        fit_min_docs,
        gamma,
        beta,
        gamma_pred: 1.0 - beta.exponent,
        out_of_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuSweepConfig {
    pub mu_values: Vec<f64>,
    /// Token subsamples per μ.
    pub repeats: usize,
    /// Independent fits combined into each consensus.
    pub fits: usize,
    pub seed: u64,
    pub tag_mode: TagMode,
    pub mcmc: McmcConfig,
}

impl Default for MuSweepConfig {
    fn default() -> Self {
        Self {
            mu_values: (0..=10).map(|i| i as f64 / 10.0).collect(),
            repeats: 3,
            fits: 5,
            seed: 0,
            tag_mode: TagMode::Fixed,
            mcmc: McmcConfig {
                n_chains: 1,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPoint {
    pub mu: f64,
    pub overlaps: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuSweepReport {
    pub points: Vec<MuPoint>,
    /// Document groups of the hyperlink-only consensus.
    pub reference_groups: usize,
}

fn doc_consensus(network: &MultilayerNetwork, layers: LayerSet, config: &MuSweepConfig, stream: u64) -> Result<Partition> {
    let fits: Vec<Partition> = (0..config.fits)
        .into_par_iter()
        .map(|f| {
            let mcmc = McmcConfig {
                seed: derive_seed(config.seed, (stream << 16) | f as u64),
                ..config.mcmc.clone()
            };
            Ok(fit_mdl(network, layers, config.tag_mode, &mcmc)?.partition.project(NodeType::Doc))
        })
        .collect::<Result<_>>()?;
    if fits.len() == 1 {
        return Ok(fits.into_iter().next().expect("one fit"));
    }
    Ok(consensus(&fits)?.partition)
}

/// Normalized overlap between the document consensus of H+T fits on
/// token-subsampled text and the hyperlink-only consensus, per μ.
pub fn mu_sweep(network: &MultilayerNetwork, config: &MuSweepConfig) -> Result<MuSweepReport> {
    if config.mu_values.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::InvalidArgument("mu values must lie in [0, 1]".into()));
    }
    if config.repeats == 0 || config.fits == 0 {
        return Err(Error::InvalidArgument("repeats and fits must be positive".into()));
    }
    config.mcmc.validate()?;
    let reference = doc_consensus(network, LayerSet::H, config, 0)?;

    let jobs: Vec<(usize, usize)> = (0..config.mu_values.len())
        .flat_map(|m| (0..config.repeats).map(move |r| (m, r)))
        .collect();
    let overlaps: Vec<f64> = jobs
        .par_iter()
        .map(|&(m, r)| {
            let stream = 1 + (m * config.repeats + r) as u64;
            let sub = subsample_tokens(network, config.mu_values[m], derive_seed(config.seed, stream << 32))?;
            let part = doc_consensus(&sub, LayerSet::HT, config, stream)?;
            Ok(max_overlap(&reference, &part)?.normalized_overlap)
        })
        .collect::<Result<_>>()?;

    let points = config
        .mu_values
        .iter()
        .enumerate()
        .map(|(m, &mu)| {
            let xs = overlaps[m * config.repeats..(m + 1) * config.repeats].to_vec();
            let (mean, std) = mean_std(&xs);
            MuPoint {
                mu,
                overlaps: xs,
                mean,
                std,
            }
        })
        .collect();
    Ok(MuSweepReport {
        points,
        reference_groups: reference.n_groups(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::synth::{planted, zipf_corpus, PlantedConfig, TextPlanting};

    #[test]
    fn exact_power_law_is_recovered() {
        let xs: Vec<f64> = (1..20).map(|i| i as f64 * 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x.powf(0.44)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.exponent - 0.44).abs() < 1e-6);
        assert!((fit.prefactor - 2.5).abs() < 1e-6);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert!(fit_power_law(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn one_tag_per_document_scales_linearly() {
        let net = zipf_corpus(200, 30, 0.6, 1, 3).unwrap();
        let r = degree_scaling(&net, &[10, 20, 50, 100, 200], 3, 1, 10).unwrap();
        for p in &r.points {
            assert_eq!(p.degrees["doc-M"], (1.0, 0.0));
            assert_eq!(p.degrees["tag-M"].0, p.n_docs as f64);
            assert!(p.degrees["doc-H"].1 >= 0.0);
        }
    }

    #[test]
    fn word_degree_times_vocabulary_is_token_count() {
        let net = zipf_corpus(120, 40, 0.5, 4, 8).unwrap();
        let r = degree_scaling(&net, &[10, 40, 120], 4, 2, 10).unwrap();
        for p in &r.points {
            for s in &p.samples {
                let k_v = s.average_degrees()[2];
                assert!((k_v * s.n_words as f64 - s.tokens as f64).abs() < 1e-6 * s.tokens as f64);
            }
        }
    }

    #[test]
    fn heaps_exponent_of_zipf_corpus() {
        for beta in [0.5, 0.6] {
            let net = zipf_corpus(2000, 100, beta, 0, 11).unwrap();
            let r = degree_scaling(&net, &[100, 200, 400, 800, 1600, 2000], 3, 5, 100).unwrap();
            assert!((r.beta.exponent - beta).abs() < 0.05, "β* {beta}: fitted {}", r.beta.exponent);
            assert!(
                (r.gamma.exponent - r.gamma_pred).abs() < 0.05,
                "{} vs {}",
                r.gamma.exponent,
                r.gamma_pred
            );
            assert!(r.out_of_range.is_empty());
        }
    }

    #[test]
    fn oversized_sample_is_rejected() {
        let net = zipf_corpus(10, 5, 0.5, 0, 1).unwrap();
        assert!(matches!(
            degree_scaling(&net, &[5, 11], 2, 0, 1),
            Err(Error::SampleTooLarge {
                requested: 11,
                available: 10
            })
        ));
    }

    fn sweep_config(mu_values: Vec<f64>) -> MuSweepConfig {
        MuSweepConfig {
            mu_values,
            repeats: 2,
            fits: 3,
            seed: 4,
            tag_mode: TagMode::Fixed,
            mcmc: McmcConfig {
                n_chains: 1,
                n_sweeps: 30,
                ..Default::default()
            },
        }
    }

    #[test]
    fn conflicting_text_pulls_partition_away() {
        let cfg = PlantedConfig {
            text: TextPlanting::Conflicting,
            tokens_per_doc: 150,
            ..Default::default()
        };
        let p = planted(&cfg, 6).unwrap();
        let r = mu_sweep(&p.network, &sweep_config(vec![0.0, 1.0])).unwrap();
        let (lo, hi) = (r.points[0].mean, r.points[1].mean);
        assert!(lo > 0.95, "{lo}");
        assert!(hi < lo - 0.2, "{hi} vs {lo}");
    }

    #[test]
    fn sweep_rejects_bad_mu() {
        let p = planted(&PlantedConfig::default(), 1).unwrap();
        assert!(mu_sweep(&p.network, &sweep_config(vec![1.5])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn power_law_exponent_recovered(a in 0.05f64..3.0, c in 0.1f64..10.0) {
            let xs: Vec<f64> = (1..30).map(|i| (i * i) as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(a)).collect();
            let fit = fit_power_law(&xs, &ys).unwrap();
            prop_assert!((fit.exponent - a).abs() < 1e-6);
        }
    }
}
