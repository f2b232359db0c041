//! Stage implementations shared by the subcommands and the pipeline. Each
//! writer returns the paths it produced.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use mlsbm::consensus::{consensus, overlap_matrix, ConsensusResult, OverlapMatrix};
use mlsbm::corpus::{build_network, BuildReport, FilterConfig, IngestReport, TokenizeConfig};
use mlsbm::inference::{derive_seed, sample_posterior, McmcConfig};
use mlsbm::linkpred::LinkPredictionReport;
use mlsbm::scaling::{MuSweepReport, ScalingReport, SERIES};
use mlsbm::topics::{flag_representation, TopicReport};
use mlsbm::{Corpus, FitResult, LayerSet, MultilayerNetwork, NodeType, Partition, TagMode};

use crate::io;

/// Seed for one stage, derived from the global seed and the stage name so
/// stages can be rerun on their own.
pub fn stage_seed(global: u64, stage: &str) -> u64 {
    let h = Sha256::digest(stage.as_bytes());
    derive_seed(global, u64::from_le_bytes(h[..8].try_into().expect("eight bytes")))
}

pub fn active_types(layers: LayerSet) -> Vec<NodeType> {
    let mut t = vec![NodeType::Doc];
    if layers.text {
        t.push(NodeType::Word);
    }
    if layers.metadata {
        t.push(NodeType::Tag);
    }
    t
}

#[derive(Serialize)]
pub struct IngestSummary {
    pub ingest: IngestReport,
    pub build: BuildReport,
}

pub fn ingest(corpus: &Path, tokenize: &TokenizeConfig, filters: &FilterConfig, out: &Path) -> Result<(MultilayerNetwork, IngestSummary)> {
    let corpus = Corpus::load(corpus, tokenize).with_context(|| format!("loading corpus {}", corpus.display()))?;
    let (net, build) = build_network(&corpus, filters)?;
    let mut w = io::create(out)?;
    net.write_json(&mut w, Some(&build))?;
    std::io::Write::flush(&mut w)?;
    Ok((
        net,
        IngestSummary {
            ingest: corpus.report.clone(),
            build,
        },
    ))
}

/// `fit_<model>.json`, `partition_<model>.csv` and one CSV per chain under
/// `chains_<model>/`.
pub fn write_fit(dir: &Path, net: &MultilayerNetwork, layers: LayerSet, fit: &FitResult, chains: bool) -> Result<Vec<PathBuf>> {
    let slug = layers.name();
    let types = active_types(layers);
    let json = dir.join(format!("fit_{slug}.json"));
    io::write_json(&json, fit)?;
    let csv = dir.join(format!("partition_{slug}.csv"));
    io::write_partition(&csv, net, &fit.partition, &types)?;
    let mut out = vec![json, csv];
    if chains {
        for (c, p) in fit.chain_partitions.iter().enumerate() {
            let path = dir.join(format!("chains_{slug}")).join(format!("chain_{c:03}.csv"));
            io::write_partition(&path, net, p, &types)?;
            out.push(path);
        }
    }
    Ok(out)
}

/// Thinned posterior samples in long form: one row per node per sample.
pub fn write_samples(path: &Path, net: &MultilayerNetwork, layers: LayerSet, tag_mode: TagMode, mcmc: &McmcConfig) -> Result<()> {
    let samples = sample_posterior(net, layers, tag_mode, mcmc)?;
    let types = active_types(layers);
    let mut w = io::csv_writer(path)?;
    w.write_record(["sample", "chain", "sweep", "dl", "node_id", "node_type", "group_label"])?;
    for (i, s) in samples.iter().enumerate() {
        for (v, (&label, &t)) in s.partition.labels().iter().zip(s.partition.types()).enumerate() {
            if types.contains(&t) {
                w.write_record([
                    i.to_string(),
                    s.chain_id.to_string(),
                    s.sweep_index.to_string(),
                    s.dl.to_string(),
                    net.node_name(v).to_owned(),
                    t.as_str().to_owned(),
                    label.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per model: MDL in nats and bits plus the chain spread.
pub fn write_fit_table(path: &Path, fits: &[(LayerSet, FitResult)]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["model", "mdl_nats", "mdl_bits", "dl_mean", "dl_std", "B_doc", "B_word", "B_tag"])?;
    for (layers, f) in fits {
        let b = |t: &str| f.groups.get(t).map_or(String::new(), |n| n.to_string());
        w.write_record([
            layers.name(),
            f.dl_total.to_string(),
            f.dl_bits().to_string(),
            f.dl_mean.to_string(),
            f.dl_std.to_string(),
            b("doc"),
            b("word"),
            b("tag"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ConsensusSummary<'a> {
    model: &'a str,
    node_type: &'a str,
    sigma: f64,
    n_partitions: usize,
    groups: usize,
    objective_trace: &'a [usize],
    agreement: &'a [f64],
}

pub fn consensus_of(parts: &[Partition]) -> Result<ConsensusResult> {
    if parts.len() < 2 {
        bail!("consensus needs at least two partitions, got {}", parts.len());
    }
    Ok(consensus(parts)?)
}

pub fn write_consensus(json: &Path, csv: &Path, model: &str, t: NodeType, ids: &[String], c: &ConsensusResult) -> Result<()> {
    io::write_labels(csv, ids, t, c.partition.labels())?;
    io::write_json(
        json,
        &ConsensusSummary {
            model,
            node_type: t.as_str(),
            sigma: c.sigma,
            n_partitions: c.n_partitions,
            groups: c.partition.n_groups(),
            objective_trace: &c.objective_trace,
            agreement: &c.agreement,
        },
    )
}

pub fn compare(runs: &[(String, Vec<Partition>)]) -> Result<OverlapMatrix> {
    Ok(overlap_matrix(runs)?)
}

pub fn write_overlap(path: &Path, m: &OverlapMatrix) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["class_a", "class_b", "mean", "std", "pairs"])?;
    for (i, a) in m.classes.iter().enumerate() {
        for (j, b) in m.classes.iter().enumerate() {
            let c = m.cells[i][j];
            w.write_record([a.clone(), b.clone(), c.mean.to_string(), c.std.to_string(), c.pairs.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `topics.csv`, `mixtures.csv`, `tau.csv`, `flags.csv` and `topics.json`.
pub fn write_topics(dir: &Path, report: &TopicReport, threshold: f64) -> Result<Vec<PathBuf>> {
    let topics = dir.join("topics.csv");
    let mut w = io::csv_writer(&topics)?;
    w.write_record(["topic", "rank", "word", "tokens"])?;
    for t in &report.topics {
        for (rank, (word, n)) in t.top_words.iter().enumerate() {
            w.write_record([t.id.to_string(), (rank + 1).to_string(), word.clone(), n.to_string()])?;
        }
    }
    w.flush()?;

    let m = &report.mixture;
    let matrix = |name: &str, cell: &dyn Fn(usize, usize) -> String| -> Result<PathBuf> {
        let path = dir.join(name);
        let mut w = io::csv_writer(&path)?;
        w.write_record(["doc_group", "topic", "value"])?;
        for i in 0..m.n_doc_groups() {
            for t in 0..m.n_topics() {
                w.write_record([i.to_string(), t.to_string(), cell(i, t)])?;
            }
        }
        w.flush()?;
        Ok(path)
    };
    let mixtures = matrix("mixtures.csv", &|i, t| m.f[i][t].to_string())?;
    let tau = matrix("tau.csv", &|i, t| m.tau[i][t].to_string())?;
    let flags = flag_representation(&m.tau, threshold);
    let flags_path = matrix("flags.csv", &|i, t| flags[i][t].as_str().to_owned())?;
    let json = dir.join("topics.json");
    io::write_json(&json, report)?;
    Ok(vec![topics, mixtures, tau, flags_path, json])
}

pub fn write_linkpred(json: &Path, roc: &Path, report: &LinkPredictionReport) -> Result<()> {
    io::write_json(json, report)?;
    let mut w = io::csv_writer(roc)?;
    w.write_record(["model", "fpr", "tpr"])?;
    for m in &report.models {
        for &(x, y) in &m.roc {
            w.write_record([m.model.clone(), x.to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling(csv: &Path, json: &Path, r: &ScalingReport) -> Result<()> {
    let mut w = io::csv_writer(csv)?;
    w.write_record(["n_D", "series", "mean", "std"])?;
    for p in &r.points {
        for s in SERIES {
            let (mean, std) = p.degrees[s];
            w.write_record([p.n_docs.to_string(), s.to_owned(), mean.to_string(), std.to_string()])?;
        }
    }
    w.flush()?;
    io::write_json(json, r)
}

pub fn write_sweep(csv: &Path, json: &Path, r: &MuSweepReport) -> Result<()> {
    let mut w = io::csv_writer(csv)?;
    w.write_record(["mu", "series", "mean", "std"])?;
    for p in &r.points {
        w.write_record([
            p.mu.to_string(),
            "overlap_HT_vs_H".to_owned(),
            p.mean.to_string(),
            p.std.to_string(),
        ])?;
    }
    w.flush()?;
    io::write_json(json, r)
}
