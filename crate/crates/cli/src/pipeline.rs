//! `run`: every stage from one TOML file, with a manifest of seeds and
//! input/output hashes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use mlsbm::corpus::{FilterConfig, TokenizeConfig};
use mlsbm::inference::{fit_mdl, McmcConfig};
use mlsbm::linkpred::{evaluate_auc, LinkPredConfig};
use mlsbm::scaling::{degree_scaling, mu_sweep, MuSweepConfig};
use mlsbm::topics::{topic_report_from_labels, DEFAULT_THRESHOLD};
use mlsbm::{FitResult, LayerSet, MultilayerNetwork, NodeType, Partition, TagMode};

use crate::io;
use crate::stages::{self, stage_seed};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON-lines corpus; ingested into `network.json`.
    pub corpus: Option<PathBuf>,
    /// Prebuilt network file, instead of `corpus`.
    pub network: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    #[serde(default)]
    pub tokenize: TokenizeConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub fit: Option<FitStage>,
    pub consensus: Option<ConsensusStage>,
    pub compare: Option<CompareStage>,
    pub topics: Option<TopicsStage>,
    pub linkpred: Option<LinkPredStage>,
    pub scaling: Option<ScalingStage>,
    pub sweep_mu: Option<MuSweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitStage {
    pub models: Vec<String>,
    #[serde(default)]
    pub tag_mode: TagMode,
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Also write every chain's final partition.
    #[serde(default = "yes")]
    pub write_chains: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusStage {
    /// Node type to align, `doc` unless set.
    pub node_type: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareStage {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicsStage {
    pub model: String,
    #[serde(default = "twenty")]
    pub top_words: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Group documents by the chain consensus rather than the MDL fit.
    #[serde(default = "yes")]
    pub use_consensus: bool,
}

fn twenty() -> usize {
    20
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkPredStage {
    pub models: Vec<String>,
    #[serde(default = "default_holdout")]
    pub holdout: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub tag_mode: TagMode,
    #[serde(default = "default_linkpred_mcmc")]
    pub mcmc: McmcConfig,
}

fn default_holdout() -> f64 {
    LinkPredConfig::default().holdout
}

fn default_repeats() -> usize {
    LinkPredConfig::default().repeats
}

fn default_linkpred_mcmc() -> McmcConfig {
    LinkPredConfig::default().mcmc
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingStage {
    pub sizes: Vec<usize>,
    #[serde(default = "ten")]
    pub repeats: usize,
    #[serde(default)]
    pub fit_min_docs: usize,
}

fn ten() -> usize {
    10
}

fn parse_models(names: &[String]) -> Result<Vec<LayerSet>> {
    ensure!(!names.is_empty(), "empty model list");
    names
        .iter()
        .map(|n| n.parse::<LayerSet>().with_context(|| format!("model {n:?}")))
        .collect()
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.corpus = cfg.corpus.map(|p| resolve(base, &p));
        cfg.network = cfg.network.map(|p| resolve(base, &p));
        cfg.out_dir = resolve(base, &cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Everything checkable without touching the data.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.corpus.is_some() != self.network.is_some(),
            "exactly one of `corpus` and `network` must be set"
        );
        let in_section_seed = "per-stage seeds derive from the global `seed`; remove `seed` from";
        let fit_models = match &self.fit {
            Some(f) => {
                f.mcmc.validate()?;
                ensure!(f.mcmc.seed == 0, "{in_section_seed} [fit.mcmc]");
                parse_models(&f.models)?
            }
            None => Vec::new(),
        };
        if let Some(c) = &self.consensus {
            ensure!(self.fit.is_some(), "[consensus] needs [fit]");
            if let Some(t) = &c.node_type {
                ensure!(NodeType::parse(t).is_some(), "unknown node type {t:?}");
            }
        }
        if self.compare.is_some() {
            ensure!(fit_models.len() >= 2, "[compare] needs at least two fitted models");
        }
        if let Some(t) = &self.topics {
            let m: LayerSet = t.model.parse()?;
            ensure!(m.text, "topic model {} has no text layer", m);
            ensure!(fit_models.contains(&m), "topic model {} is not listed under [fit]", m);
        }
        if let Some(l) = &self.linkpred {
            for m in parse_models(&l.models)? {
                ensure!(m.hyperlink, "link prediction model {m} lacks the hyperlink layer");
            }
            l.mcmc.validate()?;
            ensure!(l.mcmc.seed == 0, "{in_section_seed} [linkpred.mcmc]");
            ensure!(l.repeats >= 2, "[linkpred] repeats must be at least 2");
            ensure!(l.holdout > 0.0 && l.holdout < 1.0, "[linkpred] holdout must lie in (0, 1)");
        }
        if let Some(s) = &self.scaling {
            ensure!(!s.sizes.is_empty() && s.repeats > 0, "[scaling] needs sizes and repeats");
        }
        if let Some(s) = &self.sweep_mu {
            s.mcmc.validate()?;
            ensure!(s.seed == 0 && s.mcmc.seed == 0, "{in_section_seed} [sweep_mu]");
            ensure!(s.mu_values.iter().all(|m| (0.0..=1.0).contains(m)), "mu values must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Output {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    seed: u64,
    stage_seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<Output>,
}

struct Run<'a> {
    cfg: &'a RunConfig,
    outputs: Vec<PathBuf>,
    stage_seeds: BTreeMap<String, u64>,
}

impl Run<'_> {
    fn seed(&mut self, stage: &str) -> u64 {
        let s = stage_seed(self.cfg.seed, stage);
        self.stage_seeds.insert(stage.to_owned(), s);
        s
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let mut run = Run {
        cfg,
        outputs: Vec::new(),
        stage_seeds: BTreeMap::new(),
    };
    let mut inputs = BTreeMap::new();

    let net: MultilayerNetwork = if let Some(corpus) = &cfg.corpus {
        inputs.insert(corpus.display().to_string(), io::sha256_file(corpus)?);
        eprintln!("ingest: {}", corpus.display());
        let out = run.dir("network.json");
        let (net, summary) = stages::ingest(corpus, &cfg.tokenize, &cfg.filter, &out)?;
        let report = run.dir("ingest_report.json");
        io::write_json(&report, &summary)?;
        run.outputs.extend([out, report]);
        net
    } else {
        let path = cfg.network.as_ref().expect("validated");
        inputs.insert(path.display().to_string(), io::sha256_file(path)?);
        io::read_network(path)?
    };

    if let Some(s) = &cfg.scaling {
        let max = s.sizes.iter().max().copied().unwrap_or(0);
        ensure!(
            max <= net.docs.len(),
            "[scaling] size {max} exceeds the {} documents in the network",
            net.docs.len()
        );
    }

    let mut fits: Vec<(LayerSet, FitResult)> = Vec::new();
    if let Some(f) = &cfg.fit {
        for layers in parse_models(&f.models)? {
            eprintln!("fit: {layers}");
            let mcmc = McmcConfig {
                seed: run.seed(&format!("fit:{layers}")),
                ..f.mcmc.clone()
            };
            let fit = fit_mdl(&net, layers, f.tag_mode, &mcmc).with_context(|| format!("fitting {layers}"))?;
            let dir = run.dir("fit");
            run.outputs.extend(stages::write_fit(&dir, &net, layers, &fit, f.write_chains)?);
            fits.push((layers, fit));
        }
        let table = run.dir("fit/table.csv");
        stages::write_fit_table(&table, &fits)?;
        run.outputs.push(table);
    }

    let doc_runs = |fit: &FitResult| -> Vec<Partition> { fit.chain_partitions.iter().map(|p| p.project(NodeType::Doc)).collect() };
    let mut doc_consensus: BTreeMap<LayerSet, Partition> = BTreeMap::new();
    if let Some(c) = &cfg.consensus {
        let t = c
            .node_type
            .as_deref()
            .map_or(NodeType::Doc, |s| NodeType::parse(s).expect("validated"));
        for (layers, fit) in &fits {
            if !stages::active_types(*layers).contains(&t) {
                continue;
            }
            eprintln!("consensus: {layers}");
            let parts: Vec<Partition> = fit.chain_partitions.iter().map(|p| p.project(t)).collect();
            let result = stages::consensus_of(&parts).with_context(|| format!("consensus of {layers}"))?;
            let ids = match t {
                NodeType::Doc => &net.docs,
                NodeType::Word => &net.words,
                NodeType::Tag => &net.tags,
            };
            let json = run.dir(&format!("consensus/consensus_{layers}.json"));
            let csv = run.dir(&format!("consensus/consensus_{layers}.csv"));
            stages::write_consensus(&json, &csv, &layers.name(), t, ids, &result)?;
            run.outputs.extend([json, csv]);
            if t == NodeType::Doc {
                doc_consensus.insert(*layers, result.partition);
            }
        }
    }

    if cfg.compare.is_some() {
        eprintln!("compare");
        let classes: Vec<(String, Vec<Partition>)> = fits.iter().map(|(l, f)| (l.name(), doc_runs(f))).collect();
        let m = stages::compare(&classes)?;
        let path = run.dir("compare/overlap.csv");
        stages::write_overlap(&path, &m)?;
        run.outputs.push(path);
    }

    if let Some(t) = &cfg.topics {
        let layers: LayerSet = t.model.parse()?;
        eprintln!("topics: {layers}");
        let fit = &fits.iter().find(|(l, _)| *l == layers).expect("validated").1;
        let docs = match doc_consensus.get(&layers) {
            Some(p) if t.use_consensus => p.clone(),
            _ if t.use_consensus && fit.chain_partitions.len() >= 2 => stages::consensus_of(&doc_runs(fit))?.partition,
            _ => fit.partition.project(NodeType::Doc),
        };
        let words = fit.partition.project(NodeType::Word);
        let report = topic_report_from_labels(&net, docs.labels(), words.labels(), t.top_words)?;
        run.outputs
            .extend(stages::write_topics(&run.dir(&format!("topics_{layers}")), &report, t.threshold)?);
    }

    if let Some(l) = &cfg.linkpred {
        eprintln!("linkpred");
        let config = LinkPredConfig {
            holdout: l.holdout,
            repeats: l.repeats,
            seed: run.seed("linkpred"),
            tag_mode: l.tag_mode,
            mcmc: l.mcmc.clone(),
        };
        let report = evaluate_auc(&net, &parse_models(&l.models)?, &config)?;
        let (json, roc) = (run.dir("linkpred/report.json"), run.dir("linkpred/roc.csv"));
        stages::write_linkpred(&json, &roc, &report)?;
        run.outputs.extend([json, roc]);
    }

    if let Some(s) = &cfg.scaling {
        eprintln!("scaling");
        let seed = run.seed("scaling");
        let report = degree_scaling(&net, &s.sizes, s.repeats, seed, s.fit_min_docs)?;
        let (csv, json) = (run.dir("scaling/degrees.csv"), run.dir("scaling/report.json"));
        stages::write_scaling(&csv, &json, &report)?;
        run.outputs.extend([csv, json]);
    }

    if let Some(s) = &cfg.sweep_mu {
        eprintln!("sweep-mu");
        let config = MuSweepConfig {
            seed: run.seed("sweep-mu"),
            ..s.clone()
        };
        let report = mu_sweep(&net, &config)?;
        let (csv, json) = (run.dir("sweep_mu/overlap.csv"), run.dir("sweep_mu/report.json"));
        stages::write_sweep(&csv, &json, &report)?;
        run.outputs.extend([csv, json]);
    }

    if run.outputs.is_empty() {
        bail!("the config enables no stage");
    }
    let mut outputs = Vec::with_capacity(run.outputs.len());
    for p in &run.outputs {
        let rel = p.strip_prefix(&cfg.out_dir).unwrap_or(p);
        outputs.push(Output {
            path: rel.display().to_string(),
            sha256: io::sha256_file(p)?,
        });
    }
    let manifest = Manifest {
        tool: "mlsbm",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        seed: cfg.seed,
        stage_seeds: run.stage_seeds,
        inputs,
        outputs,
    };
    io::write_json(&cfg.out_dir.join("manifest.json"), &manifest)
}
