//! `mlsbm`: fit multilayer block models to document corpora.

mod io;
mod pipeline;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use mlsbm::corpus::{FilterConfig, TokenizeConfig};
use mlsbm::inference::{fit_mdl, McmcConfig};
use mlsbm::linkpred::{evaluate_auc, LinkPredConfig};
use mlsbm::scaling::{degree_scaling, mu_sweep, MuSweepConfig};
use mlsbm::topics::{topic_report_from_labels, DEFAULT_THRESHOLD};
use mlsbm::{LayerSet, NodeType, TagMode};

use crate::io::{read_aligned, read_network, PartitionFile};
use crate::stages::stage_seed;

#[derive(Parser)]
#[command(name = "mlsbm", version, about = "Multilayer stochastic block models for hyperlinked documents")]
struct Cli {
    /// Global seed; each stage derives its own from this and its name.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a JSON-lines corpus and build the three-layer network.
    Ingest(IngestArgs),
    /// Minimum-description-length fit of one layer combination.
    Fit(FitArgs),
    /// Align partitions and take the plurality vote.
    Consensus(ConsensusArgs),
    /// Mean pairwise overlap within and between classes of partitions.
    Compare(CompareArgs),
    /// Topics and per-group topic mixtures from a fitted partition.
    Topics(TopicsArgs),
    /// Held-out hyperlink prediction AUC for one or more models.
    Linkpred(LinkpredArgs),
    /// Average degree of each layer against corpus size.
    Scaling(ScalingArgs),
    /// Agreement of text-informed and hyperlink-only partitions as tokens are removed.
    SweepMu(SweepMuArgs),
    /// Every stage enabled in a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write the ingest and filter counts here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    stem: bool,
    #[arg(long, default_value_t = 1)]
    min_len: usize,
    #[arg(long, default_value_t = 2)]
    min_outlinks: usize,
    /// Keep documents outside the largest weakly connected component.
    #[arg(long)]
    keep_all_components: bool,
}

#[derive(Args, Clone)]
struct McmcArgs {
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(long, default_value_t = 10)]
    chains: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            seed,
            n_sweeps: self.sweeps,
            n_chains: self.chains,
            burn_in: self.burn_in,
            thin: self.thin,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    network: PathBuf,
    /// Layers to include, e.g. `h`, `h,t` or `h,t,m`.
    #[arg(long)]
    layers: LayerSet,
    #[arg(long, default_value = "fixed")]
    tag_mode: TagMode,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Fit summary (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Best partition (CSV: node_id, node_type, group_label).
    #[arg(long)]
    partition: Option<PathBuf>,
    /// One partition CSV per chain.
    #[arg(long)]
    chains_dir: Option<PathBuf>,
    /// Thinned posterior samples after burn-in, long form.
    #[arg(long)]
    samples: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long, num_args = 2.., required = true)]
    partitions: Vec<PathBuf>,
    #[arg(long, default_value = "doc")]
    node_type: String,
    /// Summary (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Consensus labels (CSV).
    #[arg(long)]
    partition_out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// `NAME=a.csv,b.csv,...`; repeat for each class.
    #[arg(long = "class", required = true)]
    classes: Vec<String>,
    #[arg(long, default_value = "doc")]
    node_type: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    network: PathBuf,
    /// Partition with word groups (and doc groups unless `--doc-partition`).
    #[arg(long)]
    partition: PathBuf,
    /// Document grouping, e.g. a consensus, overriding the one in `--partition`.
    #[arg(long)]
    doc_partition: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    top: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LinkpredArgs {
    #[arg(long)]
    network: PathBuf,
    /// Model to score; repeat to compare, the first is the baseline.
    #[arg(long = "layers", required = true)]
    models: Vec<LayerSet>,
    #[arg(long, default_value_t = 0.1)]
    holdout: f64,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value = "fixed")]
    tag_mode: TagMode,
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(long, default_value_t = 2)]
    chains: usize,
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Report (JSON).
    #[arg(long)]
    out: PathBuf,
    /// ROC points (CSV).
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long)]
    network: PathBuf,
    /// Document sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Smallest sample size entering the power-law fits.
    #[arg(long, default_value_t = 0)]
    fit_min: usize,
    /// Degrees per size (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Fitted exponents (JSON).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepMuArgs {
    #[arg(long)]
    network: PathBuf,
    /// Token retention fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Independent fits per consensus.
    #[arg(long, default_value_t = 5)]
    fits: usize,
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(long, default_value = "fixed")]
    tag_mode: TagMode,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Validate the config and exit without running.
    #[arg(long)]
    check: bool,
}

fn node_type(s: &str) -> Result<NodeType> {
    NodeType::parse(s).with_context(|| format!("unknown node type {s:?}; expected doc, word or tag"))
}

fn sibling_json(p: &Path) -> PathBuf {
    p.with_extension("json")
}

fn ingest(a: IngestArgs) -> Result<()> {
    let tokenize = TokenizeConfig {
        stem: a.stem,
        min_len: a.min_len,
    };
    let filters = FilterConfig {
        min_outlinks: a.min_outlinks,
        largest_component: !a.keep_all_components,
        ..Default::default()
    };
    let (net, summary) = stages::ingest(&a.corpus, &tokenize, &filters, &a.out)?;
    eprintln!(
        "{} documents, {} words, {} tags, {} hyperlinks, {} tokens",
        net.docs.len(),
        net.words.len(),
        net.tags.len(),
        summary.build.hyperlinks,
        summary.build.tokens
    );
    if let Some(r) = &a.report {
        io::write_json(r, &summary)?;
    }
    Ok(())
}

fn fit(a: FitArgs, seed: u64) -> Result<()> {
    let net = read_network(&a.network)?;
    let mcmc = a.mcmc.config(stage_seed(seed, &format!("fit:{}", a.layers)));
    let fit = fit_mdl(&net, a.layers, a.tag_mode, &mcmc)?;
    eprintln!("{}: {:.3} nats, groups {:?}", a.layers, fit.dl_total, fit.groups);
    io::write_json(&a.out, &fit)?;
    let types = stages::active_types(a.layers);
    if let Some(p) = &a.partition {
        io::write_partition(p, &net, &fit.partition, &types)?;
    }
    if let Some(dir) = &a.chains_dir {
        for (c, p) in fit.chain_partitions.iter().enumerate() {
            io::write_partition(&dir.join(format!("chain_{c:03}.csv")), &net, p, &types)?;
        }
    }
    if let Some(p) = &a.samples {
        let mcmc = McmcConfig {
            seed: stage_seed(seed, &format!("samples:{}", a.layers)),
            ..mcmc
        };
        stages::write_samples(p, &net, a.layers, a.tag_mode, &mcmc)?;
    }
    Ok(())
}

fn consensus(a: ConsensusArgs) -> Result<()> {
    let t = node_type(&a.node_type)?;
    let (ids, parts) = read_aligned(&a.partitions, t)?;
    ensure!(!ids.is_empty(), "no {} nodes in {}", t.as_str(), a.partitions[0].display());
    let c = stages::consensus_of(&parts)?;
    eprintln!("{} groups, sigma {:.4}", c.partition.n_groups(), c.sigma);
    let csv = a.partition_out.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    stages::write_consensus(&a.out, &csv, "", t, &ids, &c)
}

fn compare(a: CompareArgs) -> Result<()> {
    let t = node_type(&a.node_type)?;
    let mut runs = Vec::new();
    let mut first_ids: Option<Vec<String>> = None;
    for spec in &a.classes {
        let Some((name, files)) = spec.split_once('=') else {
            bail!("--class expects NAME=a.csv,b.csv, got {spec:?}");
        };
        let paths: Vec<PathBuf> = files.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect();
        ensure!(!paths.is_empty(), "class {name} lists no files");
        let (ids, parts) = read_aligned(&paths, t)?;
        match &first_ids {
            None => first_ids = Some(ids),
            Some(f) => ensure!(*f == ids, "class {name} covers different nodes than the first class"),
        }
        runs.push((name.to_owned(), parts));
    }
    let m = stages::compare(&runs)?;
    stages::write_overlap(&a.out, &m)
}

fn topics(a: TopicsArgs) -> Result<()> {
    let net = read_network(&a.network)?;
    let file = PartitionFile::read(&a.partition)?;
    let words = file.labels_for(&net, NodeType::Word)?;
    let docs = match &a.doc_partition {
        Some(p) => PartitionFile::read(p)?.labels_for(&net, NodeType::Doc)?,
        None => file.labels_for(&net, NodeType::Doc)?,
    };
    let report = topic_report_from_labels(&net, &docs, &words, a.top)?;
    stages::write_topics(&a.out_dir, &report, a.threshold)?;
    eprintln!(
        "{} topics, {} document groups",
        report.mixture.n_topics(),
        report.mixture.n_doc_groups()
    );
    Ok(())
}

fn linkpred(a: LinkpredArgs, seed: u64) -> Result<()> {
    let net = read_network(&a.network)?;
    let config = LinkPredConfig {
        holdout: a.holdout,
        repeats: a.repeats,
        seed: stage_seed(seed, "linkpred"),
        tag_mode: a.tag_mode,
        mcmc: McmcConfig {
            n_sweeps: a.sweeps,
            n_chains: a.chains,
            burn_in: a.burn_in,
            thin: a.thin,
            ..Default::default()
        },
    };
    let report = evaluate_auc(&net, &a.models, &config)?;
    for m in &report.models {
        eprintln!("{}: AUC {:.4} ± {:.4}", m.model, m.mean, m.std);
    }
    for c in &report.comparisons {
        eprintln!(
            "{} vs {}: t = {:.3}, p = {:.3e}",
            c.model, c.baseline, c.paired.t, c.paired.p_two_sided
        );
    }
    let roc = a.roc.clone().unwrap_or_else(|| a.out.with_file_name("roc.csv"));
    stages::write_linkpred(&a.out, &roc, &report)
}

fn scaling(a: ScalingArgs, seed: u64) -> Result<()> {
    let net = read_network(&a.network)?;
    let report = degree_scaling(&net, &a.sizes, a.repeats, stage_seed(seed, "scaling"), a.fit_min)?;
    eprintln!("gamma {:.3} (R² {:.3})", report.gamma.exponent, report.gamma.r_squared);
    eprintln!("beta {:.3}, predicted gamma {:.3}", report.beta.exponent, report.gamma_pred);
    let json = a.json.clone().unwrap_or_else(|| sibling_json(&a.out));
    stages::write_scaling(&a.out, &json, &report)
}

fn sweep_mu(a: SweepMuArgs, seed: u64) -> Result<()> {
    let net = read_network(&a.network)?;
    let defaults = MuSweepConfig::default();
    let config = MuSweepConfig {
        mu_values: a.mu.clone().unwrap_or(defaults.mu_values),
        repeats: a.repeats,
        fits: a.fits,
        seed: stage_seed(seed, "sweep-mu"),
        tag_mode: a.tag_mode,
        mcmc: McmcConfig {
            n_sweeps: a.sweeps,
            ..defaults.mcmc
        },
    };
    let report = mu_sweep(&net, &config)?;
    let json = a.json.clone().unwrap_or_else(|| sibling_json(&a.out));
    stages::write_sweep(&a.out, &json, &report)
}

fn run(cli: Cli) -> Result<()> {
    let mut threads = cli.threads;
    let config = match &cli.command {
        Command::Run(r) => {
            let mut c = pipeline::RunConfig::load(&r.config)?;
            threads = threads.or(c.threads);
            if cli.seed != 0 {
                c.seed = cli.seed;
            }
            Some(c)
        }
        _ => None,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Fit(a) => fit(a, seed),
        Command::Consensus(a) => consensus(a),
        Command::Compare(a) => compare(a),
        Command::Topics(a) => topics(a),
        Command::Linkpred(a) => linkpred(a, seed),
        Command::Scaling(a) => scaling(a, seed),
        Command::SweepMu(a) => sweep_mu(a, seed),
        Command::Run(r) if r.check => {
            eprintln!("{}: ok", r.config.display());
            Ok(())
        }
        Command::Run(_) => pipeline::run(&config.expect("loaded above")),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
