//! The `evontology` command line. Exit codes: 0 success, 1 usage error,
//! 2 data error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evontology_core::build::{self, BuildConfig, DEFAULT_MIN_EVENTS, DEFAULT_ROOT};
use evontology_core::encoding::{centrality_weights, distance_weights, encode_leaf, encode_subgraph};
use evontology_core::eval::{evaluate, EvalSample};
use evontology_core::learn::{Dataset, LossKind, Objective, Predictor, TrainConfig, Trainer};
use evontology_core::refine::RefinementSession;
use evontology_core::synthetic::HierarchicalClusters;
use evontology_core::{Ontology, WeightVector};

use crate::io::checkpoint::{self, ModelFile, MODEL_FORMAT};
use crate::io::report::{self, Metric};
use crate::io::tables::{self, Predictions};
use crate::io::vectors::{self, VectorFile, VectorKind};
use crate::io::{self, kb, session_log, sibling, DataError};
use crate::server::{self, SessionState};

#[derive(Debug, Parser)]
#[command(name = "evontology", version, about = "Event-type ontologies and hierarchical classifiers")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print only the ontology hash and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Output file.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Initial ontology from a triple dump and event seeds.
    Build(BuildArgs),
    /// Sport rewiring, minimum-event filter and manual merges.
    Disambiguate(DisambiguateArgs),
    /// Remove branch nodes that add no leaf-set information.
    Reduce(OntArg),
    /// Human refinement sessions.
    #[command(subcommand)]
    Refine(RefineCommand),
    /// Per-node loss weights.
    Weights(WeightsArgs),
    /// Sample labels to leaf or subgraph vectors.
    Encode(EncodeArgs),
    /// Train a classifier head on feature vectors.
    Train(TrainArgs),
    /// Leaf scores for feature vectors.
    Infer(InferArgs),
    /// Score predictions against true labels.
    Eval(EvalArgs),
    /// Node, leaf, relation and event counts.
    Stats(OntArg),
    /// Synthetic features and labels clustered along an ontology.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct OntArg {
    #[arg(long)]
    pub ont: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// `subject<TAB>property<TAB>object` lines.
    #[arg(long)]
    pub triples: PathBuf,
    /// `event_id<TAB>label[<TAB>popularity[<TAB>date]]` lines.
    #[arg(long)]
    pub seeds: PathBuf,
    /// `entity<TAB>label` lines.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ROOT)]
    pub root: String,
}

#[derive(Debug, Args)]
pub struct DisambiguateArgs {
    #[arg(long)]
    pub ont: PathBuf,
    /// Triple dump holding the sport values; without it no rewiring is done.
    #[arg(long)]
    pub triples: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_EVENTS)]
    pub min_events: usize,
    /// `survivor_id<TAB>absorbed_id` lines.
    #[arg(long)]
    pub merges: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RefineCommand {
    /// Serve a session over HTTP, appending decisions to `--log`.
    Serve {
        #[arg(long)]
        ont: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value = "annotator")]
        annotator: String,
    },
    /// Replay a decision log and write the refined ontology.
    Export {
        #[arg(long)]
        ont: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Unit,
    Distance,
    Centrality,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub ont: PathBuf,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    /// Weight of every leaf under the centrality scheme.
    #[arg(long, default_value_t = 6.0)]
    pub leaf_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Leaf,
    Subgraph,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub ont: PathBuf,
    /// `sample_id<TAB>leaf_id[,leaf_id...]` lines.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::parse(s).ok_or_else(|| format!("expected one of c, cel, cos, c+cel, c+cos; got {s:?}"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Ontology the model predicts over (reduced or not).
    #[arg(long)]
    pub ont: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Sample label table aligned row by row with `--features`.
    #[arg(long, conflicts_with = "targets", required_unless_present = "targets")]
    pub labels: Option<PathBuf>,
    /// Leaf or subgraph vector file instead of `--labels`.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, requires = "val_labels")]
    pub val_features: Option<PathBuf>,
    #[arg(long, requires = "val_features")]
    pub val_labels: Option<PathBuf>,
    #[arg(long, value_parser = parse_loss, default_value = "c")]
    pub loss: LossKind,
    /// Weight vector file; unit weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub iters: u64,
    /// Write a resumable checkpoint here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 500, requires = "checkpoint")]
    pub checkpoint_every: u64,
    /// Continue from a checkpoint; its configuration wins over the flags.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Leave only a checkpoint after this many iterations.
    #[arg(long, requires = "checkpoint")]
    pub stop_at: Option<u64>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ont: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    /// Label table whose sample ids name the prediction rows.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Full ontology; similarity metrics are always computed in its dimension.
    #[arg(long)]
    pub ont: PathBuf,
    /// Ontology the predictions were made over, if it differs from `--ont`.
    #[arg(long)]
    pub model_ont: Option<PathBuf>,
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, value_parser = parse_metrics, default_value = "top1,top3,top5,jsc,cs")]
    pub metrics: MetricList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricList(pub Vec<Metric>);

fn parse_metrics(s: &str) -> Result<MetricList, String> {
    Metric::parse_list(s).map(MetricList)
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub ont: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub per_leaf: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 3.0)]
    pub branch_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub leaf_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Seed of the cluster centres; `--seed` drives the noise, so sets that
    /// share geometry can be drawn independently.
    #[arg(long, default_value_t = 0)]
    pub geometry_seed: u64,
}

/// A failure while reading or processing inputs (exit code 2), as opposed
/// to a malformed command line (exit code 1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.into())
    }
}

type Result<T, E = Failure> = std::result::Result<T, E>;

struct Ctx {
    seed: u64,
    quiet: bool,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Failure::Usage("this command needs --out".into()))
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn warn(&self, msg: Option<String>) {
        if let (Some(m), false) = (msg, self.quiet) {
            eprintln!("warning: {m}");
        }
    }
}

fn hash_line(ont: &Ontology) {
    println!("ontology {}", ont.content_hash());
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
        out: cli.out,
    };
    match dispatch(&ctx, cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> Result<()> {
    match cmd {
        Command::Build(a) => build_cmd(ctx, a),
        Command::Disambiguate(a) => disambiguate_cmd(ctx, a),
        Command::Reduce(a) => reduce_cmd(ctx, a),
        Command::Refine(RefineCommand::Serve {
            ont,
            log,
            port,
            host,
            annotator,
        }) => serve_cmd(ctx, &ont, &log, (host, port).into(), &annotator),
        Command::Refine(RefineCommand::Export { ont, log }) => export_cmd(ctx, &ont, &log),
        Command::Weights(a) => weights_cmd(ctx, a),
        Command::Encode(a) => encode_cmd(ctx, a),
        Command::Train(a) => train_cmd(ctx, a),
        Command::Infer(a) => infer_cmd(ctx, a),
        Command::Eval(a) => eval_cmd(ctx, a),
        Command::Stats(a) => stats_cmd(ctx, a),
        Command::Synth(a) => synth_cmd(ctx, a),
    }
}

fn stats_line(ont: &Ontology, links: &[evontology_core::EventLink]) -> String {
    let s = build::stats(ont, links);
    format!(
        "nodes {} leaves {} relations {} events {} unambiguous {}",
        s.nodes, s.leaves, s.relations, s.events, s.unambiguous_events
    )
}

fn load_kb(ctx: &Ctx, triples: &Path, labels: Option<&Path>, cfg: &BuildConfig) -> Result<evontology_core::TripleIndex> {
    let (mut index, st) = kb::load_triples(triples, &cfg.properties())?;
    ctx.warn(st.warning(triples));
    if let Some(l) = labels {
        let st = kb::load_labels(l, &mut index)?;
        ctx.warn(st.warning(l));
    }
    Ok(index)
}

fn build_cmd(ctx: &Ctx, a: BuildArgs) -> Result<()> {
    let out = ctx.out()?;
    let cfg = BuildConfig {
        root_id: a.root,
        ..BuildConfig::default()
    };
    let index = load_kb(ctx, &a.triples, a.labels.as_deref(), &cfg)?;
    let (seeds, st) = kb::load_seeds(&a.seeds)?;
    ctx.warn(st.warning(&a.seeds));
    let stage = build::build_initial(&seeds, &index, &cfg).context("building the initial ontology")?;
    io::ontology::write(out, &stage.ontology, Some(&stage.links))?;
    hash_line(&stage.ontology);
    ctx.say(stats_line(&stage.ontology, &stage.links));
    let r = &stage.report;
    ctx.say(format!(
        "dropped back edges {} pruned nodes {} unlinked events {}",
        r.dropped_back_edges.len(),
        r.pruned_nodes.len(),
        r.unlinked_events.len()
    ));
    Ok(())
}

fn disambiguate_cmd(ctx: &Ctx, a: DisambiguateArgs) -> Result<()> {
    let out = ctx.out()?;
    let cfg = BuildConfig {
        min_events: a.min_events,
        ..BuildConfig::default()
    };
    let mut ont = io::ontology::read(&a.ont)?;
    let mut links = io::ontology::read_links(&a.ont)?;
    let cfg = BuildConfig {
        root_id: ont.root_id().into(),
        ..cfg
    };
    if let Some(t) = &a.triples {
        let index = load_kb(ctx, t, a.labels.as_deref(), &cfg)?;
        let stage = build::disambiguate_sport(&ont, &links, &index, &cfg).context("sport rewiring")?;
        let r = &stage.report;
        ctx.say(format!(
            "sport: rewired {} nodes {} events, imported {} nodes",
            r.rewired_nodes.len(),
            r.rewired_events.len(),
            r.added_nodes.len()
        ));
        for s in &r.skipped {
            ctx.warn(Some(format!("sport rewire {} -> {} skipped ({:?})", s.subject, s.target, s.reason)));
        }
        (ont, links) = (stage.ontology, stage.links);
    }
    let stage = build::filter_min_events(&ont, &links, &cfg).context("minimum-event filter")?;
    ctx.say(format!(
        "min-events {}: removed {} nodes, relinked {} events",
        cfg.min_events,
        stage.report.removed.len(),
        stage.report.relinked_events
    ));
    (ont, links) = (stage.ontology, stage.links);
    if let Some(m) = &a.merges {
        let merges = tables::parse_merges(&io::read_text(m)?, m)?;
        (ont, links) = build::apply_merges(&ont, &links, &merges).with_context(|| format!("applying {}", m.display()))?;
        ctx.say(format!("merged {} groups", merges.groups.len()));
    }
    io::ontology::write(out, &ont, Some(&links))?;
    hash_line(&ont);
    ctx.say(stats_line(&ont, &links));
    Ok(())
}

fn reduce_cmd(ctx: &Ctx, a: OntArg) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    let red = build::remove_redundant(&ont).context("redundancy removal")?;
    io::ontology::write(out, &red.ontology, None)?;
    hash_line(&red.ontology);
    println!("{} → {} nodes", ont.len(), red.ontology.len());
    Ok(())
}

fn serve_cmd(ctx: &Ctx, ont: &Path, log: &Path, addr: std::net::SocketAddr, annotator: &str) -> Result<()> {
    let state = SessionState::open(ont, Some(log), annotator).map_err(anyhow::Error::from)?;
    hash_line(state.session.base());
    let p = state.session.progress();
    ctx.say(format!(
        "serving on http://{addr} ({} decided, {} of {} candidates remain)",
        p.decided, p.remaining, p.total
    ));
    let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    rt.block_on(server::serve(state, addr))
        .with_context(|| format!("serving on {addr}"))?;
    Ok(())
}

fn export_cmd(ctx: &Ctx, ont_path: &Path, log: &Path) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(ont_path)?;
    let links = io::ontology::read_links(ont_path)?;
    let entries = session_log::parse(&io::read_text(log)?, log)?;
    let decisions = session_log::effective_decisions(&entries, log)?;
    let session = RefinementSession::replay(ont, links, &decisions).with_context(|| format!("replaying {}", log.display()))?;
    let (refined, links) = session.finalize().context("exporting the session")?;
    io::ontology::write(out, &refined, Some(&links))?;
    hash_line(&refined);
    ctx.say(format!("{} decisions", decisions.len()));
    ctx.say(stats_line(&refined, &links));
    Ok(())
}

fn weights_cmd(ctx: &Ctx, a: WeightsArgs) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    let w = match a.scheme {
        SchemeArg::Unit => WeightVector::unit(&ont),
        SchemeArg::Distance => distance_weights(&ont),
        SchemeArg::Centrality => centrality_weights(&ont, a.leaf_weight).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    io::write_text(out, &vectors::weights_file(&w).to_text())?;
    hash_line(&ont);
    let (lo, hi) = w
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    ctx.say(format!("{} weights over {} nodes, min {lo} max {hi}", w.scheme.as_str(), w.len()));
    Ok(())
}

fn load_labels(path: &Path) -> Result<tables::SampleLabels> {
    Ok(tables::parse_sample_labels(&io::read_text(path)?, path)?)
}

fn encode_cmd(ctx: &Ctx, a: EncodeArgs) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    let labels = load_labels(&a.labels)?;
    let mut rows = Vec::with_capacity(labels.len());
    for (id, leaves) in &labels {
        let leaves = leaves.iter().map(String::as_str);
        let bits = match a.kind {
            KindArg::Leaf => encode_leaf(&ont, leaves).map(|v| v.values),
            KindArg::Subgraph => encode_subgraph(&ont, leaves).map(|v| v.values),
        }
        .with_context(|| format!("{}: sample {id}", a.labels.display()))?;
        rows.push(bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
    }
    let (kind, dim) = match a.kind {
        KindArg::Leaf => (VectorKind::Leaf, ont.leaf_count()),
        KindArg::Subgraph => (VectorKind::Subgraph, ont.len()),
    };
    let file = VectorFile {
        ontology_hash: ont.content_hash(),
        kind,
        dim,
        scheme: None,
        leaf_weight: None,
        rows,
    };
    io::write_text(out, &file.to_text())?;
    hash_line(&ont);
    ctx.say(format!("{} {} vectors of dimension {dim}", file.rows.len(), kind.as_str()));
    Ok(())
}

fn load_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(tables::parse_features(&io::read_text(path)?, path)?)
}

fn dataset(ont: &Ontology, features: &Path, labels: &[BTreeSet<String>], label_path: &Path) -> Result<Dataset> {
    let x = load_features(features)?;
    if x.len() != labels.len() {
        return Err(anyhow!(
            "{} has {} rows but {} has {}",
            features.display(),
            x.len(),
            label_path.display(),
            labels.len()
        )
        .into());
    }
    Ok(Dataset::from_labels(ont, x, labels).with_context(|| format!("pairing {} with {}", features.display(), label_path.display()))?)
}

fn train_labels(ont: &Ontology, a: &TrainArgs) -> Result<(Vec<BTreeSet<String>>, PathBuf)> {
    if let Some(t) = &a.targets {
        let v = VectorFile::parse(&io::read_text(t)?, t)?;
        return Ok((vectors::leaf_sets(&v, ont, t)?, t.clone()));
    }
    let path = a.labels.clone().expect("clap requires --labels or --targets");
    Ok((load_labels(&path)?.into_iter().map(|(_, l)| l).collect(), path))
}

fn train_cmd(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    hash_line(&ont);

    let mut trainer = match &a.resume {
        Some(r) => {
            let t = checkpoint::read_checkpoint(r)?;
            if t.ontology_hash() != ont.content_hash() {
                return Err(DataError::HashMismatch {
                    path: r.clone(),
                    found: t.ontology_hash().into(),
                    expected: ont.content_hash(),
                }
                .into());
            }
            ctx.say(format!("resuming at iteration {} of {}", t.iter, t.config.iters));
            t
        }
        None => {
            let weights = match &a.weights {
                Some(p) => {
                    let v = VectorFile::parse(&io::read_text(p)?, p)?;
                    v.check_hash(&ont, p)?;
                    vectors::weights_from_file(&v, p)?
                }
                None => WeightVector::unit(&ont),
            };
            let objective = Objective::new(a.loss, &ont, weights).context("setting up the loss")?;
            let x = load_features(&a.features)?;
            let dim = x.first().map_or(0, Vec::len);
            Trainer::new(objective, dim, TrainConfig::desk(a.iters, ctx.seed)).map_err(|e| Failure::Usage(e.to_string()))?
        }
    };

    let (labels, label_path) = train_labels(&ont, &a)?;
    let train = dataset(&ont, &a.features, &labels, &label_path)?;
    let val = match (&a.val_features, &a.val_labels) {
        (Some(f), Some(l)) => {
            let labels: Vec<BTreeSet<String>> = load_labels(l)?.into_iter().map(|(_, s)| s).collect();
            Some(dataset(&ont, f, &labels, l)?)
        }
        _ => None,
    };
    ctx.say(format!(
        "training {} on {} samples for {} iterations",
        trainer.objective.describe(),
        train.len(),
        trainer.config.iters
    ));

    let step = match &a.checkpoint {
        Some(_) => a.checkpoint_every.max(1),
        None => trainer.config.iters.max(1),
    };
    let halt = a.stop_at.unwrap_or(u64::MAX);
    while !trainer.is_finished() && trainer.iter < halt {
        let stop = (trainer.iter + step).min(halt);
        trainer.run_until(stop, &train, val.as_ref()).context("training")?;
        if let Some(c) = &a.checkpoint {
            checkpoint::write_checkpoint(c, &trainer)?;
        }
    }
    if !trainer.is_finished() {
        ctx.say(format!("stopped at iteration {}; continue with --resume", trainer.iter));
        return Ok(());
    }
    if trainer.trace.is_empty() {
        trainer.run_until(0, &train, val.as_ref()).context("training")?;
    }

    let outcome = trainer.outcome();
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        ontology: ont.content_hash(),
        objective: trainer.objective.clone(),
        head: outcome.best_head,
        best_iter: outcome.best_iter,
        best_val_loss: outcome.best_val_loss,
    };
    checkpoint::write_model(out, &model)?;
    io::write_text(&sibling(out, ".trace.csv"), &report::trace_csv(&outcome.trace))?;
    ctx.say(format!(
        "best iteration {} with {} loss {:.6}",
        outcome.best_iter,
        if val.is_some() { "validation" } else { "training" },
        outcome.best_val_loss
    ));
    Ok(())
}

fn bail_usage<T>(msg: &str) -> Result<T> {
    Err(Failure::Usage(msg.into()))
}

fn infer_cmd(ctx: &Ctx, a: InferArgs) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    hash_line(&ont);
    let model = checkpoint::read_model(&a.model)?;
    if model.ontology != ont.content_hash() {
        return Err(DataError::HashMismatch {
            path: a.model.clone(),
            found: model.ontology,
            expected: ont.content_hash(),
        }
        .into());
    }
    let predictor = Predictor::new(&model.objective, &ont).context("loading the model")?;
    let x = load_features(&a.features)?;
    let ids: Vec<String> = match &a.labels {
        Some(l) => {
            let labels = load_labels(l)?;
            if labels.len() != x.len() {
                return Err(anyhow!("{} has {} rows but {} has {}", a.features.display(), x.len(), l.display(), labels.len()).into());
            }
            labels.into_iter().map(|(id, _)| id).collect()
        }
        None => (1..=x.len()).map(|i| i.to_string()).collect(),
    };
    let mut rows = Vec::with_capacity(x.len());
    for (id, xi) in ids.into_iter().zip(&x) {
        let s = predictor
            .scores(&model.head, xi)
            .with_context(|| format!("{}: sample {id}", a.features.display()))?;
        rows.push((id, s));
    }
    let preds = Predictions {
        ontology_hash: Some(ont.content_hash()),
        rows,
    };
    io::write_text(out, &tables::predictions_to_text(&preds))?;
    ctx.say(format!("{} predictions over {} leaves", preds.rows.len(), ont.leaf_count()));
    Ok(())
}

fn eval_cmd(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let out = ctx.out()?;
    let full = io::ontology::read(&a.ont)?;
    let model_ont = match &a.model_ont {
        Some(p) => io::ontology::read(p)?,
        None => full.clone(),
    };
    hash_line(&full);
    let preds = tables::parse_predictions(&io::read_text(&a.predictions)?, &a.predictions)?;
    let want = model_ont.content_hash();
    match &preds.ontology_hash {
        Some(h) if *h != want => {
            return Err(DataError::HashMismatch {
                path: a.predictions.clone(),
                found: h.clone(),
                expected: want,
            }
            .into())
        }
        _ => {}
    }
    let model_leaves = model_ont.leaf_ids();
    let full_leaves = full.leaf_ids();
    let model_set: BTreeSet<&str> = model_leaves.iter().copied().collect();
    if model_set != full_leaves.iter().copied().collect() {
        return Err(anyhow!("the model ontology and {} have different leaves", a.ont.display()).into());
    }
    // Scores are reordered into the full ontology's leaf order.
    let perm: Vec<usize> = full_leaves
        .iter()
        .map(|id| model_leaves.iter().position(|m| m == id).expect("same leaf set"))
        .collect();

    let truth: std::collections::BTreeMap<String, BTreeSet<String>> = load_labels(&a.labels)?.into_iter().collect();
    let mut samples = Vec::with_capacity(preds.rows.len());
    for (id, scores) in &preds.rows {
        let t = truth
            .get(id)
            .ok_or_else(|| anyhow!("{}: sample {id} has no label in {}", a.predictions.display(), a.labels.display()))?;
        if scores.len() != perm.len() {
            return Err(anyhow!("{}: sample {id} has {} scores for {} leaves", a.predictions.display(), scores.len(), perm.len()).into());
        }
        samples.push(EvalSample {
            prediction: perm.iter().map(|&p| scores[p]).collect(),
            truth_leaves: t.clone(),
        });
    }
    let rep = evaluate(&samples, &full).context("evaluating")?;
    let text = report::report_text(&rep, &a.metrics.0, &full.content_hash());
    io::write_text(out, &text)?;
    io::write_text(&sibling(out, ".csv"), &report::report_csv(&rep, &a.metrics.0))?;
    for m in &a.metrics.0 {
        match m.value(&rep) {
            Some(v) => ctx.say(format!("{} {v:.4}", m.as_str())),
            None => ctx.say(format!("{} n/a", m.as_str())),
        }
    }
    Ok(())
}

fn stats_cmd(_ctx: &Ctx, a: OntArg) -> Result<()> {
    let ont = io::ontology::read(&a.ont)?;
    let links = io::ontology::read_links(&a.ont)?;
    hash_line(&ont);
    println!("{}", stats_line(&ont, &links));
    if ont.is_reduced() {
        println!("reduced");
    }
    Ok(())
}

fn synth_cmd(ctx: &Ctx, a: SynthArgs) -> Result<()> {
    let out = ctx.out()?;
    let ont = io::ontology::read(&a.ont)?;
    if a.dim == 0 || a.per_leaf == 0 {
        bail_usage("--dim and --per-leaf must be positive")?;
    }
    let gen = HierarchicalClusters {
        dim: a.dim,
        branch_scale: a.branch_scale,
        leaf_scale: a.leaf_scale,
        noise: a.noise,
    };
    let samples = gen.sample(&ont, a.per_leaf, a.geometry_seed, ctx.seed);
    let leaves = ont.leaf_ids();
    let labels: Vec<(String, BTreeSet<String>)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("s{}", i + 1), BTreeSet::from([leaves[s.leaf].to_string()])))
        .collect();
    let rows: Vec<Vec<f64>> = samples.into_iter().map(|s| s.features).collect();
    let (fpath, lpath) = (sibling(out, ".features.txt"), sibling(out, ".labels.tsv"));
    io::write_text(&fpath, &tables::features_to_text(&rows))?;
    io::write_text(&lpath, &tables::sample_labels_to_tsv(&labels))?;
    hash_line(&ont);
    ctx.say(format!("{} samples written to {} and {}", rows.len(), fpath.display(), lpath.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn metric_and_loss_flags_parse() {
        let cli = Cli::try_parse_from([
            "evontology", "eval", "--ont", "o", "--predictions", "p", "--labels", "l", "--metrics", "top1,cs", "--out", "r",
        ])
        .unwrap();
        let Command::Eval(a) = cli.command else { panic!() };
        assert_eq!(a.metrics.0, [Metric::Top1, Metric::Cs]);
        let cli = Cli::try_parse_from(["evontology", "train", "--ont", "o", "--features", "f", "--labels", "l", "--loss", "c+cos"]).unwrap();
        let Command::Train(a) = cli.command else { panic!() };
        assert_eq!(a.loss, LossKind::CCos);
        assert!(Cli::try_parse_from(["evontology", "train", "--ont", "o", "--features", "f", "--labels", "l", "--loss", "ccos"]).is_err());
    }

    #[test]
    fn usage_errors_exit_1() {
        assert_eq!(run(["evontology", "build", "--bogus"]), 1);
        assert_eq!(run(["evontology", "stats", "--ont", "/nonexistent/o.json"]), 2);
        assert_eq!(run(["evontology", "reduce", "--ont", "x"]), 1);
    }
}
