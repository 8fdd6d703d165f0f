use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cfrec_core::data::{
    gen_synthetic, load_interactions, split_train_test, write_interactions, Dataset, SyntheticConfig,
};
use cfrec_core::experiment::{explain_pair, format_table, run_experiment, write_records, ExperimentConfig};
use cfrec_core::recommender::{read_checkpoint, train_lightgcn, write_checkpoint};
use cfrec_core::{BlackBox, Method, Mode, SurrogateConfig, TrainConfig};

/// Train a LightGCN recommender and explain its top-k lists.
#[derive(Parser)]
#[command(name = "cfrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-block interaction file.
    GenSynthetic(GenArgs),
    /// Train on the training split of an interaction file and save a checkpoint.
    Train(TrainArgs),
    /// Explain a single (user, item) pair and print its record.
    Explain(ExplainArgs),
    /// Run the sampling protocol and report PS/PN/EC per method.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 300)]
    items: usize,
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    /// Edge probability inside a block.
    #[arg(long, default_value_t = 0.08)]
    intra: f64,
    /// Edge probability across blocks.
    #[arg(long, default_value_t = 0.005)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Tab-separated `user item` file.
    #[arg(long)]
    data: PathBuf,
    /// Share of each user's interactions kept for training.
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Mask optimization steps.
    #[arg(long, default_value_t = ExperimentConfig::default().iterations)]
    iterations: usize,
    /// Mask learning rate.
    #[arg(long, default_value_t = ExperimentConfig::default().learning_rate)]
    lr: f64,
    /// Weight of the edit-distance term.
    #[arg(long, default_value_t = ExperimentConfig::default().beta)]
    beta: f64,
    /// Margin of the relaxed top-k indicator.
    #[arg(long, default_value_t = ExperimentConfig::default().epsilon)]
    epsilon: f64,
    #[arg(long, default_value_t = Mode::Factual.default_budget())]
    fa_budget: usize,
    #[arg(long, default_value_t = Mode::Counterfactual.default_budget())]
    cf_budget: usize,
    #[arg(long, default_value_t = 2)]
    hops: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().epochs)]
    surrogate_epochs: usize,
    #[arg(long, default_value_t = SurrogateConfig::default().hidden_dim)]
    surrogate_hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Raw user id.
    #[arg(long)]
    user: u64,
    /// Raw item id.
    #[arg(long)]
    item: u64,
    /// fa or cf.
    #[arg(long, default_value = "cf")]
    mode: Mode,
    /// grease, personalrank or random.
    #[arg(long, default_value = "grease")]
    method: Method,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Comma-separated subset of grease,personalrank,random.
    #[arg(long, value_delimiter = ',', default_value = "grease,personalrank,random")]
    methods: Vec<Method>,
    /// JSON-lines output for the per-pair records.
    #[arg(long)]
    records: PathBuf,
    /// Optional JSON dump of the metrics report.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenSynthetic(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Explain(a) => explain(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn gen(a: GenArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        num_users: a.users,
        num_items: a.items,
        blocks: a.blocks,
        intra_prob: a.intra,
        noise_prob: a.noise,
        seed: a.seed,
    };
    let xs = gen_synthetic(&cfg)?;
    let mut out = BufWriter::new(create(&a.out)?);
    write_interactions(&mut out, &xs)?;
    out.flush()?;
    eprintln!("wrote {} interactions to {}", xs.len(), a.out.display());
    Ok(())
}

fn load_dataset(a: &DataArgs) -> Result<Dataset> {
    let xs = load_interactions(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let name = a
        .data
        .file_stem()
        .map_or("data".into(), |s| s.to_string_lossy().into_owned());
    Ok(split_train_test(&name, &xs, a.ratio, a.split_seed)?)
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        dim: a.dim,
        layers: a.layers,
        batch_size: a.batch_size,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let model = train_lightgcn(&ds.train, &cfg)?;
    let mut out = BufWriter::new(create(&a.out)?);
    write_checkpoint(&model, &mut out)?;
    out.flush()?;
    eprintln!(
        "trained on {} interactions ({} users, {} items); checkpoint {}",
        ds.train.num_edges(),
        ds.train.num_users(),
        ds.train.num_items(),
        a.out.display()
    );
    Ok(())
}

fn load_blackbox(a: &ModelArgs) -> Result<BlackBox> {
    let ds = load_dataset(&a.data)?;
    let file = File::open(&a.model).with_context(|| format!("opening {}", a.model.display()))?;
    let model = read_checkpoint(BufReader::new(file))?;
    BlackBox::new(model, ds.train).context("checkpoint does not match the training split")
}

fn experiment_config(p: &ProtocolArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        k: p.k,
        hops: p.hops,
        seed: p.seed,
        fa_budget: p.fa_budget,
        cf_budget: p.cf_budget,
        iterations: p.iterations,
        learning_rate: p.lr,
        beta: p.beta,
        epsilon: p.epsilon,
        ..ExperimentConfig::default()
    };
    cfg.surrogate.epochs = p.surrogate_epochs;
    cfg.surrogate.hidden_dim = p.surrogate_hidden;
    cfg
}

fn explain(a: ExplainArgs) -> Result<()> {
    let bb = load_blackbox(&a.model)?;
    let user = bb.graph().user_index(a.user)?;
    let item = bb.graph().item_index(a.item)?;
    let cfg = ExperimentConfig {
        methods: vec![a.method],
        modes: vec![a.mode],
        ..experiment_config(&a.protocol)
    };
    cfg.validate()?;
    let records = explain_pair(&cfg, &bb, 0, user, item);
    let Some(record) = records.first() else {
        bail!("no record produced");
    };
    println!("{}", serde_json::to_string(record)?);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let bb = load_blackbox(&a.model)?;
    let cfg = ExperimentConfig {
        user_fraction: a.fraction,
        repeats: a.repeats,
        methods: a.methods.clone(),
        ..experiment_config(&a.protocol)
    };
    let out = run_experiment(&cfg, &bb)?;
    let mut file = BufWriter::new(create(&a.records)?);
    write_records(&mut file, &out.records)?;
    file.flush()?;
    if let Some(path) = &a.report {
        serde_json::to_writer_pretty(BufWriter::new(create(path)?), &out.report)?;
    }
    print!("{}", format_table(&out.report));
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}
