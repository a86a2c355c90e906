use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use domnet::dataset::{
    generate_dataset, load_jsonl, save_jsonl, split, verify, DatasetSplit, GenerateOptions, LabeledInstance,
    SplitConfig, VerifyMode, DEFAULT_LABEL_BUDGET,
};
use domnet::fsutil::write_atomic;
use domnet::models::{AnyModel, GinConfig, Surrogate};
use domnet::solver::domination_number;
use domnet::tensor::Checkpoint;
use domnet::train::{
    benchmark_runtime, build_model, cross_domain_eval, evaluate, grid_search, pooling_ablation, report, single_graph,
    train, GRID_POOLINGS, GRID_WIDTHS,
};
use domnet::{CnnModel64, Error, Family, GinModel64, Graph};
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Subcommand)]
pub enum Command {
    /// Generate and label a dataset as JSON Lines.
    Generate(GenerateArgs),
    /// Compute the exact domination number of one graph.
    Solve(SolveArgs),
    /// Train a model from an experiment config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare mean+add against mean-only pooling.
    Ablate(ExperimentArgs),
    /// Sweep GIN width and pooling, selecting on validation MAE.
    Grid(GridArgs),
    /// Time the exact solver against both surrogates.
    Bench(BenchArgs),
    /// Evaluate ER- and BA-trained models on both domains.
    Crossdomain(CrossArgs),
    /// Re-check stored labels.
    Verify(VerifyArgs),
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Grid(a) => grid(a),
        Command::Bench(a) => bench(a),
        Command::Crossdomain(a) => crossdomain(a),
        Command::Verify(a) => verify_cmd(a),
    }
}

/// Where a report goes: the text table on stdout, JSON to `--out`, or JSON
/// on stdout with `--json`.
#[derive(Args)]
pub struct OutputArgs {
    /// Write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

impl OutputArgs {
    fn emit<R: Serialize>(&self, report: &R, table: impl FnOnce() -> String) -> Result<()> {
        let json = serde_json::to_string_pretty(report)? + "\n";
        if let Some(path) = &self.out {
            write_atomic(path, json.as_bytes())?;
        }
        if self.json {
            print!("{json}");
        } else {
            print!("{}", table());
        }
        Ok(())
    }
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    n_min: usize,
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    /// Labeling threads; the output does not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Search-node budget per instance before it is regenerated.
    #[arg(long, default_value_t = DEFAULT_LABEL_BUDGET)]
    budget: u64,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    Family::from_tag(s).map_err(|e| e.to_string())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let opts = GenerateOptions {
        n_range: a.n_min..=a.n_max,
        budget: a.budget,
        jobs: a.jobs,
    };
    let ds = generate_dataset(a.family, a.count, a.seed, &opts)?;
    save_jsonl(&a.out, &ds)?;
    eprintln!("wrote {} {} instances to {}", ds.len(), a.family, a.out.display());
    Ok(())
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("input").required(true))]
pub struct SolveArgs {
    /// Edge-list file: one `u v` or `u-v` pair per line, `#` starts a comment.
    #[arg(long, group = "input")]
    graph: Option<PathBuf>,
    /// Inline edge list such as "0-1,1-2,2-3".
    #[arg(long, group = "input")]
    edges: Option<String>,
    /// Vertex count; defaults to one past the largest endpoint.
    #[arg(long)]
    n: Option<usize>,
    /// Search-node budget.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    json: bool,
}

fn parse_edge_list<'a>(tokens: impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (line, tok) in tokens {
        let tok = tok.split('#').next().unwrap_or("").trim();
        if tok.is_empty() {
            continue;
        }
        let parts: Vec<&str> = tok
            .split(|c: char| c == '-' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parsed = match parts.as_slice() {
            [u, v] => u.parse::<usize>().ok().zip(v.parse::<usize>().ok()),
            _ => None,
        };
        let edge = parsed.ok_or_else(|| Error::Parse {
            line,
            message: format!("expected an edge \"u-v\", found {tok:?}"),
        })?;
        edges.push(edge);
    }
    Ok(edges)
}

fn solve(a: SolveArgs) -> Result<()> {
    let edges = match (&a.graph, &a.edges) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            parse_edge_list(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
                .with_context(|| path.display().to_string())?
        }
        (None, Some(list)) => {
            parse_edge_list(list.split(',').enumerate().map(|(i, t)| (i + 1, t))).context("--edges")?
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let implied = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = a.n.unwrap_or(implied);
    let g = Graph::from_edges(n, &edges)?;
    let r = domination_number(&g, a.budget)?;
    if a.json {
        let out = serde_json::json!({
            "n": n,
            "gamma": r.gamma,
            "witness": r.witness.members(),
            "nodes_explored": r.nodes_explored,
        });
        println!("{out}");
    } else {
        let witness: Vec<String> = r.witness.members().iter().map(usize::to_string).collect();
        println!("gamma {}", r.gamma);
        println!("witness {}", witness.join(" "));
    }
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Epoch history CSV; defaults to the checkpoint path with a `.history.csv` suffix.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Override `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override `train.max_epochs`.
    #[arg(long)]
    max_epochs: Option<usize>,
}

fn load_experiment(path: &Path) -> Result<(ExperimentConfig, Vec<LabeledInstance>, DatasetSplit)> {
    let cfg = ExperimentConfig::load(path)?;
    let ds = cfg.dataset()?;
    let parts = split(&ds, &cfg.split_config())?;
    Ok((cfg, ds, parts))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let (mut cfg, ds, parts) = load_experiment(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    if let Some(epochs) = a.max_epochs {
        cfg.train.max_epochs = epochs;
    }
    let tc = &cfg.train;
    let outcome = train(build_model::<f64>(tc)?, &parts, tc)?;
    let test = evaluate(&outcome.model, &parts.test)?;
    let meta = serde_json::json!({
        "config": tc,
        "split": cfg.split_config(),
        "data": { "source": cfg.source(), "instances": ds.len() },
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.history.len(),
        "val": outcome.val_report,
        "test": test,
    });
    outcome.model.to_checkpoint(meta).save(&a.out)?;
    let history = a.history.unwrap_or_else(|| {
        let mut name = a.out.clone().into_os_string();
        name.push(".history.csv");
        PathBuf::from(name)
    });
    write_atomic(&history, report::history_csv(&outcome.history).as_bytes())?;
    print!(
        "{}",
        report::accuracy_table(&[("validation", &outcome.val_report), ("test", &test)])
    );
    eprintln!(
        "best epoch {} of {}; wrote {} and {}",
        outcome.best_epoch,
        outcome.history.len(),
        a.out.display(),
        history.display()
    );
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    All,
    Train,
    Val,
    Test,
}

fn load_model(path: &Path) -> Result<(AnyModel<f64>, Checkpoint)> {
    let ck = Checkpoint::load(path)?;
    let model = AnyModel::from_checkpoint(&ck).with_context(|| path.display().to_string())?;
    Ok((model, ck))
}

/// Selects `part` of `ds` using the split recorded in the checkpoint.
fn select(ds: Vec<LabeledInstance>, part: SplitPart, ck: &Checkpoint) -> Result<Vec<LabeledInstance>> {
    if part == SplitPart::All {
        return Ok(ds);
    }
    let recorded = ck
        .meta
        .get("train")
        .and_then(|t| t.get("split"))
        .ok_or_else(|| Error::Parameter("checkpoint records no split; use --split all".into()))?;
    let cfg: SplitConfig = serde_json::from_value(recorded.clone())?;
    let parts = split(&ds, &cfg)?;
    Ok(match part {
        SplitPart::Train => parts.train,
        SplitPart::Val => parts.val,
        SplitPart::Test => parts.test,
        SplitPart::All => unreachable!(),
    })
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Part of the data to score, split as recorded in the checkpoint.
    #[arg(long, value_enum, default_value_t = SplitPart::All)]
    split: SplitPart,
    /// Also print the per-size table.
    #[arg(long)]
    buckets: bool,
    #[command(flatten)]
    output: OutputArgs,
}

fn eval(a: EvalArgs) -> Result<()> {
    let (model, ck) = load_model(&a.model)?;
    let ds = select(load_jsonl(&a.data)?, a.split, &ck)?;
    let r = evaluate(&model, &ds)?;
    a.output.emit(&r, || {
        let mut text = report::accuracy_table(&[(model.kind(), &r)]).to_string();
        if a.buckets {
            text.push('\n');
            text.push_str(&report::bucket_table(&r).to_string());
        }
        text
    })
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

fn ablate(a: ExperimentArgs) -> Result<()> {
    let (cfg, _, parts) = load_experiment(&a.config)?;
    let r = pooling_ablation::<f64>(&parts, &cfg.train)?;
    a.output.emit(&r, || report::ablation_table(&r).to_string())
}

#[derive(Args)]
pub struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    /// Hidden widths to try.
    #[arg(long, value_delimiter = ',', default_values_t = GRID_WIDTHS)]
    widths: Vec<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

fn grid(a: GridArgs) -> Result<()> {
    let (cfg, _, parts) = load_experiment(&a.config)?;
    let r = grid_search::<f64>(&parts, &cfg.train, &a.widths, &GRID_POOLINGS)?;
    a.output.emit(&r, || report::grid_table(&r).to_string())
}

#[derive(Args)]
pub struct BenchArgs {
    /// Dataset whose graphs all have the same vertex count.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// CNN checkpoint; a freshly initialized CNN is timed when absent.
    #[arg(long)]
    cnn: Option<PathBuf>,
    /// GIN checkpoint; a freshly initialized GIN is timed when absent.
    #[arg(long)]
    gin: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

fn bench(a: BenchArgs) -> Result<()> {
    let graphs: Vec<Graph> = load_jsonl(&a.data)?.into_iter().map(|i| i.graph).collect();
    let cnn = match &a.cnn {
        Some(p) => CnnModel64::from_checkpoint(&Checkpoint::load(p)?)?,
        None => CnnModel64::new(0),
    };
    let gin = match &a.gin {
        Some(p) => GinModel64::from_checkpoint(&Checkpoint::load(p)?)?,
        None => GinModel64::new(GinConfig::default(), 0)?,
    };
    let (c, g) = (single_graph(&cnn), single_graph(&gin));
    let r = benchmark_runtime(&graphs, a.trials, &[("cnn", &c), ("gin", &g)])?;
    a.output.emit(&r, || report::runtime_table(&r).to_string())
}

#[derive(Args)]
pub struct CrossArgs {
    #[arg(long)]
    model_er: PathBuf,
    #[arg(long)]
    model_ba: PathBuf,
    #[arg(long)]
    data_er: PathBuf,
    #[arg(long)]
    data_ba: PathBuf,
    /// Part of each dataset to score, split as recorded in that domain's checkpoint.
    #[arg(long, value_enum, default_value_t = SplitPart::Test)]
    split: SplitPart,
    #[command(flatten)]
    output: OutputArgs,
}

fn crossdomain(a: CrossArgs) -> Result<()> {
    let (er, ck_er) = load_model(&a.model_er)?;
    let (ba, ck_ba) = load_model(&a.model_ba)?;
    if er.kind() != ba.kind() {
        return Err(Error::Parameter("both checkpoints must hold the same model kind".into()).into());
    }
    let test_er = select(load_jsonl(&a.data_er)?, a.split, &ck_er)?;
    let test_ba = select(load_jsonl(&a.data_ba)?, a.split, &ck_ba)?;
    let r = cross_domain_eval(&er, &ba, &test_er, &test_ba)?;
    a.output.emit(&r, || report::cross_domain_table(&r).to_string())
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    data: PathBuf,
    /// Largest graph re-checked by brute force; larger ones are skipped.
    #[arg(long, default_value_t = 14)]
    max_n: usize,
    /// Re-check every instance with the exact solver instead.
    #[arg(long)]
    exact: bool,
}

fn verify_cmd(a: VerifyArgs) -> Result<()> {
    let ds = load_jsonl(&a.data)?;
    let mode = if a.exact {
        VerifyMode::Exact
    } else {
        VerifyMode::BruteForce { max_n: a.max_n }
    };
    let s = verify(&ds, mode)?;
    println!("checked {} skipped {}", s.checked, s.skipped);
    Ok(())
}
