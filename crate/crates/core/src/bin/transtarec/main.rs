use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use transtarec::eval::{compare, evaluate, write_report_json, EvalConfig, EvalReport, DEFAULT_KS};
use transtarec::ingest::{parse_iso, Corpus};
use transtarec::linalg::norm;
use transtarec::persist::{self, ModelArchive, TrainingMeta};
use transtarec::{
    chronological_split, decompose_time, generate_synthetic, parse_dataset, train, DatasetFormat,
    HyperParams, Pattern, RankMode, SyntheticConfig, Task, TimeKey, TrainConfig,
};

#[derive(Parser, Debug)]
#[command(
    name = "transtarec",
    version,
    about = "Time-adaptive next-POI recommendation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model on a check-in file and save it.
    Train(TrainArgs),
    /// Report Top@k of one or two models on the test part of a split.
    Eval(EvalArgs),
    /// Rank POIs for a single (user, previous POI, times) query.
    Recommend(RecommendArgs),
    /// Write a synthetic check-in corpus as generic TSV.
    GenSynthetic(GenArgs),
    /// Print an archive's header, shapes and entity norm statistics.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Check-in file.
    #[arg(long)]
    data: PathBuf,
    /// generic (user, POI, ISO time) or foursquare (8-column TSV).
    #[arg(long, default_value = "generic")]
    format: DatasetFormat,
    /// Share of each user's records, oldest first, used for training.
    #[arg(long, default_value_t = 0.8, value_parser = open_unit)]
    train_fraction: f64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Embedding dimension.
    #[arg(long, default_value_t = 100, value_parser = at_least_one)]
    dim: usize,
    /// Hinge margin.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    margin: f64,
    /// Weight of the orthogonality penalty.
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    soft_c: f64,
    /// Slack of the orthogonality constraint.
    #[arg(long, default_value_t = 0.001, value_parser = positive)]
    epsilon: f64,
    /// SGD learning rate (not from paper).
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    lr: f64,
    /// Passes over the training transitions (not from paper).
    #[arg(long, default_value_t = 50, value_parser = at_least_one)]
    epochs: usize,
    /// Negatives per positive (not from paper).
    #[arg(long, default_value_t = 1, value_parser = at_least_one)]
    neg: usize,
    /// Mini-batch size (not from paper).
    #[arg(long, default_value_t = 64, value_parser = at_least_one)]
    batch: usize,
    /// Seed for initialization, shuffling and negative sampling.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Half-width of the noise on the fusion weights at init.
    #[arg(long, default_value_t = 0.01, value_parser = non_negative)]
    init_scale: f64,
    /// Train the time-blind TransRec ablation.
    #[arg(long)]
    baseline: bool,
    /// Do not rescale user and POI embeddings into the unit ball.
    #[arg(long)]
    no_clamp: bool,
    /// Ranking used by default when the model is evaluated.
    #[arg(long, default_value = "inner")]
    rank_mode: RankMode,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Next,
    Timespec,
    TimespecGap,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model archive; give twice to also print a comparison.
    #[arg(long = "model", required = true, num_args = 1)]
    models: Vec<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "next")]
    task: TaskArg,
    /// Minimum gap for --task timespec-gap.
    #[arg(long, default_value_t = 5.0, value_parser = non_negative)]
    gap_hours: f64,
    /// Comma-separated, strictly increasing cut-offs [default: 1,5,10,20,50,
    /// dropping any above the number of POIs].
    #[arg(long, value_parser = cutoffs)]
    k: Option<Cutoffs>,
    /// inner or neg-l2 [default: the model's own].
    #[arg(long)]
    rank_mode: Option<RankMode>,
    /// Skip test transitions with ids the model has never seen.
    #[arg(long)]
    skip_unknown: bool,
    /// Also write the results as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    user: String,
    #[arg(long)]
    prev_poi: String,
    /// ISO-8601 time of the previous visit.
    #[arg(long)]
    prev_time: String,
    /// ISO-8601 time to recommend for.
    #[arg(long)]
    next_time: String,
    #[arg(long, default_value_t = 10, value_parser = at_least_one)]
    top: usize,
    /// Comma-separated POIs whose ranks are printed as well.
    #[arg(long, value_delimiter = ',')]
    watch: Vec<String>,
    /// inner or neg-l2 [default: the model's own].
    #[arg(long)]
    rank_mode: Option<RankMode>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_parser = at_least_one)]
    users: usize,
    /// At least 4.
    #[arg(long, value_parser = at_least_four)]
    pois: usize,
    /// time-dependent or time-blind.
    #[arg(long)]
    pattern: Pattern,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Records per user, at least 2.
    #[arg(long, default_value_t = 100, value_parser = at_least_two)]
    records: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn at_least(s: &str, min: usize) -> Result<usize, String> {
    let v: usize = s
        .parse()
        .map_err(|_| format!("`{s}` is not a whole number"))?;
    if v < min {
        return Err(format!("must be at least {min}"));
    }
    Ok(v)
}

fn at_least_one(s: &str) -> Result<usize, String> {
    at_least(s, 1)
}

fn at_least_two(s: &str) -> Result<usize, String> {
    at_least(s, 2)
}

fn at_least_four(s: &str) -> Result<usize, String> {
    at_least(s, 4)
}

fn real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

fn positive(s: &str) -> Result<f64, String> {
    real(s).and_then(|v| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err("must be > 0".into())
        }
    })
}

fn non_negative(s: &str) -> Result<f64, String> {
    real(s).and_then(|v| {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err("must be >= 0".into())
        }
    })
}

fn open_unit(s: &str) -> Result<f64, String> {
    real(s).and_then(|v| {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err("must lie strictly between 0 and 1".into())
        }
    })
}

#[derive(Clone, Debug)]
struct Cutoffs(Vec<usize>);

fn cutoffs(s: &str) -> Result<Cutoffs, String> {
    let ks = s
        .split(',')
        .map(|k| at_least(k.trim(), 1))
        .collect::<Result<Vec<_>, _>>()?;
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err("cut-offs must be strictly increasing".into());
    }
    Ok(Cutoffs(ks))
}

/// Failure of a subcommand after argument parsing.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<transtarec::Error> for Failure {
    fn from(e: transtarec::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Recommend(a) => cmd_recommend(a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_corpus(data: &DataArgs) -> anyhow::Result<Corpus> {
    let (corpus, report) = parse_dataset(&data.data, data.format)
        .with_context(|| format!("reading {}", data.data.display()))?;
    if report.malformed > 0 {
        eprintln!(
            "warning: skipped {} malformed of {} lines",
            report.malformed, report.lines
        );
    }
    Ok(corpus)
}

fn load_archive(path: &Path) -> anyhow::Result<ModelArchive> {
    persist::load(path).with_context(|| format!("loading {}", path.display()))
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let corpus = load_corpus(&a.data)?;
    let split = chronological_split(corpus, a.data.train_fraction)?;
    eprintln!(
        "{} users ({} dropped), {} POIs, {} train / {} test records",
        split.users().len(),
        split.dropped_users(),
        split.corpus().n_pois(),
        split.n_train_records(),
        split.n_test_records()
    );
    let hyper = HyperParams {
        dim: a.dim,
        margin: a.margin,
        soft_c: a.soft_c,
        epsilon: a.epsilon,
        rank_mode: a.rank_mode,
        baseline_mode: a.baseline,
    };
    let config = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        neg_samples: a.neg,
        batch_size: a.batch,
        seed: a.seed,
        clamp_entities: !a.no_clamp,
        init_scale: a.init_scale,
    };
    let outcome = train(&split, &hyper, &config, &mut |s| {
        eprintln!(
            "epoch {}/{}  loss {:.6}  hinge {:.6}  soft {:.6}  ({:.2}s)",
            s.epoch + 1,
            config.epochs,
            s.mean_total,
            s.mean_hinge,
            s.mean_soft_constraint,
            s.seconds
        );
    })?;
    let corpus = split.corpus();
    let meta = TrainingMeta {
        config,
        epochs_run: outcome.history.len(),
        final_loss: outcome.history.last().map(|s| s.mean_total),
    };
    let archive = ModelArchive::new(
        outcome.model,
        corpus.users().ids().to_vec(),
        corpus.pois().ids().to_vec(),
        meta,
    )?;
    persist::save(&archive, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!("saved {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if a.models.len() > 2 {
        return Err(Failure::Usage("--model may be given at most twice".into()));
    }
    let task = match a.task {
        TaskArg::Next => Task::Next,
        TaskArg::Timespec => Task::TimeSpecific,
        TaskArg::TimespecGap => Task::TimeSpecificMinGap(a.gap_hours),
    };
    let corpus = load_corpus(&a.data)?;
    let mut reports: Vec<(String, EvalReport)> = Vec::new();
    for path in &a.models {
        let archive = load_archive(path)?;
        let n_pois = archive.pois.len();
        let ks = match &a.k {
            Some(Cutoffs(ks)) => {
                if ks.last().is_some_and(|&k| k > n_pois) {
                    return Err(Failure::Usage(format!(
                        "--k {} exceeds the {n_pois} POIs of {}",
                        ks.last().unwrap(),
                        path.display()
                    )));
                }
                ks.clone()
            }
            None => DEFAULT_KS
                .iter()
                .copied()
                .filter(|&k| k <= n_pois)
                .collect(),
        };
        let mut config = EvalConfig::new(ks, task, a.rank_mode.unwrap_or(archive.hyper.rank_mode));
        config.skip_unknown = a.skip_unknown;
        let aligned = corpus.align_to(&archive.users, &archive.pois)?;
        let split = chronological_split(aligned, a.data.train_fraction)?;
        let report = evaluate(&archive.model(), &split, &config)
            .with_context(|| format!("evaluating {}", path.display()))?;
        let name = path.display().to_string();
        println!("model = {name}");
        print!("{}", report.to_text());
        println!();
        reports.push((name, report));
    }
    if reports.len() == 2 {
        print!("{}", compare(&reports)?);
    }
    if let Some(path) = &a.report {
        write_report_json(path, &reports).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn time_flag(flag: &str, value: &str) -> Result<TimeKey, Failure> {
    let (ts, offset) = parse_iso(value)
        .ok_or_else(|| Failure::Usage(format!("{flag}: `{value}` is not an ISO-8601 time")))?;
    Ok(decompose_time(ts, offset))
}

fn cmd_recommend(a: RecommendArgs) -> CmdResult {
    let prev_time = time_flag("--prev-time", &a.prev_time)?;
    let next_time = time_flag("--next-time", &a.next_time)?;
    let archive = load_archive(&a.model)?;
    let users = archive.user_vocab()?;
    let pois = archive.poi_vocab()?;
    let user = users
        .get(&a.user)
        .ok_or_else(|| anyhow!("unknown user `{}`", a.user))?;
    let poi = |id: &str| pois.get(id).ok_or_else(|| anyhow!("unknown POI `{id}`"));
    let prev = poi(&a.prev_poi)?;
    let watch = a
        .watch
        .iter()
        .map(|id| poi(id))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mode = a.rank_mode.unwrap_or(archive.hyper.rank_mode);

    let model = archive.model();
    let all: Vec<usize> = (0..pois.len()).collect();
    let ranked = model.rank_candidates(user, prev_time, prev, next_time, &all, mode)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "rank\tpoi\tscore")?;
    for (r, (p, score)) in ranked.iter().take(a.top).enumerate() {
        writeln!(out, "{}\t{}\t{score:.6}", r + 1, pois.id(*p))?;
    }
    if !watch.is_empty() {
        writeln!(out, "\nwatched\trank")?;
        for &w in &watch {
            let rank = ranked
                .iter()
                .position(|&(p, _)| p == w)
                .expect("full ranking")
                + 1;
            writeln!(out, "{}\t{rank}", pois.id(w))?;
        }
    }
    Ok(())
}

fn cmd_gen_synthetic(a: GenArgs) -> CmdResult {
    let config = SyntheticConfig {
        n_users: a.users,
        n_pois: a.pois,
        records_per_user: a.records,
        pattern: a.pattern,
        seed: a.seed,
    };
    let corpus = generate_synthetic(&config).map_err(|e| Failure::Usage(e.to_string()))?;
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut out = BufWriter::new(file);
    corpus.write_generic_tsv(&mut out)?;
    out.flush()?;
    eprintln!(
        "wrote {} records for {} users over {} POIs to {}",
        corpus.n_records(),
        corpus.n_users(),
        corpus.n_pois(),
        a.out.display()
    );
    Ok(())
}

fn norm_stats(table: &transtarec::linalg::Table) -> (f64, f64, f64) {
    let norms: Vec<f64> = table.iter_rows().map(norm).collect();
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = norms.iter().copied().fold(0.0, f64::max);
    let mean = norms.iter().sum::<f64>() / norms.len().max(1) as f64;
    (min, mean, max)
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let archive = load_archive(&a.model)?;
    let h = &archive.hyper;
    let m = &archive.meta;
    println!("format_version = {}", archive.format_version);
    println!("dim = {}", h.dim);
    println!("margin = {}", h.margin);
    println!("soft_c = {}", h.soft_c);
    println!("epsilon = {}", h.epsilon);
    println!("rank_mode = {}", h.rank_mode);
    println!("baseline_mode = {}", h.baseline_mode);
    println!("seed = {}", m.config.seed);
    println!("epochs_run = {}", m.epochs_run);
    match m.final_loss {
        Some(l) => println!("final_loss = {l}"),
        None => println!("final_loss = none"),
    }
    println!("users = {}", archive.users.len());
    println!("pois = {}", archive.pois.len());
    for (name, rows, cols, _) in archive.params.tensors() {
        println!("shape {name} = {rows}x{cols}");
    }
    for (name, table) in [
        ("user_emb", &archive.params.user_emb),
        ("poi_emb", &archive.params.poi_emb),
    ] {
        let (min, mean, max) = norm_stats(table);
        println!("norm {name} min = {min:.6} mean = {mean:.6} max = {max:.6}");
    }
    Ok(())
}
