use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qaoa_ddpm::dataset::{self, load_corpus, CorpusConfig};
use qaoa_ddpm::ddpm::{self, build_schedule, Checkpoint, TrainConfig};
use qaoa_ddpm::eval::{self, EvalConfig, INSTANCE_CSV_HEADER, TRACE_CSV_HEADER};
use qaoa_ddpm::graph::{brute_force_maxcut, Graph};
use qaoa_ddpm::Error;

const AFTER_HELP: &str = "\
Exit status: 0 success, 2 usage or invalid configuration, 3 I/O failure,
4 malformed or inconsistent data, 5 internal error or diverged training.

CSV outputs:
  train     LOSS_CSV              epoch,mean_loss
  sample    --out                 gamma1,gamma2,gamma3,beta1,beta2,beta3
  eval      fig6_instances.csv    ";

#[derive(Parser)]
#[command(
    name = "qaoa-ddpm",
    version,
    about = "Diffusion-model initialization of QAOA for Max-Cut"
)]
#[command(after_long_help = long_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn long_help() -> String {
    format!(
        "{AFTER_HELP}{INSTANCE_CSV_HEADER}\n  \
         eval      fig7_convergence.csv  {TRACE_CSV_HEADER}\n  \
         eval      fig8_large.csv        {INSTANCE_CSV_HEADER}\n"
    )
}

#[derive(Args)]
struct Common {
    /// Seed for every random draw; a fresh one is chosen and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file overriding any subset of the default configuration.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a corpus of graphs labelled with optimized QAOA angles.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Number of records.
        #[arg(long)]
        count: Option<usize>,
        /// Corpus path; the manifest is written beside it.
        #[arg(long, default_value = "corpus.jsonl")]
        out: PathBuf,
    },
    /// Train the diffusion model on a corpus.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Checkpoint path.
        #[arg(long, default_value = "model.ckpt")]
        out: PathBuf,
        /// Loss history CSV; defaults to the checkpoint path with `.loss.csv`.
        #[arg(long, value_name = "LOSS_CSV")]
        loss_csv: Option<PathBuf>,
    },
    /// Draw QAOA angle vectors (radians) from a trained model.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.ckpt")]
        checkpoint: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare diffusion and random initializations on fresh test graphs.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "model.ckpt")]
        checkpoint: PathBuf,
        /// Output directory for the report and CSV files.
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        /// Also evaluate eight graphs with 9 to 16 nodes.
        #[arg(long)]
        large: bool,
        /// Feed both arms the same candidates; every defined ratio must be 1.
        #[arg(long)]
        self_compare: bool,
    },
    /// Exact maximum cut of a graph given as {"n": .., "edges": [[i, j], ..]}.
    Oracle {
        #[arg(long)]
        graph: PathBuf,
    },
}

enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter(_) => 2,
        Error::Io { .. } | Error::Persistence { .. } => 3,
        Error::Capacity(_) | Error::Parse { .. } | Error::Version { .. } | Error::Invariant(_) => 4,
        Error::Instance { source, .. } => core_exit_code(source),
        Error::Diverged { .. } | Error::Internal(_) => 5,
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenDataConfig {
    corpus: CorpusConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainCmdConfig {
    diffusion_steps: usize,
    train: TrainConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            diffusion_steps: ddpm::DEFAULT_STEPS,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SampleConfig {
    count: usize,
    seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { count: 16, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalCmdConfig {
    eval: EvalConfig,
    large: EvalConfig,
}

impl Default for EvalCmdConfig {
    fn default() -> Self {
        EvalCmdConfig {
            eval: EvalConfig::default(),
            large: EvalConfig::large(0),
        }
    }
}

/// Defaults overlaid with the config file; also reports whether the file
/// sets the field at `seed_pointer`.
fn load_config<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    seed_pointer: &str,
) -> CliResult<(T, bool)> {
    let Some(path) = path else {
        return Ok((T::default(), false));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    let has_seed = value.pointer(seed_pointer).is_some();
    let cfg = serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    Ok((cfg, has_seed))
}

/// Explicit flag, else the config file's seed, else fresh entropy (printed).
fn resolve_seed(flag: Option<u64>, configured: Option<u64>) -> u64 {
    flag.or(configured).unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn print_json<T: Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("config serializes")
    );
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|source| {
        Error::Io {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn gen_data(common: Common, count: Option<usize>, out: PathBuf) -> CliResult {
    let (mut cfg, has_seed) =
        load_config::<GenDataConfig>(common.config.as_deref(), "/corpus/master_seed")?;
    if let Some(c) = count {
        cfg.corpus.count = c;
    }
    if cfg.corpus.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    if common.print_config {
        print_json(&cfg);
        return Ok(());
    }
    cfg.corpus.master_seed = resolve_seed(common.seed, has_seed.then_some(cfg.corpus.master_seed));
    let total = cfg.corpus.count;
    let corpus = dataset::generate_corpus_to(&cfg.corpus, &out, |done, _| {
        eprint!("\rmined {done}/{total}");
        if done == total {
            eprintln!();
        }
    })?;
    let m = &corpus.manifest;
    println!(
        "wrote {} records to {} (manifest {}): n {}..={}, p [{}, {}], {} starts x {} iterations, master seed {}",
        corpus.records.len(),
        out.display(),
        dataset::manifest_path(&out).display(),
        m.config.n_range[0],
        m.config.n_range[1],
        m.config.p_range[0],
        m.config.p_range[1],
        m.config.n_starts,
        m.config.optimizer.max_iters,
        m.config.master_seed
    );
    Ok(())
}

fn train(
    common: Common,
    corpus_path: PathBuf,
    epochs: Option<usize>,
    out: PathBuf,
    loss_csv: Option<PathBuf>,
) -> CliResult {
    let (mut cfg, has_seed) =
        load_config::<TrainCmdConfig>(common.config.as_deref(), "/train/seed")?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if common.print_config {
        print_json(&cfg);
        return Ok(());
    }
    cfg.train.seed = resolve_seed(common.seed, has_seed.then_some(cfg.train.seed));
    let corpus = load_corpus(&corpus_path)?;
    let data = corpus.training_vectors()?;
    let schedule = build_schedule(cfg.diffusion_steps)?;
    let result = ddpm::train(&data, &schedule, &cfg.train)?;

    let checkpoint = Checkpoint {
        schedule,
        model: result.model,
        optimizer: Some(result.optimizer),
    };
    checkpoint.save(&out)?;
    let mut csv = String::from("epoch,mean_loss\n");
    for (i, l) in result.loss_history.iter().enumerate() {
        writeln!(csv, "{},{l}", i + 1).unwrap();
    }
    let loss_path = loss_csv.unwrap_or_else(|| out.with_extension("loss.csv"));
    write_file(&loss_path, csv)?;
    println!(
        "trained on {} records for {} epochs (final loss {}); wrote {} and {}",
        data.len(),
        result.loss_history.len(),
        result.loss_history.last().copied().unwrap_or(f64::NAN),
        out.display(),
        loss_path.display()
    );
    Ok(())
}

fn sample(
    common: Common,
    checkpoint: PathBuf,
    count: Option<usize>,
    out: Option<PathBuf>,
) -> CliResult {
    let (mut cfg, has_seed) = load_config::<SampleConfig>(common.config.as_deref(), "/seed")?;
    if let Some(c) = count {
        cfg.count = c;
    }
    if cfg.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    if common.print_config {
        print_json(&cfg);
        return Ok(());
    }
    cfg.seed = resolve_seed(common.seed, has_seed.then_some(cfg.seed));
    let ck = Checkpoint::load(&checkpoint)?;
    let xs = ddpm::sample(&ck.model, &ck.schedule, cfg.count, cfg.seed)?;
    let mut csv = String::from("gamma1,gamma2,gamma3,beta1,beta2,beta3\n");
    for x in &xs {
        let p = dataset::denormalize_params(x)?.to_array();
        let cells: Vec<String> = p.iter().map(f64::to_string).collect();
        writeln!(csv, "{}", cells.join(",")).unwrap();
    }
    match out {
        Some(path) => write_file(&path, csv),
        None => std::io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|source| {
                Error::Io {
                    path: "<stdout>".into(),
                    source,
                }
                .into()
            }),
    }
}

fn eval_cmd(
    common: Common,
    checkpoint: PathBuf,
    out: PathBuf,
    large: bool,
    self_compare: bool,
) -> CliResult {
    let (mut cfg, has_seed) = load_config::<EvalCmdConfig>(common.config.as_deref(), "/eval/seed")?;
    if self_compare {
        cfg.eval.self_compare = true;
        cfg.large.self_compare = true;
    }
    if common.print_config {
        print_json(&cfg);
        return Ok(());
    }
    cfg.eval.seed = resolve_seed(common.seed, has_seed.then_some(cfg.eval.seed));
    // The extrapolation set follows the main seed unless configured on its own.
    let large_configured = common.config.is_some() && cfg.large != EvalCmdConfig::default().large;
    if common.seed.is_some() || !large_configured {
        cfg.large.seed = EvalConfig::large(cfg.eval.seed).seed;
    }
    let ck = Checkpoint::load(&checkpoint)?;
    fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.clone(),
        source,
    })?;

    let report = eval::evaluate(&ck.model, &ck.schedule, &cfg.eval)?;
    write_file(&out.join("report.json"), report.to_json())?;
    write_file(&out.join("fig6_instances.csv"), report.instances_csv())?;
    write_file(&out.join("fig7_convergence.csv"), report.traces_csv())?;
    println!("{}", report.summary());
    if large {
        let report = eval::evaluate(&ck.model, &ck.schedule, &cfg.large)?;
        write_file(&out.join("report_large.json"), report.to_json())?;
        write_file(&out.join("fig8_large.csv"), report.instances_csv())?;
        println!("{}", report.summary());
    }
    println!("wrote results to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    n: usize,
    edges: usize,
    max_cut_value: usize,
    witness: String,
    ground_energy: i64,
}

fn oracle(graph: PathBuf) -> CliResult {
    let text = fs::read_to_string(&graph).map_err(|source| Error::Io {
        path: graph.clone(),
        source,
    })?;
    // Edges may be listed in any order or orientation.
    #[derive(Deserialize)]
    struct RawGraph {
        n: usize,
        edges: Vec<[usize; 2]>,
    }
    let raw: RawGraph = serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: graph.display().to_string(),
        message: e.to_string(),
    })?;
    let g = Graph::new(raw.n, raw.edges.into_iter().map(|[i, j]| (i, j))).map_err(|e| {
        Error::Parse {
            context: graph.display().to_string(),
            message: e.to_string(),
        }
    })?;
    let cut = brute_force_maxcut(&g)?;
    print_json(&OracleReport {
        n: g.n(),
        edges: g.num_edges(),
        max_cut_value: cut.max_cut_value,
        witness: cut
            .witness
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect(),
        ground_energy: cut.ground_energy,
    });
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::GenData { common, count, out } => gen_data(common, count, out),
        Command::Train {
            common,
            corpus,
            epochs,
            out,
            loss_csv,
        } => train(common, corpus, epochs, out, loss_csv),
        Command::Sample {
            common,
            checkpoint,
            count,
            out,
        } => sample(common, checkpoint, count, out),
        Command::Eval {
            common,
            checkpoint,
            out,
            large,
            self_compare,
        } => eval_cmd(common, checkpoint, out, large, self_compare),
        Command::Oracle { graph } => oracle(graph),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(core_exit_code(&e))
        }
    }
}
