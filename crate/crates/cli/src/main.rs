//! Command-line front end: corpus generation, training, evaluation and
//! scanning.
//!
//! Exit codes: 0 success, 1 runtime failure (including a failing
//! selftest), 2 bad usage or configuration, 3 bad input data or an
//! incompatible model. Errors are reported as one JSON line on stderr.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use buglab::eval::{evaluate, generate_random_bugs, scan_unit};
use buglab::graph::{read_graphs, serialize_graph, write_graphs, CodeGraph, GraphError};
use buglab::lang::{parse, ParseError, SourceUnit};
use buglab::model::{load_checkpoint, save_checkpoint, Checkpoint, ModelError};
use buglab::pipeline::{corpus_functions, CorpusFunction};
use buglab::rewrite::{augment, AugmentationConfig};
use buglab::synth::desk_corpus;
use buglab::train::{build_vocab, write_telemetry, MetaEpochConfig, RunManifest, TrainError, Trainer};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use walkdir::WalkDir;

#[derive(Parser)]
#[command(name = "buglab", version, about = "Self-supervised bug detection and repair for a Python subset")]
struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write graphs of source functions as JSON lines.
    GenCorpus {
        /// Python files or directories.
        inputs: Vec<PathBuf>,
        /// Buggy variants per function; 0 writes only the original graphs.
        #[arg(long, default_value_t = 0)]
        variants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use this many synthetic functions instead of input files.
        #[arg(long)]
        desk: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print a semantics-preserving augmentation of a source file.
    Augment {
        input: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        probability: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Co-train a detector and a selector.
    Train {
        inputs: Vec<PathBuf>,
        /// Output directory for checkpoint, telemetry, manifest and vocabulary.
        #[arg(long)]
        out: PathBuf,
        /// `key=value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Configuration override, `key=value`; may be repeated.
        #[arg(long = "set")]
        overrides: Vec<String>,
        #[arg(long)]
        desk: Option<usize>,
        /// Fraction of functions held out for per-meta-epoch evaluation.
        #[arg(long, default_value_t = 0.2)]
        holdout_fraction: f64,
        #[arg(long, default_value_t = 9)]
        holdout_variants: usize,
    },
    /// Score a graph file and print the metric table.
    Eval {
        graphs: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set")]
        overrides: Vec<String>,
        /// Write the full report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Report likely bugs in source files as JSON lines.
    Scan {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        top_n: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Print the graph of every function in a file.
    GraphDump {
        input: PathBuf,
        #[arg(long)]
        function: Option<String>,
    },
    /// Run the built-in consistency checks.
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Runtime(anyhow::Error),
    Usage(anyhow::Error),
    Input(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Input(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Runtime(_) => "runtime",
            Failure::Usage(_) => "usage",
            Failure::Input(_) => "input",
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Runtime(e) | Failure::Usage(e) | Failure::Input(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    /// Classifies by the innermost library error.
    fn from(e: anyhow::Error) -> Self {
        for cause in e.chain() {
            if cause.is::<ParseError>() || cause.is::<GraphError>() {
                return Failure::Input(e);
            }
            if let Some(m) = cause.downcast_ref::<ModelError>() {
                return match m {
                    ModelError::Io(_) => Failure::Runtime(e),
                    _ => Failure::Input(e),
                };
            }
            if let Some(TrainError::Config(_)) = cause.downcast_ref::<TrainError>() {
                return Failure::Usage(e);
            }
        }
        Failure::Runtime(e)
    }
}

type Outcome<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn note(v: Value) {
    eprintln!("{v}");
}

/// Python files under the given paths, directories walked in name order.
fn source_files(inputs: &[PathBuf]) -> Outcome<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for e in WalkDir::new(p).sort_by_file_name() {
                let e = e.with_context(|| format!("walking {}", p.display()))?;
                if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "py") {
                    out.push(e.into_path());
                }
            }
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Failure::Input(anyhow!("no such file or directory: {}", p.display())));
        }
    }
    Ok(out)
}

/// Parsed units of the inputs. Files outside the supported subset are
/// skipped with a note on stderr.
fn load_units(inputs: &[PathBuf]) -> Outcome<Vec<(String, SourceUnit)>> {
    let mut units = Vec::new();
    for path in source_files(inputs)? {
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        match parse(&text) {
            Ok(u) => units.push((path.display().to_string(), u)),
            Err(e) => note(json!({ "skipped": path.display().to_string(), "reason": e.to_string() })),
        }
    }
    Ok(units)
}

fn load_functions(inputs: &[PathBuf], desk: Option<usize>, seed: u64) -> Outcome<Vec<CorpusFunction>> {
    let units = match desk {
        Some(n) => desk_corpus(n, seed)
            .into_iter()
            .map(|f| Ok((f.path, parse(&f.text).context("synthetic corpus")?)))
            .collect::<anyhow::Result<Vec<_>>>()?,
        None if inputs.is_empty() => return Err(usage("no input files given (or use --desk N)")),
        None => load_units(inputs)?,
    };
    let functions: Vec<CorpusFunction> = units.iter().flat_map(|(o, u)| corpus_functions(o, u)).collect();
    if functions.is_empty() {
        return Err(Failure::Input(anyhow!("no functions found in the inputs")));
    }
    Ok(functions)
}

fn output(path: &Option<PathBuf>) -> Outcome<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Defaults, then the `key=value` file, then the overrides.
fn load_config(file: Option<&Path>, overrides: &[String]) -> Outcome<MetaEpochConfig> {
    let mut map = match serde_json::to_value(MetaEpochConfig::default()).context("default configuration")? {
        Value::Object(m) => m,
        _ => unreachable!("configuration serialises to an object"),
    };
    let mut lines: Vec<(String, String)> = Vec::new();
    if let Some(f) = file {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display())).map_err(Failure::Usage)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                lines.push((format!("{}:{}", f.display(), i + 1), line.to_string()));
            }
        }
    }
    lines.extend(overrides.iter().map(|o| ("--set".to_string(), o.clone())));
    for (at, line) in lines {
        let (k, v) = line.split_once('=').ok_or_else(|| usage(format!("{at}: expected key=value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        let Some(slot) = map.get_mut(k) else {
            return Err(usage(format!("{at}: unknown configuration key {k:?}")));
        };
        *slot = serde_json::from_str(v).map_err(|_| usage(format!("{at}: {k} needs a number, got {v:?}")))?;
    }
    let cfg: MetaEpochConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| usage(format!("invalid configuration: {e}")))?;
    cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
    Ok(cfg)
}

fn gen_corpus(inputs: &[PathBuf], variants: usize, seed: u64, desk: Option<usize>, out: &Option<PathBuf>) -> Outcome<()> {
    let functions = load_functions(inputs, desk, seed)?;
    let graphs: Vec<CodeGraph> = if variants == 0 {
        functions.iter().map(|f| f.graph(None)).collect()
    } else {
        generate_random_bugs(&functions, variants, seed).context("injecting bugs")?
    };
    let mut w = output(out)?;
    write_graphs(&mut w, &graphs).context("writing graphs")?;
    w.flush().context("writing graphs")?;
    note(json!({ "functions": functions.len(), "graphs": graphs.len() }));
    Ok(())
}

fn augment_file(input: &Path, probability: f64, seed: u64, out: &Option<PathBuf>) -> Outcome<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let unit = parse(&text).with_context(|| input.display().to_string())?;
    let cfg = AugmentationConfig::uniform(probability, seed);
    let augmented = augment(&unit, &cfg).map_err(|e| usage(e.to_string()))?;
    let mut w = output(out)?;
    w.write_all(augmented.text.as_bytes()).context("writing output")?;
    w.flush().context("writing output")?;
    Ok(())
}

fn train(
    inputs: &[PathBuf],
    out: &Path,
    cfg: MetaEpochConfig,
    desk: Option<usize>,
    holdout_fraction: f64,
    holdout_variants: usize,
) -> Outcome<()> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(usage("holdout fraction must lie in [0, 1)"));
    }
    let functions = load_functions(inputs, desk, cfg.seed)?;
    let split = functions.len() - (functions.len() as f64 * holdout_fraction).round() as usize;
    let (train_fns, held) = functions.split_at(split.max(1));
    let holdout = generate_random_bugs(held, holdout_variants, cfg.seed).context("building the held-out set")?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let vocab = build_vocab(train_fns, cfg.vocab_size);
    let manifest = RunManifest::new(&cfg, train_fns, holdout.len(), &vocab);
    manifest.write(&out.join("manifest.json")).context("writing manifest")?;
    let mut vf = BufWriter::new(File::create(out.join("vocab.txt")).context("writing vocabulary")?);
    vocab.write(&mut vf).context("writing vocabulary")?;
    vf.flush().context("writing vocabulary")?;

    let checkpoint = |t: &Trainer| Checkpoint { vocab: t.vocab.clone(), detector: t.detector.clone(), selector: Some(t.selector.clone()) };
    let mut trainer = Trainer::new(cfg, vocab).context("setting up training")?;
    let mut snapshot = |m: usize, t: &Trainer| -> Result<(), TrainError> {
        save_checkpoint(&out.join(format!("snapshot-{m:03}.json")), &checkpoint(t))?;
        Ok(())
    };
    let rows = trainer.run(train_fns, &holdout, &mut snapshot).context("training")?;
    for r in &rows {
        note(serde_json::to_value(r).context("telemetry")?);
    }
    write_telemetry(&out.join("telemetry.csv"), &rows).context("writing telemetry")?;
    save_checkpoint(&out.join("checkpoint.json"), &checkpoint(&trainer)).context("writing checkpoint")?;
    Ok(())
}

fn eval(graphs: &Path, checkpoint: &Path, d: Option<usize>, report: &Option<PathBuf>) -> Outcome<()> {
    let ck = load_checkpoint(checkpoint, d).with_context(|| format!("loading {}", checkpoint.display()))?;
    let f = File::open(graphs).with_context(|| format!("opening {}", graphs.display()))?;
    let gs = read_graphs(BufReader::new(f)).with_context(|| format!("reading {}", graphs.display()))?;
    let (_, m) = evaluate(&ck.detector, &ck.vocab, &gs).context("evaluating")?;
    if let Some(p) = report {
        let w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
        serde_json::to_writer_pretty(w, &m).context("writing report")?;
    }
    print!("{}", m.render_table());
    Ok(())
}

fn scan(inputs: &[PathBuf], checkpoint: &Path, top_n: usize, threshold: f64) -> Outcome<()> {
    let ck = load_checkpoint(checkpoint, None).with_context(|| format!("loading {}", checkpoint.display()))?;
    let mut w = output(&None)?;
    for (file, unit) in load_units(inputs)? {
        for warning in scan_unit(&ck.detector, &ck.vocab, &file, &unit, top_n, threshold).context("scanning")? {
            serde_json::to_writer(&mut w, &warning).context("writing warnings")?;
            w.write_all(b"\n").context("writing warnings")?;
        }
    }
    w.flush().context("writing warnings")?;
    Ok(())
}

fn graph_dump(input: &Path, function: Option<&str>) -> Outcome<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let unit = parse(&text).with_context(|| input.display().to_string())?;
    let origin = input.display().to_string();
    let mut w = output(&None)?;
    let mut found = false;
    for f in corpus_functions(&origin, &unit) {
        if function.is_some_and(|n| n != f.name()) {
            continue;
        }
        found = true;
        w.write_all(&serialize_graph(&f.graph(None))).context("writing graph")?;
        w.write_all(b"\n").context("writing graph")?;
    }
    w.flush().context("writing graph")?;
    match (found, function) {
        (false, Some(n)) => Err(Failure::Input(anyhow!("no function named {n:?} in {origin}"))),
        _ => Ok(()),
    }
}

fn selftest() -> Outcome<()> {
    let checks = buglab::selftest::run_all();
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(Failure::Runtime(anyhow!("failed checks: {}", failed.join(", "))));
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    if cli.workers == 0 {
        return Err(usage("workers must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global().context("starting worker threads")?;
    match cli.command {
        Command::GenCorpus { inputs, variants, seed, desk, out } => gen_corpus(&inputs, variants, seed, desk, &out),
        Command::Augment { input, probability, seed, out } => augment_file(&input, probability, seed, &out),
        Command::Train { inputs, out, config, overrides, desk, holdout_fraction, holdout_variants } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            train(&inputs, &out, cfg, desk, holdout_fraction, holdout_variants)
        }
        Command::Eval { graphs, checkpoint, config, overrides, report } => {
            // only an explicitly configured d is checked against the checkpoint
            let d = if config.is_some() || !overrides.is_empty() {
                Some(load_config(config.as_deref(), &overrides)?.d)
            } else {
                None
            };
            eval(&graphs, &checkpoint, d, &report)
        }
        Command::Scan { inputs, checkpoint, top_n, threshold } => {
            if inputs.is_empty() {
                return Err(usage("no input files given"));
            }
            scan(&inputs, &checkpoint, top_n, threshold)
        }
        Command::GraphDump { input, function } => graph_dump(&input, function.as_deref()),
        Command::Selftest => selftest(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            note(json!({ "error": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            note(json!({ "error": f.kind(), "message": format!("{:#}", f.error()) }));
            ExitCode::from(f.code())
        }
    }
}
