use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use statemerge::automata::{
    nfa_to_dot, parse_automaton, to_dot, write_dfa, write_nfa, ParsedAutomaton,
};
use statemerge::extraction::MergePolicy;
use statemerge::harness::{
    self, ensure_all_trained, ensure_trained, extraction_strings, fidelity, rng_for,
    ExperimentConfig, LanguageContext, Preset, ResultRow, Stream, TrainedModel,
};
use statemerge::languages::LanguageId;

#[derive(Parser, Debug)]
#[command(
    name = "statemerge",
    version,
    about = "Extract automata from recurrent recognizers by state merging"
)]
struct Cli {
    /// Tomita language 1-7 (default: every configured language).
    #[arg(long, global = true)]
    language: Option<u8>,
    /// Base seed for model initialization, training data and batch order.
    #[arg(long, global = true, env = "STATEMERGE_SEED")]
    seed: Option<u64>,
    /// JSON experiment config; overrides --preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in training scale when no config file is given.
    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Scaled)]
    preset: PresetArg,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "STATEMERGE_THREADS")]
    threads: Option<usize>,
    /// Log at debug level.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Scaled,
    Long,
    Full,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train recognizers and save per-epoch checkpoints and metrics.
    Train,
    /// Extract an automaton by state merging.
    Extract {
        /// Number of strings in the prefix tree.
        #[arg(long)]
        data: Option<usize>,
        /// Similarity tolerance: states merge when cosine > 1 - kappa
        #[arg(long)]
        kappa: Option<f64>,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Extract an automaton with the k-means baseline.
    Baseline {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        data: Option<usize>,
        #[command(flatten)]
        job: JobArgs,
    },
    /// Fidelity of an automaton file against a trained model.
    Eval {
        #[arg(long)]
        dfa: PathBuf,
        #[arg(long)]
        epoch: Option<usize>,
        /// Train the model if no checkpoint exists.
        #[arg(long)]
        train: bool,
    },
    /// Parameter sweeps.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        /// Train missing models first.
        #[arg(long)]
        train: bool,
    },
    /// State merging and k-means on every language and data seed.
    Table2 {
        /// Train missing models first.
        #[arg(long)]
        train: bool,
    },
    /// Render an automaton file as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        dfa: PathBuf,
        /// Output file (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct JobArgs {
    /// Length of the extraction strings.
    #[arg(long)]
    length: Option<usize>,
    /// Seed for sampling the extraction strings.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Checkpoint epoch (default: best on the dev set).
    #[arg(long)]
    epoch: Option<usize>,
    /// Train the model if no checkpoint exists.
    #[arg(long)]
    train: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepKind {
    Data,
    Kappa,
    Epochs,
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => ExperimentConfig::preset(match cli.preset {
            PresetArg::Scaled => Preset::Scaled,
            PresetArg::Long => Preset::Long,
            PresetArg::Full => Preset::Full,
        }),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    if let Some(l) = cli.language {
        LanguageId::new(l)?;
        config.languages = vec![l];
    }
    config.resolve()?;
    Ok(config)
}

fn single_language(cli: &Cli) -> Result<LanguageId> {
    match cli.language {
        Some(l) => Ok(LanguageId::new(l)?),
        None => bail!("this command needs --language"),
    }
}

fn checkpoint(model: &TrainedModel, epoch: Option<usize>) -> Result<&statemerge::rnn::Checkpoint> {
    Ok(match epoch {
        Some(e) => model.at_epoch(e)?,
        None => model.best(),
    })
}

fn print_rows(rows: &[ResultRow]) {
    println!("language,method,seed,epoch,data_count,acc_rnn,acc_gold,merged_size,minimized_size,gold_equivalent");
    for r in rows {
        println!(
            "{},{},{},{},{},{:.4},{:.4},{},{},{}",
            r.language,
            r.method,
            r.seed,
            r.epoch,
            r.data_count,
            r.acc_rnn,
            r.acc_gold,
            r.merged_size,
            r.minimized_size,
            r.gold_equivalent
        );
    }
}

fn write_artifacts(dir: &Path, config: &ExperimentConfig, row: &ResultRow) -> Result<()> {
    harness::write_rows(&dir.join("result.csv"), std::slice::from_ref(row))?;
    config.save_in(dir)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::ExportDot { dfa, output } => {
            let text = std::fs::read_to_string(dfa)
                .with_context(|| format!("reading {}", dfa.display()))?;
            let dot = match parse_automaton(&text)? {
                ParsedAutomaton::Dfa(d) => to_dot(&d),
                ParsedAutomaton::Nfa(n) => nfa_to_dot(&n),
            };
            match output {
                Some(path) => std::fs::write(path, dot)?,
                None => print!("{dot}"),
            }
            return Ok(());
        }
        Command::Train => {
            let config = resolve_config(cli)?;
            for id in config.language_ids() {
                let model = harness::train_language(&config, id)?;
                println!(
                    "{id}: best epoch {} dev accuracy {:.6} ({})",
                    model.best_epoch(),
                    model.best_dev_accuracy(),
                    harness::model_dir(&config, id).display()
                );
            }
        }
        Command::Extract { data, kappa, job } => {
            let mut config = resolve_config(cli)?;
            if let Some(k) = kappa {
                config.extraction.kappa = *k;
                config.extraction.cosine_threshold = None;
            }
            if let Some(n) = data {
                config.extraction.data_count = *n;
            }
            if let Some(l) = job.length {
                config.extraction.string_length = l;
            }
            config.data_seeds = vec![job.data_seed];
            config.resolve()?;
            let id = single_language(cli)?;
            let model = ensure_trained(&config, id, job.train)?;
            let ckpt = checkpoint(&model, job.epoch)?;
            let ext = &config.extraction;
            let strings = extraction_strings(id, job.data_seed, ext.string_length, ext.data_count);
            let ctx = LanguageContext::new(&config, id);
            let policy = MergePolicy::new(ext.kappa)?;
            let (row, report) = harness::run_merge(
                &ctx,
                ckpt,
                job.data_seed,
                &strings,
                ext.string_length,
                &policy,
            )?;
            let dir = config.out_dir.join("extract").join(format!(
                "{id}-seed{}-n{}-kappa{}-epoch{}",
                job.data_seed, ext.data_count, ext.kappa, ckpt.meta.epoch
            ));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("merged.nfa"), write_nfa(&report.merged))?;
            std::fs::write(dir.join("merged.dot"), nfa_to_dot(&report.merged))?;
            std::fs::write(dir.join("minimized.dfa"), write_dfa(&report.minimized))?;
            std::fs::write(dir.join("minimized.dot"), to_dot(&report.minimized))?;
            write_artifacts(&dir, &config, &row)?;
            print_rows(&[row]);
            info!("wrote {}", dir.display());
        }
        Command::Baseline { k, data, job } => {
            let mut config = resolve_config(cli)?;
            if let Some(k) = k {
                config.baseline.k = *k;
            }
            if let Some(n) = data {
                config.extraction.data_count = *n;
            }
            if let Some(l) = job.length {
                config.extraction.string_length = l;
            }
            config.data_seeds = vec![job.data_seed];
            config.resolve()?;
            let id = single_language(cli)?;
            let model = ensure_trained(&config, id, job.train)?;
            let ckpt = checkpoint(&model, job.epoch)?;
            let ext = &config.extraction;
            let strings = extraction_strings(id, job.data_seed, ext.string_length, ext.data_count);
            let ctx = LanguageContext::new(&config, id);
            let mut rng = rng_for(job.data_seed, Stream::KMeans, &[u64::from(id.index())]);
            let (row, ex) = harness::run_kmeans(
                &ctx,
                ckpt,
                job.data_seed,
                &strings,
                ext.string_length,
                config.baseline.k,
                &mut rng,
            )?;
            let dir = config.out_dir.join("baseline").join(format!(
                "{id}-seed{}-n{}-k{}-epoch{}",
                job.data_seed, ext.data_count, config.baseline.k, ckpt.meta.epoch
            ));
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("clusters.dfa"), write_dfa(&ex.raw))?;
            std::fs::write(dir.join("minimized.dfa"), write_dfa(&ex.minimized))?;
            std::fs::write(dir.join("minimized.dot"), to_dot(&ex.minimized))?;
            write_artifacts(&dir, &config, &row)?;
            print_rows(&[row]);
        }
        Command::Eval { dfa, epoch, train } => {
            let config = resolve_config(cli)?;
            let id = single_language(cli)?;
            let text = std::fs::read_to_string(dfa)
                .with_context(|| format!("reading {}", dfa.display()))?;
            let machine = parse_automaton(&text)?.into_dfa()?;
            let model = ensure_trained(&config, id, *train)?;
            let ckpt = checkpoint(&model, *epoch)?;
            let ctx = LanguageContext::new(&config, id);
            let f = fidelity(&machine, &ckpt.model, &ctx.eval)?;
            println!("acc_rnn,acc_gold,prefix_acc_rnn");
            println!("{:.6},{:.6},{:.6}", f.vs_rnn, f.vs_gold, f.prefix_vs_rnn);
        }
        Command::Sweep { kind, train } => {
            let mut config = resolve_config(cli)?;
            if let SweepKind::Kappa = kind {
                if let Some(l) = cli.language {
                    config.sweeps.kappa_language = l;
                }
                config.languages = vec![config.sweeps.kappa_language];
            }
            let models = ensure_all_trained(&config, *train)?;
            let result = match kind {
                SweepKind::Data => harness::sweep_data_size(&config, &models)?,
                SweepKind::Kappa => harness::sweep_kappa(&config, &models)?,
                SweepKind::Epochs => harness::sweep_epochs(&config, &models)?,
            };
            print_rows(&result.rows);
        }
        Command::Table2 { train } => {
            let config = resolve_config(cli)?;
            let models = ensure_all_trained(&config, *train)?;
            let result = harness::reproduce_table2(&config, &models)?;
            println!("language,method,runs,acc_mean_pct,acc_std_pct,size_min,size_max,gold_size,gold_size_runs");
            for s in &result.summary {
                println!(
                    "{},{},{},{:.2},{:.2},{},{},{},{}",
                    s.language,
                    s.method,
                    s.runs,
                    100.0 * s.acc_mean,
                    100.0 * s.acc_std,
                    s.size_min,
                    s.size_max,
                    s.gold_size,
                    s.gold_size_runs
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
