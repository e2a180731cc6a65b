use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rareword::corpus::{Corpus, Side, DEFAULT_VOCAB_SIZE};
use rareword::eval::BleuOptions;
use rareword::markers::strip_subword_markers;
use rareword::nmt::{OutputHead, TrainingConfig};
use rareword::pipeline::{self, ops, PipelineConfig};
use rareword::saa::{SaaOptions, DEFAULT_MIN_STEM_LEN, DEFAULT_THRESHOLD};
use rareword::{io, Error, Result};

/// Rare-word preprocessing, NMT training, translation and BLEU scoring.
#[derive(Parser, Debug)]
#[command(name = "rareword", version)]
struct Cli {
    /// Seed for every random choice (overrides the pipeline config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Pipeline config for `pipeline`, training config for `train`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SideArg {
    Source,
    Target,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Side {
        match s {
            SideArg::Source => Side::Source,
            SideArg::Target => Side::Target,
        }
    }
}

#[derive(Args, Debug)]
struct Io {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "source")]
    side: SideArg,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a frequency-ranked vocabulary.
    Vocab {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = DEFAULT_VOCAB_SIZE)]
        size: usize,
    },
    /// Separate affixes of rare words.
    Saa {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        vocab: PathBuf,
        /// Affix file (`prefix<TAB>un` lines); built-in English list by default.
        #[arg(long)]
        affixes: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: u64,
        #[arg(long, default_value_t = DEFAULT_MIN_STEM_LEN)]
        min_stem_len: usize,
    },
    /// Learn a synonym table for rare words from word pairs.
    LswLearn {
        #[arg(long)]
        vocab: PathBuf,
        /// `word<TAB>word` pairs.
        #[arg(long)]
        synonyms: PathBuf,
        /// Texts whose rare words get entries; repeatable.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        threshold: u64,
        #[arg(long, value_enum, default_value = "source")]
        side: SideArg,
    },
    /// Replace rare words by synonyms.
    LswApply {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 1)]
        n_best: usize,
        /// Where to write the `index<TAB>sentence` variants when n-best > 1.
        #[arg(long)]
        variants: Option<PathBuf>,
    },
    /// Learn BPE merges.
    BpeLearn {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = rareword::bpe::DEFAULT_MERGES)]
        merges: usize,
    },
    /// Segment text with learned BPE merges.
    BpeApply {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        merges: PathBuf,
    },
    /// Join `@@` pieces back into words.
    StripMarkers {
        #[command(flatten)]
        io: Io,
    },
    /// Train a translation model.
    Train(TrainArgs),
    /// Translate with a trained model.
    Translate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required_unless_present = "variants", conflicts_with = "variants")]
        input: Option<PathBuf>,
        /// Synonym variants from `lsw-apply`; the best-scoring one is kept.
        #[arg(long)]
        variants: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        beam: usize,
    },
    /// Corpus BLEU in multi-bleu format.
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Score the hypotheses as given, without joining `@@` pieces.
        #[arg(long)]
        keep_markers: bool,
        /// Add-one smoothing for 2- to 4-grams.
        #[arg(long)]
        smoothing: bool,
    },
    /// Run the stages of a pipeline config.
    Pipeline {
        /// Config file (alternative to --config).
        file: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, requires = "dev_tgt")]
    dev_src: Option<PathBuf>,
    #[arg(long, requires = "dev_src")]
    dev_tgt: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    /// Per-epoch loss log.
    #[arg(long)]
    log: PathBuf,
    /// baseline, ffnn_residual or simplified.
    #[arg(long)]
    head: Option<OutputHead>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    embedding: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// 512-unit layers instead of the small default.
    #[arg(long)]
    large: bool,
}

fn training_config(args: &TrainArgs, file: Option<&Path>, seed: Option<u64>) -> Result<TrainingConfig> {
    let mut cfg = match file {
        Some(p) => {
            let text = String::from_utf8(io::read_bytes(p)?)
                .map_err(|_| Error::Config(format!("{}: invalid UTF-8", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None if args.large => TrainingConfig::large(),
        None => TrainingConfig::default(),
    };
    if let Some(h) = args.head {
        cfg.head = h;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    set!(layers, hidden, embedding, epochs, batch_size, learning_rate);
    cfg.seed = seed.unwrap_or(1);
    cfg.validate()?;
    Ok(cfg)
}

fn load_pipeline(file: Option<&Path>, cli: &Cli) -> Result<PipelineConfig> {
    let path = file
        .or(cli.config.as_deref())
        .ok_or_else(|| Error::Config("pipeline needs a config file".into()))?;
    if !path.is_file() {
        return Err(Error::Config(format!("{}: no such config file", path.display())));
    }
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

/// Files the command will create.
fn outputs(cmd: &Command) -> Vec<PathBuf> {
    match cmd {
        Command::Vocab { io, .. }
        | Command::Saa { io, .. }
        | Command::BpeLearn { io, .. }
        | Command::BpeApply { io, .. }
        | Command::StripMarkers { io } => vec![io.output.clone()],
        Command::LswLearn { output, .. } => vec![output.clone()],
        Command::LswApply { io, variants, .. } => std::iter::once(io.output.clone()).chain(variants.clone()).collect(),
        Command::Train(a) => vec![a.model.clone(), a.log.clone()],
        Command::Translate { output, .. } => vec![output.clone()],
        Command::Bleu { output, .. } => output.iter().cloned().collect(),
        Command::Pipeline { .. } => Vec::new(),
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Vocab { io, size } => {
            let v = ops::vocab(&io.input, io.side.into(), *size, &io.output)?;
            log::info!("{} words kept", v.len());
        }
        Command::Saa {
            io,
            vocab,
            affixes,
            threshold,
            min_stem_len,
        } => {
            let opts = SaaOptions {
                threshold: *threshold,
                min_stem_len: *min_stem_len,
            };
            let r = ops::saa(vocab, affixes.as_deref(), &opts, &io.input, io.side.into(), &io.output)?;
            log::info!("{} word types split, {} tokens", r.types, r.tokens);
        }
        Command::LswLearn {
            vocab,
            synonyms,
            input,
            output,
            threshold,
            side,
        } => {
            let inputs: Vec<&Path> = input.iter().map(PathBuf::as_path).collect();
            let t = ops::lsw_learn(vocab, synonyms, &inputs, (*side).into(), *threshold, output)?;
            log::info!("{} words with synonyms", t.len());
        }
        Command::LswApply {
            io,
            table,
            n_best,
            variants,
        } => {
            let c = ops::lsw_apply(
                table,
                &io.input,
                io.side.into(),
                &io.output,
                *n_best,
                variants.as_deref(),
            )?;
            log::info!("{} tokens replaced ({} types)", c.tokens, c.types);
        }
        Command::BpeLearn { io, merges } => {
            let m = ops::bpe_learn_file(&io.input, io.side.into(), *merges, &io.output)?;
            log::info!("{} merges learned", m.len());
        }
        Command::BpeApply { io, merges } => ops::bpe_apply_file(merges, &io.input, io.side.into(), &io.output)?,
        Command::StripMarkers { io } => {
            strip_subword_markers(&Corpus::load(&io.input, io.side.into())?)?.save(&io.output)?
        }
        Command::Train(args) => {
            let cfg = training_config(args, cli.config.as_deref(), cli.seed)?;
            let heldout = args.dev_src.as_deref().zip(args.dev_tgt.as_deref());
            let log = ops::train_files(
                &ops::TrainPaths {
                    src: &args.src,
                    tgt: &args.tgt,
                    heldout,
                    model: &args.model,
                    log: &args.log,
                },
                &cfg,
            )?;
            if let Some(last) = log.epochs.last() {
                log::info!("final loss {:.4} (held-out {:.4})", last.train_loss, last.heldout_loss);
            }
        }
        Command::Translate {
            model,
            input,
            variants,
            output,
            beam,
        } => {
            let source = match (input, variants) {
                (Some(p), _) => ops::TranslateInput::Text(p),
                (None, Some(v)) => ops::TranslateInput::Variants(v),
                (None, None) => unreachable!("clap requires one of them"),
            };
            ops::translate_file(model, source, *beam, output)?;
        }
        Command::Bleu {
            hyp,
            reference,
            output,
            keep_markers,
            smoothing,
        } => {
            let opts = BleuOptions {
                add_one_smoothing: *smoothing,
            };
            let r = ops::bleu_files(hyp, reference, !keep_markers, opts, output.as_deref())?;
            println!("{r}");
        }
        Command::Pipeline { file } => {
            let cfg = load_pipeline(file.as_deref(), cli)?;
            if cfg.stages.is_empty() {
                cfg.validate()?;
                log::info!("no stages; config is valid");
                return Ok(());
            }
            if let Some(n) = cfg.threads {
                set_threads(n)?;
            }
            let summary = pipeline::run(&cfg)?;
            print!("{}", summary.to_tsv());
        }
    }
    Ok(())
}

fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("--threads must be positive".into()));
    }
    // A second call (pipeline config after --threads) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();

    if let Some(n) = cli.threads {
        if let Err(e) = set_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    }

    let fresh: Vec<PathBuf> = outputs(&cli.command).into_iter().filter(|p| !p.exists()).collect();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            for p in &fresh {
                let _ = std::fs::remove_file(p);
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
