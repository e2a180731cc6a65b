//! Declarative experiment runner.
//!
//! A pipeline is a TOML document naming the data splits and a list of
//! stages that run in order. Every stage writes its artifacts to its own
//! directory `NN-kind/` under `output_dir`, reading the texts left by the
//! stages before it:
//!
//! ```toml
//! seed = 1
//! output_dir = "runs/en-vi"
//!
//! [data]
//! train_src = "train.en"
//! train_tgt = "train.vi"
//! test_src = "tst2013.en"
//! test_tgt = "tst2013.vi"
//!
//! [[stage]]
//! kind = "vocab"
//!
//! [[stage]]
//! kind = "saa"
//!
//! [[stage]]
//! kind = "train"
//! name = "+SAA"
//! [stage.model]
//! head = "simplified"
//! epochs = 10
//!
//! [[stage]]
//! kind = "translate"
//!
//! [[stage]]
//! kind = "bleu"
//! ```
//!
//! Relative paths are resolved against the config file's directory. Besides
//! the stage directories the run writes `summary.tsv` and, when the matching
//! stages ran, `saa_counts.tsv` and `lsw_counts.tsv`.

pub mod ops;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::corpus::{Side, DEFAULT_VOCAB_SIZE};
use crate::error::{Error, Result};
use crate::eval::BleuOptions;
use crate::io;
use crate::nmt::decode::MAX_BEAM;
use crate::nmt::TrainingConfig;
use crate::report::SplitCounts;
use crate::saa::{SaaOptions, DEFAULT_MIN_STEM_LEN, DEFAULT_THRESHOLD as SAA_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sides {
    Source,
    Target,
    Both,
}

impl Sides {
    fn sides(self) -> &'static [Side] {
        match self {
            Sides::Source => &[Side::Source],
            Sides::Target => &[Side::Target],
            Sides::Both => &[Side::Source, Side::Target],
        }
    }
}

fn ext(side: Side) -> &'static str {
    match side {
        Side::Source => "src",
        Side::Target => "tgt",
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train_src: Option<PathBuf>,
    pub train_tgt: Option<PathBuf>,
    pub dev_src: Option<PathBuf>,
    pub dev_tgt: Option<PathBuf>,
    pub test_src: Option<PathBuf>,
    pub test_tgt: Option<PathBuf>,
}

impl DataConfig {
    fn pair(&self, split: Split) -> (Option<&PathBuf>, Option<&PathBuf>) {
        match split {
            Split::Train => (self.train_src.as_ref(), self.train_tgt.as_ref()),
            Split::Dev => (self.dev_src.as_ref(), self.dev_tgt.as_ref()),
            Split::Test => (self.test_src.as_ref(), self.test_tgt.as_ref()),
        }
    }

    fn pair_mut(&mut self, split: Split) -> (&mut Option<PathBuf>, &mut Option<PathBuf>) {
        match split {
            Split::Train => (&mut self.train_src, &mut self.train_tgt),
            Split::Dev => (&mut self.dev_src, &mut self.dev_tgt),
            Split::Test => (&mut self.test_src, &mut self.test_tgt),
        }
    }

    /// Splits with both sides given.
    pub fn splits(&self) -> Vec<Split> {
        Split::ALL
            .into_iter()
            .filter(|&s| matches!(self.pair(s), (Some(_), Some(_))))
            .collect()
    }

    fn path(&self, split: Split, side: Side) -> Option<&PathBuf> {
        let (s, t) = self.pair(split);
        match side {
            Side::Source => s,
            Side::Target => t,
        }
    }
}

fn default_vocab_size() -> usize {
    DEFAULT_VOCAB_SIZE
}
fn default_both() -> Sides {
    Sides::Both
}
fn default_source() -> Side {
    Side::Source
}
fn default_saa_threshold() -> u64 {
    SAA_THRESHOLD
}
fn default_min_stem() -> usize {
    DEFAULT_MIN_STEM_LEN
}
fn default_one() -> usize {
    1
}
fn default_merges() -> usize {
    crate::bpe::DEFAULT_MERGES
}
fn default_test() -> Split {
    Split::Test
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Stage {
    /// Frequency-ranked vocabularies of the current training texts.
    Vocab {
        #[serde(default = "default_both")]
        side: Sides,
        #[serde(default = "default_vocab_size")]
        size: usize,
    },
    /// Affix separation on every split of one side.
    Saa {
        #[serde(default = "default_source")]
        side: Side,
        /// Affix file; the built-in English inventory when absent.
        affixes: Option<PathBuf>,
        #[serde(default = "default_saa_threshold")]
        threshold: u64,
        #[serde(default = "default_min_stem")]
        min_stem_len: usize,
    },
    /// Synonym replacement on every split of one side.
    Lsw {
        #[serde(default = "default_source")]
        side: Side,
        synonyms: PathBuf,
        #[serde(default)]
        threshold: u64,
        /// With more than one, dev and test also get variant files that the
        /// translate stage rescores.
        #[serde(default = "default_one")]
        n_best: usize,
    },
    /// BPE learned on the training text of each side, applied to all splits.
    Bpe {
        #[serde(default = "default_both")]
        side: Sides,
        #[serde(default = "default_merges")]
        merges: usize,
    },
    Train {
        /// System label used in the summary; the head name when absent.
        name: Option<String>,
        #[serde(default)]
        model: TrainingConfig,
    },
    Translate {
        #[serde(default = "default_test")]
        split: Split,
        #[serde(default = "default_one")]
        beam: usize,
    },
    /// Scores the latest translation of `split` against its original
    /// reference text.
    Bleu {
        #[serde(default = "default_test")]
        split: Split,
        #[serde(default)]
        smoothing: bool,
    },
}

impl Stage {
    pub fn kind(&self) -> &'static str {
        match self {
            Stage::Vocab { .. } => "vocab",
            Stage::Saa { .. } => "saa",
            Stage::Lsw { .. } => "lsw",
            Stage::Bpe { .. } => "bpe",
            Stage::Train { .. } => "train",
            Stage::Translate { .. } => "translate",
            Stage::Bleu { .. } => "bleu",
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("pipeline-out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default, rename = "stage")]
    pub stages: Vec<Stage>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(io::read_bytes(path)?)
            .map_err(|_| Error::Config(format!("{}: invalid UTF-8", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for split in Split::ALL {
            let (s, t) = self.data.pair_mut(split);
            s.as_mut().map(fix);
            t.as_mut().map(fix);
        }
        for stage in &mut self.stages {
            match stage {
                Stage::Saa { affixes: Some(p), .. } => fix(p),
                Stage::Lsw { synonyms, .. } => fix(synonyms),
                _ => {}
            }
        }
    }

    /// Checks data paths, referenced files, stage parameters and stage order.
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, kind: &str, msg: String| Err(Error::Config(format!("stage {} ({kind}): {msg}", i + 1)));
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        for split in Split::ALL {
            match self.data.pair(split) {
                (Some(_), None) | (None, Some(_)) => {
                    return Err(Error::Config(format!(
                        "data: {split} needs both a source and a target file"
                    )))
                }
                _ => {}
            }
        }
        for split in self.data.splits() {
            for side in [Side::Source, Side::Target] {
                let p = self.data.path(split, side).expect("checked above");
                if !p.is_file() {
                    return Err(Error::Config(format!("data: {} does not exist", p.display())));
                }
            }
        }
        if self.stages.is_empty() {
            return Ok(());
        }
        if !self.data.splits().contains(&Split::Train) {
            return Err(Error::Config("data: train_src and train_tgt are required".into()));
        }

        let mut vocab = [false, false];
        // no model yet / model trained on the current texts / texts changed since
        #[derive(PartialEq)]
        enum ModelState {
            None,
            Fresh,
            Stale,
        }
        let mut model = ModelState::None;
        let mut translated: Vec<Split> = Vec::new();
        let side_idx = |s: Side| usize::from(s == Side::Target);

        for (i, stage) in self.stages.iter().enumerate() {
            let kind = stage.kind();
            match stage {
                Stage::Vocab { side, size } => {
                    if *size == 0 {
                        return bad(i, kind, "size must be positive".into());
                    }
                    for s in side.sides() {
                        vocab[side_idx(*s)] = true;
                    }
                }
                Stage::Saa {
                    side,
                    affixes,
                    min_stem_len,
                    ..
                } => {
                    if !vocab[side_idx(*side)] {
                        return bad(
                            i,
                            kind,
                            format!("needs an earlier vocab stage for the {} side", ext(*side)),
                        );
                    }
                    if let Some(p) = affixes {
                        if !p.is_file() {
                            return bad(i, kind, format!("{} does not exist", p.display()));
                        }
                    }
                    if *min_stem_len == 0 {
                        return bad(i, kind, "min_stem_len must be positive".into());
                    }
                }
                Stage::Lsw {
                    side, synonyms, n_best, ..
                } => {
                    if !vocab[side_idx(*side)] {
                        return bad(
                            i,
                            kind,
                            format!("needs an earlier vocab stage for the {} side", ext(*side)),
                        );
                    }
                    if !synonyms.is_file() {
                        return bad(i, kind, format!("{} does not exist", synonyms.display()));
                    }
                    if *n_best == 0 {
                        return bad(i, kind, "n_best must be at least 1".into());
                    }
                }
                Stage::Bpe { merges, .. } => {
                    if *merges == 0 {
                        return bad(i, kind, "merges must be positive".into());
                    }
                }
                Stage::Train { model: cfg, .. } => {
                    cfg.validate().or_else(|e| bad(i, kind, e.to_string()))?;
                    if cfg.head == crate::nmt::OutputHead::Simplified && cfg.embedding != cfg.hidden {
                        return bad(i, kind, "the simplified head needs embedding == hidden".into());
                    }
                    if cfg.layers == 0 || cfg.hidden == 0 || cfg.embedding == 0 {
                        return bad(i, kind, "layers, hidden and embedding must be positive".into());
                    }
                }
                Stage::Translate { split, beam } => {
                    if !self.data.splits().contains(split) {
                        return bad(i, kind, format!("no {split} data configured"));
                    }
                    if *beam == 0 || *beam > MAX_BEAM {
                        return bad(i, kind, format!("beam must be in 1..={MAX_BEAM}"));
                    }
                    match model {
                        ModelState::None => return bad(i, kind, "needs an earlier train stage".into()),
                        ModelState::Stale => {
                            return bad(
                                i,
                                kind,
                                "the texts changed after the last train stage; train again first".into(),
                            )
                        }
                        ModelState::Fresh => {}
                    }
                }
                Stage::Bleu { split, .. } => {
                    if !translated.contains(split) {
                        return bad(i, kind, format!("needs an earlier translate stage for {split}"));
                    }
                }
            }
            match stage {
                Stage::Saa { .. } | Stage::Lsw { .. } | Stage::Bpe { .. } => {
                    if model == ModelState::Fresh {
                        model = ModelState::Stale;
                    }
                }
                Stage::Train { .. } => {
                    model = ModelState::Fresh;
                    translated.clear();
                }
                Stage::Translate { split, .. } => translated.push(*split),
                _ => {}
            }
        }
        Ok(())
    }
}

/// One line of `summary.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub stage: String,
    pub kind: &'static str,
    pub system: Option<String>,
    pub bleu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
}

impl RunSummary {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("stage\tkind\tsystem\tbleu\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.stage,
                r.kind,
                r.system.as_deref().unwrap_or("-"),
                r.bleu.map_or("-".to_owned(), |b| format!("{b:.2}"))
            ));
        }
        out
    }
}

/// Paths of the current texts and models while the pipeline runs.
struct State {
    texts: BTreeMap<(Split, usize), PathBuf>,
    vocab: [Option<PathBuf>; 2],
    model: Option<(PathBuf, String)>,
    variants: BTreeMap<Split, PathBuf>,
    hyps: BTreeMap<Split, (PathBuf, String)>,
    saa_counts: Vec<(String, Vec<usize>, Vec<usize>)>,
    lsw_counts: Vec<(String, Vec<usize>, Vec<usize>)>,
}

fn side_index(side: Side) -> usize {
    usize::from(side == Side::Target)
}

/// Runs all stages. An empty stage list only validates and writes nothing.
pub fn run(config: &PipelineConfig) -> Result<RunSummary> {
    config.validate()?;
    if config.stages.is_empty() {
        return Ok(RunSummary::default());
    }
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let splits = config.data.splits();
    let mut state = State {
        texts: BTreeMap::new(),
        vocab: [None, None],
        model: None,
        variants: BTreeMap::new(),
        hyps: BTreeMap::new(),
        saa_counts: Vec::new(),
        lsw_counts: Vec::new(),
    };
    for &split in &splits {
        for side in [Side::Source, Side::Target] {
            let p = config.data.path(split, side).expect("validated").clone();
            state.texts.insert((split, side_index(side)), p);
        }
    }

    let mut summary = RunSummary::default();
    for (i, stage) in config.stages.iter().enumerate() {
        let name = format!("{:02}-{}", i + 1, stage.kind());
        let dir = out.join(&name);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        log::info!("stage {name}");
        match run_stage(config, stage, &name, &dir, &splits, &mut state) {
            Ok(row) => summary.rows.push(row),
            Err(e) => {
                let _ = fs::remove_dir_all(&dir);
                return Err(e);
            }
        }
    }

    let labels: Vec<&str> = splits.iter().map(|s| s.name()).collect();
    for (file, rows) in [
        ("saa_counts.tsv", &state.saa_counts),
        ("lsw_counts.tsv", &state.lsw_counts),
    ] {
        let path = out.join(file);
        if rows.is_empty() {
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
            continue;
        }
        let mut table = SplitCounts::new(labels.iter().copied());
        let prefix = rows.len() > 1;
        for (stage, types, tokens) in rows {
            let label = |l: &str| if prefix { format!("{stage}:{l}") } else { l.to_owned() };
            table.push_row(label("word_types"), types.clone())?;
            table.push_row(label("word_tokens"), tokens.clone())?;
        }
        table.save(&path)?;
    }
    io::write_atomic(&out.join("summary.tsv"), summary.to_tsv().as_bytes())?;
    Ok(summary)
}

fn run_stage(
    config: &PipelineConfig,
    stage: &Stage,
    name: &str,
    dir: &Path,
    splits: &[Split],
    state: &mut State,
) -> Result<SummaryRow> {
    let mut row = SummaryRow {
        stage: name.to_owned(),
        kind: stage.kind(),
        system: None,
        bleu: None,
    };
    let text = |state: &State, split: Split, side: Side| state.texts[&(split, side_index(side))].clone();
    let target = |split: Split, side: Side| dir.join(format!("{split}.{}", ext(side)));

    match stage {
        Stage::Vocab { side, size } => {
            for &s in side.sides() {
                let path = dir.join(format!("vocab.{}.tsv", ext(s)));
                ops::vocab(&text(state, Split::Train, s), s, *size, &path)?;
                state.vocab[side_index(s)] = Some(path);
            }
        }
        Stage::Saa {
            side,
            affixes,
            threshold,
            min_stem_len,
        } => {
            let vocab = state.vocab[side_index(*side)].clone().expect("validated");
            let opts = SaaOptions {
                threshold: *threshold,
                min_stem_len: *min_stem_len,
            };
            let (mut types, mut tokens) = (Vec::new(), Vec::new());
            for &split in splits {
                let dest = target(split, *side);
                let r = ops::saa(
                    &vocab,
                    affixes.as_deref(),
                    &opts,
                    &text(state, split, *side),
                    *side,
                    &dest,
                )?;
                types.push(r.types);
                tokens.push(r.tokens);
                state.texts.insert((split, side_index(*side)), dest);
            }
            state.saa_counts.push((name.to_owned(), types, tokens));
            if *side == Side::Source {
                state.variants.clear();
            }
        }
        Stage::Lsw {
            side,
            synonyms,
            threshold,
            n_best,
        } => {
            let vocab = state.vocab[side_index(*side)].clone().expect("validated");
            let inputs: Vec<PathBuf> = splits.iter().map(|&s| text(state, s, *side)).collect();
            let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
            let table = dir.join("synonyms.tsv");
            ops::lsw_learn(&vocab, synonyms, &input_refs, *side, *threshold, &table)?;
            let (mut types, mut tokens) = (Vec::new(), Vec::new());
            if *side == Side::Source {
                state.variants.clear();
            }
            for (&split, input) in splits.iter().zip(&inputs) {
                let dest = target(split, *side);
                let variants = (*n_best > 1 && split != Split::Train && *side == Side::Source)
                    .then(|| dir.join(format!("{split}.variants.tsv")));
                let n = if variants.is_some() { *n_best } else { 1 };
                let counts = ops::lsw_apply(&table, input, *side, &dest, n, variants.as_deref())?;
                types.push(counts.types);
                tokens.push(counts.tokens);
                state.texts.insert((split, side_index(*side)), dest);
                if let Some(v) = variants {
                    state.variants.insert(split, v);
                }
            }
            state.lsw_counts.push((name.to_owned(), types, tokens));
        }
        Stage::Bpe { side, merges } => {
            for &s in side.sides() {
                let merge_file = dir.join(format!("merges.{}.txt", ext(s)));
                ops::bpe_learn_file(&text(state, Split::Train, s), s, *merges, &merge_file)?;
                for &split in splits {
                    let dest = target(split, s);
                    ops::bpe_apply_file(&merge_file, &text(state, split, s), s, &dest)?;
                    state.texts.insert((split, side_index(s)), dest);
                }
                if s == Side::Source {
                    state.variants.clear();
                }
            }
        }
        Stage::Train { name: label, model } => {
            let cfg = TrainingConfig {
                seed: config.seed,
                ..model.clone()
            };
            let model_path = dir.join("model.bin");
            let (src, tgt) = (
                text(state, Split::Train, Side::Source),
                text(state, Split::Train, Side::Target),
            );
            let held = splits.contains(&Split::Dev).then(|| {
                (
                    text(state, Split::Dev, Side::Source),
                    text(state, Split::Dev, Side::Target),
                )
            });
            ops::train_files(
                &ops::TrainPaths {
                    src: &src,
                    tgt: &tgt,
                    heldout: held.as_ref().map(|(s, t)| (s.as_path(), t.as_path())),
                    model: &model_path,
                    log: &dir.join("training_log.tsv"),
                },
                &cfg,
            )?;
            let system = label.clone().unwrap_or_else(|| cfg.head.name().to_owned());
            row.system = Some(system.clone());
            state.model = Some((model_path, system));
            state.hyps.clear();
        }
        Stage::Translate { split, beam } => {
            let (model, system) = state.model.clone().expect("validated");
            let dest = dir.join(format!("{split}.hyp"));
            let input = match state.variants.get(split) {
                Some(v) => ops::TranslateInput::Variants(v),
                None => ops::TranslateInput::Text(&state.texts[&(*split, 0)]),
            };
            ops::translate_file(&model, input, *beam, &dest)?;
            row.system = Some(system.clone());
            state.hyps.insert(*split, (dest, system));
        }
        Stage::Bleu { split, smoothing } => {
            let (hyp, system) = state.hyps[split].clone();
            let reference = config.data.path(*split, Side::Target).expect("validated");
            let result = ops::bleu_files(
                &hyp,
                reference,
                true,
                BleuOptions {
                    add_one_smoothing: *smoothing,
                },
                Some(&dir.join("bleu.txt")),
            )?;
            row.system = Some(system);
            row.bleu = Some(result.bleu);
        }
    }
    Ok(row)
}
