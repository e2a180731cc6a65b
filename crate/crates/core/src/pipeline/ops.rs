//! File-to-file versions of every stage. The CLI subcommands and the
//! pipeline runner both go through these, so running a pipeline and typing
//! the commands by hand produce the same bytes.

use std::path::Path;

use crate::bpe::{bpe_apply, bpe_learn, MergeList};
use crate::corpus::{Corpus, Side, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{bleu_with, BleuOptions, BleuResult};
use crate::io;
use crate::lsw::{
    apply_lsw, learn_synonym_table, replace_one_best, report_replacements, LswOutput, ReplacementCounts, SynonymStore,
    SynonymTable, VariantSet,
};
use crate::markers::strip_output_markers;
use crate::nmt::{checkpoint, train, translate_corpus, translate_variants, TrainingConfig, TrainingLog};
use crate::saa::{apply_saa, AffixInventory, SaaOptions, SegmentationReport};
use crate::Parsed;

fn log_warnings<T>(parsed: Parsed<T>) -> T {
    for w in &parsed.warnings {
        log::warn!("{w}");
    }
    parsed.value
}

pub fn vocab(input: &Path, side: Side, size: usize, output: &Path) -> Result<Vocabulary> {
    let v = Vocabulary::build(&Corpus::load(input, side)?, size)?;
    v.save(output)?;
    Ok(v)
}

pub fn load_affixes(path: Option<&Path>) -> Result<AffixInventory> {
    match path {
        Some(p) => Ok(log_warnings(AffixInventory::load(p)?)),
        None => Ok(AffixInventory::default_english()),
    }
}

pub fn saa(
    vocab: &Path,
    affixes: Option<&Path>,
    opts: &SaaOptions,
    input: &Path,
    side: Side,
    output: &Path,
) -> Result<SegmentationReport> {
    let v = Vocabulary::load(vocab)?;
    let inv = load_affixes(affixes)?;
    let (out, report) = apply_saa(&Corpus::load(input, side)?, &v, &inv, opts);
    out.save(output)?;
    Ok(report)
}

/// Learns a synonym table over the words of all `inputs`.
pub fn lsw_learn(
    vocab: &Path,
    synonyms: &Path,
    inputs: &[&Path],
    side: Side,
    threshold: u64,
    output: &Path,
) -> Result<SynonymTable> {
    let v = Vocabulary::load(vocab)?;
    let store = log_warnings(SynonymStore::load(synonyms)?);
    log::info!(
        "{}: {} pairs read, {} distinct",
        synonyms.display(),
        store.raw_pair_count(),
        store.pair_count()
    );
    let mut all = Corpus::new(Vec::new(), side);
    for p in inputs {
        all.sentences.extend(Corpus::load(p, side)?.sentences);
    }
    let table = learn_synonym_table(&v, &all, &store, threshold);
    table.save(output)?;
    Ok(table)
}

/// Writes the 1-best replaced text to `output` and, when `n_best > 1`,
/// the synonym variants of every sentence to `variants`.
pub fn lsw_apply(
    table: &Path,
    input: &Path,
    side: Side,
    output: &Path,
    n_best: usize,
    variants: Option<&Path>,
) -> Result<ReplacementCounts> {
    let table = SynonymTable::load(table)?;
    let text = Corpus::load(input, side)?;
    if n_best > 1 && variants.is_none() {
        return Err(Error::Config("n_best > 1 needs a variants output file".into()));
    }
    if n_best == 0 {
        return Err(Error::Config("n_best must be at least 1".into()));
    }
    let replaced = replace_one_best(&text, &table);
    if let Some(path) = variants {
        match apply_lsw(&text, &table, n_best)? {
            LswOutput::Variants(set) => io::write_atomic(path, set.to_tsv().as_bytes())?,
            LswOutput::Replaced(c) => {
                let set = VariantSet {
                    groups: c.sentences.into_iter().map(|s| vec![s]).collect(),
                };
                io::write_atomic(path, set.to_tsv().as_bytes())?
            }
        }
    }
    replaced.save(output)?;
    report_replacements(&text, &replaced, &table)
}

pub fn bpe_learn_file(input: &Path, side: Side, merges: usize, output: &Path) -> Result<MergeList> {
    let m = bpe_learn(&Corpus::load(input, side)?, merges);
    m.save(output)?;
    Ok(m)
}

pub fn bpe_apply_file(merges: &Path, input: &Path, side: Side, output: &Path) -> Result<()> {
    let m = MergeList::load(merges)?;
    bpe_apply(&Corpus::load(input, side)?, &m).save(output)
}

pub struct TrainPaths<'a> {
    pub src: &'a Path,
    pub tgt: &'a Path,
    pub heldout: Option<(&'a Path, &'a Path)>,
    pub model: &'a Path,
    pub log: &'a Path,
}

pub fn train_files(paths: &TrainPaths<'_>, config: &TrainingConfig) -> Result<TrainingLog> {
    let src = Corpus::load(paths.src, Side::Source)?;
    let tgt = Corpus::load(paths.tgt, Side::Target)?;
    let held = match paths.heldout {
        Some((s, t)) => Some((Corpus::load(s, Side::Source)?, Corpus::load(t, Side::Target)?)),
        None => None,
    };
    let (model, log) = train(&src, &tgt, held.as_ref().map(|(s, t)| (s, t)), config)?;
    checkpoint::save(&model, paths.model)?;
    log.save(paths.log)?;
    Ok(log)
}

pub enum TranslateInput<'a> {
    Text(&'a Path),
    Variants(&'a Path),
}

pub fn translate_file(model: &Path, input: TranslateInput<'_>, beam: usize, output: &Path) -> Result<()> {
    let model = checkpoint::load(model)?;
    let out = match input {
        TranslateInput::Text(p) => translate_corpus(&model, &Corpus::load(p, Side::Source)?, beam)?,
        TranslateInput::Variants(p) => {
            let text = String::from_utf8(io::read_bytes(p)?).map_err(|_| Error::format(p, 0, "invalid UTF-8"))?;
            translate_variants(&model, &VariantSet::parse_tsv(&text, p)?, beam)?
        }
    };
    out.save(output)
}

/// Scores `hyp` against `reference`, first joining `@@` pieces in the
/// hypotheses when `strip_markers` is set (dangling markers are dropped).
/// The result line is written to `output` when given.
pub fn bleu_files(
    hyp: &Path,
    reference: &Path,
    strip_markers: bool,
    opts: BleuOptions,
    output: Option<&Path>,
) -> Result<BleuResult> {
    let mut h = Corpus::load(hyp, Side::Target)?;
    if strip_markers {
        h = strip_output_markers(&h);
    }
    let r = Corpus::load(reference, Side::Target)?;
    let result = bleu_with(&h, &r, opts)?;
    if let Some(p) = output {
        io::write_atomic(p, format!("{result}\n").as_bytes())?;
    }
    Ok(result)
}
