//! The `@@` joiner convention shared by affix separation and BPE.
//!
//! A token ending in `@@` is glued to the token that follows it; a token
//! starting with `@@` is glued to the token before it. Stripping the markers
//! therefore undoes both `dis@@ own @@ed` and `lo@@ we@@ r`.

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

pub const MARKER: &str = "@@";

/// Whether a token carries a joiner at either end.
pub fn is_marked(token: &str) -> bool {
    token.starts_with(MARKER) || token.ends_with(MARKER)
}

/// Joins marker-adjacent tokens of one sentence back into words.
///
/// Fails with the 0-based token position of a marker that has nothing to
/// attach to, or of a bare `@@` token.
pub fn join_tokens(tokens: &[String]) -> std::result::Result<Vec<String>, usize> {
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut glue_next = false;
    for (pos, tok) in tokens.iter().enumerate() {
        if tok == MARKER {
            return Err(pos);
        }
        let (glue_prev, rest) = match tok.strip_prefix(MARKER) {
            Some(rest) => (true, rest),
            None => (false, tok.as_str()),
        };
        let (core, glue_after) = match rest.strip_suffix(MARKER) {
            Some(core) if !core.is_empty() || glue_prev => (core, true),
            _ => (rest, false),
        };
        if glue_prev {
            if glue_next {
                return Err(pos);
            }
            match out.last_mut() {
                Some(last) => last.push_str(core),
                None => return Err(pos),
            }
        } else if glue_next {
            out.last_mut()
                .expect("glue_next implies a previous word")
                .push_str(core);
        } else {
            out.push(core.to_owned());
        }
        glue_next = glue_after;
    }
    if glue_next {
        return Err(tokens.len() - 1);
    }
    Ok(out)
}

/// Removes subword joiners from every sentence of `text`.
pub fn strip_subword_markers(text: &Corpus) -> Result<Corpus> {
    let sentences = text
        .sentences
        .iter()
        .enumerate()
        .map(|(line, s)| {
            join_tokens(s.tokens())
                .map(Sentence::from_tokens_unchecked)
                .map_err(|pos| {
                    Error::invalid(format!(
                        "dangling `@@` marker at sentence {}, token {}",
                        line + 1,
                        pos + 1
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(sentences, text.side))
}

/// Joins like [`join_tokens`] but never fails: markers with nothing to
/// attach to are dropped. Meant for decoder output, which need not be
/// well formed.
pub fn join_tokens_lenient(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(tokens.len());
    let mut glue_next = false;
    for tok in tokens {
        let (glue_prev, rest) = match tok.strip_prefix(MARKER) {
            Some(rest) => (true, rest),
            None => (false, tok.as_str()),
        };
        // a bare `@@` glues on both sides
        let (core, glue_after) = match rest.strip_suffix(MARKER) {
            Some(core) => (core, true),
            None => (rest, tok == MARKER),
        };
        match out.last_mut() {
            Some(last) if glue_prev || glue_next => last.push_str(core),
            _ if core.is_empty() => {}
            _ => out.push(core.to_owned()),
        }
        glue_next = glue_after && !out.is_empty();
    }
    out
}

/// [`strip_subword_markers`] for translations: dangling markers are dropped.
pub fn strip_output_markers(text: &Corpus) -> Corpus {
    let sentences = text
        .sentences
        .iter()
        .map(|s| Sentence::from_tokens_unchecked(join_tokens_lenient(s.tokens())))
        .collect();
    Corpus::new(sentences, text.side)
}
