//! Per-split count tables: how many words each preprocessing pass changed in
//! the train, dev and test texts.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// A small TSV table with one column per data split.
///
/// ```text
/// split        train  dev  test
/// word types   5342   84   93
/// tokens       6120   91   99
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCounts {
    pub splits: Vec<String>,
    pub rows: Vec<(String, Vec<usize>)>,
}

impl SplitCounts {
    pub fn new<S: Into<String>>(splits: impl IntoIterator<Item = S>) -> Self {
        SplitCounts {
            splits: splits.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, label: impl Into<String>, values: Vec<usize>) -> Result<()> {
        if values.len() != self.splits.len() {
            return Err(Error::invalid(format!(
                "row has {} values for {} splits",
                values.len(),
                self.splits.len()
            )));
        }
        self.rows.push((label.into(), values));
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("split");
        for s in &self.splits {
            out.push('\t');
            out.push_str(s);
        }
        out.push('\n');
        for (label, values) in &self.rows {
            out.push_str(label);
            for v in values {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_tsv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let splits: Vec<String> = match lines.next() {
            Some((_, h)) if h.starts_with("split\t") => h.split('\t').skip(1).map(str::to_owned).collect(),
            _ => return Err(Error::format(origin, 1, "expected `split<TAB>...` header")),
        };
        let mut table = SplitCounts::new(splits);
        for (i, line) in lines {
            let mut fields = line.split('\t');
            let label = fields.next().unwrap_or_default().to_owned();
            let values = fields
                .map(|f| f.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::format(origin, i + 1, "non-integer count"))?;
            table
                .push_row(label, values)
                .map_err(|e| Error::format(origin, i + 1, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, self.to_tsv().as_bytes())
    }
}
