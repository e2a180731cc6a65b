//! File helpers shared by every artifact writer.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a sibling temporary file, so a failed
/// write never leaves a partial artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads a UTF-8 file as lines. A trailing newline does not produce an extra
/// empty line; `\r\n` endings are accepted. Invalid UTF-8 is reported with
/// its 1-based line number.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = read_bytes(path)?;
    split_lines(&bytes).map_err(|line| Error::Utf8 {
        path: path.to_path_buf(),
        line,
    })
}

pub(crate) fn split_lines(bytes: &[u8]) -> std::result::Result<Vec<String>, usize> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            std::str::from_utf8(raw).map(str::to_owned).map_err(|_| i + 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_newline_is_not_a_line() {
        assert_eq!(split_lines(b"a\nb\n").unwrap(), vec!["a", "b"]);
        assert_eq!(split_lines(b"a\nb").unwrap(), vec!["a", "b"]);
        assert_eq!(split_lines(b"\n").unwrap(), vec![""]);
        assert!(split_lines(b"").unwrap().is_empty());
    }

    #[test]
    fn bad_utf8_reports_line() {
        assert_eq!(split_lines(b"ok\n\xff\xfe\n").unwrap_err(), 2);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }
}
