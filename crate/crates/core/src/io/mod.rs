//! Text formats for meshes, spectra, map and density checkpoints, and traces.
//!
//! Floating point values are written in Rust's shortest round-trip form, so
//! reading a file back reproduces every number bit for bit. The byte layouts
//! are described in `docs/formats.md`.

mod checkpoint;
mod mesh;
mod tables;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

pub use checkpoint::{
    read_checkpoint, read_density, read_map, write_checkpoint, write_density, write_map, Checkpoint, MapMeta,
};
pub use mesh::{load_mesh, read_off, save_mesh, sidecar_path, write_off, write_sidecar};
pub use tables::{
    read_gl_trace, read_optimizer_trace, read_spectrum_csv, write_eigenvectors, write_gl_trace, write_optimizer_trace,
    write_spectrum_csv, SpectrumRow, GL_TRACE_COLUMNS, OPTIMIZER_TRACE_COLUMNS, SPECTRUM_COLUMNS,
};

use crate::error::{Error, Result};

/// Ordered `key = value` pairs, one per line.
pub type Metadata = BTreeMap<String, String>;

pub(crate) fn parse_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}

/// Parses `key = value` lines; blank lines are skipped and an optional
/// leading `#` on each line is stripped.
pub fn parse_metadata<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Metadata> {
    let mut out = Metadata::new();
    for (k, line) in lines.into_iter().enumerate() {
        let line = line.trim_start_matches('#').trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return parse_error(format!("metadata line {} has no '=': {line:?}", k + 1));
        };
        let key = key.trim();
        if key.is_empty() {
            return parse_error(format!("metadata line {} has an empty key", k + 1));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return parse_error(format!("duplicate metadata key {key:?}"));
        }
    }
    Ok(out)
}

/// Shortest round-trip form, switching to exponent notation for very small
/// and very large magnitudes (`1e-17`, not `0.00000000000000001`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub(crate) fn format_metadata(meta: &Metadata, prefix: &str) -> String {
    meta.iter().map(|(k, v)| format!("{prefix}{k} = {v}\n")).collect()
}

pub(crate) fn require<'a>(meta: &'a Metadata, key: &str) -> Result<&'a str> {
    meta.get(key).map(String::as_str).ok_or_else(|| Error::Parse(format!("missing metadata key {key:?}")))
}

pub(crate) fn parse_value<T: std::str::FromStr>(what: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse(format!("cannot parse {what} from {s:?}")))
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_round_trip() {
        let mut m = Metadata::new();
        m.insert("b".into(), "x = y".into());
        m.insert("a".into(), "1".into());
        let text = format_metadata(&m, "# ");
        assert_eq!(text, "# a = 1\n# b = x = y\n");
        assert_eq!(parse_metadata(text.lines()).unwrap(), m);
    }

    #[test]
    fn metadata_rejects_bad_lines() {
        assert!(parse_metadata(["novalue"]).is_err());
        assert!(parse_metadata(["= 3"]).is_err());
        assert!(parse_metadata(["a = 1", "a = 2"]).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
