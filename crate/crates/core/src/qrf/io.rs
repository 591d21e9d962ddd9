//! Forest files: a one-line versioned header followed by the forest as JSON.
//! Floats are written in shortest round-trip form, so a reloaded forest
//! predicts bit-identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::forest::Forest;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "RADONMAP-FOREST";
pub const FORMAT_VERSION: u32 = 1;

pub fn header_line() -> String {
    format!("{FORMAT_NAME} {FORMAT_VERSION} radonmap/{}", env!("CARGO_PKG_VERSION"))
}

pub fn write_forest<W: Write>(forest: &Forest, mut w: W) -> Result<()> {
    writeln!(w, "{}", header_line()).map_err(|e| Error::io("<forest>", e))?;
    serde_json::to_writer(&mut w, forest)?;
    writeln!(w).map_err(|e| Error::io("<forest>", e))?;
    Ok(())
}

pub fn save(forest: &Forest, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_forest(forest, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn check_header(line: &str, path: &Path) -> Result<()> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(FORMAT_NAME) {
        return Err(Error::parse(path, "not a forest file"));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(FORMAT_VERSION) => Ok(()),
        Some(v) => Err(Error::parse(path, format!("unsupported forest format version {v}"))),
        None => Err(Error::parse(path, "missing format version")),
    }
}

pub fn read_forest<R: BufRead>(mut r: R, path: &Path) -> Result<(String, Forest)> {
    let mut header = String::new();
    r.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let header = header.trim_end().to_string();
    check_header(&header, path)?;
    let mut body = String::new();
    r.read_to_string(&mut body).map_err(|e| Error::io(path, e))?;
    let forest: Forest = serde_json::from_str(&body)
        .map_err(|e| Error::parse(path, format!("forest body: {e}")))?;
    Ok((header, forest))
}

/// Loads a forest and returns it with its header line.
pub fn load(path: &Path) -> Result<(String, Forest)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_forest(BufReader::new(file), path)
}
