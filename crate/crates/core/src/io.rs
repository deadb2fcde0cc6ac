//! Plain-text system and vector files.
//!
//! A system file starts with a `dim nnz` header followed by one
//! `row col value` line per stored entry (0-based, both triangles). A vector
//! file holds one value per line. Values are written in Rust's shortest
//! round-trip form, so a write/read cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseSym;

pub fn format_system(m: &SparseSym) -> String {
    let mut out = String::with_capacity(m.nnz() * 24);
    writeln!(out, "{} {}", m.dim(), m.nnz()).unwrap();
    for (i, j, v) in m.iter() {
        writeln!(out, "{i} {j} {v}").unwrap();
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what}")))
}

pub fn parse_system(text: &str) -> Result<SparseSym> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty system file"))?;
    let mut toks = header.split_whitespace();
    let dim: usize = field(toks.next(), hl, "dimension")?;
    let nnz: usize = field(toks.next(), hl, "entry count")?;
    let mut triplets = Vec::with_capacity(nnz);
    for (n, line) in lines {
        let mut toks = line.split_whitespace();
        let r: usize = field(toks.next(), n, "row")?;
        let c: usize = field(toks.next(), n, "column")?;
        let v: f64 = field(toks.next(), n, "value")?;
        if toks.next().is_some() {
            return Err(parse_err(n, "trailing tokens"));
        }
        if r >= dim || c >= dim {
            return Err(parse_err(
                n,
                format!("index ({r}, {c}) out of range for dimension {dim}"),
            ));
        }
        triplets.push((r, c, v));
    }
    if triplets.len() != nnz {
        return Err(parse_err(
            hl,
            format!("header declares {nnz} entries, found {}", triplets.len()),
        ));
    }
    SparseSym::from_triplets(dim, triplets)
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(v.len() * 20);
    for x in v {
        writeln!(out, "{x}").unwrap();
    }
    out
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(n + 1, format!("invalid value {:?}", l.trim())))
        })
        .collect()
}

pub fn read_system(path: impl AsRef<Path>) -> Result<SparseSym> {
    parse_system(&fs::read_to_string(path)?)
}

pub fn write_system(path: impl AsRef<Path>, m: &SparseSym) -> Result<()> {
    Ok(fs::write(path, format_system(m))?)
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    Ok(fs::write(path, format_vector(v))?)
}
