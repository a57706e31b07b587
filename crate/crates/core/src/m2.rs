//! Reader for M2 edit annotation files.
//!
//! ```text
//! S He go to the school .
//! A 1 2|||R:VERB:SVA|||goes|||REQUIRED|||-NONE-|||0
//!
//! ```
//! Blocks are separated by blank lines. `noop` annotations (`-1 -1`) mark an
//! annotator who made no changes.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{tokenize, Edit, EditSet, TokenSeq};

#[derive(Debug, Clone, PartialEq)]
pub struct M2Sentence {
    pub source: TokenSeq,
    /// Edits keyed by annotator id.
    pub annotations: BTreeMap<usize, Vec<Edit>>,
}

impl M2Sentence {
    pub fn edit_set(&self, annotator: usize) -> Result<EditSet> {
        let edits = self
            .annotations
            .get(&annotator)
            .cloned()
            .unwrap_or_default();
        EditSet::new(self.source.clone(), edits)
    }

    /// Corrected sentence of one annotator; the source itself for unknown ids.
    pub fn reference(&self, annotator: usize) -> Result<TokenSeq> {
        Ok(self.edit_set(annotator)?.apply())
    }

    pub fn annotators(&self) -> impl Iterator<Item = usize> + '_ {
        self.annotations.keys().copied()
    }
}

pub fn read_m2(path: impl AsRef<Path>) -> Result<Vec<M2Sentence>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_m2(&text, path)
}

pub fn parse_m2(text: &str, path: &Path) -> Result<Vec<M2Sentence>> {
    let mut out = Vec::new();
    let mut current: Option<M2Sentence> = None;
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            out.extend(current.take());
            continue;
        }
        if let Some(rest) = line
            .strip_prefix("S ")
            .or(if line == "S" { Some("") } else { None })
        {
            out.extend(current.take());
            current = Some(M2Sentence {
                source: tokenize(rest),
                annotations: BTreeMap::new(),
            });
        } else if let Some(rest) = line.strip_prefix("A ") {
            let sent = current
                .as_mut()
                .ok_or_else(|| Error::parse(path, lineno, "annotation before any `S` line"))?;
            let fields: Vec<&str> = rest.split("|||").collect();
            if fields.len() < 3 {
                return Err(Error::parse(
                    path,
                    lineno,
                    "expected `start end|||type|||correction|||...`",
                ));
            }
            let mut span = fields[0].split_whitespace();
            let (Some(start), Some(end), None) = (span.next(), span.next(), span.next()) else {
                return Err(Error::parse(path, lineno, "malformed span"));
            };
            let start: i64 = start
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad start offset {start:?}")))?;
            let end: i64 = end
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad end offset {end:?}")))?;
            let annotator = match fields.get(5) {
                Some(id) => id
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad annotator id {id:?}")))?,
                None => 0,
            };
            let entry = sent.annotations.entry(annotator).or_default();
            if start == -1 && end == -1 || fields[1] == "noop" {
                continue;
            }
            if start < 0 || end < start || end as usize > sent.source.len() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("span [{start}, {end}) out of range"),
                ));
            }
            let correction = fields[2].trim();
            let replacement = if correction == "-NONE-" {
                Vec::new()
            } else {
                tokenize(correction).into_tokens()
            };
            let edit = Edit::new(start as usize, end as usize, replacement);
            edit.validate(&sent.source)
                .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
            entry.push(edit);
        } else {
            return Err(Error::parse(
                path,
                lineno,
                "expected a line starting with `S ` or `A `",
            ));
        }
    }
    out.extend(current);
    Ok(out)
}
