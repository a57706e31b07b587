//! Adapter for sentence scores computed outside this crate (neural metrics).

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::MetricResult;

#[derive(Debug, Clone, Default)]
pub struct ExternalScoreTable {
    map: HashMap<(String, usize), f64>,
    /// Rows that overwrote an earlier row with the same key.
    pub duplicates: usize,
}

impl ExternalScoreTable {
    pub fn insert(&mut self, system: &str, index: usize, score: f64) {
        if self
            .map
            .insert((system.to_string(), index), score)
            .is_some()
        {
            self.duplicates += 1;
        }
    }

    pub fn get(&self, system: &str, index: usize) -> Result<f64> {
        self.map
            .get(&(system.to_string(), index))
            .copied()
            .ok_or_else(|| Error::MissingScore {
                system: system.to_string(),
                index,
            })
    }

    /// Scores of `system` for sentences `0..n`; the corpus score is their mean.
    pub fn system_result(&self, system: &str, n: usize) -> Result<MetricResult> {
        let sentence_scores = (0..n)
            .map(|i| self.get(system, i))
            .collect::<Result<Vec<_>>>()?;
        let corpus_score = if n == 0 {
            0.0
        } else {
            sentence_scores.iter().sum::<f64>() / n as f64
        };
        Ok(MetricResult {
            corpus_score,
            sentence_scores,
        })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Reads `system \t sentence_index \t score` rows. Later duplicates win.
pub fn load_external_scores(path: impl AsRef<Path>) -> Result<ExternalScoreTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_external_scores(&text, path)
}

pub fn parse_external_scores(text: &str, path: &Path) -> Result<ExternalScoreTable> {
    let mut table = ExternalScoreTable::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                lineno,
                "expected `system \\t sentence_index \\t score`",
            ));
        }
        let index: usize = fields[1].trim().parse().map_err(|_| {
            Error::parse(path, lineno, format!("bad sentence index {:?}", fields[1]))
        })?;
        let score: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad score {:?}", fields[2])))?;
        table.insert(fields[0].trim(), index, score);
    }
    if table.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate score rows overwritten",
            path.display(),
            table.duplicates
        );
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_duplicates() {
        let t = parse_external_scores(
            "sysA\t0\t0.91\nsysA\t1\t0.5\nsysA\t0\t0.7\n",
            Path::new("s.tsv"),
        )
        .unwrap();
        assert_eq!(t.get("sysA", 0).unwrap(), 0.7);
        assert_eq!(t.duplicates, 1);
        let r = t.system_result("sysA", 2).unwrap();
        assert!((r.corpus_score - 0.6).abs() < 1e-15);
    }

    #[test]
    fn missing_pair_is_named() {
        let t = parse_external_scores("sysA\t0\t0.91\n", Path::new("s.tsv")).unwrap();
        match t.get("sysB", 3) {
            Err(Error::MissingScore { system, index }) => {
                assert_eq!(system, "sysB");
                assert_eq!(index, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_fails_lazily() {
        let t = parse_external_scores("", Path::new("s.tsv")).unwrap();
        assert!(t.is_empty());
        assert!(t.system_result("x", 1).is_err());
    }

    #[test]
    fn malformed_row() {
        match parse_external_scores("a\t0\t1\nb\tx\t1\n", Path::new("s.tsv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
