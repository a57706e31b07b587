//! Text-file corpora and the on-disk meta-evaluation dataset layout.
//!
//! ```text
//! root/
//!   manifest.yaml        name, gold_aggregation, label
//!   sources.txt
//!   references/ref0.txt  optional, read on demand
//!   systems/<name>.txt
//!   judgments.tsv        source_index \t system \t rank
//!   system_gold.tsv      optional: system \t score
//! ```
//! All sentence files hold one sentence per line, aligned with `sources.txt`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta_eval::{human_system_scores, Aggregation, JudgmentSet, TrueSkillParams};
use crate::types::{tokenize, TokenSeq};

/// Lines of a UTF-8 text file; a final newline does not add an empty line.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn read_sentences(path: impl AsRef<Path>) -> Result<Vec<TokenSeq>> {
    Ok(read_lines(path)?.iter().map(|l| tokenize(l)).collect())
}

/// Reads several sentence files and checks each against `expected` lines.
pub fn read_aligned(
    paths: &[PathBuf],
    expected: usize,
    anchor: &Path,
) -> Result<Vec<Vec<TokenSeq>>> {
    paths
        .iter()
        .map(|p| {
            let s = read_sentences(p)?;
            if s.len() != expected {
                return Err(Error::LengthMismatch {
                    what: format!("{} (against {})", p.display(), anchor.display()),
                    expected,
                    actual: s.len(),
                });
            }
            Ok(s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub gold_aggregation: Aggregation,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct MetaDataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub sources: Vec<TokenSeq>,
    /// Hypotheses keyed by system name.
    pub systems: BTreeMap<String, Vec<TokenSeq>>,
    pub judgments: JudgmentSet,
    /// True when gold came from `system_gold.tsv` rather than the judgments.
    pub gold_from_file: bool,
}

impl MetaDataset {
    /// Reference sets `references/ref0.txt`, `ref1.txt`, ... in order.
    pub fn references(&self) -> Result<Vec<Vec<TokenSeq>>> {
        let dir = self.root.join("references");
        if !dir.is_dir() {
            return Err(Error::Dataset(format!("{} is missing", dir.display())));
        }
        let paths: Vec<PathBuf> = (0..)
            .map(|k| dir.join(format!("ref{k}.txt")))
            .take_while(|p| p.is_file())
            .collect();
        if paths.is_empty() {
            return Err(Error::Dataset(format!(
                "{} holds no ref0.txt",
                dir.display()
            )));
        }
        read_aligned(&paths, self.sources.len(), &self.root.join("sources.txt"))
    }
}

fn parse_judgments(
    path: &Path,
    systems: &BTreeMap<String, Vec<TokenSeq>>,
    num_sources: usize,
) -> Result<Vec<BTreeMap<String, u32>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rankings = vec![BTreeMap::new(); num_sources];
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || (i == 0 && line.starts_with("source_index")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [idx, system, rank] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        };
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad source index {idx:?}")))?;
        if idx >= num_sources {
            return Err(Error::parse(
                path,
                lineno,
                format!("source index {idx} out of range (0..{num_sources})"),
            ));
        }
        let system = system.trim();
        if !systems.contains_key(system) {
            return Err(Error::parse(
                path,
                lineno,
                format!("unknown system {system:?} (not under systems/)"),
            ));
        }
        let rank: u32 = rank
            .trim()
            .parse()
            .ok()
            .filter(|r| *r >= 1)
            .ok_or_else(|| {
                Error::parse(
                    path,
                    lineno,
                    format!("rank must be an integer >= 1, got {rank:?}"),
                )
            })?;
        if rankings[idx].insert(system.to_string(), rank).is_some() {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate judgment for source {idx}, system {system}"),
            ));
        }
    }
    Ok(rankings)
}

fn parse_gold(
    path: &Path,
    systems: &BTreeMap<String, Vec<TokenSeq>>,
) -> Result<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut gold = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((name, score)) = line.split_once('\t') else {
            return Err(Error::parse(path, i + 1, "expected `system \\t score`"));
        };
        if !systems.contains_key(name) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("unknown system {name:?}"),
            ));
        }
        let v: f64 = score
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(path, i + 1, format!("bad score {score:?}")))?;
        gold.insert(name.to_string(), v);
    }
    Ok(gold)
}

/// Loads and validates a dataset. References are not read here.
pub fn load_meta_dataset(root: impl AsRef<Path>) -> Result<MetaDataset> {
    let root = root.as_ref().to_path_buf();
    let manifest_path = root.join("manifest.yaml");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_yaml::from_str(&text)
        .map_err(|e| Error::Dataset(format!("{}: {e}", manifest_path.display())))?;
    if manifest.gold_aggregation == Aggregation::Average {
        return Err(Error::Dataset(format!(
            "{}: gold_aggregation must be expected_wins or trueskill",
            manifest_path.display()
        )));
    }

    let sources_path = root.join("sources.txt");
    let sources = read_sentences(&sources_path)?;

    let sys_dir = root.join("systems");
    let entries = std::fs::read_dir(&sys_dir).map_err(|e| Error::io(&sys_dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Dataset(format!(
            "{} holds no <name>.txt files",
            sys_dir.display()
        )));
    }
    let hyps = read_aligned(&paths, sources.len(), &sources_path)?;
    let systems: BTreeMap<String, Vec<TokenSeq>> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned()
        })
        .zip(hyps)
        .collect();

    let rankings = parse_judgments(&root.join("judgments.tsv"), &systems, sources.len())?;
    let names: Vec<String> = systems.keys().cloned().collect();
    let gold_path = root.join("system_gold.tsv");
    let gold_from_file = gold_path.is_file();
    let gold = if gold_from_file {
        parse_gold(&gold_path, &systems)?
    } else {
        BTreeMap::new()
    };
    let mut judgments = JudgmentSet::new(names, rankings, gold, manifest.label.clone())?;
    if !gold_from_file {
        judgments.system_gold = human_system_scores(
            &judgments,
            manifest.gold_aggregation,
            &TrueSkillParams::default(),
        )?;
    }
    let judged: BTreeSet<&String> = judgments.rankings.iter().flat_map(|r| r.keys()).collect();
    for name in judgments.systems.iter().filter(|s| !judged.contains(s)) {
        log::warn!("system {name} appears in no judgment");
    }
    Ok(MetaDataset {
        root,
        manifest,
        sources,
        systems,
        judgments,
        gold_from_file,
    })
}
