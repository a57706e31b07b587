//! Window and pairwise analyses, emitted as plain tables.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta_eval::{correlate, pair_outcomes, paired_by_human, JudgmentSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub start_rank: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAgreementCell {
    pub rank_a: u32,
    pub rank_b: u32,
    pub agreement: f64,
    pub pair_count: u64,
}

pub const DEFAULT_WINDOW: usize = 4;

/// Correlations within sliding windows of systems sorted by human score.
pub fn window_analysis(
    metric_scores: &BTreeMap<String, f64>,
    human_scores: &BTreeMap<String, f64>,
    window: usize,
    higher_is_better: bool,
) -> Result<Vec<WindowRow>> {
    let rows = paired_by_human(metric_scores, human_scores, higher_is_better);
    if window < 2 || window > rows.len() {
        return Err(Error::usage(format!(
            "window must be between 2 and the number of systems ({}), got {window}",
            rows.len()
        )));
    }
    Ok((0..=rows.len() - window)
        .into_par_iter()
        .map(|s| {
            let c = correlate(&rows[s..s + window]);
            WindowRow {
                start_rank: s + 1,
                pearson: c.pearson,
                spearman: c.spearman,
                window,
            }
        })
        .collect())
}

/// Agreement on human-decisive pairs, bucketed by the pair's human ranks.
pub fn pairwise_analysis(
    sentence_scores: &BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
    higher_is_better: bool,
) -> Result<Vec<PairAgreementCell>> {
    let mut cells: BTreeMap<(u32, u32), (u64, u64)> = BTreeMap::new();
    for ((src, better, worse), outcome) in
        pair_outcomes(sentence_scores, judgments, higher_is_better)?
    {
        let ranks = &judgments.rankings[src];
        let a = ranks[&judgments.systems[better]];
        let b = ranks[&judgments.systems[worse]];
        let cell = cells.entry((a, b)).or_default();
        cell.0 += u64::from(outcome == Some(true));
        cell.1 += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((rank_a, rank_b), (agree, n))| PairAgreementCell {
            rank_a,
            rank_b,
            agreement: agree as f64 / n as f64,
            pair_count: n,
        })
        .collect())
}

pub const WINDOW_HEADER: [&str; 4] = ["start_rank", "pearson", "spearman", "window"];
pub const PAIRWISE_HEADER: [&str; 4] = ["rank_a", "rank_b", "agreement", "pair_count"];

/// Writes `header` then one record per row; missing values become empty fields.
pub fn write_csv<T: Serialize>(out: impl Write, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header)
        .map_err(|e| Error::usage(format!("csv: {e}")))?;
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::usage(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::usage(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_json<T: Serialize>(mut out: impl Write, rows: &[T]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::usage(format!("json: {e}")))?;
    writeln!(out).map_err(|e| Error::usage(format!("json: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_eval::{self, stats, Aggregation, SystemCorrOptions};

    fn map(v: &[f64]) -> BTreeMap<String, f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| (format!("s{i:02}"), *x))
            .collect()
    }

    #[test]
    fn identity_and_count() {
        let human = map(&(0..12).map(|i| 12.0 - i as f64).collect::<Vec<_>>());
        let rows = window_analysis(&human, &human, 4, true).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(
            rows.iter().map(|r| r.start_rank).collect::<Vec<_>>(),
            (1..=9).collect::<Vec<_>>()
        );
        assert!(rows
            .iter()
            .all(|r| r.pearson == Some(1.0) && r.spearman == Some(1.0)));
    }

    #[test]
    fn inversion_and_constant_window() {
        // human ranks 1..6; metric swaps the 3rd and 4th systems
        let human = map(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let metric = map(&[6.0, 5.0, 3.0, 4.0, 2.0, 1.0]);
        let rows = window_analysis(&metric, &human, 3, true).unwrap();
        for r in &rows {
            let s = r.start_rank - 1;
            let h: Vec<f64> = (s..s + 3).map(|i| 6.0 - i as f64).collect();
            let m: Vec<f64> = (s..s + 3).map(|i| metric[&format!("s{i:02}")]).collect();
            assert_eq!(r.pearson, stats::pearson(&m, &h));
            assert_eq!(r.spearman, stats::spearman(&m, &h));
        }
        let rho: Vec<Option<f64>> = rows.iter().map(|r| r.spearman).collect();
        assert_eq!(rho, vec![Some(1.0), Some(0.5), Some(0.5), Some(1.0)]);

        let flat = map(&[1.0; 6]);
        assert!(window_analysis(&flat, &human, 3, true)
            .unwrap()
            .iter()
            .all(|r| r.pearson.is_none()));
        assert!(window_analysis(&flat, &human, 7, true).is_err());
        assert!(window_analysis(&flat, &human, 1, true).is_err());
    }

    #[test]
    fn full_window_matches_system_level() {
        let j = meta_eval::tests::judgments(&[&[1, 2, 3, 4, 5]]);
        let metric: BTreeMap<String, f64> = [0.3, 0.9, 0.1, 0.5, 0.2]
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("s{i}"), *v))
            .collect();
        let rows = window_analysis(&metric, &j.system_gold, 5, true).unwrap();
        let opts = SystemCorrOptions {
            aggregation: Aggregation::Average,
            ..Default::default()
        };
        let c = meta_eval::corr_system(&metric, &j, &opts).unwrap();
        assert_eq!((rows[0].pearson, rows[0].spearman), (c.pearson, c.spearman));
    }

    #[test]
    fn pairwise_cells() {
        // five sources ranking s0 first and s1 fifth; the metric agrees on four
        let j = meta_eval::tests::judgments(&[&[1, 5], &[1, 5], &[1, 5], &[1, 5], &[1, 5]]);
        let scores: BTreeMap<String, Vec<Option<f64>>> = [
            (
                "s0".to_string(),
                vec![Some(1.0), Some(1.0), Some(1.0), Some(1.0), Some(0.0)],
            ),
            ("s1".to_string(), vec![Some(0.0); 5]),
        ]
        .into();
        let cells = pairwise_analysis(&scores, &j, true).unwrap();
        assert_eq!(
            cells,
            vec![PairAgreementCell {
                rank_a: 1,
                rank_b: 5,
                agreement: 0.8,
                pair_count: 5
            }]
        );
        let c = meta_eval::sentence_pair_counts(&scores, &j, true).unwrap();
        assert_eq!(cells.iter().map(|c| c.pair_count).sum::<u64>(), c.total());
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &WINDOW_HEADER,
            &[WindowRow {
                start_rank: 1,
                pearson: None,
                spearman: Some(0.5),
                window: 4,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "start_rank,pearson,spearman,window\n1,,0.5,4\n"
        );
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &PAIRWISE_HEADER,
            &[PairAgreementCell {
                rank_a: 1,
                rank_b: 2,
                agreement: 1.0,
                pair_count: 3,
            }],
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "rank_a,rank_b,agreement,pair_count\n1,2,1.0,3\n"
        );
        let mut buf = Vec::new();
        write_csv::<WindowRow>(&mut buf, &WINDOW_HEADER, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "start_rank,pearson,spearman,window\n"
        );
    }
}
