use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::{stats::average_ranks, JudgmentSet};
use crate::error::{Error, Result};

fn require_two(judgments: &JudgmentSet) -> Result<()> {
    if judgments.systems.len() < 2 {
        return Err(Error::Degenerate(
            "ranking aggregation needs at least 2 systems".into(),
        ));
    }
    Ok(())
}

/// Mean pairwise win ratio against each opponent with at least one decisive
/// comparison. `None` for systems that never had one.
pub fn expected_wins(judgments: &JudgmentSet) -> Result<BTreeMap<String, Option<f64>>> {
    require_two(judgments)?;
    let n = judgments.systems.len();
    let mut wins = vec![vec![0u64; n]; n];
    for (_, better, worse) in judgments.decisive_pairs() {
        wins[better][worse] += 1;
    }
    Ok(judgments
        .systems
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let ratios: Vec<f64> = (0..n)
                .filter(|&b| b != a && wins[a][b] + wins[b][a] > 0)
                .map(|b| wins[a][b] as f64 / (wins[a][b] + wins[b][a]) as f64)
                .collect();
            let score =
                (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
            (name.clone(), score)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrueSkillParams {
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
    pub tau: f64,
    pub passes: usize,
    pub seed: u64,
}

impl Default for TrueSkillParams {
    fn default() -> Self {
        let sigma = 25.0 / 3.0;
        TrueSkillParams {
            mu: 25.0,
            sigma,
            beta: sigma / 2.0,
            tau: sigma / 100.0,
            passes: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingState {
    pub ratings: BTreeMap<String, Rating>,
    pub draw_probability: f64,
    pub params: TrueSkillParams,
}

#[derive(Clone, Copy)]
enum Outcome {
    FirstWins,
    SecondWins,
    Draw,
}

struct Gauss(Normal);

impl Gauss {
    fn new() -> Self {
        Gauss(Normal::new(0.0, 1.0).expect("standard normal"))
    }
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn v_win(&self, t: f64, eps: f64) -> f64 {
        let x = t - eps;
        let denom = self.cdf(x);
        if denom > 1e-300 {
            self.pdf(x) / denom
        } else {
            -x
        }
    }

    fn w_win(&self, t: f64, eps: f64) -> f64 {
        let v = self.v_win(t, eps);
        v * (v + t - eps)
    }

    fn v_draw(&self, t: f64, eps: f64) -> f64 {
        let abs = t.abs();
        let (a, b) = (eps - abs, -eps - abs);
        let denom = self.cdf(a) - self.cdf(b);
        let v = if denom > 1e-300 {
            (self.pdf(b) - self.pdf(a)) / denom
        } else {
            a
        };
        if t < 0.0 {
            -v
        } else {
            v
        }
    }

    fn w_draw(&self, t: f64, eps: f64) -> f64 {
        let abs = t.abs();
        let (a, b) = (eps - abs, -eps - abs);
        let denom = self.cdf(a) - self.cdf(b);
        if denom <= 1e-300 {
            return 1.0;
        }
        let v = self.v_draw(abs, eps);
        v * v + (a * self.pdf(a) - b * self.pdf(b)) / denom
    }
}

fn update(
    g: &Gauss,
    p: &TrueSkillParams,
    margin: f64,
    first: &mut Rating,
    second: &mut Rating,
    outcome: Outcome,
) {
    let var1 = first.sigma.powi(2) + p.tau.powi(2);
    let var2 = second.sigma.powi(2) + p.tau.powi(2);
    let c = (2.0 * p.beta.powi(2) + var1 + var2).sqrt();
    let eps = margin / c;
    let (v, w, sign) = match outcome {
        Outcome::FirstWins => {
            let t = (first.mu - second.mu) / c;
            (g.v_win(t, eps), g.w_win(t, eps), 1.0)
        }
        Outcome::SecondWins => {
            let t = (second.mu - first.mu) / c;
            (g.v_win(t, eps), g.w_win(t, eps), -1.0)
        }
        Outcome::Draw => {
            let t = (first.mu - second.mu) / c;
            (g.v_draw(t, eps), g.w_draw(t, eps), 1.0)
        }
    };
    // keeps sigma positive when the truncated moments misbehave numerically
    let w = if w.is_finite() {
        w.clamp(0.0, 1.0)
    } else {
        0.0
    };
    first.mu += sign * var1 / c * v;
    second.mu -= sign * var2 / c * v;
    first.sigma = (var1 * (1.0 - var1 / (c * c) * w)).sqrt();
    second.sigma = (var2 * (1.0 - var2 / (c * c) * w)).sqrt();
}

/// 1-vs-1 TrueSkill over every pair ranked in the same source, replayed for
/// `params.passes` seeded shuffles. The draw margin follows the observed tie rate.
pub fn trueskill_rank(judgments: &JudgmentSet, params: &TrueSkillParams) -> Result<RatingState> {
    require_two(judgments)?;
    if !(params.sigma > 0.0 && params.beta > 0.0 && params.tau >= 0.0) {
        return Err(Error::Config(
            "trueskill sigma and beta must be positive".into(),
        ));
    }
    let mut matches: Vec<(usize, usize, Outcome)> = Vec::new();
    for ranking in &judgments.rankings {
        for (i, a) in judgments.systems.iter().enumerate() {
            let Some(ra) = ranking.get(a) else { continue };
            for (j, b) in judgments.systems.iter().enumerate().skip(i + 1) {
                let Some(rb) = ranking.get(b) else { continue };
                let o = match ra.cmp(rb) {
                    std::cmp::Ordering::Less => Outcome::FirstWins,
                    std::cmp::Ordering::Greater => Outcome::SecondWins,
                    std::cmp::Ordering::Equal => Outcome::Draw,
                };
                matches.push((i, j, o));
            }
        }
    }
    let draws = matches
        .iter()
        .filter(|m| matches!(m.2, Outcome::Draw))
        .count();
    let draw_probability = if matches.is_empty() {
        0.0
    } else {
        (draws as f64 / matches.len() as f64).min(0.99)
    };
    let g = Gauss::new();
    let margin = g.0.inverse_cdf((draw_probability + 1.0) / 2.0) * 2f64.sqrt() * params.beta;

    let mut ratings = vec![
        Rating {
            mu: params.mu,
            sigma: params.sigma
        };
        judgments.systems.len()
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..params.passes {
        matches.shuffle(&mut rng);
        for &(i, j, o) in &matches {
            let (lo, hi) = ratings.split_at_mut(j);
            update(&g, params, margin, &mut lo[i], &mut hi[0], o);
        }
    }
    Ok(RatingState {
        ratings: judgments.systems.iter().cloned().zip(ratings).collect(),
        draw_probability,
        params: *params,
    })
}

/// Mean per-metric rank (1 = best, ties averaged); lower is better.
/// Every input map scores the same systems, higher being better.
pub fn ensemble_rank(per_metric: &[BTreeMap<String, f64>]) -> Result<BTreeMap<String, f64>> {
    if per_metric.len() < 2 {
        return Err(Error::usage("ensembling needs at least 2 metrics"));
    }
    let names: Vec<&String> = per_metric[0].keys().collect();
    for (k, m) in per_metric.iter().enumerate().skip(1) {
        if !m.keys().eq(names.iter().copied()) {
            return Err(Error::Validation(format!(
                "metric {k} scores a different set of systems"
            )));
        }
    }
    let mut total = vec![0.0; names.len()];
    for m in per_metric {
        let neg: Vec<f64> = m.values().map(|v| -v).collect();
        for (t, r) in total.iter_mut().zip(average_ranks(&neg)) {
            *t += r;
        }
    }
    Ok(names
        .into_iter()
        .cloned()
        .zip(total.into_iter().map(|t| t / per_metric.len() as f64))
        .collect())
}

/// Turns metric sentence scores into per-source rankings over the systems the
/// humans ranked there, so that human-side aggregations can be applied to a
/// metric. Gold is the mean of each system's available scores.
pub fn metric_judgments(
    sentence_scores: &BTreeMap<String, Vec<Option<f64>>>,
    judgments: &JudgmentSet,
    higher_is_better: bool,
) -> Result<JudgmentSet> {
    let by_index = super::scores_by_index(sentence_scores, judgments)?;
    let rankings = judgments
        .rankings
        .iter()
        .enumerate()
        .map(|(src, human)| {
            let scored: Vec<(&String, f64)> = judgments
                .systems
                .iter()
                .zip(&by_index)
                .filter(|(name, _)| human.contains_key(*name))
                .filter_map(|(name, l)| {
                    let v = l.and_then(|l| l[src])?;
                    Some((name, if higher_is_better { v } else { -v }))
                })
                .collect();
            scored
                .iter()
                .map(|(name, v)| {
                    let better = scored.iter().filter(|(_, u)| u > v).count();
                    ((*name).clone(), better as u32 + 1)
                })
                .collect()
        })
        .collect();
    let gold = sentence_scores
        .iter()
        .filter(|(name, _)| judgments.systems.contains(name))
        .filter_map(|(name, l)| {
            let vals: Vec<f64> = l.iter().flatten().copied().collect();
            (!vals.is_empty()).then(|| (name.clone(), vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect();
    JudgmentSet::new(
        judgments.systems.clone(),
        rankings,
        gold,
        judgments.label.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_eval::tests::judgments;
    use proptest::prelude::*;

    #[test]
    fn expected_wins_examples() {
        let j = judgments(&[&[1, 2], &[1, 2], &[1, 2]]);
        let ew = expected_wins(&j).unwrap();
        assert_eq!(ew["s0"], Some(1.0));
        assert_eq!(ew["s1"], Some(0.0));

        // round robin: every system beats the next cyclically
        let j = judgments(&[&[1, 2, 0], &[0, 1, 2], &[2, 0, 1]]);
        assert!(expected_wins(&j).unwrap().values().all(|v| *v == Some(0.5)));

        // A beats B 3 of 4 times, beats C once of 2
        let j = judgments(&[
            &[1, 2, 0],
            &[1, 2, 0],
            &[1, 2, 0],
            &[2, 1, 0],
            &[1, 0, 2],
            &[2, 0, 1],
        ]);
        assert_eq!(expected_wins(&j).unwrap()["s0"], Some(0.625));

        let j = judgments(&[&[1, 1, 0]]);
        assert_eq!(expected_wins(&j).unwrap()["s2"], None);
    }

    #[test]
    fn trueskill_domination_and_draws() {
        let j = judgments(&[&[1, 2, 3], &[1, 3, 2], &[1, 2, 2], &[1, 3, 2]]);
        let st = trueskill_rank(&j, &TrueSkillParams::default()).unwrap();
        let top = st.ratings["s0"].mu;
        assert!(st
            .ratings
            .iter()
            .filter(|(k, _)| *k != "s0")
            .all(|(_, r)| r.mu < top));
        assert!(st.ratings.values().all(|r| r.sigma > 0.0));

        let j = judgments(&[&[1, 1], &[1, 1], &[1, 1], &[1, 1]]);
        let st = trueskill_rank(&j, &TrueSkillParams::default()).unwrap();
        assert!((st.ratings["s0"].mu - st.ratings["s1"].mu).abs() < 0.5);
        assert_eq!(st.draw_probability, 0.99);
    }

    #[test]
    fn trueskill_is_seeded() {
        let j = judgments(&[&[1, 2, 3], &[3, 1, 2], &[2, 3, 1], &[1, 3, 2]]);
        let p = TrueSkillParams::default();
        assert_eq!(
            trueskill_rank(&j, &p).unwrap(),
            trueskill_rank(&j, &p).unwrap()
        );
    }

    #[test]
    fn ensemble_examples() {
        let m1: BTreeMap<String, f64> = [("a".into(), 0.5), ("b".into(), 0.9)].into();
        let m2: BTreeMap<String, f64> = [("a".into(), 0.7), ("b".into(), 0.2)].into();
        let e = ensemble_rank(&[m1.clone(), m2]).unwrap();
        assert_eq!(e["a"], 1.5);
        assert_eq!(e["b"], 1.5);

        let up: BTreeMap<String, f64> =
            [("a".into(), 1.0), ("b".into(), 2.0), ("c".into(), 3.0)].into();
        let down: BTreeMap<String, f64> = up.iter().map(|(k, v)| (k.clone(), -v)).collect();
        assert!(ensemble_rank(&[up.clone(), down])
            .unwrap()
            .values()
            .all(|v| *v == 2.0));
        let same = ensemble_rank(&[up.clone(), up.clone(), up]).unwrap();
        assert_eq!(same["c"], 1.0);
        assert_eq!(same["a"], 3.0);
        assert!(ensemble_rank(&[m1.clone()]).is_err());
        let other: BTreeMap<String, f64> = [("a".into(), 1.0), ("z".into(), 2.0)].into();
        assert!(ensemble_rank(&[m1, other]).is_err());
    }

    #[test]
    fn metric_judgments_ranks() {
        let j = judgments(&[&[1, 2, 3]]);
        let scores: BTreeMap<String, Vec<Option<f64>>> = [
            ("s0".to_string(), vec![Some(0.5)]),
            ("s1".to_string(), vec![Some(0.9)]),
            ("s2".to_string(), vec![Some(0.5)]),
        ]
        .into();
        let m = metric_judgments(&scores, &j, true).unwrap();
        assert_eq!(m.rankings[0]["s1"], 1);
        assert_eq!(m.rankings[0]["s0"], 2);
        assert_eq!(m.rankings[0]["s2"], 2);
    }

    fn ranking_sets() -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0u32..4, 4), 1..8)
    }

    proptest! {
        #[test]
        fn expected_wins_duplication_invariant(r in ranking_sets()) {
            let refs: Vec<&[u32]> = r.iter().map(Vec::as_slice).collect();
            let doubled: Vec<&[u32]> = refs.iter().chain(refs.iter()).copied().collect();
            prop_assert_eq!(expected_wins(&judgments(&refs)).unwrap(), expected_wins(&judgments(&doubled)).unwrap());
        }

        #[test]
        fn trueskill_label_equivariance(r in ranking_sets(), seed in 0u64..50) {
            let refs: Vec<&[u32]> = r.iter().map(Vec::as_slice).collect();
            let j = judgments(&refs);
            let params = TrueSkillParams { seed, passes: 3, ..Default::default() };
            let base = trueskill_rank(&j, &params).unwrap();
            // rename s_k to z_{3-k}, keeping positions
            let rename = |s: &str| format!("z{}", 3 - s[1..].parse::<usize>().unwrap());
            let mut renamed = j.clone();
            renamed.systems = j.systems.iter().map(|s| rename(s)).collect();
            renamed.rankings = j.rankings.iter()
                .map(|m| m.iter().map(|(k, v)| (rename(k), *v)).collect())
                .collect();
            renamed.system_gold = BTreeMap::new();
            let out = trueskill_rank(&renamed, &params).unwrap();
            for (k, r) in &base.ratings {
                prop_assert_eq!(out.ratings[&rename(k)], *r);
            }
        }

        #[test]
        fn sigma_stays_positive(r in ranking_sets()) {
            let refs: Vec<&[u32]> = r.iter().map(Vec::as_slice).collect();
            let st = trueskill_rank(&judgments(&refs), &TrueSkillParams::default()).unwrap();
            prop_assert!(st.ratings.values().all(|r| r.sigma > 0.0 && r.mu.is_finite()));
        }
    }
}
