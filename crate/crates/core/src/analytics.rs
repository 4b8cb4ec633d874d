// SPDX-License-Identifier: Apache-2.0

//! Per-case quality, TPR/TNR Pareto frontiers over ranked case prefixes,
//! iteration progressions and checker-versus-string comparisons.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::judge::{EvaluationExport, Pool, SolutionOutcome};
use crate::refine::LoopTrace;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no alive {0} solutions")]
    EmptyPool(Pool),
    #[error("no cases to rank")]
    NoCases,
    #[error("no traces with an evaluated iteration")]
    NoTraces,
    #[error("evaluations differ: {0}")]
    Mismatch(String),
    #[error("malformed pass bits: {0}")]
    BadBits(String),
}

/// Pass/fail of every alive solution on every case.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PassGrid {
    pub correct: Vec<Vec<bool>>,
    pub incorrect: Vec<Vec<bool>>,
    pub num_cases: usize,
}

fn parse_bits(rows: &[String], n: usize) -> Result<Vec<Vec<bool>>, AnalyticsError> {
    rows.iter()
        .map(|r| {
            if r.len() != n {
                return Err(AnalyticsError::BadBits(format!("expected {n} bits, got {}", r.len())));
            }
            r.chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    other => Err(AnalyticsError::BadBits(format!("unexpected `{other}`"))),
                })
                .collect()
        })
        .collect()
}

impl PassGrid {
    pub fn from_outcomes(outcomes: &[SolutionOutcome], num_cases: usize) -> Self {
        let rows = |pool| {
            outcomes
                .iter()
                .filter(|o| o.pool == pool)
                .map(|o| o.per_case.iter().map(|v| v.kind.is_accepted()).collect())
                .collect()
        };
        PassGrid {
            correct: rows(Pool::Correct),
            incorrect: rows(Pool::Incorrect),
            num_cases,
        }
    }

    pub fn from_export(e: &EvaluationExport) -> Result<Self, AnalyticsError> {
        Ok(PassGrid {
            correct: parse_bits(&e.correct_pass, e.num_cases)?,
            incorrect: parse_bits(&e.incorrect_pass, e.num_cases)?,
            num_cases: e.num_cases,
        })
    }

    fn check_pools(&self) -> Result<(), AnalyticsError> {
        if self.correct.is_empty() {
            return Err(AnalyticsError::EmptyPool(Pool::Correct));
        }
        if self.incorrect.is_empty() {
            return Err(AnalyticsError::EmptyPool(Pool::Incorrect));
        }
        Ok(())
    }

    /// TPR and TNR of the sub-suite made of `cases`. A solution is accepted
    /// iff it passes every selected case.
    pub fn aggregate(&self, cases: &[usize]) -> (f64, f64) {
        let accepted = |row: &Vec<bool>| cases.iter().all(|&k| row[k]);
        let tpr = self.correct.iter().filter(|r| accepted(r)).count() as f64 / self.correct.len() as f64;
        let tnr = self.incorrect.iter().filter(|r| !accepted(r)).count() as f64 / self.incorrect.len() as f64;
        (tpr, tnr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseQuality {
    pub case_index: usize,
    /// Fraction of correct solutions that pass this case.
    pub case_tpr: f64,
    /// Fraction of incorrect solutions that fail this case.
    pub case_tnr: f64,
}

pub fn per_case_quality(grid: &PassGrid) -> Result<Vec<CaseQuality>, AnalyticsError> {
    grid.check_pools()?;
    Ok((0..grid.num_cases)
        .map(|k| {
            let pass = grid.correct.iter().filter(|r| r[k]).count();
            let fail = grid.incorrect.iter().filter(|r| !r[k]).count();
            CaseQuality {
                case_index: k,
                case_tpr: pass as f64 / grid.correct.len() as f64,
                case_tnr: fail as f64 / grid.incorrect.len() as f64,
            }
        })
        .collect())
}

/// Order in which cases enter the prefix. Ties fall back to case index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    /// Case TNR descending, then case TPR descending.
    #[default]
    TnrThenTpr,
    /// Case TPR descending, then case TNR descending.
    TprThenTnr,
    /// Sum of case TPR and case TNR, descending.
    Sum,
}

impl RankKey {
    pub fn name(self) -> &'static str {
        match self {
            RankKey::TnrThenTpr => "tnr_then_tpr",
            RankKey::TprThenTnr => "tpr_then_tnr",
            RankKey::Sum => "sum",
        }
    }

    fn cmp(self, a: &CaseQuality, b: &CaseQuality) -> std::cmp::Ordering {
        let desc = |x: f64, y: f64| y.total_cmp(&x);
        let primary = match self {
            RankKey::TnrThenTpr => desc(a.case_tnr, b.case_tnr).then(desc(a.case_tpr, b.case_tpr)),
            RankKey::TprThenTnr => desc(a.case_tpr, b.case_tpr).then(desc(a.case_tnr, b.case_tnr)),
            RankKey::Sum => desc(a.case_tpr + a.case_tnr, b.case_tpr + b.case_tnr),
        };
        primary.then(a.case_index.cmp(&b.case_index))
    }
}

pub fn rank_cases(stats: &[CaseQuality], key: RankKey) -> Vec<CaseQuality> {
    let mut sorted = stats.to_vec();
    sorted.sort_by(|a, b| key.cmp(a, b));
    sorted
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub k: usize,
    pub tpr: f64,
    pub tnr: f64,
}

impl FrontierPoint {
    pub fn dominates(&self, other: &FrontierPoint) -> bool {
        self.tpr >= other.tpr && self.tnr >= other.tnr && (self.tpr > other.tpr || self.tnr > other.tnr)
    }
}

/// Aggregate (TPR, TNR) for every prefix of the ranked cases, k = 1..=n.
pub fn prefix_curve(grid: &PassGrid, key: RankKey) -> Result<Vec<FrontierPoint>, AnalyticsError> {
    let stats = per_case_quality(grid)?;
    if stats.is_empty() {
        return Err(AnalyticsError::NoCases);
    }
    let order: Vec<usize> = rank_cases(&stats, key).iter().map(|c| c.case_index).collect();
    Ok((1..=order.len())
        .map(|k| {
            let (tpr, tnr) = grid.aggregate(&order[..k]);
            FrontierPoint { k, tpr, tnr }
        })
        .collect())
}

/// Drops dominated points and repeated coordinates, keeping the smallest k.
pub fn undominated(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut out: Vec<FrontierPoint> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let beaten = points.iter().any(|q| q.dominates(p));
        let repeated = points[..i].iter().any(|q| q.tpr == p.tpr && q.tnr == p.tnr);
        if !beaten && !repeated {
            out.push(*p);
        }
    }
    out
}

pub fn pareto_frontier(grid: &PassGrid, key: RankKey) -> Result<Vec<FrontierPoint>, AnalyticsError> {
    Ok(undominated(&prefix_curve(grid, key)?))
}

/// How per-problem curves combine into one dataset curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontierGranularity {
    /// Each problem ranks its own cases; at size k every problem uses its
    /// best min(k, n) cases and the results are macro-averaged.
    #[default]
    PerProblem,
    /// Cases of all problems are ranked together; a problem with no case in
    /// the prefix yet counts as accepting everything.
    Pooled,
}

pub fn dataset_frontier(
    grids: &[PassGrid],
    key: RankKey,
    granularity: FrontierGranularity,
) -> Result<Vec<FrontierPoint>, AnalyticsError> {
    if grids.is_empty() {
        return Err(AnalyticsError::NoCases);
    }
    let n = grids.len() as f64;
    let curve: Vec<FrontierPoint> = match granularity {
        FrontierGranularity::PerProblem => {
            let curves = grids
                .iter()
                .map(|g| prefix_curve(g, key))
                .collect::<Result<Vec<_>, _>>()?;
            let max_k = curves.iter().map(Vec::len).max().unwrap_or(0);
            (1..=max_k)
                .map(|k| {
                    let (t, r) = curves.iter().fold((0.0, 0.0), |acc, c| {
                        let p = c[k.min(c.len()) - 1];
                        (acc.0 + p.tpr, acc.1 + p.tnr)
                    });
                    FrontierPoint { k, tpr: t / n, tnr: r / n }
                })
                .collect()
        }
        FrontierGranularity::Pooled => {
            let mut all: Vec<(usize, CaseQuality)> = Vec::new();
            for (gi, g) in grids.iter().enumerate() {
                all.extend(per_case_quality(g)?.into_iter().map(|c| (gi, c)));
            }
            if all.is_empty() {
                return Err(AnalyticsError::NoCases);
            }
            all.sort_by(|a, b| key.cmp(&a.1, &b.1).then(a.0.cmp(&b.0)));
            let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); grids.len()];
            let mut out = Vec::with_capacity(all.len());
            for (k, (gi, c)) in all.iter().enumerate() {
                chosen[*gi].push(c.case_index);
                let (t, r) = grids.iter().zip(&chosen).fold((0.0, 0.0), |acc, (g, cs)| {
                    let (tpr, tnr) = g.aggregate(cs);
                    (acc.0 + tpr, acc.1 + tnr)
                });
                out.push(FrontierPoint {
                    k: k + 1,
                    tpr: t / n,
                    tnr: r / n,
                });
            }
            out
        }
    };
    Ok(undominated(&curve))
}

/// Stable CSV: header `label,k,tpr,tnr`.
pub fn frontier_csv(rows: &[(String, Vec<FrontierPoint>)]) -> String {
    let mut out = String::from("label,k,tpr,tnr\n");
    for (label, points) in rows {
        for p in points {
            let _ = writeln!(out, "{label},{},{:.6},{:.6}", p.k, p.tpr, p.tnr);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub iteration: u32,
    pub mean_tpr: f64,
    pub mean_tnr: f64,
}

/// Macro-averaged metrics per iteration. Problems that stopped early carry
/// their last metrics forward. Traces without any evaluated iteration are
/// ignored.
pub fn iteration_progression(traces: &[LoopTrace]) -> Result<Vec<ProgressRow>, AnalyticsError> {
    let usable: Vec<&LoopTrace> = traces.iter().filter(|t| !t.snapshots.is_empty()).collect();
    if usable.is_empty() {
        return Err(AnalyticsError::NoTraces);
    }
    let last = usable
        .iter()
        .map(|t| t.n_max.max(t.snapshots.len() as u32 - 1))
        .max()
        .unwrap_or(0);
    let n = usable.len() as f64;
    Ok((0..=last)
        .map(|i| {
            let (t, r) = usable.iter().fold((0.0, 0.0), |acc, tr| {
                let idx = (i as usize).min(tr.snapshots.len() - 1);
                let m = &tr.snapshots[idx].state.metrics;
                (acc.0 + m.tpr, acc.1 + m.tnr)
            });
            ProgressRow {
                iteration: i,
                mean_tpr: t / n,
                mean_tnr: r / n,
            }
        })
        .collect())
}

pub fn progression_csv(rows: &[ProgressRow]) -> String {
    let mut out = String::from("iteration,tpr,tnr\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6}", r.iteration, r.mean_tpr, r.mean_tnr);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerEffect {
    pub delta_tpr: f64,
    pub delta_tnr: f64,
}

/// Checker metrics minus string metrics for the same suite and pools.
pub fn checker_effect(string: &EvaluationExport, checker: &EvaluationExport) -> Result<CheckerEffect, AnalyticsError> {
    if string.problem_id != checker.problem_id {
        return Err(AnalyticsError::Mismatch(format!(
            "problem `{}` vs `{}`",
            string.problem_id, checker.problem_id
        )));
    }
    if string.num_cases != checker.num_cases {
        return Err(AnalyticsError::Mismatch(format!(
            "{} cases vs {} cases",
            string.num_cases, checker.num_cases
        )));
    }
    if string.correct_pass.len() != checker.correct_pass.len()
        || string.incorrect_pass.len() != checker.incorrect_pass.len()
    {
        return Err(AnalyticsError::Mismatch("solution pools differ".into()));
    }
    Ok(CheckerEffect {
        delta_tpr: checker.metrics.tpr - string.metrics.tpr,
        delta_tnr: checker.metrics.tnr - string.metrics.tnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(correct: &[&str], incorrect: &[&str]) -> PassGrid {
        let rows = |xs: &[&str]| xs.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect();
        PassGrid {
            correct: rows(correct),
            incorrect: rows(incorrect),
            num_cases: correct[0].len(),
        }
    }

    #[test]
    fn perfect_case() {
        let g = grid(&["1", "1"], &["0"]);
        let q = per_case_quality(&g).unwrap();
        assert_eq!((q[0].case_tpr, q[0].case_tnr), (1.0, 1.0));
    }

    #[test]
    fn case_failed_by_everyone() {
        let g = grid(&["01"], &["01", "01"]);
        let q = per_case_quality(&g).unwrap();
        assert_eq!(q[0].case_tpr, 0.0);
        assert_eq!(q[0].case_tnr, 1.0);
        assert_eq!(q[1].case_tnr, 0.0);
    }

    #[test]
    fn single_case_frontier() {
        let g = grid(&["1"], &["0", "1"]);
        assert_eq!(
            pareto_frontier(&g, RankKey::default()).unwrap(),
            vec![FrontierPoint { k: 1, tpr: 1.0, tnr: 0.5 }]
        );
    }

    #[test]
    fn ties_break_by_case_index() {
        let g = grid(&["11"], &["00"]);
        let ranked = rank_cases(&per_case_quality(&g).unwrap(), RankKey::default());
        assert_eq!(ranked[0].case_index, 0);
        assert_eq!(ranked[1].case_index, 1);
    }

    #[test]
    fn empty_pools_are_errors() {
        let g = PassGrid {
            correct: vec![],
            incorrect: vec![vec![true]],
            num_cases: 1,
        };
        assert_eq!(per_case_quality(&g), Err(AnalyticsError::EmptyPool(Pool::Correct)));
    }

    #[test]
    fn full_prefix_matches_whole_suite() {
        let g = grid(&["110", "111"], &["101", "111", "011"]);
        let curve = prefix_curve(&g, RankKey::default()).unwrap();
        let last = curve.last().unwrap();
        assert_eq!((last.tpr, last.tnr), g.aggregate(&[0, 1, 2]));
        assert_eq!((last.tpr, last.tnr), (0.5, 2.0 / 3.0));
    }

    #[test]
    fn bits_parse() {
        let e = EvaluationExport {
            problem_id: "p".into(),
            mode: crate::judge::EvalMode::String,
            num_cases: 2,
            metrics: Default::default(),
            correct_pass: vec!["10".into()],
            incorrect_pass: vec!["01".into()],
            report: Default::default(),
        };
        let g = PassGrid::from_export(&e).unwrap();
        assert_eq!(g.correct, vec![vec![true, false]]);
        let bad = EvaluationExport {
            correct_pass: vec!["1".into()],
            ..e
        };
        assert!(PassGrid::from_export(&bad).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = frontier_csv(&[("iter0".into(), vec![FrontierPoint { k: 2, tpr: 0.5, tnr: 1.0 }])]);
        assert_eq!(csv, "label,k,tpr,tnr\niter0,2,0.500000,1.000000\n");
    }

    fn arb_grid() -> impl Strategy<Value = PassGrid> {
        (1usize..8, 1usize..6, 1usize..6).prop_flat_map(|(n, c, i)| {
            (
                prop::collection::vec(prop::collection::vec(any::<bool>(), n), c),
                prop::collection::vec(prop::collection::vec(any::<bool>(), n), i),
            )
                .prop_map(move |(correct, incorrect)| PassGrid {
                    correct,
                    incorrect,
                    num_cases: n,
                })
        })
    }

    proptest! {
        #[test]
        fn frontier_is_an_antichain(g in arb_grid()) {
            let f = pareto_frontier(&g, RankKey::default()).unwrap();
            for a in &f {
                for b in &f {
                    prop_assert!(!a.dominates(b));
                }
            }
        }

        #[test]
        fn pooled_and_per_problem_agree_for_one_problem_at_full_size(g in arb_grid()) {
            let full = g.aggregate(&(0..g.num_cases).collect::<Vec<_>>());
            for gran in [FrontierGranularity::PerProblem, FrontierGranularity::Pooled] {
                let f = dataset_frontier(std::slice::from_ref(&g), RankKey::default(), gran).unwrap();
                // the full suite is either on the frontier or dominated by a prefix
                prop_assert!(f.iter().any(|p| p.tpr >= full.0 && p.tnr >= full.1));
            }
        }
    }
}
