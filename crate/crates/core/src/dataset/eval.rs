use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid_id;
use crate::error::{Error, Result};
use crate::index::{ExternalTable, ShapeIndex};
use crate::retrieval::{blend_retrieve, BlendQuery, PartPick, PickSource};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CasePick {
    pub shape: u32,
    pub part: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub picks: Vec<CasePick>,
    pub ground_truth: u32,
}

impl EvalCase {
    pub fn query(&self, k: usize) -> BlendQuery {
        BlendQuery::new(
            self.picks
                .iter()
                .map(|p| PartPick::new(PickSource::Shape(p.shape), p.part.clone()))
                .collect(),
            k,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cases: usize,
    pub top1: f64,
    pub top5: f64,
    /// `top_k[i]` is the fraction of cases whose ground truth ranks within
    /// the first `i + 1` results.
    pub top_k: Vec<f64>,
    /// 1-based rank of the ground truth for every case.
    pub ranks: Vec<usize>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub runtime_secs: f64,
}

impl EvalReport {
    fn from_ranks(ranks: Vec<usize>, k: usize, runtime_secs: f64) -> Self {
        let n = ranks.len();
        let within = |k: usize| {
            if n == 0 {
                0.0
            } else {
                ranks.iter().filter(|&&r| r <= k).count() as f64 / n as f64
            }
        };
        EvalReport {
            cases: n,
            top1: within(1),
            top5: within(5),
            top_k: (1..=k).map(within).collect(),
            ranks,
            runtime_secs,
        }
    }

    /// Top-k accuracy as a plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!("{:>4}  {:>8}\n", "k", "accuracy");
        for (i, a) in self.top_k.iter().enumerate() {
            let _ = writeln!(s, "{:>4}  {:>7.2}%", i + 1, 100.0 * a);
        }
        let _ = writeln!(s, "cases {}  runtime {:.2}s", self.cases, self.runtime_secs);
        s
    }
}

/// Runs every case as a blend query over the whole index and records where
/// the ground truth lands.
pub fn run_blend_eval(index: &ShapeIndex, cases: &[EvalCase], k: usize) -> Result<EvalReport> {
    let start = Instant::now();
    let externals = ExternalTable::new();
    let mut ranks = Vec::with_capacity(cases.len());
    for case in cases {
        if index.row_of(case.ground_truth).is_none() {
            return Err(Error::MissingGroundTruth(case.ground_truth));
        }
        let results = blend_retrieve(index, &externals, &case.query(index.len()))?;
        let rank = results
            .iter()
            .position(|r| r.id == case.ground_truth)
            .unwrap()
            + 1;
        ranks.push(rank);
    }
    Ok(EvalReport::from_ranks(
        ranks,
        k,
        start.elapsed().as_secs_f64(),
    ))
}

/// One case per shape: every part from the shape itself.
pub fn self_cases(index: &ShapeIndex) -> Vec<EvalCase> {
    index
        .shapes()
        .iter()
        .map(|s| EvalCase {
            picks: index
                .label_set()
                .iter()
                .map(|l| CasePick {
                    shape: s.id,
                    part: l.clone(),
                })
                .collect(),
            ground_truth: s.id,
        })
        .collect()
}

/// Cross cases over an `L×B` grid: legs from `(i, i mod B)`, backrest from
/// `(j mod L, j)`, expecting `(i, j)`.
pub fn grid_cases(legs: usize, backs: usize) -> Vec<EvalCase> {
    let mut out = Vec::with_capacity(legs * backs);
    for i in 0..legs {
        for j in 0..backs {
            out.push(EvalCase {
                picks: vec![
                    CasePick {
                        shape: grid_id(i, i % backs, backs),
                        part: "legs".into(),
                    },
                    CasePick {
                        shape: grid_id(j % legs, j, backs),
                        part: "backrest".into(),
                    },
                ],
                ground_truth: grid_id(i, j, backs),
            });
        }
    }
    out
}

/// Same picks, ground truth replaced by a uniformly drawn indexed shape.
/// Top-1 accuracy on these cases estimates random chance, `1/n`.
pub fn shuffled_ground_truth(index: &ShapeIndex, cases: &[EvalCase], seed: u64) -> Vec<EvalCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cases
        .iter()
        .map(|c| EvalCase {
            picks: c.picks.clone(),
            ground_truth: index.shapes()[rng.gen_range(0..index.len())].id,
        })
        .collect()
}
