//! Labeled graph datasets: generation, stratified splits, and JSON-Lines files.

mod jsonl;
mod split;

pub use jsonl::{load_jsonl, parse_jsonl, save_jsonl, to_jsonl};
pub use split::{split, DatasetSplit, SplitConfig};

use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::graph::{generate, Family, GenParams, Graph};
use crate::rng::{derive_seed, Rng};
use crate::solver::{domination_number, domination_number_bruteforce};

/// Vertex counts used throughout the experiments.
pub const DEFAULT_N_RANGE: RangeInclusive<usize> = 5..=64;
/// Attachment count for Barabási–Albert graphs.
pub const BA_ATTACHMENT: usize = 2;
/// Search-node cap per instance while labeling.
pub const DEFAULT_LABEL_BUDGET: u64 = 200_000_000;
/// Regeneration attempts before labeling gives up on an instance.
const MAX_ATTEMPTS: u64 = 16;

/// A graph together with its exact domination number and the parameters it
/// was generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledInstance {
    pub id: String,
    pub graph: Graph,
    pub gamma: usize,
    pub gen: GenParams,
}

impl LabeledInstance {
    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub n_range: RangeInclusive<usize>,
    pub budget: u64,
    /// Worker threads used for labeling; output does not depend on it.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            n_range: DEFAULT_N_RANGE,
            budget: DEFAULT_LABEL_BUDGET,
            jobs: 1,
        }
    }
}

/// Generates and labels `count` graphs of one family.
///
/// Instance `i` draws its size, edge probability (ER), and graph seed from a
/// stream derived from `(seed, i, attempt)`, so the result is independent of
/// the number of worker threads. An instance whose labeling exceeds the search
/// budget is redrawn with the next attempt index.
pub fn generate_dataset(
    family: Family,
    count: usize,
    seed: u64,
    opts: &GenerateOptions,
) -> Result<Vec<LabeledInstance>> {
    if count == 0 {
        return Err(Error::param("dataset count must be at least 1"));
    }
    let (lo, hi) = (*opts.n_range.start(), *opts.n_range.end());
    let min_n = match family {
        Family::ErdosRenyi => 1,
        Family::BarabasiAlbert => BA_ATTACHMENT + 1,
    };
    if lo < min_n || lo > hi || hi > crate::graph::MAX_VERTICES {
        return Err(Error::param(format!("invalid vertex range [{lo}, {hi}] for {family}")));
    }
    if opts.jobs == 0 {
        return Err(Error::param("jobs must be at least 1"));
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<LabeledInstance>>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..opts.jobs.min(count) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let labeled = label_instance(family, i, seed, lo, hi, opts.budget);
                slots.lock().unwrap()[i] = Some(labeled);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every index is claimed by a worker"))
        .collect()
}

fn draw_params(family: Family, index: usize, attempt: u64, seed: u64, lo: usize, hi: usize) -> GenParams {
    let mut rng = Rng::new(derive_seed(derive_seed(seed, index as u64), attempt));
    let n = rng.range_inclusive(lo, hi);
    match family {
        Family::ErdosRenyi => GenParams::ErdosRenyi {
            n,
            p: rng.next_f64(),
            seed: rng.next_u64(),
        },
        Family::BarabasiAlbert => GenParams::BarabasiAlbert {
            n,
            m: BA_ATTACHMENT,
            seed: rng.next_u64(),
        },
    }
}

fn label_instance(
    family: Family,
    index: usize,
    seed: u64,
    lo: usize,
    hi: usize,
    budget: u64,
) -> Result<LabeledInstance> {
    let mut last = Error::param("no labeling attempts made");
    for attempt in 0..MAX_ATTEMPTS {
        let gen = draw_params(family, index, attempt, seed, lo, hi);
        let graph = generate(&gen)?;
        match domination_number(&graph, Some(budget)) {
            Ok(solved) => {
                return Ok(LabeledInstance {
                    id: format!("{}-{index:05}", family.tag()),
                    graph,
                    gamma: solved.gamma,
                    gen,
                })
            }
            Err(e @ Error::Budget { .. }) => {
                log::warn!("instance {index}: {e} on attempt {attempt}, regenerating");
                last = e;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// How thoroughly [`verify`] re-checks stored labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Brute force on graphs with at most this many vertices; larger ones are skipped.
    BruteForce { max_n: usize },
    /// Exact solver on every instance.
    Exact,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VerifySummary {
    pub checked: usize,
    pub skipped: usize,
}

/// Re-derives every instance: the stored edges must match a regeneration
/// from its parameters, and γ must match the chosen oracle.
pub fn verify(instances: &[LabeledInstance], mode: VerifyMode) -> Result<VerifySummary> {
    let mut summary = VerifySummary::default();
    for inst in instances {
        if generate(&inst.gen)? != inst.graph {
            return Err(Error::Integrity(format!(
                "{}: edges differ from regeneration with the stored parameters",
                inst.id
            )));
        }
        let expected = match mode {
            VerifyMode::BruteForce { max_n } if inst.n() <= max_n => {
                domination_number_bruteforce(&inst.graph, max_n)?.gamma
            }
            VerifyMode::BruteForce { .. } => {
                summary.skipped += 1;
                continue;
            }
            VerifyMode::Exact => domination_number(&inst.graph, None)?.gamma,
        };
        if expected != inst.gamma {
            return Err(Error::Integrity(format!(
                "{}: stored gamma {} but recomputed {expected}",
                inst.id, inst.gamma
            )));
        }
        summary.checked += 1;
    }
    Ok(summary)
}
