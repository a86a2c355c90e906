//! Exact domination numbers.

mod bits;
mod bnb;
mod brute;
mod greedy;

pub use brute::{domination_number_bruteforce, DEFAULT_MAX_N};
pub use greedy::greedy_dominating_set;

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};

/// A minimum dominating set together with search statistics.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub gamma: usize,
    pub witness: VertexSet,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

/// Exact domination number by branch-and-bound.
///
/// Connected components are solved independently (γ is additive over them),
/// each seeded with the greedy set as incumbent. `budget` caps the total
/// number of search nodes; running out yields [`Error::Budget`] with the best
/// upper bound known at that point.
pub fn domination_number(g: &Graph, budget: Option<u64>) -> Result<SolveResult> {
    let start = Instant::now();
    let limit = budget.unwrap_or(u64::MAX);
    let mut witness = Vec::new();
    let mut nodes = 0u64;
    let components = g.components();
    for (i, comp) in components.iter().enumerate() {
        if comp.len() == 1 {
            witness.push(comp[0]);
            continue;
        }
        let sub = g.induced(comp);
        let incumbent = greedy_dominating_set(&sub).members().to_vec();
        let outcome = solve_component(&sub, incumbent, limit - nodes);
        nodes += outcome.nodes;
        witness.extend(outcome.best.iter().map(|&v| comp[v]));
        if outcome.exhausted {
            let rest: usize = components[i + 1..]
                .iter()
                .map(|c| greedy_dominating_set(&g.induced(c)).len())
                .sum();
            return Err(Error::Budget {
                budget: limit,
                upper_bound: witness.len() + rest,
            });
        }
    }
    let witness = VertexSet::new(witness);
    Ok(SolveResult {
        gamma: witness.len(),
        witness,
        nodes_explored: nodes,
        elapsed: start.elapsed(),
    })
}

fn solve_component(g: &Graph, incumbent: Vec<usize>, limit: u64) -> bnb::Outcome {
    let lists: Vec<&[usize]> = (0..g.n()).map(|v| g.neighbors(v)).collect();
    match g.n().div_ceil(64) {
        0 | 1 => bnb::Search::<1>::run(&lists, incumbent, limit),
        2 => bnb::Search::<2>::run(&lists, incumbent, limit),
        3 | 4 => bnb::Search::<4>::run(&lists, incumbent, limit),
        5..=8 => bnb::Search::<8>::run(&lists, incumbent, limit),
        9..=16 => bnb::Search::<16>::run(&lists, incumbent, limit),
        17..=32 => bnb::Search::<32>::run(&lists, incumbent, limit),
        _ => bnb::Search::<64>::run(&lists, incumbent, limit),
    }
}
