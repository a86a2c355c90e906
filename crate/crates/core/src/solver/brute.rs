use std::time::Instant;

use super::SolveResult;
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};

pub const DEFAULT_MAX_N: usize = 16;

/// Exhaustive search over subsets in order of increasing size.
///
/// Subsets of each size are visited in lexicographic order, so the witness is
/// the lexicographically smallest minimum dominating set.
pub fn domination_number_bruteforce(g: &Graph, max_n: usize) -> Result<SolveResult> {
    let n = g.n();
    if n > max_n || n > 63 {
        return Err(Error::SizeGuard {
            n,
            max_n: max_n.min(63),
        });
    }
    let start = Instant::now();
    let closed: Vec<u64> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(1u64 << v, |acc, &u| acc | 1 << u))
        .collect();
    let all = (1u64 << n) - 1;
    let mut visited = 0u64;
    for k in 0..=n {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            visited += 1;
            let covered = combo.iter().fold(0u64, |acc, &v| acc | closed[v]);
            if covered == all {
                return Ok(SolveResult {
                    gamma: k,
                    witness: VertexSet::new(combo),
                    nodes_explored: visited,
                    elapsed: start.elapsed(),
                });
            }
            if !next_combination(&mut combo, n) {
                break;
            }
        }
    }
    unreachable!("the full vertex set always dominates")
}

fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
        return false;
    };
    combo[i] += 1;
    for j in i + 1..k {
        combo[j] = combo[j - 1] + 1;
    }
    true
}
