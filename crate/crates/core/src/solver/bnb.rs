//! Branch-and-bound for the minimum dominating set.
//!
//! The search keeps the partial set `D`, the undominated vertices `U`, and the
//! candidate vertices `C` still allowed to enter `D`. At every node it picks
//! the undominated vertex `u` with the fewest candidates in `N[u]` and branches
//! on each of them in decreasing order of how many undominated vertices they
//! cover. Once a sibling has been explored it is removed from `C` for the
//! remaining siblings, since every solution containing it was already seen.
//!
//! A node is pruned when `|D| + ceil(|U| / (1 + Δ)) >= |best|`, with `Δ` the
//! maximum degree: one vertex dominates at most `1 + Δ` others. Candidates
//! that no longer cover an undominated vertex are dropped, and a node where
//! some undominated vertex has no candidate left is abandoned.

use super::bits::Bits;

pub(super) struct Outcome {
    pub best: Vec<usize>,
    pub nodes: u64,
    pub exhausted: bool,
}

pub(super) struct Search<const W: usize> {
    closed: Vec<Bits<W>>,
    max_closed: usize,
    best: Vec<usize>,
    chosen: Vec<usize>,
    nodes: u64,
    node_limit: u64,
    exhausted: bool,
}

impl<const W: usize> Search<W> {
    /// `neighbors[v]` is the open neighborhood of `v`; `incumbent` must dominate.
    pub fn run(neighbors: &[&[usize]], incumbent: Vec<usize>, node_limit: u64) -> Outcome {
        let n = neighbors.len();
        let closed: Vec<Bits<W>> = neighbors
            .iter()
            .enumerate()
            .map(|(v, list)| {
                let mut b = Bits::EMPTY;
                b.insert(v);
                for &u in *list {
                    b.insert(u);
                }
                b
            })
            .collect();
        let max_closed = closed.iter().map(|b| b.count() as usize).max().unwrap_or(1);
        let mut search = Search {
            closed,
            max_closed,
            best: incumbent,
            chosen: Vec::with_capacity(n),
            nodes: 0,
            node_limit,
            exhausted: false,
        };
        search.dfs(Bits::full(n), Bits::full(n));
        Outcome {
            best: search.best,
            nodes: search.nodes,
            exhausted: search.exhausted,
        }
    }

    fn dfs(&mut self, undominated: Bits<W>, mut candidates: Bits<W>) {
        if undominated.is_empty() {
            if self.chosen.len() < self.best.len() {
                self.best.clone_from(&self.chosen);
            }
            return;
        }
        if self.nodes >= self.node_limit {
            self.exhausted = true;
            return;
        }
        self.nodes += 1;
        let depth = self.chosen.len();
        if depth + 1 >= self.best.len() {
            return;
        }

        // Candidate coverage; candidates covering nothing are dropped.
        let mut coverage: Vec<(u32, usize)> = Vec::with_capacity(64 * W);
        let snapshot = candidates;
        for w in snapshot.iter() {
            let c = self.closed[w].and(&undominated).count();
            if c == 0 {
                candidates.remove(w);
            } else {
                coverage.push((c, w));
            }
        }

        let remaining = undominated.count() as usize;
        let room = self.best.len() - depth;
        if remaining.div_ceil(self.max_closed) >= room {
            return;
        }

        // Branch on the undominated vertex with the fewest options.
        let mut pivot = usize::MAX;
        let mut pivot_options = u32::MAX;
        for u in undominated.iter() {
            let k = self.closed[u].and(&candidates).count();
            if k == 0 {
                return;
            }
            if k < pivot_options {
                pivot_options = k;
                pivot = u;
            }
        }

        // Largest coverage first, ties by lowest index.
        coverage.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let branch = self.closed[pivot].and(&candidates);
        let order: Vec<usize> = coverage
            .iter()
            .filter(|&&(_, w)| branch.contains(w))
            .map(|&(_, w)| w)
            .collect();
        for w in order {
            if self.exhausted || depth + 1 >= self.best.len() {
                break;
            }
            candidates.remove(w);
            self.chosen.push(w);
            self.dfs(undominated.and_not(&self.closed[w]), candidates);
            self.chosen.pop();
        }
    }
}
