use crate::graph::{Graph, VertexSet};

/// Repeatedly takes the vertex whose closed neighborhood covers the most
/// undominated vertices (lowest index on ties).
pub fn greedy_dominating_set(g: &Graph) -> VertexSet {
    let n = g.n();
    let mut dominated = vec![false; n];
    let mut remaining = n;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let gain = |v: usize| usize::from(!dominated[v]) + g.neighbors(v).iter().filter(|&&u| !dominated[u]).count();
        let mut best = (0, 0);
        for v in 0..n {
            let c = gain(v);
            if c > best.1 {
                best = (v, c);
            }
        }
        let v = best.0;
        chosen.push(v);
        for w in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
            if !dominated[w] {
                dominated[w] = true;
                remaining -= 1;
            }
        }
    }
    VertexSet::new(chosen)
}
