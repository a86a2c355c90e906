use std::fmt;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "er")]
    ErdosRenyi,
    #[serde(rename = "ba")]
    BarabasiAlbert,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::ErdosRenyi => "er",
            Family::BarabasiAlbert => "ba",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "er" => Ok(Family::ErdosRenyi),
            "ba" => Ok(Family::BarabasiAlbert),
            other => Err(Error::param(format!("unknown graph family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parameters that fully determine a generated graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GenParams {
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    BarabasiAlbert { n: usize, m: usize, seed: u64 },
}

impl GenParams {
    pub fn family(&self) -> Family {
        match self {
            GenParams::ErdosRenyi { .. } => Family::ErdosRenyi,
            GenParams::BarabasiAlbert { .. } => Family::BarabasiAlbert,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            GenParams::ErdosRenyi { n, .. } | GenParams::BarabasiAlbert { n, .. } => n,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            GenParams::ErdosRenyi { seed, .. } | GenParams::BarabasiAlbert { seed, .. } => seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GenParams::ErdosRenyi { p, .. } if !(0.0..=1.0).contains(&p) => {
                Err(Error::param(format!("edge probability {p} outside [0, 1]")))
            }
            GenParams::BarabasiAlbert { n, m, .. } if m < 1 || m >= n => Err(Error::param(format!(
                "attachment count m={m} must satisfy 1 <= m < n={n}"
            ))),
            _ if self.n() > super::MAX_VERTICES => Err(Error::param(format!(
                "{} vertices exceeds the {}-vertex limit",
                self.n(),
                super::MAX_VERTICES
            ))),
            _ => Ok(()),
        }
    }
}

pub fn generate(params: &GenParams) -> Result<Graph> {
    match params.family() {
        Family::ErdosRenyi => erdos_renyi(params),
        Family::BarabasiAlbert => barabasi_albert(params),
    }
}

/// G(n, p): one uniform draw per pair `(u, v)`, `u < v`, in lexicographic
/// order; the edge is kept when the draw is below `p`.
pub fn erdos_renyi(params: &GenParams) -> Result<Graph> {
    params.validate()?;
    let GenParams::ErdosRenyi { n, p, seed } = *params else {
        return Err(Error::param("erdos_renyi called with non-ER parameters"));
    };
    let mut rng = Rng::new(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.next_f64() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Preferential attachment G(n, m).
///
/// Vertices `0..m` start isolated and vertex `m` joins all of them. Every later
/// vertex picks `m` distinct targets by repeatedly drawing a uniform entry of
/// the endpoint list (each vertex appears once per incident edge) and
/// discarding repeats. Targets are connected in draw order and then appended
/// to the endpoint list, followed by `m` copies of the new vertex. The result
/// has exactly `m * (n - m)` edges.
pub fn barabasi_albert(params: &GenParams) -> Result<Graph> {
    params.validate()?;
    let GenParams::BarabasiAlbert { n, m, seed } = *params else {
        return Err(Error::param("barabasi_albert called with non-BA parameters"));
    };
    let mut rng = Rng::new(seed);
    let mut edges = Vec::with_capacity(m * (n - m));
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((t, source));
        }
        endpoints.extend_from_slice(&targets);
        endpoints.extend(std::iter::repeat_n(source, m));

        if source + 1 < n {
            targets.clear();
            while targets.len() < m {
                let pick = endpoints[rng.below(endpoints.len() as u64) as usize];
                if !targets.contains(&pick) {
                    targets.push(pick);
                }
            }
        }
    }
    Graph::from_edges(n, &edges)
}
