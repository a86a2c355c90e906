//! One instance per line:
//! `{"id","family","n","p"|"m","seed","edges":[[u,v],...],"gamma"}` with
//! edges `u < v` in lexicographic order, so equal datasets serialize to equal
//! bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabeledInstance;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::graph::{Family, GenParams, Graph};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    family: String,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    seed: u64,
    edges: Vec<[usize; 2]>,
    gamma: usize,
}

impl Record {
    fn from_instance(inst: &LabeledInstance) -> Self {
        let (p, m) = match inst.gen {
            GenParams::ErdosRenyi { p, .. } => (Some(p), None),
            GenParams::BarabasiAlbert { m, .. } => (None, Some(m)),
        };
        Record {
            id: inst.id.clone(),
            family: inst.gen.family().tag().to_owned(),
            n: inst.graph.n(),
            p,
            m,
            seed: inst.gen.seed(),
            edges: inst.graph.edges().map(|(u, v)| [u, v]).collect(),
            gamma: inst.gamma,
        }
    }

    fn into_instance(self) -> std::result::Result<LabeledInstance, String> {
        let family = Family::from_tag(&self.family).map_err(|e| e.to_string())?;
        let (n, seed) = (self.n, self.seed);
        let gen = match (family, self.p, self.m) {
            (Family::ErdosRenyi, Some(p), None) => GenParams::ErdosRenyi { n, p, seed },
            (Family::BarabasiAlbert, None, Some(m)) => GenParams::BarabasiAlbert { n, m, seed },
            (Family::ErdosRenyi, ..) => return Err("\"er\" records need \"p\" and no \"m\"".into()),
            (Family::BarabasiAlbert, ..) => return Err("\"ba\" records need \"m\" and no \"p\"".into()),
        };
        gen.validate().map_err(|e| e.to_string())?;
        if self.edges.iter().any(|&[u, v]| u >= v) {
            return Err("edges must be written as [u, v] with u < v".into());
        }
        if self.edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err("edges must be sorted and unique".into());
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        let graph = Graph::from_edges(n, &pairs).map_err(|e| e.to_string())?;
        if self.gamma == 0 && n > 0 || self.gamma > n {
            return Err(format!("gamma {} outside [1, {n}]", self.gamma));
        }
        Ok(LabeledInstance {
            id: self.id,
            graph,
            gamma: self.gamma,
            gen,
        })
    }
}

pub fn to_jsonl(instances: &[LabeledInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        let line = serde_json::to_string(&Record::from_instance(inst))
            .expect("records contain only finite numbers and strings");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Parses a JSON-Lines dataset. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn parse_jsonl(text: &str) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |message: String| Error::Parse { line: i + 1, message };
        let record: Record = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        out.push(record.into_instance().map_err(parse)?);
    }
    Ok(out)
}

pub fn save_jsonl(path: impl AsRef<Path>, instances: &[LabeledInstance]) -> Result<()> {
    write_atomic(path.as_ref(), to_jsonl(instances).as_bytes())
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<LabeledInstance>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text)
}
