//! Artifacts: JSON-lines run logs, summary JSON and CSV mirrors.
//!
//! Every artifact starts from a [`Header`] echoing the resolved
//! configuration, so a report can be re-run from its own contents. Summaries
//! carry no timings; those go to a separate timing file so that equal
//! configurations produce byte-identical summaries.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::hann::{SolutionSet, SolveResult};

pub const TOOL: &str = "hann";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: Value,
}

impl Header {
    pub fn new(command: impl Into<String>, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL,
            version: VERSION,
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
        })
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    record: &'static str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct IndexedRun<'a> {
    index: usize,
    #[serde(flatten)]
    run: &'a SolveResult,
}

/// Header line followed by one line per run.
pub fn write_runs_jsonl<W: Write>(mut w: W, header: &Header, results: &[SolveResult]) -> Result<()> {
    serde_json::to_writer(&mut w, &Tagged { record: "header", body: header })?;
    writeln!(w)?;
    for (index, run) in results.iter().enumerate() {
        let body = IndexedRun { index, run };
        serde_json::to_writer(&mut w, &Tagged { record: "run", body: &body })?;
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSummary {
    pub representative: Vec<f64>,
    pub residual: f64,
    pub size: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSummary {
    pub runs: usize,
    pub usable: usize,
    pub threshold: f64,
    pub cluster_count: usize,
    pub clusters: Vec<ClusterSummary>,
    pub max_cluster_residual: Option<f64>,
    pub warnings: Vec<String>,
}

impl SetSummary {
    pub fn new(set: &SolutionSet) -> Self {
        Self {
            runs: set.results.len(),
            usable: set.results.iter().filter(|r| r.is_usable()).count(),
            threshold: set.threshold,
            cluster_count: set.clusters.len(),
            clusters: set
                .clusters
                .iter()
                .map(|c| ClusterSummary {
                    representative: c.representative.clone(),
                    residual: c.min_residual,
                    size: c.members.len(),
                    members: c.members.clone(),
                })
                .collect(),
            max_cluster_residual: (!set.clusters.is_empty()).then(|| set.max_cluster_residual()),
            warnings: set.warnings.clone(),
        }
    }
}

/// A header plus a result body, written as one JSON document.
#[derive(Debug, Clone, Serialize)]
pub struct Document<T: Serialize> {
    #[serde(flatten)]
    pub header: Header,
    pub result: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(header: Header, result: T) -> Self {
        Self { header, result }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub run_seconds: Vec<f64>,
}

impl Timing {
    pub fn of_runs(total_seconds: f64, results: &[SolveResult]) -> Self {
        Self {
            total_seconds,
            run_seconds: results.iter().map(|r| r.wall_time).collect(),
        }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(",")
}

/// `index,seed,status,residual,x0_1..x0_n,x_1..x_n`, one row per run.
pub fn write_runs_csv<W: Write>(mut w: W, results: &[SolveResult]) -> std::io::Result<()> {
    let n = results.first().map_or(0, |r| r.initial.len());
    let mut header = vec!["index".to_string(), "seed".into(), "status".into(), "residual".into()];
    header.extend((1..=n).map(|i| format!("x0_{i}")));
    header.extend((1..=n).map(|i| format!("x_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for (i, r) in results.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{:e},{},{}",
            r.seed,
            r.status,
            r.residual,
            join(&r.initial),
            join(&r.x_final)
        )?;
    }
    Ok(())
}

/// `cluster,size,residual,x_1..x_n`, one row per cluster.
pub fn write_clusters_csv<W: Write>(mut w: W, set: &SolutionSet) -> std::io::Result<()> {
    let n = set.clusters.first().map_or(0, |c| c.representative.len());
    let mut header = vec!["cluster".to_string(), "size".into(), "residual".into()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    writeln!(w, "{}", header.join(","))?;
    for (i, c) in set.clusters.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{:e},{}",
            c.members.len(),
            c.min_residual,
            join(&c.representative)
        )?;
    }
    Ok(())
}
