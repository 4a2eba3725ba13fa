//! Instance JSON, plain numeric CSV tables, reward paths and traces.
//!
//! Link and channel indices are 1-based in every file; floats are written
//! with `{:.16e}` so that a write/read cycle is exact.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spectrum_bandit_core::harness::RegretTrace;
use spectrum_bandit_core::{ConflictGraph, Instance, Table};

use crate::{Result, SimError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interference {
    Full,
    #[default]
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub c: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub interference: Interference,
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<Instance> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &[a, b] in &self.edges {
            if a == 0 || b == 0 || a > self.n || b > self.n {
                return Err(SimError::validation(format!(
                    "edge [{a}, {b}] outside links 1..={}",
                    self.n
                )));
            }
            edges.push((a - 1, b - 1));
        }
        let graph = match self.interference {
            Interference::Full => ConflictGraph::complete(self.n)?,
            Interference::Explicit => ConflictGraph::new(self.n, &edges)?,
        };
        Ok(Instance::new(graph, self.c)?)
    }

    pub fn from_instance(instance: &Instance) -> Self {
        if instance.is_full_interference() {
            return InstanceFile {
                n: instance.links(),
                c: instance.channels(),
                edges: Vec::new(),
                interference: Interference::Full,
            };
        }
        InstanceFile {
            n: instance.links(),
            c: instance.channels(),
            edges: instance.graph().edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            interference: Interference::Explicit,
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.to_instance()
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    parse_instance(&std::fs::read_to_string(path).map_err(SimError::io(path))?)
}

/// Rows of comma-separated numbers; blank lines and `#` comments are skipped.
pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| SimError::validation(format!("not a number: {field:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SimError::validation("empty table"));
    }
    Ok(Table::from_rows(&rows)?)
}

pub fn read_table_file(path: &Path) -> Result<Table> {
    read_table(std::fs::File::open(path).map_err(SimError::io(path))?)
}

pub fn write_table<W: Write>(mut out: W, table: &Table) -> std::io::Result<()> {
    for i in 0..table.rows() {
        let row: Vec<String> = table.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    t: usize,
    i: usize,
    j: usize,
    r: String,
}

/// Writes the real channels of every round as `t,i,j,r` rows.
pub fn write_reward_path<W: Write>(out: W, instance: &Instance, path: &[Table]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for (k, table) in path.iter().enumerate() {
        for i in 0..instance.links() {
            for j in 0..instance.channels() {
                wtr.serialize(PathRow {
                    t: k + 1,
                    i: i + 1,
                    j: j + 1,
                    r: format!("{:.16e}", table[(i, j)]),
                })?;
            }
        }
    }
    wtr.flush().map_err(SimError::io("<reward path>"))?;
    Ok(())
}

/// Reads a reward path for `instance`. Every round `1..=T` must list each
/// real cell exactly once; tables come back padded to the instance width.
pub fn read_reward_path<R: Read>(reader: R, instance: &Instance) -> Result<Vec<Table>> {
    let (n, c) = (instance.links(), instance.channels());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "i", "j", "r"] {
        return Err(SimError::validation("reward path header must be t,i,j,r"));
    }
    let mut tables: Vec<Table> = Vec::new();
    let mut seen: Vec<Vec<bool>> = Vec::new();
    for row in rdr.deserialize::<PathRow>() {
        let row = row?;
        if row.t == 0 || row.i == 0 || row.j == 0 || row.i > n || row.j > c {
            return Err(SimError::validation(format!(
                "reward path row ({}, {}, {}) out of range",
                row.t, row.i, row.j
            )));
        }
        let r: f64 = row
            .r
            .parse()
            .map_err(|_| SimError::validation(format!("not a number: {:?}", row.r)))?;
        while tables.len() < row.t {
            tables.push(Table::zeros(n, instance.width()));
            seen.push(vec![false; n * c]);
        }
        let cell = (row.i - 1) * c + row.j - 1;
        if std::mem::replace(&mut seen[row.t - 1][cell], true) {
            return Err(SimError::validation(format!(
                "duplicate reward for t={} i={} j={}",
                row.t, row.i, row.j
            )));
        }
        tables[row.t - 1][(row.i - 1, row.j - 1)] = r;
    }
    if let Some(t) = seen.iter().position(|s| s.contains(&false)) {
        return Err(SimError::validation(format!("round {} is incomplete", t + 1)));
    }
    if tables.is_empty() {
        return Err(SimError::validation("reward path has no rows"));
    }
    Ok(tables)
}

pub fn read_reward_path_file(path: &Path, instance: &Instance) -> Result<Vec<Table>> {
    read_reward_path(std::fs::File::open(path).map_err(SimError::io(path))?, instance)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub config_id: String,
    pub reward: f64,
    pub cum_reward: f64,
    pub cum_regret: f64,
}

pub fn write_trace<W: Write>(out: W, trace: &RegretTrace) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["t", "config_id", "reward", "cum_reward", "cum_regret"])?;
    for r in &trace.records {
        wtr.write_record([
            r.t.to_string(),
            r.config.label(),
            format!("{:.16e}", r.reward),
            format!("{:.16e}", r.cum_reward),
            format!("{:.16e}", r.cum_regret),
        ])?;
    }
    wtr.flush().map_err(SimError::io("<trace>"))?;
    Ok(())
}

pub fn read_trace<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_instance_ignores_edges() {
        let inst = parse_instance(r#"{"n": 3, "c": 2, "interference": "full"}"#).unwrap();
        assert!(inst.is_full_interference());
        assert_eq!(inst.width(), 3);
    }

    #[test]
    fn edges_are_one_based() {
        let inst = parse_instance(r#"{"n": 3, "c": 2, "edges": [[1, 2], [2, 3]], "interference": "explicit"}"#).unwrap();
        assert_eq!(inst.graph().edges(), &[(0, 1), (1, 2)]);
        assert!(parse_instance(r#"{"n": 3, "c": 2, "edges": [[0, 2]]}"#).is_err());
        assert!(parse_instance(r#"{"n": 3, "c": 2, "edges": [[1, 4]]}"#).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_instance(r#"{"n": 1, "c": 1, "links": 2}"#).is_err());
    }

    #[test]
    fn table_skips_comments() {
        let t = read_table("# weights\n0.9, 0.1\n\n0.2,0.8\n".as_bytes()).unwrap();
        assert_eq!(t, Table::from_rows(&[[0.9, 0.1], [0.2, 0.8]]).unwrap());
        assert!(read_table("1,2\n3\n".as_bytes()).is_err());
        assert!(read_table("1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn reward_path_needs_header_and_full_rounds() {
        let inst = Instance::full_interference(1, 2).unwrap();
        assert!(read_reward_path("1,1,1,0.5\n".as_bytes(), &inst).is_err());
        assert!(read_reward_path("t,i,j,r\n1,1,1,0.5\n".as_bytes(), &inst).is_err());
        assert!(read_reward_path("t,i,j,r\n1,1,1,0.5\n1,1,1,0.5\n".as_bytes(), &inst).is_err());
        let path = read_reward_path("t,i,j,r\n1,1,2,0.25\n1,1,1,0.5\n".as_bytes(), &inst).unwrap();
        assert_eq!(path, vec![Table::from_rows(&[[0.5, 0.25]]).unwrap()]);
    }
}
