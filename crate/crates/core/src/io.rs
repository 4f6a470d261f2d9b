//! Click logs (JSON lines), target policies (JSON) and result tables (CSV).
//!
//! Log lines look like
//!
//! ```text
//! {"query_id":"q0","ranking":[6,0,3,1,4,8,9,7,5,2],"clicks":[0,0,0,1,0,0,0,0,0,0],"propensities":[[...],...]}
//! ```
//!
//! where `propensities` is optional and holds the `K x K` item-by-rank
//! matrix of the logging policy.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{data_err, Error, Result};
use crate::estimator::TargetPolicy;
use crate::experiments::CellResult;
use crate::types::{ClickRecord, Ranking};

pub const RESULTS_HEADER: [&str; 10] = [
    "exponent",
    "stay_prob",
    "window",
    "n",
    "replications",
    "mean_estimate",
    "true_value",
    "bias",
    "variance",
    "mse",
];

pub fn write_log_to<W: Write>(mut w: W, records: &[ClickRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log(path: impl AsRef<Path>, records: &[ClickRecord]) -> Result<()> {
    write_log_to(BufWriter::new(File::create(path)?), records)
}

/// Reads one record per line. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_log_from<R: BufRead>(r: R) -> Result<Vec<ClickRecord>> {
    let mut out = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str::<ClickRecord>(&line)
            .map_err(|e| data_err!("line {}: {e}", idx + 1))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<ClickRecord>> {
    read_log_from(BufReader::new(File::open(path)?))
}

/// A target policy file: either one ranking applied to every query, or an
/// object mapping query ids to rankings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicyFile {
    Fixed(Ranking),
    PerQuery(BTreeMap<String, Ranking>),
}

impl TargetPolicy for PolicyFile {
    fn ranking_for(&self, query_id: &str) -> Option<&Ranking> {
        match self {
            PolicyFile::Fixed(r) => Some(r),
            PolicyFile::PerQuery(m) => m.get(query_id),
        }
    }
}

pub fn read_policy(path: impl AsRef<Path>) -> Result<PolicyFile> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    serde_json::from_str(&text).map_err(|e| data_err!("policy file: {e}"))
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes cells sorted by `(exponent, stay_prob, window)`; reals carry 17
/// significant digits.
pub fn write_results_to<W: Write>(w: W, cells: &[CellResult]) -> Result<()> {
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        a.exponent
            .total_cmp(&b.exponent)
            .then(a.stay_prob.total_cmp(&b.stay_prob))
            .then(a.window.cmp(&b.window))
    });
    let mut out = csv::Writer::from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(e.into());
    out.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for c in sorted {
        out.write_record([
            real(c.exponent),
            real(c.stay_prob),
            c.window.to_string(),
            c.n.to_string(),
            c.replications.to_string(),
            real(c.mean_estimate),
            real(c.true_value),
            real(c.bias),
            real(c.variance),
            real(c.mse),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_results(path: impl AsRef<Path>, cells: &[CellResult]) -> Result<()> {
    write_results_to(BufWriter::new(File::create(path)?), cells)
}

pub fn read_results_from<R: Read>(r: R) -> Result<Vec<CellResult>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| data_err!("results header: {e}"))?;
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(data_err!(
            "unexpected results header; expected {}",
            RESULTS_HEADER.join(",")
        ));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| data_err!("results row {}: {e}", i + 1)))
        .collect()
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<CellResult>> {
    read_results_from(BufReader::new(File::open(path)?))
}
