//! Policy files: a metadata comment line followed by CSV rows `i,j,r`
//! (uniform) or `n,i,j,r` (positional). Only nonzero entries are written, and
//! values use the shortest exact decimal form so files round-trip bit for bit.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use netrec_core::model::Policy;

use crate::CliError;

pub const POLICY_HEADER: &str = "# netrec-policy v1";

pub fn write_policy<W: Write>(out: W, p: &Policy, label: &str) -> Result<(), CliError> {
    let mut out = out;
    let (kind, mats): (&str, Vec<&DMatrix<f64>>) = match p {
        Policy::Uniform(r) => ("uniform", vec![r]),
        Policy::Positional(rs) => ("positional", rs.iter().collect()),
    };
    let n = match p {
        Policy::Uniform(r) => r.row(0).sum().round() as usize,
        Policy::Positional(rs) => rs.len(),
    };
    writeln!(out, "{POLICY_HEADER} kind={kind} K={} N={n} policy={label}", p.k())?;
    let mut w = csv::Writer::from_writer(out);
    if p.is_positional() {
        w.write_record(["n", "i", "j", "r"])?;
    } else {
        w.write_record(["i", "j", "r"])?;
    }
    for (slot, r) in mats.iter().enumerate() {
        for i in 0..r.nrows() {
            for j in 0..r.ncols() {
                let x = r[(i, j)];
                if x == 0.0 {
                    continue;
                }
                if p.is_positional() {
                    w.write_record([slot.to_string(), i.to_string(), j.to_string(), x.to_string()])?;
                } else {
                    w.write_record([i.to_string(), j.to_string(), x.to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_policy(path: &Path, p: &Policy, label: &str) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_policy(std::io::BufWriter::new(file), p, label)
}

/// Metadata from the header line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyMeta {
    pub positional: bool,
    pub k: usize,
    pub n: usize,
    pub label: String,
}

fn parse_meta(line: &str) -> Result<PolicyMeta, CliError> {
    let rest = line
        .strip_prefix(POLICY_HEADER)
        .ok_or_else(|| CliError::Invalid(format!("not a policy file (first line must start with `{POLICY_HEADER}`)")))?;
    let mut meta = PolicyMeta { positional: false, k: 0, n: 0, label: String::new() };
    for token in rest.split_whitespace() {
        let (key, value) = token.split_once('=').ok_or_else(|| CliError::Invalid(format!("bad metadata `{token}`")))?;
        let number = || value.parse::<usize>().map_err(|_| CliError::Invalid(format!("bad metadata `{token}`")));
        match key {
            "kind" => meta.positional = value == "positional",
            "K" => meta.k = number()?,
            "N" => meta.n = number()?,
            "policy" => meta.label = value.to_string(),
            _ => {}
        }
    }
    if meta.k == 0 || meta.n == 0 {
        return Err(CliError::Invalid("policy metadata lacks K or N".into()));
    }
    Ok(meta)
}

pub fn read_policy<R: Read>(input: R) -> Result<(Policy, PolicyMeta), CliError> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let meta = parse_meta(first.trim_end())?;
    let blocks = if meta.positional { meta.n } else { 1 };
    let mut mats = vec![DMatrix::zeros(meta.k, meta.k); blocks];
    let mut rows = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let width = if meta.positional { 4 } else { 3 };
    for (line, record) in rows.records().enumerate() {
        let record = record?;
        let bad = || CliError::Invalid(format!("policy row {}: expected {width} fields within range", line + 1));
        if record.len() != width {
            return Err(bad());
        }
        let idx = |t: usize| record[t].parse::<usize>().map_err(|_| bad());
        let (slot, i, j) = if meta.positional { (idx(0)?, idx(1)?, idx(2)?) } else { (0, idx(0)?, idx(1)?) };
        let value: f64 = record[width - 1].parse().map_err(|_| bad())?;
        if slot >= blocks || i >= meta.k || j >= meta.k {
            return Err(bad());
        }
        mats[slot][(i, j)] = value;
    }
    let policy = if meta.positional { Policy::Positional(mats) } else { Policy::Uniform(mats.pop().expect("one block")) };
    Ok((policy, meta))
}

pub fn load_policy(path: &Path) -> Result<(Policy, PolicyMeta), CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_policy(file)
}
