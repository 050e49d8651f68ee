//! Parameter sweeps: one scenario per (axis value, seed) cell, every selected
//! policy solved in each cell, one CSV row per (cell, policy).

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use netrec_core::config::{ClickSpec, ScenarioConfig};
use netrec_core::lp_solve::SolveOptions;
use netrec_core::model::entropy;
use netrec_core::policies::{compute, PolicyKind};
use rayon::prelude::*;

use crate::metrics::{gain, mph, or_na};
use crate::CliError;

pub const SWEEP_HEADER: &str = "# netrec-sweep v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Q,
    N,
    Alpha,
    /// Zipf exponent of popularity.
    S,
    /// Zipf exponent of the slot click probabilities; rows report the
    /// resulting entropy.
    Hv,
    /// Cache size.
    C,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Q => "q",
            Axis::N => "N",
            Axis::Alpha => "alpha",
            Axis::S => "s",
            Axis::Hv => "Hv",
            Axis::C => "C",
        }
    }

    /// The template with this axis set to `value`.
    pub fn apply(self, template: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, CliError> {
        let mut cfg = template.clone();
        let count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(CliError::Invalid(format!("{} needs a nonnegative integer, got {v}", self.name())))
            }
        };
        match self {
            Axis::Q => cfg.q = value,
            Axis::N => cfg.n = count(value)?,
            Axis::Alpha => cfg.alpha = value,
            Axis::S => {
                cfg.s = Some(value);
                cfg.p0 = None;
            }
            Axis::Hv => cfg.v = ClickSpec::Zipf { zipf: value },
            Axis::C => {
                cfg.cache = Some(count(value)?);
                cfg.c = None;
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q" | "quality" => Ok(Axis::Q),
            "n" | "slots" => Ok(Axis::N),
            "alpha" => Ok(Axis::Alpha),
            "s" | "zipf" => Ok(Axis::S),
            "hv" | "entropy" => Ok(Axis::Hv),
            "c" | "cache" => Ok(Axis::C),
            other => Err(format!("unknown axis `{other}` (q, N, alpha, s, Hv, C)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub template: ScenarioConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    /// Policy the gain column is measured against.
    pub reference: PolicyKind,
    /// Scenario seeds; each seed is a replication of every axis value.
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::Invalid("sweep needs at least one axis value".into()));
        }
        if self.policies.is_empty() {
            return Err(CliError::Invalid("sweep needs at least one policy".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Invalid("sweep needs at least one seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    /// Entropy of the click probabilities used in the cell.
    pub hv: Option<f64>,
    pub seed: u64,
    pub policy: PolicyKind,
    pub status: &'static str,
    pub chr: Option<f64>,
    pub ltec: Option<f64>,
    pub gain: Option<f64>,
    pub mph: Option<f64>,
    pub wall_ms: f64,
    pub note: String,
}

struct CellResult {
    chr: Option<f64>,
    ltec: f64,
    wall_ms: f64,
}

fn run_cell(spec: &SweepSpec, value: f64, seed: u64, opts: &SolveOptions) -> Vec<SweepRow> {
    let row = |policy, status, note: String| SweepRow {
        axis: spec.axis,
        value,
        hv: None,
        seed,
        policy,
        status,
        chr: None,
        ltec: None,
        gain: None,
        mph: None,
        wall_ms: 0.0,
        note,
    };
    let built = spec.axis.apply(&spec.template, value).and_then(|mut cfg| {
        cfg.seed = seed;
        cfg.build().map_err(CliError::from)
    });
    let scenario = match built {
        Ok(b) => b.scenario,
        Err(e) => return spec.policies.iter().map(|&p| row(p, e.status(), e.to_string())).collect(),
    };
    let hv = entropy(scenario.clicks()).ok();
    let cell_mph = mph(scenario.popularity(), scenario.costs());

    let mut kinds = spec.policies.clone();
    if !kinds.contains(&spec.reference) {
        kinds.push(spec.reference);
    }
    let results: Vec<(PolicyKind, Result<CellResult, CliError>)> = kinds
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let res = compute(kind, &scenario, opts).map_err(CliError::from).map(|solved| CellResult {
                chr: solved.report.chr,
                ltec: solved.report.ltec,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            (kind, res)
        })
        .collect();
    let reference_chr = results
        .iter()
        .find(|(k, _)| *k == spec.reference)
        .and_then(|(_, r)| r.as_ref().ok())
        .and_then(|r| r.chr);

    results
        .into_iter()
        .filter(|(kind, _)| spec.policies.contains(kind))
        .map(|(kind, res)| {
            let mut out = match res {
                Ok(r) => SweepRow {
                    status: "ok",
                    chr: r.chr,
                    ltec: Some(r.ltec),
                    gain: r.chr.zip(reference_chr).and_then(|(x, y)| gain(x, y)),
                    wall_ms: r.wall_ms,
                    ..row(kind, "ok", String::new())
                },
                Err(e) => row(kind, e.status(), e.to_string()),
            };
            out.hv = hv;
            out.mph = cell_mph;
            out
        })
        .collect()
}

/// Runs every cell on a pool of `workers` threads. Rows come back ordered by
/// axis value, then seed, then the order of `policies`, whatever order
/// the cells finish in.
pub fn run_sweep(spec: &SweepSpec, opts: &SolveOptions, workers: usize) -> Result<Vec<SweepRow>, CliError> {
    spec.validate()?;
    let cells: Vec<(f64, u64)> =
        spec.values.iter().flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start {workers} workers: {e}")))?;
    let rows: Vec<Vec<SweepRow>> =
        pool.install(|| cells.par_iter().map(|&(v, s)| run_cell(spec, v, s, opts)).collect());
    Ok(rows.into_iter().flatten().collect())
}

/// Writes the sweep as CSV. Wall time is only included when `timing` is set,
/// so that default output is byte-identical across reruns.
pub fn write_sweep_csv<W: Write>(out: W, spec: &SweepSpec, rows: &[SweepRow], timing: bool) -> Result<(), CliError> {
    let mut out = out;
    writeln!(out, "{SWEEP_HEADER} axis={} reference={}", spec.axis, spec.reference)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["axis", "value", "hv", "seed", "policy", "status", "chr", "ltec", "gain_pct", "mph_pct"];
    if timing {
        header.push("wall_ms");
    }
    header.push("note");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.axis.to_string(),
            r.value.to_string(),
            or_na(r.hv),
            r.seed.to_string(),
            r.policy.to_string(),
            r.status.to_string(),
            or_na(r.chr),
            or_na(r.ltec),
            or_na(r.gain),
            or_na(r.mph),
        ];
        if timing {
            rec.push(format!("{:.3}", r.wall_ms));
        }
        rec.push(r.note.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
