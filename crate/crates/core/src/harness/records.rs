//! One CSV row per optimization run.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optimizer::PgdStatus;

pub const CSV_HEADER: [&str; 14] = [
    "seed",
    "lambda",
    "scenario",
    "kernel",
    "n",
    "p",
    "iterations",
    "status",
    "rank",
    "dim_s_star",
    "subspace_dist_fro",
    "objective_final",
    "sharpness_rho_hat",
    "wall_time_s",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RunStatus {
    Converged,
    MaxIterReached,
    StepUnderflow,
    NumericalFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIterReached => "max_iter_reached",
            RunStatus::StepUnderflow => "step_underflow",
            RunStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl From<PgdStatus> for RunStatus {
    fn from(s: PgdStatus) -> Self {
        match s {
            PgdStatus::Converged => RunStatus::Converged,
            PgdStatus::MaxIterReached => RunStatus::MaxIterReached,
            PgdStatus::StepUnderflow => RunStatus::StepUnderflow,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunStatus {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "converged" => Ok(RunStatus::Converged),
            "max_iter_reached" => Ok(RunStatus::MaxIterReached),
            "step_underflow" => Ok(RunStatus::StepUnderflow),
            "numerical_failure" => Ok(RunStatus::NumericalFailure),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// Outcome of one `(replicate, λ)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub lambda: f64,
    /// `<fn_id>/<covariate law>`, e.g. `c/iso`.
    pub scenario: String,
    pub kernel: String,
    pub n: usize,
    pub p: usize,
    pub iterations: usize,
    pub status: RunStatus,
    pub rank: usize,
    pub dim_s_star: usize,
    pub subspace_dist_fro: f64,
    pub objective_final: f64,
    /// Only defined when `dim_s_star < p`.
    pub sharpness_rho_hat: Option<f64>,
    pub wall_time_s: Option<f64>,
}

/// 17 significant digits, which round-trips every `f64`.
fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

impl RunRecord {
    fn to_fields(&self) -> [String; 14] {
        [
            self.seed.to_string(),
            format_float(self.lambda),
            self.scenario.clone(),
            self.kernel.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.iterations.to_string(),
            self.status.to_string(),
            self.rank.to_string(),
            self.dim_s_star.to_string(),
            format_float(self.subspace_dist_fro),
            format_float(self.objective_final),
            format_opt(self.sharpness_rho_hat),
            format_opt(self.wall_time_s),
        ]
    }

    fn from_fields(fields: &csv::StringRecord) -> std::result::Result<Self, String> {
        fn parse<T: FromStr>(fields: &csv::StringRecord, idx: usize) -> std::result::Result<T, String> {
            let raw = &fields[idx];
            raw.parse()
                .map_err(|_| format!("column `{}`: cannot parse `{raw}`", CSV_HEADER[idx]))
        }
        fn parse_opt(fields: &csv::StringRecord, idx: usize) -> std::result::Result<Option<f64>, String> {
            if fields[idx].is_empty() {
                Ok(None)
            } else {
                parse(fields, idx).map(Some)
            }
        }
        Ok(RunRecord {
            seed: parse(fields, 0)?,
            lambda: parse(fields, 1)?,
            scenario: fields[2].to_string(),
            kernel: fields[3].to_string(),
            n: parse(fields, 4)?,
            p: parse(fields, 5)?,
            iterations: parse(fields, 6)?,
            status: fields[7].parse()?,
            rank: parse(fields, 8)?,
            dim_s_star: parse(fields, 9)?,
            subspace_dist_fro: parse(fields, 10)?,
            objective_final: parse(fields, 11)?,
            sharpness_rho_hat: parse_opt(fields, 12)?,
            wall_time_s: parse_opt(fields, 13)?,
        })
    }
}

/// Serializes records to CSV bytes with the fixed header.
pub fn records_to_csv(records: &[RunRecord]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("write to memory");
    for r in records {
        writer.write_record(r.to_fields()).expect("write to memory");
    }
    writer.into_inner().expect("flush to memory")
}

pub fn write_records(records: &[RunRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(&records_to_csv(records))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let schema = |line: u64, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut rows = reader.records();
    match rows.next() {
        None => return Err(schema(1, "missing header".into())),
        Some(Err(e)) => return Err(schema(1, e.to_string())),
        Some(Ok(header)) => {
            if header.iter().ne(CSV_HEADER.iter().copied()) {
                return Err(schema(
                    1,
                    format!("expected header `{}`", CSV_HEADER.join(",")),
                ));
            }
        }
    }
    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            schema(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != CSV_HEADER.len() {
            return Err(schema(
                line,
                format!("expected {} columns, found {}", CSV_HEADER.len(), row.len()),
            ));
        }
        records.push(RunRecord::from_fields(&row).map_err(|m| schema(line, m))?);
    }
    Ok(records)
}
