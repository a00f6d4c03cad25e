//! File formats.
//!
//! * trajectory CSV: `arm_id,week,state,action,next_state`
//! * model CSV: `arm_id,p00,p10,p01,p11`, where `pSA` is the probability of
//!   reaching state 1 from state `S` under action `A`
//! * observed-model CSV: the model columns plus `imputed_pSA` flags (0/1)
//!
//! All files are UTF-8 with LF line endings and are written atomically
//! (temporary file in the target directory, then rename). Readers locate
//! columns by header name.

use crate::error::{Error, Result};
use crate::estimation::ImputedModel;
use crate::model::{ArmId, TransitionModel};
use crate::simulator::StudyLog;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

pub const TRAJECTORY_HEADER: [&str; 5] = ["arm_id", "week", "state", "action", "next_state"];
pub const MODEL_HEADER: [&str; 5] = ["arm_id", "p00", "p10", "p01", "p11"];
pub const IMPUTED_HEADER: [&str; 4] = ["imputed_p00", "imputed_p10", "imputed_p01", "imputed_p11"];

/// One row of a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryRow {
    pub arm_id: ArmId,
    pub week: u64,
    pub state: u8,
    pub action: u8,
    pub next_state: u8,
}

/// Writes `bytes` to `path` via a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Trajectory CSV bytes: one row per arm per week, ordered by week then cohort order.
pub fn trajectory_csv(log: &StudyLog) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(TRAJECTORY_HEADER)?;
    for week in &log.weeks {
        for t in &week.transitions {
            w.write_record([
                t.arm_id.to_string(),
                week.week.to_string(),
                t.state.to_string(),
                t.action.to_string(),
                t.next_state.to_string(),
            ])?;
        }
    }
    finish(w)
}

pub fn write_trajectory_csv(path: &Path, log: &StudyLog) -> Result<()> {
    write_atomic(path, &trajectory_csv(log)?)
}

fn model_fields(id: ArmId, m: &TransitionModel) -> [String; 5] {
    let (p00, p10, p01, p11) = m.to_tuple();
    [
        id.to_string(),
        p00.to_string(),
        p10.to_string(),
        p01.to_string(),
        p11.to_string(),
    ]
}

pub fn models_csv(models: &[(ArmId, TransitionModel)]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(MODEL_HEADER)?;
    for (id, m) in models {
        w.write_record(model_fields(*id, m))?;
    }
    finish(w)
}

pub fn write_models_csv(path: &Path, models: &[(ArmId, TransitionModel)]) -> Result<()> {
    write_atomic(path, &models_csv(models)?)
}

pub fn observed_csv(models: &[ImputedModel]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(MODEL_HEADER.iter().chain(&IMPUTED_HEADER))?;
    for m in models {
        let flag = |s: usize, a: usize| if m.imputed[s][a] { "1" } else { "0" }.to_string();
        let mut row: Vec<String> = model_fields(m.arm_id, &m.model).into();
        row.extend([flag(0, 0), flag(1, 0), flag(0, 1), flag(1, 1)]);
        w.write_record(&row)?;
    }
    finish(w)
}

struct Table {
    path: String,
    columns: Vec<usize>,
    names: Vec<&'static str>,
    reader: csv::Reader<Box<dyn std::io::Read>>,
}

impl Table {
    fn open(path: &Path, required: &[&'static str]) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(path.display().to_string(), Box::new(file), required)
    }

    fn from_reader(
        path: String,
        input: Box<dyn std::io::Read>,
        required: &[&'static str],
    ) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader.headers()?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for &name in required {
            match headers.iter().position(|h| h == name) {
                Some(i) => columns.push(i),
                None => {
                    return Err(Error::Schema {
                        path,
                        row: 1,
                        column: name.to_string(),
                        message: "missing column in header".into(),
                    })
                }
            }
        }
        Ok(Self {
            path,
            columns,
            names: required.to_vec(),
            reader,
        })
    }

    /// Visits each data row; `line` is the 1-based line number (header is line 1).
    fn for_each(mut self, mut f: impl FnMut(&Cells<'_>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        let mut line = 1;
        while self.reader.read_record(&mut record)? {
            line += 1;
            let cells = Cells {
                table: &self,
                record: &record,
                line,
            };
            f(&cells)?;
        }
        Ok(())
    }
}

struct Cells<'a> {
    table: &'a Table,
    record: &'a csv::StringRecord,
    line: usize,
}

impl Cells<'_> {
    fn parse<T: FromStr>(&self, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.record.get(self.table.columns[col]).unwrap_or("");
        raw.parse::<T>()
            .map_err(|e| self.error(col, format!("cannot parse `{raw}`: {e}")))
    }

    fn error(&self, col: usize, message: String) -> Error {
        Error::Schema {
            path: self.table.path.clone(),
            row: self.line,
            column: self.table.names[col].to_string(),
            message,
        }
    }

    fn binary(&self, col: usize) -> Result<u8> {
        let v: u8 = self.parse(col)?;
        if v > 1 {
            return Err(self.error(col, format!("{v} is not 0 or 1")));
        }
        Ok(v)
    }

    fn probability(&self, col: usize) -> Result<f64> {
        let v: f64 = self.parse(col)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.error(col, format!("{v} is not in [0, 1]")));
        }
        Ok(v)
    }
}

fn read_trajectory(table: Table) -> Result<Vec<TrajectoryRow>> {
    let mut rows = Vec::new();
    table.for_each(|c| {
        rows.push(TrajectoryRow {
            arm_id: ArmId(c.parse(0)?),
            week: c.parse(1)?,
            state: c.binary(2)?,
            action: c.binary(3)?,
            next_state: c.binary(4)?,
        });
        Ok(())
    })?;
    Ok(rows)
}

fn read_models(table: Table) -> Result<Vec<(ArmId, TransitionModel)>> {
    let mut rows = Vec::new();
    table.for_each(|c| {
        let model = TransitionModel::new(
            c.probability(1)?,
            c.probability(2)?,
            c.probability(3)?,
            c.probability(4)?,
        )?;
        rows.push((ArmId(c.parse(0)?), model));
        Ok(())
    })?;
    Ok(rows)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectoryRow>> {
    read_trajectory(Table::open(path, &TRAJECTORY_HEADER)?)
}

pub fn parse_trajectory_csv(name: &str, data: &[u8]) -> Result<Vec<TrajectoryRow>> {
    let input: Box<dyn std::io::Read> = Box::new(std::io::Cursor::new(data.to_vec()));
    read_trajectory(Table::from_reader(name.into(), input, &TRAJECTORY_HEADER)?)
}

pub fn read_models_csv(path: &Path) -> Result<Vec<(ArmId, TransitionModel)>> {
    read_models(Table::open(path, &MODEL_HEADER)?)
}

pub fn parse_models_csv(name: &str, data: &[u8]) -> Result<Vec<(ArmId, TransitionModel)>> {
    let input: Box<dyn std::io::Read> = Box::new(std::io::Cursor::new(data.to_vec()));
    read_models(Table::from_reader(name.into(), input, &MODEL_HEADER)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{generate_cohort, run_study, CohortSpec, Policy, StudyConfig};

    #[test]
    fn trajectory_round_trip() {
        let arms = generate_cohort(&CohortSpec::synthetic(25), 1).unwrap();
        let log = run_study(&arms, &StudyConfig::new(3, 4, Policy::Random, 2)).unwrap();
        let bytes = trajectory_csv(&log).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("arm_id,week,state,action,next_state\n"));
        assert!(!text.contains('\r'));

        let rows = parse_trajectory_csv("t.csv", &bytes).unwrap();
        let expect: Vec<TrajectoryRow> = log
            .weeks
            .iter()
            .flat_map(|w| {
                w.transitions.iter().map(move |t| TrajectoryRow {
                    arm_id: t.arm_id,
                    week: w.week as u64,
                    state: t.state,
                    action: t.action,
                    next_state: t.next_state,
                })
            })
            .collect();
        assert_eq!(rows, expect);
    }

    #[test]
    fn model_round_trip_is_lossless() {
        let arms = generate_cohort(&CohortSpec::synthetic(40), 3).unwrap();
        let models: Vec<_> = arms.iter().map(|a| (a.arm_id, a.predicted_model)).collect();
        let back = parse_models_csv("m.csv", &models_csv(&models).unwrap()).unwrap();
        assert_eq!(back, models);
    }

    #[test]
    fn columns_found_by_name() {
        let data = b"week,next_state,arm_id,action,state\n2,1,7,0,1\n";
        let rows = parse_trajectory_csv("t.csv", data).unwrap();
        assert_eq!(
            rows,
            vec![TrajectoryRow {
                arm_id: ArmId(7),
                week: 2,
                state: 1,
                action: 0,
                next_state: 1
            }]
        );
    }

    #[test]
    fn schema_errors_name_row_and_column() {
        let data = b"arm_id,week,state,action,next_state\n1,1,0,0,1\n1,2,0,3,1\n";
        match parse_trajectory_csv("t.csv", data) {
            Err(Error::Schema { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "action");
            }
            other => panic!("{other:?}"),
        }
        match parse_models_csv("m.csv", b"arm_id,p00,p10,p01\n") {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "p11"),
            other => panic!("{other:?}"),
        }
        match parse_models_csv("m.csv", b"arm_id,p00,p10,p01,p11\n1,0.1,0.2,1.5,0.3\n") {
            Err(Error::Schema { row: 2, column, .. }) => assert_eq!(column, "p01"),
            other => panic!("{other:?}"),
        }
        assert!(parse_models_csv("m.csv", b"arm_id,p00,p10,p01,p11\nx,0.1,0.2,0.5,0.3\n").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        write_json(&path, &vec![1, 2]).unwrap();
        write_json(&path, &vec![3]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "[\n  3\n]\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
