//! CSV and JSON file formats.
//!
//! Survival tables use the header `x1,...,xd,time,event` with `event = 1`
//! for an observed event. Writing a table also writes a sidecar
//! `<stem>.meta.json` holding `{time_scale, d}`; when present, loading uses
//! that scale instead of the maximum time.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use care_core::model_selection::CandidateRow;
use care_core::{CvReport, StepSurvival, SurvivalDataset, SurvivalRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, FormatError, Result};

/// Column names of a survival table. Every other column is a covariate, in
/// header order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub time: String,
    pub event: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub time_scale: f64,
    pub d: usize,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn csv_error(e: csv::Error) -> FormatError {
    FormatError::Malformed(e.to_string())
}

fn write_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, FormatError::Malformed(format!("{other:?}"))),
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, FormatError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| FormatError::MissingColumn(name.into()))
}

fn number(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64, FormatError> {
    let raw = record.get(idx).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(FormatError::NonNumeric {
            line,
            column: name.into(),
            value: raw.into(),
        }),
    }
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Parses a survival table. With `time_scale = None` times are divided by
/// their maximum.
pub fn parse_dataset<R: Read>(
    reader: R,
    schema: &CsvSchema,
    time_scale: Option<f64>,
) -> Result<SurvivalDataset, FormatError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let t_col = column(&headers, &schema.time)?;
    let e_col = column(&headers, &schema.event)?;
    let x_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != t_col && *i != e_col)
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = line_of(&row);
        let time = number(&row, t_col, &schema.time, line)?;
        if time <= 0.0 {
            return Err(FormatError::NonPositiveTime { line, value: time });
        }
        if let Some(s) = time_scale {
            if time > s {
                return Err(FormatError::TimeBeyondScale { line, value: time });
            }
        }
        let flag = row.get(e_col).unwrap_or("");
        let censored = match flag {
            "1" => false,
            "0" => true,
            _ => {
                return Err(FormatError::BadEventFlag {
                    line,
                    value: flag.into(),
                })
            }
        };
        let x = x_cols
            .iter()
            .map(|(i, name)| number(&row, *i, name, line))
            .collect::<Result<Vec<_>, _>>()?;
        records.push(SurvivalRecord::new(x, time, censored));
    }
    if records.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(match time_scale {
        Some(s) => {
            let records = records
                .into_iter()
                .map(|mut r| {
                    r.time = if s == 1.0 { r.time } else { r.time / s };
                    r
                })
                .collect();
            SurvivalDataset::new(records, s)?
        }
        None => SurvivalDataset::from_raw_times(records)?,
    })
}

pub fn read_dataset(path: &Path) -> Result<SurvivalDataset> {
    read_dataset_with(path, &CsvSchema::default())
}

pub fn read_dataset_with(path: &Path, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let meta = sidecar_path(path);
    let sidecar: Option<Sidecar> = if meta.exists() { Some(read_json(&meta)?) } else { None };
    if let Some(s) = &sidecar {
        if !(s.time_scale.is_finite() && s.time_scale > 0.0) {
            return Err(CliError::format(&meta, FormatError::Malformed("time_scale must be positive".into())));
        }
    }
    let data = parse_dataset(open(path)?, schema, sidecar.map(|s| s.time_scale))
        .map_err(|e| CliError::format(path, e))?;
    match sidecar {
        Some(s) if s.d != data.dim() => Err(CliError::format(
            &meta,
            FormatError::Malformed(format!("sidecar says d = {} but the table has {} covariates", s.d, data.dim())),
        )),
        _ => Ok(data),
    }
}

pub fn covariate_headers(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Writes times on the original scale plus the sidecar.
pub fn write_dataset(path: &Path, data: &SurvivalDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = covariate_headers(data.dim());
    header.extend(["time".to_string(), "event".to_string()]);
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    let s = data.time_scale();
    for r in data.records() {
        let mut row: Vec<String> = r.covariates.iter().map(f64::to_string).collect();
        let t = if s == 1.0 { r.time } else { r.time * s };
        row.push(t.to_string());
        row.push(if r.censored { "0" } else { "1" }.into());
        w.write_record(&row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &Sidecar {
            time_scale: s,
            d: data.dim(),
        },
    )
}

/// Covariates and `f₀` values, header `x1,...,xd,f0`.
pub fn write_truth(path: &Path, covariates: &[Vec<f64>], f0: &[f64]) -> Result<()> {
    let d = covariates.first().map_or(0, Vec::len);
    let mut header = covariate_headers(d);
    header.push("f0".into());
    let rows = covariates.iter().zip(f0).map(|(x, f)| {
        let mut row = x.clone();
        row.push(*f);
        row
    });
    write_numeric_table(path, &header, rows)
}

pub fn read_truth(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (header, rows) = read_numeric_table(path)?;
    let f_col = column(&csv::StringRecord::from(header.clone()), "f0").map_err(|e| CliError::format(path, e))?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut fs = Vec::with_capacity(rows.len());
    for mut row in rows {
        fs.push(row.remove(f_col));
        xs.push(row);
    }
    Ok((xs, fs))
}

/// Breslow curve, header `t,survival`.
pub fn write_step_survival(path: &Path, curve: &StepSurvival) -> Result<()> {
    let rows = curve.times().iter().zip(curve.values()).map(|(t, s)| vec![*t, *s]);
    write_numeric_table(path, &["t".to_string(), "survival".to_string()], rows)
}

pub fn read_step_survival(path: &Path) -> Result<StepSurvival> {
    let (header, rows) = read_numeric_table(path)?;
    if header != ["t", "survival"] {
        return Err(CliError::format(path, FormatError::MissingColumn("t,survival".into())));
    }
    let (t, s) = rows.into_iter().map(|r| (r[0], r[1])).unzip();
    StepSurvival::new(t, s).map_err(|e| CliError::format(path, e.into()))
}

fn write_numeric_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| write_error(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))
            .map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn read_numeric_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv_reader(open(path)?);
    let fail = |e| CliError::format(path, e);
    let header = rdr.headers().map_err(|e| fail(csv_error(e)))?.clone();
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| fail(csv_error(e)))?;
        let line = line_of(&row);
        let values = (0..header.len())
            .map(|i| number(&row, i, &header[i], line))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        rows.push(values);
    }
    Ok((header.iter().map(String::from).collect(), rows))
}

/// One column of per-row external predictions, header `prediction`.
pub fn read_prediction_column(path: &Path) -> Result<Vec<f64>> {
    let (header, rows) = read_numeric_table(path)?;
    let idx = column(&csv::StringRecord::from(header), "prediction").map_err(|e| CliError::format(path, e))?;
    Ok(rows.into_iter().map(|r| r[idx]).collect())
}

/// The `(γ, θ)` candidate table of a [`CvReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    pub externals: Vec<String>,
    pub rows: Vec<CandidateRow>,
}

impl From<&CvReport> for CvTable {
    fn from(r: &CvReport) -> Self {
        Self {
            externals: r.externals.clone(),
            rows: r.candidates.clone(),
        }
    }
}

/// Header `gamma,theta_<name>...,train_loss,valid_loss,converged`.
pub fn write_cv_table(path: &Path, table: &CvTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["gamma".to_string()];
    header.extend(table.externals.iter().map(|n| format!("theta_{n}")));
    header.extend(["train_loss", "valid_loss", "converged"].map(String::from));
    w.write_record(&header).map_err(|e| write_error(path, e))?;
    for r in &table.rows {
        let mut row = vec![r.gamma.to_string()];
        row.extend(r.theta.iter().map(f64::to_string));
        row.extend([r.train_loss.to_string(), r.valid_loss.to_string(), r.converged.to_string()]);
        w.write_record(&row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_cv_table(path: &Path) -> Result<CvTable> {
    let fail = |e| CliError::format(path, e);
    let mut rdr = csv_reader(open(path)?);
    let header = rdr.headers().map_err(|e| fail(csv_error(e)))?.clone();
    let k = header.len();
    if k < 4 || &header[0] != "gamma" || header.iter().skip(k - 3).ne(["train_loss", "valid_loss", "converged"]) {
        return Err(fail(FormatError::MissingColumn("gamma,...,train_loss,valid_loss,converged".into())));
    }
    let mut externals = Vec::new();
    for h in header.iter().take(k - 3).skip(1) {
        match h.strip_prefix("theta_") {
            Some(name) => externals.push(name.to_string()),
            None => return Err(fail(FormatError::MissingColumn(format!("theta_ (found `{h}`)")))),
        }
    }
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| fail(csv_error(e)))?;
        let line = line_of(&row);
        let num = |i: usize| number(&row, i, &header[i], line).map_err(fail);
        let converged = match &row[k - 1] {
            "true" => true,
            "false" => false,
            v => {
                return Err(fail(FormatError::Malformed(format!(
                    "line {line}: converged flag `{v}` is neither true nor false"
                ))))
            }
        };
        rows.push(CandidateRow {
            gamma: num(0)?,
            theta: (1..k - 3).map(num).collect::<Result<_>>()?,
            train_loss: num(k - 3)?,
            valid_loss: num(k - 2)?,
            converged,
        });
    }
    Ok(CvTable { externals, rows })
}

/// Per-record predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub sample: String,
    pub row: usize,
    pub prediction: f64,
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| write_error(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(["sample", "row", "prediction"])
            .map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    csv_reader(open(path)?)
        .deserialize()
        .collect::<Result<Vec<PredictionRow>, _>>()
        .map_err(|e| CliError::format(path, csv_error(e)))
}

/// Generic CSV output for serializable rows.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    csv_reader(open(path)?)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::format(path, csv_error(e)))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::config(e.to_string()))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, FormatError::Malformed(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use care_core::{breslow_survival, simulate_dataset, DgpConfig};

    fn parse(text: &str) -> Result<SurvivalDataset, FormatError> {
        parse_dataset(text.as_bytes(), &CsvSchema::default(), None)
    }

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("care-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn loads_and_normalizes() {
        let d = parse("x1,time,event\n0.1,2,1\n0.2,4,0\n0.3,8,1\n").unwrap();
        assert_eq!(d.times(), &[0.25, 0.5, 1.0]);
        assert_eq!(d.censored(), &[false, true, false]);
        assert_eq!(d.time_scale(), 8.0);
        assert_eq!(d.covariates()[1], vec![0.2]);
    }

    #[test]
    fn covariate_columns_in_header_order() {
        let d = parse("time,b,event,a\n1,5,1,6\n").unwrap();
        assert_eq!(d.covariates()[0], vec![5.0, 6.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            parse("x1,time,event\n0.1,0,1\n"),
            Err(FormatError::NonPositiveTime { line: 2, .. })
        ));
        assert!(matches!(
            parse("x1,time,event\n0.1,1,2\n"),
            Err(FormatError::BadEventFlag { .. })
        ));
        assert_eq!(
            parse("x1,event\n0.1,1\n").unwrap_err(),
            FormatError::MissingColumn("time".into())
        );
        assert!(matches!(
            parse("x1,time,event\n,1,1\n"),
            Err(FormatError::NonNumeric { .. })
        ));
        assert!(matches!(
            parse("x1,time,event\nabc,1,1\n"),
            Err(FormatError::NonNumeric { .. })
        ));
        assert_eq!(parse("x1,time,event\n").unwrap_err(), FormatError::Empty);
    }

    #[test]
    fn unit_scale_is_exact() {
        let text = "x1,time,event\n0.5,0.123456789,1\n0.7,0.9,0\n";
        let d = parse_dataset(text.as_bytes(), &CsvSchema::default(), Some(1.0)).unwrap();
        assert_eq!(d.times(), &[0.123456789, 0.9]);
    }

    #[test]
    fn dataset_round_trip() {
        let (data, _) = simulate_dataset(&DgpConfig::univariate(), 200, 4).unwrap();
        let p = tmp("rt.csv");
        write_dataset(&p, &data).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back, data);

        let scaled = parse("x1,time,event\n0.1,3.7,1\n0.2,11.1,0\n0.3,0.02,1\n").unwrap();
        let p = tmp("rt2.csv");
        write_dataset(&p, &scaled).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back.censored(), scaled.censored());
        assert_eq!(back.time_scale(), scaled.time_scale());
        for (a, b) in back.times().iter().zip(scaled.times()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn tables_round_trip() {
        let (data, truth) = simulate_dataset(&DgpConfig::univariate(), 50, 8).unwrap();
        let p = tmp("truth.csv");
        write_truth(&p, data.covariates(), &truth.f0_values).unwrap();
        assert_eq!(read_truth(&p).unwrap(), (data.covariates().to_vec(), truth.f0_values.clone()));

        let curve = breslow_survival(&data);
        let p = tmp("curve.csv");
        write_step_survival(&p, &curve).unwrap();
        assert_eq!(read_step_survival(&p).unwrap(), curve);

        let rows = vec![
            PredictionRow {
                sample: "train".into(),
                row: 0,
                prediction: -0.1,
            },
            PredictionRow {
                sample: "valid".into(),
                row: 0,
                prediction: 1.0 / 3.0,
            },
        ];
        let p = tmp("pred.csv");
        write_predictions(&p, &rows).unwrap();
        assert_eq!(read_predictions(&p).unwrap(), rows);

        let table = CvTable {
            externals: vec!["a".into(), "b".into()],
            rows: vec![CandidateRow {
                gamma: 0.01,
                theta: vec![0.25, 0.5],
                train_loss: -1.2,
                valid_loss: -0.7,
                converged: false,
            }],
        };
        let p = tmp("cv.csv");
        write_cv_table(&p, &table).unwrap();
        assert_eq!(read_cv_table(&p).unwrap(), table);
    }
}
