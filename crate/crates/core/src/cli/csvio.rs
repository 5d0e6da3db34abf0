//! Wide and long CSV formats for longitudinal data.
//!
//! Wide: one row per individual with header `id,y1..yJ,t1..tJ,x1..xc`.
//! Long: one row per measurement with header `id,t,y,x1..xc`.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{LgmError, Result};
use crate::model::LongitudinalDataset;

fn header_error(msg: impl Into<String>) -> LgmError {
    LgmError::InvalidData(format!("header: {}", msg.into()))
}

fn numbered(prefix: &str, names: &[String], start: usize) -> usize {
    let mut k = 0;
    while start + k < names.len() && names[start + k] == format!("{prefix}{}", k + 1) {
        k += 1;
    }
    k
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = value.trim().parse().map_err(|_| {
        LgmError::InvalidData(format!(
            "row {row}, column {column}: cannot parse {value:?} as a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(LgmError::InvalidData(format!(
            "row {row}, column {column}: value must be finite"
        )));
    }
    Ok(v)
}

fn csv_error(e: csv::Error) -> LgmError {
    match e.position() {
        Some(p) => LgmError::InvalidData(format!("row {}: {e}", p.line())),
        None => LgmError::InvalidData(e.to_string()),
    }
}

/// Read the wide format. Rows are numbered from 1 after the header.
pub fn read_wide_csv<R: Read>(reader: R) -> Result<(Vec<String>, LongitudinalDataset)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if names.first().map(String::as_str) != Some("id") {
        return Err(header_error("first column must be `id`"));
    }
    let j = numbered("y", &names, 1);
    let jt = numbered("t", &names, 1 + j);
    let c = numbered("x", &names, 1 + j + jt);
    if j == 0 {
        return Err(header_error("expected columns y1..yJ after `id`"));
    }
    if jt != j {
        return Err(header_error(format!("found {j} outcome columns but {jt} time columns")));
    }
    if 1 + 2 * j + c != names.len() {
        return Err(header_error(format!("unexpected column `{}`", names[1 + 2 * j + c])));
    }
    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut t = Vec::new();
    let mut x = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(csv_error)?;
        if rec.len() != names.len() {
            return Err(LgmError::InvalidData(format!(
                "row {row}: expected {} fields, found {}",
                names.len(),
                rec.len()
            )));
        }
        ids.push(rec[0].to_string());
        for (col, value) in rec.iter().enumerate().skip(1) {
            if value.is_empty() {
                return Err(LgmError::InvalidData(format!(
                    "row {row}, column {}: missing value",
                    names[col]
                )));
            }
            let v = parse_cell(value, row, &names[col])?;
            match col {
                _ if col <= j => y.push(v),
                _ if col <= 2 * j => t.push(v),
                _ => x.push(v),
            }
        }
    }
    let n = ids.len();
    if n == 0 {
        return Err(LgmError::InvalidData("no data rows".into()));
    }
    let dataset = LongitudinalDataset::new(
        DMatrix::from_row_slice(n, j, &y),
        DMatrix::from_row_slice(n, j, &t),
        DMatrix::from_row_slice(n, c, &x),
    )?;
    Ok((ids, dataset))
}

/// Read the long format and pivot to wide, ordering each individual's rows by time.
pub fn read_long_csv<R: Read>(reader: R) -> Result<(Vec<String>, LongitudinalDataset)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if names.len() < 3 || names[0] != "id" || names[1] != "t" || names[2] != "y" {
        return Err(header_error("long format must start with `id,t,y`"));
    }
    let c = numbered("x", &names, 3);
    if 3 + c != names.len() {
        return Err(header_error(format!("unexpected column `{}`", names[3 + c])));
    }
    let mut ids: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(csv_error)?;
        let id = rec[0].to_string();
        let t = parse_cell(&rec[1], row, "t")?;
        let y = parse_cell(&rec[2], row, "y")?;
        let x: Vec<f64> = (0..c)
            .map(|k| parse_cell(&rec[3 + k], row, &names[3 + k]))
            .collect::<Result<_>>()?;
        let pos = match ids.iter().position(|i| *i == id) {
            Some(p) => {
                if xs[p] != x {
                    return Err(LgmError::InvalidData(format!(
                        "row {row}: covariates of id {id} differ from its earlier rows"
                    )));
                }
                p
            }
            None => {
                ids.push(id);
                rows.push(Vec::new());
                xs.push(x);
                ids.len() - 1
            }
        };
        rows[pos].push((t, y));
    }
    let n = ids.len();
    if n == 0 {
        return Err(LgmError::InvalidData("no data rows".into()));
    }
    let j = rows[0].len();
    for (i, r) in rows.iter_mut().enumerate() {
        if r.len() != j {
            return Err(LgmError::InvalidData(format!(
                "id {} has {} measurements, expected {j}",
                ids[i],
                r.len()
            )));
        }
        r.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let y = DMatrix::from_fn(n, j, |i, k| rows[i][k].1);
    let t = DMatrix::from_fn(n, j, |i, k| rows[i][k].0);
    let x = DMatrix::from_fn(n, c, |i, k| xs[i][k]);
    Ok((ids, LongitudinalDataset::new(y, t, x)?))
}

/// Write the wide format; `ids` default to `1..=n`.
pub fn write_wide_csv<W: Write>(writer: W, dataset: &LongitudinalDataset, ids: Option<&[String]>) -> Result<()> {
    let io = |e: csv::Error| LgmError::InvalidArgument(format!("cannot write CSV: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let j = dataset.waves();
    let c = dataset.covariates();
    let mut header = vec!["id".to_string()];
    header.extend((1..=j).map(|k| format!("y{k}")));
    header.extend((1..=j).map(|k| format!("t{k}")));
    header.extend((1..=c).map(|k| format!("x{k}")));
    w.write_record(&header).map_err(io)?;
    for i in 0..dataset.n() {
        let mut rec = vec![ids.map_or_else(|| (i + 1).to_string(), |v| v[i].clone())];
        rec.extend(dataset.y_row(i).iter().map(|v| v.to_string()));
        rec.extend(dataset.t_row(i).iter().map(|v| v.to_string()));
        rec.extend(dataset.x_row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()
        .map_err(|e| LgmError::InvalidArgument(format!("cannot write CSV: {e}")))?;
    Ok(())
}
