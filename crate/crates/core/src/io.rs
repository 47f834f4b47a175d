//! Flat CSV serialization of fitted coefficients.
//!
//! `coefficients.csv` has one row per coefficient:
//! `equation,series,lag,block,value` with `block` either `endo` or `exo`.
//! `means.csv` (`block,series,mean`) carries the centering means and fixes
//! the series order. Values use 17 significant digits, so reading back
//! reproduces the written numbers exactly.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{Result, VarxError};
use crate::model::{format_exact, CoefficientSet, VarxSpec};
use crate::scalar::Scalar;

/// Coefficients together with the series labels they were written with.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCoefficients<T> {
    pub coefficients: CoefficientSet<T>,
    pub endo_names: Vec<String>,
    pub exog_names: Vec<String>,
}

pub fn write_coefficients<T: Scalar, W: Write>(
    coefs: &CoefficientSet<T>,
    endo_names: &[String],
    exog_names: &[String],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let spec = coefs.spec();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["equation", "series", "lag", "block", "value"])?;
    for (i, eq) in endo_names.iter().enumerate() {
        for lag in 1..=spec.p {
            for (d, name) in endo_names.iter().enumerate() {
                let v = coefs.phi_path(i, d)[lag - 1];
                wtr.write_record([eq.as_str(), name, &lag.to_string(), "endo", &format_exact(v)])?;
            }
        }
        for lag in 1..=spec.s {
            for (r, name) in exog_names.iter().enumerate() {
                let v = coefs.b_path(i, r)[lag - 1];
                wtr.write_record([eq.as_str(), name, &lag.to_string(), "exo", &format_exact(v)])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_means<T: Scalar, W: Write>(
    coefs: &CoefficientSet<T>,
    endo_names: &[String],
    exog_names: &[String],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["block", "series", "mean"])?;
    for (name, v) in endo_names.iter().zip(coefs.endo_means()) {
        wtr.write_record(["endo", name, &format_exact(*v)])?;
    }
    for (name, v) in exog_names.iter().zip(coefs.exog_means()) {
        wtr.write_record(["exo", name, &format_exact(*v)])?;
    }
    wtr.flush()?;
    Ok(())
}

fn format_error(source_name: &str, line: usize, detail: impl Into<String>) -> VarxError {
    VarxError::Format {
        source_name: source_name.to_string(),
        detail: format!("line {line}: {}", detail.into()),
    }
}

fn records<R: Read>(reader: R, source_name: &str, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr
        .headers()
        .map_err(|err| VarxError::Csv {
            source_name: source_name.to_string(),
            err,
        })?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(format_error(source_name, 1, format!("expected header {}", header.join(","))));
    }
    rdr.records()
        .enumerate()
        .map(|(i, r)| {
            r.map(|rec| (i + 2, rec)).map_err(|err| VarxError::Csv {
                source_name: source_name.to_string(),
                err,
            })
        })
        .collect()
}

fn parse_value<T: Scalar>(s: &str, source_name: &str, line: usize) -> Result<T> {
    s.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format_error(source_name, line, format!("invalid number {s:?}")))
}

/// Reads the pair written by [`write_coefficients`] and [`write_means`].
/// Coefficients missing from the file are zero; the orders are the largest
/// lags present per block.
pub fn read_coefficients<T: Scalar, R1: Read, R2: Read>(
    coefficients: R1,
    coefficients_name: &str,
    means: R2,
    means_name: &str,
) -> Result<LabeledCoefficients<T>> {
    let mut endo_names = Vec::new();
    let mut exog_names = Vec::new();
    let mut endo_means = Vec::new();
    let mut exog_means = Vec::new();
    for (line, rec) in records(means, means_name, &["block", "series", "mean"])? {
        let value: T = parse_value(&rec[2], means_name, line)?;
        match &rec[0] {
            "endo" => {
                endo_names.push(rec[1].to_string());
                endo_means.push(value);
            }
            "exo" => {
                exog_names.push(rec[1].to_string());
                exog_means.push(value);
            }
            other => return Err(format_error(means_name, line, format!("unknown block {other:?}"))),
        }
    }
    let endo_index: HashMap<&str, usize> = endo_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let exog_index: HashMap<&str, usize> = exog_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();

    // (equation, is_endo, lag, series, value)
    let mut entries = Vec::new();
    let (mut p, mut s) = (0usize, 0usize);
    for (line, rec) in records(
        coefficients,
        coefficients_name,
        &["equation", "series", "lag", "block", "value"],
    )? {
        let eq = *endo_index
            .get(&rec[0])
            .ok_or_else(|| format_error(coefficients_name, line, format!("unknown equation {:?}", &rec[0])))?;
        let lag: usize = rec[2]
            .parse()
            .ok()
            .filter(|l| *l >= 1)
            .ok_or_else(|| format_error(coefficients_name, line, format!("invalid lag {:?}", &rec[2])))?;
        let is_endo = match &rec[3] {
            "endo" => true,
            "exo" => false,
            other => return Err(format_error(coefficients_name, line, format!("unknown block {other:?}"))),
        };
        let index = if is_endo { &endo_index } else { &exog_index };
        let series = *index
            .get(&rec[1])
            .ok_or_else(|| format_error(coefficients_name, line, format!("unknown series {:?}", &rec[1])))?;
        if is_endo {
            p = p.max(lag);
        } else {
            s = s.max(lag);
        }
        entries.push((eq, is_endo, lag, series, parse_value::<T>(&rec[4], coefficients_name, line)?));
    }
    let (k, m) = (endo_names.len(), exog_names.len());
    if k == 0 || p == 0 {
        return Err(format_error(coefficients_name, 1, "no endogenous coefficients"));
    }
    let mut phi = Array2::zeros((k, k * p));
    let mut b = Array2::zeros((k, m * s));
    for (eq, is_endo, lag, series, v) in entries {
        if is_endo {
            phi[(eq, (lag - 1) * k + series)] = v;
        } else {
            b[(eq, (lag - 1) * m + series)] = v;
        }
    }
    let coefficients = CoefficientSet::new(
        phi,
        b,
        VarxSpec::new(p, s),
        Array1::from(endo_means),
        Array1::from(exog_means),
    )?;
    Ok(LabeledCoefficients {
        coefficients,
        endo_names,
        exog_names,
    })
}

/// Lag matrix as a labeled grid: header `equation,<col names…>`, one row per equation.
pub fn write_lag_matrix<W: Write>(
    matrix: &Array2<usize>,
    row_names: &[String],
    col_names: &[String],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["equation".to_string()];
    header.extend(col_names.iter().cloned());
    wtr.write_record(&header)?;
    for (name, row) in row_names.iter().zip(matrix.rows()) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format heatmap data `row_label,col_label,value`, row-major.
pub fn write_heatmap<W: Write>(
    matrix: &Array2<usize>,
    row_names: &[String],
    col_names: &[String],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["row_label", "col_label", "value"])?;
    for (name, row) in row_names.iter().zip(matrix.rows()) {
        for (col, v) in col_names.iter().zip(row) {
            wtr.write_record([name.as_str(), col.as_str(), &v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
