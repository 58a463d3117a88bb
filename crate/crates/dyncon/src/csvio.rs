//! CSV formats: two-column time series (`t,<value>`) and contract paths.
//!
//! Numbers are written in Rust's shortest round-trip decimal form, so a
//! loaded file re-exports to the same values.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use dyncon_core::{ContractPath, TimeSeries};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("parse error in {file}: row {row}, column `{column}`: {message}")]
    Parse {
        file: String,
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        message: String,
    },

    #[error("coverage error in {file}: series spans [{start}, {end}], needs [0, {horizon}]")]
    Coverage {
        file: String,
        start: f64,
        end: f64,
        horizon: f64,
    },

    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn load_series(path: &Path, value_column: &str, horizon: f64) -> Result<TimeSeries, SeriesError> {
    let file = std::fs::File::open(path).map_err(|source| SeriesError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_series(file, &path.display().to_string(), value_column, horizon)
}

pub fn load_price_csv(path: &Path, horizon: f64) -> Result<TimeSeries, SeriesError> {
    load_series(path, "lambda", horizon)
}

/// Reads a `t,<value_column>` series that must cover `[0, horizon]`.
pub fn read_series(reader: impl Read, file: &str, value_column: &str, horizon: f64) -> Result<TimeSeries, SeriesError> {
    let parse_err = |row: usize, column: &str, message: String| SeriesError::Parse {
        file: file.to_string(),
        row,
        column: column.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(0, "", e.to_string()))?
        .clone();
    let expected = ["t", value_column];
    if headers.len() != 2 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(
            0,
            "",
            format!("header must be `t,{value_column}`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| parse_err(row, "", e.to_string()))?;
        let cell = |i: usize| -> Result<f64, SeriesError> {
            let name = expected[i];
            let raw = rec.get(i).ok_or_else(|| parse_err(row, name, "missing value".into()))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(row, name, format!("`{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, name, format!("`{raw}` is not finite")));
            }
            Ok(v)
        };
        let t = cell(0)?;
        let v = cell(1)?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(parse_err(row, "t", format!("times must strictly increase ({t} after {prev})")));
            }
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(parse_err(1, "t", "no data rows".into()));
    }
    let (start, end) = (times[0], *times.last().unwrap());
    if !(start <= 0.0 && end >= horizon) {
        return Err(SeriesError::Coverage {
            file: file.to_string(),
            start,
            end,
            horizon,
        });
    }
    TimeSeries::new(times, values).map_err(|e| parse_err(0, "", e.to_string()))
}

pub fn write_series(mut w: impl Write, value_column: &str, series: &TimeSeries) -> std::io::Result<()> {
    writeln!(w, "t,{value_column}")?;
    for (t, v) in series.times().iter().zip(series.values()) {
        writeln!(w, "{t},{v}")?;
    }
    Ok(())
}

/// Columns `t,x,w_star,y_star,u_star,pi_star,xi`. The control, payment and
/// sensitivity apply over `[t_k, t_{k+1})`, so they are blank on the last row.
pub fn write_path(mut w: impl Write, path: &ContractPath) -> std::io::Result<()> {
    writeln!(w, "t,x,w_star,y_star,u_star,pi_star,xi")?;
    for k in 0..path.times.len() {
        write!(w, "{},{},{},{}", path.times[k], path.x[k], path.w_star[k], path.y_star[k])?;
        if k < path.u_star.len() {
            writeln!(w, ",{},{},{}", path.u_star[k], path.pi_star[k], path.xi[k])?;
        } else {
            writeln!(w, ",,,")?;
        }
    }
    Ok(())
}

/// One time column plus one column per path for a chosen quantity.
pub fn write_columns(mut w: impl Write, times: &[f64], names: &[String], columns: &[Vec<Option<f64>>]) -> std::io::Result<()> {
    write!(w, "t")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for (k, t) in times.iter().enumerate() {
        write!(w, "{t}")?;
        for c in columns {
            match c.get(k).copied().flatten() {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
