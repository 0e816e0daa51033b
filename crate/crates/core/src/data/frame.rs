use std::io::Write;
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// What to do with empty or `NaN` cells when reading a CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Fail on the first missing cell.
    Reject,
    /// Carry the previous observation forward; leading gaps take the first
    /// observed value.
    #[default]
    ForwardFill,
}

/// Hourly multivariate series: `values` is `length × channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesFrame {
    timestamps: Vec<NaiveDateTime>,
    values: Matrix,
    channel_names: Vec<String>,
}

impl TimeSeriesFrame {
    pub fn new(
        timestamps: Vec<NaiveDateTime>,
        values: Matrix,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if timestamps.len() != values.rows() {
            return Err(Error::Shape(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                values.rows()
            )));
        }
        if channel_names.len() != values.cols() {
            return Err(Error::Shape(format!(
                "{} channel names for {} columns",
                channel_names.len(),
                values.cols()
            )));
        }
        check_hourly(&timestamps)?;
        if let Some(k) = values.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::MalformedInput {
                row: k / values.cols().max(1),
                column: channel_names[k % values.cols()].clone(),
                message: "non-finite value".into(),
            });
        }
        Ok(TimeSeriesFrame {
            timestamps,
            values,
            channel_names,
        })
    }

    /// Frame with hourly timestamps starting at `start`.
    pub fn from_start(start: NaiveDateTime, values: Matrix, channel_names: Vec<String>) -> Result<Self> {
        let timestamps = (0..values.rows())
            .map(|h| start + Duration::hours(h as i64))
            .collect();
        Self::new(timestamps, values, channel_names)
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    pub fn channel(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Hour of day of row `r`.
    pub fn phase_of(&self, r: usize) -> usize {
        self.timestamps[r].hour() as usize
    }

    /// Rows `[start, end)` as a new frame.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesFrame {
        TimeSeriesFrame {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values.slice_rows(start, end),
            channel_names: self.channel_names.clone(),
        }
    }

    /// Same timestamps and names, new values of identical shape.
    pub fn with_values(&self, values: Matrix) -> TimeSeriesFrame {
        assert_eq!(values.shape(), self.values.shape());
        TimeSeriesFrame {
            timestamps: self.timestamps.clone(),
            values,
            channel_names: self.channel_names.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(out, "date")?;
        for name in &self.channel_names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (r, ts) in self.timestamps.iter().enumerate() {
            write!(out, "{}", ts.format(TIMESTAMP_FORMAT))?;
            for v in self.values.row(r) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn check_hourly(timestamps: &[NaiveDateTime]) -> Result<()> {
    for (i, pair) in timestamps.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if step != Duration::hours(1) {
            return Err(Error::Spacing {
                row: i + 1,
                message: format!(
                    "{} follows {} (step {} s)",
                    pair[1],
                    pair[0],
                    step.num_seconds()
                ),
            });
        }
    }
    Ok(())
}

/// Reads an hourly CSV: header row, first column `date`
/// (`YYYY-MM-DD HH:MM:SS`), remaining columns numeric. Row numbers in
/// errors count data rows from 1.
pub fn load_csv(path: &Path, policy: MissingPolicy) -> Result<TimeSeriesFrame> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(e, 0))?;
    let headers = reader.headers().map_err(|e| csv_error(e, 0))?.clone();
    if headers.get(0).map(str::trim) != Some("date") {
        return Err(Error::MalformedInput {
            row: 0,
            column: headers.get(0).unwrap_or("").to_string(),
            message: "first column must be named `date`".into(),
        });
    }
    let channel_names: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
    if channel_names.is_empty() {
        return Err(Error::MalformedInput {
            row: 0,
            column: "date".into(),
            message: "no value columns".into(),
        });
    }
    let c = channel_names.len();

    let mut timestamps = Vec::new();
    let mut cells: Vec<Option<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(e, row))?;
        if record.len() != c + 1 {
            return Err(Error::MalformedInput {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", c + 1, record.len()),
            });
        }
        let stamp = record[0].trim();
        let ts = NaiveDateTime::parse_from_str(stamp, TIMESTAMP_FORMAT).map_err(|e| {
            Error::MalformedInput {
                row,
                column: "date".into(),
                message: format!("`{stamp}`: {e}"),
            }
        })?;
        timestamps.push(ts);
        for (j, field) in record.iter().skip(1).enumerate() {
            let field = field.trim();
            let cell = if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                if policy == MissingPolicy::Reject {
                    return Err(Error::MalformedInput {
                        row,
                        column: channel_names[j].clone(),
                        message: "missing value".into(),
                    });
                }
                None
            } else {
                let v: f64 = field.parse().map_err(|_| Error::MalformedInput {
                    row,
                    column: channel_names[j].clone(),
                    message: format!("`{field}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::MalformedInput {
                        row,
                        column: channel_names[j].clone(),
                        message: format!("`{field}` is not finite"),
                    });
                }
                Some(v)
            };
            cells.push(cell);
        }
    }

    let len = timestamps.len();
    let mut values = Matrix::zeros(len, c);
    for j in 0..c {
        let first = (0..len)
            .find_map(|r| cells[r * c + j])
            .ok_or_else(|| Error::EmptyChannel(channel_names[j].clone()))?;
        let mut last = first;
        for r in 0..len {
            if let Some(v) = cells[r * c + j] {
                last = v;
            }
            values.set(r, j, last);
        }
    }
    TimeSeriesFrame::new(timestamps, values, channel_names)
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::MalformedInput {
            row,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let path = dir.path().join("series.csv");
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn minimal_two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,OT\n2016-07-01 00:00:00,1.0\n2016-07-01 01:00:00,2.0\n");
        let f = load_csv(&p, MissingPolicy::ForwardFill).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.channels(), 1);
        assert_eq!(f.channel(0), vec![1.0, 2.0]);
        assert_eq!(f.phase_of(1), 1);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "date,a,b\n2016-07-01 00:00:00,1,2\n2016-07-01 01:00:00,3,oops\n",
        );
        match load_csv(&p, MissingPolicy::ForwardFill) {
            Err(Error::MalformedInput { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_hourly_spacing_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "date,a\n2016-07-01 00:00:00,1\n2016-07-01 02:00:00,3\n",
        );
        assert!(matches!(
            load_csv(&p, MissingPolicy::ForwardFill),
            Err(Error::Spacing { row: 1, .. })
        ));
    }

    #[test]
    fn missing_values_follow_policy() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "date,a,b\n2016-07-01 00:00:00,,1\n2016-07-01 01:00:00,5,\n2016-07-01 02:00:00,6,NaN\n",
        );
        let f = load_csv(&p, MissingPolicy::ForwardFill).unwrap();
        assert_eq!(f.channel(0), vec![5.0, 5.0, 6.0]);
        assert_eq!(f.channel(1), vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            load_csv(&p, MissingPolicy::Reject),
            Err(Error::MalformedInput { row: 1, .. })
        ));
    }

    #[test]
    fn all_missing_channel_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,a,b\n2016-07-01 00:00:00,1,\n2016-07-01 01:00:00,2,\n");
        assert!(matches!(
            load_csv(&p, MissingPolicy::ForwardFill),
            Err(Error::EmptyChannel(name)) if name == "b"
        ));
    }

    #[test]
    fn first_column_must_be_date() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "time,a\n2016-07-01 00:00:00,1\n");
        assert!(matches!(
            load_csv(&p, MissingPolicy::ForwardFill),
            Err(Error::MalformedInput { row: 0, .. })
        ));
    }

    #[test]
    fn write_then_load_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let start = NaiveDateTime::parse_from_str("2020-01-01 05:00:00", TIMESTAMP_FORMAT).unwrap();
        let values = Matrix::from_fn(30, 2, |r, c| (r as f64).sin() * 1e3 + c as f64 / 3.0);
        let f = TimeSeriesFrame::from_start(start, values, vec!["x".into(), "OT".into()]).unwrap();
        let p = dir.path().join("out.csv");
        f.write_csv(&p).unwrap();
        assert_eq!(load_csv(&p, MissingPolicy::Reject).unwrap(), f);
    }
}
