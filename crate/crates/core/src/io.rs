//! CSV emission of recorded time series. Every value is written with nine
//! significant digits in scientific notation, which is the reproducibility
//! contract: equal runs give byte-identical files.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sim::TimeSeries;

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` with nine significant digits.
pub fn format_value(x: f64) -> String {
    if x == 0.0 {
        // one spelling for both signed zeros
        return format!("{:.*e}", SIGNIFICANT_DIGITS - 1, 0.0);
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
}

fn io_error(e: impl std::fmt::Display) -> Error {
    Error::config("output", e.to_string())
}

/// Header `t`, then one column per channel.
pub fn write_series_csv<W: Write>(series: &TimeSeries, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(series.channels.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(io_error)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..series.len() {
        row.clear();
        row.push(format_value(series.t[k]));
        for (_, v) in &series.channels {
            row.push(format_value(v[k]));
        }
        w.write_record(&row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

/// Several runs side by side on a shared time axis; columns are
/// `<channel>_<label>`. The shortest run sets the row count.
pub fn write_aligned_csv<W: Write>(runs: &[(&str, &TimeSeries)], out: W) -> Result<()> {
    let Some((_, first)) = runs.first() else {
        return Err(Error::config("compare", "no runs to write"));
    };
    let n = runs.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for (label, s) in runs {
        header.extend(s.channels.iter().map(|(c, _)| format!("{c}_{label}")));
    }
    w.write_record(&header).map_err(io_error)?;
    for k in 0..n {
        let mut row = vec![format_value(first.t[k])];
        for (_, s) in runs {
            row.extend(s.channels.iter().map(|(_, v)| format_value(v[k])));
        }
        w.write_record(&row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)
}

/// Column names and rows of a CSV written by this module.
pub fn read_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(io_error)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_error)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(io_error))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControllerMode;
    use crate::sim::SeriesMeta;

    fn series() -> TimeSeries {
        TimeSeries {
            t: vec![0.0, 0.005, 0.01],
            channels: vec![
                ("P".into(), vec![1.0, 0.123456789123, -2.5e-7]),
                ("v_dc".into(), vec![1.0, 1.0 / 3.0, -0.0]),
            ],
            meta: SeriesMeta {
                scenario: "region".into(),
                mode: ControllerMode::Gfl,
                scr: 10.0,
                dt: 1e-4,
                diverged: false,
                diverged_at: None,
                diverged_state: None,
            },
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(format_value(-1234.5678912), "-1.23456789e3");
        assert_eq!(format_value(-0.0), format_value(0.0));
    }

    #[test]
    fn round_trip_within_nine_digits() {
        let s = series();
        let mut buf = Vec::new();
        write_series_csv(&s, &mut buf).unwrap();
        let (header, rows) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(header, ["t", "P", "v_dc"]);
        assert_eq!(rows.len(), 3);
        for (k, row) in rows.iter().enumerate() {
            assert_eq!(row[0], s.t[k]);
            for (j, (_, v)) in s.channels.iter().enumerate() {
                let tol = 5e-9 * v[k].abs();
                assert!((row[j + 1] - v[k]).abs() <= tol, "{} vs {}", row[j + 1], v[k]);
            }
        }
    }

    #[test]
    fn aligned_columns_are_labelled() {
        let s = series();
        let mut buf = Vec::new();
        write_aligned_csv(&[("gfl", &s), ("m-sgfm", &s)], &mut buf).unwrap();
        let (header, rows) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(header, ["t", "P_gfl", "v_dc_gfl", "P_m-sgfm", "v_dc_m-sgfm"]);
        assert_eq!(rows.len(), 3);
    }
}
