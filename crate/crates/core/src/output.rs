//! CSV result files: raw per-round risks, aggregate curves and differences
//! against passive sampling. Floats are written with 9 significant digits.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::experiment::{CurvePoint, DifferenceCurve, ExperimentResult, LearningCurve};
use crate::selection::Strategy;

pub const RAW_HEADER: [&str; 5] = ["strategy", "rep", "round", "labels_used", "test_risk"];
pub const AGGREGATE_HEADER: [&str; 5] = ["strategy", "labels_used", "mean_risk", "sem", "n_reps"];
pub const DIFF_HEADER: [&str; 4] = [
    "strategy",
    "labels_used",
    "mean_diff_vs_passive",
    "sem_diff",
];

/// `printf("%.*g")`-style formatting: `digits` significant digits, trailing
/// zeros removed, scientific notation outside `1e-4 <= |x| < 10^digits`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt9(x: f64) -> String {
    format_sig(x, 9)
}

fn write_err(e: csv::Error) -> Error {
    Error::MalformedCsv {
        source_id: "output".into(),
        row: 0,
        message: e.to_string(),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "output".into(),
        source: e,
    }
}

pub fn write_raw<W: Write>(result: &ExperimentResult, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RAW_HEADER).map_err(write_err)?;
    for t in &result.trials {
        for p in &t.points {
            wtr.write_record([
                t.strategy.as_str().to_string(),
                t.rep.to_string(),
                p.round.to_string(),
                p.labels_used.to_string(),
                fmt9(p.test_risk),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush().map_err(io_err)
}

pub fn write_aggregate<W: Write>(curves: &[LearningCurve], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(AGGREGATE_HEADER).map_err(write_err)?;
    for c in curves {
        for p in &c.points {
            wtr.write_record([
                c.strategy.as_str().to_string(),
                p.labels_used.to_string(),
                fmt9(p.mean),
                fmt9(p.sem),
                p.n_reps.to_string(),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush().map_err(io_err)
}

pub fn write_differences<W: Write>(curves: &[DifferenceCurve], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(DIFF_HEADER).map_err(write_err)?;
    for c in curves {
        for p in &c.points {
            wtr.write_record([
                c.strategy.as_str().to_string(),
                p.labels_used.to_string(),
                fmt9(p.mean),
                fmt9(p.sem),
            ])
            .map_err(write_err)?;
        }
    }
    wtr.flush().map_err(io_err)
}

struct Rows {
    source_id: String,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_rows<R: Read>(reader: R, source_id: &str, header: &[&str]) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let malformed = |row: usize, message: String| Error::MalformedCsv {
        source_id: source_id.to_string(),
        row,
        message,
    };
    let got = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(malformed(
            1,
            format!("expected header `{}`", header.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(k + 2, e.to_string()))?;
        rows.push((k + 2, rec));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile {
            source_id: source_id.to_string(),
        });
    }
    Ok(Rows {
        source_id: source_id.to_string(),
        rows,
    })
}

impl Rows {
    fn field<T: std::str::FromStr>(
        &self,
        line: usize,
        rec: &csv::StringRecord,
        j: usize,
    ) -> Result<T> {
        rec.get(j)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::MalformedCsv {
                source_id: self.source_id.clone(),
                row: line,
                message: format!("bad value in column {}", j + 1),
            })
    }

    fn strategy(&self, line: usize, rec: &csv::StringRecord) -> Result<Strategy> {
        rec[0].parse().map_err(|message| Error::MalformedCsv {
            source_id: self.source_id.clone(),
            row: line,
            message,
        })
    }

    /// Groups consecutive-or-not rows by strategy, keeping first-seen order.
    fn curves(&self, with_reps: bool) -> Result<Vec<(Strategy, Vec<CurvePoint>)>> {
        let mut out: Vec<(Strategy, Vec<CurvePoint>)> = Vec::new();
        for (line, rec) in &self.rows {
            let strategy = self.strategy(*line, rec)?;
            let point = CurvePoint {
                labels_used: self.field(*line, rec, 1)?,
                mean: self.field(*line, rec, 2)?,
                sem: self.field(*line, rec, 3)?,
                n_reps: if with_reps {
                    self.field(*line, rec, 4)?
                } else {
                    0
                },
            };
            match out.iter_mut().find(|(s, _)| *s == strategy) {
                Some((_, pts)) => pts.push(point),
                None => out.push((strategy, vec![point])),
            }
        }
        Ok(out)
    }
}

pub fn read_aggregate<R: Read>(reader: R, source_id: &str) -> Result<Vec<LearningCurve>> {
    let rows = read_rows(reader, source_id, &AGGREGATE_HEADER)?;
    Ok(rows
        .curves(true)?
        .into_iter()
        .map(|(strategy, points)| LearningCurve { strategy, points })
        .collect())
}

/// Reads a difference file. `n_reps` is not stored there and comes back as 0.
/// A file with only a header is valid and yields no curves.
pub fn read_differences<R: Read>(reader: R, source_id: &str) -> Result<Vec<DifferenceCurve>> {
    match read_rows(reader, source_id, &DIFF_HEADER) {
        Ok(rows) => Ok(rows
            .curves(false)?
            .into_iter()
            .map(|(strategy, points)| DifferenceCurve { strategy, points })
            .collect()),
        Err(Error::EmptyFile { .. }) => Ok(Vec::new()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.0, 9), "0");
        assert_eq!(format_sig(0.5, 9), "0.5");
        assert_eq!(format_sig(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(format_sig(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(format_sig(-0.0409356725, 9), "-0.0409356725");
        assert_eq!(format_sig(123.456, 9), "123.456");
        assert_eq!(format_sig(1.5e-7, 9), "1.5e-07");
        assert_eq!(format_sig(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(format_sig(9.9999999996, 9), "10");
        assert_eq!(format_sig(0.0001, 9), "0.0001");
        assert_eq!(format_sig(0.00001234, 9), "1.234e-05");
    }

    #[test]
    fn aggregate_round_trip() {
        let curves = vec![LearningCurve {
            strategy: Strategy::Survey,
            points: vec![
                CurvePoint {
                    labels_used: 50,
                    mean: 0.1,
                    sem: 0.01,
                    n_reps: 3,
                },
                CurvePoint {
                    labels_used: 70,
                    mean: 0.08,
                    sem: 0.0,
                    n_reps: 3,
                },
            ],
        }];
        let mut buf = Vec::new();
        write_aggregate(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(
            text.starts_with("strategy,labels_used,mean_risk,sem,n_reps\nsurvey,50,0.1,0.01,3\n")
        );
        assert_eq!(read_aggregate(buf.as_slice(), "t").unwrap(), curves);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(
            read_aggregate("".as_bytes(), "t"),
            Err(Error::MalformedCsv { .. } | Error::EmptyFile { .. })
        ));
        assert!(matches!(
            read_aggregate(
                "strategy,labels_used,mean_risk,sem,n_reps\n".as_bytes(),
                "t"
            ),
            Err(Error::EmptyFile { .. })
        ));
        assert!(read_aggregate("a,b\n1,2\n".as_bytes(), "t").is_err());
        assert!(read_aggregate(
            "strategy,labels_used,mean_risk,sem,n_reps\nbogus,50,0.1,0,1\n".as_bytes(),
            "t"
        )
        .is_err());
        assert!(read_differences(
            "strategy,labels_used,mean_diff_vs_passive,sem_diff\n".as_bytes(),
            "t"
        )
        .unwrap()
        .is_empty());
    }
}
