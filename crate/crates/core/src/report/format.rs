//! Number formatting and CSV plumbing shared by every tabular artifact.

use crate::error::{Error, Result};

/// Formats `x` rounded to 6 significant digits, in the shortest decimal form
/// that parses back to the rounded value.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("scientific notation parses");
    format!("{rounded}")
}

/// Formats an optional value; `None` becomes an empty cell.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

pub(crate) fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Schema(format!("line {line}: `{field}` is not a number ({what})")))?;
    if !v.is_finite() {
        return Err(Error::Schema(format!("line {line}: non-finite {what}")));
    }
    Ok(v)
}

pub(crate) fn parse_opt_f64(field: &str, what: &str, line: u64) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(field, what, line).map(Some)
    }
}

/// Writes a header and rows of already formatted cells as CSV (LF line ends).
pub fn write_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

/// Parsed CSV: header plus records with their 1-based line numbers.
pub(crate) struct CsvDoc {
    pub header: Vec<String>,
    pub records: Vec<(u64, Vec<String>)>,
}

impl CsvDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| Error::Schema(format!("csv header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Schema(format!("csv: {e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            records.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { header, records })
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self.header != expected {
            return Err(Error::Schema(format!(
                "unexpected csv header {:?}, expected {:?}",
                self.header, expected
            )));
        }
        Ok(())
    }
}
