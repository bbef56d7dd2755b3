//! Per-image counts table: `image,n_tracks,n_regions,elapsed_s`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::CountReport;

pub const HEADER: [&str; 4] = ["image", "n_tracks", "n_regions", "elapsed_s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub image: String,
    pub n_tracks: u64,
    pub n_regions: u64,
    pub elapsed_s: f64,
}

impl From<&CountReport> for CountRow {
    fn from(r: &CountReport) -> Self {
        Self {
            image: r.image.clone(),
            n_tracks: r.total_tracks as u64,
            n_regions: r.n_regions as u64,
            elapsed_s: r.elapsed_s,
        }
    }
}

fn schema(line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        line,
        message: message.into(),
    }
}

pub fn write_counts_csv<W: Write>(out: W, rows: &[CountRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    let to_err = |e: csv::Error| schema(0, e.to_string());
    w.write_record(HEADER).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| schema(0, e.to_string()))
}

pub fn counts_csv_string(rows: &[CountRow]) -> String {
    let mut buf = Vec::new();
    write_counts_csv(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

/// Parses a counts table; errors carry the 1-based line number.
pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<CountRow>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(|e| schema(1, e.to_string()))?;
    if header.iter().ne(HEADER) {
        return Err(schema(
            1,
            format!("expected header `{}`, found `{}`", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize::<CountRow>() {
        let row = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(line, e.to_string())
        })?;
        if !(row.elapsed_s.is_finite() && row.elapsed_s >= 0.0) {
            return Err(schema(rows.len() as u64 + 2, format!("negative or non-finite elapsed_s {}", row.elapsed_s)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn counts_to_json(rows: &[CountRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub fn counts_from_json(text: &str) -> Result<Vec<CountRow>> {
    serde_json::from_str(text).map_err(|e| schema(e.line() as u64, e.to_string()))
}

/// Track counts in file order.
pub fn track_counts(rows: &[CountRow]) -> Vec<u64> {
    rows.iter().map(|r| r.n_tracks).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<CountRow> {
        vec![
            CountRow {
                image: "a.png".into(),
                n_tracks: 41,
                n_regions: 37,
                elapsed_s: 0.0123456789012345,
            },
            CountRow {
                image: "b, with comma.tif".into(),
                n_tracks: 0,
                n_regions: 0,
                elapsed_s: 0.0,
            },
        ]
    }

    #[test]
    fn csv_layout() {
        let text = counts_csv_string(&rows());
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("image,n_tracks,n_regions,elapsed_s"));
        assert_eq!(lines.next(), Some("a.png,41,37,0.0123456789012345"));
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_json_csv_roundtrip() {
        let text = counts_csv_string(&rows());
        let parsed = read_counts_csv(text.as_bytes()).unwrap();
        assert_eq!(parsed, rows());
        let back = counts_from_json(&counts_to_json(&parsed)).unwrap();
        assert_eq!(counts_csv_string(&back), text);
    }

    #[test]
    fn empty_table() {
        let text = counts_csv_string(&[]);
        assert!(read_counts_csv(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn bad_header() {
        let err = read_counts_csv("file,count\nx,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }), "{err}");
    }

    #[test]
    fn bad_value_reports_line() {
        let text = "image,n_tracks,n_regions,elapsed_s\na,1,1,0.1\nb,lots,1,0.1\n";
        let err = read_counts_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, .. }), "{err}");
        let text = "image,n_tracks,n_regions,elapsed_s\na,1,1,-0.1\n";
        assert!(matches!(read_counts_csv(text.as_bytes()), Err(Error::Schema { line: 2, .. })));
        let text = "image,n_tracks,n_regions,elapsed_s\na,1,1\n";
        assert!(matches!(read_counts_csv(text.as_bytes()), Err(Error::Schema { line: 2, .. })));
    }
}
