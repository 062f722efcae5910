//! CSV and JSON persistence with a fixed float contract: every float is
//! serialized with 17 significant digits so a read-back is bit-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits: exact round-trip for f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // keep NaN/inf textual and explicit
        format!("{x}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| format!("bad float `{s}`: {e}"))
}

/// A CSV table with a declared schema. Columns are fixed at construction;
/// pushing a row of the wrong width is a programming error surfaced loudly.
pub struct CsvTable {
    pub columns: Vec<String>,
    pub comments: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> CsvTable {
        CsvTable {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            comments: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.comments.push(text.into());
    }

    pub fn push_floats(&mut self, row: &[f64]) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "csv schema mismatch: row width {} vs declared {}",
            row.len(),
            self.columns.len()
        );
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push_mixed(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "csv schema mismatch: row width {} vs declared {}",
            row.len(),
            self.columns.len()
        );
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.render().as_bytes())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Parsed CSV: comments, header, and float cells.
pub struct CsvData {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Strict reader for the toolkit's own numeric CSVs.
pub fn read_csv(text: &str) -> Result<CsvData, String> {
    let mut comments = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if columns.is_some() {
                return Err(format!("line {}: comment after header", idx + 1));
            }
            comments.push(c.trim().to_string());
            continue;
        }
        match &columns {
            None => {
                let cols: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                if cols.iter().any(|c| c.is_empty()) {
                    return Err(format!("line {}: empty column name", idx + 1));
                }
                columns = Some(cols);
            }
            Some(cols) => {
                let cells: Vec<&str> = line.split(',').collect();
                if cells.len() != cols.len() {
                    return Err(format!(
                        "line {}: {} cells but {} columns",
                        idx + 1,
                        cells.len(),
                        cols.len()
                    ));
                }
                let parsed: Result<Vec<f64>, String> =
                    cells.iter().map(|c| parse_f64(c)).collect();
                rows.push(parsed.map_err(|e| format!("line {}: {e}", idx + 1))?);
            }
        }
    }
    let columns = columns.ok_or("missing header row")?;
    Ok(CsvData {
        comments,
        columns,
        rows,
    })
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(value).expect("serializable").as_bytes())?;
    f.write_all(b"\n")
}

pub fn output_root(cli_out: Option<&str>, config_dir: &str) -> PathBuf {
    if let Some(o) = cli_out {
        return PathBuf::from(o);
    }
    if let Ok(env_root) = std::env::var("DWELL_OUT") {
        if !env_root.is_empty() {
            return PathBuf::from(env_root).join(config_dir);
        }
    }
    PathBuf::from(config_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bit_exactly() {
        for &x in &[
            0.1,
            -3.0,
            std::f64::consts::PI,
            1.2345678901234567e-300,
            6.02e23,
            -0.0,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            let back = parse_f64(&s).unwrap();
            assert_eq!(x.to_bits(), back.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn csv_round_trips() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comment("units: a [time], b [energy]");
        t.push_floats(&[1.0 / 3.0, -2.5e-17]);
        t.push_floats(&[std::f64::consts::E, 0.0]);
        let text = t.render();
        let back = read_csv(&text).unwrap();
        assert_eq!(back.columns, vec!["a", "b"]);
        assert_eq!(back.rows.len(), 2);
        assert_eq!(back.rows[0][0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back.rows[1][0].to_bits(), std::f64::consts::E.to_bits());
    }

    #[test]
    fn empty_table_renders_header_only() {
        let t = CsvTable::new(&["x", "y", "z"]);
        let text = t.render();
        assert_eq!(text, "x,y,z\n");
        let back = read_csv(&text).unwrap();
        assert!(back.rows.is_empty());
    }

    #[test]
    #[should_panic(expected = "schema mismatch")]
    fn wrong_width_row_panics() {
        let mut t = CsvTable::new(&["x", "y"]);
        t.push_floats(&[1.0]);
    }

    #[test]
    fn reader_rejects_ragged_rows() {
        assert!(read_csv("a,b\n1.0\n").is_err());
        assert!(read_csv("a,b\n1.0,2.0,3.0\n").is_err());
        assert!(read_csv("").is_err());
    }
}
