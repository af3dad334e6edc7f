use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Format a number for CSV output: shortest round-trip exponent form,
/// with `NaN` spelled out.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_owned() } else { "-inf".to_owned() }
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with `#` comment lines above the column header.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            comments: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn push_numbers(&mut self, values: impl IntoIterator<Item = f64>) {
        self.rows.push(values.into_iter().map(format_number).collect());
    }

    pub fn push_cells(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                let _ = writeln!(out, "# {line}");
            }
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// A CSV file read back: its comment lines (without `# `), column names
/// and raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut comments = Vec::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let columns = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => comments.push(l.trim_start_matches('#').trim_start().to_owned()),
                Some(l) => break l.split(',').map(|s| s.trim().to_owned()).collect::<Vec<_>>(),
                None => return Err("no column header".into()),
            }
        };
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_owned()).collect()).collect();
        if let Some(i) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(format!("data row {} has {} cells, expected {}", i + 1, rows[i].len(), columns.len()));
        }
        Ok(ParsedCsv { comments, columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, String> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| format!("missing column `{name}`"))
    }

    pub fn number(&self, row: usize, col: usize) -> Result<f64, String> {
        let cell = &self.rows[row][col];
        cell.parse::<f64>().map_err(|_| format!("row {}: `{cell}` is not a number", row + 1))
    }
}

/// Write `contents` to `path` through a temporary file in the same
/// directory, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
