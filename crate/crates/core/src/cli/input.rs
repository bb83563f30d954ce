//! Column-oriented numeric input: CSV, TSV or whitespace-separated text.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use clap::ValueEnum;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Tsv,
    /// Whitespace-separated columns.
    Plain,
}

/// A column chosen by 0-based index or by header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty column selector".into());
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(s.to_string()),
        })
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Column::Index(i) => write!(f, "{i}"),
            Column::Name(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InputSpec {
    /// `-` reads standard input.
    pub path: String,
    pub format: Format,
    pub header: bool,
}

/// Raw text cells with the source line of each row.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub headers: Option<Vec<String>>,
    pub rows: Vec<(u64, Vec<String>)>,
}

impl RawTable {
    fn index_of(&self, col: &Column) -> Result<usize, CliError> {
        match col {
            Column::Index(i) => Ok(*i),
            Column::Name(name) => {
                let headers = self.headers.as_ref().ok_or_else(|| {
                    CliError::Input(format!("column '{name}' selected by name but --header not given"))
                })?;
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::Input(format!("no column named '{name}'")))
            }
        }
    }

    pub fn column(&self, col: &Column) -> Result<Vec<f64>, CliError> {
        let idx = self.index_of(col)?;
        self.rows
            .iter()
            .map(|(line, cells)| {
                let cell = cells.get(idx).ok_or_else(|| {
                    CliError::Input(format!("line {line}: column {col} missing ({} fields)", cells.len()))
                })?;
                parse_number(cell).map_err(|m| CliError::Input(format!("line {line}, column {col}: {m}")))
            })
            .collect()
    }
}

/// Strict decimal parsing: digits, one optional sign, a decimal point and an
/// exponent. Thousands separators, locale decimal commas and non-finite
/// spellings are rejected.
pub fn parse_number(cell: &str) -> Result<f64, String> {
    let s = cell.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    if !s.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')) {
        return Err(format!("not a plain decimal number: '{s}'"));
    }
    let v: f64 = s.parse().map_err(|_| format!("not a plain decimal number: '{s}'"))?;
    if !v.is_finite() {
        return Err(format!("value out of range: '{s}'"));
    }
    Ok(v)
}

fn read_text(path: &str) -> Result<String, CliError> {
    let bytes = if path == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::Io(format!("reading standard input: {e}")))?;
        buf
    } else {
        std::fs::read(path).map_err(|e| CliError::Io(format!("reading {path}: {e}")))?
    };
    String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{path}: input is not valid UTF-8")))
}

pub fn read_table(spec: &InputSpec) -> Result<RawTable, CliError> {
    let text = read_text(&spec.path)?;
    let table = match spec.format {
        Format::Csv => read_delimited(&text, b',', spec.header)?,
        Format::Tsv => read_delimited(&text, b'\t', spec.header)?,
        Format::Plain => read_plain(&text, spec.header),
    };
    if table.rows.is_empty() {
        return Err(CliError::Input("input has no data rows".into()));
    }
    Ok(table)
}

fn read_delimited(text: &str, delimiter: u8, header: bool) -> Result<RawTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(header)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = if header {
        let h = reader
            .headers()
            .map_err(|e| CliError::Input(format!("reading header: {e}")))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("malformed input: {e}")))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let byte = record.position().map_or(0, |p| p.byte() as usize);
        let line = line_of_record(text.as_bytes(), byte);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(RawTable { headers, rows })
}

/// 1-based line of the record read from `start`. The reader's own line count
/// ignores blank lines, and its offset can sit before skipped blank or comment
/// lines.
fn line_of_record(bytes: &[u8], start: usize) -> u64 {
    let mut pos = start.min(bytes.len());
    loop {
        match bytes.get(pos) {
            Some(b'\n' | b'\r') => pos += 1,
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            _ => break,
        }
    }
    bytes[..pos].iter().filter(|b| **b == b'\n').count() as u64 + 1
}

fn read_plain(text: &str, header: bool) -> RawTable {
    let mut headers = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<String> = trimmed.split_whitespace().map(str::to_string).collect();
        if header && headers.is_none() {
            headers = Some(cells);
        } else {
            rows.push((i as u64 + 1, cells));
        }
    }
    RawTable { headers, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_numbers() {
        assert_eq!(parse_number(" 1.5e3 ").unwrap(), 1500.0);
        assert_eq!(parse_number("-.25").unwrap(), -0.25);
        for bad in ["1,000", "1,5", "NaN", "inf", "-Infinity", "1e400", "", "0x10", "1 000"] {
            assert!(parse_number(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn line_numbers_in_errors() {
        let t = read_delimited("g,p\n1,2\n\n# note\n3,NaN\n", b',', true).unwrap();
        assert_eq!(t.column(&Column::Name("g".into())).unwrap(), vec![1.0, 3.0]);
        let err = t.column(&Column::Index(1)).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");

        let t = read_plain("# comment\n1 2\n3\n", false);
        let err = t.column(&Column::Index(1)).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }
}
