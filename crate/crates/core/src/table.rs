//! Tables, cell normalization, column typing and corpus ingestion.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single normalized table cell.
///
/// `text` always holds the trimmed source string, so a cell can be
/// re-rendered exactly as it appeared in the input.
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Number { value: f64, text: String },
    Text(String),
    Empty(String),
}

impl CellValue {
    pub fn text(&self) -> &str {
        match self {
            CellValue::Number { text, .. } => text,
            CellValue::Text(text) | CellValue::Empty(text) => text,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty(_))
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

/// Normalizes a raw cell string. Total: every input maps to some cell.
///
/// Numbers may carry thousands separators and a single trailing `%`; a
/// leading number followed by a parenthesized or bracketed note (`"5 (t2)"`)
/// still counts as a number. Anything else with trailing text is `Text`, so
/// dates like `"1 june 2001"` stay textual.
pub fn normalize_cell(raw: &str) -> CellValue {
    let text = raw.trim();
    if is_placeholder(text) {
        return CellValue::Empty(text.to_string());
    }
    match parse_leading_number(text) {
        Some(value) => CellValue::Number {
            value,
            text: text.to_string(),
        },
        None => CellValue::Text(text.to_string()),
    }
}

fn is_placeholder(text: &str) -> bool {
    text.is_empty() || text == "-" || text.eq_ignore_ascii_case("n/a")
}

fn parse_leading_number(text: &str) -> Option<f64> {
    let stripped: String = text.chars().filter(|&c| c != ',').collect();
    let stripped = stripped.strip_suffix('%').unwrap_or(&stripped).trim_end();
    let len = numeric_prefix_len(stripped.as_bytes());
    if len == 0 {
        return None;
    }
    let rest = stripped[len..].trim_start();
    if !(rest.is_empty() || rest.starts_with('(') || rest.starts_with('[')) {
        return None;
    }
    stripped[..len].parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Length of the longest prefix matching `[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?`.
fn numeric_prefix_len(bytes: &[u8]) -> usize {
    let mut i = 0;
    if matches!(bytes.first(), Some(b'+' | b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < bytes.len() && bytes[i] == b'.' {
        let frac_start = i + 1;
        let mut j = frac_start;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if digits > 0 || j > frac_start {
            digits += j - frac_start;
            i = j;
        }
    }
    if digits == 0 {
        return 0;
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if matches!(bytes.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        let exp_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    i
}

/// Lowercase, trim and collapse inner whitespace runs to one space.
pub fn normalize_header(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Numeric,
    Textual,
}

/// Fraction of non-empty cells that must be numbers for a column to be numeric.
pub const NUMERIC_COLUMN_THRESHOLD: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("duplicate column header {0:?} after normalization")]
    DuplicateHeader(String),
    #[error("table has no columns")]
    NoColumns,
}

/// An immutable table of normalized cells with inferred column types.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    table_id: String,
    title: String,
    headers: Vec<String>,
    normalized_headers: Vec<String>,
    rows: Vec<Vec<CellValue>>,
    column_types: Vec<ColumnType>,
}

impl Table {
    /// Builds a table from raw strings, normalizing every cell and inferring
    /// column types.
    pub fn from_raw<S: AsRef<str>>(
        table_id: impl Into<String>,
        title: impl Into<String>,
        headers: &[S],
        rows: &[Vec<S>],
    ) -> Result<Self, TableError> {
        let cells = rows
            .iter()
            .map(|row| row.iter().map(|c| normalize_cell(c.as_ref())).collect())
            .collect();
        let headers = headers.iter().map(|h| h.as_ref().trim().to_string()).collect();
        Self::new(table_id, title, headers, cells)
    }

    pub fn new(
        table_id: impl Into<String>,
        title: impl Into<String>,
        headers: Vec<String>,
        rows: Vec<Vec<CellValue>>,
    ) -> Result<Self, TableError> {
        if headers.is_empty() {
            return Err(TableError::NoColumns);
        }
        let normalized_headers: Vec<String> = headers.iter().map(|h| normalize_header(h)).collect();
        let mut seen = HashSet::new();
        for h in &normalized_headers {
            if !seen.insert(h.as_str()) {
                return Err(TableError::DuplicateHeader(h.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(TableError::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: headers.len(),
                });
            }
        }
        let mut table = Table {
            table_id: table_id.into(),
            title: title.into(),
            headers,
            normalized_headers,
            rows,
            column_types: Vec::new(),
        };
        table.column_types = infer_column_types(&table);
        Ok(table)
    }

    pub fn table_id(&self) -> &str {
        &self.table_id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn column_types(&self) -> &[ColumnType] {
        &self.column_types
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.headers.len()
    }

    pub fn cell(&self, row: usize, column: usize) -> &CellValue {
        &self.rows[row][column]
    }

    pub fn column_type(&self, column: usize) -> ColumnType {
        self.column_types[column]
    }

    pub fn is_numeric(&self, column: usize) -> bool {
        self.column_types[column] == ColumnType::Numeric
    }

    /// Resolves a column reference case-insensitively, with whitespace collapsed.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        let wanted = normalize_header(name);
        self.normalized_headers.iter().position(|h| *h == wanted)
    }

    pub fn all_rows(&self) -> View<'_> {
        View {
            table: self,
            rows: (0..self.rows.len()).collect(),
        }
    }
}

/// Column types for every column of `table`, by the numeric-majority rule.
pub fn infer_column_types(table: &Table) -> Vec<ColumnType> {
    (0..table.headers.len())
        .map(|c| {
            let mut filled = 0usize;
            let mut numeric = 0usize;
            for row in &table.rows {
                match &row[c] {
                    CellValue::Empty(_) => {}
                    CellValue::Number { .. } => {
                        filled += 1;
                        numeric += 1;
                    }
                    CellValue::Text(_) => filled += 1,
                }
            }
            if numeric > 0 && numeric as f64 >= NUMERIC_COLUMN_THRESHOLD * filled as f64 {
                ColumnType::Numeric
            } else {
                ColumnType::Textual
            }
        })
        .collect()
}

/// An ordered subset of a table's rows. Indices are strictly increasing.
#[derive(Debug, Clone)]
pub struct View<'t> {
    table: &'t Table,
    rows: Vec<usize>,
}

impl PartialEq for View<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.table, other.table) && self.rows == other.rows
    }
}

impl<'t> View<'t> {
    /// Builds a view from arbitrary indices: out-of-range ones are rejected,
    /// the rest are sorted and deduplicated.
    pub fn new(table: &'t Table, mut rows: Vec<usize>) -> Option<Self> {
        if rows.iter().any(|&r| r >= table.num_rows()) {
            return None;
        }
        rows.sort_unstable();
        rows.dedup();
        Some(View { table, rows })
    }

    /// Keeps the rows for which `keep` holds, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(usize) -> bool) -> View<'t> {
        View {
            table: self.table,
            rows: self.rows.iter().copied().filter(|&r| keep(r)).collect(),
        }
    }

    pub(crate) fn single(table: &'t Table, row: usize) -> Self {
        View { table, rows: vec![row] }
    }

    pub fn table(&self) -> &'t Table {
        self.table
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column<'a>(&'a self, column: usize) -> impl Iterator<Item = (usize, &'t CellValue)> + 'a {
        let table = self.table;
        self.rows.iter().map(move |&r| (r, table.cell(r, column)))
    }
}

/// A table plus its optional column sets and reference statements.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub table: Table,
    pub selected_column_sets: Vec<Vec<usize>>,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Json,
    Csv,
}

impl CorpusFormat {
    /// `.csv` files are CSV; everything else is read as JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Json,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed { path: String, line: usize, message: String },
    #[error("cannot write corpus: {0}")]
    Write(#[from] std::io::Error),
}

/// An entry that was dropped during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedEntry {
    pub line: usize,
    pub table_id: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub entries: Vec<CorpusEntry>,
    pub skipped: Vec<SkippedEntry>,
}

/// On-disk corpus record, one per JSON line.
#[derive(Debug, Serialize, Deserialize)]
struct CorpusRecord {
    table_id: String,
    #[serde(default)]
    title: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    selected_columns: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    references: Vec<String>,
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<LoadedCorpus, IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    match format {
        CorpusFormat::Json => {
            let file = fs::File::open(path).map_err(io_err)?;
            read_json_corpus(BufReader::new(file), &path.display().to_string())
        }
        CorpusFormat::Csv => {
            let bytes = fs::read(path).map_err(io_err)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table").to_string();
            read_csv_table(&bytes, &stem, &path.display().to_string())
        }
    }
}

/// Loads a single table: a CSV file, a JSON object (possibly spanning
/// several lines), or the first valid entry of a JSON-lines corpus.
pub fn load_table(path: &Path) -> Result<Table, IngestError> {
    let name = path.display().to_string();
    let loaded = match CorpusFormat::from_path(path) {
        CorpusFormat::Csv => load_corpus(path, CorpusFormat::Csv)?,
        CorpusFormat::Json => {
            let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
                path: name.clone(),
                source,
            })?;
            match serde_json::from_str::<serde_json::Value>(&text) {
                Ok(v @ serde_json::Value::Object(_)) => read_json_corpus(v.to_string().as_bytes(), &name)?,
                _ => read_json_corpus(text.as_bytes(), &name)?,
            }
        }
    };
    if let Some(entry) = loaded.entries.into_iter().next() {
        return Ok(entry.table);
    }
    let message = match loaded.skipped.first() {
        Some(s) => format!("invalid table {:?}: {}", s.table_id, s.reason),
        None => "no table found".to_string(),
    };
    Err(IngestError::Malformed {
        path: name,
        line: loaded.skipped.first().map_or(0, |s| s.line),
        message,
    })
}

/// Reads a JSON-lines corpus. Malformed lines abort; structurally invalid
/// tables are skipped with a warning.
pub fn read_json_corpus(reader: impl BufRead, source_name: &str) -> Result<LoadedCorpus, IngestError> {
    let mut corpus = LoadedCorpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: source_name.to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            path: source_name.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        let table_id = record.table_id.clone();
        match entry_from_record(record) {
            Ok(entry) => corpus.entries.push(entry),
            Err(reason) => {
                log::warn!("{source_name}: line {line_no}: skipping table {table_id:?}: {reason}");
                corpus.skipped.push(SkippedEntry {
                    line: line_no,
                    table_id,
                    reason,
                });
            }
        }
    }
    Ok(corpus)
}

fn entry_from_record(record: CorpusRecord) -> Result<CorpusEntry, String> {
    let table =
        Table::from_raw(record.table_id, record.title, &record.header, &record.rows).map_err(|e| e.to_string())?;
    let mut selected_column_sets = Vec::with_capacity(record.selected_columns.len());
    for set in record.selected_columns {
        let mut set = set;
        set.sort_unstable();
        set.dedup();
        if set.is_empty() {
            return Err("empty column set".to_string());
        }
        if let Some(bad) = set.iter().find(|&&c| c >= table.num_columns()) {
            return Err(format!("column index {bad} out of bounds"));
        }
        selected_column_sets.push(set);
    }
    Ok(CorpusEntry {
        table,
        selected_column_sets,
        references: record.references,
    })
}

fn read_csv_table(bytes: &[u8], stem: &str, source_name: &str) -> Result<LoadedCorpus, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::Malformed {
            path: source_name.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let mut corpus = LoadedCorpus::default();
    let Some((header, rows)) = records.split_first() else {
        return Ok(corpus);
    };
    match Table::from_raw(stem, stem, header, rows) {
        Ok(table) => corpus.entries.push(CorpusEntry {
            table,
            selected_column_sets: Vec::new(),
            references: Vec::new(),
        }),
        Err(e) => {
            log::warn!("{source_name}: skipping table: {e}");
            corpus.skipped.push(SkippedEntry {
                line: 1,
                table_id: stem.to_string(),
                reason: e.to_string(),
            });
        }
    }
    Ok(corpus)
}

/// Writes entries in the JSON-lines corpus format.
pub fn write_json_corpus(entries: &[CorpusEntry], mut out: impl Write) -> Result<(), IngestError> {
    for entry in entries {
        let t = &entry.table;
        let record = CorpusRecord {
            table_id: t.table_id.clone(),
            title: t.title.clone(),
            header: t.headers.clone(),
            rows: t
                .rows
                .iter()
                .map(|r| r.iter().map(|c| c.text().to_string()).collect())
                .collect(),
            selected_columns: entry.selected_column_sets.clone(),
            references: entry.references.clone(),
        };
        let line = serde_json::to_string(&record).map_err(std::io::Error::from)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
