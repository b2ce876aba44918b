//! Result tables and RFC-4180 CSV serialization with a provenance header.

use std::io::Write;

use crate::error::CliResult;

/// A rectangular result table with named columns and provenance metadata.
#[derive(Clone, Debug)]
pub struct ResultTable {
    /// Column names, optionally carrying a unit suffix like `omega (gamma)`.
    pub columns: Vec<String>,
    /// Row-major cells; `None` marks an explicitly flagged out-of-regime
    /// value (serialized as an empty field).
    pub rows: Vec<Vec<Option<f64>>>,
    /// Provenance key/value pairs written as `# key: value` header lines.
    pub provenance: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new(), provenance: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table must stay rectangular");
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: Vec<f64>) {
        self.push_row(row.into_iter().map(Some).collect());
    }

    pub fn with_provenance(mut self, pairs: &[(String, String)]) -> Self {
        self.provenance = pairs.to_vec();
        self
    }

    /// Serialize to CSV. Provenance lines precede the column header as
    /// `# key: value` comments; fields follow RFC-4180 quoting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.provenance {
            out.push_str(&format!("# {key}: {value}\n"));
        }
        out.push_str(
            &self.columns.iter().map(|c| quote_field(c)).collect::<Vec<_>>().join(","),
        );
        out.push_str("\r\n");
        for row in &self.rows {
            let line = row
                .iter()
                .map(|cell| match cell {
                    Some(v) => format_number(*v),
                    None => String::new(),
                })
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&line);
            out.push_str("\r\n");
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> CliResult<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// RFC-4180 quoting: wrap in double quotes when the field contains a comma,
/// quote, or line break; double any embedded quotes.
pub fn quote_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') || field.contains('\r') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Deterministic shortest-ish float formatting (17 significant digits round-
/// trip, trimmed).
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        let mut s = format!("{v:.17e}");
        // Trim trailing zeros in the mantissa for stable, compact output.
        if let Some(epos) = s.find('e') {
            let (mant, exp) = s.split_at(epos);
            let mant = mant.trim_end_matches('0').trim_end_matches('.');
            s = format!("{mant}{exp}");
        }
        s
    }
}
