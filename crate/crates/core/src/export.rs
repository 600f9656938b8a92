//! Plain CSV tables with `#` comment lines above the header row.

use std::fmt::Display;
use std::io::{self, Write};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsvTable {
    comments: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            comments: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Adds a `# ...` line; comments print in insertion order.
    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    /// Inserts a comment line ahead of existing ones.
    pub fn prepend_comment(&mut self, line: impl Into<String>) {
        self.comments.insert(0, line.into());
    }

    /// `# op=<name> k1=v1 k2=v2 ...`
    pub fn operation(self, name: &str, params: &[(&str, String)]) -> Self {
        let mut line = format!("op={name}");
        for (k, v) in params {
            line.push_str(&format!(" {k}={v}"));
        }
        self.comment(line)
    }

    pub fn push<T: Display>(&mut self, row: impl IntoIterator<Item = T>) {
        let row: Vec<String> = row.into_iter().map(|c| quote(&c.to_string())).collect();
        debug_assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for c in &self.comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("utf8")
    }
}

/// Quotes a cell holding a comma, quote or newline.
fn quote(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}
